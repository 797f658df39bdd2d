//! Causal mechanisms `μ(dx_i | x_pa_i)` and G-compatibility.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::dag::{CausalGraph, Dag};
use super::measure::{AtomTuple, DiscreteMeasure};
use crate::scalar::{rational_to_f64, Rational};

/// Conditional distribution of one coordinate given an ordered set of others.
///
/// Rows exist exactly for conditioning tuples with positive marginal mass;
/// each row is a dense probability vector over the target's atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalTable {
    pub target: usize,
    pub conditioning: Vec<usize>,
    pub rows: BTreeMap<AtomTuple, Vec<Rational>>,
}

impl ConditionalTable {
    /// `m(x_target | x_conditioning)` for every conditioning tuple of positive mass.
    pub fn of(m: &DiscreteMeasure, target: usize, conditioning: &[usize]) -> ConditionalTable {
        let mut coords = conditioning.to_vec();
        coords.push(target);
        let joint = m.marginal_weights(&coords);
        let cond = m.marginal_weights(conditioning);
        let width = m.space(target).len();
        let mut rows: BTreeMap<AtomTuple, Vec<Rational>> = cond
            .keys()
            .map(|k| (k.clone(), vec![Rational::zero(); width]))
            .collect();
        for (key, w) in joint {
            let (c, a) = key.split_at(conditioning.len());
            let row = rows.get_mut(c).expect("conditioning tuple has mass");
            row[a[0]] = w / &cond[c];
        }
        ConditionalTable {
            target,
            conditioning: conditioning.to_vec(),
            rows,
        }
    }

    pub fn row(&self, tuple: &[usize]) -> Option<&[Rational]> {
        self.rows.get(tuple).map(|r| r.as_slice())
    }

    /// Atoms with positive probability in a row, and their probabilities.
    pub fn row_support(&self, tuple: &[usize]) -> Option<Vec<(usize, Rational)>> {
        self.row(tuple).map(|r| {
            r.iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .map(|(a, p)| (a, p.clone()))
                .collect()
        })
    }
}

/// The causal mechanism of coordinate `i` (0-based) under `dag`.
pub fn mechanism(m: &DiscreteMeasure, dag: &Dag, i: usize) -> ConditionalTable {
    ConditionalTable::of(m, i, dag.parents(i))
}

/// One violated equation of the factorization `μ = ⊗ μ(dx_i | x_pa_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityWitness {
    /// 1-based vertex.
    pub vertex: usize,
    /// Atom names of the conditioning prefix (coordinates preceding the vertex
    /// in topological order, listed by vertex label).
    pub prefix_vertices: Vec<usize>,
    pub prefix_atoms: Vec<String>,
    pub atom: String,
    /// `μ(x_i | x_prefix)`.
    pub given_prefix: f64,
    /// `μ(x_i | x_pa_i)`.
    pub given_parents: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Compatibility {
    pub compatible: bool,
    pub max_residual: f64,
    pub witness: Option<CompatibilityWitness>,
}

/// Checks `X_i ⊥_{X_pa_i} X_{1:i-1}` for every vertex, in the DAG's topological
/// order. Each equation `μ(x_i | x_prefix) = μ(x_i | x_pa_i)` is evaluated
/// exactly; it fails when its residual exceeds `tol` (use 0 for exact checks).
pub fn is_g_compatible(m: &DiscreteMeasure, graph: &CausalGraph, tol: f64) -> Compatibility {
    match graph {
        CausalGraph::Complete(_) => Compatibility {
            compatible: true,
            max_residual: 0.0,
            witness: None,
        },
        CausalGraph::Acyclic(dag) => check_dag(m, dag, tol),
    }
}

fn check_dag(m: &DiscreteMeasure, dag: &Dag, tol: f64) -> Compatibility {
    let mut max_residual = 0.0f64;
    let mut worst: Option<(Rational, CompatibilityWitness)> = None;
    let tol_r = Rational::from_float(tol.max(0.0)).unwrap_or_else(Rational::zero);
    for &v in dag.order().iter().skip(1) {
        let prefix: Vec<usize> = dag.predecessors(v).to_vec();
        let parents = dag.parents(v);
        if prefix.len() == parents.len() {
            // Parents are a subset of the prefix, so equal length means equal sets.
            continue;
        }
        let by_prefix = ConditionalTable::of(m, v, &prefix);
        let by_parents = ConditionalTable::of(m, v, parents);
        let pa_pos: Vec<usize> = parents
            .iter()
            .map(|p| prefix.iter().position(|q| q == p).expect("parent precedes"))
            .collect();
        for (key, row) in &by_prefix.rows {
            let pa_key: AtomTuple = pa_pos.iter().map(|&k| key[k]).collect();
            let pa_row = by_parents.row(&pa_key).expect("parent tuple has mass");
            for (a, (p, q)) in row.iter().zip(pa_row).enumerate() {
                let r = (p - q).abs();
                if r.is_zero() {
                    continue;
                }
                max_residual = max_residual.max(rational_to_f64(&r));
                if r > tol_r && worst.as_ref().is_none_or(|(w, _)| r > *w) {
                    let witness = CompatibilityWitness {
                        vertex: v + 1,
                        prefix_vertices: prefix.iter().map(|u| u + 1).collect(),
                        prefix_atoms: prefix
                            .iter()
                            .zip(key)
                            .map(|(&u, &x)| m.space(u).atoms()[x].clone())
                            .collect(),
                        atom: m.space(v).atoms()[a].clone(),
                        given_prefix: rational_to_f64(p),
                        given_parents: rational_to_f64(q),
                        residual: rational_to_f64(&r),
                    };
                    worst = Some((r, witness));
                }
            }
        }
    }
    let witness = worst.map(|(_, w)| w);
    Compatibility {
        compatible: witness.is_none(),
        max_residual,
        witness,
    }
}

/// Reconstructs `⊗ μ(dx_i | x_pa_i)` on the product of the coordinates'
/// supports and returns it as a map; used to cross-check compatibility.
pub fn factorized_weights(m: &DiscreteMeasure, dag: &Dag) -> BTreeMap<AtomTuple, Rational> {
    let tables: Vec<ConditionalTable> = (0..m.n()).map(|i| mechanism(m, dag, i)).collect();
    let mut partial: Vec<(AtomTuple, Rational)> =
        vec![(vec![usize::MAX; m.n()], num_traits::One::one())];
    for &v in dag.order() {
        let mut next = Vec::new();
        for (t, w) in &partial {
            let key: AtomTuple = dag.parents(v).iter().map(|&p| t[p]).collect();
            if let Some(row) = tables[v].row(&key) {
                for (a, p) in row.iter().enumerate() {
                    if !p.is_zero() {
                        let mut u = t.clone();
                        u[v] = a;
                        next.push((u, w * p));
                    }
                }
            }
        }
        partial = next;
    }
    partial.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::measure::CoordinateSpace;
    use crate::scalar::{int, rat};

    fn line(values: &[i64]) -> CoordinateSpace {
        CoordinateSpace::real_line("X", &values.iter().map(|&v| int(v)).collect::<Vec<_>>())
    }

    fn markov3() -> CausalGraph {
        CausalGraph::preset("markov", 3).unwrap()
    }

    #[test]
    fn product_is_compatible_everywhere() {
        let a = DiscreteMeasure::uniform(vec![line(&[0, 1])], vec![vec![0], vec![1]]).unwrap();
        let b = DiscreteMeasure::new(vec![line(&[0, 1, 2])], vec![(vec![0], rat(1, 3)), (vec![2], rat(2, 3))])
            .unwrap();
        let p = DiscreteMeasure::product(&[a.clone(), b, a]).unwrap();
        for g in ["empty", "markov", "linear", "full"] {
            assert!(is_g_compatible(&p, &CausalGraph::preset(g, 3).unwrap(), 0.0).compatible);
        }
        let t = mechanism(&p, CausalGraph::preset("markov", 3).unwrap().dag().unwrap(), 1);
        let rows: Vec<_> = t.rows.values().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn sign_flip_measure_is_not_markov() {
        let spaces = vec![line(&[-1, 1]), line(&[0]), line(&[-1, 1])];
        let m = DiscreteMeasure::uniform(spaces, vec![vec![1, 0, 1], vec![0, 0, 0]]).unwrap();
        let c = is_g_compatible(&m, &markov3(), 0.0);
        assert!(!c.compatible);
        assert_eq!(c.witness.unwrap().vertex, 3);
    }

    #[test]
    fn perturbed_middle_coordinate_is_markov() {
        let k = 5;
        let spaces = vec![
            line(&[-1, 1]),
            CoordinateSpace::real_line("X", &[rat(-1, k), rat(1, k)]),
            line(&[-1, 1]),
        ];
        let m = DiscreteMeasure::uniform(spaces, vec![vec![1, 1, 1], vec![0, 0, 0]]).unwrap();
        assert!(is_g_compatible(&m, &markov3(), 0.0).compatible);
    }

    #[test]
    fn factorization_reconstructs_compatible_measures() {
        let spaces = vec![line(&[0, 1]), line(&[0, 1]), line(&[0, 1])];
        let m = DiscreteMeasure::new(
            spaces,
            vec![
                (vec![0, 0, 0], rat(1, 4)),
                (vec![0, 1, 1], rat(1, 4)),
                (vec![1, 1, 0], rat(1, 4)),
                (vec![1, 1, 1], rat(1, 4)),
            ],
        )
        .unwrap();
        let g = markov3();
        let dag = g.dag().unwrap();
        let compatible = is_g_compatible(&m, &g, 0.0).compatible;
        let rebuilt = factorized_weights(&m, dag);
        let original: BTreeMap<_, _> = m.support().iter().cloned().collect();
        assert_eq!(compatible, rebuilt == original);
    }
}
