//! Displacement interpolation of couplings, injectivity exceptions, and the
//! Markov interpolation examples.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixtures::{example_412, example_413, squared_euclidean};
use crate::metric::GroundCost;
use crate::model::{is_g_compatible, CausalGraph, CoordinateSpace, Dag, DiscreteMeasure};
use crate::programs::{check_membership, Coupling, CouplingClass, MembershipReport, MEMBERSHIP_TOL};
use crate::scalar::{format_rational, int, rational_to_f64, Rational};
use crate::solver::{SolveOptions, Status};
use crate::wasserstein::{g_wasserstein_p, wasserstein_p};

/// Grid values within this distance of a fraction with denominator at most
/// [`SNAP_DENOMINATOR`] are replaced by that fraction.
pub const SNAP_TOL: f64 = 1e-9;
pub const SNAP_DENOMINATOR: i64 = 1000;

/// Rational λ for a float grid value.
pub fn snap_lambda(lambda: f64) -> Rational {
    for d in 1..=SNAP_DENOMINATOR {
        let n = (lambda * d as f64).round();
        if (n / d as f64 - lambda).abs() <= SNAP_TOL {
            return Rational::new((n as i64).into(), d.into());
        }
    }
    Rational::from_float(lambda).expect("finite lambda")
}

/// Embedded points of every coordinate for a support tuple.
fn embed(m: &DiscreteMeasure, t: &[usize]) -> Result<Vec<Vec<Rational>>> {
    t.iter()
        .enumerate()
        .map(|(i, &a)| m.space(i).point(a).map(|p| p.to_vec()).ok_or(Error::NoEmbedding(i + 1)))
        .collect()
}

fn check_dims(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.n() != nu.n() {
        return Err(Error::ShapeMismatch("marginals have different numbers of coordinates".into()));
    }
    for i in 0..mu.n() {
        let a = mu.space(i).dimension().ok_or(Error::NoEmbedding(i + 1))?;
        let b = nu.space(i).dimension().ok_or(Error::NoEmbedding(i + 1))?;
        if a != b {
            return Err(Error::ShapeMismatch(format!("embedding dimensions differ on coordinate {}", i + 1)));
        }
    }
    Ok(())
}

fn point_name(p: &[Rational]) -> String {
    if p.len() == 1 {
        format_rational(&p[0])
    } else {
        let parts: Vec<String> = p.iter().map(format_rational).collect();
        format!("({})", parts.join(", "))
    }
}

/// Law of `(1 - λ)X + λY` under `π`; coinciding points merge.
pub fn displacement(pi: &Coupling, mu: &DiscreteMeasure, nu: &DiscreteMeasure, lambda: &Rational) -> Result<DiscreteMeasure> {
    check_dims(mu, nu)?;
    if !pi.matches(mu, nu) {
        return Err(Error::ShapeMismatch("coupling supports differ from the marginals".into()));
    }
    let n = mu.n();
    let keep = Rational::one() - lambda;
    let mut points: Vec<(Vec<Vec<Rational>>, Rational)> = Vec::new();
    for (x, y, w) in pi.entries() {
        if w.is_zero() {
            continue;
        }
        let px = embed(mu, x)?;
        let py = embed(nu, y)?;
        let z = px
            .iter()
            .zip(&py)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| &keep * u + lambda * v).collect())
            .collect();
        points.push((z, w.clone()));
    }
    let mut atoms: Vec<Vec<Vec<Rational>>> = vec![Vec::new(); n];
    for (z, _) in &points {
        for i in 0..n {
            atoms[i].push(z[i].clone());
        }
    }
    for a in &mut atoms {
        a.sort();
        a.dedup();
    }
    let spaces = atoms
        .iter()
        .enumerate()
        .map(|(i, pts)| {
            CoordinateSpace::new(mu.space(i).name(), pts.iter().map(|p| point_name(p)).collect(), Some(pts.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let entries = points
        .into_iter()
        .map(|(z, w)| {
            let t = z
                .iter()
                .enumerate()
                .map(|(i, p)| atoms[i].binary_search(p).expect("collected"))
                .collect();
            (t, w)
        })
        .collect();
    DiscreteMeasure::new(spaces, entries)
}

/// λ values in `[0, 1]` at which two support points of `π` with distinct
/// parent pairs `(x_pa, y_pa)` collide on some vertex's parents.
pub fn exception_lambdas(pi: &Coupling, mu: &DiscreteMeasure, nu: &DiscreteMeasure, dag: &Dag) -> Result<Vec<Rational>> {
    check_dims(mu, nu)?;
    let entries: Vec<(Vec<Vec<Rational>>, Vec<Vec<Rational>>)> = pi
        .entries()
        .into_iter()
        .filter(|(_, _, w)| !w.is_zero())
        .map(|(x, y, _)| Ok((embed(mu, x)?, embed(nu, y)?)))
        .collect::<Result<_>>()?;
    let flat = |pts: &[Vec<Rational>], pa: &[usize]| -> Vec<Rational> {
        pa.iter().flat_map(|&p| pts[p].iter().cloned()).collect()
    };
    let mut out = Vec::new();
    for v in 0..dag.n() {
        let pa = dag.parents(v);
        if pa.is_empty() {
            continue;
        }
        let keys: Vec<(Vec<Rational>, Vec<Rational>)> =
            entries.iter().map(|(x, y)| (flat(x, pa), flat(y, pa))).collect();
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                if keys[i] == keys[j] {
                    continue;
                }
                // (1 - λ) a = λ b with a = x_pa - x'_pa, b = y'_pa - y_pa.
                let mut lambda: Option<Rational> = None;
                let mut ok = true;
                for k in 0..keys[i].0.len() {
                    let a = &keys[i].0[k] - &keys[j].0[k];
                    let b = &keys[j].1[k] - &keys[i].1[k];
                    let s = &a + &b;
                    if s.is_zero() {
                        if !a.is_zero() {
                            ok = false;
                            break;
                        }
                        continue;
                    }
                    let l = a / s;
                    match &lambda {
                        Some(prev) if *prev != l => {
                            ok = false;
                            break;
                        }
                        _ => lambda = Some(l),
                    }
                }
                if let (true, Some(l)) = (ok, lambda) {
                    if l >= Rational::zero() && l <= Rational::one() {
                        out.push(l);
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPath {
    pub lambdas: Vec<f64>,
    pub exact_lambdas: Vec<Rational>,
    pub measures: Vec<DiscreteMeasure>,
    pub flags: Vec<bool>,
    pub exceptions: Vec<Rational>,
    pub coupling: Coupling,
    /// Transport cost of `coupling`, when it came from a solver.
    pub value: Option<f64>,
    pub status: Option<Status>,
}

impl InterpolationPath {
    /// Whether every grid point outside the exception set is compatible.
    pub fn outside_exceptions_compatible(&self) -> bool {
        self.exact_lambdas
            .iter()
            .zip(&self.flags)
            .all(|(l, &f)| f || self.exceptions.contains(l))
    }

    pub fn compatible_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn summary(&self) -> PathSummary {
        PathSummary {
            lambdas: self.lambdas.clone(),
            flags: self.flags.clone(),
            exceptions: self.exceptions.iter().map(format_rational).collect(),
            exceptions_f64: self.exceptions.iter().map(rational_to_f64).collect(),
            compatible: self.compatible_count(),
            outside_exceptions_compatible: self.outside_exceptions_compatible(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub lambdas: Vec<f64>,
    pub flags: Vec<bool>,
    pub exceptions: Vec<String>,
    pub exceptions_f64: Vec<f64>,
    pub compatible: usize,
    pub outside_exceptions_compatible: bool,
}

/// Interpolants of a fixed coupling on a grid, flagged against `graph`.
pub fn path_from_coupling(
    pi: &Coupling,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    graph: &CausalGraph,
    grid: &[f64],
) -> Result<InterpolationPath> {
    let exact: Vec<Rational> = grid.iter().map(|&l| snap_lambda(l)).collect();
    if let Some(bad) = grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::ShapeMismatch(format!("lambda {bad} outside [0, 1]")));
    }
    let measures = exact
        .par_iter()
        .map(|l| displacement(pi, mu, nu, l))
        .collect::<Result<Vec<_>>>()?;
    let flags = measures.par_iter().map(|m| is_g_compatible(m, graph, 0.0).compatible).collect();
    let exceptions = match graph.dag() {
        Some(d) => exception_lambdas(pi, mu, nu, d)?,
        None => Vec::new(),
    };
    Ok(InterpolationPath {
        lambdas: grid.to_vec(),
        exact_lambdas: exact,
        measures,
        flags,
        exceptions,
        coupling: pi.clone(),
        value: None,
        status: None,
    })
}

/// Path built from an optimal bicausal coupling for `W_{G,p}`.
pub fn interpolation_path(
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &GroundCost,
    p: f64,
    grid: &[f64],
    opts: &SolveOptions,
) -> Result<InterpolationPath> {
    check_dims(mu, nu)?;
    let r = g_wasserstein_p(graph, mu, nu, cost, p, opts)?;
    let mut path = path_from_coupling(&r.solve.coupling, mu, nu, graph, grid)?;
    path.value = Some(r.solve.value);
    path.status = Some(r.status());
    Ok(path)
}

/// Path built from a standard `W_p` coupling, flagged against `graph`.
pub fn standard_interpolation_path(
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &GroundCost,
    p: f64,
    grid: &[f64],
    opts: &SolveOptions,
) -> Result<InterpolationPath> {
    check_dims(mu, nu)?;
    let r = wasserstein_p(mu, nu, cost, p, opts)?;
    let mut path = path_from_coupling(&r.solve.coupling, mu, nu, graph, grid)?;
    path.value = Some(r.solve.value);
    path.status = Some(r.status());
    Ok(path)
}

/// `k/10` for `k = 0..=10`.
pub fn decile_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryNode {
    pub step: usize,
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryEdge {
    pub step: usize,
    pub from: f64,
    pub to: f64,
    pub weight: f64,
}

/// Node and edge weights of a measure on `ℝ^n`, read as paths over steps `1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryData {
    pub label: String,
    pub lambda: f64,
    pub nodes: Vec<TrajectoryNode>,
    pub edges: Vec<TrajectoryEdge>,
}

fn value_of(m: &DiscreteMeasure, i: usize, a: usize) -> Result<f64> {
    m.space(i).real_value(a).map(rational_to_f64).ok_or(Error::NoEmbedding(i + 1))
}

pub fn trajectory_data(m: &DiscreteMeasure, label: &str, lambda: f64) -> Result<TrajectoryData> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for i in 0..m.n() {
        for (t, w) in m.marginal_weights(&[i]) {
            nodes.push(TrajectoryNode { step: i + 1, value: value_of(m, i, t[0])?, weight: rational_to_f64(&w) });
        }
        if i + 1 < m.n() {
            for (t, w) in m.marginal_weights(&[i, i + 1]) {
                edges.push(TrajectoryEdge {
                    step: i + 1,
                    from: value_of(m, i, t[0])?,
                    to: value_of(m, i + 1, t[1])?,
                    weight: rational_to_f64(&w),
                });
            }
        }
    }
    Ok(TrajectoryData { label: label.into(), lambda, nodes, edges })
}

impl TrajectoryData {
    /// Columns `step, value, weight, lambda`.
    pub fn nodes_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["step", "value", "weight", "lambda"]).map_err(err)?;
        for n in &self.nodes {
            w.write_record([n.step.to_string(), n.value.to_string(), n.weight.to_string(), self.lambda.to_string()])
                .map_err(err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).expect("ascii"))
    }

    /// Columns `step, from, to, weight, lambda`.
    pub fn edges_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["step", "from", "to", "weight", "lambda"]).map_err(err)?;
        for e in &self.edges {
            w.write_record([
                e.step.to_string(),
                e.from.to_string(),
                e.to.to_string(),
                e.weight.to_string(),
                self.lambda.to_string(),
            ])
            .map_err(err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?).expect("ascii"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingReport {
    pub value: f64,
    pub exact_value: Option<String>,
    pub status: Status,
    /// Every coupled pair agrees on the first coordinate.
    pub matches_first_coordinates: bool,
    pub path: PathSummary,
}

/// `π((X3, Y3) = (1, 0) | (X1, Y1) = (x1, 0), (X2, Y2) = (0, 0))` for
/// `x1 = -1` and `x1 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonMarkovPattern {
    pub given_minus: Option<f64>,
    pub given_plus: Option<f64>,
    /// `given_minus < given_plus`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomWalkReport {
    pub w2_squared: f64,
    pub wg2_squared: f64,
    pub standard_membership: MembershipReport,
    pub pattern: NonMarkovPattern,
    pub standard_path: PathSummary,
    pub causal_path: PathSummary,
    pub plots: Vec<TrajectoryData>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExamplesBundle {
    pub three_point: MatchingReport,
    pub random_walks: RandomWalkReport,
}

/// The three-point Markov example on the grid `{0, ¼, ½, ¾, 1}`.
pub fn three_point_example(opts: &SolveOptions) -> Result<(MatchingReport, InterpolationPath)> {
    let (mu, nu) = example_412();
    let graph = CausalGraph::Acyclic(Dag::markov(3));
    let r = g_wasserstein_p(&graph, &mu, &nu, &squared_euclidean(), 2.0, opts)?;
    let pi = &r.solve.coupling;
    let matches = pi.entries().iter().all(|(x, y, w)| {
        w.is_zero() || mu.space(0).real_value(x[0]) == nu.space(0).real_value(y[0])
    });
    let path = path_from_coupling(pi, &mu, &nu, &graph, &[0.0, 0.25, 0.5, 0.75, 1.0])?;
    let report = MatchingReport {
        value: r.solve.value,
        exact_value: r.solve.exact_value.as_ref().map(format_rational),
        status: r.status(),
        matches_first_coordinates: matches,
        path: path.summary(),
    };
    Ok((report, path))
}

fn atom_of(m: &DiscreteMeasure, i: usize, v: i64) -> Option<usize> {
    (0..m.space(i).len()).find(|&a| m.space(i).real_value(a) == Some(&int(v)))
}

fn pattern(pi: &Coupling, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> NonMarkovPattern {
    let cond = |x1: i64| -> Option<f64> {
        let ctx = [atom_of(mu, 0, x1)?, atom_of(nu, 0, 0)?, atom_of(mu, 1, 0)?, atom_of(nu, 1, 0)?];
        let (x3, y3) = (atom_of(mu, 2, 1)?, atom_of(nu, 2, 0)?);
        let mut den = Rational::zero();
        let mut num = Rational::zero();
        for (x, y, w) in pi.entries() {
            if [x[0], y[0], x[1], y[1]] == ctx {
                den += w;
                if x[2] == x3 && y[2] == y3 {
                    num += w;
                }
            }
        }
        (!den.is_zero()).then(|| rational_to_f64(&(num / den)))
    };
    let (a, b) = (cond(-1), cond(1));
    NonMarkovPattern {
        holds: matches!((a, b), (Some(a), Some(b)) if a < b),
        given_minus: a,
        given_plus: b,
    }
}

/// Binomial against trinomial random walks under `W_2` and `W_{G,2}`.
pub fn random_walk_example(opts: &SolveOptions) -> Result<(RandomWalkReport, InterpolationPath, InterpolationPath)> {
    let (mu, nu) = example_413();
    let graph = CausalGraph::Acyclic(Dag::markov(3));
    let cost = squared_euclidean();
    let grid = decile_grid();
    let standard = standard_interpolation_path(&graph, &mu, &nu, &cost, 2.0, &grid, opts)?;
    let causal = interpolation_path(&graph, &mu, &nu, &cost, 2.0, &grid, opts)?;
    let membership = check_membership(&standard.coupling, &graph, &mu, &nu, CouplingClass::Bicausal, MEMBERSHIP_TOL)?;
    let third = Rational::new(1.into(), 3.into());
    let kappa = displacement(&causal.coupling, &mu, &nu, &third)?;
    let plots = vec![
        trajectory_data(&mu, "binomial", 0.0)?,
        trajectory_data(&nu, "trinomial", 1.0)?,
        trajectory_data(&kappa, "interpolant", 1.0 / 3.0)?,
    ];
    let report = RandomWalkReport {
        w2_squared: standard.value.unwrap_or(f64::NAN),
        wg2_squared: causal.value.unwrap_or(f64::NAN),
        standard_membership: membership,
        pattern: pattern(&standard.coupling, &mu, &nu),
        standard_path: standard.summary(),
        causal_path: causal.summary(),
        plots,
    };
    Ok((report, standard, causal))
}

pub fn reproduce_examples(opts: &SolveOptions) -> Result<ExamplesBundle> {
    Ok(ExamplesBundle {
        three_point: three_point_example(opts)?.0,
        random_walks: random_walk_example(opts)?.0,
    })
}

/// Weighted atoms of a measure keyed by embedded points (for comparisons).
pub fn point_weights(m: &DiscreteMeasure) -> Result<BTreeMap<Vec<Vec<Rational>>, Rational>> {
    let mut out = BTreeMap::new();
    for (t, w) in m.support() {
        *out.entry(embed(m, t)?).or_insert_with(Rational::zero) += w;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn endpoints_and_generic_lambda() {
        let (mu, nu) = example_412();
        let (report, path) = three_point_example(&SolveOptions::exact()).unwrap();
        assert!(report.matches_first_coordinates);
        let pi = &path.coupling;
        assert_eq!(point_weights(&displacement(pi, &mu, &nu, &int(0)).unwrap()).unwrap(), point_weights(&mu).unwrap());
        assert_eq!(point_weights(&displacement(pi, &mu, &nu, &int(1)).unwrap()).unwrap(), point_weights(&nu).unwrap());
        let l = rat(1, 3);
        let k = displacement(pi, &mu, &nu, &l).unwrap();
        let p = |a: Rational, b: Rational, c: Rational| vec![vec![a], vec![b], vec![c]];
        let expect: BTreeMap<_, _> = [
            (p(int(0), l.clone(), int(0)), rat(1, 2)),
            (p(int(1), int(1) - &l, int(1)), rat(1, 2)),
        ]
        .into_iter()
        .collect();
        assert_eq!(point_weights(&k).unwrap(), expect);
    }

    #[test]
    fn three_point_flags() {
        let (report, path) = three_point_example(&SolveOptions::default()).unwrap();
        assert_eq!(report.path.flags, vec![true, true, false, true, true]);
        assert_eq!(path.exceptions, vec![rat(1, 2)]);
    }

    #[test]
    fn identity_coupling_is_stationary() {
        let (mu, _) = example_412();
        let pi = Coupling::identity(&mu);
        for l in [rat(1, 5), rat(2, 3)] {
            assert!(displacement(&pi, &mu, &mu, &l).unwrap().same_as(&mu, 0.0));
        }
        assert!(exception_lambdas(&pi, &mu, &mu, &Dag::markov(3)).unwrap().is_empty());
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_lambda(0.3), rat(3, 10));
        assert_eq!(snap_lambda(1.0 / 3.0), rat(1, 3));
    }
}
