//! Constraint systems over the plan variables `π(x, y)`, `(x, y) ∈ supp μ × supp ν`.
//!
//! Coordinates of the joint space are numbered `0..n` for `X_1..X_n` and
//! `n..2n` for `Y_1..Y_n`. Conditional independences `S ⊥_Z W` become the
//! cross-product equations `π(s,w,z)·π(z) = π(s,z)·π(w,z)`; those whose
//! conditioning probabilities are fixed by a marginal are written as linear
//! equations instead.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{is_g_compatible, CausalGraph, ConditionalTable, Dag, DiscreteMeasure};
use crate::scalar::{format_rational, rational_to_f64, Rational};
use crate::solver::lp::LinearProgram;

/// Compatibility tolerance used when compiling (exact).
const COMPILE_TOL: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum FamilyKind {
    /// `Σ_y π(x, y) = μ(x)` and `Σ_x π(x, y) = ν(y)`.
    Marginal,
    /// `X_i ⊥_{X_pa_i} (X_{1:i-1}, Y_{1:i-1})`.
    CausalMechanism,
    /// `X_i ⊥_{X_pa_i} Y_pa_i`.
    SourceMechanism,
    /// `Y_i ⊥_{Y_pa_i} X_pa_i`.
    TargetMechanism,
    /// `Y_i ⊥_{X_i, X_pa_i, Y_pa_i} (X_{1:i}, Y_{1:i-1})`.
    ConditionalIndependence,
    /// `(X_i, Y_i) ⊥_{X_pa_i, Y_pa_i} (X_{1:i-1}, Y_{1:i-1})`.
    JointCompatibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquation {
    pub terms: Vec<(usize, Rational)>,
    pub rhs: Rational,
    pub context: String,
    /// For mechanism equations: `π(event) = p·π(given)`.
    pub conditional: Option<ConditionalForm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalForm {
    pub event: Vec<usize>,
    pub given: Vec<usize>,
    pub probability: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintFamily {
    pub kind: FamilyKind,
    /// 1-based vertex, absent for marginals.
    pub vertex: Option<usize>,
    pub equations: Vec<LinearEquation>,
}

/// `L1·L2 = L3·L4` where each `L` is a sum of plan variables:
/// `π(s,w,z)·π(z) = π(s,z)·π(w,z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilinearEquation {
    pub swz: Vec<usize>,
    pub z: Vec<usize>,
    pub sz: Vec<usize>,
    pub wz: Vec<usize>,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilinearConstraintFamily {
    pub kind: FamilyKind,
    pub vertex: usize,
    /// Joint coordinates (`X_i = i - 1`, `Y_i = n + i - 1`).
    pub s: Vec<usize>,
    pub w: Vec<usize>,
    pub z: Vec<usize>,
    pub equations: Vec<BilinearEquation>,
}

/// Index of plan variables with per-coordinate lookups.
pub(crate) struct Variables<'a> {
    pub mu: &'a DiscreteMeasure,
    pub nu: &'a DiscreteMeasure,
    n: usize,
    cols: usize,
}

impl<'a> Variables<'a> {
    pub fn new(mu: &'a DiscreteMeasure, nu: &'a DiscreteMeasure) -> Variables<'a> {
        Variables {
            mu,
            nu,
            n: mu.n(),
            cols: nu.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len() * self.cols
    }

    /// Atom of joint coordinate `k` at variable `p`.
    pub fn atom(&self, p: usize, k: usize) -> usize {
        if k < self.n {
            self.mu.support()[p / self.cols].0[k]
        } else {
            self.nu.support()[p % self.cols].0[k - self.n]
        }
    }

    pub fn key(&self, p: usize, coords: &[usize]) -> Vec<usize> {
        coords.iter().map(|&k| self.atom(p, k)).collect()
    }

    pub fn group(&self, coords: &[usize]) -> BTreeMap<Vec<usize>, Vec<usize>> {
        let mut g: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for p in 0..self.len() {
            g.entry(self.key(p, coords)).or_default().push(p);
        }
        g
    }

    pub fn describe(&self, coords: &[usize], key: &[usize]) -> String {
        let parts: Vec<String> = coords
            .iter()
            .zip(key)
            .map(|(&k, &a)| {
                if k < self.n {
                    format!("X{}={}", k + 1, self.mu.space(k).atoms()[a])
                } else {
                    format!("Y{}={}", k - self.n + 1, self.nu.space(k - self.n).atoms()[a])
                }
            })
            .collect();
        parts.join(",")
    }
}

/// Row and column sums of the plan.
pub fn compile_marginals(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> LinearConstraintFamily {
    let (r, c) = (mu.len(), nu.len());
    let mut equations = Vec::with_capacity(r + c);
    for (i, (t, w)) in mu.support().iter().enumerate() {
        equations.push(LinearEquation {
            terms: (0..c).map(|j| (i * c + j, Rational::one())).collect(),
            rhs: w.clone(),
            context: format!("mu({})", mu.atom_names(t).join(",")),
            conditional: None,
        });
    }
    for (j, (t, w)) in nu.support().iter().enumerate() {
        equations.push(LinearEquation {
            terms: (0..r).map(|i| (i * c + j, Rational::one())).collect(),
            rhs: w.clone(),
            context: format!("nu({})", nu.atom_names(t).join(",")),
            conditional: None,
        });
    }
    LinearConstraintFamily {
        kind: FamilyKind::Marginal,
        vertex: None,
        equations,
    }
}

/// `T ⊥_{pa} target` where the conditional law of `target` (a coordinate of
/// the side whose marginal is fixed) given `pa` is `table`:
/// `π(target, pa, t) = table(target | pa)·π(pa, t)`.
fn mechanism_family(
    vars: &Variables,
    kind: FamilyKind,
    vertex: usize,
    target: usize,
    pa: &[usize],
    others: &[usize],
    table: &ConditionalTable,
) -> LinearConstraintFamily {
    let mut cond: Vec<usize> = pa.to_vec();
    cond.extend_from_slice(others);
    let mut full = cond.clone();
    full.push(target);
    let by_cond = vars.group(&cond);
    let by_full = vars.group(&full);
    let mut equations = Vec::new();
    for (key, members) in &by_cond {
        let pa_key = &key[..pa.len()];
        let Some(row) = table.row(pa_key) else {
            continue;
        };
        for (a, prob) in row.iter().enumerate() {
            let mut fk = key.clone();
            fk.push(a);
            let hits = by_full.get(&fk);
            if prob.is_zero() && hits.is_none() {
                continue;
            }
            let mut terms: BTreeMap<usize, Rational> = BTreeMap::new();
            for &p in hits.into_iter().flatten() {
                *terms.entry(p).or_insert_with(Rational::zero) += Rational::one();
            }
            for &p in members {
                *terms.entry(p).or_insert_with(Rational::zero) -= prob;
            }
            let terms: Vec<(usize, Rational)> = terms.into_iter().filter(|(_, v)| !v.is_zero()).collect();
            let context = format!(
                "P({} | {}) = {}",
                vars.describe(&[target], &[a]),
                vars.describe(&cond, key),
                format_rational(prob)
            );
            equations.push(LinearEquation {
                terms,
                rhs: Rational::zero(),
                context,
                conditional: Some(ConditionalForm {
                    event: hits.cloned().unwrap_or_default(),
                    given: members.clone(),
                    probability: prob.clone(),
                }),
            });
        }
    }
    LinearConstraintFamily {
        kind,
        vertex: Some(vertex + 1),
        equations,
    }
}

/// Cross-product equations of `S ⊥_Z W`.
fn ci_family(vars: &Variables, kind: FamilyKind, vertex: usize, s: Vec<usize>, w: Vec<usize>, z: Vec<usize>) -> BilinearConstraintFamily {
    let cat = |a: &[usize], b: &[usize]| -> Vec<usize> { a.iter().chain(b).copied().collect() };
    let g_z = vars.group(&z);
    let g_sz = vars.group(&cat(&s, &z));
    let g_wz = vars.group(&cat(&w, &z));
    let g_swz = vars.group(&cat(&cat(&s, &w), &z));
    let mut s_of: BTreeMap<&[usize], Vec<&[usize]>> = BTreeMap::new();
    for k in g_sz.keys() {
        s_of.entry(&k[s.len()..]).or_default().push(&k[..s.len()]);
    }
    let mut w_of: BTreeMap<&[usize], Vec<&[usize]>> = BTreeMap::new();
    for k in g_wz.keys() {
        w_of.entry(&k[w.len()..]).or_default().push(&k[..w.len()]);
    }
    let empty = Vec::new();
    let mut equations = Vec::new();
    for (zk, zvars) in &g_z {
        let (Some(ss), Some(ws)) = (s_of.get(zk.as_slice()), w_of.get(zk.as_slice())) else {
            continue;
        };
        for sk in ss {
            for wk in ws {
                let swz_key = cat(&cat(sk, wk), zk);
                equations.push(BilinearEquation {
                    swz: g_swz.get(&swz_key).unwrap_or(&empty).clone(),
                    z: zvars.clone(),
                    sz: g_sz[&cat(sk, zk)].clone(),
                    wz: g_wz[&cat(wk, zk)].clone(),
                    context: format!(
                        "{} | {} ; {}",
                        vars.describe(&s, sk),
                        vars.describe(&w, wk),
                        vars.describe(&z, zk)
                    ),
                });
            }
        }
    }
    BilinearConstraintFamily {
        kind,
        vertex: vertex + 1,
        s,
        w,
        z,
        equations,
    }
}

/// Families of the one-sided characterization; marginals excluded.
/// The source `mu` must be compatible with the graph.
pub fn compile_causal(
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(Vec<LinearConstraintFamily>, Vec<BilinearConstraintFamily>)> {
    let Some(dag) = graph.dag() else {
        return Ok((Vec::new(), Vec::new()));
    };
    if let Some(w) = is_g_compatible(mu, graph, COMPILE_TOL).witness {
        return Err(Error::MuNotCompatible { vertex: w.vertex });
    }
    Ok(compile_causal_unchecked(dag, mu, nu))
}

pub(crate) fn compile_causal_unchecked(
    dag: &Dag,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> (Vec<LinearConstraintFamily>, Vec<BilinearConstraintFamily>) {
    let n = dag.n();
    let vars = Variables::new(mu, nu);
    let mut linear = Vec::new();
    let mut bilinear = Vec::new();
    for &v in dag.order().iter().skip(1) {
        let pa = dag.parents(v);
        let prefix = dag.predecessors(v);
        let x_rest: Vec<usize> = prefix.iter().copied().filter(|u| !pa.contains(u)).collect();
        let mut others = x_rest.clone();
        others.extend(prefix.iter().map(|&u| n + u));
        let table = ConditionalTable::of(mu, v, pa);
        linear.push(mechanism_family(&vars, FamilyKind::CausalMechanism, v, v, pa, &others, &table));
        if !x_rest.is_empty() {
            push_causal_ci(&vars, &mut bilinear, dag, v, n);
        }
    }
    (linear, bilinear)
}

fn push_causal_ci(vars: &Variables, out: &mut Vec<BilinearConstraintFamily>, dag: &Dag, v: usize, n: usize) {
    let pa = dag.parents(v);
    let prefix = dag.predecessors(v);
    let mut z = vec![v];
    z.extend_from_slice(pa);
    z.extend(pa.iter().map(|&u| n + u));
    let mut w: Vec<usize> = prefix.iter().copied().filter(|u| !pa.contains(u)).collect();
    w.extend(prefix.iter().filter(|u| !pa.contains(u)).map(|&u| n + u));
    out.push(ci_family(vars, FamilyKind::ConditionalIndependence, v, vec![n + v], w, z));
}

/// Families of the bicausal characterization; marginals excluded.
/// Both marginals must be compatible with the graph.
pub fn compile_bicausal(
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(Vec<LinearConstraintFamily>, Vec<BilinearConstraintFamily>)> {
    let Some(dag) = graph.dag() else {
        return Ok((Vec::new(), Vec::new()));
    };
    check_both(graph, mu, nu)?;
    Ok(compile_bicausal_unchecked(dag, mu, nu))
}

pub(crate) fn check_both(graph: &CausalGraph, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if let Some(w) = is_g_compatible(mu, graph, COMPILE_TOL).witness {
        return Err(Error::MarginalNotCompatible {
            which: "source",
            vertex: w.vertex,
        });
    }
    if let Some(w) = is_g_compatible(nu, graph, COMPILE_TOL).witness {
        return Err(Error::MarginalNotCompatible {
            which: "target",
            vertex: w.vertex,
        });
    }
    Ok(())
}

pub(crate) fn compile_bicausal_unchecked(
    dag: &Dag,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> (Vec<LinearConstraintFamily>, Vec<BilinearConstraintFamily>) {
    let n = dag.n();
    let vars = Variables::new(mu, nu);
    let mut linear = Vec::new();
    let mut bilinear = Vec::new();
    for &v in dag.order().iter().skip(1) {
        let pa = dag.parents(v);
        let prefix = dag.predecessors(v);
        let rest: Vec<usize> = prefix.iter().copied().filter(|u| !pa.contains(u)).collect();
        if !rest.is_empty() {
            let mut z: Vec<usize> = pa.to_vec();
            z.extend(pa.iter().map(|&u| n + u));
            let mut w = rest.clone();
            w.extend(rest.iter().map(|&u| n + u));
            bilinear.push(ci_family(&vars, FamilyKind::JointCompatibility, v, vec![v, n + v], w, z));
        }
        if !pa.is_empty() {
            let y_pa: Vec<usize> = pa.iter().map(|&u| n + u).collect();
            let table = ConditionalTable::of(mu, v, pa);
            linear.push(mechanism_family(&vars, FamilyKind::SourceMechanism, v, v, pa, &y_pa, &table));
            let table = ConditionalTable::of(nu, v, pa);
            linear.push(mechanism_family(&vars, FamilyKind::TargetMechanism, v, n + v, &y_pa, pa, &table));
        }
    }
    (linear, bilinear)
}

/// Compiled problem: marginals, further linear families, bilinear families and
/// the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProgram {
    pub num_vars: usize,
    pub var_names: Vec<String>,
    pub objective: Vec<f64>,
    pub marginals: LinearConstraintFamily,
    pub linear: Vec<LinearConstraintFamily>,
    pub bilinear: Vec<BilinearConstraintFamily>,
}

impl CouplingProgram {
    pub fn new(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        objective: Vec<f64>,
        (linear, bilinear): (Vec<LinearConstraintFamily>, Vec<BilinearConstraintFamily>),
    ) -> CouplingProgram {
        let var_names = mu
            .support()
            .iter()
            .flat_map(|(x, _)| {
                nu.support().iter().map(move |(y, _)| {
                    format!("pi({};{})", mu.atom_names(x).join(","), nu.atom_names(y).join(","))
                })
            })
            .collect();
        CouplingProgram {
            num_vars: mu.len() * nu.len(),
            var_names,
            objective,
            marginals: compile_marginals(mu, nu),
            linear,
            bilinear,
        }
    }

    /// The linear part as an LP (bilinear families dropped).
    pub fn linear_relaxation(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.objective.clone());
        lp.names = (0..self.num_vars).map(|k| format!("v{k}")).collect();
        for fam in std::iter::once(&self.marginals).chain(&self.linear) {
            for eq in &fam.equations {
                lp.add_row(eq.terms.clone(), eq.rhs.clone());
            }
        }
        lp
    }

    /// LP-format text for the linear part.
    pub fn to_lp_format(&self) -> String {
        let mut text = String::from("\\ variables:\n");
        for (k, name) in self.var_names.iter().enumerate() {
            text.push_str(&format!("\\ v{k} = {name}\n"));
        }
        text.push_str(&self.linear_relaxation().to_lp_format());
        text
    }

    /// Bilinear families as JSON, variables referenced by index.
    pub fn bilinear_json(&self) -> serde_json::Value {
        serde_json::json!({
            "num_vars": self.num_vars,
            "form": "sum(swz)*sum(z) = sum(sz)*sum(wz)",
            "families": self.bilinear,
        })
    }

    pub fn bilinear_count(&self) -> usize {
        self.bilinear.iter().map(|f| f.equations.len()).sum()
    }
}

/// Evaluates a sum of variables.
pub(crate) fn sum_of(weights: &[Rational], vars: &[usize]) -> Rational {
    vars.iter().map(|&p| weights[p].clone()).sum()
}

pub(crate) fn linear_residual(weights: &[Rational], eq: &LinearEquation) -> Rational {
    let mut s = -eq.rhs.clone();
    for (p, a) in &eq.terms {
        s += a * &weights[*p];
    }
    num_traits::Signed::abs(&s)
}

/// `|L1·L2 - L3·L4| / max(L1, L2, L3, L4)`, zero when all forms vanish.
pub(crate) fn bilinear_residual(weights: &[Rational], eq: &BilinearEquation) -> (f64, [Rational; 4]) {
    let l = [
        sum_of(weights, &eq.swz),
        sum_of(weights, &eq.z),
        sum_of(weights, &eq.sz),
        sum_of(weights, &eq.wz),
    ];
    let scale = l.iter().max().cloned().unwrap_or_else(Rational::zero);
    if scale.is_zero() {
        return (0.0, l);
    }
    let r = num_traits::Signed::abs(&(&l[0] * &l[1] - &l[2] * &l[3])) / scale;
    (rational_to_f64(&r), l)
}
