//! Optimal transport over `Π_G(μ, ν)`.
//!
//! When the compiled characterization is linear the problem is one LP.
//! Otherwise the LP over the linear families gives a lower bound, and an upper
//! bound comes from the one-sided parametrization
//! `π(x, y) = μ(x) Π_i q_i(y_i | x_i, x_pa_i, y_pa_i)`: with all kernels but
//! one fixed, both the cost and the `ν`-marginal constraint are linear in the
//! free kernel, so each step is an exact LP.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use super::{evaluate, finish, solve_bicausal, solve_standard_ot, Method, SolveOptions, SolveReport, Status};
use super::{BCD_IMPROVEMENT, BCD_MAX_SWEEPS};
use crate::error::{Error, Result};
use crate::metric::{cost_matrix, CostMatrix, GroundCost};
use crate::model::{is_g_compatible, AtomTuple, CausalGraph, Dag, DiscreteMeasure};
use crate::programs::constraints::{check_both, compile_causal_unchecked, CouplingProgram};
use crate::programs::{Coupling, CouplingClass};
use crate::scalar::{rational_to_f64, Arithmetic, Rational};
use crate::solver::lp::{solve_lp_exact, solve_lp_with, LinearProgram};

/// Gap below which the bounds certify optimality.
pub const CAUSAL_GAP: f64 = 1e-9;

fn lp_coupling(
    lp: &LinearProgram,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SolveOptions,
) -> Result<(Coupling, u64)> {
    match opts.arithmetic {
        Arithmetic::Exact => {
            let s = solve_lp_exact(lp)?;
            Ok((Coupling::from_weights(mu, nu, s.x)?, s.iterations as u64))
        }
        Arithmetic::Float => {
            let s = solve_lp_with::<f64>(lp, opts.tol)?;
            Ok((Coupling::from_f64(mu, nu, &s.x)?, s.iterations as u64))
        }
    }
}

pub fn solve_causal(
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &GroundCost,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let Some(dag) = graph.dag() else {
        return solve_standard_ot(mu, nu, cost, opts);
    };
    if let Some(w) = is_g_compatible(mu, graph, 0.0).witness {
        return Err(Error::MuNotCompatible { vertex: w.vertex });
    }
    let c = cost_matrix(cost, mu, nu)?;
    let families = compile_causal_unchecked(dag, mu, nu);
    let program = CouplingProgram::new(mu, nu, c.data.clone(), families);
    let (lb_coupling, lb_iters) = lp_coupling(&program.linear_relaxation(), mu, nu, opts)?;
    if program.bilinear.iter().all(|f| f.equations.is_empty()) {
        return finish(
            graph,
            mu,
            nu,
            &c,
            lb_coupling,
            CouplingClass::Causal,
            Status::GlobalOptimal,
            Method::CausalLp,
            lb_iters,
            opts,
        );
    }
    let lower = evaluate(&lb_coupling, &c, false).0;
    // Start from the bicausal optimum, which needs a compatible target.
    check_both(graph, mu, nu)?;
    let start = solve_bicausal(graph, mu, nu, cost, opts)?;
    let mut state = OneSided::new(dag, mu, nu, &c, &start.coupling);
    let sweeps = state.descend(opts.tol)?;
    let mut ub = state.coupling()?;
    if ub.cost(&c) > start.coupling.cost(&c) {
        ub = start.coupling.clone();
    }
    let value = ub.cost(&c);
    let status = if value - lower <= CAUSAL_GAP {
        Status::GlobalOptimal
    } else {
        Status::LocalUpperBound
    };
    let mut r = finish(
        graph,
        mu,
        nu,
        &c,
        ub,
        CouplingClass::Causal,
        status,
        Method::CausalBounds,
        sweeps + lb_iters,
        opts,
    )?;
    r.lower_bound = Some(lower);
    Ok(r)
}

/// Kernels `q_v(y_v | x_v, x_pa, y_pa)` defined for every `y_pa` in the
/// product of the target's atom sets.
struct OneSided<'a> {
    dag: &'a Dag,
    mu: &'a DiscreteMeasure,
    nu: &'a DiscreteMeasure,
    cost: &'a CostMatrix,
    /// All atom tuples of the target's product space.
    ys: Vec<AtomTuple>,
    /// Column of `ys[k]` in the cost matrix, if in `supp ν`.
    ys_col: Vec<Option<usize>>,
    q: Vec<BTreeMap<AtomTuple, Vec<f64>>>,
}

impl<'a> OneSided<'a> {
    fn new(dag: &'a Dag, mu: &'a DiscreteMeasure, nu: &'a DiscreteMeasure, cost: &'a CostMatrix, pi: &Coupling) -> Self {
        let n = dag.n();
        let mut ys: Vec<AtomTuple> = vec![Vec::new()];
        for i in 0..n {
            ys = ys
                .into_iter()
                .flat_map(|t| {
                    (0..nu.space(i).len()).map(move |a| {
                        let mut t = t.clone();
                        t.push(a);
                        t
                    })
                })
                .collect();
        }
        let ys_col = ys.iter().map(|y| nu.index_of(y)).collect();
        let mut s = OneSided {
            dag,
            mu,
            nu,
            cost,
            ys,
            ys_col,
            q: vec![BTreeMap::new(); n],
        };
        // Conditionals of the starting plan.
        let mut joint: Vec<BTreeMap<AtomTuple, Vec<f64>>> = vec![BTreeMap::new(); n];
        for (i, j, w) in pi.support() {
            let (x, y) = (&pi.mu_support[i], &pi.nu_support[j]);
            let w = rational_to_f64(w);
            for v in 0..n {
                let row = joint[v]
                    .entry(s.context(v, x, y))
                    .or_insert_with(|| vec![0.0; nu.space(v).len()]);
                row[y[v]] += w;
            }
        }
        for (v, rows) in joint.into_iter().enumerate() {
            for (key, row) in rows {
                let total: f64 = row.iter().sum();
                s.q[v].insert(key, row.iter().map(|x| x / total).collect());
            }
        }
        s
    }

    fn context(&self, v: usize, x: &[usize], y: &[usize]) -> AtomTuple {
        let pa = self.dag.parents(v);
        let mut t = Vec::with_capacity(1 + 2 * pa.len());
        t.push(x[v]);
        t.extend(pa.iter().map(|&u| x[u]));
        t.extend(pa.iter().map(|&u| y[u]));
        t
    }

    /// `q_v(y_v | ·)`; contexts never reached default to the first atom.
    fn prob(&self, v: usize, key: &AtomTuple, a: usize) -> f64 {
        match self.q[v].get(key) {
            Some(row) => row[a],
            None => {
                if a == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Weight of `(x, y)` with the factor of `skip` left out.
    fn weight(&self, x: &[usize], mass: f64, y: &[usize], skip: Option<usize>) -> f64 {
        let mut w = mass;
        for &v in self.dag.order() {
            if Some(v) == skip {
                continue;
            }
            w *= self.prob(v, &self.context(v, x, y), y[v]);
            if w == 0.0 {
                break;
            }
        }
        w
    }

    fn objective(&self) -> f64 {
        let mut total = 0.0;
        for (ix, (x, m)) in self.mu.support().iter().enumerate() {
            let m = rational_to_f64(m);
            for (k, y) in self.ys.iter().enumerate() {
                if let Some(iy) = self.ys_col[k] {
                    let w = self.weight(x, m, y, None);
                    total += w * self.cost.get(ix, iy);
                }
            }
        }
        total
    }

    /// One exact LP in the kernel of `v`.
    fn step(&mut self, v: usize, tol: f64) -> Result<()> {
        let width = self.nu.space(v).len();
        let mut tuples: BTreeMap<AtomTuple, usize> = BTreeMap::new();
        let mut objective: BTreeMap<usize, f64> = BTreeMap::new();
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.ys.len()];
        for (ix, (x, m)) in self.mu.support().iter().enumerate() {
            let m = rational_to_f64(m);
            for (k, y) in self.ys.iter().enumerate() {
                let a = self.weight(x, m, y, Some(v));
                if a == 0.0 {
                    continue;
                }
                let key = self.context(v, x, y);
                let next = tuples.len();
                let t = *tuples.entry(key).or_insert(next);
                let var = t * width + y[v];
                *rows[k].entry(var).or_insert(0.0) += a;
                if let Some(iy) = self.ys_col[k] {
                    *objective.entry(var).or_insert(0.0) += a * self.cost.get(ix, iy);
                }
            }
        }
        if tuples.is_empty() {
            return Ok(());
        }
        let nvars = tuples.len() * width;
        let mut obj = vec![0.0; nvars];
        for (var, cst) in objective {
            obj[var] = cst;
        }
        let mut lp = LinearProgram::new(obj);
        for t in 0..tuples.len() {
            lp.add_row((0..width).map(|a| (t * width + a, Rational::one())).collect(), Rational::one());
        }
        for (k, row) in rows.iter().enumerate() {
            let target = self.ys_col[k]
                .map(|iy| self.nu.support()[iy].1.clone())
                .unwrap_or_else(Rational::zero);
            if row.is_empty() && target.is_zero() {
                continue;
            }
            let terms = row
                .iter()
                .map(|(&var, &a)| (var, Rational::from_float(a).unwrap_or_else(Rational::zero)))
                .collect();
            lp.add_row(terms, target);
        }
        let before = self.objective();
        let saved = self.q[v].clone();
        let Ok(sol) = solve_lp_with::<f64>(&lp, tol) else {
            return Ok(());
        };
        for (key, t) in &tuples {
            let row: Vec<f64> = (0..width).map(|a| sol.x[t * width + a].max(0.0)).collect();
            let s: f64 = row.iter().sum();
            self.q[v].insert(key.clone(), row.iter().map(|x| x / s).collect());
        }
        if self.objective() > before + 1e-12 || self.marginal_error() > 1e-9 {
            self.q[v] = saved;
        }
        Ok(())
    }

    fn marginal_error(&self) -> f64 {
        let mut out = vec![0.0; self.ys.len()];
        for (x, m) in self.mu.support() {
            let m = rational_to_f64(m);
            for (k, y) in self.ys.iter().enumerate() {
                out[k] += self.weight(x, m, y, None);
            }
        }
        out.iter()
            .enumerate()
            .map(|(k, w)| {
                let t = self.ys_col[k].map_or(0.0, |iy| rational_to_f64(&self.nu.support()[iy].1));
                (w - t).abs()
            })
            .fold(0.0, f64::max)
    }

    fn descend(&mut self, tol: f64) -> Result<u64> {
        let mut value = self.objective();
        let mut sweeps = 0;
        while sweeps < BCD_MAX_SWEEPS as u64 {
            sweeps += 1;
            for &v in self.dag.order() {
                self.step(v, tol)?;
            }
            let next = self.objective();
            let gain = value - next;
            value = value.min(next);
            if gain <= BCD_IMPROVEMENT {
                break;
            }
        }
        Ok(sweeps)
    }

    fn coupling(&self) -> Result<Coupling> {
        let mut w = vec![0.0; self.mu.len() * self.nu.len()];
        let cols = self.nu.len();
        for (ix, (x, m)) in self.mu.support().iter().enumerate() {
            let m = rational_to_f64(m);
            for (iy, (y, _)) in self.nu.support().iter().enumerate() {
                w[ix * cols + iy] = self.weight(x, m, y, None);
            }
        }
        Coupling::from_f64(self.mu, self.nu, &w)
    }
}
