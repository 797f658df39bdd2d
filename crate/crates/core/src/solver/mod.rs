//! Optimizers over the coupling classes.

pub mod backward;
pub mod bcd;
pub mod causal;
pub mod exhaustive;
pub mod lp;
pub mod transport;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{cost_matrix, CostMatrix, GroundCost};
use crate::model::{CausalGraph, DiscreteMeasure};
use crate::programs::{check_membership, kernel_blocks_with, Coupling, CouplingClass, KernelBlocks};
use crate::scalar::{Arithmetic, Rational, FLOAT_TOL};

pub use backward::{solve_bicausal_recursive, supports_recursion};
pub use bcd::solve_bicausal_bcd;
pub use causal::solve_causal;
pub use exhaustive::solve_bicausal_exhaustive;
pub use lp::{solve_lp, solve_lp_exact, LinearProgram, LpSolution};
pub use transport::{enumerate_vertices, DIMENSION_CAP, VERTEX_CAP};

/// Default cap on kernel-vertex selections visited by the exhaustive oracle.
pub const ENUMERATION_CAP: u64 = 10_000_000;
/// Default number of BCD restarts.
pub const DEFAULT_RESTARTS: usize = 32;
/// BCD stops when a sweep improves the objective by at most this much.
pub const BCD_IMPROVEMENT: f64 = 1e-10;
/// Sweep limit per BCD restart.
pub const BCD_MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    GlobalOptimal,
    LocalUpperBound,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// LP over `Π(μ, ν)`.
    StandardLp,
    /// LP over the linear causal families.
    CausalLp,
    /// Exhaustive kernel-vertex enumeration.
    Exhaustive,
    /// Multi-start block-coordinate descent over kernels.
    BlockCoordinateDescent,
    /// Backward recursion over kernel blocks.
    Recursion,
    /// Per-coordinate transport problems.
    Decomposition,
    /// One-sided kernel descent with an LP lower bound.
    CausalBounds,
}

/// How the bicausal problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BicausalMethod {
    /// Recursion when the structure allows it, else the exhaustive oracle,
    /// falling back to BCD above the enumeration cap.
    #[default]
    Auto,
    Exhaustive,
    Bcd,
    Recursion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    pub arithmetic: Arithmetic,
    pub tol: f64,
    pub max_enum: u64,
    pub restarts: usize,
    pub seed: u64,
    pub bicausal: BicausalMethod,
    pub dim_cap: usize,
    pub vertex_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> SolveOptions {
        SolveOptions {
            arithmetic: Arithmetic::Float,
            tol: FLOAT_TOL,
            max_enum: ENUMERATION_CAP,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            bicausal: BicausalMethod::Auto,
            dim_cap: DIMENSION_CAP,
            vertex_cap: VERTEX_CAP,
        }
    }
}

impl SolveOptions {
    pub fn exact() -> SolveOptions {
        SolveOptions {
            arithmetic: Arithmetic::Exact,
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Optimal (or bounding) transport cost `∫ c dπ`.
    pub value: f64,
    /// The cost as a rational, in exact mode.
    pub exact_value: Option<Rational>,
    pub coupling: Coupling,
    pub class: CouplingClass,
    pub status: Status,
    pub method: Method,
    pub iterations: u64,
    /// Largest membership residual of `coupling` for `class`.
    pub residual: f64,
    pub seed: Option<u64>,
    pub lower_bound: Option<f64>,
}

/// Cost of a coupling, float and (optionally) exact.
pub(crate) fn evaluate(pi: &Coupling, c: &CostMatrix, exact: bool) -> (f64, Option<Rational>) {
    let value = pi.cost(c);
    if !exact {
        return (value, None);
    }
    let mut s = Rational::zero();
    for (k, w) in pi.weights().iter().enumerate() {
        if !w.is_zero() {
            s += w * Rational::from_float(c.data[k]).unwrap_or_else(Rational::zero);
        }
    }
    (value, Some(s))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    c: &CostMatrix,
    coupling: Coupling,
    class: CouplingClass,
    status: Status,
    method: Method,
    iterations: u64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let (value, exact_value) = evaluate(&coupling, c, opts.arithmetic == Arithmetic::Exact);
    let residual = check_membership(&coupling, graph, mu, nu, class, f64::INFINITY)?.max_residual;
    Ok(SolveReport {
        value,
        exact_value,
        coupling,
        class,
        status,
        method,
        iterations,
        residual,
        seed: None,
        lower_bound: None,
    })
}

/// The transportation LP over `Π(μ, ν)`.
pub fn solve_standard_ot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &GroundCost,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let c = cost_matrix(cost, mu, nu)?;
    let mu_w: Vec<Rational> = mu.support().iter().map(|(_, w)| w.clone()).collect();
    let nu_w: Vec<Rational> = nu.support().iter().map(|(_, w)| w.clone()).collect();
    let lp = lp::transport_lp(&mu_w, &nu_w, &c.data);
    let (coupling, iterations) = match opts.arithmetic {
        Arithmetic::Exact => {
            let s = solve_lp_exact(&lp)?;
            (Coupling::from_weights(mu, nu, s.x)?, s.iterations)
        }
        Arithmetic::Float => {
            let s = lp::solve_lp_with::<f64>(&lp, opts.tol)?;
            (Coupling::from_f64(mu, nu, &s.x)?, s.iterations)
        }
    };
    let graph = CausalGraph::Complete(mu.n());
    finish(
        &graph,
        mu,
        nu,
        &c,
        coupling,
        CouplingClass::Any,
        Status::GlobalOptimal,
        Method::StandardLp,
        iterations as u64,
        opts,
    )
}

/// Optimal transport over `Π^bc_G(μ, ν)`.
pub fn solve_bicausal(
    graph: &CausalGraph,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &GroundCost,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let Some(dag) = graph.dag() else {
        return solve_standard_ot(mu, nu, cost, opts);
    };
    let blocks = kernel_blocks_with(dag, mu, nu, opts.dim_cap, opts.vertex_cap)?;
    solve_blocks(&blocks, cost, opts)
}

/// Bicausal solve on prebuilt kernel blocks, dispatching on `opts.bicausal`.
pub fn solve_blocks(blocks: &KernelBlocks, cost: &GroundCost, opts: &SolveOptions) -> Result<SolveReport> {
    match opts.bicausal {
        BicausalMethod::Exhaustive => solve_bicausal_exhaustive(blocks, cost, opts),
        BicausalMethod::Bcd => solve_bicausal_bcd(blocks, cost, opts.restarts, opts.seed, opts),
        BicausalMethod::Recursion => solve_bicausal_recursive(blocks, cost, opts),
        BicausalMethod::Auto => {
            if supports_recursion(&blocks.dag, cost) {
                return solve_bicausal_recursive(blocks, cost, opts);
            }
            match solve_bicausal_exhaustive(blocks, cost, opts) {
                Err(Error::EnumerationCap(_)) => solve_bicausal_bcd(blocks, cost, opts.restarts, opts.seed, opts),
                other => other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::CoordinateMetric;
    use crate::model::CoordinateSpace;
    use crate::scalar::{int, rat};

    #[test]
    fn dirac_transport_costs_the_forced_pair() {
        let s = vec![CoordinateSpace::real_line("X", &[int(0), int(3)])];
        let a = DiscreteMeasure::dirac(s.clone(), vec![0]).unwrap();
        let b = DiscreteMeasure::dirac(s, vec![1]).unwrap();
        let c = GroundCost::additive(1.0, CoordinateMetric::AbsDiff, 1);
        let r = solve_standard_ot(&a, &b, &c, &SolveOptions::default()).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.status, Status::GlobalOptimal);
    }

    #[test]
    fn exact_mode_reports_rational_value() {
        let s = vec![CoordinateSpace::real_line("X", &[int(0), int(1), int(2)])];
        let a = DiscreteMeasure::uniform(s.clone(), vec![vec![0], vec![1]]).unwrap();
        let b = DiscreteMeasure::uniform(s, vec![vec![1], vec![2]]).unwrap();
        let c = GroundCost::additive(2.0, CoordinateMetric::AbsDiff, 1);
        let r = solve_standard_ot(&a, &b, &c, &SolveOptions::exact()).unwrap();
        assert_eq!(r.exact_value, Some(int(1)));
        assert_eq!(r.coupling.weight(0, 0), &rat(1, 2));
        assert_eq!(r.residual, 0.0);
    }
}
