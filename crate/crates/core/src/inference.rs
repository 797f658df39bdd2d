//! Back-door treatment effects, propensity gating, and the two continuity
//! experiments: ATE against `W_{G,1}` and SCM perturbations.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{CoordinateMetric, GroundCost};
use crate::model::{is_g_compatible, noise_w1, CausalGraph, CoordinateSpace, Dag, DiscreteMeasure, Scm};
use crate::model::scm::PUSHFORWARD_CAP;
use crate::scalar::{format_rational, int, rat, rational_to_f64, Rational};
use crate::solver::{SolveOptions, Status};
use crate::wasserstein::{g_wasserstein_p, wasserstein_p};

/// Slack allowed when checking certified inequalities in floating point.
pub const BOUND_SLACK: f64 = 1e-9;

/// Treatment `j` (atoms `{0, 1}`) and outcome `k` (real atoms) on `dag`.
#[derive(Debug, Clone, PartialEq)]
pub struct AteSpec {
    pub dag: Dag,
    /// 0-based treatment vertex.
    pub treatment: usize,
    /// 0-based outcome vertex.
    pub outcome: usize,
    pub delta: f64,
}

impl AteSpec {
    pub fn new(dag: Dag, treatment: usize, outcome: usize, delta: f64) -> Result<AteSpec> {
        let n = dag.n();
        for v in [treatment, outcome] {
            if v >= n {
                return Err(Error::InvalidVertex { vertex: v + 1, n });
            }
        }
        if dag.position(treatment) >= dag.position(outcome) {
            return Err(Error::InvalidAteSpec("treatment must precede the outcome".into()));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(Error::InvalidAteSpec(format!("delta {delta} outside (0, 1/2]")));
        }
        Ok(AteSpec { dag, treatment, outcome, delta })
    }

    /// Checks the treatment and outcome spaces of `m`.
    pub fn validate(&self, m: &DiscreteMeasure) -> Result<()> {
        if m.n() != self.dag.n() {
            return Err(Error::ShapeMismatch(format!(
                "measure has {} coordinates, graph has {}",
                m.n(),
                self.dag.n()
            )));
        }
        let t = m.space(self.treatment);
        let values: BTreeSet<Rational> = (0..t.len()).filter_map(|a| t.real_value(a).cloned()).collect();
        if t.len() != 2 || values != BTreeSet::from([int(0), int(1)]) {
            return Err(Error::InvalidAteSpec(format!(
                "treatment coordinate {} must have atoms exactly {{0, 1}}",
                self.treatment + 1
            )));
        }
        let y = m.space(self.outcome);
        if (0..y.len()).any(|a| y.real_value(a).is_none()) {
            return Err(Error::NoEmbedding(self.outcome + 1));
        }
        Ok(())
    }
}

fn treatment_atom(space: &CoordinateSpace, value: i64) -> usize {
    (0..space.len())
        .find(|&a| space.real_value(a) == Some(&int(value)))
        .expect("validated treatment space")
}

fn require_compatible(m: &DiscreteMeasure, dag: &Dag) -> Result<()> {
    match is_g_compatible(m, &CausalGraph::Acyclic(dag.clone()), 0.0).witness {
        Some(w) => Err(Error::NotCompatible { vertex: w.vertex }),
        None => Ok(()),
    }
}

/// Per parent tuple of the treatment: total mass and, for each arm, the arm
/// mass and the outcome-weighted mass.
type ArmTable = BTreeMap<Vec<usize>, (Rational, [(Rational, Rational); 2])>;

fn arm_table(m: &DiscreteMeasure, spec: &AteSpec) -> ArmTable {
    let pa = spec.dag.parents(spec.treatment);
    let t = m.space(spec.treatment);
    let one = treatment_atom(t, 1);
    let mut table: ArmTable = BTreeMap::new();
    for (x, w) in m.support() {
        let key: Vec<usize> = pa.iter().map(|&p| x[p]).collect();
        let entry = table
            .entry(key)
            .or_insert_with(|| (Rational::zero(), [(Rational::zero(), Rational::zero()), (Rational::zero(), Rational::zero())]));
        entry.0 += w;
        let arm = usize::from(x[spec.treatment] == one);
        let y = m.space(spec.outcome).real_value(x[spec.outcome]).expect("validated outcome");
        entry.1[arm].0 += w;
        entry.1[arm].1 += w * y;
    }
    table
}

fn describe_key(m: &DiscreteMeasure, pa: &[usize], key: &[usize]) -> String {
    if pa.is_empty() {
        return "()".into();
    }
    let parts: Vec<String> = pa
        .iter()
        .zip(key)
        .map(|(&p, &a)| format!("X{}={}", p + 1, m.space(p).atoms()[a]))
        .collect();
    format!("({})", parts.join(", "))
}

/// `ψ^μ = Σ_{x_pa} [E(x_k | x_j = 1, x_pa) - E(x_k | x_j = 0, x_pa)] μ(x_pa)`.
pub fn ate_exact(m: &DiscreteMeasure, spec: &AteSpec) -> Result<Rational> {
    spec.validate(m)?;
    require_compatible(m, &spec.dag)?;
    let pa = spec.dag.parents(spec.treatment);
    let mut psi = Rational::zero();
    for (key, (mass, arms)) in arm_table(m, spec) {
        if arms[0].0.is_zero() || arms[1].0.is_zero() {
            return Err(Error::MissingArm(describe_key(m, pa, &key)));
        }
        let diff = &arms[1].1 / &arms[1].0 - &arms[0].1 / &arms[0].0;
        psi += diff * mass;
    }
    Ok(psi)
}

pub fn ate(m: &DiscreteMeasure, spec: &AteSpec) -> Result<f64> {
    ate_exact(m, spec).map(|r| rational_to_f64(&r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropensityGate {
    pub in_set: bool,
    pub min_p: f64,
    pub max_p: f64,
}

/// Range of `μ(x_j = 1 | x_pa_j)` over parent tuples with positive mass.
pub fn propensity_gate(m: &DiscreteMeasure, spec: &AteSpec) -> Result<PropensityGate> {
    spec.validate(m)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (mass, arms) in arm_table(m, spec).values() {
        let p = rational_to_f64(&(&arms[1].0 / mass));
        lo = lo.min(p);
        hi = hi.max(p);
    }
    Ok(PropensityGate {
        in_set: spec.delta <= lo && hi <= 1.0 - spec.delta,
        min_p: lo,
        max_p: hi,
    })
}

/// `C = 2K(1 + 1/δ²)` with `K = max(B, 1)/δ`.
pub fn ate_lipschitz_constant(spec: &AteSpec, outcome_bound: f64) -> f64 {
    let d = spec.delta;
    let k = outcome_bound.max(1.0) / d;
    2.0 * k * (1.0 + 1.0 / (d * d))
}

/// `max |x_k|` over the outcome atoms of `m`.
pub fn outcome_bound(m: &DiscreteMeasure, spec: &AteSpec) -> f64 {
    let y = m.space(spec.outcome);
    (0..y.len())
        .filter_map(|a| y.real_value(a))
        .map(|v| rational_to_f64(&v.abs()))
        .fold(0.0, f64::max)
}

/// `Σ_i |x_i - y_i|` on real coordinates.
pub fn abs_cost(n: usize) -> GroundCost {
    GroundCost::additive(1.0, CoordinateMetric::AbsDiff, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteRow {
    /// 1-based pair index.
    pub pair: usize,
    pub psi_mu: f64,
    pub psi_nu: f64,
    pub d_psi: f64,
    pub w_g1: f64,
    pub w_1: f64,
    pub constant: f64,
    pub bound: f64,
    pub holds: bool,
    /// `|Δψ| / W_1` (infinite when `W_1 = 0 < |Δψ|`).
    pub w1_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AteExperiment {
    pub delta: f64,
    /// The constant follows the proof; it is certified, not minimal.
    pub constant_note: &'static str,
    pub rows: Vec<AteRow>,
}

impl AteExperiment {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["pair", "psi_mu", "psi_nu", "d_psi", "w_g1", "w_1", "bound", "holds"])
            .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.pair.to_string(),
                r.psi_mu.to_string(),
                r.psi_nu.to_string(),
                r.d_psi.to_string(),
                r.w_g1.to_string(),
                r.w_1.to_string(),
                r.bound.to_string(),
                r.holds.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii"))
    }
}

/// `|ψ^μ - ψ^ν| ≤ C · W_{G,1}(μ, ν)` on every gated pair, with `W_{G,1}` and
/// `W_1` taken under the additive absolute-difference cost.
pub fn ate_continuity_experiment(
    pairs: &[(DiscreteMeasure, DiscreteMeasure)],
    spec: &AteSpec,
    opts: &SolveOptions,
) -> Result<AteExperiment> {
    for (i, (mu, nu)) in pairs.iter().enumerate() {
        for m in [mu, nu] {
            if !propensity_gate(m, spec)?.in_set {
                return Err(Error::GateFailed { pair: i + 1, delta: spec.delta });
            }
        }
    }
    let graph = CausalGraph::Acyclic(spec.dag.clone());
    let cost = abs_cost(spec.dag.n());
    let rows = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (mu, nu))| {
            let psi_mu = ate(mu, spec)?;
            let psi_nu = ate(nu, spec)?;
            let wg = g_wasserstein_p(&graph, mu, nu, &cost, 1.0, opts)?;
            if wg.status() != Status::GlobalOptimal {
                return Err(Error::NonGlobalStatus(i + 1, i + 1));
            }
            let w1 = wasserstein_p(mu, nu, &cost, 1.0, opts)?;
            let b = outcome_bound(mu, spec).max(outcome_bound(nu, spec));
            let constant = ate_lipschitz_constant(spec, b);
            let d_psi = (psi_mu - psi_nu).abs();
            let bound = constant * wg.value;
            Ok(AteRow {
                pair: i + 1,
                psi_mu,
                psi_nu,
                d_psi,
                w_g1: wg.value,
                w_1: w1.value,
                constant,
                bound,
                holds: d_psi <= bound + BOUND_SLACK,
                w1_ratio: if w1.value > 0.0 {
                    d_psi / w1.value
                } else if d_psi > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AteExperiment {
        delta: spec.delta,
        constant_note: "certified, not minimal",
        rows,
    })
}

/// A pair on the treatment graph whose confounder values differ by `1/50`
/// and whose treated units trade confounder strata. `W_1` stays small while
/// the effects differ by `3/10`.
pub fn w1_discontinuity_pair() -> (DiscreteMeasure, DiscreteMeasure, AteSpec) {
    let spaces = vec![
        CoordinateSpace::real_line("Z", &[int(0), rat(1, 50)]),
        CoordinateSpace::real_line("T", &[int(0), int(1)]),
        CoordinateSpace::real_line("Y", &[int(0), int(1)]),
    ];
    // Atom indices: z ∈ {0, 1/50}, t ∈ {0, 1}, y ∈ {0, 1}.
    let mu = DiscreteMeasure::new(
        spaces.clone(),
        vec![
            (vec![0, 0, 0], rat(4, 10)),
            (vec![0, 1, 1], rat(3, 10)),
            (vec![1, 0, 0], rat(1, 10)),
            (vec![1, 1, 0], rat(2, 10)),
        ],
    )
    .expect("valid fixture");
    let nu = DiscreteMeasure::new(
        spaces,
        vec![
            (vec![0, 0, 0], rat(4, 10)),
            (vec![0, 1, 0], rat(2, 10)),
            (vec![1, 0, 0], rat(1, 10)),
            (vec![1, 1, 1], rat(3, 10)),
        ],
    )
    .expect("valid fixture");
    let spec = AteSpec::new(crate::random::treatment_dag(), 1, 2, 0.2).expect("valid spec");
    (mu, nu, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    /// `W_{G,1}` of the two pushforwards.
    pub lhs: f64,
    pub lhs_exact: Option<String>,
    pub rhs: f64,
    pub constant: f64,
    /// Per-vertex `C_i`.
    pub vertex_constants: Vec<f64>,
    pub lipschitz: Vec<f64>,
    /// `‖f_i - g_i‖_∞` over reachable inputs of either model.
    pub sup_norms: Vec<f64>,
    pub noise_w1: Vec<f64>,
    pub status: Status,
    pub holds: bool,
    /// Both models agree, so both sides vanish.
    pub zero_perturbation: bool,
}

/// `C_i = max{L_i Σ_{j ∈ pa_i} C_j, L_i, 1}` in topological order.
pub fn recursion_constants(dag: &Dag, lipschitz: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; dag.n()];
    for &v in dag.order() {
        let l = lipschitz[v];
        let s: f64 = dag.parents(v).iter().map(|&p| c[p]).sum();
        c[v] = (l * s).max(l).max(1.0);
    }
    c
}

/// `W_{G,1}(μ, ν) ≤ C Σ_i (‖f_i - g_i‖_∞ + W_1(L(U_i), L(V_i)))` for the
/// pushforwards of `a` and `b`; Lipschitz constants come from `a`.
pub fn scm_perturbation_bound(a: &Scm, b: &Scm, opts: &SolveOptions) -> Result<PerturbationReport> {
    if a.dag() != b.dag() {
        return Err(Error::DagMismatch);
    }
    let dag = a.dag();
    let n = dag.n();
    let mut sup = Vec::with_capacity(n);
    let mut nw = Vec::with_capacity(n);
    let mut rhs_sum = Rational::zero();
    for v in 0..n {
        let mut inputs = a.reachable_inputs(v, PUSHFORWARD_CAP)?;
        inputs.extend(b.reachable_inputs(v, PUSHFORWARD_CAP)?);
        let mut s = Rational::zero();
        for (pa, u) in &inputs {
            let d = (a.mechanisms()[v].eval(v, pa, u)? - b.mechanisms()[v].eval(v, pa, u)?).abs();
            if d > s {
                s = d;
            }
        }
        let w = noise_w1(&a.noises()[v], &b.noises()[v]);
        rhs_sum += &s + &w;
        sup.push(s);
        nw.push(w);
    }
    let lipschitz = a.lipschitz_constants();
    let cs = recursion_constants(dag, &lipschitz);
    let constant: f64 = cs.iter().sum();
    let mu = a.pushforward()?;
    let nu = b.pushforward()?;
    let graph = CausalGraph::Acyclic(dag.clone());
    let wg = g_wasserstein_p(&graph, &mu, &nu, &abs_cost(n), 1.0, opts)?;
    if wg.status() != Status::GlobalOptimal {
        return Err(Error::NonGlobalStatus(1, 2));
    }
    let zero = rhs_sum.is_zero();
    let rhs = constant * rational_to_f64(&rhs_sum);
    let lhs = wg.value;
    Ok(PerturbationReport {
        lhs,
        lhs_exact: wg.solve.exact_value.as_ref().map(format_rational),
        rhs,
        constant,
        vertex_constants: cs,
        lipschitz,
        sup_norms: sup.iter().map(rational_to_f64).collect(),
        noise_w1: nw.iter().map(rational_to_f64).collect(),
        status: wg.status(),
        holds: lhs <= rhs + BOUND_SLACK,
        zero_perturbation: zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Mechanism, Noise};
    use crate::random::{random_ate_pair, treatment_dag};

    fn line(name: &str, vs: &[i64]) -> CoordinateSpace {
        CoordinateSpace::real_line(name, &vs.iter().map(|&v| int(v)).collect::<Vec<_>>())
    }

    #[test]
    fn root_treatment_effect() {
        // μ(T=1) = ½, E[Y|T=1] = 2, E[Y|T=0] = 1.
        let spaces = vec![line("T", &[0, 1]), line("Y", &[1, 2])];
        let m = DiscreteMeasure::new(spaces, vec![(vec![0, 0], rat(1, 2)), (vec![1, 1], rat(1, 2))]).unwrap();
        let spec = AteSpec::new(Dag::new(2, &[(1, 2)]).unwrap(), 0, 1, 0.1).unwrap();
        assert_eq!(ate_exact(&m, &spec).unwrap(), int(1));
        let g = propensity_gate(&m, &spec).unwrap();
        assert!(g.in_set && g.min_p == 0.5 && g.max_p == 0.5);
    }

    #[test]
    fn independent_outcome_has_no_effect() {
        let t = DiscreteMeasure::uniform(vec![line("T", &[0, 1])], vec![vec![0], vec![1]]).unwrap();
        let y = DiscreteMeasure::uniform(vec![line("Y", &[0, 3])], vec![vec![0], vec![1]]).unwrap();
        let m = DiscreteMeasure::product(&[t, y]).unwrap();
        let spec = AteSpec::new(Dag::new(2, &[(1, 2)]).unwrap(), 0, 1, 0.1).unwrap();
        assert_eq!(ate_exact(&m, &spec).unwrap(), int(0));
    }

    #[test]
    fn missing_arm_and_gate() {
        let spaces = vec![line("Z", &[0, 1]), line("T", &[0, 1]), line("Y", &[0, 1])];
        let m = DiscreteMeasure::new(
            spaces,
            vec![
                (vec![0, 0, 0], rat(1, 4)),
                (vec![0, 1, 1], rat(1, 4)),
                (vec![1, 1, 1], rat(1, 2)),
            ],
        )
        .unwrap();
        let spec = AteSpec::new(treatment_dag(), 1, 2, 0.1).unwrap();
        assert!(matches!(ate(&m, &spec), Err(Error::MissingArm(_))));
        assert!(!propensity_gate(&m, &spec).unwrap().in_set);
    }

    #[test]
    fn constant_formula() {
        let spec = AteSpec::new(treatment_dag(), 1, 2, 0.5).unwrap();
        assert_eq!(ate_lipschitz_constant(&spec, 1.0), 20.0);
        let a = AteSpec { delta: 0.1, ..spec.clone() };
        let b = AteSpec { delta: 0.2, ..spec };
        assert!(ate_lipschitz_constant(&a, 2.0) > ate_lipschitz_constant(&b, 2.0));
    }

    #[test]
    fn equal_pair_has_zero_deltas() {
        let (mu, _) = random_ate_pair(1, 0.2);
        let spec = AteSpec::new(treatment_dag(), 1, 2, 0.2).unwrap();
        let e = ate_continuity_experiment(&[(mu.clone(), mu)], &spec, &SolveOptions::default()).unwrap();
        let r = &e.rows[0];
        assert!(r.d_psi == 0.0 && r.w_g1.abs() < 1e-12 && r.holds);
    }

    #[test]
    fn constructed_pair_values() {
        let (mu, nu, spec) = w1_discontinuity_pair();
        assert_eq!(ate_exact(&mu, &spec).unwrap(), rat(7, 10));
        assert_eq!(ate_exact(&nu, &spec).unwrap(), rat(2, 5));
    }

    #[test]
    fn root_shift_on_chain() {
        let dag = Dag::markov(2);
        let noise = Noise::uniform(&[int(0), int(1)]).unwrap();
        let mk = |off: Rational| {
            Scm::new(
                dag.clone(),
                vec![
                    Mechanism::Affine { offset: off, coefs: vec![], noise: int(1) },
                    Mechanism::additive_noise(1),
                ],
                vec![noise.clone(), noise.clone()],
            )
            .unwrap()
        };
        let a = mk(int(0));
        let b = mk(rat(1, 4));
        let r = scm_perturbation_bound(&a, &b, &SolveOptions::exact()).unwrap();
        assert_eq!(r.vertex_constants, vec![1.0, 1.0]);
        assert_eq!(r.constant, 2.0);
        assert!((r.rhs - 0.5).abs() < 1e-12);
        assert!(r.holds && r.lhs > 0.0);
        let same = scm_perturbation_bound(&a, &a, &SolveOptions::exact()).unwrap();
        assert!(same.zero_perturbation && same.rhs == 0.0 && same.lhs == 0.0);
    }

    #[test]
    fn noise_shift_enters_rhs() {
        let dag = Dag::markov(2);
        let noise = Noise::uniform(&[int(0), int(1)]).unwrap();
        let mechs = vec![Mechanism::additive_noise(0), Mechanism::additive_noise(1)];
        let a = Scm::new(dag.clone(), mechs.clone(), vec![noise.clone(), noise.clone()]).unwrap();
        let b = Scm::new(dag, mechs, vec![noise.shifted(&rat(1, 3)), noise]).unwrap();
        let r = scm_perturbation_bound(&a, &b, &SolveOptions::default()).unwrap();
        assert!((r.noise_w1[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.holds);
    }
}
