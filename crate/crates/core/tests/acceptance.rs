//! One test per acceptance criterion. Each prints a single PASS/FAIL line.

use std::time::{Duration, Instant};

use causal_ot::fixtures::squared_euclidean;
use causal_ot::inference::{
    abs_cost, ate, ate_continuity_experiment, scm_perturbation_bound, w1_discontinuity_pair, AteSpec,
};
use causal_ot::interpolation::{random_walk_example, three_point_example};
use causal_ot::metric::{appendix_b_matrix, metric_repair, CostMatrix};
use causal_ot::model::{is_g_compatible, CausalGraph, CoordinateSpace, Dag, DiscreteMeasure};
use causal_ot::programs::{compile_bicausal, kernel_blocks, CouplingProgram};
use causal_ot::random::{random_ate_pair, random_instance, random_scm_pair, treatment_dag, ScmShape};
use causal_ot::scalar::{int, rat, Rational};
use causal_ot::solver::{
    solve_bicausal_bcd, solve_bicausal_exhaustive, solve_causal, solve_lp_exact, solve_standard_ot, Method,
    SolveOptions, Status,
};
use causal_ot::wasserstein::{g_wasserstein_p, reproduce_appendix_b, wasserstein_p};

const VALUE_TOL: f64 = 1e-6;
const ORDER_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-8;
const INSTANCES: u64 = 100;
const PAIRS: u64 = 50;

fn verdict(criterion: u32, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} - {detail}", if ok { "PASS" } else { "FAIL" });
}

fn within(elapsed: Duration, secs: f64) -> bool {
    elapsed.as_secs_f64() < secs
}

#[test]
fn criterion_1_appendix_b() {
    let t = Instant::now();
    let r = reproduce_appendix_b(&SolveOptions::default()).expect("solves");
    let elapsed = t.elapsed();
    let reference = [0.585, 2.24, 2.925];
    let values_ok = r.values.iter().zip(reference).all(|(v, e)| (v - e).abs() <= VALUE_TOL);
    let exhaustive = r.methods.iter().all(|m| *m == Method::Exhaustive);
    let ok = values_ok && exhaustive && r.violated && within(elapsed, 5.0);
    verdict(
        1,
        ok,
        &format!(
            "values {:?} (expected {:?}), violated {}, margin {:.4}, {:.2}s",
            r.values,
            reference,
            r.violated,
            r.margin,
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_three_point_markov() {
    let t = Instant::now();
    let (report, path) = three_point_example(&SolveOptions::exact()).expect("solves");
    let elapsed = t.elapsed();
    let ok = report.matches_first_coordinates
        && report.status == Status::GlobalOptimal
        && report.path.flags == vec![true, true, false, true, true]
        && path.exceptions == vec![rat(1, 2)]
        && within(elapsed, 1.0);
    verdict(
        2,
        ok,
        &format!(
            "W_G2^2 = {:?}, flags {:?}, exceptions {:?}, {:.3}s",
            report.exact_value,
            report.path.flags,
            report.path.exceptions,
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_random_walks() {
    let t = Instant::now();
    let (report, _, causal) = random_walk_example(&SolveOptions::default()).expect("solves");
    let elapsed = t.elapsed();
    let witness = report
        .standard_membership
        .violation
        .as_ref()
        .and_then(|v| v.conditional.clone());
    let ok = !report.standard_membership.member
        && witness.is_some()
        && causal.compatible_count() >= 9
        && causal.outside_exceptions_compatible()
        && within(elapsed, 10.0);
    verdict(
        3,
        ok,
        &format!(
            "W2 plan member {}, witness {:?}, pattern {:?}/{:?}, G-path compatible {}/11, exceptions {:?}, {:.2}s",
            report.standard_membership.member,
            witness,
            report.pattern.given_minus,
            report.pattern.given_plus,
            causal.compatible_count(),
            report.causal_path.exceptions,
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_oracle_equivalence() {
    let cost = squared_euclidean();
    let opts = SolveOptions::default();
    let mut failures = Vec::new();
    let mut worst_gap: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let blocks = kernel_blocks(&inst.dag, &inst.mu, &inst.nu).expect("compatible");
        let oracle = solve_bicausal_exhaustive(&blocks, &cost, &opts).expect("oracle");
        let bcd = solve_bicausal_bcd(&blocks, &cost, 64, seed, &opts).expect("bcd");
        let gap = (oracle.value - bcd.value).abs();
        worst_gap = worst_gap.max(gap);
        worst_residual = worst_residual.max(oracle.residual).max(bcd.residual);
        if gap > VALUE_TOL || oracle.residual > RESIDUAL_TOL || bcd.residual > RESIDUAL_TOL {
            failures.push(seed);
        }
    }
    let ok = failures.is_empty();
    verdict(
        4,
        ok,
        &format!("{INSTANCES} instances, worst gap {worst_gap:.2e}, worst residual {worst_residual:.2e}, failing seeds {failures:?}"),
    );
    assert!(ok);
}

fn chain(n: usize) -> Vec<CausalGraph> {
    ["empty", "markov", "linear", "full"]
        .iter()
        .map(|g| CausalGraph::preset(g, n).expect("preset"))
        .collect()
}

#[test]
fn criterion_5_sandwich_and_monotonicity() {
    let cost = squared_euclidean();
    let opts = SolveOptions::default();
    let mut failures = Vec::new();
    let mut chain_checks = 0;
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let g = CausalGraph::Acyclic(inst.dag.clone());
        let w = wasserstein_p(&inst.mu, &inst.nu, &cost, 2.0, &opts).expect("ot").cost();
        let causal = solve_causal(&g, &inst.mu, &inst.nu, &cost, &opts).expect("causal").value;
        let bicausal = g_wasserstein_p(&g, &inst.mu, &inst.nu, &cost, 2.0, &opts).expect("bicausal").cost();
        let mut ok = w <= causal + ORDER_TOL && causal <= bicausal + ORDER_TOL;
        // Graphs of the chain both marginals are compatible with, then the
        // instance graph inside the linear graph.
        let n = inst.dag.n();
        let mut values = Vec::new();
        for h in chain(n) {
            let compatible = is_g_compatible(&inst.mu, &h, 0.0).compatible && is_g_compatible(&inst.nu, &h, 0.0).compatible;
            if compatible {
                let r = g_wasserstein_p(&h, &inst.mu, &inst.nu, &cost, 2.0, &opts).expect("chain");
                ok &= r.status() == Status::GlobalOptimal;
                values.push(r.cost());
            }
        }
        chain_checks += values.len().saturating_sub(1);
        ok &= values.windows(2).all(|p| p[1] <= p[0] + ORDER_TOL);
        let linear = CausalGraph::preset("linear", n).expect("preset");
        let lin = g_wasserstein_p(&linear, &inst.mu, &inst.nu, &cost, 2.0, &opts).expect("linear").cost();
        ok &= lin <= bicausal + ORDER_TOL;
        if !ok {
            failures.push(seed);
        }
    }
    let ok = failures.is_empty();
    verdict(
        5,
        ok,
        &format!("{INSTANCES} instances, {chain_checks} chain comparisons, failing seeds {failures:?}"),
    );
    assert!(ok);
}

fn product_pair(seed: u64) -> (DiscreteMeasure, DiscreteMeasure) {
    let inst = random_instance(seed);
    let factor = |m: &DiscreteMeasure| {
        let parts: Vec<DiscreteMeasure> = (0..m.n()).map(|i| m.marginal(&[i]).expect("marginal")).collect();
        DiscreteMeasure::product(&parts).expect("product")
    };
    (factor(&inst.mu), factor(&inst.nu))
}

fn exact_lp_value(program: &CouplingProgram) -> Rational {
    let s = solve_lp_exact(&program.linear_relaxation()).expect("feasible");
    s.x.iter()
        .zip(&program.objective)
        .map(|(x, c)| x * Rational::from_float(*c).expect("finite"))
        .sum()
}

#[test]
fn criterion_6_special_cases() {
    let exact = SolveOptions::exact();
    let mut notes = Vec::new();
    let mut ok = true;
    for seed in 0..20 {
        let inst = random_instance(seed);
        let n = inst.dag.n();
        let (mu, nu) = (&inst.mu, &inst.nu);

        // Full graph: no constraints beyond the marginals.
        let full = CausalGraph::Complete(n);
        let fb = g_wasserstein_p(&full, mu, nu, &squared_euclidean(), 2.0, &exact).expect("full");
        let ot = solve_standard_ot(mu, nu, &squared_euclidean(), &exact).expect("ot");
        let c: CostMatrix = causal_ot::metric::cost_matrix(&squared_euclidean(), mu, nu).expect("cost");
        let program = CouplingProgram::new(mu, nu, c.data.clone(), compile_bicausal(&full, mu, nu).expect("full"));
        let full_ok = program.linear.is_empty()
            && program.bilinear.is_empty()
            && fb.solve.exact_value == ot.exact_value
            && Some(exact_lp_value(&program)) == ot.exact_value;

        // Empty graph with product marginals and an additive cost.
        let (pm, pn) = product_pair(seed);
        let empty = CausalGraph::preset("empty", n).expect("preset");
        let cost = abs_cost(n);
        let eb = g_wasserstein_p(&empty, &pm, &pn, &cost, 1.0, &exact).expect("empty");
        let mut sum = Rational::from_integer(0.into());
        for i in 0..n {
            let a = pm.marginal(&[i]).expect("marginal");
            let b = pn.marginal(&[i]).expect("marginal");
            sum += solve_standard_ot(&a, &b, &abs_cost(1), &exact).expect("ot").exact_value.expect("exact");
        }
        let blocks = kernel_blocks(&Dag::empty(n), &pm, &pn).expect("product");
        let oracle = solve_bicausal_exhaustive(&blocks, &cost, &SolveOptions::default()).expect("oracle");
        let empty_ok = eb.solve.method == Method::Decomposition
            && eb.solve.exact_value == Some(sum)
            && (oracle.value - eb.cost()).abs() <= VALUE_TOL;

        // Linear graph: the bicausal program is a pure LP.
        let lin_dag = Dag::linear(n);
        let mut r = causal_ot::random::rng(1000 + seed);
        let lm = causal_ot::random::random_compatible_measure(&mut r, &lin_dag, mu.spaces().to_vec(), 2);
        let ln = causal_ot::random::random_compatible_measure(&mut r, &lin_dag, nu.spaces().to_vec(), 2);
        let linear = CausalGraph::Acyclic(lin_dag.clone());
        let cl = causal_ot::metric::cost_matrix(&squared_euclidean(), &lm, &ln).expect("cost");
        let fams = compile_bicausal(&linear, &lm, &ln).expect("compatible");
        let lp = CouplingProgram::new(&lm, &ln, cl.data.clone(), fams);
        let blocks = kernel_blocks(&lin_dag, &lm, &ln).expect("blocks");
        let oracle = solve_bicausal_exhaustive(&blocks, &squared_euclidean(), &SolveOptions::default()).expect("oracle");
        let lp_value = causal_ot::scalar::rational_to_f64(&exact_lp_value(&lp));
        let linear_ok = lp.bilinear_count() == 0 && (lp_value - oracle.value).abs() <= VALUE_TOL;

        if !(full_ok && empty_ok && linear_ok) {
            ok = false;
            notes.push(format!("seed {seed}: full {full_ok} empty {empty_ok} linear {linear_ok}"));
        }
    }
    verdict(6, ok, &format!("20 instances per reduction; {notes:?}"));
    assert!(ok);
}

#[test]
fn criterion_7_ate_continuity() {
    let delta = 0.2;
    let spec = AteSpec::new(treatment_dag(), 1, 2, delta).expect("spec");
    let pairs: Vec<_> = (0..PAIRS).map(|s| random_ate_pair(s, delta)).collect();
    let e = ate_continuity_experiment(&pairs, &spec, &SolveOptions::default()).expect("experiment");
    let worst = e.rows.iter().map(|r| r.d_psi / r.bound.max(1e-300)).fold(0.0, f64::max);
    let (mu, nu, cspec) = w1_discontinuity_pair();
    let constructed = ate_continuity_experiment(&[(mu.clone(), nu.clone())], &cspec, &SolveOptions::default())
        .expect("constructed");
    let row = &constructed.rows[0];
    let ok = e.rows.len() == PAIRS as usize && e.all_hold() && row.holds && row.d_psi > 10.0 * row.w_1;
    verdict(
        7,
        ok,
        &format!(
            "{} pairs hold (worst |dpsi|/bound {worst:.3}); constructed pair dpsi {:.3} ({} vs {}), W1 {:.4}, W_G1 {:.4}",
            e.rows.iter().filter(|r| r.holds).count(),
            row.d_psi,
            ate(&mu, &cspec).unwrap(),
            ate(&nu, &cspec).unwrap(),
            row.w_1,
            row.w_g1
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_perturbation_bound() {
    let opts = SolveOptions::exact();
    let mut failures = Vec::new();
    let mut zero_pairs = 0;
    for seed in 0..PAIRS {
        let shape = if seed % 2 == 0 { ScmShape::Chain } else { ScmShape::Diamond };
        let (a, b) = random_scm_pair(seed, shape);
        let r = scm_perturbation_bound(&a, &b, &opts).expect("bound");
        let mut ok = r.holds && r.status == Status::GlobalOptimal;
        if a == b {
            zero_pairs += 1;
            ok &= r.zero_perturbation && r.rhs == 0.0 && r.lhs_exact.as_deref() == Some("0");
        }
        if !ok {
            failures.push(seed);
        }
    }
    let ok = failures.is_empty() && zero_pairs > 0;
    verdict(
        8,
        ok,
        &format!("{PAIRS} pairs, {zero_pairs} unperturbed, failing seeds {failures:?}"),
    );
    assert!(ok);
}

fn all_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect();
    (0..1u32 << pairs.len())
        .map(|mask| {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e).collect();
            Dag::new(n, &edges).expect("forward edges")
        })
        .collect()
}

#[test]
fn criterion_9_compatibility_and_closure() {
    let mut ok = true;
    for seed in 0..10 {
        let (pm, _) = product_pair(seed);
        for d in all_dags(pm.n()) {
            ok &= is_g_compatible(&pm, &CausalGraph::Acyclic(d), 0.0).compatible;
        }
    }
    let line = |name: &str| CoordinateSpace::real_line(name, &[int(-1), int(0), int(1)]);
    let bad = DiscreteMeasure::uniform(vec![line("X1"), line("X2"), line("X3")], vec![vec![2, 1, 2], vec![0, 1, 0]])
        .expect("measure");
    let markov = CausalGraph::Acyclic(Dag::markov(3));
    let rejected = !is_g_compatible(&bad, &markov, 0.0).compatible;
    let m = appendix_b_matrix();
    let once = metric_repair(&m).expect("repair");
    let twice = metric_repair(&once).expect("repair");
    let closure_ok = once == m && twice == once;
    let all = ok && rejected && closure_ok;
    verdict(
        9,
        all,
        &format!("products compatible {ok}, incompatible measure rejected {rejected}, repair fixpoint {closure_ok}"),
    );
    assert!(all);
}
