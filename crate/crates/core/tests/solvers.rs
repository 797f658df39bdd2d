//! Solver outputs against independent brute-force oracles.

use causal_ot::fixtures::squared_euclidean;
use causal_ot::metric::cost_matrix;
use causal_ot::model::{is_g_compatible, CausalGraph, Dag, DiscreteMeasure};
use causal_ot::programs::{compile_bicausal, CouplingProgram};
use causal_ot::random::random_instance;
use causal_ot::solver::{
    enumerate_vertices, solve_bicausal, solve_lp, solve_lp_exact, BicausalMethod, LinearProgram, SolveOptions,
};
use causal_ot::scalar::rat;
use num_traits::ToPrimitive;

const TOL: f64 = 1e-7;

/// Minimum of `c·x` over every basic feasible solution of `Ax = b, x ≥ 0`,
/// found by trying all column subsets of size rank(A).
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut a: Vec<Vec<f64>> = lp
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![0.0; n + 1];
            for (j, v) in &r.terms {
                row[*j] += v.to_f64().unwrap();
            }
            row[n] = r.rhs.to_f64().unwrap();
            row
        })
        .collect();
    let rank = echelon(&mut a, n);
    a.truncate(rank);
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..rank).collect();
    loop {
        if let Some(x) = solve_square(&a, &subset, n) {
            if x.iter().all(|v| *v >= -1e-10) {
                let value: f64 = subset.iter().zip(&x).map(|(&j, v)| lp.objective[j] * v).sum();
                best = Some(best.map_or(value, |b| b.min(value)));
            }
        }
        if !next_subset(&mut subset, n) {
            return best;
        }
    }
}

/// Row reduction in place; returns the rank and leaves independent rows first.
fn echelon(a: &mut [Vec<f64>], n: usize) -> usize {
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..a.len()).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) else {
            break;
        };
        if a[p][c].abs() < 1e-12 {
            continue;
        }
        a.swap(r, p);
        for i in 0..a.len() {
            if i != r {
                let f = a[i][c] / a[r][c];
                for k in 0..=n {
                    a[i][k] -= f * a[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

fn solve_square(a: &[Vec<f64>], cols: &[usize], n: usize) -> Option<Vec<f64>> {
    let m = cols.len();
    let mut s: Vec<Vec<f64>> = a.iter().map(|row| cols.iter().map(|&j| row[j]).chain([row[n]]).collect()).collect();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| s[i][c].abs().total_cmp(&s[j][c].abs()))?;
        if s[p][c].abs() < 1e-10 {
            return None;
        }
        s.swap(c, p);
        for i in 0..m {
            if i != c {
                let f = s[i][c] / s[c][c];
                for k in 0..=m {
                    s[i][k] -= f * s[c][k];
                }
            }
        }
    }
    Some((0..m).map(|i| s[i][m] / s[i][i]).collect())
}

fn next_subset(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    for i in (0..k).rev() {
        if s[i] < n - k + i {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn linear_program(graph: &CausalGraph, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> LinearProgram {
    let c = cost_matrix(&squared_euclidean(), mu, nu).unwrap();
    let families = compile_bicausal(graph, mu, nu).unwrap();
    CouplingProgram::new(mu, nu, c.data, families).linear_relaxation()
}

#[test]
fn linear_graph_lp_matches_vertex_oracle() {
    let mut checked = 0;
    for seed in 0..40 {
        let inst = random_instance(seed);
        let n = inst.mu.n();
        let graph = CausalGraph::Acyclic(Dag::linear(n));
        if inst.mu.len() * inst.nu.len() > 16 {
            continue;
        }
        let lp = linear_program(&graph, &inst.mu, &inst.nu);
        let oracle = vertex_oracle(&lp).expect("feasible");
        let float = solve_lp(&lp).unwrap().value;
        let exact = solve_lp_exact(&lp).unwrap().value.to_f64().unwrap();
        let solved = solve_bicausal(&graph, &inst.mu, &inst.nu, &squared_euclidean(), &SolveOptions::default())
            .unwrap()
            .value;
        assert!((oracle - float).abs() < TOL, "seed {seed}: oracle {oracle} simplex {float}");
        assert!((oracle - exact).abs() < TOL, "seed {seed}: oracle {oracle} exact {exact}");
        assert!((oracle - solved).abs() < TOL, "seed {seed}: oracle {oracle} solver {solved}");
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} instances were small enough");
}

#[test]
fn transportation_vertices_are_extreme_and_counted() {
    // The 2x2 polytope with uniform margins is a segment.
    let half = rat(1, 2);
    let v = enumerate_vertices(&[half.clone(), half.clone()], &[half.clone(), half]).unwrap();
    assert_eq!(v.len(), 2);
    // Uniform 3x3 margins: the vertices are the six permutation matrices.
    let third = rat(1, 3);
    let t = vec![third.clone(), third.clone(), third];
    let v = enumerate_vertices(&t, &t).unwrap();
    assert_eq!(v.len(), 6);
    for vert in &v {
        assert_eq!(vert.iter().filter(|w| **w != rat(0, 1)).count(), 3);
    }
}

#[test]
fn all_bicausal_methods_agree_on_small_instances() {
    for seed in 40..70 {
        let inst = random_instance(seed);
        let graph = CausalGraph::Acyclic(inst.dag.clone());
        let cost = squared_euclidean();
        let run = |method| {
            let opts = SolveOptions { bicausal: method, restarts: 64, ..SolveOptions::default() };
            solve_bicausal(&graph, &inst.mu, &inst.nu, &cost, &opts).unwrap()
        };
        let oracle = run(BicausalMethod::Exhaustive);
        let auto = run(BicausalMethod::Auto);
        let bcd = run(BicausalMethod::Bcd);
        assert!((oracle.value - auto.value).abs() < TOL, "seed {seed}");
        assert!(bcd.value >= oracle.value - TOL, "seed {seed}: bcd below the global optimum");
        assert!(oracle.residual < 1e-9);
        for pi in [&oracle.coupling, &auto.coupling] {
            assert!(pi.matches(&inst.mu, &inst.nu));
        }
    }
}

#[test]
fn exact_and_float_modes_agree() {
    for seed in 70..85 {
        let inst = random_instance(seed);
        let graph = CausalGraph::Acyclic(inst.dag.clone());
        let cost = squared_euclidean();
        let f = solve_bicausal(&graph, &inst.mu, &inst.nu, &cost, &SolveOptions::default()).unwrap();
        let e = solve_bicausal(&graph, &inst.mu, &inst.nu, &cost, &SolveOptions::exact()).unwrap();
        let ev = e.exact_value.as_ref().expect("exact value").to_f64().unwrap();
        assert!((f.value - ev).abs() < TOL, "seed {seed}");
    }
}

#[test]
fn incompatible_marginal_is_reported() {
    for seed in 0..30 {
        let inst = random_instance(seed);
        if inst.mu.n() < 2 {
            continue;
        }
        let empty = CausalGraph::Acyclic(Dag::empty(inst.mu.n()));
        if is_g_compatible(&inst.mu, &empty, 0.0).compatible {
            continue;
        }
        let err = solve_bicausal(&empty, &inst.mu, &inst.nu, &squared_euclidean(), &SolveOptions::default());
        assert!(err.is_err(), "seed {seed}");
        return;
    }
    panic!("no incompatible instance among the seeds");
}
