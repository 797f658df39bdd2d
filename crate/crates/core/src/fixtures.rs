//! Bundled instances: the triangle-inequality counterexample, the
//! three-point Markov example, and the binomial/trinomial random walks.

use crate::metric::{appendix_b_matrix, GroundCost};
use crate::model::{CausalGraph, CoordinateSpace, Dag, DiscreteMeasure, Mechanism, Noise, Scm};
use crate::scalar::int;

/// Distances reported for the counterexample: `(μ,ν)`, `(ν,η)`, `(μ,η)`.
pub const APPENDIX_B_REFERENCE: [f64; 3] = [0.585, 2.24, 2.925];

pub struct AppendixB {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub eta: DiscreteMeasure,
    pub cost: GroundCost,
    pub graph: CausalGraph,
}

const ATOMS: [&str; 4] = ["x1", "x2", "x3", "x4"];

/// Support sequences in matrix row order (four each for μ, ν, η).
pub const APPENDIX_B_SEQUENCES: [[usize; 3]; 12] = [
    [0, 0, 0],
    [0, 0, 1],
    [1, 0, 0],
    [1, 0, 1],
    [0, 1, 0],
    [0, 1, 1],
    [1, 2, 0],
    [1, 2, 1],
    [2, 3, 2],
    [2, 3, 3],
    [3, 3, 2],
    [3, 3, 3],
];

pub fn appendix_b() -> AppendixB {
    appendix_b_with_matrix(appendix_b_matrix())
}

/// The counterexample with a caller-supplied 12×12 distance matrix.
pub fn appendix_b_with_matrix(matrix: Vec<Vec<f64>>) -> AppendixB {
    let spaces: Vec<CoordinateSpace> = (1..=3)
        .map(|i| CoordinateSpace::labeled(format!("X{i}"), &ATOMS))
        .collect();
    let measure = |k: usize| {
        let tuples = APPENDIX_B_SEQUENCES[4 * k..4 * k + 4].iter().map(|s| s.to_vec()).collect();
        DiscreteMeasure::uniform(spaces.clone(), tuples).expect("valid fixture")
    };
    let labels = APPENDIX_B_SEQUENCES
        .iter()
        .map(|s| s.iter().map(|&a| ATOMS[a].to_string()).collect())
        .collect();
    AppendixB {
        mu: measure(0),
        nu: measure(1),
        eta: measure(2),
        cost: GroundCost::JointMatrixPow { p: 1.0, labels, matrix },
        graph: CausalGraph::Acyclic(Dag::markov(3)),
    }
}

fn bits(n: usize) -> Vec<CoordinateSpace> {
    (1..=n)
        .map(|i| CoordinateSpace::real_line(format!("X{i}"), &[int(0), int(1)]))
        .collect()
}

/// `μ = ½(δ_(0,0,0) + δ_(1,1,1))`, `ν = ½(δ_(0,1,0) + δ_(1,0,1))`.
pub fn example_412() -> (DiscreteMeasure, DiscreteMeasure) {
    let mu = DiscreteMeasure::uniform(bits(3), vec![vec![0, 0, 0], vec![1, 1, 1]]).expect("valid fixture");
    let nu = DiscreteMeasure::uniform(bits(3), vec![vec![0, 1, 0], vec![1, 0, 1]]).expect("valid fixture");
    (mu, nu)
}

fn random_walk(steps: &[i64]) -> Scm {
    let dag = Dag::markov(3);
    let values: Vec<_> = steps.iter().map(|&s| int(s)).collect();
    let noise = Noise::uniform(&values).expect("valid noise");
    let mechanisms = (0..3).map(|v| Mechanism::additive_noise(dag.parents(v).len())).collect();
    Scm::new(dag, mechanisms, vec![noise; 3]).expect("valid model")
}

/// `X_i = Σ_{j ≤ i} ξ_j` with `ξ_j = ±1` equally likely.
pub fn binomial_scm() -> Scm {
    random_walk(&[-1, 1])
}

/// `Y_i = Σ_{j ≤ i} η_j` with `η_j ∈ {-1, 0, 1}` equally likely.
pub fn trinomial_scm() -> Scm {
    random_walk(&[-1, 0, 1])
}

/// Pushforwards of the two random walks.
pub fn example_413() -> (DiscreteMeasure, DiscreteMeasure) {
    let mu = binomial_scm().pushforward().expect("small model");
    let nu = trinomial_scm().pushforward().expect("small model");
    (mu, nu)
}

/// Squared Euclidean cost on `ℝ^n`.
pub fn squared_euclidean() -> GroundCost {
    GroundCost::EuclideanPow { p: 2.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{is_g_compatible, mechanism};
    use crate::scalar::rat;

    #[test]
    fn appendix_b_measures_are_markov() {
        let b = appendix_b();
        for m in [&b.mu, &b.nu, &b.eta] {
            assert!(is_g_compatible(m, &b.graph, 0.0).compatible);
        }
        let second = b.mu.marginal(&[1]).unwrap();
        assert_eq!(second.support(), &[(vec![0], int(1))]);
        let t = mechanism(&b.nu, b.graph.dag().unwrap(), 1);
        assert_eq!(t.row(&[0]).unwrap()[1], int(1));
        assert_eq!(t.row(&[1]).unwrap()[2], int(1));
    }

    #[test]
    fn random_walks_have_expected_paths() {
        let (mu, nu) = example_413();
        assert_eq!(mu.len(), 8);
        assert_eq!(nu.len(), 27);
        assert!(mu.support().iter().all(|(_, w)| *w == rat(1, 8)));
        let t = mechanism(&mu, &Dag::markov(3), 1);
        let x1 = mu.space(0).atoms().iter().position(|a| a == "1").unwrap();
        let row = t.row(&[x1]).unwrap();
        let names = mu.space(1).atoms();
        let p = |s: &str| row[names.iter().position(|a| a == s).unwrap()].clone();
        assert_eq!(p("0"), rat(1, 2));
        assert_eq!(p("2"), rat(1, 2));
    }
}
