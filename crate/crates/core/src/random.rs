//! Seeded generators for compatible measures, treatment-outcome pairs and
//! structural causal models.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{AtomTuple, CoordinateSpace, Dag, DiscreteMeasure, Mechanism, Noise, Scm};
use crate::scalar::{int, rat, Rational};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k` positive weights with small denominators, summing to one.
pub fn random_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|w| rat(w, total)).collect()
}

/// Each pair `i < j` is an edge with probability ½.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize) -> Dag {
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            if rng.gen_bool(0.5) {
                edges.push((i, j));
            }
        }
    }
    Dag::new(n, &edges).expect("edges go forward")
}

/// A real line with `k` distinct integer atoms drawn from `lo..=hi`.
pub fn random_line<R: Rng>(rng: &mut R, name: &str, k: usize, lo: i64, hi: i64) -> CoordinateSpace {
    let mut pool: Vec<i64> = (lo..=hi).collect();
    pool.shuffle(rng);
    let values: Vec<Rational> = pool[..k].iter().map(|&v| int(v)).collect();
    CoordinateSpace::real_line(name, &values)
}

/// A `dag`-compatible measure: one random conditional row per reached parent
/// tuple, each supported on at most `max_row` atoms.
pub fn random_compatible_measure<R: Rng>(
    rng: &mut R,
    dag: &Dag,
    spaces: Vec<CoordinateSpace>,
    max_row: usize,
) -> DiscreteMeasure {
    let n = dag.n();
    let mut entries: Vec<(AtomTuple, Rational)> = vec![(vec![0; n], Rational::from_integer(1.into()))];
    for &v in dag.order() {
        let width = spaces[v].len();
        let mut rows: HashMap<Vec<usize>, Vec<(usize, Rational)>> = HashMap::new();
        let mut next = Vec::new();
        for (t, w) in &entries {
            let key: Vec<usize> = dag.parents(v).iter().map(|&p| t[p]).collect();
            let row = rows.entry(key).or_insert_with(|| {
                let k = rng.gen_range(1..=max_row.min(width));
                let mut atoms: Vec<usize> = (0..width).collect();
                atoms.shuffle(rng);
                atoms.truncate(k);
                atoms.sort();
                atoms.into_iter().zip(random_weights(rng, k)).collect()
            });
            for (a, p) in row.iter() {
                let mut s = t.clone();
                s[v] = *a;
                next.push((s, w * p));
            }
        }
        entries = next;
    }
    DiscreteMeasure::new(spaces, entries).expect("normalized by construction")
}

/// A random instance for the solver comparisons.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub dag: Dag,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

/// `n ≤ 3` vertices, 2 or 3 integer atoms per coordinate, compatible marginals
/// with conditional rows of support at most 2.
pub fn random_instance(seed: u64) -> RandomInstance {
    let mut r = rng(seed);
    let n = r.gen_range(1..=3);
    let dag = random_dag(&mut r, n);
    let spaces = |r: &mut ChaCha8Rng| -> Vec<CoordinateSpace> {
        (1..=n)
            .map(|i| {
                let k = r.gen_range(2..=3);
                random_line(r, &format!("X{i}"), k, -2, 2)
            })
            .collect()
    };
    let sm = spaces(&mut r);
    let sn = spaces(&mut r);
    let mu = random_compatible_measure(&mut r, &dag, sm, 2);
    let nu = random_compatible_measure(&mut r, &dag, sn, 2);
    RandomInstance { dag, mu, nu }
}

/// The confounded treatment graph `1 → 2, 1 → 3, 2 → 3`.
pub fn treatment_dag() -> Dag {
    Dag::new(3, &[(1, 2), (1, 3), (2, 3)]).expect("acyclic")
}

/// A measure on `(Z, T, Y)` with propensities `k/10 ∈ [δ, 1 - δ]`.
fn random_treatment_measure<R: Rng>(rng: &mut R, spaces: &[CoordinateSpace], delta: f64) -> DiscreteMeasure {
    let lo = (10.0 * delta).ceil() as i64;
    let hi = (10.0 * (1.0 - delta)).floor() as i64;
    let nz = spaces[0].len();
    let ny = spaces[2].len();
    let zw = random_weights(rng, nz);
    let mut entries = Vec::new();
    for (z, wz) in zw.iter().enumerate() {
        let p = rat(rng.gen_range(lo..=hi), 10);
        for (t, wt) in [(0, Rational::from_integer(1.into()) - &p), (1, p.clone())] {
            let k = rng.gen_range(1..=2.min(ny));
            let mut atoms: Vec<usize> = (0..ny).collect();
            atoms.shuffle(rng);
            for (y, wy) in atoms.into_iter().take(k).zip(random_weights(rng, k)) {
                entries.push((vec![z, t, y], wz * &wt * wy));
            }
        }
    }
    DiscreteMeasure::new(spaces.to_vec(), entries).expect("normalized by construction")
}

/// Two measures on the treatment graph sharing coordinate spaces, both with
/// propensities inside `[δ, 1 - δ]`.
pub fn random_ate_pair(seed: u64, delta: f64) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut r = rng(seed);
    let nz = r.gen_range(2..=3);
    let ny = r.gen_range(2..=3);
    let spaces = vec![
        random_line(&mut r, "Z", nz, -2, 2),
        CoordinateSpace::real_line("T", &[int(0), int(1)]),
        random_line(&mut r, "Y", ny, -2, 2),
    ];
    let mu = random_treatment_measure(&mut r, &spaces, delta);
    let nu = random_treatment_measure(&mut r, &spaces, delta);
    (mu, nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmShape {
    /// `1 → 2 → 3`.
    Chain,
    /// `1 → 2, 1 → 3, 2 → 4, 3 → 4`.
    Diamond,
}

impl ScmShape {
    pub fn dag(self) -> Dag {
        match self {
            ScmShape::Chain => Dag::markov(3),
            ScmShape::Diamond => Dag::new(4, &[(1, 2), (1, 3), (2, 4), (3, 4)]).expect("acyclic"),
        }
    }

    /// Noise atom bounds per vertex; inner diamond vertices stay binary so the
    /// exhaustive oracle remains small.
    fn noise_bounds(self) -> Vec<usize> {
        match self {
            ScmShape::Chain => vec![3, 3, 3],
            ScmShape::Diamond => vec![3, 2, 2, 3],
        }
    }
}

fn pick<R: Rng>(rng: &mut R, options: &[Rational]) -> Rational {
    options[rng.gen_range(0..options.len())].clone()
}

fn random_noise<R: Rng>(rng: &mut R, max_atoms: usize) -> Noise {
    let k = rng.gen_range(1..=max_atoms);
    let mut pool: Vec<i64> = (-1..=1).collect();
    pool.shuffle(rng);
    let atoms = pool[..k].iter().map(|&v| int(v)).zip(random_weights(rng, k)).collect();
    Noise::new(atoms).expect("normalized")
}

/// A seeded pair of affine SCMs on the same graph. The second model perturbs
/// offsets, coefficients and noise laws of a random subset of vertices; one
/// seed in five yields identical models.
pub fn random_scm_pair(seed: u64, shape: ScmShape) -> (Scm, Scm) {
    let mut r = rng(seed);
    let dag = shape.dag();
    let coefs = [rat(-1, 1), rat(-1, 2), rat(1, 2), rat(1, 1)];
    let offsets = [rat(-1, 2), int(0), rat(1, 2)];
    let eps = [rat(-1, 4), rat(1, 4), rat(1, 2)];
    let bounds = shape.noise_bounds();
    let mut mech_a = Vec::new();
    let mut noise_a = Vec::new();
    for v in 0..dag.n() {
        mech_a.push(Mechanism::Affine {
            offset: pick(&mut r, &offsets),
            coefs: dag.parents(v).iter().map(|_| pick(&mut r, &coefs)).collect(),
            noise: int(1),
        });
        noise_a.push(random_noise(&mut r, bounds[v]));
    }
    let identical = r.gen_range(0..5) == 0;
    let mut mech_b = mech_a.clone();
    let mut noise_b = noise_a.clone();
    if !identical {
        for v in 0..dag.n() {
            match r.gen_range(0..4) {
                0 => {}
                1 => {
                    if let Mechanism::Affine { offset, .. } = &mut mech_b[v] {
                        *offset += pick(&mut r, &eps);
                    }
                }
                2 => noise_b[v] = noise_b[v].shifted(&pick(&mut r, &eps)),
                _ => {
                    if let Mechanism::Affine { coefs: c, .. } = &mut mech_b[v] {
                        if let Some(first) = c.first_mut() {
                            *first = pick(&mut r, &coefs);
                        } else {
                            noise_b[v] = random_noise(&mut r, bounds[v]);
                        }
                    }
                }
            }
        }
    }
    let a = Scm::new(dag.clone(), mech_a, noise_a).expect("valid model");
    let b = Scm::new(dag, mech_b, noise_b).expect("valid model");
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{is_g_compatible, CausalGraph};

    #[test]
    fn generated_measures_are_compatible() {
        for seed in 0..20 {
            let inst = random_instance(seed);
            let g = CausalGraph::Acyclic(inst.dag.clone());
            assert!(is_g_compatible(&inst.mu, &g, 0.0).compatible);
            assert!(is_g_compatible(&inst.nu, &g, 0.0).compatible);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_instance(5).mu, random_instance(5).mu);
        let (a, b) = random_scm_pair(3, ScmShape::Diamond);
        let (c, d) = random_scm_pair(3, ScmShape::Diamond);
        assert_eq!((a, b), (c, d));
    }
}
