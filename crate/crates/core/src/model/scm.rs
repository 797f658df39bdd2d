//! Structural causal models with real-valued coordinates and finite noise.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use super::dag::Dag;
use super::measure::{CoordinateSpace, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::scalar::{format_rational, rational_to_f64, Rational};

/// Default cap on enumerated noise combinations.
pub const PUSHFORWARD_CAP: u128 = 10_000_000;

/// `f_i(x_pa_i, u_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mechanism {
    /// `offset + Σ coefs[k]·x_pa[k] + noise·u`, parents in the DAG's parent order.
    Affine {
        offset: Rational,
        coefs: Vec<Rational>,
        noise: Rational,
    },
    /// Explicit values on a finite set of (parent values, noise value) inputs.
    Table(BTreeMap<(Vec<Rational>, Rational), Rational>),
}

impl Mechanism {
    pub fn constant(value: Rational, parents: usize) -> Mechanism {
        Mechanism::Affine {
            offset: value,
            coefs: vec![Rational::zero(); parents],
            noise: Rational::zero(),
        }
    }

    /// `x = u` for roots, `x = x_pa + u` for single-parent vertices, and so on.
    pub fn additive_noise(parents: usize) -> Mechanism {
        Mechanism::Affine {
            offset: Rational::zero(),
            coefs: vec![Rational::one(); parents],
            noise: Rational::one(),
        }
    }

    /// Evaluates the mechanism; `vertex` is 0-based and only used in errors.
    pub fn eval(&self, vertex: usize, parents: &[Rational], noise: &Rational) -> Result<Rational> {
        match self {
            Mechanism::Affine {
                offset,
                coefs,
                noise: b,
            } => {
                let mut v = offset + b * noise;
                for (c, x) in coefs.iter().zip(parents) {
                    v += c * x;
                }
                Ok(v)
            }
            Mechanism::Table(t) => t
                .get(&(parents.to_vec(), noise.clone()))
                .cloned()
                .ok_or_else(|| Error::MechanismUndefined {
                    vertex: vertex + 1,
                    input: describe_input(parents, noise),
                }),
        }
    }

    /// Lipschitz constant of the mechanism with respect to the additive metric
    /// `Σ |x_pa - x'_pa| + |u - u'|`. Analytic for affine maps, brute force over
    /// the declared inputs for tables.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Mechanism::Affine { coefs, noise, .. } => coefs
                .iter()
                .chain(std::iter::once(noise))
                .map(|c| rational_to_f64(&c.abs()))
                .fold(0.0, f64::max),
            Mechanism::Table(t) => {
                let inputs: Vec<_> = t.iter().collect();
                let mut best = 0.0f64;
                for (i, ((xa, ua), fa)) in inputs.iter().enumerate() {
                    for ((xb, ub), fb) in &inputs[i + 1..] {
                        let mut d: Rational = (ua - ub).abs();
                        for (p, q) in xa.iter().zip(xb) {
                            d += (p - q).abs();
                        }
                        if !d.is_zero() {
                            best = best.max(rational_to_f64(&((*fa - *fb).abs() / d)));
                        }
                    }
                }
                best
            }
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Mechanism::Affine { .. })
    }
}

fn describe_input(parents: &[Rational], noise: &Rational) -> String {
    let xs: Vec<String> = parents.iter().map(format_rational).collect();
    format!("(x_pa = [{}], u = {})", xs.join(", "), format_rational(noise))
}

/// A finitely supported real noise distribution, sorted by value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Noise {
    atoms: Vec<(Rational, Rational)>,
}

impl Noise {
    pub fn new(atoms: Vec<(Rational, Rational)>) -> Result<Noise> {
        let mut acc: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (v, w) in atoms {
            if w.is_negative() {
                return Err(Error::InvalidScm("negative noise weight".into()));
            }
            *acc.entry(v).or_insert_with(Rational::zero) += w;
        }
        let atoms: Vec<_> = acc.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        let total: Rational = atoms.iter().map(|(_, w)| w.clone()).sum();
        if !total.is_one() {
            return Err(Error::InvalidScm(format!(
                "noise weights sum to {}",
                format_rational(&total)
            )));
        }
        Ok(Noise { atoms })
    }

    pub fn dirac(v: Rational) -> Noise {
        Noise {
            atoms: vec![(v, Rational::one())],
        }
    }

    pub fn uniform(values: &[Rational]) -> Result<Noise> {
        let w = Rational::new(1.into(), (values.len() as i64).into());
        Noise::new(values.iter().map(|v| (v.clone(), w.clone())).collect())
    }

    pub fn atoms(&self) -> &[(Rational, Rational)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The same distribution translated by `eps`.
    pub fn shifted(&self, eps: &Rational) -> Noise {
        Noise {
            atoms: self.atoms.iter().map(|(v, w)| (v + eps, w.clone())).collect(),
        }
    }
}

/// One-dimensional `W_1` via the quantile coupling: `∫ |F(t) - G(t)| dt`.
pub fn noise_w1(a: &Noise, b: &Noise) -> Rational {
    let mut points: Vec<&Rational> = a.atoms.iter().chain(&b.atoms).map(|(v, _)| v).collect();
    points.sort();
    points.dedup();
    let cdf = |n: &Noise, t: &Rational| -> Rational {
        n.atoms
            .iter()
            .filter(|(v, _)| v <= t)
            .map(|(_, w)| w.clone())
            .sum()
    };
    let mut total = Rational::zero();
    for w in points.windows(2) {
        total += (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0]);
    }
    total
}

/// `X_i = f_i(X_pa_i, U_i)` with independent noises.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: Dag,
    names: Vec<String>,
    mechanisms: Vec<Mechanism>,
    noises: Vec<Noise>,
    lipschitz: Vec<Option<f64>>,
}

/// One realization of an SCM: coordinate values, noise values and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub values: Vec<Rational>,
    pub noises: Vec<Rational>,
    pub weight: Rational,
}

impl Scm {
    pub fn new(dag: Dag, mechanisms: Vec<Mechanism>, noises: Vec<Noise>) -> Result<Scm> {
        let n = dag.n();
        if mechanisms.len() != n || noises.len() != n {
            return Err(Error::InvalidScm(format!(
                "{} vertices but {} mechanisms and {} noises",
                n,
                mechanisms.len(),
                noises.len()
            )));
        }
        for (v, m) in mechanisms.iter().enumerate() {
            if let Mechanism::Affine { coefs, .. } = m {
                if coefs.len() != dag.parents(v).len() {
                    return Err(Error::InvalidScm(format!(
                        "vertex {} has {} parents but {} coefficients",
                        v + 1,
                        dag.parents(v).len(),
                        coefs.len()
                    )));
                }
            }
        }
        Ok(Scm {
            names: (1..=n).map(|i| format!("X{i}")).collect(),
            dag,
            mechanisms,
            noises,
            lipschitz: vec![None; n],
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Scm {
        self.names = names;
        self
    }

    /// Declares Lipschitz constants; `None` entries fall back to estimation.
    pub fn with_lipschitz(mut self, lipschitz: Vec<Option<f64>>) -> Scm {
        self.lipschitz = lipschitz;
        self
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn noises(&self) -> &[Noise] {
        &self.noises
    }

    pub fn declared_lipschitz(&self) -> &[Option<f64>] {
        &self.lipschitz
    }

    pub fn combinations(&self) -> u128 {
        self.noises
            .iter()
            .fold(1u128, |acc, n| acc.saturating_mul(n.len() as u128))
    }

    /// Enumerates every noise combination in topological order.
    pub fn realizations(&self, cap: u128) -> Result<Vec<Realization>> {
        let combinations = self.combinations();
        if combinations > cap {
            return Err(Error::SupportExplosion { combinations, cap });
        }
        let n = self.dag.n();
        let mut out = vec![Realization {
            values: vec![Rational::zero(); n],
            noises: vec![Rational::zero(); n],
            weight: Rational::one(),
        }];
        for &v in self.dag.order() {
            let mut next = Vec::with_capacity(out.len() * self.noises[v].len());
            for r in &out {
                let parents: Vec<Rational> =
                    self.dag.parents(v).iter().map(|&p| r.values[p].clone()).collect();
                for (u, w) in &self.noises[v].atoms {
                    let mut s = r.clone();
                    s.values[v] = self.mechanisms[v].eval(v, &parents, u)?;
                    s.noises[v] = u.clone();
                    s.weight = &r.weight * w;
                    next.push(s);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Distinct (parent values, noise value) inputs of vertex `v` that occur
    /// with positive probability.
    pub fn reachable_inputs(&self, v: usize, cap: u128) -> Result<BTreeSet<(Vec<Rational>, Rational)>> {
        Ok(self
            .realizations(cap)?
            .into_iter()
            .map(|r| {
                (
                    self.dag.parents(v).iter().map(|&p| r.values[p].clone()).collect(),
                    r.noises[v].clone(),
                )
            })
            .collect())
    }

    pub fn pushforward(&self) -> Result<DiscreteMeasure> {
        self.pushforward_with_cap(PUSHFORWARD_CAP)
    }

    /// Exact distribution of `(X_1, …, X_n)`. Coordinates become real lines
    /// whose atoms are the values taken.
    pub fn pushforward_with_cap(&self, cap: u128) -> Result<DiscreteMeasure> {
        let n = self.dag.n();
        let reals = self.realizations(cap)?;
        let mut values: Vec<Vec<Rational>> = vec![Vec::new(); n];
        for r in &reals {
            for (i, x) in r.values.iter().enumerate() {
                values[i].push(x.clone());
            }
        }
        let spaces: Vec<CoordinateSpace> = values
            .iter()
            .enumerate()
            .map(|(i, vs)| CoordinateSpace::real_line(self.names[i].clone(), vs))
            .collect();
        let entries = reals
            .into_iter()
            .filter(|r| !r.weight.is_zero())
            .map(|r| {
                let t = r
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        spaces[i]
                            .embedding()
                            .expect("real line")
                            .iter()
                            .position(|e| &e[0] == x)
                            .expect("value present")
                    })
                    .collect();
                (t, r.weight)
            })
            .collect();
        DiscreteMeasure::new(spaces, entries)
    }

    /// Lipschitz constants: declared values where given, otherwise
    /// [`Mechanism::lipschitz`].
    pub fn lipschitz_constants(&self) -> Vec<f64> {
        self.mechanisms
            .iter()
            .zip(&self.lipschitz)
            .map(|(m, d)| d.unwrap_or_else(|| m.lipschitz()))
            .collect()
    }
}

pub fn scm_pushforward(s: &Scm) -> Result<DiscreteMeasure> {
    s.pushforward()
}

/// Per-vertex Lipschitz estimates with respect to the additive metric on
/// (parent values, noise); absolute difference on every real coordinate.
pub fn lipschitz_estimate(s: &Scm) -> Vec<f64> {
    s.mechanisms.iter().map(Mechanism::lipschitz).collect()
}
