use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::metric::CostMatrix;
use crate::model::{AtomTuple, DiscreteMeasure};
use crate::scalar::{rational_to_f64, Rational};

/// A transport plan on `supp μ × supp ν`, weights row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coupling {
    pub mu_support: Vec<AtomTuple>,
    pub nu_support: Vec<AtomTuple>,
    weights: Vec<Rational>,
}

impl Coupling {
    pub fn new(mu_support: Vec<AtomTuple>, nu_support: Vec<AtomTuple>, weights: Vec<Rational>) -> Result<Coupling> {
        if weights.len() != mu_support.len() * nu_support.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for a {}x{} plan",
                weights.len(),
                mu_support.len(),
                nu_support.len()
            )));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidMeasure("negative coupling weight".into()));
        }
        Ok(Coupling {
            mu_support,
            nu_support,
            weights,
        })
    }

    /// Plan over the supports of `mu` and `nu`.
    pub fn from_weights(mu: &DiscreteMeasure, nu: &DiscreteMeasure, weights: Vec<Rational>) -> Result<Coupling> {
        Coupling::new(mu.tuples().cloned().collect(), nu.tuples().cloned().collect(), weights)
    }

    /// Float weights are converted exactly; negative round-off is clamped to 0.
    pub fn from_f64(mu: &DiscreteMeasure, nu: &DiscreteMeasure, weights: &[f64]) -> Result<Coupling> {
        let w = weights
            .iter()
            .map(|&x| {
                if x <= 0.0 {
                    Rational::zero()
                } else {
                    Rational::from_float(x).unwrap_or_else(Rational::zero)
                }
            })
            .collect();
        Coupling::from_weights(mu, nu, w)
    }

    /// `μ ⊗ ν`.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Coupling {
        let mut w = Vec::with_capacity(mu.len() * nu.len());
        for (_, a) in mu.support() {
            for (_, b) in nu.support() {
                w.push(a * b);
            }
        }
        Coupling::from_weights(mu, nu, w).expect("shape matches")
    }

    /// The diagonal plan of `mu` with itself.
    pub fn identity(mu: &DiscreteMeasure) -> Coupling {
        let k = mu.len();
        let mut w = vec![Rational::zero(); k * k];
        for (i, (_, p)) in mu.support().iter().enumerate() {
            w[i * k + i] = p.clone();
        }
        Coupling::from_weights(mu, mu, w).expect("shape matches")
    }

    pub fn rows(&self) -> usize {
        self.mu_support.len()
    }

    pub fn cols(&self) -> usize {
        self.nu_support.len()
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> &Rational {
        &self.weights[i * self.cols() + j]
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(rational_to_f64).collect()
    }

    /// Support pairs with positive weight: `(i, j, weight)`.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        let c = self.cols();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(move |(k, w)| (k / c, k % c, w))
    }

    pub fn cost(&self, c: &CostMatrix) -> f64 {
        self.weights
            .iter()
            .zip(&c.data)
            .filter(|(w, _)| !w.is_zero())
            .map(|(w, c)| rational_to_f64(w) * c)
            .sum()
    }

    pub fn row_sums(&self) -> Vec<Rational> {
        let c = self.cols();
        (0..self.rows())
            .map(|i| self.weights[i * c..(i + 1) * c].iter().cloned().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<Rational> {
        let c = self.cols();
        let mut out = vec![Rational::zero(); c];
        for (k, w) in self.weights.iter().enumerate() {
            out[k % c] += w;
        }
        out
    }

    /// The plan of `(Y, X)`.
    pub fn transpose(&self) -> Coupling {
        let (r, c) = (self.rows(), self.cols());
        let mut w = vec![Rational::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                w[j * r + i] = self.weights[i * c + j].clone();
            }
        }
        Coupling {
            mu_support: self.nu_support.clone(),
            nu_support: self.mu_support.clone(),
            weights: w,
        }
    }

    /// Whether the supports match those of `mu` and `nu`.
    pub fn matches(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
        self.mu_support.len() == mu.len()
            && self.nu_support.len() == nu.len()
            && self.mu_support.iter().eq(mu.tuples())
            && self.nu_support.iter().eq(nu.tuples())
    }

    /// Joint law of `(X_1, Y_1, …, X_n, Y_n)` as a list of weighted tuple pairs.
    pub fn entries(&self) -> Vec<(&AtomTuple, &AtomTuple, &Rational)> {
        self.support()
            .map(|(i, j, w)| (&self.mu_support[i], &self.nu_support[j], w))
            .collect()
    }
}
