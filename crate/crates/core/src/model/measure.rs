//! Finitely supported probability measures on product spaces.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{format_rational, rational_to_f64, Rational};

/// Weight tolerance applied when validating that weights sum to one.
pub const WEIGHT_TOL: f64 = 1e-12;

/// The atoms of one coordinate, optionally embedded in a real vector space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSpace {
    name: String,
    atoms: Vec<String>,
    embedding: Option<Vec<Vec<Rational>>>,
}

impl CoordinateSpace {
    pub fn new(
        name: impl Into<String>,
        atoms: Vec<String>,
        embedding: Option<Vec<Vec<Rational>>>,
    ) -> Result<CoordinateSpace> {
        let name = name.into();
        let mut seen = std::collections::BTreeSet::new();
        for a in &atoms {
            if !seen.insert(a) {
                return Err(Error::InvalidMeasure(format!(
                    "duplicate atom '{a}' in space '{name}'"
                )));
            }
        }
        if let Some(emb) = &embedding {
            if emb.len() != atoms.len() {
                return Err(Error::InvalidMeasure(format!(
                    "space '{name}' has {} atoms but {} embedding vectors",
                    atoms.len(),
                    emb.len()
                )));
            }
            if let Some(first) = emb.first() {
                if emb.iter().any(|v| v.len() != first.len()) {
                    return Err(Error::InvalidMeasure(format!(
                        "embedding vectors of space '{name}' differ in dimension"
                    )));
                }
            }
        }
        Ok(CoordinateSpace {
            name,
            atoms,
            embedding,
        })
    }

    /// Abstract atoms without geometry.
    pub fn labeled(name: impl Into<String>, atoms: &[&str]) -> CoordinateSpace {
        CoordinateSpace::new(name, atoms.iter().map(|s| s.to_string()).collect(), None)
            .expect("labels must be distinct")
    }

    /// Real-valued atoms, named by their values and embedded in the line.
    pub fn real_line(name: impl Into<String>, values: &[Rational]) -> CoordinateSpace {
        let mut values = values.to_vec();
        values.sort();
        values.dedup();
        let atoms = values.iter().map(format_rational).collect();
        let emb = values.into_iter().map(|v| vec![v]).collect();
        CoordinateSpace::new(name, atoms, Some(emb)).expect("distinct values")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_index(&self, atom: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    pub fn embedding(&self) -> Option<&[Vec<Rational>]> {
        self.embedding.as_deref()
    }

    pub fn point(&self, atom: usize) -> Option<&[Rational]> {
        self.embedding.as_ref().map(|e| e[atom].as_slice())
    }

    /// The value of a one-dimensional atom.
    pub fn real_value(&self, atom: usize) -> Option<&Rational> {
        match self.point(atom) {
            Some([v]) => Some(v),
            _ => None,
        }
    }

    pub fn dimension(&self) -> Option<usize> {
        self.embedding
            .as_ref()
            .map(|e| e.first().map_or(0, |v| v.len()))
    }
}

/// Atom indices, one per coordinate.
pub type AtomTuple = Vec<usize>;

/// A probability measure with finite support on `X_1 × … × X_n`.
///
/// The support is kept sorted by atom tuple, strictly positive and exactly
/// normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteMeasure {
    spaces: Vec<CoordinateSpace>,
    support: Vec<(AtomTuple, Rational)>,
}

impl DiscreteMeasure {
    /// Builds a measure from weighted tuples. Repeated tuples are merged and
    /// zero weights dropped. Weights must sum to one within [`WEIGHT_TOL`];
    /// the result is renormalized exactly.
    pub fn new(
        spaces: Vec<CoordinateSpace>,
        entries: Vec<(AtomTuple, Rational)>,
    ) -> Result<DiscreteMeasure> {
        let n = spaces.len();
        if n == 0 {
            return Err(Error::InvalidMeasure("no coordinates".into()));
        }
        let mut acc: BTreeMap<AtomTuple, Rational> = BTreeMap::new();
        for (tuple, w) in entries {
            if tuple.len() != n {
                return Err(Error::InvalidMeasure(format!(
                    "tuple of length {} in a measure on {n} coordinates",
                    tuple.len()
                )));
            }
            for (i, &a) in tuple.iter().enumerate() {
                if a >= spaces[i].len() {
                    return Err(Error::InvalidMeasure(format!(
                        "atom index {a} out of range for coordinate {}",
                        i + 1
                    )));
                }
            }
            if w.is_negative() {
                return Err(Error::InvalidMeasure("negative weight".into()));
            }
            *acc.entry(tuple).or_insert_with(Rational::zero) += w;
        }
        let support: Vec<(AtomTuple, Rational)> =
            acc.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        let total: Rational = support.iter().map(|(_, w)| w.clone()).sum();
        if support.is_empty() || (rational_to_f64(&total) - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {} instead of 1",
                rational_to_f64(&total)
            )));
        }
        let support = if total.is_one() {
            support
        } else {
            support.into_iter().map(|(t, w)| (t, w / &total)).collect()
        };
        Ok(DiscreteMeasure { spaces, support })
    }

    pub fn dirac(spaces: Vec<CoordinateSpace>, tuple: AtomTuple) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(spaces, vec![(tuple, Rational::one())])
    }

    /// Uniform weights on the given tuples.
    pub fn uniform(spaces: Vec<CoordinateSpace>, tuples: Vec<AtomTuple>) -> Result<DiscreteMeasure> {
        let w = Rational::new(1.into(), (tuples.len() as i64).into());
        DiscreteMeasure::new(spaces, tuples.into_iter().map(|t| (t, w.clone())).collect())
    }

    /// Independent product; coordinates are concatenated in order.
    pub fn product(factors: &[DiscreteMeasure]) -> Result<DiscreteMeasure> {
        let mut spaces = Vec::new();
        let mut entries: Vec<(AtomTuple, Rational)> = vec![(Vec::new(), Rational::one())];
        for f in factors {
            spaces.extend(f.spaces.iter().cloned());
            let mut next = Vec::with_capacity(entries.len() * f.support.len());
            for (t, w) in &entries {
                for (u, v) in &f.support {
                    let mut tu = t.clone();
                    tu.extend_from_slice(u);
                    next.push((tu, w * v));
                }
            }
            entries = next;
        }
        DiscreteMeasure::new(spaces, entries)
    }

    pub fn n(&self) -> usize {
        self.spaces.len()
    }

    pub fn spaces(&self) -> &[CoordinateSpace] {
        &self.spaces
    }

    pub fn space(&self, i: usize) -> &CoordinateSpace {
        &self.spaces[i]
    }

    pub fn support(&self) -> &[(AtomTuple, Rational)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn tuples(&self) -> impl Iterator<Item = &AtomTuple> {
        self.support.iter().map(|(t, _)| t)
    }

    pub fn index_of(&self, tuple: &[usize]) -> Option<usize> {
        self.support
            .binary_search_by(|(t, _)| t.as_slice().cmp(tuple))
            .ok()
    }

    pub fn probability(&self, tuple: &[usize]) -> Rational {
        self.index_of(tuple)
            .map_or_else(Rational::zero, |i| self.support[i].1.clone())
    }

    /// Marginal weights on the given coordinates, keyed by projected tuple.
    pub fn marginal_weights(&self, coords: &[usize]) -> BTreeMap<AtomTuple, Rational> {
        let mut out: BTreeMap<AtomTuple, Rational> = BTreeMap::new();
        for (t, w) in &self.support {
            let key: AtomTuple = coords.iter().map(|&c| t[c]).collect();
            *out.entry(key).or_insert_with(Rational::zero) += w;
        }
        out
    }

    /// Pushforward under the projection onto `coords` (0-based, in the given order).
    pub fn marginal(&self, coords: &[usize]) -> Result<DiscreteMeasure> {
        if coords.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&c) = coords.iter().find(|&&c| c >= self.n()) {
            return Err(Error::InvalidVertex {
                vertex: c + 1,
                n: self.n(),
            });
        }
        let spaces = coords.iter().map(|&c| self.spaces[c].clone()).collect();
        Ok(DiscreteMeasure {
            spaces,
            support: self.marginal_weights(coords).into_iter().collect(),
        })
    }

    /// Weights of a single coordinate's atoms.
    pub fn coordinate_marginal(&self, i: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.spaces[i].len()];
        for (t, w) in &self.support {
            out[t[i]] += w;
        }
        out
    }

    pub fn atom_names(&self, tuple: &[usize]) -> Vec<String> {
        tuple
            .iter()
            .enumerate()
            .map(|(i, &a)| self.spaces[i].atoms[a].clone())
            .collect()
    }

    /// Embedded point of a tuple, one vector per coordinate.
    pub fn point(&self, tuple: &[usize]) -> Result<Vec<&[Rational]>> {
        tuple
            .iter()
            .enumerate()
            .map(|(i, &a)| self.spaces[i].point(a).ok_or(Error::NoEmbedding(i + 1)))
            .collect()
    }

    pub fn has_embedding(&self) -> bool {
        self.spaces.iter().all(|s| s.embedding.is_some())
    }

    /// Canonical form: atom names with weights, sorted.
    pub fn canonical(&self) -> Vec<(Vec<String>, Rational)> {
        let mut out: Vec<(Vec<String>, Rational)> = self
            .support
            .iter()
            .map(|(t, w)| (self.atom_names(t), w.clone()))
            .collect();
        out.sort();
        out
    }

    /// Equality as weighted atom lists, weights compared within `tol`.
    pub fn same_as(&self, other: &DiscreteMeasure, tol: f64) -> bool {
        let a = self.canonical();
        let b = other.canonical();
        a.len() == b.len()
            && a.iter().zip(&b).all(|((ta, wa), (tb, wb))| {
                ta == tb && rational_to_f64(&(wa - wb)).abs() <= tol
            })
    }

    /// Replaces the coordinate spaces, keeping tuples (used for relabeling).
    pub fn with_spaces(&self, spaces: Vec<CoordinateSpace>) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(spaces, self.support.clone())
    }
}

pub fn marginal(m: &DiscreteMeasure, coords: &[usize]) -> Result<DiscreteMeasure> {
    m.marginal(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn abc() -> Vec<CoordinateSpace> {
        vec![
            CoordinateSpace::labeled("X1", &["a", "b", "c"]),
            CoordinateSpace::labeled("X2", &["a", "b", "c"]),
        ]
    }

    #[test]
    fn marginal_adds_mass() {
        let m = DiscreteMeasure::new(abc(), vec![(vec![0, 1], rat(1, 2)), (vec![0, 2], rat(1, 2))])
            .unwrap();
        let m1 = m.marginal(&[0]).unwrap();
        assert_eq!(m1.support(), &[(vec![0], rat(1, 1))]);
        assert_eq!(m.marginal(&[0, 1]).unwrap(), m);
        assert_eq!(m.marginal(&[]), Err(Error::EmptySubset));
    }

    #[test]
    fn merges_and_normalizes() {
        let m = DiscreteMeasure::new(
            abc(),
            vec![
                (vec![1, 1], rat(1, 4)),
                (vec![1, 1], rat(1, 4)),
                (vec![0, 0], rat(1, 2)),
                (vec![2, 2], rat(0, 1)),
            ],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.probability(&[1, 1]), rat(1, 2));
        assert!(DiscreteMeasure::new(abc(), vec![(vec![0, 0], rat(1, 2))]).is_err());
    }

    #[test]
    fn product_measure() {
        let a = DiscreteMeasure::uniform(vec![CoordinateSpace::labeled("A", &["0", "1"])], vec![vec![0], vec![1]])
            .unwrap();
        let p = DiscreteMeasure::product(&[a.clone(), a]).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.probability(&[1, 0]), rat(1, 4));
    }

    #[test]
    fn real_line_sorts_values() {
        let s = CoordinateSpace::real_line("X", &[rat(2, 1), rat(-1, 1), rat(2, 1)]);
        assert_eq!(s.atoms(), &["-1".to_string(), "2".to_string()]);
        assert_eq!(s.real_value(1), Some(&rat(2, 1)));
    }
}
