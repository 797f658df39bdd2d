//! Ground costs between support points and min-plus metric repair.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DiscreteMeasure;
use crate::scalar::{parse_rational, rational_to_f64, Rational};

/// Tolerance used when validating explicit coordinate metrics.
pub const METRIC_TOL: f64 = 1e-12;

/// Distance on a single coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum CoordinateMetric {
    /// Euclidean norm between embedding vectors.
    EuclideanOnEmbedding,
    /// `|x - y|` between one-dimensional embeddings.
    AbsDiff,
    /// Distances between named atoms.
    Explicit { atoms: Vec<String>, matrix: Vec<Vec<f64>> },
}

impl CoordinateMetric {
    pub fn explicit(atoms: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<CoordinateMetric> {
        if matrix.len() != atoms.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} atoms but {} rows",
                atoms.len(),
                matrix.len()
            )));
        }
        let report = validate_metric(&matrix, METRIC_TOL)?;
        if !report.ok {
            return Err(Error::InvalidMatrix(
                "explicit coordinate metric violates the metric axioms".into(),
            ));
        }
        Ok(CoordinateMetric::Explicit { atoms, matrix })
    }
}

/// Cost between joint support points.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundCost {
    /// `(Σ_i d_i(x_i, y_i))^p`.
    AdditivePow { p: f64, metrics: Vec<CoordinateMetric> },
    /// `‖x - y‖_2^p` on the concatenated embeddings.
    EuclideanPow { p: f64 },
    /// `M[x][y]^p` with rows and columns labeled by atom-name tuples.
    JointMatrixPow {
        p: f64,
        labels: Vec<Vec<String>>,
        matrix: Vec<Vec<f64>>,
    },
}

/// A dense `|supp μ| × |supp ν|` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

fn pow(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

impl GroundCost {
    /// Additive cost with the same metric on `n` coordinates.
    pub fn additive(p: f64, metric: CoordinateMetric, n: usize) -> GroundCost {
        GroundCost::AdditivePow {
            p,
            metrics: vec![metric; n],
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            GroundCost::AdditivePow { p, .. }
            | GroundCost::EuclideanPow { p }
            | GroundCost::JointMatrixPow { p, .. } => *p,
        }
    }

    /// Same cost with a different exponent.
    pub fn with_p(&self, p: f64) -> GroundCost {
        let mut c = self.clone();
        match &mut c {
            GroundCost::AdditivePow { p: q, .. }
            | GroundCost::EuclideanPow { p: q }
            | GroundCost::JointMatrixPow { p: q, .. } => *q = p,
        }
        c
    }

    /// Whether the cost is a sum of per-coordinate terms.
    pub fn is_separable(&self) -> bool {
        match self {
            GroundCost::AdditivePow { p, .. } => *p == 1.0,
            GroundCost::EuclideanPow { p } => *p == 2.0,
            GroundCost::JointMatrixPow { .. } => false,
        }
    }

    /// Distance on coordinate `i` between atom `a` of `mu` and atom `b` of `nu`.
    pub fn coordinate_distance(
        &self,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        i: usize,
        a: usize,
        b: usize,
    ) -> Result<f64> {
        let metric = match self {
            GroundCost::AdditivePow { metrics, .. } => metrics
                .get(i)
                .ok_or_else(|| Error::ShapeMismatch(format!("no metric for coordinate {}", i + 1)))?,
            GroundCost::EuclideanPow { .. } => &CoordinateMetric::EuclideanOnEmbedding,
            GroundCost::JointMatrixPow { .. } => {
                return Err(Error::ShapeMismatch("joint costs have no coordinate terms".into()))
            }
        };
        match metric {
            CoordinateMetric::EuclideanOnEmbedding => {
                Ok(rational_to_f64(&squared(mu, nu, i, a, b)?).sqrt())
            }
            CoordinateMetric::AbsDiff => {
                let x = mu.space(i).real_value(a).ok_or(Error::NoEmbedding(i + 1))?;
                let y = nu.space(i).real_value(b).ok_or(Error::NoEmbedding(i + 1))?;
                Ok(rational_to_f64(&(x - y)).abs())
            }
            CoordinateMetric::Explicit { atoms, matrix } => {
                let name_a = &mu.space(i).atoms()[a];
                let name_b = &nu.space(i).atoms()[b];
                let ia = atoms.iter().position(|s| s == name_a);
                let ib = atoms.iter().position(|s| s == name_b);
                match (ia, ib) {
                    (Some(ia), Some(ib)) => Ok(matrix[ia][ib]),
                    _ => Err(Error::MissingPair(format!("({name_a}, {name_b})"))),
                }
            }
        }
    }

    /// Per-coordinate term of a separable cost.
    pub fn coordinate_cost(
        &self,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        i: usize,
        a: usize,
        b: usize,
    ) -> Result<f64> {
        match self {
            GroundCost::EuclideanPow { p } if *p == 2.0 => {
                Ok(rational_to_f64(&squared(mu, nu, i, a, b)?))
            }
            GroundCost::AdditivePow { p, .. } if *p == 1.0 => {
                self.coordinate_distance(mu, nu, i, a, b)
            }
            _ => Err(Error::ShapeMismatch("cost is not separable".into())),
        }
    }

    /// `c(x, y)` for support tuples `x` of `mu` and `y` of `nu`.
    pub fn cost(
        &self,
        mu: &DiscreteMeasure,
        x: &[usize],
        nu: &DiscreteMeasure,
        y: &[usize],
    ) -> Result<f64> {
        match self {
            GroundCost::AdditivePow { p, .. } => {
                let mut d = 0.0;
                for i in 0..x.len() {
                    d += self.coordinate_distance(mu, nu, i, x[i], y[i])?;
                }
                Ok(pow(d, *p))
            }
            GroundCost::EuclideanPow { p } => {
                let mut s = Rational::from_integer(0.into());
                for i in 0..x.len() {
                    s += squared(mu, nu, i, x[i], y[i])?;
                }
                let s = rational_to_f64(&s);
                Ok(if *p == 2.0 { s } else { pow(s.sqrt(), *p) })
            }
            GroundCost::JointMatrixPow { p, labels, matrix } => {
                let lx = mu.atom_names(x);
                let ly = nu.atom_names(y);
                let ix = labels.iter().position(|l| *l == lx);
                let iy = labels.iter().position(|l| *l == ly);
                match (ix, iy) {
                    (Some(i), Some(j)) => Ok(pow(matrix[i][j], *p)),
                    _ => Err(Error::MissingPair(format!(
                        "({}) -> ({})",
                        lx.join(", "),
                        ly.join(", ")
                    ))),
                }
            }
        }
    }
}

fn squared(mu: &DiscreteMeasure, nu: &DiscreteMeasure, i: usize, a: usize, b: usize) -> Result<Rational> {
    let x = mu.space(i).point(a).ok_or(Error::NoEmbedding(i + 1))?;
    let y = nu.space(i).point(b).ok_or(Error::NoEmbedding(i + 1))?;
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "embedding dimensions differ on coordinate {}",
            i + 1
        )));
    }
    let mut s = Rational::from_integer(0.into());
    for (u, v) in x.iter().zip(y) {
        let d = u - v;
        s += &d * &d;
    }
    Ok(s)
}

/// `d_X(x, y)^p` over `supp μ × supp ν`.
pub fn cost_matrix(cost: &GroundCost, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<CostMatrix> {
    let mut data = Vec::with_capacity(mu.len() * nu.len());
    for (x, _) in mu.support() {
        for (y, _) in nu.support() {
            data.push(cost.cost(mu, x, nu, y)?);
        }
    }
    Ok(CostMatrix {
        rows: mu.len(),
        cols: nu.len(),
        data,
    })
}

fn check_square(m: &[Vec<f64>]) -> Result<usize> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidMatrix("matrix is not square".into()));
    }
    Ok(n)
}

/// Min-plus repair: `M^k_ij = min(M^{k-1}_ij, min_m M^{k-1}_im + M^{k-1}_mj)`,
/// iterated with full sweeps until nothing changes. Shortcuts shorter by at
/// most `METRIC_TOL` are treated as ties.
pub fn metric_repair(m0: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_repair_input(m0, |x| *x < 0.0, |x| *x == 0.0)?;
    Ok(min_plus_fixpoint(m0.to_vec(), |via, cur| *via < *cur - METRIC_TOL))
}

/// Exact repair over rationals.
pub fn metric_repair_exact(m0: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    check_repair_input(m0, |x| x.is_negative(), |x| x.is_zero())?;
    Ok(min_plus_fixpoint(m0.to_vec(), |via, cur| via < cur))
}

fn check_repair_input<T: PartialEq>(m0: &[Vec<T>], negative: impl Fn(&T) -> bool, zero: impl Fn(&T) -> bool) -> Result<()> {
    let n = m0.len();
    if m0.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidMatrix("matrix is not square".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if negative(&m0[i][j]) {
                return Err(Error::NegativeEntry { i: i + 1, j: j + 1 });
            }
            if m0[i][j] != m0[j][i] {
                return Err(Error::AsymmetricInput { i: i + 1, j: j + 1 });
            }
        }
        if !zero(&m0[i][i]) {
            return Err(Error::InvalidMatrix(format!("nonzero diagonal at {}", i + 1)));
        }
    }
    Ok(())
}

fn min_plus_fixpoint<T>(mut prev: Vec<Vec<T>>, shorter: impl Fn(&T, &T) -> bool) -> Vec<Vec<T>>
where
    T: Clone + PartialEq,
    for<'a> &'a T: std::ops::Add<&'a T, Output = T>,
{
    let n = prev.len();
    loop {
        let mut next = prev.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let via = &prev[i][k] + &prev[k][j];
                    if shorter(&via, &next[i][j]) {
                        next[i][j] = via;
                    }
                }
            }
        }
        if next == prev {
            return next;
        }
        prev = next;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleViolation {
    /// 1-based indices: `M[i][j] > M[i][k] + M[k][j]`.
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub ok: bool,
    pub triangle_violations: Vec<TriangleViolation>,
    pub asymmetries: Vec<(usize, usize)>,
    pub nonzero_diagonal: Vec<usize>,
    pub negative_entries: Vec<(usize, usize)>,
    /// Distinct points at distance zero; accepted (pseudometric), reported as a warning.
    pub identical_points: Vec<(usize, usize)>,
}

pub fn validate_metric(m: &[Vec<f64>], tol: f64) -> Result<MetricReport> {
    let n = check_square(m)?;
    let mut r = MetricReport {
        ok: true,
        triangle_violations: Vec::new(),
        asymmetries: Vec::new(),
        nonzero_diagonal: Vec::new(),
        negative_entries: Vec::new(),
        identical_points: Vec::new(),
    };
    for i in 0..n {
        if m[i][i] != 0.0 {
            r.nonzero_diagonal.push(i + 1);
        }
        for j in 0..n {
            if m[i][j] < 0.0 {
                r.negative_entries.push((i + 1, j + 1));
            }
            if i < j && (m[i][j] - m[j][i]).abs() > tol {
                r.asymmetries.push((i + 1, j + 1));
            }
            if i < j && m[i][j] == 0.0 {
                r.identical_points.push((i + 1, j + 1));
            }
            for k in 0..n {
                let excess = m[i][j] - (m[i][k] + m[k][j]);
                if excess > tol {
                    r.triangle_violations.push(TriangleViolation {
                        i: i + 1,
                        j: j + 1,
                        k: k + 1,
                        excess,
                    });
                }
            }
        }
    }
    r.ok = r.triangle_violations.is_empty()
        && r.asymmetries.is_empty()
        && r.nonzero_diagonal.is_empty()
        && r.negative_entries.is_empty();
    Ok(r)
}

/// Parses a headerless, comma-separated, row-major matrix.
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad matrix entry '{f}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

const APPENDIX_B_CSV: &str = include_str!("../data/appendix_b_matrix.csv");

/// The bundled 12×12 triangle-counterexample matrix, rows in the order of the
/// support sequences of μ, ν and η.
pub fn appendix_b_matrix() -> Vec<Vec<f64>> {
    parse_matrix_csv(APPENDIX_B_CSV).expect("bundled matrix parses")
}

/// The bundled matrix with its decimal entries as exact rationals.
pub fn appendix_b_matrix_exact() -> Vec<Vec<Rational>> {
    APPENDIX_B_CSV
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|f| parse_rational(f.trim()).expect("decimal entry")).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoordinateSpace;
    use crate::scalar::int;

    fn bad3() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ]
    }

    #[test]
    fn repair_closes_shortcuts() {
        let r = metric_repair(&bad3()).unwrap();
        assert_eq!(r[0][2], 2.0);
        assert_eq!(r[2][0], 2.0);
        assert_eq!(metric_repair(&r).unwrap(), r);
        assert!(validate_metric(&r, 0.0).unwrap().ok);
    }

    #[test]
    fn validation_reports_the_violated_triple() {
        let v = validate_metric(&bad3(), 0.0).unwrap();
        assert!(!v.ok);
        assert!(v
            .triangle_violations
            .iter()
            .any(|t| (t.i, t.j, t.k) == (1, 3, 2)));
    }

    #[test]
    fn zero_matrix_is_a_pseudometric() {
        let z = vec![vec![0.0; 3]; 3];
        let v = validate_metric(&z, 0.0).unwrap();
        assert!(v.ok);
        assert_eq!(v.identical_points.len(), 3);
    }

    #[test]
    fn repair_rejects_bad_input() {
        let mut m = bad3();
        m[0][1] = 2.0;
        assert_eq!(metric_repair(&m), Err(Error::AsymmetricInput { i: 1, j: 2 }));
        let mut m = bad3();
        m[0][1] = -1.0;
        m[1][0] = -1.0;
        assert_eq!(metric_repair(&m), Err(Error::NegativeEntry { i: 1, j: 2 }));
    }

    #[test]
    fn bundled_matrix_is_a_fixpoint() {
        let m = appendix_b_matrix();
        assert_eq!(m.len(), 12);
        assert_eq!(m[0][1], 0.53);
        assert!(validate_metric(&m, METRIC_TOL).unwrap().ok);
        assert_eq!(metric_repair(&m).unwrap(), m);
        let e = appendix_b_matrix_exact();
        assert_eq!(metric_repair_exact(&e).unwrap(), e);
    }

    #[test]
    fn additive_squared_cost() {
        let s = CoordinateSpace::real_line("X", &[int(0), int(1)]);
        let spaces = vec![s.clone(), s.clone(), s];
        let mu = DiscreteMeasure::dirac(spaces.clone(), vec![0, 0, 0]).unwrap();
        let nu = DiscreteMeasure::dirac(spaces, vec![0, 1, 0]).unwrap();
        let c = GroundCost::additive(2.0, CoordinateMetric::AbsDiff, 3);
        assert_eq!(cost_matrix(&c, &mu, &nu).unwrap().get(0, 0), 1.0);
        assert_eq!(cost_matrix(&c, &mu, &mu).unwrap().get(0, 0), 0.0);
        let e = GroundCost::EuclideanPow { p: 2.0 };
        assert_eq!(cost_matrix(&e, &mu, &nu).unwrap().get(0, 0), 1.0);
    }
}
