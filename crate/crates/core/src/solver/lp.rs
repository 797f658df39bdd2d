//! Dense two-phase simplex for `min cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! Pivoting uses Dantzig's rule and switches to Bland's smallest-index rule
//! while the method stalls on degenerate pivots, so it cannot cycle. Ties in
//! the ratio test go to the smallest basic variable index. The arithmetic is
//! generic: `f64` with a tolerance, or exact rationals.

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar, FLOAT_TOL};

/// One equality row `Σ coef·x_var = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(usize, Rational)>,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<LinearRow>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<S> {
    pub value: S,
    pub x: Vec<S>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> LinearProgram {
        let names = (0..objective.len()).map(|i| format!("x{i}")).collect();
        LinearProgram {
            objective,
            rows: Vec::new(),
            names,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, terms: Vec<(usize, Rational)>, rhs: Rational) {
        self.rows.push(LinearRow { terms, rhs });
    }

    /// LP-format text of the program.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::from("Minimize\n obj:");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                s.push_str(&format!(" {} {} {}", if *c < 0.0 { "-" } else { "+" }, c.abs(), self.names[j]));
            }
        }
        s.push_str("\nSubject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            s.push_str(&format!(" c{i}:"));
            for (j, a) in &r.terms {
                let a = crate::scalar::rational_to_f64(a);
                s.push_str(&format!(" {} {} {}", if a < 0.0 { "-" } else { "+" }, a.abs(), self.names[*j]));
            }
            s.push_str(&format!(" = {}\n", crate::scalar::rational_to_f64(&r.rhs)));
        }
        s.push_str("End\n");
        s
    }
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    basis: Vec<usize>,
    cost: Vec<S>,
    width: usize,
    tol: S,
    iterations: usize,
}

const DEGENERATE_STREAK: usize = 50;

impl<S: Scalar> Tableau<S> {
    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let p = self.rows[r][j].clone();
        for k in 0..=w {
            let v = self.rows[r][k].clone() / p.clone();
            self.rows[r][k] = v;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j].clone();
            if f.is_zero() {
                continue;
            }
            for k in 0..=w {
                if !pivot_row[k].is_zero() {
                    let v = row[k].clone() - f.clone() * pivot_row[k].clone();
                    row[k] = v;
                }
            }
            row[j] = S::zero();
        }
        let f = self.cost[j].clone();
        if !f.is_zero() {
            for k in 0..=w {
                if !pivot_row[k].is_zero() {
                    let v = self.cost[k].clone() - f.clone() * pivot_row[k].clone();
                    self.cost[k] = v;
                }
            }
            self.cost[j] = S::zero();
        }
        self.basis[r] = j;
        self.iterations += 1;
    }

    /// Runs the simplex method over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let neg_tol = -self.tol.clone();
        let mut streak = 0usize;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let mut entering: Option<usize> = None;
            for j in 0..allowed {
                if self.cost[j] < neg_tol {
                    match entering {
                        None => entering = Some(j),
                        Some(e) if !bland && self.cost[j] < self.cost[e] => entering = Some(j),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, S)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[j] > self.tol {
                    let ratio = row[self.width].clone() / row[j].clone();
                    let better = match &leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < *best
                                || (!(ratio > *best) && self.basis[i] < self.basis[*l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio.abs() <= self.tol {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, j);
        }
    }
}

/// Solves the program with arithmetic `S`.
pub fn solve_lp_with<S: Scalar>(lp: &LinearProgram, tol: f64) -> Result<LpSolution<S>> {
    let n = lp.num_vars();
    let tol_s = S::tolerance(tol);
    let mut rows: Vec<Vec<S>> = Vec::with_capacity(lp.rows.len());
    let m = lp.rows.len();
    let width = n + m;
    for (i, r) in lp.rows.iter().enumerate() {
        let mut row = vec![S::zero(); width + 1];
        for (j, a) in &r.terms {
            if *j >= n {
                return Err(Error::ShapeMismatch(format!("row {i} references variable {j}")));
            }
            row[*j] = row[*j].clone() + S::from_rational(a);
        }
        row[width] = S::from_rational(&r.rhs);
        if row[width] < S::zero() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
        }
        row[n + i] = S::one();
        rows.push(row);
    }
    // Phase 1: minimize the sum of artificials.
    let mut cost = vec![S::zero(); width + 1];
    for row in &rows {
        for k in 0..n {
            cost[k] = cost[k].clone() - row[k].clone();
        }
        cost[width] = cost[width].clone() - row[width].clone();
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        cost,
        width,
        tol: tol_s.clone(),
        iterations: 0,
    };
    t.optimize(n)?;
    let scale = lp
        .rows
        .iter()
        .map(|r| S::from_rational(&r.rhs).abs())
        .fold(S::one(), S::max_of);
    if -t.cost[width].clone() > tol_s.clone() * scale {
        return Err(Error::Infeasible);
    }
    // Drive artificials out; rows where that is impossible are redundant.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            let col = (0..n).find(|&j| t.rows[i][j].abs() > tol_s);
            match col {
                Some(j) => {
                    t.pivot(i, j);
                    i += 1;
                }
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }
    // Phase 2.
    let c: Vec<S> = lp.objective.iter().map(|&v| S::from_f64(v)).collect();
    let mut cost = vec![S::zero(); width + 1];
    cost[..n].clone_from_slice(&c);
    for (row, &b) in t.rows.iter().zip(&t.basis) {
        let cb = c[b].clone();
        if cb.is_zero() {
            continue;
        }
        for k in 0..=width {
            if !row[k].is_zero() {
                cost[k] = cost[k].clone() - cb.clone() * row[k].clone();
            }
        }
    }
    t.cost = cost;
    t.optimize(n)?;
    let mut x = vec![S::zero(); n];
    for (row, &b) in t.rows.iter().zip(&t.basis) {
        if b < n {
            let v = row[width].clone();
            x[b] = if v < S::zero() && !S::EXACT { S::zero() } else { v };
        }
    }
    let mut value = S::zero();
    for (xj, cj) in x.iter().zip(&c) {
        value = value + xj.clone() * cj.clone();
    }
    Ok(LpSolution {
        value,
        x,
        iterations: t.iterations,
    })
}

/// Float solve with the default tolerance.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution<f64>> {
    solve_lp_with::<f64>(lp, FLOAT_TOL)
}

/// Exact rational solve.
pub fn solve_lp_exact(lp: &LinearProgram) -> Result<LpSolution<Rational>> {
    solve_lp_with::<Rational>(lp, 0.0)
}

/// The transportation LP `min Σ c_ij x_ij` over couplings of `rows` and `cols`.
pub fn transport_lp(rows: &[Rational], cols: &[Rational], cost: &[f64]) -> LinearProgram {
    let (r, c) = (rows.len(), cols.len());
    let mut lp = LinearProgram::new(cost.to_vec());
    lp.names = (0..r * c).map(|k| format!("p_{}_{}", k / c, k % c)).collect();
    let one = || Rational::from_integer(1.into());
    for (i, ri) in rows.iter().enumerate() {
        lp.add_row((0..c).map(|j| (i * c + j, one())).collect(), ri.clone());
    }
    for (j, cj) in cols.iter().enumerate() {
        lp.add_row((0..r).map(|i| (i * c + j, one())).collect(), cj.clone());
    }
    lp
}

pub fn zero_solution(n: usize) -> LpSolution<f64> {
    LpSolution {
        value: 0.0,
        x: vec![0.0; n],
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    #[test]
    fn single_equality() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row(vec![(0, int(1))], int(1));
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.x, vec![1.0]);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_row(vec![(0, int(1)), (1, int(1))], int(-1));
        assert_eq!(solve_lp(&lp).unwrap_err(), Error::Infeasible);
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_row(vec![(0, int(1)), (1, int(-1))], int(0));
        assert_eq!(solve_lp(&lp).unwrap_err(), Error::Unbounded);
    }

    #[test]
    fn exact_transport() {
        let lp = transport_lp(&[rat(1, 2), rat(1, 2)], &[rat(1, 3), rat(2, 3)], &[0.0, 1.0, 1.0, 0.0]);
        let s = solve_lp_exact(&lp).unwrap();
        assert_eq!(s.value, rat(1, 6));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..n {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn assignment_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 2..=5 {
            let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0..20) as f64).collect();
            let w = rat(1, n as i64);
            let lp = transport_lp(&vec![w.clone(); n], &vec![w; n], &cost);
            let s = solve_lp(&lp).unwrap();
            let best = permutations(n)
                .into_iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                / n as f64;
            assert!((s.value - best).abs() < 1e-9, "n={n}: {} vs {best}", s.value);
        }
    }
}
