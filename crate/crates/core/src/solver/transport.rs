//! Vertices of transportation polytopes and per-block linear minimization.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use num_traits::Zero;

use super::lp::{solve_lp, transport_lp};
use crate::error::{Error, Result};
use crate::scalar::{rational_to_f64, Rational};

/// Default largest enumerated polytope, rows and columns.
pub const DIMENSION_CAP: usize = 6;
/// Default largest vertex list kept per polytope.
pub const VERTEX_CAP: usize = 100_000;

type Sparse = Vec<(usize, Rational)>;
type Memo = HashMap<(Vec<Rational>, Vec<Rational>), Rc<BTreeSet<Sparse>>>;

/// All vertices of `{x ≥ 0 : Σ_j x_ij = r_i, Σ_i x_ij = c_j}`, as dense
/// row-major matrices in a deterministic order.
///
/// Every vertex has a forest support, and a forest has a leaf line carrying its
/// whole margin on one cell; peeling leaves recursively generates exactly the
/// vertices.
pub fn enumerate_vertices(rows: &[Rational], cols: &[Rational]) -> Result<Vec<Vec<Rational>>> {
    enumerate_vertices_capped(rows, cols, DIMENSION_CAP, VERTEX_CAP)
}

pub fn enumerate_vertices_capped(
    rows: &[Rational],
    cols: &[Rational],
    dim_cap: usize,
    vertex_cap: usize,
) -> Result<Vec<Vec<Rational>>> {
    let (r, c) = (rows.len(), cols.len());
    if r > dim_cap || c > dim_cap {
        return Err(Error::DimensionCap {
            rows: r,
            cols: c,
            cap: dim_cap,
        });
    }
    let rs: Rational = rows.iter().cloned().sum();
    let cs: Rational = cols.iter().cloned().sum();
    if rs != cs {
        return Err(Error::ShapeMismatch("margins have different totals".into()));
    }
    let mut memo = Memo::new();
    let set = peel(rows.to_vec(), cols.to_vec(), &mut memo, vertex_cap)?;
    Ok(set
        .iter()
        .map(|sparse| {
            let mut dense = vec![Rational::zero(); r * c];
            for (k, v) in sparse {
                dense[*k] = v.clone();
            }
            dense
        })
        .collect())
}

fn peel(
    rows: Vec<Rational>,
    cols: Vec<Rational>,
    memo: &mut Memo,
    cap: usize,
) -> Result<Rc<BTreeSet<Sparse>>> {
    let key = (rows, cols);
    if let Some(hit) = memo.get(&key) {
        return Ok(hit.clone());
    }
    let (rows, cols) = &key;
    let c = cols.len();
    let active_rows: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].is_zero()).collect();
    let active_cols: Vec<usize> = (0..c).filter(|&j| !cols[j].is_zero()).collect();
    let mut out: BTreeSet<Sparse> = BTreeSet::new();
    if active_rows.is_empty() {
        out.insert(Vec::new());
    } else {
        let mut extend = |i: usize, j: usize, v: Rational, out: &mut BTreeSet<Sparse>| -> Result<()> {
            let mut r2 = rows.clone();
            let mut c2 = cols.clone();
            r2[i] -= &v;
            c2[j] -= &v;
            for sub in peel(r2, c2, memo, cap)?.iter() {
                let mut s = sub.clone();
                let pos = s.partition_point(|(k, _)| *k < i * c + j);
                s.insert(pos, (i * c + j, v.clone()));
                out.insert(s);
                if out.len() > cap {
                    return Err(Error::VertexCap(cap));
                }
            }
            Ok(())
        };
        for &i in &active_rows {
            for &j in &active_cols {
                if rows[i] <= cols[j] {
                    extend(i, j, rows[i].clone(), &mut out)?;
                }
            }
        }
        for &j in &active_cols {
            for &i in &active_rows {
                if cols[j] < rows[i] {
                    extend(i, j, cols[j].clone(), &mut out)?;
                }
            }
        }
    }
    let rc = Rc::new(out);
    memo.insert(key.clone(), rc.clone());
    Ok(rc)
}

/// Index and value of the vertex minimizing `Σ coef·x`; the first minimizer
/// (up to 1e-12) wins.
pub fn best_vertex(vertices: &[Vec<f64>], coef: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, v) in vertices.iter().enumerate() {
        let val: f64 = v.iter().zip(coef).map(|(a, b)| a * b).sum();
        if val < best.1 - 1e-12 {
            best = (k, val);
        }
    }
    best
}

/// Minimizes `Σ coef·x` over the polytope with the float LP; used when the
/// polytope is too large to enumerate.
pub fn solve_block_lp(rows: &[Rational], cols: &[Rational], coef: &[f64]) -> Result<(Vec<f64>, f64)> {
    let s = solve_lp(&transport_lp(rows, cols, coef))?;
    Ok((s.x, s.value))
}

pub fn to_f64(v: &[Rational]) -> Vec<f64> {
    v.iter().map(rational_to_f64).collect()
}
