//! Exact bicausal optima by backward recursion over kernel blocks.
//!
//! Two structures admit a dynamic program:
//! - forests with a cost that is a sum of per-coordinate terms, where the value
//!   of a block is its own cost plus the values of the child blocks it feeds;
//! - graphs where every vertex has all its predecessors as parents, where
//!   blocks are indexed by whole histories.
//!
//! Each block is minimized exactly over its vertices, so the result is a
//! global optimum.

use std::collections::HashMap;

use super::transport::{best_vertex, solve_block_lp};
use super::{finish, Method, SolveOptions, SolveReport, Status};
use crate::error::{Error, Result};
use crate::metric::{cost_matrix, GroundCost};
use crate::model::{AtomTuple, CausalGraph, Dag};
use crate::programs::{Coupling, CouplingClass, KernelBlocks};

/// Every vertex's parents are all of its predecessors.
pub fn has_full_history(dag: &Dag) -> bool {
    (0..dag.n()).all(|v| dag.parents(v).len() == dag.position(v))
}

pub fn supports_recursion(dag: &Dag, cost: &GroundCost) -> bool {
    (dag.is_forest() && cost.is_separable()) || has_full_history(dag)
}

type Key = (usize, AtomTuple, AtomTuple);

enum Pick {
    Vertex(usize),
    Free(Vec<f64>),
}

fn minimize(blocks: &KernelBlocks, b: usize, coef: &[f64]) -> Result<(Pick, f64)> {
    let blk = &blocks.blocks[b];
    match &blk.vertices_f64 {
        Some(vs) => {
            let (k, v) = best_vertex(vs, coef);
            Ok((Pick::Vertex(k), v))
        }
        None => {
            let (x, v) = solve_block_lp(&blk.rows, &blk.cols, coef)?;
            Ok((Pick::Free(x), v))
        }
    }
}

pub fn solve_bicausal_recursive(blocks: &KernelBlocks, cost: &GroundCost, opts: &SolveOptions) -> Result<SolveReport> {
    let dag = &blocks.dag;
    let forest = dag.is_forest() && cost.is_separable();
    if !forest && !has_full_history(dag) {
        return Err(Error::ShapeMismatch(
            "recursion needs a forest with a separable cost, or parents equal to predecessors".into(),
        ));
    }
    let (mu, nu) = (&blocks.mu, &blocks.nu);
    let c = cost_matrix(cost, mu, nu)?;
    let index: HashMap<Key, usize> = blocks
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| ((b.vertex, b.x_pa.clone(), b.y_pa.clone()), i))
        .collect();
    let n = dag.n();
    let mut value = vec![0.0; blocks.len()];
    let mut picks: Vec<Option<Pick>> = (0..blocks.len()).map(|_| None).collect();
    for pos in (0..n).rev() {
        for &b in &blocks.blocks_at[pos] {
            let blk = &blocks.blocks[b];
            let v = blk.vertex;
            let mut coef = Vec::with_capacity(blk.cells());
            for &ra in &blk.row_atoms {
                for &ca in &blk.col_atoms {
                    let term = if forest {
                        let mut t = cost.coordinate_cost(mu, nu, v, ra, ca)?;
                        for &ch in dag.children(v) {
                            t += value[index[&(ch, vec![ra], vec![ca])]];
                        }
                        t
                    } else {
                        let mut xs = blk.x_pa.clone();
                        xs.push(ra);
                        let mut ys = blk.y_pa.clone();
                        ys.push(ca);
                        if pos + 1 < n {
                            value[index[&(dag.order()[pos + 1], xs, ys)]]
                        } else {
                            let relabel = |h: &[usize]| -> AtomTuple {
                                let mut t = vec![0; n];
                                for (i, &a) in h.iter().enumerate() {
                                    t[dag.order()[i]] = a;
                                }
                                t
                            };
                            let ix = mu.index_of(&relabel(&xs)).expect("history in support");
                            let iy = nu.index_of(&relabel(&ys)).expect("history in support");
                            c.get(ix, iy)
                        }
                    };
                    coef.push(term);
                }
            }
            let (pick, val) = minimize(blocks, b, &coef)?;
            value[b] = val;
            picks[b] = Some(pick);
        }
    }
    let picks: Vec<Pick> = picks.into_iter().map(|p| p.expect("every block visited")).collect();
    let coupling = if picks.iter().all(|p| matches!(p, Pick::Vertex(_))) {
        let selection = blocks
            .blocks
            .iter()
            .zip(&picks)
            .map(|(b, p)| match p {
                Pick::Vertex(k) => b.vertices.as_ref().expect("vertex list")[*k].clone(),
                Pick::Free(_) => unreachable!(),
            })
            .collect::<Vec<_>>();
        blocks.assemble(&selection)?
    } else {
        let selection: Vec<Vec<f64>> = blocks
            .blocks
            .iter()
            .zip(&picks)
            .map(|(b, p)| match p {
                Pick::Vertex(k) => b.vertices_f64.as_ref().expect("vertex list")[*k].clone(),
                Pick::Free(x) => x.clone(),
            })
            .collect();
        Coupling::from_f64(mu, nu, &blocks.assemble_f64(&selection))?
    };
    finish(
        &CausalGraph::Acyclic(dag.clone()),
        mu,
        nu,
        &c,
        coupling,
        CouplingClass::Bicausal,
        Status::GlobalOptimal,
        Method::Recursion,
        blocks.len() as u64,
        opts,
    )
}
