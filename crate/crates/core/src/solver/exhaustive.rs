//! Global bicausal optimum by enumerating kernel vertices.
//!
//! The objective is multilinear in the kernels, so some selection of one
//! polytope vertex per block is optimal. Blocks are visited in topological
//! order; only blocks reached with positive weight are branched on, and the
//! last vertex position is minimized block by block.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::transport::best_vertex;
use super::{finish, Method, SolveOptions, SolveReport, Status};
use crate::error::{Error, Result};
use crate::metric::{cost_matrix, CostMatrix, GroundCost};
use crate::model::CausalGraph;
use crate::programs::{CouplingClass, KernelBlocks};
use crate::scalar::Rational;

const TIE: f64 = 1e-12;

struct Search<'a> {
    blocks: &'a KernelBlocks,
    cost: &'a CostMatrix,
    cap: u64,
    leaves: &'a AtomicU64,
}

#[derive(Clone)]
struct Best {
    value: f64,
    choice: Vec<usize>,
}

impl Search<'_> {
    fn alive(&self, pos: usize, w: &[f64]) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .blocks
            .cell_of
            .iter()
            .zip(w)
            .filter(|(_, &x)| x > 0.0)
            .map(|(cells, _)| cells[pos].0)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn vertices(&self, b: usize) -> Result<&[Vec<f64>]> {
        self.blocks.blocks[b]
            .vertices_f64
            .as_deref()
            .ok_or(Error::EnumerationCap(self.cap))
    }

    fn descend(&self, pos: usize, w: &[f64], b: usize, k: usize) -> Result<Vec<f64>> {
        let v = &self.vertices(b)?[k];
        Ok(self
            .blocks
            .cell_of
            .iter()
            .zip(w)
            .map(|(cells, &x)| {
                let (bb, c) = cells[pos];
                if x > 0.0 && bb == b {
                    x * v[c]
                } else {
                    x
                }
            })
            .collect())
    }

    fn run(&self, pos: usize, w: Vec<f64>, choice: &mut Vec<usize>, best: &mut Best) -> Result<()> {
        let last = self.blocks.blocks_at.len() - 1;
        let alive = self.alive(pos, &w);
        if pos == last {
            if self.leaves.fetch_add(1, Ordering::Relaxed) >= self.cap {
                return Err(Error::EnumerationCap(self.cap));
            }
            let mut coef: Vec<Vec<f64>> = alive.iter().map(|&b| vec![0.0; self.blocks.blocks[b].cells()]).collect();
            for (p, cells) in self.blocks.cell_of.iter().enumerate() {
                if w[p] > 0.0 {
                    let (b, c) = cells[pos];
                    let slot = alive.binary_search(&b).expect("alive block");
                    coef[slot][c] += w[p] * self.cost.data[p];
                }
            }
            let mut total = 0.0;
            let mut picks = Vec::with_capacity(alive.len());
            for (slot, &b) in alive.iter().enumerate() {
                let (k, v) = best_vertex(self.vertices(b)?, &coef[slot]);
                total += v;
                picks.push(k);
            }
            if total < best.value - TIE {
                best.value = total;
                best.choice.clone_from(choice);
                for (&b, &k) in alive.iter().zip(&picks) {
                    best.choice[b] = k;
                }
            }
            return Ok(());
        }
        self.branch(pos, &alive, 0, w, choice, best)
    }

    /// Odometer over the vertices of the alive blocks at `pos`, first block
    /// most significant.
    fn branch(
        &self,
        pos: usize,
        alive: &[usize],
        slot: usize,
        w: Vec<f64>,
        choice: &mut Vec<usize>,
        best: &mut Best,
    ) -> Result<()> {
        if slot == alive.len() {
            return self.run(pos + 1, w, choice, best);
        }
        let b = alive[slot];
        for k in 0..self.vertices(b)?.len() {
            choice[b] = k;
            let next = self.descend(pos, &w, b, k)?;
            self.branch(pos, alive, slot + 1, next, choice, best)?;
        }
        choice[b] = 0;
        Ok(())
    }
}

/// Kernels for a vertex choice; blocks without a vertex list get the product
/// kernel (they carry no weight).
pub(crate) fn selection_from_choice(blocks: &KernelBlocks, choice: &[usize]) -> Vec<Vec<Rational>> {
    blocks
        .blocks
        .iter()
        .zip(choice)
        .map(|(b, &k)| match &b.vertices {
            Some(v) => v[k].clone(),
            None => b.product_kernel(),
        })
        .collect()
}

/// Exhaustive global optimum over `Π^bc_G(μ, ν)`; fails with
/// `EnumerationCap` once more than `opts.max_enum` selections are visited.
pub fn solve_bicausal_exhaustive(blocks: &KernelBlocks, cost: &GroundCost, opts: &SolveOptions) -> Result<SolveReport> {
    let c = cost_matrix(cost, &blocks.mu, &blocks.nu)?;
    let leaves = AtomicU64::new(0);
    let search = Search {
        blocks,
        cost: &c,
        cap: opts.max_enum,
        leaves: &leaves,
    };
    let empty = Best {
        value: f64::INFINITY,
        choice: vec![0; blocks.len()],
    };
    let w0 = vec![1.0; blocks.num_pairs()];
    let best = if blocks.blocks_at.len() == 1 {
        let mut best = empty;
        search.run(0, w0, &mut vec![0; blocks.len()], &mut best)?;
        best
    } else {
        // One root block at the first position; split its vertices.
        let root = blocks.blocks_at[0][0];
        let count = search.vertices(root)?.len();
        let parts: Vec<Result<Best>> = (0..count)
            .into_par_iter()
            .map(|k| {
                let mut choice = vec![0; blocks.len()];
                choice[root] = k;
                let mut best = empty.clone();
                let w = search.descend(0, &w0, root, k)?;
                search.run(1, w, &mut choice, &mut best)?;
                Ok(best)
            })
            .collect();
        let mut best = empty;
        for part in parts {
            let part = part?;
            if part.value < best.value - TIE {
                best = part;
            }
        }
        best
    };
    let coupling = blocks.assemble(&selection_from_choice(blocks, &best.choice))?;
    let graph = CausalGraph::Acyclic(blocks.dag.clone());
    finish(
        &graph,
        &blocks.mu,
        &blocks.nu,
        &c,
        coupling,
        CouplingClass::Bicausal,
        Status::GlobalOptimal,
        Method::Exhaustive,
        leaves.load(Ordering::Relaxed),
        opts,
    )
}
