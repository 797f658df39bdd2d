//! Multi-start block-coordinate descent over kernel blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::transport::{best_vertex, solve_block_lp};
use super::{finish, Method, SolveOptions, SolveReport, Status, BCD_IMPROVEMENT, BCD_MAX_SWEEPS};
use crate::error::Result;
use crate::metric::{cost_matrix, CostMatrix, GroundCost};
use crate::model::CausalGraph;
use crate::programs::{Coupling, CouplingClass, KernelBlocks};
use crate::scalar::rational_to_f64;

use super::exhaustive::selection_from_choice;

#[derive(Clone)]
enum Kernel {
    Vertex(usize),
    Free(Vec<f64>),
}

struct Run {
    value: f64,
    kernels: Vec<Kernel>,
    sweeps: u64,
}

fn kernel_values<'a>(blocks: &'a KernelBlocks, kernels: &'a [Kernel]) -> Vec<&'a [f64]> {
    blocks
        .blocks
        .iter()
        .zip(kernels)
        .map(|(b, k)| match k {
            Kernel::Vertex(i) => b.vertices_f64.as_ref().expect("vertex list")[*i].as_slice(),
            Kernel::Free(v) => v.as_slice(),
        })
        .collect()
}

fn objective(blocks: &KernelBlocks, c: &CostMatrix, kernels: &[Kernel]) -> f64 {
    let kv = kernel_values(blocks, kernels);
    blocks
        .cell_of
        .iter()
        .enumerate()
        .map(|(p, cells)| c.data[p] * cells.iter().map(|&(b, cell)| kv[b][cell]).product::<f64>())
        .sum()
}

fn descend(blocks: &KernelBlocks, c: &CostMatrix, mut kernels: Vec<Kernel>) -> Result<Run> {
    let mut value = objective(blocks, c, &kernels);
    let mut sweeps = 0;
    while sweeps < BCD_MAX_SWEEPS as u64 {
        sweeps += 1;
        for pos in 0..blocks.blocks_at.len() {
            let mut coef: Vec<Vec<f64>> = blocks.blocks.iter().map(|_| Vec::new()).collect();
            for &b in &blocks.blocks_at[pos] {
                coef[b] = vec![0.0; blocks.blocks[b].cells()];
            }
            {
                let kv = kernel_values(blocks, &kernels);
                for (p, cells) in blocks.cell_of.iter().enumerate() {
                    let other: f64 = cells
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != pos)
                        .map(|(_, &(b, cell))| kv[b][cell])
                        .product();
                    if other != 0.0 {
                        let (b, cell) = cells[pos];
                        coef[b][cell] += other * c.data[p];
                    }
                }
            }
            for &b in &blocks.blocks_at[pos] {
                let blk = &blocks.blocks[b];
                kernels[b] = match &blk.vertices_f64 {
                    Some(vs) => Kernel::Vertex(best_vertex(vs, &coef[b]).0),
                    None => Kernel::Free(solve_block_lp(&blk.rows, &blk.cols, &coef[b])?.0),
                };
            }
        }
        let next = objective(blocks, c, &kernels);
        let gain = value - next;
        value = next.min(value);
        if gain <= BCD_IMPROVEMENT {
            break;
        }
    }
    Ok(Run { value, kernels, sweeps })
}

fn initial(blocks: &KernelBlocks, seed: u64, restart: u64) -> Vec<Kernel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    blocks
        .blocks
        .iter()
        .map(|b| match &b.vertices {
            Some(v) => Kernel::Vertex(rng.gen_range(0..v.len())),
            None => Kernel::Free(b.product_kernel().iter().map(rational_to_f64).collect()),
        })
        .collect()
}

/// Local upper bound over `Π^bc_G(μ, ν)`: the best of `restarts` descents
/// from seeded random vertex selections.
pub fn solve_bicausal_bcd(
    blocks: &KernelBlocks,
    cost: &GroundCost,
    restarts: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let c = cost_matrix(cost, &blocks.mu, &blocks.nu)?;
    let runs: Vec<Result<Run>> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| descend(blocks, &c, initial(blocks, seed, r)))
        .collect();
    let mut best: Option<Run> = None;
    let mut sweeps = 0;
    for run in runs {
        let run = run?;
        sweeps += run.sweeps;
        if best.as_ref().is_none_or(|b| run.value < b.value - 1e-12) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let coupling = if best.kernels.iter().all(|k| matches!(k, Kernel::Vertex(_))) {
        let choice: Vec<usize> = best
            .kernels
            .iter()
            .map(|k| match k {
                Kernel::Vertex(i) => *i,
                Kernel::Free(_) => 0,
            })
            .collect();
        blocks.assemble(&selection_from_choice(blocks, &choice))?
    } else {
        let kv: Vec<Vec<f64>> = kernel_values(blocks, &best.kernels).into_iter().map(|v| v.to_vec()).collect();
        Coupling::from_f64(&blocks.mu, &blocks.nu, &blocks.assemble_f64(&kv))?
    };
    let graph = CausalGraph::Acyclic(blocks.dag.clone());
    let mut r = finish(
        &graph,
        &blocks.mu,
        &blocks.nu,
        &c,
        coupling,
        CouplingClass::Bicausal,
        Status::LocalUpperBound,
        Method::BlockCoordinateDescent,
        sweeps,
        opts,
    )?;
    r.seed = Some(seed);
    Ok(r)
}
