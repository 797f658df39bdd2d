//! Product-of-kernels parametrization of bicausal couplings.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::constraints::check_both;
use super::coupling::Coupling;
use crate::error::{Error, Result};
use crate::model::{AtomTuple, CausalGraph, ConditionalTable, Dag, DiscreteMeasure};
use crate::scalar::{rational_to_f64, Rational};
use crate::solver::transport::{enumerate_vertices_capped, to_f64, DIMENSION_CAP, VERTEX_CAP};

/// One transportation polytope `Π(μ(dx_v | x_pa), ν(dy_v | y_pa))`.
#[derive(Debug, Clone)]
pub struct KernelBlock {
    /// 0-based vertex.
    pub vertex: usize,
    pub x_pa: AtomTuple,
    pub y_pa: AtomTuple,
    /// Atoms of `X_v` with positive conditional mass, and that mass.
    pub row_atoms: Vec<usize>,
    pub rows: Vec<Rational>,
    pub col_atoms: Vec<usize>,
    pub cols: Vec<Rational>,
    /// Polytope vertices (row-major over `row_atoms × col_atoms`); absent when
    /// the polytope exceeds the enumeration caps.
    pub vertices: Option<Vec<Vec<Rational>>>,
    pub vertices_f64: Option<Vec<Vec<f64>>>,
}

impl KernelBlock {
    pub fn dims(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn cells(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    /// `μ(·|x_pa) ⊗ ν(·|y_pa)`.
    pub fn product_kernel(&self) -> Vec<Rational> {
        self.rows
            .iter()
            .flat_map(|a| self.cols.iter().map(move |b| a * b))
            .collect()
    }

    pub fn vertex_count(&self) -> Option<usize> {
        self.vertices.as_ref().map(|v| v.len())
    }

    /// Whether `kernel` couples the block's rows and columns.
    pub fn is_feasible(&self, kernel: &[Rational]) -> bool {
        let (r, c) = self.dims();
        if kernel.len() != r * c || kernel.iter().any(|k| k.is_negative()) {
            return false;
        }
        (0..r).all(|i| kernel[i * c..(i + 1) * c].iter().cloned().sum::<Rational>() == self.rows[i])
            && (0..c).all(|j| (0..r).map(|i| kernel[i * c + j].clone()).sum::<Rational>() == self.cols[j])
    }
}

/// All kernel blocks of a pair of compatible marginals, with a per-pair map
/// to the block and cell used at each vertex.
#[derive(Debug, Clone)]
pub struct KernelBlocks {
    pub dag: Dag,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub blocks: Vec<KernelBlock>,
    /// Blocks of each vertex position (topological order).
    pub blocks_at: Vec<Vec<usize>>,
    /// `cell_of[pair][position] = (block, cell)`, `pair = ix·|ν| + iy`.
    pub cell_of: Vec<Vec<(usize, usize)>>,
}

pub fn kernel_blocks(dag: &Dag, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<KernelBlocks> {
    kernel_blocks_with(dag, mu, nu, DIMENSION_CAP, VERTEX_CAP)
}

pub fn kernel_blocks_with(
    dag: &Dag,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    dim_cap: usize,
    vertex_cap: usize,
) -> Result<KernelBlocks> {
    if mu.n() != dag.n() || nu.n() != dag.n() {
        return Err(Error::ShapeMismatch("measures and graph differ in dimension".into()));
    }
    check_both(&CausalGraph::Acyclic(dag.clone()), mu, nu)?;
    let mut blocks = Vec::new();
    let mut blocks_at = Vec::new();
    let mut index: Vec<BTreeMap<(AtomTuple, AtomTuple), usize>> = Vec::new();
    for &v in dag.order() {
        let pa = dag.parents(v);
        let tx = ConditionalTable::of(mu, v, pa);
        let ty = ConditionalTable::of(nu, v, pa);
        let mut here = Vec::new();
        let mut map = BTreeMap::new();
        for (x_pa, xr) in &tx.rows {
            for (y_pa, yr) in &ty.rows {
                let (row_atoms, rows): (Vec<usize>, Vec<Rational>) =
                    xr.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(|(a, p)| (a, p.clone())).unzip();
                let (col_atoms, cols): (Vec<usize>, Vec<Rational>) =
                    yr.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(|(a, p)| (a, p.clone())).unzip();
                let vertices = match enumerate_vertices_capped(&rows, &cols, dim_cap, vertex_cap) {
                    Ok(v) => Some(v),
                    Err(Error::DimensionCap { .. }) | Err(Error::VertexCap(_)) => None,
                    Err(e) => return Err(e),
                };
                let vertices_f64 = vertices.as_ref().map(|vs| vs.iter().map(|x| to_f64(x)).collect());
                map.insert((x_pa.clone(), y_pa.clone()), blocks.len());
                here.push(blocks.len());
                blocks.push(KernelBlock {
                    vertex: v,
                    x_pa: x_pa.clone(),
                    y_pa: y_pa.clone(),
                    row_atoms,
                    rows,
                    col_atoms,
                    cols,
                    vertices,
                    vertices_f64,
                });
            }
        }
        blocks_at.push(here);
        index.push(map);
    }
    let mut cell_of = Vec::with_capacity(mu.len() * nu.len());
    for (x, _) in mu.support() {
        for (y, _) in nu.support() {
            let mut cells = Vec::with_capacity(dag.n());
            for (k, &v) in dag.order().iter().enumerate() {
                let pa = dag.parents(v);
                let xk: AtomTuple = pa.iter().map(|&u| x[u]).collect();
                let yk: AtomTuple = pa.iter().map(|&u| y[u]).collect();
                let b = index[k][&(xk, yk)];
                let blk = &blocks[b];
                let r = blk.row_atoms.binary_search(&x[v]).expect("atom in support of its mechanism");
                let c = blk.col_atoms.binary_search(&y[v]).expect("atom in support of its mechanism");
                cells.push((b, r * blk.cols.len() + c));
            }
            cell_of.push(cells);
        }
    }
    Ok(KernelBlocks {
        dag: dag.clone(),
        mu: mu.clone(),
        nu: nu.clone(),
        blocks,
        blocks_at,
        cell_of,
    })
}

impl KernelBlocks {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_pairs(&self) -> usize {
        self.cell_of.len()
    }

    pub fn product_selection(&self) -> Vec<Vec<Rational>> {
        self.blocks.iter().map(|b| b.product_kernel()).collect()
    }

    /// Selection given by one vertex index per block.
    pub fn vertex_selection(&self, choice: &[usize]) -> Option<Vec<Vec<Rational>>> {
        self.blocks
            .iter()
            .zip(choice)
            .map(|(b, &k)| b.vertices.as_ref().map(|v| v[k].clone()))
            .collect()
    }

    /// `π(x, y) = Π_i κ_i(x_i, y_i | x_pa_i, y_pa_i)`.
    pub fn assemble(&self, selection: &[Vec<Rational>]) -> Result<Coupling> {
        if selection.len() != self.blocks.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} kernels for {} blocks",
                selection.len(),
                self.blocks.len()
            )));
        }
        for (b, (blk, k)) in self.blocks.iter().zip(selection).enumerate() {
            if !blk.is_feasible(k) {
                return Err(Error::InfeasibleKernel { block: b });
            }
        }
        let weights = self
            .cell_of
            .iter()
            .map(|cells| {
                let mut w = Rational::from_integer(1.into());
                for &(b, c) in cells {
                    if w.is_zero() {
                        break;
                    }
                    w *= &selection[b][c];
                }
                w
            })
            .collect();
        Coupling::from_weights(&self.mu, &self.nu, weights)
    }

    /// Float weights of the assembled plan.
    pub fn assemble_f64(&self, selection: &[Vec<f64>]) -> Vec<f64> {
        self.cell_of
            .iter()
            .map(|cells| cells.iter().map(|&(b, c)| selection[b][c]).product())
            .collect()
    }

    /// Float kernel of the product coupling, per block.
    pub fn product_selection_f64(&self) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .map(|b| b.product_kernel().iter().map(rational_to_f64).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoordinateSpace;
    use crate::programs::membership::{check_membership, CouplingClass};
    use crate::scalar::{int, rat};

    fn example_412() -> (DiscreteMeasure, DiscreteMeasure) {
        let s = || (0..3).map(|_| CoordinateSpace::real_line("X", &[int(0), int(1)])).collect::<Vec<_>>();
        let mu = DiscreteMeasure::uniform(s(), vec![vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        let nu = DiscreteMeasure::uniform(s(), vec![vec![0, 1, 0], vec![1, 0, 1]]).unwrap();
        (mu, nu)
    }

    #[test]
    fn product_selection_assembles_product_coupling() {
        let (mu, nu) = example_412();
        let dag = Dag::markov(3);
        let kb = kernel_blocks(&dag, &mu, &nu).unwrap();
        let pi = kb.assemble(&kb.product_selection()).unwrap();
        assert_eq!(pi, Coupling::product(&mu, &nu));
    }

    #[test]
    fn identity_matching_selection() {
        let (mu, nu) = example_412();
        let dag = Dag::markov(3);
        let kb = kernel_blocks(&dag, &mu, &nu).unwrap();
        // First block couples ½/½ margins; pick the diagonal vertex.
        let first = &kb.blocks[kb.blocks_at[0][0]];
        let vs = first.vertices.as_ref().unwrap();
        let diag = vs.iter().position(|v| v[0] == rat(1, 2)).unwrap();
        let mut choice = vec![0; kb.len()];
        choice[kb.blocks_at[0][0]] = diag;
        let pi = kb.assemble(&kb.vertex_selection(&choice).unwrap()).unwrap();
        let support: Vec<_> = pi.entries().into_iter().map(|(x, y, _)| (x.clone(), y.clone())).collect();
        assert_eq!(
            support,
            vec![(vec![0, 0, 0], vec![0, 1, 0]), (vec![1, 1, 1], vec![1, 0, 1])]
        );
        let g = CausalGraph::Acyclic(dag);
        assert!(check_membership(&pi, &g, &mu, &nu, CouplingClass::Bicausal, 0.0).unwrap().member);
    }

    #[test]
    fn dirac_blocks_are_points() {
        let s = vec![CoordinateSpace::real_line("X", &[int(0), int(1)]); 2];
        let a = DiscreteMeasure::dirac(s.clone(), vec![0, 1]).unwrap();
        let b = DiscreteMeasure::dirac(s, vec![1, 1]).unwrap();
        let kb = kernel_blocks(&Dag::markov(2), &a, &b).unwrap();
        assert!(kb.blocks.iter().all(|b| b.vertex_count() == Some(1)));
        let pi = kb.assemble(&kb.product_selection()).unwrap();
        assert_eq!(pi.weights(), &[int(1)]);
    }

    #[test]
    fn infeasible_kernel_is_rejected() {
        let (mu, nu) = example_412();
        let kb = kernel_blocks(&Dag::markov(3), &mu, &nu).unwrap();
        let mut sel = kb.product_selection();
        sel[0][0] += int(1);
        assert_eq!(kb.assemble(&sel).unwrap_err(), Error::InfeasibleKernel { block: 0 });
    }
}
