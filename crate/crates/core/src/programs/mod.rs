//! Couplings, compiled constraint systems, kernel blocks and membership checks.

pub mod constraints;
pub mod coupling;
pub mod kernels;
pub mod membership;

pub use constraints::{
    compile_bicausal, compile_causal, compile_marginals, BilinearConstraintFamily, BilinearEquation,
    ConditionalForm, CouplingProgram, FamilyKind, LinearConstraintFamily, LinearEquation,
};
pub use coupling::Coupling;
pub use kernels::{kernel_blocks, kernel_blocks_with, KernelBlock, KernelBlocks};
pub use membership::{check_membership, ConditionalWitness, CouplingClass, MembershipReport, Violation, MEMBERSHIP_TOL};
