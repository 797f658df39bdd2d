//! Graphs, measures, causal mechanisms and structural causal models.

pub mod dag;
pub mod measure;
pub mod mechanism;
pub mod scm;

pub use dag::{classify_structure, validate_dag, CausalGraph, Dag, StructureClass};
pub use measure::{marginal, AtomTuple, CoordinateSpace, DiscreteMeasure};
pub use mechanism::{is_g_compatible, mechanism, Compatibility, CompatibilityWitness, ConditionalTable};
pub use scm::{lipschitz_estimate, noise_w1, scm_pushforward, Mechanism, Noise, Scm};
