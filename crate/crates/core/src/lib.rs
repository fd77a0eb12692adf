//! End-to-end protein-ligand binding pose prediction with a distance-aware
//! graph transformer.
//!
//! The pipeline: parse ligand (SDF) and protein (PDB) structures, select a
//! binding pocket, build a complete protein-ligand graph with chemical
//! features, then run stacked feature/coordinate update blocks with recycling
//! to move randomly initialized ligand atoms into the pocket. Affinity and
//! binding probability are predicted from pooled features. Training combines
//! a symmetry-aware coordinate loss with masking/denoising self-supervision;
//! evaluation uses symmetry-corrected RMSD and virtual-screening metrics.

pub mod chemio;
pub mod diffcore;
pub mod error;
pub mod graph;
pub mod heads;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod symmetry;
pub mod synth;
pub mod trainer;

pub use error::CoreError;
