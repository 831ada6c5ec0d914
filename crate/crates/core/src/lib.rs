//! Numerically exact single-exciton transfer in a molecular dimer coupled to
//! truncated harmonic phonon modes.
//!
//! The crate builds the dimer Hamiltonian for several bath pictures (one
//! shared anti-correlated bath, independent local baths, the rotated
//! relative/center-of-mass picture, and the α-correlated family), propagates
//! product thermal initial states exactly through one Hermitian
//! eigendecomposition, and compares the reduced electronic dynamics.

pub mod dynamics;
pub mod equivalence;
pub mod error;
mod linalg;
pub mod models;
pub mod spaces;
pub mod thermal;

pub use faer::c64;
pub use linalg::CMat;

pub use error::{Error, Result};

/// Threads for the dense linear algebra and for independent jobs; `1`
/// makes results bit-reproducible. Call before any other work.
/// Sets the worker count for dense linear algebra and parallel sweeps.
pub fn set_threads(n: usize) {
    let n = n.max(1);
    let par = if n == 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(n)
    };
    faer::set_global_parallelism(par);
    // fails only if the global pool already exists
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}
