//! Simulation and long-time diagnostics for the viscoelastic (non-Fickian)
//! polymer diffusion system
//!
//! ```text
//!   u_t = DΔu + EΔσ,    σ_t + β₀(u, σ)σ = μu + νu_t
//! ```
//!
//! with Dirichlet data on a 1D interval or 2D rectangle.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checks;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod ic;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{DiscreteField, DiscreteOperators, GridSpec};
pub use model::{BoundaryLift, BoundaryPreset, ModelParams, RateLaw};
pub use solver::{Integrator, Scheme, SolverConfig, State, TrajectoryRecord};

/// Maps over a slice, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sets the size of the global worker pool. Has no effect without the
/// `parallel` feature or once the pool has been initialized.
pub fn set_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}
