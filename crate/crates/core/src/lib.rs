//! Age-structured chemostat: simulation and global-stability certification.
//!
//! The model couples a McKendrick-von Foerster transport PDE for the
//! population age density `f(t, a)` with an ODE for the limiting substrate
//! `S(t)` through a renewal boundary condition and a nonlocal consumption
//! term. This crate computes the interior equilibrium, integrates the
//! coupled system on a characteristics-aligned grid, evaluates a Lyapunov
//! functional and its exact derivative along trajectories, and assembles
//! and checks the sufficient stability conditions (a 3x3 positive
//! definiteness test plus four scalar inequalities).
//!
//! The `parallel` feature (on by default) uses rayon for the data-parallel
//! parts: the dilution-rate feasibility scan, the certificate search, and
//! per-snapshot trajectory diagnostics. A sequential fallback is compiled
//! when the feature is disabled.

pub mod certificate;
pub mod equilibrium;
pub mod error;
pub mod func;
pub mod grid;
pub mod io;
pub mod lyapunov;
pub mod model;
pub mod simulator;
pub mod sym3;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Map-like parallel iteration helper: applies `f` to each index in
/// `0..n`, collecting results in index order. Uses rayon when the
/// `parallel` feature is enabled.
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential counterpart of [`indexed_map`], available regardless of
/// features so benchmarks can compare both code paths.
pub fn indexed_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
