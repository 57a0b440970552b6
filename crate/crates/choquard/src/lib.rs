//! Variational solver for Choquard-type nonlocal elliptic energies on
//! bounded domains.
//!
//! The energy couples a field to itself through a Riesz-potential
//! convolution; its critical points on the Nehari manifold are positive
//! solutions of the underlying nonlocal PDE. The crate provides
//!
//! * masked finite-difference grids over a small domain catalog (ball,
//!   annulus, multi-hole, box) with exact Dirichlet masking ([`grid`]);
//! * FFT-accelerated Riesz convolution with a direct-summation oracle
//!   ([`riesz`]);
//! * the energy functional, its Sobolev gradient, and the closed-form Nehari
//!   projection ([`energy`]);
//! * closed-form bubble profiles and a radial-quadrature oracle for the
//!   whole-space constants S_{H,L} and m_* ([`bubbles`]);
//! * projected-descent solvers: multi-start over the inner region, an
//!   exponent sweep, and a min-max path search for higher saddles
//!   ([`solver`]);
//! * barycenter diagnostics, solution-class deduplication, and the
//!   multiplicity verdict against the domain's declared topology
//!   ([`diagnostics`]);
//! * config-driven experiment runners with reproducible manifests
//!   ([`experiments`]).
//!
//! See the crate examples for end-to-end usage; the `choquard` binary wraps
//! the runners as subcommands.

pub mod bubbles;
pub mod diagnostics;
pub mod energy;
mod error;
pub mod experiments;
pub mod grid;
pub mod riesz;
pub mod solver;

pub use error::{Error, Result};

pub use bubbles::{bubble_eval, critical_constants, BubbleSpec, CriticalConstants, RadialProfile};
pub use diagnostics::{barycenter, dedup, multiplicity_verdict, ClassSummary, Verdict};
pub use energy::{ChoquardParams, EnergyReport};
pub use grid::{build_grid, in_omega_r_plus, DomainSpec, Field, Grid};
pub use riesz::{build_kernel, convolve_direct, convolve_fft, RieszKernel};
pub use solver::{
    eps_sweep, multistart, nehari_descent, path_minmax, PathOutcome, SolutionRecord, SolverConfig,
};
