//! Spherical-harmonic (P_N) discontinuous Galerkin solver for the scaled,
//! steady, isotropically scattering radiative transfer equation on periodic
//! domains.
//!
//! The angular variable is expanded in real spherical harmonics up to degree
//! `N`, which turns the kinetic equation into a symmetric hyperbolic system
//! for the moment vector `u : X -> R^L`, `L = (N + 1)^2`, with flux matrices
//! `A^(i)` and the scaled reaction diagonal
//! `Q = diag(eps * sigma_a, sigma_t / eps, ..., sigma_t / eps)`.
//! That system is discretised in space with an upwind discontinuous Galerkin
//! method on uniform periodic Cartesian meshes in one dimension (slab
//! geometry) or two dimensions (plane-parallel geometry). The upwind
//! stabilisation uses the matrix absolute values `|A^(i)|`, which makes the
//! scheme stable and accurate uniformly in the scaling parameter
//! `eps in (0, 1]`.
//!
//! # Module map
//!
//! - [`harmonics`]: real spherical-harmonic moment basis, sphere quadrature,
//!   moment matrices `A^(i)`, their absolute values, and the reaction
//!   diagonal `Q`.
//! - [`geometry`]: uniform periodic Cartesian meshes with oriented interior
//!   faces.
//! - [`basis`]: orthonormal Legendre element bases, `L^2` projection, and
//!   Radau-type projections.
//! - [`assembly`]: material fields, discrete moment fields, upwind numerical
//!   flux, global sparse system assembly, and the discrete norms.
//! - [`solver`]: sparse direct factorisation and preconditioned GMRES for
//!   the assembled systems.
//! - [`reference`](mod@reference): Fourier-space reference solutions of the
//!   moment system and of the kinetic equation, plus manufactured forcing.
//! - [`study`]: convergence studies, observed orders of convergence, and
//!   moment-truncation sweeps.
//! - [`cli`]: configuration files, CSV/JSON reports, and the command-line
//!   driver used by the `pndg` binary.
//!
//! # Examples
//!
//! Each major capability has a runnable example under `examples/`:
//!
//! - `verify_matrices`: builds the moment matrices for a range of `N` and
//!   checks symmetry, sparsity structure, the three-term recursion, and the
//!   spectral bound `||A^(i)||_2 <= 1`.
//! - `slab_convergence`: observed orders of convergence for the slab
//!   (`d = 1`) problem against the Fourier moment oracle.
//! - `plane_parallel_convergence`: the same study for `d = 2`.
//! - `eps_uniformity`: error behaviour across `eps` spanning transport to
//!   diffusion regimes, including the `k = 0` locking case.
//! - `angular_decay`: moment-truncation error of P_N against the kinetic
//!   Fourier oracle for increasing `N`.
//! - `radau_projection`: Radau projection reproduction, outflow matching,
//!   and approximation order.
//! - `fourier_oracle`: solves the moment system exactly mode by mode,
//!   cross-checks the strong form at random points, and compares kinetic
//!   with P_N moments.
//! - `manufactured_convergence`: convergence against a manufactured smooth
//!   solution with spatially varying cross sections.
//!
//! Run one with `cargo run --release --example slab_convergence`.

// Index-based loops mirror the stride arithmetic of the kernels they
// implement; iterator rewrites obscure it.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod basis;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod harmonics;
pub mod quadrature;
pub mod reference;
pub mod solver;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
