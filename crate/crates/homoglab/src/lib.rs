//! Numerical laboratory for stochastic homogenization of divergence-form
//! elliptic PDEs with random coefficients.
//!
//! The crate generates stationary-ergodic random coefficient fields
//! (random checkerboards with a uniform global offset), solves the
//! ε-scaled problems in 1D (essentially exactly, by flux integration)
//! and in 2D (Q1 finite elements with preconditioned CG), and estimates
//! effective coefficients via the 1D harmonic-mean formula and the
//! periodization cell problem on a torus of side `L`.
//!
//! Module map:
//! - [`ergodics`] — cat-map dynamics on the 2-torus: orbits, Birkhoff
//!   time averages, exact rational period detection.
//! - [`fields`] — seeded coefficient fields, ε-scaling, spatial
//!   (Birkhoff) averaging.
//! - [`solve1d`] — exact 1D two-point solver and L² error utilities.
//! - [`fem2d`] — structured Q1 assembly (Dirichlet and periodic cell
//!   problems), CSR matrices, Jacobi-preconditioned CG.
//! - [`homog`] — effective-coefficient estimators, Voigt–Reuss bounds,
//!   energy/SPD consistency checks.
//! - [`studies`] — declarative experiment configs and CSV reports.
//! - [`cli`] — the `homoglab` command-line interface.

pub mod cli;
pub mod ergodics;
pub mod error;
pub mod fem2d;
pub mod fields;
pub mod homog;
pub mod solve1d;
pub mod studies;

pub use error::Error;
