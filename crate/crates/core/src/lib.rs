//! Uniformly stable discretizations of well-posed linear recovery problems.
//!
//! A linear recovery problem asks for an object `u` matching prescribed data
//! `λ(u) = f_λ` for a family of linear functionals `λ`. This crate discretizes
//! such problems by pairing a finite-dimensional trial space with a finite set
//! of test functionals, stabilizes the pairing constructively by greedy
//! overtesting until the restricted data norm dominates a reference data
//! seminorm up to a target factor, and solves the resulting overdetermined
//! systems by residual minimization in the sup norm (Lawson iteration) or the
//! Euclidean norm.
//!
//! The building blocks:
//!
//! * [`kernels`] — radial kernels (Whittle–Matérn, Gaussian, multiquadric)
//!   with the closed-form Laplacians needed by collocation functionals.
//! * [`quadrature`] — Gauss–Legendre rules on intervals, squares, disks and
//!   their boundaries.
//! * [`functionals`] — the test/data functional vocabulary: point evaluations,
//!   differential-operator evaluations, global weak pairings, local weak
//!   averages and boundary flux averages, plus sampled data maps.
//! * [`trialspaces`] — polynomial, kernel-translate and representer trial
//!   spaces with nodal (Lagrange) re-basing.
//! * [`discretization`] — restrictions, stiffness assembly, stability-constant
//!   estimation and the greedy overtesting stabilizer.
//! * [`solvers`] — least-squares and discrete Chebyshev residual minimization,
//!   and optimal recovery by symmetric collocation.
//! * [`problems`] — concrete recovery problems (interpolation, strong/weak
//!   Poisson, MLPG5) with manufactured solutions and noise injection.
//! * [`harness`] — study drivers producing CSV results: stability sweeps,
//!   convergence rates, noise bounds, nodal error tracking.

pub mod discretization;
pub mod error;
pub mod field;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod problems;
pub mod quadrature;
pub mod solvers;
pub mod trialspaces;

pub use error::{Error, Result};
pub use geometry::{Ball, Domain, Point};
