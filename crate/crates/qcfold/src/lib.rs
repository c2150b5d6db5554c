//! Solvers for planar surface folding maps via alternating Beltrami equations.
//!
//! The crate models folds of a flat surface as solutions of `f_zbar = mu f_z`
//! where the Beltrami coefficient `mu` is allowed to cross the unit circle:
//! `|mu| < 1` on orientation-preserving regions, `|mu| > 1` (up to `mu = inf`)
//! on orientation-reversing ones. Everything is discretized with linear
//! elements on triangle meshes and solved as sparse symmetric linear systems.
//!
//! Module map:
//!
//! - [`mesh`]: validated planar triangle meshes, OBJ I/O, pin sets.
//! - [`coeff`]: Beltrami coefficients on the extended plane and the matrix
//!   calculus attached to them.
//! - [`assembly`]: sparse system `M = diag(L, L) - 2A` in signed or
//!   generalized (unsigned-area) mode.
//! - [`solver`]: pin-constrained solves of `Mx = 0`, energies, loss.
//! - [`foldconfig`]: fold colorings, singular vertices, Kawasaki defects,
//!   distortion, folding-line straightening.
//! - [`reinforce`]: the reinforcement iteration recovering flat-foldable
//!   configurations from partial data.
//! - [`patterns`]: Miura-ori generation, conformal composition, and
//!   flat-foldability repair.
//! - [`meshgen`]: structured and randomized mesh generators.
//! - [`synthetic`]: synthetic folded-surface recovery problems used by the
//!   test suite and benchmarks.

pub mod assembly;
pub mod coeff;
pub mod foldconfig;
pub mod mesh;
pub mod meshgen;
pub mod patterns;
pub mod reinforce;
pub mod solver;
pub mod synthetic;

pub use assembly::{Mode, SparseSymmetricSystem};
pub use coeff::{BeltramiField, Mu};
pub use foldconfig::FoldColoring;
pub use mesh::{Pin, PinSet, Point, TriMesh};
pub use reinforce::{IterationLog, ReinforceProblem};
pub use solver::SolveResult;
