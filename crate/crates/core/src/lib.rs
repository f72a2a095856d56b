//! Block Kaczmarz solvers and the minimal-error Krylov method they induce.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, symmetric eigendecomposition, pseudoinverse application
//! - [`system`]: row-block partitions of `Ax = b` and the per-block projectors
//! - [`sweep`]: one block Kaczmarz cycle and the plain fixed-point iteration
//! - [`accel`]: affine-subspace (Gearhart-Koshy type) acceleration via normal equations
//! - [`minerr`]: the Gram-Schmidt based minimal-error Krylov method
//! - [`operator`]: explicit affine form `P(x) = Tx + g`, `C = I - T`, spectral diagnostics
//! - [`gmres`]: matrix-free GMRES on `Cx = g` as the residual-minimising baseline
//! - [`oracle`]: brute-force Krylov bases and best approximations used for verification
//! - [`problems`]: seeded generators and Matrix Market I/O
//! - [`experiment`]: the experiment runner behind the `kkrylov` binary

pub mod accel;
pub mod error;
pub mod experiment;
pub mod gmres;
pub mod minerr;
pub mod numerics;
pub mod operator;
pub mod oracle;
pub mod problems;
pub mod sweep;
pub mod system;
pub mod trace;

pub use error::{Error, Result};
pub use numerics::Matrix;
pub use system::{BlockProjector, PartitionedSystem};
pub use trace::{IterationRecord, SolveOptions, SolveStatus, SolveTrace};
