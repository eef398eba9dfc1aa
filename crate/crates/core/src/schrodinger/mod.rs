//! Discretized Schrödinger operators `-ħ²Δ + V` and their spectral projectors.

pub mod agmon;
pub mod eigen;
pub mod expr;
pub mod grid;
pub mod hamiltonian;
pub mod projector;

pub use agmon::{agmon_check, AgmonReport, AgmonRow};
pub use eigen::{eigensolve, eigensolve_with, EigenOptions, EigenSystem};
pub use expr::{grad_potential, parse_potential, Expr, Func, PotentialExpr, GRAMMAR};
pub use grid::{choose_box, Grid};
pub use hamiltonian::{assemble_hamiltonian, Hamiltonian};
pub use projector::{edge_rotation, projector_kernel, rescaled_kernel, ProjectorKernel};
