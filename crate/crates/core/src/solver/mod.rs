//! Sparse assembly and linear solvers for `−div(A∇·) + λ`.

mod assemble;
mod csr;
mod fft_solve;
mod krylov;

pub use assemble::{apply_composed, assemble, edge_flux, SparseOperator};
pub use csr::CsrMatrix;
pub use fft_solve::{solve_fft, solve_fft_report};
pub use krylov::{solve_krylov, solve_vector, Preconditioner, SolveMethod, SolveOptions, SolveReport};
