//! Numerical toolkit for least-energy states of the quasilinear system
//! -div(|∇u_i|^{p-2} ∇u_i) = g_i(u) on R^N, computed by constrained energy
//! minimization on a uniform grid and cross-checked against a radial
//! shooting solver plus a suite of structural verdicts (Pohozaev balance,
//! symmetry, sign, radial monotonicity, constraint halving).

pub mod error;
pub mod field;
pub mod functionals;
pub mod io;
pub mod nonlinearity;
pub mod oracle;
pub mod solver;
pub mod transforms;
pub mod verify;

pub use error::{
    FieldError, FunctionalError, NonlinearityError, OracleError, SolverError, TransformError,
    VerifyError,
};
pub use field::{Field, Grid};
pub use functionals::{EnergyReport, ProblemSpec, Regime};
pub use nonlinearity::Nonlinearity;
pub use solver::{SolverConfig, SolverResult};
pub use verify::Verdict;
