//! Spin Calogero-Moser pole dynamics and the matrix-valued nonlocal wave
//! equations whose soliton solutions they generate.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`]: the case-dependent functions α, V and the constant C.
//! * [`spin`]: small dense complex matrices and (co)vectors.
//! * [`scm`]: the spin Calogero-Moser equations, Bäcklund constraints and an
//!   adaptive integrator.
//! * [`soliton`]: construction and evaluation of pole solutions.
//! * [`transforms`]: Hilbert and coth/csch-kernel operators (quadrature and
//!   spectral implementations).
//! * [`pde`]: residual evaluators, a periodic spectral evolver, Hamiltonians
//!   and limit probes.
//! * [`suite`]: the acceptance battery shared by the CLI and the test suite.

pub mod error;
pub mod io;
pub mod kernel;
mod linalg;
pub mod ode;
pub mod pde;
pub mod quad;
pub mod scm;
pub mod soliton;
pub mod spin;
pub mod suite;
pub mod transforms;

pub use error::{Error, Result};
pub use kernel::{KernelCase, KernelKind};
pub use num_complex::Complex64 as C64;
pub use scm::{Family, ScmState};
pub use soliton::{Equation, SolitonData};
pub use spin::{BraVec, KetVec, SpinMatrix};
pub use transforms::{Domain, GridField};
