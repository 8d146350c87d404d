//! P1 finite-element solver for two-dimensional barotropic compressible
//! flow with fully implicit and decoupled time stepping.

pub mod assembly;
pub mod diagnostics;
pub mod eos;
pub mod error;
pub mod linsolve;
pub mod mesh;
pub mod newton;
pub mod problem;
pub mod quadrature;
pub mod schemes;
pub mod sparse;

pub use assembly::{FeSpace, NodalField};
pub use diagnostics::DiagnosticsRecord;
pub use eos::BarotropicEos;
pub use error::{Error, Result};
pub use mesh::{Rect, Side, StructuredTriMesh};
pub use newton::{NewtonConfig, NewtonHistory, NewtonIteration};
pub use problem::GaussianPulse;
pub use schemes::{run, RunSchedule, RunSink, SchemeConfig, SchemeKind, State, StepOutcome, StepReport, Stepper};
pub use sparse::SparseMatrix;
