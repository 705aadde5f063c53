//! Explicit peakon-antipeakon solutions of the Camassa–Holm equation through
//! wave breaking, in Eulerian and Lagrangian coordinates, with an ODE oracle.

pub mod error;
pub mod eulerian;
pub mod lagrangian;
pub mod measures;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod roots;
pub mod transforms;
pub mod verify;

pub use error::{PeakonError, Result};
pub use eulerian::{PeakonPair, SolutionBranch, VelocityField};
pub use measures::{Atom, EulerianState, Measure};
pub use params::{Config, DerivedConstants};
pub use lagrangian::{HelperValues, LagrangianSample};
pub use transforms::{LagrangianProfile, RelabelCheckReport};
pub use oracle::{IntegratorSettings, PQField, Scheme};
pub use verify::{CheckResult, VerifyReport};
