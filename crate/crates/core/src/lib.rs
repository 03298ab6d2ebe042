//! Deciding and constructing completely positive maps that send prescribed
//! quantum states to prescribed targets.

pub mod certificate;
pub mod choi;
pub mod convex;
pub mod dispatch;
pub mod error;
pub mod linalg;
pub mod mixed;
pub mod pure;
pub mod qubit;
pub mod sample;
pub mod states;

pub use certificate::{Certificate, Evidence, Residuals, ScreenKind, ScreenResult, Verdict};
pub use choi::{FeasibilityProblem, KrausChannel, MapClass};
pub use dispatch::{decide, DecideOptions};
pub use error::{Error, Result};
