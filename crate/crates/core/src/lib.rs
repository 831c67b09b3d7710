//! Constructive reachability for linear systems `y' = Ay + Bu` under conic
//! control constraints `u(t) ∈ cone(𝒰)`.
//!
//! The pipeline minimizes the dual functional J_ε over final adjoint states
//! ([`dual`]), rebuilds a bang-bang control from the minimizer ([`synth`])
//! and checks it by forward simulation. [`oracle`] holds independent
//! reference solutions used to validate that pipeline.

pub mod dual;
pub mod error;
pub mod lti;
pub mod oracle;
pub mod sets;
pub mod synth;

pub use dual::{
    CStarEstimate, ConeVerdict, DualSolution, DualStatus, NodeMix, ReachabilityProblem, RunSummary, SolverOptions,
};
pub use error::{DualError, LtiError, OracleError, SetError, SynthError};
pub use lti::{GridPropagator, LtiSystem, TimeGrid};
pub use sets::{ConstraintSet, Extended, FaceResult, FaceStatus, SetVariant};
pub use synth::{SynthesizedControl, VerificationReport};
