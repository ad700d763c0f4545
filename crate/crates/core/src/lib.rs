//! Conflict-regulation training simulator: a virtual student whose behavior
//! follows a two-dimensional conflict model driven by the teacher's
//! regulation style.

pub mod acts;
pub mod affect;
pub mod bus;
pub mod catalog;
pub mod conflict;
pub mod orchestrator;
pub mod server;
pub mod sim;

pub use conflict::{apply_turn, ConflictState, Outcome, RegulationStyle, TeacherEvaluation};
pub use orchestrator::{Orchestrator, SessionConfig, SessionMode};
