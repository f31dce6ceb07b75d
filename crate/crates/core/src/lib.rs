pub mod cdmp;
pub mod collision;
pub mod error;
pub mod guidance;
pub mod kinematics;
pub mod planner;
pub mod reproduction;
pub mod scenario;
pub mod session;
pub mod taskspace;

pub use error::{Error, Result};
