//! Persistent monitoring of targets on a line segment by cooperating agents.

pub mod cli;
pub mod control;
pub mod error;
pub mod infoplane;
pub mod ipa;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod poly;
pub mod simulator;

pub use control::{AgentParams, Control};
pub use error::{Error, Result};
pub use model::{AgentSpec, InfoMode, Numerics, Scenario, Target};
pub use optimizer::{optimize, OptRun, OptimizerConfig};
pub use simulator::{simulate, Event, EventKind, SimRecord};
