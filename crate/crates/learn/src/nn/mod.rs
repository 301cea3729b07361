//! Small dense networks with hand-written reverse mode, the Gaussian policy
//! head, Adam, and the checkpoint container.

mod adam;
mod checkpoint;
mod mlp;
mod policy;

pub use adam::Adam;
pub use checkpoint::{AgentCheckpoint, CheckpointError, CheckpointHeader, FORMAT_VERSION};
pub use mlp::{gather_rows, param_count, Mlp, NnError, Tape};
pub use policy::{log_prob, GaussianPolicy, LogProbTape, PolicyGrads, PolicySample};
