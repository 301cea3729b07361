//! Model-based expert: a fixed-base joint-space RRT* plan tracked by the arm,
//! and a PID attitude loop for the base.

mod expert;
mod ik;
mod pid;
mod rrt;
mod trajectory;

pub use expert::{attitude_error, ExpertController, ExpertSettings};
pub use ik::{fk_residual, solve_ik, IkError, IkSettings};
pub use pid::{PidGains, PidState};
pub use rrt::{rrt_star_plan, JointPath, PlanError, PlanOutcome, RrtSettings};
pub use trajectory::{prior_manipulator_action, PriorTrajectory, K_TRACK, SPEED_FRACTION};
