//! Learning side of the simulator: networks, the dual-agent trainer and the
//! evaluation harness.

pub mod nn;
pub mod eval;
pub mod trainer;
