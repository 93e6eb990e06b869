//! Library side of the `htn-tutor` command: policy simulation and
//! transcript replay.

pub mod sim;
pub mod transcript;
