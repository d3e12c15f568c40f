//! Sliding-window factor-graph optimizer (placeholder while under construction).

pub struct SlidingWindowState;
pub struct SolverConfig;
