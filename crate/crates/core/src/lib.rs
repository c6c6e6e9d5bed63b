//! Replays Go game records, gathers per-position search statistics from an
//! analysis engine (live, cached or stubbed) and derives move effects,
//! search-gap measures and cheat-suspicion evidence from them.

pub mod board;
pub mod engine;
pub mod metrics;
pub mod report;
pub mod sgf;
pub mod synth;
