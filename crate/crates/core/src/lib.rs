//! Server-side aim-assist cheat detection.
//!
//! The pipeline turns per-tick view angles into screen-space aim trajectories,
//! cuts a window around every elimination, describes each window with
//! kinematic features, scores it with a GRU-CNN subsequence model, aggregates
//! per elimination, and decides per player and match with a random forest.
//! Every decision can be explained tick by tick and feature by feature.

pub mod eval;
pub mod explainer;
pub mod features;
pub mod ingest;
pub mod inspector;
pub mod nn;
pub mod seeds;
pub mod simulator;
pub mod trajectory;
