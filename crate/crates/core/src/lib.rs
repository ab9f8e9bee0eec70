//! Error analysis for robotic-surgery gesture data: executional errors from
//! kinematics and error labels, procedural errors from gesture grammars, and
//! their relation to operator skill.

pub mod alignment;
pub mod divergence;
pub mod ingest;
pub mod pipeline;
pub mod procedural;
pub mod report;
pub mod segmentation;
pub mod statistics;
pub mod synthgen;
pub mod trajectory;
