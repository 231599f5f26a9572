//! Kinematics and motion planning for a robot team carrying an object in a
//! flexible, inelastic sheet.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod optimizer;
pub mod pipeline;
pub mod planner;
pub mod report;
pub mod scenario;
pub mod vvcm;
