//! Sliding-mode learning control simulator.
//!
//! A type-2 Takagi-Sugeno-Kang neuro-fuzzy controller whose premise and
//! consequent parameters are adapted online by sliding-mode update laws,
//! paired with an adaptive conventional control term `u_c = k*sgn(s)`.
//! The crate bundles the controller, two benchmark plants (a longitudinal
//! vehicle model with a time-headway spacing policy and a second-order
//! nonlinear system), a fixed-step closed-loop simulator with seeded
//! measurement noise, and post-hoc stability diagnostics.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod controller;
pub mod fuzzy;
pub mod plants;
pub mod sim;
pub mod trace_io;
