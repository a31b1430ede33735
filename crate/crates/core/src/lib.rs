//! Decentralized funnel controllers for a concave fragment of signal temporal
//! logic on continuous-time interconnected systems.
//!
//! The crate is organized bottom-up:
//!
//! - [`stl`]: formula AST, parser, smooth robustness and its gradient, monitors.
//! - [`funnel`]: performance functions and the task-to-funnel parameter design.
//! - [`controller`]: error transformation and the closed-form feedback law.
//! - [`sim`]: subsystem/network model, built-in case studies, RK4 simulation.
//! - [`contracts`]: assume-guarantee contracts and their sampled checkers.
//! - [`pipeline`]: config schema and the design/simulate/monitor/verify flow.

pub mod stl;
pub mod funnel;
pub mod controller;
pub mod sim;
pub mod contracts;
pub mod config;
pub mod pipeline;
