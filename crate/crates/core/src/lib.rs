//! Mean-field analysis and exact simulation of single-cell slotted CSMA
//! backoff dynamics.

pub mod builtin;
pub mod cli;
pub mod dtmc;
pub mod fpe;
pub mod model;
pub mod ode;
pub mod repro;
pub mod stability;
pub mod throughput;
