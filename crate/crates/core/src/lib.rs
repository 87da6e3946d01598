//! Mobility-on-demand fleet simulation with a stochastic traffic layer.

pub mod cli;
pub mod demand;
pub mod eval;
pub mod ids;
pub mod network;
pub mod operator;
pub mod sim;
pub mod traffic;
