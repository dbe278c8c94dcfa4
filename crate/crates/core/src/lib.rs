pub mod broker;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod finite;
pub mod grid;
pub mod model;
pub mod operators;
pub mod output;
pub mod path;
pub mod reproduce;
pub mod riccati;
pub mod simulate;
pub mod trader;
