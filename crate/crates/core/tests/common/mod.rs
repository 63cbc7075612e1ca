//! Generators and reference implementations shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

pub mod adapt;
pub mod formulas;
pub mod game;
pub mod naive;
pub mod shape;
