//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the code under test except to
//! build inputs.
#![allow(dead_code)]

pub mod eval;
pub mod frames;
pub mod windows;
