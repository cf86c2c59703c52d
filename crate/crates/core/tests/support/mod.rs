//! Oracles shared by the integration tests and the acceptance runner.

pub mod brute;
pub mod gradcheck;
