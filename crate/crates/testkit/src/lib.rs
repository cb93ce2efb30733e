//! Test oracles, generators and fixtures shared by the workspace test suites.

pub mod eval;
pub mod fixtures;
pub mod gen;
pub mod interp;
pub mod mock_rpc;
pub mod soundness;

pub use fixtures::{fixture_code, fixture_path, FIXTURES_DIR};
