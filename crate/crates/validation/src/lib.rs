//! Acceptance checks for calc-core live in tests/acceptance.rs.
