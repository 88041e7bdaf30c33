//! Holds the `acceptance` test target (`tests/acceptance.rs`).
