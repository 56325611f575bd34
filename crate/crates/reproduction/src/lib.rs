//! Acceptance checks for the published sampler results.
//!
//! The checks live in `tests/acceptance.rs` and run with
//! `cargo test -p qhmc-reproduction --test acceptance`. They print one line
//! per criterion and exit non-zero if any criterion fails. This crate sits
//! last in the workspace so a failing criterion does not stop cargo before
//! the other test binaries have run.
