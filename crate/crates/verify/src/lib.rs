//! Test-only package. Its single target, `tests/acceptance.rs`, runs the
//! acceptance battery after every other test binary in the workspace.
