//! Acceptance checks live under `tests/`; run them with `cargo test -p mfstat-validation --test acceptance`.
