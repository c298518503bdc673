//! Benchmark-only crate; the measurements live in `benches/pipeline.rs`.
//! Run with `cargo bench -p lmm-bench`.

#![forbid(unsafe_code)]
