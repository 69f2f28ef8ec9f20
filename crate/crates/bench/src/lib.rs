//! Criterion benchmarks for the lightcone-core kernels; see `benches/kernels.rs`.
//!
//! Run with `cargo bench -p lightcone-bench`.
