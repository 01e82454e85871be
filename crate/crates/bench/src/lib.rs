//! Criterion benchmarks for the sampler steps and the density estimators.
//! Run with `cargo bench -p rslmc-bench`.
