//! Benchmark harness for `cqcap`. See `benches/kernels.rs`.
