//! Criterion benchmarks for the estimation, bound and design kernels; see
//! `benches/kernels.rs`.
