//! Criterion benchmarks for the icanet kernels live under `benches/`.
