//! Criterion benchmarks for the kronml kernels; see `benches/`.
