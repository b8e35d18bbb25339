//! Criterion benchmarks for vqe-lab live under `benches/`.
