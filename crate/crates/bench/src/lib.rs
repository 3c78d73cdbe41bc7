//! Criterion benchmarks for `kerneldyn` live under `benches/`.
