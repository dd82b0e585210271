//! Benchmarks for the kwsel pipeline live under `benches/`.
