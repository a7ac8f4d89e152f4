//! Criterion benchmarks for the `dnaood` crate live in `benches/`.
