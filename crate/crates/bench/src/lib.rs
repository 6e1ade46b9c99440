//! Criterion benchmarks for `sysid-core`; see `benches/`.
