//! Criterion benchmarks for `hrmf-core`; see `benches/`.
