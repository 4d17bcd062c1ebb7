//! Criterion benchmarks for the simulator, ledger and noise sampler live in `benches/`.
