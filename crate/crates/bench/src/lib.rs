//! Benchmark harness for the pipeline; the benchmarks live in `benches/`.
