//! Criterion benchmarks for the polyshape kernels; see `benches/kernels.rs`.
