//! Criterion benchmarks for the kernels, transforms and soliton construction;
//! see `benches/`.
