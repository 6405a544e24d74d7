//! Benchmark crate; see `benches/updates.rs`.
