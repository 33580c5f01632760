//! Interleaving distance between merge trees through couplings.
//!
//! The crate is organised around a few capabilities, each with a runnable example:
//!
//! * trees and single linkage: `cargo run --example trees`
//! * coupling validation and costs: `cargo run --example coupling_cost`
//! * induced maps and good-map checks: `cargo run --example good_maps`
//! * exact distance by enumeration: `cargo run --example exact_oracle`
//! * pruning: `cargo run --example pruning`
//! * min-max program for one subtree pair: `cargo run --example minmax_program`
//! * bottom-up bounds and pruned estimate: `cargo run --example bounds`
//! * point-cloud benchmark: `cargo run --example bench_sweep`

pub mod bench;
pub mod bounds;
pub mod coupling;
pub mod error;
pub mod linkage;
pub mod maps;
pub mod oracle;
pub mod point;
pub mod program;
pub mod prune;
pub mod tree;

pub use coupling::{Coupling, CouplingContext, CostReport, Side};
pub use point::MetricPoint;
pub use tree::{MergeTree, NodeRecord, TAU, V};
