//! Discrete molecular graphs and everything that operates on them directly.

mod bfs;
mod dequant;
mod molecule;
pub mod molt;
mod synth;
mod valency;
mod vocab;

pub use bfs::{bfs_reorder, is_bfs_ordered, max_dependency, max_dependency_distance, BfsOrder};
pub use dequant::{argmax, dequantize, pair_index, quantize, DequantizedGraph};
pub use molecule::{MolecularGraph, PrefixGraph};
pub use synth::{erdos_renyi_graphs, gen_community_graphs, gen_synthetic_molecules, SynthConfig};
pub use valency::{check_valency, implicit_hydrogens, valency_audit};
pub use vocab::{AtomVocab, BondVocab};
