//! Workbench for the DeF and DeF+F calculi of data-flow explicit futures.
//!
//! Programs are parsed ([`parser`]), typechecked ([`typecheck`]), executed
//! one interleaving at a time or exhaustively ([`runtime`], [`explore`]),
//! translated from DeF+F to DeF ([`transform`]) and the two versions compared
//! up to branching bisimilarity ([`bisim`]).

pub mod bisim;
pub mod cli;
pub mod corpus;
pub mod explore;
pub mod parser;
pub mod pretty;
pub mod runtime;
pub mod stats;
pub mod syntax;
pub mod transform;
pub mod typecheck;
