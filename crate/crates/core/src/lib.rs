//! Feature-model analysis: a text format for feature models, compilation of
//! their relations and cross-tree constraints to propositional logic, a
//! deterministic DPLL engine, and the usual model-health queries (void
//! models, dead features, false optionals, core features, product counts).

pub mod analysis;
pub mod cnf;
pub mod dsl;
pub mod export;
pub mod generate;
pub mod logic;
pub mod model;
pub mod sat;
pub mod selfcheck;
