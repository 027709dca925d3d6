//! Core library for generating and scoring erotetic-theory fallacy problems.
//!
//! The modules follow the pipeline order: [`view`] holds the data model and
//! notation, [`engine`] runs the erotetic operations, [`logic`] decides
//! classical entailment on the monadic fragment, [`generate`] builds
//! problems, [`render`] turns them into prompts, [`judge`] scores answers,
//! [`record`] persists evaluation exchanges and [`stats`] computes the
//! reported statistics. [`conformance`] bundles the gold vectors.

pub mod conformance;
pub mod engine;
pub mod generate;
pub mod judge;
pub mod logic;
pub mod record;
pub mod render;
mod sat;
pub mod stats;
pub mod view;

pub use engine::{does_it_follow, factor, query, update, what_follows, InferenceTrace};
pub use view::{alpha_equal, parse_view, Literal, Quantifier, State, Substitution, Term, View};
