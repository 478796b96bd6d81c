//! Configuration-driven front end for `cellflow`: builds one of the four
//! constructions from a TOML file, checks it, answers safety queries and
//! writes CSV/SVG artifacts.

pub mod artifacts;
pub mod config;
pub mod model;
pub mod plot;
pub mod run;

pub use run::{run, Command, Options, Outcome, Status};
