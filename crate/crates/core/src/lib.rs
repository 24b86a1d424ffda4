//! Synthesis and checking of lexicographic ranking supermartingales for
//! linear probabilistic programs.

pub mod bench;
pub mod checker;
pub mod farkas;
pub mod fixlab;
pub mod frontend;
pub mod linexpr;
pub mod lp;
pub mod pcfg;
pub mod rational;
pub mod simulator;
pub mod synthesis;

pub use linexpr::{LinConstraint, LinExpr, Polyhedron, Rel, Var};
pub use rational::{q, Rational};
