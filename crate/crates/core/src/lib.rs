//! Data-driven robust strategy synthesis for stochastic systems with
//! unknown noise.
//!
//! From noise samples, [`ambiguity`] builds a Wasserstein ball that holds the
//! true noise law with high confidence. [`abstraction`] turns a gridded
//! system into a robust MDP over that ball, and [`ltlf`] compiles the task
//! into a DFA. [`solver`] runs robust value iteration on the product and
//! returns a strategy with certified satisfaction bounds, which
//! [`validation`] checks by simulation. [`pipeline`] ties the stages
//! together and writes their artifacts.
//!
//! The guide in `book/` walks through each step with runnable examples.

pub mod ambiguity;
pub mod dynamics;
pub mod geometry;
pub mod interval;
pub mod lp;
pub mod abstraction;
pub mod ltlf;
pub mod solver;
pub mod validation;
pub mod pipeline;

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ambiguity.md")]
    mod ambiguity {}
    #[doc = include_str!("../../../book/src/abstraction.md")]
    mod abstraction {}
    #[doc = include_str!("../../../book/src/specifications.md")]
    mod specifications {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
