//! Population computers for quantifier-free Presburger arithmetic.
//!
//! A population computer is a finite-state machine executed by an anonymous
//! crowd of agents: a configuration assigns a count of agents to every state,
//! and a step picks a transition whose left-hand side fits inside the current
//! configuration and replaces those agents by the right-hand side. This crate
//! builds computers that decide threshold and remainder predicates over
//! natural-number inputs, converts them down to ordinary two-agent population
//! protocols, and provides the tooling around them:
//!
//! * [`qfpa`]: predicate syntax, parsing, evaluation and normalization;
//! * [`circuit`]: NAND netlists used as computer output functions;
//! * [`computer`]: the population computer structure itself, its semantics
//!   and serialization;
//! * [`synth`]: synthesis of computers from predicates;
//! * [`convert`]: conversions that lower a computer step by step to a
//!   terminating population protocol, and refinement checking between stages;
//! * [`sim`]: random-scheduler simulation and interaction-count benchmarks;
//! * [`verify`]: exhaustive state-space checks, potential-function synthesis
//!   via exact linear programming, and structural speed checks.

pub mod circuit;
pub mod computer;
pub mod convert;
pub mod qfpa;
pub mod sim;
pub mod synth;
pub mod verify;
