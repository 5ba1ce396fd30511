//! Dynamic space filling on regular graphs.
//!
//! `N` particles sit on the `N` vertices of a connected regular graph, piled
//! up in arrival order. Every particle except the bottom one of each pile hops
//! at rate 1 to a uniformly chosen neighbor, landing on top of the pile there.
//! The process halts once every vertex holds exactly one particle.
//!
//! Counting an empty vertex as a passive `B` particle and every non-bottom
//! particle as an active `A` particle turns the process into the annihilation
//! reaction `A + B -> 0` with immobile `B`'s and equal species counts.
//!
//! The crate provides
//!
//! * [`graphs`]: rings, tori, complete graphs and random regular graphs;
//! * [`engine`]: exact event-driven simulation in both representations;
//! * [`analytics`]: closed-form laws on complete graphs;
//! * [`stats`]: estimators, KS tests and log-log fits;
//! * [`experiments`]: seeded replica ensembles and their reports;
//! * [`cli`]: the `dsf` command-line front end.
//!
//! ```
//! use dsf::analytics::{normalized_moment, scaled_halting_pdf};
//!
//! assert_eq!(normalized_moment(2).unwrap().to_string(), "7/5");
//! assert!((scaled_halting_pdf(1.0).unwrap() - 0.591452).abs() < 1e-6);
//! ```

pub mod analytics;
pub mod cli;
pub mod engine;
pub mod experiments;
pub mod graphs;
pub mod stats;

#[cfg(test)]
#[allow(dead_code)]
pub(crate) mod quadrature;
