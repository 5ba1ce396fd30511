//! Guide chapters, compiled as documentation so their examples run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/complete-graph.md")]
pub mod complete_graph {}
#[doc = include_str!("../../../book/src/scaling-function.md")]
pub mod scaling_function {}
#[doc = include_str!("../../../book/src/cumulants.md")]
pub mod cumulants {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/finite-dimensions.md")]
pub mod finite_dimensions {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
