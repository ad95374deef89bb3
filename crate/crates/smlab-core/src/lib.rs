//! Stable-matching workbench core: preference profiles, blocking-pair
//! oracles, classic and optimization solvers, and the clique-to-matching
//! reduction toolkit.

pub mod classic;
pub mod graph;
pub mod io;
pub mod maxsmti;
pub mod minbp;
pub mod model;
pub mod random;
pub mod reductions;
