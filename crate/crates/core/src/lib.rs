//! Capacity planning of hybrid storage and generation for isolated grids.
//!
//! The planning problem minimizes amortized investment plus operating cost
//! over a set of demand/renewable scenarios. It is decomposed by scenario and
//! solved with consensus ADMM: every scenario solves its own convex QP on a
//! local copy of the design, and the copies (plus the storage states at
//! scenario junctions) are driven to agreement.

pub mod chance;
pub mod consensus;
pub mod ingest;
pub mod model;
pub mod subqp;
