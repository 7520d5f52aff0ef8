//! Uniformly sampled Pareto fronts by homotopy continuation.

pub mod driver;
pub mod mesh;
pub mod metrics;
pub mod nlp;
pub mod problem;
