pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod solvers;
pub mod sim;
pub mod windowed;
