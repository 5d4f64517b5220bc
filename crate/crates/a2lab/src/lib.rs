//! Numerical laboratory for random dyadic lattices on finite geometrically
//! doubling metric spaces: nested random grids and Christ cubes, Haar
//! systems and their weighted decompositions, A2/Ainfty weight
//! characteristics, dyadic shifts and paraproducts with exact weighted
//! operator norms, and the Bellman-function convexity machinery, plus
//! the probabilistic identities (goodness, averaging, containment) that
//! tie them together.
//!
//! Every construction is exact on a finite space; every probabilistic
//! statement can be run both as Monte Carlo sampling and, on small spaces,
//! as exhaustive enumeration of the discrete probability space.
//!
//! See the `examples/` directory for one runnable example per capability,
//! and the `a2lab` binary for the configuration-driven experiment runner.

pub mod averaging;
pub mod bellman;
pub mod coloring;
pub mod experiment;
pub mod goodness;
pub mod haar;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod metric;
pub mod paraproduct;
pub mod rng;
pub mod shift;
pub mod tree;
pub mod weights;

pub use metric::{DoublingMeasure, FiniteMetricSpace, KernelProfile};
pub use tree::{CubeId, CubeTree};
