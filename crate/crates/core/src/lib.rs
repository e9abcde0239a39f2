//! Monte Carlo and exact-geometry toolkit for isotropic log-concave measures.
//!
//! Modules, from the bottom up:
//!
//! * [`rng`]: reproducible random streams that split into independent children.
//! * [`sampler`]: exact samplers for a fixed menu of isotropic log-concave laws.
//! * [`orthogonal`]: Haar rotations and spherical caps.
//! * [`centroid`]: support functions of `L_p` centroid bodies and their one-sided variants.
//! * [`thicken`]: the rotated self-convolution `(X ± U X') / √2`, Gaussian
//!   convolution and norm probabilities.
//! * [`polygon2d`]: exact convex polygons for planar volumetric inequalities.

// `!(x >= a)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centroid;
pub mod error;
pub mod orthogonal;
pub mod polygon2d;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod thicken;

pub use error::{LabError, Result};
pub use orthogonal::{Direction, OrthogonalMatrix};
pub use rng::RandomStream;
pub use sampler::{DistributionSpec, Family, SampleBatch};
