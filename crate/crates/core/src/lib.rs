//! Elastic registration of white-matter fiber bundles.
//!
//! A bundle is summarised by the Kärcher mean of its fibers' square-root
//! velocity functions (SRVFs) together with a coefficient matrix holding each
//! fiber's tangent vector at the mean in a projected Fourier basis. Two bundles
//! are compared by warping one mean onto the other, parallel transporting the
//! tangent vectors along the connecting geodesic and finding the rotation in
//! SO(N) that best matches the coefficient rows.
//!
//! Module map:
//!
//! * [`curve`]: fibers, SRVFs, warps, rotations and elastic pair alignment
//! * [`mean`]: Kärcher mean of a bundle
//! * [`tangent`]: exponential/log maps and coefficient encoding
//! * [`transport`]: parallel transport between tangent spaces
//! * [`registration`]: bundle distance, soft and hard alignment
//! * [`metrics`]: Hausdorff distance and along-tract profile statistics
//! * [`io`]: TCK files, JSON archives, profile CSVs and synthetic bundles

pub mod bundle;
pub mod curve;
pub mod error;
pub mod io;
pub mod mean;
pub mod metrics;
pub mod registration;
pub mod tangent;
pub mod transport;

pub use bundle::{Bundle, Provenance};
pub use curve::{Diffeo, Fiber, Rotation3, Srvf};
pub use error::{Error, Result};
pub use mean::{karcher_mean, MeanOptions, MeanResult};
pub use registration::{BundleCode, HardAlignment, RotationN, SoftAlignment};
pub use tangent::{Basis, BasisMode, CoeffMatrix, TangentVector};
