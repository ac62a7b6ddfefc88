//! The WOP metric: a 2-Wasserstein-type distance on finite positive
//! measures, with geodesics, tangent calculus, barycenters and a comparison
//! against the Hellinger–Kantorovich distance.
//!
//! Measures are discrete (`Σ w_i δ_{x_i}` in `R^d`). The null measure is the
//! measure with no atoms.

pub mod barycenter;
pub mod error;
pub mod geodesic;
pub mod io;
pub mod measure;
pub mod metric;
pub mod tangent;
pub mod transport;
pub mod unbalanced;

pub use barycenter::{
    w2_barycenter, wop_barycenter, Barycenter, BarycenterOptions, BarycenterProblem,
};
pub use error::{Error, Result};
pub use geodesic::{dynamic_action, geodesic, Geodesic, GeodesicSample, SourcedPath};
pub use measure::{DiscreteMeasure, ReferencePoint};
pub use metric::{
    dual_certificate, wop_distance, wop_distance_defbis, wop_p_distance, DualCertificate,
    WopResult,
};
pub use transport::{solve_w2_entropic, solve_w2_exact, Coupling, TransportSolution};
pub use unbalanced::{et_value, hk_distance, EntropyFunction, EtProblem, EtResult};
