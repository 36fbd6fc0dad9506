//! Window metrics, covering counts and mean-dimension estimates for ℤᵏ actions.

pub mod constructions;
pub mod dimension;
pub mod error;
pub mod expansiveness;
pub mod frink;
pub mod lattice_metric;
pub mod systems;

pub use constructions::{FreeIndexSet, PeriodicNet, TowerParams, TowerSite, TowerStage, TowerVariant};
pub use dimension::{DimensionEstimate, EmbeddingCertificate, EntropySource, EntropyTable, EstimateKind, LocalEndo, LogBracket};
pub use error::{Error, Result};
pub use expansiveness::{CertMode, CodingConstant, ExpansivityCertificate};
pub use frink::{DynamicalQuasiParams, FrinkMetric};
pub use lattice_metric::{Cover, CountBracket, LatticeVector, MetricMatrix, Window};
pub use systems::{
    BaseMetric, ColumnPoint, ColumnSite, ConfigWindow, FiniteAction, IndexSetSpec, Interval, Norm, ProductShiftSystem, QuantizedTorus, Rect,
    RestrictedSystem, Rule, SftSystem, Site, SiteMap, System, ToralAutomorphism,
};
