//! Downlink rate coverage of K-tier heterogeneous cellular networks whose
//! users are served over two independently fading blocks of spectrum.
//!
//! Base stations of each tier form independent Poisson point processes and
//! users attach to the strongest long-term received power. The two blocks
//! see independent Rayleigh fading but share interferer locations, so their
//! SINRs are correlated. [`analytic`] evaluates the resulting rate coverage
//! probability by numerical integration and [`montecarlo`] simulates it.

pub mod analytic;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod specfun;

pub use analytic::{CoverageMethod, CoverageOptions};
pub use error::{Error, Result};
pub use model::{
    load_scenario, split_from_eta, CoverageCurve, CurveColumn, ResourceSplit, Scenario,
    ScenarioConfig, TierParams,
};
pub use montecarlo::{CorrelationMode, McConfig, McEstimate};
pub use quadrature::QuadResult;
