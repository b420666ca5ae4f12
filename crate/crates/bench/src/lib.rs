//! Shared fixtures for the criterion benches.

use hetcov::{ResourceSplit, Scenario};

pub fn reference() -> (Scenario, ResourceSplit) {
    (
        Scenario::reference_three_tier(),
        ResourceSplit::from_eta(hetcov::model::REFERENCE_BANDWIDTH_HZ, 0.5)
            .expect("reference split is valid"),
    )
}
