//! Shared fixtures for the engine benchmarks.

use disteval::metrics::{BrowsingModel, Convention};
use disteval::model::{synth_fixture, SynthConfig, SynthFixture};

/// A mid-sized scenario: 500 requests, 2000 items, 100-deep lists, 3 systems.
pub fn bench_fixture() -> SynthFixture {
    synth_fixture(
        1,
        SynthConfig {
            n_requests: 500,
            catalog_size: 2000,
            n_relevant: 5,
            list_length: 100,
            n_systems: 3,
        },
    )
    .expect("valid fixture config")
}

/// The case-study browsing model: γ = 0.8, paper convention, depth 1000.
pub fn bench_model() -> BrowsingModel {
    BrowsingModel::new(0.8, Convention::Paper, 1000).expect("valid model")
}
