//! Golden-file check for the rendered summary table.
//!
//! The golden file was produced once from this exact pipeline and then
//! frozen; regenerate deliberately with `UPDATE_GOLDEN=1 cargo test -p
//! disteval --test summary_golden` after an intentional format change.

use std::collections::BTreeMap;

use disteval::metrics::{evaluate, BrowsingModel, Convention, Metric};
use disteval::model::{synth_fixture, SynthConfig};
use disteval::report::{render_summary_table, Provenance, ReportBuilder};
use disteval::stats::{summarize, BootstrapConfig, SummaryConfig};

const GOLDEN_PATH: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/data/summary_table.golden"
);

fn render_fixture_table() -> String {
    let fixture = synth_fixture(
        31,
        SynthConfig {
            n_requests: 25,
            catalog_size: 60,
            n_relevant: 3,
            list_length: 15,
            n_systems: 2,
        },
    )
    .unwrap();
    let model = BrowsingModel::new(0.8, Convention::Paper, 1000).unwrap();
    let metrics = [Metric::Rbp { gamma: 0.8 }, Metric::Ndcg];
    let frame = evaluate(&fixture.runs, &fixture.truth, &metrics, &model).unwrap();
    let config = SummaryConfig::new(17);
    let mut summaries = BTreeMap::new();
    for system in frame.systems() {
        for metric in frame.metrics() {
            summaries.insert(
                (system.clone(), metric.id()),
                summarize(frame.values(system, metric).unwrap(), &config).unwrap(),
            );
        }
    }
    let mut builder = ReportBuilder::new(Provenance::new(
        "golden",
        0.8,
        Convention::Paper,
        1000,
        BootstrapConfig::default(),
    ));
    builder.distributions(&summaries).unwrap();
    let bundle = builder.build().unwrap();
    render_summary_table(&bundle.report).unwrap()
}

#[test]
fn summary_table_matches_golden_file() {
    let rendered = render_fixture_table();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(GOLDEN_PATH, &rendered).unwrap();
        return;
    }
    let golden = std::fs::read_to_string(GOLDEN_PATH)
        .expect("golden file present; run with UPDATE_GOLDEN=1 to create");
    assert_eq!(
        rendered, golden,
        "summary table drifted from the frozen golden file"
    );
}
