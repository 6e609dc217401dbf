//! Subgroup disaggregation of metric and difference distributions.
//!
//! Requests are grouped by a user attribute; subjects missing the attribute
//! fall into an explicit `unknown` group rather than being dropped, so group
//! sizes always sum to the full request count. Multi-valued attributes
//! contribute each request's value to every named group with fractional
//! weight `1/k`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricFrame};
use crate::model::{AttributeTable, SubjectKind};
use crate::seed::derive_seed;
use crate::stats::{
    paired_summary_from_diffs, summarize_weighted, weighted_mean, BootstrapConfig, CiBounds,
    DistributionSummary, PairedDiffSummary, SummaryConfig,
};

/// One group's slice of the distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupEntry {
    /// Total membership weight (request count for single-valued attributes).
    pub weight: f64,
    /// Distributional summary of the group's metric values.
    pub summary: DistributionSummary,
}

/// Difference of means between two groups with a bootstrap interval.
///
/// Groups are paired in lexicographic order and the gap is
/// `mean(group_a) - mean(group_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapEntry {
    /// Lexicographically smaller group.
    pub group_a: String,
    /// Lexicographically larger group.
    pub group_b: String,
    /// Difference of group means.
    pub gap: f64,
    /// Bootstrap CI from independent per-group resampling.
    pub ci: CiBounds,
}

/// Metric distribution disaggregated by one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSummary {
    /// Attribute used for grouping.
    pub attribute: String,
    /// Per-group summaries, keyed by group label.
    pub groups: BTreeMap<String, GroupEntry>,
    /// Between-group mean gaps for every group pair.
    pub gaps: Vec<GapEntry>,
}

/// Per-group `(value, weight, request_index)` triples.
type GroupSamples = BTreeMap<String, Vec<(f64, f64, usize)>>;

/// Collects each group's `(value, weight, request_index)` triples.
fn group_samples(
    frame: &MetricFrame,
    attributes: &AttributeTable,
    attribute: &str,
    values: &[f64],
) -> Result<GroupSamples> {
    if attributes.kind() != SubjectKind::User {
        return Err(Error::invalid(
            "request disaggregation requires a user attribute table",
        ));
    }
    if !attributes.has_attribute(attribute) {
        return Err(Error::missing(format!(
            "attribute {attribute} is not present in the user table"
        )));
    }
    let mut groups: BTreeMap<String, Vec<(f64, f64, usize)>> = BTreeMap::new();
    for (idx, request) in frame.requests().iter().enumerate() {
        for (group, weight) in attributes.memberships(request, attribute)? {
            groups
                .entry(group.to_string())
                .or_default()
                .push((values[idx], weight, idx));
        }
    }
    Ok(groups)
}

/// Disaggregates one system's metric distribution by a user attribute.
pub fn disaggregate(
    frame: &MetricFrame,
    attributes: &AttributeTable,
    attribute: &str,
    metric: &Metric,
    system: &str,
    config: &SummaryConfig,
) -> Result<GroupedSummary> {
    let values = frame.values(system, metric)?;
    let groups = group_samples(frame, attributes, attribute, values)?;

    // Every group summarizes under the same derived seed, so relabeling a
    // group can never change its numbers.
    let mut group_config = config.clone();
    group_config.seed = derive_seed(config.seed, "subgroup-summary");
    let mut entries = BTreeMap::new();
    for (group, samples) in &groups {
        let pairs: Vec<(f64, f64)> = samples.iter().map(|&(x, w, _)| (x, w)).collect();
        let weight: f64 = pairs.iter().map(|&(_, w)| w).sum();
        entries.insert(
            group.clone(),
            GroupEntry {
                weight,
                summary: summarize_weighted(&pairs, &group_config)?,
            },
        );
    }

    let gap_seed = derive_seed(config.seed, "subgroup-gap");
    let labels: Vec<&String> = groups.keys().collect();
    let mut gaps = Vec::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            let a: Vec<(f64, f64)> = groups[labels[i]].iter().map(|&(x, w, _)| (x, w)).collect();
            let b: Vec<(f64, f64)> = groups[labels[j]].iter().map(|&(x, w, _)| (x, w)).collect();
            let gap = weighted_mean(&a) - weighted_mean(&b);
            let ci = gap_mean_ci(&a, &b, &config.bootstrap, gap_seed);
            gaps.push(GapEntry {
                group_a: labels[i].clone(),
                group_b: labels[j].clone(),
                gap,
                ci,
            });
        }
    }

    Ok(GroupedSummary {
        attribute: attribute.to_string(),
        groups: entries,
        gaps,
    })
}

/// Bootstrap CI of a difference of means with independent group resampling.
fn gap_mean_ci(a: &[(f64, f64)], b: &[(f64, f64)], config: &BootstrapConfig, seed: u64) -> CiBounds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(config.resamples);
    let mut res_a = vec![(0.0, 0.0); a.len()];
    let mut res_b = vec![(0.0, 0.0); b.len()];
    for _ in 0..config.resamples {
        for slot in res_a.iter_mut() {
            *slot = a[rng.random_range(0..a.len())];
        }
        for slot in res_b.iter_mut() {
            *slot = b[rng.random_range(0..b.len())];
        }
        stats.push(weighted_mean(&res_a) - weighted_mean(&res_b));
    }
    stats.sort_by(f64::total_cmp);
    CiBounds {
        lo: crate::stats::quantile(&stats, (1.0 - config.level) / 2.0),
        hi: crate::stats::quantile(&stats, (1.0 + config.level) / 2.0),
        level: config.level,
    }
}

/// Per-group paired difference distributions between two systems.
///
/// Groups with a single request still appear, with the test reported as
/// [`crate::stats::PairedTest::TooFewSamples`].
pub fn group_change(
    frame: &MetricFrame,
    attributes: &AttributeTable,
    attribute: &str,
    metric: &Metric,
    system_a: &str,
    system_b: &str,
) -> Result<BTreeMap<String, PairedDiffSummary>> {
    let a = frame.values(system_a, metric)?;
    let b = frame.values(system_b, metric)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let groups = group_samples(frame, attributes, attribute, &diffs)?;

    let mut result = BTreeMap::new();
    for (group, samples) in groups {
        let requests: Vec<String> = samples
            .iter()
            .map(|&(_, _, idx)| frame.requests()[idx].clone())
            .collect();
        let group_diffs: Vec<f64> = samples.iter().map(|&(d, _, _)| d).collect();
        let weights: Vec<f64> = samples.iter().map(|&(_, w, _)| w).collect();
        result.insert(
            group,
            paired_summary_from_diffs(requests, group_diffs, weights)?,
        );
    }
    Ok(result)
}
