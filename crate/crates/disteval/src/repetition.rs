//! Aggregation of repeated evaluations into distributions of summary
//! statistics.
//!
//! Repetitions are ingested, never generated: each one is a complete
//! runs-plus-truth snapshot from a different split or seed. The frame keeps
//! one summary statistic (the mean by default) per repetition, system,
//! metric, and optional subgroup.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, BrowsingModel, Metric};
use crate::model::{AttributeTable, RepetitionSet};
use crate::stats::{
    summarize, weighted_mean, weighted_quantile, DistributionSummary, KdeBounds, SummaryConfig,
};

/// Summary statistic kept per repetition; the mean is the default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RepStatistic {
    /// Mean of the per-request values.
    Mean,
    /// Median of the per-request values.
    Median,
    /// A percentile of the per-request values (percent units).
    Percentile(f64),
}

impl RepStatistic {
    fn apply(&self, pairs: &[(f64, f64)]) -> f64 {
        match self {
            RepStatistic::Mean => weighted_mean(pairs),
            RepStatistic::Median | RepStatistic::Percentile(_) => {
                let mut sorted = pairs.to_vec();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let p = match self {
                    RepStatistic::Median => 0.5,
                    RepStatistic::Percentile(percent) => percent / 100.0,
                    RepStatistic::Mean => unreachable!(),
                };
                weighted_quantile(&sorted, p)
            }
        }
    }
}

impl std::fmt::Display for RepStatistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RepStatistic::Mean => write!(f, "mean"),
            RepStatistic::Median => write!(f, "median"),
            RepStatistic::Percentile(p) => write!(f, "p{p}"),
        }
    }
}

impl FromStr for RepStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(RepStatistic::Mean),
            "median" => Ok(RepStatistic::Median),
            other => {
                let percent: f64 = other
                    .strip_prefix('p')
                    .and_then(|digits| digits.parse().ok())
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "unknown statistic `{other}` (expected mean, median, or p<percent>)"
                        ))
                    })?;
                if !(0.0..=100.0).contains(&percent) {
                    return Err(Error::invalid(format!(
                        "percentile {percent} outside [0, 100]"
                    )));
                }
                Ok(RepStatistic::Percentile(percent))
            }
        }
    }
}

/// Key of one statistic series: (system, metric id, optional group).
type SeriesKey = (String, String, Option<String>);

/// Per-repetition summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionFrame {
    repetition_ids: Vec<String>,
    metrics: Vec<Metric>,
    statistic: RepStatistic,
    /// Series values per repetition, aligned with `repetition_ids`.
    values: BTreeMap<SeriesKey, Vec<f64>>,
}

impl RepetitionFrame {
    /// Repetition labels in their declared order.
    pub fn repetition_ids(&self) -> &[String] {
        &self.repetition_ids
    }

    /// Metrics covered by the frame.
    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }

    /// The per-repetition statistic the frame holds.
    pub fn statistic(&self) -> RepStatistic {
        self.statistic
    }

    /// System ids present, sorted.
    pub fn systems(&self) -> Vec<String> {
        let mut systems: Vec<String> = self
            .values
            .keys()
            .map(|(system, _, _)| system.clone())
            .collect();
        systems.dedup();
        systems
    }

    /// Per-repetition values of one statistic series.
    pub fn series(&self, system: &str, metric: &Metric, group: Option<&str>) -> Result<&[f64]> {
        let key = (
            system.to_string(),
            metric.id(),
            group.map(String::from),
        );
        self.values
            .get(&key)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::missing(format!(
                    "no repetition series for system {system}, metric {metric}, group {group:?}"
                ))
            })
    }

    /// Writes the frame as CSV: `repetition_id,system_id,metric_id,group,value`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "repetition_id,system_id,metric_id,group,value")?;
        for ((system, metric_id, group), series) in &self.values {
            for (rep, value) in self.repetition_ids.iter().zip(series) {
                let group = group.as_deref().unwrap_or("");
                writeln!(writer, "{rep},{system},{metric_id},{group},{value}")?;
            }
        }
        Ok(())
    }
}

/// Evaluates every repetition and keeps one per-repetition statistic of the
/// per-request metric values (the mean by default), plus per-group values
/// when an attribute is given.
pub fn evaluate_repetitions(
    repset: &RepetitionSet,
    metrics: &[Metric],
    model: &BrowsingModel,
    attribute: Option<(&AttributeTable, &str)>,
    statistic: RepStatistic,
) -> Result<RepetitionFrame> {
    let per_rep: Vec<BTreeMap<SeriesKey, f64>> = repset
        .repetitions()
        .par_iter()
        .map(|rep| {
            let frame = evaluate(&rep.runs, &rep.truth, metrics, model)?;
            let mut entries = BTreeMap::new();
            for system in frame.systems() {
                for metric in metrics {
                    let values = frame.values(system, metric)?;
                    let pairs: Vec<(f64, f64)> = values.iter().map(|&v| (v, 1.0)).collect();
                    entries.insert(
                        (system.clone(), metric.id(), None),
                        statistic.apply(&pairs),
                    );
                    if let Some((attrs, attr_name)) = attribute {
                        let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
                        for (idx, request) in frame.requests().iter().enumerate() {
                            for (group, weight) in attrs.memberships(request, attr_name)? {
                                groups
                                    .entry(group.to_string())
                                    .or_default()
                                    .push((values[idx], weight));
                            }
                        }
                        for (group, pairs) in groups {
                            entries.insert(
                                (system.clone(), metric.id(), Some(group)),
                                statistic.apply(&pairs),
                            );
                        }
                    }
                }
            }
            Ok(entries)
        })
        .collect::<Result<_>>()?;

    // Every repetition must produce the same series keys; groups can differ
    // only if a group is entirely absent from one split's requests.
    let mut values: BTreeMap<SeriesKey, Vec<f64>> = BTreeMap::new();
    for (rep_idx, entries) in per_rep.iter().enumerate() {
        for (key, &value) in entries {
            let series = values.entry(key.clone()).or_default();
            if series.len() != rep_idx {
                return Err(Error::invalid(format!(
                    "series {key:?} is missing from an earlier repetition"
                )));
            }
            series.push(value);
        }
    }
    let n_reps = repset.repetitions().len();
    for (key, series) in &values {
        if series.len() != n_reps {
            return Err(Error::invalid(format!(
                "series {key:?} covers {} of {n_reps} repetitions",
                series.len()
            )));
        }
    }

    Ok(RepetitionFrame {
        repetition_ids: repset
            .repetitions()
            .iter()
            .map(|r| r.id.clone())
            .collect(),
        metrics: metrics.to_vec(),
        statistic,
        values,
    })
}

/// Stability of a pairwise comparison across repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// First system of the pair.
    pub system_a: String,
    /// Second system of the pair.
    pub system_b: String,
    /// Metric compared.
    pub metric: Metric,
    /// `(repetition_id, mean_a - mean_b)` per repetition, in order.
    pub diffs: Vec<(String, f64)>,
    /// Distribution (summary + ECDF) of the per-repetition differences.
    pub summary: DistributionSummary,
    /// Share of repetitions where `system_a`'s mean strictly exceeds
    /// `system_b`'s.
    pub sign_consistency: f64,
}

/// Summarizes the per-repetition mean difference `A - B` for one metric.
pub fn stability_report(
    frame: &RepetitionFrame,
    system_a: &str,
    system_b: &str,
    metric: &Metric,
    config: &SummaryConfig,
) -> Result<StabilityReport> {
    if frame.repetition_ids.len() < 2 {
        return Err(Error::invalid(
            "stability analysis requires at least 2 repetitions",
        ));
    }
    let a = frame.series(system_a, metric, None)?;
    let b = frame.series(system_b, metric, None)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let wins = diffs.iter().filter(|&&d| d > 0.0).count();

    let mut diff_config = config.clone();
    diff_config.kde_bounds = KdeBounds::SymmetricAboutZero;
    let summary = summarize(&diffs, &diff_config)?;

    Ok(StabilityReport {
        system_a: system_a.to_string(),
        system_b: system_b.to_string(),
        metric: *metric,
        diffs: frame
            .repetition_ids
            .iter()
            .cloned()
            .zip(diffs.iter().copied())
            .collect(),
        summary,
        sign_consistency: wins as f64 / diffs.len() as f64,
    })
}
