//! Report assembly: one versioned JSON document plus sidecar CSV plot data.
//!
//! The JSON keeps summary statistics and provenance; bulky plot data (ECDF,
//! KDE, Lorenz, sweep curves, posterior samples) goes to sidecar CSVs named
//! `<section>/<name>.csv` next to the report. Serialization is fully
//! deterministic: struct fields keep declaration order, maps are sorted, and
//! floats use shortest round-trip formatting, so identical inputs produce
//! byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exposure::{ExposureVector, IdealExposure};
use crate::metrics::{Convention, Metric, MetricFrame};
use crate::repetition::{RepetitionFrame, StabilityReport};
use crate::stats::{
    write_ecdf_csv, write_kde_csv, BootstrapConfig, DistributionSummary, KdeOutcome,
    PairedDiffSummary, PairedTest, PercentileStat, SummaryStat,
};
use crate::subgroup::GroupedSummary;
use crate::uncertainty::{PosteriorResult, SweepResult};

/// Report schema version written into every document.
pub const SCHEMA_VERSION: u32 = 1;

/// SHA-256 digest of raw bytes, hex encoded; used for input provenance.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("write to string");
    }
    out
}

/// Where every number in the report came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Version of the tool that wrote the report.
    pub tool_version: String,
    /// Input label -> SHA-256 of the input bytes.
    pub inputs: BTreeMap<String, String>,
    /// Base seed for all stochastic steps, when any were used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Patience parameter of the browsing model.
    pub gamma: f64,
    /// Exponent convention of the browsing model.
    pub convention: Convention,
    /// Truncation depth of the browsing model.
    pub depth: usize,
    /// Bootstrap settings behind every confidence interval.
    pub bootstrap: BootstrapConfig,
    /// Documented methodological choices that affect reported numbers.
    pub notes: BTreeMap<String, String>,
}

impl Provenance {
    /// Provenance with the standard methodological notes filled in.
    pub fn new(
        tool_version: impl Into<String>,
        gamma: f64,
        convention: Convention,
        depth: usize,
        bootstrap: BootstrapConfig,
    ) -> Self {
        let mut notes = BTreeMap::new();
        notes.insert(
            "divergence_l2".to_string(),
            "squared Euclidean distance between normalized exposure vectors".to_string(),
        );
        notes.insert(
            "divergence_kl".to_string(),
            "KL(system || target) in nats; target smoothed by 1e-10 and renormalized".to_string(),
        );
        notes.insert(
            "gini_population".to_string(),
            "full catalog including zero-exposure items".to_string(),
        );
        notes.insert(
            "percentile_rule".to_string(),
            "linear interpolation on order statistics at h = (n-1)p".to_string(),
        );
        notes.insert(
            "bootstrap_method".to_string(),
            "percentile intervals from seeded resampling".to_string(),
        );
        Provenance {
            tool_version: tool_version.into(),
            inputs: BTreeMap::new(),
            seed: None,
            gamma,
            convention,
            depth,
            bootstrap,
            notes,
        }
    }

    /// Records an input's digest under a stable label.
    pub fn record_input(&mut self, label: impl Into<String>, bytes: &[u8]) {
        self.inputs.insert(label.into(), sha256_hex(bytes));
    }
}

/// Serializable view of a [`DistributionSummary`] with sidecar references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    /// Number of samples.
    pub n: usize,
    /// Mean with CI.
    pub mean: SummaryStat,
    /// Median with CI.
    pub median: SummaryStat,
    /// Percentiles with CIs.
    pub percentiles: Vec<PercentileStat>,
    /// Relative path of the ECDF plot data.
    pub ecdf_csv: String,
    /// Relative path of the KDE plot data, absent for single samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kde_csv: Option<String>,
    /// Location of the point mass when the KDE degenerated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kde_degenerate_at: Option<f64>,
}

/// Serializable view of a [`PairedDiffSummary`] with sidecar references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    /// First system (minuend).
    pub system_a: String,
    /// Second system (subtrahend).
    pub system_b: String,
    /// Metric id compared.
    pub metric: String,
    /// Number of paired requests.
    pub n: usize,
    /// Median of the differences.
    pub median_diff: f64,
    /// Weighted share of requests where A > B.
    pub fraction_helped: f64,
    /// Weighted share of requests where A < B.
    pub fraction_hurt: f64,
    /// Weighted share of exact ties.
    pub fraction_tied: f64,
    /// Paired t-test outcome.
    pub test: PairedTest,
    /// Relative path of the difference ECDF plot data.
    pub ecdf_csv: String,
    /// Relative path of the raw per-request differences.
    pub diffs_csv: String,
}

/// Pointwise section: the classical mean table plus coverage flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseSection {
    /// system -> metric id -> mean value.
    pub means: BTreeMap<String, BTreeMap<String, f64>>,
    /// Requests each system's run failed to cover (scored 0, not dropped).
    pub missing_requests: BTreeMap<String, Vec<String>>,
    /// Relative path of the full per-request metric frame.
    pub frame_csv: String,
}

/// Distributions section: per system and metric summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionsSection {
    /// system -> metric id -> summary.
    pub summaries: BTreeMap<String, BTreeMap<String, SummaryReport>>,
}

/// Differences section: paired system comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferencesSection {
    /// One entry per compared pair and metric.
    pub pairs: Vec<DiffReport>,
}

/// One group's weight and summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// Total membership weight of the group.
    pub weight: f64,
    /// Group distribution summary.
    pub summary: SummaryReport,
}

/// Between-group mean gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Lexicographically smaller group.
    pub group_a: String,
    /// Lexicographically larger group.
    pub group_b: String,
    /// mean(group_a) - mean(group_b).
    pub gap: f64,
    /// Bootstrap CI of the gap.
    pub ci: crate::stats::CiBounds,
}

/// Per-group paired change between two systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupChangeReport {
    /// First system (minuend).
    pub system_a: String,
    /// Second system (subtrahend).
    pub system_b: String,
    /// group -> paired difference report.
    pub groups: BTreeMap<String, DiffReport>,
}

/// One attribute's disaggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    /// Attribute used for grouping.
    pub attribute: String,
    /// Metric id disaggregated.
    pub metric: String,
    /// system -> group -> report.
    pub summaries: BTreeMap<String, BTreeMap<String, GroupReport>>,
    /// system -> between-group gaps.
    pub gaps: BTreeMap<String, Vec<GapReport>>,
    /// Per-group change between two systems, when a pair was compared.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub change: Option<SubgroupChangeReport>,
}

/// One system's item-side exposure results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSystemReport {
    /// Gini coefficient of item exposure over the full catalog.
    pub gini: f64,
    /// L2 divergence of normalized exposure from the ideal policy.
    pub l2_vs_ideal: f64,
    /// KL divergence (nats) of normalized exposure from the ideal policy.
    pub kl_vs_ideal: f64,
    /// Relative path of the raw per-item exposure masses.
    pub exposure_csv: String,
    /// Relative path of the Lorenz curve points.
    pub lorenz_csv: String,
}

/// One system's group-aggregated exposure results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupExposureReport {
    /// L2 divergence of group exposure from the ideal policy's groups.
    pub l2_vs_ideal: f64,
    /// KL divergence of group exposure from the ideal policy's groups.
    pub kl_vs_ideal: f64,
    /// L2 divergence of group exposure from group prevalence.
    pub l2_vs_prevalence: f64,
    /// KL divergence of group exposure from group prevalence.
    pub kl_vs_prevalence: f64,
    /// Relative path of the per-group exposure masses.
    pub group_exposure_csv: String,
}

/// Item-subgroup exposure block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureGroupsReport {
    /// Item attribute used for grouping.
    pub attribute: String,
    /// Relative path of the normalized prevalence target.
    pub prevalence_csv: String,
    /// Relative path of the ideal policy's group exposure.
    pub ideal_groups_csv: String,
    /// system -> group exposure report.
    pub per_system: BTreeMap<String, GroupExposureReport>,
}

/// Exposure section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSection {
    /// Per-system item exposure results.
    pub systems: BTreeMap<String, ExposureSystemReport>,
    /// Relative path of the ideal-policy exposure masses.
    pub ideal_csv: String,
    /// Requests with no relevant items (they contribute no ideal exposure).
    pub empty_truth_requests: Vec<String>,
    /// Group-aggregated block when an item attribute was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<ExposureGroupsReport>,
}

/// Crossover interval in a patience sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverReport {
    /// First system of the pair.
    pub system_a: String,
    /// Second system of the pair.
    pub system_b: String,
    /// Subgroup the crossover occurred in, absent for overall curves.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Lower grid endpoint.
    pub gamma_lo: f64,
    /// Upper grid endpoint.
    pub gamma_hi: f64,
}

/// Patience sweep block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// The patience grid.
    pub grid: Vec<f64>,
    /// Relative path of the long-form curve data
    /// (`gamma,system,group,mean_rbp`).
    pub curves_csv: String,
    /// Detected crossovers.
    pub crossovers: Vec<CrossoverReport>,
}

/// Posterior block for one system (or system/group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSystemReport {
    /// Summary of the posterior samples.
    pub summary: SummaryReport,
    /// Relative path of the raw `(draw, gamma, value)` samples.
    pub samples_csv: String,
}

/// Patience-prior posterior block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    /// Beta prior shape a.
    pub prior_a: f64,
    /// Beta prior shape b.
    pub prior_b: f64,
    /// Number of Monte-Carlo draws.
    pub draws: usize,
    /// Keyed by system, or `system/group` when disaggregated.
    pub per_system: BTreeMap<String, PosteriorSystemReport>,
}

/// Uncertainty section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySection {
    /// Patience sweep, when run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepReport>,
    /// Posterior analysis, when run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorReport>,
}

/// Stability of one pairwise comparison across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySection {
    /// First system of the pair.
    pub system_a: String,
    /// Second system of the pair.
    pub system_b: String,
    /// Metric id compared.
    pub metric: String,
    /// Share of repetitions where A strictly beats B.
    pub sign_consistency: f64,
    /// Summary of the per-repetition mean differences.
    pub summary: SummaryReport,
}

/// Repetitions section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionsSection {
    /// Number of repetitions aggregated.
    pub n_repetitions: usize,
    /// Relative path of the per-repetition statistic frame.
    pub frame_csv: String,
    /// Pairwise stability results.
    pub stability: Vec<StabilitySection>,
}

/// All analysis sections; each is independently omittable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    /// Classical point estimates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointwise: Option<PointwiseSection>,
    /// Per-request metric distributions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distributions: Option<DistributionsSection>,
    /// Paired system differences.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub differences: Option<DifferencesSection>,
    /// Disaggregations keyed by attribute.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subgroups: Option<BTreeMap<String, SubgroupReport>>,
    /// Item-side exposure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exposure: Option<ExposureSection>,
    /// Parameter uncertainty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintySection>,
    /// Cross-repetition stability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<RepetitionsSection>,
}

impl Analysis {
    fn is_empty(&self) -> bool {
        self.pointwise.is_none()
            && self.distributions.is_none()
            && self.differences.is_none()
            && self.subgroups.is_none()
            && self.exposure.is_none()
            && self.uncertainty.is_none()
            && self.repetitions.is_none()
    }
}

/// The complete evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Schema version of this document.
    pub schema_version: u32,
    /// Inputs, settings, and methodological notes.
    pub provenance: Provenance,
    /// Analysis sections.
    pub analysis: Analysis,
}

impl Report {
    /// Deterministic pretty JSON; identical reports give identical bytes.
    pub fn to_json_string(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Parses a report back from JSON.
    pub fn from_json_str(text: &str) -> Result<Report> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A sidecar CSV scheduled to be written next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    /// Path relative to the report directory, e.g.
    /// `distributions/ecdf_sysA_rbp_0.8.csv`.
    pub rel_path: String,
    /// File contents.
    pub content: Vec<u8>,
}

/// A report plus its sidecar files, ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    /// The JSON document.
    pub report: Report,
    /// Sidecar CSVs referenced from the document.
    pub sidecars: Vec<Sidecar>,
}

impl ReportBundle {
    /// Writes `report.json` and every sidecar under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json_string()?)?;
        for sidecar in &self.sidecars {
            let path = dir.join(&sidecar.rel_path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, &sidecar.content)?;
        }
        Ok(())
    }
}

/// Turns an arbitrary label into a filesystem-safe slug.
fn slug(text: &str) -> String {
    let mut out: String = text
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// Incrementally assembles a [`ReportBundle`].
///
/// Section builders take already-computed analysis results; nothing is
/// recomputed here. `build` fails if no section was added.
pub struct ReportBuilder {
    provenance: Provenance,
    analysis: Analysis,
    sidecars: Vec<Sidecar>,
}

impl ReportBuilder {
    /// Starts a report with the given provenance.
    pub fn new(provenance: Provenance) -> Self {
        ReportBuilder {
            provenance,
            analysis: Analysis::default(),
            sidecars: Vec::new(),
        }
    }

    fn push_sidecar(&mut self, rel_path: String, content: Vec<u8>) -> String {
        self.sidecars.push(Sidecar {
            rel_path: rel_path.clone(),
            content,
        });
        rel_path
    }

    fn summary_report(
        &mut self,
        summary: &DistributionSummary,
        section: &str,
        name: &str,
    ) -> Result<SummaryReport> {
        let mut ecdf_bytes = Vec::new();
        write_ecdf_csv(&summary.ecdf, &mut ecdf_bytes)?;
        let ecdf_csv = self.push_sidecar(format!("{section}/ecdf_{}.csv", slug(name)), ecdf_bytes);
        let (kde_csv, kde_degenerate_at) = match &summary.kde {
            Some(kde) => {
                let mut kde_bytes = Vec::new();
                write_kde_csv(kde, &mut kde_bytes)?;
                let path =
                    self.push_sidecar(format!("{section}/kde_{}.csv", slug(name)), kde_bytes);
                let degenerate = match kde {
                    KdeOutcome::DegenerateSpike { location } => Some(*location),
                    KdeOutcome::Grid { .. } => None,
                };
                (Some(path), degenerate)
            }
            None => (None, None),
        };
        Ok(SummaryReport {
            n: summary.n,
            mean: summary.mean,
            median: summary.median,
            percentiles: summary.percentiles.clone(),
            ecdf_csv,
            kde_csv,
            kde_degenerate_at,
        })
    }

    fn diff_report(
        &mut self,
        diff: &PairedDiffSummary,
        system_a: &str,
        system_b: &str,
        metric: &Metric,
        section: &str,
        name: &str,
    ) -> Result<DiffReport> {
        let mut ecdf_bytes = Vec::new();
        write_ecdf_csv(&diff.ecdf, &mut ecdf_bytes)?;
        let ecdf_csv = self.push_sidecar(format!("{section}/ecdf_{}.csv", slug(name)), ecdf_bytes);
        let mut diff_bytes = Vec::new();
        {
            use std::io::Write;
            writeln!(diff_bytes, "request_id,diff")?;
            for (request, value) in diff.requests.iter().zip(&diff.diffs) {
                writeln!(diff_bytes, "{request},{value}")?;
            }
        }
        let diffs_csv =
            self.push_sidecar(format!("{section}/diffs_{}.csv", slug(name)), diff_bytes);
        Ok(DiffReport {
            system_a: system_a.to_string(),
            system_b: system_b.to_string(),
            metric: metric.id(),
            n: diff.n,
            median_diff: diff.median_diff,
            fraction_helped: diff.fraction_helped,
            fraction_hurt: diff.fraction_hurt,
            fraction_tied: diff.fraction_tied,
            test: diff.test,
            ecdf_csv,
            diffs_csv,
        })
    }

    /// Adds the pointwise section from a metric frame.
    pub fn pointwise(&mut self, frame: &MetricFrame) -> Result<&mut Self> {
        let mut frame_bytes = Vec::new();
        frame.write_csv(&mut frame_bytes)?;
        let frame_csv = self.push_sidecar("pointwise/metric_frame.csv".to_string(), frame_bytes);
        let mut means = BTreeMap::new();
        let mut missing = BTreeMap::new();
        for system in frame.systems() {
            let mut per_metric = BTreeMap::new();
            for metric in frame.metrics() {
                per_metric.insert(metric.id(), frame.mean(system, metric)?);
            }
            means.insert(system.clone(), per_metric);
            missing.insert(system.clone(), frame.missing_requests(system).to_vec());
        }
        self.analysis.pointwise = Some(PointwiseSection {
            means,
            missing_requests: missing,
            frame_csv,
        });
        Ok(self)
    }

    /// Adds the distributions section.
    ///
    /// `summaries` maps (system, metric id) to its computed summary.
    pub fn distributions(
        &mut self,
        summaries: &BTreeMap<(String, String), DistributionSummary>,
    ) -> Result<&mut Self> {
        let mut section: BTreeMap<String, BTreeMap<String, SummaryReport>> = BTreeMap::new();
        for ((system, metric_id), summary) in summaries {
            let name = format!("{system}_{metric_id}");
            let report = self.summary_report(summary, "distributions", &name)?;
            section
                .entry(system.clone())
                .or_default()
                .insert(metric_id.clone(), report);
        }
        self.analysis.distributions = Some(DistributionsSection { summaries: section });
        Ok(self)
    }

    /// Adds the differences section.
    pub fn differences(
        &mut self,
        diffs: &[(String, String, Metric, PairedDiffSummary)],
    ) -> Result<&mut Self> {
        let mut pairs = Vec::new();
        for (system_a, system_b, metric, diff) in diffs {
            let name = format!("{system_a}_vs_{system_b}_{}", metric.id());
            pairs.push(self.diff_report(diff, system_a, system_b, metric, "differences", &name)?);
        }
        self.analysis.differences = Some(DifferencesSection { pairs });
        Ok(self)
    }

    /// Adds one attribute's subgroup disaggregation.
    pub fn subgroups(
        &mut self,
        attribute: &str,
        metric: &Metric,
        per_system: &BTreeMap<String, GroupedSummary>,
        change: Option<(&str, &str, &BTreeMap<String, PairedDiffSummary>)>,
    ) -> Result<&mut Self> {
        let mut summaries = BTreeMap::new();
        let mut gaps = BTreeMap::new();
        for (system, grouped) in per_system {
            let mut group_reports = BTreeMap::new();
            for (group, entry) in &grouped.groups {
                let name = format!("{attribute}_{system}_{}_{group}", metric.id());
                let report = self.summary_report(&entry.summary, "subgroups", &name)?;
                group_reports.insert(
                    group.clone(),
                    GroupReport {
                        weight: entry.weight,
                        summary: report,
                    },
                );
            }
            summaries.insert(system.clone(), group_reports);
            gaps.insert(
                system.clone(),
                grouped
                    .gaps
                    .iter()
                    .map(|gap| GapReport {
                        group_a: gap.group_a.clone(),
                        group_b: gap.group_b.clone(),
                        gap: gap.gap,
                        ci: gap.ci,
                    })
                    .collect(),
            );
        }
        let change = match change {
            Some((system_a, system_b, groups)) => {
                let mut reports = BTreeMap::new();
                for (group, diff) in groups {
                    let name = format!(
                        "{attribute}_change_{system_a}_vs_{system_b}_{}_{group}",
                        metric.id()
                    );
                    reports.insert(
                        group.clone(),
                        self.diff_report(diff, system_a, system_b, metric, "subgroups", &name)?,
                    );
                }
                Some(SubgroupChangeReport {
                    system_a: system_a.to_string(),
                    system_b: system_b.to_string(),
                    groups: reports,
                })
            }
            None => None,
        };
        let report = SubgroupReport {
            attribute: attribute.to_string(),
            metric: metric.id(),
            summaries,
            gaps,
            change,
        };
        self.analysis
            .subgroups
            .get_or_insert_with(BTreeMap::new)
            .insert(attribute.to_string(), report);
        Ok(self)
    }

    /// Adds the exposure section.
    pub fn exposure(
        &mut self,
        per_system: &BTreeMap<String, ExposureSystemInput>,
        ideal: &IdealExposure,
        groups: Option<&ExposureGroupsInput>,
    ) -> Result<&mut Self> {
        let mut ideal_bytes = Vec::new();
        ideal.exposure.write_csv(&mut ideal_bytes, "item")?;
        let ideal_csv = self.push_sidecar("exposure/ideal.csv".to_string(), ideal_bytes);

        let mut systems = BTreeMap::new();
        for (system, input) in per_system {
            let mut exposure_bytes = Vec::new();
            input.exposure.write_csv(&mut exposure_bytes, "item")?;
            let exposure_csv = self.push_sidecar(
                format!("exposure/exposure_{}.csv", slug(system)),
                exposure_bytes,
            );
            let mut lorenz_bytes = Vec::new();
            crate::exposure::write_lorenz_csv(&input.lorenz, &mut lorenz_bytes)?;
            let lorenz_csv = self.push_sidecar(
                format!("exposure/lorenz_{}.csv", slug(system)),
                lorenz_bytes,
            );
            systems.insert(
                system.clone(),
                ExposureSystemReport {
                    gini: input.gini,
                    l2_vs_ideal: input.l2_vs_ideal,
                    kl_vs_ideal: input.kl_vs_ideal,
                    exposure_csv,
                    lorenz_csv,
                },
            );
        }

        let groups = match groups {
            Some(input) => {
                let mut prevalence_bytes = Vec::new();
                input.prevalence.write_csv(&mut prevalence_bytes, "group")?;
                let prevalence_csv =
                    self.push_sidecar("exposure/prevalence.csv".to_string(), prevalence_bytes);
                let mut ideal_group_bytes = Vec::new();
                input
                    .ideal_groups
                    .write_csv(&mut ideal_group_bytes, "group")?;
                let ideal_groups_csv = self
                    .push_sidecar("exposure/ideal_groups.csv".to_string(), ideal_group_bytes);
                let mut per_system_reports = BTreeMap::new();
                for (system, entry) in &input.per_system {
                    let mut bytes = Vec::new();
                    entry.exposure.write_csv(&mut bytes, "group")?;
                    let group_exposure_csv = self.push_sidecar(
                        format!("exposure/groups_{}.csv", slug(system)),
                        bytes,
                    );
                    per_system_reports.insert(
                        system.clone(),
                        GroupExposureReport {
                            l2_vs_ideal: entry.l2_vs_ideal,
                            kl_vs_ideal: entry.kl_vs_ideal,
                            l2_vs_prevalence: entry.l2_vs_prevalence,
                            kl_vs_prevalence: entry.kl_vs_prevalence,
                            group_exposure_csv,
                        },
                    );
                }
                Some(ExposureGroupsReport {
                    attribute: input.attribute.clone(),
                    prevalence_csv,
                    ideal_groups_csv,
                    per_system: per_system_reports,
                })
            }
            None => None,
        };

        self.analysis.exposure = Some(ExposureSection {
            systems,
            ideal_csv,
            empty_truth_requests: ideal.empty_requests.clone(),
            groups,
        });
        Ok(self)
    }

    /// Adds a patience sweep to the uncertainty section.
    pub fn sweep(&mut self, sweep: &SweepResult) -> Result<&mut Self> {
        let mut bytes = Vec::new();
        {
            use std::io::Write;
            writeln!(bytes, "gamma,system,group,mean_rbp")?;
            for curve in &sweep.curves {
                let group = curve.group.as_deref().unwrap_or("");
                for (&gamma, &mean) in sweep.grid.iter().zip(&curve.means) {
                    writeln!(bytes, "{gamma},{},{group},{mean}", curve.system)?;
                }
            }
        }
        let curves_csv = self.push_sidecar("uncertainty/sweep.csv".to_string(), bytes);
        let report = SweepReport {
            grid: sweep.grid.clone(),
            curves_csv,
            crossovers: sweep
                .crossovers
                .iter()
                .map(|c| CrossoverReport {
                    system_a: c.system_a.clone(),
                    system_b: c.system_b.clone(),
                    group: c.group.clone(),
                    gamma_lo: c.gamma_lo,
                    gamma_hi: c.gamma_hi,
                })
                .collect(),
        };
        self.analysis
            .uncertainty
            .get_or_insert_with(UncertaintySection::default)
            .sweep = Some(report);
        Ok(self)
    }

    /// Adds a posterior analysis to the uncertainty section.
    pub fn posterior(&mut self, posterior: &PosteriorResult) -> Result<&mut Self> {
        let mut per_system = BTreeMap::new();
        for samples in &posterior.per_system {
            let key = match &samples.group {
                Some(group) => format!("{}/{group}", samples.system),
                None => samples.system.clone(),
            };
            let summary =
                self.summary_report(&samples.summary, "uncertainty", &format!("posterior_{key}"))?;
            let mut bytes = Vec::new();
            {
                use std::io::Write;
                writeln!(bytes, "draw,gamma,mean_rbp")?;
                for (idx, (gamma, value)) in
                    posterior.gammas.iter().zip(&samples.samples).enumerate()
                {
                    writeln!(bytes, "{idx},{gamma},{value}")?;
                }
            }
            let samples_csv = self.push_sidecar(
                format!("uncertainty/posterior_samples_{}.csv", slug(&key)),
                bytes,
            );
            per_system.insert(
                key,
                PosteriorSystemReport {
                    summary,
                    samples_csv,
                },
            );
        }
        let report = PosteriorReport {
            prior_a: posterior.prior.a,
            prior_b: posterior.prior.b,
            draws: posterior.gammas.len(),
            per_system,
        };
        self.analysis
            .uncertainty
            .get_or_insert_with(UncertaintySection::default)
            .posterior = Some(report);
        Ok(self)
    }

    /// Adds the repetitions section.
    pub fn repetitions(
        &mut self,
        frame: &RepetitionFrame,
        stability: &[StabilityReport],
    ) -> Result<&mut Self> {
        let mut frame_bytes = Vec::new();
        frame.write_csv(&mut frame_bytes)?;
        let frame_csv = self.push_sidecar("repetitions/frame.csv".to_string(), frame_bytes);
        let mut sections = Vec::new();
        for report in stability {
            let name = format!(
                "stability_{}_vs_{}_{}",
                report.system_a,
                report.system_b,
                report.metric.id()
            );
            let summary = self.summary_report(&report.summary, "repetitions", &name)?;
            sections.push(StabilitySection {
                system_a: report.system_a.clone(),
                system_b: report.system_b.clone(),
                metric: report.metric.id(),
                sign_consistency: report.sign_consistency,
                summary,
            });
        }
        self.analysis.repetitions = Some(RepetitionsSection {
            n_repetitions: frame.repetition_ids().len(),
            frame_csv,
            stability: sections,
        });
        Ok(self)
    }

    /// Mutable access to the provenance (for recording input digests).
    pub fn provenance_mut(&mut self) -> &mut Provenance {
        &mut self.provenance
    }

    /// Finalizes the bundle; at least one section must be present.
    pub fn build(self) -> Result<ReportBundle> {
        if self.analysis.is_empty() {
            return Err(Error::invalid("report has no analysis sections"));
        }
        Ok(ReportBundle {
            report: Report {
                schema_version: SCHEMA_VERSION,
                provenance: self.provenance,
                analysis: self.analysis,
            },
            sidecars: self.sidecars,
        })
    }
}

/// One system's item-exposure inputs for [`ReportBuilder::exposure`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSystemInput {
    /// Raw per-item exposure masses.
    pub exposure: ExposureVector,
    /// Lorenz curve points of the exposure.
    pub lorenz: Vec<(f64, f64)>,
    /// Gini coefficient of the exposure.
    pub gini: f64,
    /// L2 divergence of normalized exposure from the ideal policy.
    pub l2_vs_ideal: f64,
    /// KL divergence of normalized exposure from the ideal policy.
    pub kl_vs_ideal: f64,
}

/// Input bundle for the exposure group block of [`ReportBuilder::exposure`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureGroupsInput {
    /// Item attribute used for grouping.
    pub attribute: String,
    /// Normalized group prevalence over the catalog.
    pub prevalence: ExposureVector,
    /// Ideal-policy exposure aggregated to groups.
    pub ideal_groups: ExposureVector,
    /// Per-system group exposure and divergences.
    pub per_system: BTreeMap<String, ExposureGroupsSystemInput>,
}

/// One system's group exposure inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureGroupsSystemInput {
    /// Group-aggregated exposure.
    pub exposure: ExposureVector,
    /// L2 vs the ideal policy's group exposure.
    pub l2_vs_ideal: f64,
    /// KL vs the ideal policy's group exposure.
    pub kl_vs_ideal: f64,
    /// L2 vs group prevalence.
    pub l2_vs_prevalence: f64,
    /// KL vs group prevalence.
    pub kl_vs_prevalence: f64,
}

/// Renders the Table-1-style fixed-width summary: one row per system with
/// mean and percentile estimates, CIs on a sub-line. Requires the
/// distributions section.
pub fn render_summary_table(report: &Report) -> Result<String> {
    let distributions = report
        .analysis
        .distributions
        .as_ref()
        .ok_or_else(|| Error::missing("report has no distributions section"))?;

    // Collect metric ids across systems (stable sorted order).
    let mut metric_ids: Vec<String> = Vec::new();
    for per_metric in distributions.summaries.values() {
        for metric_id in per_metric.keys() {
            if !metric_ids.contains(metric_id) {
                metric_ids.push(metric_id.clone());
            }
        }
    }
    metric_ids.sort();

    let mut out = String::new();
    for metric_id in &metric_ids {
        writeln!(out, "metric: {metric_id}").expect("write to string");
        // Column plan: mean first, then percentiles ascending with the
        // median standing in for p50.
        let mut columns: Vec<(String, Option<f64>)> = vec![("mean".to_string(), None)];
        let first = distributions
            .summaries
            .values()
            .find_map(|m| m.get(metric_id))
            .expect("metric came from this map");
        let mut percents: Vec<f64> = first.percentiles.iter().map(|p| p.percent).collect();
        percents.sort_by(f64::total_cmp);
        let mut median_placed = false;
        for percent in percents {
            if percent == 50.0 {
                columns.push(("median".to_string(), Some(50.0)));
                median_placed = true;
            } else {
                if !median_placed && percent > 50.0 {
                    columns.push(("median".to_string(), Some(50.0)));
                    median_placed = true;
                }
                columns.push((format!("p{percent}"), Some(percent)));
            }
        }
        if !median_placed {
            columns.push(("median".to_string(), Some(50.0)));
        }

        let system_width = distributions
            .summaries
            .keys()
            .map(|s| s.len())
            .max()
            .unwrap_or(6)
            .max("system".len())
            + 2;
        let col_width = 18;

        write!(out, "{:<system_width$}", "system").expect("write to string");
        for (label, _) in &columns {
            write!(out, "{label:<col_width$}").expect("write to string");
        }
        out.push('\n');

        for (system, per_metric) in &distributions.summaries {
            let Some(summary) = per_metric.get(metric_id) else {
                continue;
            };
            let stat_for = |percent: Option<f64>| -> SummaryStat {
                match percent {
                    None => summary.mean,
                    Some(50.0) => summary.median,
                    Some(p) => summary
                        .percentiles
                        .iter()
                        .find(|ps| ps.percent == p)
                        .map(|ps| ps.stat)
                        .unwrap_or(summary.median),
                }
            };
            write!(out, "{system:<system_width$}").expect("write to string");
            for (_, percent) in &columns {
                let stat = stat_for(*percent);
                write!(out, "{:<col_width$}", format!("{:.4}", stat.value))
                    .expect("write to string");
            }
            out.push('\n');
            write!(out, "{:<system_width$}", "").expect("write to string");
            for (_, percent) in &columns {
                let stat = stat_for(*percent);
                write!(
                    out,
                    "{:<col_width$}",
                    format!("({:.4}, {:.4})", stat.ci.lo, stat.ci.hi)
                )
                .expect("write to string");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}
