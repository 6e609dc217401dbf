//! Per-request effectiveness metrics and the metric frame.
//!
//! All metrics are pure functions of a ranked item list and that request's
//! relevance gains. [`evaluate`] assembles a [`MetricFrame`] holding every
//! per-request value; nothing is averaged away at this stage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Run, TruthSet};

/// Exponent convention for the geometric browsing model.
///
/// The `Paper` convention weights rank `i` by `(1-γ)γ^i`, so the first rank
/// receives `(1-γ)γ`; the `Classic` convention uses `(1-γ)γ^(i-1)` with
/// first-rank weight `1-γ`. The two differ by a uniform factor of `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Rank `i` weighted by `(1-γ)γ^i`.
    Paper,
    /// Rank `i` weighted by `(1-γ)γ^(i-1)`.
    Classic,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convention::Paper => write!(f, "paper"),
            Convention::Classic => write!(f, "classic"),
        }
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Convention::Paper),
            "classic" => Ok(Convention::Classic),
            other => Err(Error::invalid(format!(
                "unknown convention `{other}` (expected `paper` or `classic`)"
            ))),
        }
    }
}

/// Geometric browsing model shared by user-side RBP and item-side exposure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrowsingModel {
    patience: f64,
    convention: Convention,
    depth: usize,
}

impl BrowsingModel {
    /// Default truncation depth, matching 1000-item recommendation lists.
    pub const DEFAULT_DEPTH: usize = 1000;

    /// Creates a model; patience must lie strictly inside `(0, 1)` and the
    /// truncation depth must be at least 1.
    pub fn new(patience: f64, convention: Convention, depth: usize) -> Result<Self> {
        if !(patience > 0.0 && patience < 1.0) {
            return Err(Error::invalid(format!(
                "patience must lie in (0, 1), got {patience}"
            )));
        }
        if depth == 0 {
            return Err(Error::invalid("truncation depth must be at least 1"));
        }
        Ok(BrowsingModel {
            patience,
            convention,
            depth,
        })
    }

    /// Patience parameter γ.
    pub fn patience(&self) -> f64 {
        self.patience
    }

    /// Exponent convention.
    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Truncation depth N.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Returns the same model with a different patience value.
    pub fn with_patience(&self, patience: f64) -> Result<Self> {
        BrowsingModel::new(patience, self.convention, self.depth)
    }

    /// Position weight at a 1-based rank; 0 beyond the truncation depth.
    pub fn rank_weight(&self, rank: usize) -> f64 {
        if rank == 0 || rank > self.depth {
            return 0.0;
        }
        let gamma = self.patience;
        match self.convention {
            Convention::Paper => (1.0 - gamma) * gamma.powi(rank as i32),
            Convention::Classic => (1.0 - gamma) * gamma.powi(rank as i32 - 1),
        }
    }
}

/// A per-request effectiveness metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// Rank-biased precision with the given patience.
    Rbp {
        /// Patience parameter for this metric instance.
        gamma: f64,
    },
    /// Normalized discounted cumulative gain.
    Ndcg,
    /// Mean reciprocal rank (reciprocal rank per request).
    Mrr,
    /// Binary hit indicator within the top `k`.
    HitRate {
        /// Inclusive cutoff rank.
        k: usize,
    },
}

impl Metric {
    /// Identifier used in frames, reports, and CSV output.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Rbp { gamma } => write!(f, "rbp({gamma})"),
            Metric::Ndcg => write!(f, "ndcg"),
            Metric::Mrr => write!(f, "mrr"),
            Metric::HitRate { k } => write!(f, "hr({k})"),
        }
    }
}

/// Rank-biased precision of a ranked list under a browsing model.
///
/// Requires binary gains. The classic-convention value is the truncated sum
/// `(1-γ) Σ r_i γ^(i-1)`; the paper-convention value is defined as exactly
/// `γ` times the classic value, so the convention identity holds bit for bit.
pub fn rbp(list: &[String], gains: &BTreeMap<String, f64>, model: &BrowsingModel) -> Result<f64> {
    let gamma = model.patience();
    let mut classic_sum = 0.0;
    for (idx, item) in list.iter().take(model.depth()).enumerate() {
        let gain = gains.get(item).copied().unwrap_or(0.0);
        if gain != 0.0 && gain != 1.0 {
            return Err(Error::invalid(format!(
                "rbp requires binary gains; item {item} has gain {gain}"
            )));
        }
        if gain == 1.0 {
            classic_sum += (1.0 - gamma) * gamma.powi(idx as i32);
        }
    }
    Ok(match model.convention() {
        Convention::Classic => classic_sum,
        Convention::Paper => gamma * classic_sum,
    })
}

/// Normalized DCG with a `log2(rank + 1)` discount, truncated at `depth`.
///
/// The ideal ranking places the request's gains in descending order at the
/// top ranks. Requests whose ideal DCG is 0 score 0.
pub fn ndcg(list: &[String], gains: &BTreeMap<String, f64>, depth: usize) -> f64 {
    let dcg: f64 = list
        .iter()
        .take(depth)
        .enumerate()
        .map(|(idx, item)| {
            let gain = gains.get(item).copied().unwrap_or(0.0);
            gain / ((idx + 2) as f64).log2()
        })
        .sum();
    let mut ideal: Vec<f64> = gains.values().copied().filter(|&g| g > 0.0).collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let idcg: f64 = ideal
        .iter()
        .take(depth)
        .enumerate()
        .map(|(idx, gain)| gain / ((idx + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Reciprocal rank of the first relevant item within `depth`; 0 if none.
pub fn mrr(list: &[String], gains: &BTreeMap<String, f64>, depth: usize) -> f64 {
    for (idx, item) in list.iter().take(depth).enumerate() {
        if gains.get(item).copied().unwrap_or(0.0) > 0.0 {
            return 1.0 / (idx + 1) as f64;
        }
    }
    0.0
}

/// 1 if any relevant item appears at rank `<= k`, else 0.
pub fn hit_rate(list: &[String], gains: &BTreeMap<String, f64>, k: usize) -> f64 {
    let hit = list
        .iter()
        .take(k)
        .any(|item| gains.get(item).copied().unwrap_or(0.0) > 0.0);
    if hit {
        1.0
    } else {
        0.0
    }
}

/// Matrix of per-request metric values over (system, metric, request).
///
/// The request domain is the truth set's request list; requests a run does
/// not cover score 0 on every metric and are flagged, never dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricFrame {
    systems: Vec<String>,
    metrics: Vec<Metric>,
    requests: Vec<String>,
    /// values[system][metric][request]
    values: Vec<Vec<Vec<f64>>>,
    missing: BTreeMap<String, Vec<String>>,
}

impl MetricFrame {
    /// System ids in sorted order.
    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    /// Metrics in the order they were requested.
    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }

    /// Request ids in sorted order; every system shares this domain.
    pub fn requests(&self) -> &[String] {
        &self.requests
    }

    /// Requests the given system's run did not cover.
    pub fn missing_requests(&self, system: &str) -> &[String] {
        self.missing.get(system).map(Vec::as_slice).unwrap_or(&[])
    }

    fn system_index(&self, system: &str) -> Result<usize> {
        self.systems
            .iter()
            .position(|s| s == system)
            .ok_or_else(|| Error::missing(format!("system {system} not in frame")))
    }

    fn metric_index(&self, metric: &Metric) -> Result<usize> {
        self.metrics
            .iter()
            .position(|m| m == metric)
            .ok_or_else(|| Error::missing(format!("metric {metric} not in frame")))
    }

    /// Per-request values for one (system, metric), aligned with
    /// [`MetricFrame::requests`].
    pub fn values(&self, system: &str, metric: &Metric) -> Result<&[f64]> {
        let s = self.system_index(system)?;
        let m = self.metric_index(metric)?;
        Ok(&self.values[s][m])
    }

    /// A single cell.
    pub fn value(&self, system: &str, metric: &Metric, request: &str) -> Result<f64> {
        let r = self
            .requests
            .binary_search_by(|probe| probe.as_str().cmp(request))
            .map_err(|_| Error::missing(format!("request {request} not in frame")))?;
        Ok(self.values(system, metric)?[r])
    }

    /// Mean of one (system, metric) column over all requests.
    pub fn mean(&self, system: &str, metric: &Metric) -> Result<f64> {
        Ok(crate::stats::mean(self.values(system, metric)?))
    }

    /// Writes the frame as long-form CSV: `system_id,metric_id,request_id,value`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "system_id,metric_id,request_id,value")?;
        for (s, system) in self.systems.iter().enumerate() {
            for (m, metric) in self.metrics.iter().enumerate() {
                for (r, request) in self.requests.iter().enumerate() {
                    writeln!(writer, "{system},{metric},{request},{}", self.values[s][m][r])?;
                }
            }
        }
        Ok(())
    }
}

/// Evaluates every run over the truth set's request domain.
///
/// Preconditions: at least one run and one metric; system ids unique; every
/// run request judged in the truth set (possibly with all-zero gains); binary
/// truth whenever an RBP metric is requested.
pub fn evaluate(
    runs: &[Run],
    truth: &TruthSet,
    metrics: &[Metric],
    model: &BrowsingModel,
) -> Result<MetricFrame> {
    if runs.is_empty() {
        return Err(Error::invalid("evaluate requires at least one run"));
    }
    if metrics.is_empty() {
        return Err(Error::invalid("evaluate requires at least one metric"));
    }
    let wants_rbp = metrics.iter().any(|m| matches!(m, Metric::Rbp { .. }));
    if wants_rbp && !truth.is_binary() {
        return Err(Error::invalid("rbp metrics require binary truth gains"));
    }
    for (idx, metric) in metrics.iter().enumerate() {
        if let Metric::HitRate { k: 0 } = metric {
            return Err(Error::invalid("hit rate needs a cutoff of at least 1"));
        }
        if metrics[..idx].contains(metric) {
            return Err(Error::invalid(format!("metric {metric} requested twice")));
        }
    }

    let mut systems: Vec<&Run> = runs.iter().collect();
    systems.sort_by(|a, b| a.system_id.cmp(&b.system_id));
    for pair in systems.windows(2) {
        if pair[0].system_id == pair[1].system_id {
            return Err(Error::invalid(format!(
                "duplicate system id {}",
                pair[0].system_id
            )));
        }
    }

    let requests: Vec<String> = truth.request_ids().map(String::from).collect();
    for run in &systems {
        for request in run.requests.keys() {
            if !truth.contains_request(request) {
                return Err(Error::invalid(format!(
                    "run for system {} covers request {request} absent from the truth set",
                    run.system_id
                )));
            }
        }
    }

    let mut values = Vec::with_capacity(systems.len());
    let mut missing = BTreeMap::new();
    let empty_gains = BTreeMap::new();
    for run in &systems {
        // Parallel over requests; each row is written independently, so the
        // result does not depend on the thread schedule.
        let rows: Vec<Result<Vec<f64>>> = requests
            .par_iter()
            .map(|request| {
                let gains = truth.request_gains(request).unwrap_or(&empty_gains);
                match run.requests.get(request) {
                    Some(list) => metrics
                        .iter()
                        .map(|metric| metric_value(metric, list, gains, model))
                        .collect(),
                    None => Ok(vec![0.0; metrics.len()]),
                }
            })
            .collect();
        let mut by_metric = vec![Vec::with_capacity(requests.len()); metrics.len()];
        for row in rows {
            let row = row?;
            for (m, value) in row.into_iter().enumerate() {
                by_metric[m].push(value);
            }
        }
        let absent: Vec<String> = requests
            .iter()
            .filter(|request| !run.requests.contains_key(*request))
            .cloned()
            .collect();
        missing.insert(run.system_id.clone(), absent);
        values.push(by_metric);
    }

    Ok(MetricFrame {
        systems: systems.iter().map(|r| r.system_id.clone()).collect(),
        metrics: metrics.to_vec(),
        requests,
        values,
        missing,
    })
}

fn metric_value(
    metric: &Metric,
    list: &[String],
    gains: &BTreeMap<String, f64>,
    model: &BrowsingModel,
) -> Result<f64> {
    match metric {
        Metric::Rbp { gamma } => rbp(list, gains, &model.with_patience(*gamma)?),
        Metric::Ndcg => Ok(ndcg(list, gains, model.depth())),
        Metric::Mrr => Ok(mrr(list, gains, model.depth())),
        Metric::HitRate { k } => Ok(hit_rate(list, gains, *k)),
    }
}
