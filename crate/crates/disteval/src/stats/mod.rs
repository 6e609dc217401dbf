//! Distribution statistics: order statistics, ECDF, KDE grids, seeded
//! percentile bootstrap, and paired differences with Student-t tests.
//!
//! Everything here is deterministic given its inputs and seed. Bootstrap
//! resample indices are drawn in a fixed sequential order before any
//! evaluation, so results never depend on the thread schedule.

pub mod special;


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricFrame};
use crate::seed::derive_seed;

/// Arithmetic mean. Empty input yields NaN; callers guard for non-empty.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than 2 samples.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Quantile by linear interpolation on order statistics.
///
/// For `n` sorted samples the quantile at fraction `p` sits at position
/// `h = (n-1)p`; the value interpolates linearly between the neighbouring
/// order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&p), "quantile fraction must be in [0, 1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let target = p * (n - 1) as f64;
    let k = (target.floor() as usize).min(n - 1);
    if k >= n - 1 {
        return sorted[n - 1];
    }
    let frac = target - k as f64;
    sorted[k] + frac * (sorted[k + 1] - sorted[k])
}

/// Weighted mean of `(value, weight)` pairs.
pub fn weighted_mean(pairs: &[(f64, f64)]) -> f64 {
    let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
    pairs.iter().map(|&(x, w)| w * x).sum::<f64>() / total
}

/// Weighted quantile generalizing [`quantile`]: sample `k` occupies the
/// cumulative-weight start position `S_k = w_0 + ... + w_{k-1}` and the
/// quantile at `p` interpolates at position `p * S_{n-1}`. With unit weights
/// this reduces exactly to the `(n-1)p` rule.
pub fn weighted_quantile(sorted: &[(f64, f64)], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0].0;
    }
    let mut starts = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &(_, w) in sorted {
        starts.push(acc);
        acc += w;
    }
    let span = starts[n - 1];
    if span <= 0.0 {
        return sorted[0].0;
    }
    let target = p * span;
    let k = starts.partition_point(|&s| s <= target).saturating_sub(1);
    if k >= n - 1 {
        return sorted[n - 1].0;
    }
    let frac = (target - starts[k]) / (starts[k + 1] - starts[k]);
    sorted[k].0 + frac * (sorted[k + 1].0 - sorted[k].0)
}

fn weighted_sd(pairs: &[(f64, f64)]) -> f64 {
    let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
    if pairs.len() < 2 || total <= 1.0 {
        return 0.0;
    }
    let m = weighted_mean(pairs);
    let ss: f64 = pairs.iter().map(|&(x, w)| w * (x - m) * (x - m)).sum();
    (ss / (total - 1.0)).sqrt()
}

/// An empirical CDF as sorted `(x, F(x))` step points at the unique sample
/// values; `F(x) = (weight of samples <= x) / total weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    points: Vec<(f64, f64)>,
}

impl EcdfCurve {
    /// Step points (one per distinct sample value), final F is 1.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Evaluates the step function; 0 below the smallest sample.
    pub fn value_at(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|&(px, _)| px <= x);
        if idx == 0 {
            0.0
        } else {
            self.points[idx - 1].1
        }
    }
}

/// Empirical CDF of a sample.
pub fn ecdf(samples: &[f64]) -> Result<EcdfCurve> {
    if samples.is_empty() {
        return Err(Error::invalid("ecdf of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (idx, &x) in sorted.iter().enumerate() {
        let f = (idx + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => points.push((x, f)),
        }
    }
    Ok(EcdfCurve { points })
}

fn ecdf_weighted(sorted: &[(f64, f64)]) -> Result<EcdfCurve> {
    if sorted.is_empty() {
        return Err(Error::invalid("ecdf of an empty sample"));
    }
    let total: f64 = sorted.iter().map(|&(_, w)| w).sum();
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut acc = 0.0;
    for &(x, w) in sorted {
        acc += w;
        let f = acc / total;
        match points.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => points.push((x, f)),
        }
    }
    // Guard against accumulation drift on the final step.
    if let Some(last) = points.last_mut() {
        last.1 = 1.0;
    }
    Ok(EcdfCurve { points })
}

/// Result of a kernel density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KdeOutcome {
    /// Gaussian-kernel density evaluated on an even grid.
    Grid {
        /// Silverman bandwidth used.
        bandwidth: f64,
        /// `(x, density)` pairs.
        points: Vec<(f64, f64)>,
    },
    /// All samples equal: the density is a point mass, not a curve.
    DegenerateSpike {
        /// Location of the point mass.
        location: f64,
    },
}

/// Gaussian KDE on an even grid with the Silverman bandwidth
/// `0.9 * min(sd, IQR/1.34) * n^(-1/5)`.
///
/// Requires at least two samples and finite bounds. An all-equal sample is
/// reported as [`KdeOutcome::DegenerateSpike`]. When the IQR is zero but the
/// spread is not, the bandwidth falls back to the sd term alone.
pub fn kde_grid(samples: &[f64], grid_size: usize, bounds: (f64, f64)) -> Result<KdeOutcome> {
    let pairs: Vec<(f64, f64)> = samples.iter().map(|&x| (x, 1.0)).collect();
    kde_grid_weighted(&pairs, grid_size, bounds)
}

fn kde_grid_weighted(
    pairs: &[(f64, f64)],
    grid_size: usize,
    bounds: (f64, f64),
) -> Result<KdeOutcome> {
    if pairs.len() < 2 {
        return Err(Error::invalid("kde requires at least 2 samples"));
    }
    if grid_size < 2 {
        return Err(Error::invalid("kde grid needs at least 2 points"));
    }
    let (lo, hi) = bounds;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::invalid(format!("invalid kde bounds ({lo}, {hi})")));
    }

    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|&(_, w)| w).sum();
    let sd = weighted_sd(&sorted);
    let iqr = weighted_quantile(&sorted, 0.75) - weighted_quantile(&sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if spread == 0.0 {
        spread = sd;
    }
    if spread == 0.0 {
        return Ok(KdeOutcome::DegenerateSpike {
            location: sorted[0].0,
        });
    }
    let bandwidth = 0.9 * spread * total.powf(-0.2);

    let step = (hi - lo) / (grid_size - 1) as f64;
    let norm = 1.0 / (total * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let points: Vec<(f64, f64)> = (0..grid_size)
        .map(|j| {
            let x = lo + step * j as f64;
            let density: f64 = sorted
                .iter()
                .map(|&(xi, w)| {
                    let z = (x - xi) / bandwidth;
                    w * (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm;
            (x, density)
        })
        .collect();
    Ok(KdeOutcome::Grid { bandwidth, points })
}

/// Percentile-bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of resamples (B).
    pub resamples: usize,
    /// Confidence level in (0, 1).
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            level: 0.95,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self) -> Result<()> {
        if self.resamples < 100 {
            return Err(Error::invalid(format!(
                "bootstrap needs at least 100 resamples, got {}",
                self.resamples
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!(
                "bootstrap level must lie in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

/// Percentile-bootstrap confidence interval for an arbitrary statistic.
///
/// Resamples with replacement from a generator seeded with `seed`; the
/// interval takes the `(1-level)/2` and `(1+level)/2` quantiles of the
/// resampled statistics.
pub fn bootstrap_ci<F>(
    samples: &[f64],
    statistic: F,
    config: &BootstrapConfig,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    if samples.len() < 2 {
        return Err(Error::invalid("bootstrap requires at least 2 samples"));
    }
    config.validate()?;
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(config.resamples);
    let mut resample = vec![0.0; n];
    for _ in 0..config.resamples {
        for slot in resample.iter_mut() {
            *slot = samples[rng.random_range(0..n)];
        }
        stats.push(statistic(&resample));
    }
    stats.sort_by(f64::total_cmp);
    let lo = quantile(&stats, (1.0 - config.level) / 2.0);
    let hi = quantile(&stats, (1.0 + config.level) / 2.0);
    Ok((lo, hi))
}

/// A confidence interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiBounds {
    /// Lower bound.
    pub lo: f64,
    /// Upper bound.
    pub hi: f64,
    /// Confidence level, e.g. 0.95.
    pub level: f64,
}

/// A statistic with its bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    /// Point estimate.
    pub value: f64,
    /// Bootstrap interval for the estimate.
    pub ci: CiBounds,
}

/// A percentile with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileStat {
    /// Percentile in percent units (10 = 10th percentile).
    pub percent: f64,
    /// Estimate and interval.
    pub stat: SummaryStat,
}

/// Distributional summary of one sample: order statistics with bootstrap
/// CIs plus the full ECDF and KDE grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    /// Number of samples (contributing entries).
    pub n: usize,
    /// Mean with CI.
    pub mean: SummaryStat,
    /// Median with CI.
    pub median: SummaryStat,
    /// Requested percentiles with CIs.
    pub percentiles: Vec<PercentileStat>,
    /// Empirical CDF of the sample.
    pub ecdf: EcdfCurve,
    /// KDE grid; `None` when fewer than 2 samples.
    pub kde: Option<KdeOutcome>,
}

/// Bounds for the KDE grid inside [`summarize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KdeBounds {
    /// The natural metric range [0, 1].
    Unit,
    /// Symmetric around zero, spanning the observed range of the sample.
    SymmetricAboutZero,
    /// Explicit bounds.
    Range(f64, f64),
}

/// Settings for [`summarize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryConfig {
    /// Percentiles to report, in percent units.
    pub percentiles: Vec<f64>,
    /// Bootstrap settings for all CIs.
    pub bootstrap: BootstrapConfig,
    /// Number of KDE grid points.
    pub kde_grid_size: usize,
    /// KDE grid bounds.
    pub kde_bounds: KdeBounds,
    /// Base seed; per-statistic streams are derived from it.
    pub seed: u64,
}

impl SummaryConfig {
    /// Case-study defaults: percentiles {10, 50, 90}, B = 1000 at level
    /// 0.95, 50 KDE grid points on [0, 1].
    pub fn new(seed: u64) -> Self {
        SummaryConfig {
            percentiles: vec![10.0, 50.0, 90.0],
            bootstrap: BootstrapConfig::default(),
            kde_grid_size: 50,
            kde_bounds: KdeBounds::Unit,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        self.bootstrap.validate()?;
        for &p in &self.percentiles {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "percentile {p} outside [0, 100]"
                )));
            }
        }
        Ok(())
    }
}

/// Summarizes a sample: mean, median, and percentiles, each with a
/// percentile-bootstrap CI, plus ECDF and KDE.
pub fn summarize(samples: &[f64], config: &SummaryConfig) -> Result<DistributionSummary> {
    let pairs: Vec<(f64, f64)> = samples.iter().map(|&x| (x, 1.0)).collect();
    summarize_weighted(&pairs, config)
}

/// Weighted form of [`summarize`] for fractional-membership samples.
/// With unit weights the results coincide with [`summarize`] exactly.
pub fn summarize_weighted(
    pairs: &[(f64, f64)],
    config: &SummaryConfig,
) -> Result<DistributionSummary> {
    if pairs.is_empty() {
        return Err(Error::invalid("summarize of an empty sample"));
    }
    if pairs.iter().any(|&(x, w)| !x.is_finite() || !w.is_finite() || w <= 0.0) {
        return Err(Error::invalid(
            "summarize requires finite samples and positive weights",
        ));
    }
    config.validate()?;

    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();

    let mean_value = weighted_mean(&sorted);
    let median_value = weighted_quantile(&sorted, 0.5);
    let percentile_values: Vec<f64> = config
        .percentiles
        .iter()
        .map(|&p| weighted_quantile(&sorted, p / 100.0))
        .collect();

    // One shared set of resamples feeds every statistic's interval; indices
    // are drawn sequentially up front so evaluation order cannot matter.
    let level = config.bootstrap.level;
    let (mean_ci, median_ci, percentile_cis) = if n == 1 {
        let exact = (mean_value, mean_value);
        (
            exact,
            (median_value, median_value),
            percentile_values.iter().map(|&v| (v, v)).collect::<Vec<_>>(),
        )
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "summary-bootstrap"));
        let b = config.bootstrap.resamples;
        let mut mean_stats = Vec::with_capacity(b);
        let mut median_stats = Vec::with_capacity(b);
        let mut pct_stats: Vec<Vec<f64>> = vec![Vec::with_capacity(b); config.percentiles.len()];
        let mut resample: Vec<(f64, f64)> = vec![(0.0, 0.0); n];
        for _ in 0..b {
            for slot in resample.iter_mut() {
                *slot = sorted[rng.random_range(0..n)];
            }
            resample.sort_by(|a, b| a.0.total_cmp(&b.0));
            mean_stats.push(weighted_mean(&resample));
            median_stats.push(weighted_quantile(&resample, 0.5));
            for (stats, &p) in pct_stats.iter_mut().zip(&config.percentiles) {
                stats.push(weighted_quantile(&resample, p / 100.0));
            }
        }
        let interval = |mut stats: Vec<f64>| {
            stats.sort_by(f64::total_cmp);
            (
                quantile(&stats, (1.0 - level) / 2.0),
                quantile(&stats, (1.0 + level) / 2.0),
            )
        };
        (
            interval(mean_stats),
            interval(median_stats),
            pct_stats.into_iter().map(interval).collect(),
        )
    };

    let ecdf = ecdf_weighted(&sorted)?;
    let kde = if n >= 2 {
        let bounds = match config.kde_bounds {
            KdeBounds::Unit => (0.0, 1.0),
            KdeBounds::SymmetricAboutZero => {
                let m = sorted
                    .iter()
                    .map(|&(x, _)| x.abs())
                    .fold(0.0_f64, f64::max);
                if m == 0.0 {
                    (-1.0, 1.0)
                } else {
                    (-m, m)
                }
            }
            KdeBounds::Range(lo, hi) => (lo, hi),
        };
        Some(kde_grid_weighted(&sorted, config.kde_grid_size, bounds)?)
    } else {
        None
    };

    // The interval must bracket the point estimate; percentile intervals do
    // so in all but pathological resampling corners, where we widen.
    let summary_stat = |value: f64, (lo, hi): (f64, f64)| SummaryStat {
        value,
        ci: CiBounds {
            lo: lo.min(value),
            hi: hi.max(value),
            level,
        },
    };
    Ok(DistributionSummary {
        n,
        mean: summary_stat(mean_value, mean_ci),
        median: summary_stat(median_value, median_ci),
        percentiles: config
            .percentiles
            .iter()
            .zip(percentile_values.iter().zip(percentile_cis))
            .map(|(&percent, (&value, ci))| PercentileStat {
                percent,
                stat: summary_stat(value, ci),
            })
            .collect(),
        ecdf,
        kde,
    })
}

/// Outcome of a paired two-sided Student-t test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairedTest {
    /// A well-defined test statistic and p-value.
    TTest {
        /// Test statistic `mean(d) / (sd(d)/sqrt(n))`.
        t: f64,
        /// Degrees of freedom (`n - 1`).
        df: f64,
        /// Two-sided p-value.
        p: f64,
    },
    /// Zero-variance differences: every pair differs by the same constant
    /// (exactly tied when the constant is 0). No numeric p exists.
    Degenerate {
        /// The shared difference.
        constant: f64,
    },
    /// Too few pairs to test (fewer than 2, or total weight <= 1).
    TooFewSamples,
}

/// Paired per-request differences between two systems on one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDiffSummary {
    /// Number of paired requests.
    pub n: usize,
    /// Total weight of the pairs (equals `n` for unweighted input).
    pub weight: f64,
    /// Request ids aligned with `diffs`.
    pub requests: Vec<String>,
    /// Per-request differences `A - B`.
    pub diffs: Vec<f64>,
    /// Median difference.
    pub median_diff: f64,
    /// Weighted share of requests with `A > B`.
    pub fraction_helped: f64,
    /// Weighted share of requests with `A < B`.
    pub fraction_hurt: f64,
    /// Weighted share of exact ties.
    pub fraction_tied: f64,
    /// ECDF of the differences.
    pub ecdf: EcdfCurve,
    /// Paired t-test outcome.
    pub test: PairedTest,
}

/// Paired difference summary of `system_a - system_b` on `metric`.
///
/// The frame guarantees both systems share the same request domain; fewer
/// than 2 requests is an error.
pub fn paired_diff(
    frame: &MetricFrame,
    system_a: &str,
    system_b: &str,
    metric: &Metric,
) -> Result<PairedDiffSummary> {
    let a = frame.values(system_a, metric)?;
    let b = frame.values(system_b, metric)?;
    if a.len() != b.len() {
        return Err(Error::invalid("paired systems cover different request sets"));
    }
    if a.len() < 2 {
        return Err(Error::invalid("paired test requires at least 2 requests"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let weights = vec![1.0; diffs.len()];
    paired_summary_from_diffs(frame.requests().to_vec(), diffs, weights)
}

/// Builds a paired summary from already-computed differences. Used directly
/// by subgroup analysis, where groups may be small (no error, the test is
/// reported as [`PairedTest::TooFewSamples`]) or fractionally weighted.
pub(crate) fn paired_summary_from_diffs(
    requests: Vec<String>,
    diffs: Vec<f64>,
    weights: Vec<f64>,
) -> Result<PairedDiffSummary> {
    if diffs.is_empty() {
        return Err(Error::invalid("paired summary of an empty sample"));
    }
    let n = diffs.len();
    let pairs: Vec<(f64, f64)> = diffs.iter().copied().zip(weights.iter().copied()).collect();
    let total: f64 = weights.iter().sum();

    let mut sorted = pairs.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let median_diff = weighted_quantile(&sorted, 0.5);
    let helped: f64 = pairs.iter().filter(|&&(d, _)| d > 0.0).map(|&(_, w)| w).sum();
    let hurt: f64 = pairs.iter().filter(|&&(d, _)| d < 0.0).map(|&(_, w)| w).sum();
    let tied: f64 = pairs.iter().filter(|&&(d, _)| d == 0.0).map(|&(_, w)| w).sum();

    let test = if n < 2 || total <= 1.0 {
        PairedTest::TooFewSamples
    } else {
        let m = weighted_mean(&pairs);
        let sd = weighted_sd(&pairs);
        if sd == 0.0 {
            PairedTest::Degenerate { constant: m }
        } else {
            let t = m / (sd / total.sqrt());
            let df = total - 1.0;
            PairedTest::TTest {
                t,
                df,
                p: special::student_t_two_sided_p(t, df),
            }
        }
    };

    // `+ 0.0` normalizes the -0.0 an empty f64 sum produces.
    Ok(PairedDiffSummary {
        n,
        weight: total,
        requests,
        diffs,
        median_diff,
        fraction_helped: helped / total + 0.0,
        fraction_hurt: hurt / total + 0.0,
        fraction_tied: tied / total + 0.0,
        ecdf: ecdf_weighted(&sorted)?,
        test,
    })
}

/// Writes ECDF points as CSV plot data.
pub fn write_ecdf_csv<W: std::io::Write>(curve: &EcdfCurve, mut writer: W) -> Result<()> {
    writeln!(writer, "x,cumulative_fraction")?;
    for &(x, f) in curve.points() {
        writeln!(writer, "{x},{f}")?;
    }
    Ok(())
}

/// Writes a KDE grid as CSV plot data; a degenerate spike becomes a single
/// row with an empty density column.
pub fn write_kde_csv<W: std::io::Write>(kde: &KdeOutcome, mut writer: W) -> Result<()> {
    writeln!(writer, "x,density")?;
    match kde {
        KdeOutcome::Grid { points, .. } => {
            for &(x, d) in points {
                writeln!(writer, "{x},{d}")?;
            }
        }
        KdeOutcome::DegenerateSpike { location } => {
            writeln!(writer, "{location},")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{evaluate, BrowsingModel, Convention};
    use crate::model::{Run, TruthSet};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quantile_reference_case() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_abs_diff_eq!(quantile(&xs, 0.10), 1.4, epsilon = 1e-12);
        assert_abs_diff_eq!(quantile(&xs, 0.90), 4.6, epsilon = 1e-12);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert_eq!(quantile(&xs, 0.5), 3.0);
    }

    #[test]
    fn degenerate_constant_sample() {
        let cfg = SummaryConfig::new(7);
        let summary = summarize(&[0.3, 0.3, 0.3, 0.3], &cfg).unwrap();
        assert_eq!(summary.mean.value, 0.3);
        assert_eq!(summary.median.value, 0.3);
        assert_eq!(summary.mean.ci.lo, 0.3);
        assert_eq!(summary.mean.ci.hi, 0.3);
        for p in &summary.percentiles {
            assert_eq!(p.stat.value, 0.3);
            assert_eq!(p.stat.ci.lo, 0.3);
            assert_eq!(p.stat.ci.hi, 0.3);
        }
        assert_eq!(
            summary.kde,
            Some(KdeOutcome::DegenerateSpike { location: 0.3 })
        );
    }

    #[test]
    fn single_sample_summary_has_exact_cis() {
        let cfg = SummaryConfig::new(7);
        let summary = summarize(&[0.4], &cfg).unwrap();
        assert_eq!(summary.n, 1);
        assert_eq!(summary.mean.ci.lo, 0.4);
        assert_eq!(summary.mean.ci.hi, 0.4);
        assert!(summary.kde.is_none());
    }

    #[test]
    fn summarize_is_seed_deterministic() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin().abs()).collect();
        let a = summarize(&xs, &SummaryConfig::new(11)).unwrap();
        let b = summarize(&xs, &SummaryConfig::new(11)).unwrap();
        assert_eq!(a, b);
        let c = summarize(&xs, &SummaryConfig::new(12)).unwrap();
        assert_ne!(a.mean.ci, c.mean.ci);
    }

    #[test]
    fn ecdf_reference_cases() {
        let curve = ecdf(&[0.1, 0.2, 0.2, 0.4]).unwrap();
        assert_eq!(curve.value_at(0.05), 0.0);
        assert_eq!(curve.value_at(0.4), 1.0);
        assert_abs_diff_eq!(curve.value_at(0.2), 0.75, epsilon = 1e-15);
        assert_eq!(curve.points().len(), 3);
        assert!(ecdf(&[]).is_err());
    }

    #[test]
    fn kde_symmetric_sample_gives_symmetric_grid() {
        let xs = [0.3, 0.35, 0.45, 0.55, 0.65, 0.7];
        let KdeOutcome::Grid { points, .. } = kde_grid(&xs, 51, (0.0, 1.0)).unwrap() else {
            panic!("expected grid");
        };
        for j in 0..points.len() {
            let mirror = points.len() - 1 - j;
            assert_abs_diff_eq!(points[j].1, points[mirror].1, epsilon = 1e-9);
        }
    }

    #[test]
    fn kde_integrates_to_one_on_wide_bounds() {
        // Numeric integration oracle: trapezoid rule over bounds wide enough
        // to capture effectively all mass.
        let xs: Vec<f64> = (0..30).map(|i| 0.2 + 0.02 * i as f64).collect();
        let KdeOutcome::Grid { points, .. } = kde_grid(&xs, 2001, (-3.0, 4.0)).unwrap() else {
            panic!("expected grid");
        };
        let mut integral = 0.0;
        for w in points.windows(2) {
            integral += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        }
        assert!((integral - 1.0).abs() < 0.05, "integral {integral}");
    }

    #[test]
    fn kde_all_equal_is_degenerate() {
        assert_eq!(
            kde_grid(&[0.5, 0.5, 0.5], 50, (0.0, 1.0)).unwrap(),
            KdeOutcome::DegenerateSpike { location: 0.5 }
        );
        assert!(kde_grid(&[0.5], 50, (0.0, 1.0)).is_err());
        assert!(kde_grid(&[0.1, 0.2], 50, (f64::NAN, 1.0)).is_err());
    }

    #[test]
    fn bootstrap_constant_sample_is_exact() {
        let (lo, hi) = bootstrap_ci(&[2.0; 8], mean, &BootstrapConfig::default(), 3).unwrap();
        assert_eq!((lo, hi), (2.0, 2.0));
    }

    #[test]
    fn bootstrap_seed_contract() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let cfg = BootstrapConfig::default();
        let a = bootstrap_ci(&xs, mean, &cfg, 5).unwrap();
        let b = bootstrap_ci(&xs, mean, &cfg, 5).unwrap();
        let c = bootstrap_ci(&xs, mean, &cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bootstrap_validates_config() {
        let xs = [1.0, 2.0, 3.0];
        let too_few = BootstrapConfig {
            resamples: 10,
            level: 0.95,
        };
        assert!(bootstrap_ci(&xs, mean, &too_few, 1).is_err());
        let bad_level = BootstrapConfig {
            resamples: 200,
            level: 1.0,
        };
        assert!(bootstrap_ci(&xs, mean, &bad_level, 1).is_err());
        assert!(bootstrap_ci(&[1.0], mean, &BootstrapConfig::default(), 1).is_err());
    }

    #[test]
    fn bootstrap_widths_shrink_with_n() {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let cfg = BootstrapConfig::default();
        let mut widths = Vec::new();
        for (i, n) in [40usize, 160, 640].into_iter().enumerate() {
            let mut total = 0.0;
            for trial in 0..10u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
                let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
                let (lo, hi) = bootstrap_ci(&xs, mean, &cfg, 77 + i as u64).unwrap();
                total += hi - lo;
            }
            widths.push(total / 10.0);
        }
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    }

    fn two_system_frame(a_vals: &[(&str, &[&str])], b_vals: &[(&str, &[&str])]) -> (Vec<Run>, TruthSet) {
        let to_lists = |vals: &[(&str, &[&str])]| {
            vals.iter()
                .map(|(req, items)| {
                    (
                        req.to_string(),
                        items.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                    )
                })
                .collect::<Vec<_>>()
        };
        let run_a = Run::from_lists("A", to_lists(a_vals)).unwrap();
        let run_b = Run::from_lists("B", to_lists(b_vals)).unwrap();
        let mut truth = TruthSet::new();
        for (req, _) in a_vals {
            truth.insert(*req, "rel", 1.0).unwrap();
        }
        (vec![run_a, run_b], truth)
    }

    #[test]
    fn paired_identical_systems_are_degenerate() {
        let lists: &[(&str, &[&str])] = &[("u1", &["rel", "x"]), ("u2", &["x", "rel"])];
        let (runs, truth) = two_system_frame(lists, lists);
        let model = BrowsingModel::new(0.8, Convention::Paper, 100).unwrap();
        let metric = Metric::Rbp { gamma: 0.8 };
        let frame = evaluate(&runs, &truth, &[metric], &model).unwrap();
        let summary = paired_diff(&frame, "A", "B", &metric).unwrap();
        assert!(summary.diffs.iter().all(|&d| d == 0.0));
        assert_eq!(summary.fraction_helped, 0.0);
        assert_eq!(summary.fraction_hurt, 0.0);
        assert_eq!(summary.fraction_tied, 1.0);
        assert_eq!(summary.test, PairedTest::Degenerate { constant: 0.0 });
    }

    #[test]
    fn paired_reference_t_and_p() {
        // diffs [1, 2, 3]: t = 2/(1/sqrt(3)), p from the reference t CDF.
        let diffs = vec![1.0, 2.0, 3.0];
        let requests = vec!["u1".into(), "u2".into(), "u3".into()];
        let summary =
            paired_summary_from_diffs(requests, diffs, vec![1.0; 3]).unwrap();
        let PairedTest::TTest { t, df, p } = summary.test else {
            panic!("expected t-test");
        };
        assert_abs_diff_eq!(t, 3.4641, epsilon = 1e-4);
        assert_abs_diff_eq!(df, 2.0, epsilon = 0.0);
        assert_abs_diff_eq!(p, 0.0742, epsilon = 1e-4);

        use statrs::distribution::{ContinuousCDF, StudentsT};
        let reference = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 2.0).unwrap().cdf(t));
        assert_abs_diff_eq!(p, reference, epsilon = 1e-10);
    }

    #[test]
    fn paired_dominance_has_no_hurt() {
        let a: &[(&str, &[&str])] = &[("u1", &["rel", "x"]), ("u2", &["rel", "x"])];
        let b: &[(&str, &[&str])] = &[("u1", &["x", "rel"]), ("u2", &["rel", "x"])];
        let (runs, truth) = two_system_frame(a, b);
        let model = BrowsingModel::new(0.8, Convention::Paper, 100).unwrap();
        let metric = Metric::Rbp { gamma: 0.8 };
        let frame = evaluate(&runs, &truth, &[metric], &model).unwrap();
        let summary = paired_diff(&frame, "A", "B", &metric).unwrap();
        assert_eq!(summary.fraction_hurt, 0.0);
        assert!(summary.median_diff >= 0.0);
    }

    #[test]
    fn paired_antisymmetry() {
        let a: &[(&str, &[&str])] = &[
            ("u1", &["rel", "x", "y"]),
            ("u2", &["x", "rel", "y"]),
            ("u3", &["x", "y", "rel"]),
        ];
        let b: &[(&str, &[&str])] = &[
            ("u1", &["x", "rel", "y"]),
            ("u2", &["x", "y", "rel"]),
            ("u3", &["rel", "x", "y"]),
        ];
        let (runs, truth) = two_system_frame(a, b);
        let model = BrowsingModel::new(0.8, Convention::Paper, 100).unwrap();
        let metric = Metric::Rbp { gamma: 0.8 };
        let frame = evaluate(&runs, &truth, &[metric], &model).unwrap();
        let ab = paired_diff(&frame, "A", "B", &metric).unwrap();
        let ba = paired_diff(&frame, "B", "A", &metric).unwrap();
        for (x, y) in ab.diffs.iter().zip(&ba.diffs) {
            assert_eq!(*x, -*y);
        }
        assert_abs_diff_eq!(ab.median_diff, -ba.median_diff, epsilon = 1e-12);
        let (PairedTest::TTest { t: t_ab, p: p_ab, .. }, PairedTest::TTest { t: t_ba, p: p_ba, .. }) =
            (ab.test, ba.test)
        else {
            panic!("expected t-tests");
        };
        assert_eq!(t_ab, -t_ba);
        assert_eq!(p_ab, p_ba);
        assert_eq!(ab.fraction_helped, ba.fraction_hurt);
    }

    #[test]
    fn equal_means_different_spreads_are_distinguished() {
        // Same mean by construction, very different IQR; the distributional
        // summary keeps the difference that the means hide.
        let narrow: Vec<f64> = [0.45, 0.5, 0.55].repeat(20);
        let wide: Vec<f64> = [0.05, 0.5, 0.95].repeat(20);
        let mut cfg = SummaryConfig::new(3);
        cfg.percentiles = vec![25.0, 75.0];
        let sn = summarize(&narrow, &cfg).unwrap();
        let sw = summarize(&wide, &cfg).unwrap();
        assert_abs_diff_eq!(sn.mean.value, sw.mean.value, epsilon = 1e-12);
        assert!(sn.mean.ci.lo <= sw.mean.ci.hi && sw.mean.ci.lo <= sn.mean.ci.hi);
        let iqr_n = sn.percentiles[1].stat.value - sn.percentiles[0].stat.value;
        let iqr_w = sw.percentiles[1].stat.value - sw.percentiles[0].stat.value;
        assert!(iqr_w > iqr_n + 0.5);
    }

    proptest! {
        #[test]
        fn percentile_half_is_median(xs in prop::collection::vec(0.0_f64..1.0, 1..60)) {
            let mut sorted = xs.clone();
            sorted.sort_by(f64::total_cmp);
            let cfg = SummaryConfig::new(1);
            let summary = summarize(&xs, &cfg).unwrap();
            prop_assert_eq!(summary.median.value, quantile(&sorted, 0.5));
        }

        #[test]
        fn ecdf_at_sample_points_is_rank_over_n(xs in prop::collection::vec(-5.0_f64..5.0, 1..50)) {
            let mut sorted = xs.clone();
            sorted.sort_by(f64::total_cmp);
            let curve = ecdf(&xs).unwrap();
            let n = xs.len() as f64;
            for (i, &x) in sorted.iter().enumerate() {
                // rank = number of samples <= x
                let rank = sorted.iter().filter(|&&y| y <= x).count();
                prop_assert_eq!(curve.value_at(x), rank as f64 / n);
                prop_assert!(rank as f64 / n >= (i + 1) as f64 / n - 1e-15);
            }
            let points = curve.points();
            prop_assert_eq!(points.last().unwrap().1, 1.0);
            for w in points.windows(2) {
                prop_assert!(w[0].1 <= w[1].1 && w[0].0 < w[1].0);
            }
        }

        #[test]
        fn unit_weights_match_unweighted_path(xs in prop::collection::vec(0.0_f64..1.0, 2..40)) {
            let cfg = SummaryConfig::new(9);
            let unweighted = summarize(&xs, &cfg).unwrap();
            let pairs: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0)).collect();
            let weighted = summarize_weighted(&pairs, &cfg).unwrap();
            prop_assert_eq!(unweighted, weighted);
        }

        #[test]
        fn intervals_bracket_point_estimates(xs in prop::collection::vec(0.0_f64..1.0, 1..40)) {
            let summary = summarize(&xs, &SummaryConfig::new(21)).unwrap();
            let stats = [summary.mean, summary.median]
                .into_iter()
                .chain(summary.percentiles.iter().map(|p| p.stat));
            for stat in stats {
                prop_assert!(stat.ci.lo <= stat.value && stat.value <= stat.ci.hi);
            }
        }

        #[test]
        fn fractions_partition_unity(diffs in prop::collection::vec(-1.0_f64..1.0, 2..50)) {
            let requests: Vec<String> = (0..diffs.len()).map(|i| format!("u{i}")).collect();
            let weights = vec![1.0; diffs.len()];
            let summary = paired_summary_from_diffs(requests, diffs, weights).unwrap();
            let total = summary.fraction_helped + summary.fraction_hurt + summary.fraction_tied;
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
