//! Metric-parameter uncertainty: patience sweeps, crossover detection, and
//! Monte-Carlo posteriors of mean effectiveness under a Beta prior on the
//! patience parameter.
//!
//! The posterior is the pushforward of the prior through the γ-response
//! curve: each draw re-evaluates the mean metric at the drawn patience, so
//! the resulting sample list is the distribution of *means* induced by
//! parameter uncertainty, not a per-request mixture.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, BrowsingModel, Convention, Metric};
use crate::model::{AttributeTable, Run, TruthSet};
use crate::seed::derive_seed;
use crate::stats::{
    summarize, weighted_mean, DistributionSummary, KdeBounds, SummaryConfig,
};

/// Beta prior over the patience parameter.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BetaPrior {
    /// First shape parameter.
    pub a: f64,
    /// Second shape parameter.
    pub b: f64,
}

impl BetaPrior {
    /// Validates the shape parameters.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!(
                "beta prior shapes must be positive and finite, got ({a}, {b})"
            )));
        }
        Ok(BetaPrior { a, b })
    }

    /// Density at `x`; `x` must lie strictly inside (0, 1).
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::invalid(format!(
                "beta pdf is evaluated on (0, 1), got {x}"
            )));
        }
        Ok(crate::stats::special::beta_pdf(self.a, self.b, x))
    }

    /// Mode `(a-1)/(a+b-2)`, defined when both shapes exceed 1.
    pub fn mode(&self) -> Option<f64> {
        if self.a > 1.0 && self.b > 1.0 {
            Some((self.a - 1.0) / (self.a + self.b - 2.0))
        } else {
            None
        }
    }

    /// Mean `a/(a+b)`.
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    /// Draws `m` values with an exact Beta sampler from a seeded generator,
    /// sequentially, clamped into the open unit interval.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        let beta = rand_distr::Beta::new(self.a, self.b).expect("validated shapes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| beta.sample(&mut rng).clamp(1e-12, 1.0 - 1e-12))
            .collect()
    }
}

/// One mean-RBP-vs-patience curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    /// System the curve belongs to.
    pub system: String,
    /// Subgroup, or `None` for the overall curve.
    pub group: Option<String>,
    /// Mean RBP at each grid point.
    pub means: Vec<f64>,
}

/// A grid interval where the sign of a pairwise mean difference changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    /// First system of the pair (lexicographically smaller).
    pub system_a: String,
    /// Second system of the pair.
    pub system_b: String,
    /// Subgroup the crossover was observed in, `None` for overall.
    pub group: Option<String>,
    /// Lower grid endpoint of the interval.
    pub gamma_lo: f64,
    /// Upper grid endpoint (equal to `gamma_lo` for an exact zero).
    pub gamma_hi: f64,
}

/// Patience sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ascending patience grid.
    pub grid: Vec<f64>,
    /// One curve per system (and per group when disaggregated).
    pub curves: Vec<SweepCurve>,
    /// Detected sign changes between system pairs.
    pub crossovers: Vec<Crossover>,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("patience grid must not be empty"));
    }
    for &g in grid {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::invalid(format!(
                "patience grid values must lie in (0, 1), got {g}"
            )));
        }
    }
    for pair in grid.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::invalid("patience grid must be strictly increasing"));
        }
    }
    Ok(())
}

/// Uniform grid `{step, 2·step, ...}` inside (0, 1); the default sweep grid
/// with `step = 0.05` is {0.05, 0.10, ..., 0.95}.
pub fn uniform_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::invalid(format!(
            "grid step must lie in (0, 1), got {step}"
        )));
    }
    let mut grid = Vec::new();
    let mut k = 1usize;
    loop {
        let g = step * k as f64;
        if g >= 1.0 - 1e-12 {
            break;
        }
        grid.push(g);
        k += 1;
    }
    validate_grid(&grid)?;
    Ok(grid)
}

/// Mean RBP per system at one patience value, plus per-group means when an
/// attribute is given. Goes through the ordinary [`evaluate`] path so sweep
/// points are exactly what a standalone evaluation would report.
fn rbp_means_at(
    runs: &[Run],
    truth: &TruthSet,
    gamma: f64,
    convention: Convention,
    depth: usize,
    attribute: Option<(&AttributeTable, &str)>,
) -> Result<Vec<(String, Option<String>, f64)>> {
    let model = BrowsingModel::new(gamma, convention, depth)?;
    let metric = Metric::Rbp { gamma };
    let frame = evaluate(runs, truth, &[metric], &model)?;
    let mut out = Vec::new();
    for system in frame.systems() {
        out.push((system.clone(), None, frame.mean(system, &metric)?));
        if let Some((attrs, attr_name)) = attribute {
            let values = frame.values(system, &metric)?;
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
                out.push((system.clone(), Some(group), weighted_mean(&pairs)));
            }
        }
    }
    Ok(out)
}

/// Sweeps mean RBP over a patience grid and reports pairwise crossovers.
pub fn sweep_patience(
    runs: &[Run],
    truth: &TruthSet,
    grid: &[f64],
    convention: Convention,
    depth: usize,
    attribute: Option<(&AttributeTable, &str)>,
) -> Result<SweepResult> {
    validate_grid(grid)?;
    let per_gamma: Vec<Vec<(String, Option<String>, f64)>> = grid
        .par_iter()
        .map(|&gamma| rbp_means_at(runs, truth, gamma, convention, depth, attribute))
        .collect::<Result<_>>()?;

    // Pivot to (system, group) -> means over the grid.
    let mut curves: Vec<SweepCurve> = Vec::new();
    for (system, group, _) in &per_gamma[0] {
        curves.push(SweepCurve {
            system: system.clone(),
            group: group.clone(),
            means: Vec::with_capacity(grid.len()),
        });
    }
    for snapshot in &per_gamma {
        for (curve, (system, group, mean)) in curves.iter_mut().zip(snapshot) {
            debug_assert!(curve.system == *system && curve.group == *group);
            curve.means.push(*mean);
        }
    }

    let crossovers = detect_crossovers(grid, &curves);
    Ok(SweepResult {
        grid: grid.to_vec(),
        curves,
        crossovers,
    })
}

fn detect_crossovers(grid: &[f64], curves: &[SweepCurve]) -> Vec<Crossover> {
    let mut crossovers = Vec::new();
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            let (a, b) = (&curves[i], &curves[j]);
            if a.group != b.group || a.system == b.system {
                continue;
            }
            let diffs: Vec<f64> = a
                .means
                .iter()
                .zip(&b.means)
                .map(|(x, y)| x - y)
                .collect();
            for k in 0..diffs.len() {
                if diffs[k] == 0.0 {
                    crossovers.push(Crossover {
                        system_a: a.system.clone(),
                        system_b: b.system.clone(),
                        group: a.group.clone(),
                        gamma_lo: grid[k],
                        gamma_hi: grid[k],
                    });
                } else if k + 1 < diffs.len() && diffs[k] * diffs[k + 1] < 0.0 {
                    crossovers.push(Crossover {
                        system_a: a.system.clone(),
                        system_b: b.system.clone(),
                        group: a.group.clone(),
                        gamma_lo: grid[k],
                        gamma_hi: grid[k + 1],
                    });
                }
            }
        }
    }
    crossovers
}

/// Posterior samples of the mean metric for one system (and group).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    /// System the samples belong to.
    pub system: String,
    /// Subgroup, or `None` for overall.
    pub group: Option<String>,
    /// Mean metric per prior draw, aligned with the γ draws.
    pub samples: Vec<f64>,
    /// Distributional summary (with ECDF) of the samples.
    pub summary: DistributionSummary,
}

/// Posterior of the mean metric under a patience prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    /// Prior the γ draws came from.
    pub prior: BetaPrior,
    /// The γ draws, in draw order.
    pub gammas: Vec<f64>,
    /// Per-system (and per-group) posterior samples.
    pub per_system: Vec<PosteriorSamples>,
}

/// Pushes a Beta prior on patience through the evaluation: draws `m` γ
/// values, evaluates the mean RBP per system at each, and summarizes the
/// induced distributions.
#[allow(clippy::too_many_arguments)]
pub fn posterior_metric(
    runs: &[Run],
    truth: &TruthSet,
    prior: &BetaPrior,
    m: usize,
    seed: u64,
    convention: Convention,
    depth: usize,
    attribute: Option<(&AttributeTable, &str)>,
) -> Result<PosteriorResult> {
    if m < 100 {
        return Err(Error::invalid(format!(
            "posterior needs at least 100 draws, got {m}"
        )));
    }
    // Draw the γ stream sequentially first; evaluation may then run in
    // parallel without affecting the draws.
    let gammas = prior.sample(m, derive_seed(seed, "posterior-gamma"));
    let per_draw: Vec<Vec<(String, Option<String>, f64)>> = gammas
        .par_iter()
        .map(|&gamma| rbp_means_at(runs, truth, gamma, convention, depth, attribute))
        .collect::<Result<_>>()?;

    let mut summary_config = SummaryConfig::new(derive_seed(seed, "posterior-summary"));
    summary_config.kde_bounds = KdeBounds::Unit;

    let mut per_system = Vec::new();
    for (slot, (system, group, _)) in per_draw[0].iter().enumerate() {
        let samples: Vec<f64> = per_draw.iter().map(|snapshot| snapshot[slot].2).collect();
        let summary = summarize(&samples, &summary_config)?;
        per_system.push(PosteriorSamples {
            system: system.clone(),
            group: group.clone(),
            samples,
            summary,
        });
    }
    Ok(PosteriorResult {
        prior: *prior,
        gammas,
        per_system,
    })
}
