//! Item-side expected exposure under the browsing model, ideal and
//! prevalence targets, Lorenz/Gini concentration, and L2/KL divergence.
//!
//! Exposure uses the same position-weight function as RBP, so user-side and
//! item-side results share one behavioural model. All vectors live over an
//! explicit universe (the catalog, or the group labels); items never shown
//! keep an explicit zero so concentration is measured against the whole
//! catalog.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::metrics::BrowsingModel;
use crate::model::{AttributeTable, Catalog, Run, SubjectKind, TruthSet};

/// Nonnegative exposure mass per item (or per group label).
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureVector {
    masses: BTreeMap<String, f64>,
    normalized: bool,
}

impl ExposureVector {
    /// Wraps raw masses; keys define the universe and must carry
    /// nonnegative finite masses.
    pub fn raw(masses: BTreeMap<String, f64>) -> Result<Self> {
        for (key, &mass) in &masses {
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::invalid(format!(
                    "exposure mass for {key} must be finite and nonnegative, got {mass}"
                )));
            }
        }
        Ok(ExposureVector {
            masses,
            normalized: false,
        })
    }

    /// Whether the vector has been normalized to sum to 1.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Total mass.
    pub fn total(&self) -> f64 {
        self.masses.values().sum()
    }

    /// Mass for one key (0 for keys outside the universe).
    pub fn get(&self, key: &str) -> f64 {
        self.masses.get(key).copied().unwrap_or(0.0)
    }

    /// Number of keys in the universe.
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    /// Whether the universe is empty.
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// `(key, mass)` pairs in sorted key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.masses.iter().map(|(k, &m)| (k.as_str(), m))
    }

    /// Returns the distribution form: masses scaled to sum to 1.
    pub fn normalize(&self) -> Result<ExposureVector> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::invalid(
                "cannot normalize an all-zero exposure vector",
            ));
        }
        Ok(ExposureVector {
            masses: self
                .masses
                .iter()
                .map(|(k, &m)| (k.clone(), m / total))
                .collect(),
            normalized: true,
        })
    }

    /// Whether two vectors share the same key universe.
    pub fn same_universe(&self, other: &ExposureVector) -> bool {
        self.masses.len() == other.masses.len()
            && self.masses.keys().zip(other.masses.keys()).all(|(a, b)| a == b)
    }

    /// Writes `key,mass` CSV rows.
    pub fn write_csv<W: Write>(&self, mut writer: W, key_column: &str) -> Result<()> {
        writeln!(writer, "{key_column},mass")?;
        for (key, mass) in self.iter() {
            writeln!(writer, "{key},{mass}")?;
        }
        Ok(())
    }
}

/// Expected exposure each catalog item accrues from one system's rankings.
///
/// Item mass is the sum over requests of the position weight at the item's
/// rank; items never shown get 0. Items outside the catalog are an error.
pub fn system_exposure(
    run: &Run,
    model: &BrowsingModel,
    catalog: &Catalog,
) -> Result<ExposureVector> {
    let mut masses: BTreeMap<String, f64> =
        catalog.iter().map(|item| (item.to_string(), 0.0)).collect();
    for (request, items) in &run.requests {
        for (idx, item) in items.iter().enumerate() {
            let mass = masses.get_mut(item).ok_or_else(|| {
                Error::invalid(format!(
                    "request {request} ranks item {item} outside the declared catalog"
                ))
            })?;
            *mass += model.rank_weight(idx + 1);
        }
    }
    ExposureVector::raw(masses)
}

/// Ideal-policy exposure plus the requests that could not contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealExposure {
    /// Raw exposure under the ideal policy.
    pub exposure: ExposureVector,
    /// Requests with no relevant items; they contribute nothing.
    pub empty_requests: Vec<String>,
}

/// Exposure under an ideal policy that splits each request's exposure
/// equally across that request's relevant items.
///
/// With `|R|` relevant items, each receives `(1/|R|) Σ_{i=1..|R|} w_i`
/// (the sum truncated at the model depth). Requires binary truth.
pub fn ideal_exposure(
    truth: &TruthSet,
    model: &BrowsingModel,
    catalog: &Catalog,
) -> Result<IdealExposure> {
    if !truth.is_binary() {
        return Err(Error::invalid("ideal exposure requires binary truth"));
    }
    let mut masses: BTreeMap<String, f64> =
        catalog.iter().map(|item| (item.to_string(), 0.0)).collect();
    let mut empty_requests = Vec::new();
    let requests: Vec<String> = truth.request_ids().map(String::from).collect();
    for request in &requests {
        let relevant = truth.relevant_items(request);
        if relevant.is_empty() {
            empty_requests.push(request.clone());
            continue;
        }
        let top_mass: f64 = (1..=relevant.len()).map(|rank| model.rank_weight(rank)).sum();
        let share = top_mass / relevant.len() as f64;
        for item in relevant {
            let mass = masses.get_mut(item).ok_or_else(|| {
                Error::invalid(format!(
                    "request {request} marks item {item} relevant outside the declared catalog"
                ))
            })?;
            *mass += share;
        }
    }
    Ok(IdealExposure {
        exposure: ExposureVector::raw(masses)?,
        empty_requests,
    })
}

/// Divergence flavour between a system distribution and a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// Squared Euclidean distance on normalized vectors.
    L2,
    /// Kullback-Leibler divergence KL(system ‖ target) in nats, with the
    /// target smoothed by 1e-10 and renormalized.
    Kl,
}

const KL_SMOOTHING: f64 = 1e-10;

/// Divergence of a system exposure distribution from a target distribution.
///
/// Both vectors are normalized before comparison and must share the same
/// universe. `0 · ln(0/q) = 0` by convention.
pub fn divergence(
    system: &ExposureVector,
    target: &ExposureVector,
    kind: DivergenceKind,
) -> Result<f64> {
    if !system.same_universe(target) {
        return Err(Error::invalid(
            "divergence requires both vectors over the same universe",
        ));
    }
    let p = system.normalize()?;
    let q = target.normalize()?;
    let value = match kind {
        DivergenceKind::L2 => p
            .iter()
            .zip(q.iter())
            .map(|((_, pi), (_, qi))| (pi - qi) * (pi - qi))
            .sum(),
        DivergenceKind::Kl => {
            // Identical distributions have zero divergence by identity; the
            // smoothing below would otherwise turn that into O(ε·n) noise.
            if p.iter().zip(q.iter()).all(|((_, pi), (_, qi))| pi == qi) {
                return Ok(0.0);
            }
            let denom = 1.0 + q.len() as f64 * KL_SMOOTHING;
            p.iter()
                .zip(q.iter())
                .map(|((_, pi), (_, qi))| {
                    if pi == 0.0 {
                        0.0
                    } else {
                        let qi_smoothed = (qi + KL_SMOOTHING) / denom;
                        pi * (pi / qi_smoothed).ln()
                    }
                })
                .sum()
        }
    };
    Ok(value)
}

/// Lorenz curve points and Gini coefficient of an exposure vector.
///
/// The population is the full universe including zero-mass entries. Lorenz
/// points run from (0, 0) to (1, 1) over entries sorted by ascending mass;
/// Gini is `Σ (2i - n - 1) x_(i) / (n Σ x)`, clamped to [0, 1].
pub fn lorenz_gini(exposure: &ExposureVector) -> Result<(Vec<(f64, f64)>, f64)> {
    let total = exposure.total();
    if total <= 0.0 {
        return Err(Error::invalid("lorenz curve of an all-zero exposure vector"));
    }
    let mut sorted: Vec<f64> = exposure.iter().map(|(_, m)| m).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();

    let mut lorenz = Vec::with_capacity(n + 1);
    lorenz.push((0.0, 0.0));
    let mut cumulative = 0.0;
    for (i, &mass) in sorted.iter().enumerate() {
        cumulative += mass;
        lorenz.push(((i + 1) as f64 / n as f64, cumulative / total));
    }

    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &mass)| (2.0 * (i + 1) as f64 - n as f64 - 1.0) * mass)
        .sum();
    let gini = (weighted / (n as f64 * total)).clamp(0.0, 1.0);
    Ok((lorenz, gini))
}

/// Aggregates item exposure to item-group exposure with fractional
/// membership: an item with `k` attribute values contributes `mass/k` to
/// each value's group; unattributed items feed the `unknown` group.
pub fn group_exposure(
    exposure: &ExposureVector,
    attributes: &AttributeTable,
    attribute: &str,
) -> Result<ExposureVector> {
    if attributes.kind() != SubjectKind::Item {
        return Err(Error::invalid(
            "group exposure requires an item attribute table",
        ));
    }
    let mut groups: BTreeMap<String, f64> = attributes
        .groups(attribute)?
        .into_iter()
        .map(|g| (g, 0.0))
        .collect();
    for (item, mass) in exposure.iter() {
        for (group, weight) in attributes.memberships(item, attribute)? {
            *groups.entry(group.to_string()).or_insert(0.0) += mass * weight;
        }
    }
    ExposureVector::raw(groups)
}

/// Normalized group prevalence over the catalog: each item contributes its
/// fractional membership to every group it belongs to.
pub fn prevalence_target(
    attributes: &AttributeTable,
    attribute: &str,
    catalog: &Catalog,
) -> Result<ExposureVector> {
    if catalog.is_empty() {
        return Err(Error::invalid("prevalence over an empty catalog"));
    }
    if attributes.kind() != SubjectKind::Item {
        return Err(Error::invalid(
            "prevalence requires an item attribute table",
        ));
    }
    let mut groups: BTreeMap<String, f64> = attributes
        .groups(attribute)?
        .into_iter()
        .map(|g| (g, 0.0))
        .collect();
    for item in catalog.iter() {
        for (group, weight) in attributes.memberships(item, attribute)? {
            *groups.entry(group.to_string()).or_insert(0.0) += weight;
        }
    }
    ExposureVector::raw(groups)?.normalize()
}

/// Writes Lorenz points as CSV plot data.
pub fn write_lorenz_csv<W: Write>(points: &[(f64, f64)], mut writer: W) -> Result<()> {
    writeln!(writer, "population_share,mass_share")?;
    for &(p, m) in points {
        writeln!(writer, "{p},{m}")?;
    }
    Ok(())
}
