//! Input data model: runs, truth sets, attribute tables, repetition sets.
//!
//! All identifiers (requests, items, systems) are opaque strings; no numeric
//! coercion is ever applied. Parsed values are immutable and freely shareable
//! across threads.

mod parse;
mod synth;

pub use parse::{
    parse_attributes, parse_run, parse_truth, serialize_attributes, serialize_run,
    serialize_truth,
};
pub use synth::{synth_fixture, SynthConfig, SynthFixture};

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// One line of a run file: a single ranked item for a request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Evaluation unit (user or query) this item was ranked for.
    pub request_id: String,
    /// Ranked item.
    pub item_id: String,
    /// 1-based rank position.
    pub rank: u32,
    /// System score; informational only, never used for re-ranking.
    pub score: f64,
    /// System that produced the ranking.
    pub system_id: String,
}

/// A system's ranked output lists over a set of requests.
///
/// Lists are stored in rank order; per request, ranks are a contiguous
/// `1..=k` sequence without duplicate items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    /// System that produced this run.
    pub system_id: String,
    /// Ordered item list per request, sorted by request id.
    pub requests: BTreeMap<String, Vec<String>>,
}

impl Run {
    /// Builds a run from `(request_id, items)` pairs, validating the
    /// duplicate-free and non-empty list invariants.
    pub fn from_lists<I, S>(system_id: impl Into<String>, lists: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<String>)>,
        S: Into<String>,
    {
        let system_id = system_id.into();
        let mut requests = BTreeMap::new();
        for (request_id, items) in lists {
            let request_id = request_id.into();
            if items.is_empty() {
                return Err(Error::invalid(format!(
                    "request {request_id} has an empty item list"
                )));
            }
            let mut seen = BTreeSet::new();
            for item in &items {
                if !seen.insert(item.clone()) {
                    return Err(Error::invalid(format!(
                        "request {request_id} lists item {item} more than once"
                    )));
                }
            }
            if requests.insert(request_id.clone(), items).is_some() {
                return Err(Error::invalid(format!("duplicate request {request_id}")));
            }
        }
        Ok(Run {
            system_id,
            requests,
        })
    }

    /// Number of requests covered by this run.
    pub fn len(&self) -> usize {
        self.requests.len()
    }

    /// Whether the run covers no requests.
    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

/// Per-request relevance signals: `(request, item) -> gain`, gains >= 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthSet {
    gains: BTreeMap<String, BTreeMap<String, f64>>,
}

impl TruthSet {
    /// Creates an empty truth set.
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a gain; rejects negative gains and duplicate pairs.
    pub fn insert(&mut self, request_id: impl Into<String>, item_id: impl Into<String>, gain: f64) -> Result<()> {
        let request_id = request_id.into();
        let item_id = item_id.into();
        if !gain.is_finite() || gain < 0.0 {
            return Err(Error::invalid(format!(
                "gain for ({request_id}, {item_id}) must be finite and nonnegative, got {gain}"
            )));
        }
        let entry = self.gains.entry(request_id.clone()).or_default();
        if entry.insert(item_id.clone(), gain).is_some() {
            return Err(Error::invalid(format!(
                "duplicate truth pair ({request_id}, {item_id})"
            )));
        }
        Ok(())
    }

    /// Gain for a pair, `0.0` when unjudged.
    pub fn gain(&self, request_id: &str, item_id: &str) -> f64 {
        self.gains
            .get(request_id)
            .and_then(|items| items.get(item_id))
            .copied()
            .unwrap_or(0.0)
    }

    /// All judged items and gains for one request.
    pub fn request_gains(&self, request_id: &str) -> Option<&BTreeMap<String, f64>> {
        self.gains.get(request_id)
    }

    /// Requests present in this truth set, in sorted order.
    pub fn request_ids(&self) -> impl Iterator<Item = &str> {
        self.gains.keys().map(String::as_str)
    }

    /// Whether a request is judged at all (possibly with all-zero gains).
    pub fn contains_request(&self, request_id: &str) -> bool {
        self.gains.contains_key(request_id)
    }

    /// Items with strictly positive gain for a request.
    pub fn relevant_items(&self, request_id: &str) -> Vec<&str> {
        self.gains
            .get(request_id)
            .map(|items| {
                items
                    .iter()
                    .filter(|(_, &g)| g > 0.0)
                    .map(|(item, _)| item.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Whether every recorded gain is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.gains
            .values()
            .flat_map(|items| items.values())
            .all(|&g| g == 0.0 || g == 1.0)
    }

    /// Number of judged requests.
    pub fn n_requests(&self) -> usize {
        self.gains.len()
    }

    /// Iterates all `(request, item, gain)` triples in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.gains.iter().flat_map(|(req, items)| {
            items
                .iter()
                .map(move |(item, &gain)| (req.as_str(), item.as_str(), gain))
        })
    }
}

/// Whether an attribute table describes users or items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubjectKind {
    /// Requests / users.
    User,
    /// Catalog items.
    Item,
}

impl std::fmt::Display for SubjectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubjectKind::User => write!(f, "user"),
            SubjectKind::Item => write!(f, "item"),
        }
    }
}

/// Group label used for subjects with no recorded value for an attribute.
pub const UNKNOWN_GROUP: &str = "unknown";

/// Subject attributes: `subject -> attribute -> value list`.
///
/// Multi-valued attributes (e.g. genres) carry fractional weight `1/k` per
/// value when aggregated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTable {
    kind: SubjectKind,
    attribute_names: BTreeSet<String>,
    rows: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl AttributeTable {
    /// Creates an empty table for the given subject kind.
    pub fn new(kind: SubjectKind) -> Self {
        AttributeTable {
            kind,
            attribute_names: BTreeSet::new(),
            rows: BTreeMap::new(),
        }
    }

    /// Subject kind covered by this table.
    pub fn kind(&self) -> SubjectKind {
        self.kind
    }

    /// Declares an attribute so lookups can distinguish "attribute unknown"
    /// from "subject lacks a value".
    pub fn declare_attribute(&mut self, name: impl Into<String>) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid("attribute names must be nonempty"));
        }
        self.attribute_names.insert(name);
        Ok(())
    }

    /// Whether the table declares the attribute.
    pub fn has_attribute(&self, name: &str) -> bool {
        self.attribute_names.contains(name)
    }

    /// Declared attribute names in sorted order.
    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attribute_names.iter().map(String::as_str)
    }

    /// Sets the values of one attribute for one subject.
    pub fn set_values(
        &mut self,
        subject_id: impl Into<String>,
        attribute: impl Into<String>,
        values: Vec<String>,
    ) -> Result<()> {
        let attribute = attribute.into();
        self.declare_attribute(attribute.clone())?;
        let values = if values.is_empty() {
            vec![UNKNOWN_GROUP.to_string()]
        } else {
            values
        };
        self.rows
            .entry(subject_id.into())
            .or_default()
            .insert(attribute, values);
        Ok(())
    }

    /// Subjects recorded in the table, in sorted order.
    pub fn subject_ids(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    /// Whether the table has a row for the subject.
    pub fn contains_subject(&self, subject_id: &str) -> bool {
        self.rows.contains_key(subject_id)
    }

    /// Values of one attribute for one subject. Subjects missing from the
    /// table, or missing the attribute, map to the `unknown` group.
    ///
    /// Returns an error if the attribute was never declared.
    pub fn values(&self, subject_id: &str, attribute: &str) -> Result<Vec<&str>> {
        if !self.has_attribute(attribute) {
            return Err(Error::missing(format!(
                "attribute {attribute} is not present in the {} table",
                self.kind
            )));
        }
        Ok(self
            .rows
            .get(subject_id)
            .and_then(|attrs| attrs.get(attribute))
            .map(|vals| vals.iter().map(String::as_str).collect())
            .unwrap_or_else(|| vec![UNKNOWN_GROUP]))
    }

    /// `(group, weight)` memberships for a subject under an attribute, with
    /// weight `1/k` for each of the subject's `k` values.
    pub fn memberships(&self, subject_id: &str, attribute: &str) -> Result<Vec<(&str, f64)>> {
        let values = self.values(subject_id, attribute)?;
        let weight = 1.0 / values.len() as f64;
        Ok(values.into_iter().map(|v| (v, weight)).collect())
    }

    /// Distinct group labels observed for an attribute across all subjects.
    pub fn groups(&self, attribute: &str) -> Result<BTreeSet<String>> {
        if !self.has_attribute(attribute) {
            return Err(Error::missing(format!(
                "attribute {attribute} is not present in the {} table",
                self.kind
            )));
        }
        let mut groups = BTreeSet::new();
        for attrs in self.rows.values() {
            match attrs.get(attribute) {
                Some(values) => groups.extend(values.iter().cloned()),
                None => {
                    groups.insert(UNKNOWN_GROUP.to_string());
                }
            }
        }
        Ok(groups)
    }
}

/// The item universe over which exposure and concentration are measured.
///
/// The catalog is the item-attribute table's subjects when one is provided,
/// otherwise the union of all run items and truth items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    items: BTreeSet<String>,
}

impl Catalog {
    /// Catalog declared by an item-attribute table.
    pub fn from_attributes(attributes: &AttributeTable) -> Self {
        Catalog {
            items: attributes.subject_ids().map(String::from).collect(),
        }
    }

    /// Catalog inferred as the union of run items and truth items.
    pub fn from_runs_and_truth<'a, I>(runs: I, truth: &TruthSet) -> Self
    where
        I: IntoIterator<Item = &'a Run>,
    {
        let mut items = BTreeSet::new();
        for run in runs {
            for list in run.requests.values() {
                items.extend(list.iter().cloned());
            }
        }
        for (_, item, _) in truth.iter() {
            items.insert(item.to_string());
        }
        Catalog { items }
    }

    /// Builds a catalog from explicit item ids.
    pub fn from_items<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Catalog {
            items: items.into_iter().map(Into::into).collect(),
        }
    }

    /// Number of items in the catalog.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Whether the catalog is empty.
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Membership test.
    pub fn contains(&self, item_id: &str) -> bool {
        self.items.contains(item_id)
    }

    /// Items in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(String::as_str)
    }
}

/// One complete re-run of an experiment: runs plus matching truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    /// Label for this repetition (e.g. the split directory name).
    pub id: String,
    /// One run per system.
    pub runs: Vec<Run>,
    /// Truth for this repetition's test requests.
    pub truth: TruthSet,
}

/// An ordered list of repetitions covering the same systems.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionSet {
    repetitions: Vec<Repetition>,
}

impl RepetitionSet {
    /// Validates and wraps repetitions: ids must be unique and every
    /// repetition must cover the same set of system ids.
    pub fn new(repetitions: Vec<Repetition>) -> Result<Self> {
        if repetitions.is_empty() {
            return Err(Error::invalid("repetition set must not be empty"));
        }
        let mut ids = BTreeSet::new();
        for rep in &repetitions {
            if !ids.insert(rep.id.clone()) {
                return Err(Error::invalid(format!("duplicate repetition id {}", rep.id)));
            }
        }
        let reference: BTreeSet<&str> = repetitions[0]
            .runs
            .iter()
            .map(|r| r.system_id.as_str())
            .collect();
        for rep in &repetitions[1..] {
            let systems: BTreeSet<&str> = rep.runs.iter().map(|r| r.system_id.as_str()).collect();
            if systems != reference {
                return Err(Error::invalid(format!(
                    "repetition {} covers systems {:?}, expected {:?}",
                    rep.id, systems, reference
                )));
            }
        }
        Ok(RepetitionSet { repetitions })
    }

    /// Repetitions in their declared order.
    pub fn repetitions(&self) -> &[Repetition] {
        &self.repetitions
    }

    /// System ids covered by every repetition, sorted.
    pub fn system_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.repetitions[0]
            .runs
            .iter()
            .map(|r| r.system_id.as_str())
            .collect();
        ids.sort_unstable();
        ids
    }
}
