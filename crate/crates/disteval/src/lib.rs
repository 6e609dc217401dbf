//! Distributional evaluation of ranked-output systems.
//!
//! `disteval` evaluates recommender and retrieval runs beyond point estimates:
//! it keeps the full per-request metric distribution and derives summaries,
//! paired comparisons, subgroup disaggregations, item-side exposure analyses,
//! metric-parameter posteriors, and cross-repetition stability reports from it.
//!
//! The crate is organised around the evaluation pipeline:
//!
//! * [`model`]: input data model: runs, truth sets, attribute tables,
//!   repetition sets, plus parsers and a deterministic fixture generator.
//! * [`metrics`]: per-request effectiveness metrics (RBP, nDCG, MRR, hit
//!   rate) and the [`metrics::MetricFrame`] holding every per-request value.
//! * [`stats`]: distribution machinery: order statistics, ECDF, KDE,
//!   seeded percentile bootstrap, paired differences with t-tests.
//! * [`subgroup`]: disaggregation of metric and difference distributions by
//!   subject attributes, with between-group gaps.
//! * [`exposure`]: item-side expected exposure under the same browsing
//!   model, ideal/prevalence targets, Lorenz/Gini, and L2/KL divergences.
//! * [`uncertainty`]: patience sweeps, crossover detection, and Monte-Carlo
//!   posteriors of mean effectiveness under a Beta prior on patience.
//! * [`repetition`]: aggregation of repeated evaluations into distributions
//!   of summary statistics.
//! * [`report`]: assembly of all analyses into a versioned JSON report with
//!   sidecar CSV plot data and a plain-text summary table.
//!
//! All randomised computations are driven by explicit seeds and produce
//! results that are independent of thread count.

pub mod error;
pub mod exposure;
pub mod metrics;
pub mod model;
pub mod report;
pub mod seed;
pub mod stats;
pub mod subgroup;
pub mod uncertainty;

pub mod repetition;

pub use error::{Error, Result};
pub use metrics::{evaluate, BrowsingModel, Convention, Metric, MetricFrame};
pub use model::{AttributeTable, Catalog, Run, RunRecord, SubjectKind, TruthSet};
pub use stats::{summarize, BootstrapConfig, DistributionSummary, PairedDiffSummary};
