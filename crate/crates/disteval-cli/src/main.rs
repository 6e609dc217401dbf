//! `disteval`: distributional evaluation of ranked-output systems.
//!
//! Wires ingestion, analyses, and report assembly into subcommands. Every
//! randomized subcommand takes an explicit `--seed`; all outputs are
//! deterministic given flags, inputs, and seed, independent of thread count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use disteval::exposure::{
    divergence, group_exposure, ideal_exposure, lorenz_gini, prevalence_target, system_exposure,
    DivergenceKind,
};
use disteval::metrics::{evaluate, BrowsingModel, Convention, Metric, MetricFrame};
use disteval::model::{
    parse_attributes, parse_run, parse_truth, serialize_attributes, serialize_run,
    serialize_truth, synth_fixture, AttributeTable, Catalog, Repetition, RepetitionSet, Run,
    SubjectKind, SynthConfig, TruthSet,
};
use disteval::report::{
    render_summary_table, ExposureGroupsInput, ExposureGroupsSystemInput, ExposureSystemInput,
    Provenance, Report, ReportBuilder,
};
use disteval::repetition::{evaluate_repetitions, stability_report, RepStatistic};
use disteval::seed::derive_seed;
use disteval::stats::{
    paired_diff, summarize, BootstrapConfig, DistributionSummary, SummaryConfig,
};
use disteval::subgroup::{disaggregate, group_change};
use disteval::uncertainty::{posterior_metric, sweep_patience, uniform_grid, BetaPrior};

#[derive(Parser)]
#[command(
    name = "disteval",
    version,
    about = "Distributional evaluation of ranked-output systems"
)]
struct Cli {
    /// Cap worker threads (falls back to DISTEVAL_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Browsing-model and metric flags shared by evaluating subcommands.
#[derive(Args, Debug)]
struct ModelArgs {
    /// Patience parameter γ of the browsing model.
    #[arg(long, default_value_t = 0.8)]
    gamma: f64,

    /// Exponent convention: `paper` weights rank i by (1-γ)γ^i, `classic`
    /// by (1-γ)γ^(i-1).
    #[arg(long, default_value = "paper")]
    convention: String,

    /// Truncation depth N.
    #[arg(long, default_value_t = 1000)]
    depth: usize,
}

impl ModelArgs {
    fn model(&self) -> Result<BrowsingModel> {
        let convention: Convention = self.convention.parse()?;
        Ok(BrowsingModel::new(self.gamma, convention, self.depth)?)
    }
}

#[derive(Args, Debug)]
struct MetricArgs {
    /// Metrics to compute (comma separated): rbp, ndcg, mrr, hr.
    #[arg(long, default_value = "rbp,ndcg,mrr,hr", value_delimiter = ',')]
    metrics: Vec<String>,

    /// Cutoffs for hr (comma separated).
    #[arg(long = "k-list", default_value = "10,20", value_delimiter = ',')]
    k_list: Vec<usize>,
}

impl MetricArgs {
    fn metrics(&self, gamma: f64) -> Result<Vec<Metric>> {
        let mut metrics = Vec::new();
        for token in &self.metrics {
            match token.trim() {
                "rbp" => metrics.push(Metric::Rbp { gamma }),
                "ndcg" => metrics.push(Metric::Ndcg),
                "mrr" => metrics.push(Metric::Mrr),
                "hr" => {
                    for &k in &self.k_list {
                        metrics.push(Metric::HitRate { k });
                    }
                }
                other => bail!("unknown metric `{other}` (expected rbp, ndcg, mrr, hr)"),
            }
        }
        if metrics.is_empty() {
            bail!("metric list is empty");
        }
        Ok(metrics)
    }
}

#[derive(Args, Debug)]
struct StatArgs {
    /// Bootstrap resample count B.
    #[arg(long = "bootstrap-samples", default_value_t = 1000)]
    bootstrap_samples: usize,

    /// Confidence level for all intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,

    /// Percentiles to report (percent units, comma separated).
    #[arg(long, default_value = "10,50,90", value_delimiter = ',')]
    percentiles: Vec<f64>,
}

impl StatArgs {
    fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            resamples: self.bootstrap_samples,
            level: self.level,
        }
    }

    fn summary_config(&self, seed: u64) -> SummaryConfig {
        let mut config = SummaryConfig::new(seed);
        config.percentiles = self.percentiles.clone();
        config.bootstrap = self.bootstrap();
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate runs and report pointwise and distributional results.
    Eval {
        /// Run files (one system per file).
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Truth (relevance) file.
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[command(flatten)]
        stats: StatArgs,
        /// Seed for bootstrap confidence intervals.
        #[arg(long)]
        seed: u64,
        /// Output directory for the report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two systems with paired per-request differences.
    Compare {
        /// Exactly two run files: the candidate and the baseline.
        #[arg(long, required = true, num_args = 2..=2)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[command(flatten)]
        stats: StatArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Disaggregate a metric distribution by a user attribute.
    Subgroup {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// User attribute CSV.
        #[arg(long = "user-attrs")]
        user_attrs: PathBuf,
        /// Attribute to group by.
        #[arg(long)]
        attribute: String,
        /// Metric to disaggregate: rbp, ndcg, mrr, or hr (first cutoff).
        #[arg(long, default_value = "rbp")]
        metric: String,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[command(flatten)]
        stats: StatArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Item-side exposure: Lorenz, Gini, and divergence from the ideal.
    Exposure {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// Item attribute CSV; its subjects define the catalog.
        #[arg(long = "item-attrs")]
        item_attrs: Option<PathBuf>,
        /// Item attribute for group-level exposure (requires --item-attrs).
        #[arg(long)]
        attribute: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep mean RBP over a patience grid and detect crossovers.
    Sweep {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// Grid step; the grid is {step, 2·step, ...} inside (0, 1).
        #[arg(long = "grid-step", default_value_t = 0.05)]
        grid_step: f64,
        /// Optional user attribute CSV for disaggregated curves.
        #[arg(long = "user-attrs")]
        user_attrs: Option<PathBuf>,
        /// Attribute to disaggregate by (requires --user-attrs).
        #[arg(long)]
        attribute: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior of mean RBP under a Beta prior on patience.
    Posterior {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// Beta prior shape a.
        #[arg(long = "prior-a", default_value_t = 5.0)]
        prior_a: f64,
        /// Beta prior shape b.
        #[arg(long = "prior-b", default_value_t = 2.0)]
        prior_b: f64,
        /// Number of Monte-Carlo draws.
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        /// Optional user attribute CSV for disaggregated posteriors.
        #[arg(long = "user-attrs")]
        user_attrs: Option<PathBuf>,
        #[arg(long)]
        attribute: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        stats: StatArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate repeated evaluations from reps/<rep_id>/{runs,truth.qrels}.
    Reps {
        /// Directory holding one subdirectory per repetition.
        #[arg(long = "reps-dir")]
        reps_dir: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[command(flatten)]
        stats: StatArgs,
        /// Optional user attribute CSV for per-group series.
        #[arg(long = "user-attrs")]
        user_attrs: Option<PathBuf>,
        #[arg(long)]
        attribute: Option<String>,
        /// Per-repetition statistic: mean, median, or p<percent>.
        #[arg(long, default_value = "mean")]
        statistic: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a deterministic synthetic fixture.
    Synth {
        #[arg(long)]
        seed: u64,
        /// Number of requests (users).
        #[arg(long, default_value_t = 100)]
        requests: usize,
        /// Catalog (item universe) size.
        #[arg(long, default_value_t = 500)]
        catalog: usize,
        /// Relevant items per request.
        #[arg(long, default_value_t = 5)]
        relevant: usize,
        /// Ranked-list length per request.
        #[arg(long = "list-length", default_value_t = 50)]
        list_length: usize,
        /// Number of systems.
        #[arg(long, default_value_t = 2)]
        systems: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the summary table from an existing report.
    Report {
        /// Report directory or report.json path.
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(err) = configure_threads(cli.threads) {
        return fail(err);
    }
    let result = match cli.command {
        Command::Eval {
            runs,
            truth,
            model,
            metrics,
            stats,
            seed,
            out,
        } => cmd_eval(&runs, &truth, &model, &metrics, &stats, seed, &out),
        Command::Compare {
            runs,
            truth,
            model,
            metrics,
            stats,
            seed,
            out,
        } => cmd_compare(&runs, &truth, &model, &metrics, &stats, seed, &out),
        Command::Subgroup {
            runs,
            truth,
            user_attrs,
            attribute,
            metric,
            model,
            metrics,
            stats,
            seed,
            out,
        } => cmd_subgroup(
            &runs, &truth, &user_attrs, &attribute, &metric, &model, &metrics, &stats, seed, &out,
        ),
        Command::Exposure {
            runs,
            truth,
            item_attrs,
            attribute,
            model,
            out,
        } => cmd_exposure(&runs, &truth, item_attrs.as_deref(), attribute.as_deref(), &model, &out),
        Command::Sweep {
            runs,
            truth,
            grid_step,
            user_attrs,
            attribute,
            model,
            out,
        } => cmd_sweep(
            &runs,
            &truth,
            grid_step,
            user_attrs.as_deref(),
            attribute.as_deref(),
            &model,
            &out,
        ),
        Command::Posterior {
            runs,
            truth,
            prior_a,
            prior_b,
            draws,
            user_attrs,
            attribute,
            model,
            stats,
            seed,
            out,
        } => cmd_posterior(
            &runs,
            &truth,
            prior_a,
            prior_b,
            draws,
            user_attrs.as_deref(),
            attribute.as_deref(),
            &model,
            &stats,
            seed,
            &out,
        ),
        Command::Reps {
            reps_dir,
            model,
            metrics,
            stats,
            user_attrs,
            attribute,
            statistic,
            seed,
            out,
        } => cmd_reps(
            &reps_dir,
            &model,
            &metrics,
            &stats,
            user_attrs.as_deref(),
            attribute.as_deref(),
            &statistic,
            seed,
            &out,
        ),
        Command::Synth {
            seed,
            requests,
            catalog,
            relevant,
            list_length,
            systems,
            out,
        } => cmd_synth(seed, requests, catalog, relevant, list_length, systems, &out),
        Command::Report { report } => cmd_report(&report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(err),
    }
}

/// Prints a single-line machine-parsable error and returns failure.
fn fail(err: anyhow::Error) -> ExitCode {
    let message = format!("{err:#}").replace('\n', " ");
    eprintln!("error: {message}");
    ExitCode::FAILURE
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let from_env = std::env::var("DISTEVAL_THREADS")
        .ok()
        .map(|v| v.parse::<usize>())
        .transpose()
        .context("DISTEVAL_THREADS must be an integer")?;
    if let Some(threads) = flag.or(from_env) {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to configure the thread pool")?;
    }
    Ok(())
}

/// Input label plus the raw bytes that produce its provenance digest.
type InputDigest = (String, Vec<u8>);

struct Inputs {
    runs: Vec<Run>,
    truth: TruthSet,
    digests: Vec<InputDigest>,
}

fn load_inputs(run_paths: &[PathBuf], truth_path: &Path, rename_duplicates: bool) -> Result<Inputs> {
    let mut runs: Vec<Run> = Vec::new();
    let mut digests = Vec::new();
    for path in run_paths {
        let bytes =
            fs::read(path).with_context(|| format!("reading run file {}", path.display()))?;
        let mut run = parse_run(bytes.as_slice())
            .with_context(|| format!("parsing run file {}", path.display()))?;
        if rename_duplicates {
            // Comparing a file against itself is legitimate (e.g. smoke
            // checks); keep both by tagging the second occurrence.
            while runs.iter().any(|r| r.system_id == run.system_id) {
                run.system_id.push_str(".2");
            }
        }
        digests.push((format!("run:{}", path.display()), bytes));
        runs.push(run);
    }
    let truth_bytes =
        fs::read(truth_path).with_context(|| format!("reading truth {}", truth_path.display()))?;
    let truth = parse_truth(truth_bytes.as_slice())
        .with_context(|| format!("parsing truth {}", truth_path.display()))?;
    digests.push((format!("truth:{}", truth_path.display()), truth_bytes));
    Ok(Inputs {
        runs,
        truth,
        digests,
    })
}

fn load_attribute_table(path: &Path, kind: SubjectKind) -> Result<(AttributeTable, Vec<u8>)> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading attribute table {}", path.display()))?;
    let table = parse_attributes(bytes.as_slice(), kind)
        .with_context(|| format!("parsing attribute table {}", path.display()))?;
    Ok((table, bytes))
}

fn base_provenance(
    model: &BrowsingModel,
    bootstrap: BootstrapConfig,
    seed: Option<u64>,
    digests: &[InputDigest],
) -> Provenance {
    let mut provenance = Provenance::new(
        env!("CARGO_PKG_VERSION"),
        model.patience(),
        model.convention(),
        model.depth(),
        bootstrap,
    );
    provenance.seed = seed;
    for (label, bytes) in digests {
        provenance.record_input(label.clone(), bytes);
    }
    provenance
}

/// Per-(system, metric) summaries keyed the way the report builder expects.
fn frame_summaries(
    frame: &MetricFrame,
    config: &SummaryConfig,
) -> Result<BTreeMap<(String, String), DistributionSummary>> {
    let mut summaries = BTreeMap::new();
    for system in frame.systems() {
        for metric in frame.metrics() {
            let summary = summarize(frame.values(system, metric)?, config)?;
            summaries.insert((system.clone(), metric.id()), summary);
        }
    }
    Ok(summaries)
}

fn single_metric(token: &str, gamma: f64, k_list: &[usize]) -> Result<Metric> {
    Ok(match token {
        "rbp" => Metric::Rbp { gamma },
        "ndcg" => Metric::Ndcg,
        "mrr" => Metric::Mrr,
        "hr" => Metric::HitRate {
            k: *k_list.first().ok_or_else(|| anyhow!("empty k list"))?,
        },
        other => bail!("unknown metric `{other}`"),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    run_paths: &[PathBuf],
    truth_path: &Path,
    model_args: &ModelArgs,
    metric_args: &MetricArgs,
    stat_args: &StatArgs,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model = model_args.model()?;
    let metrics = metric_args.metrics(model.patience())?;
    let inputs = load_inputs(run_paths, truth_path, false)?;
    let frame = evaluate(&inputs.runs, &inputs.truth, &metrics, &model)?;
    let summaries = frame_summaries(&frame, &stat_args.summary_config(derive_seed(seed, "distributions")))?;

    let provenance = base_provenance(&model, stat_args.bootstrap(), Some(seed), &inputs.digests);
    let mut builder = ReportBuilder::new(provenance);
    builder.pointwise(&frame)?;
    builder.distributions(&summaries)?;
    let bundle = builder.build()?;
    bundle.write_to(out)?;
    print!("{}", render_summary_table(&bundle.report)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    run_paths: &[PathBuf],
    truth_path: &Path,
    model_args: &ModelArgs,
    metric_args: &MetricArgs,
    stat_args: &StatArgs,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model = model_args.model()?;
    let metrics = metric_args.metrics(model.patience())?;
    let inputs = load_inputs(run_paths, truth_path, true)?;
    let system_a = inputs.runs[0].system_id.clone();
    let system_b = inputs.runs[1].system_id.clone();
    let frame = evaluate(&inputs.runs, &inputs.truth, &metrics, &model)?;
    let summaries = frame_summaries(&frame, &stat_args.summary_config(derive_seed(seed, "distributions")))?;
    let mut diffs = Vec::new();
    for metric in &metrics {
        let diff = paired_diff(&frame, &system_a, &system_b, metric)?;
        diffs.push((system_a.clone(), system_b.clone(), *metric, diff));
    }

    let provenance = base_provenance(&model, stat_args.bootstrap(), Some(seed), &inputs.digests);
    let mut builder = ReportBuilder::new(provenance);
    builder.pointwise(&frame)?;
    builder.distributions(&summaries)?;
    builder.differences(&diffs)?;
    let bundle = builder.build()?;
    bundle.write_to(out)?;
    print!("{}", render_summary_table(&bundle.report)?);
    for (_, _, metric, diff) in &diffs {
        println!(
            "diff {system_a}-{system_b} {}: median {:+.6}, helped {:.4}, hurt {:.4}, test {:?}",
            metric.id(),
            diff.median_diff,
            diff.fraction_helped,
            diff.fraction_hurt,
            diff.test
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_subgroup(
    run_paths: &[PathBuf],
    truth_path: &Path,
    user_attrs_path: &Path,
    attribute: &str,
    metric_token: &str,
    model_args: &ModelArgs,
    metric_args: &MetricArgs,
    stat_args: &StatArgs,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model = model_args.model()?;
    let metric = single_metric(metric_token, model.patience(), &metric_args.k_list)?;
    let mut inputs = load_inputs(run_paths, truth_path, false)?;
    let (attrs, attr_bytes) = load_attribute_table(user_attrs_path, SubjectKind::User)?;
    inputs
        .digests
        .push((format!("user-attrs:{}", user_attrs_path.display()), attr_bytes));

    let frame = evaluate(&inputs.runs, &inputs.truth, &[metric], &model)?;
    let config = stat_args.summary_config(derive_seed(seed, "subgroups"));
    let mut per_system = BTreeMap::new();
    for system in frame.systems() {
        per_system.insert(
            system.clone(),
            disaggregate(&frame, &attrs, attribute, &metric, system, &config)?,
        );
    }
    let change = if inputs.runs.len() == 2 {
        let mut systems: Vec<String> = frame.systems().to_vec();
        systems.sort();
        Some((
            systems[0].clone(),
            systems[1].clone(),
            group_change(&frame, &attrs, attribute, &metric, &systems[0], &systems[1])?,
        ))
    } else {
        None
    };

    let provenance = base_provenance(&model, stat_args.bootstrap(), Some(seed), &inputs.digests);
    let mut builder = ReportBuilder::new(provenance);
    builder.pointwise(&frame)?;
    let summaries = frame_summaries(&frame, &stat_args.summary_config(derive_seed(seed, "distributions")))?;
    builder.distributions(&summaries)?;
    builder.subgroups(
        attribute,
        &metric,
        &per_system,
        change
            .as_ref()
            .map(|(a, b, groups)| (a.as_str(), b.as_str(), groups)),
    )?;
    let bundle = builder.build()?;
    bundle.write_to(out)?;
    print!("{}", render_summary_table(&bundle.report)?);
    for (system, grouped) in &per_system {
        for (group, entry) in &grouped.groups {
            println!(
                "subgroup {system} {attribute}={group}: n={:.2} mean {:.6} ({:.6}, {:.6})",
                entry.weight,
                entry.summary.mean.value,
                entry.summary.mean.ci.lo,
                entry.summary.mean.ci.hi
            );
        }
    }
    Ok(())
}

fn cmd_exposure(
    run_paths: &[PathBuf],
    truth_path: &Path,
    item_attrs_path: Option<&Path>,
    attribute: Option<&str>,
    model_args: &ModelArgs,
    out: &Path,
) -> Result<()> {
    let model = model_args.model()?;
    let mut inputs = load_inputs(run_paths, truth_path, false)?;
    let item_attrs = match item_attrs_path {
        Some(path) => {
            let (table, bytes) = load_attribute_table(path, SubjectKind::Item)?;
            inputs
                .digests
                .push((format!("item-attrs:{}", path.display()), bytes));
            Some(table)
        }
        None => None,
    };
    if attribute.is_some() && item_attrs.is_none() {
        bail!("--attribute requires --item-attrs");
    }

    let catalog = match &item_attrs {
        Some(table) => Catalog::from_attributes(table),
        None => Catalog::from_runs_and_truth(&inputs.runs, &inputs.truth),
    };
    let ideal = ideal_exposure(&inputs.truth, &model, &catalog)?;

    let mut per_system = BTreeMap::new();
    for run in &inputs.runs {
        let exposure = system_exposure(run, &model, &catalog)?;
        let (lorenz, gini) = lorenz_gini(&exposure)?;
        let l2_vs_ideal = divergence(&exposure, &ideal.exposure, DivergenceKind::L2)?;
        let kl_vs_ideal = divergence(&exposure, &ideal.exposure, DivergenceKind::Kl)?;
        per_system.insert(
            run.system_id.clone(),
            ExposureSystemInput {
                exposure,
                lorenz,
                gini,
                l2_vs_ideal,
                kl_vs_ideal,
            },
        );
    }

    let groups_input = match (item_attrs.as_ref(), attribute) {
        (Some(table), Some(attr)) => {
            let prevalence = prevalence_target(table, attr, &catalog)?;
            let ideal_groups = group_exposure(&ideal.exposure, table, attr)?;
            let mut per_system_groups = BTreeMap::new();
            for (system, input) in &per_system {
                let grouped = group_exposure(&input.exposure, table, attr)?;
                per_system_groups.insert(
                    system.clone(),
                    ExposureGroupsSystemInput {
                        l2_vs_ideal: divergence(&grouped, &ideal_groups, DivergenceKind::L2)?,
                        kl_vs_ideal: divergence(&grouped, &ideal_groups, DivergenceKind::Kl)?,
                        l2_vs_prevalence: divergence(&grouped, &prevalence, DivergenceKind::L2)?,
                        kl_vs_prevalence: divergence(&grouped, &prevalence, DivergenceKind::Kl)?,
                        exposure: grouped,
                    },
                );
            }
            Some(ExposureGroupsInput {
                attribute: attr.to_string(),
                prevalence,
                ideal_groups,
                per_system: per_system_groups,
            })
        }
        _ => None,
    };

    let provenance = base_provenance(&model, BootstrapConfig::default(), None, &inputs.digests);
    let mut builder = ReportBuilder::new(provenance);
    builder.exposure(&per_system, &ideal, groups_input.as_ref())?;
    let bundle = builder.build()?;
    bundle.write_to(out)?;

    println!(
        "{:<14}{:<12}{:<16}{:<16}",
        "system", "gini", "l2_vs_ideal", "kl_vs_ideal"
    );
    for (system, input) in &per_system {
        println!(
            "{system:<14}{:<12.6}{:<16.6}{:<16.6}",
            input.gini, input.l2_vs_ideal, input.kl_vs_ideal
        );
    }
    Ok(())
}

fn cmd_sweep(
    run_paths: &[PathBuf],
    truth_path: &Path,
    grid_step: f64,
    user_attrs_path: Option<&Path>,
    attribute: Option<&str>,
    model_args: &ModelArgs,
    out: &Path,
) -> Result<()> {
    let model = model_args.model()?;
    let mut inputs = load_inputs(run_paths, truth_path, false)?;
    let attrs = match user_attrs_path {
        Some(path) => {
            let (table, bytes) = load_attribute_table(path, SubjectKind::User)?;
            inputs
                .digests
                .push((format!("user-attrs:{}", path.display()), bytes));
            Some(table)
        }
        None => None,
    };
    if attribute.is_some() && attrs.is_none() {
        bail!("--attribute requires --user-attrs");
    }
    let grid = uniform_grid(grid_step)?;
    let attr_ref = match (attrs.as_ref(), attribute) {
        (Some(table), Some(attr)) => Some((table, attr)),
        _ => None,
    };
    let sweep = sweep_patience(
        &inputs.runs,
        &inputs.truth,
        &grid,
        model.convention(),
        model.depth(),
        attr_ref,
    )?;

    let provenance = base_provenance(&model, BootstrapConfig::default(), None, &inputs.digests);
    let mut builder = ReportBuilder::new(provenance);
    builder.sweep(&sweep)?;
    let bundle = builder.build()?;
    bundle.write_to(out)?;

    if sweep.crossovers.is_empty() {
        println!("no crossovers detected on the grid");
    }
    for crossover in &sweep.crossovers {
        let scope = crossover
            .group
            .as_deref()
            .map(|g| format!(" [{g}]"))
            .unwrap_or_default();
        println!(
            "crossover {} vs {}{}: gamma in [{}, {}]",
            crossover.system_a,
            crossover.system_b,
            scope,
            crossover.gamma_lo,
            crossover.gamma_hi
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_posterior(
    run_paths: &[PathBuf],
    truth_path: &Path,
    prior_a: f64,
    prior_b: f64,
    draws: usize,
    user_attrs_path: Option<&Path>,
    attribute: Option<&str>,
    model_args: &ModelArgs,
    stat_args: &StatArgs,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model = model_args.model()?;
    let mut inputs = load_inputs(run_paths, truth_path, false)?;
    let attrs = match user_attrs_path {
        Some(path) => {
            let (table, bytes) = load_attribute_table(path, SubjectKind::User)?;
            inputs
                .digests
                .push((format!("user-attrs:{}", path.display()), bytes));
            Some(table)
        }
        None => None,
    };
    if attribute.is_some() && attrs.is_none() {
        bail!("--attribute requires --user-attrs");
    }
    let attr_ref = match (attrs.as_ref(), attribute) {
        (Some(table), Some(attr)) => Some((table, attr)),
        _ => None,
    };
    let prior = BetaPrior::new(prior_a, prior_b)?;
    let posterior = posterior_metric(
        &inputs.runs,
        &inputs.truth,
        &prior,
        draws,
        seed,
        model.convention(),
        model.depth(),
        attr_ref,
    )?;

    let provenance = base_provenance(&model, stat_args.bootstrap(), Some(seed), &inputs.digests);
    let mut builder = ReportBuilder::new(provenance);
    builder.posterior(&posterior)?;
    let bundle = builder.build()?;
    bundle.write_to(out)?;

    for samples in &posterior.per_system {
        let scope = samples
            .group
            .as_deref()
            .map(|g| format!("/{g}"))
            .unwrap_or_default();
        println!(
            "posterior {}{}: mean {:.6} ({:.6}, {:.6})",
            samples.system,
            scope,
            samples.summary.mean.value,
            samples.summary.mean.ci.lo,
            samples.summary.mean.ci.hi
        );
    }
    Ok(())
}

fn load_repetitions(reps_dir: &Path) -> Result<(RepetitionSet, Vec<InputDigest>)> {
    let mut rep_dirs: Vec<PathBuf> = fs::read_dir(reps_dir)
        .with_context(|| format!("reading repetition directory {}", reps_dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.is_dir())
        .collect();
    rep_dirs.sort();
    if rep_dirs.is_empty() {
        bail!("{} contains no repetition directories", reps_dir.display());
    }
    let mut repetitions = Vec::new();
    let mut digests = Vec::new();
    for dir in rep_dirs {
        let rep_id = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| anyhow!("repetition directory has a non-UTF8 name"))?
            .to_string();
        let truth_path = dir.join("truth.qrels");
        let truth_bytes = fs::read(&truth_path)
            .with_context(|| format!("reading {}", truth_path.display()))?;
        let truth = parse_truth(truth_bytes.as_slice())
            .with_context(|| format!("parsing {}", truth_path.display()))?;
        digests.push((format!("reps:{rep_id}:truth"), truth_bytes));

        let runs_dir = dir.join("runs");
        let mut run_paths: Vec<PathBuf> = fs::read_dir(&runs_dir)
            .with_context(|| format!("reading {}", runs_dir.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|path| path.is_file())
            .collect();
        run_paths.sort();
        let mut runs = Vec::new();
        for path in run_paths {
            let bytes =
                fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            runs.push(
                parse_run(bytes.as_slice())
                    .with_context(|| format!("parsing {}", path.display()))?,
            );
            digests.push((
                format!(
                    "reps:{rep_id}:run:{}",
                    path.file_name().and_then(|n| n.to_str()).unwrap_or("?")
                ),
                bytes,
            ));
        }
        repetitions.push(Repetition {
            id: rep_id,
            runs,
            truth,
        });
    }
    Ok((RepetitionSet::new(repetitions)?, digests))
}

#[allow(clippy::too_many_arguments)]
fn cmd_reps(
    reps_dir: &Path,
    model_args: &ModelArgs,
    metric_args: &MetricArgs,
    stat_args: &StatArgs,
    user_attrs_path: Option<&Path>,
    attribute: Option<&str>,
    statistic: &str,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model = model_args.model()?;
    let metrics = metric_args.metrics(model.patience())?;
    let statistic: RepStatistic = statistic.parse()?;
    let (repset, mut digests) = load_repetitions(reps_dir)?;
    let attrs = match user_attrs_path {
        Some(path) => {
            let (table, bytes) = load_attribute_table(path, SubjectKind::User)?;
            digests.push((format!("user-attrs:{}", path.display()), bytes));
            Some(table)
        }
        None => None,
    };
    if attribute.is_some() && attrs.is_none() {
        bail!("--attribute requires --user-attrs");
    }
    let attr_ref = match (attrs.as_ref(), attribute) {
        (Some(table), Some(attr)) => Some((table, attr)),
        _ => None,
    };
    let frame = evaluate_repetitions(&repset, &metrics, &model, attr_ref, statistic)?;

    let mut stability = Vec::new();
    let systems = repset.system_ids();
    if repset.repetitions().len() >= 2 {
        let config = stat_args.summary_config(derive_seed(seed, "stability"));
        for i in 0..systems.len() {
            for j in (i + 1)..systems.len() {
                for metric in &metrics {
                    stability.push(stability_report(
                        &frame, systems[i], systems[j], metric, &config,
                    )?);
                }
            }
        }
    }

    let provenance = base_provenance(&model, stat_args.bootstrap(), Some(seed), &digests);
    let mut builder = ReportBuilder::new(provenance);
    builder.repetitions(&frame, &stability)?;
    let bundle = builder.build()?;
    bundle.write_to(out)?;

    println!("repetitions: {}", repset.repetitions().len());
    for report in &stability {
        println!(
            "stability {} vs {} on {}: sign-consistency {:.4}, mean diff {:+.6}",
            report.system_a,
            report.system_b,
            report.metric.id(),
            report.sign_consistency,
            report.summary.mean.value
        );
    }
    Ok(())
}

fn cmd_synth(
    seed: u64,
    requests: usize,
    catalog: usize,
    relevant: usize,
    list_length: usize,
    systems: usize,
    out: &Path,
) -> Result<()> {
    let fixture = synth_fixture(
        seed,
        SynthConfig {
            n_requests: requests,
            catalog_size: catalog,
            n_relevant: relevant,
            list_length,
            n_systems: systems,
        },
    )?;
    fs::create_dir_all(out)?;
    for run in &fixture.runs {
        let mut bytes = Vec::new();
        serialize_run(run, &mut bytes)?;
        let path = out.join(format!("{}.run", run.system_id));
        fs::write(&path, bytes)?;
        println!("wrote {}", path.display());
    }
    let mut truth_bytes = Vec::new();
    serialize_truth(&fixture.truth, &mut truth_bytes)?;
    let truth_path = out.join("truth.qrels");
    fs::write(&truth_path, truth_bytes)?;
    println!("wrote {}", truth_path.display());
    let mut user_bytes = Vec::new();
    serialize_attributes(&fixture.user_attributes, &mut user_bytes)?;
    let users_path = out.join("users.csv");
    fs::write(&users_path, user_bytes)?;
    println!("wrote {}", users_path.display());
    let mut item_bytes = Vec::new();
    serialize_attributes(&fixture.item_attributes, &mut item_bytes)?;
    let items_path = out.join("items.csv");
    fs::write(&items_path, item_bytes)?;
    println!("wrote {}", items_path.display());
    Ok(())
}

fn cmd_report(report_path: &Path) -> Result<()> {
    let path = if report_path.is_dir() {
        report_path.join("report.json")
    } else {
        report_path.to_path_buf()
    };
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = Report::from_json_str(&text)?;
    print!("{}", render_summary_table(&report)?);
    Ok(())
}
