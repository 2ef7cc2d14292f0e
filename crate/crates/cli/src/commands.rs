use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use careflow::flowcore::euler_endpoint;
use careflow::metrics::energy_distance;
use careflow::numkit::Matrix;
use careflow::pipeline::gradcheck::{run_gradcheck, GradcheckOptions, GradcheckReport};
use careflow::pipeline::{
    alignment_report, encode_split, evaluate, init_bundle, metric_settings, train, Ablation, AlignmentReport, Checkpoint, ModelBundle,
    RunConfig, Splits, TrainReport,
};
use careflow::synthdata::{DatasetSpec, Split};
use careflow::{Modality, Task};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{AblateArgs, Common, EvalArgs, ExportPlotArgs, GenDataArgs, GradcheckArgs, TrainArgs};
use crate::config::Config;
use crate::dataset::{label_text, Dataset};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_json, write_text, CsvOut};
use crate::{pca, svg};

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPORT_FILE: &str = "report.json";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const ALIGNMENT_FILE: &str = "alignment.json";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_JSON: &str = "ablation.json";
pub const GRADCHECK_FILE: &str = "gradcheck.json";
pub const PLOT_CSV: &str = "plot.csv";
pub const PLOT_BEFORE: &str = "before.svg";
pub const PLOT_AFTER: &str = "after.svg";

/// Caps the worker count of `ablate`.
pub const THREADS_ENV: &str = "CAREFLOW_THREADS";

/// Seed of the PCA start vector in `export-plot`.
const PCA_SEED: u64 = 0x5eed;

const COLORS: [&str; 3] = ["#d95f02", "#1b9e77", "#7570b3"];

fn load_config(common: &Common) -> CliResult<Config> {
    let config = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    config.with_overrides(&common.overrides.to_overrides())
}

/// The dataset from `--data`, or generated from the config. A dataset read
/// from disk replaces the config's dataset spec.
fn load_data(config: &mut Config, data: Option<&Path>) -> CliResult<Dataset> {
    let dataset = match data {
        Some(dir) => Dataset::read(dir)?,
        None => Dataset::generate(&config.dataset)?,
    };
    config.dataset = dataset.spec.clone();
    Ok(dataset)
}

fn splits(data: &Dataset) -> Splits<'_> {
    Splits {
        train: &data.train,
        val: &data.val,
        test: &data.test,
    }
}

fn format_metrics(values: &BTreeMap<String, f64>) -> String {
    values.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" ")
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    let config = load_config(&args.common)?;
    let data = Dataset::generate(&config.dataset)?;
    ensure_dir(&args.out)?;
    data.write(&args.out)?;
    for split in Split::ALL {
        let n = data.split(split).len();
        println!("{}: {n} samples ({} feature rows, {n} label rows)", split.as_str(), 3 * n);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainArtifact<'a> {
    train: &'a TrainReport,
    /// Test-split alignment of the kept parameters.
    alignment: &'a AlignmentReport,
}

/// Everything one training run produces.
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub report: TrainReport,
    pub alignment: AlignmentReport,
}

pub fn train_model(spec: &DatasetSpec, data: &Dataset, run: &RunConfig) -> CliResult<TrainOutcome> {
    let mut bundle = init_bundle(spec, run)?;
    let report = train(&mut bundle, splits(data), run, &metric_settings(spec, run))?;
    let alignment = alignment_report(&bundle, &data.test, run)?;
    Ok(TrainOutcome { bundle, report, alignment })
}

fn write_run(dir: &Path, config: &Config, outcome: &TrainOutcome) -> CliResult<()> {
    ensure_dir(dir)?;
    write_json(&dir.join(CONFIG_FILE), config)?;
    let checkpoint = Checkpoint::from_bundle(&outcome.bundle, &config.run);
    write_text(&dir.join(CHECKPOINT_FILE), &(checkpoint.to_json()? + "\n"))?;
    write_json(
        &dir.join(REPORT_FILE),
        &TrainArtifact {
            train: &outcome.report,
            alignment: &outcome.alignment,
        },
    )?;
    write_epochs_csv(&dir.join(EPOCHS_FILE), &outcome.report)
}

fn write_epochs_csv(path: &Path, report: &TrainReport) -> CliResult<()> {
    let metric_names: Vec<String> = report
        .epochs
        .first()
        .map(|e| e.val.values.keys().cloned().collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["epoch", "total", "main", "forward_a", "forward_v", "backward_a", "backward_v"]
        .map(String::from)
        .to_vec();
    header.extend(metric_names.iter().map(|k| format!("val_{k}")));
    let mut csv = CsvOut::create(path, &header)?;
    for e in &report.epochs {
        let l = &e.losses;
        let mut row = vec![e.epoch.to_string()];
        row.extend([l.total, l.main, l.forward[0], l.forward[1], l.backward[0], l.backward[1]].map(|v| v.to_string()));
        row.extend(metric_names.iter().map(|k| e.val.get(k).map(|v| v.to_string()).unwrap_or_default()));
        csv.row(&row)?;
    }
    csv.finish()
}

pub fn train_cmd(args: &TrainArgs) -> CliResult<()> {
    let mut config = load_config(&args.common)?;
    let data = load_data(&mut config, args.data.as_deref())?;
    let started = Instant::now();
    let outcome = train_model(&config.dataset, &data, &config.run)?;
    write_run(&args.out, &config, &outcome)?;

    let report = &outcome.report;
    match report.best_epoch {
        Some(best) => {
            let val = &report.epochs[best].val;
            let test = report.test.as_ref().map(|t| format_metrics(&t.values)).unwrap_or_default();
            println!(
                "best epoch {}/{}: val {} | test {}",
                best + 1,
                report.epochs.len(),
                format_metrics(&val.values),
                test
            );
        }
        None => println!("no epochs run (epochs = 0)"),
    }
    eprintln!("trained in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

/// Checkpoint, run config (checkpoint's, with command-line overrides) and data.
fn load_trained(common: &Common, checkpoint: &Path, data_dir: Option<&Path>) -> CliResult<(ModelBundle, Config, Dataset)> {
    let mut config = load_config(common)?;
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| match e {
        careflow::Error::Io(io) => CliError::io(checkpoint, io),
        other => CliError::format(checkpoint, other),
    })?;
    let bundle = ckpt.to_bundle()?;
    config.run = ckpt.config;
    config = config.with_overrides(&common.overrides.to_overrides())?;
    let data = load_data(&mut config, data_dir)?;
    let raw = Modality::ALL.map(|m| data.spec.modality_dim(m));
    if raw != bundle.dims.raw || data.spec.task != bundle.dims.task {
        return Err(CliError::Usage(format!(
            "checkpoint expects {:?} inputs with raw widths {:?}; dataset has {:?} with {:?}",
            bundle.dims.task, bundle.dims.raw, data.spec.task, raw
        )));
    }
    Ok((bundle, config, data))
}

#[derive(Debug, Serialize)]
struct MetricsArtifact<'a> {
    split: &'static str,
    euler_steps: usize,
    metrics: &'a careflow::metrics::MetricSet,
}

pub fn eval_cmd(args: &EvalArgs) -> CliResult<()> {
    let (bundle, config, data) = load_trained(&args.common, &args.checkpoint, args.data.as_deref())?;
    let run = &config.run;
    let eval = evaluate(&bundle, &data.test, run, &metric_settings(&config.dataset, run))?;
    let alignment = alignment_report(&bundle, &data.test, run)?;

    ensure_dir(&args.out)?;
    write_json(
        &args.out.join(METRICS_FILE),
        &MetricsArtifact {
            split: Split::Test.as_str(),
            euler_steps: run.euler_steps,
            metrics: &eval.metrics,
        },
    )?;
    let mut csv = CsvOut::create(&args.out.join(PREDICTIONS_FILE), &["sample_id", "y", "prediction"])?;
    for (id, (s, p)) in data.test.iter().zip(&eval.predictions).enumerate() {
        csv.row(&[id.to_string(), label_text(s.y), label_text(*p)])?;
    }
    csv.finish()?;
    write_json(&args.out.join(ALIGNMENT_FILE), &alignment)?;
    println!("test (N={}): {}", run.euler_steps, format_metrics(&eval.metrics.values));
    Ok(())
}

/// Row label of an ablation variant; `None` is the full model.
pub fn variant_name(ablation: Option<Ablation>) -> &'static str {
    ablation.map_or("full", Ablation::as_str)
}

pub const VARIANTS: [Option<Ablation>; 5] = [
    None,
    Some(Ablation::NoAlignment),
    Some(Ablation::NoCyclic),
    Some(Ablation::NoAdaptive),
    Some(Ablation::NoOneToMany),
];

/// Test metrics of one run plus alignment summaries.
fn run_summary(outcome: &TrainOutcome) -> BTreeMap<String, f64> {
    let mut values = outcome.report.test.as_ref().map(|t| t.values.clone()).unwrap_or_default();
    let a = &outcome.alignment;
    values.insert("cycle_error".into(), (a.cycle_error[0] + a.cycle_error[1]) / 2.0);
    let ratio = |s: usize| a.after[s].energy_distance / a.before[s].energy_distance;
    values.insert("gap_ratio".into(), (ratio(0) + ratio(1)) / 2.0);
    values
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub seeds: Vec<u64>,
    pub mean: BTreeMap<String, f64>,
    /// Sample standard deviation; 0 for a single seed.
    pub sd: BTreeMap<String, f64>,
    pub per_seed: Vec<BTreeMap<String, f64>>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(text) => match text.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {text:?}"))),
        },
    }
}

pub fn ablate_cmd(args: &AblateArgs) -> CliResult<()> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let mut config = load_config(&args.common)?;
    let data = load_data(&mut config, args.data.as_deref())?;
    let base = config.run.clone();
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|k| base.seed + k).collect();
    let jobs: Vec<(Option<Ablation>, u64)> = VARIANTS.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let summaries: Vec<BTreeMap<String, f64>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(variant, seed)| {
                let mut run = base.with_ablation(variant);
                run.seed = seed;
                let outcome = train_model(&config.dataset, &data, &run)?;
                let dir = ablation_run_dir(&args.out, variant, seed);
                let run_config = Config {
                    dataset: config.dataset.clone(),
                    run,
                };
                write_run(&dir, &run_config, &outcome)?;
                Ok(run_summary(&outcome))
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let rows: Vec<AblationRow> = VARIANTS
        .iter()
        .zip(summaries.chunks(seeds.len()))
        .map(|(&variant, per_seed)| {
            let mut mean = BTreeMap::new();
            let mut sd = BTreeMap::new();
            for key in per_seed[0].keys() {
                let values: Vec<f64> = per_seed.iter().map(|s| s[key]).collect();
                let (m, s) = mean_sd(&values);
                mean.insert(key.clone(), m);
                sd.insert(key.clone(), s);
            }
            AblationRow {
                variant: variant_name(variant).into(),
                seeds: seeds.clone(),
                mean,
                sd,
                per_seed: per_seed.to_vec(),
            }
        })
        .collect();

    let keys: Vec<String> = rows[0].mean.keys().cloned().collect();
    let mut header = vec!["variant".to_string(), "seeds".into()];
    for k in &keys {
        header.push(format!("{k}_mean"));
        header.push(format!("{k}_sd"));
    }
    let mut csv = CsvOut::create(&args.out.join(ABLATION_CSV), &header)?;
    for row in &rows {
        let mut fields = vec![row.variant.clone(), row.seeds.len().to_string()];
        for k in &keys {
            fields.push(row.mean[k].to_string());
            fields.push(row.sd[k].to_string());
        }
        csv.row(&fields)?;
    }
    csv.finish()?;
    write_json(&args.out.join(ABLATION_JSON), &rows)?;

    let headline = match config.dataset.task {
        Task::Classification => "acc2",
        Task::Regression => "mae",
    };
    for row in &rows {
        println!(
            "{:<15} {headline} {:.3} ± {:.3}  cycle_error {:.4}  gap_ratio {:.4}",
            row.variant, row.mean[headline], row.sd[headline], row.mean["cycle_error"], row.mean["gap_ratio"]
        );
    }
    Ok(())
}

fn parse_fault(text: &str) -> CliResult<(String, usize)> {
    let (name, index) = text
        .rsplit_once(':')
        .ok_or_else(|| CliError::Usage(format!("fault must be NAME:INDEX, got {text:?}")))?;
    let index = index.parse().map_err(|_| CliError::Usage(format!("bad fault index {index:?}")))?;
    Ok((name.to_string(), index))
}

/// Runs every gradient check; `Ok(false)` when any check fails.
pub fn gradcheck_cmd(args: &GradcheckArgs) -> CliResult<bool> {
    let config = load_config(&args.common)?;
    let corrupt = args.inject_fault.as_deref().map(parse_fault).transpose()?;
    let started = Instant::now();
    let report: GradcheckReport = run_gradcheck(&GradcheckOptions {
        seed: config.run.seed,
        corrupt,
    })?;
    for c in &report.checks {
        let status = if c.passed { "ok  " } else { "FAIL" };
        print!(
            "{status} {:<44} {:>5} params  max rel err {:.2e}",
            c.name, c.params, c.max_rel_error
        );
        if !c.passed {
            print!(
                "  at {} (analytic {:.6e}, numeric {:.6e})",
                c.worst_coordinate, c.analytic, c.numeric
            );
        }
        println!();
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} checks, {failed} failed (h = {:e}, tolerance {:e})",
        report.checks.len(),
        report.step,
        report.tolerance
    );
    eprintln!("gradcheck took {:.1} s", started.elapsed().as_secs_f64());
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_json(&out.join(GRADCHECK_FILE), &report)?;
    }
    Ok(report.passed())
}

/// Projects every cloud into a common 2-D frame: native coordinates when the
/// feature width is 2, otherwise one PCA fitted to all clouds together.
pub fn plane_coordinates(clouds: &[&Matrix]) -> Vec<Vec<[f64; 2]>> {
    let to_pairs = |m: &Matrix| m.iter_rows().map(|r| [r[0], r[1]]).collect::<Vec<_>>();
    if clouds[0].cols() == 2 {
        return clouds.iter().map(|m| to_pairs(m)).collect();
    }
    let rows: Vec<&[f64]> = clouds.iter().flat_map(|m| m.iter_rows()).collect();
    let all = Matrix::from_rows(&rows).expect("uniform feature width");
    let fit = pca::fit(&all, PCA_SEED);
    clouds.iter().map(|m| to_pairs(&fit.project(m))).collect()
}

pub fn export_plot_cmd(args: &ExportPlotArgs) -> CliResult<()> {
    let (bundle, config, data) = load_trained(&args.common, &args.checkpoint, args.data.as_deref())?;
    let x = encode_split(&bundle, &data.test)?;
    let mut mapped = Vec::with_capacity(2);
    for m in Modality::SOURCES {
        mapped.push(euler_endpoint(bundle.forward_drift(m), &x[m.index()], config.run.euler_steps)?);
    }
    let l = Modality::Language.index();
    // before: X_a, X_v, X_l; after: X_{a,l}, X_{v,l}, X_l
    let clouds = [&x[0], &x[1], &x[l], &mapped[0], &mapped[1]];
    let coords = plane_coordinates(&clouds);
    let before = [&coords[0], &coords[1], &coords[2]];
    let after = [&coords[3], &coords[4], &coords[2]];

    ensure_dir(&args.out)?;
    let mut csv = CsvOut::create(&args.out.join(PLOT_CSV), &["stage", "modality", "sample_id", "x", "y"])?;
    for (stage, set) in [("before", before), ("after", after)] {
        for (m, points) in Modality::ALL.into_iter().zip(set) {
            for (id, p) in points.iter().enumerate() {
                csv.row(&[
                    stage.to_string(),
                    m.as_str().to_string(),
                    id.to_string(),
                    p[0].to_string(),
                    p[1].to_string(),
                ])?;
            }
        }
    }
    csv.finish()?;

    let labels_before = ["X_a", "X_v", "X_l"];
    let labels_after = ["X_a→l", "X_v→l", "X_l"];
    let (sb, sa) = (series(before, labels_before), series(after, labels_after));
    let all: Vec<svg::Series<'_>> = series(before, labels_before)
        .into_iter()
        .chain(series(after, labels_after))
        .collect();
    let bounds = svg::bounds(&all);
    write_text(&args.out.join(PLOT_BEFORE), &svg::scatter("before mapping", &sb, bounds))?;
    write_text(&args.out.join(PLOT_AFTER), &svg::scatter("after mapping", &sa, bounds))?;

    for (slot, m) in Modality::SOURCES.into_iter().enumerate() {
        let pre = energy_distance(&x[m.index()], &x[l])?;
        let post = energy_distance(&mapped[slot], &x[l])?;
        println!("energy distance {}→l: before {pre:.6} after {post:.6}", m.as_str());
    }
    Ok(())
}

fn series<'a>(set: [&'a Vec<[f64; 2]>; 3], labels: [&'a str; 3]) -> Vec<svg::Series<'a>> {
    (0..3)
        .map(|k| svg::Series {
            label: labels[k],
            color: COLORS[k],
            points: set[k],
        })
        .collect()
}

/// Directory of one ablation run inside an `ablate` output directory.
pub fn ablation_run_dir(out: &Path, variant: Option<Ablation>, seed: u64) -> PathBuf {
    out.join("runs").join(variant_name(variant)).join(format!("seed_{seed}"))
}
