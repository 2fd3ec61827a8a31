//! Experiment commands behind the `nonnormal-lab` binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{self, ConfigError, Experiment, OperatorSpec, PseudoConfig, RunConfig, ToyConfig};
use crate::linalg::{self, two_by_two, DenseMatrix, C64};
use crate::model::Dataset;
use crate::operators;
use crate::pseudospec::{self, EpProbe, GridSpec, KreissEstimate, PrecursorReport};
use crate::train::{self, LeadTimeReport, TrainConfig, TrainTrace};

/// Agreement required between the general solvers and the 2×2 closed forms.
pub const CROSS_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical abort: {0}")]
    Abort(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Abort(_) => 3,
            Self::Numerical(_) | Self::Io(_) => 1,
        }
    }
}

impl From<crate::model::ModelError> for CliError {
    fn from(e: crate::model::ModelError) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(std::io::Error::other(e))
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossCheck {
    pub eigenvalue_error: f64,
    pub kappa_error: f64,
    pub norm_error: f64,
    pub commutator_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyReport {
    pub config: ToyConfig,
    pub matrix: [[f64; 2]; 2],
    pub eigenvalues: [C64; 2],
    pub spectral_radius: f64,
    pub kappa_v: f64,
    pub norm_2: f64,
    /// `‖J^t‖₂` for `t = 0..=t_max`.
    pub power_norms: Vec<f64>,
    pub first_below_one: Option<usize>,
    /// Last `t ≤ t_max` with `‖J^t‖₂ > 1`.
    pub last_above_one: Option<usize>,
    pub commutator_diagonal: [f64; 2],
    pub precursor: PrecursorReport,
    /// Normality of the operator that governs θ: the 1×1 map `1 − ηλ` when
    /// β = 0, the 2×2 matrix otherwise.
    pub normal: bool,
    /// Normality of the 2×2 augmented matrix itself.
    pub augmented_normal: bool,
    /// Whether any `‖J^t‖₂` with `t ≥ 1` exceeds 1 for the governing operator.
    pub transient: bool,
    pub cross_check: CrossCheck,
}

/// Closed-form analysis of momentum SGD on `λθ²/2`.
pub fn cmd_toy(cfg: &ToyConfig) -> Result<ToyReport, CliError> {
    let op = operators::build_scalar_toy(cfg.curvature, cfg.eta, cfg.beta)
        .map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;
    let j = &op.matrix;
    let eig = linalg::eig(j).map_err(numerical)?;
    let norm_2 = linalg::operator_norm_2(j);
    let power_norms = linalg::matrix_power_norms(j, cfg.t_max).map_err(numerical)?;
    let commutator = operators::normality_commutator(j);
    let commutator_diagonal = [commutator.re(0, 0), commutator.re(1, 1)];

    // Closed forms.
    let (z_plus, z_minus) = two_by_two::eigenvalues(j);
    let kappa_closed = two_by_two::kappa_unit_eigenvectors(j).unwrap_or(f64::INFINITY);
    let (norm_closed, _) = two_by_two::singular_values(j);
    let off = (cfg.eta * cfg.beta).powi(2) - cfg.curvature.powi(2);
    let eigenvalue_error = {
        let (a, b) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        let direct = (a - z_plus).norm().max((b - z_minus).norm());
        let swapped = (a - z_minus).norm().max((b - z_plus).norm());
        direct.min(swapped)
    };
    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / y.abs().max(1.0) };
    let kappa_error = rel(eig.kappa_v, kappa_closed);
    let norm_error = rel(norm_2, norm_closed);
    let commutator_error = (commutator_diagonal[0] - off)
        .abs()
        .max((commutator_diagonal[1] + off).abs())
        / off.abs().max(1.0);
    let passed = [eigenvalue_error, kappa_error, norm_error, commutator_error]
        .iter()
        .all(|e| *e <= CROSS_CHECK_TOL);

    let augmented_normal = op.is_normal();
    let (normal, governing_powers) = if cfg.beta == 0.0 {
        let a = 1.0 - cfg.eta * cfg.curvature;
        (true, (0..=cfg.t_max).map(|t| a.abs().powi(t as i32)).collect::<Vec<_>>())
    } else {
        (augmented_normal, power_norms.clone())
    };
    let transient = governing_powers.iter().skip(1).any(|&p| p > 1.0);

    let m = |r, c| j.re(r, c);
    Ok(ToyReport {
        config: *cfg,
        matrix: [[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]],
        eigenvalues: [eig.eigenvalues[0], eig.eigenvalues[1]],
        spectral_radius: eig.spectral_radius,
        kappa_v: eig.kappa_v,
        norm_2,
        first_below_one: power_norms.iter().position(|&p| p < 1.0),
        last_above_one: power_norms.iter().rposition(|&p| p > 1.0).filter(|&t| t > 0),
        power_norms,
        commutator_diagonal,
        precursor: pseudospec::precursor(&eig),
        normal,
        augmented_normal,
        transient,
        cross_check: CrossCheck {
            eigenvalue_error,
            kappa_error,
            norm_error,
            commutator_error,
            passed,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PseudoReport {
    pub dimension: usize,
    pub eigenvalues: Vec<C64>,
    pub spectral_radius: f64,
    pub kappa_v: f64,
    pub grid_spec: GridSpec,
    pub kreiss: Option<KreissEstimate>,
    pub max_power_norm: Option<f64>,
    pub ep: Option<EpProbe>,
    #[serde(skip)]
    pub grid: pseudospec::PseudospectrumGrid,
}

/// Parses a real matrix: one row per line, comma or whitespace separated,
/// `#` starts a comment.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix, ConfigError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    ConfigError::Invalid(format!("line {}: `{s}` is not a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let m = DenseMatrix::from_rows(&rows).map_err(|e| ConfigError::Invalid(format!("matrix file: {e}")))?;
    if !m.is_square() {
        return Err(ConfigError::Invalid(format!(
            "matrix file: {}x{} is not square",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

pub fn resolve_operator(spec: &OperatorSpec, toy: &ToyConfig) -> Result<DenseMatrix, ConfigError> {
    match spec {
        OperatorSpec::Toy {
            curvature,
            eta,
            beta,
        } => operators::build_scalar_toy(
            curvature.unwrap_or(toy.curvature),
            eta.unwrap_or(toy.eta),
            beta.unwrap_or(toy.beta),
        )
        .map(|op| op.matrix)
        .map_err(|e| ConfigError::Invalid(e.to_string())),
        &OperatorSpec::Jordan { lambda, n } => {
            if n == 0 || !lambda.is_finite() {
                return Err(ConfigError::Invalid(format!("jordan({lambda}, {n})")));
            }
            Ok(DenseMatrix::from_real_fn(n, n, |r, c| {
                if r == c {
                    lambda
                } else if c == r + 1 {
                    1.0
                } else {
                    0.0
                }
            })
            .expect("finite entries"))
        }
        OperatorSpec::File { path } => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
            parse_matrix(&text)
        }
    }
}

/// Grid, Kreiss estimate and optional exceptional-point probe for one operator.
pub fn cmd_pseudo(cfg: &PseudoConfig, toy: &ToyConfig) -> Result<PseudoReport, CliError> {
    let j = resolve_operator(&cfg.operator, toy)?;
    let eig = linalg::eig(&j).map_err(numerical)?;
    let grid_spec = cfg.grid.unwrap_or_else(|| {
        let r = eig.spectral_radius;
        GridSpec::square(C64::new(0.0, 0.0), 1.5 * r.max(0.5), 101)
    });
    let grid = pseudospec::pseudospectrum(&j, grid_spec).map_err(numerical)?;
    let (kreiss, max_power_norm) = if cfg.kreiss && eig.spectral_radius < 1.0 {
        let k = pseudospec::kreiss_constant(&j, 40, 64, 6).map_err(numerical)?;
        let powers = linalg::matrix_power_norms(&j, 200).map_err(numerical)?;
        (Some(k), Some(powers.iter().copied().fold(0.0, f64::max)))
    } else {
        (None, None)
    };
    let ep = if cfg.ep_probe {
        let center = match cfg.ep_center {
            Some([re, im]) => C64::new(re, im),
            None => *eig
                .eigenvalues
                .iter()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .expect("non-empty spectrum"),
        };
        Some(pseudospec::ep_scaling_probe(&j, center, &cfg.epsilons).map_err(numerical)?)
    } else {
        None
    };
    Ok(PseudoReport {
        dimension: j.rows(),
        eigenvalues: eig.eigenvalues,
        spectral_radius: eig.spectral_radius,
        kappa_v: eig.kappa_v,
        grid_spec,
        kreiss,
        max_power_norm,
        ep,
        grid,
    })
}

/// Runs one training configuration; a numerical abort is reported through
/// [`TrainTrace::abort`], not as an error.
pub fn cmd_train(cfg: &TrainConfig) -> Result<TrainTrace, CliError> {
    train::run_training(cfg).map_err(|e| match e {
        train::TrainError::Config(msg) => CliError::Config(ConfigError::Invalid(msg)),
        other => numerical(other),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub step: u64,
    pub kappa_mean: f64,
    pub kappa_std: f64,
    pub rho_mean: f64,
    pub rho_std: f64,
    /// Seeds contributing to this row.
    pub seeds: usize,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub traces: Vec<TrainTrace>,
    pub rows: Vec<AggregateRow>,
    /// Some seed aborted, so later rows average over fewer seeds.
    pub incomplete: bool,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates sampled records after the warm start, step by step, over seeds.
pub fn aggregate(traces: &[TrainTrace]) -> Vec<AggregateRow> {
    let mut steps: Vec<u64> = traces
        .iter()
        .flat_map(|t| {
            let warm = t.config.warm_start.map_or(0, |w| w.steps);
            t.records.iter().map(|r| r.step).filter(move |&s| s > warm)
        })
        .collect();
    steps.sort_unstable();
    steps.dedup();
    steps
        .into_iter()
        .map(|step| {
            let recs: Vec<_> = traces.iter().filter_map(|t| t.record_at(step)).collect();
            let kappas: Vec<f64> = recs.iter().map(|r| r.kappa_v).collect();
            let rhos: Vec<f64> = recs.iter().map(|r| r.rho_j).collect();
            let (kappa_mean, kappa_std) = mean_std(&kappas);
            let (rho_mean, rho_std) = mean_std(&rhos);
            AggregateRow {
                step,
                kappa_mean,
                kappa_std,
                rho_mean,
                rho_std,
                seeds: recs.len(),
            }
        })
        .collect()
}

/// Runs `base` once per seed, in order, and aggregates κ(V) and ρ.
pub fn cmd_sweep(base: &TrainConfig, seeds: &[u64]) -> Result<SweepResult, CliError> {
    if seeds.is_empty() {
        return Err(ConfigError::Invalid("sweep needs at least one seed".into()).into());
    }
    let traces = seeds
        .iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cmd_train(&cfg)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = aggregate(&traces);
    let incomplete = traces.iter().any(|t| t.abort.is_some());
    Ok(SweepResult {
        traces,
        rows,
        incomplete,
    })
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "kappa_mean", "kappa_std", "rho_mean", "rho_std"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.kappa_mean.to_string(),
            r.kappa_std.to_string(),
            r.rho_mean.to_string(),
            r.rho_std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable run summary.
pub fn train_summary(trace: &TrainTrace, lead: &LeadTimeReport) -> String {
    let mut s = String::new();
    let fmt_opt = |x: Option<u64>| x.map_or("unobserved".to_string(), |v| v.to_string());
    let rhos = trace.records.iter().map(|r| r.rho_j);
    let rho_min = rhos.clone().fold(f64::INFINITY, f64::min);
    let rho_max = rhos.fold(f64::NEG_INFINITY, f64::max);
    s += &format!(
        "steps: {}  final loss: {}\n",
        trace.losses.len(),
        trace.final_loss().map_or("n/a".into(), |l| format!("{l:.6}"))
    );
    if let Some(a) = &trace.abort {
        s += &format!("ABORTED at step {}: {}\n", a.step, a.reason);
    }
    s += &format!("spikes: {} {:?}\n", trace.spikes.len(), trace.spikes);
    if trace.records.is_empty() {
        s += "rho range: n/a\n";
    } else {
        s += &format!("rho range: [{rho_min:.4}, {rho_max:.4}]\n");
    }
    s += &format!(
        "kappa separation ratio: {}\n",
        lead.separation_ratio.map_or("n/a".into(), |r| format!("{r:.3}"))
    );
    s += &format!(
        "sharpness threshold 2/((1+beta)eta) = {:.4} (2/eta = {:.4}), persistent crossing: {}\n",
        lead.sharpness_threshold,
        lead.reference_threshold,
        fmt_opt(lead.sharpness_crossing)
    );
    s += &format!(
        "kappa crossing ({}x trailing median): {}\n",
        lead.kappa_multiplier,
        fmt_opt(lead.kappa_crossing)
    );
    if !lead.spikes.is_empty() {
        s += "spike  sharpness_lead  kappa_lead\n";
        for sp in &lead.spikes {
            s += &format!(
                "{:>5}  {:>14}  {:>10}\n",
                sp.step,
                fmt_opt(sp.sharpness_lead),
                fmt_opt(sp.kappa_lead)
            );
        }
    }
    s
}

#[derive(Debug, Parser)]
#[command(name = "nonnormal-lab", version, about = "Non-normal stability diagnostics for optimizer update operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named preset: sgdm-paper, sgdm-beta095, adam-paper, seeds-paper.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for training; first seed of a sweep.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scalar momentum toy in closed form.
    Toy {
        /// key=value config overrides.
        overrides: Vec<String>,
    },
    /// Pseudospectrum grid, Kreiss constant and EP probe.
    Pseudo { overrides: Vec<String> },
    /// One training run with sampled diagnostics.
    Train { overrides: Vec<String> },
    /// Multi-seed training sweep.
    Sweep { overrides: Vec<String> },
}

impl Command {
    fn parts(&self) -> (Experiment, &[String]) {
        match self {
            Self::Toy { overrides } => (Experiment::Toy, overrides),
            Self::Pseudo { overrides } => (Experiment::Pseudo, overrides),
            Self::Train { overrides } => (Experiment::Train, overrides),
            Self::Sweep { overrides } => (Experiment::Sweep, overrides),
        }
    }
}

/// Builds the effective config: file or preset, then `--seed`, then overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let (experiment, overrides) = cli.command.parts();
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid("--config and --preset are exclusive".into()))
        }
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        (None, Some(name)) => config::preset(name)?,
        (None, None) => RunConfig::new(experiment),
    };
    cfg.experiment = experiment;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
        let n = cfg.sweep.seeds.len() as u64;
        cfg.sweep.seeds = (seed..seed + n).collect();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    let cfg = cfg.with_overrides(overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::other)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn write_trace(dir: &Path, trace: &TrainTrace, lead: &LeadTimeReport) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    trace.write_csv(create(dir, "trace.csv")?)?;
    write_json(
        dir,
        "trace.json",
        &json!({
            "config": trace.config,
            "seed": trace.config.seed,
            "data_seed": trace.config.data_seed(),
            "initial_loss": trace.initial_loss,
            "spikes": trace.spikes,
            "phases": trace.phases,
            "lead_time": lead,
            "abort": trace.abort,
            "records": trace.records,
            "generated_unix": unix_time(),
        }),
    )
}

/// Executes a resolved config, writing artifacts under its output directory.
pub fn execute(cfg: &RunConfig) -> Result<String, CliError> {
    let default_dir = match cfg.experiment {
        Experiment::Toy => "runs/toy",
        Experiment::Pseudo => "runs/pseudo",
        Experiment::Train => "runs/train",
        Experiment::Sweep => "runs/sweep",
    };
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(default_dir));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    match cfg.experiment {
        Experiment::Toy => {
            let report = cmd_toy(&cfg.toy)?;
            let mut w = csv::Writer::from_writer(create(&dir, "toy_powers.csv")?);
            w.write_record(["t", "norm"])?;
            for (t, p) in report.power_norms.iter().enumerate() {
                w.write_record([t.to_string(), p.to_string()])?;
            }
            w.flush()?;
            write_json(&dir, "toy_report.json", &json!({ "config": cfg, "report": report, "generated_unix": unix_time() }))?;
            if !report.cross_check.passed {
                return Err(CliError::Numerical(format!(
                    "closed-form cross-check failed: {:?}",
                    report.cross_check
                )));
            }
            Ok(format!(
                "eigenvalues {} and {}\nrho {:.12}  kappa(V) {:.6}  ||J||_2 {:.6}\nfirst t with ||J^t|| < 1: {}  last t above 1: {}\ncommutator diagonal [{:.6}, {:.6}]  t_c {}\nnormal: {}  transient: {}  cross-check passed\n",
                report.eigenvalues[0],
                report.eigenvalues[1],
                report.spectral_radius,
                report.kappa_v,
                report.norm_2,
                report.first_below_one.map_or("none".into(), |t| t.to_string()),
                report.last_above_one.map_or("none".into(), |t| t.to_string()),
                report.commutator_diagonal[0],
                report.commutator_diagonal[1],
                report.precursor.t_c.map_or("none".into(), |t| t.to_string()),
                report.normal,
                report.transient,
            ))
        }
        Experiment::Pseudo => {
            let report = cmd_pseudo(&cfg.pseudo, &cfg.toy)?;
            report.grid.write_csv(create(&dir, "pseudospectrum.csv")?)?;
            write_json(&dir, "pseudo_summary.json", &json!({ "config": cfg, "report": report, "generated_unix": unix_time() }))?;
            let mut s = format!(
                "n = {}  rho = {:.6}  kappa(V) = {:.6}\n",
                report.dimension, report.spectral_radius, report.kappa_v
            );
            if let (Some(k), Some(p)) = (report.kreiss, report.max_power_norm) {
                s += &format!("Kreiss estimate {:.6}  max_t ||J^t|| {:.6}\n", k.value, p);
            }
            if let Some(ep) = &report.ep {
                s += &format!("EP scaling exponent {:.4}\n", ep.exponent);
            }
            Ok(s)
        }
        Experiment::Train => {
            let data = Dataset::generate(cfg.train.data_seed(), cfg.train.n_data);
            data.write_csv(create(&dir, "dataset.csv")?)?;
            write_json(&dir, "dataset.json", &serde_json::to_value(&data.meta).map_err(std::io::Error::other)?)?;
            let trace = cmd_train(&cfg.train)?;
            let lead = train::lead_time(&trace);
            write_trace(&dir, &trace, &lead)?;
            let summary = train_summary(&trace, &lead);
            match &trace.abort {
                Some(a) => Err(CliError::Abort(format!("step {}: {}\n{summary}", a.step, a.reason))),
                None => Ok(summary),
            }
        }
        Experiment::Sweep => {
            let result = cmd_sweep(&cfg.train, &cfg.sweep.seeds)?;
            let mut s = String::new();
            for trace in &result.traces {
                let lead = train::lead_time(trace);
                write_trace(&dir.join(format!("seed_{}", trace.config.seed)), trace, &lead)?;
                let rhos = trace.records.iter().map(|r| r.rho_j);
                s += &format!(
                    "seed {}: final loss {:.6}, rho [{:.4}, {:.4}], spikes {}{}\n",
                    trace.config.seed,
                    trace.final_loss().unwrap_or(f64::NAN),
                    rhos.clone().fold(f64::INFINITY, f64::min),
                    rhos.fold(f64::NEG_INFINITY, f64::max),
                    trace.spikes.len(),
                    if trace.abort.is_some() { " (aborted)" } else { "" }
                );
            }
            write_aggregate_csv(&result.rows, create(&dir, "sweep.csv")?)?;
            write_json(
                &dir,
                "sweep.json",
                &json!({
                    "config": cfg,
                    "seeds": cfg.sweep.seeds,
                    "incomplete": result.incomplete,
                    "rows": result.rows,
                    "generated_unix": unix_time(),
                }),
            )?;
            if result.incomplete {
                Err(CliError::Abort(format!("a seed aborted; aggregate incomplete\n{s}")))
            } else {
                Ok(s)
            }
        }
    }
}

/// Entry point shared by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = resolve_config(&cli)
        .map_err(CliError::from)
        .and_then(|cfg| execute(&cfg));
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
