use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Experiment, ExperimentSpec, OutputFormat, ProtocolName, OUT_DIR_ENV};
use crate::analysis::{
    closed_form_rate_ba_iid_rayleigh, closed_form_rate_conv_iid_rayleigh,
    conventional_rate_analytical, max_rate_analytical, solve_mu_star, QuadOptions, SolverOptions,
    MAX_CLOSED_FORM_RELAYS,
};
use crate::channel::FadingModel;
use crate::error::{Error, Result};
use crate::protocols::SelectionWeights;
use crate::simulator::{run_simulation, Protocol, RateReport, SimulationConfig};

/// One output line. Empty fields mean "not applicable at this point".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub snr_db: f64,
    pub m: usize,
    pub protocol: String,
    pub delay_target: Option<f64>,
    /// Set on trajectory rows of the convergence experiments.
    pub slot: Option<u64>,
    pub rate_sim: Option<f64>,
    pub rate_analytical: Option<f64>,
    pub rate_conventional_analytical: Option<f64>,
    pub delay: Option<f64>,
    pub flow_residual_max: Option<f64>,
    /// `;`-separated per-relay values.
    pub mu: String,
    pub mu_star: String,
    pub lambda: String,
    pub estimator_warning: bool,
    /// Non-empty when this point failed; the run carries on.
    pub error: String,
}

impl Row {
    fn new(experiment: Experiment, snr_db: f64, m: usize, protocol: &str) -> Self {
        Self {
            experiment: experiment.name().to_string(),
            snr_db,
            m,
            protocol: protocol.to_string(),
            delay_target: None,
            slot: None,
            rate_sim: None,
            rate_analytical: None,
            rate_conventional_analytical: None,
            delay: None,
            flow_residual_max: None,
            mu: String::new(),
            mu_star: String::new(),
            lambda: String::new(),
            estimator_warning: false,
            error: String::new(),
        }
    }

    fn failed(mut self, err: &Error) -> Self {
        self.error = err.to_string();
        self
    }

    fn with_report(mut self, r: &RateReport) -> Self {
        self.rate_sim = Some(r.avg_rate_sd);
        self.delay = r.avg_delay;
        self.flow_residual_max = Some(r.max_abs_flow_residual());
        self.estimator_warning = r.estimator_warning;
        self
    }

    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub rows: usize,
    pub error_rows: usize,
    pub data_file: PathBuf,
    pub spec: ExperimentSpec,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<Row>,
    pub error_rows: usize,
    pub data_path: PathBuf,
    pub manifest_path: PathBuf,
}

impl ExperimentOutcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.error_rows > 0)
    }
}

/// Where the data file goes: `spec.out`, else `<experiment>.<ext>` inside
/// `$BUFRELAY_OUT_DIR` (or the working directory).
pub fn output_path(spec: &ExperimentSpec) -> PathBuf {
    spec.out.clone().unwrap_or_else(|| {
        let dir = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."));
        dir.join(format!("{}.{}", spec.experiment.name(), spec.format.extension()))
    })
}

#[derive(Debug, Clone, Copy)]
struct Point {
    snr_db: f64,
    m: usize,
    delay_target: Option<f64>,
}

fn sweep_points(spec: &ExperimentSpec) -> Vec<Point> {
    let mut points = Vec::new();
    let mut push = |snr_db, m| match spec.experiment {
        Experiment::DelayConvergence => points.extend(spec.delay_targets.iter().map(|&t| Point {
            snr_db,
            m,
            delay_target: Some(t),
        })),
        _ => points.push(Point {
            snr_db,
            m,
            delay_target: None,
        }),
    };
    if spec.experiment == Experiment::RateVsM {
        for &m in &spec.relays {
            for &s in &spec.snr_db {
                push(s, m);
            }
        }
    } else {
        for &s in &spec.snr_db {
            for &m in &spec.relays {
                push(s, m);
            }
        }
    }
    points
}

/// Analytical rates at one model, solving for the optimal weights lazily.
struct Analytical<'a> {
    model: &'a FadingModel,
    mu_star: Option<Result<SelectionWeights, String>>,
}

impl<'a> Analytical<'a> {
    fn new(model: &'a FadingModel) -> Self {
        Self {
            model,
            mu_star: None,
        }
    }

    fn closed_form_ok(&self) -> bool {
        self.model.is_iid() && self.model.num_relays() <= MAX_CLOSED_FORM_RELAYS
    }

    fn mu_star(&mut self) -> Result<SelectionWeights> {
        let model = self.model;
        let cached = self.mu_star.get_or_insert_with(|| {
            solve_mu_star(model, &SolverOptions::default())
                .map(|s| s.weights())
                .map_err(|e| e.to_string())
        });
        cached.clone().map_err(Error::Domain)
    }

    fn buffer_aided(&mut self) -> Result<f64> {
        if self.closed_form_ok() {
            return closed_form_rate_ba_iid_rayleigh(self.model.num_relays(), self.model.avg_snr_sr(0));
        }
        let mu = self.mu_star()?;
        max_rate_analytical(self.model, &mu, QuadOptions::default())
    }

    fn conventional(&self) -> Result<f64> {
        if self.closed_form_ok() {
            return closed_form_rate_conv_iid_rayleigh(self.model.num_relays(), self.model.avg_snr_sr(0));
        }
        conventional_rate_analytical(self.model, QuadOptions::default())
    }
}

fn sim_config(spec: &ExperimentSpec, model: &FadingModel, protocol: Protocol, stride: u64) -> SimulationConfig {
    let mut cfg = SimulationConfig::new(model.clone(), protocol, spec.num_slots, spec.seed);
    cfg.mu_step = spec.mu_step;
    cfg.lambda_step = spec.lambda_step;
    cfg.metric_stride = stride;
    cfg
}

fn rate_rows(spec: &ExperimentSpec, p: Point, model: &FadingModel) -> Vec<Row> {
    let mut analytical = Analytical::new(model);
    let mut rows = Vec::new();
    for &name in &spec.protocols {
        let base = Row::new(spec.experiment, p.snr_db, p.m, name.name());
        let targets: Vec<Option<f64>> = if name == ProtocolName::DelayLimited {
            spec.delay_targets.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for t in targets {
            let mut row = base.clone();
            row.delay_target = t;
            let result = (|| -> Result<Row> {
                let protocol = match name {
                    ProtocolName::Conventional => {
                        row.rate_analytical = Some(analytical.conventional()?);
                        Protocol::Conventional
                    }
                    ProtocolName::Genie => {
                        let mu = analytical.mu_star()?;
                        row.mu_star = join(mu.as_slice());
                        row.rate_analytical = Some(analytical.buffer_aided()?);
                        Protocol::BufferAidedGenie { mu }
                    }
                    ProtocolName::Adaptive => {
                        row.rate_analytical = Some(analytical.buffer_aided()?);
                        Protocol::BufferAidedAdaptive
                    }
                    ProtocolName::MaxLink => {
                        if model.is_iid() {
                            row.rate_analytical = Some(analytical.buffer_aided()?);
                        }
                        Protocol::MaxLink
                    }
                    ProtocolName::DelayLimited => Protocol::DelayLimited {
                        delay_target: t.expect("delay-limited rows carry a target"),
                    },
                };
                let report = run_simulation(&sim_config(spec, model, protocol, 0))?;
                let mut row = row.clone().with_report(&report);
                match name {
                    ProtocolName::Adaptive => row.mu = join(&report.final_mu),
                    ProtocolName::DelayLimited => row.lambda = join(&report.final_lambda),
                    _ => {}
                }
                Ok(row)
            })();
            rows.push(result.unwrap_or_else(|e| row.failed(&e)));
        }
    }
    rows
}

fn trajectory_rows(spec: &ExperimentSpec, p: Point, model: &FadingModel) -> Result<Vec<Row>> {
    let (name, protocol, mu_star) = match p.delay_target {
        Some(t) => ("delay-limited", Protocol::DelayLimited { delay_target: t }, String::new()),
        None => {
            let mu = Analytical::new(model).mu_star()?;
            ("adaptive", Protocol::BufferAidedAdaptive, join(mu.as_slice()))
        }
    };
    let stride = spec.metric_stride.clamp(1, spec.num_slots);
    let report = run_simulation(&sim_config(spec, model, protocol, stride))?;
    Ok(report
        .trajectory
        .iter()
        .map(|s| {
            let mut row = Row::new(spec.experiment, p.snr_db, p.m, name);
            row.delay_target = p.delay_target;
            row.slot = Some(s.slot);
            row.rate_sim = Some(s.running_rate);
            row.delay = s.running_delay;
            if p.delay_target.is_some() {
                row.lambda = join(&s.lambda_est);
            } else {
                row.mu = join(&s.mu_est);
            }
            row.mu_star = mu_star.clone();
            row.estimator_warning = report.estimator_warning;
            row
        })
        .collect())
}

fn analytical_row(spec: &ExperimentSpec, p: Point, model: &FadingModel) -> Row {
    let mut row = Row::new(spec.experiment, p.snr_db, p.m, "analytical");
    let mut a = Analytical::new(model);
    let result = (|| -> Result<()> {
        if !a.closed_form_ok() {
            row.mu_star = join(a.mu_star()?.as_slice());
        }
        row.rate_analytical = Some(a.buffer_aided()?);
        row.rate_conventional_analytical = Some(a.conventional()?);
        Ok(())
    })();
    match result {
        Ok(()) => row,
        Err(e) => row.failed(&e),
    }
}

fn run_point(spec: &ExperimentSpec, p: Point) -> Vec<Row> {
    let model = match spec.model(p.m, p.snr_db) {
        Ok(m) => m,
        Err(e) => return vec![Row::new(spec.experiment, p.snr_db, p.m, "").failed(&e)],
    };
    match spec.experiment {
        Experiment::RateVsSnr | Experiment::RateVsM => rate_rows(spec, p, &model),
        Experiment::AnalyticalOnly => vec![analytical_row(spec, p, &model)],
        Experiment::MuConvergence | Experiment::DelayConvergence => {
            trajectory_rows(spec, p, &model).unwrap_or_else(|e| {
                let name = if p.delay_target.is_some() { "delay-limited" } else { "adaptive" };
                let mut row = Row::new(spec.experiment, p.snr_db, p.m, name);
                row.delay_target = p.delay_target;
                vec![row.failed(&e)]
            })
        }
    }
}

/// Computes every row in sweep order without touching the filesystem.
pub fn compute_rows(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<Row>> {
    spec.validate()?;
    let points = sweep_points(spec);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    // collect() on an indexed parallel iterator keeps sweep order
    let rows: Vec<Vec<Row>> = pool.install(|| points.par_iter().map(|&p| run_point(spec, p)).collect());
    Ok(rows.into_iter().flatten().collect())
}

fn write_rows(path: &Path, format: OutputFormat, rows: &[Row]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        OutputFormat::Records => {
            let mut w = BufWriter::new(File::create(path)?);
            for row in rows {
                serde_json::to_writer(&mut w, row)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Runs the sweep, writes the data file and a `<data>.manifest.json` beside it.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<ExperimentOutcome> {
    let rows = compute_rows(spec, jobs)?;
    let data_path = output_path(spec);
    write_rows(&data_path, spec.format, &rows)?;

    let error_rows = rows.iter().filter(|r| r.is_error()).count();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: spec.experiment.name().to_string(),
        seed: spec.seed,
        config_hash: spec.config_hash(),
        rows: rows.len(),
        error_rows,
        data_file: data_path.clone(),
        spec: spec.clone(),
    };
    let mut manifest_path = data_path.clone().into_os_string();
    manifest_path.push(".manifest.json");
    let manifest_path = PathBuf::from(manifest_path);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;

    Ok(ExperimentOutcome {
        rows,
        error_rows,
        data_path,
        manifest_path,
    })
}
