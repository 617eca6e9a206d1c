//! Experiment runner behind the `bufrelay` binary.
//!
//! An [`ExperimentSpec`] is read from an optional TOML file, then individual
//! command-line flags override its fields. SNRs are given in dB and converted
//! to linear scale internally.

mod runner;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, FadingModel};
use crate::error::{Error, Result};
use crate::protocols::StepSize;

pub use runner::{compute_rows, output_path, run_experiment, ExperimentOutcome, Manifest, Row};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BUFRELAY_OUT_DIR";

pub const DEFAULT_NUM_SLOTS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Rate per protocol over an SNR sweep.
    #[default]
    RateVsSnr,
    /// Trajectory of the adaptive weight estimates.
    MuConvergence,
    /// Running delay of the delay-limited protocol.
    DelayConvergence,
    /// Rate per protocol over a relay-count sweep.
    RateVsM,
    /// Closed-form / numerical rates, no simulation.
    AnalyticalOnly,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::RateVsSnr => "rate-vs-snr",
            Experiment::MuConvergence => "mu-convergence",
            Experiment::DelayConvergence => "delay-convergence",
            Experiment::RateVsM => "rate-vs-m",
            Experiment::AnalyticalOnly => "analytical-only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Conventional,
    /// Buffer-aided selection at the solver's optimal weights.
    Genie,
    Adaptive,
    MaxLink,
    /// One run per entry of the delay-target list.
    DelayLimited,
}

impl ProtocolName {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolName::Conventional => "conventional",
            ProtocolName::Genie => "genie",
            ProtocolName::Adaptive => "adaptive",
            ProtocolName::MaxLink => "max-link",
            ProtocolName::DelayLimited => "delay-limited",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    /// One JSON object per line.
    Records,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Records => "jsonl",
        }
    }
}

/// A full experiment description. Every field has a default, so an empty
/// file is a valid spec: i.i.d. fading, one relay, 10 dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    /// Transmit SNR `P/σ²` in dB.
    pub snr_db: Vec<f64>,
    pub relays: Vec<usize>,
    pub protocols: Vec<ProtocolName>,
    /// Delay targets `T0` in slots, used by the delay-limited protocol.
    pub delay_targets: Vec<f64>,
    /// Mean gains of the source-relay links; all ones when absent.
    pub omega_sr: Option<Vec<f64>>,
    /// Mean gains of the relay-destination links; all ones when absent.
    pub omega_rd: Option<Vec<f64>>,
    pub num_slots: u64,
    pub seed: u64,
    /// Snapshot interval for the convergence experiments.
    pub metric_stride: u64,
    pub mu_step: Option<StepSize>,
    pub lambda_step: Option<StepSize>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            experiment: Experiment::default(),
            snr_db: vec![10.0],
            relays: vec![1],
            protocols: vec![ProtocolName::Conventional, ProtocolName::Genie],
            delay_targets: vec![5.0],
            omega_sr: None,
            omega_rd: None,
            num_slots: DEFAULT_NUM_SLOTS,
            seed: DEFAULT_SEED,
            metric_stride: 1000,
            mu_step: None,
            lambda_step: None,
            out: None,
            format: OutputFormat::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        fn non_empty<T>(field: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                Err(Error::Config(format!("`{field}` must not be empty")))
            } else {
                Ok(())
            }
        }
        non_empty("snr_db", &self.snr_db)?;
        non_empty("relays", &self.relays)?;
        non_empty("protocols", &self.protocols)?;
        if self.protocols.contains(&ProtocolName::DelayLimited)
            || self.experiment == Experiment::DelayConvergence
        {
            non_empty("delay_targets", &self.delay_targets)?;
        }
        if let Some(bad) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("`snr_db` entry {bad} is not finite")));
        }
        if self.relays.contains(&0) {
            return Err(Error::Config("`relays` entries must be at least 1".into()));
        }
        if let Some(bad) = self.delay_targets.iter().find(|t| t.is_nan() || **t <= 0.0) {
            return Err(Error::Config(format!("`delay_targets` entry {bad} must be positive")));
        }
        if self.num_slots == 0 {
            return Err(Error::Config("`num_slots` must be at least 1".into()));
        }
        for (field, omega) in [("omega_sr", &self.omega_sr), ("omega_rd", &self.omega_rd)] {
            let Some(omega) = omega else { continue };
            if let Some(&m) = self.relays.iter().find(|&&m| m != omega.len()) {
                return Err(Error::Config(format!(
                    "`{field}` has {} entries but `relays` contains {m}",
                    omega.len()
                )));
            }
            if let Some(bad) = omega.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
                return Err(Error::Config(format!("`{field}` entry {bad} must be positive")));
            }
        }
        Ok(())
    }

    /// Linear transmit SNRs, `10^(dB/10)`.
    pub fn snr_linear(&self) -> Vec<f64> {
        self.snr_db.iter().map(|&db| db_to_linear(db)).collect()
    }

    /// Fading model for `m` relays at `snr_db`.
    pub fn model(&self, m: usize, snr_db: f64) -> Result<FadingModel> {
        let ones = || vec![1.0; m];
        FadingModel::new(
            db_to_linear(snr_db),
            self.omega_sr.clone().unwrap_or_else(ones),
            self.omega_rd.clone().unwrap_or_else(ones),
        )
    }

    /// SHA-256 of the spec's canonical JSON form, with the output path left out.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut canonical = self.clone();
        canonical.out = None;
        let json = serde_json::to_vec(&canonical).expect("spec is always serializable");
        hex::encode(Sha256::digest(&json))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "bufrelay", version, about = "Buffer-aided relay selection experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo experiment sweep.
    Simulate(SweepArgs),
    /// Evaluate the analytical rates only.
    Analyze(SweepArgs),
    /// Run the built-in acceptance checks and print a pass/fail table.
    Verify {
        /// Run only these criteria (1-11).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

/// Flags shared by `simulate` and `analyze`; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// TOML experiment spec.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// Transmit SNRs in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_db: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub relays: Option<Vec<usize>>,
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub protocol: Option<Vec<ProtocolName>>,
    /// Delay targets in slots.
    #[arg(long, value_delimiter = ',')]
    pub delay_target: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub omega_sr: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub omega_rd: Option<Vec<f64>>,
    /// Output file; defaults to `<experiment>.<ext>` in $BUFRELAY_OUT_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Reads the spec from `path` (if any) and applies the flag overrides.
pub fn parse_config(path: Option<&Path>, flags: &SweepArgs) -> Result<ExperimentSpec> {
    let mut spec = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ExperimentSpec::from_toml(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentSpec::default(),
    };

    macro_rules! take {
        ($flag:ident => $field:ident) => {
            if let Some(v) = &flags.$flag {
                spec.$field = v.clone();
            }
        };
    }
    take!(experiment => experiment);
    take!(snr_db => snr_db);
    take!(relays => relays);
    take!(slots => num_slots);
    take!(seed => seed);
    take!(protocol => protocols);
    take!(delay_target => delay_targets);
    take!(format => format);
    if flags.omega_sr.is_some() {
        spec.omega_sr = flags.omega_sr.clone();
    }
    if flags.omega_rd.is_some() {
        spec.omega_rd = flags.omega_rd.clone();
    }
    if flags.out.is_some() {
        spec.out = flags.out.clone();
    }

    spec.validate()?;
    Ok(spec)
}
