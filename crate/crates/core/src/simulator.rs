//! Slot-by-slot Monte-Carlo driver and the metrics derived from it.
//!
//! One run is strictly sequential: each slot samples the fading, lets the
//! protocol pick a relay and direction, applies the queue update, advances the
//! protocol's estimators, and folds the slot into streaming averages. Runs
//! with different configurations share nothing and can execute in parallel.

use serde::{Deserialize, Serialize};

use crate::analysis::{solve_mu_star, SolverOptions};
use crate::channel::{sample_slot_into, FadingModel, RandomStream, SlotRealization};
use crate::error::{Error, Result};
use crate::protocols::{
    select_buffer_aided, select_conventional, select_delay_limited, select_max_link, Mode,
    NetworkState, SelectionWeights, StepSize, MU_CLAMP,
};

/// Relay selection protocol driven by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    /// No buffering: best bottleneck relay, half a slot each way.
    Conventional,
    /// Weighted argmax with fixed, externally supplied weights.
    BufferAidedGenie { mu: SelectionWeights },
    /// Weighted argmax with weights learned online.
    BufferAidedAdaptive,
    /// Strongest of all `2M` links.
    MaxLink,
    /// Timer-based selection tracking an average delay target (slots).
    DelayLimited { delay_target: f64 },
}

impl Protocol {
    /// Genie protocol at the weights that balance every relay's flow.
    pub fn genie_optimal(model: &FadingModel) -> Result<Self> {
        let sol = solve_mu_star(model, &SolverOptions::default())?;
        Ok(Protocol::BufferAidedGenie { mu: sol.weights() })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Conventional => "conventional",
            Protocol::BufferAidedGenie { .. } => "genie",
            Protocol::BufferAidedAdaptive => "adaptive",
            Protocol::MaxLink => "max-link",
            Protocol::DelayLimited { .. } => "delay-limited",
        }
    }

    fn is_buffered(&self) -> bool {
        !matches!(self, Protocol::Conventional)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: FadingModel,
    pub protocol: Protocol,
    pub num_slots: u64,
    pub seed: u64,
    /// Overrides the `μ` estimator step, default `0.1 / sqrt(i)`.
    pub mu_step: Option<StepSize>,
    /// Overrides the `λ` step, default `0.005 / sqrt(i) / log2(1 + P/σ²)`.
    pub lambda_step: Option<StepSize>,
    /// Trajectory snapshot interval in slots; 0 disables snapshots.
    pub metric_stride: u64,
    /// Slots excluded from the reported averages (estimators still run).
    pub burn_in: u64,
    /// Keep the per-slot selections in the report.
    pub record_trace: bool,
}

impl SimulationConfig {
    pub fn new(model: FadingModel, protocol: Protocol, num_slots: u64, seed: u64) -> Self {
        Self {
            model,
            protocol,
            num_slots,
            seed,
            mu_step: None,
            lambda_step: None,
            metric_stride: 0,
            burn_in: 0,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_slots == 0 {
            return Err(Error::Config("num_slots must be at least 1".into()));
        }
        if self.burn_in >= self.num_slots {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than num_slots ({})",
                self.burn_in, self.num_slots
            )));
        }
        match &self.protocol {
            Protocol::BufferAidedGenie { mu } if mu.len() != self.model.num_relays() => {
                Err(Error::Config(format!(
                    "genie weights have {} entries for {} relays",
                    mu.len(),
                    self.model.num_relays()
                )))
            }
            Protocol::DelayLimited { delay_target } if delay_target.is_nan() || *delay_target <= 0.0 => Err(
                Error::Config(format!("delay target must be positive, got {delay_target}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Running metrics at one point of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub slot: u64,
    pub running_rate: f64,
    pub running_delay: Option<f64>,
    pub mu_est: Vec<f64>,
    pub lambda_est: Vec<f64>,
    /// `|received - delivered - Σ Q_k|` accumulated since slot 1.
    pub conservation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub protocol: String,
    pub num_slots: u64,
    /// Slots included in the averages (`num_slots - burn_in`).
    pub averaged_slots: u64,
    /// `R̄_SD`, bits/symbol per slot.
    pub avg_rate_sd: f64,
    /// `R̄_Sk` per relay.
    pub per_relay_arrival: Vec<f64>,
    /// `R̄_kD` per relay.
    pub per_relay_departure: Vec<f64>,
    /// `R̄_Sk - R̄_kD` per relay.
    pub flow_residuals: Vec<f64>,
    /// `Q̄_k` per relay.
    pub avg_queue: Vec<f64>,
    /// `Σ Q̄_k / Σ R̄_Sk` in slots; `None` if nothing arrived.
    pub avg_delay: Option<f64>,
    pub final_queues: Vec<f64>,
    pub final_mu: Vec<f64>,
    pub final_lambda: Vec<f64>,
    /// Largest bit-conservation mismatch seen at any snapshot or at the end.
    pub conservation_error: f64,
    /// Fraction of slots in which some `μ_k` estimate sat on its clamp.
    pub mu_pinned_fraction: f64,
    /// Set when `μ` estimates were pinned for more than half of the slots.
    pub estimator_warning: bool,
    pub trajectory: Vec<Snapshot>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<(usize, Mode)>>,
}

impl RateReport {
    pub fn max_abs_flow_residual(&self) -> f64 {
        self.flow_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Little's-law delay: total average queue over total average arrival rate.
pub fn average_delay(sum_avg_queues: f64, sum_arrival_rates: f64) -> Result<f64> {
    if sum_arrival_rates > 0.0 {
        Ok(sum_avg_queues / sum_arrival_rates)
    } else {
        Err(Error::UndefinedDelay)
    }
}

struct Accumulators {
    arrivals: Vec<f64>,
    departures: Vec<f64>,
    queue_sums: Vec<f64>,
    slots: u64,
}

impl Accumulators {
    fn new(m: usize) -> Self {
        Self {
            arrivals: vec![0.0; m],
            departures: vec![0.0; m],
            queue_sums: vec![0.0; m],
            slots: 0,
        }
    }

    fn rate(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.departures.iter().sum::<f64>() / self.slots as f64
        }
    }

    fn delay(&self, buffered: bool) -> Option<f64> {
        if !buffered {
            // delivered within the slot it left the source
            return (self.arrivals.iter().sum::<f64>() > 0.0).then_some(1.0);
        }
        average_delay(self.queue_sums.iter().sum(), self.arrivals.iter().sum()).ok()
    }
}

/// Runs one simulation. Deterministic in `(config, seed)`.
pub fn run_simulation(config: &SimulationConfig) -> Result<RateReport> {
    config.validate()?;
    let model = &config.model;
    let m = model.num_relays();
    let mut stream = RandomStream::new(config.seed, m);
    let mut slot = SlotRealization::from_snrs(0, vec![0.0; m], vec![0.0; m])?;
    let mut state = NetworkState::new(m);
    let mut acc = Accumulators::new(m);
    let buffered = config.protocol.is_buffered();

    let mu_step = config.mu_step.unwrap_or_else(StepSize::default_mu);
    let lambda_step = config
        .lambda_step
        .unwrap_or_else(|| StepSize::default_lambda(model.snr_ref()));

    let mut received_total = 0.0;
    let mut delivered_total = 0.0;
    let mut conservation_error: f64 = 0.0;
    let mut pinned_slots = 0u64;
    let mut trajectory = Vec::new();
    let mut trace = config.record_trace.then(Vec::new);

    for i in 1..=config.num_slots {
        sample_slot_into(model, &mut stream, &mut slot);

        let (relay, mode, received, delivered) = match &config.protocol {
            Protocol::Conventional => {
                let (k, rate) = select_conventional(&slot);
                (k, Mode::Transmit, rate, rate)
            }
            protocol => {
                let selection = match protocol {
                    Protocol::BufferAidedGenie { mu } => select_buffer_aided(&slot, mu.as_slice()),
                    Protocol::BufferAidedAdaptive => {
                        state.update_mu_estimate(&mu_step);
                        if state
                            .mu_est
                            .iter()
                            .any(|&mu| mu <= MU_CLAMP.0 || mu >= MU_CLAMP.1)
                        {
                            pinned_slots += 1;
                        }
                        select_buffer_aided(&slot, &state.mu_est)
                    }
                    Protocol::MaxLink => select_max_link(&slot),
                    Protocol::DelayLimited { delay_target } => {
                        state.update_lambda(*delay_target, &lambda_step);
                        select_delay_limited(&slot, &state)
                    }
                    Protocol::Conventional => unreachable!(),
                };
                let decision = state.apply_decision(selection, &slot)?;
                state.update_rate_estimates(selection, &slot);
                (
                    decision.relay,
                    decision.mode,
                    decision.bits_received(),
                    decision.bits_delivered(),
                )
            }
        };

        received_total += received;
        delivered_total += delivered;
        if let Some(t) = trace.as_mut() {
            t.push((relay, mode));
        }

        if i > config.burn_in {
            acc.slots += 1;
            acc.arrivals[relay] += received;
            acc.departures[relay] += delivered;
            for (sum, q) in acc.queue_sums.iter_mut().zip(&state.queues) {
                *sum += q;
            }
        }

        let snapshot_due = config.metric_stride > 0 && i % config.metric_stride == 0;
        if snapshot_due || i == config.num_slots {
            let err = (received_total - delivered_total - state.total_queue()).abs();
            conservation_error = conservation_error.max(err);
            if snapshot_due {
                trajectory.push(Snapshot {
                    slot: i,
                    running_rate: acc.rate(),
                    running_delay: acc.delay(buffered),
                    mu_est: state.mu_est.clone(),
                    lambda_est: state.lambda_est.clone(),
                    conservation_error: err,
                });
            }
        }
    }

    let n = acc.slots as f64;
    let per_relay_arrival: Vec<f64> = acc.arrivals.iter().map(|a| a / n).collect();
    let per_relay_departure: Vec<f64> = acc.departures.iter().map(|d| d / n).collect();
    let flow_residuals = per_relay_arrival
        .iter()
        .zip(&per_relay_departure)
        .map(|(a, d)| a - d)
        .collect();
    let mu_pinned_fraction = pinned_slots as f64 / config.num_slots as f64;

    Ok(RateReport {
        protocol: config.protocol.name().to_string(),
        num_slots: config.num_slots,
        averaged_slots: acc.slots,
        avg_rate_sd: acc.rate(),
        per_relay_arrival,
        per_relay_departure,
        flow_residuals,
        avg_queue: acc.queue_sums.iter().map(|q| q / n).collect(),
        avg_delay: acc.delay(buffered),
        final_queues: state.queues.clone(),
        final_mu: state.mu_est.clone(),
        final_lambda: state.lambda_est.clone(),
        conservation_error,
        mu_pinned_fraction,
        estimator_warning: mu_pinned_fraction > 0.5,
        trajectory,
        trace,
    })
}

/// How the selection is coordinated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Implementation {
    /// The destination gathers all CSI and broadcasts the decision.
    Centralized,
    /// Relays run timers and the first to expire claims the slot.
    Distributed,
}

/// Pilot, feedback and control transmissions per slot.
///
/// The counts are the same for conventional and every buffer-aided protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalingOverhead {
    /// `2M + 4` transmissions, or `2M + 5` when the selected relay must also
    /// feed back its relay-to-destination CSI.
    Centralized { base: u32, with_feedback: u32 },
    Distributed(u32),
}

impl SignalingOverhead {
    /// Transmission count, with or without the relay-dependent extra feedback.
    pub fn count(&self, extra_feedback: bool) -> u32 {
        match *self {
            SignalingOverhead::Centralized {
                base,
                with_feedback,
            } => {
                if extra_feedback {
                    with_feedback
                } else {
                    base
                }
            }
            SignalingOverhead::Distributed(n) => n,
        }
    }
}

pub fn signaling_overhead(num_relays: u32, implementation: Implementation) -> Result<SignalingOverhead> {
    if num_relays == 0 {
        return Err(Error::Domain("overhead needs at least one relay".into()));
    }
    Ok(match implementation {
        // 2M + 2 pilots, two control packets, optional CSI feedback
        Implementation::Centralized => SignalingOverhead::Centralized {
            base: 2 * num_relays + 4,
            with_feedback: 2 * num_relays + 5,
        },
        // two pilots, the winner's pilot/control packet, one CSI feedback
        Implementation::Distributed => SignalingOverhead::Distributed(4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid(m: usize, snr: f64) -> FadingModel {
        FadingModel::iid_avg_snr(m, snr).unwrap()
    }

    #[test]
    fn delay_ratio() {
        assert_eq!(average_delay(5.0, 1.0).unwrap(), 5.0);
        assert_eq!(average_delay(10.0, 1.0).unwrap(), 2.0 * average_delay(5.0, 1.0).unwrap());
        assert!(matches!(average_delay(1.0, 0.0), Err(Error::UndefinedDelay)));
    }

    #[test]
    fn overhead_counts() {
        assert_eq!(
            signaling_overhead(5, Implementation::Centralized).unwrap(),
            SignalingOverhead::Centralized {
                base: 14,
                with_feedback: 15
            }
        );
        let one = signaling_overhead(1, Implementation::Centralized).unwrap();
        assert_eq!((one.count(false), one.count(true)), (6, 7));
        assert_eq!(
            signaling_overhead(7, Implementation::Distributed).unwrap().count(true),
            4
        );
        assert!(signaling_overhead(0, Implementation::Distributed).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimulationConfig::new(iid(2, 1.0), Protocol::MaxLink, 0, 1);
        assert!(run_simulation(&cfg).is_err());
        cfg.num_slots = 10;
        cfg.protocol = Protocol::DelayLimited { delay_target: 0.0 };
        assert!(cfg.validate().is_err());
        cfg.protocol = Protocol::BufferAidedGenie {
            mu: SelectionWeights::uniform(3),
        };
        assert!(cfg.validate().is_err());
        cfg.protocol = Protocol::MaxLink;
        cfg.burn_in = 10;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_same_report() {
        let mut cfg = SimulationConfig::new(
            FadingModel::new(3.0, vec![0.5, 2.0], vec![1.5, 0.7]).unwrap(),
            Protocol::BufferAidedAdaptive,
            5_000,
            42,
        );
        cfg.metric_stride = 500;
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trajectory.len(), 10);
    }

    #[test]
    fn rate_equals_sum_of_departures() {
        let cfg = SimulationConfig::new(iid(3, 10.0), Protocol::MaxLink, 20_000, 3);
        let r = run_simulation(&cfg).unwrap();
        let sum: f64 = r.per_relay_departure.iter().sum();
        assert!((sum - r.avg_rate_sd).abs() < 1e-12);
        assert!(r.avg_delay.unwrap() >= 1.0);
        assert!(r.conservation_error < 1e-9 * 20_000.0);
    }

    #[test]
    fn conventional_has_no_backlog() {
        let cfg = SimulationConfig::new(iid(2, 10.0), Protocol::Conventional, 1_000, 3);
        let r = run_simulation(&cfg).unwrap();
        assert!(r.final_queues.iter().all(|q| *q == 0.0));
        assert_eq!(r.avg_delay, Some(1.0));
        assert_eq!(r.max_abs_flow_residual(), 0.0);
    }

    #[test]
    fn burn_in_shortens_the_average() {
        let mut cfg = SimulationConfig::new(iid(1, 1.0), Protocol::MaxLink, 1_000, 9);
        cfg.burn_in = 400;
        let r = run_simulation(&cfg).unwrap();
        assert_eq!(r.averaged_slots, 600);
    }

    #[test]
    fn trace_is_recorded_on_request() {
        let mut cfg = SimulationConfig::new(iid(2, 1.0), Protocol::MaxLink, 50, 9);
        cfg.record_trace = true;
        let r = run_simulation(&cfg).unwrap();
        assert_eq!(r.trace.unwrap().len(), 50);
    }
}
