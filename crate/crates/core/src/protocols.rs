//! Per-slot relay selection rules, queue dynamics and online estimators.
//!
//! Relays are indexed from zero. Queue contents and rates are both measured
//! in normalized bits/symbol, so a capacity can be added to or taken from a
//! queue directly.

use serde::{Deserialize, Serialize};

use crate::channel::SlotRealization;
use crate::error::{Error, Result};

/// Lower and upper bound applied to every `μ_k` estimate.
pub const MU_CLAMP: (f64, f64) = (1e-3, 1.0 - 1e-3);

/// Floor applied to the delay-control variables `λ_k`.
pub const LAMBDA_MIN: f64 = 1e-3;

/// Initial value of every `μ_k` estimate.
pub const MU_INIT: f64 = 0.5;

/// Initial value of every `λ_k`.
pub const LAMBDA_INIT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Receive,
    Transmit,
}

/// Which relay is active in a slot and in which direction.
///
/// Exactly one relay is active per slot; the other relays neither receive
/// nor transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Selection {
    pub relay: usize,
    pub mode: Mode,
}

impl Selection {
    pub fn receive(relay: usize) -> Self {
        Self {
            relay,
            mode: Mode::Receive,
        }
    }

    pub fn transmit(relay: usize) -> Self {
        Self {
            relay,
            mode: Mode::Transmit,
        }
    }
}

/// A selection together with the rate actually used in the slot.
///
/// `rate` is `C_Sk(i)` for a reception and `min{Q_k(i-1), C_kD(i)}` for a
/// transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub relay: usize,
    pub mode: Mode,
    pub rate: f64,
}

impl Decision {
    pub fn selection(&self) -> Selection {
        Selection {
            relay: self.relay,
            mode: self.mode,
        }
    }

    pub fn bits_received(&self) -> f64 {
        match self.mode {
            Mode::Receive => self.rate,
            Mode::Transmit => 0.0,
        }
    }

    pub fn bits_delivered(&self) -> f64 {
        match self.mode {
            Mode::Receive => 0.0,
            Mode::Transmit => self.rate,
        }
    }
}

/// The weights `μ_k` that scale source-side capacities in the selection set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SelectionWeights(Vec<f64>);

impl SelectionWeights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::Domain("selection weights need at least one relay".into()));
        }
        if let Some(m) = mu.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
            return Err(Error::Domain(format!(
                "selection weight must lie in (0, 1), got {m}"
            )));
        }
        Ok(Self(mu))
    }

    /// `μ_k = 1/2` for every relay.
    pub fn uniform(num_relays: usize) -> Self {
        Self(vec![0.5; num_relays])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for SelectionWeights {
    type Error = Error;

    fn try_from(mu: Vec<f64>) -> Result<Self> {
        Self::new(mu)
    }
}

impl From<SelectionWeights> for Vec<f64> {
    fn from(w: SelectionWeights) -> Self {
        w.0
    }
}

/// Step-size schedule of a stochastic-approximation recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSize {
    /// `scale / sqrt(i)`.
    InvSqrt { scale: f64 },
    Constant { value: f64 },
}

impl StepSize {
    /// Step used in slot `i` (1-based).
    pub fn at(&self, slot: u64) -> f64 {
        match *self {
            StepSize::InvSqrt { scale } => scale / (slot.max(1) as f64).sqrt(),
            StepSize::Constant { value } => value,
        }
    }

    /// Default schedule for the `μ_k` estimator, `0.1 / sqrt(i)`.
    pub fn default_mu() -> Self {
        StepSize::InvSqrt { scale: 0.1 }
    }

    /// Default schedule for `λ_k`, `0.005 / sqrt(i) / log2(1 + P/σ²)`.
    pub fn default_lambda(snr_ref: f64) -> Self {
        StepSize::InvSqrt {
            scale: 0.005 / snr_ref.ln_1p() * std::f64::consts::LN_2,
        }
    }
}

/// Per-relay buffer contents and estimator state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub queues: Vec<f64>,
    pub mu_est: Vec<f64>,
    pub lambda_est: Vec<f64>,
    pub arrival_rate_est: Vec<f64>,
    pub departure_rate_est: Vec<f64>,
    /// Number of slots folded into the rate estimates.
    pub slot_count: u64,
}

impl NetworkState {
    pub fn new(num_relays: usize) -> Self {
        Self {
            queues: vec![0.0; num_relays],
            mu_est: vec![MU_INIT; num_relays],
            lambda_est: vec![LAMBDA_INIT; num_relays],
            arrival_rate_est: vec![0.0; num_relays],
            departure_rate_est: vec![0.0; num_relays],
            slot_count: 0,
        }
    }

    pub fn num_relays(&self) -> usize {
        self.queues.len()
    }

    pub fn total_queue(&self) -> f64 {
        self.queues.iter().sum()
    }

    /// Executes `selection` on the buffers and returns the realized decision.
    ///
    /// A reception adds `C_Sk(i)` to `Q_k`; a transmission removes
    /// `min{Q_k, C_kD(i)}`. Other queues are untouched.
    pub fn apply_decision(&mut self, selection: Selection, slot: &SlotRealization) -> Result<Decision> {
        let k = selection.relay;
        if k >= self.num_relays() {
            return Err(Error::RelayIndex {
                index: k,
                num_relays: self.num_relays(),
            });
        }
        let rate = match selection.mode {
            Mode::Receive => {
                let c = slot.capacity_sr(k);
                self.queues[k] += c;
                c
            }
            Mode::Transmit => {
                let r = self.queues[k].min(slot.capacity_rd(k));
                self.queues[k] -= r;
                // r == Q_k leaves an exact zero; guard against -0.0 anyway
                if self.queues[k] <= 0.0 {
                    self.queues[k] = 0.0;
                }
                r
            }
        };
        Ok(Decision {
            relay: k,
            mode: selection.mode,
            rate,
        })
    }

    /// Folds slot `i = slot_count + 1` into the running rate estimates.
    ///
    /// Both estimates use the full link capacity of the chosen link, so the
    /// departure estimate counts `C_kD(i)` even when the queue held less.
    pub fn update_rate_estimates(&mut self, selection: Selection, slot: &SlotRealization) {
        self.slot_count += 1;
        let i = self.slot_count as f64;
        let keep = (i - 1.0) / i;
        for k in 0..self.num_relays() {
            let (r, t) = if selection.relay == k {
                match selection.mode {
                    Mode::Receive => (slot.capacity_sr(k), 0.0),
                    Mode::Transmit => (0.0, slot.capacity_rd(k)),
                }
            } else {
                (0.0, 0.0)
            };
            self.arrival_rate_est[k] = keep * self.arrival_rate_est[k] + r / i;
            self.departure_rate_est[k] = keep * self.departure_rate_est[k] + t / i;
        }
    }

    /// Gradient step on the `μ_k` estimates for the upcoming slot.
    ///
    /// Relays whose departure estimate exceeds their arrival estimate get a
    /// larger weight on reception. No-op before the first slot.
    pub fn update_mu_estimate(&mut self, step: &StepSize) {
        if self.slot_count == 0 {
            return;
        }
        let i = self.slot_count + 1;
        let delta = step.at(i);
        for k in 0..self.num_relays() {
            let grad = self.departure_rate_est[k] - self.arrival_rate_est[k];
            self.mu_est[k] = (self.mu_est[k] + delta * grad).clamp(MU_CLAMP.0, MU_CLAMP.1);
        }
    }

    /// Delay-control update of `λ_k` for the upcoming slot.
    ///
    /// `λ_k` falls when the queue-to-arrival ratio exceeds the target, which
    /// favours transmission from that relay. A relay that has never received
    /// has ratio zero. No-op before the first slot, so `λ_k(1)` is the initial
    /// value.
    pub fn update_lambda(&mut self, delay_target: f64, step: &StepSize) {
        if self.slot_count == 0 {
            return;
        }
        let i = self.slot_count + 1;
        let zeta = step.at(i);
        for k in 0..self.num_relays() {
            let ratio = if self.arrival_rate_est[k] > 0.0 {
                self.queues[k] / self.arrival_rate_est[k]
            } else {
                0.0
            };
            self.lambda_est[k] =
                (self.lambda_est[k] + zeta * (delay_target - ratio)).max(LAMBDA_MIN);
        }
    }
}

/// Conventional (non-buffered) selection: the relay with the best bottleneck
/// `min{C_Sk, C_kD}` forwards within the slot at half that rate.
///
/// Returns the selected relay and the end-to-end rate of the slot.
pub fn select_conventional(slot: &SlotRealization) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for k in 0..slot.num_relays() {
        let bottleneck = slot.capacity_sr(k).min(slot.capacity_rd(k));
        if bottleneck > best.1 {
            best = (k, bottleneck);
        }
    }
    (best.0, 0.5 * best.1)
}

/// Argmax over interleaved `(receive, transmit)` scores per relay.
///
/// Scanning relays in order and receive before transmit with a strict `>`
/// gives the lowest-index, receive-first tie-break.
#[inline]
fn argmax_scores(num_relays: usize, mut score: impl FnMut(usize) -> (f64, f64)) -> Selection {
    let mut best = Selection::receive(0);
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..num_relays {
        let (rx, tx) = score(k);
        if rx > best_val {
            best_val = rx;
            best = Selection::receive(k);
        }
        if tx > best_val {
            best_val = tx;
            best = Selection::transmit(k);
        }
    }
    best
}

/// Optimal buffer-aided selection for fixed weights: the largest element of
/// `{μ_k C_Sk(i)} ∪ {(1 - μ_k) C_kD(i)}` decides relay and direction.
pub fn select_buffer_aided(slot: &SlotRealization, weights: &[f64]) -> Selection {
    debug_assert_eq!(weights.len(), slot.num_relays());
    argmax_scores(slot.num_relays(), |k| {
        let mu = weights[k];
        (mu * slot.capacity_sr(k), (1.0 - mu) * slot.capacity_rd(k))
    })
}

/// Max-link selection: the strongest of all `2M` links, regardless of buffer
/// state.
pub fn select_max_link(slot: &SlotRealization) -> Selection {
    argmax_scores(slot.num_relays(), |k| (slot.capacity_sr(k), slot.capacity_rd(k)))
}

/// Delay-limited selection.
///
/// Relay `k` bids `max{λ_k C_Sk, min{Q_k, C_kD} / λ_k}`; the highest bid wins
/// (equivalently, the shortest timer `1 / bid` expires first). The relay
/// receives if the first term is the larger one.
pub fn select_delay_limited(slot: &SlotRealization, state: &NetworkState) -> Selection {
    let mut best = Selection::receive(0);
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..slot.num_relays() {
        let lambda = state.lambda_est[k];
        let rx = lambda * slot.capacity_sr(k);
        let tx = state.queues[k].min(slot.capacity_rd(k)) / lambda;
        let (val, sel) = if rx >= tx {
            (rx, Selection::receive(k))
        } else {
            (tx, Selection::transmit(k))
        };
        if val > best_val {
            best_val = val;
            best = sel;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(sr: &[f64], rd: &[f64]) -> SlotRealization {
        SlotRealization::from_snrs(0, sr.to_vec(), rd.to_vec()).unwrap()
    }

    #[test]
    fn conventional_single_relay() {
        let (k, rate) = select_conventional(&slot(&[3.0], &[1.0]));
        assert_eq!(k, 0);
        assert_eq!(rate, 0.5);
    }

    #[test]
    fn conventional_picks_best_bottleneck() {
        // bottlenecks log2(2) = 1.0 and log2(1 + (2^1.4 - 1)) = 1.4
        let g = 2f64.powf(1.4) - 1.0;
        let (k, _) = select_conventional(&slot(&[1.0, g], &[5.0, 9.0]));
        assert_eq!(k, 1);
    }

    #[test]
    fn buffer_aided_single_relay_receives() {
        // A = {0.5 * 2, 0.5 * 1}
        let sel = select_buffer_aided(&slot(&[3.0], &[1.0]), &[0.5]);
        assert_eq!(sel, Selection::receive(0));
    }

    #[test]
    fn buffer_aided_tie_break() {
        let sel = select_buffer_aided(&slot(&[1.0, 1.0], &[1.0, 1.0]), &[0.5, 0.5]);
        assert_eq!(sel, Selection::receive(0));
        // transmit of relay 0 ties with receive of relay 1: lowest index wins
        let sel = select_buffer_aided(&slot(&[0.5, 1.0], &[1.0, 0.5]), &[0.5, 0.5]);
        assert_eq!(sel, Selection::transmit(0));
    }

    #[test]
    fn delay_limited_empty_buffer_forces_reception() {
        let mut state = NetworkState::new(1);
        state.lambda_est[0] = 1.0;
        // C_S1 = 1, C_1D = 2
        let sel = select_delay_limited(&slot(&[1.0], &[3.0]), &state);
        assert_eq!(sel, Selection::receive(0));
    }

    #[test]
    fn delay_limited_small_lambda_transmits() {
        let mut state = NetworkState::new(1);
        state.lambda_est[0] = 0.01;
        state.queues[0] = 50.0;
        let sel = select_delay_limited(&slot(&[3.0], &[3.0]), &state);
        assert_eq!(sel, Selection::transmit(0));
    }

    #[test]
    fn apply_receive_adds_capacity() {
        let mut state = NetworkState::new(1);
        state.queues[0] = 5.0;
        let d = state.apply_decision(Selection::receive(0), &slot(&[3.0], &[1.0])).unwrap();
        assert_eq!(state.queues[0], 7.0);
        assert_eq!(d.bits_received(), 2.0);
        assert_eq!(d.bits_delivered(), 0.0);
    }

    #[test]
    fn apply_transmit_clamps_to_queue() {
        let mut state = NetworkState::new(1);
        state.queues[0] = 1.5;
        let d = state.apply_decision(Selection::transmit(0), &slot(&[3.0], &[3.0])).unwrap();
        assert_eq!(d.bits_delivered(), 1.5);
        assert_eq!(state.queues[0], 0.0);

        let d = state.apply_decision(Selection::transmit(0), &slot(&[3.0], &[100.0])).unwrap();
        assert_eq!(d.bits_delivered(), 0.0);
        assert_eq!(state.queues[0], 0.0);
    }

    #[test]
    fn apply_transmit_partial() {
        let mut state = NetworkState::new(2);
        state.queues = vec![4.0, 1.0];
        let d = state.apply_decision(Selection::transmit(0), &slot(&[0.0, 0.0], &[3.0, 3.0])).unwrap();
        assert_eq!(d.rate, 2.0);
        assert_eq!(state.queues, vec![2.0, 1.0]);
    }

    #[test]
    fn apply_rejects_bad_relay() {
        let mut state = NetworkState::new(1);
        let err = state.apply_decision(Selection::receive(3), &slot(&[1.0], &[1.0]));
        assert!(matches!(err, Err(Error::RelayIndex { index: 3, num_relays: 1 })));
    }

    #[test]
    fn rate_estimates_running_mean() {
        let mut state = NetworkState::new(2);
        state.update_rate_estimates(Selection::receive(0), &slot(&[3.0, 0.0], &[0.0, 0.0]));
        assert_eq!(state.arrival_rate_est[0], 2.0);
        state.update_rate_estimates(Selection::transmit(1), &slot(&[3.0, 0.0], &[0.0, 1.0]));
        assert_eq!(state.arrival_rate_est[0], 1.0);
        assert_eq!(state.departure_rate_est[1], 0.5);
        assert_eq!(state.slot_count, 2);
    }

    #[test]
    fn mu_update_sign() {
        let mut state = NetworkState::new(2);
        state.slot_count = 4;
        state.arrival_rate_est = vec![1.0, 1.0];
        state.departure_rate_est = vec![1.0, 2.0];
        state.update_mu_estimate(&StepSize::default_mu());
        assert_eq!(state.mu_est[0], 0.5);
        assert!(state.mu_est[1] > 0.5);
        // delta(5) * 1.0
        assert!((state.mu_est[1] - (0.5 + 0.1 / 5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn mu_update_is_clamped() {
        let mut state = NetworkState::new(1);
        state.slot_count = 1;
        state.departure_rate_est = vec![100.0];
        state.update_mu_estimate(&StepSize::Constant { value: 1.0 });
        assert_eq!(state.mu_est[0], MU_CLAMP.1);
        state.departure_rate_est = vec![0.0];
        state.arrival_rate_est = vec![1000.0];
        state.update_mu_estimate(&StepSize::Constant { value: 1.0 });
        assert_eq!(state.mu_est[0], MU_CLAMP.0);
    }

    #[test]
    fn lambda_update_cases() {
        let step = StepSize::Constant { value: 0.1 };
        let mut state = NetworkState::new(1);
        state.slot_count = 3;
        state.arrival_rate_est = vec![2.0];
        state.queues = vec![10.0];
        state.update_lambda(5.0, &step);
        assert_eq!(state.lambda_est[0], LAMBDA_INIT);

        state.queues = vec![20.0];
        state.update_lambda(5.0, &step);
        assert!(state.lambda_est[0] < LAMBDA_INIT);

        let mut fresh = NetworkState::new(1);
        fresh.slot_count = 1;
        fresh.queues = vec![0.0];
        fresh.update_lambda(5.0, &step);
        assert!((fresh.lambda_est[0] - (LAMBDA_INIT + 0.5)).abs() < 1e-15);

        let mut floor = NetworkState::new(1);
        floor.slot_count = 1;
        floor.arrival_rate_est = vec![1.0];
        floor.queues = vec![1e6];
        floor.update_lambda(5.0, &step);
        assert_eq!(floor.lambda_est[0], LAMBDA_MIN);
    }

    #[test]
    fn first_slot_keeps_initial_values() {
        let mut state = NetworkState::new(2);
        state.update_lambda(5.0, &StepSize::Constant { value: 1.0 });
        state.update_mu_estimate(&StepSize::Constant { value: 1.0 });
        assert_eq!(state.lambda_est, vec![LAMBDA_INIT; 2]);
        assert_eq!(state.mu_est, vec![MU_INIT; 2]);
    }

    #[test]
    fn weights_validation() {
        assert!(SelectionWeights::new(vec![0.5, 0.0]).is_err());
        assert!(SelectionWeights::new(vec![1.0]).is_err());
        assert!(SelectionWeights::new(vec![]).is_err());
        assert_eq!(SelectionWeights::uniform(3).as_slice(), &[0.5; 3]);
    }

    #[test]
    fn default_lambda_step() {
        let s = StepSize::default_lambda(100.0);
        let expected = 0.005 / 4.0 / 101f64.log2();
        assert!((s.at(16) - expected).abs() < 1e-18);
    }
}
