//! Fading channel model and per-slot link realizations.
//!
//! Every source-to-relay and relay-to-destination link is an independent
//! block-fading channel: the SNR is constant for one slot and redrawn for the
//! next. Only squared gains enter the link capacities, so Rayleigh fading is
//! sampled directly as an exponential SNR with the configured mean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution family of the squared channel gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FadingFamily {
    #[default]
    Rayleigh,
}

/// Per-link average-SNR description of the relay network.
///
/// The average SNR of a link is `snr_ref * mean_gain`, i.e. `P/σ² · Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    snr_ref: f64,
    mean_gain_sr: Vec<f64>,
    mean_gain_rd: Vec<f64>,
    family: FadingFamily,
}

impl FadingModel {
    /// Builds a Rayleigh model from the two mean-gain vectors and `P/σ²` (linear).
    pub fn new(snr_ref: f64, mean_gain_sr: Vec<f64>, mean_gain_rd: Vec<f64>) -> Result<Self> {
        Self::with_family(FadingFamily::Rayleigh, snr_ref, mean_gain_sr, mean_gain_rd)
    }

    pub fn with_family(
        family: FadingFamily,
        snr_ref: f64,
        mean_gain_sr: Vec<f64>,
        mean_gain_rd: Vec<f64>,
    ) -> Result<Self> {
        if !(snr_ref.is_finite() && snr_ref > 0.0) {
            return Err(Error::InvalidModel(format!(
                "snr_ref must be finite and positive, got {snr_ref}"
            )));
        }
        if mean_gain_sr.is_empty() {
            return Err(Error::InvalidModel("at least one relay is required".into()));
        }
        if mean_gain_sr.len() != mean_gain_rd.len() {
            return Err(Error::InvalidModel(format!(
                "mean_gain_sr has {} entries but mean_gain_rd has {}",
                mean_gain_sr.len(),
                mean_gain_rd.len()
            )));
        }
        for (name, gains) in [("mean_gain_sr", &mean_gain_sr), ("mean_gain_rd", &mean_gain_rd)] {
            if let Some((k, g)) = gains
                .iter()
                .enumerate()
                .find(|(_, g)| !(g.is_finite() && **g > 0.0))
            {
                return Err(Error::InvalidModel(format!(
                    "{name}[{k}] must be finite and positive, got {g}"
                )));
            }
        }
        Ok(Self {
            snr_ref,
            mean_gain_sr,
            mean_gain_rd,
            family,
        })
    }

    /// All `2M` links share the same mean gain `omega`.
    pub fn iid(num_relays: usize, snr_ref: f64, omega: f64) -> Result<Self> {
        Self::new(snr_ref, vec![omega; num_relays], vec![omega; num_relays])
    }

    /// i.i.d. model parameterized directly by the common average link SNR.
    pub fn iid_avg_snr(num_relays: usize, avg_snr: f64) -> Result<Self> {
        Self::iid(num_relays, avg_snr, 1.0)
    }

    pub fn num_relays(&self) -> usize {
        self.mean_gain_sr.len()
    }

    pub fn snr_ref(&self) -> f64 {
        self.snr_ref
    }

    pub fn family(&self) -> FadingFamily {
        self.family
    }

    pub fn mean_gain_sr(&self) -> &[f64] {
        &self.mean_gain_sr
    }

    pub fn mean_gain_rd(&self) -> &[f64] {
        &self.mean_gain_rd
    }

    /// Average SNR of the source-to-relay-`k` link.
    pub fn avg_snr_sr(&self, k: usize) -> f64 {
        self.snr_ref * self.mean_gain_sr[k]
    }

    /// Average SNR of the relay-`k`-to-destination link.
    pub fn avg_snr_rd(&self, k: usize) -> f64 {
        self.snr_ref * self.mean_gain_rd[k]
    }

    /// True when all `2M` links have the same mean gain.
    pub fn is_iid(&self) -> bool {
        let first = self.mean_gain_sr[0];
        self.mean_gain_sr
            .iter()
            .chain(&self.mean_gain_rd)
            .all(|&g| g == first)
    }

    /// Same gains, different `P/σ²`.
    pub fn with_snr_ref(&self, snr_ref: f64) -> Result<Self> {
        Self::with_family(
            self.family,
            snr_ref,
            self.mean_gain_sr.clone(),
            self.mean_gain_rd.clone(),
        )
    }

    /// Marginal PDF of the SNR on a link with average SNR `avg`.
    pub fn link_pdf(&self, avg: f64, x: f64) -> f64 {
        match self.family {
            FadingFamily::Rayleigh => {
                if x < 0.0 {
                    0.0
                } else {
                    (-x / avg).exp() / avg
                }
            }
        }
    }

    /// Marginal CDF of the SNR on a link with average SNR `avg`.
    pub fn link_cdf(&self, avg: f64, x: f64) -> f64 {
        match self.family {
            FadingFamily::Rayleigh => {
                if x <= 0.0 {
                    0.0
                } else if x.is_infinite() {
                    1.0
                } else {
                    -(-x / avg).exp_m1()
                }
            }
        }
    }
}

/// The `2M` instantaneous SNRs of one slot, with their capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRealization {
    slot_index: u64,
    gamma_sr: Vec<f64>,
    gamma_rd: Vec<f64>,
    cap_sr: Vec<f64>,
    cap_rd: Vec<f64>,
}

impl SlotRealization {
    /// Builds a realization from explicit SNR values. Used by tests and replay.
    pub fn from_snrs(slot_index: u64, gamma_sr: Vec<f64>, gamma_rd: Vec<f64>) -> Result<Self> {
        if gamma_sr.len() != gamma_rd.len() || gamma_sr.is_empty() {
            return Err(Error::InvalidModel(format!(
                "slot needs matching non-empty SNR arrays, got {} and {}",
                gamma_sr.len(),
                gamma_rd.len()
            )));
        }
        if let Some(g) = gamma_sr
            .iter()
            .chain(&gamma_rd)
            .find(|g| !(g.is_finite() && **g >= 0.0))
        {
            return Err(Error::Domain(format!("slot SNR must be finite and >= 0, got {g}")));
        }
        let mut slot = Self {
            slot_index,
            gamma_sr,
            gamma_rd,
            cap_sr: Vec::new(),
            cap_rd: Vec::new(),
        };
        slot.refresh_capacities();
        Ok(slot)
    }

    fn empty(num_relays: usize) -> Self {
        Self {
            slot_index: 0,
            gamma_sr: vec![0.0; num_relays],
            gamma_rd: vec![0.0; num_relays],
            cap_sr: vec![0.0; num_relays],
            cap_rd: vec![0.0; num_relays],
        }
    }

    fn refresh_capacities(&mut self) {
        self.cap_sr.clear();
        self.cap_sr.extend(self.gamma_sr.iter().map(|g| log2_1p(*g)));
        self.cap_rd.clear();
        self.cap_rd.extend(self.gamma_rd.iter().map(|g| log2_1p(*g)));
    }

    pub fn slot_index(&self) -> u64 {
        self.slot_index
    }

    pub fn num_relays(&self) -> usize {
        self.gamma_sr.len()
    }

    /// `γ_Sk(i)` for every relay.
    pub fn gamma_sr(&self) -> &[f64] {
        &self.gamma_sr
    }

    /// `γ_kD(i)` for every relay.
    pub fn gamma_rd(&self) -> &[f64] {
        &self.gamma_rd
    }

    /// `C_Sk(i)` in bits/symbol.
    pub fn capacity_sr(&self, k: usize) -> f64 {
        self.cap_sr[k]
    }

    /// `C_kD(i)` in bits/symbol.
    pub fn capacity_rd(&self, k: usize) -> f64 {
        self.cap_rd[k]
    }

    pub fn capacities_sr(&self) -> &[f64] {
        &self.cap_sr
    }

    pub fn capacities_rd(&self) -> &[f64] {
        &self.cap_rd
    }

    /// Same slot with every SNR replaced so that all capacities scale by `factor`.
    pub fn scaled_capacities(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in out.cap_sr.iter_mut().chain(out.cap_rd.iter_mut()) {
            *c *= factor;
        }
        out
    }
}

#[inline]
fn log2_1p(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Link capacity `log2(1 + snr)` in bits/symbol.
pub fn capacity(snr: f64) -> Result<f64> {
    if !(snr.is_finite() && snr >= 0.0) {
        return Err(Error::Domain(format!(
            "capacity needs a finite non-negative SNR, got {snr}"
        )));
    }
    Ok(log2_1p(snr))
}

/// Independent random streams for every link of a network.
///
/// Link `2k` is source-to-relay `k`, link `2k + 1` is relay `k` to destination.
/// Each link draws from its own ChaCha stream keyed by the master seed, so the
/// sequence on a given link does not depend on how many relays exist.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    links: Vec<ChaCha8Rng>,
    next_slot: u64,
}

impl RandomStream {
    pub fn new(seed: u64, num_relays: usize) -> Self {
        let links = (0..2 * num_relays as u64)
            .map(|link| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(link);
                rng
            })
            .collect();
        Self {
            seed,
            links,
            next_slot: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn num_relays(&self) -> usize {
        self.links.len() / 2
    }

    /// Unit-mean exponential variate from link `link` by inverse CDF.
    fn unit_exponential(&mut self, link: usize) -> f64 {
        let u: f64 = self.links[link].random();
        -(-u).ln_1p()
    }
}

/// Draws the next slot of the network from `stream`.
///
/// Panics if the stream was built for a different number of relays.
pub fn sample_slot(model: &FadingModel, stream: &mut RandomStream) -> SlotRealization {
    let mut slot = SlotRealization::empty(model.num_relays());
    sample_slot_into(model, stream, &mut slot);
    slot
}

/// Allocation-free variant of [`sample_slot`] used by the simulation loop.
pub fn sample_slot_into(model: &FadingModel, stream: &mut RandomStream, slot: &mut SlotRealization) {
    let m = model.num_relays();
    assert_eq!(
        stream.num_relays(),
        m,
        "random stream built for a different relay count"
    );
    slot.gamma_sr.resize(m, 0.0);
    slot.gamma_rd.resize(m, 0.0);
    match model.family {
        FadingFamily::Rayleigh => {
            for k in 0..m {
                slot.gamma_sr[k] = model.avg_snr_sr(k) * stream.unit_exponential(2 * k);
                slot.gamma_rd[k] = model.avg_snr_rd(k) * stream.unit_exponential(2 * k + 1);
            }
        }
    }
    slot.refresh_capacities();
    slot.slot_index = stream.next_slot;
    stream.next_slot += 1;
}

/// Converts a decibel value to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
