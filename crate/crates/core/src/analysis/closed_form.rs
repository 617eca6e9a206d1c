//! Closed-form rates for i.i.d. Rayleigh fading and their SNR asymptotes.
//!
//! The exact rates are alternating binomial sums whose terms grow like
//! `C(2M-1, M)` while the result stays O(1). Every term, including the
//! scaled exponential integrals, is evaluated in double-double arithmetic so
//! the cancellation leaves well over ten significant digits up to
//! [`MAX_CLOSED_FORM_RELAYS`].

use serde::{Deserialize, Serialize};

use super::dd::{Dd, LN2};
use super::special::{scaled_e1_dd, EULER_MASCHERONI};
use crate::error::{Error, Result};

/// Largest relay count accepted by the alternating-sum closed forms.
pub const MAX_CLOSED_FORM_RELAYS: usize = 35;

fn check(num_relays: usize, avg_snr: f64) -> Result<()> {
    if num_relays == 0 || num_relays > MAX_CLOSED_FORM_RELAYS {
        return Err(Error::Range {
            num_relays,
            max: MAX_CLOSED_FORM_RELAYS,
        });
    }
    if !(avg_snr > 0.0 && avg_snr.is_finite()) {
        return Err(Error::Domain(format!("average SNR must be positive, got {avg_snr}")));
    }
    Ok(())
}

/// `Σ_{k=0}^{n} C(n,k) (-1)^k / (1+k) · g(k)` in double-double.
fn alternating_sum(n: usize, g: impl Fn(usize) -> Dd) -> Dd {
    let mut binom = Dd::ONE;
    let mut sum = Dd::ZERO;
    for k in 0..=n {
        let term = binom / Dd::new((k + 1) as f64) * g(k);
        sum = if k % 2 == 0 { sum + term } else { sum - term };
        binom = binom * Dd::new((n - k) as f64) / Dd::new((k + 1) as f64);
    }
    sum
}

/// Maximum average rate of buffer-aided selection over `M` relays with
/// i.i.d. Rayleigh links of average SNR `avg_snr` (linear).
pub fn closed_form_rate_ba_iid_rayleigh(num_relays: usize, avg_snr: f64) -> Result<f64> {
    check(num_relays, avg_snr)?;
    let s = alternating_sum(2 * num_relays - 1, |k| {
        // the argument is formed in double-double too: an f64 rounding here
        // would be amplified by the cancellation
        scaled_e1_dd(Dd::new((1 + k) as f64) / Dd::new(avg_snr))
    });
    Ok((Dd::new(num_relays as f64) * s / LN2).to_f64())
}

/// Average rate of conventional selection over `M` relays with i.i.d.
/// Rayleigh links of average SNR `avg_snr` (linear).
pub fn closed_form_rate_conv_iid_rayleigh(num_relays: usize, avg_snr: f64) -> Result<f64> {
    check(num_relays, avg_snr)?;
    let s = alternating_sum(num_relays - 1, |k| {
        scaled_e1_dd(Dd::new(2.0 * (1 + k) as f64) / Dd::new(avg_snr))
    });
    Ok((Dd::new(0.5 * num_relays as f64) * s / LN2).to_f64())
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Low-SNR limit of the buffer-aided to conventional rate ratio,
/// `2 H(2M) / H(M)` with `H` the harmonic numbers.
pub fn low_snr_ratio(num_relays: usize) -> f64 {
    2.0 * harmonic(2 * num_relays) / harmonic(num_relays)
}

/// `Σ_{k=0}^{n} C(n,k) (-1)^k log2(1+k) / (1+k)`.
fn log_sum(n: usize) -> Dd {
    alternating_sum(n, |k| Dd::new((1 + k) as f64).ln() / LN2)
}

/// High-SNR rate gap (bits/symbol) between buffer-aided and conventional
/// selection for i.i.d. Rayleigh fading.
///
/// Equals 1 for a single relay and decreases towards 1/2 as `M` grows.
pub fn high_snr_gap(num_relays: usize) -> Result<f64> {
    check(num_relays, 1.0)?;
    let m = Dd::new(num_relays as f64);
    let conv = m * log_sum(num_relays - 1) / Dd::new(2.0);
    let ba = m * log_sum(2 * num_relays - 1);
    Ok((Dd::new(0.5) + conv - ba).to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrRegime {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    BufferAided,
    Conventional,
}

/// First-order low- or high-SNR approximation of the i.i.d. Rayleigh rates.
///
/// Low SNR uses `e^{c/γ̄} E1(c/γ̄) ≈ γ̄/c`; high SNR uses
/// `e^{c/γ̄} E1(c/γ̄) ≈ ln γ̄ - ln c - K_EM`.
pub fn asymptotic_rate(num_relays: usize, avg_snr: f64, regime: SnrRegime, kind: RateKind) -> Result<f64> {
    check(num_relays, avg_snr)?;
    let ln2 = std::f64::consts::LN_2;
    let m = num_relays;
    Ok(match (regime, kind) {
        (SnrRegime::Low, RateKind::BufferAided) => avg_snr / (2.0 * ln2) * harmonic(2 * m),
        (SnrRegime::Low, RateKind::Conventional) => avg_snr / (4.0 * ln2) * harmonic(m),
        (SnrRegime::High, RateKind::BufferAided) => {
            (avg_snr.ln() - EULER_MASCHERONI) / (2.0 * ln2)
                - (Dd::new(m as f64) * log_sum(2 * m - 1)).to_f64()
        }
        (SnrRegime::High, RateKind::Conventional) => {
            (avg_snr.ln() - EULER_MASCHERONI) / (2.0 * ln2)
                - (Dd::new(m as f64) * log_sum(m - 1)).to_f64() / 2.0
                - 0.5
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_values() {
        assert!((low_snr_ratio(1) - 3.0).abs() < 1e-15);
        assert!((low_snr_ratio(2) - 25.0 / 9.0).abs() < 1e-15);
        // tends to 2 only logarithmically
        let far = low_snr_ratio(100_000);
        assert!(far > 2.0 && far < low_snr_ratio(10) && far < 2.12);
    }

    #[test]
    fn gap_single_relay_is_one() {
        assert!((high_snr_gap(1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn range_errors() {
        assert!(matches!(
            closed_form_rate_ba_iid_rayleigh(0, 1.0),
            Err(Error::Range { .. })
        ));
        assert!(matches!(
            closed_form_rate_conv_iid_rayleigh(MAX_CLOSED_FORM_RELAYS + 1, 1.0),
            Err(Error::Range { .. })
        ));
        assert!(closed_form_rate_ba_iid_rayleigh(2, 0.0).is_err());
    }

    #[test]
    fn low_snr_buffer_aided_substitution() {
        let v = asymptotic_rate(1, 0.01, SnrRegime::Low, RateKind::BufferAided).unwrap();
        assert!((v - 0.01 * 1.5 / (2.0 * std::f64::consts::LN_2)).abs() < 1e-17);
    }
}
