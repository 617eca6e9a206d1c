//! Effective SNR densities of the weighted argmax selection.
//!
//! With weights `μ`, the source link of relay `k` is selected when
//! `μ_k C_Sk` beats every other element of the selection set. Writing each
//! competing comparison as a condition on the competing SNR, the density of
//! `γ_Sk` restricted to those slots is the marginal PDF times one CDF factor
//! per competing link, each at an exponent-warped argument `(1+x)^p - 1`.

use std::f64::consts::LN_2;

use super::quadrature::{integrate, QuadOptions};
use crate::channel::FadingModel;
use crate::error::Result;
use crate::protocols::SelectionWeights;

/// Mean-SNR multiples beyond which a link's exponential tail is dropped.
///
/// `e^{-40}` is about `4e-18`; the log factor keeps the neglected mass of
/// `log2(1+x) f(x)` below `1e-15` for any SNR the crate handles.
pub const TAIL_MULTIPLE: f64 = 40.0;

/// Selection side of an effective density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `f_{Γ_Sk}`: the source-to-relay link wins.
    Source,
    /// `f_{Γ_kD}`: the relay-to-destination link wins.
    Relay,
}

#[derive(Debug, Clone)]
pub struct EffectiveDensityContext<'a> {
    model: &'a FadingModel,
    mu: &'a [f64],
}

#[inline]
fn warp(log1p_x: f64, exponent: f64) -> f64 {
    (exponent * log1p_x).exp_m1()
}

impl<'a> EffectiveDensityContext<'a> {
    pub fn new(model: &'a FadingModel, mu: &'a SelectionWeights) -> Self {
        assert_eq!(model.num_relays(), mu.len(), "one weight per relay");
        Self {
            model,
            mu: mu.as_slice(),
        }
    }

    /// Same as [`Self::new`] for raw weights; used by the solver on trial points.
    pub(crate) fn from_slice(model: &'a FadingModel, mu: &'a [f64]) -> Self {
        debug_assert_eq!(model.num_relays(), mu.len());
        Self { model, mu }
    }

    pub fn model(&self) -> &FadingModel {
        self.model
    }

    /// Weight of the winning link's capacity in the selection set.
    fn own_weight(&self, k: usize, side: Side) -> f64 {
        match side {
            Side::Source => self.mu[k],
            Side::Relay => 1.0 - self.mu[k],
        }
    }

    fn own_avg(&self, k: usize, side: Side) -> f64 {
        match side {
            Side::Source => self.model.avg_snr_sr(k),
            Side::Relay => self.model.avg_snr_rd(k),
        }
    }

    /// Effective density of the chosen link, at `x > 0`.
    pub fn pdf(&self, side: Side, k: usize, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let w = self.own_weight(k, side);
        let l = x.ln_1p();
        let mut v = self.model.link_pdf(self.own_avg(k, side), x);
        for j in 0..self.model.num_relays() {
            if v == 0.0 {
                break;
            }
            // competing link j wins iff its weighted capacity exceeds w * log2(1+x)
            if !(j == k && side == Side::Source) {
                v *= self
                    .model
                    .link_cdf(self.model.avg_snr_sr(j), warp(l, w / self.mu[j]));
            }
            if !(j == k && side == Side::Relay) {
                v *= self
                    .model
                    .link_cdf(self.model.avg_snr_rd(j), warp(l, w / (1.0 - self.mu[j])));
            }
        }
        v
    }

    /// `f_{Γ_Sk}(x)`.
    pub fn pdf_source(&self, k: usize, x: f64) -> f64 {
        self.pdf(Side::Source, k, x)
    }

    /// `f_{Γ_kD}(x)`.
    pub fn pdf_relay(&self, k: usize, x: f64) -> f64 {
        self.pdf(Side::Relay, k, x)
    }

    /// Upper integration limit and interior breakpoints for one density.
    fn domain(&self, side: Side, k: usize) -> (f64, Vec<f64>) {
        let avg = self.own_avg(k, side);
        let upper = TAIL_MULTIPLE * avg;
        let cuts = [1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0, 8.0, 16.0]
            .iter()
            .map(|m| m * avg)
            .collect();
        (upper, cuts)
    }

    /// `∫ log2(1+x) f(x) dx`: the average rate carried by this selection event.
    pub fn expected_log_rate(&self, side: Side, k: usize, opts: QuadOptions) -> Result<f64> {
        let (upper, cuts) = self.domain(side, k);
        expected_log_rate(|x| self.pdf(side, k, x), upper, &cuts, opts)
    }

    /// `∫ f(x) dx`: the probability of this selection event.
    pub fn selection_probability(&self, side: Side, k: usize, opts: QuadOptions) -> Result<f64> {
        let (upper, cuts) = self.domain(side, k);
        Ok(integrate(|x| self.pdf(side, k, x), 0.0, upper, &cuts, opts)?.value)
    }
}

/// `∫_0^upper log2(1+x) density(x) dx` by adaptive quadrature.
///
/// `upper` must be chosen so the density's tail beyond it is negligible.
pub fn expected_log_rate<F: Fn(f64) -> f64>(
    density: F,
    upper: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<f64> {
    let r = integrate(
        |x| x.ln_1p() / LN_2 * density(x),
        0.0,
        upper,
        breakpoints,
        opts,
    )?;
    Ok(r.value)
}
