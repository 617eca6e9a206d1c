//! Optimal selection weights `μ*` and the resulting maximum average rate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::density::{EffectiveDensityContext, Side};
use super::quadrature::QuadOptions;
use crate::channel::FadingModel;
use crate::error::{Error, Result};
use crate::protocols::SelectionWeights;

/// Newton iterates are projected into `[MU_MARGIN, 1 - MU_MARGIN]`.
const MU_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Maximum absolute flow imbalance (bits/symbol) accepted at the solution.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Central-difference step for the Jacobian.
    pub fd_step: f64,
    /// Step halvings tried per iteration before giving up on descent.
    pub max_halvings: usize,
    pub quadrature: QuadOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            fd_step: 1e-4,
            max_halvings: 20,
            quadrature: QuadOptions {
                abs_tol: 1e-12,
                rel_tol: 1e-13,
                max_intervals: 4000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuSolverResult {
    pub mu_star: Vec<f64>,
    /// `max_k |E[log2(1+Γ_Sk)] - E[log2(1+Γ_kD)]|` at `mu_star`.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl MuSolverResult {
    pub fn weights(&self) -> SelectionWeights {
        SelectionWeights::new(self.mu_star.clone()).expect("solver keeps iterates inside (0, 1)")
    }
}

/// Per-relay flow imbalance `E[log2(1+Γ_Sk)] - E[log2(1+Γ_kD)]` at `mu`.
pub fn flow_imbalance(model: &FadingModel, mu: &[f64], quad: QuadOptions) -> Result<Vec<f64>> {
    let ctx = EffectiveDensityContext::from_slice(model, mu);
    (0..model.num_relays())
        .map(|k| {
            Ok(ctx.expected_log_rate(Side::Source, k, quad)?
                - ctx.expected_log_rate(Side::Relay, k, quad)?)
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn project(mu: f64) -> f64 {
    mu.clamp(MU_MARGIN, 1.0 - MU_MARGIN)
}

/// Solves the flow-balance system for the optimal weights `μ*`.
///
/// Damped Newton from `μ = 1/2` with a central-difference Jacobian. Failure
/// to reach the tolerance is reported with the last iterate; no restarts are
/// attempted.
pub fn solve_mu_star(model: &FadingModel, opts: &SolverOptions) -> Result<MuSolverResult> {
    let m = model.num_relays();
    let mut mu = vec![0.5; m];
    let mut residual = flow_imbalance(model, &mu, opts.quadrature)?;
    let mut norm = max_abs(&residual);

    for iteration in 0..opts.max_iterations {
        if norm <= opts.tolerance {
            return Ok(MuSolverResult {
                mu_star: mu,
                residual_norm: norm,
                iterations: iteration,
            });
        }

        let mut jac = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let h = opts.fd_step.min(0.5 * mu[j].min(1.0 - mu[j]));
            let mut plus = mu.clone();
            let mut minus = mu.clone();
            plus[j] += h;
            minus[j] -= h;
            let rp = flow_imbalance(model, &plus, opts.quadrature)?;
            let rm = flow_imbalance(model, &minus, opts.quadrature)?;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = -DVector::from_column_slice(&residual);
        let step = jac.lu().solve(&rhs).ok_or_else(|| Error::Solver {
            iterations: iteration,
            residual: norm,
            last: mu.clone(),
        })?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = mu
                .iter()
                .zip(step.iter())
                .map(|(m, s)| project(m + scale * s))
                .collect();
            let r = flow_imbalance(model, &trial, opts.quadrature)?;
            let n = max_abs(&r);
            if n < norm {
                accepted = Some((trial, r, n));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((trial, r, n)) => {
                mu = trial;
                residual = r;
                norm = n;
            }
            None => {
                return Err(Error::Solver {
                    iterations: iteration + 1,
                    residual: norm,
                    last: mu,
                })
            }
        }
    }

    if norm <= opts.tolerance {
        Ok(MuSolverResult {
            mu_star: mu,
            residual_norm: norm,
            iterations: opts.max_iterations,
        })
    } else {
        Err(Error::Solver {
            iterations: opts.max_iterations,
            residual: norm,
            last: mu,
        })
    }
}

/// Maximum average rate `Σ_k E[log2(1+Γ_kD)]` for the given weights.
///
/// Only meaningful as an achievable rate when `mu` balances every relay's flow.
pub fn max_rate_analytical(model: &FadingModel, mu: &SelectionWeights, quad: QuadOptions) -> Result<f64> {
    let ctx = EffectiveDensityContext::new(model, mu);
    (0..model.num_relays())
        .map(|k| ctx.expected_log_rate(Side::Relay, k, quad))
        .sum()
}

/// Conventional selection rate `E[max_k min{C_Sk, C_kD}] / 2` for any
/// Rayleigh model, by integrating the complementary CDF of the best
/// bottleneck SNR against `1 / ((1+x) ln 2)`.
pub fn conventional_rate_analytical(model: &FadingModel, quad: QuadOptions) -> Result<f64> {
    // min of two exponentials is exponential with the summed rates
    let rates: Vec<f64> = (0..model.num_relays())
        .map(|k| 1.0 / model.avg_snr_sr(k) + 1.0 / model.avg_snr_rd(k))
        .collect();
    let slowest = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = 1.0 / slowest;
    let ccdf = |x: f64| {
        let all_below: f64 = rates.iter().map(|r| -(-r * x).exp_m1()).product();
        (1.0 - all_below) / ((1.0 + x) * std::f64::consts::LN_2)
    };
    let cuts: Vec<f64> = [1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0, 8.0, 16.0]
        .iter()
        .map(|m| m * scale)
        .collect();
    let r = super::quadrature::integrate(
        ccdf,
        0.0,
        super::density::TAIL_MULTIPLE * scale,
        &cuts,
        quad,
    )?;
    Ok(0.5 * r.value)
}
