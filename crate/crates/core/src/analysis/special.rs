//! Exponential integral `E1`.

use super::dd::{Dd, EULER_GAMMA};
use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_MASCHERONI: f64 = 0.5772156649015329;

/// `e^x E1(x)` in double-double precision, `x > 0`.
///
/// Uses the power series below 1 and the continued fraction
/// `1/(x+1- 1/(x+3- 4/(x+5- ...)))` above. The continued fraction yields the
/// scaled product directly, so large arguments never overflow.
pub(crate) fn scaled_e1_dd(xd: Dd) -> Dd {
    debug_assert!(xd.hi > 0.0);
    if xd.hi < 1.0 {
        // E1(x) = -γ - ln x - Σ_{n≥1} (-x)^n / (n n!)
        let mut term = Dd::ONE; // (-x)^n / n!
        let mut sum = Dd::ZERO;
        for n in 1..200 {
            term = term * (-xd) / Dd::new(n as f64);
            let add = term / Dd::new(n as f64);
            sum = sum + add;
            if add.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
                break;
            }
        }
        let e1 = -EULER_GAMMA - xd.ln() - sum;
        e1 * xd.exp()
    } else {
        // backward evaluation, deepening until two depths agree
        let eval = |depth: usize| {
            let mut tail = Dd::ZERO;
            for n in (1..=depth).rev() {
                let nn = Dd::new((n * n) as f64);
                tail = nn / (xd + Dd::new((2 * n + 1) as f64) - tail);
            }
            Dd::ONE / (xd + Dd::ONE - tail)
        };
        let mut depth = 32;
        let mut prev = eval(depth);
        loop {
            depth *= 2;
            let next = eval(depth);
            if ((next - prev).to_f64() / next.to_f64()).abs() < 1e-31 || depth >= 1 << 16 {
                return next;
            }
            prev = next;
        }
    }
}

/// `E1(x) = ∫_1^∞ e^{-xt}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok((scaled_e1_dd(Dd::new(x)) * (-Dd::new(x)).exp()).to_f64())
}

/// `e^x E1(x)` for `x > 0`, without intermediate overflow.
pub fn scaled_exp_integral_e1(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(scaled_e1_dd(Dd::new(x)).to_f64())
}

fn check_arg(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("E1 needs a finite positive argument, got {x}")))
    }
}
