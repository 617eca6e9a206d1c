//! Globally adaptive 15-point Gauss–Kronrod quadrature on a finite interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod nodes and weights as tabulated, beyond double precision
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7]
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, splitting first at the sorted `breakpoints`
/// that fall strictly inside the interval.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| *p > a && *p < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut lo = a;
    for &hi in cuts.iter().chain(std::iter::once(&b)) {
        heap.push(gauss_kronrod(&f, lo, hi));
        lo = hi;
    }

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !value.is_finite() {
            return Err(Error::Quadrature {
                estimate: value,
                error_estimate: error,
            });
        }
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            return Ok(QuadResult {
                value,
                error_estimate: error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: value,
                error_estimate: error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in f64
            return Err(Error::Quadrature {
                estimate: value,
                error_estimate: error,
            });
        }
        heap.push(gauss_kronrod(&f, worst.a, mid));
        heap.push(gauss_kronrod(&f, mid, worst.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, &[], QuadOptions::default()).unwrap();
        assert!((r.value - (81.0 / 4.0 - 9.0)).abs() < 1e-13);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate(|x| (-x).exp(), 0.0, 50.0, &[1.0, 5.0], QuadOptions::default()).unwrap();
        assert!((r.value - (1.0 - (-50f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn sharp_feature_is_resolved() {
        let f = |x: f64| 1.0 - (-1000.0 * x).exp();
        let r = integrate(f, 0.0, 1.0, &[], QuadOptions::default()).unwrap();
        let exact = 1.0 - (1.0 - (-1000f64).exp()) / 1000.0;
        assert!((r.value - exact).abs() < 1e-11);
    }

    #[test]
    fn non_convergence_reports_estimate() {
        let opts = QuadOptions {
            max_intervals: 3,
            ..QuadOptions::default()
        };
        let err = integrate(|x| x.sin() / x.max(1e-300) * (50.0 * x).cos(), 0.0, 200.0, &[], opts)
            .unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
