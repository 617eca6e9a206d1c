//! Analytical results checked against values frozen from independent
//! arbitrary-precision and SciPy evaluations.

// oracle values are pasted at full printed precision
#![allow(clippy::excessive_precision)]

use approx::assert_relative_eq;
use bufrelay::analysis::{
    asymptotic_rate, closed_form_rate_ba_iid_rayleigh, closed_form_rate_conv_iid_rayleigh,
    conventional_rate_analytical, exp_integral_e1, high_snr_gap, integrate, max_rate_analytical,
    solve_mu_star, EffectiveDensityContext, QuadOptions, RateKind, Side, SnrRegime, SolverOptions,
};
use bufrelay::channel::FadingModel;
use bufrelay::protocols::SelectionWeights;
use bufrelay::verify::ind_model;

// (M, avg SNR, buffer-aided, conventional), 30-digit mpmath sums
const CLOSED: [(usize, f64, f64, f64); 15] = [
    (1, 1.0, 0.59970388041293251, 0.26064350185795344),
    (1, 10.0, 1.8292913926563601, 1.0772234157584448),
    (1, 100.0, 3.4152526647784884, 2.4687955689049851),
    (2, 1.0, 0.7642006552113779, 0.37244008080527514),
    (2, 10.0, 2.1213330960468192, 1.39859869576487),
    (2, 100.0, 3.7405061654883908, 2.9245351705809482),
    (5, 1.0, 0.95415412560808649, 0.52371850871210903),
    (5, 10.0, 2.4035624377112757, 1.7369459500650851),
    (5, 100.0, 4.038887979665803, 3.3281249862259395),
    (10, 1.0, 1.0755591415335761, 0.62978240730385835),
    (10, 10.0, 2.5653959088912741, 1.9308484895496502),
    (10, 100.0, 4.2065292572866622, 3.5417906546763851),
    (30, 1.0, 1.2361929969777488, 0.77702592094190738),
    (30, 10.0, 2.765812750267017, 2.1648994301453857),
    (30, 100.0, 4.4121403965660614, 3.7913652730385111),
];

#[test]
fn closed_forms_match_high_precision_sums() {
    for (m, snr, ba, conv) in CLOSED {
        assert_relative_eq!(closed_form_rate_ba_iid_rayleigh(m, snr).unwrap(), ba, max_relative = 1e-12);
        assert_relative_eq!(closed_form_rate_conv_iid_rayleigh(m, snr).unwrap(), conv, max_relative = 1e-12);
    }
    assert_relative_eq!(
        closed_form_rate_ba_iid_rayleigh(30, 1e-3).unwrap(),
        0.0033673569965927792,
        max_relative = 1e-10
    );
    assert_relative_eq!(
        closed_form_rate_ba_iid_rayleigh(30, 1e4).unwrap(),
        7.7324390385226585,
        max_relative = 1e-12
    );
}

#[test]
fn e1_against_its_defining_integral() {
    // E1(1) = ∫_1^∞ e^{-t}/t dt, truncated where the tail is below 1e-20
    let q = integrate(|t| (-t).exp() / t, 1.0, 50.0, &[2.0, 5.0, 10.0], QuadOptions::default()).unwrap();
    assert_relative_eq!(q.value, 0.21938393439552029, max_relative = 1e-12);
    assert_relative_eq!(exp_integral_e1(1.0).unwrap(), q.value, max_relative = 1e-12);
}

#[test]
fn high_snr_gap_values() {
    let table = [
        (1, 1.0),
        (2, 0.83007499855768764),
        (3, 0.76955320884750732),
        (5, 0.71619284446970733),
        (10, 0.66831660085851452),
        (20, 0.6368027062514355),
        (30, 0.62307547351650077),
    ];
    for (m, gap) in table {
        assert_relative_eq!(high_snr_gap(m).unwrap(), gap, max_relative = 1e-12);
    }
    assert!(high_snr_gap(40).is_err());
}

#[test]
fn asymptotes_approach_exact_rates() {
    for m in [1, 2, 5] {
        for kind in [RateKind::BufferAided, RateKind::Conventional] {
            let exact = |snr| match kind {
                RateKind::BufferAided => closed_form_rate_ba_iid_rayleigh(m, snr).unwrap(),
                RateKind::Conventional => closed_form_rate_conv_iid_rayleigh(m, snr).unwrap(),
            };
            let low = asymptotic_rate(m, 1e-4, SnrRegime::Low, kind).unwrap();
            assert_relative_eq!(low, exact(1e-4), max_relative = 1e-3);
            let high = asymptotic_rate(m, 1e6, SnrRegime::High, kind).unwrap();
            assert!((high - exact(1e6)).abs() < 1e-4, "M={m} {kind:?}");
        }
    }
}

#[test]
fn conventional_quadrature_matches_closed_form() {
    for m in [1, 3, 7] {
        for snr in [0.1, 1.0, 10.0, 100.0] {
            let model = FadingModel::iid(m, snr, 1.0).unwrap();
            let q = conventional_rate_analytical(&model, QuadOptions::default()).unwrap();
            let c = closed_form_rate_conv_iid_rayleigh(m, snr).unwrap();
            assert!((q - c).abs() < 1e-8, "M={m} snr={snr}: {q} vs {c}");
        }
    }
}

#[test]
fn two_relay_iid_densities_carry_a_quarter_each() {
    let model = FadingModel::iid(2, 10.0, 1.0).unwrap();
    let mu = SelectionWeights::uniform(2);
    let ctx = EffectiveDensityContext::new(&model, &mu);
    for side in [Side::Source, Side::Relay] {
        for k in 0..2 {
            let p = ctx.selection_probability(side, k, QuadOptions::default()).unwrap();
            assert!((p - 0.25).abs() < 1e-9, "{side:?} {k}: {p}");
        }
    }
}

#[test]
fn iid_source_and_relay_densities_coincide_at_half() {
    let model = FadingModel::iid(3, 4.0, 1.0).unwrap();
    let mu = SelectionWeights::uniform(3);
    let ctx = EffectiveDensityContext::new(&model, &mu);
    for x in [0.01, 0.5, 3.0, 20.0] {
        assert_relative_eq!(ctx.pdf_source(1, x), ctx.pdf_relay(1, x), max_relative = 1e-14);
    }
}

// optimal weights and rates for the five-relay i.n.d. network (SciPy fsolve + quad)
const IND_GOLDEN: [(f64, [f64; 5], f64); 3] = [
    (
        0.0,
        [0.7612967770865576, 0.5476936779438847, 0.4087738708634479, 0.392679210073664, 0.2955751523581856],
        1.0250361063554183,
    ),
    (10.0, [0.63973263, 0.52196572, 0.45744133, 0.45017518, 0.39737134], 2.5234845250198408),
    (20.0, [0.58483723, 0.51276795, 0.47518515, 0.47094585, 0.43891852], 4.1795377213487654),
];

#[test]
fn ind_optimal_weights_and_rate() {
    for (db, mu_ref, rate_ref) in IND_GOLDEN {
        let model = ind_model(db);
        let sol = solve_mu_star(&model, &SolverOptions::default()).unwrap();
        assert!(sol.residual_norm <= 1e-8);
        for (a, b) in sol.mu_star.iter().zip(mu_ref) {
            assert!((a - b).abs() < 1e-6, "{db} dB: {a} vs {b}");
        }
        let rate = max_rate_analytical(&model, &sol.weights(), QuadOptions::default()).unwrap();
        assert_relative_eq!(rate, rate_ref, max_relative = 1e-7);
    }
}
