//! Built-in acceptance checks, run by `bufrelay verify` and the `acceptance`
//! integration test.
//!
//! Each check is self-contained and deterministic: fixed seeds, fixed slot
//! counts, tolerances pinned in the check itself.

use crate::analysis::{
    closed_form_rate_ba_iid_rayleigh, closed_form_rate_conv_iid_rayleigh, high_snr_gap,
    low_snr_ratio, solve_mu_star, EffectiveDensityContext, QuadOptions, Side, SolverOptions,
};
use crate::channel::{db_to_linear, sample_slot, FadingModel, RandomStream};
use crate::error::Result;
use crate::protocols::{
    select_buffer_aided, select_delay_limited, select_max_link, NetworkState,
    SelectionWeights, StepSize,
};
use crate::simulator::{run_simulation, signaling_overhead, Implementation, Protocol, SignalingOverhead, SimulationConfig};

/// Mean gains of the five-relay i.n.d. network used throughout the checks.
pub const IND_OMEGA_SR: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];
pub const IND_OMEGA_RD: [f64; 5] = [3.0, 1.3, 0.9, 1.1, 0.7];

const SEED: u64 = 1;

pub fn ind_model(snr_db: f64) -> FadingModel {
    FadingModel::new(db_to_linear(snr_db), IND_OMEGA_SR.to_vec(), IND_OMEGA_RD.to_vec())
        .expect("constant gains are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2}. {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        )
    }
}

pub struct Check {
    pub id: u8,
    pub title: &'static str,
    run: fn() -> Result<(bool, String)>,
}

impl Check {
    pub fn run(&self) -> Outcome {
        let (passed, detail) = (self.run)().unwrap_or_else(|e| (false, format!("error: {e}")));
        Outcome {
            id: self.id,
            title: self.title,
            passed,
            detail,
        }
    }
}

pub fn checks() -> Vec<Check> {
    vec![
        Check { id: 1, title: "buffer-aided Monte-Carlo vs closed form", run: ba_closed_form },
        Check { id: 2, title: "conventional Monte-Carlo vs closed form", run: conv_closed_form },
        Check { id: 3, title: "quadrature vs closed form", run: quadrature_vs_closed_form },
        Check { id: 4, title: "i.i.d. weights are one half", run: iid_fixed_point },
        Check { id: 5, title: "low-SNR rate ratio", run: low_snr },
        Check { id: 6, title: "high-SNR rate gap", run: high_snr },
        Check { id: 7, title: "flow balance at optimal weights", run: flow_balance },
        Check { id: 8, title: "adaptive weights converge", run: adaptive_convergence },
        Check { id: 9, title: "delay-limited delay tracks target", run: delay_convergence },
        Check { id: 10, title: "property suite", run: properties },
        Check { id: 11, title: "signaling overhead table", run: overhead },
    ]
}

/// Runs the selected checks (all when `only` is empty), in id order.
pub fn run_checks(only: &[u8]) -> Vec<Outcome> {
    checks()
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(Check::run)
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

const MC_SLOTS: u64 = 1_000_000;
const MC_GRID_M: [usize; 3] = [1, 2, 5];
const MC_GRID_DB: [f64; 3] = [0.0, 10.0, 20.0];

fn simulate(model: FadingModel, protocol: Protocol, slots: u64) -> Result<crate::simulator::RateReport> {
    run_simulation(&SimulationConfig::new(model, protocol, slots, SEED))
}

fn mc_grid(
    protocol: impl Fn(usize) -> Protocol,
    closed: fn(usize, f64) -> Result<f64>,
) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut at = (0, 0.0);
    for m in MC_GRID_M {
        for db in MC_GRID_DB {
            let model = FadingModel::iid(m, db_to_linear(db), 1.0)?;
            let sim = simulate(model, protocol(m), MC_SLOTS)?.avg_rate_sd;
            let e = rel_err(sim, closed(m, db_to_linear(db))?);
            if e > worst {
                worst = e;
                at = (m, db);
            }
        }
    }
    Ok((
        worst <= 0.01,
        format!("max rel err {worst:.2e} (M={}, {} dB), tol 1e-2", at.0, at.1),
    ))
}

fn ba_closed_form() -> Result<(bool, String)> {
    mc_grid(
        |m| Protocol::BufferAidedGenie { mu: SelectionWeights::uniform(m) },
        closed_form_rate_ba_iid_rayleigh,
    )
}

fn conv_closed_form() -> Result<(bool, String)> {
    mc_grid(|_| Protocol::Conventional, closed_form_rate_conv_iid_rayleigh)
}

fn quadrature_vs_closed_form() -> Result<(bool, String)> {
    let quad = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-13, ..QuadOptions::default() };
    let mut worst: f64 = 0.0;
    for m in 1..=10 {
        for snr in [0.1, 1.0, 10.0, 100.0] {
            let model = FadingModel::iid(m, snr, 1.0)?;
            let mu = SelectionWeights::uniform(m);
            let ctx = EffectiveDensityContext::new(&model, &mu);
            // buffer-aided rate = Σ_k E[log2(1+Γ_kD)], identical across k
            let per = ctx.expected_log_rate(Side::Relay, 0, quad)?;
            let e = (m as f64 * per - closed_form_rate_ba_iid_rayleigh(m, snr)?).abs();
            worst = worst.max(e);
        }
    }
    Ok((worst <= 1e-6, format!("max abs diff {worst:.2e}, tol 1e-6")))
}

fn iid_fixed_point() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (m, snr, omega) in [(1, 1.0, 1.0), (2, 10.0, 0.5), (5, 100.0, 2.0), (8, 0.1, 1.0)] {
        let r = solve_mu_star(&FadingModel::iid(m, snr, omega)?, &SolverOptions::default())?;
        worst = r.mu_star.iter().fold(worst, |w, mu| w.max((mu - 0.5).abs()));
    }
    Ok((worst <= 1e-6, format!("max |mu - 1/2| = {worst:.2e}, tol 1e-6")))
}

fn low_snr() -> Result<(bool, String)> {
    let snr = db_to_linear(-20.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [1, 2, 5] {
        let target = low_snr_ratio(m);
        let closed = closed_form_rate_ba_iid_rayleigh(m, snr)? / closed_form_rate_conv_iid_rayleigh(m, snr)?;
        let model = FadingModel::iid(m, snr, 1.0)?;
        let ba = simulate(model.clone(), Protocol::MaxLink, MC_SLOTS)?.avg_rate_sd;
        let conv = simulate(model, Protocol::Conventional, MC_SLOTS)?.avg_rate_sd;
        let sim = ba / conv;
        ok &= rel_err(closed, target) <= 0.05 && rel_err(sim, target) <= 0.05;
        parts.push(format!("M={m}: closed {closed:.4} sim {sim:.4} vs {target:.4}"));
    }
    Ok((ok, format!("{}; tol 5%", parts.join(", "))))
}

fn high_snr() -> Result<(bool, String)> {
    let snr = db_to_linear(40.0);
    let mut worst: f64 = 0.0;
    for m in [1, 2, 5] {
        let gap = closed_form_rate_ba_iid_rayleigh(m, snr)? - closed_form_rate_conv_iid_rayleigh(m, snr)?;
        worst = worst.max((gap - high_snr_gap(m)?).abs());
    }
    let one = high_snr_gap(1)?;
    Ok((
        worst <= 0.05 && one == 1.0,
        format!("max |gap - asymptote| {worst:.2e} (tol 0.05), gap(1) = {one}"),
    ))
}

fn flow_balance() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for db in [0.0, 10.0, 20.0] {
        let model = ind_model(db);
        let mu = solve_mu_star(&model, &SolverOptions::default())?.weights();
        let r = simulate(model, Protocol::BufferAidedGenie { mu }, MC_SLOTS)?;
        let peak = r.per_relay_arrival.iter().cloned().fold(0.0, f64::max);
        worst = worst.max(r.max_abs_flow_residual() / peak);
    }
    Ok((worst <= 0.02, format!("max residual / max arrival {worst:.2e}, tol 2e-2")))
}

fn adaptive_convergence() -> Result<(bool, String)> {
    let model = ind_model(0.0);
    let mu_star = solve_mu_star(&model, &SolverOptions::default())?.mu_star;
    let mut cfg = SimulationConfig::new(model, Protocol::BufferAidedAdaptive, 100_000, SEED);
    cfg.mu_step = Some(StepSize::default_mu());
    let r = run_simulation(&cfg)?;
    let worst = r
        .final_mu
        .iter()
        .zip(&mu_star)
        .fold(0.0f64, |w, (a, b)| w.max((a - b).abs()));
    Ok((worst <= 0.02, format!("max |mu_e - mu*| {worst:.4}, tol 0.02")))
}

fn delay_convergence() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for db in [20.0, 25.0] {
        let model = ind_model(db);
        let mu = solve_mu_star(&model, &SolverOptions::default())?.weights();
        let limited = simulate(model.clone(), Protocol::DelayLimited { delay_target: 5.0 }, 100_000)?;
        let genie = simulate(model, Protocol::BufferAidedGenie { mu }, 100_000)?;
        let delay = limited.avg_delay.unwrap_or(f64::NAN);
        ok &= (4.5..=5.5).contains(&delay) && limited.avg_rate_sd < genie.avg_rate_sd;
        parts.push(format!(
            "{db} dB: delay {delay:.3}, rate {:.4} < genie {:.4}",
            limited.avg_rate_sd, genie.avg_rate_sd
        ));
    }
    Ok((ok, format!("{}; band [4.5, 5.5]", parts.join(", "))))
}

/// Deterministic sweep of the structural invariants over a few models and seeds.
fn properties() -> Result<(bool, String)> {
    let mut failures = Vec::new();
    let slots = 20_000u64;
    let models = [
        FadingModel::iid(1, 1.0, 1.0)?,
        FadingModel::iid(4, 10.0, 1.0)?,
        ind_model(10.0),
    ];

    for (mi, model) in models.iter().enumerate() {
        let m = model.num_relays();
        for seed in 1..=3u64 {
            // one relay active, queues non-negative, bits conserved
            let mut state = NetworkState::new(m);
            let mut stream = RandomStream::new(seed, m);
            let lambda_step = StepSize::default_lambda(model.snr_ref());
            let (mut rx, mut tx) = (0.0, 0.0);
            for _ in 0..slots {
                let slot = sample_slot(model, &mut stream);
                state.update_lambda(5.0, &lambda_step);
                let sel = select_delay_limited(&slot, &state);
                let before = state.queues.clone();
                let d = state.apply_decision(sel, &slot)?;
                state.update_rate_estimates(sel, &slot);
                let changed = before.iter().zip(&state.queues).filter(|(a, b)| a != b).count();
                if changed > 1 {
                    failures.push(format!("model {mi}: {changed} relays active in one slot"));
                }
                if state.queues.iter().any(|q| *q < 0.0) {
                    failures.push(format!("model {mi}: negative queue"));
                }
                rx += d.bits_received();
                tx += d.bits_delivered();
            }
            let audit = (rx - tx - state.total_queue()).abs();
            if audit > 1e-9 * slots as f64 {
                failures.push(format!("model {mi} seed {seed}: conservation off by {audit:e}"));
            }

            // determinism
            let cfg = SimulationConfig::new(model.clone(), Protocol::BufferAidedAdaptive, 2_000, seed);
            if run_simulation(&cfg)? != run_simulation(&cfg)? {
                failures.push(format!("model {mi} seed {seed}: nondeterministic"));
            }

            // max-link equals the weighted rule at one half on i.i.d. links
            if model.is_iid() {
                let half = vec![0.5; m];
                let mut stream = RandomStream::new(seed, m);
                for _ in 0..slots {
                    let slot = sample_slot(model, &mut stream);
                    if select_max_link(&slot) != select_buffer_aided(&slot, &half) {
                        failures.push(format!("model {mi} seed {seed}: max-link trace differs"));
                        break;
                    }
                }
            }
        }

        // the 2M effective densities partition the selection events
        let weights = [SelectionWeights::uniform(m), SelectionWeights::new(vec![0.3; m])?];
        for mu in &weights {
            let ctx = EffectiveDensityContext::new(model, mu);
            let mut mass = 0.0;
            for k in 0..m {
                mass += ctx.selection_probability(Side::Source, k, QuadOptions::default())?;
                mass += ctx.selection_probability(Side::Relay, k, QuadOptions::default())?;
            }
            if (mass - 1.0).abs() > 1e-6 {
                failures.push(format!("model {mi}: density mass {mass}"));
            }
        }
    }
    Ok(if failures.is_empty() {
        (true, "all invariants hold".to_string())
    } else {
        (false, failures.join("; "))
    })
}

fn overhead() -> Result<(bool, String)> {
    for m in 1..=10u32 {
        let c = signaling_overhead(m, Implementation::Centralized)?;
        let d = signaling_overhead(m, Implementation::Distributed)?;
        let expect = SignalingOverhead::Centralized { base: 2 * m + 4, with_feedback: 2 * m + 5 };
        if c != expect || d != SignalingOverhead::Distributed(4) {
            return Ok((false, format!("mismatch at M={m}: {c:?}, {d:?}")));
        }
    }
    Ok((true, "centralized (2M+4, 2M+5), distributed 4 for M=1..10".to_string()))
}
