//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/FAIL line (visible with `--nocapture`) with its wall time,
//! and asserts the runtime budget where one is pinned.
//!
//! Run with: cargo test --test acceptance -- --nocapture

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use fockqng::channels::{
    binomial_loss, coherent_state, damp_evolve, fock_decay_times, lindblad_propagate,
    LossChannel, NoiseParams,
};
use fockqng::control::{
    cqad_hamiltonian, grape_optimize, rpn_basis, rpn_fit, simulate_preparation_chain,
    transfer_amplitude, transfer_with_gradient, ChainNoise, GrapeConfig, SystemParams,
};
use fockqng::hilbert::{
    displacement_operator, displacement_overlap, squeezing_operator, DensityMatrix, FockBasis,
    FockDistribution,
};
use fockqng::io::read_distribution;
use fockqng::metrology::{
    crossover_eta, damped_fock_fisher, fisher_profile, force_sensitivity, qfi_fock,
    small_alpha_fisher, zero_point_fluctuation, ForceParams,
};
use fockqng::qng::{
    depth_time_equivalent, qng_depth, qng_witness, sample_core_point, threshold_curve,
    OptimizerConfig, QngPoint, ThresholdCurve,
};

// ---------------------------------------------------------------------------
// shared fixtures and reporting

const ACCEPT_A_GRID: [f64; 9] = [0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];

fn accept_cfg() -> OptimizerConfig {
    OptimizerConfig {
        restarts: 12,
        dim: 32,
        max_evals: 300,
        ..OptimizerConfig::default()
    }
}

/// Threshold curves for n = 1..6 computed once and shared between the
/// envelope, depth-ordering, and certification criteria.
fn curves() -> &'static [ThresholdCurve] {
    static CURVES: OnceLock<Vec<ThresholdCurve>> = OnceLock::new();
    CURVES.get_or_init(|| {
        let cfg = accept_cfg();
        (1..=6)
            .map(|n| threshold_curve(n, &ACCEPT_A_GRID, &cfg).expect("threshold curve"))
            .collect()
    })
}

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// Writes straight to the process stdout so the per-criterion line survives
/// the test harness's output capture even without `--nocapture`.
fn report(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn verdict(criterion: usize, started: Instant, limit_s: Option<f64>, outcome: Result<String, String>) {
    let elapsed = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            report(&format!("ACCEPTANCE {criterion:>2} PASS ({elapsed:.1}s): {detail}"));
            if let Some(limit) = limit_s {
                assert!(
                    elapsed < limit,
                    "criterion {criterion} passed but took {elapsed:.1}s (budget {limit}s)"
                );
            }
        }
        Err(detail) => {
            report(&format!("ACCEPTANCE {criterion:>2} FAIL ({elapsed:.1}s): {detail}"));
            panic!("criterion {criterion} failed: {detail}");
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------

/// 1. Closed-form transition probabilities against the matrix-exponential
///    displacement operator at dim 60.
#[test]
fn criterion_01_overlap_oracle() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let basis = FockBasis::new(60).map_err(err)?;
        let alphas = [
            C64::new(0.3, 0.0),
            C64::new(1.0, 0.5),
            C64::new(-1.2, 1.3),
            C64::new(0.0, 2.0),
            C64::new(2.0, 0.0),
            C64::new(-0.4, -1.7),
        ];
        let mut worst = 0.0f64;
        for &alpha in &alphas {
            let d = displacement_operator(alpha, basis);
            for m in 0..=10 {
                for n in 0..=10 {
                    let closed = displacement_overlap(m, n, alpha);
                    let matrix = d[(m, n)].norm_sqr();
                    worst = worst.max((closed - matrix).abs());
                }
            }
        }
        if worst < 1e-9 {
            Ok(format!("max |closed - expm| = {worst:.2e} over m,n <= 10, 6 amplitudes"))
        } else {
            Err(format!("max deviation {worst:.2e} >= 1e-9"))
        }
    })();
    verdict(1, started, Some(10.0), outcome);
}

/// 2. Pure Fock states saturate the quantum bound 4(2n+1) at every
///    displacement amplitude.
#[test]
fn criterion_02_pure_fock_saturation() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let mut worst = 0.0f64;
        for n in 0..=8 {
            let dist = FockDistribution::fock(n, n + 2).map_err(err)?;
            for alpha in [0.1, 0.5, 1.0, 1.5] {
                let profile = fisher_profile(&dist, &[alpha]).map_err(err)?;
                let rel = (profile.fi_max - qfi_fock(n)).abs() / qfi_fock(n);
                worst = worst.max(rel);
            }
        }
        if worst < 1e-5 {
            Ok(format!("max relative error {worst:.2e} for n <= 8"))
        } else {
            Err(format!("relative error {worst:.2e} >= 1e-5"))
        }
    })();
    verdict(2, started, Some(30.0), outcome);
}

/// 3. Analytic amplitude-damping channel against the Lindblad integrator,
///    including pure dephasing, at dim 20.
#[test]
fn criterion_03_channel_vs_integrator() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let dim = 20;
        let basis = FockBasis::new(dim).map_err(err)?;
        let kappa: f64 = 1.0;
        let gamma_phi: f64 = 0.15;
        let psi = coherent_state(C64::new(1.1, 0.3), basis).map_err(err)?;
        let rho0 = DensityMatrix::from_pure(&psi);

        let l1 = basis.annihilation().map(|z| z * C64::new(kappa.sqrt(), 0.0));
        let l2 = basis.number().map(|z| z * C64::new((2.0 * gamma_phi).sqrt(), 0.0));
        let h = DMatrix::<C64>::zeros(dim, dim);
        let grid = [0.0, 0.5, 1.5, 3.0];
        let snaps = lindblad_propagate(&h, &[l1, l2], &rho0, &grid).map_err(err)?;
        let noise = NoiseParams::new(kappa, gamma_phi, 0.0).map_err(err)?;

        let mut worst = 0.0f64;
        for (&t, numeric) in grid.iter().zip(&snaps) {
            let analytic = damp_evolve(&rho0, &noise, t, None).map_err(err)?;
            let diff = numeric.elements() - analytic.elements();
            // trace distance of Hermitian difference: half the absolute
            // eigenvalue sum
            let eigs = diff.symmetric_eigen().eigenvalues;
            let td = 0.5 * eigs.iter().map(|l| l.abs()).sum::<f64>();
            worst = worst.max(td);
        }
        if worst < 1e-6 {
            Ok(format!("max trace distance {worst:.2e} over kappa*t <= 3"))
        } else {
            Err(format!("trace distance {worst:.2e} >= 1e-6"))
        }
    })();
    verdict(3, started, Some(60.0), outcome);
}

/// 4. Fitted Fock lifetimes follow tau_1 / n.
#[test]
fn criterion_04_decay_law() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let kappa = 1.0 / 85.0; // 1/us
        let ns: Vec<usize> = (1..=6).collect();
        let taus = fock_decay_times(&ns, kappa).map_err(err)?;
        let mut worst = 0.0f64;
        for (&n, &tau) in ns.iter().zip(&taus) {
            let expected = taus[0] / n as f64;
            worst = worst.max((tau - expected).abs() / expected);
        }
        if worst < 0.01 {
            Ok(format!(
                "tau_1 = {:.2} us, max deviation from tau_1/n: {:.2}%",
                taus[0],
                worst * 100.0
            ))
        } else {
            Err(format!("deviation from tau_1/n reaches {:.2}%", worst * 100.0))
        }
    })();
    verdict(4, started, Some(30.0), outcome);
}

/// 5. Diagonal of the damping channel equals the binomial loss map with
///    eta = exp(-kappa t).
#[test]
fn criterion_05_binomial_equivalence() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let dim = 14;
        let basis = FockBasis::new(dim).map_err(err)?;
        let mut elements = DMatrix::<C64>::zeros(dim, dim);
        // diagonal mixture with weight on several levels
        for (n, w) in [(0usize, 0.1), (2, 0.2), (6, 0.55), (9, 0.15)] {
            elements[(n, n)] = C64::new(w, 0.0);
        }
        let rho0 = DensityMatrix::new(elements, basis).map_err(err)?;
        let dist0 = rho0.diagonal().map_err(err)?;
        let noise = NoiseParams::pure_loss(1.0).map_err(err)?;

        let mut worst = 0.0f64;
        for t in [0.25, 1.0, 2.3] {
            let evolved = damp_evolve(&rho0, &noise, t, None).map_err(err)?;
            let channel = LossChannel::new((-t).exp()).map_err(err)?;
            let direct = binomial_loss(&dist0, &channel);
            let diag = evolved.diagonal().map_err(err)?;
            for n in 0..dim {
                worst = worst.max((diag.prob(n) - direct.prob(n)).abs());
            }
        }
        if worst < 1e-12 {
            Ok(format!("max probability deviation {worst:.2e}"))
        } else {
            Err(format!("probability deviation {worst:.2e} >= 1e-12"))
        }
    })();
    verdict(5, started, None, outcome);
}

/// 6. The d -> 0 Fisher limit of a damped Fock state tracks the plateau
///    approximation 4(n+1) exp(-n t / T1) to 5%.
#[test]
fn criterion_06_small_alpha_plateau() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let mut worst = 0.0f64;
        let mut at = (0usize, 0.0f64);
        for n in 0..=8 {
            for t in [1e-3, 1e-2, 0.1, 0.3, 1.0] {
                let s = small_alpha_fisher(n, t).map_err(err)?;
                let rel = (s.fi_limit - s.fi_approx).abs() / s.fi_limit;
                if rel > worst {
                    worst = rel;
                    at = (n, t);
                }
            }
        }
        if worst < 0.05 {
            Ok(format!(
                "max relative gap {:.2}% at n={}, t/T1={}",
                worst * 100.0,
                at.0,
                at.1
            ))
        } else {
            Err(format!(
                "plateau approximation off by {:.2}% at n={}, t/T1={}",
                worst * 100.0,
                at.0,
                at.1
            ))
        }
    })();
    verdict(6, started, Some(120.0), outcome);
}

/// 7. Sensitivity crossovers between damped Fock states match the closed
///    form eta = ((1+n)/(1+m))^(1/(m-n)).
#[test]
fn criterion_07_crossover() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let exact = crossover_eta(0, 1).map_err(err)?;
        if exact != 0.5 {
            return Err(format!("crossover_eta(0,1) = {exact} != 0.5"));
        }
        let mut details = vec!["eta(0,1) = 0.5 exact".to_string()];
        for (n, m) in [(0usize, 1usize), (1, 2), (2, 3)] {
            let closed = crossover_eta(n, m).map_err(err)?;
            // bisect the exact d -> 0 FI difference in transmittance
            let gap = |eta: f64| -> Result<f64, String> {
                let t = -eta.ln();
                let fn_ = small_alpha_fisher(n, t).map_err(err)?.fi_limit;
                let fm = small_alpha_fisher(m, t).map_err(err)?.fi_limit;
                Ok(fm - fn_)
            };
            let (mut lo, mut hi) = (0.30, 0.95);
            if gap(lo)? >= 0.0 || gap(hi)? <= 0.0 {
                return Err(format!("bracket failure for pair ({n},{m})"));
            }
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if gap(mid)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let numeric = 0.5 * (lo + hi);
            let rel = (numeric - closed).abs() / closed;
            if rel > 0.02 {
                return Err(format!(
                    "pair ({n},{m}): numeric {numeric:.4} vs closed {closed:.4} ({:.2}% off)",
                    rel * 100.0
                ));
            }
            details.push(format!("({n},{m}): {numeric:.4} vs {closed:.4}"));
        }
        Ok(details.join("; "))
    })();
    verdict(7, started, None, outcome);
}

/// 8. Device force budget: 63.2 fN/sqrt(Hz) and x_zpf = 3.2e-19 m.
#[test]
fn criterion_08_force_budget() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let omega = std::f64::consts::TAU * 5.023e9;
        let params = ForceParams {
            mass: 16.2e-9,
            omega,
            t_probe: 90e-6,
            t_dead: 210e-6,
            total_time: 300e-6,
            fq: 4.0,
        };
        let sens = force_sensitivity(&params).map_err(err)?;
        let x_zpf = zero_point_fluctuation(params.mass, omega).map_err(err)?;
        let rel_f = (sens.delta_f0_per_sqrt_hz / 63.2e-15 - 1.0).abs();
        let rel_x = (x_zpf / 3.2e-19 - 1.0).abs();
        if rel_f < 0.01 && rel_x < 0.02 {
            Ok(format!(
                "{:.2} fN/sqrt(Hz) ({:.2}% off), x_zpf {:.3e} m ({:.2}% off)",
                sens.delta_f0_per_sqrt_hz * 1e15,
                rel_f * 100.0,
                x_zpf,
                rel_x * 100.0
            ))
        } else {
            Err(format!(
                "force {:.3e} N/sqrt(Hz) or x_zpf {x_zpf:.3e} m out of tolerance",
                sens.delta_f0_per_sqrt_hz
            ))
        }
    })();
    verdict(8, started, Some(1.0), outcome);
}

/// 9. Envelope property: random core states and their mixtures never
///    violate the computed curves; the a = 0 boundary equals the point
///    threshold; two independent oracles agree on the n = 1 threshold.
#[test]
fn criterion_09_envelope_property() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let cfg = accept_cfg();
        let mut worst_margin = f64::NEG_INFINITY;
        for (idx, curve) in curves().iter().enumerate() {
            let n = idx + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(42 + n as u64);
            let mut points = Vec::with_capacity(1000);
            for _ in 0..1000 {
                points.push(sample_core_point(n, &cfg, &mut rng).map_err(err)?);
            }
            let mut all = points.clone();
            for _ in 0..1000 {
                // convex mixture of two core states stays in the admissible
                // region: both coordinates are linear in the density matrix
                let i = rng.gen_range(0..points.len());
                let j = rng.gen_range(0..points.len());
                let w = rng.gen_range(0.0..1.0);
                all.push(
                    QngPoint::new(
                        n,
                        w * points[i].p_n + (1.0 - w) * points[j].p_n,
                        w * points[i].p_np1 + (1.0 - w) * points[j].p_np1,
                    )
                    .map_err(err)?,
                );
            }
            for point in &all {
                let w = qng_witness(point, curve).map_err(err)?;
                worst_margin = worst_margin.max(w.margin);
                if w.margin > 1e-4 {
                    return Err(format!(
                        "core point (P_{n}={:.4}, P_{}={:.4}) violates by {:.2e}",
                        point.p_n,
                        n + 1,
                        point.p_np1,
                        w.margin
                    ));
                }
            }

            // the a = 0 end of the curve is the point threshold
            let f0 = curve.points[0].f_bar;
            let pbar = curve.max_p_n();
            if (f0 - pbar).abs() > 1e-3 {
                return Err(format!("n={n}: F(0) = {f0:.4} vs P_bar = {pbar:.4}"));
            }
        }

        // independent grid-search oracle for the n = 1 point threshold
        let pbar1_optimizer = curves()[0].max_p_n();
        let pbar1_grid = pbar1_grid_oracle().map_err(err)?;
        if (pbar1_optimizer - pbar1_grid).abs() > 1e-3 {
            return Err(format!(
                "P_bar(1) oracles disagree: optimizer {pbar1_optimizer:.5} vs grid {pbar1_grid:.5}"
            ));
        }
        Ok(format!(
            "12000 states clean (worst margin {worst_margin:.2e}); P_bar(1): {pbar1_optimizer:.4} vs grid {pbar1_grid:.4}"
        ))
    })();
    verdict(9, started, Some(600.0), outcome);
}

/// Dense two-stage grid search for the n = 1 point threshold
/// max |<1| D(alpha) S(r) |0>|^2, independent of the multi-start optimizer.
/// The maximizer is real by phase covariance of the target population.
fn pbar1_grid_oracle() -> Result<f64, fockqng::error::FockError> {
    let basis = FockBasis::new(40)?;
    let eval = |alpha: f64, r: f64| {
        let s = squeezing_operator(C64::new(r, 0.0), basis).value;
        let d = displacement_operator(C64::new(alpha, 0.0), basis);
        let psi = d * s.column(0);
        psi[1].norm_sqr()
    };
    let mut best = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..45 {
        let alpha = 2.2 * i as f64 / 44.0;
        for j in 0..37 {
            let r = -0.9 + 1.8 * j as f64 / 36.0;
            let p = eval(alpha, r);
            if p > best.0 {
                best = (p, alpha, r);
            }
        }
    }
    let (mut p, a0, r0) = best;
    for i in 0..25 {
        let alpha = (a0 - 0.06 + 0.12 * i as f64 / 24.0).max(0.0);
        for j in 0..25 {
            let r = r0 - 0.06 + 0.12 * j as f64 / 24.0;
            p = p.max(eval(alpha, r));
        }
    }
    Ok(p)
}

/// 10. Depth ordering: ideal Fock states tolerate strictly less loss as n
///     grows, and the attenuation/time depths agree through eta = e^(-kt).
#[test]
fn criterion_10_depth_ordering() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let kappa = 1.0 / 85.0;
        let mut depths = Vec::new();
        for (idx, curve) in curves().iter().enumerate() {
            let n = idx + 1;
            let dist = FockDistribution::fock(n, n + 2).map_err(err)?;
            let d = qng_depth(&dist, n, curve).map_err(err)?;
            if !d.violating {
                return Err(format!("ideal |{n}> does not violate its own curve"));
            }
            let t_star = depth_time_equivalent(d.eta_min, kappa).map_err(err)?;
            let eta_back = (-kappa * t_star).exp();
            if (eta_back - d.eta_min).abs() > 1e-12 {
                return Err(format!(
                    "n={n}: eta <-> t mapping not exact ({:.3e} gap)",
                    (eta_back - d.eta_min).abs()
                ));
            }
            depths.push(d.depth_db);
        }
        for w in depths.windows(2) {
            if w[1] >= w[0] {
                return Err(format!("depth not strictly decreasing: {depths:.3?}"));
            }
        }
        Ok(format!(
            "depths [dB] = {:?}",
            depths.iter().map(|d| (d * 1e3).round() / 1e3).collect::<Vec<_>>()
        ))
    })();
    verdict(10, started, None, outcome);
}

/// 11. Pulse synthesis reaches >= 0.99 closed-system fidelity for n = 1..3
///     within <= 4 us, the analytic gradient matches finite differences,
///     and the decoherence/readout fidelity trends are qualitatively right.
#[test]
fn criterion_11_grape() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        gradient_fd_check()?;

        let cfg = GrapeConfig::default(); // dt = 4 ns, target 0.999
        let durations = [2.0e-6, 3.0e-6, 4.0e-6];
        let mut green = Vec::new();
        let mut orange = Vec::new();
        let mut fidelities = Vec::new();
        for n in 1..=3usize {
            let params = SystemParams::device(n + 4).map_err(err)?;
            let result = grape_optimize(n, durations[n - 1], &params, &cfg).map_err(err)?;
            if result.fidelity < 0.99 {
                return Err(format!(
                    "n={n}: fidelity {:.4} < 0.99 after {} iterations",
                    result.fidelity, result.iterations
                ));
            }
            fidelities.push(result.fidelity);
            let report = simulate_preparation_chain(
                &result.pulse,
                n,
                &params,
                &ChainNoise::device(),
                Some(10e-6),
            )
            .map_err(err)?;
            green.push(report.fidelity_prepared);
            orange.push(report.fidelity_readout.expect("readout requested"));
        }
        for w in green.windows(2) {
            if w[1] >= w[0] {
                return Err(format!("decoherence trend not declining: {green:?}"));
            }
        }
        for (n, (g, o)) in green.iter().zip(&orange).enumerate() {
            if o >= g {
                return Err(format!("readout fidelity not below prepared at n={}", n + 1));
            }
        }
        Ok(format!(
            "fidelities {:?}, prepared {:?}, readout {:?}",
            round3(&fidelities),
            round3(&green),
            round3(&orange)
        ))
    })();
    verdict(11, started, Some(900.0), outcome);
}

fn round3(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e3).round() / 1e3).collect()
}

fn gradient_fd_check() -> Result<(), String> {
    let params = SystemParams::device(5).map_err(err)?;
    let h = cqad_hamiltonian(&params);
    let dim = params.dim();
    let mut initial = DVector::zeros(dim);
    initial[params.index(0, 0)] = C64::new(1.0, 0.0);
    let mut target = DVector::zeros(dim);
    target[params.index(0, 1)] = C64::new(1.0, 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let amp = std::f64::consts::TAU * 2e6;
    let samples: Vec<C64> = (0..3)
        .map(|_| C64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
        .collect();
    let dt = 0.2e-6;
    let adj = transfer_with_gradient(&samples, dt, &h, &initial, &target);
    let step = 1e-6 * amp;
    for k in 0..samples.len() {
        for quad in 0..2 {
            let delta = if quad == 0 { C64::new(step, 0.0) } else { C64::new(0.0, step) };
            let mut plus = samples.clone();
            let mut minus = samples.clone();
            plus[k] += delta;
            minus[k] -= delta;
            let fp = transfer_amplitude(&plus, dt, &h, &initial, &target).norm();
            let fm = transfer_amplitude(&minus, dt, &h, &initial, &target).norm();
            let numeric = (fp - fm) / (2.0 * step);
            let analytic = if quad == 0 { adj.grad[k].re } else { adj.grad[k].im };
            let rel = (numeric - analytic).abs() / numeric.abs().max(1e-12);
            if rel > 1e-5 {
                return Err(format!(
                    "gradient check: segment {k} quad {quad} off by {rel:.2e}"
                ));
            }
        }
    }
    Ok(())
}

/// 12. Readout inversion: exact recovery of noiseless mixtures, and mean L1
///     error below 0.02 at sigma = 0.01 over 100 noise seeds.
#[test]
fn criterion_12_rpn_round_trip() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let n_max = 3;
        let params = SystemParams::device(6).map_err(err)?;
        let noise = ChainNoise::device();
        let t_grid: Vec<f64> = (0..61).map(|k| 3.0e-6 * k as f64 / 60.0).collect();
        let basis = rpn_basis(n_max, &params, &noise, &t_grid).map_err(err)?;

        let mixtures: [Vec<f64>; 3] = [
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.5, 0.0, 0.3, 0.15],
        ];
        let mut worst_clean = 0.0f64;
        for probs in &mixtures {
            let trace: Vec<f64> = (0..t_grid.len())
                .map(|k| {
                    probs
                        .iter()
                        .zip(&basis.curves)
                        .map(|(p, c)| p * c[k])
                        .sum()
                })
                .collect();
            let fit = rpn_fit(&trace, &basis).map_err(err)?;
            for (n, &p) in probs.iter().enumerate() {
                worst_clean = worst_clean.max((fit.distribution.prob(n) - p).abs());
            }
        }
        if worst_clean >= 1e-6 {
            return Err(format!("noiseless recovery error {worst_clean:.2e} >= 1e-6"));
        }

        let truth = &mixtures[1];
        let clean: Vec<f64> = (0..t_grid.len())
            .map(|k| truth.iter().zip(&basis.curves).map(|(p, c)| p * c[k]).sum())
            .collect();
        let sigma = 0.01;
        let mut total_l1 = 0.0;
        let seeds = 100u64;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let noisy: Vec<f64> = clean
                .iter()
                .map(|&p| p + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let fit = rpn_fit(&noisy, &basis).map_err(err)?;
            total_l1 += truth
                .iter()
                .enumerate()
                .map(|(n, &p)| (fit.distribution.prob(n) - p).abs())
                .sum::<f64>();
        }
        let mean_l1 = total_l1 / seeds as f64;
        if mean_l1 < 0.02 {
            Ok(format!(
                "noiseless error {worst_clean:.1e}; mean L1 {mean_l1:.4} over {seeds} seeds"
            ))
        } else {
            Err(format!("mean L1 {mean_l1:.4} >= 0.02"))
        }
    })();
    verdict(12, started, Some(300.0), outcome);
}

/// 13. Sensing hierarchy under readout loss (T1 = 89 us, t_ro in 8..12 us):
///     the damped |6> outperforms |3> subjected to the same channel at every
///     readout duration, and measured-style distributions stay below the
///     ideal |2> bound of 20.
#[test]
fn criterion_13_hierarchy() {
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let noise = NoiseParams::pure_loss(1.0 / 89.0).map_err(err)?;
        let grid: Vec<f64> = (1..=40).map(|k| 0.05 * k as f64).collect();
        let mut pairs = Vec::new();
        for t_ro in [8.0, 10.0, 12.0] {
            let six = damped_fock_fisher(6, &noise, t_ro, &grid).map_err(err)?;
            let three = damped_fock_fisher(3, &noise, t_ro, &grid).map_err(err)?;
            if six.fi_max <= three.fi_max {
                return Err(format!(
                    "t_ro={t_ro} us: damped |6> ({:.2}) does not beat damped |3> ({:.2})",
                    six.fi_max, three.fi_max
                ));
            }
            pairs.push(format!("{t_ro}us: {:.1}>{:.1}", six.fi_max, three.fi_max));
        }
        let mut measured_max = 0.0f64;
        for n in 1..=6 {
            let dist = read_distribution(&data_path(&format!("measured-n{n}.json")))
                .map_err(err)?
                .distribution()
                .map_err(err)?;
            let profile = fisher_profile(&dist, &grid).map_err(err)?;
            measured_max = measured_max.max(profile.fi_max);
            if profile.fi_max >= 20.0 {
                return Err(format!(
                    "measured-style n={n} reaches FI {:.2} >= 20",
                    profile.fi_max
                ));
            }
        }
        Ok(format!(
            "damped |6> vs |3|: {}; measured-style max FI {measured_max:.2} < 20",
            pairs.join(", ")
        ))
    })();
    verdict(13, started, None, outcome);
}
