//! State preparation and readout for a qubit–oscillator device.
//!
//! Builds the driven Jaynes–Cummings Hamiltonian of a transmon coupled to a
//! phonon mode in the rotating frame of the drive, synthesizes
//! state-preparation pulses by gradient ascent with exact per-segment
//! gradients, predicts preparation fidelities under decoherence, and
//! simulates/inverts the resonant phonon-number (RPN) readout in which the
//! qubit Rabi oscillations at sqrt(n+1)-scaled frequencies encode the phonon
//! distribution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{damp_evolve, lindblad_propagate, NoiseParams};
use crate::error::{FockError, Result};
use crate::hilbert::{DensityMatrix, FockBasis, FockDistribution, StateVector};
use crate::optim::nnls;

/// Device constants of the coupled qubit–phonon system, all angular
/// frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Qubit 0-1 transition frequency.
    pub omega_q: f64,
    /// Transmon anharmonicity (positive number; enters as -anharm/2 q'²q²).
    pub anharm: f64,
    /// Phonon mode frequency.
    pub omega_a: f64,
    /// Jaynes–Cummings coupling strength.
    pub g: f64,
    /// Drive frequency defining the rotating frame.
    pub omega_d: f64,
    /// Transmon levels kept (>= 2; 3 exposes drive-induced leakage).
    pub qubit_levels: usize,
    /// Phonon levels kept.
    pub phonon_levels: usize,
}

impl SystemParams {
    pub fn new(
        omega_q: f64,
        anharm: f64,
        omega_a: f64,
        g: f64,
        omega_d: f64,
        qubit_levels: usize,
        phonon_levels: usize,
    ) -> Result<Self> {
        if g <= 0.0 {
            return Err(FockError::Domain(format!("coupling must be > 0, got {g}")));
        }
        if qubit_levels < 2 || phonon_levels < 2 {
            return Err(FockError::Domain(format!(
                "need >= 2 levels per mode, got {qubit_levels} x {phonon_levels}"
            )));
        }
        Ok(Self {
            omega_q,
            anharm,
            omega_a,
            g,
            omega_d,
            qubit_levels,
            phonon_levels,
        })
    }

    /// Resonant preparation condition: qubit tuned onto the phonon, drive on
    /// resonance with both, so the frame drift keeps only anharmonicity and
    /// the coupling.
    pub fn resonant(g: f64, anharm: f64, qubit_levels: usize, phonon_levels: usize) -> Result<Self> {
        let omega = std::f64::consts::TAU * 5.023e9;
        Self::new(omega, anharm, omega, g, omega, qubit_levels, phonon_levels)
    }

    /// The device of the reference experiment, tuned to resonance:
    /// g = 2π·292 kHz, anharmonicity 2π·185 MHz, three transmon levels.
    pub fn device(phonon_levels: usize) -> Result<Self> {
        Self::resonant(
            std::f64::consts::TAU * 292e3,
            std::f64::consts::TAU * 185e6,
            3,
            phonon_levels,
        )
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.qubit_levels * self.phonon_levels
    }

    /// Flat index of |qubit i, phonon m>.
    pub fn index(&self, i: usize, m: usize) -> usize {
        i * self.phonon_levels + m
    }
}

/// Drift and drive-quadrature generators on the product space.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianBundle {
    /// Detunings, anharmonicity and the qubit–phonon coupling.
    pub drift: DMatrix<C64>,
    /// In-phase drive operator q' + q.
    pub control_real: DMatrix<C64>,
    /// Quadrature drive operator i(q' - q).
    pub control_imag: DMatrix<C64>,
    pub qubit_levels: usize,
    pub phonon_levels: usize,
}

fn lowering(dim: usize) -> DMatrix<C64> {
    let mut op = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        op[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    op
}

/// Driven Jaynes–Cummings Hamiltonian in the frame rotating at the drive:
/// H = dq q'q - (anharm/2) q'²q² + da a'a + g (q a' + q' a), with the two
/// drive quadratures returned separately.
pub fn cqad_hamiltonian(params: &SystemParams) -> HamiltonianBundle {
    let q = lowering(params.qubit_levels);
    let qd = q.adjoint();
    let a = lowering(params.phonon_levels);
    let ad = a.adjoint();
    let iq = DMatrix::<C64>::identity(params.qubit_levels, params.qubit_levels);
    let ia = DMatrix::<C64>::identity(params.phonon_levels, params.phonon_levels);

    let nq = &qd * &q;
    let kerr = &qd * &qd * &q * &q;
    let na = &ad * &a;

    let dq = C64::new(params.omega_q - params.omega_d, 0.0);
    let da = C64::new(params.omega_a - params.omega_d, 0.0);
    let half_anharm = C64::new(-params.anharm / 2.0, 0.0);
    let g = C64::new(params.g, 0.0);

    let drift = (nq.map(|z| z * dq) + kerr.map(|z| z * half_anharm)).kronecker(&ia)
        + iq.kronecker(&na.map(|z| z * da))
        + (q.kronecker(&ad) + qd.kronecker(&a)).map(|z| z * g);
    let control_real = (&qd + &q).kronecker(&ia);
    let control_imag = (&qd - &q).map(|z| z * C64::new(0.0, 1.0)).kronecker(&ia);

    HamiltonianBundle {
        drift,
        control_real,
        control_imag,
        qubit_levels: params.qubit_levels,
        phonon_levels: params.phonon_levels,
    }
}

/// Piecewise-constant drive envelope; the real and imaginary parts of each
/// sample are the I and Q quadrature amplitudes in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Segment length in seconds.
    pub dt: f64,
    pub samples: Vec<C64>,
}

impl Pulse {
    pub fn new(dt: f64, samples: Vec<C64>) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(FockError::Domain(format!("step must be positive, got {dt}")));
        }
        Ok(Self { dt, samples })
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    /// Largest drive magnitude over the envelope.
    pub fn peak_amplitude(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Exact single-segment propagator applied to a state: exp(-i H dt) psi via
/// eigendecomposition of the Hermitian H.
fn step_state(h: &DMatrix<C64>, dt: f64, psi: &DVector<C64>) -> DVector<C64> {
    let eig = h.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let mut y = q.adjoint() * psi;
    for (j, v) in y.iter_mut().enumerate() {
        *v *= C64::from_polar(1.0, -eig.eigenvalues[j] * dt);
    }
    q * y
}

/// Propagate a state through a pulse with exact per-segment propagators.
/// The state lives on the flattened product space of the bundle.
pub fn propagate_pulse(
    pulse: &Pulse,
    h: &HamiltonianBundle,
    initial: &StateVector,
) -> Result<StateVector> {
    let dim = h.drift.nrows();
    if initial.basis().dim() != dim {
        return Err(FockError::DimensionMismatch {
            expected: dim,
            got: initial.basis().dim(),
        });
    }
    let mut psi = initial.amplitudes().clone();
    for omega in &pulse.samples {
        let hk = &h.drift
            + h.control_real.map(|z| z * C64::new(omega.re, 0.0))
            + h.control_imag.map(|z| z * C64::new(omega.im, 0.0));
        psi = step_state(&hk, pulse.dt, &psi);
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(FockError::Integrator(format!(
            "propagation lost unitarity: |psi| = {norm}"
        )));
    }
    StateVector::new(psi, initial.basis())
}

/// Settings for the gradient-ascent pulse search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrapeConfig {
    /// Segment length in seconds.
    pub dt: f64,
    /// Stop once the fidelity reaches this value.
    pub target_fidelity: f64,
    pub max_iters: usize,
    /// Hard cap on |Omega| in rad/s; enforced by radial clipping.
    pub amplitude_ceiling: f64,
    /// Scale of the random initial envelope relative to the ceiling.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self {
            dt: 4e-9,
            target_fidelity: 0.999,
            max_iters: 400,
            amplitude_ceiling: std::f64::consts::TAU * 5e6,
            init_scale: 0.1,
            seed: 1,
        }
    }
}

/// Synthesized pulse together with its convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrapeResult {
    pub pulse: Pulse,
    /// |<target, g| U(pulse) |0, g>| of the returned pulse.
    pub fidelity: f64,
    pub iterations: usize,
    /// Best fidelity after each iteration; nondecreasing by construction.
    pub fidelity_history: Vec<f64>,
    /// False when the search stalled below the target fidelity.
    pub converged: bool,
}

fn clip_to_ceiling(samples: &mut [C64], ceiling: f64) {
    for z in samples.iter_mut() {
        let r = z.norm();
        if r > ceiling {
            *z *= ceiling / r;
        }
    }
}

/// Transfer amplitude magnitude sensitivity of a piecewise-constant pulse:
/// the overlap z = <target|U_N ... U_1|initial> together with the exact
/// gradient of |z| with respect to each segment's I and Q values.
pub struct Adjoint {
    /// Transfer amplitude of the full pulse.
    pub z: C64,
    /// grad[k] = d|z|/dI_k + i d|z|/dQ_k.
    pub grad: Vec<C64>,
}

/// Transfer amplitude <target|U(pulse)|initial> of a piecewise-constant
/// control sequence.
pub fn transfer_amplitude(
    samples: &[C64],
    dt: f64,
    h: &HamiltonianBundle,
    initial: &DVector<C64>,
    target: &DVector<C64>,
) -> C64 {
    let mut psi = initial.clone();
    for omega in samples {
        let hk = &h.drift
            + h.control_real.map(|z| z * C64::new(omega.re, 0.0))
            + h.control_imag.map(|z| z * C64::new(omega.im, 0.0));
        psi = step_state(&hk, dt, &psi);
    }
    target.dotc(&psi)
}

/// Transfer amplitude and its exact gradient, from one forward and one
/// backward pass over the segment eigensystems.
pub fn transfer_with_gradient(
    samples: &[C64],
    dt: f64,
    h: &HamiltonianBundle,
    initial: &DVector<C64>,
    target: &DVector<C64>,
) -> Adjoint {
    let n = samples.len();
    let dim = h.drift.nrows();
    // forward pass, keeping each segment's eigensystem and entry state
    let mut eigs = Vec::with_capacity(n);
    let mut entries = Vec::with_capacity(n);
    let mut psi = initial.clone();
    for omega in samples {
        let hk = &h.drift
            + h.control_real.map(|z| z * C64::new(omega.re, 0.0))
            + h.control_imag.map(|z| z * C64::new(omega.im, 0.0));
        let eig = hk.symmetric_eigen();
        entries.push(psi.clone());
        let mut y = eig.eigenvectors.adjoint() * &psi;
        for (j, v) in y.iter_mut().enumerate() {
            *v *= C64::from_polar(1.0, -eig.eigenvalues[j] * dt);
        }
        psi = &eig.eigenvectors * y;
        eigs.push(eig);
    }
    let z = target.dotc(&psi);
    let zmag = z.norm().max(1e-300);

    // backward pass: lambda_k = U_{k+1}' ... U_N' target
    let mut lambda = target.clone();
    let mut grad = vec![C64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let v = &eigs[k].eigenvectors;
        let evals = &eigs[k].eigenvalues;
        let u = v.adjoint() * &lambda; // components of the costate
        let w = v.adjoint() * &entries[k]; // components of the entry state
        // Frechet derivative of exp(-i H dt): in the eigenbasis the
        // direction picks up the divided-difference factors
        // phi_jl = (e^{mu_j} - e^{mu_l}) / (mu_j - mu_l), mu = -i e dt.
        let mut t = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mu_j = C64::new(0.0, -evals[j] * dt);
            let e_j = mu_j.exp();
            for l in 0..dim {
                let mu_l = C64::new(0.0, -evals[l] * dt);
                let dmu = mu_j - mu_l;
                let phi = if dmu.norm() < 1e-12 {
                    // e^{(mu_j + mu_l)/2} stays accurate through the
                    // removable singularity
                    ((mu_j + mu_l) / 2.0).exp()
                } else {
                    (e_j - mu_l.exp()) / dmu
                };
                t[(j, l)] = u[j].conj() * w[l] * phi;
            }
        }
        // dz = -i dt tr(C S) with S = V T^T V'
        let s = v * t.transpose() * v.adjoint();
        let factor = C64::new(0.0, -dt);
        let dz_i = factor * (&h.control_real * &s).trace();
        let dz_q = factor * (&h.control_imag * &s).trace();
        let gi = (z.conj() * dz_i).re / zmag;
        let gq = (z.conj() * dz_q).re / zmag;
        grad[k] = C64::new(gi, gq);

        // step the costate down: lambda_{k-1} = U_k' lambda_k
        let mut y = v.adjoint() * &lambda;
        for (j, val) in y.iter_mut().enumerate() {
            *val *= C64::from_polar(1.0, evals[j] * dt);
        }
        lambda = v * y;
    }
    Adjoint { z, grad }
}

/// Search for a pulse mapping |0, g> to |target_n, g> by monotone gradient
/// ascent on the transfer amplitude, with exact per-segment gradients.
pub fn grape_optimize(
    target_n: usize,
    duration: f64,
    params: &SystemParams,
    cfg: &GrapeConfig,
) -> Result<GrapeResult> {
    if params.phonon_levels < target_n + 4 {
        return Err(FockError::Domain(format!(
            "phonon truncation {} too tight for target |{target_n}> (need >= {})",
            params.phonon_levels,
            target_n + 4
        )));
    }
    let n_seg = (duration / cfg.dt).round() as usize;
    if n_seg == 0 || (n_seg as f64 * cfg.dt - duration).abs() > 1e-6 * cfg.dt {
        return Err(FockError::Domain(format!(
            "duration {duration} is not a multiple of dt = {}",
            cfg.dt
        )));
    }
    let h = cqad_hamiltonian(params);
    let dim = params.dim();
    let mut initial = DVector::zeros(dim);
    initial[params.index(0, 0)] = C64::new(1.0, 0.0);
    let mut target = DVector::zeros(dim);
    target[params.index(0, target_n)] = C64::new(1.0, 0.0);

    // smooth random start: a few Fourier components under the ceiling
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (target_n as u64) << 16);
    let modes: Vec<(f64, f64, f64, f64)> = (1..=4)
        .map(|_| {
            (
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let amp = cfg.init_scale * cfg.amplitude_ceiling;
    let mut samples: Vec<C64> = (0..n_seg)
        .map(|k| {
            let x = k as f64 / n_seg as f64 * std::f64::consts::TAU;
            let mut z = C64::new(0.0, 0.0);
            for &(fi, pi, fq, pq) in &modes {
                z += C64::new((fi * x + pi).sin(), (fq * x + pq).sin());
            }
            z * amp / 4.0
        })
        .collect();
    clip_to_ceiling(&mut samples, cfg.amplitude_ceiling);

    let mut best = transfer_with_gradient(&samples, cfg.dt, &h, &initial, &target);
    let mut fidelity = best.z.norm();
    let mut history = vec![fidelity];
    let mut step = 0.05 * cfg.amplitude_ceiling;
    let mut iterations = 0;
    while iterations < cfg.max_iters && fidelity < cfg.target_fidelity {
        iterations += 1;
        let gnorm = best.grad.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if gnorm < 1e-15 {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut trial = samples.clone();
            for (s, g) in trial.iter_mut().zip(&best.grad) {
                *s += *g * C64::new(step / gnorm, 0.0);
            }
            clip_to_ceiling(&mut trial, cfg.amplitude_ceiling);
            let f_trial = transfer_amplitude(&trial, cfg.dt, &h, &initial, &target).norm();
            if f_trial > fidelity + 1e-14 {
                samples = trial;
                fidelity = f_trial;
                step *= 1.4;
                improved = true;
                break;
            }
            step *= 0.4;
            if step < 1e-12 * cfg.amplitude_ceiling {
                break;
            }
        }
        history.push(fidelity);
        if !improved {
            break;
        }
        best = transfer_with_gradient(&samples, cfg.dt, &h, &initial, &target);
        fidelity = fidelity.max(best.z.norm());
    }

    Ok(GrapeResult {
        pulse: Pulse::new(cfg.dt, samples)?,
        converged: fidelity >= cfg.target_fidelity,
        fidelity,
        iterations,
        fidelity_history: history,
    })
}

/// Decoherence rates of both modes, in rad/s units matching the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainNoise {
    pub qubit: NoiseParams,
    pub phonon: NoiseParams,
}

impl ChainNoise {
    /// Rates of the reference device: qubit T1 = 17.2 us, T2* = 24.5 us;
    /// phonon T1 = 89 us, T2* = 152 us. Pure dephasing is
    /// gamma_phi = 1/T2* - 1/(2 T1).
    pub fn device() -> Self {
        let us = 1e-6;
        let gq = 1.0 / (24.5 * us) - 1.0 / (2.0 * 17.2 * us);
        let ga = 1.0 / (152.0 * us) - 1.0 / (2.0 * 89.0 * us);
        Self {
            qubit: NoiseParams::new(1.0 / (17.2 * us), gq, 0.0).expect("positive rates"),
            phonon: NoiseParams::new(1.0 / (89.0 * us), ga, 0.0).expect("positive rates"),
        }
    }
}

/// Decoherence-aware fidelity prediction for one prepared Fock state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparationReport {
    /// <n, g| rho |n, g> right after the pulse.
    pub fidelity_prepared: f64,
    /// Apparent fidelity after the readout interaction window, when
    /// requested.
    pub fidelity_readout: Option<f64>,
    /// Qubit excitation left entangled with the phonon before reset.
    pub residual_excitation: f64,
}

fn collapse_operators(params: &SystemParams, noise: &ChainNoise) -> Vec<DMatrix<C64>> {
    let q = lowering(params.qubit_levels);
    let a = lowering(params.phonon_levels);
    let iq = DMatrix::<C64>::identity(params.qubit_levels, params.qubit_levels);
    let ia = DMatrix::<C64>::identity(params.phonon_levels, params.phonon_levels);
    let nq = q.adjoint() * &q;
    let na = a.adjoint() * &a;
    let mut ops = Vec::new();
    let mut push = |rate: f64, op: DMatrix<C64>| {
        if rate > 0.0 {
            ops.push(op.map(|z| z * C64::new(rate.sqrt(), 0.0)));
        }
    };
    push(noise.qubit.kappa, q.kronecker(&ia));
    push(2.0 * noise.qubit.gamma_phi, nq.kronecker(&ia));
    push(noise.phonon.kappa, iq.kronecker(&a));
    push(2.0 * noise.phonon.gamma_phi, iq.kronecker(&na));
    ops
}

/// Open-system propagation of a preparation pulse, reporting the Fock-state
/// fidelity after the pulse and, optionally, the further degradation over an
/// effective readout window of length `t_ro`.
///
/// The readout is modeled as amplitude damping of the phonon marginal at the
/// combined rate kappa_ph + kappa_q / 2: during the resonant readout
/// interaction the excitation spends about half its time in the qubit.
pub fn simulate_preparation_chain(
    pulse: &Pulse,
    target_n: usize,
    params: &SystemParams,
    noise: &ChainNoise,
    t_ro: Option<f64>,
) -> Result<PreparationReport> {
    if target_n >= params.phonon_levels {
        return Err(FockError::IndexOutOfRange {
            index: target_n,
            dim: params.phonon_levels,
        });
    }
    let h = cqad_hamiltonian(params);
    let dim = params.dim();
    let basis = FockBasis::new(dim)?;
    let collapse = collapse_operators(params, noise);

    let mut rho = {
        let mut m = DMatrix::zeros(dim, dim);
        m[(params.index(0, 0), params.index(0, 0))] = C64::new(1.0, 0.0);
        DensityMatrix::from_raw(m, basis)
    };
    for omega in &pulse.samples {
        let hk = &h.drift
            + h.control_real.map(|z| z * C64::new(omega.re, 0.0))
            + h.control_imag.map(|z| z * C64::new(omega.im, 0.0));
        let snaps = lindblad_propagate(&hk, &collapse, &rho, &[0.0, pulse.dt])?;
        rho = snaps.into_iter().next_back().expect("snapshot at dt");
    }

    let idx = params.index(0, target_n);
    let fidelity_prepared = rho.elements()[(idx, idx)].re;
    let mut ground_population = 0.0;
    for m in 0..params.phonon_levels {
        let k = params.index(0, m);
        ground_population += rho.elements()[(k, k)].re;
    }
    let residual_excitation = (1.0 - ground_population).max(0.0);

    let fidelity_readout = match t_ro {
        None => None,
        Some(t_ro) => {
            if t_ro < 0.0 {
                return Err(FockError::Domain(format!("negative readout time {t_ro}")));
            }
            // phonon marginal over all qubit levels (ideal reset keeps the
            // phonon state attached to each qubit branch)
            let mut marginal = DMatrix::zeros(params.phonon_levels, params.phonon_levels);
            for i in 0..params.qubit_levels {
                for m in 0..params.phonon_levels {
                    for mp in 0..params.phonon_levels {
                        marginal[(m, mp)] += rho.elements()[(params.index(i, m), params.index(i, mp))];
                    }
                }
            }
            let ph_basis = FockBasis::new(params.phonon_levels)?;
            let ph = DensityMatrix::from_raw(marginal, ph_basis);
            let kappa_eff = noise.phonon.kappa + noise.qubit.kappa / 2.0;
            let damped = damp_evolve(&ph, &NoiseParams::pure_loss(kappa_eff)?, t_ro, None)?;
            Some(damped.elements()[(target_n, target_n)].re)
        }
    };

    Ok(PreparationReport {
        fidelity_prepared,
        fidelity_readout,
        residual_excitation,
    })
}

/// Qubit excited-state population curves P_e^(n)(t), one per initial phonon
/// number, used as basis functions for readout inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpnBasis {
    /// Interaction times in seconds, starting at 0.
    pub t_grid: Vec<f64>,
    /// curves[n][k] = excited population at t_grid[k] for initial |e, n>.
    pub curves: Vec<Vec<f64>>,
}

/// Simulate the readout basis: the qubit starts excited with the phonon in
/// |n>, interacts resonantly, and its excited population oscillates at
/// 2 g sqrt(n + 1) with decoherence-limited visibility.
pub fn rpn_basis(
    n_max: usize,
    params: &SystemParams,
    noise: &ChainNoise,
    t_grid: &[f64],
) -> Result<RpnBasis> {
    if n_max + 1 >= params.phonon_levels {
        return Err(FockError::Domain(format!(
            "phonon truncation {} too tight for basis up to |{n_max}>",
            params.phonon_levels
        )));
    }
    let h = cqad_hamiltonian(params);
    let dim = params.dim();
    let basis = FockBasis::new(dim)?;
    let collapse = collapse_operators(params, noise);
    let mut curves = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut m = DMatrix::zeros(dim, dim);
        let k0 = params.index(1, n);
        m[(k0, k0)] = C64::new(1.0, 0.0);
        let rho0 = DensityMatrix::from_raw(m, basis);
        let snaps = lindblad_propagate(&h.drift, &collapse, &rho0, t_grid)?;
        let curve = snaps
            .iter()
            .map(|rho| {
                let mut pe = 0.0;
                for i in 1..params.qubit_levels {
                    for m in 0..params.phonon_levels {
                        let k = params.index(i, m);
                        pe += rho.elements()[(k, k)].re;
                    }
                }
                pe
            })
            .collect();
        curves.push(curve);
    }
    Ok(RpnBasis {
        t_grid: t_grid.to_vec(),
        curves,
    })
}

/// Phonon distribution recovered from a readout trace, with per-entry
/// uncertainties from the fit covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpnFit {
    pub distribution: FockDistribution,
    /// One-sigma uncertainty per Fock weight; zero for weights pinned at 0.
    pub sigma: Vec<f64>,
}

/// Invert a measured qubit-population trace into Fock weights by
/// nonnegative least squares over the basis curves, with the physical
/// constraint sum P_n <= 1 (enforced through a slack variable).
pub fn rpn_fit(measured: &[f64], basis: &RpnBasis) -> Result<RpnFit> {
    let t_len = basis.t_grid.len();
    if measured.len() != t_len {
        return Err(FockError::DimensionMismatch {
            expected: t_len,
            got: measured.len(),
        });
    }
    let n_basis = basis.curves.len();
    if n_basis == 0 || t_len < n_basis + 1 {
        return Err(FockError::Domain(
            "readout trace shorter than the basis size".into(),
        ));
    }
    let a = DMatrix::from_fn(t_len, n_basis, |i, j| basis.curves[j][i]);
    let svals = a.clone().svd(false, false).singular_values;
    let cond = svals[0] / svals[svals.len() - 1].max(f64::MIN_POSITIVE);
    if cond > 1e8 {
        return Err(FockError::FitFailure(format!(
            "basis condition number {cond:.3e}; extend the interaction-time grid"
        )));
    }

    // augmented system: [A 0; L 1s] with a heavy penalty row pinning
    // sum(P) + slack = 1, keeping the Lawson-Hanson solver unconstrained
    // beyond nonnegativity
    let penalty = 1e6;
    let mut aug = DMatrix::zeros(t_len + 1, n_basis + 1);
    aug.view_mut((0, 0), (t_len, n_basis)).copy_from(&a);
    for j in 0..=n_basis {
        aug[(t_len, j)] = penalty;
    }
    let mut rhs = DVector::zeros(t_len + 1);
    for (i, &y) in measured.iter().enumerate() {
        rhs[i] = y;
    }
    rhs[t_len] = penalty;
    let (w, passive) = nnls(&aug, &rhs)?;

    let probs: Vec<f64> = (0..n_basis).map(|j| w[j].min(1.0)).collect();
    let distribution = FockDistribution::new(probs.clone())?;

    // covariance of the unconstrained weights on the passive set
    let support: Vec<usize> = passive.iter().copied().filter(|&j| j < n_basis).collect();
    let mut sigma = vec![0.0; n_basis];
    if !support.is_empty() {
        let asub = DMatrix::from_fn(t_len, support.len(), |i, j| a[(i, support[j])]);
        let residual = &a * DVector::from_vec(probs.clone())
            - DVector::from_vec(measured.to_vec());
        let dof = (t_len - support.len()).max(1) as f64;
        let s2 = residual.norm_squared() / dof;
        let gram = asub.transpose() * &asub;
        if let Some(inv) = gram.try_inverse() {
            for (j, &col) in support.iter().enumerate() {
                sigma[col] = (s2 * inv[(j, j)]).max(0.0).sqrt();
            }
        }
    }
    Ok(RpnFit {
        distribution,
        sigma,
    })
}
