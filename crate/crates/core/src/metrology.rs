//! Displacement sensing with Fock-diagonal oscillator states.
//!
//! Covers the quantum Fisher information of Fock states, the classical
//! Fisher information extracted from phonon-number readout of a displaced
//! state, the hierarchy of damped Fock states, change-of-variable
//! reparametrizations, phase averaging, and the conversion of all of the
//! above into a force-sensitivity budget for a mechanical oscillator.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channels::{damp_evolve, NoiseParams};
use crate::error::{FockError, Result};
use crate::hilbert::{
    displacement_overlap_with_derivative, DensityMatrix, FockBasis, FockDistribution,
};

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Terms with population below this value are excluded from the Fisher sum;
/// their exclusion is recorded in [`FisherResult::skipped`].
const POPULATION_FLOOR: f64 = 1e-14;

/// Required captured probability mass for the truncated Fisher sum to count
/// as converged.
const MASS_TOLERANCE: f64 = 1e-9;

/// Classical Fisher information of a phonon-number measurement on a
/// displaced Fock-diagonal state, evaluated at one displacement amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    /// Fisher information per unit displacement amplitude squared.
    pub fi: f64,
    /// Displacement amplitude d = |alpha| at which the FI was evaluated.
    pub alpha: f64,
    /// Number of output Fock levels summed.
    pub terms_used: usize,
    /// Terms dropped because their population fell below the floor.
    pub skipped: usize,
}

/// FI evaluated over a grid of displacement amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherProfile {
    pub curve: Vec<FisherResult>,
    /// Largest FI over the grid.
    pub fi_max: f64,
    /// Amplitude attaining `fi_max` (first grid point on ties).
    pub d0: f64,
}

/// Quantum Fisher information of the Fock state |n> for displacement
/// sensing: 4(2n + 1).
pub fn qfi_fock(n: usize) -> f64 {
    4.0 * (2.0 * n as f64 + 1.0)
}

/// Upper bound on the phase-averaged QFI at mean occupation nbar:
/// 4(1 + 2 nbar). Saturated by Fock states at integer nbar.
pub fn avg_qfi_bound(nbar: f64) -> Result<f64> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(FockError::Domain(format!(
            "mean occupation must be >= 0, got {nbar}"
        )));
    }
    Ok(4.0 * (1.0 + 2.0 * nbar))
}

/// Classical Fisher information for estimating a real displacement amplitude
/// d from the phonon-number distribution of the displaced state:
/// F = sum_m (dP_m/dd)^2 / P_m with P_m(d) = sum_n P_n delta_{m,n}(d).
///
/// Output levels run to `m_max` (exclusive); the call fails when the
/// truncated outputs capture less than 1 - 1e-9 of the probability mass.
pub fn fisher_displacement(
    dist: &FockDistribution,
    alpha: f64,
    m_max: usize,
) -> Result<FisherResult> {
    if !(alpha > 0.0) {
        return Err(FockError::Domain(format!(
            "displacement amplitude must be positive, got {alpha}; \
             use small_alpha_fisher for the d -> 0 limit"
        )));
    }
    if m_max == 0 {
        return Err(FockError::Domain("m_max must be positive".into()));
    }
    let term = |m: usize, d: f64| {
        let mut p = 0.0;
        let mut dp = 0.0;
        for (n, &pn) in dist.probs().iter().enumerate() {
            if pn == 0.0 {
                continue;
            }
            let (delta, ddelta) = displacement_overlap_with_derivative(m, n, d);
            p += pn * delta;
            dp += pn * ddelta;
        }
        (p, dp)
    };
    let mut fi = 0.0;
    let mut mass = 0.0;
    let mut skipped = 0;
    for m in 0..m_max {
        let (p, dp) = term(m, alpha);
        mass += p;
        if p < POPULATION_FLOOR {
            // A vanishing population with a sloped neighborhood means the
            // amplitude sits on a Laguerre zero, where (dP)²/P has a finite
            // removable limit; evaluate at a nudged amplitude instead.
            let (pn, dpn) = term(m, alpha + 1e-8);
            if pn > 0.0 && dpn.abs() > POPULATION_FLOOR {
                fi += dpn * dpn / pn;
                skipped += 1;
            }
            continue;
        }
        fi += dp * dp / p;
    }
    if dist.total() - mass > MASS_TOLERANCE {
        return Err(FockError::NonConvergence(format!(
            "Fisher sum truncated at m_max = {m_max} captures only {mass:.12} \
             of {:.12} input mass at d = {alpha}",
            dist.total()
        )));
    }
    Ok(FisherResult {
        fi,
        alpha,
        terms_used: m_max,
        skipped,
    })
}

/// `fisher_displacement` with the output cutoff grown automatically until
/// the mass criterion is met.
fn converged_fisher(dist: &FockDistribution, alpha: f64) -> Result<FisherResult> {
    let mut m_max = dist.len() + 16 + (4.0 * alpha * alpha) as usize;
    loop {
        match fisher_displacement(dist, alpha, m_max) {
            Err(FockError::NonConvergence(msg)) => {
                if m_max > 4096 {
                    return Err(FockError::NonConvergence(msg));
                }
                m_max *= 2;
            }
            other => return other,
        }
    }
}

/// FI over a positive ascending amplitude grid, with the maximizing
/// amplitude d0.
pub fn fisher_profile(dist: &FockDistribution, alpha_grid: &[f64]) -> Result<FisherProfile> {
    if alpha_grid.is_empty() {
        return Err(FockError::Domain("empty amplitude grid".into()));
    }
    if alpha_grid.windows(2).any(|w| w[1] <= w[0]) || alpha_grid[0] <= 0.0 {
        return Err(FockError::Domain(
            "amplitude grid must be positive and strictly ascending".into(),
        ));
    }
    let mut curve = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        curve.push(converged_fisher(dist, alpha)?);
    }
    // a later point must beat the incumbent by more than numerical noise,
    // so flat (amplitude-independent) profiles resolve to the first point
    let mut best = curve[0];
    for r in &curve[1..] {
        if r.fi > best.fi + 1e-6 * best.fi.max(1.0) {
            best = *r;
        }
    }
    Ok(FisherProfile {
        fi_max: best.fi,
        d0: best.alpha,
        curve,
    })
}

/// The d -> 0 Fisher information of a Fock state damped for a time
/// `t_over_t1` (in units of the energy decay time T1), next to the
/// plateau approximation 4(n + 1) exp(-n t / T1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallAlphaFisher {
    /// Richardson-extrapolated d -> 0 limit of the exact FI.
    pub fi_limit: f64,
    /// Plateau approximation 4(n + 1) exp(-n t / T1).
    pub fi_approx: f64,
}

/// Fock-diagonal populations of |n><n| after loss for time t (kappa = 1/T1).
fn damped_fock_distribution(n: usize, t_over_t1: f64) -> Result<FockDistribution> {
    let basis = FockBasis::new((n + 1).max(2))?;
    let rho0 = DensityMatrix::fock_projector(n, basis)?;
    let noise = NoiseParams::pure_loss(1.0)?;
    let rho = damp_evolve(&rho0, &noise, t_over_t1, None)?;
    rho.diagonal()
}

/// d -> 0 limit of the FI of a loss-damped Fock state, against the
/// analytic plateau approximation.
pub fn small_alpha_fisher(n: usize, t_over_t1: f64) -> Result<SmallAlphaFisher> {
    if t_over_t1 < 0.0 {
        return Err(FockError::Domain(format!("negative time {t_over_t1}")));
    }
    let dist = damped_fock_distribution(n, t_over_t1)?;
    // FI(d) is even in d, so FI = F0 + c d^2 + O(d^4); two Richardson steps
    // in h = d^2 over a halving sequence cancel the leading corrections.
    // Small residual populations set the radius of the asymptotic regime,
    // so the base step shrinks until the extrapolation stabilizes.
    let mut fi_limit = f64::NAN;
    let mut diag = String::new();
    let mut d0 = 2e-2;
    for _ in 0..5 {
        let f: Vec<f64> = (0..3)
            .map(|k| converged_fisher(&dist, d0 / 2f64.powi(k)).map(|r| r.fi))
            .collect::<Result<_>>()?;
        let r1 = (4.0 * f[1] - f[0]) / 3.0;
        let r2 = (4.0 * f[2] - f[1]) / 3.0;
        fi_limit = (16.0 * r2 - r1) / 15.0;
        if (fi_limit - r2).abs() <= 1e-6 * fi_limit.abs().max(1.0) {
            diag.clear();
            break;
        }
        diag = format!("levels {r1:.9}, {r2:.9}, {fi_limit:.9} at d0 = {d0:.1e}");
        d0 /= 4.0;
    }
    if !diag.is_empty() {
        return Err(FockError::NonConvergence(format!(
            "d -> 0 extrapolation unstable: {diag}"
        )));
    }
    let nf = n as f64;
    Ok(SmallAlphaFisher {
        fi_limit,
        fi_approx: 4.0 * (nf + 1.0) * (-nf * t_over_t1).exp(),
    })
}

/// FI profile of the Fock state |n> after amplitude damping under `noise`
/// for time `t`.
pub fn damped_fock_fisher(
    n: usize,
    noise: &NoiseParams,
    t: f64,
    alpha_grid: &[f64],
) -> Result<FisherProfile> {
    let basis = FockBasis::new(n + 1)?;
    let rho0 = DensityMatrix::fock_projector(n, basis)?;
    let rho = damp_evolve(&rho0, noise, t, None)?;
    fisher_profile(&rho.diagonal()?, alpha_grid)
}

/// Transmittance above which the lossy Fock state |m> outperforms |n>
/// (m > n) for small-displacement sensing: eta = ((1+n)/(1+m))^(1/(m-n)).
pub fn crossover_eta(n: usize, m: usize) -> Result<f64> {
    if m <= n {
        return Err(FockError::Domain(format!(
            "crossover requires m > n, got n = {n}, m = {m}"
        )));
    }
    let base = (1.0 + n as f64) / (1.0 + m as f64);
    Ok(base.powf(1.0 / (m - n) as f64))
}

/// Target variable for a change of variables of the displacement FI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FisherVariable {
    /// Force-phase quadrature theta = alpha * sqrt(2).
    Theta,
    /// Mean added occupation nbar = |alpha|^2.
    NBar,
}

/// Reparametrize an amplitude FI: F(theta) = F(alpha) / 2 and
/// F(nbar) = F(alpha) / (4 |alpha|^2).
pub fn fisher_reparam(fi_alpha: f64, target: FisherVariable, alpha: f64) -> Result<f64> {
    if fi_alpha < 0.0 {
        return Err(FockError::Domain(format!(
            "Fisher information must be >= 0, got {fi_alpha}"
        )));
    }
    match target {
        FisherVariable::Theta => Ok(fi_alpha / 2.0),
        FisherVariable::NBar => {
            if alpha == 0.0 {
                return Err(FockError::Domain(
                    "nbar reparametrization undefined at alpha = 0".into(),
                ));
            }
            Ok(fi_alpha / (4.0 * alpha * alpha))
        }
    }
}

/// Erase all Fock-basis coherences, keeping the populations. Idempotent and
/// exactly trace preserving.
pub fn phase_average(rho: &DensityMatrix) -> DensityMatrix {
    let dim = rho.basis().dim();
    let mut out = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        out[(k, k)] = C64::new(rho.elements()[(k, k)].re, 0.0);
    }
    DensityMatrix::from_raw(out, rho.basis())
}

/// Ground-state position spread x_zpf = sqrt(hbar / 2 m omega) in meters.
pub fn zero_point_fluctuation(mass: f64, omega: f64) -> Result<f64> {
    if mass <= 0.0 || omega <= 0.0 {
        return Err(FockError::Domain(format!(
            "mass and frequency must be positive, got m = {mass}, omega = {omega}"
        )));
    }
    Ok((HBAR / (2.0 * mass * omega)).sqrt())
}

/// Inputs for the resonant-force sensitivity budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceParams {
    /// Effective oscillator mass in kg.
    pub mass: f64,
    /// Angular frequency in rad/s.
    pub omega: f64,
    /// Coherent interrogation time per cycle in s.
    pub t_probe: f64,
    /// Preparation/readout dead time per cycle in s.
    pub t_dead: f64,
    /// Total averaging time T in s.
    pub total_time: f64,
    /// Quantum Fisher information of the probe state.
    pub fq: f64,
}

impl ForceParams {
    pub fn t_cycle(&self) -> f64 {
        self.t_probe + self.t_dead
    }

    /// Number of measurement cycles fitting into the averaging time.
    pub fn nu(&self) -> f64 {
        self.total_time / self.t_cycle()
    }
}

/// Force-sensitivity bound together with the cycle count it assumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSensitivity {
    /// Minimal resolvable force amplitude per root bandwidth, in N/sqrt(Hz).
    pub delta_f0_per_sqrt_hz: f64,
    /// Number of cycles nu = T / t_cycle.
    pub nu: f64,
}

/// Cramér–Rao force budget
/// dF0 sqrt(t_cycle) >= (2 hbar / x_zpf) (t_cycle / t_probe) / sqrt(T F_Q).
pub fn force_sensitivity(params: &ForceParams) -> Result<ForceSensitivity> {
    if params.t_probe <= 0.0 {
        return Err(FockError::Domain("probe time must be positive".into()));
    }
    if params.t_dead < 0.0 || params.fq <= 0.0 {
        return Err(FockError::Domain(
            "dead time must be >= 0 and F_Q > 0".into(),
        ));
    }
    if params.total_time < params.t_cycle() * (1.0 - 1e-9) {
        return Err(FockError::Domain(
            "averaging time shorter than one cycle".into(),
        ));
    }
    let x_zpf = zero_point_fluctuation(params.mass, params.omega)?;
    let t_cycle = params.t_cycle();
    let bound = (2.0 * HBAR / x_zpf) * (t_cycle / params.t_probe)
        / (params.total_time * params.fq).sqrt();
    Ok(ForceSensitivity {
        delta_f0_per_sqrt_hz: bound,
        nu: params.nu(),
    })
}

/// Displacement amplitude accumulated by a resonant force of amplitude `f0`
/// acting for a time `t`: |alpha| = f0 x_zpf t / (2 hbar).
pub fn force_to_alpha(f0: f64, x_zpf: f64, t: f64) -> f64 {
    f0 * x_zpf * t / (2.0 * HBAR)
}
