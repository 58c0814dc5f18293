//! Open-system evolution: the analytic loss/dephasing map, binomial
//! (beamsplitter) loss on Fock distributions, a generic Lindblad
//! integrator, and loss<->dB conversions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use statrs::function::gamma::ln_gamma;

use crate::error::{FockError, Result};
use crate::hilbert::{DensityMatrix, FockDistribution};

/// Loss and dephasing rates of a single bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseParams {
    /// Energy loss rate kappa = 1/T1.
    pub kappa: f64,
    /// Pure dephasing rate gamma_phi.
    pub gamma_phi: f64,
    /// Mode angular frequency; enters only the rotating phase of the
    /// off-diagonal elements. Zero in the interaction frame.
    pub omega: f64,
}

impl NoiseParams {
    pub fn new(kappa: f64, gamma_phi: f64, omega: f64) -> Result<Self> {
        if kappa < 0.0 || gamma_phi < 0.0 {
            return Err(FockError::Domain(format!(
                "rates must be nonnegative: kappa={kappa}, gamma_phi={gamma_phi}"
            )));
        }
        Ok(Self {
            kappa,
            gamma_phi,
            omega,
        })
    }

    pub fn pure_loss(kappa: f64) -> Result<Self> {
        Self::new(kappa, 0.0, 0.0)
    }
}

/// Beamsplitter loss channel with transmittance eta = e^{-kappa t}.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossChannel {
    eta: f64,
}

impl LossChannel {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
            return Err(FockError::Domain(format!(
                "transmittance must lie in [0, 1], got {eta}"
            )));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn from_decay(kappa: f64, t: f64) -> Result<Self> {
        if kappa < 0.0 || t < 0.0 {
            return Err(FockError::Domain("kappa and t must be nonnegative".into()));
        }
        Self::new((-kappa * t).exp())
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Analytic solution of the master equation with collapse operators
/// sqrt(kappa) a and sqrt(2 gamma_phi) a†a:
///
/// rho_{m,n}(t) = e^{-i w (m-n) t} e^{-(m+n) kappa t / 2} e^{-(m-n)² gamma_phi t}
///                * sum_l sqrt(C(n+l,l) C(m+l,l)) (1 - e^{-kappa t})^l rho_{m+l,n+l}(0)
///
/// The l-sum terminates naturally at the truncation edge; `ell_max` can cap
/// it earlier when the caller knows the tail is negligible.
pub fn damp_evolve(
    rho0: &DensityMatrix,
    noise: &NoiseParams,
    t: f64,
    ell_max: Option<usize>,
) -> Result<DensityMatrix> {
    if t < 0.0 {
        return Err(FockError::Domain(format!("negative time {t}")));
    }
    let dim = rho0.basis().dim();
    let decay = (-noise.kappa * t).exp();
    let ln_excite = (1.0 - decay).ln(); // -inf at t=0; guarded below
    let r0 = rho0.elements();
    let mut out = DMatrix::zeros(dim, dim);
    for m in 0..dim {
        for n in 0..=m {
            let phase = C64::from_polar(1.0, -noise.omega * (m as f64 - n as f64) * t);
            let damp = (-((m + n) as f64) * noise.kappa * t / 2.0).exp();
            let deph = (-((m as f64 - n as f64).powi(2)) * noise.gamma_phi * t).exp();
            let lmax = (dim - 1 - m).min(ell_max.unwrap_or(usize::MAX));
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..=lmax {
                let weight = if l == 0 {
                    1.0
                } else {
                    (0.5 * (ln_binomial(n + l, l) + ln_binomial(m + l, l)) + l as f64 * ln_excite)
                        .exp()
                };
                if weight == 0.0 {
                    continue;
                }
                acc += r0[(m + l, n + l)] * weight;
            }
            let val = phase * damp * deph * acc;
            out[(m, n)] = val;
            if m != n {
                out[(n, m)] = val.conj();
            }
        }
    }
    // The map is trace preserving on the (possibly truncated) support.
    Ok(DensityMatrix::from_raw(out, rho0.basis()))
}

/// Beamsplitter loss on a Fock-diagonal state:
/// P'_m = sum_{n>=m} P_n C(n,m) eta^m (1-eta)^{n-m}.
pub fn binomial_loss(dist: &FockDistribution, channel: &LossChannel) -> FockDistribution {
    let eta = channel.eta();
    let len = dist.len();
    let ln_eta = eta.ln();
    let ln_loss = (1.0 - eta).ln();
    let mut probs = vec![0.0; len];
    for (n, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (m, slot) in probs.iter_mut().enumerate().take(n + 1) {
            let weight = if m == n {
                (m as f64 * ln_eta).exp()
            } else if eta == 1.0 {
                0.0
            } else {
                (ln_binomial(n, m) + m as f64 * ln_eta + (n - m) as f64 * ln_loss).exp()
            };
            *slot += p * weight;
        }
    }
    FockDistribution::new(probs).expect("binomial loss preserves distribution validity")
}

/// Coherent-amplitude power loss in dB after evolving for time t at loss
/// rate kappa: -10 log10(|alpha(t)|²/|alpha(0)|²) = 10 kappa t / ln 10.
pub fn loss_db(kappa: f64, t: f64) -> f64 {
    10.0 * kappa * t / std::f64::consts::LN_10
}

/// dB of power loss for a beamsplitter transmittance eta.
pub fn eta_to_db(eta: f64) -> f64 {
    -10.0 * eta.log10()
}

fn lindblad_rhs(
    h: &DMatrix<C64>,
    collapse: &[(DMatrix<C64>, DMatrix<C64>)],
    rho: &DMatrix<C64>,
) -> DMatrix<C64> {
    let i = C64::new(0.0, 1.0);
    let mut drho = (rho * h - h * rho).map(|z| z * i); // -i[H, rho]
    for (l, ldl) in collapse {
        let anti = ldl * rho + rho * ldl;
        drho += l * rho * l.adjoint() - anti.map(|z| z * C64::new(0.5, 0.0));
    }
    drho
}

/// GKSL master-equation integrator, adaptive Dormand-Prince RK45 on the
/// density matrix. Returns one snapshot per entry of `t_grid`, which must be
/// sorted ascending and start at 0.
pub fn lindblad_propagate(
    hamiltonian: &DMatrix<C64>,
    collapse_ops: &[DMatrix<C64>],
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    let dim = rho0.basis().dim();
    if hamiltonian.nrows() != dim || hamiltonian.ncols() != dim {
        return Err(FockError::DimensionMismatch {
            expected: dim,
            got: hamiltonian.nrows(),
        });
    }
    for c in collapse_ops {
        if c.nrows() != dim || c.ncols() != dim {
            return Err(FockError::DimensionMismatch {
                expected: dim,
                got: c.nrows(),
            });
        }
    }
    if t_grid.is_empty() || t_grid[0] != 0.0 || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(FockError::Domain(
            "t_grid must be ascending and start at 0".into(),
        ));
    }

    let collapse: Vec<(DMatrix<C64>, DMatrix<C64>)> = collapse_ops
        .iter()
        .map(|l| (l.clone(), l.adjoint() * l))
        .collect();

    let rtol = 1e-8;
    let atol = 1e-10;
    let mut snapshots = Vec::with_capacity(t_grid.len());
    let mut rho = rho0.elements().clone();
    snapshots.push(DensityMatrix::from_raw(rho.clone(), rho0.basis()));

    // characteristic rate for the initial step guess
    let scale = hamiltonian.camax()
        + collapse.iter().map(|(_, ldl)| ldl.camax()).sum::<f64>()
        + 1e-12;
    let mut h = (0.1 / scale).min(if t_grid.len() > 1 {
        (t_grid[t_grid.len() - 1] - t_grid[0]) / 100.0
    } else {
        0.1 / scale
    });
    let mut t = 0.0;

    // Dormand-Prince 5(4) coefficients
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    for &t_target in &t_grid[1..] {
        while t < t_target - 1e-15 * t_target.max(1.0) {
            let step = h.min(t_target - t);
            let mut k: Vec<DMatrix<C64>> = Vec::with_capacity(7);
            k.push(lindblad_rhs(hamiltonian, &collapse, &rho));
            for stage in 0..6 {
                let mut y = rho.clone();
                for (j, kj) in k.iter().enumerate() {
                    let c = A[stage][j] * step;
                    if c != 0.0 {
                        y += kj.map(|z| z * C64::new(c, 0.0));
                    }
                }
                k.push(lindblad_rhs(hamiltonian, &collapse, &y));
            }
            let mut y5 = rho.clone();
            let mut err = DMatrix::<C64>::zeros(dim, dim);
            for (j, kj) in k.iter().enumerate() {
                if B5[j] != 0.0 {
                    y5 += kj.map(|z| z * C64::new(B5[j] * step, 0.0));
                }
                let d = (B5[j] - B4[j]) * step;
                if d != 0.0 {
                    err += kj.map(|z| z * C64::new(d, 0.0));
                }
            }
            let tol = atol + rtol * y5.camax();
            let err_norm = err.camax() / tol;
            if err_norm <= 1.0 {
                t += step;
                rho = y5;
                h = step * (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0);
            } else {
                h = step * (0.9 * err_norm.powf(-0.25)).clamp(0.1, 1.0);
                if h < 1e-18 * t_target.max(1.0) {
                    return Err(FockError::Integrator(format!(
                        "step size underflow at t = {t:.3e}, error ratio {err_norm:.3e}"
                    )));
                }
            }
        }
        // re-Hermitize accumulated roundoff
        let herm = (&rho + rho.adjoint()).map(|z| z * C64::new(0.5, 0.0));
        let drift = (herm.trace().re - 1.0).abs();
        if drift > 1e-8 {
            return Err(FockError::Integrator(format!(
                "trace drift {drift:.3e} at t = {t_target:.3e}"
            )));
        }
        rho = herm;
        snapshots.push(DensityMatrix::from_raw(rho.clone(), rho0.basis()));
    }
    Ok(snapshots)
}

/// Log-linear least-squares fit of P(t) = A e^{-t/tau}; uses only points
/// with P > 1e-4 to avoid weighting the noise floor. Returns (tau, A).
pub fn fit_exponential_decay(t: &[f64], p: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(p)
        .filter(|(_, &pi)| pi > 1e-4)
        .map(|(&ti, &pi)| (ti, pi.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(FockError::FitFailure(format!(
            "only {} usable points above the 1e-4 floor",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(FockError::FitFailure("degenerate time grid".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    if slope >= 0.0 {
        return Err(FockError::FitFailure(format!(
            "non-decaying fit, slope {slope:.3e}"
        )));
    }
    let tau = -1.0 / slope;
    // residual sanity check
    let max_resid = pts
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    if max_resid > 0.5 {
        return Err(FockError::FitFailure(format!(
            "max log-residual {max_resid:.3e} too large for an exponential model"
        )));
    }
    Ok((tau, intercept.exp()))
}

/// Simulated decay times of P_n for initial Fock states |n>, one per entry
/// of `n_list`, obtained by evolving |n><n| with `damp_evolve` and fitting
/// e^{-t/tau_n}.
pub fn fock_decay_times(n_list: &[usize], kappa: f64) -> Result<Vec<f64>> {
    if kappa <= 0.0 {
        return Err(FockError::Domain("kappa must be positive".into()));
    }
    let noise = NoiseParams::pure_loss(kappa)?;
    let mut taus = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n == 0 {
            return Err(FockError::Domain("decay time undefined for n = 0".into()));
        }
        let basis = crate::hilbert::FockBasis::new(n + 2)?;
        let rho0 = DensityMatrix::fock_projector(n, basis)?;
        let t_end = 2.0 / (n as f64 * kappa);
        let steps = 40;
        let mut ts = Vec::with_capacity(steps);
        let mut ps = Vec::with_capacity(steps);
        for k in 1..=steps {
            let t = t_end * k as f64 / steps as f64;
            let rho = damp_evolve(&rho0, &noise, t, None)?;
            ts.push(t);
            ps.push(rho.elements()[(n, n)].re);
        }
        let (tau, _) = fit_exponential_decay(&ts, &ps)?;
        taus.push(tau);
    }
    Ok(taus)
}

/// Coherent-state column vector, exp(-|a|²/2) a^n/sqrt(n!), normalized in
/// the truncated basis.
pub fn coherent_state(
    alpha: C64,
    basis: crate::hilbert::FockBasis,
) -> Result<crate::hilbert::StateVector> {
    let dim = basis.dim();
    let mut v = DVector::zeros(dim);
    let mut amp = C64::new(1.0, 0.0);
    v[0] = amp;
    for n in 1..dim {
        amp *= alpha / C64::new((n as f64).sqrt(), 0.0);
        v[n] = amp;
    }
    crate::hilbert::StateVector::new(v, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fock_state, FockBasis};

    fn basis(dim: usize) -> FockBasis {
        FockBasis::new(dim).unwrap()
    }

    #[test]
    fn damp_half_life_of_single_phonon() {
        let b = basis(4);
        let rho0 = DensityMatrix::fock_projector(1, b).unwrap();
        let noise = NoiseParams::pure_loss(1.0).unwrap();
        let t = 2.0f64.ln();
        let rho = damp_evolve(&rho0, &noise, t, None).unwrap();
        assert!((rho.elements()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((rho.elements()[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!(rho.elements()[(2, 2)].norm() < 1e-14);
    }

    #[test]
    fn damp_identity_at_zero_time() {
        let b = basis(6);
        let psi = coherent_state(C64::new(0.7, 0.2), b).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let noise = NoiseParams::new(0.3, 0.1, 2.0).unwrap();
        let rho = damp_evolve(&rho0, &noise, 0.0, None).unwrap();
        let err = (rho.elements() - rho0.elements()).camax();
        assert!(err < 1e-14);
    }

    #[test]
    fn pure_dephasing_scales_offdiagonals() {
        let b = basis(4);
        let mut amp = nalgebra::DVector::zeros(4);
        amp[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amp[1] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let psi = crate::hilbert::StateVector::new(amp, b).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let noise = NoiseParams::new(0.0, 1.0, 0.0).unwrap();
        let rho = damp_evolve(&rho0, &noise, 1.0, None).unwrap();
        let e = (-1.0f64).exp();
        assert!((rho.elements()[(0, 1)].re - 0.5 * e).abs() < 1e-12);
        assert!((rho.elements()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((rho.elements()[(1, 1)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn damp_rejects_negative_time() {
        let b = basis(3);
        let rho0 = DensityMatrix::fock_projector(1, b).unwrap();
        let noise = NoiseParams::pure_loss(1.0).unwrap();
        assert!(damp_evolve(&rho0, &noise, -0.1, None).is_err());
    }

    #[test]
    fn damp_semigroup_property() {
        let b = basis(12);
        let psi = coherent_state(C64::new(0.9, -0.4), b).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let noise = NoiseParams::new(0.4, 0.15, 0.0).unwrap();
        let direct = damp_evolve(&rho0, &noise, 0.9, None).unwrap();
        let mid = damp_evolve(&rho0, &noise, 0.5, None).unwrap();
        let composed = damp_evolve(&mid, &noise, 0.4, None).unwrap();
        let err = (direct.elements() - composed.elements()).camax();
        assert!(err < 1e-9, "semigroup violation {err}");
    }

    #[test]
    fn exact_fock_population_decay() {
        let b = basis(9);
        let noise = NoiseParams::pure_loss(0.7).unwrap();
        for n in 1..=7usize {
            let rho0 = DensityMatrix::fock_projector(n, b).unwrap();
            for &t in &[0.1, 0.8, 2.0] {
                let rho = damp_evolve(&rho0, &noise, t, None).unwrap();
                let expected = (-(n as f64) * 0.7 * t).exp();
                assert!(
                    (rho.elements()[(n, n)].re - expected).abs() < 1e-13,
                    "n={n} t={t}"
                );
            }
        }
    }

    #[test]
    fn binomial_single_photon() {
        let dist = FockDistribution::fock(1, 2).unwrap();
        let out = binomial_loss(&dist, &LossChannel::new(0.5).unwrap());
        assert!((out.prob(0) - 0.5).abs() < 1e-15);
        assert!((out.prob(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn binomial_identity_at_full_transmission() {
        let dist = FockDistribution::new(vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        let out = binomial_loss(&dist, &LossChannel::new(1.0).unwrap());
        for n in 0..4 {
            assert_eq!(out.prob(n), dist.prob(n));
        }
    }

    #[test]
    fn binomial_matches_damping_diagonal() {
        let b = basis(8);
        let rho0 = DensityMatrix::fock_projector(6, b).unwrap();
        let kappa = 1.0;
        for &t in &[0.05, 0.4, 1.5] {
            let noise = NoiseParams::pure_loss(kappa).unwrap();
            let rho = damp_evolve(&rho0, &noise, t, None).unwrap();
            let dist = FockDistribution::fock(6, 8).unwrap();
            let channel = LossChannel::from_decay(kappa, t).unwrap();
            let lost = binomial_loss(&dist, &channel);
            for m in 0..8 {
                assert!(
                    (rho.elements()[(m, m)].re - lost.prob(m)).abs() < 1e-12,
                    "m={m} t={t}"
                );
            }
        }
    }

    #[test]
    fn binomial_composition() {
        let dist = FockDistribution::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        let once = binomial_loss(&dist, &LossChannel::new(0.7 * 0.6).unwrap());
        let step1 = binomial_loss(&dist, &LossChannel::new(0.7).unwrap());
        let twice = binomial_loss(&step1, &LossChannel::new(0.6).unwrap());
        for n in 0..5 {
            assert!((once.prob(n) - twice.prob(n)).abs() < 1e-14);
        }
    }

    #[test]
    fn loss_db_values() {
        assert_eq!(loss_db(0.8, 0.0), 0.0);
        let db = eta_to_db(0.5);
        assert!((db - 3.0103).abs() < 1e-4);
        // loss_db(kappa, t) must agree with eta_to_db(e^{-kappa t})
        let (kappa, t) = (0.3, 2.1);
        assert!((loss_db(kappa, t) - eta_to_db((-kappa * t).exp())).abs() < 1e-12);
    }

    #[test]
    fn lindblad_eigenstate_is_stationary() {
        let b = basis(5);
        let h = b.number().map(|z| z * C64::new(2.5, 0.0));
        let rho0 = DensityMatrix::fock_projector(1, b).unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0];
        let snaps = lindblad_propagate(&h, &[], &rho0, &grid).unwrap();
        for s in &snaps {
            let err = (s.elements() - rho0.elements()).camax();
            assert!(err < 1e-8);
        }
    }

    #[test]
    fn lindblad_fock_decay_matches_analytic() {
        let b = basis(7);
        let kappa = 0.9;
        let l = b.annihilation().map(|z| z * C64::new(f64::sqrt(kappa), 0.0));
        let h = DMatrix::<C64>::zeros(7, 7);
        for n in [1usize, 4] {
            let rho0 = DensityMatrix::fock_projector(n, b).unwrap();
            let grid = [0.0, 0.3, 1.0];
            let snaps = lindblad_propagate(&h, &[l.clone()], &rho0, &grid).unwrap();
            for (&t, s) in grid.iter().zip(&snaps) {
                let expected = (-(n as f64) * kappa * t).exp();
                assert!(
                    (s.elements()[(n, n)].re - expected).abs() < 1e-6,
                    "n={n} t={t}"
                );
            }
        }
    }

    #[test]
    fn lindblad_coherent_state_stays_coherent() {
        let b = basis(20);
        let kappa = 1.0;
        let alpha0 = C64::new(1.0, 0.0);
        let l = b.annihilation().map(|z| z * C64::new(f64::sqrt(kappa), 0.0));
        let h = DMatrix::<C64>::zeros(20, 20);
        let rho0 = DensityMatrix::from_pure(&coherent_state(alpha0, b).unwrap());
        let grid = [0.0, 0.4, 1.0];
        let snaps = lindblad_propagate(&h, &[l], &rho0, &grid).unwrap();
        for (&t, s) in grid.iter().zip(&snaps) {
            let alpha_t = alpha0 * C64::new((-kappa * t / 2.0).exp(), 0.0);
            let target = coherent_state(alpha_t, b).unwrap();
            let fid = (target.amplitudes().adjoint() * s.elements() * target.amplitudes())[(0, 0)]
                .re;
            assert!(fid > 1.0 - 1e-6, "t={t}: fidelity {fid}");
        }
    }

    #[test]
    fn lindblad_matches_damp_evolve_with_dephasing() {
        let b = basis(10);
        let kappa = 0.6;
        let gamma_phi = 0.2;
        let psi = coherent_state(C64::new(1.1, 0.3), b).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let l1 = b.annihilation().map(|z| z * C64::new(f64::sqrt(kappa), 0.0));
        let l2 = b.number().map(|z| z * C64::new(f64::sqrt(2.0 * gamma_phi), 0.0));
        let h = DMatrix::<C64>::zeros(10, 10);
        let grid = [0.0, 0.7, 1.5];
        let snaps = lindblad_propagate(&h, &[l1, l2], &rho0, &grid).unwrap();
        let noise = NoiseParams::new(kappa, gamma_phi, 0.0).unwrap();
        for (&t, s) in grid.iter().zip(&snaps) {
            let analytic = damp_evolve(&rho0, &noise, t, None).unwrap();
            let err = (s.elements() - analytic.elements()).camax();
            assert!(err < 1e-6, "t={t}: {err}");
        }
    }

    #[test]
    fn lindblad_rejects_bad_grid() {
        let b = basis(3);
        let h = DMatrix::<C64>::zeros(3, 3);
        let rho0 = DensityMatrix::fock_projector(0, b).unwrap();
        assert!(lindblad_propagate(&h, &[], &rho0, &[0.5, 1.0]).is_err());
        assert!(lindblad_propagate(&h, &[], &rho0, &[0.0, 1.0, 0.5]).is_err());
    }

    #[test]
    fn lindblad_rejects_dimension_mismatch() {
        let b = basis(3);
        let h = DMatrix::<C64>::zeros(4, 4);
        let rho0 = DensityMatrix::fock_projector(0, b).unwrap();
        assert!(lindblad_propagate(&h, &[], &rho0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn decay_times_follow_tau_over_n() {
        let kappa = 1.0 / 85.0; // 1/us
        let taus = fock_decay_times(&[1, 2, 6], kappa).unwrap();
        assert!((taus[0] - 85.0).abs() / 85.0 < 1e-3);
        assert!((taus[1] - 42.5).abs() / 42.5 < 0.01);
        assert!((taus[2] - 85.0 / 6.0).abs() / (85.0 / 6.0) < 0.01);
    }

    #[test]
    fn decay_time_rejects_bad_input() {
        assert!(fock_decay_times(&[1], 0.0).is_err());
        assert!(fock_decay_times(&[0], 1.0).is_err());
    }

    #[test]
    fn fock_state_populations_match_projector() {
        let b = basis(5);
        let psi = fock_state(2, b).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        assert_eq!(rho.diagonal().unwrap().prob(2), 1.0);
    }
}
