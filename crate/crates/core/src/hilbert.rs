//! Truncated Fock-space linear algebra: states, operators, and the
//! closed-form displaced-Fock overlap.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use statrs::function::gamma::ln_gamma;

use crate::error::{FockError, Result};

/// Truncated Fock basis |0>..|dim-1>.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    dim: usize,
}

impl FockBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(FockError::BadDimension(dim));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Annihilation operator a, with a|n> = sqrt(n)|n-1>.
    pub fn annihilation(&self) -> DMatrix<C64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for n in 1..self.dim {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn creation(&self) -> DMatrix<C64> {
        self.annihilation().adjoint()
    }

    /// Number operator a†a.
    pub fn number(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|n| C64::new(n as f64, 0.0)),
        ))
    }
}

/// A value that may carry a truncation-edge warning: more than 1e-6 of
/// population reached the top two basis states while it was produced.
#[derive(Debug, Clone)]
pub struct EdgeChecked<T> {
    pub value: T,
    pub edge_warning: bool,
}

pub(crate) const EDGE_POPULATION_THRESHOLD: f64 = 1e-6;

/// Normalized pure state in a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    basis: FockBasis,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn new(amplitudes: DVector<C64>, basis: FockBasis) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(FockError::DimensionMismatch {
                expected: basis.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if norm < 1e-14 {
            return Err(FockError::InvalidState("zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes / C64::new(norm, 0.0),
            basis,
        })
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn population(&self, n: usize) -> f64 {
        self.amplitudes[n].norm_sqr()
    }

    pub fn populations(&self) -> FockDistribution {
        FockDistribution::new(self.amplitudes.iter().map(|c| c.norm_sqr()).collect())
            .expect("normalized state populations are a valid distribution")
    }

    pub fn overlap(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Fock state |n> in the given basis.
pub fn fock_state(n: usize, basis: FockBasis) -> Result<StateVector> {
    if n >= basis.dim() {
        return Err(FockError::IndexOutOfRange {
            index: n,
            dim: basis.dim(),
        });
    }
    let mut v = DVector::zeros(basis.dim());
    v[n] = C64::new(1.0, 0.0);
    StateVector::new(v, basis)
}

/// Complex Hermitian density matrix in a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<C64>,
    basis: FockBasis,
}

impl DensityMatrix {
    /// Validates hermiticity (1e-10), unit trace (1e-10) and positivity
    /// (eigenvalues >= -1e-9).
    pub fn new(elements: DMatrix<C64>, basis: FockBasis) -> Result<Self> {
        if elements.nrows() != basis.dim() || elements.ncols() != basis.dim() {
            return Err(FockError::DimensionMismatch {
                expected: basis.dim(),
                got: elements.nrows(),
            });
        }
        let herm_err = (&elements - elements.adjoint()).camax();
        if herm_err > 1e-10 {
            return Err(FockError::InvalidState(format!(
                "not Hermitian: max |rho - rho^dag| = {herm_err:.3e}"
            )));
        }
        let tr = elements.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(FockError::InvalidState(format!("trace = {tr}, expected 1")));
        }
        let min_eig = elements
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(FockError::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { elements, basis })
    }

    /// Skips validation; for internal use where validity is guaranteed by
    /// construction or checked separately by the caller.
    pub(crate) fn from_raw(elements: DMatrix<C64>, basis: FockBasis) -> Self {
        Self { elements, basis }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        Self {
            elements: v * v.adjoint(),
            basis: psi.basis(),
        }
    }

    pub fn fock_projector(n: usize, basis: FockBasis) -> Result<Self> {
        Ok(Self::from_pure(&fock_state(n, basis)?))
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    /// Diagonal as a Fock distribution, clamping eigen-noise at -1e-9.
    pub fn diagonal(&self) -> Result<FockDistribution> {
        let probs: Vec<f64> = self
            .elements
            .diagonal()
            .iter()
            .map(|c| c.re.max(0.0))
            .collect();
        FockDistribution::new(probs)
    }
}

/// Nonnegative probability vector over phonon number. The tail may be
/// truncated, so the sum is allowed to fall below one.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FockDistribution {
    probs: Vec<f64>,
}

impl FockDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(FockError::InvalidDistribution("empty".into()));
        }
        for (n, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0 + 1e-9).contains(&p) || p.is_nan() {
                return Err(FockError::InvalidDistribution(format!("P_{n} = {p}")));
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(FockError::InvalidDistribution(format!(
                "total probability {total} > 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Point mass at |n>.
    pub fn fock(n: usize, len: usize) -> Result<Self> {
        if n >= len {
            return Err(FockError::IndexOutOfRange { index: n, dim: len });
        }
        let mut probs = vec![0.0; len];
        probs[n] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Tail probability of detecting at least `n` phonons.
    pub fn tail(&self, n: usize) -> f64 {
        self.probs.iter().skip(n).sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Parameters (alpha, r, {c_m}) of a Gaussian-transformed core state
/// D(alpha) S(r) sum_m c_m |m>.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreStateParams {
    pub alpha: C64,
    pub r: C64,
    coeffs: Vec<C64>,
}

impl CoreStateParams {
    pub fn new(alpha: C64, r: C64, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(FockError::InvalidState("empty coefficient vector".into()));
        }
        let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(FockError::InvalidState(format!(
                "core coefficients have squared norm {norm_sq}, expected 1"
            )));
        }
        Ok(Self { alpha, r, coeffs })
    }

    /// Normalizes the coefficient vector before constructing.
    pub fn normalized(alpha: C64, r: C64, mut coeffs: Vec<C64>) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-14 {
            return Err(FockError::InvalidState("zero coefficient vector".into()));
        }
        for c in &mut coeffs {
            *c /= norm;
        }
        Self::new(alpha, r, coeffs)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }
}

/// exp(G) for an anti-Hermitian generator G, via eigendecomposition of the
/// Hermitian matrix iG.
pub(crate) fn expm_antihermitian(g: &DMatrix<C64>) -> DMatrix<C64> {
    let h = g.map(|z| z * C64::new(0.0, 1.0)); // iG is Hermitian
    let eig = h.symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l)),
    );
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&phases) * q.adjoint()
}

/// exp(G) * B for a thin block B, by scaling and a truncated Taylor series.
/// Much cheaper than forming exp(G) when B has few columns.
pub(crate) fn expm_multiply(g: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let norm = g.camax();
    let s = if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    };
    let scale = C64::new(1.0 / 2f64.powi(s as i32), 0.0);
    let gs = g.map(|z| z * scale);
    let mut out = b.clone();
    for _ in 0..(1u64 << s) {
        let mut term = out.clone();
        let mut acc = out;
        for k in 1..60 {
            term = (&gs * term) / C64::new(k as f64, 0.0);
            acc += &term;
            if term.camax() < 1e-18 * acc.camax().max(1e-30) {
                break;
            }
        }
        out = acc;
    }
    out
}

/// Generator of the displacement operator, alpha a† - alpha* a.
pub(crate) fn displacement_generator(alpha: C64, basis: FockBasis) -> DMatrix<C64> {
    let a = basis.annihilation();
    a.adjoint().map(|z| z * alpha) - a.map(|z| z * alpha.conj())
}

/// Generator of the squeezing operator, (r* a² - r a†²)/2.
pub(crate) fn squeezing_generator(r: C64, basis: FockBasis) -> DMatrix<C64> {
    let a = basis.annihilation();
    let a2 = &a * &a;
    let half = C64::new(0.5, 0.0);
    a2.map(|z| z * r.conj() * half) - a2.adjoint().map(|z| z * r * half)
}

/// Displacement operator D(alpha) = exp(alpha a† - alpha* a) on the
/// truncated space.
pub fn displacement_operator(alpha: C64, basis: FockBasis) -> DMatrix<C64> {
    expm_antihermitian(&displacement_generator(alpha, basis))
}

/// Squeezing operator S(r) = exp((r* a² - r a†²)/2) on the truncated space.
/// The edge warning fires when S(r)|0> puts more than 1e-6 of population in
/// the top two basis states.
pub fn squeezing_operator(r: C64, basis: FockBasis) -> EdgeChecked<DMatrix<C64>> {
    let s = expm_antihermitian(&squeezing_generator(r, basis));
    let dim = basis.dim();
    let edge = s[(dim - 1, 0)].norm_sqr() + s[(dim - 2, 0)].norm_sqr();
    EdgeChecked {
        value: s,
        edge_warning: edge > EDGE_POPULATION_THRESHOLD,
    }
}

/// Core state D(alpha) S(r) sum_m c_m |m> of the excluded Gaussian family.
pub fn core_state(params: &CoreStateParams, basis: FockBasis) -> Result<EdgeChecked<StateVector>> {
    let dim = basis.dim();
    if params.coeffs().len() > dim / 2 {
        return Err(FockError::Domain(format!(
            "{} core coefficients leave no truncation headroom at dim {dim}",
            params.coeffs().len()
        )));
    }
    let mut c = DVector::zeros(dim);
    for (m, &cm) in params.coeffs().iter().enumerate() {
        c[m] = cm;
    }
    let sc = expm_multiply(&squeezing_generator(params.r, basis), &DMatrix::from_column_slice(dim, 1, c.as_slice()));
    let dsc = expm_multiply(&displacement_generator(params.alpha, basis), &sc);
    let v = DVector::from_column_slice(dsc.as_slice());
    let edge = v[dim - 1].norm_sqr() + v[dim - 2].norm_sqr();
    Ok(EdgeChecked {
        value: StateVector::new(v, basis)?,
        edge_warning: edge > EDGE_POPULATION_THRESHOLD,
    })
}

/// Generalized Laguerre polynomial L_p^k(x) by the three-term recurrence in
/// the degree p.
pub(crate) fn laguerre(p: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    if p == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0;
    let mut l = 1.0 + kf - x;
    for i in 1..p {
        let i = i as f64;
        let next = ((2.0 * i + kf + 1.0 - x) * l - (i + kf) * lm1) / (i + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// Displaced-Fock overlap probability delta_{m,n}(alpha) = |<m|D(alpha)|n>|²
/// in closed Laguerre form. Symmetric in (m, n) and a function of |alpha|
/// only.
pub fn displacement_overlap(m: usize, n: usize, alpha: C64) -> f64 {
    let x = alpha.norm_sqr();
    if x == 0.0 {
        return if m == n { 1.0 } else { 0.0 };
    }
    let p = m.min(n);
    let q = m.max(n);
    let k = q - p;
    let ln_pref = ln_gamma(p as f64 + 1.0) - ln_gamma(q as f64 + 1.0) + k as f64 * x.ln() - x;
    let l = laguerre(p, k, x);
    ln_pref.exp() * l * l
}

/// delta_{m,n}(d) together with its derivative with respect to the real
/// displacement amplitude d > 0.
pub fn displacement_overlap_with_derivative(m: usize, n: usize, d: f64) -> (f64, f64) {
    assert!(d > 0.0, "derivative requires d > 0");
    let x = d * d;
    let p = m.min(n);
    let q = m.max(n);
    let k = q - p;
    let kf = k as f64;
    let ln_pref = ln_gamma(p as f64 + 1.0) - ln_gamma(q as f64 + 1.0) + kf * x.ln() - x;
    let pref = ln_pref.exp();
    let l = laguerre(p, k, x);
    // dL_p^k/dx = -L_{p-1}^{k+1}
    let dl = if p == 0 { 0.0 } else { -laguerre(p - 1, k + 1, x) };
    let value = pref * l * l;
    let ddx = pref * ((kf / x - 1.0) * l * l + 2.0 * l * dl);
    (value, 2.0 * d * ddx)
}

/// Fock distribution after displacing a Fock-diagonal state:
/// P'_m = sum_n P_n delta_{m,n}(alpha). The warning fires when `out_len`
/// captures less than 1 - 1e-6 of the input mass.
pub fn displaced_fock_distribution(
    dist: &FockDistribution,
    alpha: C64,
    out_len: usize,
) -> Result<EdgeChecked<FockDistribution>> {
    if out_len == 0 {
        return Err(FockError::Domain("out_len must be positive".into()));
    }
    let mut probs = vec![0.0; out_len];
    for (m, slot) in probs.iter_mut().enumerate() {
        *slot = dist
            .probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(n, &p)| p * displacement_overlap(m, n, alpha))
            .sum();
    }
    let captured: f64 = probs.iter().sum();
    let warning = captured < dist.total() * (1.0 - EDGE_POPULATION_THRESHOLD);
    // clip accumulated roundoff above 1
    for p in &mut probs {
        *p = p.min(1.0);
    }
    Ok(EdgeChecked {
        value: FockDistribution::new(probs)?,
        edge_warning: warning,
    })
}
