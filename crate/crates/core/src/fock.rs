//! Fock-basis statistics of Gaussian states.
//!
//! A state is moved to the complex mode basis `ζ = (a_1..a_M, a_1†..a_M†)`,
//! where the Husimi covariance is `V_Q = W V W† + I/2` and the kernel matrix
//! is `A = X (I − V_Q⁻¹)` with `X` swapping the two halves. Photon-number
//! probabilities are hafnians of `A` with rows repeated per the pattern;
//! pure states factor as `A = B̄ ⊕ B` and give amplitudes from hafnians of
//! `B` alone.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::hafnian::{self, PhotonPattern, SymmetricMatrix};
use crate::symplectic::GaussianState;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Negative probabilities above this are treated as roundoff and clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// Complex-basis description of a Gaussian state.
#[derive(Debug, Clone)]
pub struct HusimiForm {
    n_modes: usize,
    v_q: DMatrix<Complex64>,
    det_v_q: f64,
    a: SymmetricMatrix,
    /// Loop weights; `None` for zero displacement.
    f: Option<Vec<Complex64>>,
    /// `exp(−½ β† V_Q⁻¹ β)`, one when undisplaced.
    displacement_factor: f64,
}

impl HusimiForm {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn v_q(&self) -> &DMatrix<Complex64> {
        &self.v_q
    }

    pub fn det_v_q(&self) -> f64 {
        self.det_v_q
    }

    pub fn a(&self) -> &SymmetricMatrix {
        &self.a
    }

    pub fn f(&self) -> Option<&[Complex64]> {
        self.f.as_deref()
    }

    /// Replaces the kernel matrix; used to build deliberately broken forms
    /// when exercising the validation suite.
    pub fn with_kernel(mut self, a: SymmetricMatrix) -> Result<Self> {
        if a.dim() != 2 * self.n_modes {
            return Err(Error::Dimension("kernel matrix size".into()));
        }
        self.a = a;
        Ok(self)
    }

    /// Probability of `pattern`, clamped to `[0, 1]`.
    pub fn probability(&self, pattern: &PhotonPattern) -> Result<f64> {
        if pattern.len() != self.n_modes {
            return Err(Error::Dimension(format!(
                "pattern over {} modes for a {}-mode state",
                pattern.len(),
                self.n_modes
            )));
        }
        let counts: Vec<u32> = pattern.0.iter().chain(pattern.0.iter()).copied().collect();
        let kernel = hafnian::hafnian_repeated(&self.a, self.f.as_deref(), &counts)?;
        let value = kernel * self.displacement_factor / (pattern.factorial() * self.det_v_q.sqrt());
        clamp_probability(value)
    }
}

fn clamp_probability(value: Complex64) -> Result<f64> {
    let scale = value.re.abs().max(1.0);
    if value.im.abs() > CLAMP_TOLERANCE * scale {
        return Err(Error::Unphysical(format!(
            "probability has imaginary part {:.3e}",
            value.im
        )));
    }
    if !value.re.is_finite() {
        return Err(Error::Unphysical("probability is not finite".into()));
    }
    if value.re < -CLAMP_TOLERANCE {
        return Err(Error::NegativeProbability(value.re));
    }
    Ok(value.re.clamp(0.0, 1.0))
}

/// `W` with `ζ = W x` for interleaved quadratures.
fn complex_basis(n_modes: usize) -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut w = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for j in 0..n_modes {
        w[(j, 2 * j)] = Complex64::new(s, 0.0);
        w[(j, 2 * j + 1)] = Complex64::new(0.0, s);
        w[(n_modes + j, 2 * j)] = Complex64::new(s, 0.0);
        w[(n_modes + j, 2 * j + 1)] = Complex64::new(0.0, -s);
    }
    w
}

pub fn husimi_form(state: &GaussianState) -> Result<HusimiForm> {
    let m = state.n_modes();
    let dim = 2 * m;
    let w = complex_basis(m);
    let cov = state.cov().map(|x| Complex64::new(x, 0.0));
    let mut v_q = &w * cov * w.adjoint();
    for i in 0..dim {
        v_q[(i, i)] += 0.5;
    }
    let lu = v_q.clone().lu();
    let det = lu.determinant();
    if !(det.re > 0.0) || det.im.abs() > 1e-8 * det.re.abs() {
        return Err(Error::Unphysical(format!("det(V_Q) = {det}")));
    }
    let v_q_inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Unphysical("singular Husimi covariance".into()))?;

    let mut worst = 0.0f64;
    let kernel = |i: usize, j: usize| {
        let row = if i < m { i + m } else { i - m };
        let delta = if row == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - v_q_inv[(row, j)]
    };
    for i in 0..dim {
        for j in (i + 1)..dim {
            worst = worst.max((kernel(i, j) - kernel(j, i)).norm());
        }
    }
    if worst > 1e-8 {
        return Err(Error::Unphysical(format!("kernel matrix asymmetric by {worst:.3e}")));
    }
    let a = SymmetricMatrix::from_upper(dim, |i, j| 0.5 * (kernel(i, j) + kernel(j, i)));

    let (f, displacement_factor) = if state.is_displaced() {
        let mean = state.mean().map(|x| Complex64::new(x, 0.0));
        let beta: DVector<Complex64> = &w * mean;
        let q_beta = &v_q_inv * &beta;
        let quad: Complex64 = beta.iter().zip(q_beta.iter()).map(|(b, q)| b.conj() * q).sum();
        let f = loop_weights(&v_q_inv, &beta, m);
        (Some(f), (-0.5 * quad.re).exp())
    } else {
        (None, 1.0)
    };

    Ok(HusimiForm { n_modes: m, v_q, det_v_q: det.re, a, f, displacement_factor })
}

/// Loop weights of a displaced state, `F = β† V_Q⁻¹` read in the doubled
/// index order of `A`.
fn loop_weights(v_q_inv: &DMatrix<Complex64>, beta: &DVector<Complex64>, m: usize) -> Vec<Complex64> {
    let dim = 2 * m;
    (0..dim)
        .map(|j| {
            let mut acc = ZERO;
            for i in 0..dim {
                acc += beta[i].conj() * v_q_inv[(i, j)];
            }
            acc
        })
        .collect()
}

pub fn fock_probability(state: &GaussianState, pattern: &PhotonPattern) -> Result<f64> {
    if pattern.len() != state.n_modes() {
        return Err(Error::Dimension(format!(
            "pattern over {} modes for a {}-mode state",
            pattern.len(),
            state.n_modes()
        )));
    }
    husimi_form(state)?.probability(pattern)
}

/// `|ψ⟩ = c · exp(½ Σ b_jk a_j† a_k†) |0⟩` with `c > 0`.
#[derive(Debug, Clone)]
pub struct PureAmplitudeForm {
    b: SymmetricMatrix,
    prefactor: f64,
}

impl PureAmplitudeForm {
    pub fn b(&self) -> &SymmetricMatrix {
        &self.b
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn n_modes(&self) -> usize {
        self.b.dim()
    }

    pub fn amplitude(&self, pattern: &PhotonPattern) -> Result<Complex64> {
        let h = hafnian::hafnian_repeated(&self.b, None, &pattern.0)?;
        Ok(h * (self.prefactor / pattern.factorial().sqrt()))
    }
}

pub fn pure_amplitude_form(state: &GaussianState) -> Result<PureAmplitudeForm> {
    let purity = state.purity_det();
    if (purity - 1.0).abs() > 1e-6 {
        return Err(Error::NotPure(purity));
    }
    if state.is_displaced() {
        return Err(Error::Displaced);
    }
    let form = husimi_form(state)?;
    pure_amplitude_from_husimi(&form)
}

/// Reads `B` off the lower-right block of `A`, checking `A = B̄ ⊕ B`.
pub fn pure_amplitude_from_husimi(form: &HusimiForm) -> Result<PureAmplitudeForm> {
    let m = form.n_modes;
    let a = &form.a;
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            worst = worst.max(a.get(i, m + j).norm());
            worst = worst.max((a.get(i, j) - a.get(m + i, m + j).conj()).norm());
        }
    }
    if worst > 1e-8 {
        return Err(Error::Unphysical(format!(
            "kernel matrix lacks pure-state block structure (deviation {worst:.3e})"
        )));
    }
    let b = SymmetricMatrix::from_upper(m, |i, j| a.get(m + i, m + j));
    Ok(PureAmplitudeForm { b, prefactor: form.det_v_q.powf(-0.25) })
}

pub fn fock_amplitude(form: &PureAmplitudeForm, pattern: &PhotonPattern) -> Result<Complex64> {
    if pattern.len() != form.n_modes() {
        return Err(Error::Dimension(format!(
            "pattern over {} modes for a {}-mode state",
            pattern.len(),
            form.n_modes()
        )));
    }
    form.amplitude(pattern)
}
