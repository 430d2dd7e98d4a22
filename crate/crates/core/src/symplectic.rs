//! Gaussian states in the quadrature picture and the symplectic maps acting on
//! them.
//!
//! Conventions used throughout the crate:
//!
//! * quadratures are interleaved, `x = (q1, p1, ..., qN, pN)`;
//! * `a = (q + i p) / sqrt(2)`, so the vacuum covariance is `I / 2`;
//! * `single_mode_squeezer(r)` with `r > 0` squeezes `q`;
//! * a passive unitary `U` maps annihilation operators as `a -> U a`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// The symplectic form `Omega` for `n_modes` modes in interleaved ordering.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for j in 0..n_modes {
        omega[(2 * j, 2 * j + 1)] = 1.0;
        omega[(2 * j + 1, 2 * j)] = -1.0;
    }
    omega
}

/// Mean vector and covariance matrix of an `n_modes` Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ModeIndex("a state needs at least one mode".into()));
        }
        Ok(Self {
            n_modes,
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes) * 0.5,
        })
    }

    /// Builds a state from raw moments, checking shapes and symmetry.
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Dimension(format!("mean vector of length {dim}")));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Dimension(format!(
                "covariance {}x{} for mean of length {dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.amax().max(1.0);
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { n_modes: dim / 2, mean, cov })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `det(2V)`, equal to one for pure states.
    pub fn purity_det(&self) -> f64 {
        (&self.cov * 2.0).determinant()
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.purity_det() - 1.0).abs() <= tol
    }

    pub fn is_displaced(&self) -> bool {
        self.mean.amax() > 1e-12
    }

    /// Applies `t` to the listed modes (in the transform's own mode order).
    pub fn apply(&self, t: &SymplecticTransform, modes: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_mut(t, modes)?;
        Ok(out)
    }

    pub fn apply_mut(&mut self, t: &SymplecticTransform, modes: &[usize]) -> Result<()> {
        if modes.len() != t.n_modes() {
            return Err(Error::ModeIndex(format!(
                "transform acts on {} modes but {} were given",
                t.n_modes(),
                modes.len()
            )));
        }
        check_modes(modes, self.n_modes)?;
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let k = idx.len();
        let dim = 2 * self.n_modes;

        // rows: V <- S V
        let mut rows = DMatrix::zeros(k, dim);
        for (a, _) in idx.iter().enumerate() {
            for c in 0..dim {
                let mut acc = 0.0;
                for (b, &ib) in idx.iter().enumerate() {
                    acc += t.s[(a, b)] * self.cov[(ib, c)];
                }
                rows[(a, c)] = acc;
            }
        }
        for (a, &ia) in idx.iter().enumerate() {
            for c in 0..dim {
                self.cov[(ia, c)] = rows[(a, c)];
            }
        }
        // columns: V <- V S^T
        let mut cols = DMatrix::zeros(dim, k);
        for r in 0..dim {
            for (a, _) in idx.iter().enumerate() {
                let mut acc = 0.0;
                for (b, &ib) in idx.iter().enumerate() {
                    acc += self.cov[(r, ib)] * t.s[(a, b)];
                }
                cols[(r, a)] = acc;
            }
        }
        for r in 0..dim {
            for (a, &ia) in idx.iter().enumerate() {
                self.cov[(r, ia)] = cols[(r, a)];
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v = 0.5 * (self.cov[(i, j)] + self.cov[(j, i)]);
                self.cov[(i, j)] = v;
                self.cov[(j, i)] = v;
            }
        }

        let local: DVector<f64> = DVector::from_iterator(k, idx.iter().map(|&i| self.mean[i]));
        let moved = &t.s * local + &t.d;
        for (a, &ia) in idx.iter().enumerate() {
            self.mean[ia] = moved[a];
        }
        Ok(())
    }

    /// Reduced state on `keep`, in the listed order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::ModeIndex("partial trace must keep at least one mode".into()));
        }
        check_modes(keep, self.n_modes)?;
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let k = idx.len();
        let cov = DMatrix::from_fn(k, k, |a, b| self.cov[(idx[a], idx[b])]);
        let mean = DVector::from_fn(k, |a, _| self.mean[idx[a]]);
        Ok(Self { n_modes: keep.len(), mean, cov })
    }
}

fn check_modes(modes: &[usize], n_modes: usize) -> Result<()> {
    for (i, &m) in modes.iter().enumerate() {
        if m >= n_modes {
            return Err(Error::ModeIndex(format!("mode {m} out of range for {n_modes} modes")));
        }
        if modes[..i].contains(&m) {
            return Err(Error::ModeIndex(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}

/// A Gaussian unitary `x -> S x + d` on a fixed number of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    s: DMatrix<f64>,
    d: DVector<f64>,
}

impl SymplecticTransform {
    pub fn new(s: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let dim = d.len();
        if dim % 2 != 0 || s.nrows() != dim || s.ncols() != dim {
            return Err(Error::Dimension(format!(
                "symplectic matrix {}x{} with displacement of length {dim}",
                s.nrows(),
                s.ncols()
            )));
        }
        Ok(Self { s, d })
    }

    fn homogeneous(s: DMatrix<f64>) -> Self {
        let dim = s.nrows();
        Self { s, d: DVector::zeros(dim) }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self::homogeneous(DMatrix::identity(2 * n_modes, 2 * n_modes))
    }

    pub fn n_modes(&self) -> usize {
        self.d.len() / 2
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    /// `then ∘ self`: apply `self` first.
    pub fn then(&self, then: &SymplecticTransform) -> Result<Self> {
        if then.n_modes() != self.n_modes() {
            return Err(Error::Dimension("composing transforms of different sizes".into()));
        }
        Ok(Self { s: &then.s * &self.s, d: &then.s * &self.d + &then.d })
    }

    /// Largest entry of `S Ω Sᵀ − Ω`.
    pub fn symplectic_residual(&self) -> f64 {
        let omega = symplectic_form(self.n_modes());
        (&self.s * &omega * self.s.transpose() - omega).amax()
    }
}

pub fn single_mode_squeezer(r: f64) -> SymplecticTransform {
    SymplecticTransform::homogeneous(DMatrix::from_diagonal(&DVector::from_vec(vec![
        (-r).exp(),
        r.exp(),
    ])))
}

/// Two-mode squeezer `exp(r (a1† a2† − a1 a2))`.
pub fn two_mode_squeezer(r: f64) -> SymplecticTransform {
    let (c, s) = (r.cosh(), r.sinh());
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ]);
    SymplecticTransform::homogeneous(m)
}

/// The 2×2 beamsplitter unitary with transmissivity `cos²θ` and phase `φ`.
pub fn beamsplitter_unitary(theta: f64, phi: f64) -> DMatrix<Complex64> {
    let (c, s) = (theta.cos(), theta.sin());
    let e = Complex64::from_polar(1.0, phi);
    DMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(c, 0.0), -e.conj() * s, e * s, Complex64::new(c, 0.0)],
    )
}

pub fn beamsplitter(theta: f64, phi: f64) -> SymplecticTransform {
    passive_symplectic(&beamsplitter_unitary(theta, phi))
}

/// Beamsplitter angle for a given transmissivity `τ = cos²θ`.
pub fn theta_for_transmissivity(tau: f64) -> f64 {
    tau.sqrt().acos()
}

pub fn phase_shifter(phi: f64) -> SymplecticTransform {
    let (c, s) = (phi.cos(), phi.sin());
    SymplecticTransform::homogeneous(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
}

/// Symplectic of a passive unitary; no unitarity check.
fn passive_symplectic(u: &DMatrix<Complex64>) -> SymplecticTransform {
    let n = u.nrows();
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let (x, y) = (u[(j, k)].re, u[(j, k)].im);
            s[(2 * j, 2 * k)] = x;
            s[(2 * j, 2 * k + 1)] = -y;
            s[(2 * j + 1, 2 * k)] = y;
            s[(2 * j + 1, 2 * k + 1)] = x;
        }
    }
    SymplecticTransform::homogeneous(s)
}

pub fn unitary_residual(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let prod = u * u.adjoint();
    (prod - DMatrix::<Complex64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Orthogonal symplectic matrix of a passive interferometer.
pub fn unitary_to_symplectic(u: &DMatrix<Complex64>) -> Result<SymplecticTransform> {
    if u.nrows() != u.ncols() || u.nrows() == 0 {
        return Err(Error::Dimension(format!("{}x{} unitary", u.nrows(), u.ncols())));
    }
    let res = unitary_residual(u);
    if res > 1e-8 {
        return Err(Error::NotUnitary(res));
    }
    Ok(passive_symplectic(u))
}

/// One beamsplitter cell of a mesh, acting on modes `mode` and `mode + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshCell {
    pub mode: usize,
    pub theta: f64,
    pub phi: f64,
}

/// A cascade of two-mode cells followed by per-mode output phases.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerMesh {
    pub n_modes: usize,
    pub cells: Vec<MeshCell>,
    pub output_phases: Vec<f64>,
}

impl InterferometerMesh {
    /// Cell positions of the rectangular (Clements) layout: `n` layers of
    /// alternating even/odd nearest-neighbour pairs, `n(n-1)/2` cells total.
    pub fn rectangular_layout(n_modes: usize) -> Vec<usize> {
        let mut layout = Vec::with_capacity(n_modes * n_modes.saturating_sub(1) / 2);
        for layer in 0..n_modes {
            let mut k = layer % 2;
            while k + 1 < n_modes {
                layout.push(k);
                k += 2;
            }
        }
        layout
    }

    pub fn rectangular(
        n_modes: usize,
        thetas: &[f64],
        phis: &[f64],
        output_phases: &[f64],
    ) -> Result<Self> {
        let layout = Self::rectangular_layout(n_modes);
        if thetas.len() != layout.len() || phis.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "{n_modes}-mode mesh has {} cells, got {} thetas and {} phis",
                layout.len(),
                thetas.len(),
                phis.len()
            )));
        }
        if output_phases.len() != n_modes {
            return Err(Error::Dimension(format!(
                "{n_modes}-mode mesh needs {n_modes} output phases, got {}",
                output_phases.len()
            )));
        }
        let cells = layout
            .into_iter()
            .zip(thetas.iter().zip(phis))
            .map(|(mode, (&theta, &phi))| MeshCell { mode, theta, phi })
            .collect();
        Ok(Self { n_modes, cells, output_phases: output_phases.to_vec() })
    }

    /// `D · T_last ⋯ T_first`.
    pub fn unitary(&self) -> Result<DMatrix<Complex64>> {
        let n = self.n_modes;
        if n == 0 {
            return Err(Error::ModeIndex("mesh with zero modes".into()));
        }
        if self.output_phases.len() != n {
            return Err(Error::Dimension("output phase count".into()));
        }
        let mut u = DMatrix::<Complex64>::identity(n, n);
        for cell in &self.cells {
            if cell.mode + 1 >= n {
                return Err(Error::ModeIndex(format!(
                    "cell on modes ({}, {}) in a {n}-mode mesh",
                    cell.mode,
                    cell.mode + 1
                )));
            }
            let t = beamsplitter_unitary(cell.theta, cell.phi);
            let (i, j) = (cell.mode, cell.mode + 1);
            for c in 0..n {
                let (ui, uj) = (u[(i, c)], u[(j, c)]);
                u[(i, c)] = t[(0, 0)] * ui + t[(0, 1)] * uj;
                u[(j, c)] = t[(1, 0)] * ui + t[(1, 1)] * uj;
            }
        }
        for (r, &ph) in self.output_phases.iter().enumerate() {
            let e = Complex64::from_polar(1.0, ph);
            for c in 0..n {
                u[(r, c)] *= e;
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.cov(), &DMatrix::from_diagonal_element(2, 2, 0.5));
        assert_eq!(v.mean().amax(), 0.0);
        let v2 = GaussianState::vacuum(2).unwrap();
        assert_eq!(v2.cov(), &(DMatrix::identity(4, 4) * 0.5));
        assert!((GaussianState::vacuum(3).unwrap().purity_det() - 1.0).abs() < 1e-12);
        assert!(GaussianState::vacuum(0).is_err());
    }

    #[test]
    fn squeezer_values() {
        assert!(close(single_mode_squeezer(0.0).s(), &DMatrix::identity(2, 2), 0.0));
        let s = single_mode_squeezer(0.8);
        assert!((s.s()[(0, 0)] - (-0.8f64).exp()).abs() < 1e-15);
        assert!((s.s()[(1, 1)] - 0.8f64.exp()).abs() < 1e-15);
        let st = GaussianState::vacuum(1).unwrap().apply(&s, &[0]).unwrap();
        assert!((st.cov()[(0, 0)] - (-1.6f64).exp() / 2.0).abs() < 1e-14);
        assert!((st.cov()[(1, 1)] - 1.6f64.exp() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn two_mode_squeezer_matches_squeezers_plus_balanced_splitter() {
        let r = 0.8;
        assert!(close(two_mode_squeezer(0.0).s(), &DMatrix::identity(4, 4), 0.0));
        let direct = GaussianState::vacuum(2).unwrap().apply(&two_mode_squeezer(r), &[0, 1]).unwrap();
        let mut composed = GaussianState::vacuum(2).unwrap();
        composed.apply_mut(&single_mode_squeezer(-r), &[0]).unwrap();
        composed.apply_mut(&single_mode_squeezer(r), &[1]).unwrap();
        composed.apply_mut(&beamsplitter(std::f64::consts::FRAC_PI_4, 0.0), &[0, 1]).unwrap();
        assert!(close(direct.cov(), composed.cov(), 1e-12));
        let reduced = direct.partial_trace(&[0]).unwrap();
        let expect = DMatrix::identity(2, 2) * ((2.0 * r).cosh() / 2.0);
        assert!(close(reduced.cov(), &expect, 1e-12));
        assert!((direct.purity_det() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn beamsplitter_cases() {
        assert!(close(beamsplitter(0.0, 1.3).s(), &DMatrix::identity(4, 4), 1e-15));
        let theta = theta_for_transmissivity(0.1);
        assert!((theta.cos().powi(2) - 0.1).abs() < 1e-14);
        let vac = GaussianState::vacuum(2).unwrap();
        let out = vac.apply(&beamsplitter(std::f64::consts::FRAC_PI_4, 0.0), &[0, 1]).unwrap();
        assert!(close(out.cov(), vac.cov(), 1e-15));
    }

    #[test]
    fn mesh_cases() {
        let empty = InterferometerMesh { n_modes: 3, cells: vec![], output_phases: vec![0.0; 3] };
        let u = empty.unitary().unwrap();
        assert!(unitary_residual(&u) < 1e-15);
        assert!((u - DMatrix::<Complex64>::identity(3, 3)).iter().all(|z| z.norm() < 1e-15));

        let one = InterferometerMesh::rectangular(2, &[std::f64::consts::FRAC_PI_4], &[0.0], &[0.0, 0.0])
            .unwrap();
        let u = one.unitary().unwrap();
        assert!((u[(0, 0)].norm_sqr() - 0.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4;
        let m = n * (n - 1) / 2;
        let th: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ph: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let out: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mesh = InterferometerMesh::rectangular(n, &th, &ph, &out).unwrap();
        assert!(unitary_residual(&mesh.unitary().unwrap()) < 1e-10);

        let zero = InterferometerMesh::rectangular(5, &[0.0; 10], &[0.0; 10], &[0.0; 5]).unwrap();
        assert!(unitary_residual(&zero.unitary().unwrap()) < 1e-15);
        assert!((zero.unitary().unwrap() - DMatrix::<Complex64>::identity(5, 5))
            .iter()
            .all(|z| z.norm() < 1e-15));

        let bad = InterferometerMesh {
            n_modes: 2,
            cells: vec![MeshCell { mode: 1, theta: 0.1, phi: 0.0 }],
            output_phases: vec![0.0; 2],
        };
        assert!(bad.unitary().is_err());
    }

    #[test]
    fn layout_cell_count() {
        for n in 1..9 {
            assert_eq!(InterferometerMesh::rectangular_layout(n).len(), n * (n - 1) / 2);
        }
    }

    #[test]
    fn unitary_conversion() {
        let s = unitary_to_symplectic(&DMatrix::identity(2, 2)).unwrap();
        assert!(close(s.s(), &DMatrix::identity(4, 4), 0.0));
        let phase = DMatrix::from_element(1, 1, Complex64::i());
        let s = unitary_to_symplectic(&phase).unwrap();
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(close(s.s(), &rot, 1e-15));
        assert!(close(s.s(), phase_shifter(std::f64::consts::FRAC_PI_2).s(), 1e-15));
        let not_unitary = DMatrix::from_element(1, 1, Complex64::new(2.0, 0.0));
        assert!(matches!(unitary_to_symplectic(&not_unitary), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn apply_rejects_bad_modes() {
        let vac = GaussianState::vacuum(3).unwrap();
        assert!(vac.apply(&beamsplitter(0.3, 0.0), &[1, 1]).is_err());
        assert!(vac.apply(&beamsplitter(0.3, 0.0), &[1, 3]).is_err());
        assert!(vac.apply(&beamsplitter(0.3, 0.0), &[1]).is_err());
        assert!(vac.partial_trace(&[]).is_err());
    }

    #[test]
    fn partial_trace_cases() {
        let mut st = GaussianState::vacuum(2).unwrap();
        st.apply_mut(&single_mode_squeezer(0.4), &[0]).unwrap();
        st.apply_mut(&single_mode_squeezer(-0.9), &[1]).unwrap();
        assert_eq!(st.partial_trace(&[0, 1]).unwrap(), st);
        let lone = GaussianState::vacuum(1).unwrap().apply(&single_mode_squeezer(-0.9), &[0]).unwrap();
        assert!(close(st.partial_trace(&[1]).unwrap().cov(), lone.cov(), 1e-15));
    }
}
