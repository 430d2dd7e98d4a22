//! Hafnians and loop hafnians of complex symmetric matrices.
//!
//! Both use the power-trace formula: an inclusion–exclusion sum over subsets
//! `Z` of index pairs `(2j, 2j+1)`, where each term is the `λ^{n/2}`
//! coefficient of `exp(Σ_k g_k λ^k)` with
//! `g_k = tr((AX)_Z^k) / 2k` (plus `½ γ_Z X (AX)_Z^{k-1} γ_Zᵀ` for loops).
//! Power traces come from the characteristic polynomial of the upper
//! Hessenberg form, so each subset costs `O(n³)` and the whole sum
//! `O(n³ 2^{n/2})`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix with `M = Mᵀ` (symmetric, not Hermitian).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl SymmetricMatrix {
    /// Checks symmetry to `1e-12` relative to the largest entry.
    pub fn new(m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("{}x{} matrix", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
            }
        }
        if worst > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(worst));
        }
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = m[(i, j)];
            }
        }
        Ok(Self { n, data })
    }

    /// Builds from the upper triangle of `f(i, j)`, `i <= j`.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&z| z * c).collect() }
    }
}

/// Photon counts, one per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhotonPattern(pub Vec<u32>);

impl PhotonPattern {
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Π n_j!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&n| (1..=n).map(f64::from).product::<f64>()).product()
    }
}

impl From<Vec<u32>> for PhotonPattern {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

/// Repeats row/column `j` of `m` `counts[j]` times (zero drops it).
pub fn repeated_submatrix(m: &SymmetricMatrix, counts: &[u32]) -> Result<SymmetricMatrix> {
    if counts.len() != m.dim() {
        return Err(Error::Dimension(format!(
            "pattern of length {} for a {}-dimensional matrix",
            counts.len(),
            m.dim()
        )));
    }
    let idx = repeated_indices(counts);
    Ok(SymmetricMatrix::from_upper(idx.len(), |a, b| m.get(idx[a], idx[b])))
}

/// Same as [`repeated_submatrix`] on a `2M × 2M` matrix in the doubled
/// `(a_1..a_M, a_1†..a_M†)` layout, with `pattern` of length `M` applied to
/// both halves.
pub fn repeated_submatrix_doubled(
    m: &SymmetricMatrix,
    pattern: &PhotonPattern,
) -> Result<SymmetricMatrix> {
    if 2 * pattern.len() != m.dim() {
        return Err(Error::Dimension(format!(
            "pattern over {} modes for a doubled matrix of dimension {}",
            pattern.len(),
            m.dim()
        )));
    }
    let counts: Vec<u32> = pattern.0.iter().chain(pattern.0.iter()).copied().collect();
    repeated_submatrix(m, &counts)
}

pub(crate) fn repeated_indices(counts: &[u32]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(j, &c)| std::iter::repeat_n(j, c as usize))
        .collect()
}

pub fn hafnian(m: &SymmetricMatrix) -> Complex64 {
    let n = m.dim();
    if n == 0 {
        return ONE;
    }
    if n % 2 == 1 {
        return ZERO;
    }
    if n == 2 {
        return m.get(0, 1);
    }
    power_trace_sum(m, None)
}

/// Loop hafnian with self-loop weights `loops` (the diagonal of `m` is
/// ignored).
pub fn loop_hafnian(m: &SymmetricMatrix, loops: &[Complex64]) -> Result<Complex64> {
    let n = m.dim();
    if loops.len() != n {
        return Err(Error::Dimension(format!(
            "{} loop weights for a {n}-dimensional matrix",
            loops.len()
        )));
    }
    if n == 0 {
        return Ok(ONE);
    }
    if n % 2 == 1 {
        // pad with an index that can only close on itself with weight one
        let padded = SymmetricMatrix::from_upper(n + 1, |i, j| if j == n { ZERO } else { m.get(i, j) });
        let mut lp = loops.to_vec();
        lp.push(ONE);
        return Ok(power_trace_sum(&padded, Some(&lp)));
    }
    Ok(power_trace_sum(m, Some(loops)))
}

/// (Loop) hafnian of `m` with row/column `j` repeated `counts[j]` times,
/// without building the repeated matrix when that is cheaper.
///
/// Patterns with large per-mode counts go through a finite-difference
/// expansion of `∂^n exp(½ xᵀ m x + loops·x)` with `Π (n_j + 1)` terms. Rank
/// deficient repeated matrices make the subset sum cancel badly, so besides
/// being faster this keeps high-occupation probabilities accurate.
pub fn hafnian_repeated(
    m: &SymmetricMatrix,
    loops: Option<&[Complex64]>,
    counts: &[u32],
) -> Result<Complex64> {
    if counts.len() != m.dim() {
        return Err(Error::Dimension(format!(
            "pattern of length {} for a {}-dimensional matrix",
            counts.len(),
            m.dim()
        )));
    }
    if let Some(l) = loops {
        if l.len() != m.dim() {
            return Err(Error::Dimension(format!(
                "{} loop weights for a {}-dimensional matrix",
                l.len(),
                m.dim()
            )));
        }
    }
    let total: usize = counts.iter().map(|&c| c as usize).sum();
    let support: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] > 0).collect();
    let even_total = total + total % 2;
    let subset_cost = 2f64.powi(even_total as i32 / 2) * (even_total as f64).powi(3);
    let expansion_cost: f64 = support.iter().map(|&j| f64::from(counts[j]) + 1.0).product::<f64>()
        * (support.len() * support.len()) as f64;
    if expansion_cost < subset_cost {
        return Ok(finite_difference_hafnian(m, loops, counts, &support, total));
    }
    let sub = repeated_submatrix(m, counts)?;
    match loops {
        None => Ok(hafnian(&sub)),
        Some(l) => {
            let lp: Vec<Complex64> = repeated_indices(counts).into_iter().map(|i| l[i]).collect();
            loop_hafnian(&sub, &lp)
        }
    }
}

/// `Σ_v (−1)^{|v|} Π C(n_j, v_j) P(n/2 − v)`, where `P` is the degree-`N`
/// part of `exp(½ xᵀ m x + loops·x)`. Central differences of order `n` are
/// exact on homogeneous polynomials of degree `|n|`.
fn finite_difference_hafnian(
    m: &SymmetricMatrix,
    loops: Option<&[Complex64]>,
    counts: &[u32],
    support: &[usize],
    total: usize,
) -> Complex64 {
    if loops.is_none() && total % 2 == 1 {
        return ZERO;
    }
    let d = support.len();
    let n: Vec<u32> = support.iter().map(|&j| counts[j]).collect();
    let sub = DMatrix::from_fn(d, d, |a, b| m.get(support[a], support[b]));
    let lw: Option<Vec<Complex64>> = loops.map(|l| support.iter().map(|&j| l[j]).collect());
    // 1/j! (N−2j)! for the mixed terms
    let inv_fact: Vec<f64> = {
        let mut f = vec![1.0; total + 1];
        for k in 1..=total {
            f[k] = f[k - 1] / k as f64;
        }
        f
    };
    let mut v = vec![0u32; d];
    let mut h = vec![0.0f64; d];
    let mut acc = ZERO;
    loop {
        let mut weight = 1.0;
        let mut parity = 0;
        for a in 0..d {
            h[a] = f64::from(n[a]) / 2.0 - f64::from(v[a]);
            weight *= binomial(n[a], v[a]);
            parity += v[a];
        }
        let mut q = ZERO;
        for a in 0..d {
            let mut row = ZERO;
            for b in 0..d {
                row += sub[(a, b)] * h[b];
            }
            q += row * h[a];
        }
        q *= 0.5;
        let value = match &lw {
            None => q.powu((total / 2) as u32) * inv_fact[total / 2],
            Some(l) => {
                let lin: Complex64 = l.iter().zip(&h).map(|(w, x)| w * x).sum();
                (0..=total / 2)
                    .map(|j| {
                        q.powu(j as u32) * lin.powu((total - 2 * j) as u32) * (inv_fact[j] * inv_fact[total - 2 * j])
                    })
                    .sum()
            }
        };
        if parity % 2 == 0 {
            acc += value * weight;
        } else {
            acc -= value * weight;
        }
        // mixed-radix increment
        let mut a = 0;
        loop {
            if a == d {
                return acc;
            }
            if v[a] < n[a] {
                v[a] += 1;
                break;
            }
            v[a] = 0;
            a += 1;
        }
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn power_trace_sum(m: &SymmetricMatrix, loops: Option<&[Complex64]>) -> Complex64 {
    let n = m.dim();
    let half = n / 2;
    let mut total = ZERO;
    let mut idx = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n * n);
    let mut g = vec![ZERO; half + 1];
    let mut e = vec![ZERO; half + 1];
    let mut work = Workspace::default();

    for mask in 1u64..(1u64 << half) {
        idx.clear();
        for j in 0..half {
            if mask >> j & 1 == 1 {
                idx.push(2 * j);
                idx.push(2 * j + 1);
            }
        }
        let k = idx.len();
        b.clear();
        // (AX)_{ab} = A[idx_a][idx_b ^ 1]
        for &ia in &idx {
            for &ib in &idx {
                b.push(m.get(ia, ib ^ 1));
            }
        }
        let traces = work.power_traces(&b, k, half);
        for p in 1..=half {
            g[p] = traces[p - 1] / (2.0 * p as f64);
        }
        if let Some(gamma) = loops {
            // v_0 = γ_Z X; term_p = ½ v_{p-1} · γ_Z; v_p = v_{p-1} B
            let mut v: Vec<Complex64> = idx.iter().map(|&i| gamma[i ^ 1]).collect();
            let gz: Vec<Complex64> = idx.iter().map(|&i| gamma[i]).collect();
            let mut next = vec![ZERO; k];
            for p in 1..=half {
                let dot: Complex64 = v.iter().zip(&gz).map(|(a, b)| a * b).sum();
                g[p] += 0.5 * dot;
                if p < half {
                    for (c, slot) in next.iter_mut().enumerate() {
                        let mut acc = ZERO;
                        for (r, vr) in v.iter().enumerate() {
                            acc += vr * b[r * k + c];
                        }
                        *slot = acc;
                    }
                    std::mem::swap(&mut v, &mut next);
                }
            }
        }
        // e = exp(g) truncated at λ^half: n e_n = Σ_k k g_k e_{n-k}
        e[0] = ONE;
        for q in 1..=half {
            let mut acc = ZERO;
            for p in 1..=q {
                acc += g[p] * e[q - p] * p as f64;
            }
            e[q] = acc / q as f64;
        }
        let sign = if (half - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += e[half] * sign;
    }
    total
}

#[derive(Default)]
struct Workspace {
    h: Vec<Complex64>,
    polys: Vec<Vec<Complex64>>,
    traces: Vec<Complex64>,
}

impl Workspace {
    /// `tr(B^p)` for `p = 1..=count` of the `k × k` row-major matrix `b`.
    fn power_traces(&mut self, b: &[Complex64], k: usize, count: usize) -> &[Complex64] {
        self.h.clear();
        self.h.extend_from_slice(b);
        hessenberg(&mut self.h, k);
        let coeffs = self.charpoly(k);
        // Newton: p_q = -(Σ_{i=1}^{min(q-1,k)} c_i p_{q-i}) - q c_q [q ≤ k]
        self.traces.clear();
        for q in 1..=count {
            let mut acc = ZERO;
            for i in 1..=(q - 1).min(k) {
                acc += coeffs[i] * self.traces[q - i - 1];
            }
            if q <= k {
                acc += coeffs[q] * q as f64;
            }
            self.traces.push(-acc);
        }
        &self.traces
    }

    /// Coefficients `c_0 = 1, c_1, …, c_k` of `det(xI − H) = Σ c_i x^{k−i}`
    /// by La Budde's recurrence on the Hessenberg matrix in `self.h`.
    fn charpoly(&mut self, k: usize) -> Vec<Complex64> {
        let h = |i: usize, j: usize| self.h[i * k + j];
        // polys[i] holds det(xI − H[..i,..i]) as c_0..c_i (c_0 = 1)
        let mut polys: Vec<Vec<Complex64>> = std::mem::take(&mut self.polys);
        polys.resize(k + 1, Vec::new());
        polys[0].clear();
        polys[0].push(ONE);
        for i in 1..=k {
            let hii = h(i - 1, i - 1);
            let mut cur = vec![ZERO; i + 1];
            // (x − h_ii) p_{i−1}
            for (d, &c) in polys[i - 1].iter().enumerate() {
                cur[d] += c;
                cur[d + 1] -= hii * c;
            }
            let mut beta = ONE;
            for m in 1..i {
                beta *= h(i - m, i - m - 1);
                let coef = h(i - m - 1, i - 1) * beta;
                if coef == ZERO {
                    continue;
                }
                // − coef · p_{i−m−1}, degree offset m+1
                for (d, &c) in polys[i - m - 1].iter().enumerate() {
                    cur[d + m + 1] -= coef * c;
                }
            }
            polys[i] = cur;
        }
        let out = polys[k].clone();
        self.polys = polys;
        out
    }
}

/// In-place Householder reduction of a row-major `k × k` matrix to upper
/// Hessenberg form (similarity, so the spectrum is kept).
fn hessenberg(a: &mut [Complex64], k: usize) {
    if k < 3 {
        return;
    }
    let mut v = vec![ZERO; k];
    for col in 0..(k - 2) {
        let start = col + 1;
        let len = k - start;
        let mut biggest = 0.0f64;
        for i in 0..len {
            v[i] = a[(start + i) * k + col];
            biggest = biggest.max(v[i].norm());
        }
        if biggest == 0.0 || v[1..len].iter().all(|z| *z == ZERO) {
            continue;
        }
        // the reflector only depends on the direction of v; rescaling keeps
        // the squared norms away from underflow
        let mut norm2 = 0.0;
        for z in v[..len].iter_mut() {
            *z /= biggest;
            norm2 += z.norm_sqr();
        }
        let norm = norm2.sqrt();
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        v[0] = x0 - alpha;
        let vnorm2: f64 = v[..len].iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // P = I − 2 v v† / (v† v); A <- P A P
        let scale = 2.0 / vnorm2;
        for c in 0..k {
            let mut dot = ZERO;
            for i in 0..len {
                dot += v[i].conj() * a[(start + i) * k + c];
            }
            let dot = dot * scale;
            for i in 0..len {
                a[(start + i) * k + c] -= v[i] * dot;
            }
        }
        for r in 0..k {
            let mut dot = ZERO;
            for i in 0..len {
                dot += a[r * k + start + i] * v[i];
            }
            let dot = dot * scale;
            for i in 0..len {
                a[r * k + start + i] -= dot * v[i].conj();
            }
        }
        for i in 1..len {
            a[(start + i) * k + col] = ZERO;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{hafnian_bruteforce, loop_hafnian_bruteforce};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
        SymmetricMatrix::from_upper(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn small_cases() {
        assert_eq!(hafnian(&SymmetricMatrix::from_upper(0, |_, _| ZERO)), ONE);
        let m = SymmetricMatrix::from_upper(2, |i, j| c((i + 2 * j) as f64 + 1.0, 0.5));
        assert_eq!(hafnian(&m), m.get(0, 1));
        let m = SymmetricMatrix::from_upper(3, |_, _| ONE);
        assert_eq!(hafnian(&m), ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_symmetric(&mut rng, 4);
        let expect = m.get(0, 1) * m.get(2, 3) + m.get(0, 2) * m.get(1, 3) + m.get(0, 3) * m.get(1, 2);
        assert!(rel(hafnian(&m), expect) < 1e-13);
    }

    #[test]
    fn power_traces_match_direct_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..9 {
            let b: Vec<Complex64> =
                (0..k * k).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let mut ws = Workspace::default();
            let traces = ws.power_traces(&b, k, 12).to_vec();
            let bm = DMatrix::from_row_slice(k, k, &b);
            let mut pow = bm.clone();
            for t in traces {
                assert!((pow.trace() - t).norm() <= 1e-10 * pow.trace().norm().max(1.0));
                pow = &pow * &bm;
            }
        }
    }

    #[test]
    fn matches_bruteforce_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in (2..=10).step_by(2) {
            for _ in 0..20 {
                let m = random_symmetric(&mut rng, n);
                let o = hafnian_bruteforce(&m).unwrap();
                assert!(rel(hafnian(&m), o) < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn block_diagonal_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_symmetric(&mut rng, 4);
        let b = random_symmetric(&mut rng, 6);
        let m = SymmetricMatrix::from_upper(10, |i, j| match (i < 4, j < 4) {
            (true, true) => a.get(i, j),
            (false, false) => b.get(i - 4, j - 4),
            _ => ZERO,
        });
        assert!(rel(hafnian(&m), hafnian(&a) * hafnian(&b)) < 1e-10);
        let la: Vec<Complex64> = (0..4).map(|_| c(rng.random_range(-1.0..1.0), 0.3)).collect();
        let lb: Vec<Complex64> = (0..6).map(|_| c(0.2, rng.random_range(-1.0..1.0))).collect();
        let l: Vec<Complex64> = la.iter().chain(&lb).copied().collect();
        let lhs = loop_hafnian(&m, &l).unwrap();
        let rhs = loop_hafnian(&a, &la).unwrap() * loop_hafnian(&b, &lb).unwrap();
        assert!(rel(lhs, rhs) < 1e-10);
    }

    #[test]
    fn loop_cases() {
        let d = c(0.3, -1.2);
        let one = SymmetricMatrix::from_upper(1, |_, _| c(5.0, 0.0));
        assert!(rel(loop_hafnian(&one, &[d]).unwrap(), d) < 1e-14);
        let (b, d1, d2) = (c(0.7, 0.1), c(-0.4, 0.9), c(1.1, 0.2));
        let two = SymmetricMatrix::from_upper(2, |i, j| if i == j { c(9.0, 9.0) } else { b });
        assert!(rel(loop_hafnian(&two, &[d1, d2]).unwrap(), b + d1 * d2) < 1e-14);
        assert!(loop_hafnian(&two, &[d1]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_symmetric(&mut rng, 8);
        assert!(rel(loop_hafnian(&m, &[ZERO; 8]).unwrap(), hafnian(&m)) < 1e-10);
        let diag = SymmetricMatrix::from_upper(5, |_, _| ZERO);
        let l: Vec<Complex64> = (0..5).map(|i| c(1.0 + i as f64, 0.5)).collect();
        let prod: Complex64 = l.iter().product();
        assert!(rel(loop_hafnian(&diag, &l).unwrap(), prod) < 1e-12);
    }

    #[test]
    fn loop_matches_bruteforce_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..=9 {
            for _ in 0..20 {
                let m = random_symmetric(&mut rng, n);
                let l: Vec<Complex64> =
                    (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                let o = loop_hafnian_bruteforce(&m, &l).unwrap();
                assert!(rel(loop_hafnian(&m, &l).unwrap(), o) < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn repeated_submatrix_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_symmetric(&mut rng, 4);
        assert_eq!(repeated_submatrix(&m, &[1, 1, 1, 1]).unwrap(), m);
        let empty = repeated_submatrix(&m, &[0, 0, 0, 0]).unwrap();
        assert_eq!(empty.dim(), 0);
        assert_eq!(hafnian(&empty), ONE);
        let two = SymmetricMatrix::from_upper(2, |i, j| c((i * 2 + j) as f64, 0.0));
        let rep = repeated_submatrix_doubled(&two, &PhotonPattern(vec![2])).unwrap();
        assert_eq!(rep.dim(), 4);
        assert_eq!(rep.get(0, 1), two.get(0, 0));
        assert_eq!(rep.get(0, 2), two.get(0, 1));
        assert_eq!(rep.get(2, 3), two.get(1, 1));
        assert!(repeated_submatrix(&m, &[1, 1]).is_err());
    }

    #[test]
    fn rank_deficient_repeats_match_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = random_symmetric(&mut rng, 3);
        for counts in [[6, 0, 0], [4, 0, 2], [2, 2, 2], [0, 5, 1], [3, 3, 0]] {
            let s = repeated_submatrix(&base, &counts).unwrap();
            let o = hafnian_bruteforce(&s).unwrap();
            assert!(rel(hafnian(&s), o) < 1e-9, "{counts:?}");
        }
        // block-diagonal pure-state kernel with one mode repeated: every
        // Householder column after the first is (numerically) empty
        let z = c(0.31, -0.12);
        let m = SymmetricMatrix::from_upper(12, |i, j| match (i < 6, j < 6) {
            (true, true) => z.conj(),
            (false, false) => z,
            _ => ZERO,
        });
        let h = hafnian(&m);
        let expect = hafnian_bruteforce(&m).unwrap();
        assert!(h.re.is_finite() && rel(h, expect) < 1e-9);
    }

    #[test]
    fn repeated_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for counts in [vec![3u32, 0, 2, 1], vec![4, 4, 0, 2], vec![1, 1, 1, 1], vec![5, 0, 0, 1], vec![2, 3, 1, 0]] {
            let m = random_symmetric(&mut rng, 4);
            let l: Vec<Complex64> = (0..4).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let sub = repeated_submatrix(&m, &counts).unwrap();
            let lp: Vec<Complex64> = repeated_indices(&counts).into_iter().map(|i| l[i]).collect();
            let support: Vec<usize> = (0..4).filter(|&j| counts[j] > 0).collect();
            let total = counts.iter().sum::<u32>() as usize;
            let fd = finite_difference_hafnian(&m, None, &counts, &support, total);
            assert!(rel(fd, hafnian(&sub)) < 1e-9, "{counts:?}");
            let fd = finite_difference_hafnian(&m, Some(&l), &counts, &support, total);
            assert!(rel(fd, loop_hafnian(&sub, &lp).unwrap()) < 1e-9, "{counts:?}");
            assert!(rel(hafnian_repeated(&m, Some(&l), &counts).unwrap(), fd) < 1e-9);
        }
    }

    #[test]
    fn single_mode_repeats() {
        // haf of the all-a matrix of size 2k is (2k−1)!! a^k
        let m = SymmetricMatrix::from_upper(1, |_, _| c(0.3, 0.1));
        let mut dfact = 1.0;
        for k in 1..=10u32 {
            dfact *= f64::from(2 * k - 1);
            let expected = c(0.3, 0.1).powu(k) * dfact;
            assert!(rel(hafnian_repeated(&m, None, &[2 * k]).unwrap(), expected) < 1e-12);
        }
        assert_eq!(hafnian_repeated(&m, None, &[7]).unwrap(), ZERO);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[ONE, c(2.0, 0.0), c(3.0, 0.0), ONE]);
        assert!(matches!(SymmetricMatrix::new(&m), Err(Error::NotSymmetric(_))));
    }
}
