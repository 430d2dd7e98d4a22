//! Reference implementations by direct enumeration.
//!
//! These are deliberately naive and only meant for small inputs: they are
//! the yardstick for the fast kernels in tests and in the `validate` job.

use num_complex::Complex64;

use crate::hafnian::SymmetricMatrix;
use crate::{Error, Result};

/// Largest dimension accepted by the enumeration oracles.
pub const MAX_ORACLE_DIM: usize = 12;

/// Sum over all perfect matchings of products of paired entries.
pub fn hafnian_bruteforce(m: &SymmetricMatrix) -> Result<Complex64> {
    let n = m.dim();
    if n > MAX_ORACLE_DIM {
        return Err(Error::OracleTooLarge(n));
    }
    if n % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut free: Vec<usize> = (0..n).collect();
    Ok(match_rest(m, &mut free, None))
}

/// Sum over all matchings where every index is either paired or closed on
/// itself with weight `loops[i]`.
pub fn loop_hafnian_bruteforce(m: &SymmetricMatrix, loops: &[Complex64]) -> Result<Complex64> {
    let n = m.dim();
    if n > MAX_ORACLE_DIM {
        return Err(Error::OracleTooLarge(n));
    }
    if loops.len() != n {
        return Err(Error::Dimension("loop vector length".into()));
    }
    let mut free: Vec<usize> = (0..n).collect();
    Ok(match_rest(m, &mut free, Some(loops)))
}

fn match_rest(m: &SymmetricMatrix, free: &mut Vec<usize>, loops: Option<&[Complex64]>) -> Complex64 {
    if free.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    let first = free.remove(0);
    let mut total = Complex64::new(0.0, 0.0);
    if let Some(l) = loops {
        total += l[first] * match_rest(m, free, loops);
    }
    for pos in 0..free.len() {
        let partner = free.remove(pos);
        total += m.get(first, partner) * match_rest(m, free, loops);
        free.insert(pos, partner);
    }
    free.insert(0, first);
    total
}

/// `(2n)! / (2^n n!)^2 · tanh^{2n} r / cosh r`, the even-photon
/// probabilities of single-mode squeezed vacuum.
pub fn squeezed_vacuum_probability(r: f64, photons: u32) -> f64 {
    if photons % 2 == 1 {
        return 0.0;
    }
    let n = photons / 2;
    // (2n)! / (2^n n!)^2 = C(2n, n) / 4^n
    let mut ratio = 1.0;
    for k in 1..=n {
        ratio *= (n + k) as f64 / k as f64 / 4.0;
    }
    ratio * r.tanh().powi(2 * n as i32) / r.cosh()
}

/// `tanh^{2n} r / cosh² r` on the diagonal of a two-mode squeezed vacuum.
pub fn two_mode_squeezed_probability(r: f64, n1: u32, n2: u32) -> f64 {
    if n1 != n2 {
        return 0.0;
    }
    r.tanh().powi(2 * n1 as i32) / r.cosh().powi(2)
}

/// Every pattern over `modes` modes with at most `cutoff` photons per mode.
pub fn patterns_up_to(modes: usize, cutoff: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..modes {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=cutoff).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// Every pattern over `modes` modes with total photon number at most `total`.
pub fn patterns_with_total(modes: usize, total: u32) -> Vec<Vec<u32>> {
    patterns_up_to(modes, total)
        .into_iter()
        .filter(|p| p.iter().sum::<u32>() <= total)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_counts() {
        // all-ones matrix: haf = (n-1)!!
        for (n, count) in [(2, 1.0), (4, 3.0), (6, 15.0), (8, 105.0)] {
            let m = SymmetricMatrix::from_upper(n, |_, _| Complex64::new(1.0, 0.0));
            assert_eq!(hafnian_bruteforce(&m).unwrap().re, count);
        }
        let big = SymmetricMatrix::from_upper(14, |_, _| Complex64::new(1.0, 0.0));
        assert!(matches!(hafnian_bruteforce(&big), Err(Error::OracleTooLarge(14))));
    }

    #[test]
    fn loop_matching_counts() {
        // all-ones with unit loops counts involutions: 1, 2, 4, 10, 26
        for (n, count) in [(1, 1.0), (2, 2.0), (3, 4.0), (4, 10.0), (5, 26.0)] {
            let m = SymmetricMatrix::from_upper(n, |_, _| Complex64::new(1.0, 0.0));
            let l = vec![Complex64::new(1.0, 0.0); n];
            assert_eq!(loop_hafnian_bruteforce(&m, &l).unwrap().re, count);
        }
    }

    #[test]
    fn closed_forms_normalize() {
        let r = 0.7;
        let total: f64 = (0..200).map(|n| squeezed_vacuum_probability(r, n)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let total: f64 = (0..200).map(|n| two_mode_squeezed_probability(r, n, n)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pattern_enumeration() {
        assert_eq!(patterns_up_to(2, 2).len(), 9);
        assert_eq!(patterns_with_total(3, 2).len(), 10);
    }
}
