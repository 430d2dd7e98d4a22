//! Oracle suite: fast kernels against enumeration and closed forms.
//!
//! Probability checks go through a caller-supplied provider so that a
//! deliberately broken kernel can be shown to fail them.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{herald_probability, postselected_probability};
use crate::circuit::ModeMap;
use crate::fock::{fock_probability, pure_amplitude_form};
use crate::hafnian::{hafnian, loop_hafnian, PhotonPattern, SymmetricMatrix};
use crate::oracle::{
    hafnian_bruteforce, loop_hafnian_bruteforce, patterns_with_total, squeezed_vacuum_probability,
    two_mode_squeezed_probability,
};
use crate::symplectic::{beamsplitter, single_mode_squeezer, two_mode_squeezer, GaussianState};
use crate::{Complex64, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub threshold: f64,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<34} max error {:.3e} (threshold {:.0e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.max_error,
            self.threshold,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Random matrices per dimension for the hafnian checks.
    pub matrices_per_dim: usize,
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { matrices_per_dim: 500, max_dim: 10, seed: 2024 }
    }
}

/// Fock probability of a pattern on a Gaussian state.
pub type ProbabilityProvider<'a> = dyn Fn(&GaussianState, &PhotonPattern) -> Result<f64> + Sync + 'a;

/// Runs the suite with the production probability kernel.
pub fn run_validation(options: &ValidationOptions) -> ValidationReport {
    run_validation_with(options, &fock_probability)
}

pub fn run_validation_with(options: &ValidationOptions, provider: &ProbabilityProvider<'_>) -> ValidationReport {
    let checks = vec![
        hafnian_check(options),
        loop_hafnian_check(options),
        closed_form_check(provider),
        amplitude_check(options.seed, provider),
        postselection_check(options.seed, provider),
    ];
    ValidationReport { checks }
}

struct Tracker {
    name: &'static str,
    threshold: f64,
    worst: f64,
    failure: Option<String>,
}

impl Tracker {
    fn new(name: &'static str, threshold: f64) -> Self {
        Self { name, threshold, worst: 0.0, failure: None }
    }

    fn observe(&mut self, error: f64, what: impl FnOnce() -> String) {
        if error.is_nan() || error > self.worst {
            self.worst = if error.is_nan() { f64::INFINITY } else { error };
            if !(error <= self.threshold) && self.failure.is_none() {
                self.failure = Some(what());
            }
        }
    }

    fn fail(&mut self, what: String) {
        self.worst = f64::INFINITY;
        self.failure.get_or_insert(what);
    }

    fn finish(self, detail: String) -> CheckResult {
        CheckResult {
            name: self.name.into(),
            passed: self.failure.is_none() && self.worst <= self.threshold,
            max_error: self.worst,
            threshold: self.threshold,
            detail: self.failure.unwrap_or(detail),
        }
    }
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    SymmetricMatrix::from_upper(n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn hafnian_check(options: &ValidationOptions) -> CheckResult {
    let mut t = Tracker::new("hafnian vs matchings", 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut count = 0;
    for dim in 2..=options.max_dim {
        for _ in 0..options.matrices_per_dim {
            let m = random_symmetric(&mut rng, dim);
            match hafnian_bruteforce(&m) {
                // odd dimensions have no perfect matchings: compare absolutely against zero
                Ok(expected) if dim % 2 == 1 => t.observe((hafnian(&m) - expected).norm(), || format!("dimension {dim}")),
                Ok(expected) => t.observe(relative(hafnian(&m), expected), || format!("dimension {dim}")),
                Err(e) => t.fail(e.to_string()),
            }
            count += 1;
        }
    }
    t.finish(format!("{count} matrices"))
}

fn loop_hafnian_check(options: &ValidationOptions) -> CheckResult {
    let mut t = Tracker::new("loop hafnian vs matchings", 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5eed);
    let mut count = 0;
    for dim in 2..=options.max_dim {
        for _ in 0..options.matrices_per_dim {
            let m = random_symmetric(&mut rng, dim);
            let loops: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            match (loop_hafnian(&m, &loops), loop_hafnian_bruteforce(&m, &loops)) {
                (Ok(got), Ok(expected)) => t.observe(relative(got, expected), || format!("dimension {dim}")),
                (Err(e), _) | (_, Err(e)) => t.fail(e.to_string()),
            }
            count += 1;
        }
    }
    t.finish(format!("{count} matrices"))
}

fn closed_form_check(provider: &ProbabilityProvider<'_>) -> CheckResult {
    let mut t = Tracker::new("squeezed and TMS closed forms", 1e-10);
    for r in [0.2, 0.5, 1.0] {
        let single = GaussianState::vacuum(1)
            .and_then(|v| v.apply(&single_mode_squeezer(r), &[0]));
        let pair = GaussianState::vacuum(2).and_then(|v| v.apply(&two_mode_squeezer(r), &[0, 1]));
        let (single, pair) = match (single, pair) {
            (Ok(s), Ok(p)) => (s, p),
            (Err(e), _) | (_, Err(e)) => {
                t.fail(e.to_string());
                continue;
            }
        };
        for n in 0..=9u32 {
            match provider(&single, &PhotonPattern(vec![n])) {
                Ok(p) => t.observe((p - squeezed_vacuum_probability(r, n)).abs(), || format!("r = {r}, n = {n}")),
                Err(e) => t.fail(format!("r = {r}, n = {n}: {e}")),
            }
        }
        for n1 in 0..=4u32 {
            for n2 in 0..=4u32 {
                match provider(&pair, &PhotonPattern(vec![n1, n2])) {
                    Ok(p) => t.observe((p - two_mode_squeezed_probability(r, n1, n2)).abs(), || {
                        format!("r = {r}, pattern ({n1}, {n2})")
                    }),
                    Err(e) => t.fail(format!("r = {r}, pattern ({n1}, {n2}): {e}")),
                }
            }
        }
    }
    t.finish("r in {0.2, 0.5, 1.0}".into())
}

fn random_pure_state(rng: &mut ChaCha8Rng, modes: usize, max_r: f64) -> Result<GaussianState> {
    let mut st = GaussianState::vacuum(modes)?;
    for j in 0..modes {
        st.apply_mut(&single_mode_squeezer(rng.random_range(-max_r..max_r)), &[j])?;
    }
    for _ in 0..2 {
        for a in 0..modes {
            for b in (a + 1)..modes {
                let bs = beamsplitter(rng.random_range(0.0..1.6), rng.random_range(0.0..6.3));
                st.apply_mut(&bs, &[a, b])?;
            }
        }
    }
    Ok(st)
}

fn amplitude_check(seed: u64, provider: &ProbabilityProvider<'_>) -> CheckResult {
    let mut t = Tracker::new("|amplitude|^2 vs probability", 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa3);
    for trial in 0..3 {
        let st = match random_pure_state(&mut rng, 3, 0.8) {
            Ok(s) => s,
            Err(e) => {
                t.fail(e.to_string());
                continue;
            }
        };
        let form = match pure_amplitude_form(&st) {
            Ok(f) => f,
            Err(e) => {
                t.fail(e.to_string());
                continue;
            }
        };
        for p in patterns_with_total(3, 6) {
            let pattern = PhotonPattern(p);
            match (form.amplitude(&pattern), provider(&st, &pattern)) {
                (Ok(a), Ok(prob)) => {
                    t.observe((a.norm_sqr() - prob).abs(), || format!("state {trial}, {:?}", pattern.0))
                }
                (Err(e), _) | (_, Err(e)) => t.fail(format!("state {trial}, {:?}: {e}", pattern.0)),
            }
        }
    }
    t.finish("3 random 3-mode states, up to 6 photons".into())
}

/// `qubits` dual-rail qubits on the first modes, heralded on the next two.
fn herald_map(qubits: usize) -> ModeMap {
    let n_out = 2 * qubits;
    ModeMap {
        n_modes: n_out + 2,
        outputs: (0..n_out).collect(),
        heralds: vec![n_out, n_out + 1],
        addition_ancillas: vec![],
        subtraction_ancillas: vec![],
    }
}

fn postselection_check(seed: u64, provider: &ProbabilityProvider<'_>) -> CheckResult {
    let mut t = Tracker::new("post-selection vs enumeration", 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    for qubits in [1, 2] {
        let map = herald_map(qubits);
        let max_r = if qubits == 1 { 0.4 } else { 0.3 };
        for trial in 0..3 {
            let st = match random_pure_state(&mut rng, map.n_modes, max_r) {
                Ok(s) => s,
                Err(e) => {
                    t.fail(e.to_string());
                    continue;
                }
            };
            for herald in [[1u32, 0], [1, 1], [0, 2]] {
                let what = || format!("{qubits} qubit(s), state {trial}, herald {herald:?}");
                match enumerate_outputs(&st, &map, &herald, provider) {
                    Ok((joint, non_vacuum)) => match (
                        herald_probability(&st, &map, &herald),
                        postselected_probability(&st, &map, &herald),
                    ) {
                        (Ok(p), Ok(p_eff)) => {
                            t.observe((joint - p).abs(), || format!("{}: reduced", what()));
                            t.observe((non_vacuum - p_eff).abs(), || format!("{}: inclusion-exclusion", what()));
                        }
                        (Err(e), _) | (_, Err(e)) => t.fail(format!("{}: {e}", what())),
                    },
                    Err(e) => t.fail(format!("{}: {e}", what())),
                }
            }
        }
    }
    t.finish("1 and 2 qubits, output cutoff 8".into())
}

/// Joint probability of the herald summed over output patterns with at most
/// eight photons, and the part where every rail pair is occupied.
fn enumerate_outputs(
    st: &GaussianState,
    map: &ModeMap,
    herald: &[u32],
    provider: &ProbabilityProvider<'_>,
) -> Result<(f64, f64)> {
    let mut joint = 0.0;
    let mut occupied = 0.0;
    for out in patterns_with_total(map.outputs.len(), 8) {
        let p = provider(st, &map.join(&out, herald)?)?;
        joint += p;
        if out.chunks(2).all(|pair| pair[0] + pair[1] > 0) {
            occupied += p;
        }
    }
    Ok((joint, occupied))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::husimi_form;
    use crate::hafnian::SymmetricMatrix;

    fn small() -> ValidationOptions {
        ValidationOptions { matrices_per_dim: 10, max_dim: 8, seed: 1 }
    }

    #[test]
    fn production_kernels_pass() {
        let report = run_validation(&small());
        for c in &report.checks {
            assert!(c.passed, "{c}");
        }
        assert!(report.check("|amplitude|^2 vs probability").unwrap().max_error <= 1e-9);
    }

    #[test]
    fn sign_error_in_kernel_is_caught() {
        // A built as X (I + V_Q⁻¹) instead of X (I − V_Q⁻¹)
        let broken = |st: &GaussianState, pattern: &PhotonPattern| -> Result<f64> {
            let form = husimi_form(st)?;
            let dim = 2 * form.n_modes();
            let inv = form.v_q().clone().try_inverse().expect("invertible");
            let m = form.n_modes();
            let wrong = SymmetricMatrix::from_upper(dim, |i, j| {
                let row = if i < m { i + m } else { i - m };
                let delta = if row == j { 1.0 } else { 0.0 };
                let a = Complex64::new(delta, 0.0) + inv[(row, j)];
                let row_j = if j < m { j + m } else { j - m };
                let delta_j = if row_j == i { 1.0 } else { 0.0 };
                0.5 * (a + Complex64::new(delta_j, 0.0) + inv[(row_j, i)])
            });
            form.with_kernel(wrong)?.probability(pattern)
        };
        let report = run_validation_with(&small(), &broken);
        assert!(!report.passed());
        assert!(!report.check("squeezed and TMS closed forms").unwrap().passed);
        assert!(report.check("hafnian vs matchings").unwrap().passed);
    }
}
