//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function is a thin wrapper over a plain Rust function so
//! the logic also runs (and is tested) natively.

use heralded::analysis::{CostWeights, Problem};
use heralded::circuit::{CircuitSpec, TargetKind};
use heralded::fock::fock_probability;
use heralded::hafnian::PhotonPattern;
use heralded::optimizer::{optimize, robustness_study, OptimizerOptions};
use heralded::symplectic::{single_mode_squeezer, GaussianState};
use wasm_bindgen::prelude::*;

const MAX_PHOTONS: u32 = 40;
const MAX_RESTARTS: usize = 50;
const MAX_ITERS: usize = 1000;

/// `P(n)` of a single-mode squeezed vacuum for `n = 0..=max_photons`.
pub fn squeezed_distribution(r: f64, max_photons: u32) -> heralded::Result<Vec<f64>> {
    if !r.is_finite() || r.abs() > 3.0 || max_photons > MAX_PHOTONS {
        return Err(heralded::Error::Config(format!(
            "need |r| <= 3 and at most {MAX_PHOTONS} photons"
        )));
    }
    let state = GaussianState::vacuum(1)?.apply(&single_mode_squeezer(r), &[0])?;
    (0..=max_photons)
        .map(|n| fock_probability(&state, &PhotonPattern(vec![n])))
        .collect()
}

/// Outcome of a Bell-state optimization on two heralds, no gadgets.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct BellResult {
    pub p: f64,
    pub fidelity: f64,
    pub p_eff: f64,
    pub f_eff: f64,
    pub cost: f64,
    pub iterations: usize,
    params: Vec<f64>,
}

#[wasm_bindgen]
impl BellResult {
    /// Optimized parameter vector: squeezers, mesh angles, output phases.
    #[wasm_bindgen(getter)]
    pub fn params(&self) -> Vec<f64> {
        self.params.clone()
    }
}

fn bell_problem(w1: f64, w2: f64, postselect: bool) -> heralded::Result<Problem> {
    if !(w1 >= 0.0 && w2 >= 0.0 && w1.is_finite() && w2.is_finite()) {
        return Err(heralded::Error::Config("weights must be finite and non-negative".into()));
    }
    let weights = CostWeights { w1, w2, ..CostWeights::default() };
    Problem::new(CircuitSpec::new(2, 2), TargetKind::Bell.state(), weights, postselect)
}

pub fn bell_optimum(
    seed: u64,
    restarts: usize,
    iterations: usize,
    w1: f64,
    w2: f64,
    postselect: bool,
) -> heralded::Result<BellResult> {
    if restarts == 0 || restarts > MAX_RESTARTS || iterations > MAX_ITERS {
        return Err(heralded::Error::Config(format!(
            "restarts in 1..={MAX_RESTARTS}, iterations at most {MAX_ITERS}"
        )));
    }
    let problem = bell_problem(w1, w2, postselect)?;
    let options = OptimizerOptions { seed, restarts, max_iters: iterations, ..OptimizerOptions::default() };
    let result = optimize(&problem, &options)?;
    let m = problem.report(&result.best.best)?;
    Ok(BellResult {
        p: m.p,
        fidelity: m.fidelity,
        p_eff: m.p_effective.unwrap_or(f64::NAN),
        f_eff: m.fidelity_effective.unwrap_or(f64::NAN),
        cost: result.best.best_cost,
        iterations: result.best.iterations(),
        params: result.best.best,
    })
}

/// Relative changes `(Δp/p, ΔF/F)` of `trials` random perturbations of
/// relative size `delta`, flattened pairwise.
pub fn bell_perturbations(
    params: &[f64],
    delta: f64,
    trials: usize,
    seed: u64,
    postselect: bool,
) -> heralded::Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&delta) || trials > 10_000 {
        return Err(heralded::Error::Config("delta in [0, 1] and at most 10000 trials".into()));
    }
    let problem = bell_problem(1.0, 1.0, postselect)?;
    let samples = robustness_study(&problem, params, &[delta], trials, seed)?;
    Ok(samples.iter().flat_map(|s| [s.dp_rel, s.df_rel]).collect())
}

fn js(e: heralded::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = squeezedDistribution)]
pub fn squeezed_distribution_js(r: f64, max_photons: u32) -> Result<Vec<f64>, JsError> {
    squeezed_distribution(r, max_photons).map_err(js)
}

#[wasm_bindgen(js_name = optimizeBell)]
pub fn optimize_bell_js(
    seed: u32,
    restarts: usize,
    iterations: usize,
    w1: f64,
    w2: f64,
    postselect: bool,
) -> Result<BellResult, JsError> {
    bell_optimum(seed.into(), restarts, iterations, w1, w2, postselect).map_err(js)
}

#[wasm_bindgen(js_name = perturbBell)]
pub fn perturb_bell_js(
    params: Vec<f64>,
    delta: f64,
    trials: usize,
    seed: u32,
    postselect: bool,
) -> Result<Vec<f64>, JsError> {
    bell_perturbations(&params, delta, trials, seed.into(), postselect).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_sums_towards_one() {
        let p = squeezed_distribution(0.5, 30).unwrap();
        assert_eq!(p.len(), 31);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(p.iter().skip(1).step_by(2).all(|&x| x.abs() < 1e-12));
        assert!(squeezed_distribution(f64::NAN, 4).is_err());
        assert!(squeezed_distribution(0.5, 1000).is_err());
    }

    #[test]
    fn short_optimization_and_perturbation() {
        let r = bell_optimum(1, 1, 20, 1.0, 10.0, true).unwrap();
        assert_eq!(r.params().len(), 42);
        assert!(r.p > 0.0 && (0.0..=1.0).contains(&r.fidelity));
        let changes = bell_perturbations(&r.params(), 0.0, 3, 0, true).unwrap();
        assert_eq!(changes, vec![0.0; 6]);
        assert_eq!(bell_perturbations(&r.params(), 0.01, 4, 0, true).unwrap().len(), 8);
        assert!(bell_optimum(0, 0, 10, 1.0, 1.0, false).is_err());
    }
}
