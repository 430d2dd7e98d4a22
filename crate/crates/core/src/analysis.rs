//! Heralding probability, fidelity to a target and the scalar cost.
//!
//! The prepared state is never modified here. Post-selection on "every rail
//! pair holds a photon" only changes which probability the metrics are
//! normalized by.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_state, full_herald_pattern, CircuitSpec, ModeMap, ParameterVector, TargetState};
use crate::fock::{fock_probability, pure_amplitude_from_husimi, husimi_form, PureAmplitudeForm};
use crate::hafnian::PhotonPattern;
use crate::symplectic::GaussianState;
use crate::{Error, Result};

/// Fidelities above one by less than this are treated as roundoff.
const FIDELITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldMetrics {
    /// Joint probability of the whole measured pattern, gadget ancillas
    /// included.
    pub p: f64,
    pub fidelity: f64,
    pub p_effective: Option<f64>,
    pub fidelity_effective: Option<f64>,
    /// Probability of the gadget ancillas alone; `p / p_gadget` is the
    /// heralding probability given that every gadget fired.
    pub p_gadget: f64,
}

/// Probability of `pattern` on the measured modes (heralds and ancillas),
/// computed on the reduced state so output outcomes are never enumerated.
pub fn herald_probability(state: &GaussianState, map: &ModeMap, pattern: &[u32]) -> Result<f64> {
    let measured = map.measured();
    if pattern.len() != measured.len() {
        return Err(Error::Dimension(format!(
            "herald pattern over {} modes, {} measured modes",
            pattern.len(),
            measured.len()
        )));
    }
    if measured.is_empty() {
        return Ok(1.0);
    }
    let reduced = state.partial_trace(&measured)?;
    fock_probability(&reduced, &PhotonPattern(pattern.to_vec()))
}

/// `Σ_k conj(c_k) ⟨pattern_k ⊕ h|ψ⟩`, the unnormalized overlap of the
/// heralded branch with the target.
pub fn heralded_overlap(
    form: &PureAmplitudeForm,
    map: &ModeMap,
    pattern: &[u32],
    target: &TargetState,
) -> Result<Complex64> {
    if target.n_output_modes() != map.outputs.len() {
        return Err(Error::Target(format!(
            "target over {} modes, circuit has {} outputs",
            target.n_output_modes(),
            map.outputs.len()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (out, c) in target.components() {
        let full = map.join(out, pattern)?;
        acc += c.conj() * form.amplitude(&full)?;
    }
    Ok(acc)
}

fn normalized_fidelity(overlap: Complex64, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    let f = overlap.norm_sqr() / p;
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    if f > 1.0 + FIDELITY_SLACK {
        return Err(Error::Unphysical(format!("fidelity {f} exceeds one")));
    }
    Ok(f.min(1.0))
}

pub fn heralded_fidelity(
    form: &PureAmplitudeForm,
    map: &ModeMap,
    pattern: &[u32],
    target: &TargetState,
    p: f64,
) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    normalized_fidelity(heralded_overlap(form, map, pattern, target)?, p)
}

/// Probability of the herald pattern with every rail pair non-empty.
///
/// Inclusion–exclusion over the set `S` of pairs forced to vacuum; each term
/// is a Fock probability of a reduced Gaussian state, so nothing is
/// truncated.
pub fn postselected_probability(state: &GaussianState, map: &ModeMap, pattern: &[u32]) -> Result<f64> {
    let measured = map.measured();
    if pattern.len() != measured.len() {
        return Err(Error::Dimension(format!(
            "herald pattern over {} modes, {} measured modes",
            pattern.len(),
            measured.len()
        )));
    }
    let pairs = map.rail_pairs();
    let mut total = 0.0;
    for subset in 0u32..(1 << pairs.len()) {
        let mut keep = measured.clone();
        let mut counts = pattern.to_vec();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if subset >> k & 1 == 1 {
                keep.extend([a, b]);
                counts.extend([0, 0]);
            }
        }
        let term = if keep.is_empty() {
            1.0
        } else {
            fock_probability(&state.partial_trace(&keep)?, &PhotonPattern(counts))?
        };
        if subset.count_ones() % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    if total < -1e-9 {
        return Err(Error::NegativeProbability(total));
    }
    Ok(total.max(0.0))
}

/// `(p_eff, F_eff)`.
pub fn postselected_metrics(
    state: &GaussianState,
    form: &PureAmplitudeForm,
    map: &ModeMap,
    pattern: &[u32],
    target: &TargetState,
) -> Result<(f64, f64)> {
    let p_eff = postselected_probability(state, map, pattern)?;
    if p_eff <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    let f_eff = normalized_fidelity(heralded_overlap(form, map, pattern, target)?, p_eff)?;
    Ok((p_eff, f_eff))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub w1: f64,
    pub w2: f64,
    pub eps: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { w1: 10.0, w2: 1.0, eps: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost {
    /// `+∞` when infeasible.
    pub value: f64,
    pub feasible: bool,
}

impl Cost {
    pub const INFEASIBLE: Cost = Cost { value: f64::INFINITY, feasible: false };
}

/// `−w1 ln p − w2 ln F + eps ‖ξ‖²`.
pub fn cost(p: f64, fidelity: f64, xi: &[f64], weights: &CostWeights) -> Cost {
    if !(p > 0.0 && fidelity > 0.0) {
        return Cost::INFEASIBLE;
    }
    let norm2: f64 = xi.iter().map(|x| x * x).sum();
    let value = -weights.w1 * p.ln() - weights.w2 * fidelity.ln() + weights.eps * norm2;
    if value.is_finite() {
        Cost { value, feasible: true }
    } else {
        Cost::INFEASIBLE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub metrics: HeraldMetrics,
    pub cost: Cost,
}

impl Evaluation {
    fn infeasible() -> Self {
        Self {
            metrics: HeraldMetrics {
                p: 0.0,
                fidelity: 0.0,
                p_effective: None,
                fidelity_effective: None,
                p_gadget: 0.0,
            },
            cost: Cost::INFEASIBLE,
        }
    }
}

/// Everything about one circuit configuration that does not change with
/// the parameters.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: CircuitSpec,
    pub target: TargetState,
    pub weights: CostWeights,
    /// Optimize and report the post-selected metrics.
    pub postselect: bool,
    pattern: Vec<u32>,
}

impl Problem {
    pub fn new(spec: CircuitSpec, target: TargetState, weights: CostWeights, postselect: bool) -> Result<Self> {
        spec.validate()?;
        if target.n_qubits() != spec.n_qubits {
            return Err(Error::Target(format!(
                "{}-qubit target for a {}-qubit circuit",
                target.n_qubits(),
                spec.n_qubits
            )));
        }
        let pattern = full_herald_pattern(&spec);
        Ok(Self { spec, target, weights, postselect, pattern })
    }

    pub fn herald_pattern(&self) -> &[u32] {
        &self.pattern
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    /// Total photon number of any nonzero output branch has the parity of
    /// the measured photons; a zero-mean state puts no weight on odd totals.
    pub fn parity_admissible(&self) -> bool {
        let measured: u32 = self.pattern.iter().sum();
        (measured as usize + self.spec.n_qubits) % 2 == 0
    }

    /// Metrics and cost at a flat parameter vector. Configurations where the
    /// pattern cannot occur come back infeasible rather than as errors.
    pub fn evaluate(&self, flat: &[f64]) -> Result<Evaluation> {
        if !self.parity_admissible() {
            return Ok(Evaluation::infeasible());
        }
        let xi = ParameterVector::from_flat(self.spec.n_core(), flat)?;
        let (state, map) = build_state(&self.spec, &xi)?;
        let form = pure_amplitude_from_husimi(&husimi_form(&state)?)?;
        let p = herald_probability(&state, &map, &self.pattern)?;
        if p <= 0.0 {
            return Ok(Evaluation::infeasible());
        }
        let overlap = heralded_overlap(&form, &map, &self.pattern, &self.target)?;
        let fidelity = normalized_fidelity(overlap, p)?;
        let p_gadget = self.gadget_probability(&state, &map)?;
        let mut metrics = HeraldMetrics { p, fidelity, p_effective: None, fidelity_effective: None, p_gadget };
        let (cp, cf) = if self.postselect {
            let p_eff = postselected_probability(&state, &map, &self.pattern)?;
            if p_eff <= 0.0 {
                return Ok(Evaluation { metrics, cost: Cost::INFEASIBLE });
            }
            let f_eff = normalized_fidelity(overlap, p_eff)?;
            metrics.p_effective = Some(p_eff);
            metrics.fidelity_effective = Some(f_eff);
            (p_eff, f_eff)
        } else {
            (p, fidelity)
        };
        Ok(Evaluation { metrics, cost: cost(cp, cf, flat, &self.weights) })
    }

    fn gadget_probability(&self, state: &GaussianState, map: &ModeMap) -> Result<f64> {
        let ancillas: Vec<usize> =
            map.addition_ancillas.iter().chain(&map.subtraction_ancillas).copied().collect();
        if ancillas.is_empty() {
            return Ok(1.0);
        }
        fock_probability(&state.partial_trace(&ancillas)?, &PhotonPattern(vec![1; ancillas.len()]))
    }

    /// Like [`Problem::evaluate`] but always fills the post-selected fields.
    pub fn report(&self, flat: &[f64]) -> Result<HeraldMetrics> {
        let with = Problem { postselect: true, ..self.clone() };
        let e = with.evaluate(flat)?;
        let mut metrics = e.metrics;
        if metrics.p > 0.0 && metrics.p_effective.is_none() {
            metrics.p_effective = Some(0.0);
            metrics.fidelity_effective = Some(0.0);
        }
        Ok(metrics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{target_bell, TargetKind};
    use crate::fock::pure_amplitude_form;
    use crate::oracle::{patterns_with_total, two_mode_squeezed_probability};
    use crate::symplectic::{beamsplitter, phase_shifter, single_mode_squeezer, two_mode_squeezer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_qubit_map() -> ModeMap {
        ModeMap {
            n_modes: 4,
            outputs: vec![0, 1],
            heralds: vec![2, 3],
            addition_ancillas: vec![],
            subtraction_ancillas: vec![],
        }
    }

    fn one_qubit_target(word: &str) -> TargetState {
        let p = word.bytes().map(|b| u32::from(b - b'0')).collect();
        TargetState::new(vec![(p, Complex64::new(1.0, 0.0))]).unwrap()
    }

    #[test]
    fn heralded_tms_gives_a_single_photon() {
        let r = 0.6;
        let st = GaussianState::vacuum(4).unwrap().apply(&two_mode_squeezer(r), &[0, 2]).unwrap();
        let map = one_qubit_map();
        let p = herald_probability(&st, &map, &[1, 0]).unwrap();
        assert!((p - two_mode_squeezed_probability(r, 1, 1)).abs() < 1e-14);
        let form = pure_amplitude_form(&st).unwrap();
        let f = heralded_fidelity(&form, &map, &[1, 0], &one_qubit_target("10"), p).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        let f = heralded_fidelity(&form, &map, &[1, 0], &one_qubit_target("01"), p).unwrap();
        assert!(f.abs() < 1e-15);
        assert!(matches!(
            heralded_fidelity(&form, &map, &[1, 0], &one_qubit_target("10"), 0.0),
            Err(Error::ZeroProbability)
        ));
        // every branch already has a photon in the pair
        let (p_eff, f_eff) = postselected_metrics(&st, &form, &map, &[1, 0], &one_qubit_target("10")).unwrap();
        assert!((p_eff - p).abs() < 1e-14 && (f_eff - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_heralds_with_certainty() {
        let st = GaussianState::vacuum(4).unwrap();
        assert_eq!(herald_probability(&st, &one_qubit_map(), &[0, 0]).unwrap(), 1.0);
        assert!(herald_probability(&st, &one_qubit_map(), &[0]).is_err());
    }

    fn random_one_qubit_state(rng: &mut ChaCha8Rng) -> GaussianState {
        let mut st = GaussianState::vacuum(4).unwrap();
        for j in 0..4 {
            st.apply_mut(&single_mode_squeezer(rng.random_range(-0.4..0.4)), &[j]).unwrap();
        }
        for (a, b) in [(0, 1), (2, 3), (1, 2), (0, 3), (0, 2)] {
            let bs = beamsplitter(rng.random_range(0.0..1.5), rng.random_range(0.0..6.0));
            st.apply_mut(&bs, &[a, b]).unwrap();
        }
        st
    }

    #[test]
    fn reduced_probability_matches_joint_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..3 {
            let st = random_one_qubit_state(&mut rng);
            let form = pure_amplitude_form(&st).unwrap();
            let map = one_qubit_map();
            for h in [[1u32, 0], [1, 1], [2, 0]] {
                let joint: f64 = patterns_with_total(2, 8)
                    .into_iter()
                    .map(|o| form.amplitude(&map.join(&o, &h).unwrap()).unwrap().norm_sqr())
                    .sum();
                let p = herald_probability(&st, &map, &h).unwrap();
                assert!((joint - p).abs() < 1e-6, "{joint} vs {p}");
                let non_vacuum: f64 = patterns_with_total(2, 8)
                    .into_iter()
                    .filter(|o| o.iter().sum::<u32>() > 0)
                    .map(|o| form.amplitude(&map.join(&o, &h).unwrap()).unwrap().norm_sqr())
                    .sum();
                let p_eff = postselected_probability(&st, &map, &h).unwrap();
                assert!((non_vacuum - p_eff).abs() < 1e-6, "{non_vacuum} vs {p_eff}");
            }
        }
    }

    #[test]
    fn fidelity_gauge_invariance() {
        // appending phases to the outputs and absorbing them into the target
        // leaves the fidelity unchanged
        let spec = CircuitSpec::new(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let flat: Vec<f64> = (0..spec.n_params()).map(|_| rng.random_range(-0.6..0.6)).collect();
        let xi = ParameterVector::from_flat(spec.n_core(), &flat).unwrap();
        let (st, map) = build_state(&spec, &xi).unwrap();
        let pattern = full_herald_pattern(&spec);
        let target = target_bell();
        let p = herald_probability(&st, &map, &pattern).unwrap();
        let f0 = heralded_fidelity(&pure_amplitude_form(&st).unwrap(), &map, &pattern, &target, p).unwrap();
        let phases = [0.3, -1.1, 2.0, 0.7];
        let mut rotated = st.clone();
        for (j, &phi) in phases.iter().enumerate() {
            rotated.apply_mut(&phase_shifter(phi), &[j]).unwrap();
        }
        let absorbed = TargetState::new(
            target
                .components()
                .iter()
                .map(|(w, c)| {
                    let angle: f64 = w.iter().zip(&phases).map(|(&n, &phi)| f64::from(n) * phi).sum();
                    (w.clone(), c * Complex64::from_polar(1.0, angle))
                })
                .collect(),
        )
        .unwrap();
        let f1 =
            heralded_fidelity(&pure_amplitude_form(&rotated).unwrap(), &map, &pattern, &absorbed, p).unwrap();
        assert!((f0 - f1).abs() < 1e-10, "{f0} vs {f1}");
    }

    #[test]
    fn gadget_probability_is_thermal_marginal() {
        let spec = CircuitSpec::new(2, 2).with_additions(2);
        let problem = Problem::new(spec.clone(), target_bell(), CostWeights::default(), false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = crate::circuit::DEFAULT_R_ADD;
        let single = two_mode_squeezed_probability(r, 1, 1);
        for _ in 0..3 {
            let flat: Vec<f64> = (0..spec.n_params()).map(|_| rng.random_range(-0.7..0.7)).collect();
            let m = problem.evaluate(&flat).unwrap().metrics;
            assert!((m.p_gadget - single * single).abs() < 1e-12);
            assert!(m.p <= m.p_gadget);
        }
    }

    #[test]
    fn cost_values() {
        let w = CostWeights::default();
        assert_eq!(cost(1.0, 1.0, &[0.0; 3], &w).value, 0.0);
        assert!((cost((-1.0f64).exp(), 1.0, &[], &w).value - 10.0).abs() < 1e-12);
        assert!((cost(1.0, 1.0, &[1.0, 2.0], &w).value - 5e-4).abs() < 1e-15);
        assert_eq!(cost(0.0, 0.5, &[], &w), Cost::INFEASIBLE);
        assert!(!cost(0.5, 0.0, &[], &w).feasible);
        assert!(cost(0.2, 0.9, &[], &w).value > cost(0.3, 0.9, &[], &w).value);
        assert!(cost(0.2, 0.8, &[], &w).value > cost(0.2, 0.9, &[], &w).value);
    }

    #[test]
    fn problem_evaluation() {
        let spec = CircuitSpec::new(2, 2).with_additions(2);
        let problem = Problem::new(spec.clone(), TargetKind::Bell.state(), CostWeights::default(), true).unwrap();
        assert_eq!(problem.herald_pattern(), &[1, 1, 1, 1]);
        assert!(problem.parity_admissible());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let flat: Vec<f64> = (0..spec.n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let e = problem.evaluate(&flat).unwrap();
        assert!(e.cost.feasible);
        let m = e.metrics;
        assert!(m.p > 0.0 && m.p <= 1.0 && (0.0..=1.0).contains(&m.fidelity));
        // the Bell words have a photon in each pair, so F_eff ≥ F
        assert!(m.fidelity_effective.unwrap() >= m.fidelity - 1e-9);
        // vacuum never fires the heralds
        let zero = problem.evaluate(&vec![0.0; spec.n_params()]).unwrap();
        assert!(!zero.cost.feasible);
        assert!(Problem::new(spec, TargetKind::Ghz.state(), CostWeights::default(), false).is_err());
        let odd = Problem::new(
            CircuitSpec::new(2, 2).with_herald_counts(vec![1, 0]),
            target_bell(),
            CostWeights::default(),
            false,
        )
        .unwrap();
        assert!(!odd.parity_admissible());
        assert!(!odd.evaluate(&flat[..30]).unwrap().cost.feasible);
    }
}
