//! The heralded-generation circuit.
//!
//! Mode layout, in index order:
//!
//! | range | role |
//! |---|---|
//! | `0 .. 2q` | output rails, qubit `k` on modes `(2k, 2k+1)` |
//! | `2q .. n_core` | herald modes |
//! | next `|additions|` | addition ancillas |
//! | next `|subtractions|` | subtraction ancillas |
//!
//! Every core mode (outputs and heralds) gets an optimizable single-mode
//! squeezer and feeds the `n_core`-mode rectangular mesh. An addition on core
//! mode `m` is a two-mode squeezer (`r_add`) between `m` and its ancilla,
//! placed before `m`'s squeezer; a subtraction is a beamsplitter with
//! transmissivity `tau_sub` placed after it. All ancillas are heralded on a
//! single photon.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hafnian::PhotonPattern;
use crate::symplectic::{
    beamsplitter, single_mode_squeezer, theta_for_transmissivity, two_mode_squeezer,
    unitary_to_symplectic, GaussianState, InterferometerMesh,
};
use crate::{Error, Result};

pub const DEFAULT_R_ADD: f64 = 0.8;
pub const DEFAULT_TAU_SUB: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub n_herald: usize,
    /// Core source mode of each added photon.
    pub additions: Vec<usize>,
    /// Core source mode of each subtracted photon.
    pub subtractions: Vec<usize>,
    pub r_add: f64,
    pub tau_sub: f64,
    /// Photon counts on the herald modes; `None` picks single clicks with the
    /// parity fix of [`full_herald_pattern`].
    pub herald_counts: Option<Vec<u32>>,
}

impl CircuitSpec {
    /// No gadgets, default gadget constants.
    pub fn new(n_qubits: usize, n_herald: usize) -> Self {
        Self {
            n_qubits,
            n_herald,
            additions: Vec::new(),
            subtractions: Vec::new(),
            r_add: DEFAULT_R_ADD,
            tau_sub: DEFAULT_TAU_SUB,
            herald_counts: None,
        }
    }

    /// `count` additions assigned round-robin over the core modes.
    pub fn with_additions(mut self, count: usize) -> Self {
        let n_core = self.n_core();
        self.additions = (0..count).map(|k| k % n_core.max(1)).collect();
        self
    }

    /// `count` subtractions assigned round-robin over the core modes.
    pub fn with_subtractions(mut self, count: usize) -> Self {
        let n_core = self.n_core();
        self.subtractions = (0..count).map(|k| k % n_core.max(1)).collect();
        self
    }

    pub fn with_herald_counts(mut self, counts: Vec<u32>) -> Self {
        self.herald_counts = Some(counts);
        self
    }

    pub fn n_outputs(&self) -> usize {
        2 * self.n_qubits
    }

    pub fn n_core(&self) -> usize {
        self.n_outputs() + self.n_herald
    }

    pub fn n_modes(&self) -> usize {
        self.n_core() + self.additions.len() + self.subtractions.len()
    }

    /// `n_core (n_core + 1)`: squeezers, two angles per mesh cell, output
    /// phases.
    pub fn n_params(&self) -> usize {
        self.n_core() * (self.n_core() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::Circuit("at least one qubit is required".into()));
        }
        let n_core = self.n_core();
        for &m in self.additions.iter().chain(&self.subtractions) {
            if m >= n_core {
                return Err(Error::Circuit(format!(
                    "gadget source mode {m} is not one of the {n_core} core modes"
                )));
            }
        }
        if !self.r_add.is_finite() {
            return Err(Error::Circuit("r_add must be finite".into()));
        }
        if !(self.tau_sub > 0.0 && self.tau_sub < 1.0) {
            return Err(Error::Circuit(format!("tau_sub = {} is not in (0, 1)", self.tau_sub)));
        }
        if let Some(h) = &self.herald_counts {
            if h.len() != self.n_herald {
                return Err(Error::Circuit(format!(
                    "{} herald counts for {} herald modes",
                    h.len(),
                    self.n_herald
                )));
            }
        }
        Ok(())
    }

    pub fn mode_map(&self) -> ModeMap {
        let n_out = self.n_outputs();
        let n_core = self.n_core();
        let n_add = self.additions.len();
        ModeMap {
            n_modes: self.n_modes(),
            outputs: (0..n_out).collect(),
            heralds: (n_out..n_core).collect(),
            addition_ancillas: (n_core..n_core + n_add).collect(),
            subtraction_ancillas: (n_core + n_add..self.n_modes()).collect(),
        }
    }
}

/// Role of every mode of a built circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeMap {
    pub n_modes: usize,
    pub outputs: Vec<usize>,
    pub heralds: Vec<usize>,
    pub addition_ancillas: Vec<usize>,
    pub subtraction_ancillas: Vec<usize>,
}

impl ModeMap {
    /// Heralds, then addition ancillas, then subtraction ancillas.
    pub fn measured(&self) -> Vec<usize> {
        self.heralds
            .iter()
            .chain(&self.addition_ancillas)
            .chain(&self.subtraction_ancillas)
            .copied()
            .collect()
    }

    /// Output modes grouped by dual-rail qubit.
    pub fn rail_pairs(&self) -> Vec<(usize, usize)> {
        self.outputs.chunks(2).map(|c| (c[0], c[1])).collect()
    }

    /// Full-register pattern from an output pattern and a measured pattern.
    pub fn join(&self, output: &[u32], measured: &[u32]) -> Result<PhotonPattern> {
        let measured_modes = self.measured();
        if output.len() != self.outputs.len() || measured.len() != measured_modes.len() {
            return Err(Error::Dimension(format!(
                "joining {} output and {} measured counts for {} + {} modes",
                output.len(),
                measured.len(),
                self.outputs.len(),
                measured_modes.len()
            )));
        }
        let mut full = vec![0; self.n_modes];
        for (&m, &c) in self.outputs.iter().zip(output) {
            full[m] = c;
        }
        for (&m, &c) in measured_modes.iter().zip(measured) {
            full[m] = c;
        }
        Ok(PhotonPattern(full))
    }
}

/// Optimizable circuit parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub squeeze: Vec<f64>,
    pub mesh_theta: Vec<f64>,
    pub mesh_phi: Vec<f64>,
    pub out_phase: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(n_core: usize) -> Self {
        let cells = n_core * n_core.saturating_sub(1) / 2;
        Self {
            squeeze: vec![0.0; n_core],
            mesh_theta: vec![0.0; cells],
            mesh_phi: vec![0.0; cells],
            out_phase: vec![0.0; n_core],
        }
    }

    /// Splits a flat vector laid out as squeeze | theta | phi | phase.
    pub fn from_flat(n_core: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != n_core * (n_core + 1) {
            return Err(Error::Dimension(format!(
                "{} parameters for {n_core} core modes (expected {})",
                flat.len(),
                n_core * (n_core + 1)
            )));
        }
        let cells = n_core * n_core.saturating_sub(1) / 2;
        let (squeeze, rest) = flat.split_at(n_core);
        let (mesh_theta, rest) = rest.split_at(cells);
        let (mesh_phi, out_phase) = rest.split_at(cells);
        Ok(Self {
            squeeze: squeeze.to_vec(),
            mesh_theta: mesh_theta.to_vec(),
            mesh_phi: mesh_phi.to_vec(),
            out_phase: out_phase.to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.squeeze
            .iter()
            .chain(&self.mesh_theta)
            .chain(&self.mesh_phi)
            .chain(&self.out_phase)
            .copied()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.squeeze.len() + self.mesh_theta.len() + self.mesh_phi.len() + self.out_phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.to_flat().iter().map(|x| x * x).sum()
    }
}

/// Builds the pure output state of the circuit and its mode roles.
pub fn build_state(spec: &CircuitSpec, xi: &ParameterVector) -> Result<(GaussianState, ModeMap)> {
    spec.validate()?;
    let n_core = spec.n_core();
    let cells = n_core * n_core.saturating_sub(1) / 2;
    if xi.squeeze.len() != n_core
        || xi.out_phase.len() != n_core
        || xi.mesh_theta.len() != cells
        || xi.mesh_phi.len() != cells
    {
        return Err(Error::Dimension(format!(
            "parameter vector does not match a {n_core}-mode core"
        )));
    }
    let map = spec.mode_map();
    let mut state = GaussianState::vacuum(spec.n_modes())?;

    let tms = two_mode_squeezer(spec.r_add);
    for (&src, &anc) in spec.additions.iter().zip(&map.addition_ancillas) {
        state.apply_mut(&tms, &[src, anc])?;
    }
    for (j, &r) in xi.squeeze.iter().enumerate() {
        if r != 0.0 {
            state.apply_mut(&single_mode_squeezer(r), &[j])?;
        }
    }
    let tap = beamsplitter(theta_for_transmissivity(spec.tau_sub), 0.0);
    for (&src, &anc) in spec.subtractions.iter().zip(&map.subtraction_ancillas) {
        state.apply_mut(&tap, &[src, anc])?;
    }
    let mesh = InterferometerMesh::rectangular(n_core, &xi.mesh_theta, &xi.mesh_phi, &xi.out_phase)?;
    let s = unitary_to_symplectic(&mesh.unitary()?)?;
    let core: Vec<usize> = (0..n_core).collect();
    state.apply_mut(&s, &core)?;
    Ok((state, map))
}

/// Measured pattern over [`ModeMap::measured`]: herald counts, then a single
/// photon on every gadget ancilla.
///
/// Without explicit counts every herald clicks once, except that the last
/// herald is set to zero when the total photon number (target + heralds +
/// ancillas) would otherwise be odd; a zero-mean Gaussian state has no
/// odd-parity support.
pub fn full_herald_pattern(spec: &CircuitSpec) -> Vec<u32> {
    let gadgets = spec.additions.len() + spec.subtractions.len();
    let heralds = match &spec.herald_counts {
        Some(h) => h.clone(),
        None => {
            let mut h = vec![1u32; spec.n_herald];
            let total = spec.n_qubits + spec.n_herald + gadgets;
            if total % 2 == 1 {
                if let Some(last) = h.last_mut() {
                    *last = 0;
                }
            }
            h
        }
    };
    heralds.into_iter().chain(std::iter::repeat_n(1, gadgets)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Bell,
    Ghz,
    W,
}

impl TargetKind {
    pub fn n_qubits(self) -> usize {
        match self {
            TargetKind::Bell => 2,
            TargetKind::Ghz | TargetKind::W => 3,
        }
    }

    pub fn state(self) -> TargetState {
        match self {
            TargetKind::Bell => target_bell(),
            TargetKind::Ghz => target_ghz(),
            TargetKind::W => target_w(),
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::Bell => "bell",
            TargetKind::Ghz => "ghz",
            TargetKind::W => "w",
        })
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bell" => Ok(TargetKind::Bell),
            "ghz" => Ok(TargetKind::Ghz),
            "w" => Ok(TargetKind::W),
            other => Err(Error::Target(format!("unknown target '{other}'"))),
        }
    }
}

/// Superposition of dual-rail Fock patterns over the output modes.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    components: Vec<(Vec<u32>, Complex64)>,
}

impl TargetState {
    /// Checks normalization, distinct patterns and dual-rail validity.
    pub fn new(components: Vec<(Vec<u32>, Complex64)>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::Target("empty target".into()))?;
        let n_modes = first.0.len();
        if n_modes == 0 || n_modes % 2 != 0 {
            return Err(Error::Target(format!("{n_modes} output modes is not dual-rail")));
        }
        for (i, (p, _)) in components.iter().enumerate() {
            if p.len() != n_modes {
                return Err(Error::Target("patterns of different lengths".into()));
            }
            if p.chunks(2).any(|pair| pair[0] + pair[1] != 1) {
                return Err(Error::Target(format!("{p:?} is not a dual-rail word")));
            }
            if components[..i].iter().any(|(q, _)| q == p) {
                return Err(Error::Target(format!("{p:?} listed twice")));
            }
        }
        let norm: f64 = components.iter().map(|(_, c)| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Target(format!("coefficients have squared norm {norm}")));
        }
        Ok(Self { components })
    }

    fn equal_weight(patterns: &[&str]) -> Self {
        let c = Complex64::new(1.0 / (patterns.len() as f64).sqrt(), 0.0);
        let components = patterns
            .iter()
            .map(|s| (s.bytes().map(|b| u32::from(b - b'0')).collect(), c))
            .collect();
        Self::new(components).expect("built-in targets are valid")
    }

    pub fn components(&self) -> &[(Vec<u32>, Complex64)] {
        &self.components
    }

    pub fn n_output_modes(&self) -> usize {
        self.components[0].0.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_output_modes() / 2
    }
}

pub fn target_bell() -> TargetState {
    TargetState::equal_weight(&["1010", "0101"])
}

pub fn target_ghz() -> TargetState {
    TargetState::equal_weight(&["101010", "010101"])
}

pub fn target_w() -> TargetState {
    TargetState::equal_weight(&["101001", "100110", "011010"])
}
