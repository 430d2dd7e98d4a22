//! Cost minimization with finite-difference gradients and random restarts.
//!
//! Each restart runs a quasi-Newton (BFGS) descent on the flat parameter
//! vector with an Armijo backtracking line search. Only cost-decreasing
//! steps are accepted, so every trace is monotone. When the quasi-Newton
//! direction fails to make progress the inverse-Hessian estimate is reset
//! and the step falls back to steepest descent.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{Evaluation, HeraldMetrics, Problem};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    pub fd_step: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Initial parameters are uniform in `±init_scale`.
    pub init_scale: f64,
    /// When set, initial mesh angles and phases are drawn from
    /// `±angle_scale` instead of `±init_scale`. Defaults to a full period:
    /// narrow angle draws keep every restart near the identity mesh, whose
    /// basin holds mostly low-fidelity routing solutions.
    pub angle_scale: Option<f64>,
    /// Longest step (Euclidean) tried by the line search.
    pub max_step: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Stop when the gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop after `stall_iters` consecutive steps improving the cost by
    /// less than `stall_tol` (absolute).
    pub stall_tol: f64,
    pub stall_iters: usize,
    /// Compare against a half-step gradient every this many iterations;
    /// zero disables the check.
    pub richardson_every: usize,
    /// Wall-clock budget in seconds for a whole [`optimize`] call, shared
    /// by its restarts. Runs that hit it are no longer reproducible.
    pub time_budget: Option<f64>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            fd_step: 1e-4,
            restarts: 20,
            seed: 0,
            init_scale: 0.5,
            angle_scale: Some(std::f64::consts::PI),
            max_step: 0.5,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            grad_tol: 1e-7,
            stall_tol: 1e-10,
            stall_iters: 10,
            richardson_every: 50,
            time_budget: None,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::Config(format!("fd_step must be positive, got {}", self.fd_step)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.angle_scale.is_some_and(|a| !(a >= 0.0)) {
            return Err(Error::Config("angle_scale must be non-negative".into()));
        }
        if !(self.init_scale >= 0.0 && self.max_step > 0.0) {
            return Err(Error::Config("init_scale must be non-negative and max_step positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config("backtrack must lie in (0, 1)".into()));
        }
        if let Some(t) = self.time_budget {
            if !(t > 0.0) {
                return Err(Error::Config("time_budget must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    GradientTolerance,
    Stalled,
    LineSearchFailed,
    TimeBudget,
    /// No feasible starting point was found.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub p: f64,
    pub fidelity: f64,
    pub p_eff: Option<f64>,
    pub f_eff: Option<f64>,
    /// Largest `|g(h) − g(h/2)|` component when the Richardson check ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_check: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub restart: usize,
    pub records: Vec<IterationRecord>,
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub best_metrics: HeraldMetrics,
    pub termination: Termination,
}

impl OptimizationTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: OptimizationTrace,
    pub restarts: Vec<RestartSummary>,
}

/// Central differences, falling back to one-sided ones next to infeasible
/// points (objective `+∞`) and to zero when both probes are infeasible.
pub fn finite_diff_gradient(objective: impl Fn(&[f64]) -> f64, xi: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    let f0 = objective(xi);
    if !f0.is_finite() {
        return Err(Error::Infeasible);
    }
    let mut x = xi.to_vec();
    let mut grad = vec![0.0; xi.len()];
    for i in 0..xi.len() {
        x[i] = xi[i] + fd_step;
        let up = objective(&x);
        x[i] = xi[i] - fd_step;
        let down = objective(&x);
        x[i] = xi[i];
        grad[i] = match (up.is_finite(), down.is_finite()) {
            (true, true) => (up - down) / (2.0 * fd_step),
            (true, false) => (up - f0) / fd_step,
            (false, true) => (f0 - down) / fd_step,
            (false, false) => 0.0,
        };
    }
    Ok(grad)
}

fn cost_of(problem: &Problem, x: &[f64]) -> f64 {
    match problem.evaluate(x) {
        Ok(e) if e.cost.feasible => e.cost.value,
        _ => f64::INFINITY,
    }
}

fn record(iteration: usize, e: &Evaluation) -> IterationRecord {
    IterationRecord {
        iteration,
        cost: e.cost.value,
        p: e.metrics.p,
        fidelity: e.metrics.fidelity,
        p_eff: e.metrics.p_effective,
        f_eff: e.metrics.fidelity_effective,
        gradient_check: None,
    }
}

/// Wall-clock deadline that never touches the clock when unlimited (the
/// clock is unavailable on some targets).
struct Deadline(Option<(std::time::Instant, Duration)>);

impl Deadline {
    fn new(budget: Option<f64>) -> Self {
        Self(budget.map(|s| (std::time::Instant::now(), Duration::from_secs_f64(s))))
    }

    fn expired(&self) -> bool {
        self.0.is_some_and(|(start, budget)| start.elapsed() >= budget)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Metrics for the trace: post-selected ones are filled in even when the
/// cost does not use them.
fn full_record(problem: &Problem, iteration: usize, x: &[f64], e: &Evaluation) -> IterationRecord {
    let mut rec = record(iteration, e);
    if !problem.postselect {
        if let Ok(m) = problem.report(x) {
            rec.p_eff = m.p_effective;
            rec.f_eff = m.fidelity_effective;
        }
    }
    rec
}

fn descend(
    problem: &Problem,
    x0: &[f64],
    options: &OptimizerOptions,
    restart: usize,
    deadline: &Deadline,
) -> Result<OptimizationTrace> {
    let n = x0.len();
    let objective = |x: &[f64]| cost_of(problem, x);
    let mut x = x0.to_vec();
    let mut current = problem.evaluate(&x)?;
    if !current.cost.feasible {
        return Err(Error::Infeasible);
    }
    let mut records = vec![full_record(problem, 0, &x, &current)];
    let mut g = finite_diff_gradient(objective, &x, options.fd_step)?;
    // inverse Hessian estimate, row-major
    let mut h_inv = identity(n);
    let mut fresh = true;
    let mut stalled = 0;
    let mut termination = Termination::MaxIterations;

    for iteration in 1..=options.max_iters {
        if deadline.expired() {
            termination = Termination::TimeBudget;
            break;
        }
        if dot(&g, &g).sqrt() < options.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let accepted = loop {
            let mut d = mat_vec(&h_inv, &g, n);
            d.iter_mut().for_each(|v| *v = -*v);
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                h_inv = identity(n);
                fresh = true;
                d = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }
            let len = dot(&d, &d).sqrt();
            if len > options.max_step {
                let s = options.max_step / len;
                d.iter_mut().for_each(|v| *v *= s);
                slope *= s;
            }
            let mut alpha = 1.0;
            let mut found = None;
            for _ in 0..=options.max_backtracks {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let e = problem.evaluate(&trial).ok().filter(|e| e.cost.feasible);
                if let Some(e) = e {
                    if e.cost.value <= current.cost.value + options.armijo * alpha * slope
                        && e.cost.value < current.cost.value
                    {
                        found = Some((trial, e));
                        break;
                    }
                }
                alpha *= options.backtrack;
            }
            match found {
                Some(step) => break Some(step),
                None if !fresh => {
                    h_inv = identity(n);
                    fresh = true;
                }
                None => break None,
            }
        };
        let Some((x_new, e_new)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let g_new = finite_diff_gradient(objective, &x_new, options.fd_step)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh {
                // scale the first estimate to the observed curvature
                let scale = sy / dot(&y, &y);
                h_inv.iter_mut().for_each(|v| *v *= scale);
            }
            bfgs_update(&mut h_inv, &s, &y, sy, n);
            fresh = false;
        }
        let improvement = current.cost.value - e_new.cost.value;
        x = x_new;
        g = g_new;
        current = e_new;
        let mut rec = full_record(problem, iteration, &x, &current);
        if options.richardson_every > 0 && iteration % options.richardson_every == 0 {
            let half = finite_diff_gradient(objective, &x, options.fd_step / 2.0)?;
            rec.gradient_check = Some(g.iter().zip(&half).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        records.push(rec);
        if improvement < options.stall_tol {
            stalled += 1;
            if stalled >= options.stall_iters {
                termination = Termination::Stalled;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    Ok(OptimizationTrace {
        restart,
        records,
        best: x,
        best_cost: current.cost.value,
        best_metrics: current.metrics,
        termination,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Per-restart generator: one ChaCha stream per restart index.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

const INIT_ATTEMPTS: usize = 20;

fn run_restart(
    problem: &Problem,
    options: &OptimizerOptions,
    restart: usize,
    deadline: &Deadline,
) -> Option<OptimizationTrace> {
    let mut rng = restart_rng(options.seed, restart);
    let n = problem.n_params();
    for _ in 0..INIT_ATTEMPTS {
        let n_squeeze = problem.spec.n_core();
        let x0: Vec<f64> = (0..n)
            .map(|i| {
                let scale = match options.angle_scale {
                    Some(a) if i >= n_squeeze => a,
                    _ => options.init_scale,
                };
                rng.random_range(-1.0..=1.0) * scale
            })
            .collect();
        match descend(problem, &x0, options, restart, deadline) {
            Ok(trace) => return Some(trace),
            Err(_) => continue,
        }
    }
    None
}

/// Best of `options.restarts` seeded descents: lowest final cost, ties to
/// the lowest restart index.
pub fn optimize(problem: &Problem, options: &OptimizerOptions) -> Result<OptimizationResult> {
    options.validate()?;
    if !problem.parity_admissible() {
        return Err(Error::Infeasible);
    }
    let deadline = Deadline::new(options.time_budget);
    let indices: Vec<usize> = (0..options.restarts).collect();
    #[cfg(feature = "parallel")]
    let traces: Vec<Option<OptimizationTrace>> = {
        use rayon::prelude::*;
        indices.par_iter().map(|&k| run_restart(problem, options, k, &deadline)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let traces: Vec<Option<OptimizationTrace>> =
        indices.iter().map(|&k| run_restart(problem, options, k, &deadline)).collect();

    let restarts = traces
        .iter()
        .enumerate()
        .map(|(k, t)| match t {
            Some(t) => RestartSummary {
                restart: k,
                cost: t.best_cost,
                iterations: t.iterations(),
                termination: t.termination,
            },
            None => RestartSummary {
                restart: k,
                cost: f64::INFINITY,
                iterations: 0,
                termination: Termination::Infeasible,
            },
        })
        .collect();
    let best = traces
        .into_iter()
        .flatten()
        .fold(None::<OptimizationTrace>, |best, t| match best {
            Some(b) if b.best_cost <= t.best_cost => Some(b),
            _ => Some(t),
        })
        .ok_or(Error::Infeasible)?;
    Ok(OptimizationResult { best, restarts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSample {
    pub delta: f64,
    pub trial: usize,
    /// `‖ξ − ξ*‖ / ‖ξ*‖`.
    pub total_relative_change: f64,
    pub dp_rel: f64,
    pub df_rel: f64,
    pub feasible: bool,
}

/// Parameters smaller than this are perturbed by an absolute amount.
pub const RELATIVE_PERTURBATION_FLOOR: f64 = 1e-3;

/// Perturbs every parameter of `xi_star` by an independent uniform relative
/// amount in `[−δ, δ]` and records the relative changes of the metrics the
/// problem optimizes (post-selected ones when `problem.postselect`).
pub fn robustness_study(
    problem: &Problem,
    xi_star: &[f64],
    deltas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<RobustnessSample>> {
    let base = problem.evaluate(xi_star)?;
    if !base.cost.feasible {
        return Err(Error::Infeasible);
    }
    let pick = |m: &HeraldMetrics| -> (f64, f64) {
        if problem.postselect {
            (m.p_effective.unwrap_or(0.0), m.fidelity_effective.unwrap_or(0.0))
        } else {
            (m.p, m.fidelity)
        }
    };
    let (p0, f0) = pick(&base.metrics);
    let norm = xi_star.iter().map(|x| x * x).sum::<f64>().sqrt();
    let jobs: Vec<(usize, usize)> =
        (0..deltas.len()).flat_map(|l| (0..trials).map(move |t| (l, t))).collect();
    let sample = |&(level, trial): &(usize, usize)| -> RobustnessSample {
        let delta = deltas[level];
        let mut rng = restart_rng(seed, level * trials + trial);
        let x: Vec<f64> = xi_star
            .iter()
            .map(|&v| {
                let u = if delta > 0.0 { rng.random_range(-delta..=delta) } else { 0.0 };
                if v.abs() < RELATIVE_PERTURBATION_FLOOR {
                    v + u
                } else {
                    v * (1.0 + u)
                }
            })
            .collect();
        let change = x.iter().zip(xi_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let total_relative_change = if norm > 0.0 { change / norm } else { change };
        match problem.evaluate(&x) {
            Ok(e) if e.cost.feasible => {
                let (p, f) = pick(&e.metrics);
                RobustnessSample {
                    delta,
                    trial,
                    total_relative_change,
                    dp_rel: (p - p0) / p0,
                    df_rel: (f - f0) / f0,
                    feasible: true,
                }
            }
            _ => RobustnessSample {
                delta,
                trial,
                total_relative_change,
                dp_rel: f64::NAN,
                df_rel: f64::NAN,
                feasible: false,
            },
        }
    };
    #[cfg(feature = "parallel")]
    let samples = {
        use rayon::prelude::*;
        jobs.par_iter().map(sample).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let samples = jobs.iter().map(sample).collect();
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::CostWeights;
    use crate::circuit::{CircuitSpec, TargetKind};

    fn bell_problem(postselect: bool, eps: f64) -> Problem {
        let weights = CostWeights { eps, ..CostWeights::default() };
        Problem::new(CircuitSpec::new(2, 2), TargetKind::Bell.state(), weights, postselect).unwrap()
    }

    fn quick(seed: u64) -> OptimizerOptions {
        OptimizerOptions { max_iters: 40, restarts: 2, seed, ..OptimizerOptions::default() }
    }

    #[test]
    fn gradient_of_simple_functions() {
        let g = finite_diff_gradient(|x| x[0] * x[0] + x[1] * x[1], &[1.0, 2.0], 1e-4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
        let g = finite_diff_gradient(|_| 3.0, &[0.3, -0.2, 5.0], 1e-4).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        // a wall just right of the point forces a backward difference
        let wall = |x: &[f64]| if x[0] > 1.0 { f64::INFINITY } else { x[0] * x[0] };
        let g = finite_diff_gradient(wall, &[1.0], 1e-4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-3);
        assert!(finite_diff_gradient(wall, &[2.0], 1e-4).is_err());
    }

    #[test]
    fn gradient_richardson_consistency() {
        let problem = bell_problem(false, 1e-4);
        let mut rng = restart_rng(3, 0);
        let x: Vec<f64> = (0..problem.n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let f = |x: &[f64]| cost_of(&problem, x);
        let g1 = finite_diff_gradient(f, &x, 1e-3).unwrap();
        let g2 = finite_diff_gradient(f, &x, 5e-4).unwrap();
        let g4 = finite_diff_gradient(f, &x, 2.5e-4).unwrap();
        // central differences: halving h shrinks the error ≈ 4×
        let d12 = g1.iter().zip(&g2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d24 = g2.iter().zip(&g4).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d12 > 0.0 && d24 < d12 / 2.5 && d24 < 1e-4 * (1.0 + g4.iter().map(|v| v.abs()).fold(0.0, f64::max)));
    }

    #[test]
    fn traces_are_monotone_and_deterministic() {
        let problem = bell_problem(false, 1e-4);
        let a = optimize(&problem, &quick(11)).unwrap();
        let b = optimize(&problem, &quick(11)).unwrap();
        assert_eq!(a, b);
        for w in a.best.records.windows(2) {
            assert!(w[1].cost < w[0].cost);
        }
        assert!(a.best.records.last().unwrap().cost < a.best.records[0].cost);
        let best = a.restarts.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best.best_cost, best);
        let c = optimize(&problem, &quick(12)).unwrap();
        assert_ne!(a.best.best, c.best.best);
    }

    #[test]
    fn richardson_checks_recorded() {
        let problem = bell_problem(false, 1e-4);
        let opts = OptimizerOptions { richardson_every: 5, stall_iters: 1000, ..quick(4) };
        let r = optimize(&problem, &opts).unwrap();
        let checks: Vec<f64> = r.best.records.iter().filter_map(|rec| rec.gradient_check).collect();
        assert!(!checks.is_empty());
        assert!(checks.iter().all(|&c| c < 1e-3), "{checks:?}");
    }

    #[test]
    fn regularization_shrinks_parameters() {
        let mut holds = 0;
        for seed in 0..5 {
            let opts = OptimizerOptions { restarts: 1, max_iters: 60, seed, ..OptimizerOptions::default() };
            let plain = optimize(&bell_problem(false, 0.0), &opts).unwrap();
            let reg = optimize(&bell_problem(false, 1e-2), &opts).unwrap();
            let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm(&reg.best.best) <= norm(&plain.best.best) + 1e-6 {
                holds += 1;
            }
        }
        assert!(holds >= 3, "{holds} of 5");
    }

    #[test]
    fn robustness_zero_delta_is_exact() {
        let problem = bell_problem(false, 1e-4);
        let r = optimize(&problem, &quick(1)).unwrap();
        let samples = robustness_study(&problem, &r.best.best, &[0.0, 0.01], 4, 2).unwrap();
        assert_eq!(samples.len(), 8);
        for s in &samples[..4] {
            assert_eq!((s.total_relative_change, s.dp_rel, s.df_rel), (0.0, 0.0, 0.0));
        }
        assert!(samples[4..].iter().all(|s| s.feasible && s.total_relative_change > 0.0));
        assert_eq!(samples, robustness_study(&problem, &r.best.best, &[0.0, 0.01], 4, 2).unwrap());
    }

    #[test]
    fn invalid_options_and_problems() {
        let problem = bell_problem(false, 1e-4);
        let bad = OptimizerOptions { fd_step: 0.0, ..OptimizerOptions::default() };
        assert!(matches!(optimize(&problem, &bad), Err(Error::Config(_))));
        let bad = OptimizerOptions { max_iters: 0, ..OptimizerOptions::default() };
        assert!(optimize(&problem, &bad).is_err());
        let odd = Problem::new(
            CircuitSpec::new(2, 1),
            TargetKind::Bell.state(),
            CostWeights::default(),
            false,
        )
        .unwrap();
        // one herald: the parity rule sets it to zero, which is admissible
        assert!(odd.parity_admissible());
        let dead = Problem::new(
            CircuitSpec::new(2, 1).with_herald_counts(vec![1]),
            TargetKind::Bell.state(),
            CostWeights::default(),
            false,
        )
        .unwrap();
        assert!(matches!(optimize(&dead, &quick(0)), Err(Error::Infeasible)));
    }
}
