//! Discrete Nash–Moser iteration for the nonlinear perturbation equation on a finite horizon.
//!
//! A trajectory is a stack of time levels `w⁰..w^K` with spacing `dt`. The residual at level `k`
//! uses centred differences in `τ` (a reflected ghost level below `τ = 0`) and the grid stencils
//! in `ρ`. Corrections solve the exact linearization of that residual by marching in `k`, each
//! level a tridiagonal solve.

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, Tridiagonal};
use crate::linearized::{
  cfl_limit, consistent_coeffs, nonlinear_forcing, zero_background_coeffs, BackgroundSlots, Generator,
};
use crate::random;
use serde::{Deserialize, Serialize};

/// Spectral cutoff onto the first `theta` discrete sine modes of the cell-centred grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingOp {
  pub theta: f64,
  pub basis_size: usize,
  modes: Vec<Vec<f64>>,
}

impl SmoothingOp {
  pub fn new(theta: f64, basis_size: usize) -> Result<Self> {
    if !(theta >= 1.0) {
      return Err(Error::Domain(format!("smoothing cutoff must be at least 1, got {theta}")));
    }
    if basis_size < 2 {
      return Err(Error::Domain(format!("basis needs at least 2 nodes, got {basis_size}")));
    }
    let n = basis_size;
    let modes = (1..=n)
      .map(|m| (0..n).map(|j| (m as f64 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64).sin()).collect())
      .collect();
    Ok(SmoothingOp { theta, basis_size, modes })
  }

  /// Same basis, new cutoff.
  pub fn with_theta(&self, theta: f64) -> Result<Self> {
    if !(theta >= 1.0) {
      return Err(Error::Domain(format!("smoothing cutoff must be at least 1, got {theta}")));
    }
    Ok(SmoothingOp { theta, ..self.clone() })
  }

  /// Number of modes kept.
  pub fn kept(&self) -> usize {
    (self.theta.floor() as usize).min(self.basis_size)
  }

  /// Sine coefficients; the modes are orthogonal with squared norm `n/2` (`n` for the last).
  pub fn forward(&self, v: &[f64]) -> Vec<f64> {
    let n = self.basis_size;
    self
      .modes
      .iter()
      .enumerate()
      .map(|(i, m)| {
        let s: f64 = m.iter().zip(v).map(|(a, b)| a * b).sum();
        if i + 1 == n {
          s / n as f64
        } else {
          2.0 * s / n as f64
        }
      })
      .collect()
  }

  pub fn inverse(&self, c: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; self.basis_size];
    for (ci, m) in c.iter().zip(&self.modes) {
      if *ci != 0.0 {
        for (x, s) in v.iter_mut().zip(m) {
          *x += ci * s;
        }
      }
    }
    v
  }

  pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != self.basis_size {
      return Err(Error::Domain(format!("field has {} nodes, basis has {}", v.len(), self.basis_size)));
    }
    if self.kept() >= self.basis_size {
      return Ok(v.to_vec());
    }
    let mut c = self.forward(v);
    for x in c.iter_mut().skip(self.kept()) {
      *x = 0.0;
    }
    Ok(self.inverse(&c))
  }
}

/// Measured constants `C` in `‖Π_θ w‖_{H^k1} ≤ C θ^{(k1−k2)+} ‖w‖_{H^k2}` and, for `k1 ≤ k2`,
/// `‖Π_θ w − w‖_{H^k1} ≤ C θ^{k1−k2} ‖w‖_{H^k2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConstants {
  pub k1: u8,
  pub k2: u8,
  pub bound: f64,
  pub remainder: Option<f64>,
}

/// Worst ratios over `trials` random smooth fields and cutoffs `θ = 1, 2, 4, …` below the basis size.
pub fn smoothing_constants(grid: &RadialGrid, k1: u8, k2: u8, trials: usize, seed: u64) -> Result<SmoothingConstants> {
  let n = grid.n_cells();
  let base = SmoothingOp::new(1.0, n)?;
  let mut rng = random::stream(seed, 14);
  let mut bound = 0.0f64;
  let mut remainder = 0.0f64;
  for _ in 0..trials {
    let w = random::smooth_field(grid, n / 2, &mut rng);
    let wn = grid.sobolev_norm(&w, k2)?;
    let mut theta = 1.0;
    while theta < n as f64 {
      let op = base.with_theta(theta)?;
      let p = op.apply(&w)?;
      let up = theta.powi((k1 as i32 - k2 as i32).max(0));
      bound = bound.max(grid.sobolev_norm(&p, k1)? / (up * wn));
      if k1 <= k2 {
        let d: Vec<f64> = p.iter().zip(&w).map(|(a, b)| a - b).collect();
        remainder = remainder.max(grid.sobolev_norm(&d, k1)? / (theta.powi(k1 as i32 - k2 as i32) * wn));
      }
      theta *= 2.0;
    }
  }
  Ok(SmoothingConstants { k1, k2, bound, remainder: (k1 <= k2).then_some(remainder) })
}

/// Time levels `w⁰..w^K`; `v0` is the initial velocity used for the ghost level below `τ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
  pub dt: f64,
  pub levels: Vec<Vec<f64>>,
  pub v0: Vec<f64>,
}

impl Trajectory {
  pub fn zeros(n: usize, steps: usize, dt: f64) -> Self {
    Trajectory { dt, levels: vec![vec![0.0; n]; steps + 1], v0: vec![0.0; n] }
  }

  pub fn steps(&self) -> usize {
    self.levels.len() - 1
  }

  pub fn tau(&self, k: usize) -> f64 {
    k as f64 * self.dt
  }

  fn below(&self, k: usize) -> Vec<f64> {
    if k > 0 {
      return self.levels[k - 1].clone();
    }
    self.levels[1].iter().zip(&self.v0).map(|(a, v)| a - 2.0 * self.dt * v).collect()
  }

  /// Centred `(w_τ, w_ττ)` at an interior level `k < K`.
  pub fn derivatives(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (lo, mid, hi) = (self.below(k), &self.levels[k], &self.levels[k + 1]);
    let dt = self.dt;
    let vt = hi.iter().zip(&lo).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
    let vtt = (0..mid.len()).map(|j| (hi[j] - 2.0 * mid[j] + lo[j]) / (dt * dt)).collect();
    (vt, vtt)
  }

  pub fn slots(&self, grid: &RadialGrid, k: usize) -> BackgroundSlots {
    let (vt, vtt) = self.derivatives(k);
    BackgroundSlots::from_levels(grid, &self.levels[k], &vt, &vtt)
  }

  pub fn add(&self, o: &Trajectory) -> Trajectory {
    let z = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
    Trajectory {
      dt: self.dt,
      levels: self.levels.iter().zip(&o.levels).map(|(a, b)| z(a, b)).collect(),
      v0: z(&self.v0, &o.v0),
    }
  }

  /// `max_k ‖w^k‖_{H²} + ‖w_τ^k‖_{H¹}` over the levels with centred velocities.
  pub fn norm(&self, grid: &RadialGrid) -> f64 {
    (0..self.steps())
      .map(|k| {
        let (vt, _) = self.derivatives(k);
        grid.sobolev_norm(&self.levels[k], 2).unwrap_or(f64::NAN) + grid.sobolev_norm(&vt, 1).unwrap_or(f64::NAN)
      })
      .fold(0.0, f64::max)
  }

  /// Largest entrywise difference.
  pub fn max_diff(&self, o: &Trajectory) -> f64 {
    self.levels.iter().zip(&o.levels).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
  }
}

/// `max_k ‖E^k‖_{L²}`.
pub fn residual_norm(grid: &RadialGrid, e: &[Vec<f64>]) -> f64 {
  e.iter().map(|x| grid.inner(x, x).max(0.0).sqrt()).fold(0.0, f64::max)
}

/// `𝒥(w)` at levels `0..K−1`: the autonomous linear part minus the (optionally smoothed) forcing.
pub fn approx_residual(w: &Trajectory, kappa: f64, grid: &RadialGrid, op: Option<&SmoothingOp>) -> Result<Vec<Vec<f64>>> {
  if w.levels.len() < 2 || w.levels.iter().any(|l| l.len() != grid.n_cells()) {
    return Err(Error::Domain("trajectory needs at least two levels matching the grid".into()));
  }
  let lin = Generator::new(grid, &zero_background_coeffs(grid, kappa));
  let mut out = Vec::with_capacity(w.steps());
  for k in 0..w.steps() {
    let (vt, vtt) = w.derivatives(k);
    let bg = BackgroundSlots::from_levels(grid, &w.levels[k], &vt, &vtt);
    let f = nonlinear_forcing(grid, kappa, &bg)?;
    let f = match op {
      Some(op) => op.apply(&f)?,
      None => f,
    };
    let kv = lin.k_v.apply(&w.levels[k]);
    let kt = lin.k_tau.apply(&vt);
    out.push((0..grid.n_cells()).map(|j| vtt[j] / lin.inv_p[j] + kv[j] + kt[j] - f[j]).collect());
  }
  Ok(out)
}

/// Per-level generators of the linearization about `w`, hyperbolicity checked.
pub fn linearization(w: &Trajectory, kappa: f64, grid: &RadialGrid) -> Result<Vec<Generator>> {
  (0..w.steps())
    .map(|k| {
      let c = consistent_coeffs(grid, kappa, &w.slots(grid, k))?;
      c.check_hyperbolicity().map_err(|e| e.at(w.tau(k)))?;
      Ok(Generator::new(grid, &c))
    })
    .collect()
}

/// `ℒ[w] h` at levels `0..K−1` with the same differences as the residual.
pub fn apply_linearization(gens: &[Generator], h: &Trajectory) -> Vec<Vec<f64>> {
  (0..h.steps())
    .map(|k| {
      let (vt, vtt) = h.derivatives(k);
      let g = &gens[k];
      let kv = g.k_v.apply(&h.levels[k]);
      let kt = g.k_tau.apply(&vt);
      (0..vt.len()).map(|j| vtt[j] / g.inv_p[j] + kv[j] + kt[j]).collect()
    })
    .collect()
}

/// Solves `ℒ[w] h = −E` with `h⁰ = 0`, `h_τ(0) = 0` by marching.
pub fn solve_linearized(gens: &[Generator], e: &[Vec<f64>], dt: f64) -> Trajectory {
  let n = e[0].len();
  let mut h = Trajectory::zeros(n, e.len(), dt);
  for k in 0..e.len() {
    let g = &gens[k];
    let p: Vec<f64> = g.inv_p.iter().map(|x| 1.0 / x).collect();
    let cur = &h.levels[k];
    let kv = g.k_v.apply(cur);
    let next = if k == 0 {
      // reflected ghost: h_τ = 0, h_ττ = 2(h¹ − h⁰)/dt²
      (0..n).map(|j| (-e[k][j] - kv[j] + 2.0 * p[j] * cur[j] / (dt * dt)) * dt * dt / (2.0 * p[j])).collect()
    } else {
      let prev = &h.levels[k - 1];
      let half = vec![0.5 / dt; n];
      let mut m: Tridiagonal = g.k_tau.scaled(&half);
      m.add_diagonal(&p.iter().map(|x| x / (dt * dt)).collect::<Vec<_>>());
      let kt_prev = g.k_tau.apply(prev);
      let rhs: Vec<f64> = (0..n)
        .map(|j| -e[k][j] - kv[j] + p[j] * (2.0 * cur[j] - prev[j]) / (dt * dt) + kt_prev[j] * 0.5 / dt)
        .collect();
      m.solve(&rhs)
    };
    h.levels[k + 1] = next;
  }
  h
}

/// Iteration schedule. `N_m = n0^m` is the smoothing index of step `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
  pub n0: f64,
  pub l: f64,
  pub k_bar: f64,
  pub k0: f64,
  pub k: f64,
  pub d: f64,
  pub m_max: usize,
  pub tau_horizon: f64,
  pub dt: Option<f64>,
  pub tolerance: f64,
  pub c_cap: f64,
  /// Apply `Π_{N_m}` to the forcing inside the residual.
  pub smooth_forcing: bool,
  /// Run even when `N0⁸‖E0‖ ≥ 1`.
  pub force: bool,
}

impl Default for ScheduleParams {
  fn default() -> Self {
    ScheduleParams {
      n0: 2.0,
      l: 4.0,
      k_bar: 2.0,
      k0: 3.0,
      k: 4.0,
      d: 0.5,
      m_max: 8,
      tau_horizon: 10.0,
      dt: None,
      tolerance: 1e-8,
      c_cap: 100.0,
      smooth_forcing: false,
      force: false,
    }
  }
}

impl ScheduleParams {
  pub fn validate(&self) -> Result<()> {
    let ladder = 2.0 <= self.k_bar && self.k_bar < self.k0 && self.k0 <= self.k && self.k <= self.l;
    if !ladder {
      return Err(Error::Domain(format!(
        "norm ladder needs 2 <= k_bar < k0 <= k <= l, got {} {} {} {}",
        self.k_bar, self.k0, self.k, self.l
      )));
    }
    if !(self.n0 >= 2.0) {
      return Err(Error::Domain(format!("n0 must be at least 2, got {}", self.n0)));
    }
    if !(self.d > 0.0 && self.d < 1.0) {
      return Err(Error::Domain(format!("contraction target d must lie in (0,1), got {}", self.d)));
    }
    if !(self.tau_horizon > 0.0) || !(self.tolerance > 0.0) || self.dt.is_some_and(|dt| !(dt > 0.0)) {
      return Err(Error::Domain("horizon, tolerance and dt must be positive".into()));
    }
    Ok(())
  }

  pub fn n_m(&self, m: usize) -> f64 {
    self.n0.powi(m as i32)
  }

  /// `k_m = k̄ + (k − k̄)/2^m`.
  pub fn k_m(&self, m: usize) -> f64 {
    self.k_bar + (self.k - self.k_bar) / 2f64.powi(m as i32)
  }
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
  pub m: usize,
  pub norm_h: f64,
  pub norm_e: f64,
  pub c_m: f64,
  pub solve_ratio: f64,
  pub k_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
  pub m: usize,
  pub w0: Trajectory,
  pub w: Trajectory,
  pub h: Trajectory,
  pub e: Vec<Vec<f64>>,
  pub sum_h: Trajectory,
  pub history: Vec<StepRecord>,
}

impl IterationState {
  /// `‖w⁽ᵐ⁾ − (w⁽⁰⁾ + Σ h⁽ⁱ⁾)‖_∞`.
  pub fn accumulation_defect(&self) -> f64 {
    self.w.max_diff(&self.w0.add(&self.sum_h))
  }
}

/// Correction and its diagnostics.
#[derive(Debug, Clone)]
pub struct NewtonStep {
  pub h: Trajectory,
  /// `‖h‖/‖E‖`.
  pub ratio: f64,
  /// `‖ℒh + E‖/‖E‖`.
  pub solve_residual: f64,
}

pub fn newton_step(state: &IterationState, kappa: f64, grid: &RadialGrid) -> Result<NewtonStep> {
  let gens = linearization(&state.w, kappa, grid)?;
  let h = solve_linearized(&gens, &state.e, state.w.dt);
  let ne = residual_norm(grid, &state.e);
  let lh = apply_linearization(&gens, &h);
  let defect: Vec<Vec<f64>> = lh.iter().zip(&state.e).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
  let rel = |x: f64| if ne > 0.0 { x / ne } else { 0.0 };
  Ok(NewtonStep { ratio: rel(h.norm(grid)), solve_residual: rel(residual_norm(grid, &defect)), h })
}

/// `c_m = ‖E_next‖/(N_m⁴‖h‖²)` against the cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
  pub c_m: f64,
  pub within_cap: bool,
}

pub fn error_bound_check(grid: &RadialGrid, h: &Trajectory, e_next: &[Vec<f64>], m: usize, schedule: &ScheduleParams) -> BoundCheck {
  let nh = h.norm(grid);
  let ne = residual_norm(grid, e_next);
  let c_m = if nh > 0.0 { ne / (schedule.n_m(m).powi(4) * nh * nh) } else { 0.0 };
  BoundCheck { c_m, within_cap: c_m <= schedule.c_cap }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
  Converged,
  IterationCap,
  Diverged { step: usize },
  Failed(Error),
}

/// Outcome of [`run_iteration`] with the JSON-facing summary.
#[derive(Debug, Clone)]
pub struct NashMoserRun {
  pub state: IterationState,
  pub initial_error: f64,
  pub log_errors: Vec<f64>,
  pub doubling_ratios: Vec<f64>,
  pub stop: StopReason,
}

impl NashMoserRun {
  pub fn converged(&self) -> bool {
    self.stop == StopReason::Converged
  }

  pub fn final_error(&self) -> f64 {
    self.state.history.last().map_or(self.initial_error, |r| r.norm_e)
  }

  pub fn report(&self) -> ConvergenceReport {
    ConvergenceReport {
      steps: self.state.history.clone(),
      doubling_ratios: self.doubling_ratios.clone(),
      converged: self.converged(),
      initial_error: self.initial_error,
      stop: match &self.stop {
        StopReason::Converged => "converged".into(),
        StopReason::IterationCap => "iteration cap".into(),
        StopReason::Diverged { step } => format!("diverged at m = {step}"),
        StopReason::Failed(e) => e.to_string(),
      },
    }
  }

  /// `Err` for divergence or a failed step.
  pub fn into_result(self) -> Result<NashMoserRun> {
    match &self.stop {
      StopReason::Failed(e) => Err(e.clone()),
      StopReason::Diverged { step } => Err(Error::Divergence { step: *step, norm: self.final_error() }),
      _ => Ok(self),
    }
  }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
  pub steps: Vec<StepRecord>,
  pub doubling_ratios: Vec<f64>,
  pub converged: bool,
  pub initial_error: f64,
  pub stop: String,
}

/// Default step: the linear CFL limit of the unperturbed operator, capped at 0.01.
pub fn default_dt(grid: &RadialGrid, kappa: f64) -> f64 {
  cfl_limit(grid, &zero_background_coeffs(grid, kappa), crate::linearized::C_CFL).min(0.01)
}

/// `2κ(1−κ²)(1−σ²)^{−1/2}`, the size of the non-autonomous forcing on `(0, σ]`.
pub fn forcing_scale(kappa: f64, sigma: f64) -> f64 {
  2.0 * kappa * (1.0 - kappa * kappa) / (1.0 - sigma * sigma).sqrt()
}

fn smoothing_for(grid: &RadialGrid, schedule: &ScheduleParams, m: usize) -> Result<Option<SmoothingOp>> {
  if !schedule.smooth_forcing {
    return Ok(None);
  }
  Ok(Some(SmoothingOp::new(schedule.n_m(m), grid.n_cells())?))
}

/// Newton corrections until `‖E⁽ᵐ⁾‖ < tolerance`, `m_max`, divergence or a failed step.
///
/// Refuses to start when `N0⁸‖E⁽⁰⁾‖ ≥ 1` unless `schedule.force` is set.
pub fn run_iteration(w0: Trajectory, kappa: f64, grid: &RadialGrid, schedule: &ScheduleParams) -> Result<NashMoserRun> {
  schedule.validate()?;
  if !(kappa > 0.0 && kappa <= 1.0) {
    return Err(Error::Domain(format!("kappa must lie in (0,1], got {kappa}")));
  }
  let e0 = approx_residual(&w0, kappa, grid, smoothing_for(grid, schedule, 0)?.as_ref())?;
  let ne0 = residual_norm(grid, &e0);
  let gate = schedule.n0.powi(8) * ne0;
  if gate >= 1.0 && !schedule.force {
    return Err(Error::Precondition(format!("N0^8 ||E0|| = {gate} is not below 1")));
  }
  let n = grid.n_cells();
  let zeros = Trajectory::zeros(n, w0.steps(), w0.dt);
  let mut state = IterationState { m: 0, w: w0.clone(), w0, h: zeros.clone(), e: e0, sum_h: zeros, history: Vec::new() };
  let mut log_errors = vec![ne0.ln()];
  let mut stop = if ne0 < schedule.tolerance { StopReason::Converged } else { StopReason::IterationCap };
  let mut rises = 0;
  let mut prev = ne0;
  while stop == StopReason::IterationCap && state.m < schedule.m_max {
    let m = state.m + 1;
    let step = match newton_step(&state, kappa, grid) {
      Ok(s) => s,
      Err(e) => {
        stop = StopReason::Failed(e);
        break;
      }
    };
    let w = state.w.add(&step.h);
    let e = match approx_residual(&w, kappa, grid, smoothing_for(grid, schedule, m)?.as_ref()) {
      Ok(e) => e,
      Err(e) => {
        stop = StopReason::Failed(e);
        break;
      }
    };
    let ne = residual_norm(grid, &e);
    let bound = error_bound_check(grid, &step.h, &e, m, schedule);
    state.history.push(StepRecord {
      m,
      norm_h: step.h.norm(grid),
      norm_e: ne,
      c_m: bound.c_m,
      solve_ratio: step.ratio,
      k_m: schedule.k_m(m),
    });
    state.sum_h = state.sum_h.add(&step.h);
    state.w = w;
    state.h = step.h;
    state.e = e;
    state.m = m;
    log_errors.push(ne.ln());
    if !ne.is_finite() {
      stop = StopReason::Failed(Error::NonFinite { tau: schedule.tau_horizon });
    } else if ne < schedule.tolerance {
      stop = StopReason::Converged;
    } else {
      rises = if ne > prev { rises + 1 } else { 0 };
      if rises >= 2 {
        stop = StopReason::Diverged { step: m };
      }
    }
    prev = ne;
  }
  let doubling_ratios = log_errors.windows(2).map(|w| w[1] / w[0]).collect();
  Ok(NashMoserRun { state, initial_error: ne0, log_errors, doubling_ratios, stop })
}

/// Zero initial approximation over the schedule's horizon.
pub fn zero_start(grid: &RadialGrid, kappa: f64, schedule: &ScheduleParams) -> Trajectory {
  let dt = schedule.dt.unwrap_or_else(|| default_dt(grid, kappa));
  let steps = (schedule.tau_horizon / dt).ceil().max(1.0) as usize;
  Trajectory::zeros(grid.n_cells(), steps, schedule.tau_horizon / steps as f64)
}

/// `w̄ = w − ε w₀ + ε(e^{−τ} − 1) w₁`, which absorbs the initial data `(ε w₀, ε w₁)`.
///
/// The profiles must vanish together with their first derivatives at `ρ = 0` and `ρ = σ`.
pub fn shift_initial_data(
  grid: &RadialGrid,
  w: &Trajectory,
  eps: f64,
  w0: impl Fn(f64) -> f64,
  w1: impl Fn(f64) -> f64,
) -> Result<Trajectory> {
  let sigma = grid.sigma();
  let d = 1e-6 * sigma;
  for (name, f) in [("w0", &w0 as &dyn Fn(f64) -> f64), ("w1", &w1)] {
    for (x, inward) in [(0.0, d), (sigma, -d)] {
      let value = f(x);
      let slope = (f(x + inward) - value) / inward;
      if value.abs() > 1e-10 || slope.abs() > 1e-4 {
        return Err(Error::Domain(format!("profile {name} must vanish with its derivative at rho = {x}")));
      }
    }
  }
  let p0 = grid.sample(&w0);
  let p1 = grid.sample(&w1);
  let levels = w
    .levels
    .iter()
    .enumerate()
    .map(|(k, l)| {
      let g = (-(k as f64) * w.dt).exp() - 1.0;
      (0..l.len()).map(|j| l[j] - eps * p0[j] + eps * g * p1[j]).collect()
    })
    .collect();
  let v0 = w.v0.iter().zip(&p1).map(|(v, p)| v - eps * p).collect();
  Ok(Trajectory { dt: w.dt, levels, v0 })
}

#[cfg(test)]
mod tests {
  use super::*;

  fn grid() -> RadialGrid {
    RadialGrid::new(0.5, 24).unwrap()
  }

  #[test]
  fn full_band_is_identity_and_projection_is_idempotent() {
    let g = grid();
    let w = random::smooth_field(&g, 12, &mut random::stream(3, 0));
    let w = w.iter().enumerate().map(|(j, x)| x + 0.01 * j as f64).collect::<Vec<_>>();
    let full = SmoothingOp::new(24.0, 24).unwrap();
    let id = full.apply(&w).unwrap();
    assert!(id.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));
    // the transform pair is exact on the basis
    let back = full.inverse(&full.forward(&w));
    assert!(back.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));
    let p = full.with_theta(5.0).unwrap();
    let once = p.apply(&w).unwrap();
    let twice = p.apply(&once).unwrap();
    assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(SmoothingOp::new(0.5, 24).is_err());
    assert!(p.apply(&w[..10]).is_err());
  }

  #[test]
  fn cutoffs_nest() {
    let g = grid();
    let w = random::smooth_field(&g, 20, &mut random::stream(4, 0));
    let a = SmoothingOp::new(3.0, 24).unwrap();
    let b = a.with_theta(9.0).unwrap();
    let ab = a.apply(&b.apply(&w).unwrap()).unwrap();
    let ba = b.apply(&a.apply(&w).unwrap()).unwrap();
    let lo = a.apply(&w).unwrap();
    assert!(ab.iter().zip(&lo).all(|(x, y)| (x - y).abs() < 1e-12));
    assert!(ba.iter().zip(&lo).all(|(x, y)| (x - y).abs() < 1e-12));
  }

  #[test]
  fn smoothing_constants_are_finite() {
    let g = RadialGrid::new(0.5, 64).unwrap();
    for (k1, k2) in [(1, 0), (2, 1), (0, 2)] {
      let c = smoothing_constants(&g, k1, k2, 20, 9).unwrap();
      assert!(c.bound.is_finite() && c.bound > 0.0);
      assert_eq!(c.remainder.is_some(), k1 <= k2);
    }
  }

  #[test]
  fn zero_residual_at_kappa_one() {
    let g = grid();
    let w = Trajectory::zeros(24, 10, 0.01);
    let e = approx_residual(&w, 1.0, &g, None).unwrap();
    assert!(e.iter().flatten().all(|x| *x == 0.0));
    let s = ScheduleParams { tau_horizon: 0.1, ..Default::default() };
    let run = run_iteration(w, 1.0, &g, &s).unwrap();
    assert!(run.converged() && run.state.m == 0);
  }

  #[test]
  fn zero_error_gives_zero_correction() {
    let g = grid();
    let w = Trajectory::zeros(24, 10, 0.01);
    let gens = linearization(&w, 0.99, &g).unwrap();
    let e = vec![vec![0.0; 24]; 10];
    let h = solve_linearized(&gens, &e, 0.01);
    assert!(h.levels.iter().flatten().all(|x| *x == 0.0));
    let b = error_bound_check(&g, &h, &e, 1, &ScheduleParams::default());
    assert_eq!(b.c_m, 0.0);
  }

  #[test]
  fn marching_solves_the_linear_problem() {
    let g = grid();
    let mut w = Trajectory::zeros(24, 20, 0.01);
    let bump = random::smooth_field(&g, 4, &mut random::stream(5, 0));
    for (k, l) in w.levels.iter_mut().enumerate() {
      *l = bump.iter().map(|b| 1e-3 * b * (k as f64 * 0.01).cos()).collect();
    }
    let gens = linearization(&w, 0.99, &g).unwrap();
    let e = approx_residual(&w, 0.99, &g, None).unwrap();
    let h = solve_linearized(&gens, &e, 0.01);
    let lh = apply_linearization(&gens, &h);
    let defect: f64 = lh.iter().zip(&e).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y).abs())).fold(0.0, f64::max);
    let scale = e.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(defect <= 1e-9 * scale, "{defect} {scale}");
  }

  #[test]
  fn short_horizon_converges_quadratically() {
    let g = grid();
    let s = ScheduleParams { tau_horizon: 0.1, dt: Some(0.005), force: true, ..Default::default() };
    let w0 = zero_start(&g, 0.99, &s);
    let run = run_iteration(w0, 0.99, &g, &s).unwrap();
    assert!(run.converged(), "{:?}", run.report());
    assert!(run.state.accumulation_defect() <= 1e-12);
    let r = &run.doubling_ratios;
    assert!(r[1] > 1.5, "{r:?}");
    assert!(run.state.history.iter().all(|h| h.solve_ratio.is_finite()));
  }

  #[test]
  fn precondition_refuses_large_errors() {
    let g = grid();
    let s = ScheduleParams { tau_horizon: 0.05, n0: 64.0, ..Default::default() };
    let w0 = zero_start(&g, 0.9, &s);
    assert!(matches!(run_iteration(w0.clone(), 0.9, &g, &s), Err(Error::Precondition(_))));
    let forced = ScheduleParams { force: true, m_max: 1, ..s };
    assert!(run_iteration(w0, 0.9, &g, &forced).is_ok());
  }

  #[test]
  fn schedule_ladder() {
    let s = ScheduleParams::default();
    s.validate().unwrap();
    assert!((1..6).all(|m| s.k_m(m) < s.k_m(m - 1)));
    assert_eq!(s.n_m(3), 8.0);
    assert!(ScheduleParams { k_bar: 3.0, ..s.clone() }.validate().is_err());
    assert!(ScheduleParams { d: 1.0, ..s }.validate().is_err());
  }

  #[test]
  fn shift_examples() {
    let g = grid();
    let w = Trajectory::zeros(24, 50, 0.1);
    let bump = |r: f64| (r * (0.5 - r)).powi(2);
    let same = shift_initial_data(&g, &w, 0.0, bump, bump).unwrap();
    assert_eq!(same, w);
    let s = shift_initial_data(&g, &w, 0.1, bump, bump).unwrap();
    let p = g.sample(bump);
    assert!((0..24).all(|j| (s.levels[0][j] + 0.1 * p[j]).abs() < 1e-15));
    assert!((0..24).all(|j| (s.v0[j] + 0.1 * p[j]).abs() < 1e-15));
    let late = &s.levels[50];
    let g5 = (-5.0f64).exp();
    assert!((0..24).all(|j| (late[j] + 0.1 * p[j] + 0.1 * (1.0 - g5) * p[j]).abs() < 1e-15));
    assert!(shift_initial_data(&g, &w, 0.1, |r| r, bump).is_err());
  }
}
