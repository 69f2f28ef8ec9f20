use super::coeffs::{assemble_coeffs, nonlinear_forcing, BackgroundSlots};
use super::{fit_decay_rate, zero_background_coeffs, CoeffSet, DecayReport, EnergyParams, FieldState};
use crate::error::{Error, Result};
use crate::grid::{RadialGrid, Tridiagonal};
use serde::{Deserialize, Serialize};

/// Semi-discrete generator `v_ττ = p⁻¹(F − K_v v − K_τ v_τ)`.
#[derive(Debug, Clone)]
pub struct Generator {
  pub k_v: Tridiagonal,
  pub k_tau: Tridiagonal,
  pub inv_p: Vec<f64>,
}

impl Generator {
  pub fn new(grid: &RadialGrid, c: &CoeffSet) -> Self {
    let n = grid.n_cells();
    let col = |i: usize| -> Vec<f64> { (0..n).map(|j| c.base[i][j] + c.a[i][j]).collect() };
    let neg_rr: Vec<f64> = col(1).iter().map(|x| -x).collect();
    let sing: Vec<f64> = (0..n).map(|j| c.base[4][j] * c.rho[j]).collect();
    let mut k_v = grid.d2().scaled(&neg_rr).add(&grid.singular().scaled(&sing)).add(&grid.d1().scaled(&c.a[4]));
    k_v.add_diagonal(&col(5));
    let mut k_tau = grid.d1().scaled(&col(3));
    k_tau.add_diagonal(&col(2));
    let inv_p = (0..n).map(|j| 1.0 / c.principal(j)).collect();
    Generator { k_v, k_tau, inv_p }
  }

  pub fn accel(&self, v: &[f64], v_tau: &[f64], forcing: Option<&[f64]>) -> Vec<f64> {
    let a = self.k_v.apply(v);
    let b = self.k_tau.apply(v_tau);
    (0..v.len())
      .map(|j| {
        let f = forcing.map_or(0.0, |f| f[j]);
        (f - a[j] - b[j]) * self.inv_p[j]
      })
      .collect()
  }
}

/// Largest stable step `c_cfl·h / max wave speed`; `∞` when every speed vanishes.
pub fn cfl_limit(grid: &RadialGrid, c: &CoeffSet, c_cfl: f64) -> f64 {
  let h = grid.spacing();
  let w = grid.blend_weights();
  let mut speed = 0.0f64;
  for j in 0..grid.n_cells() {
    let p = c.principal(j);
    let q = (c.base[3][j] + c.a[3][j]).abs();
    let sing = (c.base[4][j] * c.rho[j]).abs() * (w[j] + (1.0 - w[j]) * h / c.rho[j]);
    let r = (c.base[1][j] + c.a[1][j]).abs() + sing + 0.5 * h * c.a[4][j].abs();
    speed = speed.max((q + (q * q + 4.0 * p * r).sqrt()) / (2.0 * p));
  }
  if speed > 0.0 {
    c_cfl * h / speed
  } else {
    f64::INFINITY
  }
}

pub const C_CFL: f64 = 0.4;

/// One classical RK4 step with coefficients frozen over the step.
pub fn step_linear(
  grid: &RadialGrid,
  state: &FieldState,
  coeffs: &CoeffSet,
  forcing: Option<&[f64]>,
  dt: f64,
) -> Result<FieldState> {
  if state.len() != grid.n_cells() {
    return Err(Error::Domain(format!("state has {} nodes, grid has {}", state.len(), grid.n_cells())));
  }
  coeffs.check_hyperbolicity()?;
  let limit = cfl_limit(grid, coeffs, C_CFL);
  if dt > limit * (1.0 + 1e-12) || !(dt > 0.0) {
    return Err(Error::Cfl { dt, limit });
  }
  let g = Generator::new(grid, coeffs);
  step_linear_staged(state, [&g, &g, &g], [forcing, forcing, forcing], dt)
}

/// RK4 step with generators and forcings at the start, midpoint and end of the step.
pub fn step_linear_staged(
  state: &FieldState,
  gens: [&Generator; 3],
  forcing: [Option<&[f64]>; 3],
  dt: f64,
) -> Result<FieldState> {
  let n = state.len();
  let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + a * q).collect() };
  let (v, vt) = (&state.v, &state.v_tau);
  let k1v = vt.clone();
  let k1t = gens[0].accel(v, vt, forcing[0]);
  let (v2, t2) = (axpy(v, 0.5 * dt, &k1v), axpy(vt, 0.5 * dt, &k1t));
  let k2v = t2.clone();
  let k2t = gens[1].accel(&v2, &t2, forcing[1]);
  let (v3, t3) = (axpy(v, 0.5 * dt, &k2v), axpy(vt, 0.5 * dt, &k2t));
  let k3v = t3.clone();
  let k3t = gens[1].accel(&v3, &t3, forcing[1]);
  let (v4, t4) = (axpy(v, dt, &k3v), axpy(vt, dt, &k3t));
  let k4v = t4.clone();
  let k4t = gens[2].accel(&v4, &t4, forcing[2]);
  let mut out = FieldState::zeros(n);
  for j in 0..n {
    out.v[j] = v[j] + dt / 6.0 * (k1v[j] + 2.0 * k2v[j] + 2.0 * k3v[j] + k4v[j]);
    out.v_tau[j] = vt[j] + dt / 6.0 * (k1t[j] + 2.0 * k2t[j] + 2.0 * k3t[j] + k4t[j]);
  }
  out.tau = state.tau + dt;
  if !out.is_finite() {
    return Err(Error::NonFinite { tau: out.tau });
  }
  Ok(out)
}

/// `∫(v_τ² + v_ρ² + v²) dρ`.
pub fn l2_energy(grid: &RadialGrid, state: &FieldState) -> f64 {
  let vr = grid.d1().apply(&state.v);
  let d: Vec<f64> = (0..state.len()).map(|j| state.v_tau[j].powi(2) + vr[j].powi(2) + state.v[j].powi(2)).collect();
  grid.integrate(&d)
}

/// Quadrature of the multiplier-weighted energy density.
pub fn energy_functional(grid: &RadialGrid, state: &FieldState, c: &CoeffSet, params: &EnergyParams) -> f64 {
  let (m1, m2) = (params.mu1, params.mu2);
  let k = c.kappa;
  let k2 = k * k;
  let vr = grid.d1().apply(&state.v);
  let dens: Vec<f64> = (0..state.len())
    .map(|j| {
      let r = c.rho[j];
      let q = 1.0 - r * r;
      let (v, vt, vr) = (state.v[j], state.v_tau[j], vr[j]);
      let a = |i: usize| c.a[i][j];
      0.5 * (4.0 * (m2 - 1.0) * k2 - m2 + m2 * (k - 1.0).powi(2) * r * r + m2 * a(2) + a(5)) * v * v
        + (1.0 + (k2 - 1.0) * r * r + a(0)) * (vt * (m2 * v - m1 * vr) + 0.5 * vt * vt)
        + m2 * (2.0 * r * (1.0 - k2) * q + a(3)) * vr * v
        + 0.5 * ((1.0 - k2) * q * (1.0 - 2.0 * m1 * r - r * r) + a(1) - m1 * a(3)) * vr * vr
    })
    .collect();
  grid.integrate(&dens)
}

/// Background for the linearized evolution.
#[derive(Debug, Clone, PartialEq)]
pub enum Background {
  Zero,
  /// States on a uniform time grid starting at `τ = 0`.
  Trajectory { dt: f64, states: Vec<FieldState> },
}

impl Background {
  /// Slots at `τ`, linear in time between stored levels; `w_ττ` by a two-level difference of `w_τ`.
  pub fn slots_at(&self, grid: &RadialGrid, tau: f64) -> BackgroundSlots {
    match self {
      Background::Zero => BackgroundSlots::zero(grid.n_cells()),
      Background::Trajectory { dt, states } => {
        let last = states.len() - 1;
        let level = |k: usize| {
          let k = k.min(last);
          let (a, b) = if k < last { (k, k + 1) } else { (k.saturating_sub(1), k) };
          let wtt: Vec<f64> = if a == b {
            vec![0.0; grid.n_cells()]
          } else {
            states[b].v_tau.iter().zip(&states[a].v_tau).map(|(x, y)| (x - y) / dt).collect()
          };
          BackgroundSlots::from_levels(grid, &states[k].v, &states[k].v_tau, &wtt)
        };
        let x = (tau / dt).max(0.0);
        let k = (x.floor() as usize).min(last);
        let theta = (x - k as f64).clamp(0.0, 1.0);
        if k >= last || theta == 0.0 {
          level(k)
        } else {
          level(k).lerp(&level(k + 1), theta)
        }
      }
    }
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
  pub tau_max: f64,
  /// Time step; `None` picks `min(CFL limit, 0.01)`.
  pub dt: Option<f64>,
  /// Sampling interval for the trajectory rows.
  pub sample_every: f64,
  pub energy: EnergyParams,
}

impl Default for EvolveOptions {
  fn default() -> Self {
    EvolveOptions { tau_max: 20.0, dt: None, sample_every: 0.1, energy: EnergyParams::default() }
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
  pub tau: f64,
  pub energy_l2: f64,
  pub energy_bracket: f64,
  pub h1_norm: f64,
  pub boundary_flux: f64,
}

impl TrajectoryRow {
  pub fn as_array(&self) -> [f64; 5] {
    [self.tau, self.energy_l2, self.energy_bracket, self.h1_norm, self.boundary_flux]
  }
}

#[derive(Debug, Clone)]
pub struct EvolveRun {
  pub state: FieldState,
  pub decay: DecayReport,
  pub rows: Vec<TrajectoryRow>,
  pub dt: f64,
  pub bracket_initial: f64,
  /// Largest single-step increase of the energy bracket.
  pub bracket_max_increase: f64,
}

fn row(grid: &RadialGrid, s: &FieldState, c: &CoeffSet, p: &EnergyParams) -> TrajectoryRow {
  let (l, r) = grid.boundary_slopes(&s.v);
  TrajectoryRow {
    tau: s.tau,
    energy_l2: l2_energy(grid, s),
    energy_bracket: energy_functional(grid, s, c, p),
    h1_norm: grid.sobolev_norm(&s.v, 1).unwrap_or(f64::NAN),
    boundary_flux: l.abs().max(r.abs()),
  }
}

/// Runs the linearized evolution to `tau_max`.
pub fn evolve(
  grid: &RadialGrid,
  state0: &FieldState,
  kappa: f64,
  background: &Background,
  forcing: bool,
  opts: &EvolveOptions,
) -> Result<EvolveRun> {
  if !(opts.tau_max > 0.0) {
    return Err(Error::Domain(format!("tau_max must be positive, got {}", opts.tau_max)));
  }
  let coeffs_at = |tau: f64| -> Result<(CoeffSet, Option<Vec<f64>>)> {
    let bg = background.slots_at(grid, tau);
    let c = match background {
      Background::Zero => zero_background_coeffs(grid, kappa),
      _ => assemble_coeffs(grid, kappa, &bg)?,
    };
    let f = if forcing { Some(nonlinear_forcing(grid, kappa, &bg)?) } else { None };
    Ok((c, f))
  };
  let (c0, f0) = coeffs_at(0.0)?;
  c0.check_hyperbolicity()?;
  let limit = cfl_limit(grid, &c0, C_CFL);
  let dt = match opts.dt {
    Some(dt) if dt > limit * (1.0 + 1e-12) || !(dt > 0.0) => return Err(Error::Cfl { dt, limit }),
    Some(dt) => dt,
    None => limit.min(0.01),
  };
  let steps = (opts.tau_max / dt).round().max(1.0) as usize;
  let every = ((opts.sample_every / dt).round() as usize).max(1);
  let mut state = state0.clone();
  state.tau = 0.0;
  let mut rows = vec![row(grid, &state, &c0, &opts.energy)];
  let bracket_initial = rows[0].energy_bracket;
  let mut prev_bracket = bracket_initial;
  let mut max_increase = f64::NEG_INFINITY;
  let autonomous = matches!(background, Background::Zero);
  let g0 = Generator::new(grid, &c0);
  for k in 0..steps {
    let t = k as f64 * dt;
    let next = if autonomous {
      step_linear_staged(&state, [&g0, &g0, &g0], [f0.as_deref(); 3], dt)
    } else {
      (|| {
        let (ca, fa) = coeffs_at(t)?;
        let (cb, fb) = coeffs_at(t + 0.5 * dt)?;
        let (cc, fc) = coeffs_at(t + dt)?;
        for c in [&ca, &cb, &cc] {
          c.check_hyperbolicity()?;
        }
        let (ga, gb, gc) = (Generator::new(grid, &ca), Generator::new(grid, &cb), Generator::new(grid, &cc));
        step_linear_staged(&state, [&ga, &gb, &gc], [fa.as_deref(), fb.as_deref(), fc.as_deref()], dt)
      })()
    }
    .map_err(|e| e.at(t))?;
    state = next;
    state.tau = (k + 1) as f64 * dt;
    let c_now = if autonomous { c0.clone() } else { coeffs_at(state.tau).map_err(|e| e.at(state.tau))?.0 };
    let b = energy_functional(grid, &state, &c_now, &opts.energy);
    max_increase = max_increase.max(b - prev_bracket);
    prev_bracket = b;
    if (k + 1) % every == 0 || k + 1 == steps {
      rows.push(row(grid, &state, &c_now, &opts.energy));
    }
  }
  let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.tau, r.energy_l2)).collect();
  let (rate, r_squared) = fit_decay_rate(&series).unwrap_or((f64::NAN, f64::NAN));
  Ok(EvolveRun {
    state,
    decay: DecayReport { rate, r_squared, series },
    rows,
    dt,
    bracket_initial,
    bracket_max_increase: max_increase,
  })
}

#[cfg(test)]
mod tests {
  use super::*;
  use crate::random::{smooth_field, stream};

  fn bump(grid: &RadialGrid) -> FieldState {
    let s = grid.sigma();
    let v = grid.sample(|r| (r * (s - r)).powi(2) * 100.0);
    FieldState::new(v, vec![0.0; grid.n_cells()], 0.0).unwrap()
  }

  #[test]
  fn zero_state_stays_zero() {
    let g = RadialGrid::new(0.5, 50).unwrap();
    let c = zero_background_coeffs(&g, 0.95);
    let s = step_linear(&g, &FieldState::zeros(50), &c, None, 1e-3).unwrap();
    assert!(s.v.iter().chain(&s.v_tau).all(|&x| x == 0.0));
  }

  #[test]
  fn cfl_violation_is_reported() {
    let g = RadialGrid::new(0.5, 50).unwrap();
    let c = zero_background_coeffs(&g, 0.9);
    let limit = cfl_limit(&g, &c, C_CFL);
    assert!(matches!(step_linear(&g, &bump(&g), &c, None, 2.0 * limit), Err(Error::Cfl { .. })));
  }

  #[test]
  fn kappa_one_reproduces_mode_ode() {
    let g = RadialGrid::new(0.5, 20).unwrap();
    let c = zero_background_coeffs(&g, 1.0);
    assert!(cfl_limit(&g, &c, C_CFL).is_infinite());
    let v0 = g.sample(|r| 1.0 + r);
    let v1 = g.sample(|r| -0.5 * r);
    let mut s = FieldState::new(v0.clone(), v1.clone(), 0.0).unwrap();
    let dt = 1e-3;
    for _ in 0..1000 {
      s = step_linear(&g, &s, &c, None, dt).unwrap();
    }
    for j in 0..20 {
      // roots 1 and −4: c1 + c2 = v0, c1 − 4c2 = v1
      let c2 = (v0[j] - v1[j]) / 5.0;
      let c1 = v0[j] - c2;
      let exact = c1 * 1f64.exp() + c2 * (-4f64).exp();
      assert!((s.v[j] - exact).abs() < 1e-6, "{} vs {exact}", s.v[j]);
    }
  }

  #[test]
  fn second_order_in_space() {
    // support kept clear of the origin, where the Dirichlet point condition leaves an O(h) layer
    let tau = 0.2;
    let run = |n: usize| {
      let g = RadialGrid::new(0.5, n).unwrap();
      let c = zero_background_coeffs(&g, 0.9);
      let v = g.sample(|r| if r > 0.2 && r < 0.45 { ((r - 0.2) * (0.45 - r)).powi(4) * 1e5 } else { 0.0 });
      let mut s = FieldState::new(v, vec![0.0; n], 0.0).unwrap();
      let dt: f64 = 2e-4;
      for _ in 0..(tau / dt).round() as usize {
        s = step_linear(&g, &s, &c, None, dt).unwrap();
      }
      s
    };
    let fine = run(800);
    let errs: Vec<f64> = [50, 100]
      .iter()
      .map(|&n| {
        let s = run(n);
        let stride = 800 / n;
        (0..n)
          .map(|j| {
            let mid = j * stride + stride / 2;
            (s.v[j] - 0.5 * (fine.v[mid - 1] + fine.v[mid])).abs()
          })
          .fold(0.0, f64::max)
      })
      .collect();
    let ratio = errs[0] / errs[1];
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}, errs {errs:?}");
  }

  #[test]
  fn energy_functional_matches_direct_quadrature() {
    let g = RadialGrid::new(0.5, 200).unwrap();
    let v = smooth_field(&g, 5, &mut stream(3, 0));
    let s = FieldState::new(v.clone(), v.clone(), 0.0).unwrap();
    let c = zero_background_coeffs(&g, 0.95);
    let p = EnergyParams { mu1: 0.05, mu2: 2.0 };
    let e = energy_functional(&g, &s, &c, &p);
    // independent: explicit loops over the trapezoid with a separately built derivative
    let h = g.spacing();
    let n = g.n_cells();
    let mut dv = vec![0.0; n];
    for j in 0..n {
      let left = if j == 0 { -v[0] } else { v[j - 1] };
      let right = if j == n - 1 { -v[n - 1] } else { v[j + 1] };
      dv[j] = (right - left) / (2.0 * h);
    }
    let k2: f64 = 0.95 * 0.95;
    let dens: Vec<f64> = (0..n)
      .map(|j| {
        let r = g.nodes()[j];
        let (x, y) = (v[j], dv[j]);
        0.5 * (4.0 * k2 - 2.0 + 2.0 * 0.0025 * r * r) * x * x
          + (1.0 + (k2 - 1.0) * r * r) * (x * (2.0 * x - 0.05 * y) + 0.5 * x * x)
          + 2.0 * (2.0 * r * (1.0 - k2) * (1.0 - r * r)) * y * x
          + 0.5 * ((1.0 - k2) * (1.0 - r * r) * (1.0 - 0.1 * r - r * r)) * y * y
      })
      .collect();
    let mut q = 0.25 * h * ((1.5 * dens[0] - 0.5 * dens[1]) + dens[0]);
    q += 0.25 * h * (dens[n - 1] + 1.5 * dens[n - 1] - 0.5 * dens[n - 2]);
    for j in 0..n - 1 {
      q += 0.5 * h * (dens[j] + dens[j + 1]);
    }
    assert!((e - q).abs() < 1e-10, "{e} vs {q}");
    assert_eq!(energy_functional(&g, &FieldState::zeros(n), &c, &p), 0.0);
  }

  #[test]
  fn zero_data_at_kappa_one_has_zero_energy() {
    let g = RadialGrid::new(0.5, 20).unwrap();
    let opts = EvolveOptions { tau_max: 1.0, ..EvolveOptions::default() };
    let run = evolve(&g, &FieldState::zeros(20), 1.0, &Background::Zero, false, &opts).unwrap();
    assert!(run.rows.iter().all(|r| r.energy_l2 == 0.0));
  }

  #[test]
  fn stable_parameters_decay() {
    let g = RadialGrid::new(0.5, 50).unwrap();
    let v = smooth_field(&g, 6, &mut stream(11, 0));
    let s = FieldState::new(v, vec![0.0; 50], 0.0).unwrap();
    let opts = EvolveOptions { tau_max: 10.0, ..EvolveOptions::default() };
    let run = evolve(&g, &s, 0.9, &Background::Zero, false, &opts).unwrap();
    assert!(run.decay.rate < 0.0, "{}", run.decay.rate);
  }

  #[test]
  fn trajectory_background_matches_zero_background_when_zero() {
    let g = RadialGrid::new(0.5, 20).unwrap();
    let v = smooth_field(&g, 3, &mut stream(5, 0));
    let s = FieldState::new(v, vec![0.0; 20], 0.0).unwrap();
    let opts = EvolveOptions { tau_max: 0.5, dt: Some(0.01), ..EvolveOptions::default() };
    let bg = Background::Trajectory { dt: 0.05, states: vec![FieldState::zeros(20); 12] };
    let a = evolve(&g, &s, 0.95, &Background::Zero, true, &opts).unwrap();
    let b = evolve(&g, &s, 0.95, &bg, true, &opts).unwrap();
    for j in 0..20 {
      assert!((a.state.v[j] - b.state.v[j]).abs() < 1e-14);
    }
  }
}
