use super::coeffs::{consistent_coeffs, forcing_jet, BackgroundSlots};
use super::stepper::{cfl_limit, l2_energy, Generator, C_CFL};
use super::{fit_decay_rate, symbol_check, zero_background_coeffs, DecayReport, FieldState};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::jet::Slots;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearOptions {
  pub tau_max: f64,
  /// Time step; `None` picks `min(CFL limit / 2, 0.01)` at the initial state, leaving room for
  /// the coefficients to move with the solution.
  pub dt: Option<f64>,
  pub sample_every: f64,
  /// H¹ norm above which the run stops with a blowup error.
  pub ceiling: f64,
  /// Blowup time used when mapping back to physical coordinates.
  pub t_blowup: f64,
}

impl Default for NonlinearOptions {
  fn default() -> Self {
    NonlinearOptions { tau_max: 5.0, dt: None, sample_every: 0.05, ceiling: 1.0, t_blowup: 1.0 }
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearRow {
  pub tau: f64,
  pub energy_l2: f64,
  pub h1_norm: f64,
  /// `‖u − u_T^+‖_{H¹(Ω_{T−t})}/(T−t)`.
  pub physical_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct NonlinearRun {
  pub state: FieldState,
  pub rows: Vec<NonlinearRow>,
  /// States at every sample, spaced `sample_dt` apart from `τ = 0`.
  pub samples: Vec<FieldState>,
  pub sample_dt: f64,
  pub decay: DecayReport,
  pub dt: f64,
}

impl NonlinearRun {
  /// Largest `physical_ratio` relative to its initial value.
  pub fn ratio_growth(&self) -> f64 {
    let r0 = self.rows[0].physical_ratio;
    self.rows.iter().map(|r| r.physical_ratio / r0).fold(f64::NEG_INFINITY, f64::max)
  }

  pub fn max_h1(&self) -> f64 {
    self.rows.iter().map(|r| r.h1_norm).fold(0.0, f64::max)
  }
}

/// Physical-coordinate distance to `u_T^+` on `Ω_{T−t}` divided by `T − t`.
///
/// With `u = (T−t)(κφ + w)` and `g = (κ−1)φ + w`, the squared ratio is
/// `(T−t)∫g² dρ + (T−t)⁻¹∫g_ρ² dρ` with `T − t = T e^{−τ}`.
pub fn physical_ratio(grid: &RadialGrid, state: &FieldState, kappa: f64, t_blowup: f64) -> f64 {
  let s = t_blowup * (-state.tau).exp();
  let g: Vec<f64> =
    grid.nodes().iter().zip(&state.v).map(|(&r, &w)| (kappa - 1.0) * (1.0 - r * r).sqrt() + w).collect();
  let gr: Vec<f64> = grid
    .nodes()
    .iter()
    .zip(grid.d1().apply(&state.v))
    .map(|(&r, wr)| -(kappa - 1.0) * r / (1.0 - r * r).sqrt() + wr)
    .collect();
  let l2 = grid.inner(&g, &g);
  let d2 = grid.inner(&gr, &gr);
  (s * l2 + d2 / s).sqrt()
}

struct Rhs {
  base: Generator,
  c0: Vec<f64>,
  c_rr: Vec<f64>,
  c_tr: Vec<f64>,
  kappa: f64,
  margin: f64,
}

impl Rhs {
  fn new(grid: &RadialGrid, kappa: f64, margin: f64) -> Self {
    let base = zero_background_coeffs(grid, kappa);
    Rhs {
      base: Generator::new(grid, &base),
      c0: base.base[0].clone(),
      c_rr: base.base[1].clone(),
      c_tr: base.base[3].clone(),
      kappa,
      margin,
    }
  }

  /// Solves the nonlinear equation for `w_ττ`; the forcing is affine in `w_ττ`.
  fn accel(&self, grid: &RadialGrid, v: &[f64], vt: &[f64]) -> Result<Vec<f64>> {
    let bg = BackgroundSlots::from_levels(grid, v, vt, &vec![0.0; v.len()]);
    let kv = self.base.k_v.apply(v);
    let kt = self.base.k_tau.apply(vt);
    let mut out = vec![0.0; v.len()];
    for (j, &r) in grid.nodes().iter().enumerate() {
      let s: Slots<f64> = bg.at(j);
      let f = forcing_jet(r, self.kappa, &s.seeded());
      let p = self.c0[j] - f.grad[5];
      if !(p >= self.margin) {
        return Err(Error::Hyperbolicity { value: p, margin: self.margin, node: j });
      }
      symbol_check(p, self.c_tr[j] - f.grad[4], self.c_rr[j] + f.grad[3], j)?;
      out[j] = (f.value - kv[j] - kt[j]) / p;
    }
    Ok(out)
  }
}

fn rk4(grid: &RadialGrid, rhs: &Rhs, s: &FieldState, dt: f64) -> Result<FieldState> {
  let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + a * q).collect() };
  let (v, vt) = (&s.v, &s.v_tau);
  let k1 = rhs.accel(grid, v, vt)?;
  let (v2, t2) = (axpy(v, 0.5 * dt, vt), axpy(vt, 0.5 * dt, &k1));
  let k2 = rhs.accel(grid, &v2, &t2)?;
  let (v3, t3) = (axpy(v, 0.5 * dt, &t2), axpy(vt, 0.5 * dt, &k2));
  let k3 = rhs.accel(grid, &v3, &t3)?;
  let (v4, t4) = (axpy(v, dt, &t3), axpy(vt, dt, &k3));
  let k4 = rhs.accel(grid, &v4, &t4)?;
  let n = v.len();
  let mut out = FieldState::zeros(n);
  for j in 0..n {
    out.v[j] = v[j] + dt / 6.0 * (vt[j] + 2.0 * t2[j] + 2.0 * t3[j] + t4[j]);
    out.v_tau[j] = vt[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  out.tau = s.tau + dt;
  if !out.is_finite() {
    return Err(Error::NonFinite { tau: out.tau });
  }
  Ok(out)
}

fn row(grid: &RadialGrid, s: &FieldState, kappa: f64, t_blowup: f64) -> NonlinearRow {
  NonlinearRow {
    tau: s.tau,
    energy_l2: l2_energy(grid, s),
    h1_norm: grid.sobolev_norm(&s.v, 1).unwrap_or(f64::NAN),
    physical_ratio: physical_ratio(grid, s, kappa, t_blowup),
  }
}

/// Time-steps the full nonlinear perturbation equation with the forcing included.
pub fn evolve_nonlinear(
  grid: &RadialGrid,
  state0: &FieldState,
  kappa: f64,
  opts: &NonlinearOptions,
) -> Result<NonlinearRun> {
  if !(opts.tau_max > 0.0) {
    return Err(Error::Domain(format!("tau_max must be positive, got {}", opts.tau_max)));
  }
  if !(kappa > 0.0 && kappa <= 1.0) {
    return Err(Error::Domain(format!("kappa must lie in (0,1], got {kappa}")));
  }
  let rhs = Rhs::new(grid, kappa, 0.5 * kappa * kappa);
  let limit_at = |s: &FieldState| -> Result<f64> {
    let bg = BackgroundSlots::from_levels(grid, &s.v, &s.v_tau, &rhs.accel(grid, &s.v, &s.v_tau)?);
    let c = consistent_coeffs(grid, kappa, &bg)?;
    c.check_hyperbolicity()?;
    Ok(cfl_limit(grid, &c, C_CFL))
  };
  let mut state = state0.clone();
  state.tau = 0.0;
  let limit = limit_at(&state).map_err(|e| e.at(0.0))?;
  let dt = match opts.dt {
    Some(dt) if dt > limit * (1.0 + 1e-12) || !(dt > 0.0) => return Err(Error::Cfl { dt, limit }),
    Some(dt) => dt,
    None => (0.5 * limit).min(0.01),
  };
  let steps = (opts.tau_max / dt).round().max(1.0) as usize;
  let every = ((opts.sample_every / dt).round() as usize).max(1);
  let mut rows = vec![row(grid, &state, kappa, opts.t_blowup)];
  let mut samples = vec![state.clone()];
  for k in 0..steps {
    state = rk4(grid, &rhs, &state, dt).map_err(|e| e.at(state.tau))?;
    state.tau = (k + 1) as f64 * dt;
    if (k + 1) % every == 0 || k + 1 == steps {
      let r = row(grid, &state, kappa, opts.t_blowup);
      if !(r.h1_norm <= opts.ceiling) {
        return Err(Error::Blowup { tau: state.tau, norm: r.h1_norm, ceiling: opts.ceiling });
      }
      let limit = limit_at(&state).map_err(|e| e.at(state.tau))?;
      if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
      }
      rows.push(r);
      samples.push(state.clone());
    }
  }
  let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.tau, r.energy_l2)).collect();
  let (rate, r_squared) = fit_decay_rate(&series).unwrap_or((f64::NAN, f64::NAN));
  Ok(NonlinearRun {
    state,
    rows,
    samples,
    sample_dt: every as f64 * dt,
    decay: DecayReport { rate, r_squared, series },
    dt,
  })
}
