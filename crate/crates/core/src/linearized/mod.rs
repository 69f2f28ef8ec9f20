//! Linearized and nonlinear evolution in similarity coordinates on `(0, σ]`.
//!
//! The perturbation `w` of `κφ` obeys
//! `c0 w_ττ − c_rr w_ρρ + c2 w_τ + c_τρ w_τρ + c_ρ w_ρ − 4κ² w = f(ρ, w)`
//! and the linearized operator adds `a0(w)..a5(w)` to the six coefficients.

mod coeffs;
mod nonlinear;
mod stepper;

pub use coeffs::{
  assemble_coeffs, base_coeffs, consistent_coeffs, forcing_at, forcing_jet, forcing_unweighted, nonlinear_forcing, printed_a,
  BackgroundSlots,
};
pub use nonlinear::{evolve_nonlinear, physical_ratio, NonlinearOptions, NonlinearRow, NonlinearRun};
pub use stepper::{
  cfl_limit, energy_functional, evolve, l2_energy, step_linear, step_linear_staged, Background, EvolveOptions,
  EvolveRun, Generator, TrajectoryRow, C_CFL,
};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use serde::{Deserialize, Serialize};

/// `(v, v_τ)` on the grid nodes at similarity time `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
  pub v: Vec<f64>,
  pub v_tau: Vec<f64>,
  pub tau: f64,
}

impl FieldState {
  pub fn zeros(n: usize) -> Self {
    FieldState { v: vec![0.0; n], v_tau: vec![0.0; n], tau: 0.0 }
  }

  pub fn new(v: Vec<f64>, v_tau: Vec<f64>, tau: f64) -> Result<Self> {
    if v.len() != v_tau.len() {
      return Err(Error::Domain(format!("state arrays differ in length: {} vs {}", v.len(), v_tau.len())));
    }
    Ok(FieldState { v, v_tau, tau })
  }

  pub fn len(&self) -> usize {
    self.v.len()
  }

  pub fn is_empty(&self) -> bool {
    self.v.is_empty()
  }

  /// Values at `ρ = 0` and `ρ = σ` extrapolated linearly from the two nearest nodes.
  pub fn boundary_values(&self) -> (f64, f64) {
    let n = self.v.len();
    (1.5 * self.v[0] - 0.5 * self.v[1], 1.5 * self.v[n - 1] - 0.5 * self.v[n - 2])
  }

  pub fn is_finite(&self) -> bool {
    self.v.iter().chain(&self.v_tau).all(|x| x.is_finite())
  }
}

/// Principal coefficients `base` and background-dependent corrections `a`, on nodes.
///
/// Index map: 0 ↔ `v_ττ`, 1 ↔ `−v_ρρ`, 2 ↔ `v_τ`, 3 ↔ `v_τρ`, 4 ↔ `v_ρ`, 5 ↔ `v`.
/// `base[4] = −(1−κ²)(1−ρ²)ρ⁻¹` is applied through the blended `ρ⁻¹∂_ρ` stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSet {
  pub kappa: f64,
  pub rho: Vec<f64>,
  pub base: [Vec<f64>; 6],
  pub a: [Vec<f64>; 6],
}

impl CoeffSet {
  pub fn principal(&self, j: usize) -> f64 {
    self.base[0][j] + self.a[0][j]
  }

  /// Checks `c0 + a0 ≥ κ²/2` and a non-negative discriminant of the principal symbol
  /// `p ξ_τ² + q ξ_τ ξ_ρ − r ξ_ρ²` at every node.
  pub fn check_hyperbolicity(&self) -> Result<()> {
    let margin = 0.5 * self.kappa * self.kappa;
    for j in 0..self.rho.len() {
      let p = self.principal(j);
      if !(p >= margin) {
        return Err(Error::Hyperbolicity { value: p, margin, node: j });
      }
      let q = self.base[3][j] + self.a[3][j];
      let r = self.base[1][j] + self.a[1][j];
      symbol_check(p, q, r, j)?;
    }
    Ok(())
  }
}

pub(crate) fn symbol_check(p: f64, q: f64, r: f64, node: usize) -> Result<()> {
  let discriminant = q * q + 4.0 * p * r;
  if !(discriminant >= 0.0) {
    return Err(Error::NotHyperbolic { discriminant, node });
  }
  Ok(())
}

/// Energy multipliers with `0 < μ1 < 1 < μ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
  pub mu1: f64,
  pub mu2: f64,
}

impl EnergyParams {
  pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
    if !(mu1 > 0.0 && mu1 < 1.0 && mu2 > 1.0) {
      return Err(Error::Domain(format!("energy multipliers need 0 < mu1 < 1 < mu2, got ({mu1}, {mu2})")));
    }
    Ok(EnergyParams { mu1, mu2 })
  }
}

impl Default for EnergyParams {
  fn default() -> Self {
    EnergyParams { mu1: 0.1, mu2: 2.0 }
  }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
  pub rate: f64,
  pub r_squared: f64,
  pub series: Vec<(f64, f64)>,
}

/// Least-squares slope of `log(energy)` against `τ` over the second half of the samples.
pub fn fit_decay_rate(series: &[(f64, f64)]) -> Result<(f64, f64)> {
  if series.len() < 10 {
    return Err(Error::DegenerateFit(format!("need at least 10 samples, got {}", series.len())));
  }
  for w in series.windows(2) {
    if !(w[1].0 > w[0].0) {
      return Err(Error::DegenerateFit("tau values must increase strictly".into()));
    }
  }
  if let Some(&(t, e)) = series.iter().find(|s| !(s.1 > 0.0)) {
    return Err(Error::DegenerateFit(format!("non-positive energy {e} at tau = {t}")));
  }
  let tail = &series[series.len() / 2..];
  let n = tail.len() as f64;
  let mx = tail.iter().map(|s| s.0).sum::<f64>() / n;
  let my = tail.iter().map(|s| s.1.ln()).sum::<f64>() / n;
  let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
  for &(x, e) in tail {
    let (dx, dy) = (x - mx, e.ln() - my);
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  let rate = sxy / sxx;
  let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
  Ok((rate, r_squared))
}

/// Convenience: builds the grid-consistent zero background coefficient set.
pub fn zero_background_coeffs(grid: &RadialGrid, kappa: f64) -> CoeffSet {
  let n = grid.n_cells();
  CoeffSet { kappa, rho: grid.nodes().to_vec(), base: base_coeffs(grid, kappa), a: std::array::from_fn(|_| vec![0.0; n]) }
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn fit_examples() {
    let s: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.2, (-2.0 * i as f64 * 0.2).exp())).collect();
    let (r, q) = fit_decay_rate(&s).unwrap();
    assert!((r + 2.0).abs() < 1e-6 && q > 0.999999);
    let c: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0)).collect();
    assert_eq!(fit_decay_rate(&c).unwrap().0, 0.0);
    let p: Vec<(f64, f64)> =
      (0..200).map(|i| i as f64 * 0.1).map(|t| (t, (-2.0 * t).exp() * (1.0 + 0.01 * t.sin()))).collect();
    assert!((fit_decay_rate(&p).unwrap().0 + 2.0).abs() < 0.02);
    let mut bad = s.clone();
    bad[3].1 = 0.0;
    assert!(fit_decay_rate(&bad).is_err());
    assert!(fit_decay_rate(&s[..5]).is_err());
  }

  #[test]
  fn energy_params_validate() {
    assert!(EnergyParams::new(0.5, 2.0).is_ok());
    assert!(EnergyParams::new(1.5, 2.0).is_err());
    assert!(EnergyParams::new(0.5, 0.5).is_err());
  }
}
