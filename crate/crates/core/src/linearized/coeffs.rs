use super::CoeffSet;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::jet::{Jet, Scalar, Slots};

/// Background field and its five derivatives on the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSlots {
  pub w: Vec<f64>,
  pub w_tau: Vec<f64>,
  pub w_rho: Vec<f64>,
  pub w_rhorho: Vec<f64>,
  pub w_taurho: Vec<f64>,
  pub w_tautau: Vec<f64>,
}

impl BackgroundSlots {
  pub fn zero(n: usize) -> Self {
    BackgroundSlots {
      w: vec![0.0; n],
      w_tau: vec![0.0; n],
      w_rho: vec![0.0; n],
      w_rhorho: vec![0.0; n],
      w_taurho: vec![0.0; n],
      w_tautau: vec![0.0; n],
    }
  }

  /// Spatial derivatives by the grid stencils; `w_ττ` supplied by the caller.
  pub fn from_levels(grid: &RadialGrid, w: &[f64], w_tau: &[f64], w_tautau: &[f64]) -> Self {
    let d1 = grid.d1();
    BackgroundSlots {
      w: w.to_vec(),
      w_tau: w_tau.to_vec(),
      w_rho: d1.apply(w),
      w_rhorho: grid.d2().apply(w),
      w_taurho: d1.apply(w_tau),
      w_tautau: w_tautau.to_vec(),
    }
  }

  pub fn len(&self) -> usize {
    self.w.len()
  }

  pub fn is_empty(&self) -> bool {
    self.w.is_empty()
  }

  pub fn at(&self, j: usize) -> Slots<f64> {
    Slots {
      w: self.w[j],
      w_tau: self.w_tau[j],
      w_rho: self.w_rho[j],
      w_rhorho: self.w_rhorho[j],
      w_taurho: self.w_taurho[j],
      w_tautau: self.w_tautau[j],
    }
  }

  /// `(1−θ)·self + θ·other`.
  pub fn lerp(&self, other: &Self, theta: f64) -> Self {
    let m = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + theta * (y - x)).collect();
    BackgroundSlots {
      w: m(&self.w, &other.w),
      w_tau: m(&self.w_tau, &other.w_tau),
      w_rho: m(&self.w_rho, &other.w_rho),
      w_rhorho: m(&self.w_rhorho, &other.w_rhorho),
      w_taurho: m(&self.w_taurho, &other.w_taurho),
      w_tautau: m(&self.w_tautau, &other.w_tautau),
    }
  }
}

/// Coefficients of `ℒ⁽⁰⁾` at the nodes.
pub fn base_coeffs(grid: &RadialGrid, kappa: f64) -> [Vec<f64>; 6] {
  let k2 = kappa * kappa;
  let c = |f: &dyn Fn(f64) -> f64| grid.sample(f);
  [
    c(&|r| 1.0 + (k2 - 1.0) * r * r),
    c(&|r| (1.0 - k2) * (1.0 - r * r).powi(2)),
    c(&|r| 4.0 * k2 - 1.0 + (kappa - 1.0).powi(2) * r * r),
    c(&|r| 2.0 * r * (1.0 - k2) * (1.0 - r * r)),
    c(&|r| -(1.0 - k2) * (1.0 - r * r) / r),
    c(&|_| -4.0 * k2),
  ]
}

/// The closed-form corrections `a0(w)..a5(w)` at one node.
pub fn printed_a(rho: f64, kappa: f64, s: &Slots<f64>) -> [f64; 6] {
  let q = 1.0 - rho * rho;
  let sq = q.sqrt();
  let ir = 1.0 / rho;
  let Slots { w, w_tau: wt, w_rho: wr, w_rhorho: wrr, w_taurho: wtr, w_tautau: wtt } = *s;
  let k = kappa;
  let a0 = -2.0 * k * rho / sq * wr + wr * wr;
  let a1 = 2.0 * k * sq * (w + wt) - (w + wt).powi(2);
  let a2 = 2.0 * (ir * (wt - w) - wtr - k * (1.0 + 2.0 * ir) * sq) * wr
    + 2.0 * (k * (2.0 - rho * rho) / (q * sq) - wrr) * (w - wt)
    + wr * wr
    - 2.0 * k * sq * wrr
    + 2.0 * k * rho / sq * wtr;
  let a3 = 2.0 * k * rho / sq * (wt - w) - 2.0 * wr * (wt - w - k * sq);
  let a4 = 2.0 * k * ir / sq * ((1.0 + rho * rho) * w + 5.0 * rho * q * wr - wt - rho * rho * wtt)
    - 2.0 * wr * (wtt + wt - 2.0 * w)
    - 2.0 * wtr * (wt - w)
    + ir * (wt - w).powi(2)
    - 3.0 * ir * q * wr * wr;
  let a5 = 2.0 * k * ir / sq * (rho.powi(3) / q * (w - wt) + (1.0 + rho * rho) * wr - rho * wrr - rho * rho * wtr)
    - 2.0 * wr * wr
    - 2.0 * wrr * (w - wt)
    + 2.0 * wtr * wr
    - 2.0 * ir * wr * (wt - w);
  [a0, a1, a2, a3, a4, a5]
}

/// Linearized coefficients with the closed-form corrections.
pub fn assemble_coeffs(grid: &RadialGrid, kappa: f64, bg: &BackgroundSlots) -> Result<CoeffSet> {
  check_background(grid, bg)?;
  let n = grid.n_cells();
  let mut a: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
  for (j, &r) in grid.nodes().iter().enumerate() {
    let v = printed_a(r, kappa, &bg.at(j));
    for i in 0..6 {
      a[i][j] = v[i];
    }
  }
  Ok(CoeffSet { kappa, rho: grid.nodes().to_vec(), base: base_coeffs(grid, kappa), a })
}

/// Nonlinear forcing `f(ρ, w)`, evaluated over any polynomial scalar.
pub fn forcing_jet<T: Scalar>(rho: f64, kappa: f64, s: &Slots<T>) -> T {
  let q = 1.0 - rho * rho;
  let sq = q.sqrt();
  let q32 = q * sq;
  let k = kappa;
  let (w, wt, wr, wrr, wtr, wtt) = (s.w, s.w_tau, s.w_rho, s.w_rhorho, s.w_taurho, s.w_tautau);
  let d = w - wt;
  let d2 = d * d;
  let bracket = d2 + d * (2.0 * k * sq);
  let t1 = wr * wr * (2.0 * k * q32);
  let t2 = -(wr * (wtt + wt - w * 2.0) * (wr - T::lift(2.0 * k * rho / sq))) * q;
  let t3 = d2 * (k / sq);
  let t4 = -(wrr * bracket) * q;
  let t5 = -(wtr * (wt - w)) * (2.0 * k * rho * sq);
  let t6 = -(wr * wtr) * (2.0 * k * q32);
  let t7 = wr * wtr * (wt - w) * (2.0 * q);
  let t8 = -(wr * bracket) * (q / rho);
  let t9 = d2 * (k * sq);
  let t10 = -(wr * wr * wr - wr * wr * (3.0 * k * rho / sq)) * ((rho - 1.0 / rho) * q);
  let t11 = T::lift(-2.0 * k * (1.0 - k * k) / sq);
  t1 + t2 + t3 + t4 + t5 + t6 + t7 + t8 + t9 + t10 + t11
}

/// `f(ρ, w)` at one node.
pub fn forcing_at(rho: f64, kappa: f64, s: &Slots<f64>) -> f64 {
  forcing_jet(rho, kappa, s)
}

/// Pointwise `f(ρ, w)` including the non-autonomous term `−2κ(1−κ²)(1−ρ²)^{−1/2}`.
pub fn nonlinear_forcing(grid: &RadialGrid, kappa: f64, bg: &BackgroundSlots) -> Result<Vec<f64>> {
  check_background(grid, bg)?;
  Ok(grid.nodes().iter().enumerate().map(|(j, &r)| forcing_at(r, kappa, &bg.at(j))).collect())
}

/// Coefficients of the exact derivative of `w ↦ ℒ⁽⁰⁾w − f(ρ, w)` at the background,
/// obtained by jet evaluation of `f`.
pub fn consistent_coeffs(grid: &RadialGrid, kappa: f64, bg: &BackgroundSlots) -> Result<CoeffSet> {
  check_background(grid, bg)?;
  let n = grid.n_cells();
  let mut a: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
  for (j, &r) in grid.nodes().iter().enumerate() {
    let g: Jet = forcing_jet(r, kappa, &bg.at(j).seeded());
    let [f_w, f_t, f_r, f_rr, f_tr, f_tt] = g.grad;
    a[0][j] = -f_tt;
    a[1][j] = f_rr;
    a[2][j] = -f_t;
    a[3][j] = -f_tr;
    a[4][j] = -f_r;
    a[5][j] = -f_w;
  }
  Ok(CoeffSet { kappa, rho: grid.nodes().to_vec(), base: base_coeffs(grid, kappa), a })
}

fn check_background(grid: &RadialGrid, bg: &BackgroundSlots) -> Result<()> {
  if bg.len() != grid.n_cells() {
    return Err(Error::Domain(format!("background has {} nodes, grid has {}", bg.len(), grid.n_cells())));
  }
  if grid.nodes()[0] <= 0.0 {
    return Err(Error::Domain("coefficients are singular at rho = 0".into()));
  }
  Ok(())
}

/// Forcing of the unweighted `κ = 1` perturbation equation `v_ττ + 3v_τ − 4v = f(ρ, v)`.
pub fn forcing_unweighted<T: Scalar>(rho: f64, s: &Slots<T>) -> T {
  let q = 1.0 - rho * rho;
  let sq = q.sqrt();
  let (v, vt, vr, vrr, vtr, vtt) = (s.w, s.w_tau, s.w_rho, s.w_rhorho, s.w_taurho, s.w_tautau);
  let d = v - vt;
  let bracket = d * d + d * (2.0 * sq);
  vr * vr * (2.0 * sq) - vr * (vtt + vt - v * 2.0) * (vr - T::lift(2.0 * rho / sq)) + d * d * (1.0 / (q * sq))
    - vrr * bracket
    - vtr * (vt - v) * (2.0 * rho / sq)
    - vr * vtr * (2.0 * sq)
    + vr * vtr * (vt - v) * 2.0
    - vr * bracket * (1.0 / rho)
    + d * d * (1.0 / sq)
    - (vr * vr * vr - vr * vr * (3.0 * rho / sq)) * (rho - 1.0 / rho)
}
