//! Cell-centred radial grid on `(0, σ]` with Dirichlet ghost stencils.

use crate::error::{domain, Result};
use serde::{Deserialize, Serialize};

/// Nodes `ρ_j = (j + ½)h`, `h = σ/N`. Node 0 is never at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
  sigma: f64,
  n_cells: usize,
  h: f64,
  nodes: Vec<f64>,
}

/// Tridiagonal stencil: `(Tv)_j = lower_j v_{j-1} + diag_j v_j + upper_j v_{j+1}`,
/// with out-of-range neighbours already folded in through the odd ghost values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
  pub lower: Vec<f64>,
  pub diag: Vec<f64>,
  pub upper: Vec<f64>,
}

impl Tridiagonal {
  pub fn len(&self) -> usize {
    self.diag.len()
  }

  pub fn is_empty(&self) -> bool {
    self.diag.is_empty()
  }

  pub fn apply(&self, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    self.apply_into(v, &mut out);
    out
  }

  pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
    let n = self.len();
    for j in 0..n {
      let mut s = self.diag[j] * v[j];
      if j > 0 {
        s += self.lower[j] * v[j - 1];
      }
      if j + 1 < n {
        s += self.upper[j] * v[j + 1];
      }
      out[j] = s;
    }
  }

  /// Row-wise scaling `diag(c)·T`.
  pub fn scaled(&self, c: &[f64]) -> Tridiagonal {
    Tridiagonal {
      lower: self.lower.iter().zip(c).map(|(a, b)| a * b).collect(),
      diag: self.diag.iter().zip(c).map(|(a, b)| a * b).collect(),
      upper: self.upper.iter().zip(c).map(|(a, b)| a * b).collect(),
    }
  }

  pub fn add(&self, other: &Tridiagonal) -> Tridiagonal {
    let z = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
    Tridiagonal {
      lower: z(&self.lower, &other.lower),
      diag: z(&self.diag, &other.diag),
      upper: z(&self.upper, &other.upper),
    }
  }

  pub fn add_diagonal(&mut self, c: &[f64]) {
    for (d, x) in self.diag.iter_mut().zip(c) {
      *d += x;
    }
  }

  /// Dense row-major copy.
  pub fn to_dense(&self) -> Vec<Vec<f64>> {
    let n = self.len();
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
      m[j][j] = self.diag[j];
      if j > 0 {
        m[j][j - 1] = self.lower[j];
      }
      if j + 1 < n {
        m[j][j + 1] = self.upper[j];
      }
    }
    m
  }

  /// Thomas algorithm. The systems assembled here are diagonally dominant.
  pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
    let n = self.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = self.diag[0];
    c[0] = if n > 1 { self.upper[0] / beta } else { 0.0 };
    d[0] = rhs[0] / beta;
    for j in 1..n {
      beta = self.diag[j] - self.lower[j] * c[j - 1];
      if j + 1 < n {
        c[j] = self.upper[j] / beta;
      }
      d[j] = (rhs[j] - self.lower[j] * d[j - 1]) / beta;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for j in (0..n - 1).rev() {
      x[j] = d[j] - c[j] * x[j + 1];
    }
    x
  }
}

impl RadialGrid {
  pub fn new(sigma: f64, n_cells: usize) -> Result<Self> {
    if !(sigma > 0.0 && sigma < 1.0) {
      return domain(format!("sigma must lie in (0,1), got {sigma}"));
    }
    if n_cells < 4 {
      return domain(format!("n_cells must be at least 4, got {n_cells}"));
    }
    let h = sigma / n_cells as f64;
    let nodes = (0..n_cells).map(|j| (j as f64 + 0.5) * h).collect();
    Ok(RadialGrid { sigma, n_cells, h, nodes })
  }

  pub fn sigma(&self) -> f64 {
    self.sigma
  }

  pub fn n_cells(&self) -> usize {
    self.n_cells
  }

  pub fn spacing(&self) -> f64 {
    self.h
  }

  pub fn nodes(&self) -> &[f64] {
    &self.nodes
  }

  /// Samples `f` on the nodes.
  pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
    self.nodes.iter().map(|&r| f(r)).collect()
  }

  /// Centred first derivative with odd ghosts `v_{-1} = −v_0`, `v_N = −v_{N−1}`.
  pub fn d1(&self) -> Tridiagonal {
    let n = self.n_cells;
    let k = 0.5 / self.h;
    let mut t = Tridiagonal { lower: vec![-k; n], diag: vec![0.0; n], upper: vec![k; n] };
    t.lower[0] = 0.0;
    t.diag[0] = k;
    t.upper[n - 1] = 0.0;
    t.diag[n - 1] = -k;
    t
  }

  /// Centred second derivative with the same ghosts.
  pub fn d2(&self) -> Tridiagonal {
    let n = self.n_cells;
    let k = 1.0 / (self.h * self.h);
    let mut t = Tridiagonal { lower: vec![k; n], diag: vec![-2.0 * k; n], upper: vec![k; n] };
    t.lower[0] = 0.0;
    t.diag[0] = -3.0 * k;
    t.upper[n - 1] = 0.0;
    t.diag[n - 1] = -3.0 * k;
    t
  }

  /// Weight of the limiting replacement `ρ⁻¹v_ρ → v_ρρ`: `max(0, 1 − ρ/(2h))`.
  pub fn blend_weights(&self) -> Vec<f64> {
    self.nodes.iter().map(|&r| (1.0 - r / (2.0 * self.h)).max(0.0)).collect()
  }

  /// Discrete `ρ⁻¹∂_ρ`, blended with `∂_ρρ` for `ρ < 2h`.
  pub fn singular(&self) -> Tridiagonal {
    let w = self.blend_weights();
    let inv: Vec<f64> = self.nodes.iter().zip(&w).map(|(r, w)| (1.0 - w) / r).collect();
    self.d1().scaled(&inv).add(&self.d2().scaled(&w))
  }

  /// Derivative at `ρ = 0` and `ρ = σ` implied by the ghost values.
  pub fn boundary_slopes(&self, v: &[f64]) -> (f64, f64) {
    let n = self.n_cells;
    (2.0 * v[0] / self.h, -2.0 * v[n - 1] / self.h)
  }

  /// Trapezoid rule on `[0, σ]` over the nodes plus linearly extrapolated end values.
  pub fn integrate(&self, f: &[f64]) -> f64 {
    let n = self.n_cells;
    let h = self.h;
    let left = 1.5 * f[0] - 0.5 * f[1];
    let right = 1.5 * f[n - 1] - 0.5 * f[n - 2];
    let mut s = 0.25 * h * (left + f[0]) + 0.25 * h * (f[n - 1] + right);
    for j in 0..n - 1 {
      s += 0.5 * h * (f[j] + f[j + 1]);
    }
    s
  }

  /// `∫ f g dρ`.
  pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
    let p: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    self.integrate(&p)
  }

  /// Discrete `H^level` norm, `level ≤ 2`, derivatives by the ghost stencils.
  pub fn sobolev_norm(&self, v: &[f64], level: u8) -> Result<f64> {
    if level > 2 {
      return domain(format!("sobolev level must be at most 2, got {level}"));
    }
    let mut s = self.inner(v, v);
    if level >= 1 {
      let dv = self.d1().apply(v);
      s += self.inner(&dv, &dv);
    }
    if level >= 2 {
      let ddv = self.d2().apply(v);
      s += self.inner(&ddv, &ddv);
    }
    Ok(s.max(0.0).sqrt())
  }

  /// Dirichlet sine mode `sin(mπρ/σ)` on the nodes.
  pub fn sine_mode(&self, m: usize) -> Vec<f64> {
    let k = m as f64 * std::f64::consts::PI / self.sigma;
    self.sample(|r| (k * r).sin())
  }
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn nodes_are_shifted_and_uniform() {
    let g = RadialGrid::new(0.5, 100).unwrap();
    assert!(g.nodes()[0] > 0.0);
    assert!((g.nodes()[0] - 0.0025).abs() < 1e-15);
    for w in g.nodes().windows(2) {
      assert!(((w[1] - w[0]) - g.spacing()).abs() < 1e-14);
    }
    assert!((g.nodes()[99] - (0.5 - 0.0025)).abs() < 1e-14);
  }

  #[test]
  fn rejects_bad_parameters() {
    assert!(RadialGrid::new(1.0, 10).is_err());
    assert!(RadialGrid::new(0.5, 2).is_err());
  }

  #[test]
  fn sine_norm_matches_integral() {
    let g = RadialGrid::new(0.5, 2000).unwrap();
    let v = g.sine_mode(1);
    let n = g.sobolev_norm(&v, 0).unwrap();
    assert!((n - (0.25f64).sqrt()).abs() < 1e-4, "{n}");
  }

  #[test]
  fn norm_is_homogeneous() {
    let g = RadialGrid::new(0.5, 64).unwrap();
    let v = g.sample(|r| r * (0.5 - r) * (1.0 + r));
    for level in 0..=2 {
      let a = g.sobolev_norm(&v, level).unwrap();
      let cv: Vec<f64> = v.iter().map(|x| -3.5 * x).collect();
      let b = g.sobolev_norm(&cv, level).unwrap();
      assert!((b - 3.5 * a).abs() <= 1e-12 * b);
    }
    assert_eq!(g.sobolev_norm(&vec![0.0; 64], 2).unwrap(), 0.0);
    assert!(g.sobolev_norm(&v, 3).is_err());
  }

  #[test]
  fn stencils_are_second_order_in_the_interior() {
    let mut errs = vec![];
    for n in [100, 200] {
      let g = RadialGrid::new(0.5, n).unwrap();
      let v = g.sample(|r| (2.0 * std::f64::consts::PI * r).sin());
      let d2 = g.d2().apply(&v);
      let s = g.singular().apply(&v);
      let mut e = 0.0f64;
      for (j, &r) in g.nodes().iter().enumerate() {
        if (0.1..0.4).contains(&r) {
          let k = 2.0 * std::f64::consts::PI;
          e = e.max((d2[j] + k * k * (k * r).sin()).abs());
          e = e.max((s[j] - k * (k * r).cos() / r).abs());
        }
      }
      errs.push(e);
    }
    let ratio = errs[0] / errs[1];
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
  }

  #[test]
  fn ghost_stencils_match_odd_extension_at_both_ends() {
    // sin(πρ/σ) is odd about both ends, so the ghost values are exact samples
    let g = RadialGrid::new(0.5, 400).unwrap();
    let k = std::f64::consts::PI / 0.5;
    let v = g.sine_mode(1);
    let (d1, d2) = (g.d1().apply(&v), g.d2().apply(&v));
    for j in [0, 1, 398, 399] {
      let r = g.nodes()[j];
      assert!((d1[j] - k * (k * r).cos()).abs() < 1e-4, "d1 at {j}");
      assert!((d2[j] + k * k * (k * r).sin()).abs() < 1e-3, "d2 at {j}");
    }
  }

  #[test]
  fn thomas_solves_tridiagonal() {
    let g = RadialGrid::new(0.5, 10).unwrap();
    let mut t = g.d2().scaled(&vec![-1e-4; 10]);
    t.add_diagonal(&vec![1.0; 10]);
    let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
    let b = t.apply(&x);
    let y = t.solve(&b);
    for (a, b) in x.iter().zip(&y) {
      assert!((a - b).abs() < 1e-12);
    }
  }

  #[test]
  fn integrate_is_exact_for_linear() {
    let g = RadialGrid::new(0.5, 17).unwrap();
    let f = g.sample(|r| 3.0 * r + 1.0);
    assert!((g.integrate(&f) - (1.5 * 0.25 + 0.5)).abs() < 1e-14);
  }
}
