use crate::error::{Error, Result};
use crate::grid::{RadialGrid, Tridiagonal};
use crate::random;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense first-order form of the mode operator on `(u1, u2) = (v, v_τ)`.
///
/// `a = a0 + a1`; `a0 = [[0, I], [ϖ1, ϖ2]]` carries the principal part, `a1` the compact remainder.
#[derive(Debug, Clone)]
pub struct OperatorMatrices {
  pub kappa: f64,
  pub grid: RadialGrid,
  pub a: DMatrix<f64>,
  pub a0: DMatrix<f64>,
  pub a1: DMatrix<f64>,
  pub varpi1: DMatrix<f64>,
  pub varpi2: DMatrix<f64>,
  pub a_rho: Vec<f64>,
  pub b_rho: Vec<f64>,
}

impl OperatorMatrices {
  pub fn dim(&self) -> usize {
    self.a.nrows()
  }

  /// Largest `|A − (A0 + A1)|` entry.
  pub fn split_defect(&self) -> f64 {
    (&self.a - (&self.a0 + &self.a1)).amax()
  }
}

fn dense(t: &Tridiagonal) -> DMatrix<f64> {
  let n = t.len();
  let mut m = DMatrix::zeros(n, n);
  for j in 0..n {
    m[(j, j)] = t.diag[j];
    if j > 0 {
      m[(j, j - 1)] = t.lower[j];
    }
    if j + 1 < n {
      m[(j, j + 1)] = t.upper[j];
    }
  }
  m
}

fn rows_scaled(m: DMatrix<f64>, c: &[f64]) -> DMatrix<f64> {
  let mut m = m;
  for (i, &ci) in c.iter().enumerate() {
    m.row_mut(i).scale_mut(ci);
  }
  m
}

fn block(tl: &DMatrix<f64>, tr: &DMatrix<f64>, bl: &DMatrix<f64>, br: &DMatrix<f64>) -> DMatrix<f64> {
  let n = tl.nrows();
  let mut m = DMatrix::zeros(2 * n, 2 * n);
  m.view_mut((0, 0), (n, n)).copy_from(tl);
  m.view_mut((0, n), (n, n)).copy_from(tr);
  m.view_mut((n, 0), (n, n)).copy_from(bl);
  m.view_mut((n, n), (n, n)).copy_from(br);
  m
}

/// Assembles `A`, `A0`, `A1` with the stepper's stencils (odd ghosts, blended `ρ⁻¹∂_ρ`).
pub fn assemble_operator(grid: &RadialGrid, kappa: f64) -> Result<OperatorMatrices> {
  if !(kappa > 0.0 && kappa < 1.0) {
    return Err(Error::Domain(format!("kappa must lie in (0,1), got {kappa}")));
  }
  let n = grid.n_cells();
  let r = grid.nodes();
  let k2 = kappa * kappa;
  let e = 1.0 - k2;
  let c0: Vec<f64> = r.iter().map(|&p| 1.0 - e * p * p).collect();
  let inv_c0: Vec<f64> = c0.iter().map(|c| 1.0 / c).collect();
  let c_rr: Vec<f64> = r.iter().map(|&p| e * (1.0 - p * p).powi(2)).collect();
  let c_r: Vec<f64> = r.iter().map(|&p| e * (1.0 - p * p)).collect();
  let c_tr: Vec<f64> = r.iter().map(|&p| 2.0 * e * p * (1.0 - p * p)).collect();
  let damp: Vec<f64> = r.iter().map(|&p| 4.0 * k2 - 1.0 + e * e * p * p).collect();
  let a_rho: Vec<f64> = r.iter().zip(&c0).map(|(&p, c)| -p * p * e * (1.0 - p * p) / c - p * p).collect();
  let b_rho: Vec<f64> = r
    .iter()
    .zip(&c0)
    .map(|(&p, c)| -4.0 * p * e * (1.0 - p * p) / c + 2.0 * p * e * e * (1.0 - p * p).powi(2) / (c * c))
    .collect();
  let drift: Vec<f64> = r.iter().zip(a_rho.iter().zip(&b_rho)).map(|(&p, (a, b))| a / p + b).collect();

  let d1 = dense(&grid.d1());
  let d2 = dense(&grid.d2());
  let s = dense(&grid.singular());
  let id = DMatrix::<f64>::identity(n, n);
  let zero = DMatrix::<f64>::zeros(n, n);

  let principal = rows_scaled(d2, &c_rr) + rows_scaled(s, &c_r);
  let lower = rows_scaled(&principal + DMatrix::from_diagonal(&(4.0 * k2 * nalgebra::DVector::from_element(n, 1.0))), &inv_c0);
  let varpi2 = rows_scaled(-DMatrix::from_diagonal(&nalgebra::DVector::from_vec(damp)) - rows_scaled(d1.clone(), &c_tr), &inv_c0);
  let drift_d1 = rows_scaled(d1, &drift);
  let varpi1 = rows_scaled(&principal + &drift_d1, &inv_c0) - &id;
  let a1_lower = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, inv_c0.iter().map(|c| 4.0 * k2 * c + 1.0)))
    - rows_scaled(drift_d1, &inv_c0);

  Ok(OperatorMatrices {
    kappa,
    grid: grid.clone(),
    a: block(&zero, &id, &lower, &varpi2),
    a0: block(&zero, &id, &varpi1, &varpi2),
    a1: block(&zero, &zero, &a1_lower, &zero),
    varpi1,
    varpi2,
    a_rho,
    b_rho,
  })
}

/// Eigenvalues of a real square matrix by real Schur decomposition, sorted by real part (largest first).
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
  let dim = m.nrows();
  if dim > 1000 {
    return Err(Error::Domain(format!("matrix dimension {dim} exceeds the dense solver budget of 1000")));
  }
  let iterations = 30 * dim;
  let schur = nalgebra::Schur::try_new(m.clone(), 1e-10, iterations).ok_or(Error::EigenNonConvergence { iterations })?;
  let mut ev: Vec<Complex64> = schur.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
  ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
  Ok(ev)
}

/// Spectrum of `A`.
pub fn discrete_spectrum(m: &OperatorMatrices) -> Result<Vec<Complex64>> {
  eigenvalues(&m.a)
}

pub fn max_real_part(ev: &[Complex64]) -> f64 {
  ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Second-order finite differences, one-sided at the ends.
fn gradient(v: &[f64], h: f64) -> Vec<f64> {
  let n = v.len();
  let mut g = vec![0.0; n];
  g[0] = (v[1] - v[0]) / h;
  g[n - 1] = (v[n - 1] - v[n - 2]) / h;
  for j in 1..n - 1 {
    g[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
  }
  g
}

/// `(x|y)` with the weighted derivative terms: `∫ x1y1 + ρ²x1'y1' + ρ⁴x1''y1'' + x2y2 + ρ²x2'y2'`.
pub fn energy_inner(grid: &RadialGrid, x: &[f64], y: &[f64]) -> f64 {
  let n = grid.n_cells();
  let h = grid.spacing();
  let r = grid.nodes();
  let (x1, x2) = x.split_at(n);
  let (y1, y2) = y.split_at(n);
  let (dx1, dy1, dx2, dy2) = (gradient(x1, h), gradient(y1, h), gradient(x2, h), gradient(y2, h));
  let (ddx1, ddy1) = (gradient(&dx1, h), gradient(&dy1, h));
  let f: Vec<f64> = (0..n)
    .map(|j| {
      let p2 = r[j] * r[j];
      x1[j] * y1[j] + p2 * dx1[j] * dy1[j] + p2 * p2 * ddx1[j] * ddy1[j] + x2[j] * y2[j] + p2 * dx2[j] * dy2[j]
    })
    .collect();
  grid.integrate(&f)
}

/// Largest `(A0 u | u)` over `trials` random smooth boundary-respecting `u`.
pub fn dissipativity_check(m: &OperatorMatrices, trials: usize, seed: u64) -> Result<f64> {
  if trials == 0 {
    return Err(Error::Domain("trials must be at least 1".into()));
  }
  let n = m.grid.n_cells();
  let mut rng = random::stream(seed, 0);
  let mut worst = f64::NEG_INFINITY;
  for _ in 0..trials {
    let mut u = random::smooth_field(&m.grid, 5, &mut rng);
    u.extend(random::smooth_field(&m.grid, 5, &mut rng));
    let au = &m.a0 * nalgebra::DVector::from_vec(u.clone());
    worst = worst.max(energy_inner(&m.grid, au.as_slice(), &u));
  }
  debug_assert_eq!(2 * n, m.dim());
  Ok(worst)
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn split_and_identity_block() {
    let g = RadialGrid::new(0.5, 40).unwrap();
    let m = assemble_operator(&g, 0.95).unwrap();
    assert!(m.split_defect() < 1e-12);
    let n = 40;
    for i in 0..n {
      for j in 0..n {
        assert_eq!(m.a[(i, n + j)], if i == j { 1.0 } else { 0.0 });
        assert_eq!(m.a[(i, j)], 0.0);
      }
    }
    assert!(assemble_operator(&g, 1.0).is_err());
  }

  #[test]
  fn action_matches_continuum_to_second_order() {
    // u1 = cos(πρ)·ρ²·(σ−ρ)... smooth test data with odd-ghost-compatible endpoints: sin modes
    let kappa = 0.9;
    let k2 = kappa * kappa;
    let sigma = 0.5;
    let w = std::f64::consts::PI / sigma;
    let exact = |p: f64| {
      // u1 = u2 = sin(wρ)
      let (s, c) = ((w * p).sin(), (w * p).cos());
      let c0 = 1.0 + (k2 - 1.0) * p * p;
      let top = (1.0 - k2) * (1.0 - p * p).powi(2) * (-w * w * s) + (1.0 - k2) * (1.0 - p * p) * w * c / p + 4.0 * k2 * s;
      let bot = -(4.0 * k2 - 1.0 + (k2 - 1.0).powi(2) * p * p) * s - 2.0 * (1.0 - k2) * p * (1.0 - p * p) * w * c;
      (top + bot) / c0
    };
    let err = |cells: usize| {
      let g = RadialGrid::new(sigma, cells).unwrap();
      let m = assemble_operator(&g, kappa).unwrap();
      let mut u = g.sine_mode(1);
      u.extend(g.sine_mode(1));
      let au = &m.a * nalgebra::DVector::from_vec(u);
      // interior window away from the blended origin cells
      g.nodes()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.1 && p < 0.45)
        .map(|(j, &p)| (au[cells + j] - exact(p)).abs())
        .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(50), err(100));
    assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{e1} {e2}");
  }

  #[test]
  fn spectrum_comes_in_conjugate_pairs() {
    let g = RadialGrid::new(0.5, 30).unwrap();
    let m = assemble_operator(&g, 0.95).unwrap();
    let ev = discrete_spectrum(&m).unwrap();
    assert_eq!(ev.len(), 60);
    for z in ev.iter().filter(|z| z.im.abs() > 1e-9) {
      assert!(ev.iter().any(|w| (w - z.conj()).norm() < 1e-8));
    }
    let known = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, 0.0]);
    let ev = eigenvalues(&known).unwrap();
    assert!((ev[0] - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    assert!((ev[1] - Complex64::new(0.0, -2.0)).norm() < 1e-12);
  }

  #[test]
  fn zero_field_has_zero_inner_product() {
    let g = RadialGrid::new(0.5, 30).unwrap();
    let zero = vec![0.0; 60];
    assert_eq!(energy_inner(&g, &zero, &zero), 0.0);
    let m = assemble_operator(&g, 0.95).unwrap();
    assert!(dissipativity_check(&m, 0, 1).is_err());
  }
}
