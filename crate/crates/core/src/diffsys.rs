//! Companion form of the four-term coefficient recurrence and its exact reduction to
//! diagonal-plus-perturbation form.

use crate::error::{Error, Result};
use crate::spectral::recurrence_weights;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};
use std::fmt;
use std::ops::Mul;

/// Field used by the 4×4 matrices: exact rationals or floating point.
pub trait Scalar: Clone + Num + fmt::Debug {
  fn int(i: i64) -> Self;
}

impl Scalar for BigRational {
  fn int(i: i64) -> Self {
    BigRational::from_integer(BigInt::from(i))
  }
}

impl Scalar for f64 {
  fn int(i: i64) -> Self {
    i as f64
  }
}

impl Scalar for Complex64 {
  fn int(i: i64) -> Self {
    Complex64::new(i as f64, 0.0)
  }
}

#[derive(Clone, PartialEq)]
pub struct Matrix4<T>(pub [[T; 4]; 4]);

/// Exact 4×4 matrix.
pub type RationalMatrix4 = Matrix4<BigRational>;

impl<T: fmt::Display> fmt::Debug for Matrix4<T> {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for row in &self.0 {
      let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
      writeln!(f, "[{}]", cells.join(", "))?;
    }
    Ok(())
  }
}

impl<T: Scalar> Matrix4<T> {
  pub fn from_ints(m: [[i64; 4]; 4]) -> Self {
    Matrix4(m.map(|r| r.map(T::int)))
  }

  pub fn zero() -> Self {
    Self::from_ints([[0; 4]; 4])
  }

  pub fn identity() -> Self {
    Self::diag([T::one(), T::one(), T::one(), T::one()])
  }

  pub fn diag(d: [T; 4]) -> Self {
    let mut m = Self::zero();
    for (i, x) in d.into_iter().enumerate() {
      m.0[i][i] = x;
    }
    m
  }

  pub fn apply(&self, v: &[T; 4]) -> [T; 4] {
    std::array::from_fn(|i| (0..4).fold(T::zero(), |s, k| s + self.0[i][k].clone() * v[k].clone()))
  }

  pub fn add(&self, o: &Self) -> Self {
    Matrix4(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j].clone() + o.0[i][j].clone())))
  }

  pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Matrix4<U> {
    Matrix4(std::array::from_fn(|i| std::array::from_fn(|j| f(&self.0[i][j]))))
  }

  /// First entry (row-major) where the two differ.
  pub fn first_difference(&self, o: &Self) -> Option<(usize, usize)> {
    (0..16).map(|k| (k / 4, k % 4)).find(|&(i, j)| self.0[i][j] != o.0[i][j])
  }
}

impl<T: Scalar> Mul for &Matrix4<T> {
  type Output = Matrix4<T>;
  fn mul(self, o: &Matrix4<T>) -> Matrix4<T> {
    Matrix4(std::array::from_fn(|i| {
      std::array::from_fn(|j| (0..4).fold(T::zero(), |s, k| s + self.0[i][k].clone() * o.0[k][j].clone()))
    }))
  }
}

fn product<T: Scalar>(ms: &[&Matrix4<T>]) -> Matrix4<T> {
  ms.iter().fold(Matrix4::identity(), |acc, m| &acc * m)
}

fn rat(p: i64, q: i64) -> BigRational {
  BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
  q.to_f64().unwrap_or(f64::NAN)
}

/// Constant part of the companion matrix; eigenvalues 1, 1, −1, −1.
pub fn companion_constant<T: Scalar>() -> Matrix4<T> {
  Matrix4::from_ints([[0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 2, 0]])
}

pub fn jordan<T: Scalar>() -> Matrix4<T> {
  Matrix4::from_ints([[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, -1, 1], [0, 0, 0, -1]])
}

pub fn basis<T: Scalar>() -> Matrix4<T> {
  Matrix4::from_ints([[1, 0, 1, 0], [1, 1, -1, 1], [1, 2, 1, -2], [1, 3, -1, 3]])
}

/// Inverse of [`basis`] as printed (quarters).
pub fn basis_inverse<T: Scalar>() -> Matrix4<T> {
  let q = Matrix4::<T>::from_ints([[2, 3, 0, -1], [-1, -1, 1, 1], [2, -3, 0, 1], [1, -1, -1, 1]]);
  q.map(|x| x.clone() / T::int(4))
}

pub fn shear1<T: Scalar>() -> Matrix4<T> {
  Matrix4::from_ints([[1, 2, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
}

pub fn shear1_inverse<T: Scalar>() -> Matrix4<T> {
  Matrix4::from_ints([[-1, 2, 0, 0], [1, -1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
}

pub fn shear2<T: Scalar>() -> Matrix4<T> {
  Matrix4::from_ints([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, -2], [0, 0, 1, 1]])
}

pub fn shear2_inverse<T: Scalar>() -> Matrix4<T> {
  Matrix4::from_ints([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 2], [0, 0, -1, -1]])
}

/// `[[1, 1], [−1, −(1+1/k)]]` placed in the upper (`upper = true`) or lower diagonal block.
fn index_block<T: Scalar>(k: T, upper: bool) -> Matrix4<T> {
  let mut m = Matrix4::identity();
  let o = if upper { 0 } else { 2 };
  m.0[o][o] = T::one();
  m.0[o][o + 1] = T::one();
  m.0[o + 1][o] = T::zero() - T::one();
  m.0[o + 1][o + 1] = T::zero() - (T::one() + T::one() / k);
  m
}

/// Printed inverse of [`index_block`]: `[[k+1, k], [−k, −k]]`.
fn index_block_inverse<T: Scalar>(k: T, upper: bool) -> Matrix4<T> {
  let mut m = Matrix4::identity();
  let o = if upper { 0 } else { 2 };
  m.0[o][o] = k.clone() + T::one();
  m.0[o][o + 1] = k.clone();
  m.0[o + 1][o] = T::zero() - k.clone();
  m.0[o + 1][o + 1] = T::zero() - k;
  m
}

pub fn window3<T: Scalar>(k: T) -> Matrix4<T> {
  index_block(k, true)
}

pub fn window3_inverse<T: Scalar>(k: T) -> Matrix4<T> {
  index_block_inverse(k, true)
}

pub fn window4<T: Scalar>(k: T) -> Matrix4<T> {
  index_block(k, false)
}

pub fn window4_inverse<T: Scalar>(k: T) -> Matrix4<T> {
  index_block_inverse(k, false)
}

/// Left factor `P4⁻¹(n+1) P3⁻¹(n+1) P2⁻¹ P1⁻¹`.
pub fn left_factor<T: Scalar>(n: T) -> Matrix4<T> {
  let k = n + T::one();
  product(&[&window4_inverse(k.clone()), &window3_inverse(k), &shear2_inverse(), &shear1_inverse()])
}

/// Right factor `P1 P2 P3(n) P4(n)`.
pub fn right_factor<T: Scalar>(n: T) -> Matrix4<T> {
  product(&[&shear1(), &shear2(), &window3(n.clone()), &window4(n)])
}

fn check_equal(got: &RationalMatrix4, want: &RationalMatrix4, what: &str) -> Result<()> {
  match got.first_difference(want) {
    None => Ok(()),
    Some((i, j)) => Err(Error::Identity {
      row: i + 1,
      col: j + 1,
      detail: format!("{what}: got {}, expected {}", got.0[i][j], want.0[i][j]),
    }),
  }
}

fn det4(m: &RationalMatrix4) -> BigRational {
  // Laplace expansion along the first row
  let minor = |c: usize| -> BigRational {
    let cols: Vec<usize> = (0..4).filter(|&x| x != c).collect();
    let e = |r: usize, k: usize| m.0[r][cols[k]].clone();
    e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1)) - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
      + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0))
  };
  (0..4).fold(BigRational::int(0), |s, c| {
    let t = m.0[0][c].clone() * minor(c);
    if c % 2 == 0 {
      s + t
    } else {
      s - t
    }
  })
}

/// Outcome of the exact Jordan-form identities.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanReport {
  pub basis_times_inverse: RationalMatrix4,
  pub similarity: RationalMatrix4,
  pub det_minus_one: BigRational,
  pub det_plus_one: BigRational,
}

/// Checks `P P⁻¹ = I`, `P⁻¹ D P = J` and `det(D ∓ I) = 0` exactly.
pub fn jordan_verify() -> Result<JordanReport> {
  let p = basis::<BigRational>();
  let pi = basis_inverse::<BigRational>();
  let d = companion_constant::<BigRational>();
  let id = RationalMatrix4::identity();
  let pp = &p * &pi;
  check_equal(&pp, &id, "P P^-1")?;
  let sim = product(&[&pi, &d, &p]);
  check_equal(&sim, &jordan(), "P^-1 D P")?;
  let minus = d.add(&id.map(|x| -x.clone()));
  let plus = d.add(&id);
  let report = JordanReport { basis_times_inverse: pp, similarity: sim, det_minus_one: det4(&minus), det_plus_one: det4(&plus) };
  for (v, what) in [(&report.det_minus_one, "det(D - I)"), (&report.det_plus_one, "det(D + I)")] {
    if *v != BigRational::int(0) {
      return Err(Error::Identity { row: 0, col: 0, detail: format!("{what} = {v}") });
    }
  }
  Ok(report)
}

/// `diag(1, 1+1/n, −1, −(1+1/n))`.
pub fn diagonal_target(n: u64) -> RationalMatrix4 {
  let g = BigRational::int(1) + rat(1, n as i64);
  RationalMatrix4::diag([BigRational::int(1), g.clone(), BigRational::int(-1), -g])
}

/// `M1(n) J M2(n)`, checked exactly against [`diagonal_target`].
pub fn window_transform(n: u64) -> Result<RationalMatrix4> {
  if n == 0 {
    return Err(Error::Domain("window transform needs n >= 1".into()));
  }
  let k = BigRational::int(n as i64);
  let m = product(&[&left_factor(k.clone()), &jordan(), &right_factor(k)]);
  check_equal(&m, &diagonal_target(n), &format!("M1 J M2 at n = {n}"))?;
  Ok(m)
}

/// `M1(n) P⁻¹ T(n) P M2(n)` for the perturbation `T` with last row `(−p2, 0, −p1, 0)`.
pub fn ttilde_from_weights(n: u64, p1: Complex64, p2: Complex64) -> Matrix4<Complex64> {
  let nf = n as f64;
  let left = product(&[&left_factor(nf), &basis_inverse()]).map(|&x| Complex64::new(x, 0.0));
  let right = product(&[&basis(), &right_factor(nf)]).map(|&x| Complex64::new(x, 0.0));
  let mut t = Matrix4::<Complex64>::zero();
  t.0[3][0] = -p2;
  t.0[3][2] = -p1;
  product(&[&left, &t, &right])
}

pub fn ttilde_build(n: u64, nu: Complex64, kappa: f64) -> Result<Matrix4<Complex64>> {
  let (p1, p2) = recurrence_weights(n as usize, nu, kappa)?;
  Ok(ttilde_from_weights(n, p1, p2))
}

/// The sixteen closed-form entries as printed, evaluated in floating point.
pub fn ttilde_printed(n: u64, p1: Complex64, p2: Complex64) -> Matrix4<Complex64> {
  let n = n as f64;
  let (a, b) = (p1, p2);
  let q = 0.25;
  Matrix4([
    [
      (2.0 * a + b) * (n + 4.0) * q,
      (a * (n + 16.0 / n + 8.0) + b * (n + 8.0 / n + 6.0)) * q,
      (a * (5.0 * n + 2.0) + b * (2.0 * (n + 1.0))) * q,
      (a * (5.0 * n * n - 2.0 * n - 16.0) + 2.0 * (n * n - 4.0)) / (4.0 * n),
    ],
    [
      -(a * 5.0 + b * 3.0) * (n + 1.0) * q,
      (-a * (n + 1.0) * (5.0 + 8.0 / n) - b * (3.0 + 4.0 / n)) * q,
      (a + b) * (n + 1.0) * q,
      (a * (n * n + 5.0 * n + 4.0) + b * (n * n + 3.0 * n + 2.0)) / (4.0 * n),
    ],
    [
      (a + b) * (n + 4.0) * q,
      (a * (1.0 + 4.0 / n) + b * (1.0 + 2.0 / n)) * (n + 4.0) * q,
      -(a + b) * (n + 4.0) * q,
      -(a * 5.0 + b * 3.0) * (n + 4.0) / (4.0 * n),
    ],
    [
      -(a + b) * (n + 1.0) * q,
      -(a * (1.0 + 4.0 / n) + b * (1.0 + 2.0 / n)) * (n + 1.0) * q,
      (a - b * 3.0) * (n + 1.0) * q,
      (a * 5.0 - b * 7.0) * (n + 1.0) / (4.0 * n),
    ],
  ])
}

/// Entrywise comparison of the matrix product with the printed closed form.
#[derive(Debug, Clone)]
pub struct TtildeComparison {
  pub product: Matrix4<Complex64>,
  pub printed: Matrix4<Complex64>,
  /// `(row, col, relative difference)` for entries beyond the tolerance, 1-based.
  pub mismatches: Vec<(usize, usize, f64)>,
}

pub fn ttilde_compare(n: u64, nu: Complex64, kappa: f64, rtol: f64) -> Result<TtildeComparison> {
  let (p1, p2) = recurrence_weights(n as usize, nu, kappa)?;
  let product = ttilde_from_weights(n, p1, p2);
  let printed = ttilde_printed(n, p1, p2);
  let mut mismatches = Vec::new();
  for i in 0..4 {
    for j in 0..4 {
      let (x, y) = (product.0[i][j], printed.0[i][j]);
      let rel = (x - y).norm() / x.norm().max(y.norm()).max(f64::MIN_POSITIVE);
      if rel > rtol {
        mismatches.push((i + 1, j + 1, rel));
      }
    }
  }
  Ok(TtildeComparison { product, printed, mismatches })
}

/// `z_n = (a_n, a_{n+1}, a_{n+2}, a_{n+3})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionState {
  pub z: [Complex64; 4],
  pub n: usize,
  pub nu: Complex64,
  pub kappa: f64,
}

/// One step with given weights: shift and append `(2−p1)z₃ − (1+p2)z₁`.
pub fn companion_apply(z: &[Complex64; 4], p1: Complex64, p2: Complex64) -> [Complex64; 4] {
  [z[1], z[2], z[3], (Complex64::new(2.0, 0.0) - p1) * z[2] - (p2 + 1.0) * z[0]]
}

pub fn companion_step(s: &CompanionState) -> Result<CompanionState> {
  let (p1, p2) = recurrence_weights(s.n, s.nu, s.kappa)?;
  Ok(CompanionState { z: companion_apply(&s.z, p1, p2), n: s.n + 1, ..s.clone() })
}

/// `log‖y_n‖₂` for `n = 1..=n_max` along `y_{n+1} = (D̃(n) + T̃(n)) y_n`, `y_1 = e_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProfile {
  pub start: usize,
  pub diagonal_only: bool,
  pub n: Vec<u64>,
  pub log_norm: Vec<f64>,
}

impl GrowthProfile {
  /// First index after which `log_norm` never decreases, if any.
  pub fn monotone_from(&self) -> Option<u64> {
    let k = self.log_norm.windows(2).rposition(|w| w[1] < w[0]).map_or(0, |p| p + 1);
    self.n.get(k).copied()
  }
}

/// Iterates with renormalization each step; the log norm is accumulated, so nothing overflows.
pub fn growth_profile(nu: Complex64, kappa: f64, n_max: u64, start: usize, diagonal_only: bool) -> Result<GrowthProfile> {
  if n_max < 2 {
    return Err(Error::Domain(format!("n_max must be at least 2, got {n_max}")));
  }
  if start > 3 {
    return Err(Error::Domain(format!("start index must be 0..=3, got {start}")));
  }
  let mut y = [Complex64::new(0.0, 0.0); 4];
  y[start] = Complex64::new(1.0, 0.0);
  let mut log_scale = 0.0;
  let mut out = GrowthProfile { start, diagonal_only, n: vec![1], log_norm: vec![0.0] };
  for n in 1..n_max {
    let g = 1.0 + 1.0 / n as f64;
    let d = Matrix4::diag([1.0, g, -1.0, -g].map(|x| Complex64::new(x, 0.0)));
    let step = if diagonal_only { d } else { d.add(&ttilde_build(n, nu, kappa)?) };
    y = step.apply(&y);
    let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
      return Err(Error::NonFinite { tau: n as f64 });
    }
    y = y.map(|z| z / norm);
    log_scale += norm.ln();
    out.n.push(n + 1);
    out.log_norm.push(log_scale);
  }
  Ok(out)
}

#[cfg(test)]
mod tests {
  use super::*;
  use crate::spectral::{stable_root_check, FrobeniusSeries};

  fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
  }

  #[test]
  fn jordan_identities_hold_exactly() {
    let r = jordan_verify().unwrap();
    assert_eq!(r.basis_times_inverse, RationalMatrix4::identity());
    assert_eq!(r.det_minus_one, BigRational::int(0));
  }

  #[test]
  fn mismatch_names_the_entry() {
    let mut a = RationalMatrix4::identity();
    a.0[2][1] = rat(1, 3);
    let e = check_equal(&a, &RationalMatrix4::identity(), "probe").unwrap_err();
    assert!(matches!(e, Error::Identity { row: 3, col: 2, .. }));
  }

  #[test]
  fn window_transform_examples() {
    let m = window_transform(1).unwrap();
    assert_eq!(m, RationalMatrix4::diag([1, 2, -1, -2].map(BigRational::int)));
    let m = window_transform(3).unwrap();
    assert_eq!(m.0[1][1], rat(4, 3));
    assert_eq!(m.0[3][3], rat(-4, 3));
    assert!(window_transform(0).is_err());
  }

  #[test]
  fn printed_factor_inverses_are_inverses() {
    for k in 1..6 {
      let k = BigRational::int(k);
      assert_eq!(&window3(k.clone()) * &window3_inverse(k.clone()), RationalMatrix4::identity());
      assert_eq!(&window4(k.clone()) * &window4_inverse(k), RationalMatrix4::identity());
    }
    assert_eq!(&shear1::<BigRational>() * &shear1_inverse(), RationalMatrix4::identity());
    assert_eq!(&shear2::<BigRational>() * &shear2_inverse(), RationalMatrix4::identity());
  }

  #[test]
  fn ttilde_vanishes_without_weights() {
    let t = ttilde_from_weights(5, c(0.0), c(0.0));
    assert!(t.0.iter().flatten().all(|z| z.norm() == 0.0));
  }

  #[test]
  fn ttilde_product_matches_rational_oracle() {
    // exact product with rational weights, then compared to the float product
    let (p1, p2) = (rat(3, 7), rat(-2, 5));
    let n = 6u64;
    let k = BigRational::int(n as i64);
    let mut t = RationalMatrix4::zero();
    t.0[3][0] = -p2.clone();
    t.0[3][2] = -p1.clone();
    let exact = product(&[&left_factor(k.clone()), &basis_inverse(), &t, &basis(), &right_factor(k.clone())]);
    let float = ttilde_from_weights(n, c(rational_to_f64(&p1)), c(rational_to_f64(&p2)));
    for i in 0..4 {
      for j in 0..4 {
        assert!((float.0[i][j] - c(rational_to_f64(&exact.0[i][j]))).norm() < 1e-12);
      }
    }
    // the product's top-left entry is (n+4)(p1+p2)/4
    assert_eq!(exact.0[0][0], (k + BigRational::int(4)) * (p1 + p2) / BigRational::int(4));
  }

  #[test]
  fn ttilde_stays_bounded() {
    let nu = stable_root_check(0, 0.95).unwrap().roots[0];
    let m = |n| ttilde_build(n, nu, 0.95).unwrap().0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(m(10_000) < 20.0 && (m(10_000) - m(5_000)).abs() < 0.05 * m(5_000));
  }

  #[test]
  fn companion_steps_reproduce_the_series() {
    let nu = Complex64::new(-0.8, 0.3);
    let seeds = (c(0.2), c(-0.5), c(0.7));
    let s = FrobeniusSeries::new(nu, 0.95, seeds, 60).unwrap();
    let mut st = CompanionState { z: [c(1.0), seeds.0, seeds.1, seeds.2], n: 0, nu, kappa: 0.95 };
    for n in 0..56 {
      st = companion_step(&st).unwrap();
      assert_eq!(st.z[3], s.coeff(n + 4));
    }
    let z = [c(1.0), c(2.0), c(3.0), c(4.0)];
    let next = companion_apply(&z, c(0.0), c(0.0));
    assert_eq!(next[..3], z[1..]);
    assert_eq!(next[3], c(2.0 * 3.0 - 1.0));
    assert_eq!(companion_apply(&[c(0.0); 4], c(0.3), c(0.1)), [c(0.0); 4]);
  }

  #[test]
  fn diagonal_growth_telescopes() {
    let nu = c(-1.0);
    let g = growth_profile(nu, 0.95, 1001, 1, true).unwrap();
    for (n, l) in g.n.iter().zip(&g.log_norm) {
      assert!((l.exp() / *n as f64 - 1.0).abs() < 1e-9);
    }
    let g = growth_profile(nu, 0.95, 50, 0, true).unwrap();
    assert!(g.log_norm.iter().all(|&l| l.abs() < 1e-15));
    assert!(growth_profile(nu, 0.95, 1, 0, true).is_err());
  }
}

#[cfg(test)]
mod props {
  use super::*;
  use crate::spectral::FrobeniusSeries;
  use proptest::prelude::*;

  proptest! {
    #[test]
    fn companion_form_equals_scalar_recurrence(
      re in -3.0f64..0.0, im in -2.0f64..2.0, kappa in 0.9f64..0.999,
      s in prop::array::uniform3(-1.0f64..1.0),
    ) {
      let nu = Complex64::new(re, im);
      let c = |x: f64| Complex64::new(x, 0.0);
      let Ok(series) = FrobeniusSeries::new(nu, kappa, (c(s[0]), c(s[1]), c(s[2])), 200) else {
        return Ok(());
      };
      prop_assume!(!series.rescaled());
      let mut st = CompanionState { z: [c(1.0), c(s[0]), c(s[1]), c(s[2])], n: 0, nu, kappa };
      for n in 0..196 {
        st = companion_step(&st).unwrap();
        prop_assert_eq!(st.z[3], series.coeff(n + 4));
      }
    }

    #[test]
    fn window_transform_diagonalizes_jordan(n in 1u64..500) {
      let m = window_transform(n).unwrap();
      prop_assert_eq!(m, diagonal_target(n));
    }
  }
}
