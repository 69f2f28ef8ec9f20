//! Explicit lightlike self-similar solutions, similarity coordinates and residual oracles.

use crate::error::{domain, Result};
use serde::{Deserialize, Serialize};

/// Blowup time `T`, lightcone fraction `σ`, perturbation parameter `κ` and reference time `T*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityFrame {
  pub t_blowup: f64,
  pub sigma: f64,
  pub kappa: f64,
  pub t_star: f64,
}

impl SimilarityFrame {
  pub fn new(t_blowup: f64, sigma: f64, kappa: f64, t_star: f64) -> Result<Self> {
    if !(t_blowup > 0.0 && t_blowup.is_finite()) {
      return domain(format!("T must be positive, got {t_blowup}"));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
      return domain(format!("sigma must lie in (0,1), got {sigma}"));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
      return domain(format!("kappa must lie in (0,1], got {kappa}"));
    }
    if !(t_star > 0.0 && t_star.is_finite()) {
      return domain(format!("T* must be positive, got {t_star}"));
    }
    Ok(SimilarityFrame { t_blowup, sigma, kappa, t_star })
  }

  /// Frame with `T* = T`.
  pub fn with_defaults(t_blowup: f64, sigma: f64, kappa: f64) -> Result<Self> {
    Self::new(t_blowup, sigma, kappa, t_blowup)
  }

  /// `(t, r) ↦ (τ, ρ) = (−log(T−t) + log T, r/(T−t))`.
  pub fn forward(&self, t: f64, r: f64) -> Result<(f64, f64)> {
    let big_t = self.t_blowup;
    if !(0.0..big_t).contains(&t) {
      return domain(format!("forward map needs 0 <= t < T, got t = {t}"));
    }
    if r < 0.0 {
      return domain(format!("forward map needs r >= 0, got r = {r}"));
    }
    let s = big_t - t;
    Ok((-s.ln() + big_t.ln(), r / s))
  }

  /// `(τ, ρ) ↦ (t, r) = (T(1 − e^{−τ}), Tρe^{−τ})`.
  pub fn backward(&self, tau: f64, rho: f64) -> Result<(f64, f64)> {
    if tau < 0.0 || rho < 0.0 {
      return domain(format!("backward map needs tau, rho >= 0, got ({tau}, {rho})"));
    }
    let e = (-tau).exp();
    Ok((self.t_blowup * (1.0 - e), self.t_blowup * rho * e))
  }

  /// `T − t` at similarity time `τ`.
  pub fn time_to_blowup(&self, tau: f64) -> f64 {
    self.t_blowup * (-tau).exp()
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
  Plus,
  Minus,
}

impl Sign {
  pub fn value(self) -> f64 {
    match self {
      Sign::Plus => 1.0,
      Sign::Minus => -1.0,
    }
  }
}

/// `φ(ρ) = sign·√(1−ρ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
  pub sign: Sign,
}

impl SelfSimilarProfile {
  pub fn new(sign: Sign) -> Self {
    SelfSimilarProfile { sign }
  }

  /// `φ`, `φ′` or `φ″`, analytically.
  pub fn value(&self, rho: f64, order: u8) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
      return domain(format!("rho must lie in [0,1], got {rho}"));
    }
    if order >= 1 && rho >= 1.0 {
      return domain("profile derivative is singular at rho = 1");
    }
    let s = self.sign.value();
    let q = 1.0 - rho * rho;
    match order {
      0 => Ok(s * q.sqrt()),
      1 => Ok(-s * rho / q.sqrt()),
      2 => Ok(-s / (q * q.sqrt())),
      _ => domain(format!("derivative order must be 0, 1 or 2, got {order}")),
    }
  }
}

/// Values and derivatives of a radial field at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldJet {
  pub u: f64,
  pub u_t: f64,
  pub u_r: f64,
  pub u_tt: f64,
  pub u_rr: f64,
  pub u_tr: f64,
}

/// A radial field `u(t, r)` with first and second derivatives.
pub trait RadialField {
  fn jet(&self, t: f64, r: f64) -> FieldJet;
}

impl<F: RadialField + ?Sized> RadialField for &F {
  fn jet(&self, t: f64, r: f64) -> FieldJet {
    (**self).jet(t, r)
  }
}

/// `u_T^± = ±(T−t)√(1−(r/(T−t))²)` with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitSolution {
  pub t_blowup: f64,
  pub sign: Sign,
}

impl RadialField for ExplicitSolution {
  fn jet(&self, t: f64, r: f64) -> FieldJet {
    let s = self.t_blowup - t;
    let q = (s * s - r * r).sqrt();
    let q3 = q * q * q;
    let k = self.sign.value();
    FieldJet {
      u: k * q,
      u_t: -k * s / q,
      u_r: -k * r / q,
      u_tt: -k * r * r / q3,
      u_rr: -k * s * s / q3,
      u_tr: -k * s * r / q3,
    }
  }
}

/// Field known only by values; derivatives by 5-point centred differences with
/// step `1e−5·scale`.
pub struct FiniteDifferenceField<F: Fn(f64, f64) -> f64> {
  pub f: F,
  pub scale: f64,
}

impl<F: Fn(f64, f64) -> f64> FiniteDifferenceField<F> {
  pub fn new(f: F, scale: f64) -> Self {
    FiniteDifferenceField { f, scale }
  }
}

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

impl<F: Fn(f64, f64) -> f64> RadialField for FiniteDifferenceField<F> {
  fn jet(&self, t: f64, r: f64) -> FieldJet {
    let h = 1e-5 * self.scale;
    let f = &self.f;
    let off = |i: usize| (i as f64 - 2.0) * h;
    let mut jet = FieldJet { u: f(t, r), ..FieldJet::default() };
    for i in 0..5 {
      let ft = f(t + off(i), r);
      let fr = f(t, r + off(i));
      jet.u_t += D1[i] * ft / h;
      jet.u_tt += D2[i] * ft / (h * h);
      jet.u_r += D1[i] * fr / h;
      jet.u_rr += D2[i] * fr / (h * h);
      for j in 0..5 {
        if D1[i] != 0.0 && D1[j] != 0.0 {
          jet.u_tr += D1[i] * D1[j] * f(t + off(i), r + off(j)) / (h * h);
        }
      }
    }
    jet
  }
}

/// `u_λ(t, r) = λ·u(t/λ, r/λ)`.
pub struct Scaled<F> {
  pub inner: F,
  pub lambda: f64,
}

/// Applies the scaling symmetry of the membrane equation.
pub fn scaling_apply<F: RadialField>(inner: F, lambda: f64) -> Result<Scaled<F>> {
  if !(lambda > 0.0 && lambda.is_finite()) {
    return domain(format!("scale must be positive, got {lambda}"));
  }
  Ok(Scaled { inner, lambda })
}

impl<F: RadialField> RadialField for Scaled<F> {
  fn jet(&self, t: f64, r: f64) -> FieldJet {
    let l = self.lambda;
    let j = self.inner.jet(t / l, r / l);
    FieldJet { u: l * j.u, u_t: j.u_t, u_r: j.u_r, u_tt: j.u_tt / l, u_rr: j.u_rr / l, u_tr: j.u_tr / l }
  }
}

/// Pointwise left-hand side of the radial membrane equation.
pub fn membrane_operator(j: &FieldJet, r: f64) -> f64 {
  let (ut, ur) = (j.u_t, j.u_r);
  j.u_tt - j.u_rr - ur / r + j.u_tt * ur * ur + j.u_rr * ut * ut - 2.0 * ut * ur * j.u_tr + ur * ut * ut / r
    - ur * ur * ur / r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
  pub max_abs: f64,
  pub at_point: (f64, f64),
  pub samples: Vec<(f64, f64, f64)>,
}

pub fn membrane_residual<F: RadialField>(u: &F, points: &[(f64, f64)]) -> Result<ResidualReport> {
  let mut samples = Vec::with_capacity(points.len());
  let mut max_abs = 0.0;
  let mut at_point = (f64::NAN, f64::NAN);
  for &(t, r) in points {
    if r <= 0.0 {
      return domain(format!("membrane residual needs r > 0, got r = {r} at t = {t}"));
    }
    let res = membrane_operator(&u.jet(t, r), r);
    if !(res.abs() <= max_abs) {
      max_abs = res.abs();
      at_point = (t, r);
    }
    samples.push((t, r, res));
  }
  Ok(ResidualReport { max_abs, at_point, samples })
}

/// `ρ(1−ρ²)φ″ + φ′ − φ′φ² + 2ρφ(φ′)² − ρφ″φ² + (1−ρ²)(φ′)³` for given values.
pub fn ode_operator(rho: f64, phi: f64, dphi: f64, ddphi: f64) -> f64 {
  let q = 1.0 - rho * rho;
  rho * q * ddphi + dphi - dphi * phi * phi + 2.0 * rho * phi * dphi * dphi - rho * ddphi * phi * phi
    + q * dphi * dphi * dphi
}

pub fn ode_residual(p: &SelfSimilarProfile, rho: f64) -> Result<f64> {
  if !(rho > 0.0 && rho < 1.0) {
    return domain(format!("profile residual needs 0 < rho < 1, got {rho}"));
  }
  Ok(ode_operator(rho, p.value(rho, 0)?, p.value(rho, 1)?, p.value(rho, 2)?))
}

/// `±(T−t)√(1−(r/(T−t))²)`.
pub fn explicit_solution(frame: &SimilarityFrame, sign: Sign, t: f64, r: f64) -> Result<f64> {
  let s = frame.t_blowup - t;
  if !(t >= 0.0 && s > 0.0) {
    return domain(format!("explicit solution needs 0 <= t < T, got t = {t}"));
  }
  if !(0.0..=s).contains(&r) {
    return domain(format!("r = {r} lies outside the backward lightcone r <= {s}"));
  }
  let x = r / s;
  Ok(sign.value() * s * (1.0 - x * x).max(0.0).sqrt())
}

/// Threshold `κ_{ε,σ} = 1 − (Tσ)^{−1/2}(1−(σT/T*)²)^{1/2}[1+σ+T(1−(σT/T*)²)]^{−1}ε`.
pub fn kappa_threshold(t_blowup: f64, t_star: f64, sigma: f64, eps: f64) -> Result<f64> {
  if !(t_blowup > 0.0 && t_star > 0.0) {
    return domain("T and T* must be positive");
  }
  if !(sigma > 0.0 && sigma < 1.0) {
    return domain(format!("sigma must lie in (0,1), got {sigma}"));
  }
  if eps < 0.0 {
    return domain(format!("eps must be non-negative, got {eps}"));
  }
  if sigma * t_blowup >= t_star {
    return domain("sigma*T must be smaller than T*");
  }
  let x = sigma * t_blowup / t_star;
  let q = 1.0 - x * x;
  Ok(1.0 - (t_blowup * sigma).powf(-0.5) * q.sqrt() / (1.0 + sigma + t_blowup * q) * eps)
}

/// Blowup rate of the origin curvature in the `±1/(T−t)` convention.
///
/// Differentiating `u_T^±` directly gives `∂_rr u_T^±(t, 0) = ∓1/(T−t)`; the returned
/// value has the same magnitude and the sign of the profile.
pub fn origin_second_derivative(frame: &SimilarityFrame, sign: Sign, t: f64) -> Result<f64> {
  let s = frame.t_blowup - t;
  if !(t >= 0.0 && s > 0.0) {
    return domain(format!("origin curvature needs 0 <= t < T, got t = {t}"));
  }
  Ok(sign.value() / s)
}

/// Similarity-frame data `(v(0,ρ), v_τ(0,ρ))` from physical data `(u0, u1)`:
/// `v0 = T⁻¹u0(Tρ) − (κ−1)φ(ρ)`, `v1 = T⁻¹u0(Tρ) + (1−ρ)u1(Tρ) − (κ−1)φ(ρ)`.
///
/// The `(1−ρ)u1(Tρ)` factor is reproduced as published even though it does not
/// carry the `T` weight the change of variables suggests.
pub fn initial_data_from_physical(
  frame: &SimilarityFrame,
  profile: &SelfSimilarProfile,
  rho: &[f64],
  u0: impl Fn(f64) -> f64,
  u1: impl Fn(f64) -> f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
  let big_t = frame.t_blowup;
  let k = frame.kappa - 1.0;
  let mut v0 = Vec::with_capacity(rho.len());
  let mut v1 = Vec::with_capacity(rho.len());
  for &r in rho {
    let phi = profile.value(r, 0)?;
    let base = u0(big_t * r) / big_t - k * phi;
    v0.push(base);
    v1.push(base + (1.0 - r) * u1(big_t * r));
  }
  Ok((v0, v1))
}
