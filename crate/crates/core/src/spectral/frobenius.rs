use super::recurrence_weights;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Magnitude above which a coefficient is renormalized into mantissa and exponent.
const RESCALE_ABOVE: f64 = 1e300;

/// Default `a2` for the even chain: the `ρ⁰` balance of the mode equation with `a0 = 1`,
/// `(ν² + (4κ²−1)ν − 4κ²) / (4(1−κ²))`.
pub fn default_a2(nu: Complex64, kappa: f64) -> Complex64 {
  let k2 = kappa * kappa;
  (nu * nu + nu * (4.0 * k2 - 1.0) - 4.0 * k2) / (4.0 * (1.0 - k2))
}

/// Power-series coefficients `a_n` of a mode solution, `a_n = mantissa_n · 2^{exponent_n}`.
///
/// Exponents stay zero until a coefficient exceeds `1e300`; power-of-two scaling is exact,
/// so below that threshold the values equal a plain floating-point recurrence bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusSeries {
  pub nu: Complex64,
  pub kappa: f64,
  pub seeds: [Complex64; 4],
  mantissa: Vec<Complex64>,
  exponent: Vec<i32>,
  weights: Vec<(Complex64, Complex64)>,
}

fn scale(z: Complex64, e: i32) -> Complex64 {
  // split to keep intermediate powers of two finite
  let mut z = z;
  let mut e = e;
  while e != 0 {
    let step = e.clamp(-1000, 1000);
    z *= 2f64.powi(step);
    e -= step;
  }
  z
}

impl FrobeniusSeries {
  /// Generates `a_0..a_len−1` from `a_0 = 1` and the seeds `(a1, a2, a3)`.
  pub fn new(nu: Complex64, kappa: f64, seeds: (Complex64, Complex64, Complex64), len: usize) -> Result<Self> {
    if !(kappa > 0.0 && kappa < 1.0) {
      return Err(Error::Domain(format!("kappa must lie in (0,1), got {kappa}")));
    }
    if len < 4 {
      return Err(Error::Domain(format!("series length must be at least 4, got {len}")));
    }
    let seeds = [Complex64::new(1.0, 0.0), seeds.0, seeds.1, seeds.2];
    let mut s = FrobeniusSeries {
      nu,
      kappa,
      seeds,
      mantissa: seeds.to_vec(),
      exponent: vec![0; 4],
      weights: Vec::with_capacity(len.saturating_sub(4)),
    };
    for n in 0..len - 4 {
      let (p1, p2) = recurrence_weights(n, nu, kappa)?;
      s.weights.push((p1, p2));
      let e = s.exponent[n + 2].max(s.exponent[n]);
      let x = scale(s.mantissa[n + 2], s.exponent[n + 2] - e);
      let y = scale(s.mantissa[n], s.exponent[n] - e);
      let next = |x: Complex64, y: Complex64| (Complex64::new(2.0, 0.0) - p1) * x - (p2 + 1.0) * y;
      let mut m = next(x, y);
      let mut ex = e;
      if !(m.re.is_finite() && m.im.is_finite()) {
        // large weights near a pole can overflow an unscaled step
        m = next(scale(x, -600), scale(y, -600));
        ex += 600;
      }
      let mag = m.norm();
      if mag > RESCALE_ABOVE || (ex > 0 && mag > 0.0 && mag < 1.0) {
        let k = mag.log2().floor() as i32;
        m = scale(m, -k);
        ex += k;
      }
      s.mantissa.push(m);
      s.exponent.push(ex);
    }
    Ok(s)
  }

  /// Series with the default seeds `(0, a2*, 0)`.
  pub fn with_default_seeds(nu: Complex64, kappa: f64, len: usize) -> Result<Self> {
    let zero = Complex64::new(0.0, 0.0);
    Self::new(nu, kappa, (zero, default_a2(nu, kappa), zero), len)
  }

  pub fn len(&self) -> usize {
    self.mantissa.len()
  }

  pub fn is_empty(&self) -> bool {
    self.mantissa.is_empty()
  }

  /// `(mantissa, base-2 exponent)` of `a_n`.
  pub fn scaled(&self, n: usize) -> (Complex64, i32) {
    (self.mantissa[n], self.exponent[n])
  }

  /// `a_n` as a plain complex number; infinite components when it does not fit.
  pub fn coeff(&self, n: usize) -> Complex64 {
    scale(self.mantissa[n], self.exponent[n])
  }

  /// Whether any coefficient needed the scaled representation.
  pub fn rescaled(&self) -> bool {
    self.exponent.iter().any(|&e| e != 0)
  }

  /// `a_{n+k}/a_n`, `None` when `a_n = 0`.
  pub fn ratio(&self, n: usize, k: usize) -> Option<Complex64> {
    let d = self.mantissa[n];
    if d == Complex64::new(0.0, 0.0) {
      return None;
    }
    Some(scale(self.mantissa[n + k] / d, self.exponent[n + k] - self.exponent[n]))
  }

  /// `|a_{n+4} + (−2+p1)a_{n+2} + (1+p2)a_n| / max(|a_n|, |a_{n+2}|, |a_{n+4}|)`; zero when all vanish.
  ///
  /// Defined for `n + 4 < len`; panics beyond that.
  pub fn relative_residual(&self, n: usize) -> f64 {
    let (p1, p2) = self.weights[n];
    let e = self.exponent[n].max(self.exponent[n + 2]).max(self.exponent[n + 4]);
    let t = |i: usize| scale(self.mantissa[i], self.exponent[i] - e);
    let (a0, a2, a4) = (t(n), t(n + 2), t(n + 4));
    let r = a4 + (p1 - 2.0) * a2 + (p2 + 1.0) * a0;
    let m = a0.norm().max(a2.norm()).max(a4.norm());
    if m == 0.0 {
      0.0
    } else {
      r.norm() / m
    }
  }

  pub fn max_relative_residual(&self) -> f64 {
    (0..self.weights.len()).map(|n| self.relative_residual(n)).fold(0.0, f64::max)
  }
}

/// `R_n = a_{n+2}/a_n`, `d_n = a_{n+1}/a_n` and `d̃_n = n^{x̄} d_n`, masked where `a_n = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioDiagnostics {
  pub n: Vec<usize>,
  pub r: Vec<Option<Complex64>>,
  pub d: Vec<Option<Complex64>>,
  pub dtilde: Vec<Option<Complex64>>,
  pub xbar: f64,
}

impl RatioDiagnostics {
  /// Largest `|d_n − 1|` over the unmasked entries.
  pub fn max_d_deviation(&self) -> f64 {
    self.d.iter().flatten().map(|d| (d - 1.0).norm()).fold(0.0, f64::max)
  }

  pub fn max_r_deviation(&self) -> f64 {
    self.r.iter().flatten().map(|r| (r - 1.0).norm()).fold(0.0, f64::max)
  }
}

/// Ratios over `window` (indices `n` with `n + 2` inside the series).
pub fn ratio_diagnostics(s: &FrobeniusSeries, window: std::ops::Range<usize>, xbar: f64) -> Result<RatioDiagnostics> {
  if window.end + 2 > s.len() {
    return Err(Error::Domain(format!("window end {} exceeds series length {} minus 2", window.end, s.len())));
  }
  let n: Vec<usize> = window.collect();
  let d: Vec<Option<Complex64>> = n.iter().map(|&i| s.ratio(i, 1)).collect();
  Ok(RatioDiagnostics {
    r: n.iter().map(|&i| s.ratio(i, 2)).collect(),
    dtilde: n.iter().zip(&d).map(|(&i, d)| d.map(|d| d * (i as f64).powf(xbar))).collect(),
    d,
    n,
    xbar,
  })
}
