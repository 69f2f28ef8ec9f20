//! Mode analysis: eigenvalue polynomials, the Frobenius recurrence and its ratio
//! asymptotics, Newton polygons, and the spectrum of the discretized first-order operator.

mod frobenius;
mod operator;
mod polygon;

pub use frobenius::{default_a2, ratio_diagnostics, FrobeniusSeries, RatioDiagnostics};
pub use operator::{
  assemble_operator, discrete_spectrum, dissipativity_check, eigenvalues, energy_inner, max_real_part, OperatorMatrices,
};
pub use polygon::{brute_force_edges, newton_polygon, Edge, NewtonPolygon};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// `aν² + bν + c` with real coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPoly {
  pub a: f64,
  pub b: f64,
  pub c: f64,
}

impl QuadraticPoly {
  pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
    if a == 0.0 || !a.is_finite() || !b.is_finite() || !c.is_finite() {
      return Err(Error::Domain(format!("leading coefficient must be finite and nonzero, got ({a}, {b}, {c})")));
    }
    Ok(QuadraticPoly { a, b, c })
  }

  pub fn eval(&self, nu: Complex64) -> Complex64 {
    (nu * self.a + self.b) * nu + self.c
  }

  /// Both roots by the cancellation-free formula, larger real part first.
  pub fn roots(&self) -> [Complex64; 2] {
    let QuadraticPoly { a, b, c } = *self;
    let disc = b * b - 4.0 * a * c;
    let mut r = if disc >= 0.0 {
      let q = -0.5 * (b + b.signum() * disc.sqrt());
      if q == 0.0 {
        [Complex64::new(0.0, 0.0); 2]
      } else {
        [Complex64::new(q / a, 0.0), Complex64::new(c / q, 0.0)]
      }
    } else {
      let (re, im) = (-b / (2.0 * a), (-disc).sqrt() / (2.0 * a).abs());
      [Complex64::new(re, im), Complex64::new(re, -im)]
    };
    if r[1].re > r[0].re {
      r.swap(0, 1);
    }
    r
  }

  /// True when every coefficient has the sign of `a`, which for a quadratic is
  /// equivalent to both roots lying in `Re ν < 0`.
  pub fn hurwitz_stable(&self) -> bool {
    let s = self.a.signum();
    self.b * s > 0.0 && self.c * s > 0.0
  }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRoots {
  pub roots: [Complex64; 2],
  /// Every root has negative real part.
  pub mode_stable: bool,
}

impl ModeRoots {
  pub fn verdict(&self) -> &'static str {
    if self.mode_stable {
      "mode stable"
    } else {
      "mode unstable"
    }
  }
}

pub fn mode_roots(p: &QuadraticPoly) -> ModeRoots {
  let roots = p.roots();
  ModeRoots { roots, mode_stable: roots.iter().all(|r| r.re < 0.0) }
}

/// Roots quoted in the literature for `ν² + 3ν − 4`; they do not solve it.
pub const QUOTED_UNPERTURBED_ROOTS: [f64; 2] = [4.0, -1.0];

/// Mode analysis of the unperturbed linearization `v_ττ + 3v_τ − 4v = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnperturbedModes {
  pub roots: [f64; 2],
  pub verdict: String,
  pub quoted_roots: [f64; 2],
  /// The quoted roots differ from the computed ones.
  pub quoted_roots_differ: bool,
  /// Largest `|P(ν)|` over the quoted roots.
  pub quoted_residual: f64,
}

pub fn unperturbed_modes() -> UnperturbedModes {
  let p = QuadraticPoly { a: 1.0, b: 3.0, c: -4.0 };
  let m = mode_roots(&p);
  let roots = [m.roots[0].re, m.roots[1].re];
  let mut sorted_quoted = QUOTED_UNPERTURBED_ROOTS;
  sorted_quoted.sort_by(|x, y| y.total_cmp(x));
  let quoted_residual =
    QUOTED_UNPERTURBED_ROOTS.iter().map(|&q| p.eval(Complex64::new(q, 0.0)).norm()).fold(0.0, f64::max);
  UnperturbedModes {
    roots,
    verdict: m.verdict().into(),
    quoted_roots: QUOTED_UNPERTURBED_ROOTS,
    quoted_roots_differ: sorted_quoted != roots,
    quoted_residual,
  }
}

fn damping_shift(kappa: f64) -> f64 {
  (1.0 - kappa) / (1.0 + kappa)
}

/// Weights `p1(n)`, `p2(n)` of `a_{n+4} + (−2+p1)a_{n+2} + (1+p2)a_n = 0`.
pub fn recurrence_weights(n: usize, nu: Complex64, kappa: f64) -> Result<(Complex64, Complex64)> {
  let c = damping_shift(kappa);
  let k2 = kappa * kappa;
  let nf = n as f64;
  let lower = (nu * 2.0 + 7.0) * nf + nu * nu + nu * (8.0 - c) + 12.0;
  let den = lower + nf * nf;
  if den.norm() <= 1e-13 * (nf * nf + nu.norm_sqr() + 1.0) {
    return Err(Error::Pole { n });
  }
  let p1 = ((nu * 2.0 + 15.0) * nf + nu * nu * 3.0 + nu * (4.0 * k2 - 2.0 * c + 15.0) + (24.0 - 4.0 * k2)) / den;
  let p2 = -lower / den;
  Ok((p1, p2))
}

/// `(p3, p4, p5)` of the ratio equation `p3 d_{n+3}d_{n+2}d_{n+1}d_n + p4 d_{n+1}d_n + p5 = 0`.
pub fn reduction_polynomials(n: f64, nu: Complex64, kappa: f64) -> (Complex64, Complex64, Complex64) {
  let c = damping_shift(kappa);
  let k2 = kappa * kappa;
  let p3 = (nu * 2.0 + (n + 3.0)) * (n + 4.0) + nu * nu - nu * c;
  let p4 = nu * nu + nu * (4.0 * k2 - 2.0 * n - 1.0) - n * (2.0 * n - 1.0) - 4.0 * k2;
  let p5 = Complex64::new(n * n, 0.0);
  (p3, p4, p5)
}

/// `Λ` after the substitution `d_n = n^{−x̄} d̃_n`: one point per term of the ratio equation.
pub fn reduction_points(xbar: f64) -> Vec<[f64; 2]> {
  vec![[2.0, 0.0], [2.0 * (1.0 - xbar), 2.0], [2.0 * (1.0 - 2.0 * xbar), 4.0]]
}

/// `2ν² + (4κ² − (1−κ)/(1+κ) + 7)ν + 8n + 12 − 4κ²`.
pub fn balance_polynomial(n: usize, kappa: f64) -> QuadraticPoly {
  let k2 = kappa * kappa;
  QuadraticPoly { a: 2.0, b: 4.0 * k2 - damping_shift(kappa) + 7.0, c: 8.0 * n as f64 + 12.0 - 4.0 * k2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootCheck {
  pub roots: [Complex64; 2],
  /// Both roots have `Re ν < 0`, by direct computation.
  pub all_stable: bool,
  /// All coefficients positive.
  pub hurwitz: bool,
}

pub fn stable_root_check(n: usize, kappa: f64) -> Result<RootCheck> {
  if !(kappa > 0.0 && kappa < 1.0) {
    return Err(Error::Domain(format!("kappa must lie in (0,1), got {kappa}")));
  }
  let p = balance_polynomial(n, kappa);
  let roots = p.roots();
  Ok(RootCheck { roots, all_stable: roots.iter().all(|r| r.re < 0.0), hurwitz: p.hurwitz_stable() })
}


#[cfg(test)]
mod props {
  use super::*;
  use proptest::prelude::*;

  fn point_set() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0i32..=10, 0i32..=10).prop_map(|(a, b)| [a as f64, b as f64]), 1..=10)
  }

  proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn hull_matches_brute_force(pts in point_set()) {
      let mut fast = newton_polygon(&pts);
      let mut slow = brute_force_edges(&pts);
      fast.points.clear();
      slow.points.clear();
      prop_assert_eq!(fast, slow);
    }
  }

  proptest! {
    #[test]
    fn hurwitz_agrees_with_roots(n in 0usize..=100, kappa in 0.9f64..0.999) {
      let r = stable_root_check(n, kappa).unwrap();
      prop_assert_eq!(r.hurwitz, r.all_stable);
    }

    #[test]
    fn verdict_ignores_positive_scaling(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, s in 0.01f64..100.0) {
      prop_assume!(a.abs() > 1e-3);
      let p = mode_roots(&QuadraticPoly::new(a, b, c).unwrap());
      let q = mode_roots(&QuadraticPoly::new(s * a, s * b, s * c).unwrap());
      prop_assert_eq!(p.mode_stable, q.mode_stable);
      let scale = 1.0 + p.roots[0].norm().max(p.roots[1].norm());
      for (x, y) in p.roots.iter().zip(&q.roots) {
        prop_assert!((x - y).norm() <= 1e-10 * scale);
      }
    }

    #[test]
    fn recurrence_residuals_stay_small(
      re in -3.0f64..0.0, im in -2.0f64..2.0, kappa in 0.9f64..0.999,
      s1 in -1.0f64..1.0, s2 in -1.0f64..1.0, s3 in -1.0f64..1.0,
    ) {
      let nu = Complex64::new(re, im);
      let seeds = (Complex64::new(s1, 0.0), Complex64::new(s2, 0.0), Complex64::new(s3, 0.0));
      match FrobeniusSeries::new(nu, kappa, seeds, 400) {
        Ok(s) => prop_assert!(s.max_relative_residual() <= 1e-10),
        Err(e) => { let pole = matches!(e, Error::Pole { .. }); prop_assert!(pole) }
      }
    }
  }

  proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dissipative_part_has_no_growing_eigenvalue(kappa in 0.9f64..0.999) {
      let m = assemble_operator(&crate::grid::RadialGrid::new(0.5, 40).unwrap(), kappa).unwrap();
      let top = max_real_part(&eigenvalues(&m.a0).unwrap());
      prop_assert!(top <= 1e-8, "{}", top);
    }
  }
}
