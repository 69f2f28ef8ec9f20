//! First-order forward-mode jets over the six derivative slots of a field.
//!
//! The nonlinear forcing is polynomial in `(w, w_τ, w_ρ, w_ρρ, w_τρ, w_ττ)`, so a jet
//! evaluation yields its exact partial derivatives, which is the consistent
//! linearization used by the Newton solve.

use std::ops::{Add, Mul, Neg, Sub};

pub const SLOTS: usize = 6;

/// Slot order used throughout: value, τ, ρ, ρρ, τρ, ττ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slots<T> {
  pub w: T,
  pub w_tau: T,
  pub w_rho: T,
  pub w_rhorho: T,
  pub w_taurho: T,
  pub w_tautau: T,
}

impl Slots<f64> {
  pub fn zero() -> Self {
    Slots { w: 0.0, w_tau: 0.0, w_rho: 0.0, w_rhorho: 0.0, w_taurho: 0.0, w_tautau: 0.0 }
  }

  /// Seeds each slot with its own unit direction.
  pub fn seeded(&self) -> Slots<Jet> {
    Slots {
      w: Jet::var(self.w, 0),
      w_tau: Jet::var(self.w_tau, 1),
      w_rho: Jet::var(self.w_rho, 2),
      w_rhorho: Jet::var(self.w_rhorho, 3),
      w_taurho: Jet::var(self.w_taurho, 4),
      w_tautau: Jet::var(self.w_tautau, 5),
    }
  }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
  pub value: f64,
  pub grad: [f64; SLOTS],
}

impl Jet {
  pub fn constant(value: f64) -> Self {
    Jet { value, grad: [0.0; SLOTS] }
  }

  pub fn var(value: f64, slot: usize) -> Self {
    let mut grad = [0.0; SLOTS];
    grad[slot] = 1.0;
    Jet { value, grad }
  }
}

/// Arithmetic needed to evaluate polynomial expressions generically.
pub trait Scalar:
  Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Mul<f64, Output = Self>
{
  fn lift(x: f64) -> Self;
}

impl Scalar for f64 {
  fn lift(x: f64) -> Self {
    x
  }
}

impl Scalar for Jet {
  fn lift(x: f64) -> Self {
    Jet::constant(x)
  }
}

impl Add for Jet {
  type Output = Jet;
  fn add(mut self, o: Jet) -> Jet {
    self.value += o.value;
    for i in 0..SLOTS {
      self.grad[i] += o.grad[i];
    }
    self
  }
}

impl Sub for Jet {
  type Output = Jet;
  fn sub(mut self, o: Jet) -> Jet {
    self.value -= o.value;
    for i in 0..SLOTS {
      self.grad[i] -= o.grad[i];
    }
    self
  }
}

impl Mul for Jet {
  type Output = Jet;
  fn mul(self, o: Jet) -> Jet {
    let mut grad = [0.0; SLOTS];
    for (i, g) in grad.iter_mut().enumerate() {
      *g = self.grad[i] * o.value + self.value * o.grad[i];
    }
    Jet { value: self.value * o.value, grad }
  }
}

impl Mul<f64> for Jet {
  type Output = Jet;
  fn mul(mut self, c: f64) -> Jet {
    self.value *= c;
    for g in &mut self.grad {
      *g *= c;
    }
    self
  }
}

impl Neg for Jet {
  type Output = Jet;
  fn neg(self) -> Jet {
    self * -1.0
  }
}

#[cfg(test)]
mod tests {
  use super::*;

  #[test]
  fn product_rule() {
    let s = Slots { w: 2.0, w_tau: 3.0, ..Slots::zero() }.seeded();
    let e = s.w * s.w * s.w_tau + s.w_tau * 4.0;
    assert_eq!(e.value, 24.0);
    assert_eq!(e.grad[0], 12.0);
    assert_eq!(e.grad[1], 8.0);
  }
}
