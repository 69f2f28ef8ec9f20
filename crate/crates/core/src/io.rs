//! Binary checkpoints: `LCL1`, then little-endian `f64`s `sigma, kappa, tau, n_cells, v[..], v_tau[..]`.

use crate::error::{Error, Result};
use crate::linearized::FieldState;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"LCL1";

/// Decoded checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
  pub sigma: f64,
  pub kappa: f64,
  pub state: FieldState,
}

pub fn write_checkpoint<W: Write>(out: &mut W, sigma: f64, kappa: f64, state: &FieldState) -> Result<()> {
  if state.v.len() != state.v_tau.len() {
    return Err(Error::Checkpoint("v and v_tau lengths differ".into()));
  }
  let mut buf = Vec::with_capacity(4 + 8 * (4 + 2 * state.v.len()));
  buf.extend_from_slice(MAGIC);
  let head = [sigma, kappa, state.tau, state.v.len() as f64];
  for x in head.iter().chain(&state.v).chain(&state.v_tau) {
    buf.extend_from_slice(&x.to_le_bytes());
  }
  out.write_all(&buf)?;
  Ok(())
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<Checkpoint> {
  let mut bytes = Vec::new();
  input.read_to_end(&mut bytes)?;
  if bytes.len() < 4 || &bytes[..4] != MAGIC {
    return Err(Error::Checkpoint("missing LCL1 magic".into()));
  }
  let body = &bytes[4..];
  if body.len() % 8 != 0 || body.len() < 32 {
    return Err(Error::Checkpoint(format!("body of {} bytes is not a whole header plus f64 payload", body.len())));
  }
  let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
  let n = vals[3];
  if !(n >= 0.0 && n.fract() == 0.0) || vals.len() != 4 + 2 * n as usize {
    return Err(Error::Checkpoint(format!("cell count {n} does not match payload of {} values", vals.len() - 4)));
  }
  let n = n as usize;
  let state = FieldState { v: vals[4..4 + n].to_vec(), v_tau: vals[4 + n..].to_vec(), tau: vals[2] };
  Ok(Checkpoint { sigma: vals[0], kappa: vals[1], state })
}
