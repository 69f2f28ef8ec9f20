use crate::CliError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
  Verify,
  Spectrum,
  Frobenius,
  NewtonPolygon,
  EvolveLinear,
  EvolveNonlinear,
  NashMoser,
  AppendixCheck,
}

impl Experiment {
  pub const ALL: [Experiment; 8] = [
    Experiment::Verify,
    Experiment::Spectrum,
    Experiment::Frobenius,
    Experiment::NewtonPolygon,
    Experiment::EvolveLinear,
    Experiment::EvolveNonlinear,
    Experiment::NashMoser,
    Experiment::AppendixCheck,
  ];

  pub fn name(self) -> &'static str {
    match self {
      Experiment::Verify => "verify",
      Experiment::Spectrum => "spectrum",
      Experiment::Frobenius => "frobenius",
      Experiment::NewtonPolygon => "newton-polygon",
      Experiment::EvolveLinear => "evolve-linear",
      Experiment::EvolveNonlinear => "evolve-nonlinear",
      Experiment::NashMoser => "nash-moser",
      Experiment::AppendixCheck => "appendix-check",
    }
  }

  /// The evolutions also accept the degenerate `κ = 1`.
  fn admits_kappa_one(self) -> bool {
    matches!(self, Experiment::Verify | Experiment::EvolveLinear | Experiment::EvolveNonlinear | Experiment::NashMoser)
  }
}

impl fmt::Display for Experiment {
  fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    f.write_str(self.name())
  }
}

fn default_kappa() -> f64 {
  0.95
}
fn default_sigma() -> f64 {
  0.5
}
fn default_t() -> f64 {
  1.0
}
fn default_eps() -> f64 {
  1e-3
}
fn default_cells() -> usize {
  200
}
fn default_out() -> String {
  "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
  #[serde(default = "default_kappa")]
  pub kappa: f64,
  #[serde(default = "default_sigma")]
  pub sigma: f64,
  #[serde(rename = "T", default = "default_t")]
  pub t_blowup: f64,
  #[serde(default = "default_eps")]
  pub eps: f64,
  #[serde(default = "default_cells")]
  pub cells: usize,
  /// Horizon; each experiment has its own default.
  #[serde(default)]
  pub tau_max: Option<f64>,
  /// Time step; `None` takes it from the CFL limit.
  #[serde(default)]
  pub dt: Option<f64>,
  #[serde(default)]
  pub seed: u64,
  #[serde(default = "default_out")]
  pub out: String,
  /// Point set for `newton-polygon`.
  #[serde(default)]
  pub points: Option<Vec<[f64; 2]>>,
}

impl Default for Params {
  fn default() -> Self {
    Params {
      kappa: default_kappa(),
      sigma: default_sigma(),
      t_blowup: default_t(),
      eps: default_eps(),
      cells: default_cells(),
      tau_max: None,
      dt: None,
      seed: 0,
      out: default_out(),
      points: None,
    }
  }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
  pub experiment: Experiment,
  #[serde(default)]
  pub params: Params,
}

impl ExperimentConfig {
  pub fn new(experiment: Experiment) -> Self {
    ExperimentConfig { experiment, params: Params::default() }
  }

  /// Checks every parameter against the preconditions of the experiment's operations.
  pub fn validate(&self) -> Result<(), CliError> {
    let p = &self.params;
    let range = |msg: String| Err(CliError::Range(msg));
    let kappa_ok = p.kappa > 0.0 && (p.kappa < 1.0 || (p.kappa == 1.0 && self.experiment.admits_kappa_one()));
    if !kappa_ok {
      let interval = if self.experiment.admits_kappa_one() { "(0,1]" } else { "(0,1)" };
      return range(format!("kappa must lie in {interval}, got {}", p.kappa));
    }
    if !(p.sigma > 0.0 && p.sigma < 1.0) {
      return range(format!("sigma must lie in (0,1), got {}", p.sigma));
    }
    if !(p.t_blowup > 0.0 && p.t_blowup.is_finite()) {
      return range(format!("T must be positive, got {}", p.t_blowup));
    }
    if !(p.eps >= 0.0 && p.eps.is_finite()) {
      return range(format!("eps must be non-negative, got {}", p.eps));
    }
    if p.cells < 4 {
      return range(format!("cells must be at least 4, got {}", p.cells));
    }
    if self.experiment == Experiment::Spectrum && p.cells > 500 {
      return range(format!("spectrum needs cells <= 500 for the dense eigensolver, got {}", p.cells));
    }
    if let Some(t) = p.tau_max {
      if !(t > 0.0 && t.is_finite()) {
        return range(format!("tau_max must be positive, got {t}"));
      }
    }
    if let Some(dt) = p.dt {
      if !(dt > 0.0 && dt.is_finite()) {
        return range(format!("dt must be positive, got {dt}"));
      }
    }
    if let Some(pts) = &p.points {
      if pts.is_empty() || pts.iter().flatten().any(|x| !x.is_finite()) {
        return range("points must be a non-empty list of finite pairs".into());
      }
    }
    if p.out.is_empty() {
      return range("out must be a non-empty path".into());
    }
    Ok(())
  }

  pub fn to_json(&self) -> String {
    serde_json::to_string_pretty(self).expect("config serializes")
  }
}

/// Parses and validates a JSON config given as text.
pub fn load_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
  let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
    let kind = if e.is_data() { "invalid config" } else { "parse error" };
    CliError::Config(format!("{kind}: {e}"))
  })?;
  cfg.validate()?;
  Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
  let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
  load_config_str(&text)
}
