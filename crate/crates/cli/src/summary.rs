use crate::experiments::RunManifest;
use std::fmt::Write;

/// Metrics shown per experiment, in this order, when present.
const KEY_METRICS: [&str; 12] = [
  "max_residual_plus",
  "max_re_eigenvalue",
  "dissipativity_excursion",
  "max_d_deviation",
  "xbar",
  "decay_rate",
  "decay_r_squared",
  "ratio_growth",
  "final_error",
  "doubling_ratio_1",
  "doubling_ratio_2",
  "telescoping_error",
];

/// Text table of experiments, key measurements and verdicts; the flag is true when every check passed.
pub fn summary(manifests: &[RunManifest]) -> (String, bool) {
  let mut out = String::new();
  let _ = writeln!(out, "{:<18} {:<6} {:>7}  measurements", "experiment", "result", "checks");
  let mut all = true;
  for m in manifests {
    let passed = m.checks.iter().filter(|c| c.pass).count();
    all &= m.pass;
    let shown: Vec<String> = KEY_METRICS
      .iter()
      .filter_map(|k| m.metrics.get(*k).map(|v| format!("{k}={v:.6e}")))
      .collect();
    let _ = writeln!(
      out,
      "{:<18} {:<6} {:>7}  {}",
      m.config.experiment.name(),
      if m.pass { "PASS" } else { "FAIL" },
      format!("{passed}/{}", m.checks.len()),
      shown.join(" ")
    );
    for c in m.checks.iter().filter(|c| !c.pass) {
      let _ = writeln!(out, "  failed: {} = {:.6e} (want {})", c.name, c.value, c.threshold);
    }
  }
  (out, all)
}

#[cfg(test)]
mod tests {
  use super::*;
  use crate::config::{Experiment, ExperimentConfig};
  use crate::experiments::Check;

  fn manifest(pass: bool) -> RunManifest {
    RunManifest {
      config: ExperimentConfig::new(Experiment::Verify),
      version: "0".into(),
      wall_time_s: 0.0,
      output_dir: String::new(),
      files: vec![],
      metrics: [("max_residual_plus".to_string(), 1e-13)].into(),
      checks: vec![Check { name: "c".into(), value: 1.0, threshold: "< 2".into(), pass }],
      notes: vec![],
      pass,
    }
  }

  #[test]
  fn single_passing_manifest() {
    let (text, ok) = summary(&[manifest(true)]);
    assert!(ok);
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("verify             PASS"));
  }

  #[test]
  fn mixed_results_fail() {
    let (text, ok) = summary(&[manifest(true), manifest(false)]);
    assert!(!ok);
    assert!(text.contains("failed: c"));
  }
}
