use lightcone_cli::{load_config_str, output, run_experiment, write_series, ExperimentConfig, RunManifest};
use proptest::prelude::*;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], cwd: &Path) -> Output {
  Command::new(env!("CARGO_BIN_EXE_lightcone-lab")).args(args).current_dir(cwd).output().unwrap()
}

fn config_in(dir: &Path, text: &str) -> ExperimentConfig {
  let mut cfg = load_config_str(text).unwrap();
  cfg.params.out = dir.join("out").to_string_lossy().into_owned();
  cfg
}

fn manifest_at(dir: &str) -> RunManifest {
  serde_json::from_str(&std::fs::read_to_string(Path::new(dir).join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn verify_run_passes_and_writes_exact_residuals() {
  let tmp = tempfile::tempdir().unwrap();
  let cfg = config_in(tmp.path(), r#"{"experiment":"verify"}"#);
  let m = run_experiment(&cfg).unwrap();
  assert!(m.pass);
  let text = std::fs::read_to_string(Path::new(&m.output_dir).join("residual.csv")).unwrap();
  let worst = text
    .lines()
    .skip(1)
    .map(|l| l.split(',').map(|s| s.parse::<f64>().unwrap()).collect::<Vec<_>>())
    .filter(|row| row[0] > 0.0)
    .map(|row| row[3].abs())
    .fold(0.0, f64::max);
  assert!(worst < 1e-10, "{worst}");
  assert_eq!(manifest_at(&m.output_dir).files, m.files);
}

#[test]
fn newton_polygon_reports_quarter() {
  let tmp = tempfile::tempdir().unwrap();
  let m = run_experiment(&config_in(tmp.path(), r#"{"experiment":"newton-polygon"}"#)).unwrap();
  let json: serde_json::Value =
    serde_json::from_str(&std::fs::read_to_string(Path::new(&m.output_dir).join("newton_polygon.json")).unwrap()).unwrap();
  assert!((json["xbar"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn repeated_runs_are_bit_identical() {
  for text in [r#"{"experiment":"spectrum","params":{"cells":40}}"#, r#"{"experiment":"evolve-linear","params":{"cells":40,"tau_max":0.5}}"#] {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&config_in(a.path(), text)).unwrap();
    let mb = run_experiment(&config_in(b.path(), text)).unwrap();
    assert!(!ma.files.is_empty());
    assert_eq!(ma.files, mb.files);
    assert!(ma.verify_digests().unwrap() && mb.verify_digests().unwrap());
  }
}

#[test]
fn tampered_output_fails_digest_check() {
  let tmp = tempfile::tempdir().unwrap();
  let m = run_experiment(&config_in(tmp.path(), r#"{"experiment":"verify","params":{"cells":20}}"#)).unwrap();
  let path = Path::new(&m.output_dir).join(&m.files[0].name);
  let mut bytes = std::fs::read(&path).unwrap();
  bytes.push(b'\n');
  std::fs::write(&path, bytes).unwrap();
  assert!(!m.verify_digests().unwrap());
}

#[test]
fn out_of_range_kappa_exits_three() {
  let tmp = tempfile::tempdir().unwrap();
  std::fs::write(tmp.path().join("c.json"), r#"{"experiment":"spectrum","params":{"kappa":1.5}}"#).unwrap();
  let out = lab(&["spectrum", "--config", "c.json"], tmp.path());
  assert_eq!(out.status.code(), Some(3));
  assert!(String::from_utf8_lossy(&out.stderr).contains("kappa must lie in (0,1)"));
  assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_key_exits_two() {
  let tmp = tempfile::tempdir().unwrap();
  std::fs::write(tmp.path().join("c.json"), r#"{"experiment":"verify","params":{"kapa":0.9}}"#).unwrap();
  let out = lab(&["verify", "--config", "c.json"], tmp.path());
  assert_eq!(out.status.code(), Some(2));
  assert!(String::from_utf8_lossy(&out.stderr).contains("kapa"));
}

#[test]
fn missing_config_file_exits_five() {
  let tmp = tempfile::tempdir().unwrap();
  assert_eq!(lab(&["verify", "--config", "absent.json"], tmp.path()).status.code(), Some(5));
}

#[test]
fn refused_iteration_start_exits_four() {
  let tmp = tempfile::tempdir().unwrap();
  let out = lab(&["nash-moser", "--kappa", "0.9", "--cells", "40"], tmp.path());
  assert_eq!(out.status.code(), Some(4));
}

#[test]
fn help_documents_exit_codes() {
  let tmp = tempfile::tempdir().unwrap();
  let help = String::from_utf8(lab(&["--help"], tmp.path()).stdout).unwrap();
  for code in 0..=5 {
    assert!(help.contains(&format!("  {code}  ")), "code {code} missing");
  }
}

#[test]
fn summary_exit_code_follows_verdicts() {
  let tmp = tempfile::tempdir().unwrap();
  let ok = lab(&["verify", "--cells", "20"], tmp.path());
  assert_eq!(ok.status.code(), Some(0));
  let bad = lab(&["evolve-linear", "--cells", "40", "--kappa", "0.999"], tmp.path());
  assert_eq!(bad.status.code(), Some(1));
  let manifests: Vec<String> = std::fs::read_dir(tmp.path().join("out"))
    .unwrap()
    .map(|e| e.unwrap().path().join("manifest.json").to_string_lossy().into_owned())
    .collect();
  assert_eq!(manifests.len(), 2);
  let verify: Vec<&str> = manifests.iter().filter(|m| m.contains("verify_")).map(String::as_str).collect();
  let mut args = vec!["summary"];
  assert_eq!(lab(&[args.as_slice(), &verify].concat(), tmp.path()).status.code(), Some(0));
  args.extend(manifests.iter().map(String::as_str));
  let mixed = lab(&args, tmp.path());
  assert_eq!(mixed.status.code(), Some(1));
  assert!(String::from_utf8_lossy(&mixed.stdout).contains("FAIL"));
}

#[test]
fn reference_verify_summary_matches_golden() {
  let tmp = tempfile::tempdir().unwrap();
  let out = lab(&["verify"], tmp.path());
  assert_eq!(out.status.code(), Some(0));
  let dir = std::fs::read_dir(tmp.path().join("out")).unwrap().next().unwrap().unwrap().path();
  let got = lab(&["summary", dir.join("manifest.json").to_str().unwrap()], tmp.path());
  let golden = include_str!("golden/verify_summary.txt");
  assert_eq!(String::from_utf8(got.stdout).unwrap(), golden);
}

proptest! {
  #[test]
  fn written_series_parse_back_bitwise(
    rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 0..20)
  ) {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.csv");
    let d = write_series(&rows, &["a", "b", "c"], &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    prop_assert_eq!(d, output::digest(&bytes));
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let back: Vec<Vec<f64>> = r.records().map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect()).collect();
    prop_assert_eq!(back.len(), rows.len());
    for (a, b) in back.iter().zip(&rows) {
      prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
  }
}
