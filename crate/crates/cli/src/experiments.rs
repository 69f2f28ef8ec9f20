use crate::config::{Experiment, ExperimentConfig};
use crate::output::{digest, write_bytes, write_json, write_series};
use crate::CliError;
use lightcone_core::diffsys::{growth_profile, jordan_verify, ttilde_compare, window_transform};
use lightcone_core::io::write_checkpoint;
use lightcone_core::linearized::{evolve, evolve_nonlinear, Background, EvolveOptions, FieldState, NonlinearOptions};
use lightcone_core::nashmoser::{run_iteration, zero_start, ScheduleParams};
use lightcone_core::profiles::{
  kappa_threshold, membrane_residual, ode_residual, origin_second_derivative, ExplicitSolution, SelfSimilarProfile,
  Sign, SimilarityFrame,
};
use lightcone_core::random::{smooth_field, stream};
use lightcone_core::spectral::{
  assemble_operator, brute_force_edges, discrete_spectrum, dissipativity_check, max_real_part, newton_polygon,
  ratio_diagnostics, stable_root_check, unperturbed_modes, FrobeniusSeries,
};
use lightcone_core::{Complex64, RadialGrid};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
  pub name: String,
  pub sha256: String,
}

/// One threshold comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
  pub name: String,
  pub value: f64,
  pub threshold: String,
  pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
  pub config: ExperimentConfig,
  pub version: String,
  pub wall_time_s: f64,
  pub output_dir: String,
  pub files: Vec<FileDigest>,
  pub metrics: BTreeMap<String, f64>,
  pub checks: Vec<Check>,
  pub notes: Vec<String>,
  pub pass: bool,
}

impl RunManifest {
  /// Recomputes every digest from the files on disk.
  pub fn verify_digests(&self) -> Result<bool, CliError> {
    for f in &self.files {
      let path = Path::new(&self.output_dir).join(&f.name);
      let bytes = std::fs::read(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
      if digest(&bytes) != f.sha256 {
        return Ok(false);
      }
    }
    Ok(true)
  }
}

/// Accumulates outputs and measurements for one run.
struct Run {
  dir: PathBuf,
  files: Vec<FileDigest>,
  metrics: BTreeMap<String, f64>,
  checks: Vec<Check>,
  notes: Vec<String>,
  experiment: Experiment,
}

impl Run {
  fn module<T>(&self, r: lightcone_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Module { experiment: self.experiment.name().into(), source })
  }

  fn series(&mut self, name: &str, schema: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let d = write_series(rows, schema, &self.dir.join(name))?;
    self.files.push(FileDigest { name: name.into(), sha256: d });
    Ok(())
  }

  fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
    let d = write_json(value, &self.dir.join(name))?;
    self.files.push(FileDigest { name: name.into(), sha256: d });
    Ok(())
  }

  fn metric(&mut self, key: &str, value: f64) {
    self.metrics.insert(key.into(), value);
  }

  fn check(&mut self, name: &str, value: f64, threshold: &str, pass: bool) {
    self.checks.push(Check { name: name.into(), value, threshold: threshold.into(), pass });
  }
}

/// `<out>/<experiment>_<first 12 hex digits of the config digest>`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
  let d = digest(cfg.to_json().as_bytes());
  Path::new(&cfg.params.out).join(format!("{}_{}", cfg.experiment.name(), &d[..12]))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
  cfg.validate()?;
  let start = Instant::now();
  let dir = output_dir(cfg);
  std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
  let mut run = Run {
    dir: dir.clone(),
    files: Vec::new(),
    metrics: BTreeMap::new(),
    checks: Vec::new(),
    notes: Vec::new(),
    experiment: cfg.experiment,
  };
  let outcome = match cfg.experiment {
    Experiment::Verify => verify(cfg, &mut run),
    Experiment::Spectrum => spectrum(cfg, &mut run),
    Experiment::Frobenius => frobenius(cfg, &mut run),
    Experiment::NewtonPolygon => polygon(cfg, &mut run),
    Experiment::EvolveLinear => evolve_linear(cfg, &mut run),
    Experiment::EvolveNonlinear => evolve_full(cfg, &mut run),
    Experiment::NashMoser => nash_moser(cfg, &mut run),
    Experiment::AppendixCheck => appendix(cfg, &mut run),
  };
  if let Err(e) = outcome {
    // leave no half-written run behind
    let _ = std::fs::remove_dir_all(&dir);
    return Err(e);
  }
  let mut manifest = RunManifest {
    config: cfg.clone(),
    version: env!("CARGO_PKG_VERSION").into(),
    wall_time_s: 0.0,
    output_dir: dir.to_string_lossy().into_owned(),
    pass: run.checks.iter().all(|c| c.pass),
    files: run.files,
    metrics: run.metrics,
    checks: run.checks,
    notes: run.notes,
  };
  manifest.wall_time_s = start.elapsed().as_secs_f64();
  write_json(&manifest, &dir.join("manifest.json"))?;
  Ok(manifest)
}

fn grid(cfg: &ExperimentConfig, run: &Run) -> Result<RadialGrid, CliError> {
  run.module(RadialGrid::new(cfg.params.sigma, cfg.params.cells))
}

fn verify(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  let big_t = cfg.params.t_blowup;
  let mut rows = Vec::new();
  for (k, sign) in [Sign::Plus, Sign::Minus].into_iter().enumerate() {
    let pts: Vec<(f64, f64)> = (0..40)
      .flat_map(|i| {
        let t = 0.95 * big_t * i as f64 / 40.0;
        (1..=25).map(move |j| (t, 0.9 * (big_t - t) * j as f64 / 25.0))
      })
      .collect();
    let rep = run.module(membrane_residual(&ExplicitSolution { t_blowup: big_t, sign }, &pts))?;
    run.metric(if k == 0 { "max_residual_plus" } else { "max_residual_minus" }, rep.max_abs);
    rows.extend(rep.samples.iter().map(|&(t, r, e)| vec![sign.value(), t, r, e]));
  }
  run.series("residual.csv", &["sign", "t", "r", "residual"], &rows)?;
  let worst = run.metrics["max_residual_plus"].max(run.metrics["max_residual_minus"]);
  run.check("membrane residual", worst, "<= 1e-10", worst <= 1e-10);

  let frame = run.module(SimilarityFrame::with_defaults(big_t, cfg.params.sigma, cfg.params.kappa))?;
  let mut rate_rows = Vec::new();
  let mut rate_err = 0.0f64;
  for k in 1..=20 {
    let t = big_t * (1.0 - 2f64.powi(-k));
    let got = run.module(origin_second_derivative(&frame, Sign::Plus, t))?;
    let want = 1.0 / (big_t - t);
    rate_err = rate_err.max((got - want).abs() / want);
    rate_rows.push(vec![k as f64, t, got, want]);
  }
  run.series("blowup_rate.csv", &["k", "t", "curvature", "expected"], &rate_rows)?;
  run.check("blowup rate relative error", rate_err, "< 1e-12", rate_err < 1e-12);

  let profile = SelfSimilarProfile::new(Sign::Plus);
  let mut ode = 0.0f64;
  for i in 0..1000 {
    let rho = 0.01 + 0.98 * i as f64 / 999.0;
    ode = ode.max(run.module(ode_residual(&profile, rho))?.abs());
  }
  run.metric("profile_ode_residual", ode);
  run.check("profile ODE residual", ode, "<= 1e-12", ode <= 1e-12);

  let modes = unperturbed_modes();
  let root_err = (modes.roots[0] - 1.0).abs().max((modes.roots[1] + 4.0).abs());
  run.check("unperturbed roots {1, -4}", root_err, "<= 1e-14", root_err <= 1e-14 && modes.verdict == "mode unstable");
  if modes.quoted_roots_differ {
    run.notes.push(format!(
      "quoted roots {:?} do not solve v'' + 3v' - 4v = 0 (residual {}); computed {:?}",
      modes.quoted_roots, modes.quoted_residual, modes.roots
    ));
  }
  let threshold = run.module(kappa_threshold(big_t, big_t, cfg.params.sigma, cfg.params.eps))?;
  run.metric("kappa_threshold", threshold);
  run.json("modes.json", &modes)?;
  Ok(())
}

fn spectrum(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  let g = grid(cfg, run)?;
  let m = run.module(assemble_operator(&g, cfg.params.kappa))?;
  let ev = run.module(discrete_spectrum(&m))?;
  let top = max_real_part(&ev);
  run.series("eigenvalues.csv", &["re", "im"], &ev.iter().map(|z| vec![z.re, z.im]).collect::<Vec<_>>())?;
  let ev0 = run.module(lightcone_core::spectral::eigenvalues(&m.a0))?;
  let diss = run.module(dissipativity_check(&m, 100, cfg.params.seed))?;
  run.metric("max_re_eigenvalue", top);
  run.metric("max_re_eigenvalue_a0", max_real_part(&ev0));
  run.metric("dissipativity_excursion", diss);
  run.metric("split_defect", m.split_defect());
  run.check("max Re eigenvalue", top, "< 0", top < 0.0);
  run.check("dissipativity excursion", diss, "<= 1e-8", diss <= 1e-8);
  Ok(())
}

fn frobenius(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  let kappa = cfg.params.kappa;
  let nu = run.module(stable_root_check(0, kappa))?.roots[0];
  let s = run.module(FrobeniusSeries::with_default_seeds(nu, kappa, 2005))?;
  let d = run.module(ratio_diagnostics(&s, 1500..2001, 0.25))?;
  let nan = Complex64::new(f64::NAN, f64::NAN);
  let rows: Vec<Vec<f64>> = (0..d.n.len())
    .map(|i| {
      let (r, dd) = (d.r[i].unwrap_or(nan), d.d[i].unwrap_or(nan));
      vec![d.n[i] as f64, r.re, r.im, dd.re, dd.im, s.relative_residual(d.n[i])]
    })
    .collect();
  run.series("ratios.csv", &["n", "R_re", "R_im", "d_re", "d_im", "relative_residual"], &rows)?;
  let dev = d.max_d_deviation();
  let res = s.max_relative_residual();
  run.metric("nu_re", nu.re);
  run.metric("nu_im", nu.im);
  run.metric("max_d_deviation", dev);
  run.metric("max_relative_residual", res);
  run.check("recurrence residual", res, "<= 1e-10", res <= 1e-10);
  run.check("|d_n - 1| on [1500, 2000]", dev, "< 0.01", dev < 0.01);

  let mut sweep = Vec::new();
  let mut disagree = 0;
  for i in 0..10 {
    let k = 0.9 + 0.099 * i as f64 / 9.0;
    for n in 0..=100 {
      let r = run.module(stable_root_check(n, k))?;
      disagree += usize::from(r.hurwitz != r.all_stable);
      let [a, b] = r.roots;
      sweep.push(vec![k, n as f64, a.re, a.im, b.re, b.im, f64::from(u8::from(r.hurwitz)), f64::from(u8::from(r.all_stable))]);
    }
  }
  run.series("root_sweep.csv", &["kappa", "n", "re1", "im1", "re2", "im2", "hurwitz", "stable"], &sweep)?;
  run.check("Routh-Hurwitz agreement", disagree as f64, "== 0", disagree == 0);
  Ok(())
}

fn polygon(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  let pts = cfg.params.points.clone().unwrap_or_else(|| vec![[2.0, 0.0], [1.5, 2.0], [1.0, 4.0]]);
  let p = newton_polygon(&pts);
  let oracle = brute_force_edges(&pts);
  run.json("newton_polygon.json", &p)?;
  if let Some(x) = p.xbar {
    run.metric("xbar", x);
  }
  run.metric("edges", p.edges.len() as f64);
  run.check("brute-force hull agreement", f64::from(u8::from(p.edges == oracle.edges)), "== 1", p.edges == oracle.edges);
  Ok(())
}

fn evolve_linear(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  let g = grid(cfg, run)?;
  let n = g.n_cells();
  let v: Vec<f64> = smooth_field(&g, 6, &mut stream(cfg.params.seed, 0)).iter().map(|x| cfg.params.eps * x).collect();
  let s = run.module(FieldState::new(v, vec![0.0; n], 0.0))?;
  let opts = EvolveOptions { tau_max: cfg.params.tau_max.unwrap_or(20.0), dt: cfg.params.dt, ..EvolveOptions::default() };
  let r = run.module(evolve(&g, &s, cfg.params.kappa, &Background::Zero, false, &opts))?;
  let rows: Vec<Vec<f64>> = r.rows.iter().map(|x| x.as_array().to_vec()).collect();
  run.series("trajectory.csv", &["tau", "energy_L2", "energy_bracket", "h1_norm", "boundary_flux"], &rows)?;
  let mut bytes = Vec::new();
  run.module(write_checkpoint(&mut bytes, cfg.params.sigma, cfg.params.kappa, &r.state))?;
  let d = write_bytes(&bytes, &run.dir.join("final_state.lcl"))?;
  run.files.push(FileDigest { name: "final_state.lcl".into(), sha256: d });
  let rise = r.bracket_max_increase / r.bracket_initial.abs();
  run.metric("decay_rate", r.decay.rate);
  run.metric("decay_r_squared", r.decay.r_squared);
  run.metric("bracket_max_rise", rise);
  run.metric("dt", r.dt);
  run.check("decay rate", r.decay.rate, "< 0", r.decay.rate < 0.0);
  run.check("fit r^2", r.decay.r_squared, "> 0.99", r.decay.r_squared > 0.99);
  run.check("energy bracket rise per step / |E(0)|", rise, "<= 1e-6", rise <= 1e-6);
  Ok(())
}

fn evolve_full(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  let g = grid(cfg, run)?;
  let sigma = cfg.params.sigma;
  let eps = cfg.params.eps;
  let v = g.sample(|r| eps * (4.0 * r * (sigma - r) / (sigma * sigma)).powi(2));
  let s = run.module(FieldState::new(v, vec![0.0; g.n_cells()], 0.0))?;
  let opts = NonlinearOptions {
    tau_max: cfg.params.tau_max.unwrap_or(5.0),
    dt: cfg.params.dt,
    t_blowup: cfg.params.t_blowup,
    ..NonlinearOptions::default()
  };
  match evolve_nonlinear(&g, &s, cfg.params.kappa, &opts) {
    Ok(r) => {
      let rows: Vec<Vec<f64>> =
        r.rows.iter().map(|x| vec![x.tau, x.energy_l2, x.h1_norm, x.physical_ratio]).collect();
      run.series("trajectory.csv", &["tau", "energy_L2", "h1_norm", "physical_ratio"], &rows)?;
      let growth = r.ratio_growth();
      run.metric("ratio_growth", growth);
      run.metric("max_h1", r.max_h1());
      run.metric("dt", r.dt);
      run.check("physical ratio / initial", growth, "<= 10", growth <= 10.0);
    }
    Err(e) => {
      // blowup and loss of hyperbolicity are findings, not harness failures
      run.notes.push(format!("evolution stopped: {e}"));
      run.check("evolution completed", 0.0, "== 1", false);
    }
  }
  Ok(())
}

fn nash_moser(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  let g = grid(cfg, run)?;
  let schedule = ScheduleParams { tau_horizon: cfg.params.tau_max.unwrap_or(10.0), dt: cfg.params.dt, ..Default::default() };
  let w0 = zero_start(&g, cfg.params.kappa, &schedule);
  let r = run.module(run_iteration(w0, cfg.params.kappa, &g, &schedule))?;
  let report = r.report();
  run.json("convergence.json", &report)?;
  let rows: Vec<Vec<f64>> =
    report.steps.iter().map(|s| vec![s.m as f64, s.norm_h, s.norm_e, s.c_m, s.solve_ratio, s.k_m]).collect();
  run.series("history.csv", &["m", "norm_h", "norm_E", "c_m", "solve_ratio", "k_m"], &rows)?;
  let max_c = report.steps.iter().map(|s| s.c_m).fold(0.0, f64::max);
  run.metric("initial_error", r.initial_error);
  run.metric("final_error", r.final_error());
  run.metric("steps", r.state.m as f64);
  run.metric("max_c_m", max_c);
  run.metric("accumulation_defect", r.state.accumulation_defect());
  for (i, x) in report.doubling_ratios.iter().enumerate() {
    run.metric(&format!("doubling_ratio_{}", i + 1), *x);
  }
  if max_c > schedule.c_cap {
    run.notes.push(format!("quadratic error bound exceeded the cap {}: max c_m = {max_c}", schedule.c_cap));
  }
  if !r.converged() {
    run.notes.push(format!("iteration stopped: {}", report.stop));
  }
  let ratios = &report.doubling_ratios[..report.doubling_ratios.len().min(4)];
  let in_bracket = ratios.len() == 4 && ratios.iter().all(|x| (1.5..=2.5).contains(x));
  run.check("converged", r.final_error(), "< 1e-8", r.converged() && r.final_error() < 1e-8);
  run.check("doubling ratios m = 1..4", ratios.first().copied().unwrap_or(f64::NAN), "in [1.5, 2.5]", in_bracket);
  Ok(())
}

fn appendix(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
  #[derive(Serialize)]
  struct Appendix {
    jordan_identities: bool,
    window_transforms_n_1_to_50: bool,
    samples: Vec<(u64, [f64; 2], f64)>,
    closed_form_mismatches: Vec<(usize, usize)>,
  }
  run.module(jordan_verify())?;
  for n in 1..=50 {
    run.module(window_transform(n))?;
  }
  let mut rng = stream(cfg.params.seed, 1);
  let mut samples = Vec::new();
  let mut bad = Vec::new();
  for _ in 0..20 {
    let n = rng.gen_range(1..=1000u64);
    let nu = Complex64::new(rng.gen_range(-3.0..0.0), rng.gen_range(-2.0..2.0));
    let kappa = rng.gen_range(0.9..0.999);
    let c = run.module(ttilde_compare(n, nu, kappa, 1e-10))?;
    bad.extend(c.mismatches.iter().map(|m| (m.0, m.1)));
    samples.push((n, [nu.re, nu.im], kappa));
  }
  bad.sort_unstable();
  bad.dedup();
  run.check("closed-form entries matching the product", (16 - bad.len()) as f64, "== 16", bad.is_empty());
  run.json(
    "appendix.json",
    &Appendix { jordan_identities: true, window_transforms_n_1_to_50: true, samples, closed_form_mismatches: bad },
  )?;

  let nu = run.module(stable_root_check(0, cfg.params.kappa))?.roots[0];
  let diag = run.module(growth_profile(nu, cfg.params.kappa, 10_000, 1, true))?;
  let full = run.module(growth_profile(nu, cfg.params.kappa, 10_000, 1, false))?;
  let rows: Vec<Vec<f64>> =
    diag.n.iter().zip(diag.log_norm.iter().zip(&full.log_norm)).map(|(n, (a, b))| vec![*n as f64, *a, *b]).collect();
  run.series("growth.csv", &["n", "log_norm_diagonal", "log_norm_full"], &rows)?;
  let tele = diag.n.iter().zip(&diag.log_norm).take(1001).map(|(n, l)| (l.exp() / *n as f64 - 1.0).abs()).fold(0.0, f64::max);
  let from = full.n.iter().position(|&n| n >= 100).unwrap_or(0);
  let monotone = full.log_norm[from..].windows(2).all(|w| w[1] > w[0]);
  run.metric("telescoping_error", tele);
  run.metric("full_log_norm_final", *full.log_norm.last().unwrap());
  run.check("diagonal telescoping to n = 1000", tele, "<= 1e-9", tele <= 1e-9);
  run.check("full norms increasing after n = 100", f64::from(u8::from(monotone)), "== 1", monotone);
  Ok(())
}
