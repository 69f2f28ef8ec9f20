use clap::{Args, Parser, Subcommand};
use lightcone_cli::{exit, load_config, run_experiment, summary, CliError, Experiment, ExperimentConfig, RunManifest};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CODES: &str = "\
Exit codes:
  0  run finished and every check passed
  1  run finished but a check failed (or summary saw a failed run)
  2  unreadable command line or config (parse error, unknown key)
  3  parameter out of range
  4  numerical module error (for example a refused Nash-Moser start)
  5  file I/O error";

#[derive(Parser)]
#[command(name = "lightcone-lab", version, about = "Experiments on lightlike self-similar membrane solutions", after_help = EXIT_CODES)]
struct Cli {
  #[command(subcommand)]
  command: Command,
}

#[derive(Subcommand)]
enum Command {
  /// Run one experiment and write its outputs and manifest.json.
  #[command(after_help = EXIT_CODES)]
  Run {
    #[arg(value_enum)]
    experiment: Experiment,
    #[command(flatten)]
    overrides: Overrides,
  },
  /// Tabulate manifests and their checks.
  #[command(after_help = EXIT_CODES)]
  Summary {
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
  },
}

#[derive(Args)]
struct Overrides {
  /// JSON config; flags override its keys.
  #[arg(long)]
  config: Option<PathBuf>,
  #[arg(long)]
  kappa: Option<f64>,
  #[arg(long)]
  sigma: Option<f64>,
  #[arg(long)]
  cells: Option<usize>,
  /// Output root; each run writes to <out>/<experiment>_<digest>.
  #[arg(long)]
  out: Option<String>,
  #[arg(long)]
  seed: Option<u64>,
}

fn config(experiment: Experiment, o: Overrides) -> Result<ExperimentConfig, CliError> {
  let mut cfg = match &o.config {
    Some(p) => load_config(p)?,
    None => ExperimentConfig::new(experiment),
  };
  cfg.experiment = experiment;
  let p = &mut cfg.params;
  p.kappa = o.kappa.unwrap_or(p.kappa);
  p.sigma = o.sigma.unwrap_or(p.sigma);
  p.cells = o.cells.unwrap_or(p.cells);
  p.seed = o.seed.unwrap_or(p.seed);
  if let Some(out) = o.out {
    p.out = out;
  }
  cfg.validate()?;
  Ok(cfg)
}

fn read_manifest(path: &PathBuf) -> Result<RunManifest, CliError> {
  let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
  serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
  // bare `lightcone-lab <experiment>` is shorthand for `run <experiment>`
  let mut argv: Vec<String> = std::env::args().collect();
  if argv.get(1).is_some_and(|a| Experiment::ALL.iter().any(|e| e.name() == a)) {
    argv.insert(1, "run".into());
  }
  let cli = Cli::parse_from(argv);
  let result = match cli.command {
    Command::Run { experiment, overrides } => config(experiment, overrides).and_then(|cfg| {
      let m = run_experiment(&cfg)?;
      let (text, ok) = summary(std::slice::from_ref(&m));
      print!("{text}");
      for n in &m.notes {
        println!("note: {n}");
      }
      println!("outputs: {}", m.output_dir);
      Ok(ok)
    }),
    Command::Summary { manifests } => manifests.iter().map(read_manifest).collect::<Result<Vec<_>, _>>().map(|ms| {
      let (text, ok) = summary(&ms);
      print!("{text}");
      ok
    }),
  };
  match result {
    Ok(true) => ExitCode::from(exit::OK),
    Ok(false) => ExitCode::from(exit::CHECK_FAILED),
    Err(e) => {
      eprintln!("error: {e}");
      ExitCode::from(e.exit_code())
    }
  }
}
