use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghost_ising::runner::{self, Command, ExperimentConfig, Tolerances};
use ghost_ising::{Error, KvBlock, Result};

/// Critical 2D Ising model in a field: exact enumeration, FK-ghost
/// sampling, event detection, mass scans and transfer matrices.
#[derive(Parser, Debug)]
#[command(name = "ghost-ising", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Full distribution of a tiny lattice (spins, bonds or joint).
    Enumerate(RunFlags),
    /// Swendsen–Wang or Wolff chain with an observable time series.
    Sample(RunFlags),
    /// Event detectors evaluated over a Swendsen–Wang stream.
    Events(RunFlags),
    /// Correlation-length fits over a grid of fields.
    MassScan(RunFlags),
    /// Transfer-matrix spectra over widths and fields.
    TmScan(RunFlags),
    /// Scaling comparison of two runs at different spacings.
    ScalingCheck(RunFlags),
    /// Compare a produced CSV against a reference CSV.
    Compare(CompareFlags),
}

/// Flags override entries of the `--config` file, which override defaults.
#[derive(Args, Debug, Default)]
struct RunFlags {
    /// Plain-text config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw configuration entry, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,

    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    height: Option<String>,
    #[arg(long)]
    spacing: Option<String>,
    /// free, plus, wired, periodic or cylinder.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Lattice field H.
    #[arg(long = "field", short = 'H')]
    field: Option<String>,
    /// Comma-separated field grid.
    #[arg(long)]
    h_grid: Option<String>,
    /// Comma-separated strip widths.
    #[arg(long)]
    widths: Option<String>,
    /// Vertical boundary of transfer-matrix strips: free or periodic.
    #[arg(long)]
    vertical: Option<String>,
    /// Total sweeps, burn-in included.
    #[arg(long)]
    sweeps: Option<String>,
    /// Sweep count or `auto`.
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    thin: Option<String>,
    /// sw or wolff.
    #[arg(long)]
    algorithm: Option<String>,
    /// Comma-separated observables.
    #[arg(long)]
    observables: Option<String>,
    /// Comma-separated detectors.
    #[arg(long)]
    detectors: Option<String>,
    /// Skip re-validation of event witnesses.
    #[arg(long)]
    no_validate: bool,
    /// spins, bonds or joint.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    max_separation: Option<String>,
    /// axis, horizontal, vertical, radial or column-sum.
    #[arg(long)]
    direction: Option<String>,
    /// `auto` or `rmin:rmax`.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    little_h: Option<String>,
    #[arg(long)]
    b_width: Option<String>,
    #[arg(long)]
    b_height: Option<String>,
    #[arg(long)]
    b_spacing: Option<String>,
    #[arg(long)]
    b_boundary: Option<String>,
    /// Comma-separated `x0:y0:x1:y1` test boxes.
    #[arg(long)]
    boxes: Option<String>,
    /// Fail when any scaling discrepancy exceeds this many errors.
    #[arg(long)]
    max_z: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output CSV path; defaults to `$GHOST_ISING_OUT_DIR/<command>.csv`.
    #[arg(long, short)]
    output: Option<String>,
    /// Write the final chain state here.
    #[arg(long)]
    checkpoint: Option<String>,
    /// Continue from a checkpoint file.
    #[arg(long)]
    resume: Option<String>,
}

#[derive(Args, Debug)]
struct CompareFlags {
    produced: PathBuf,
    reference: PathBuf,
    /// `column=abs:rel`, repeatable; column `*` sets the default.
    #[arg(long = "tol")]
    tol: Vec<String>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl RunFlags {
    fn entries(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("width", &self.width),
            ("height", &self.height),
            ("spacing", &self.spacing),
            ("boundary", &self.boundary),
            ("beta", &self.beta),
            ("H", &self.field),
            ("h_grid", &self.h_grid),
            ("widths", &self.widths),
            ("vertical", &self.vertical),
            ("sweeps", &self.sweeps),
            ("burn_in", &self.burn_in),
            ("thin", &self.thin),
            ("algorithm", &self.algorithm),
            ("observables", &self.observables),
            ("detectors", &self.detectors),
            ("kind", &self.kind),
            ("max_separation", &self.max_separation),
            ("direction", &self.direction),
            ("window", &self.window),
            ("lambda", &self.lambda),
            ("little_h", &self.little_h),
            ("b.width", &self.b_width),
            ("b.height", &self.b_height),
            ("b.spacing", &self.b_spacing),
            ("b.boundary", &self.b_boundary),
            ("boxes", &self.boxes),
            ("max_z", &self.max_z),
            ("seed", &self.seed),
            ("output", &self.output),
            ("checkpoint", &self.checkpoint),
            ("resume", &self.resume),
        ]
    }

    fn resolve(&self, command: Command) -> Result<ExperimentConfig> {
        let mut kv = match &self.config {
            Some(path) => std::fs::read_to_string(path)?.parse::<KvBlock>()?,
            None => KvBlock::default(),
        };
        if let Some(c) = kv.get("command") {
            if c.trim() != command.name() {
                return Err(Error::Config(format!(
                    "config file is for '{}' but the subcommand is '{command}'",
                    c.trim()
                )));
            }
        }
        kv.set("command", command);
        for (key, value) in self.entries() {
            if let Some(v) = value {
                kv.set(key, v);
            }
        }
        if self.no_validate {
            kv.set("validate_witnesses", false);
        }
        for entry in &self.set {
            let (k, v) = entry
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got '{entry}'")))?;
            kv.set(k.trim(), v.trim());
        }
        ExperimentConfig::from_kv(&kv)
    }
}

fn run(flags: &RunFlags, command: Command) -> Result<()> {
    let cfg = flags.resolve(command)?;
    if flags.print_config {
        print!("{}", cfg.to_kv());
        return Ok(());
    }
    let outcome = runner::run(&cfg)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("wrote {}", outcome.csv.display());
    if let Some(j) = outcome.json {
        println!("wrote {}", j.display());
    }
    Ok(())
}

fn compare(flags: &CompareFlags) -> Result<()> {
    let mut tol = Tolerances::default();
    for t in &flags.tol {
        tol.add(t)?;
    }
    let report = runner::compare_files(&flags.produced, &flags.reference, &tol)?;
    let json = report.to_json();
    match &flags.report {
        Some(p) => std::fs::write(p, &json)?,
        None => println!("{json}"),
    }
    if report.passed {
        Ok(())
    } else {
        let first = &report.mismatches[0];
        Err(Error::Assertion(format!(
            "{} mismatches, first at row {} column {}: {}",
            report.mismatches.len(),
            first.row,
            first.column,
            first.reason
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Sub::Enumerate(f) => run(f, Command::Enumerate),
        Sub::Sample(f) => run(f, Command::Sample),
        Sub::Events(f) => run(f, Command::Events),
        Sub::MassScan(f) => run(f, Command::MassScan),
        Sub::TmScan(f) => run(f, Command::TmScan),
        Sub::ScalingCheck(f) => run(f, Command::ScalingCheck),
        Sub::Compare(f) => compare(f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
