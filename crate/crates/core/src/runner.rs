//! Experiment configuration, subcommand dispatch and artifact files.
//!
//! Every run is a pure function of its [`ExperimentConfig`]; output CSV
//! files start with `# `-prefixed provenance lines (tool version, config
//! hash, seed and every configuration entry, defaults included) followed
//! by a header row and plain comma-separated data.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    exponent_fit, fit::fit_mass_jackknife, fit::CRITICAL_PREFACTOR, mean_estimate, scaling_check, CorrelationProfile,
    Direction, EstimatorResult, ExponentFit, FitWindow, MassFit, ProfileAccumulator, ScalingReport, ScalingRun,
    TestBox,
};
use crate::events::{
    block_good, detect_event_f, detect_event_g, necklace, validate_report, EventKind, EventReport, NecklaceQuery,
};
use crate::exact::{enumerate_fk_ghost, enumerate_ising, enumerate_joint_es, ConfigKind};
use crate::fk::{run_chain_from, Algorithm, BurnIn, ChainState, Observable, Schedule};
use crate::kv::KvBlock;
use crate::lattice::{build_graph, Boundary, FieldParams, LatticeSpec, Region, Site, SpinConfig};
use crate::scalar::beta_critical;
use crate::transfer::{tm_mass_scan, VerticalBoundary};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "GHOST_ISING_OUT_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    Enumerate,
    Sample,
    Events,
    MassScan,
    TmScan,
    ScalingCheck,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Enumerate,
        Command::Sample,
        Command::Events,
        Command::MassScan,
        Command::TmScan,
        Command::ScalingCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Enumerate => "enumerate",
            Command::Sample => "sample",
            Command::Events => "events",
            Command::MassScan => "mass-scan",
            Command::TmScan => "tm-scan",
            Command::ScalingCheck => "scaling-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown subcommand '{s}'")))
    }
}

fn kind_name(k: ConfigKind) -> &'static str {
    match k {
        ConfigKind::Spins => "spins",
        ConfigKind::Bonds => "bonds",
        ConfigKind::Joint => "joint",
    }
}

fn parse_kind(s: &str) -> Result<ConfigKind> {
    match s.trim() {
        "spins" => Ok(ConfigKind::Spins),
        "bonds" => Ok(ConfigKind::Bonds),
        "joint" => Ok(ConfigKind::Joint),
        other => Err(Error::Config(format!("unknown enumeration kind '{other}'"))),
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Axis => "axis",
        Direction::Horizontal => "horizontal",
        Direction::Vertical => "vertical",
        Direction::Radial => "radial",
        Direction::ColumnSum => "column-sum",
    }
}

fn parse_direction(s: &str) -> Result<Direction> {
    match s.trim() {
        "axis" => Ok(Direction::Axis),
        "horizontal" => Ok(Direction::Horizontal),
        "vertical" => Ok(Direction::Vertical),
        "radial" => Ok(Direction::Radial),
        "column-sum" => Ok(Direction::ColumnSum),
        other => Err(Error::Config(format!("unknown direction '{other}'"))),
    }
}

fn window_text(w: FitWindow) -> String {
    match w {
        FitWindow::Auto => "auto".into(),
        FitWindow::Range { r_min, r_max } => format!("{r_min}:{r_max}"),
    }
}

fn parse_window(s: &str) -> Result<FitWindow> {
    let s = s.trim();
    if s == "auto" {
        return Ok(FitWindow::Auto);
    }
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("fit window must be 'auto' or 'rmin:rmax', got '{s}'")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("bad fit window '{s}': {e}")))
    };
    Ok(FitWindow::Range {
        r_min: num(a)?,
        r_max: num(b)?,
    })
}

fn real(x: f64) -> String {
    format!("{x:?}")
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    split_list(s)
        .map(|t| t.parse::<T>().map_err(|e| Error::Config(format!("bad {what} entry '{t}': {e}"))))
        .collect()
}

fn parse_box(s: &str) -> Result<TestBox> {
    let v: Vec<f64> = s
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad test box '{s}': {e}")))?;
    if v.len() != 4 {
        return Err(Error::Config(format!("test box needs x0:y0:x1:y1, got '{s}'")));
    }
    TestBox::new(v[0], v[1], v[2], v[3])
}

fn box_text(b: &TestBox) -> String {
    format!("{}:{}:{}:{}", real(b.x0), real(b.y0), real(b.x1), real(b.y1))
}

/// Full description of one run. Every field has a default, and
/// [`ExperimentConfig::to_kv`] writes all of them.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub lattice: LatticeSpec,
    pub beta: f64,
    pub big_h: f64,
    /// Field grid for `mass-scan` and `tm-scan`.
    pub h_grid: Vec<f64>,
    /// Strip widths for `tm-scan`.
    pub widths: Vec<usize>,
    pub vertical: VerticalBoundary,
    pub sweeps: u64,
    pub burn_in: BurnIn,
    pub thin: u64,
    pub algorithm: Algorithm,
    pub observables: Vec<String>,
    pub detectors: Vec<String>,
    /// Re-validate every event witness; a failure is an assertion error.
    pub validate_witnesses: bool,
    pub kind: ConfigKind,
    pub max_separation: usize,
    pub direction: Direction,
    pub window: FitWindow,
    /// Second run of `scaling-check`.
    pub lattice_b: LatticeSpec,
    pub lambda: f64,
    /// Renormalized field of the first `scaling-check` run.
    pub little_h: f64,
    pub boxes: Vec<TestBox>,
    /// `scaling-check` fails when any discrepancy exceeds this many errors.
    pub max_z: Option<f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "command",
    "width",
    "height",
    "spacing",
    "boundary",
    "beta",
    "H",
    "h_grid",
    "widths",
    "vertical",
    "sweeps",
    "burn_in",
    "thin",
    "algorithm",
    "observables",
    "detectors",
    "validate_witnesses",
    "kind",
    "max_separation",
    "direction",
    "window",
    "b.width",
    "b.height",
    "b.spacing",
    "b.boundary",
    "lambda",
    "little_h",
    "boxes",
    "max_z",
    "seed",
    "output",
    "checkpoint",
    "resume",
];

impl ExperimentConfig {
    /// Defaults for `command`: a 4x4 free lattice at the critical point.
    pub fn new(command: Command) -> Self {
        let lattice = LatticeSpec::new(4, 4, Boundary::Free).expect("default lattice is valid");
        ExperimentConfig {
            command,
            lattice,
            beta: beta_critical(),
            big_h: 0.0,
            h_grid: Vec::new(),
            widths: Vec::new(),
            vertical: VerticalBoundary::Free,
            sweeps: 10_000,
            burn_in: BurnIn::Auto,
            thin: 1,
            algorithm: Algorithm::SwendsenWang,
            observables: vec!["magnetization".into(), "energy".into()],
            detectors: Vec::new(),
            validate_witnesses: true,
            kind: ConfigKind::Spins,
            max_separation: 8,
            direction: Direction::Axis,
            window: FitWindow::Auto,
            lattice_b: lattice,
            lambda: 1.0,
            little_h: 0.0,
            boxes: Vec::new(),
            max_z: None,
            seed: 0,
            output: None,
            checkpoint: None,
            resume: None,
        }
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::default();
        kv.set("command", self.command);
        kv.set("width", self.lattice.width);
        kv.set("height", self.lattice.height);
        kv.set("spacing", real(self.lattice.spacing));
        kv.set("boundary", self.lattice.boundary);
        kv.set("beta", real(self.beta));
        kv.set("H", real(self.big_h));
        kv.set("h_grid", join(&self.h_grid, |x| real(*x)));
        kv.set("widths", join(&self.widths, |w| w.to_string()));
        kv.set("vertical", self.vertical);
        kv.set("sweeps", self.sweeps);
        kv.set("burn_in", self.burn_in);
        kv.set("thin", self.thin);
        kv.set("algorithm", self.algorithm);
        kv.set("observables", self.observables.join(","));
        kv.set("detectors", self.detectors.join(","));
        kv.set("validate_witnesses", self.validate_witnesses);
        kv.set("kind", kind_name(self.kind));
        kv.set("max_separation", self.max_separation);
        kv.set("direction", direction_name(self.direction));
        kv.set("window", window_text(self.window));
        kv.set("b.width", self.lattice_b.width);
        kv.set("b.height", self.lattice_b.height);
        kv.set("b.spacing", real(self.lattice_b.spacing));
        kv.set("b.boundary", self.lattice_b.boundary);
        kv.set("lambda", real(self.lambda));
        kv.set("little_h", real(self.little_h));
        kv.set("boxes", join(&self.boxes, box_text));
        kv.set("max_z", self.max_z.map_or_else(|| "none".into(), real));
        kv.set("seed", self.seed);
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(String::new, |p| p.display().to_string());
        kv.set("output", path(&self.output));
        kv.set("checkpoint", path(&self.checkpoint));
        kv.set("resume", path(&self.resume));
        kv
    }

    /// Parses a configuration block. `command` is required; every other
    /// key falls back to its default. Unknown keys are rejected.
    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        if let Some((k, _)) = kv.iter().find(|(k, _)| !KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown configuration key '{k}'")));
        }
        let command: Command = kv.parse("command")?;
        let d = Self::new(command);
        let lattice = LatticeSpec {
            width: kv.parse_or("width", d.lattice.width)?,
            height: kv.parse_or("height", d.lattice.height)?,
            spacing: kv.parse_or("spacing", d.lattice.spacing)?,
            boundary: kv.parse_or("boundary", d.lattice.boundary)?,
        };
        lattice.validate()?;
        let lattice_b = LatticeSpec {
            width: kv.parse_or("b.width", lattice.width)?,
            height: kv.parse_or("b.height", lattice.height)?,
            spacing: kv.parse_or("b.spacing", lattice.spacing)?,
            boundary: kv.parse_or("b.boundary", lattice.boundary)?,
        };
        lattice_b.validate()?;
        let text = |k: &str| kv.get(k).unwrap_or("");
        let opt_path = |k: &str| {
            let t = text(k).trim();
            (!t.is_empty()).then(|| PathBuf::from(t))
        };
        let max_z = match kv.get("max_z").map(str::trim) {
            None | Some("none") | Some("") => None,
            Some(t) => Some(
                t.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad max_z '{t}': {e}")))?,
            ),
        };
        let cfg = ExperimentConfig {
            command,
            lattice,
            beta: kv.parse_or("beta", d.beta)?,
            big_h: kv.parse_or("H", d.big_h)?,
            h_grid: parse_list(text("h_grid"), "h_grid")?,
            widths: parse_list(text("widths"), "widths")?,
            vertical: kv.parse_or("vertical", d.vertical)?,
            sweeps: kv.parse_or("sweeps", d.sweeps)?,
            burn_in: kv.parse_or("burn_in", d.burn_in)?,
            thin: kv.parse_or("thin", d.thin)?,
            algorithm: kv.parse_or("algorithm", d.algorithm)?,
            observables: match kv.get("observables") {
                Some(t) => split_list(t).map(String::from).collect(),
                None => d.observables,
            },
            detectors: split_list(text("detectors")).map(String::from).collect(),
            validate_witnesses: kv.parse_or("validate_witnesses", d.validate_witnesses)?,
            kind: kv.get("kind").map_or(Ok(d.kind), parse_kind)?,
            max_separation: kv.parse_or("max_separation", d.max_separation)?,
            direction: kv.get("direction").map_or(Ok(d.direction), parse_direction)?,
            window: kv.get("window").map_or(Ok(d.window), parse_window)?,
            lattice_b,
            lambda: kv.parse_or("lambda", d.lambda)?,
            little_h: kv.parse_or("little_h", d.little_h)?,
            boxes: split_list(text("boxes")).map(parse_box).collect::<Result<_>>()?,
            max_z,
            seed: kv.parse_or("seed", d.seed)?,
            output: opt_path("output"),
            checkpoint: opt_path("checkpoint"),
            resume: opt_path("resume"),
        };
        Ok(cfg)
    }

    pub fn params(&self) -> Result<FieldParams<f64>> {
        FieldParams::new(self.beta, self.big_h)
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            thin: self.thin,
            algorithm: self.algorithm,
        }
    }

    /// Checks the parts of the configuration the command uses.
    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        let needs_grid = |what: &str| Error::InvalidParams(format!("{} needs a non-empty {what}", self.command));
        match self.command {
            Command::Enumerate => {
                self.params()?;
            }
            Command::Sample | Command::Events => {
                self.params()?;
                self.schedule().validate()?;
                if self.command == Command::Events && self.detectors.is_empty() {
                    return Err(needs_grid("detector list"));
                }
            }
            Command::MassScan => {
                if self.h_grid.is_empty() {
                    return Err(needs_grid("H grid"));
                }
                for &h in &self.h_grid {
                    FieldParams::new(self.beta, h)?;
                }
                self.schedule().validate()?;
                if self.max_separation < 1 {
                    return Err(Error::InvalidParams("max_separation must be at least 1".into()));
                }
            }
            Command::TmScan => {
                if self.h_grid.is_empty() {
                    return Err(needs_grid("H grid"));
                }
                if self.widths.is_empty() {
                    return Err(needs_grid("width list"));
                }
            }
            Command::ScalingCheck => {
                self.lattice_b.validate()?;
                self.schedule().validate()?;
                if self.boxes.is_empty() {
                    return Err(needs_grid("test box list"));
                }
                if !(self.lambda > 0.0) || !(self.little_h >= 0.0) {
                    return Err(Error::InvalidParams("scaling-check needs lambda > 0 and h >= 0".into()));
                }
            }
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical configuration text.
    pub fn hash(&self) -> u64 {
        fnv1a64(self.to_kv().to_string().as_bytes())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent, reproducible seed for the `index`-th chain of a run.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Rectangular string table with a header row.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Header row and data rows, one record per line.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses CSV text, returning the `# ` comment lines (without the
    /// prefix) and the table.
    pub fn from_csv(text: &str) -> Result<(Vec<String>, Table)> {
        let mut comments = Vec::new();
        let mut table: Option<Table> = None;
        for (no, line) in text.lines().enumerate() {
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
            match table.as_mut() {
                None => {
                    table = Some(Table {
                        columns: fields,
                        rows: Vec::new(),
                    })
                }
                Some(t) => {
                    if fields.len() != t.columns.len() {
                        return Err(Error::Schema(format!(
                            "line {} has {} fields, header has {}",
                            no + 1,
                            fields.len(),
                            t.columns.len()
                        )));
                    }
                    t.rows.push(fields);
                }
            }
        }
        let table = table.ok_or_else(|| Error::Schema("no header row".into()))?;
        Ok((comments, table))
    }
}

/// Provenance lines for `cfg`.
pub fn provenance(cfg: &ExperimentConfig) -> Vec<String> {
    let mut lines = vec![
        format!("ghost-ising {VERSION}"),
        format!("config-hash = fnv1a64:{:016x}", cfg.hash()),
        format!("seed = {}", cfg.seed),
    ];
    lines.extend(cfg.to_kv().iter().map(|(k, v)| format!("config {k} = {v}")));
    lines
}

/// Re-parses the configuration recorded in a file's provenance lines and
/// checks it against the recorded hash.
pub fn verify_provenance(comments: &[String]) -> Result<ExperimentConfig> {
    let hash = comments
        .iter()
        .find_map(|c| c.strip_prefix("config-hash = fnv1a64:"))
        .ok_or_else(|| Error::Schema("missing config hash".into()))?;
    let text: String = comments
        .iter()
        .filter_map(|c| c.strip_prefix("config "))
        .map(|c| format!("{c}\n"))
        .collect();
    let cfg = ExperimentConfig::from_kv(&text.parse()?)?;
    let expected = format!("{:016x}", cfg.hash());
    if expected != hash.trim() {
        return Err(Error::Schema(format!("config hash {hash} does not match the recorded config ({expected})")));
    }
    Ok(cfg)
}

pub fn render_csv(cfg: &ExperimentConfig, extra: &[String], table: &Table) -> String {
    let mut out = String::new();
    for line in provenance(cfg).iter().chain(extra) {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&table.to_csv());
    out
}

/// Results of one run before they are written to disk.
#[derive(Clone, Debug, Default)]
pub struct RunArtifacts {
    pub table: Table,
    /// Extra provenance lines, e.g. the resolved burn-in.
    pub notes: Vec<String>,
    pub json: Option<serde_json::Value>,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
    /// Failed assertions; a non-empty list makes the run fail.
    pub failures: Vec<String>,
    pub checkpoint: Option<Vec<u8>>,
}

/// Paths written by [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub json: Option<PathBuf>,
    pub summary: Vec<String>,
}

/// Output CSV path: the configured path, else `<dir>/<command>.csv` with
/// `dir` from the environment or the working directory.
pub fn output_path(cfg: &ExperimentConfig) -> PathBuf {
    match &cfg.output {
        Some(p) => p.clone(),
        None => {
            let dir = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
            dir.join(format!("{}.csv", cfg.command))
        }
    }
}

/// Runs `cfg` and writes its artifacts. Assertion failures are reported
/// after the files are written.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let art = execute(cfg)?;
    let csv = output_path(cfg);
    if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&csv, render_csv(cfg, &art.notes, &art.table))?;
    let json = match &art.json {
        Some(v) => {
            let p = csv.with_extension("json");
            fs::write(&p, serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?)?;
            Some(p)
        }
        None => None,
    };
    if let (Some(path), Some(bytes)) = (&cfg.checkpoint, &art.checkpoint) {
        fs::write(path, bytes)?;
    }
    if !art.failures.is_empty() {
        return Err(Error::Assertion(art.failures.join("; ")));
    }
    Ok(RunOutcome {
        csv,
        json,
        summary: art.summary,
    })
}

/// Computes the artifacts of `cfg` without touching the file system
/// (except reading a resume checkpoint).
pub fn execute(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    match cfg.command {
        Command::Enumerate => enumerate_cmd(cfg),
        Command::Sample => sample_cmd(cfg),
        Command::Events => events_cmd(cfg),
        Command::MassScan => mass_scan_cmd(cfg),
        Command::TmScan => tm_scan_cmd(cfg),
        Command::ScalingCheck => scaling_cmd(cfg),
    }
}

fn enumerate_cmd(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let graph = build_graph(cfg.lattice)?;
    let params = cfg.params()?;
    let dist = match cfg.kind {
        ConfigKind::Spins => enumerate_ising(&graph, &params)?,
        ConfigKind::Bonds => enumerate_fk_ghost(&graph, &params)?,
        ConfigKind::Joint => enumerate_joint_es(&graph, &params)?,
    };
    let mut table = Table::new(&["config_bits", "weight", "probability"]);
    let bits = dist.bits();
    let shift = dist.log_shift();
    let probs = dist.probabilities();
    for (i, (&w, &p)) in dist.weights().iter().zip(&probs).enumerate() {
        let text: String = (0..bits).rev().map(|b| if i >> b & 1 == 1 { '1' } else { '0' }).collect();
        table.push(vec![text, real(w * shift.exp()), real(p)]);
    }
    Ok(RunArtifacts {
        table,
        summary: vec![format!(
            "{} configurations, log Z = {}",
            dist.len(),
            dist.log_partition()
        )],
        ..Default::default()
    })
}

fn start_state(cfg: &ExperimentConfig, graph: &crate::lattice::GhostGraph) -> Result<ChainState> {
    match &cfg.resume {
        None => Ok(ChainState::new(graph, cfg.seed)),
        Some(path) => {
            let (spec, state) = ChainState::from_bytes(&fs::read(path)?)?;
            if spec != cfg.lattice {
                return Err(Error::InvalidParams(format!(
                    "checkpoint lattice {spec:?} differs from the configured lattice"
                )));
            }
            Ok(state)
        }
    }
}

fn sample_cmd(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let graph = build_graph(cfg.lattice)?;
    let params = cfg.params()?;
    let observables = cfg
        .observables
        .iter()
        .map(|o| Observable::parse(o, &cfg.lattice))
        .collect::<Result<Vec<_>>>()?;
    if cfg.algorithm == Algorithm::Wolff {
        if let Some(o) = observables.iter().find(|o| o.needs_bonds()) {
            return Err(Error::InvalidParams(format!(
                "observable {} needs bond configurations, which Wolff updates do not produce",
                o.name(&cfg.lattice)
            )));
        }
    }
    let mut table = Table::new(&["sweep", "observable", "value"]);
    let names: Vec<String> = observables.iter().map(|o| o.name(&cfg.lattice)).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); observables.len()];
    let state = start_state(cfg, &graph)?;
    let (final_state, burn_in, tau) = run_chain_from(&graph, &params, &cfg.schedule(), state, |s, d| {
        for (k, o) in observables.iter().enumerate() {
            let v: f64 = o.evaluate(&graph, s, d);
            columns[k].push(v);
            table.rows.push(vec![s.sweeps.to_string(), names[k].clone(), real(v)]);
        }
    })?;
    let mut summary = Vec::new();
    for (name, col) in names.iter().zip(&columns) {
        match mean_estimate(col) {
            Ok(e) => summary.push(format!("{name}: {} +- {} (tau {})", e.mean, e.std_error, e.tau_int)),
            Err(e) => summary.push(format!("{name}: {e}")),
        }
    }
    let mut notes = vec![format!("resolved burn_in = {burn_in}")];
    if let Some(t) = tau {
        notes.push(format!("pilot tau = {}", real(t)));
    }
    Ok(RunArtifacts {
        table,
        notes,
        summary,
        checkpoint: Some(final_state.to_bytes(&graph)?),
        ..Default::default()
    })
}

/// Event detector named in a configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum Detector {
    F(Region),
    G(Region),
    Necklace(Region, NecklaceQuery),
    Block(Site, usize),
}

impl Detector {
    /// `F:cx.cy:inner:outer`, `G:cx.cy:inner:outer`,
    /// `necklace:cx.cy:inner:outer:k:min_mass[:ghost]`, `block:cx.cy:N`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.trim().split(':').collect();
        let bad = || Error::Config(format!("bad detector '{text}'"));
        let point = |s: &str| -> Result<(i64, i64)> {
            let (a, b) = s.split_once('.').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        };
        let int = |s: &str| -> Result<i64> { s.parse().map_err(|_| bad()) };
        match parts.as_slice() {
            ["F", c, i, o] => Ok(Detector::F(Region::annulus(point(c)?, int(i)?, int(o)?)?)),
            ["G", c, i, o] => Ok(Detector::G(Region::annulus(point(c)?, int(i)?, int(o)?)?)),
            ["necklace", c, i, o, k, m, rest @ ..] => {
                let ghost_only = match rest {
                    [] => false,
                    ["ghost"] => true,
                    _ => return Err(bad()),
                };
                let q = NecklaceQuery {
                    max_clusters: k.parse().map_err(|_| bad())?,
                    min_mass: m.parse().map_err(|_| bad())?,
                    ghost_only,
                };
                Ok(Detector::Necklace(Region::annulus(point(c)?, int(i)?, int(o)?)?, q))
            }
            ["block", c, n] => {
                let (x, y) = point(c)?;
                if x < 0 || y < 0 {
                    return Err(bad());
                }
                Ok(Detector::Block(Site::new(x as usize, y as usize), n.parse().map_err(|_| bad())?))
            }
            _ => Err(bad()),
        }
    }
}

fn events_cmd(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    if cfg.algorithm == Algorithm::Wolff {
        return Err(Error::InvalidParams("event detection needs bond configurations; use sw".into()));
    }
    let graph = build_graph(cfg.lattice)?;
    let params = cfg.params()?;
    let detectors = cfg
        .detectors
        .iter()
        .map(|d| Detector::parse(d))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["sweep", "event", "occurred", "witness_length"]);
    let mut counts = vec![0u64; detectors.len()];
    let mut total = 0u64;
    let mut failures = Vec::new();
    let mut error = None;
    let state = start_state(cfg, &graph)?;
    run_chain_from(&graph, &params, &cfg.schedule(), state, |s, _| {
        if error.is_some() {
            return;
        }
        total += 1;
        for (k, det) in detectors.iter().enumerate() {
            let outcome: Result<(bool, usize)> = (|| {
                let (region, kind, report): (&Region, EventKind, EventReport) = match det {
                    Detector::F(r) => (r, EventKind::F, detect_event_f(&graph, &s.bonds, r)?),
                    Detector::G(r) => (r, EventKind::G, detect_event_g(&graph, &s.bonds, r)?),
                    Detector::Necklace(r, q) => (r, EventKind::Necklace(*q), necklace(&graph, &s.bonds, r, q)?),
                    Detector::Block(c, n) => return Ok((block_good(&graph, &s.bonds, *c, *n)?, 0)),
                };
                if cfg.validate_witnesses {
                    if let Err(e) = validate_report(&graph, &s.bonds, region, kind, &report) {
                        failures.push(format!("sweep {} {}: {e}", s.sweeps, cfg.detectors[k]));
                    }
                }
                Ok((report.occurred, report.witness_len()))
            })();
            match outcome {
                Ok((occ, len)) => {
                    counts[k] += u64::from(occ);
                    table.rows.push(vec![
                        s.sweeps.to_string(),
                        cfg.detectors[k].clone(),
                        u8::from(occ).to_string(),
                        len.to_string(),
                    ]);
                }
                Err(e) => {
                    error = Some(e);
                    return;
                }
            }
        }
    })?;
    if let Some(e) = error {
        return Err(e);
    }
    let summary = cfg
        .detectors
        .iter()
        .zip(&counts)
        .map(|(d, &c)| format!("{d}: {c}/{total}"))
        .collect();
    Ok(RunArtifacts {
        table,
        summary,
        failures,
        ..Default::default()
    })
}

/// One grid point of a mass scan.
#[derive(Clone, Debug, Serialize)]
pub struct MassPoint {
    pub big_h: f64,
    pub seed: u64,
    pub burn_in: u64,
    pub profile: CorrelationProfile<f64>,
    pub fit: Result<MassFit<f64>, String>,
    pub magnetization: EstimatorResult<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MassScan {
    pub points: Vec<MassPoint>,
    pub mass_exponent: Result<ExponentFit<f64>, String>,
    pub magnetization_exponent: Result<ExponentFit<f64>, String>,
}

/// Swendsen–Wang chain at each field of the grid (in parallel, each with a
/// derived seed), a correlation profile up to `max_separation`, a
/// jackknifed mass fit and the mean spin; then log-log fits across the
/// grid.
pub fn mass_scan(cfg: &ExperimentConfig) -> Result<MassScan> {
    let graph = build_graph(cfg.lattice)?;
    let seps: Vec<usize> = (1..=cfg.max_separation).collect();
    ProfileAccumulator::<f64>::new(&cfg.lattice, cfg.direction, &seps)?;
    let schedule = cfg.schedule();
    let points = cfg
        .h_grid
        .par_iter()
        .enumerate()
        .map(|(i, &h)| -> Result<MassPoint> {
            let params = FieldParams::new(cfg.beta, h)?;
            let seed = derive_seed(cfg.seed, i as u64);
            let mut acc = ProfileAccumulator::new(&cfg.lattice, cfg.direction, &seps)?;
            let mut mag = Vec::new();
            let n = graph.num_sites() as f64;
            let mut err = None;
            let (_, burn_in, _) = crate::fk::run_chain(&graph, &params, &schedule, seed, |s, _| {
                mag.push(s.spins.magnetization() as f64 / n);
                if let Err(e) = acc.push(&s.spins) {
                    err.get_or_insert(e);
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            let profile = acc.finish()?;
            let fit = fit_mass_jackknife(&acc, cfg.window, CRITICAL_PREFACTOR).map_err(|e| e.to_string());
            Ok(MassPoint {
                big_h: h,
                seed,
                burn_in,
                profile,
                fit,
                magnetization: mean_estimate(&mag)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted: Vec<&MassPoint> = points.iter().filter(|p| p.fit.is_ok()).collect();
    let hs: Vec<f64> = fitted.iter().map(|p| p.big_h).collect();
    let ms: Vec<f64> = fitted.iter().map(|p| p.fit.as_ref().unwrap().mass).collect();
    let me: Vec<f64> = fitted.iter().map(|p| p.fit.as_ref().unwrap().mass_std_error).collect();
    let mass_exponent = exponent_fit(&hs, &ms, Some(&me)).map_err(|e| e.to_string());
    let all_h: Vec<f64> = points.iter().map(|p| p.big_h).collect();
    let mags: Vec<f64> = points.iter().map(|p| p.magnetization.mean).collect();
    let mag_err: Vec<f64> = points.iter().map(|p| p.magnetization.std_error).collect();
    let magnetization_exponent = exponent_fit(&all_h, &mags, Some(&mag_err)).map_err(|e| e.to_string());
    Ok(MassScan {
        points,
        mass_exponent,
        magnetization_exponent,
    })
}

fn mass_scan_cmd(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let scan = mass_scan(cfg)?;
    let mut table = Table::new(&[
        "row",
        "H",
        "mass",
        "mass_err",
        "r_min",
        "r_max",
        "magnetization",
        "magnetization_err",
    ]);
    let mut summary = Vec::new();
    for p in &scan.points {
        let (mass, err, lo, hi) = match &p.fit {
            Ok(f) => (real(f.mass), real(f.mass_std_error), f.r_min.to_string(), f.r_max.to_string()),
            Err(e) => {
                summary.push(format!("H = {}: fit failed: {e}", p.big_h));
                ("nan".into(), "nan".into(), String::new(), String::new())
            }
        };
        table.push(vec![
            "point".into(),
            real(p.big_h),
            mass,
            err,
            lo,
            hi,
            real(p.magnetization.mean),
            real(p.magnetization.std_error),
        ]);
    }
    let fit_cells = |f: &Result<ExponentFit<f64>, String>| match f {
        Ok(f) => (real(f.slope), real(f.slope_std_error)),
        Err(_) => ("nan".into(), "nan".into()),
    };
    let (ms, mse) = fit_cells(&scan.mass_exponent);
    let (gs, gse) = fit_cells(&scan.magnetization_exponent);
    table.push(vec!["slope".into(), String::new(), ms.clone(), mse.clone(), String::new(), String::new(), gs.clone(), gse.clone()]);
    summary.push(format!("mass exponent {ms} +- {mse}; magnetization exponent {gs} +- {gse}"));
    Ok(RunArtifacts {
        table,
        summary,
        ..Default::default()
    })
}

fn tm_scan_cmd(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let rows = tm_mass_scan(&cfg.widths, cfg.vertical, cfg.beta, &cfg.h_grid)?;
    let mut table = Table::new(&[
        "W",
        "H",
        "lambda1",
        "lambda2",
        "gap",
        "min_eig_t",
        "min_eig_t_minus_p1",
        "scaling_eligible",
    ]);
    let mut failures = Vec::new();
    for r in &rows {
        let floor = -crate::transfer::PSD_TOLERANCE * r.lambda1;
        if r.min_eig_t < floor || r.min_eig_t_minus_p1 < floor {
            failures.push(format!("W = {}, H = {}: transfer matrix is not positive semidefinite", r.width, r.big_h));
        }
        table.push(vec![
            r.width.to_string(),
            real(r.big_h),
            real(r.lambda1),
            real(r.lambda2),
            real(r.gap),
            real(r.min_eig_t),
            real(r.min_eig_t_minus_p1),
            u8::from(r.scaling_eligible).to_string(),
        ]);
    }
    Ok(RunArtifacts {
        table,
        summary: vec![format!("{} grid points", rows.len())],
        failures,
        ..Default::default()
    })
}

fn collect_spins(
    spec: LatticeSpec,
    beta: f64,
    big_h: f64,
    schedule: &Schedule,
    seed: u64,
) -> Result<Vec<SpinConfig>> {
    let graph = build_graph(spec)?;
    let params = FieldParams::new(beta, big_h)?;
    let mut out = Vec::new();
    crate::fk::run_chain(&graph, &params, schedule, seed, |s, _| out.push(s.spins.clone()))?;
    Ok(out)
}

/// Runs both chains of a scaling check and compares them.
pub fn scaling_runs(cfg: &ExperimentConfig) -> Result<ScalingReport<f64>> {
    let dim = crate::estimators::field::FIELD_DIMENSION;
    let h_a = cfg.little_h;
    let h_b = cfg.little_h * cfg.lambda.powf(dim);
    let big_a = h_a * cfg.lattice.spacing.powf(dim);
    let big_b = h_b * cfg.lattice_b.spacing.powf(dim);
    let schedule = cfg.schedule();
    let (sa, sb) = rayon::join(
        || collect_spins(cfg.lattice, cfg.beta, big_a, &schedule, derive_seed(cfg.seed, 0)),
        || collect_spins(cfg.lattice_b, cfg.beta, big_b, &schedule, derive_seed(cfg.seed, 1)),
    );
    let (sa, sb) = (sa?, sb?);
    let a = ScalingRun {
        spec: cfg.lattice,
        little_h: h_a,
        samples: &sa,
    };
    let b = ScalingRun {
        spec: cfg.lattice_b,
        little_h: h_b,
        samples: &sb,
    };
    scaling_check(&a, &b, cfg.lambda, &cfg.boxes)
}

fn scaling_cmd(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let report = scaling_runs(cfg)?;
    let mut table = Table::new(&["quantity", "run_a", "run_a_err", "run_b", "run_b_err", "z"]);
    for c in report.means.iter().chain(&report.covariances) {
        table.push(vec![
            c.label.clone(),
            real(c.run_a.mean),
            real(c.run_a.std_error),
            real(c.run_b.mean),
            real(c.run_b.std_error),
            real(c.z),
        ]);
    }
    let mut failures = Vec::new();
    if let Some(limit) = cfg.max_z {
        if report.max_abs_z > limit {
            failures.push(format!("max |z| = {} exceeds {limit}", report.max_abs_z));
        }
    }
    Ok(RunArtifacts {
        table,
        summary: vec![format!("max |z| = {}", report.max_abs_z)],
        json: Some(serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?),
        failures,
        ..Default::default()
    })
}

/// Absolute and relative tolerance of one column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

/// Per-column tolerances; columns without an entry use `default`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub default: Tolerance,
    pub columns: BTreeMap<String, Tolerance>,
}

impl Tolerances {
    /// Parses `column=abs:rel`; the column `*` sets the default.
    pub fn add(&mut self, spec: &str) -> Result<()> {
        let bad = || Error::Config(format!("tolerance must be column=abs:rel, got '{spec}'"));
        let (col, rest) = spec.split_once('=').ok_or_else(bad)?;
        let (a, r) = rest.split_once(':').ok_or_else(bad)?;
        let t = Tolerance {
            abs: a.trim().parse().map_err(|_| bad())?,
            rel: r.trim().parse().map_err(|_| bad())?,
        };
        if !(t.abs >= 0.0 && t.rel >= 0.0) {
            return Err(bad());
        }
        match col.trim() {
            "*" => self.default = t,
            c => {
                self.columns.insert(c.to_string(), t);
            }
        }
        Ok(())
    }

    fn get(&self, column: &str) -> Tolerance {
        self.columns.get(column).copied().unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub row: usize,
    pub column: String,
    pub produced: String,
    pub reference: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub passed: bool,
    pub rows: usize,
    pub mismatches: Vec<Mismatch>,
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Columnwise comparison. Numeric cells must agree within
/// `abs + rel |reference|`; other cells must match exactly. A NaN on
/// either side always fails.
pub fn golden_compare(produced: &Table, reference: &Table, tol: &Tolerances) -> Result<CompareReport> {
    if produced.columns != reference.columns {
        return Err(Error::Schema(format!(
            "columns differ: {:?} vs {:?}",
            produced.columns, reference.columns
        )));
    }
    if produced.rows.len() != reference.rows.len() {
        return Err(Error::Schema(format!(
            "row counts differ: {} vs {}",
            produced.rows.len(),
            reference.rows.len()
        )));
    }
    let mut mismatches = Vec::new();
    for (i, (p, r)) in produced.rows.iter().zip(&reference.rows).enumerate() {
        for (j, col) in produced.columns.iter().enumerate() {
            let (a, b) = (&p[j], &r[j]);
            let reason = match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    if x.is_nan() || y.is_nan() {
                        Some("NaN".to_string())
                    } else {
                        let t = tol.get(col);
                        let d = (x - y).abs();
                        (d > t.abs + t.rel * y.abs() || (x.is_infinite() && x != y))
                            .then(|| format!("|diff| = {d:e} exceeds abs {:e} + rel {:e}", t.abs, t.rel))
                    }
                }
                (Ok(x), Err(_)) | (Err(_), Ok(x)) if x.is_nan() => Some("NaN".to_string()),
                _ => (a != b).then(|| "text differs".to_string()),
            };
            if let Some(reason) = reason {
                mismatches.push(Mismatch {
                    row: i,
                    column: col.clone(),
                    produced: a.clone(),
                    reference: b.clone(),
                    reason,
                });
            }
        }
    }
    Ok(CompareReport {
        passed: mismatches.is_empty(),
        rows: produced.rows.len(),
        mismatches,
    })
}

/// Reads two CSV files and compares their tables.
pub fn compare_files(produced: &Path, reference: &Path, tol: &Tolerances) -> Result<CompareReport> {
    let (_, a) = Table::from_csv(&fs::read_to_string(produced)?)?;
    let (_, b) = Table::from_csv(&fs::read_to_string(reference)?)?;
    golden_compare(&a, &b, tol)
}

/// Process exit code for a failed run: 1 validation, 2 assertion, 3 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Assertion(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}
