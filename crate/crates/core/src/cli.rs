//! Command-line surface. Every command merges an optional JSON config file
//! with explicit flags (flags win), echoes the effective config and emits a
//! JSON report or a CSV table.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::anneal::{run_anneal, AnnealConfig, AnnealReport};
use crate::cost::{benchmark_sweep, decade_grid, write_benchmark_csv, CostModel, SweepMode};
use crate::error::{Error, Result};
use crate::filter::synthesize_filter;
use crate::fpaa::{make_schedule, validate_schedule, ProjectorMode, VALIDATION_POINTS};
use crate::gadget::build_gadget;
use crate::gibbs::{gibbs_qsample_run, verify_schedule, GibbsModel, GibbsModelFile, BENCHMARK_BETAS, OVERLAP_THRESHOLD};
use crate::markov::{build_glauber_chain, ChainFile, IsingLadder, MarkovChain};
use crate::verify::{run_suites, Suite, VerifyOptions, DEFAULT_SEED, GADGET_PHASES};
use crate::walk::{WalkSpectrum, C64};

/// Thread-count override for the internal rayon pool.
pub const THREADS_ENV: &str = "QSAMPLE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qsample", version, about = "One-ancilla QSample preparation: simulation and resource estimates")]
pub struct Cli {
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a chain and print its spectral summary.
    Chain(ChainArgs),
    /// Walk phase gap and busy-subspace spectrum.
    Walk(ChainArgs),
    /// Synthesize a Chebyshev gap filter.
    Filter(FilterArgs),
    /// Gadget error norms against their bounds.
    GadgetCheck(GadgetArgs),
    /// Fixed-point phase schedule.
    FpaaAngles(FpaaArgs),
    /// Run the annealing loop.
    Anneal(AnnealArgs),
    /// Resource sweep over an eps grid (CSV).
    Benchmark(BenchmarkArgs),
    /// Gibbs QSample on an Ising ladder.
    Gibbs(GibbsArgs),
    /// Run the invariant suites.
    Verify(VerifyArgs),
}

// Flag structs serialize only the flags that were given; the result is
// layered over the config file and deserialized into the effective config.

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChainArgs {
    /// Ising ladder, e.g. 2x3.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Lazify the chain.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lazy: Option<bool>,
    /// Chain JSON file with `n`, `P` and optional `pi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub ladder: Option<String>,
    pub beta: f64,
    pub lazy: bool,
    pub file: Option<PathBuf>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            ladder: None,
            beta: 0.0,
            lazy: false,
            file: None,
        }
    }
}

impl ChainConfig {
    fn build(&self) -> Result<MarkovChain> {
        let chain = match (&self.file, &self.ladder) {
            (Some(path), None) => ChainFile::from_json(&read(path)?)
                .map_err(|e| context(path, e))?
                .into_chain()?,
            (None, Some(l)) => build_glauber_chain(&parse_ladder(l)?, self.beta, false)?,
            (Some(_), Some(_)) => {
                return Err(Error::Configuration("give either --file or --ladder, not both".into()))
            }
            (None, None) => return Err(Error::Configuration("a chain needs --file or --ladder".into())),
        };
        Ok(if self.lazy { chain.lazify() } else { chain })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    /// Phase gap; taken from the chain when omitted.
    #[arg(long)]
    #[serde(rename = "Delta", skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(rename = "Delta")]
    pub delta: Option<f64>,
    pub eps: f64,
    #[serde(flatten)]
    pub chain: ChainConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            delta: None,
            eps: 0.01,
            chain: ChainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GadgetArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_w: Option<f64>,
    /// Comma-separated phases in radians.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GadgetConfig {
    pub eps_w: f64,
    pub phi: Vec<f64>,
    #[serde(flatten)]
    pub chain: ChainConfig,
}

impl Default for GadgetConfig {
    fn default() -> Self {
        Self {
            eps_w: 0.01,
            phi: GADGET_PHASES.to_vec(),
            chain: ChainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FpaaArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_lower: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_fp: Option<f64>,
    /// Points of the validation grid on [p_lower, 1].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpaaConfig {
    pub p_lower: f64,
    pub eps_fp: f64,
    pub p_grid: usize,
}

impl Default for FpaaConfig {
    fn default() -> Self {
        Self {
            p_lower: 0.25,
            eps_fp: 0.1,
            p_grid: VALIDATION_POINTS,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnnealArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<String>,
    /// Comma-separated inverse temperatures.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// Comma-separated chain files, used instead of a ladder.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<Vec<PathBuf>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// `compiled` or `exact`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Comma-separated per-stage overlap lower bounds.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_lower: Option<Vec<f64>>,
    /// Print a CSV row instead of the JSON report.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealCliConfig {
    pub ladder: Option<String>,
    pub betas: Vec<f64>,
    pub chains: Option<Vec<PathBuf>>,
    pub eps: f64,
    pub mode: String,
    pub p_lower: Option<Vec<f64>>,
    pub csv: bool,
}

impl Default for AnnealCliConfig {
    fn default() -> Self {
        Self {
            ladder: None,
            betas: BENCHMARK_BETAS.to_vec(),
            chains: None,
            eps: 0.1,
            mode: "compiled".into(),
            p_lower: None,
            csv: false,
        }
    }
}

impl AnnealCliConfig {
    fn chains(&self) -> Result<Vec<MarkovChain>> {
        match (&self.chains, &self.ladder) {
            (Some(files), None) => files
                .iter()
                .map(|p| ChainFile::from_json(&read(p)?).map_err(|e| context(p, e))?.into_chain())
                .collect(),
            (None, Some(l)) => checked_ladder_chains(parse_ladder(l)?, &self.betas),
            (Some(_), Some(_)) => Err(Error::Configuration("give either --chains or --ladder, not both".into())),
            (None, None) => checked_ladder_chains(IsingLadder::new(2)?, &self.betas),
        }
    }

    fn anneal_config(&self) -> Result<AnnealConfig> {
        let mut cfg = AnnealConfig::new(self.chains()?, self.eps, parse_mode(&self.mode)?);
        cfg.p_lower_overrides = self.p_lower.clone();
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// Comma-separated eps values.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    /// `fast` or `full`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_query: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_ancilla: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugation_overhead: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub ladder: String,
    pub betas: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub sweep: String,
    pub c_query: f64,
    pub c_ancilla: f64,
    pub conjugation_overhead: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let m = CostModel::default();
        Self {
            ladder: "2x3".into(),
            betas: BENCHMARK_BETAS.to_vec(),
            eps_grid: decade_grid(6),
            sweep: "fast".into(),
            c_query: m.c_query,
            c_ancilla: m.c_ancilla,
            conjugation_overhead: m.conjugation_overhead,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GibbsArgs {
    /// Model file `{rows, cols, betas, eps}`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Only check the schedule.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify_only: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsCliConfig {
    pub model: Option<PathBuf>,
    pub ladder: String,
    pub betas: Vec<f64>,
    pub eps: f64,
    pub mode: String,
    pub verify_only: bool,
}

impl Default for GibbsCliConfig {
    fn default() -> Self {
        Self {
            model: None,
            ladder: "2x2".into(),
            betas: BENCHMARK_BETAS.to_vec(),
            eps: 0.1,
            mode: "compiled".into(),
            verify_only: false,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Suites to run (repeatable); all by default.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyCliConfig {
    pub suite: Vec<String>,
    pub seed: u64,
    pub trials: usize,
    pub p_grid: usize,
}

impl Default for VerifyCliConfig {
    fn default() -> Self {
        let o = VerifyOptions::default();
        Self {
            suite: Suite::ALL.iter().map(|s| s.name().to_string()).collect(),
            seed: DEFAULT_SEED,
            trials: o.trials,
            p_grid: o.p_grid,
        }
    }
}

/// Result of one command: the rendered output and whether every certified
/// bound held.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub certified: bool,
}

impl Outcome {
    fn json(v: Value, certified: bool) -> Self {
        let mut text = serde_json::to_string_pretty(&v).expect("report serializes");
        text.push('\n');
        Self { text, certified }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn context(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Config file values overlaid with the given flags.
pub fn merge_config<T: DeserializeOwned>(file: Option<&Path>, flags: &impl Serialize) -> Result<T> {
    let mut base = match file {
        Some(p) => {
            let v: Value = serde_json::from_str(&read(p)?).map_err(|e| {
                Error::Parse(format!("{}: line {} column {}: {e}", p.display(), e.line(), e.column()))
            })?;
            match v {
                Value::Object(m) => m,
                _ => return Err(Error::Parse(format!("{}: config must be a JSON object", p.display()))),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(over) = serde_json::to_value(flags).expect("flags serialize") {
        base.extend(over);
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| Error::Configuration(e.to_string()))
}

pub fn parse_ladder(s: &str) -> Result<IsingLadder> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidParameter(format!("ladder must look like 2xC, got {s:?}")))?;
    let rows: usize = r.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad ladder rows {r:?}")))?;
    let cols: usize = c.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad ladder columns {c:?}")))?;
    if rows != 2 {
        return Err(Error::InvalidParameter(format!("only two-row ladders are supported, got {rows}")));
    }
    IsingLadder::new(cols)
}

pub fn parse_mode(s: &str) -> Result<ProjectorMode> {
    match s {
        "compiled" => Ok(ProjectorMode::Compiled),
        "exact" => Ok(ProjectorMode::Exact),
        _ => Err(Error::InvalidParameter(format!("mode must be compiled or exact, got {s:?}"))),
    }
}

fn ladder_chains(ladder: &IsingLadder, betas: &[f64]) -> Result<Vec<MarkovChain>> {
    betas.iter().map(|b| build_glauber_chain(ladder, *b, true)).collect()
}

/// Ladder chains after the adjacent-overlap check, so that a bad schedule
/// is reported by stage before any chain is built.
fn checked_ladder_chains(ladder: IsingLadder, betas: &[f64]) -> Result<Vec<MarkovChain>> {
    let model = GibbsModel::from_ladder(ladder, betas.to_vec())?;
    let check = verify_schedule(&model)?;
    if let Some(stage) = check.overlaps.iter().position(|o| *o < OVERLAP_THRESHOLD) {
        return Err(Error::Precondition {
            stage,
            message: format!("adjacent overlap {} is below 1/15", check.overlaps[stage]),
        });
    }
    model.chains()
}

fn anneal_certified(r: &AnnealReport) -> bool {
    r.final_d_tr <= r.eps && r.final_tvd <= r.final_d_tr + 1e-12 && r.ancilla_count == 1
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Chain(a) => {
            let cfg: ChainConfig = merge_config(file, a)?;
            let c = cfg.build()?;
            Ok(Outcome::json(
                json!({
                    "config": cfg,
                    "seed": DEFAULT_SEED,
                    "chain": c.to_file(),
                    "pi": c.stationary().as_slice(),
                    "lambda2": c.lambda2(),
                    "delta": c.delta(),
                    "reversibility_residual": c.detailed_balance_residual(),
                }),
                true,
            ))
        }
        Command::Walk(a) => {
            let cfg: ChainConfig = merge_config(file, a)?;
            let c = cfg.build()?;
            let spec = WalkSpectrum::new(&c)?;
            let (sym, anti) = spec.complement_dims();
            Ok(Outcome::json(
                json!({
                    "config": cfg,
                    "seed": DEFAULT_SEED,
                    "n": c.n(),
                    "delta": c.delta(),
                    "phase_gap": spec.phase_gap(),
                    "busy_dim": spec.busy_dim(),
                    "busy_phases": spec.busy_phases(),
                    "complement_phase_pi_dim": sym,
                    "complement_phase_zero_dim": anti,
                }),
                true,
            ))
        }
        Command::Filter(a) => {
            let cfg: FilterConfig = merge_config(file, a)?;
            let delta = match cfg.delta {
                Some(d) => d,
                None => WalkSpectrum::new(&cfg.chain.build()?)?.phase_gap(),
            };
            let f = synthesize_filter(delta, cfg.eps)?;
            let certified = f.achieved_eps <= cfg.eps;
            Ok(Outcome::json(
                json!({"config": cfg, "seed": DEFAULT_SEED, "filter": f.to_json()}),
                certified,
            ))
        }
        Command::GadgetCheck(a) => {
            let cfg: GadgetConfig = merge_config(file, a)?;
            let c = cfg.chain.build()?;
            let spec = WalkSpectrum::new(&c)?;
            let f = synthesize_filter(spec.phase_gap(), cfg.eps_w)?;
            let g = build_gadget(&spec, &f, 0.0)?;
            let mut rows = Vec::new();
            let mut certified = true;
            for &phi in &cfg.phi {
                let gp = g.with_phi(phi);
                let norm = gp.error_norm();
                let loose = 2.0 * cfg.eps_w;
                let tight = (C64::from_polar(1.0, phi) - 1.0).norm() * cfg.eps_w;
                let pass = norm <= loose + 1e-9 && norm <= tight + 1e-9;
                certified &= pass;
                rows.push(json!({
                    "phi": phi,
                    "error_norm": norm,
                    "bound_2eps": loose,
                    "bound_tight": tight,
                    "ratio": if loose > 0.0 { norm / loose } else { 0.0 },
                    "pass": pass,
                }));
            }
            Ok(Outcome::json(
                json!({"config": cfg, "seed": DEFAULT_SEED, "d": f.d, "checks": rows}),
                certified,
            ))
        }
        Command::FpaaAngles(a) => {
            let cfg: FpaaConfig = merge_config(file, a)?;
            let s = make_schedule(cfg.p_lower, cfg.eps_fp)?;
            let worst = validate_schedule(&s, cfg.p_grid);
            Ok(Outcome::json(
                json!({
                    "config": cfg,
                    "seed": DEFAULT_SEED,
                    "schedule": s.to_json(),
                    "max_trace_distance": worst,
                }),
                worst <= cfg.eps_fp + 1e-12,
            ))
        }
        Command::Anneal(a) => {
            let cfg: AnnealCliConfig = merge_config(file, a)?;
            let r = run_anneal(&cfg.anneal_config()?)?;
            let certified = anneal_certified(&r);
            if cfg.csv {
                return Ok(Outcome {
                    text: format!("{}\n{}\n", AnnealReport::CSV_HEADER, r.csv_row()),
                    certified,
                });
            }
            Ok(Outcome::json(
                json!({"config": cfg, "seed": DEFAULT_SEED, "report": r}),
                certified,
            ))
        }
        Command::Benchmark(a) => {
            let cfg: BenchmarkConfig = merge_config(file, a)?;
            let mode = match cfg.sweep.as_str() {
                "fast" => SweepMode::Fast,
                "full" => SweepMode::Full,
                s => return Err(Error::InvalidParameter(format!("sweep must be fast or full, got {s:?}"))),
            };
            let model = CostModel {
                c_query: cfg.c_query,
                c_ancilla: cfg.c_ancilla,
                conjugation_overhead: cfg.conjugation_overhead,
            };
            let chains = ladder_chains(&parse_ladder(&cfg.ladder)?, &cfg.betas)?;
            let template = AnnealConfig::new(chains, 0.5, ProjectorMode::Compiled);
            let rows = benchmark_sweep(&template, &cfg.eps_grid, mode, &model)?;
            let mut buf = Vec::new();
            write_benchmark_csv(&rows, &mut buf)?;
            Ok(Outcome {
                text: String::from_utf8(buf).expect("csv is utf-8"),
                certified: true,
            })
        }
        Command::Gibbs(a) => {
            let mut cfg: GibbsCliConfig = merge_config(file, a)?;
            let model = match &cfg.model {
                Some(p) => {
                    let mf = GibbsModelFile::from_json(&read(p)?).map_err(|e| context(p, e))?;
                    // Explicit flags still win over the model file.
                    if a.betas.is_none() {
                        cfg.betas = mf.betas.clone();
                    }
                    if a.eps.is_none() {
                        cfg.eps = mf.eps;
                    }
                    if a.ladder.is_none() {
                        cfg.ladder = format!("{}x{}", mf.rows, mf.cols);
                    }
                    GibbsModel::from_ladder(parse_ladder(&cfg.ladder)?, cfg.betas.clone())?
                }
                None => GibbsModel::from_ladder(parse_ladder(&cfg.ladder)?, cfg.betas.clone())?,
            };
            let check = verify_schedule(&model)?;
            if cfg.verify_only {
                let pass = check.pass;
                return Ok(Outcome::json(
                    json!({"config": cfg, "seed": DEFAULT_SEED, "schedule": check}),
                    pass,
                ));
            }
            let r = gibbs_qsample_run(&model, cfg.eps, parse_mode(&cfg.mode)?)?;
            let certified = anneal_certified(&r) && check.pass;
            Ok(Outcome::json(
                json!({"config": cfg, "seed": DEFAULT_SEED, "schedule": check, "report": r}),
                certified,
            ))
        }
        Command::Verify(a) => {
            let cfg: VerifyCliConfig = merge_config(file, a)?;
            let suites: Vec<Suite> = cfg.suite.iter().map(|s| Suite::parse(s)).collect::<Result<_>>()?;
            let opts = VerifyOptions {
                seed: cfg.seed,
                trials: cfg.trials,
                p_grid: cfg.p_grid,
                ..VerifyOptions::default()
            };
            let reports = run_suites(&suites, &opts)?;
            let pass = reports.iter().all(|r| r.pass);
            Ok(Outcome::json(
                json!({"config": cfg, "seed": cfg.seed, "pass": pass, "suites": reports}),
                pass,
            ))
        }
    }
}

/// Sizes the global rayon pool from the environment, if set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Configuration(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Configuration(format!("{THREADS_ENV} must be positive")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Configuration(e.to_string()))?;
    }
    Ok(())
}
