//! The `wdro` command line. Every flag lives in the clap definitions below,
//! so `--help` and the parser never drift apart.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use wdro_core::attack::{evaluate, AttackConfig, PgdConfig};
use wdro_core::{ActivationKind, LossKind, NormKind};

use crate::checks::{run_check, CRITERIA};
use crate::dataset::{load_dataset, write_dataset};
use crate::error::{Error, Result};
use crate::harness::{
    certify, gen_data, gen_model, one_dim_oracle, run_convergence, run_pgd, run_pipeline, run_wda, sandwich, CertifyConfig,
    DataSpec, ExperimentConfig, ModelSpec, EXTENDED_ALPHA_SCHEDULE,
};
use crate::model_io::{load_model, write_model};
use crate::parallel::init_pool;
use crate::report::{
    adv_from_report, adv_report, certificate_report, convergence_csv, eval_report, mask_csv, pipeline_artifacts, to_json,
    trace_csv, AdvReport, OneDimReport, OneDimRow, ONE_DIM_FORMAT,
};

/// Default directory for outputs when `--out` is not given.
pub const OUT_DIR_ENV: &str = "WDRO_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "wdro", version, about = "Slope certificates and distributional attacks for small ReLU classifiers")]
pub struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random MLP model file.
    GenModel(GenModelArgs),
    /// Write a clustered dataset CSV.
    GenData(GenDataArgs),
    /// Compute the slope bounds of a ReLU model on a dataset.
    Certify(CertifyArgs),
    /// Build an adversarial distribution around a dataset.
    Attack(AttackArgs),
    /// Evaluate a model on an adversarial distribution.
    Eval(EvalArgs),
    /// Cumulative lower slope as masks are added, as CSV.
    Convergence(ConvergenceArgs),
    /// Brute-force worst case of the one-dimensional example.
    Remark1(Remark1Args),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
    /// Run the seeded end-to-end pipeline and write every output to a directory.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Wda,
    Pgd,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output file; `-` is standard output. Defaults to a file in
    /// $WDRO_OUT_DIR when set, otherwise standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenModelArgs {
    #[arg(long, default_value_t = 2)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = ActivationKind::Relu)]
    pub activation: ActivationKind,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub init_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub init_hi: f64,
    /// Lower corner of the input box (every coordinate).
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub hi: f64,
    /// Force every weight and bias to be nonnegative.
    #[arg(long)]
    pub monotone: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 2)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Standard deviation of each cluster.
    #[arg(long, default_value_t = 0.25)]
    pub spread: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Transport norm: 1, 2 or inf.
    #[arg(long)]
    pub r: NormKind,
    /// Output norm; must be dual to r (the default).
    #[arg(long)]
    pub s: Option<NormKind>,
    #[arg(long, default_value_t = 1000)]
    pub probes: usize,
    /// Largest total hidden width enumerated exhaustively.
    #[arg(long, default_value_t = 16)]
    pub exhaustive_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ascent restarts for GELU and SiLU models.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Also build the worst-case distribution at this budget.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = LossKind::CrossEntropy)]
    pub loss: LossKind,
    /// Write the per-mask table here as well.
    #[arg(long)]
    pub per_mask_csv: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub r: NormKind,
    /// Step length.
    #[arg(long)]
    pub alpha: f64,
    /// Probe steps per rival class.
    #[arg(long, default_value_t = 10)]
    pub prob: usize,
    /// Attack iterations.
    #[arg(long, default_value_t = 20)]
    pub maxiter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Wda)]
    pub method: Method,
    /// Loss ascended by PGD.
    #[arg(long, default_value_t = LossKind::CrossEntropy)]
    pub loss: LossKind,
    /// Write every iterate as CSV here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Distribution written by `attack`.
    #[arg(long)]
    pub adv: PathBuf,
    #[arg(long, default_value_t = LossKind::CrossEntropy)]
    pub loss: LossKind,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub r: NormKind,
    #[arg(long, default_value_t = 200)]
    pub probes: usize,
    #[arg(long, default_value_t = 16)]
    pub exhaustive_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// PGD budget for the reference loss gain.
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20)]
    pub maxiter: usize,
    #[arg(long, default_value_t = LossKind::DlrMargin)]
    pub loss: LossKind,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct Remark1Args {
    /// Grid points per axis.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    pub eps: Vec<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Criteria to run, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 10)]
    pub seed: u64,
    /// Output directory (default: $WDRO_OUT_DIR).
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

enum Sink {
    Stdout,
    File(PathBuf),
}

fn sink(out: &OutArg, default_name: &str) -> Sink {
    match &out.out {
        Some(p) if p.as_os_str() == "-" => Sink::Stdout,
        Some(p) => Sink::File(p.clone()),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) => Sink::File(Path::new(&dir).join(default_name)),
            None => Sink::Stdout,
        },
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn emit(out: &OutArg, default_name: &str, contents: &str) -> Result<()> {
    match sink(out, default_name) {
        Sink::Stdout => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
        Sink::File(p) => write_file(&p, contents),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!("--{name} must be positive, got {v}")))
    }
}

/// Parse `argv`, run the command and return the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    if cli.threads == Some(0) {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    if let Err(e) = init_pool(cli.threads) {
        warn!("thread pool already configured: {e}");
    }
    match cli.command {
        Command::GenModel(a) => gen_model_cmd(a),
        Command::GenData(a) => gen_data_cmd(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Attack(a) => attack_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Convergence(a) => convergence_cmd(a),
        Command::Remark1(a) => remark1_cmd(a),
        Command::Selftest(a) => selftest_cmd(a),
        Command::Pipeline(a) => pipeline_cmd(a),
    }
}

fn gen_model_cmd(a: GenModelArgs) -> Result<i32> {
    let spec = ModelSpec {
        input_dim: a.input_dim,
        classes: a.classes,
        widths: a.widths,
        activation: a.activation,
        init: (a.init_lo, a.init_hi),
        domain: (a.lo, a.hi),
        monotone: a.monotone,
    };
    let net = gen_model(&spec, a.seed)?;
    emit(&a.out, "model.txt", &write_model(&net))?;
    Ok(0)
}

fn gen_data_cmd(a: GenDataArgs) -> Result<i32> {
    let spec = DataSpec {
        count: a.count,
        input_dim: a.input_dim,
        classes: a.classes,
        spread: a.spread,
        domain: (a.lo, a.hi),
    };
    let data = gen_data(&spec, a.seed)?;
    emit(&a.out, "data.csv", &write_dataset(&data)?)?;
    Ok(0)
}

fn certify_cmd(a: CertifyArgs) -> Result<i32> {
    let net = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let cfg = CertifyConfig {
        r: a.r,
        s: a.s.unwrap_or(a.r.dual()),
        probes: a.probes,
        exhaustive_cap: a.exhaustive_cap,
        seed: a.seed,
        restarts: a.restarts,
        steps: a.steps,
    };
    if let Some(eps) = a.eps {
        positive("eps", eps)?;
    }
    let cert = certify(&net, &data, &cfg)?;
    if !cert.exhaustive {
        warn!("mask inventory is not exhaustive: L_upper is an estimate, not a certificate");
    }
    let sw = match a.eps {
        Some(eps) if !net.activation().is_smooth() => Some(sandwich(&net, &data, &cert, a.loss, eps, &EXTENDED_ALPHA_SCHEDULE)?),
        Some(_) => {
            warn!("--eps ignored: the worst-case construction needs a ReLU model");
            None
        }
        None => None,
    };
    let report = certificate_report(&cert, sw.as_ref());
    if let Some(path) = &a.per_mask_csv {
        write_file(path, &mask_csv(&report.per_mask)?)?;
    }
    emit(&a.out, "certificate.json", &to_json(&report)?)?;
    Ok(0)
}

fn attack_cmd(a: AttackArgs) -> Result<i32> {
    let net = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let (dist, traces) = match a.method {
        Method::Wda => {
            let cfg = AttackConfig {
                epsilon: a.eps,
                kappa: a.kappa,
                norm: a.r,
                step: a.alpha,
                prob: a.prob,
                max_iters: a.maxiter,
                seed: a.seed,
            };
            run_wda(&net, &data, &cfg)?
        }
        Method::Pgd => {
            if a.kappa != 1.0 {
                warn!("PGD moves every point: reporting kappa = 1");
            }
            let cfg = PgdConfig {
                loss: a.loss,
                epsilon: a.eps,
                norm: a.r,
                step: a.alpha,
                iters: a.maxiter,
            };
            cfg.validate()?;
            run_pgd(&net, &data, &cfg)?
        }
    };
    let method = match a.method {
        Method::Wda => "wda",
        Method::Pgd => "pgd",
    };
    if let Some(path) = &a.trace {
        write_file(path, &trace_csv(&traces, net.input_dim())?)?;
    }
    emit(&a.out, "adv.json", &to_json(&adv_report(&dist, method)?)?)?;
    Ok(0)
}

fn eval_cmd(a: EvalArgs) -> Result<i32> {
    let net = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let text = std::fs::read_to_string(&a.adv).map_err(|e| Error::io(&a.adv, e))?;
    let report: AdvReport = serde_json::from_str(&text)?;
    let dist = adv_from_report(&report, &data)?;
    let eval = evaluate(&net, &dist, a.loss)?;
    emit(&a.out, "eval.json", &to_json(&eval_report(&dist, &eval, a.loss)?)?)?;
    Ok(0)
}

fn convergence_cmd(a: ConvergenceArgs) -> Result<i32> {
    let net = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let mut cfg = CertifyConfig::new(a.r);
    cfg.probes = a.probes;
    cfg.exhaustive_cap = a.exhaustive_cap;
    cfg.seed = a.seed;
    positive("eps", a.eps)?;
    let pgd = PgdConfig {
        loss: a.loss,
        epsilon: a.eps,
        norm: a.r,
        step: a.alpha,
        iters: a.maxiter,
    };
    pgd.validate()?;
    let series = run_convergence(&net, &data, &cfg, &pgd)?;
    if !series.exhaustive {
        warn!("mask inventory is not exhaustive: L_upper is an estimate");
    }
    emit(&a.out, "convergence.csv", &convergence_csv(&series)?)?;
    Ok(0)
}

fn remark1_cmd(a: Remark1Args) -> Result<i32> {
    if a.grid == 0 {
        return Err(Error::Usage("--grid must be positive".into()));
    }
    let mut rows = Vec::new();
    for eps in a.eps {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Usage(format!("--eps values must be nonnegative, got {eps}")));
        }
        rows.push(OneDimRow {
            epsilon: eps,
            oracle: one_dim_oracle(eps, a.grid),
            closed_form: 1.5 + eps / 2.0,
            lipschitz_certificate: 1.5 + eps,
        });
    }
    let report = OneDimReport {
        format: ONE_DIM_FORMAT.into(),
        grid: a.grid,
        rows,
    };
    emit(&a.out, "remark1.json", &to_json(&report)?)?;
    Ok(0)
}

fn selftest_cmd(a: SelftestArgs) -> Result<i32> {
    let ids: Vec<usize> = if a.only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { a.only };
    if let Some(bad) = ids.iter().find(|&&i| !CRITERIA.iter().any(|c| c.0 == i)) {
        return Err(Error::Usage(format!("no criterion {bad}; choose 1 to {}", CRITERIA.len())));
    }
    let mut failed = 0;
    for id in ids {
        let outcome = run_check(id);
        println!("{outcome}");
        failed += usize::from(!outcome.passed);
    }
    if failed > 0 {
        return Err(Error::Check(format!("{failed} criteria failed")));
    }
    Ok(0)
}

fn pipeline_cmd(a: PipelineArgs) -> Result<i32> {
    let dir = a
        .dir
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::Usage(format!("pipeline needs --dir or ${OUT_DIR_ENV}")))?;
    let cfg = ExperimentConfig::toy(a.seed);
    let run = run_pipeline(&cfg)?;
    for art in pipeline_artifacts(&run, &cfg)? {
        write_file(&dir.join(art.name), &art.contents)?;
    }
    Ok(0)
}
