//! Command-line front end.
//!
//! Exit codes: 0 on success (and a passing certificate for `verify` and
//! `pipeline`), 1 on usage or validation errors, 2 when a certificate
//! fails.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::direction::{select_direction, SelectionConfig};
use crate::distributions::{load_dataset, sample, write_csv, Dataset, SourceSpec};
use crate::effective_rank::{effective_rank_exact, effrank_at_least};
use crate::error::{Error, Result};
use crate::geometry::UnitVector;
use crate::isotropy::{isotropize, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineInput, SCHEMA_VERSION};
use crate::verifier::{certify_direction, CertifyConfig, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GRID_STEP};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "SUPERGAUSS_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "supergauss",
    version,
    about = "Find and certify Super-Gaussian marginals of sampled random vectors"
)]
pub struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Draw samples from a synthetic law and write them as CSV.
    Gen(GenArgs),
    /// Exact effective rank of a finite atom set (rows of a CSV file).
    Rank(RankArgs),
    /// Compute the transform to angularly-isotropic position.
    Isotropize(IsotropizeArgs),
    /// Select the direction θ for a dataset.
    Find(FindArgs),
    /// Certify the Super-Gaussian tails of ⟨X, θ⟩.
    Verify(VerifyArgs),
    /// Run projection, isotropization, selection and certification.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct DistArgs {
    /// Law to sample: uniform_ball, gaussian, finite_atoms, subspace_mixture,
    /// product_heavy_tail (alias cauchy), or a JSON object.
    #[arg(long)]
    pub dist: Option<String>,
    /// Dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ball radius.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Gaussian variances, comma separated (default all 1).
    #[arg(long, value_delimiter = ',')]
    pub variances: Vec<f64>,
    /// CSV file of atoms for finite_atoms.
    #[arg(long)]
    pub atoms_file: Option<PathBuf>,
    /// Atom probabilities, comma separated (default uniform).
    #[arg(long, value_delimiter = ',')]
    pub probabilities: Vec<f64>,
    /// Subspace dimensions for subspace_mixture, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    /// Mixture weights for subspace_mixture, comma separated (default uniform).
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub dist: DistArgs,
    /// Number of samples.
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    /// CSV of atoms; repeated rows add mass.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Atom probabilities, comma separated (default uniform).
    #[arg(long, value_delimiter = ',')]
    pub probabilities: Vec<f64>,
    /// Also report whether the effective rank is at least d.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IsotropizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the transformed samples as CSV.
    #[arg(long)]
    pub transformed_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FindArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform random directions added to each candidate set.
    #[arg(long, default_value_t = 256)]
    pub extra_candidates: usize,
    /// Draw θ₃ without the near-orthogonality filter.
    #[arg(long)]
    pub no_theta3_filter: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Clone, Copy)]
pub struct CertifyArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Length L in median units (default 0.3·√n).
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    /// Write `t min_tail` columns next to the report.
    #[arg(long)]
    pub plot_data: bool,
}

impl CertifyArgs {
    fn config(&self) -> CertifyConfig {
        CertifyConfig {
            alpha: self.alpha,
            beta: self.beta,
            length: self.length,
            grid_step: self.grid_step,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// JSON with the direction: an array, or an object with `theta` or
    /// `functional`.
    #[arg(long)]
    pub theta_file: PathBuf,
    #[command(flatten)]
    pub certify: CertifyArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// CSV samples; otherwise `--dist` and `--samples` generate them.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub dist: DistArgs,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Project to ⌈d⌉ dimensions first.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Let the certificate decide the exit code even if the 5/n hypothesis
    /// fails.
    #[arg(long)]
    pub allow_hypothesis_failure: bool,
    #[command(flatten)]
    pub certify: CertifyArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn csv_floats(path: &Path, flag: &str) -> Result<Dataset> {
    load_dataset(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidInput(format!("{flag} {}: {io}", path.display())),
        other => other,
    })
}

impl DistArgs {
    fn spec(&self) -> Result<SourceSpec> {
        let dist = self
            .dist
            .as_deref()
            .ok_or_else(|| Error::validation("--dist", "required when --in is absent"))?;
        if dist.trim_start().starts_with('{') {
            let spec: SourceSpec = serde_json::from_str(dist)?;
            spec.validate()?;
            return Ok(spec);
        }
        let need_n = || {
            self.n
                .ok_or_else(|| Error::validation("--n", format!("required for {dist}")))
        };
        let spec = match dist {
            "uniform_ball" => SourceSpec::uniform_ball(need_n()?, self.radius),
            "gaussian" => {
                if self.variances.is_empty() {
                    SourceSpec::gaussian(vec![1.0; need_n()?])
                } else {
                    if self.n.is_some_and(|n| n != self.variances.len()) {
                        return Err(Error::validation("--variances", "length differs from --n"));
                    }
                    SourceSpec::gaussian(self.variances.clone())
                }
            }
            "finite_atoms" => {
                let path = self
                    .atoms_file
                    .as_ref()
                    .ok_or_else(|| Error::validation("--atoms-file", "required for finite_atoms"))?;
                let atoms = csv_floats(path, "--atoms-file")?;
                let rows: Vec<Vec<f64>> = atoms.rows().map(<[f64]>::to_vec).collect();
                let probs = uniform_or(&self.probabilities, rows.len());
                SourceSpec::finite_atoms(rows, probs)
            }
            "subspace_mixture" => SourceSpec::SubspaceMixture {
                n: need_n()?,
                weights: uniform_or(&self.weights, self.dims.len()),
                dims: self.dims.clone(),
            },
            "product_heavy_tail" | "cauchy" => SourceSpec::ProductHeavyTail { n: need_n()? },
            other => return Err(Error::validation("--dist", format!("unknown family '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn uniform_or(given: &[f64], len: usize) -> Vec<f64> {
    if given.is_empty() {
        vec![1.0 / len.max(1) as f64; len]
    } else {
        given.to_vec()
    }
}

/// Adds the schema version to a serialized report.
fn with_schema<T: Serialize>(report: &T) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    if let Value::Object(map) = &mut v {
        map.insert("schema".into(), Value::String(SCHEMA_VERSION.into()));
    }
    Ok(v)
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `r.json` → `r.tail.txt`; without a report path, `supergauss.tail.txt`.
pub fn plot_path(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => p.with_extension("tail.txt"),
        None => PathBuf::from("supergauss.tail.txt"),
    }
}

fn read_theta(path: &Path) -> Result<UnitVector> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("--theta-file {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)?;
    let arr = match &v {
        Value::Array(_) => v.clone(),
        Value::Object(m) => m
            .get("theta")
            .or_else(|| m.get("functional"))
            .cloned()
            .ok_or_else(|| Error::validation("--theta-file", "object has no theta or functional"))?,
        _ => return Err(Error::validation("--theta-file", "expected an array or an object")),
    };
    let coords: Vec<f64> = serde_json::from_value(arr)?;
    UnitVector::normalize(&coords)
}

fn run_command(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Gen(a) => {
            let data = sample(&a.dist.spec()?, a.seed, a.samples)?;
            match &a.out {
                Some(p) => write_csv(&data, fs::File::create(p)?)?,
                None => write_csv(&data, std::io::stdout().lock())?,
            }
            Ok(EXIT_OK)
        }
        Command::Rank(a) => {
            let rows = csv_floats(&a.input, "--in")?;
            let atoms = if a.probabilities.is_empty() {
                rows
            } else {
                Dataset::weighted(rows.dim(), rows.as_flat().to_vec(), a.probabilities.clone())?
            };
            let mut v = with_schema(&effective_rank_exact(&atoms)?)?;
            if let Some(d) = a.d {
                v["d"] = json!(d);
                v["effrank_at_least"] = json!(effrank_at_least(&atoms, d)?);
            }
            emit(&v, a.out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Isotropize(a) => {
            let data = csv_floats(&a.input, "--in")?;
            let t = isotropize(&data, a.tol, a.max_iter)?;
            if let Some(p) = &a.transformed_out {
                write_csv(&t.apply(&data)?, fs::File::create(p)?)?;
            }
            if !t.converged {
                eprintln!("warning: isotropic position not reached (residual {:.3e})", t.residual);
            }
            emit(&with_schema(&t)?, a.out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Find(a) => {
            let data = csv_floats(&a.input, "--in")?;
            let cfg = SelectionConfig {
                extra_random_candidates: a.extra_candidates,
                theta3_filter: !a.no_theta3_filter,
                ..SelectionConfig::default()
            };
            emit(&with_schema(&select_direction(&data, &cfg, a.seed)?)?, a.out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Verify(a) => {
            let data = csv_floats(&a.input, "--in")?;
            let theta = read_theta(&a.theta_file)?;
            let report = certify_direction(&data, &theta, &a.certify.config())?;
            if a.certify.plot_data {
                fs::write(plot_path(a.out.as_deref()), report.plot_data())?;
            }
            emit(&with_schema(&report)?, a.out.as_deref())?;
            Ok(if report.pass() { EXIT_OK } else { EXIT_CERTIFICATE })
        }
        Command::Pipeline(a) => {
            let input = match &a.input {
                Some(p) => PipelineInput::Data {
                    data: csv_floats(p, "--in")?,
                    source: p.display().to_string(),
                },
                None => PipelineInput::Spec {
                    spec: a.dist.spec()?,
                    count: a
                        .samples
                        .ok_or_else(|| Error::validation("--samples", "required with --dist"))?,
                },
            };
            let cfg = PipelineConfig {
                projection_dim: a.d,
                isotropy_tol: a.tol,
                isotropy_max_iter: a.max_iter,
                selection: SelectionConfig::default(),
                certify: a.certify.config(),
                require_hypothesis: !a.allow_hypothesis_failure,
            };
            let report = run_pipeline(&input, &cfg, a.seed)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if a.certify.plot_data {
                fs::write(plot_path(a.out.as_deref()), report.certificate.plot_data())?;
            }
            emit(&serde_json::to_value(&report)?, a.out.as_deref())?;
            Ok(if report.pass { EXIT_OK } else { EXIT_CERTIFICATE })
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: --threads: {e}");
            return EXIT_USAGE;
        }
    };
    let mut config = serde_json::to_value(&cli).unwrap_or(Value::Null);
    config["threads"] = json!(pool.current_num_threads());
    config["schema"] = json!(SCHEMA_VERSION);
    eprintln!("effective config: {config}");
    match pool.install(|| run_command(&cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
