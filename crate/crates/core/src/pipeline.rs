//! End-to-end reduction: optional random projection to `⌈d⌉` dimensions,
//! angularly-isotropic position, the `5/n` hypothesis check, direction
//! selection and certification. The selected direction is reported as a
//! linear functional on the original coordinates.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::direction::{select_direction, DirectionSelection, SelectionConfig};
use crate::distributions::{sample, Dataset, SourceSpec};
use crate::effective_rank::{effective_rank_exact, random_projection, EffectiveRankReport};
use crate::error::{Error, Result};
use crate::geometry::{Subspace, UnitVector};
use crate::isotropy::{isotropize, verify_subisotropic, IsotropyTransform, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::linalg::dot;
use crate::rng::{stage_stream_id, stream, PROJECTION_STAGE};
use crate::verifier::{certify_direction, CertificateReport, CertifyConfig};

/// Schema identifier embedded in every report.
pub const SCHEMA_VERSION: &str = "supergauss/1";
/// The hypothesis requires `E⟨X/|X|, v⟩² ≤ HYPOTHESIS_CONSTANT / n`.
pub const HYPOTHESIS_CONSTANT: f64 = 5.0;

/// What the pipeline runs on.
#[derive(Debug, Clone)]
pub enum PipelineInput {
    /// Samples loaded elsewhere; `source` names them in the report.
    Data { data: Dataset, source: String },
    /// `count` samples drawn from `spec` with the pipeline seed.
    Spec { spec: SourceSpec, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Target effective rank `d`; projects to `⌈d⌉` dimensions when set.
    pub projection_dim: Option<f64>,
    pub isotropy_tol: f64,
    pub isotropy_max_iter: usize,
    pub selection: SelectionConfig,
    pub certify: CertifyConfig,
    /// Whether the overall verdict needs the hypothesis to hold.
    pub require_hypothesis: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            projection_dim: None,
            isotropy_tol: DEFAULT_TOL,
            isotropy_max_iter: DEFAULT_MAX_ITER,
            selection: SelectionConfig::default(),
            certify: CertifyConfig::default(),
            require_hypothesis: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub n: usize,
    #[serde(rename = "N")]
    pub count: usize,
    pub source: String,
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub generate: f64,
    pub effective_rank: f64,
    pub projection: f64,
    pub isotropize: f64,
    pub hypothesis: f64,
    pub select: f64,
    pub certify: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema: String,
    pub input_summary: InputSummary,
    /// Exact effective rank, for finite-atom inputs inside the enumeration
    /// limits.
    pub rank_report: Option<EffectiveRankReport>,
    /// Why `rank_report` is absent; the rank is then unchecked.
    pub rank_note: Option<String>,
    /// Subspace the data was projected onto, when `d` was given.
    pub projection: Option<Subspace>,
    pub transform: IsotropyTransform,
    /// The transform converged and `E⟨X/|X|, v⟩² ≤ 5/n` for the transformed
    /// data.
    pub hypothesis_ok: bool,
    /// Set when the certificate passed although the hypothesis did not hold.
    pub hypothesis_override: bool,
    pub selection: DirectionSelection,
    /// `ℓ` with `ℓ(x) = ⟨x, functional⟩` on the original coordinates.
    pub functional: Vec<f64>,
    pub certificate: CertificateReport,
    /// Certificate verdict, combined with the hypothesis when required.
    pub pass: bool,
    pub warnings: Vec<String>,
    pub timings_ms: StageTimings,
    pub seed: u64,
}

impl PipelineReport {
    /// The report with every timing set to zero, for comparing runs.
    pub fn without_timings(&self) -> Self {
        PipelineReport {
            timings_ms: StageTimings::default(),
            ..self.clone()
        }
    }

    /// `ℓ(x)` for a sample in original coordinates.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(x, &self.functional)
    }

    /// `ℓ / |ℓ|`.
    pub fn direction(&self) -> Result<UnitVector> {
        UnitVector::normalize(&self.functional)
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Exact effective rank where it is defined and affordable.
fn rank_stage(input: &PipelineInput) -> Result<(Option<EffectiveRankReport>, Option<String>)> {
    let atoms = match input {
        PipelineInput::Spec {
            spec: SourceSpec::FiniteAtoms { atoms, probabilities },
            ..
        } => Dataset::weighted(atoms[0].len(), atoms.concat(), probabilities.clone())?,
        PipelineInput::Spec { spec, .. } => {
            return Ok((
                None,
                Some(format!("{} law has a density; rank not enumerated", spec.family())),
            ));
        }
        PipelineInput::Data { data, .. } => data.clone(),
    };
    match effective_rank_exact(&atoms) {
        Ok(r) => Ok((Some(r), None)),
        Err(e @ Error::BudgetExceeded { .. }) => Ok((None, Some(format!("unchecked: {e}")))),
        Err(e) => Err(e),
    }
}

pub fn run_pipeline(input: &PipelineInput, cfg: &PipelineConfig, seed: u64) -> Result<PipelineReport> {
    cfg.selection.validate()?;
    cfg.certify.validate()?;
    let mut timings = StageTimings::default();
    let mut warnings = Vec::new();

    let t = Instant::now();
    let (data, source) = match input {
        PipelineInput::Data { data, source } => (data.clone(), source.clone()),
        PipelineInput::Spec { spec, count } => (
            sample(spec, seed, *count).map_err(|e| e.in_stage("generate"))?,
            spec.family().to_string(),
        ),
    };
    timings.generate = ms(t);
    let input_summary = InputSummary {
        n: data.dim(),
        count: data.len(),
        source,
    };

    let t = Instant::now();
    let (rank_report, rank_note) = rank_stage(input).map_err(|e| e.in_stage("effective_rank"))?;
    timings.effective_rank = ms(t);

    let t = Instant::now();
    let (projection, working) = match cfg.projection_dim {
        Some(d) => {
            let mut rng = stream(seed, stage_stream_id(PROJECTION_STAGE));
            let (l, image) = random_projection(&data, d, &mut rng).map_err(|e| e.in_stage("projection"))?;
            (Some(l), image)
        }
        None => (None, data.clone()),
    };
    timings.projection = ms(t);

    let t = Instant::now();
    let transform =
        isotropize(&working, cfg.isotropy_tol, cfg.isotropy_max_iter).map_err(|e| e.in_stage("isotropize"))?;
    if !transform.converged {
        warnings.push(format!(
            "isotropic position not reached after {} iterations (residual {:.3e}); continuing with the best iterate",
            transform.iterations, transform.residual
        ));
    }
    let inner = transform.apply(&working).map_err(|e| e.in_stage("isotropize"))?;
    timings.isotropize = ms(t);

    let t = Instant::now();
    let k = inner.dim() as f64;
    // A transform that did not converge is not trusted to deliver the bound.
    let hypothesis_ok = transform.converged && verify_subisotropic(&inner, k / HYPOTHESIS_CONSTANT, 0.0);
    if !hypothesis_ok {
        warnings.push("transformed data violates E⟨X/|X|, v⟩² ≤ 5/n".into());
    }
    timings.hypothesis = ms(t);

    let t = Instant::now();
    let selection = select_direction(&inner, &cfg.selection, seed).map_err(|e| e.in_stage("select"))?;
    timings.select = ms(t);

    // ℓ = Pᵀ A θ: the samples were mapped x ↦ A·P·x.
    let a_theta = transform.apply_vec(selection.theta.as_slice());
    let functional = match &projection {
        Some(l) => {
            let mut f = vec![0.0; data.dim()];
            for (c, u) in a_theta.iter().zip(l.basis()) {
                for (fi, ui) in f.iter_mut().zip(u) {
                    *fi += c * ui;
                }
            }
            f
        }
        None => a_theta,
    };

    let t = Instant::now();
    let certificate = certify_direction(&inner, &selection.theta, &cfg.certify).map_err(|e| e.in_stage("certify"))?;
    timings.certify = ms(t);

    let cert_pass = certificate.pass();
    Ok(PipelineReport {
        schema: SCHEMA_VERSION.to_string(),
        input_summary,
        rank_report,
        rank_note,
        projection,
        transform,
        hypothesis_ok,
        hypothesis_override: cert_pass && !hypothesis_ok,
        selection,
        functional,
        certificate,
        pass: cert_pass && (hypothesis_ok || !cfg.require_hypothesis),
        warnings,
        timings_ms: timings,
        seed,
    })
}
