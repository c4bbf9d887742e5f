//! The whole reduction on the uniform ball, with a random projection.

use supergauss::distributions::SourceSpec;
use supergauss::error::Result;
use supergauss::pipeline::{run_pipeline, PipelineConfig, PipelineInput, PipelineReport};

pub fn run_example() -> Result<PipelineReport> {
    let input = PipelineInput::Spec {
        spec: SourceSpec::uniform_ball(40, 1.0),
        count: 40_000,
    };
    let cfg = PipelineConfig {
        projection_dim: Some(30.0),
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&input, &cfg, 7)?;
    println!(
        "n = {}, N = {}, projected to {}",
        report.input_summary.n,
        report.input_summary.count,
        report.projection.as_ref().map_or(report.input_summary.n, |l| l.dim())
    );
    println!(
        "hypothesis ok: {}, certificate pass: {}",
        report.hypothesis_ok, report.pass
    );
    println!("timings (ms): {:?}", report.timings_ms);
    let c = &report.certificate.certificate;
    println!(
        "median {:.4}, length {:.3}, failing t {:?}",
        c.m_med, c.length, c.failing_t
    );
    Ok(report)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
