//! Product of Cauchy coordinates: no moments, but medians still work.

use supergauss::distributions::SourceSpec;
use supergauss::error::Result;
use supergauss::pipeline::{run_pipeline, PipelineConfig, PipelineInput};
use supergauss::verifier::CertifyConfig;

/// Returns whether the certificate passes at length 2.
pub fn run_example() -> Result<bool> {
    let input = PipelineInput::Spec {
        spec: SourceSpec::ProductHeavyTail { n: 10 },
        count: 30_000,
    };
    let cfg = PipelineConfig {
        certify: CertifyConfig {
            length: Some(2.0),
            ..CertifyConfig::default()
        },
        ..PipelineConfig::default()
    };
    let r = run_pipeline(&input, &cfg, 3)?;
    for row in &r.certificate.grid {
        println!(
            "t = {:.2}  min tail {:.4}  bound {:.4}",
            row.t,
            row.upper.min(row.lower),
            row.ci_lb
        );
    }
    println!("pass = {}", r.pass);
    Ok(r.pass)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
