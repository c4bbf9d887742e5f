//! The three building directions and the combined direction θ.

use supergauss::direction::{cap_guarantee_violations, select_direction, SelectionConfig};
use supergauss::distributions::{sample, SourceSpec};
use supergauss::error::Result;
use supergauss::geometry::UnitVector;

/// Returns the selected direction for a sample of the uniform ball in `R^12`.
pub fn run_example() -> Result<UnitVector> {
    let data = sample(&SourceSpec::uniform_ball(12, 1.0), 5, 20_000)?;
    let cfg = SelectionConfig::default();
    let sel = select_direction(&data, &cfg, 5)?;
    println!("M = {:.4}", sel.m);
    println!(
        "cap masses {:.3e} / {:.3e}, t0 = {:.3}",
        sel.cap_prob_1, sel.cap_prob_2, sel.t0
    );
    println!("{} candidates examined", sel.candidate_count);
    println!(
        "heavy samples on the wrong side of ±M/30: {}",
        cap_guarantee_violations(&data, &sel, cfg.constants.cap_radius)?
    );
    println!("{}", serde_json::to_string_pretty(&sel)?);
    Ok(sel.theta)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
