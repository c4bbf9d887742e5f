//! Exact one-dimensional marginal of the uniform ball against a sample.

use supergauss::distributions::{sample, BallMarginal, SourceSpec};
use supergauss::error::Result;
use supergauss::geometry::UnitVector;
use supergauss::verifier::median_abs;

/// Returns the largest gap between empirical and exact tails.
pub fn run_example() -> Result<f64> {
    let n = 10;
    let marginal = BallMarginal::for_ball(n, 1.0)?;
    let data = sample(&SourceSpec::uniform_ball(n, 1.0), 3, 50_000)?;
    let theta = UnitVector::basis(n, 0);
    let m = median_abs(&data, &theta)?;
    println!("median of |Y|: sample {m:.5}, exact {:.5}", marginal.median_abs());
    let mut worst = 0.0f64;
    for i in 0..=8 {
        let t = 0.1 * i as f64;
        let exact = marginal.tail(t);
        let emp = data.rows().filter(|x| x[0] > t).count() as f64 / data.len() as f64;
        worst = worst.max((emp - exact).abs());
        println!("P(Y > {t:.1}) = {exact:.5}   sample {emp:.5}");
    }
    Ok(worst)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
