//! Tail curve, certificate and fitted parameters for a fixed direction.

use supergauss::distributions::{sample, SourceSpec};
use supergauss::error::Result;
use supergauss::geometry::UnitVector;
use supergauss::verifier::{certify, default_grid, fit_parameters, median_abs, tail_curve};

/// Returns whether the default certificate passes for `⟨X, e₁⟩`, `X` uniform
/// in the ball of `R^30`.
pub fn run_example() -> Result<bool> {
    let n = 30;
    let data = sample(&SourceSpec::uniform_ball(n, 1.0), 2, 50_000)?;
    let theta = UnitVector::basis(n, 0);
    let m = median_abs(&data, &theta)?;
    let length = 0.3 * (n as f64).sqrt();
    let curve = tail_curve(&data, &theta, m, &default_grid(length, 0.25)?)?;
    for i in 0..curve.t_grid.len() {
        println!(
            "t = {:.2}  upper {:.4}  lower {:.4}  95% bound {:.4}",
            curve.t_grid[i], curve.upper[i], curve.lower[i], curve.ci_lower_bounds[i]
        );
    }
    let cert = certify(&curve, 0.05, 3.0, length)?;
    let (alpha, beta) = fit_parameters(&curve, length)?;
    println!("α = 0.05, β = 3 on [0, {length:.2}]: pass = {}", cert.pass);
    println!("fitted α = {alpha:.4}, β = {beta:.3}");
    Ok(cert.pass)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
