//! Puts a stretched Gaussian into angularly-isotropic position.

use supergauss::distributions::{sample, SourceSpec};
use supergauss::error::Result;
use supergauss::isotropy::{angular_covariance, isotropize, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Returns `n·λ_max` of the angular covariance after the transform.
pub fn run_example() -> Result<f64> {
    let n = 20;
    let mut variances = vec![1.0; n];
    variances[0] = 100.0;
    let data = sample(&SourceSpec::gaussian(variances), 1, 20_000)?;
    let before = n as f64 * angular_covariance(&data).lambda_max();
    let t = isotropize(&data, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let after = n as f64 * angular_covariance(&t.apply(&data)?).lambda_max();
    println!("n·λ_max before {before:.3}, after {after:.3}");
    println!(
        "converged {} in {} iterations, residual {:.2e}",
        t.converged, t.iterations, t.residual
    );
    Ok(after)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
