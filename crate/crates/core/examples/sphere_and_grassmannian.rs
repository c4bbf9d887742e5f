//! Uniform directions, random subspaces and the almost-orthogonal test.

use supergauss::error::Result;
use supergauss::geometry::{is_almost_orthogonal_system, project, sample_grassmannian, sample_sphere};
use supergauss::rng::stream;

/// Returns the fraction of random triples in `R^2048` that pass the
/// almost-orthogonality test.
pub fn run_example() -> Result<f64> {
    let mut rng = stream(1, 0);
    let theta = sample_sphere(&mut rng, 5)?;
    println!("uniform direction in R^5: {:?}", theta.as_slice());

    let plane = sample_grassmannian(&mut rng, 5, 2)?;
    let p = project(&plane, theta.as_slice())?;
    let len = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("length of its projection to a random plane: {len:.4}");

    let trials = 1000;
    let mut passed = 0;
    for _ in 0..trials {
        let sys: Vec<Vec<f64>> = (0..3)
            .map(|_| sample_sphere(&mut rng, 2048).map(|u| u.into_inner()))
            .collect::<Result<_>>()?;
        if is_almost_orthogonal_system(&sys)? {
            passed += 1;
        }
    }
    let frac = passed as f64 / trials as f64;
    println!("random triples in R^2048 that are almost orthogonal: {frac:.3}");
    Ok(frac)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
