//! Effective rank of finite atom sets and what a random projection does to it.

use supergauss::distributions::Dataset;
use supergauss::effective_rank::{effective_rank_exact, effrank_at_least, random_projection};
use supergauss::error::Result;
use supergauss::rng::stream;

/// Returns `d*` for the atoms `{e₁: 2/3, e₂: 1/3}`.
pub fn run_example() -> Result<f64> {
    let atoms = Dataset::weighted(2, vec![1.0, 0.0, 0.0, 1.0], vec![2.0 / 3.0, 1.0 / 3.0])?;
    let r = effective_rank_exact(&atoms)?;
    println!("d* = {}  witness {:?}", r.d_star, r.witness_basis);
    for d in [1.4, 1.5, 1.6] {
        println!("effective rank ≥ {d}: {}", effrank_at_least(&atoms, d)?);
    }

    let basis = Dataset::from_rows(&[
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
    ])?;
    let (l, image) = random_projection(&basis, 2.0, &mut stream(4, 0))?;
    println!(
        "e1..e4 projected to a random {}-plane: d* = {}",
        l.dim(),
        effective_rank_exact(&image)?.d_star
    );
    Ok(r.d_star)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
