//! Every shipped example runs to completion and returns a sane value.

#[allow(dead_code)]
#[path = "../examples/ball_marginal.rs"]
mod ball_marginal;
#[allow(dead_code)]
#[path = "../examples/certify_tails.rs"]
mod certify_tails;
#[allow(dead_code)]
#[path = "../examples/effective_rank.rs"]
mod effective_rank;
#[allow(dead_code)]
#[path = "../examples/full_pipeline.rs"]
mod full_pipeline;
#[allow(dead_code)]
#[path = "../examples/heavy_tails.rs"]
mod heavy_tails;
#[allow(dead_code)]
#[path = "../examples/isotropic_position.rs"]
mod isotropic_position;
#[allow(dead_code)]
#[path = "../examples/select_direction.rs"]
mod select_direction;
#[allow(dead_code)]
#[path = "../examples/sphere_and_grassmannian.rs"]
mod sphere_and_grassmannian;

#[test]
fn ball_marginal_sample_tracks_exact_tail() {
    // 5 binomial σ at N = 5·10⁴ and p = 1/2.
    assert!(ball_marginal::run_example().unwrap() < 5.0 * (0.25f64 / 5e4).sqrt());
}

#[test]
fn certify_tails_passes() {
    assert!(certify_tails::run_example().unwrap());
}

#[test]
fn effective_rank_matches_the_atom_instance() {
    assert!((effective_rank::run_example().unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn full_pipeline_certifies() {
    assert!(full_pipeline::run_example().unwrap().pass);
}

#[test]
fn heavy_tails_certifies() {
    assert!(heavy_tails::run_example().unwrap());
}

#[test]
fn isotropic_position_flattens_angular_covariance() {
    let after = isotropic_position::run_example().unwrap();
    assert!((0.9..=1.1).contains(&after), "{after}");
}

#[test]
fn select_direction_returns_unit_vector() {
    let theta = select_direction::run_example().unwrap();
    let norm: f64 = theta.as_slice().iter().map(|x| x * x).sum();
    assert!((norm - 1.0).abs() < 1e-12);
}

#[test]
fn random_triples_are_almost_orthogonal() {
    assert!(sphere_and_grassmannian::run_example().unwrap() >= 0.99);
}
