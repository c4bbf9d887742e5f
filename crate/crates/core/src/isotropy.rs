//! Angular covariance and the angularly-isotropic position.
//!
//! The angular covariance of `X` is `E[(X/|X|)(X/|X|)ᵀ]`; its quadratic form
//! gives `E⟨X/|X|, θ⟩²` for every direction at once, and its trace is 1.
//! A positive-definite `A` puts `X` in angularly-isotropic position when the
//! angular covariance of `AX` is `I/n`. We find `A = Σ^{−1/2}` from the
//! fixed point of
//!
//! ```text
//! Σ ← n · Σ_i w_i x_i x_iᵀ / (x_iᵀ Σ⁻¹ x_i),   tr Σ = n,
//! ```
//!
//! which exists when every proper subspace `E` carries mass below
//! `dim(E)/n`. At a fixed point the angular covariance of `Σ^{−1/2} X` is
//! exactly `I/n`.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Dataset;
use crate::error::{Error, Result};
use crate::geometry::UnitVector;
use crate::linalg::{self, dot, norm};

/// Rows per chunk in the scatter reductions.
const SCATTER_CHUNK: usize = 4096;
/// Iterates whose condition number exceeds this are treated as diverged.
const MAX_CONDITION: f64 = 1e12;

pub const DEFAULT_TOL: f64 = 0.05;
pub const DEFAULT_MAX_ITER: usize = 500;

/// `Σ_i w_i ⟨x_i/|x_i|, θ⟩²`.
pub fn angular_second_moment(data: &Dataset, theta: &UnitVector) -> Result<f64> {
    if theta.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: theta.dim(),
        });
    }
    let mut acc = 0.0;
    for (i, x) in data.rows().enumerate() {
        let r = norm(x);
        if r == 0.0 {
            return Err(Error::InvalidInput(format!("sample {i} is zero")));
        }
        let c = dot(x, theta.as_slice()) / r;
        acc += data.weight(i) * c * c;
    }
    Ok(acc)
}

/// Weighted average of `(x/|x|)(x/|x|)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularCovariance {
    pub matrix: DMatrix<f64>,
    /// `|tr − 1|`.
    pub trace_error: f64,
}

impl AngularCovariance {
    /// `θᵀ M θ`.
    pub fn quadratic(&self, theta: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(theta);
        (v.transpose() * &self.matrix * &v)[(0, 0)]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::sorted_eigen(&self.matrix).0
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().expect("n ≥ 1")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Weighted scatter `Σ_i w_i x_i x_iᵀ · g(x_i)` accumulated over fixed row
/// chunks and summed in chunk order, so the result does not depend on the
/// number of worker threads.
fn weighted_scatter<G>(data: &Dataset, scale: G) -> DMatrix<f64>
where
    G: Fn(&DMatrix<f64>) -> Vec<f64> + Sync,
{
    let n = data.dim();
    let parts: Vec<DMatrix<f64>> = data
        .as_flat()
        .par_chunks(n * SCATTER_CHUNK)
        .zip(data.weights().par_chunks(SCATTER_CHUNK))
        .map(|(rows, w)| {
            let m = w.len();
            let x = DMatrix::from_row_slice(m, n, rows);
            let g = scale(&x);
            let mut y = x;
            for i in 0..m {
                let s = (w[i] * g[i]).sqrt();
                y.row_mut(i).scale_mut(s);
            }
            y.transpose() * &y
        })
        .collect();
    let mut total = DMatrix::zeros(n, n);
    for p in parts {
        total += p;
    }
    linalg::symmetrize(&total)
}

fn row_norms_sq(x: &DMatrix<f64>) -> Vec<f64> {
    x.row_iter().map(|r| r.norm_squared()).collect()
}

pub fn angular_covariance(data: &Dataset) -> AngularCovariance {
    let matrix = weighted_scatter(data, |x| row_norms_sq(x).iter().map(|q| 1.0 / q).collect());
    let trace_error = (matrix.trace() - 1.0).abs();
    AngularCovariance { matrix, trace_error }
}

/// Whether `E⟨X/|X|, θ⟩² ≤ (1 + slack)/d` for every unit `θ`, i.e.
/// `n·λ_max ≤ (n/d)(1 + slack)`. With `d = n/5` this is the hypothesis
/// `E⟨X/|X|, θ⟩² ≤ 5/n`.
pub fn verify_subisotropic(data: &Dataset, d: f64, slack: f64) -> bool {
    if !(d > 0.0) {
        return false;
    }
    angular_covariance(data).lambda_max() <= (1.0 + slack) / d
}

/// One evaluation of the fixed-point map at `Σ`.
#[derive(Debug, Clone)]
pub struct TylerStep {
    /// `n·(λ_max − λ_min)` of the angular covariance of `Σ^{−1/2} X`.
    pub residual: f64,
    /// Eigenvalues of that angular covariance, ascending.
    pub eigenvalues: Vec<f64>,
    /// Next iterate, normalized to trace `n`.
    pub next: DMatrix<f64>,
}

/// Evaluates the fixed-point map at a symmetric positive-definite `sigma`.
pub fn tyler_step(data: &Dataset, sigma: &DMatrix<f64>) -> Result<TylerStep> {
    let n = data.dim();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.nrows(),
        });
    }
    let chol = Cholesky::new(sigma.clone())
        .ok_or_else(|| Error::Numerical("scatter iterate is not positive definite".into()))?;
    let l_inv = lower_inverse(&chol);
    let l_inv_t = l_inv.transpose();
    // x_iᵀ Σ⁻¹ x_i = |L⁻¹ x_i|²
    let scatter = weighted_scatter(data, |x| {
        let z = x * &l_inv_t;
        row_norms_sq(&z).iter().map(|q| 1.0 / q).collect()
    });
    let image_cov = linalg::symmetrize(&(&l_inv * &scatter * &l_inv_t));
    let (eigenvalues, _) = linalg::sorted_eigen(&image_cov);
    let residual = n as f64 * (eigenvalues[n - 1] - eigenvalues[0]);
    let tr = scatter.trace();
    let next = scatter * (n as f64 / tr);
    Ok(TylerStep {
        residual,
        eigenvalues,
        next,
    })
}

fn lower_inverse(chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    let l = chol.l();
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("Cholesky factor has a positive diagonal")
}

fn condition(sigma: &DMatrix<f64>) -> f64 {
    let (v, _) = linalg::sorted_eigen(sigma);
    v[v.len() - 1] / v[0]
}

/// Linear map realizing the angularly-isotropic position.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropyTransform {
    /// Symmetric positive-definite `A = Σ^{−1/2}`.
    pub matrix: DMatrix<f64>,
    /// Fixed-point evaluations performed.
    pub iterations: usize,
    /// `n·(λ_max − λ_min)` of the angular covariance of `A·X`.
    pub residual: f64,
    pub converged: bool,
    /// When not converged: unit eigenvector of the smallest eigenvalue of the
    /// last scatter iterate. The subspace carrying too much mass lies
    /// (approximately) orthogonal to it.
    pub starved_direction: Option<Vec<f64>>,
}

impl IsotropyTransform {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn identity(n: usize) -> Self {
        IsotropyTransform {
            matrix: DMatrix::identity(n, n),
            iterations: 0,
            residual: f64::NAN,
            converged: false,
            starved_direction: None,
        }
    }

    /// `A x`.
    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum())
            .collect()
    }

    /// `{A x_i}` with the same weights.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: data.dim(),
            });
        }
        data.map_rows(self.dim(), |x, out| {
            let y = self.apply_vec(x);
            out.copy_from_slice(&y);
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TransformJson {
    matrix: Vec<Vec<f64>>,
    iterations: usize,
    residual: f64,
    converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    starved_direction: Option<Vec<f64>>,
}

impl Serialize for IsotropyTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TransformJson {
            matrix: self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            iterations: self.iterations,
            residual: self.residual,
            converged: self.converged,
            starved_direction: self.starved_direction.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IsotropyTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TransformJson::deserialize(d)?;
        let n = j.matrix.len();
        if j.matrix.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("transform matrix must be square"));
        }
        Ok(IsotropyTransform {
            matrix: DMatrix::from_fn(n, n, |i, k| j.matrix[i][k]),
            iterations: j.iterations,
            residual: j.residual,
            converged: j.converged,
            starved_direction: j.starved_direction,
        })
    }
}

/// Runs the fixed-point iteration from `Σ = I` until
/// `n·(λ_max − λ_min) ≤ tol` or `max_iter` evaluations. On failure the best
/// iterate is returned with `converged = false`.
pub fn isotropize(data: &Dataset, tol: f64, max_iter: usize) -> Result<IsotropyTransform> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be positive".into()));
    }
    let n = data.dim();
    let mut sigma = DMatrix::<f64>::identity(n, n);
    let mut best: Option<(DMatrix<f64>, f64, usize)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut last = sigma.clone();
    for it in 1..=max_iter {
        iterations = it;
        let step = match tyler_step(data, &sigma) {
            Ok(s) => s,
            Err(_) => break,
        };
        if best.as_ref().is_none_or(|b| step.residual < b.1) {
            best = Some((sigma.clone(), step.residual, it));
        }
        if step.residual <= tol {
            converged = true;
            break;
        }
        last = step.next.clone();
        if !(condition(&step.next) < MAX_CONDITION) {
            break;
        }
        sigma = step.next;
    }
    let (best_sigma, residual, _) = best.ok_or_else(|| Error::Numerical("no valid scatter iterate".into()))?;
    let starved_direction = (!converged).then(|| {
        let (_, vecs) = linalg::sorted_eigen(&linalg::symmetrize(&last));
        let v: Vec<f64> = vecs.column(0).iter().copied().collect();
        canonical_sign(v)
    });
    Ok(IsotropyTransform {
        matrix: linalg::spd_power(&best_sigma, -0.5),
        iterations,
        residual,
        converged,
        starved_direction,
    })
}

fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    let lead = v
        .iter()
        .copied()
        .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample, SourceSpec};
    use crate::geometry::{sample_grassmannian, sample_sphere};
    use crate::rng::stream;

    fn cross(scale: f64) -> Dataset {
        Dataset::from_rows(&[vec![scale, 0.0], vec![-scale, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap()
    }

    #[test]
    fn second_moment_examples() {
        let th = UnitVector::new(vec![0.6, 0.8]).unwrap();
        let same = Dataset::from_rows(&[vec![0.6, 0.8], vec![1.2, 1.6]]).unwrap();
        assert!((angular_second_moment(&same, &th).unwrap() - 1.0).abs() < 1e-15);
        let orth = Dataset::from_rows(&[vec![-0.8, 0.6], vec![1.6, -1.2]]).unwrap();
        assert!(angular_second_moment(&orth, &th).unwrap() < 1e-30);
    }

    #[test]
    fn second_moment_of_uniform_sphere() {
        let n = 50;
        let data = sample(&SourceSpec::uniform_ball(n, 1.0), 3, 100_000).unwrap();
        let th = UnitVector::basis(n, 0);
        let m = angular_second_moment(&data, &th).unwrap();
        // Var⟨Θ,e1⟩² = E Θ₁⁴ − 1/n² = 3/(n(n+2)) − 1/n².
        let var = 3.0 / (n * (n + 2)) as f64 - 1.0 / (n * n) as f64;
        let sigma = (var / 100_000.0).sqrt();
        assert!((m - 1.0 / n as f64).abs() < 3.0 * sigma, "{m}");
    }

    #[test]
    fn covariance_examples() {
        let c = angular_covariance(&cross(1.0));
        assert!((c.matrix.clone() - DMatrix::identity(2, 2) * 0.5).norm() < 1e-15);
        assert!(c.trace_error < 1e-15);
        let single = angular_covariance(&Dataset::from_rows(&[vec![3.0, 0.0]]).unwrap());
        assert!((single.matrix[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(single.matrix[(1, 1)], 0.0);
    }

    #[test]
    fn covariance_quadratic_form_matches_second_moment() {
        let data = sample(&SourceSpec::gaussian(vec![9.0, 1.0, 0.5, 2.0]), 5, 3000).unwrap();
        let c = angular_covariance(&data);
        assert!(c.trace_error < 1e-10);
        let mut rng = stream(6, 0);
        for _ in 0..100 {
            let th = sample_sphere(&mut rng, 4).unwrap();
            let a = c.quadratic(th.as_slice());
            let b = angular_second_moment(&data, &th).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn already_isotropic_stops_at_first_evaluation() {
        let t = isotropize(&cross(1.0), 0.05, 500).unwrap();
        assert!(t.converged);
        assert_eq!(t.iterations, 1);
        assert!((t.matrix.clone() - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn stretched_cross_has_isotropic_image() {
        let data = cross(10.0);
        let t = isotropize(&data, 0.05, 500).unwrap();
        assert!(t.converged);
        assert!(t.matrix[(0, 1)].abs() < 1e-12);
        let img = t.apply(&data).unwrap();
        let c = angular_covariance(&img);
        assert!((c.matrix - DMatrix::identity(2, 2) * 0.5).norm() < 1e-12);
    }

    #[test]
    fn anisotropic_gaussian_is_isotropized() {
        let mut v = vec![1.0; 20];
        v[0] = 100.0;
        let data = sample(&SourceSpec::gaussian(v), 1, 50_000).unwrap();
        let before = 20.0 * angular_covariance(&data).lambda_max();
        assert!(before >= 5.0, "{before}");
        let t = isotropize(&data, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(t.converged);
        let img = t.apply(&data).unwrap();
        let after = 20.0 * angular_covariance(&img).lambda_max();
        assert!((0.9..=1.1).contains(&after), "{after}");
        assert!(verify_subisotropic(&img, 10.0, 0.0));
        // The reported residual describes A·X.
        let c = angular_covariance(&img);
        assert!((20.0 * (c.lambda_max() - c.lambda_min()) - t.residual).abs() < 1e-8);
    }

    #[test]
    fn mass_on_a_line_does_not_converge() {
        let data = Dataset::weighted(2, vec![1.0, 0.0, 0.0, 1.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let t = isotropize(&data, 0.05, 500).unwrap();
        assert!(!t.converged);
        let s = t.starved_direction.unwrap();
        // The heavy line span(e1) is orthogonal to the starved direction.
        assert!(s[0].abs() < 1e-6 && (s[1].abs() - 1.0).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn planar_support_does_not_converge() {
        let data = Dataset::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let t = isotropize(&data, 0.05, 500).unwrap();
        assert!(!t.converged);
        let s = t.starved_direction.unwrap();
        assert!((s[2].abs() - 1.0).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn iterates_keep_trace_n() {
        let data = sample(&SourceSpec::gaussian(vec![4.0, 1.0, 0.1]), 2, 2000).unwrap();
        let mut sigma = DMatrix::identity(3, 3);
        for _ in 0..10 {
            let step = tyler_step(&data, &sigma).unwrap();
            assert!((step.next.trace() - 3.0).abs() < 1e-12);
            sigma = step.next;
        }
    }

    #[test]
    fn scale_equivariance() {
        let data = sample(&SourceSpec::gaussian(vec![4.0, 1.0, 0.3, 2.0]), 9, 5000).unwrap();
        let a = isotropize(&data, 1e-6, 2000).unwrap();
        let scaled = data.scaled(3.7).unwrap();
        let b = isotropize(&scaled, 1e-6, 2000).unwrap();
        let ca = angular_covariance(&a.apply(&data).unwrap());
        let cb = angular_covariance(&b.apply(&scaled).unwrap());
        assert!((ca.matrix - cb.matrix).amax() < 1e-10);
    }

    #[test]
    fn subspace_second_moment_bounded_by_lambda_max() {
        let data = sample(&SourceSpec::gaussian(vec![5.0, 1.0, 1.0, 0.2, 3.0]), 4, 4000).unwrap();
        let c = angular_covariance(&data);
        let lmax = c.lambda_max();
        let mut rng = stream(10, 0);
        for k in 1..=5 {
            let e = sample_grassmannian(&mut rng, 5, k).unwrap();
            let mut acc = 0.0;
            for (i, x) in data.rows().enumerate() {
                let u: Vec<f64> = x.iter().map(|v| v / norm(x)).collect();
                let p = e.coordinates(&u).unwrap();
                acc += data.weight(i) * dot(&p, &p);
            }
            assert!(acc <= k as f64 * lmax + 1e-12);
        }
    }

    #[test]
    fn subisotropic_examples() {
        let single = Dataset::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(verify_subisotropic(&single, 1.0, 0.0));
        assert!(!verify_subisotropic(&single, 1.01, 0.0));
    }

    #[test]
    fn near_isotropic_pins_the_spectrum() {
        // λ_max ≤ 1/n + ε with trace 1 forces ‖M − I/n‖ ≤ n·ε.
        let data = sample(&SourceSpec::uniform_ball(6, 1.0), 8, 20_000).unwrap();
        let c = angular_covariance(&data);
        let n = 6.0;
        let eps = (c.lambda_max() - 1.0 / n).max(0.0);
        let dev = (c.matrix.clone() - DMatrix::identity(6, 6) / n)
            .symmetric_eigenvalues()
            .amax();
        assert!(dev <= n * eps + 1e-12);
    }

    #[test]
    fn transform_json_round_trip() {
        let data = sample(&SourceSpec::gaussian(vec![4.0, 1.0]), 2, 500).unwrap();
        let t = isotropize(&data, 0.05, 100).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: IsotropyTransform = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v["matrix"].is_array() && v["converged"].is_boolean());
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let data = sample(&SourceSpec::gaussian(vec![30.0, 1.0, 2.0]), 3, 20_000).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| isotropize(&data, 0.01, 500).unwrap());
        let b = four.install(|| isotropize(&data, 0.01, 500).unwrap());
        assert_eq!(a, b);
    }
}
