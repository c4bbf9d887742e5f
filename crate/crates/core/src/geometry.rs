//! Sphere and subspace primitives: uniform sampling on `S^{n-1}` and the
//! Grassmannian, orthogonal projections, the Gram–Schmidt smallness test for
//! almost-orthogonal systems, spherical caps and the combined direction
//! `(θ₁ − θ₂ + θ₃) / |θ₁ − θ₂ + θ₃|`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm};

/// Tolerance on `|θ| = 1` for [`UnitVector`].
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Tolerance on pairwise orthonormality for [`Subspace`] bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A point of the unit sphere `S^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps `coords`, checking `| |coords| − 1 | ≤ 1e−12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension("unit vector of length 0".into()));
        }
        let r = norm(&coords);
        if (r - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidInput(format!("vector has norm {r}, expected 1")));
        }
        Ok(UnitVector(coords))
    }

    /// Normalizes a nonzero vector.
    pub fn normalize(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidDimension("vector of length 0".into()));
        }
        linalg::normalized(v)
            .map(UnitVector)
            .ok_or_else(|| Error::InvalidInput("cannot normalize a zero vector".into()))
    }

    /// Standard basis vector `e_i` of `R^n`.
    pub fn basis(n: usize, i: usize) -> Self {
        assert!(i < n, "basis index {i} out of range for dimension {n}");
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        UnitVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn neg(&self) -> Self {
        UnitVector(self.0.iter().map(|x| -x).collect())
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitVector::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Self {
        u.0
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A linear subspace of `R^n` given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    /// `{0} ⊆ R^n`.
    pub fn zero(n: usize) -> Self {
        Subspace {
            ambient: n,
            basis: Vec::new(),
        }
    }

    /// `R^n` with the standard basis.
    pub fn full(n: usize) -> Self {
        Subspace {
            ambient: n,
            basis: (0..n).map(|i| UnitVector::basis(n, i).into_inner()).collect(),
        }
    }

    /// Wraps a basis that must already be orthonormal within 1e−10.
    pub fn from_orthonormal(ambient: usize, basis: Vec<Vec<f64>>) -> Result<Self> {
        if basis.len() > ambient {
            return Err(Error::InvalidDimension(format!(
                "{} basis vectors in ambient dimension {ambient}",
                basis.len()
            )));
        }
        for (i, u) in basis.iter().enumerate() {
            if u.len() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    got: u.len(),
                });
            }
            for (j, w) in basis.iter().enumerate().take(i + 1) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(u, w) - target).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidInput(format!(
                        "basis vectors {j} and {i} are not orthonormal"
                    )));
                }
            }
        }
        Ok(Subspace { ambient, basis })
    }

    /// Span of arbitrary vectors; dependent vectors (relative residual below
    /// 1e−9) are discarded.
    pub fn span(ambient: usize, vectors: &[&[f64]]) -> Result<Self> {
        for v in vectors {
            if v.len() != ambient {
                return Err(Error::DimensionMismatch {
                    expected: ambient,
                    got: v.len(),
                });
            }
        }
        Ok(Subspace {
            ambient,
            basis: linalg::orthonormal_span(vectors, 1e-9),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Coordinates `(⟨v, u_1⟩, …, ⟨v, u_k⟩)` of the projection of `v`.
    pub fn coordinates(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok(self.basis.iter().map(|u| dot(u, v)).collect())
    }

    /// Length of the component of `v` orthogonal to the subspace.
    pub fn residual_norm(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        Ok(norm(&linalg::orthogonalize(&self.basis, v)))
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.ambient {
            return Err(Error::DimensionMismatch {
                expected: self.ambient,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Constants of the two cap-maximization steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConstants {
    /// Radius of the spherical caps (1/5).
    pub cap_radius: f64,
    /// Bound on `|⟨θ_i, θ_j⟩|` between the three building directions (1/10).
    pub ortho_slack: f64,
    /// Pairwise cosine bound for separated points (49/50).
    pub cosine_bound: f64,
    /// Level `q` of the `q`-quantile of `|X|` (1/3).
    pub quantile_level: f64,
}

impl Default for SelectionConstants {
    fn default() -> Self {
        SelectionConstants {
            cap_radius: 0.2,
            ortho_slack: 0.1,
            cosine_bound: 49.0 / 50.0,
            quantile_level: 1.0 / 3.0,
        }
    }
}

impl SelectionConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cap_radius", self.cap_radius),
            ("ortho_slack", self.ortho_slack),
            ("cosine_bound", self.cosine_bound),
            ("quantile_level", self.quantile_level),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::validation(name, format!("{v} is not in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Uniform point of `S^{n-1}`: a normalized vector of independent standard
/// normals.
pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<UnitVector> {
    if n == 0 {
        return Err(Error::InvalidDimension("sphere in dimension 0".into()));
    }
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = linalg::normalized(&g) {
            return Ok(UnitVector(u));
        }
    }
}

/// Uniform `k`-dimensional subspace of `R^n`: the span of `k` independent
/// Gaussian vectors, orthonormalized by Gram–Schmidt with
/// re-orthogonalization. Numerically rank-deficient draws are redrawn.
pub fn sample_grassmannian<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Result<Subspace> {
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!(
            "Grassmannian G({n}, {k}) requires 1 ≤ k ≤ n"
        )));
    }
    'draw: loop {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
        for _ in 0..k {
            let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let len = norm(&g);
            let r = linalg::orthogonalize(&basis, &g);
            let rl = norm(&r);
            if !(rl > 1e-10 * len) {
                continue 'draw;
            }
            basis.push(r.iter().map(|x| x / rl).collect());
        }
        return Ok(Subspace { ambient: n, basis });
    }
}

/// Orthogonal projection `Σ_j ⟨v, u_j⟩ u_j` onto `subspace`.
pub fn project(subspace: &Subspace, v: &[f64]) -> Result<Vec<f64>> {
    let coords = subspace.coordinates(v)?;
    let mut out = vec![0.0; v.len()];
    for (c, u) in coords.iter().zip(&subspace.basis) {
        for (o, ui) in out.iter_mut().zip(u) {
            *o += c * ui;
        }
    }
    Ok(out)
}

/// Gram–Schmidt smallness test for `(v_1, …, v_k)`: for every `i`,
/// `|Proj_{E_{i-1}} v_i| < |v_i| / k²` with `E_{i-1} = span(v_1, …, v_{i-1})`.
/// Passing implies membership in the almost-orthogonal class `O_k`.
/// The test depends on the order of the vectors.
pub fn is_almost_orthogonal_system(vectors: &[Vec<f64>]) -> Result<bool> {
    let k = vectors.len();
    if k == 0 {
        return Ok(true);
    }
    let n = vectors[0].len();
    if k > n {
        return Err(Error::InvalidInput(format!(
            "{k} vectors in dimension {n}; the test needs k ≤ n"
        )));
    }
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        if norm(v) == 0.0 {
            return Err(Error::InvalidInput("zero vector in system".into()));
        }
    }
    let bound = 1.0 / (k * k) as f64;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for v in vectors {
        let len = norm(v);
        let residual = linalg::orthogonalize(&basis, v);
        // |Proj v|² = |v|² − |v − Proj v|²
        let rl = norm(&residual);
        let proj = (len * len - rl * rl).max(0.0).sqrt();
        if proj >= len * bound {
            return Ok(false);
        }
        if rl > 0.0 {
            basis.push(residual.iter().map(|x| x / rl).collect());
        }
    }
    Ok(true)
}

/// `θ₁ − θ₂ + θ₃` before normalization.
pub fn raw_combination(t1: &UnitVector, t2: &UnitVector, t3: &UnitVector) -> Result<Vec<f64>> {
    let n = t1.dim();
    for t in [t2, t3] {
        if t.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.dim(),
            });
        }
    }
    Ok((0..n).map(|i| t1.0[i] - t2.0[i] + t3.0[i]).collect())
}

/// Combined direction `(θ₁ − θ₂ + θ₃) / |θ₁ − θ₂ + θ₃|`.
pub fn combine_direction(t1: &UnitVector, t2: &UnitVector, t3: &UnitVector) -> Result<UnitVector> {
    let raw = raw_combination(t1, t2, t3)?;
    let r = norm(&raw);
    if r <= 1e-12 {
        return Err(Error::DegenerateCombination);
    }
    Ok(UnitVector(raw.iter().map(|x| x / r).collect()))
}

/// Whether `x / |x|` lies in the closed cap of radius `rho` around `eta`.
pub fn cap_contains(eta: &UnitVector, x: &[f64], rho: f64) -> Result<bool> {
    if x.len() != eta.dim() {
        return Err(Error::DimensionMismatch {
            expected: eta.dim(),
            got: x.len(),
        });
    }
    let u = linalg::normalized(x).ok_or_else(|| Error::InvalidInput("cap membership of the zero vector".into()))?;
    Ok(linalg::distance(&u, eta.as_slice()) <= rho)
}

/// Random `(θ₁, θ₂, θ₃)` with every pairwise `|⟨θ_i, θ_j⟩| ≤ slack`. The
/// prescribed inner products are uniform on `[−slack, slack]`, so the
/// boundary of the admissible set is hit as often as its interior.
pub fn sample_admissible_triple<R: Rng + ?Sized>(rng: &mut R, n: usize, slack: f64) -> Result<[UnitVector; 3]> {
    if n < 3 {
        return Err(Error::DimensionTooSmall(format!(
            "admissible triples need n ≥ 3, got {n}"
        )));
    }
    if !(slack > 0.0 && slack < 0.5) {
        return Err(Error::validation("slack", format!("{slack} is not in (0, 1/2)")));
    }
    let frame = sample_grassmannian(rng, n, 3)?;
    let [f1, f2, f3] = [0, 1, 2].map(|i| frame.basis()[i].clone());
    let c = rng.random_range(-slack..=slack);
    let s = (1.0 - c * c).sqrt();
    let a = rng.random_range(-slack..=slack);
    let b = rng.random_range(-slack..=slack);
    let g = (b - c * a) / s;
    let r = (1.0 - a * a - g * g).sqrt();
    let t2: Vec<f64> = (0..n).map(|i| c * f1[i] + s * f2[i]).collect();
    let t3: Vec<f64> = (0..n).map(|i| a * f1[i] + g * f2[i] + r * f3[i]).collect();
    Ok([
        UnitVector::normalize(&f1)?,
        UnitVector::normalize(&t2)?,
        UnitVector::normalize(&t3)?,
    ])
}

/// Unit vector at distance exactly `dist` from `center`, in a random
/// direction.
pub fn sample_at_distance<R: Rng + ?Sized>(rng: &mut R, center: &UnitVector, dist: f64) -> Result<UnitVector> {
    if !(0.0..=2.0).contains(&dist) {
        return Err(Error::validation("dist", format!("{dist} is not in [0, 2]")));
    }
    let n = center.dim();
    if n == 1 {
        return Ok(if dist < 1.0 { center.clone() } else { center.neg() });
    }
    let basis = vec![center.0.clone()];
    let u = loop {
        let g = sample_sphere(rng, n)?;
        if let Some(u) = linalg::normalized(&linalg::orthogonalize(&basis, g.as_slice())) {
            break u;
        }
    };
    let phi = 2.0 * (dist / 2.0).asin();
    let (sn, cs) = phi.sin_cos();
    UnitVector::normalize(&(0..n).map(|i| cs * center.0[i] + sn * u[i]).collect::<Vec<_>>())
}
