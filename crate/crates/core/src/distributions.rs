//! Random-vector sources, the empirical [`Dataset`], CSV ingestion and the
//! exact one-dimensional marginal of the uniform ball.
//!
//! The marginal of a uniform ball in `R^n` along any unit direction has
//! density proportional to `(1 − t²/(A²n))_+^{(n−1)/2}`, where `A√n` is the
//! ball radius. With `s = t/(A√n)`, `s²` follows `Beta(1/2, (n+1)/2)`, so the
//! normalizing constant is `A√n · B(1/2, (n+1)/2)` and tails are regularized
//! incomplete Beta values.

use std::io::{Read, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::geometry::{sample_grassmannian, sample_sphere, Subspace};
use crate::linalg::norm;
use crate::rng::{stage_stream_id, stream};

/// Rows per sampling chunk; chunk `c` draws from `stream(seed, c)`.
pub const SAMPLE_CHUNK: usize = 1024;

/// Samples with norm below this are treated as the origin and rejected.
pub const MIN_SAMPLE_NORM: f64 = 1e-300;

const SUBSPACE_STAGE: u64 = 1;

/// Empirical law of a random vector: `N` samples in `R^n` with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    samples: Vec<f64>,
    weights: Vec<f64>,
}

impl Dataset {
    /// Uniformly weighted dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut samples = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::validation(
                    "samples",
                    format!("row {i} has {} entries, expected {dim}", r.len()),
                ));
            }
            samples.extend_from_slice(r);
        }
        Self::from_flat(dim, samples)
    }

    /// Uniformly weighted dataset from a row-major buffer.
    pub fn from_flat(dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 || samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(Error::validation(
                "samples",
                format!(
                    "{} values cannot form rows of length {dim} (N ≥ 1 required)",
                    samples.len()
                ),
            ));
        }
        let count = samples.len() / dim;
        let w = 1.0 / count as f64;
        let data = Dataset {
            dim,
            samples,
            weights: vec![w; count],
        };
        data.check_rows()?;
        Ok(data)
    }

    /// Weighted dataset; weights must be nonnegative and sum to 1 within 1e−12.
    pub fn weighted(dim: usize, samples: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || samples.is_empty() || samples.len() != weights.len() * dim {
            return Err(Error::validation(
                "weights",
                format!(
                    "{} weights do not match {} values of dimension {dim}",
                    weights.len(),
                    samples.len()
                ),
            ));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::validation(
                "weights",
                format!("weight {i} is negative or not finite"),
            ));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(
                "weights",
                format!("weights sum to {total}, expected 1"),
            ));
        }
        let data = Dataset { dim, samples, weights };
        data.check_rows()?;
        Ok(data)
    }

    fn check_rows(&self) -> Result<()> {
        for (i, r) in self.rows().enumerate() {
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation("samples", format!("row {i} is not finite")));
            }
            if norm(r) < MIN_SAMPLE_NORM {
                return Err(Error::validation("samples", format!("row {i} is the zero vector")));
            }
        }
        Ok(())
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major sample buffer.
    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }

    /// Kish effective sample size `1 / Σ w_i²` (equals `N` for uniform weights).
    pub fn effective_count(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Applies `f` to every row, keeping the weights. `f` may change the dimension.
    pub fn map_rows<F>(&self, out_dim: usize, f: F) -> Result<Dataset>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let mut samples = vec![0.0; self.len() * out_dim];
        samples
            .par_chunks_mut(out_dim * SAMPLE_CHUNK)
            .zip(self.samples.par_chunks(self.dim * SAMPLE_CHUNK))
            .for_each(|(out, inp)| {
                for (o, x) in out.chunks_exact_mut(out_dim).zip(inp.chunks_exact(self.dim)) {
                    f(x, o);
                }
            });
        let data = Dataset {
            dim: out_dim,
            samples,
            weights: self.weights.clone(),
        };
        data.check_rows()?;
        Ok(data)
    }

    /// `c · X` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Dataset> {
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("scale {c} must be positive")));
        }
        self.map_rows(self.dim, |x, o| {
            for (oi, xi) in o.iter_mut().zip(x) {
                *oi = c * xi;
            }
        })
    }
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A synthetic family of random vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Uniform in the centered ball of the given radius.
    UniformBall { n: usize, radius: f64 },
    /// Centered Gaussian with diagonal covariance `diag(variances)`.
    Gaussian { n: usize, variances: Vec<f64> },
    /// Finitely many atoms with the given probabilities.
    FiniteAtoms {
        atoms: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
    },
    /// Mixture of standard Gaussians supported on random subspaces of the
    /// given dimensions. The subspaces are drawn once from the seed.
    SubspaceMixture {
        n: usize,
        dims: Vec<usize>,
        weights: Vec<f64>,
    },
    /// Independent standard Cauchy coordinates.
    ProductHeavyTail { n: usize },
}

impl SourceSpec {
    pub fn uniform_ball(n: usize, radius: f64) -> Self {
        SourceSpec::UniformBall { n, radius }
    }

    pub fn gaussian(variances: Vec<f64>) -> Self {
        SourceSpec::Gaussian {
            n: variances.len(),
            variances,
        }
    }

    pub fn finite_atoms(atoms: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Self {
        SourceSpec::FiniteAtoms { atoms, probabilities }
    }

    pub fn family(&self) -> &'static str {
        match self {
            SourceSpec::UniformBall { .. } => "uniform_ball",
            SourceSpec::Gaussian { .. } => "gaussian",
            SourceSpec::FiniteAtoms { .. } => "finite_atoms",
            SourceSpec::SubspaceMixture { .. } => "subspace_mixture",
            SourceSpec::ProductHeavyTail { .. } => "product_heavy_tail",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SourceSpec::UniformBall { n, .. }
            | SourceSpec::Gaussian { n, .. }
            | SourceSpec::SubspaceMixture { n, .. }
            | SourceSpec::ProductHeavyTail { n } => *n,
            SourceSpec::FiniteAtoms { atoms, .. } => atoms.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::validation("n", "dimension must be at least 1"));
        }
        match self {
            SourceSpec::UniformBall { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::validation("radius", format!("{radius} must be positive")));
                }
            }
            SourceSpec::Gaussian { variances, .. } => {
                if variances.len() != n {
                    return Err(Error::validation(
                        "variances",
                        format!("{} variances for dimension {n}", variances.len()),
                    ));
                }
                if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::validation("variances", "variances must be positive"));
                }
            }
            SourceSpec::FiniteAtoms { atoms, probabilities } => {
                if atoms.len() != probabilities.len() {
                    return Err(Error::validation(
                        "probabilities",
                        format!("{} probabilities for {} atoms", probabilities.len(), atoms.len()),
                    ));
                }
                if atoms.iter().any(|a| a.len() != n) {
                    return Err(Error::validation("atoms", "atoms have different lengths"));
                }
                if atoms.iter().any(|a| norm(a) < MIN_SAMPLE_NORM) {
                    return Err(Error::validation("atoms", "an atom sits at the origin"));
                }
                check_probabilities("probabilities", probabilities)?;
            }
            SourceSpec::SubspaceMixture { dims, weights, .. } => {
                if dims.is_empty() || dims.len() != weights.len() {
                    return Err(Error::validation(
                        "weights",
                        format!("{} weights for {} components", weights.len(), dims.len()),
                    ));
                }
                if dims.iter().any(|&k| k == 0 || k > n) {
                    return Err(Error::validation(
                        "dims",
                        format!("component dimensions must lie in 1..={n}"),
                    ));
                }
                check_probabilities("weights", weights)?;
            }
            SourceSpec::ProductHeavyTail { .. } => {}
        }
        Ok(())
    }
}

fn check_probabilities(field: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::validation(field, "probabilities must be positive"));
    }
    let total = compensated_sum(p.iter().copied());
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::validation(
            field,
            format!("probabilities sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

enum Sampler {
    Ball {
        n: usize,
        radius: f64,
    },
    Gaussian {
        sd: Vec<f64>,
    },
    Atoms {
        atoms: Vec<Vec<f64>>,
        index: WeightedIndex<f64>,
    },
    Mixture {
        parts: Vec<Subspace>,
        index: WeightedIndex<f64>,
    },
    Cauchy {
        n: usize,
    },
}

impl Sampler {
    fn draw<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Ball { n, radius } => {
                let dir = sample_sphere(rng, *n).expect("n ≥ 1");
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / *n as f64);
                for (o, d) in out.iter_mut().zip(dir.as_slice()) {
                    *o = r * d;
                }
            }
            Sampler::Gaussian { sd } => {
                for (o, s) in out.iter_mut().zip(sd) {
                    *o = s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Sampler::Atoms { atoms, index } => {
                out.copy_from_slice(&atoms[index.sample(rng)]);
            }
            Sampler::Mixture { parts, index } => {
                let part = &parts[index.sample(rng)];
                out.iter_mut().for_each(|o| *o = 0.0);
                for u in part.basis() {
                    let g: f64 = rng.sample(StandardNormal);
                    for (o, ui) in out.iter_mut().zip(u) {
                        *o += g * ui;
                    }
                }
            }
            Sampler::Cauchy { n } => {
                let c = Cauchy::new(0.0, 1.0).expect("valid scale");
                for o in out.iter_mut().take(*n) {
                    *o = c.sample(rng);
                }
            }
        }
    }
}

/// Draws `count` i.i.d. samples from `spec`. The output depends only on
/// `(spec, seed, count)`, not on the number of worker threads.
pub fn sample(spec: &SourceSpec, seed: u64, count: usize) -> Result<Dataset> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::validation("count", "at least one sample is required"));
    }
    let n = spec.dim();
    let sampler = match spec {
        SourceSpec::UniformBall { n, radius } => Sampler::Ball { n: *n, radius: *radius },
        SourceSpec::Gaussian { variances, .. } => Sampler::Gaussian {
            sd: variances.iter().map(|v| v.sqrt()).collect(),
        },
        SourceSpec::FiniteAtoms { atoms, probabilities } => Sampler::Atoms {
            atoms: atoms.clone(),
            index: WeightedIndex::new(probabilities).map_err(|e| Error::validation("probabilities", e.to_string()))?,
        },
        SourceSpec::SubspaceMixture { n, dims, weights } => {
            let mut rng = stream(seed, stage_stream_id(SUBSPACE_STAGE));
            let parts = dims
                .iter()
                .map(|&k| sample_grassmannian(&mut rng, *n, k))
                .collect::<Result<Vec<_>>>()?;
            Sampler::Mixture {
                parts,
                index: WeightedIndex::new(weights).map_err(|e| Error::validation("weights", e.to_string()))?,
            }
        }
        SourceSpec::ProductHeavyTail { n } => Sampler::Cauchy { n: *n },
    };

    let mut samples = vec![0.0; count * n];
    samples
        .par_chunks_mut(n * SAMPLE_CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut rng = stream(seed, c as u64);
            for row in chunk.chunks_exact_mut(n) {
                // The origin has probability zero; redraw on the off chance.
                loop {
                    sampler.draw(&mut rng, row);
                    if norm(row) >= MIN_SAMPLE_NORM && row.iter().all(|x| x.is_finite()) {
                        break;
                    }
                }
            }
        });
    Dataset::from_flat(n, samples)
}

/// Law of `⟨X, θ⟩` for `X` uniform in a centered ball and a fixed `θ`:
/// density proportional to `(1 − t²/(A²n))_+^{(n−1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMarginal {
    pub n: usize,
    /// The scale `A`; the support is `[−A√n, A√n]`.
    pub scale: f64,
}

impl BallMarginal {
    pub fn new(n: usize, scale: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("ball marginal in dimension 0".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::validation("scale", format!("{scale} must be positive")));
        }
        Ok(BallMarginal { n, scale })
    }

    /// Marginal of the ball of `radius` in `R^n` along a unit direction.
    pub fn for_ball(n: usize, radius: f64) -> Result<Self> {
        Self::new(n, radius / (n as f64).sqrt())
    }

    /// `A√n`.
    pub fn half_width(&self) -> f64 {
        self.scale * (self.n as f64).sqrt()
    }

    /// `ln Z` with `Z = A√n · B(1/2, (n+1)/2)`.
    pub fn ln_normalizer(&self) -> f64 {
        self.half_width().ln() + ln_beta(0.5, (self.n as f64 + 1.0) / 2.0)
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let s = t / self.half_width();
        if s.abs() > 1.0 || s.is_nan() {
            return 0.0;
        }
        let exponent = (self.n as f64 - 1.0) / 2.0;
        if exponent == 0.0 {
            return (-self.ln_normalizer()).exp();
        }
        let base = 1.0 - s * s;
        if base <= 0.0 {
            return 0.0;
        }
        (exponent * base.ln() - self.ln_normalizer()).exp()
    }

    /// `P(Y ≥ t)`. Symmetric, so `P(Y ≤ −t)` is the same value.
    pub fn tail(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0 - self.tail(-t);
        }
        let s = t / self.half_width();
        if s >= 1.0 {
            return 0.0;
        }
        // P(Y ≥ t) = ½·P(S² ≥ s²) = ½·I_{1−s²}((n+1)/2, 1/2)
        0.5 * beta_reg((self.n as f64 + 1.0) / 2.0, 0.5, 1.0 - s * s)
    }

    /// The median of `|Y|`: the unique `m` with `tail(m) = 1/4`.
    pub fn median_abs(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, self.half_width());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.tail(mid) > 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Reads a headerless numeric CSV, one sample per row, uniform weights.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut dim = None;
    let mut samples = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = record.position().map_or(rows as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected {d} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                reason: format!("`{field}` is not a number"),
            })?;
            samples.push(v);
        }
        rows += 1;
    }
    let dim = dim.ok_or(Error::Parse {
        line: 0,
        reason: "no rows".into(),
    })?;
    // Report a zero row with its line number rather than as a field error.
    for (i, r) in samples.chunks_exact(dim).enumerate() {
        if norm(r) < MIN_SAMPLE_NORM {
            return Err(Error::Parse {
                line: i as u64 + 1,
                reason: "zero sample".into(),
            });
        }
    }
    Dataset::from_flat(dim, samples)
}

/// Writes one sample per row with 17 significant digits.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for row in data.rows() {
        wtr.write_record(row.iter().map(|x| format!("{x:.16e}")))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(data, std::io::BufWriter::new(std::fs::File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule on `[a, b]` with `m` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    /// Integral of the density over its support, using the substitution
    /// `t = A√n · sin φ` which removes the endpoint singularity of the
    /// `n = 2` case and keeps the integrand smooth.
    fn total_mass(m: &BallMarginal) -> f64 {
        let w = m.half_width();
        simpson(
            |phi| m.pdf(w * phi.sin()) * w * phi.cos(),
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            20_000,
        )
    }

    #[test]
    fn pdf_integrates_to_one() {
        for n in [1usize, 2, 3, 10, 50, 500] {
            let m = BallMarginal::new(n, 1.3).unwrap();
            let z = total_mass(&m);
            assert!((z - 1.0).abs() < 1e-9, "n = {n}: mass {z}");
        }
    }

    #[test]
    fn pdf_examples() {
        let m = BallMarginal::new(4, 1.0).unwrap();
        assert_eq!(m.pdf(2.0001), 0.0);
        let u = BallMarginal::new(1, 2.0).unwrap();
        assert!((u.pdf(0.3) - 0.25).abs() < 1e-15);
        assert!((u.pdf(-1.9) - 0.25).abs() < 1e-15);
        assert_eq!(u.pdf(2.5), 0.0);
        // n = 3, A = 1: Z = ∫(1 − t²/3) dt over [−√3, √3] = 4√3/3.
        let m3 = BallMarginal::new(3, 1.0).unwrap();
        let z_hand = 4.0 * 3f64.sqrt() / 3.0;
        let z_quad = simpson(|t| (1.0 - t * t / 3.0).max(0.0), -3f64.sqrt(), 3f64.sqrt(), 2000);
        assert!((z_hand - z_quad).abs() < 1e-12);
        assert!((m3.pdf(0.0) - 1.0 / z_hand).abs() < 1e-14);
    }

    #[test]
    fn tail_examples_and_monotonicity() {
        let m = BallMarginal::new(50, 1.0).unwrap();
        assert!((m.tail(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(m.tail(m.half_width()), 0.0);
        assert_eq!(m.tail(m.half_width() * 1.5), 0.0);
        let med = m.median_abs();
        assert!((m.tail(med) - 0.25).abs() < 1e-12);
        let mut prev = 0.5;
        for i in 1..=200 {
            let t = i as f64 * m.half_width() / 200.0;
            let v = m.tail(t);
            assert!(v <= prev + 1e-16);
            prev = v;
        }
    }

    #[test]
    fn tail_matches_quadrature() {
        for n in [2usize, 3, 10, 50] {
            let m = BallMarginal::new(n, 0.7).unwrap();
            let w = m.half_width();
            for frac in [0.05, 0.2, 0.5, 0.8] {
                let t = frac * w;
                let phi0 = (t / w).asin();
                let q = simpson(
                    |phi| m.pdf(w * phi.sin()) * w * phi.cos(),
                    phi0,
                    std::f64::consts::FRAC_PI_2,
                    20_000,
                );
                assert!((q - m.tail(t)).abs() < 1e-10, "n={n} t={t}: {q} vs {}", m.tail(t));
            }
        }
    }

    #[test]
    fn ln_normalizer_is_finite_in_high_dimension() {
        let m = BallMarginal::new(5000, 1.0).unwrap();
        assert!(m.ln_normalizer().is_finite());
        assert!(m.pdf(0.0).is_finite() && m.pdf(0.0) > 0.0);
    }

    #[test]
    fn finite_atoms_single_atom() {
        let spec = SourceSpec::finite_atoms(vec![vec![1.0, 0.0]], vec![1.0]);
        let d = sample(&spec, 3, 4).unwrap();
        assert_eq!(d.len(), 4);
        for r in d.rows() {
            assert_eq!(r, &[1.0, 0.0]);
        }
    }

    #[test]
    fn uniform_ball_area_ratio() {
        let spec = SourceSpec::uniform_ball(2, 1.0);
        let count = 100_000;
        let d = sample(&spec, 42, count).unwrap();
        let inside = d.rows().filter(|r| norm(r) <= 0.5).count() as f64 / count as f64;
        let sigma = (0.25f64 * 0.75 / count as f64).sqrt();
        assert!((inside - 0.25).abs() < 3.0 * sigma, "{inside}");
    }

    #[test]
    fn cauchy_first_moment_does_not_settle() {
        // Documented behavior: the running mean of |X₁| keeps growing with
        // occasional huge jumps. Only sanity-check the draws here.
        let spec = SourceSpec::ProductHeavyTail { n: 5 };
        let d = sample(&spec, 1, 10_000).unwrap();
        let max = d.rows().map(|r| r[0].abs()).fold(0.0, f64::max);
        assert!(max > 100.0);
    }

    #[test]
    fn validation_names_the_field() {
        let bad = SourceSpec::finite_atoms(vec![vec![0.0, 0.0]], vec![1.0]);
        match sample(&bad, 0, 1) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "atoms"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = SourceSpec::finite_atoms(vec![vec![1.0], vec![2.0]], vec![0.5, 0.6]);
        assert!(matches!(sample(&bad, 0, 1), Err(Error::Validation { field, .. }) if field == "probabilities"));
        let bad = SourceSpec::SubspaceMixture {
            n: 3,
            dims: vec![0],
            weights: vec![1.0],
        };
        assert!(matches!(sample(&bad, 0, 1), Err(Error::Validation { field, .. }) if field == "dims"));
        let bad = SourceSpec::uniform_ball(3, -1.0);
        assert!(matches!(sample(&bad, 0, 1), Err(Error::Validation { field, .. }) if field == "radius"));
    }

    #[test]
    fn subspace_mixture_lives_on_its_components() {
        let spec = SourceSpec::SubspaceMixture {
            n: 5,
            dims: vec![1, 2],
            weights: vec![0.5, 0.5],
        };
        let d = sample(&spec, 8, 2000).unwrap();
        let mut rng = stream(8, stage_stream_id(SUBSPACE_STAGE));
        let parts: Vec<Subspace> = [1, 2]
            .iter()
            .map(|&k| sample_grassmannian(&mut rng, 5, k).unwrap())
            .collect();
        for r in d.rows() {
            let inside = parts.iter().any(|p| p.residual_norm(r).unwrap() <= 1e-9 * norm(r));
            assert!(inside);
        }
    }

    #[test]
    fn sampling_is_independent_of_thread_count() {
        let spec = SourceSpec::gaussian(vec![4.0, 1.0, 0.25]);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample(&spec, 77, 5000).unwrap());
        let b = four.install(|| sample(&spec, 77, 5000).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let d = sample(&SourceSpec::gaussian(vec![1.0, 2.0, 3.0]), 5, 50).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);

        let small = read_csv("1,0\n0,1\n".as_bytes()).unwrap();
        assert_eq!(small.len(), 2);
        assert_eq!(small.row(0), &[1.0, 0.0]);
        assert_eq!(small.row(1), &[0.0, 1.0]);
        assert_eq!(small.weights(), &[0.5, 0.5]);

        match read_csv("1,2\n3,4\n5\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match read_csv("1,2\nx,4\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_csv("".as_bytes()), Err(Error::Parse { .. })));
        match read_csv("1,2\n0,0\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weighted_dataset_validation() {
        assert!(Dataset::weighted(1, vec![1.0, 2.0], vec![0.5, 0.5]).is_ok());
        assert!(Dataset::weighted(1, vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(Dataset::weighted(1, vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(Dataset::from_rows(&[vec![0.0, 0.0]]).is_err());
        assert!(Dataset::from_rows(&[]).is_err());
    }
}
