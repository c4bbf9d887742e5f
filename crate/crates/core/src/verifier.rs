//! Certification of the Super-Gaussian property of `Y = ⟨X, θ⟩`.
//!
//! `Y` is Super-Gaussian of length `L` with parameters `α, β` if, with `M`
//! a median of `|Y|`,
//!
//! ```text
//! min { P(Y ≥ tM), P(Y ≤ −tM) } ≥ α·exp(−t²/β)   for all 0 ≤ t ≤ L.
//! ```
//!
//! Tails are counted with strict inequalities on a grid of `t` and the
//! certificate compares Wilson 95% lower confidence bounds against the
//! envelope.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Dataset;
use crate::error::{Error, Result};
use crate::geometry::UnitVector;
use crate::linalg::{dot, norm};
use crate::rng::stream;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BETA: f64 = 3.0;
pub const DEFAULT_GRID_STEP: f64 = 0.25;
/// Default length is `DEFAULT_LENGTH_FACTOR · √n`.
pub const DEFAULT_LENGTH_FACTOR: f64 = 0.3;
/// Cap on fitted `β` (flat or rising curves).
pub const BETA_MAX: f64 = 1e6;
/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;
/// Above this many samples the pairwise check draws random pairs.
pub const EXACT_PAIR_LIMIT: usize = 10_000;
pub const RANDOM_PAIRS: usize = 1_000_000;
const PAIR_SEED: u64 = 0x5eed_cafe;

/// Weighted lower median of `|⟨x_i, θ⟩|`.
pub fn median_abs(data: &Dataset, theta: &UnitVector) -> Result<f64> {
    check_dim(data, theta)?;
    let mut ys: Vec<(f64, f64)> = data
        .rows()
        .enumerate()
        .map(|(i, x)| (dot(x, theta.as_slice()).abs(), data.weight(i)))
        .collect();
    if ys.iter().all(|p| p.0 == 0.0) {
        return Err(Error::DegenerateDirection);
    }
    ys.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = 0.0;
    for &(y, w) in &ys {
        cum += w;
        if cum >= 0.5 - 1e-12 {
            return Ok(y);
        }
    }
    Ok(ys[ys.len() - 1].0)
}

fn check_dim(data: &Dataset, theta: &UnitVector) -> Result<()> {
    if theta.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: theta.dim(),
        });
    }
    Ok(())
}

/// Wilson score lower bound for a proportion `p` observed on `n` trials.
pub fn wilson_lower(p: f64, n: f64, z: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return 0.0;
    }
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - spread) / (1.0 + z2 / n)).max(0.0)
}

/// Empirical two-sided tails of `Y` in units of `M_med`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub t_grid: Vec<f64>,
    /// `P̂(Y < −t·M_med)`.
    pub lower: Vec<f64>,
    /// `P̂(Y > t·M_med)`.
    pub upper: Vec<f64>,
    /// Wilson lower bounds for `min(lower, upper)`.
    pub ci_lower_bounds: Vec<f64>,
    pub m_med: f64,
    pub sample_count: usize,
}

impl TailCurve {
    pub fn min_tail(&self, i: usize) -> f64 {
        self.lower[i].min(self.upper[i])
    }

    /// Two columns `t min_tail`, one grid point per line.
    pub fn plot_data(&self) -> String {
        let mut s = String::new();
        for i in 0..self.t_grid.len() {
            s.push_str(&format!("{} {:.17e}\n", self.t_grid[i], self.min_tail(i)));
        }
        s
    }
}

/// `0, step, 2·step, …` up to `length`.
pub fn default_grid(length: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(length >= 0.0) || !length.is_finite() {
        return Err(Error::validation("grid_step", format!("step {step}, length {length}")));
    }
    let count = (length / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| i as f64 * step).collect())
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::validation("t_grid", "must start at 0"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("t_grid", "must be finite and increasing"));
    }
    Ok(())
}

pub fn tail_curve(data: &Dataset, theta: &UnitVector, m_med: f64, t_grid: &[f64]) -> Result<TailCurve> {
    check_dim(data, theta)?;
    if !(m_med > 0.0 && m_med.is_finite()) {
        return Err(Error::validation("M_med", format!("{m_med} is not positive")));
    }
    check_grid(t_grid)?;
    let mut ys: Vec<(f64, f64)> = data
        .as_flat()
        .par_chunks(data.dim())
        .zip(data.weights().par_iter())
        .map(|(x, &w)| (dot(x, theta.as_slice()), w))
        .collect();
    ys.sort_by(|a, b| a.0.total_cmp(&b.0));
    let len = ys.len();
    // below[i]: weight of the i smallest values; above[i]: weight of ys[i..].
    let mut below = vec![0.0; len + 1];
    for i in 0..len {
        below[i + 1] = below[i] + ys[i].1;
    }
    let mut above = vec![0.0; len + 1];
    for i in (0..len).rev() {
        above[i] = above[i + 1] + ys[i].1;
    }
    let n_eff = data.effective_count();
    let mut lower = Vec::with_capacity(t_grid.len());
    let mut upper = Vec::with_capacity(t_grid.len());
    let mut ci = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let cut = t * m_med;
        let lo = below[ys.partition_point(|p| p.0 < -cut)];
        let up = above[ys.partition_point(|p| p.0 <= cut)];
        lower.push(lo);
        upper.push(up);
        ci.push(wilson_lower(lo.min(up), n_eff, WILSON_Z));
    }
    Ok(TailCurve {
        t_grid: t_grid.to_vec(),
        lower,
        upper,
        ci_lower_bounds: ci,
        m_med,
        sample_count: data.len(),
    })
}

/// Outcome of comparing a tail curve with `α·exp(−t²/β)` on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperGaussianCertificate {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "M_med")]
    pub m_med: f64,
    pub pass: bool,
    /// Smallest grid `t ≤ L` where the bound fails.
    pub failing_t: Option<f64>,
}

fn within_length(t: f64, length: f64) -> bool {
    t <= length * (1.0 + 1e-12)
}

pub fn certify(curve: &TailCurve, alpha: f64, beta: f64, length: f64) -> Result<SuperGaussianCertificate> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("L", length)] {
        if !(v > 0.0) {
            return Err(Error::validation(name, format!("{v} is not positive")));
        }
    }
    let failing_t = curve
        .t_grid
        .iter()
        .zip(&curve.ci_lower_bounds)
        .filter(|(t, _)| within_length(**t, length))
        .find(|(t, lb)| **lb < alpha * (-(*t * *t) / beta).exp())
        .map(|(t, _)| *t);
    Ok(SuperGaussianCertificate {
        alpha,
        beta,
        length,
        m_med: curve.m_med,
        pass: failing_t.is_none(),
        failing_t,
    })
}

/// `(α, β)` for which [`certify`] passes on `curve` up to `length`: `β` from
/// the least-squares slope of `ln ci_lb` against `t²`, `α` the largest value
/// that keeps every grid point above the envelope.
pub fn fit_parameters(curve: &TailCurve, length: f64) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve
        .t_grid
        .iter()
        .zip(&curve.ci_lower_bounds)
        .filter(|(t, _)| within_length(**t, length))
        .map(|(t, lb)| (*t, *lb))
        .collect();
    let positive = pts.iter().filter(|p| p.1 > 0.0).count();
    if positive < 3 || positive < pts.len() {
        // A zero bound below L cannot sit above any positive envelope.
        return Err(Error::InsufficientTail(positive));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0 * p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let beta = if slope < 0.0 {
        (-1.0 / slope).min(BETA_MAX)
    } else {
        BETA_MAX
    };
    let alpha = pts
        .iter()
        .map(|(t, lb)| lb / (-(t * t) / beta).exp())
        .fold(f64::INFINITY, f64::min)
        * (1.0 - 1e-12);
    Ok((alpha, beta))
}

/// Whether `median_abs(data, θ) ≤ 6·m/√n`. Meaningful when the data
/// satisfies `E⟨X/|X|, v⟩² ≤ 5/n` for all unit `v`.
pub fn median_bound_check(data: &Dataset, theta: &UnitVector, m: f64) -> Result<bool> {
    Ok(median_abs(data, theta)? <= 6.0 * m / (data.dim() as f64).sqrt())
}

/// For `N` i.i.d. Bernoulli(`p`) variables and `ε = (1−p)^k`, checks
/// `P(ΣZ ≥ N/(3k)) ≥ 1 − 2ε` by exact binomial summation.
pub fn lemma_elem_exact_check(count: usize, k: usize, p: f64) -> Result<bool> {
    if !(1 <= k && k <= count && count <= 25) {
        return Err(Error::validation(
            "k",
            format!("need 1 ≤ k ≤ N ≤ 25, got k={k}, N={count}"),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation("p", format!("{p} is not in [0, 1]")));
    }
    let eps = (1.0 - p).powi(k as i32);
    let j_min = count.div_ceil(3 * k);
    let mut prob = 0.0;
    let mut binom = 1.0f64;
    for j in 0..=count {
        if j > 0 {
            binom = binom * (count - j + 1) as f64 / j as f64;
        }
        if j >= j_min {
            prob += binom * p.powi(j as i32) * (1.0 - p).powi((count - j) as i32);
        }
    }
    Ok(prob >= 1.0 - 2.0 * eps - 1e-12)
}

/// Fraction of pairs `i < j` with `⟨x_i/|x_i|, x_j/|x_j|⟩ ≤ bound`; exact up
/// to [`EXACT_PAIR_LIMIT`] samples, otherwise over [`RANDOM_PAIRS`] random
/// pairs.
pub fn pairwise_cosine_check(data: &Dataset, bound: f64) -> Result<f64> {
    let count = data.len();
    if count < 2 {
        return Err(Error::InvalidInput("pairwise check needs at least 2 samples".into()));
    }
    let dirs: Vec<Vec<f64>> = data
        .rows()
        .map(|x| {
            let r = norm(x);
            x.iter().map(|v| v / r).collect()
        })
        .collect();
    if count <= EXACT_PAIR_LIMIT {
        let good: u64 = (0..count)
            .into_par_iter()
            .map(|i| (i + 1..count).filter(|&j| dot(&dirs[i], &dirs[j]) <= bound).count() as u64)
            .sum();
        let total = (count * (count - 1) / 2) as f64;
        Ok(good as f64 / total)
    } else {
        let mut rng = stream(PAIR_SEED, 0);
        let mut good = 0u64;
        for _ in 0..RANDOM_PAIRS {
            let i = rng.random_range(0..count);
            let mut j = rng.random_range(0..count - 1);
            if j >= i {
                j += 1;
            }
            if dot(&dirs[i], &dirs[j]) <= bound {
                good += 1;
            }
        }
        Ok(good as f64 / RANDOM_PAIRS as f64)
    }
}

/// Certification parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub alpha: f64,
    pub beta: f64,
    /// `None` selects `0.3·√n`.
    pub length: Option<f64>,
    pub grid_step: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            length: None,
            grid_step: DEFAULT_GRID_STEP,
        }
    }
}

impl CertifyConfig {
    pub fn length_for(&self, n: usize) -> f64 {
        self.length.unwrap_or(DEFAULT_LENGTH_FACTOR * (n as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("grid_step", self.grid_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("{v} is not positive")));
            }
        }
        if let Some(l) = self.length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::validation("L", format!("{l} is not positive")));
            }
        }
        Ok(())
    }
}

/// One grid row of a serialized certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub t: f64,
    pub upper: f64,
    pub lower: f64,
    pub ci_lb: f64,
}

/// Certificate together with the curve it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    #[serde(flatten)]
    pub certificate: SuperGaussianCertificate,
    pub grid: Vec<GridRow>,
    pub sample_count: usize,
}

impl CertificateReport {
    pub fn new(certificate: SuperGaussianCertificate, curve: &TailCurve) -> Self {
        let grid = (0..curve.t_grid.len())
            .map(|i| GridRow {
                t: curve.t_grid[i],
                upper: curve.upper[i],
                lower: curve.lower[i],
                ci_lb: curve.ci_lower_bounds[i],
            })
            .collect();
        CertificateReport {
            certificate,
            grid,
            sample_count: curve.sample_count,
        }
    }

    pub fn pass(&self) -> bool {
        self.certificate.pass
    }

    /// Two columns `t min_tail`.
    pub fn plot_data(&self) -> String {
        self.grid
            .iter()
            .map(|r| format!("{} {:.17e}\n", r.t, r.upper.min(r.lower)))
            .collect()
    }
}

/// Median, tail curve on the default grid and certificate for `⟨X, θ⟩`.
pub fn certify_direction(data: &Dataset, theta: &UnitVector, cfg: &CertifyConfig) -> Result<CertificateReport> {
    cfg.validate()?;
    let length = cfg.length_for(data.dim());
    let m_med = median_abs(data, theta)?;
    let grid = default_grid(length, cfg.grid_step)?;
    let curve = tail_curve(data, theta, m_med, &grid)?;
    let cert = certify(&curve, cfg.alpha, cfg.beta, length)?;
    Ok(CertificateReport::new(cert, &curve))
}
