//! Selection of the direction `θ = (θ₁ − θ₂ + θ₃) / |θ₁ − θ₂ + θ₃|`.
//!
//! `M` is the 1/3-quantile of `|X|`. `θ₁` maximizes the mass of
//! `{|X| ≥ M, X/|X| within 1/5 of θ₁}` over a finite candidate set, `θ₂`
//! does the same among candidates with `|⟨θ₂, θ₁⟩| ≤ 1/10`, and `θ₃` is
//! uniform subject to the same constraint against both. Every heavy sample
//! in the cap around `θ₁` then has `⟨x, θ⟩ ≥ M/30`, and every heavy sample in
//! the cap around `θ₂` has `⟨x, θ⟩ ≤ −M/30`.
//!
//! Candidates are the heavy sample directions plus random probes. Cap masses
//! of all heavy directions are found with a blocked single-precision Gram
//! product that screens pairs, followed by an exact double-precision check.
//! Masses are accumulated in 2⁻⁶² fixed point so the sums do not depend on
//! evaluation order.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{cap_contains, combine_direction, sample_sphere, SelectionConstants, UnitVector};
use crate::linalg::{self, distance, dot, norm};
use crate::rng::{stage_stream_id, stream, DIRECTION_STAGE};

/// Attempts at drawing an admissible, non-degenerate `θ₃`.
pub const THETA3_ATTEMPTS: usize = 1000;
/// Largest `|⟨θ₁, θ₂⟩|` a [`DirectionSelection`] accepts.
pub const MAX_ORTHO_SLACK: f64 = 0.1;

const FIXED_SCALE: f64 = (1u64 << 62) as f64;
const BLOCK: usize = 256;

fn to_fixed(w: f64) -> u64 {
    (w * FIXED_SCALE).round() as u64
}

fn from_fixed(m: u64) -> f64 {
    m as f64 / FIXED_SCALE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub constants: SelectionConstants,
    /// Uniform random directions added to each candidate set.
    pub extra_random_candidates: usize,
    /// Resample `θ₃` until `|⟨θ₃, θ₁⟩|, |⟨θ₃, θ₂⟩| ≤ ortho_slack`.
    pub theta3_filter: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            constants: SelectionConstants::default(),
            extra_random_candidates: 256,
            theta3_filter: true,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if self.constants.ortho_slack > MAX_ORTHO_SLACK {
            return Err(Error::validation(
                "ortho_slack",
                format!("{} exceeds {MAX_ORTHO_SLACK}", self.constants.ortho_slack),
            ));
        }
        if self.constants.cap_radius >= std::f64::consts::SQRT_2 {
            return Err(Error::validation("cap_radius", "must be below √2"));
        }
        Ok(())
    }
}

/// Smallest `|x_i|` whose cumulative weight (by increasing norm) reaches
/// `1 − level`; then `P(|X| ≥ M) ≥ level` and `P(|X| ≤ M) ≥ 1 − level`.
pub fn norm_quantile(data: &Dataset, level: f64) -> f64 {
    let mut norms: Vec<(f64, f64)> = data
        .rows()
        .enumerate()
        .map(|(i, x)| (norm(x), data.weight(i)))
        .collect();
    norms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = 1.0 - level - 1e-12;
    let mut cum = 0.0;
    for &(r, w) in &norms {
        cum += w;
        if cum >= target {
            return r;
        }
    }
    norms.last().map_or(0.0, |p| p.0)
}

/// The 1/3-quantile `M` of `|X|`.
pub fn third_quantile(data: &Dataset) -> f64 {
    norm_quantile(data, 1.0 / 3.0)
}

/// Weight of the samples with `|x| ≥ m` and `x/|x|` in the closed cap of
/// radius `rho` around `eta`.
pub fn cap_probability(data: &Dataset, eta: &UnitVector, m: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < std::f64::consts::SQRT_2) {
        return Err(Error::validation("cap_radius", format!("{rho} is not in (0, √2)")));
    }
    let mut acc = 0u64;
    for (i, x) in data.rows().enumerate() {
        if norm(x) >= m && cap_contains(eta, x, rho)? {
            acc += to_fixed(data.weight(i));
        }
    }
    Ok(from_fixed(acc))
}

/// Directions of the samples with `|x| ≥ M`.
struct HeavySet {
    n: usize,
    dirs: Vec<f64>,
    dirs32: Vec<f32>,
    fixed: Vec<u64>,
}

impl HeavySet {
    fn new(data: &Dataset, m: f64) -> Result<Self> {
        let n = data.dim();
        let mut dirs = Vec::new();
        let mut fixed = Vec::new();
        for (i, x) in data.rows().enumerate() {
            if norm(x) >= m {
                let u = linalg::normalized(x)
                    .ok_or_else(|| Error::InvalidInput(format!("sample {i} cannot be normalized")))?;
                dirs.extend_from_slice(&u);
                fixed.push(to_fixed(data.weight(i)));
            }
        }
        if fixed.is_empty() {
            return Err(Error::SelectionImpossible(format!("no sample has norm at least {m}")));
        }
        let dirs32 = dirs.iter().map(|&v| v as f32).collect();
        Ok(HeavySet { n, dirs, dirs32, fixed })
    }

    fn len(&self) -> usize {
        self.fixed.len()
    }

    fn dir(&self, i: usize) -> &[f64] {
        &self.dirs[i * self.n..(i + 1) * self.n]
    }

    /// Fixed-point cap mass around every heavy direction.
    fn self_masses(&self, rho: f64) -> Vec<u64> {
        self.cap_masses(None, rho)
    }

    /// Fixed-point cap mass around each row of `queries` (unit vectors).
    fn query_masses(&self, queries: &[f64], rho: f64) -> Vec<u64> {
        let q32: Vec<f32> = queries.iter().map(|&v| v as f32).collect();
        self.cap_masses(Some((queries, &q32)), rho)
    }

    fn cap_masses(&self, queries: Option<(&[f64], &[f32])>, rho: f64) -> Vec<u64> {
        let n = self.n;
        let symmetric = queries.is_none();
        let (q64, q32) = queries.unwrap_or((&self.dirs, &self.dirs32));
        let nq = q64.len() / n;
        let k = self.len();
        let masses: Vec<AtomicU64> = (0..nq).map(|_| AtomicU64::new(0)).collect();
        // |u − η| ≤ ρ ⟺ ⟨u, η⟩ ≥ 1 − ρ²/2; the margin absorbs single-precision error.
        let margin = 1e-4 + 8.0 * n as f64 * f32::EPSILON as f64;
        let screen = (1.0 - rho * rho / 2.0 - margin) as f32;
        (0..nq.div_ceil(BLOCK)).into_par_iter().for_each(|bi| {
            let i0 = bi * BLOCK;
            let rows = BLOCK.min(nq - i0);
            let mut gram = vec![0f32; BLOCK * BLOCK];
            let mut j0 = if symmetric { i0 } else { 0 };
            while j0 < k {
                let cols = BLOCK.min(k - j0);
                // SAFETY: the operands hold rows·n and cols·n entries starting
                // at the given offsets, and `gram` holds rows·cols entries.
                unsafe {
                    matrixmultiply::sgemm(
                        rows,
                        n,
                        cols,
                        1.0,
                        q32[i0 * n..].as_ptr(),
                        n as isize,
                        1,
                        self.dirs32[j0 * n..].as_ptr(),
                        1,
                        n as isize,
                        0.0,
                        gram.as_mut_ptr(),
                        cols as isize,
                        1,
                    );
                }
                for a in 0..rows {
                    let i = i0 + a;
                    for (b, &g) in gram[a * cols..(a + 1) * cols].iter().enumerate() {
                        if g < screen {
                            continue;
                        }
                        let j = j0 + b;
                        if symmetric && j < i {
                            continue;
                        }
                        if distance(&q64[i * n..(i + 1) * n], self.dir(j)) <= rho {
                            masses[i].fetch_add(self.fixed[j], Ordering::Relaxed);
                            if symmetric && j != i {
                                masses[j].fetch_add(self.fixed[i], Ordering::Relaxed);
                            }
                        }
                    }
                }
                j0 += BLOCK;
            }
        });
        masses.into_iter().map(AtomicU64::into_inner).collect()
    }
}

/// Index of the first maximum.
fn argmax(values: impl IntoIterator<Item = u64>) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

fn random_probes<R: Rng + ?Sized>(rng: &mut R, n: usize, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n * count);
    for _ in 0..count {
        out.extend_from_slice(sample_sphere(rng, n)?.as_slice());
    }
    Ok(out)
}

/// Uniform directions projected onto `θ₁^⊥` and renormalized.
fn orthogonal_probes<R: Rng + ?Sized>(rng: &mut R, theta1: &UnitVector, count: usize) -> Result<Vec<f64>> {
    let n = theta1.dim();
    let basis = vec![theta1.as_slice().to_vec()];
    let mut out = Vec::with_capacity(n * count);
    while out.len() < n * count {
        let g = sample_sphere(rng, n)?;
        if let Some(u) = linalg::normalized(&linalg::orthogonalize(&basis, g.as_slice())) {
            out.extend_from_slice(&u);
        }
    }
    Ok(out)
}

fn row(flat: &[f64], n: usize, i: usize) -> &[f64] {
    &flat[i * n..(i + 1) * n]
}

/// Best candidate among the heavy directions and `probes`.
fn best_theta1(heavy: &HeavySet, self_mass: &[u64], probes: &[f64], rho: f64) -> Result<UnitVector> {
    let probe_mass = heavy.query_masses(probes, rho);
    let i = argmax(self_mass.iter().chain(&probe_mass).copied()).expect("heavy set is nonempty");
    let k = heavy.len();
    let v = if i < k {
        heavy.dir(i)
    } else {
        row(probes, heavy.n, i - k)
    };
    UnitVector::normalize(v)
}

/// Best candidate with `|⟨η, θ₁⟩| ≤ slack` among the heavy directions and
/// `probes`. `self_mass`, when known, gives the cap masses of all heavy
/// directions. Returns the direction and the number of candidates.
fn best_theta2(
    heavy: &HeavySet,
    self_mass: Option<&[u64]>,
    theta1: &UnitVector,
    probes: &[f64],
    slack: f64,
    rho: f64,
) -> Result<(UnitVector, usize)> {
    let n = heavy.n;
    let admissible: Vec<usize> = (0..heavy.len())
        .filter(|&i| dot(heavy.dir(i), theta1.as_slice()).abs() <= slack)
        .collect();
    let heavy_mass: Vec<u64> = match self_mass {
        Some(m) => admissible.iter().map(|&i| m[i]).collect(),
        None => {
            let q: Vec<f64> = admissible.iter().flat_map(|&i| heavy.dir(i).to_vec()).collect();
            heavy.query_masses(&q, rho)
        }
    };
    let candidates: Vec<&[f64]> = admissible
        .iter()
        .map(|&i| heavy.dir(i))
        .chain(
            probes
                .chunks_exact(n)
                .filter(|p| dot(p, theta1.as_slice()).abs() <= slack),
        )
        .collect();
    let probe_mass = heavy.query_masses(&candidates[admissible.len()..].concat(), rho);
    let i = argmax(heavy_mass.iter().chain(&probe_mass).copied())
        .ok_or_else(|| Error::SelectionImpossible("no candidate satisfies the orthogonality constraint".into()))?;
    Ok((UnitVector::normalize(candidates[i])?, candidates.len()))
}

/// Candidate-set maximizer of the cap probability at level `m`; the
/// candidates are the heavy sample directions and
/// `cfg.extra_random_candidates` uniform directions drawn from `rng`.
pub fn select_theta1<R: Rng + ?Sized>(
    data: &Dataset,
    m: f64,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<(UnitVector, f64)> {
    cfg.validate()?;
    let rho = cfg.constants.cap_radius;
    let heavy = HeavySet::new(data, m)?;
    let probes = random_probes(rng, data.dim(), cfg.extra_random_candidates)?;
    let theta1 = best_theta1(&heavy, &heavy.self_masses(rho), &probes, rho)?;
    let p = cap_probability(data, &theta1, m, rho)?;
    Ok((theta1, p))
}

/// As [`select_theta1`], restricted to `|⟨η, θ₁⟩| ≤ ortho_slack`. The
/// random probes are drawn on `θ₁^⊥`, so at least those are admissible.
pub fn select_theta2<R: Rng + ?Sized>(
    data: &Dataset,
    m: f64,
    theta1: &UnitVector,
    cfg: &SelectionConfig,
    rng: &mut R,
) -> Result<(UnitVector, f64)> {
    cfg.validate()?;
    check_dim(data, theta1)?;
    if data.dim() < 2 {
        return Err(Error::DimensionTooSmall(
            "no unit vector is almost orthogonal to θ₁ when n = 1".into(),
        ));
    }
    let rho = cfg.constants.cap_radius;
    let heavy = HeavySet::new(data, m)?;
    let probes = orthogonal_probes(rng, theta1, cfg.extra_random_candidates)?;
    let (theta2, _) = best_theta2(&heavy, None, theta1, &probes, cfg.constants.ortho_slack, rho)?;
    let p = cap_probability(data, &theta2, m, rho)?;
    Ok((theta2, p))
}

fn check_dim(data: &Dataset, v: &UnitVector) -> Result<()> {
    if v.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: v.dim(),
        });
    }
    Ok(())
}

/// `t₀ = √(−ln p)`: `+∞` for `p = 0` and `0` for `p = 1`.
pub fn compute_t0(cap_prob_2: f64) -> f64 {
    if cap_prob_2 <= 0.0 {
        f64::INFINITY
    } else if cap_prob_2 >= 1.0 {
        0.0
    } else {
        (-cap_prob_2.ln()).sqrt()
    }
}

/// Serializes `+∞` as `null`.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Outcome of the selection procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SelectionFields")]
pub struct DirectionSelection {
    /// 1/3-quantile of `|X|`.
    #[serde(rename = "M")]
    pub m: f64,
    pub theta1: UnitVector,
    pub theta2: UnitVector,
    pub theta3: UnitVector,
    pub theta: UnitVector,
    #[serde(with = "extended_real")]
    pub t0: f64,
    pub cap_prob_1: f64,
    pub cap_prob_2: f64,
    pub candidate_count: usize,
    pub seed: u64,
}

#[derive(Deserialize)]
struct SelectionFields {
    #[serde(rename = "M")]
    m: f64,
    theta1: UnitVector,
    theta2: UnitVector,
    theta3: UnitVector,
    theta: UnitVector,
    #[serde(with = "extended_real")]
    t0: f64,
    cap_prob_1: f64,
    cap_prob_2: f64,
    candidate_count: usize,
    seed: u64,
}

impl TryFrom<SelectionFields> for DirectionSelection {
    type Error = Error;

    fn try_from(f: SelectionFields) -> Result<Self> {
        let s = DirectionSelection::new(
            f.m,
            [f.theta1, f.theta2, f.theta3],
            f.cap_prob_1,
            f.cap_prob_2,
            f.candidate_count,
            f.seed,
        )?;
        if s.theta != f.theta {
            return Err(Error::validation("theta", "does not combine θ₁, θ₂, θ₃"));
        }
        if s.t0 != f.t0 {
            return Err(Error::validation("t0", "does not match cap_prob_2"));
        }
        Ok(s)
    }
}

impl DirectionSelection {
    /// Builds a selection, deriving `θ` and `t₀` and checking the invariants.
    pub fn new(
        m: f64,
        [theta1, theta2, theta3]: [UnitVector; 3],
        cap_prob_1: f64,
        cap_prob_2: f64,
        candidate_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::validation("M", format!("{m} is not positive")));
        }
        if dot(theta1.as_slice(), theta2.as_slice()).abs() > MAX_ORTHO_SLACK + 1e-12 {
            return Err(Error::validation("theta2", "|⟨θ₁, θ₂⟩| exceeds 1/10"));
        }
        if !(0.0..=1.0).contains(&cap_prob_2) || !(cap_prob_2..=1.0).contains(&cap_prob_1) {
            return Err(Error::validation(
                "cap_prob_2",
                format!("need 0 ≤ {cap_prob_2} ≤ {cap_prob_1} ≤ 1"),
            ));
        }
        let theta = combine_direction(&theta1, &theta2, &theta3)?;
        Ok(DirectionSelection {
            m,
            theta1,
            theta2,
            theta3,
            theta,
            t0: compute_t0(cap_prob_2),
            cap_prob_1,
            cap_prob_2,
            candidate_count,
            seed,
        })
    }
}

/// Runs the full selection. Randomness comes from the direction stage of
/// `seed`: first the `θ₁` probes, then the `θ₂` probes, then `θ₃`.
pub fn select_direction(data: &Dataset, cfg: &SelectionConfig, seed: u64) -> Result<DirectionSelection> {
    cfg.validate()?;
    let n = data.dim();
    if n < 3 {
        return Err(Error::DimensionTooSmall(format!(
            "direction selection needs n ≥ 3, got {n}"
        )));
    }
    let rho = cfg.constants.cap_radius;
    let slack = cfg.constants.ortho_slack;
    let m = norm_quantile(data, cfg.constants.quantile_level);
    let heavy = HeavySet::new(data, m)?;
    let mut rng = stream(seed, stage_stream_id(DIRECTION_STAGE));

    let probes1 = random_probes(&mut rng, n, cfg.extra_random_candidates)?;
    let self_mass = heavy.self_masses(rho);
    let mut theta1 = best_theta1(&heavy, &self_mass, &probes1, rho)?;
    let probes2 = orthogonal_probes(&mut rng, &theta1, cfg.extra_random_candidates)?;
    let (mut theta2, count2) = best_theta2(&heavy, Some(&self_mass), &theta1, &probes2, slack, rho)?;
    let mut p1 = cap_probability(data, &theta1, m, rho)?;
    let mut p2 = cap_probability(data, &theta2, m, rho)?;
    if p2 > p1 {
        // A probe orthogonal to θ₁ beat every θ₁ candidate; the pair stays
        // admissible with the roles exchanged.
        std::mem::swap(&mut theta1, &mut theta2);
        std::mem::swap(&mut p1, &mut p2);
    }

    let mut theta3 = None;
    for _ in 0..THETA3_ATTEMPTS {
        let t = sample_sphere(&mut rng, n)?;
        let admissible = !cfg.theta3_filter
            || (dot(t.as_slice(), theta1.as_slice()).abs() <= slack
                && dot(t.as_slice(), theta2.as_slice()).abs() <= slack);
        if admissible && combine_direction(&theta1, &theta2, &t).is_ok() {
            theta3 = Some(t);
            break;
        }
    }
    let theta3 = theta3.ok_or(Error::ResamplingFailed(THETA3_ATTEMPTS))?;
    let candidate_count = heavy.len() + cfg.extra_random_candidates + count2;
    let sel = DirectionSelection::new(m, [theta1, theta2, theta3], p1, p2, candidate_count, seed)?;
    let bad = cap_guarantee_violations(data, &sel, rho)?;
    if bad > 0 {
        return Err(Error::Numerical(format!(
            "{bad} heavy samples in the θ₁/θ₂ caps violate the ±M/30 bound"
        )));
    }
    Ok(sel)
}

/// Heavy samples in the cap around `θ₁` with `⟨x, θ⟩ < M/30`, plus those in
/// the cap around `θ₂` with `⟨x, θ⟩ > −M/30`.
pub fn cap_guarantee_violations(data: &Dataset, sel: &DirectionSelection, rho: f64) -> Result<usize> {
    check_dim(data, &sel.theta)?;
    let bound = sel.m / 30.0;
    let mut bad = 0;
    for x in data.rows() {
        if norm(x) < sel.m {
            continue;
        }
        let y = dot(x, sel.theta.as_slice());
        if cap_contains(&sel.theta1, x, rho)? && y < bound {
            bad += 1;
        }
        if cap_contains(&sel.theta2, x, rho)? && y > -bound {
            bad += 1;
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample, SourceSpec};
    use statrs::function::beta::beta_reg;

    fn e(n: usize, i: usize) -> UnitVector {
        UnitVector::basis(n, i)
    }

    fn scaled(v: &UnitVector, c: f64) -> Vec<f64> {
        v.as_slice().iter().map(|x| c * x).collect()
    }

    #[test]
    fn third_quantile_examples() {
        let rows: Vec<Vec<f64>> = (1..=9).map(|k| vec![k as f64, 0.0]).collect();
        assert_eq!(third_quantile(&Dataset::from_rows(&rows).unwrap()), 6.0);
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|k| vec![2.5 * (k as f64).cos(), 2.5 * (k as f64).sin()])
            .collect();
        assert!((third_quantile(&Dataset::from_rows(&rows).unwrap()) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn third_quantile_of_ball_radius() {
        let n = 10;
        let count = 100_000;
        let data = sample(&SourceSpec::uniform_ball(n, 1.0), 4, count).unwrap();
        let m = third_quantile(&data);
        let r = (2.0f64 / 3.0).powf(1.0 / n as f64);
        let density = n as f64 * r.powi(n as i32 - 1);
        let sigma = ((2.0 / 9.0) / count as f64).sqrt() / density;
        assert!((m - r).abs() < 3.0 * sigma, "{m} vs {r}");
        let data = Dataset::weighted(1, vec![1.0, 2.0, 3.0], vec![0.5, 0.2, 0.3]).unwrap();
        assert_eq!(third_quantile(&data), 2.0);
    }

    #[test]
    fn cap_probability_examples() {
        let eta = UnitVector::normalize(&[1.0, 2.0, -1.0]).unwrap();
        let data = Dataset::from_rows(&vec![scaled(&eta, 2.0); 4]).unwrap();
        assert_eq!(cap_probability(&data, &eta, 1.0, 0.2).unwrap(), 1.0);
        assert_eq!(cap_probability(&data, &eta, 3.0, 0.2).unwrap(), 0.0);
        let two = Dataset::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(cap_probability(&two, &e(2, 0), 1.0, 0.2).unwrap(), 0.5);
        assert!(cap_probability(&two, &e(2, 0), 1.0, 1.5).is_err());
    }

    fn clustered(n: usize, count: usize, seed: u64) -> Dataset {
        // Points near a handful of centres so caps hold many samples.
        let mut rng = stream(seed, 0);
        let centres: Vec<UnitVector> = (0..4).map(|_| sample_sphere(&mut rng, n).unwrap()).collect();
        let mut rows = Vec::new();
        for i in 0..count {
            let c = &centres[i % 4];
            let g = sample_sphere(&mut rng, n).unwrap();
            let s = rng.random_range(0.0..0.25);
            let r = rng.random_range(0.5..2.0);
            rows.push((0..n).map(|k| r * (c.as_slice()[k] + s * g.as_slice()[k])).collect());
        }
        Dataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn fast_cap_masses_match_direct_count() {
        for (n, seed) in [(3, 1), (5, 2), (12, 3)] {
            let data = clustered(n, 700, seed);
            let m = third_quantile(&data);
            let heavy = HeavySet::new(&data, m).unwrap();
            let fast = heavy.self_masses(0.2);
            for (i, &mass) in fast.iter().enumerate() {
                let eta = UnitVector::normalize(heavy.dir(i)).unwrap();
                let direct = cap_probability(&data, &eta, m, 0.2).unwrap();
                assert_eq!(from_fixed(mass), direct, "n={n} i={i}");
            }
            let mut rng = stream(seed, 9);
            let probes = random_probes(&mut rng, n, 50).unwrap();
            let pm = heavy.query_masses(&probes, 0.2);
            for (j, p) in probes.chunks_exact(n).enumerate() {
                let eta = UnitVector::new(p.to_vec()).unwrap();
                assert_eq!(from_fixed(pm[j]), cap_probability(&data, &eta, m, 0.2).unwrap());
            }
        }
    }

    #[test]
    fn theta1_finds_tight_cluster() {
        let mut rng = stream(5, 0);
        let mut rows = Vec::new();
        for _ in 0..60 {
            let g = sample_sphere(&mut rng, 6).unwrap();
            rows.push(
                (0..6)
                    .map(|k| 3.0 * (e(6, 0).as_slice()[k] + 0.02 * g.as_slice()[k]))
                    .collect(),
            );
        }
        for _ in 0..40 {
            rows.push(scaled(&sample_sphere(&mut rng, 6).unwrap(), 3.0));
        }
        let data = Dataset::from_rows(&rows).unwrap();
        let (t1, p) = select_theta1(&data, 1.0, &SelectionConfig::default(), &mut rng).unwrap();
        assert!(t1.as_slice()[0] >= 0.98);
        let in_cluster = cap_probability(&data, &e(6, 0), 1.0, 0.2).unwrap();
        assert!(p >= in_cluster - 1e-12, "{p} {in_cluster}");
    }

    #[test]
    fn theta_examples_on_two_atoms() {
        let data = Dataset::weighted(2, vec![2.0, 0.0, 0.0, 2.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let cfg = SelectionConfig::default();
        let mut rng = stream(1, 0);
        let (t1, p1) = select_theta1(&data, 1.0, &cfg, &mut rng).unwrap();
        assert_eq!((t1, p1), (e(2, 0), 2.0 / 3.0));
        let (t2, p2) = select_theta2(&data, 1.0, &e(2, 0), &cfg, &mut rng).unwrap();
        assert_eq!((t2, p2), (e(2, 1), 1.0 / 3.0));
    }

    #[test]
    fn antipodal_cap_is_excluded_from_theta2() {
        let data = Dataset::from_rows(&[vec![2.0, 0.0, 0.0], vec![-2.0, 0.0, 0.0]]).unwrap();
        let cfg = SelectionConfig::default();
        let mut rng = stream(2, 0);
        let (t1, p1) = select_theta1(&data, 1.0, &cfg, &mut rng).unwrap();
        assert_eq!((t1.clone(), p1), (e(3, 0), 0.5));
        let (t2, p2) = select_theta2(&data, 1.0, &t1, &cfg, &mut rng).unwrap();
        assert_eq!(p2, 0.0);
        assert!(dot(t2.as_slice(), t1.as_slice()).abs() <= 0.1);
        assert_eq!(compute_t0(p2), f64::INFINITY);
    }

    #[test]
    fn all_mass_near_theta1_leaves_theta2_empty() {
        let data =
            Dataset::from_rows(&[vec![2.0, 0.0, 0.0], vec![2.0 * 0.1f64.cos(), 2.0 * 0.1f64.sin(), 0.0]]).unwrap();
        let sel = select_direction(&data, &SelectionConfig::default(), 3).unwrap();
        assert_eq!(sel.cap_prob_1, 1.0);
        assert_eq!(sel.cap_prob_2, 0.0);
        assert_eq!(sel.t0, f64::INFINITY);
        let v: serde_json::Value = serde_json::to_value(&sel).unwrap();
        assert!(v["t0"].is_null());
    }

    #[test]
    fn theta2_needs_two_dimensions() {
        let data = Dataset::from_rows(&[vec![2.0], vec![-1.0]]).unwrap();
        let r = select_theta2(&data, 1.0, &e(1, 0), &SelectionConfig::default(), &mut stream(0, 0));
        assert!(matches!(r, Err(Error::DimensionTooSmall(_))));
        let r = select_theta1(&data, 5.0, &SelectionConfig::default(), &mut stream(0, 0));
        assert!(matches!(r, Err(Error::SelectionImpossible(_))));
    }

    #[test]
    fn uniform_sphere_caps_hold_a_single_point() {
        let n = 50;
        let count = 10_000;
        let data = sample(&SourceSpec::uniform_ball(n, 1.0), 11, count).unwrap();
        let heavy = HeavySet::new(&data, 0.0).unwrap();
        let max = heavy.self_masses(0.2).into_iter().max().unwrap();
        // σ(cap) = P(⟨Θ, e₁⟩ ≥ 0.98) = ½·I_{1−0.98²}((n−1)/2, 1/2).
        let cap = 0.5 * beta_reg((n as f64 - 1.0) / 2.0, 0.5, 1.0 - 0.98f64 * 0.98);
        let expected_pairs = (count * count) as f64 * cap;
        assert!(expected_pairs < 1e-6, "{expected_pairs}");
        assert!((from_fixed(max) - 1.0 / count as f64).abs() < 1e-15);
    }

    #[test]
    fn t0_examples() {
        assert!((compute_t0((-4.0f64).exp()) - 2.0).abs() < 1e-15);
        assert_eq!(compute_t0(1.0), 0.0);
        assert_eq!(compute_t0(0.0), f64::INFINITY);
    }

    #[test]
    fn selection_on_three_dimensional_atoms() {
        let data = Dataset::weighted(3, vec![2.0, 0.0, 0.0, 0.0, 2.0, 0.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let sel = select_direction(&data, &SelectionConfig::default(), 0).unwrap();
        assert_eq!(sel.theta1, e(3, 0));
        assert_eq!(sel.theta2, e(3, 1));
        assert_eq!(sel.m, 2.0);
        let t3 = sel.theta3.as_slice();
        assert!(t3[0].abs() <= 0.1 && t3[1].abs() <= 0.1);
        assert_eq!(sel.theta, combine_direction(&e(3, 0), &e(3, 1), &sel.theta3).unwrap());
        assert!((sel.t0 - (3f64).ln().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn selection_is_reproducible_and_scale_invariant() {
        let data = sample(&SourceSpec::uniform_ball(8, 1.0), 2, 3000).unwrap();
        let cfg = SelectionConfig::default();
        let a = select_direction(&data, &cfg, 42).unwrap();
        assert_eq!(a, select_direction(&data, &cfg, 42).unwrap());
        for c in [2.0, 0.25] {
            let b = select_direction(&data.scaled(c).unwrap(), &cfg, 42).unwrap();
            assert_eq!(
                (&a.theta1, &a.theta2, &a.theta3, &a.theta),
                (&b.theta1, &b.theta2, &b.theta3, &b.theta)
            );
            assert_eq!(b.m, c * a.m);
        }
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let big = clustered(10, 3000, 4);
        let x = one.install(|| select_direction(&big, &cfg, 1).unwrap());
        let y = four.install(|| select_direction(&big, &cfg, 1).unwrap());
        assert_eq!(x, y);
    }

    #[test]
    fn selection_invariants_and_json() {
        let data = clustered(6, 900, 7);
        let sel = select_direction(&data, &SelectionConfig::default(), 9).unwrap();
        assert!(dot(sel.theta1.as_slice(), sel.theta2.as_slice()).abs() <= 0.1);
        assert!(sel.cap_prob_1 >= sel.cap_prob_2);
        assert_eq!(cap_guarantee_violations(&data, &sel, 0.2).unwrap(), 0);
        let s = serde_json::to_string(&sel).unwrap();
        let back: DirectionSelection = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sel);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        for key in [
            "M",
            "theta1",
            "theta2",
            "theta3",
            "theta",
            "t0",
            "cap_prob_1",
            "cap_prob_2",
            "candidate_count",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let mut bad = v.clone();
        bad["theta"] = serde_json::to_value(e(6, 0)).unwrap();
        assert!(serde_json::from_value::<DirectionSelection>(bad).is_err());
    }

    #[test]
    fn selection_rejects_small_dimension_and_bad_config() {
        let data = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            select_direction(&data, &SelectionConfig::default(), 0),
            Err(Error::DimensionTooSmall(_))
        ));
        let mut cfg = SelectionConfig::default();
        cfg.constants.ortho_slack = 0.3;
        assert!(cfg.validate().is_err());
    }
}
