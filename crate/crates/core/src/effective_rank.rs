//! Effective rank of finitely supported laws.
//!
//! `X` has effective rank at least `d` when every subspace `E` carries mass
//! `P(X ∈ E) ≤ dim(E)/d`, with equality only if some complement `F`
//! (`E ⊕ F = R^n`) satisfies `P(X ∈ E ∪ F) = 1`. For a finite law only the
//! spans of atom subsets matter: any `E` can be shrunk to the span of the
//! atoms it contains without changing its mass, which lowers `dim(E)/P(E)`.
//! The search therefore enumerates linearly independent subsets of at most
//! `n` atom lines and identifies each span by the set of lines it contains.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{sample_grassmannian, Subspace};
use crate::linalg::{self, norm};

/// Most distinct atom lines the exact search accepts.
pub const MAX_DISTINCT_DIRECTIONS: usize = 20;
/// Largest ambient dimension the exact search accepts.
pub const MAX_EXACT_DIM: usize = 6;
/// Relative tolerance for subspace membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Two atoms lie on the same line when their normalized directions are this
/// close (up to sign).
pub const DIRECTION_TOL: f64 = 1e-9;
/// Tolerance used when comparing `P(E)` with `dim(E)/d`.
pub const RATIO_TOL: f64 = 1e-12;

/// Outcome of the exact effective-rank search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRankReport {
    /// `min_E dim(E) / P(X ∈ E)`.
    pub d_star: f64,
    /// Orthonormal basis of the first minimizing subspace.
    pub witness_basis: Vec<Vec<f64>>,
    /// Whether every minimizing subspace admits a complement `F` with
    /// `P(X ∈ E ∪ F) = 1`. When true the law has effective rank at least
    /// `d_star`; when false only at least `d_star − ε` for every `ε > 0`.
    pub boundary_equality: bool,
    /// Number of distinct candidate subspaces examined (including `R^n`).
    pub checked_subspace_count: usize,
}

impl EffectiveRankReport {
    pub fn witness(&self, ambient: usize) -> Result<Subspace> {
        Subspace::from_orthonormal(ambient, self.witness_basis.clone())
    }
}

/// Total weight of samples `x` with `|x − Proj_E x| ≤ tol·|x|`.
pub fn subspace_mass(data: &Dataset, subspace: &Subspace, tol: f64) -> Result<f64> {
    if data.dim() != subspace.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: subspace.ambient_dim(),
            got: data.dim(),
        });
    }
    let mut mass = 0.0;
    for (i, x) in data.rows().enumerate() {
        if subspace.residual_norm(x)? <= tol * norm(x) {
            mass += data.weight(i);
        }
    }
    Ok(mass)
}

/// Distinct lines through the atoms with their total mass.
struct AtomLines {
    dim: usize,
    directions: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl AtomLines {
    fn collect(data: &Dataset) -> Result<Self> {
        let dim = data.dim();
        if dim > MAX_EXACT_DIM {
            return Err(Self::budget(usize::MAX, dim));
        }
        let mut directions: Vec<Vec<f64>> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (i, x) in data.rows().enumerate() {
            let u = linalg::normalized(x).ok_or_else(|| Error::InvalidInput(format!("sample {i} is zero")))?;
            let found = directions.iter().position(|d| {
                linalg::distance(d, &u) < DIRECTION_TOL
                    || d.iter().zip(&u).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt() < DIRECTION_TOL
            });
            match found {
                Some(j) => masses[j] += data.weight(i),
                None => {
                    if directions.len() == MAX_DISTINCT_DIRECTIONS {
                        return Err(Self::budget(directions.len() + 1, dim));
                    }
                    directions.push(u);
                    masses.push(data.weight(i));
                }
            }
        }
        Ok(AtomLines {
            dim,
            directions,
            masses,
        })
    }

    fn budget(distinct: usize, dim: usize) -> Error {
        Error::BudgetExceeded {
            distinct,
            dim,
            max_directions: MAX_DISTINCT_DIRECTIONS,
            max_dim: MAX_EXACT_DIM,
        }
    }

    fn len(&self) -> usize {
        self.directions.len()
    }

    fn mask_in(&self, basis: &[Vec<f64>]) -> u32 {
        let mut mask = 0;
        for (j, d) in self.directions.iter().enumerate() {
            if norm(&linalg::orthogonalize(basis, d)) <= MEMBERSHIP_TOL {
                mask |= 1 << j;
            }
        }
        mask
    }

    fn mass(&self, mask: u32) -> f64 {
        (0..self.len())
            .filter(|j| mask & (1 << j) != 0)
            .map(|j| self.masses[j])
            .sum()
    }

    /// Whether `E ⊕ F = R^n` for some `F` containing every line outside `E`:
    /// true iff `span(outside) ∩ E = {0}`.
    fn has_complement(&self, inside: u32, basis: &[Vec<f64>]) -> bool {
        let outside: Vec<&[f64]> = (0..self.len())
            .filter(|j| inside & (1 << j) == 0)
            .map(|j| self.directions[j].as_slice())
            .collect();
        let out_rank = linalg::orthonormal_span(&outside, MEMBERSHIP_TOL).len();
        let mut all: Vec<&[f64]> = basis.iter().map(Vec::as_slice).collect();
        all.extend(outside.iter().copied());
        linalg::orthonormal_span(&all, MEMBERSHIP_TOL).len() == basis.len() + out_rank
    }
}

/// One candidate subspace: a span of atom lines, or `R^n` itself.
struct Candidate {
    mask: u32,
    basis: Vec<Vec<f64>>,
    mass: f64,
}

impl Candidate {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn ratio(&self) -> f64 {
        self.dim() as f64 / self.mass
    }
}

/// Lexicographically ordered subsets of `0..m` of size `1..=k`.
fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..m {
            cur.push(i);
            out.push(cur.clone());
            if cur.len() < k {
                rec(i + 1, m, k, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

fn candidates(lines: &AtomLines) -> Vec<Candidate> {
    let n = lines.dim;
    let found: Vec<Option<(u32, Vec<Vec<f64>>)>> = subsets(lines.len(), n)
        .into_par_iter()
        .map(|s| {
            let vs: Vec<&[f64]> = s.iter().map(|&j| lines.directions[j].as_slice()).collect();
            let basis = linalg::orthonormal_span(&vs, MEMBERSHIP_TOL);
            // Dependent subsets span something an independent subset already covers.
            (basis.len() == s.len()).then(|| (lines.mask_in(&basis), basis))
        })
        .collect();
    // First occurrence in lexicographic subset order represents each span.
    let mut by_mask: BTreeMap<u32, (usize, Vec<Vec<f64>>)> = BTreeMap::new();
    for (order, (mask, basis)) in found.into_iter().flatten().enumerate() {
        by_mask.entry(mask).or_insert((order, basis));
    }
    let mut list: Vec<(usize, u32, Vec<Vec<f64>>)> = by_mask.into_iter().map(|(m, (o, b))| (o, m, b)).collect();
    list.sort_by_key(|(o, _, _)| *o);
    let mut out: Vec<Candidate> = list
        .into_iter()
        .map(|(_, mask, basis)| Candidate {
            mass: lines.mass(mask),
            mask,
            basis,
        })
        .collect();
    if !out.iter().any(|c| c.dim() == n) {
        let full = (1u32 << lines.len()) - 1;
        out.push(Candidate {
            mask: full,
            basis: Subspace::full(n).basis().to_vec(),
            mass: lines.mass(full),
        });
    }
    out
}

/// Exact effective rank of a finitely supported law.
///
/// Limited to at most [`MAX_DISTINCT_DIRECTIONS`] distinct atom lines in
/// dimension at most [`MAX_EXACT_DIM`].
pub fn effective_rank_exact(atoms: &Dataset) -> Result<EffectiveRankReport> {
    let lines = AtomLines::collect(atoms)?;
    let cands = candidates(&lines);
    let mut best = 0;
    for (i, c) in cands.iter().enumerate() {
        if c.ratio() < cands[best].ratio() - RATIO_TOL * cands[best].ratio() {
            best = i;
        }
    }
    let d_star = cands[best].ratio();
    let boundary_equality = cands
        .iter()
        .filter(|c| (c.ratio() - d_star).abs() <= RATIO_TOL * d_star)
        .all(|c| lines.has_complement(c.mask, &c.basis));
    Ok(EffectiveRankReport {
        d_star,
        witness_basis: cands[best].basis.clone(),
        boundary_equality,
        checked_subspace_count: cands.len(),
    })
}

/// Whether the law is of class "effective rank at least `d`": every
/// candidate has `P(E) ≤ dim(E)/d`, and equality only with a complement.
pub fn effrank_at_least(atoms: &Dataset, d: f64) -> Result<bool> {
    if !(d > 0.0) {
        return Err(Error::InvalidInput(format!("d = {d} must be positive")));
    }
    let lines = AtomLines::collect(atoms)?;
    for c in candidates(&lines) {
        let bound = c.dim() as f64 / d;
        if c.mass > bound + RATIO_TOL {
            return Ok(false);
        }
        if (c.mass - bound).abs() <= RATIO_TOL && !lines.has_complement(c.mask, &c.basis) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Projects every sample onto a uniformly random `⌈d⌉`-dimensional subspace
/// `L` and returns the subspace with the coordinates of the images in its
/// basis.
pub fn random_projection<R: Rng + ?Sized>(data: &Dataset, d: f64, rng: &mut R) -> Result<(Subspace, Dataset)> {
    if !(d > 0.0) {
        return Err(Error::InvalidInput(format!("d = {d} must be positive")));
    }
    let n = data.dim();
    if d > n as f64 {
        return Err(Error::InvalidInput(format!("d = {d} exceeds the dimension {n}")));
    }
    let k = d.ceil() as usize;
    let l = sample_grassmannian(rng, n, k)?;
    let basis = l.basis().to_vec();
    let image = data.map_rows(k, |x, out| {
        for (o, u) in out.iter_mut().zip(&basis) {
            *o = linalg::dot(u, x);
        }
    })?;
    Ok((l, image))
}

/// [`random_projection`] without the subspace.
pub fn random_projection_reduce<R: Rng + ?Sized>(data: &Dataset, d: f64, rng: &mut R) -> Result<Dataset> {
    random_projection(data, d, rng).map(|(_, image)| image)
}
