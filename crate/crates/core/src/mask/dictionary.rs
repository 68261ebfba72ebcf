//! Patch dictionary learning and lasso sparse coding.
//!
//! Training minimizes the average over patches of
//! `½‖y − Dθ‖² + λ‖θ‖₁` with unit-norm atoms. Each epoch re-codes every patch
//! (coordinate descent, warm-started from the previous epoch's codes), folds
//! the codes into the sufficient statistics `A = Σθθᵀ` and `B = Σyθᵀ`, and
//! then minimizes over each atom in turn with the others fixed. Both half-steps
//! are exact or descent steps, so the objective never increases.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Plane;
use crate::mask::patches::PatchSet;
use crate::rng::seeded;

/// Subgradient tolerance for the lasso optimality conditions.
pub const LASSO_TOLERANCE: f64 = 1e-5;
/// Sweep cap for coordinate descent.
pub const LASSO_MAX_SWEEPS: usize = 1000;
/// Sweeps between attempts to solve the current support exactly.
const POLISH_EVERY: usize = 10;
/// Support Gram eigenvalues at or below this count as rank-deficient.
const NULL_EIGENVALUE: f64 = 1e-10;
/// Cap on active-set steps per refinement, as a multiple of the atom count.
const POLISH_STEPS_PER_ATOM: usize = 4;

const DICT_UPDATE_PASSES: usize = 3;

/// `n × m` matrix of unit-norm atoms, stored column-major (atom-contiguous).
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    n: usize,
    m: usize,
    pub lambda: f64,
    atoms: Vec<f64>,
}

impl Dictionary {
    /// Builds a dictionary from atom columns, normalizing each to unit length.
    pub fn from_atoms(atoms: Vec<Vec<f64>>, lambda: f64) -> Result<Self> {
        let m = atoms.len();
        let n = atoms.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument("empty dictionary".into()));
        }
        let mut flat = Vec::with_capacity(n * m);
        for a in atoms {
            if a.len() != n {
                return Err(Error::DimensionMismatch("atoms differ in length".into()));
            }
            let norm = l2(&a);
            if norm == 0.0 {
                return Err(Error::Degenerate("zero atom".into()));
            }
            flat.extend(a.iter().map(|v| v / norm));
        }
        Ok(Dictionary {
            n,
            m,
            lambda,
            atoms: flat,
        })
    }

    pub fn atom_len(&self) -> usize {
        self.n
    }

    pub fn num_atoms(&self) -> usize {
        self.m
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.n..(j + 1) * self.n]
    }

    fn atom_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.atoms[j * self.n..(j + 1) * self.n]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.atoms.chunks_exact(self.n)
    }

    /// `D θ`.
    pub fn reconstruct(&self, code: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &c) in code.iter().enumerate() {
            if c != 0.0 {
                axpy(c, self.atom(j), &mut out);
            }
        }
        out
    }

    /// `Dᵀ y`.
    pub fn correlate(&self, y: &[f64]) -> Vec<f64> {
        self.atoms().map(|a| dot(a, y)).collect()
    }

    pub fn gram(&self) -> Vec<f64> {
        let m = self.m;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = dot(self.atom(i), self.atom(j));
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        g
    }

    /// Lasso coordinate-descent solver bound to this dictionary.
    pub fn solver(&self) -> LassoSolver<'_> {
        LassoSolver {
            dict: self,
            gram: self.gram(),
        }
    }

    /// Per-patch objective `½‖y − Dθ‖² + λ‖θ‖₁`.
    pub fn objective(&self, y: &[f64], code: &[f64]) -> f64 {
        let r = self.reconstruct(code);
        let fit: f64 = y.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * fit + self.lambda * code.iter().map(|c| c.abs()).sum::<f64>()
    }
}

/// Sparse coefficients of one patch over a dictionary.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCode {
    pub coefficients: Vec<f64>,
}

pub struct LassoSolver<'a> {
    dict: &'a Dictionary,
    gram: Vec<f64>,
}

impl LassoSolver<'_> {
    /// Solves the lasso for `y`, optionally starting from `warm`.
    pub fn solve(&self, y: &[f64], warm: Option<&[f64]>) -> Result<SparseCode> {
        let d = self.dict;
        if y.len() != d.n {
            return Err(Error::DimensionMismatch(format!(
                "patch has {} values, atoms have {}",
                y.len(),
                d.n
            )));
        }
        let m = d.m;
        let lambda = d.lambda;
        let corr = d.correlate(y);
        let mut theta = warm.map_or_else(|| vec![0.0; m], <[f64]>::to_vec);
        // g = Dᵀ(y − Dθ)
        let mut g = corr.clone();
        self.subtract_gram(&theta, &mut g);

        let mut residual = kkt_residual(&theta, &g, lambda);
        let mut sweeps = 0;
        while residual > LASSO_TOLERANCE {
            if sweeps == LASSO_MAX_SWEEPS {
                return Err(Error::NotConverged { sweeps, residual });
            }
            for j in 0..m {
                let gjj = self.gram[j * m + j];
                let old = theta[j];
                let new = soft_threshold(g[j] + old * gjj, lambda) / gjj;
                let delta = new - old;
                if delta != 0.0 {
                    theta[j] = new;
                    let col = &self.gram[j * m..(j + 1) * m];
                    axpy(-delta, col, &mut g);
                }
            }
            sweeps += 1;
            // Refresh from scratch so the stopping test never sees drift.
            g.copy_from_slice(&corr);
            self.subtract_gram(&theta, &mut g);
            residual = kkt_residual(&theta, &g, lambda);
            if residual > LASSO_TOLERANCE && sweeps % POLISH_EVERY == 0 {
                let polished = self.polish(&theta, &corr);
                if d.objective(y, &polished) <= d.objective(y, &theta) {
                    g.copy_from_slice(&corr);
                    self.subtract_gram(&polished, &mut g);
                    residual = kkt_residual(&polished, &g, lambda);
                    theta = polished;
                }
            }
        }
        Ok(SparseCode {
            coefficients: theta,
        })
    }

    /// Active-set refinement started from a coordinate-descent iterate.
    ///
    /// Each step either solves the current support with fixed signs,
    /// `G_AA θ_A = (Dᵀy)_A − λ·s_A`, moving toward that solution until a
    /// coefficient first reaches zero, or adds the worst-violating inactive
    /// coordinate with the sign of its gradient. A rank-deficient support is
    /// shrunk along a null direction of its atoms instead, which keeps the
    /// fit and does not raise the ℓ1 term.
    fn polish(&self, theta: &[f64], corr: &[f64]) -> Vec<f64> {
        let m = self.dict.m;
        let lambda = self.dict.lambda;
        let mut theta = theta.to_vec();
        let mut signs: Vec<f64> = theta
            .iter()
            .map(|&t| if t != 0.0 { t.signum() } else { 0.0 })
            .collect();
        for _ in 0..POLISH_STEPS_PER_ATOM * m {
            let active: Vec<usize> = (0..m).filter(|&j| signs[j] != 0.0).collect();
            let mut g = corr.to_vec();
            self.subtract_gram(&theta, &mut g);
            let support_optimal = active
                .iter()
                .all(|&j| (g[j] - lambda * signs[j]).abs() <= 0.1 * LASSO_TOLERANCE);
            if support_optimal {
                let worst = (0..m)
                    .filter(|&j| signs[j] == 0.0 && g[j].abs() > lambda)
                    .max_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs()));
                match worst {
                    Some(j) => {
                        signs[j] = g[j].signum();
                        continue;
                    }
                    None => break,
                }
            }
            let k = active.len();
            let gram = DMatrix::from_fn(k, k, |r, c| self.gram[active[r] * m + active[c]]);
            let eig = gram.clone().symmetric_eigen();
            let (low, &smallest) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            let (dir, t_max) = match gram.cholesky().filter(|_| smallest > NULL_EIGENVALUE) {
                Some(chol) => {
                    let rhs =
                        DVector::from_fn(k, |r, _| corr[active[r]] - lambda * signs[active[r]]);
                    let target = chol.solve(&rhs);
                    ((0..k).map(|r| target[r] - theta[active[r]]).collect(), 1.0)
                }
                None => {
                    let mut dir: Vec<f64> = eig.eigenvectors.column(low).iter().copied().collect();
                    let slope: f64 = (0..k).map(|r| signs[active[r]] * dir[r]).sum();
                    if slope > 0.0 {
                        dir.iter_mut().for_each(|v| *v = -*v);
                    }
                    (dir, f64::INFINITY)
                }
            };
            let stop = active
                .iter()
                .zip(&dir)
                .enumerate()
                .filter(|(_, (&j, &v))| v != 0.0 && v.signum() != signs[j])
                .map(|(r, (&j, &v))| (-theta[j] / v, r))
                .filter(|&(t, _)| t < t_max)
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let t = stop.map_or(t_max, |(t, _)| t);
            if !t.is_finite() {
                break;
            }
            for (r, &j) in active.iter().enumerate() {
                theta[j] += t * dir[r];
            }
            if let Some((_, r)) = stop {
                theta[active[r]] = 0.0;
                signs[active[r]] = 0.0;
            }
        }
        theta
    }

    fn subtract_gram(&self, theta: &[f64], g: &mut [f64]) {
        let m = self.dict.m;
        for (j, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                axpy(-t, &self.gram[j * m..(j + 1) * m], g);
            }
        }
    }
}

/// Largest violation of the lasso optimality conditions given
/// `g = Dᵀ(y − Dθ)`.
pub fn kkt_residual(theta: &[f64], g: &[f64], lambda: f64) -> f64 {
    theta
        .iter()
        .zip(g)
        .map(|(&t, &gj)| {
            if t != 0.0 {
                (gj - lambda * t.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn sparse_code(patch: &[f64], dict: &Dictionary) -> Result<SparseCode> {
    dict.solver().solve(patch, None)
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct DictionaryTraining {
    pub dictionary: Dictionary,
    /// Average objective after each epoch.
    pub objective: Vec<f64>,
}

/// Learns `m` unit-norm atoms for `patches` (expected mean-centered).
///
/// The initial dictionary is `m` distinct patches drawn at random (Gaussian
/// noise stands in for any zero patch), normalized. With `epochs == 0` it is
/// returned as-is.
pub fn learn_dictionary(
    patches: &PatchSet,
    m: usize,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<DictionaryTraining> {
    let n = patches.dim();
    let np = patches.len();
    if m == 0 {
        return Err(Error::InvalidArgument("atom count must be positive".into()));
    }
    if np < m {
        return Err(Error::InvalidArgument(format!(
            "need at least {m} patches, got {np}"
        )));
    }
    if patches.iter().all(|p| p.iter().all(|&v| v == 0.0)) {
        return Err(Error::Degenerate(
            "all patches are zero; no dictionary can be learned".into(),
        ));
    }

    let mut rng = seeded(seed);
    let mut atoms = Vec::with_capacity(m);
    for i in sample(&mut rng, np, m) {
        atoms.push(nonzero_or_noise(patches.patch(i), &mut rng));
    }
    let mut dict = Dictionary::from_atoms(atoms, lambda)?;

    let mut codes: Vec<Vec<f64>> = vec![vec![0.0; m]; np];
    let mut objective = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let solver = dict.solver();
        codes = codes
            .par_iter()
            .enumerate()
            .map(|(i, warm)| {
                solver
                    .solve(patches.patch(i), Some(warm))
                    .map(|c| c.coefficients)
            })
            .collect::<Result<_>>()?;

        // Sufficient statistics, accumulated in patch order.
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; n * m];
        for (i, code) in codes.iter().enumerate() {
            let y = patches.patch(i);
            let nz: Vec<(usize, f64)> = code
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(j, &c)| (j, c))
                .collect();
            for &(j, cj) in &nz {
                for &(k, ck) in &nz {
                    a[j * m + k] += cj * ck;
                }
                axpy(cj, y, &mut b[j * n..(j + 1) * n]);
            }
        }

        for _ in 0..DICT_UPDATE_PASSES {
            for j in 0..m {
                // u = b_j − Σ_{k≠j} d_k A_kj; the unit vector along u is the
                // exact minimizer over atom j on the sphere.
                let mut u = b[j * n..(j + 1) * n].to_vec();
                for k in 0..m {
                    let akj = a[k * m + j];
                    if k != j && akj != 0.0 {
                        axpy(-akj, dict.atom(k), &mut u);
                    }
                }
                let norm = l2(&u);
                if a[j * m + j] == 0.0 {
                    // Unused atom: every code has θ_j = 0, so the objective does
                    // not depend on it. Re-seed it from the data.
                    let i = rng.random_range(0..np);
                    let fresh = nonzero_or_noise(patches.patch(i), &mut rng);
                    let fnorm = l2(&fresh);
                    dict.atom_mut(j)
                        .iter_mut()
                        .zip(&fresh)
                        .for_each(|(d, v)| *d = v / fnorm);
                } else if norm > 1e-12 {
                    dict.atom_mut(j)
                        .iter_mut()
                        .zip(&u)
                        .for_each(|(d, v)| *d = v / norm);
                }
            }
        }

        let total: f64 = codes
            .iter()
            .enumerate()
            .map(|(i, c)| dict.objective(patches.patch(i), c))
            .sum();
        objective.push(total / np as f64);
    }
    Ok(DictionaryTraining {
        dictionary: dict,
        objective,
    })
}

fn nonzero_or_noise(patch: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    if l2(patch) > 1e-12 {
        patch.to_vec()
    } else {
        (0..patch.len()).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// Sparse-codes every patch, keeps only the coefficients of `rain_indices`,
/// and overlap-averages the resulting `D θ_rain` back onto the pixel grid.
pub fn reconstruct_rain(
    patches: &PatchSet,
    dict: &Dictionary,
    rain_indices: &[usize],
) -> Result<Plane> {
    if rain_indices.is_empty() {
        return Err(Error::InvalidArgument("rain atom set is empty".into()));
    }
    if let Some(&bad) = rain_indices.iter().find(|&&j| j >= dict.num_atoms()) {
        return Err(Error::InvalidArgument(format!("atom index {bad} out of range")));
    }
    let mut keep = vec![false; dict.num_atoms()];
    for &j in rain_indices {
        keep[j] = true;
    }
    let solver = dict.solver();
    let parts: Vec<Vec<f64>> = (0..patches.len())
        .into_par_iter()
        .map(|i| {
            let mut code = solver.solve(patches.patch(i), None)?.coefficients;
            for (c, &k) in code.iter_mut().zip(&keep) {
                if !k {
                    *c = 0.0;
                }
            }
            Ok(dict.reconstruct(&code))
        })
        .collect::<Result<_>>()?;
    Ok(patches.overlap_average(parts.iter().map(Vec::as_slice)))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
