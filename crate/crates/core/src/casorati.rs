//! Casorati curvatures and normalized δ-Casorati curvatures.

use nalgebra::DMatrix;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Symmetry class of the coefficient slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    Skew,
    General,
}

/// Coefficients `h^α_ij` of a vector-valued bilinear form on an
/// `n`-dimensional distribution, one row-major `n × n` slice per `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffArray<T> {
    pub n: usize,
    pub slices: Vec<Vec<T>>,
    pub kind: Symmetry,
}

impl<T: Float> CoeffArray<T> {
    /// Validates shape and the declared symmetry (to `1e-9` relative).
    pub fn new(n: usize, slices: Vec<Vec<T>>, kind: Symmetry) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("coefficient array over a 0-dimensional distribution".into()));
        }
        if slices.iter().any(|s| s.len() != n * n) {
            return Err(Error::Dimension(format!("every slice must have {} entries", n * n)));
        }
        let out = CoeffArray { n, slices, kind };
        let scale = out.max_abs().max(T::one());
        let tol = T::from(1e-9).unwrap() * scale;
        let sign = match kind {
            Symmetry::Symmetric => T::one(),
            Symmetry::Skew => -T::one(),
            Symmetry::General => return Ok(out),
        };
        for (a, _) in out.slices.iter().enumerate() {
            for i in 0..n {
                for j in i..n {
                    let v = (out.get(a, i, j) - sign * out.get(a, j, i)).abs();
                    if v > tol {
                        return Err(Error::Dimension(format!(
                            "slice {a} is not {kind:?} at ({i},{j}): violation {:e}",
                            v.to_f64().unwrap_or(f64::NAN)
                        )));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn zeros(n: usize, codim: usize, kind: Symmetry) -> Self {
        CoeffArray {
            n,
            slices: vec![vec![T::zero(); n * n]; codim],
            kind,
        }
    }

    pub fn codim(&self) -> usize {
        self.slices.len()
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, j: usize) -> T {
        self.slices[a][i * self.n + j]
    }

    pub fn max_abs(&self) -> T {
        self.slices
            .iter()
            .flatten()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `Σ_α Σ_ij (h^α_ij)²`
    pub fn norm_sq(&self) -> T {
        self.slices.iter().flatten().fold(T::zero(), |s, v| s + *v * *v)
    }

    /// `Σ_α (Σ_i h^α_ii)²`
    pub fn trace_norm_sq(&self) -> T {
        (0..self.codim())
            .map(|a| (0..self.n).fold(T::zero(), |s, i| s + self.get(a, i, i)))
            .fold(T::zero(), |s, t| s + t * t)
    }

    pub fn scaled(&self, lambda: T) -> Self {
        CoeffArray {
            n: self.n,
            slices: self.slices.iter().map(|s| s.iter().map(|v| *v * lambda).collect()).collect(),
            kind: self.kind,
        }
    }
}

impl CoeffArray<f64> {
    pub fn from_matrices(mats: &[DMatrix<f64>], kind: Symmetry) -> Result<Self> {
        let n = mats.first().map_or(0, |m| m.nrows());
        let slices = mats
            .iter()
            .map(|m| {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::Dimension("slices must be square of equal size".into()));
                }
                Ok((0..n * n).map(|k| m[(k / n, k % n)]).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n.max(1), slices, kind)
    }

    pub fn slice_matrix(&self, a: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.slices[a])
    }

    /// Components in the rotated basis `f_p = Σ_i q_ip e_i` (columns of `q`).
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        let slices = (0..self.codim())
            .map(|a| {
                let m = q.transpose() * self.slice_matrix(a) * q;
                (0..self.n * self.n).map(|k| m[(k / self.n, k % self.n)]).collect()
            })
            .collect();
        CoeffArray {
            n: self.n,
            slices,
            kind: self.kind,
        }
    }
}

pub type Coefficients = CoeffArray<f64>;

/// `C = (1/n) Σ_α ‖h^α‖²`.
pub fn casorati<T: Float>(h: &CoeffArray<T>) -> T {
    h.norm_sq() / T::from(h.n).unwrap()
}

/// Casorati curvature of the coordinate subspace spanned by `indices`.
pub fn casorati_subspace<T: Float>(h: &CoeffArray<T>, indices: &[usize]) -> Result<T> {
    let k = indices.len();
    if k < 2 {
        return Err(Error::Dimension(format!("subspace Casorati curvature needs k ≥ 2, got {k}")));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= h.n) {
        return Err(Error::Dimension(format!("index {bad} out of range for n = {}", h.n)));
    }
    let mut s = T::zero();
    for a in 0..h.codim() {
        for &i in indices {
            for &j in indices {
                let v = h.get(a, i, j);
                s = s + v * v;
            }
        }
    }
    Ok(s / T::from(k).unwrap())
}

/// Sum over slices of `‖(I − uuᵀ) h (I − uuᵀ)‖²_F`, without the `1/(n−1)` factor.
fn projected_norm_sq<T: Float>(h: &CoeffArray<T>, u: &[T]) -> T {
    let n = h.n;
    let mut total = T::zero();
    for a in 0..h.codim() {
        let mut hu = T::zero();
        let mut htu = T::zero();
        let mut uhu = T::zero();
        let mut fro = T::zero();
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                let v = h.get(a, i, j);
                fro = fro + v * v;
                r = r + v * u[j];
                c = c + h.get(a, j, i) * u[j];
            }
            hu = hu + r * r;
            htu = htu + c * c;
            uhu = uhu + u[i] * r;
        }
        total = total + fro - hu - htu + uhu * uhu;
    }
    total
}

/// Casorati curvature of the hyperplane with unit normal `u`.
pub fn casorati_hyperplane<T: Float>(h: &CoeffArray<T>, u: &[T]) -> Result<T> {
    if h.n < 2 || u.len() != h.n {
        return Err(Error::Dimension(format!(
            "hyperplane normal of length {} in a {}-dimensional distribution",
            u.len(),
            h.n
        )));
    }
    let norm = u.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
    let tol = if std::mem::size_of::<T>() == 4 { 1e-6 } else { 1e-12 };
    if (norm - T::one()).abs() > T::from(tol).unwrap() {
        return Err(Error::Frame(format!(
            "hyperplane normal is not a unit vector (norm {})",
            norm.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(projected_norm_sq(h, u) / T::from(h.n - 1).unwrap())
}

/// Hyperplane Casorati value and its Euclidean gradient in `u`.
fn cl_value_grad(h: &Coefficients, u: &[f64]) -> (f64, Vec<f64>) {
    let n = h.n;
    let scale = 1.0 / (n - 1) as f64;
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    for a in 0..h.codim() {
        let s = &h.slices[a];
        let mut hu = vec![0.0; n];
        let mut htu = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                hu[i] += s[i * n + j] * u[j];
                htu[i] += s[j * n + i] * u[j];
            }
        }
        let uhu: f64 = (0..n).map(|i| u[i] * hu[i]).sum();
        let fro: f64 = s.iter().map(|v| v * v).sum();
        total += fro - dot(&hu, &hu) - dot(&htu, &htu) + uhu * uhu;
        // d/du: −2hᵀhu − 2hhᵀu + 2(uᵀhu)(h + hᵀ)u
        for i in 0..n {
            let mut hthu = 0.0;
            let mut hhtu = 0.0;
            for j in 0..n {
                hthu += s[j * n + i] * hu[j];
                hhtu += s[i * n + j] * htu[j];
            }
            grad[i] += -2.0 * hthu - 2.0 * hhtu + 2.0 * uhu * (hu[i] + htu[i]);
        }
    }
    (total * scale, grad.into_iter().map(|g| g * scale).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Number of optimizer starts.
pub const STARTS: usize = 64;
/// Dense sample count used for certification when `n ≤ 5`.
pub const DENSE_SAMPLES: usize = 100_000;
const MAX_ITER: usize = 20_000;
const DENSE_SEED: u64 = 0x00c0_5a0a;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartRecord {
    pub start: usize,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Audit trail of one extremization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizerAudit {
    pub starts: usize,
    pub min_start: usize,
    pub max_start: usize,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub total_iterations: usize,
    pub dense_samples: usize,
    /// How far the best raw dense sample beats the optimizer (0 if never).
    pub raw_sample_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperplaneExtrema {
    pub inf_cl: f64,
    pub sup_cl: f64,
    pub argmin_normal: Vec<f64>,
    pub argmax_normal: Vec<f64>,
    /// Agreement bound with the dense-sampling refinement (`n ≤ 5` only).
    pub certified_gap: Option<f64>,
    pub degenerate_min: bool,
    pub degenerate_max: bool,
    pub audit: OptimizerAudit,
}

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Deterministic start directions: coordinate axes, then Halton points.
pub fn start_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..n.min(count) {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(e);
    }
    let mut k = 1u64;
    while out.len() < count {
        let mut v: Vec<f64> = (0..n)
            .map(|d| 2.0 * radical_inverse(k, PRIMES[d % PRIMES.len()]) - 1.0)
            .collect();
        k += 1;
        if dot(&v, &v) < 1e-6 {
            continue;
        }
        normalize(&mut v);
        out.push(v);
    }
    out
}

/// Riemannian gradient descent of `sign · C^L` on the unit sphere with
/// Barzilai–Borwein steps safeguarded by Armijo backtracking.
fn descend(h: &Coefficients, start: &[f64], sign: f64, tol: f64, fscale: f64) -> (Vec<f64>, f64, usize, f64) {
    let n = h.n;
    let eval = |u: &[f64]| {
        let (v, g) = cl_value_grad(h, u);
        let mut rg: Vec<f64> = g.iter().map(|x| sign * x).collect();
        let radial = dot(&rg, u);
        rg.iter_mut().zip(u).for_each(|(r, ui)| *r -= radial * ui);
        (sign * v, rg)
    };
    let mut u = start.to_vec();
    normalize(&mut u);
    let (mut f, mut g) = eval(&u);
    // the gradient scales like ‖h‖², so steps scale inversely
    let mut step = 0.1 / fscale;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for it in 0..MAX_ITER {
        let gn = dot(&g, &g).sqrt();
        if gn < tol {
            return (u, sign * f, it, gn);
        }
        if let Some((pu, pg)) = &prev {
            let s: Vec<f64> = (0..n).map(|i| u[i] - pu[i]).collect();
            let y: Vec<f64> = (0..n).map(|i| g[i] - pg[i]).collect();
            let sy = dot(&s, &y);
            if sy > 0.0 {
                step = (dot(&s, &s) / sy).clamp(1e-8 / fscale, 1e4 / fscale);
            }
        }
        let mut t = step;
        let accepted = loop {
            let mut cand: Vec<f64> = (0..n).map(|i| u[i] - t * g[i]).collect();
            normalize(&mut cand);
            let (cf, cg) = eval(&cand);
            // near the optimum the Armijo decrease drops below the resolution
            // of f, so also accept steps that shrink the gradient without
            // raising f beyond rounding
            let flat = cf <= f + 1e-15 * f.abs().max(fscale) && dot(&cg, &cg).sqrt() < gn;
            if cf <= f - 1e-4 * t * gn * gn || flat {
                break Some((cand, cf, cg));
            }
            t *= 0.5;
            if t < 1e-14 / fscale {
                break None;
            }
        };
        let Some((nu, nf, ng)) = accepted else {
            return (u, sign * f, it, gn);
        };
        prev = Some((u, g));
        u = nu;
        f = nf;
        g = ng;
    }
    let gn = dot(&g, &g).sqrt();
    (u, sign * f, MAX_ITER, gn)
}

fn direction_distance(a: &[f64], b: &[f64]) -> f64 {
    let plus: f64 = a.iter().zip(b).map(|(x, y)| (x + y).powi(2)).sum();
    let minus: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    plus.min(minus).sqrt()
}

struct Side {
    value: f64,
    dir: Vec<f64>,
    start: usize,
    iterations: usize,
    total: usize,
    degenerate: bool,
}

fn optimize_side(h: &Coefficients, starts: &[Vec<f64>], sign: f64, tol: f64, scale: f64) -> Result<Side> {
    let runs: Vec<_> = starts.par_iter().map(|s| descend(h, s, sign, tol, scale)).collect();
    let total = runs.iter().map(|r| r.2).sum();
    let converged: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].3 < tol).collect();
    if converged.is_empty() {
        let best = (0..runs.len())
            .min_by(|&a, &b| (sign * runs[a].1).total_cmp(&(sign * runs[b].1)))
            .expect("starts");
        return Err(Error::Optimization {
            best: runs[best].1,
            grad_norm: runs[best].3,
        });
    }
    // first index among the best value; deterministic regardless of scheduling
    let mut best = converged[0];
    for &i in &converged {
        if sign * runs[i].1 < sign * runs[best].1 {
            best = i;
        }
    }
    let degenerate = converged.iter().any(|&i| {
        i != best
            && (runs[i].1 - runs[best].1).abs() < 1e-10 * scale
            && direction_distance(&runs[i].0, &runs[best].0) > 1e-3
    });
    Ok(Side {
        value: runs[best].1,
        dir: runs[best].0.clone(),
        start: best,
        iterations: runs[best].2,
        total,
        degenerate,
    })
}

const REFINE: usize = 8;

// Sorted by `sign * value`, at most `REFINE` entries.
fn keep_best(best: &mut Vec<(f64, Vec<f64>)>, val: f64, v: &[f64], sign: f64) {
    if best.len() == REFINE && sign * val >= sign * best[REFINE - 1].0 {
        return;
    }
    let at = best.partition_point(|(b, _)| sign * *b <= sign * val);
    best.insert(at, (val, v.to_vec()));
    best.truncate(REFINE);
}

/// Infimum and supremum of `C^L` over all hyperplanes of the distribution.
pub fn hyperplane_extrema(h: &Coefficients) -> Result<HyperplaneExtrema> {
    let n = h.n;
    if n < 3 {
        return Err(Error::Dimension(format!("hyperplane extrema need n ≥ 3, got {n}")));
    }
    // relative to ‖h‖² alone so that the result is covariant under scaling
    let norm = h.norm_sq();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let tol = 1e-10 * scale;
    let starts = start_directions(n, STARTS);
    let mut lo = optimize_side(h, &starts, 1.0, tol, scale)?;
    let mut hi = optimize_side(h, &starts, -1.0, tol, scale)?;

    let mut certified_gap = None;
    let mut raw_excess = 0.0;
    let mut dense = 0;
    if n <= 5 {
        dense = DENSE_SAMPLES;
        let mut rng = ChaCha8Rng::seed_from_u64(DENSE_SEED ^ n as u64);
        // only the few extreme samples seed the refinement
        let mut lows: Vec<(f64, Vec<f64>)> = Vec::with_capacity(REFINE + 1);
        let mut highs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(REFINE + 1);
        let mut v = vec![0.0; n];
        let mut taken = 0;
        while taken < DENSE_SAMPLES {
            for x in v.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            let r2 = dot(&v, &v);
            if !(1e-6..=1.0).contains(&r2) {
                continue;
            }
            taken += 1;
            normalize(&mut v);
            let val = projected_norm_sq(h, &v) / (n - 1) as f64;
            keep_best(&mut lows, val, &v, 1.0);
            keep_best(&mut highs, val, &v, -1.0);
        }
        let raw_min = lows[0].0;
        let raw_max = highs[0].0;
        raw_excess = (lo.value - raw_min).max(raw_max - hi.value).max(0.0);
        let refine = |picks: &[(f64, Vec<f64>)], sign: f64| {
            picks
                .iter()
                .map(|(_, v)| descend(h, v, sign, tol, scale))
                .fold(None::<(f64, Vec<f64>)>, |best, (u, val, _, _)| match best {
                    Some((b, _)) if sign * b <= sign * val => best,
                    _ => Some((val, u)),
                })
                .expect("samples")
        };
        let ref_min = refine(&lows, 1.0);
        let ref_max = refine(&highs, -1.0);
        let gap = (lo.value - ref_min.0).abs().max((hi.value - ref_max.0).abs());
        certified_gap = Some(gap);
        if ref_min.0 < lo.value {
            lo.value = ref_min.0;
            lo.dir = ref_min.1;
        }
        if ref_max.0 > hi.value {
            hi.value = ref_max.0;
            hi.dir = ref_max.1;
        }
    }

    Ok(HyperplaneExtrema {
        inf_cl: lo.value,
        sup_cl: hi.value,
        argmin_normal: lo.dir,
        argmax_normal: hi.dir,
        certified_gap,
        degenerate_min: lo.degenerate,
        degenerate_max: hi.degenerate,
        audit: OptimizerAudit {
            starts: starts.len(),
            min_start: lo.start,
            max_start: hi.start,
            min_iterations: lo.iterations,
            max_iterations: hi.iterations,
            total_iterations: lo.total + hi.total,
            dense_samples: dense,
            raw_sample_excess: raw_excess,
        },
    })
}

/// `(δ_C, δ̂_C)` from the Casorati curvature and hyperplane extrema.
pub fn delta_casorati<T: Float>(c: T, inf_cl: T, sup_cl: T, n: usize) -> (T, T) {
    let nf = T::from(n).unwrap();
    let one = T::one();
    let two = one + one;
    let delta = c / two + (nf + one) / (two * nf) * inf_cl;
    let delta_hat = two * c - (two * nf - one) / (two * nf) * sup_cl;
    (delta, delta_hat)
}
