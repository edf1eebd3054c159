//! Seeded random scenes for property runs and sweeps.

use rand::Rng;

use crate::casorati::{Coefficients, Symmetry};
use crate::geometry::{Mat, OrthoFrame, Vector};
use crate::inequalities::{MapScene, SubmersionScene};
use crate::quaternionic::{QsfOracle, QuaternionicStructure};
use crate::Result;

/// Random orthogonal `n × n` matrix (QR of a uniform matrix, signs fixed).
pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let m = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let qr = m.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// Symmetric slices with entries uniform in `[−1, 1]`.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, codim: usize) -> Coefficients {
    let mut h = Coefficients::zeros(n, codim, Symmetry::Symmetric);
    for a in 0..codim {
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                h.slices[a][i * n + j] = v;
                h.slices[a][j * n + i] = v;
            }
        }
    }
    h
}

/// Skew slices with entries uniform in `[−1, 1]`.
pub fn random_skew<R: Rng>(rng: &mut R, n: usize, codim: usize) -> Coefficients {
    let mut h = Coefficients::zeros(n, codim, Symmetry::Skew);
    for a in 0..codim {
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.gen_range(-1.0..1.0);
                h.slices[a][i * n + j] = v;
                h.slices[a][j * n + i] = -v;
            }
        }
    }
    h
}

/// Slice `α` is `diag(λ_α, …, λ_α, 2λ_α)`.
pub fn equality_pattern(n: usize, lambdas: &[f64]) -> Coefficients {
    let mut h = Coefficients::zeros(n, lambdas.len(), Symmetry::Symmetric);
    for (a, &lam) in lambdas.iter().enumerate() {
        for i in 0..n {
            h.slices[a][i * n + i] = if i + 1 == n { 2.0 * lam } else { lam };
        }
    }
    h
}

fn columns(q: &Mat, range: std::ops::Range<usize>) -> OrthoFrame {
    let n = q.nrows();
    OrthoFrame {
        vectors: range.map(|j| Vector::from_column_slice(q.column(j).as_slice())).collect(),
        metric: Mat::identity(n, n),
    }
}

/// Space-form oracle on flat `ℝ⁸` with the quaternion-unit structure.
pub fn oracle8(c: f64) -> Result<QsfOracle> {
    QsfOracle::new(c, QuaternionicStructure::quat_flat(2)?, Mat::identity(8, 8))
}

/// Orthonormal split of `ℝ⁸` in a random orientation: first `s` vectors, then the rest.
pub fn random_split<R: Rng>(rng: &mut R, s: usize) -> (OrthoFrame, OrthoFrame) {
    let q = random_orthogonal(rng, 8);
    (columns(&q, 0..s), columns(&q, s..8))
}

/// The coordinate split `span(e₁..e_s) ⊕ span(e_{s+1}..e₈)`.
pub fn coordinate_split(s: usize) -> (OrthoFrame, OrthoFrame) {
    let q = Mat::identity(8, 8);
    (columns(&q, 0..s), columns(&q, s..8))
}

/// Riemannian map into `M(c) = ℝ⁸` with rank `s` and random `B`.
pub fn random_map_scene<R: Rng>(rng: &mut R, c: f64, s: usize) -> Result<MapScene> {
    let (range, perp) = random_split(rng, s);
    let b = random_symmetric(rng, s, 8 - s);
    MapScene::pointwise(&oracle8(c)?, &range, &perp, b)
}

/// Submersion from `M(c) = ℝ⁸` with `s + ℓ = 8` and random `T`, `A`.
pub fn random_submersion_scene<R: Rng>(rng: &mut R, c: f64, s: usize) -> Result<SubmersionScene> {
    let (h, v) = random_split(rng, s);
    let l = 8 - s;
    let t = random_symmetric(rng, l, s);
    let a = random_skew(rng, s, l);
    SubmersionScene::pointwise(&oracle8(c)?, &h, &v, t, a)
}
