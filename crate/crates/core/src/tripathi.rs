//! The constrained quadratic extremum problem
//! `min λ₁Σ_{i<n} t_i² + λ₂t_n² − 2Σ_{i<j} t_i t_j` on `Σ t_i = k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripathiInstance {
    pub n: usize,
    pub k: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl TripathiInstance {
    /// Instance with `λ₂ = (n−1)/(λ₁ − n + 2)`.
    pub fn with_proviso(n: usize, k: f64, lambda1: f64) -> Self {
        TripathiInstance {
            n,
            k,
            lambda1,
            lambda2: (n as f64 - 1.0) / (lambda1 - n as f64 + 2.0),
        }
    }

    pub fn objective(&self, t: &[f64]) -> f64 {
        let n = self.n;
        let mut f = self.lambda2 * t[n - 1] * t[n - 1];
        for ti in &t[..n - 1] {
            f += self.lambda1 * ti * ti;
        }
        let s: f64 = t.iter().sum();
        let sq: f64 = t.iter().map(|x| x * x).sum();
        // 2Σ_{i<j} t_i t_j = (Σt)² − Σt²
        f - (s * s - sq)
    }

    /// Hessian of the objective.
    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            if i != j {
                -2.0
            } else if i == n - 1 {
                2.0 * self.lambda2
            } else {
                2.0 * self.lambda1
            }
        })
    }

    pub fn proviso_residual(&self) -> f64 {
        let target = (self.n as f64 - 1.0) / (self.lambda1 - self.n as f64 + 2.0);
        (self.lambda2 - target).abs() / target.abs().max(f64::MIN_POSITIVE)
    }
}

/// Closed-form minimizer; requires the proviso and positive `λ`s.
pub fn tripathi_minimize(inst: &TripathiInstance) -> Result<(Vec<f64>, f64)> {
    let n = inst.n;
    if n < 3 {
        return Err(Error::Dimension(format!("needs n ≥ 3, got {n}")));
    }
    if !(inst.lambda1 > 0.0 && inst.lambda2 > 0.0) {
        return Err(Error::Proviso(format!(
            "λ₁ = {}, λ₂ = {} must be positive",
            inst.lambda1, inst.lambda2
        )));
    }
    let r = inst.proviso_residual();
    if !(r <= 1e-12) {
        return Err(Error::Proviso(format!(
            "λ₂ = {} differs from (n−1)/(λ₁−n+2) (relative residual {r:e})",
            inst.lambda2
        )));
    }
    let mut t = vec![inst.k / (inst.lambda1 + 1.0); n];
    t[n - 1] = inst.k / (inst.lambda2 + 1.0);
    let f = inst.objective(&t);
    Ok((t, f))
}

/// The three displayed expressions for `t_n`.
pub fn tn_expressions(inst: &TripathiInstance) -> [f64; 3] {
    let (k, l1, l2, n) = (inst.k, inst.lambda1, inst.lambda2, inst.n as f64);
    [
        k / (l2 + 1.0),
        k * (n - 1.0) / ((l1 + 1.0) * l2),
        k * (l1 - n + 2.0) / (l1 + 1.0),
    ]
}

/// Minimizes `½ tᵀHt` on `Σ t_i = k` by projected gradient with exact line
/// search, starting from the centroid.
pub fn minimize_quadratic_on_hyperplane(h: &DMatrix<f64>, k: f64, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let n = h.nrows();
    let mut t = DVector::from_element(n, k / n as f64);
    let project = |v: &DVector<f64>| {
        let m = v.sum() / n as f64;
        v.map(|x| x - m)
    };
    let mut best_grad = f64::INFINITY;
    for _ in 0..max_iter {
        let g = project(&(h * &t));
        let gn = g.norm();
        best_grad = gn;
        if gn < tol {
            return Ok(t);
        }
        let curv = g.dot(&(h * &g));
        if !(curv > 0.0) {
            return Err(Error::Optimization {
                best: f64::NEG_INFINITY,
                grad_norm: gn,
            });
        }
        t -= &g * (g.dot(&g) / curv);
    }
    Err(Error::Optimization {
        best: 0.5 * t.dot(&(h * &t)),
        grad_norm: best_grad,
    })
}
