//! Charts, metric jets, Levi-Civita connection, curvature and orthonormal frames.
//!
//! Curvature convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` and
//! `R(X,Y,Z,W) = g(R(X,Y)Z, W)`, so `R(X,Y,Y,X)` is the sectional curvature of
//! an orthonormal pair (positive on round spheres).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet2, MAX_VARS};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Componentwise symmetry tolerance for evaluated metrics.
pub const SYMMETRY_TOL: f64 = 1e-14;
/// Smallest admissible metric eigenvalue.
pub const DEFINITENESS_TOL: f64 = 1e-10;
/// Rank threshold for Gram–Schmidt.
pub const DEPENDENCY_TOL: f64 = 1e-10;

/// Axis-aligned box of open intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn unbounded(n: usize) -> Self {
        Domain {
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart has {}",
                x.len(),
                self.dim()
            )));
        }
        for (axis, ((&v, &lo), &hi)) in x.iter().zip(&self.lo).zip(&self.hi).enumerate() {
            if !(v > lo && v < hi) {
                return Err(Error::Domain {
                    point: x.to_vec(),
                    axis,
                });
            }
        }
        Ok(())
    }
}

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    pub grad: Vector,
    pub hess: Mat,
}

impl FieldJet {
    fn from_jet(j: &Jet2<f64>, n: usize) -> Self {
        FieldJet {
            value: j.value,
            grad: Vector::from_fn(n, |i, _| j.grad[i]),
            hess: Mat::from_fn(n, n, |i, k| j.hess[i][k]),
        }
    }
}

/// Second-order jet of a scalar field at `x`.
pub fn eval_jet2(field: &Expr, domain: &Domain, x: &[f64]) -> Result<FieldJet> {
    domain.check(x)?;
    if x.len() > MAX_VARS {
        return Err(Error::Dimension(format!(
            "chart dimension {} exceeds the supported maximum {MAX_VARS}",
            x.len()
        )));
    }
    let j = field.eval(&Jet2::seed(x));
    Ok(FieldJet::from_jet(&j, x.len()))
}

/// A coordinate chart carrying a smooth metric given by closed-form components.
#[derive(Clone, Debug)]
pub struct MetricChart {
    pub name: String,
    pub coords: Vec<String>,
    pub domain: Domain,
    /// Row-major `n × n` metric components.
    components: Vec<Expr>,
}

/// Metric components with first and second partial derivatives at a point.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub g: Mat,
    /// `dg[k][(i,j)] = ∂_k g_ij`
    pub dg: Vec<Mat>,
    /// `ddg[k][l][(i,j)] = ∂_k ∂_l g_ij`
    pub ddg: Vec<Vec<Mat>>,
}

impl MetricChart {
    pub fn new(name: impl Into<String>, coords: Vec<String>, domain: Domain, components: Vec<Expr>) -> Result<Self> {
        let n = coords.len();
        if n == 0 || n > MAX_VARS {
            return Err(Error::Dimension(format!("chart dimension {n} not in 1..={MAX_VARS}")));
        }
        if components.len() != n * n || domain.dim() != n {
            return Err(Error::Dimension(format!(
                "chart with {n} coordinates needs {} metric components and an {n}-dimensional domain",
                n * n
            )));
        }
        Ok(MetricChart {
            name: name.into(),
            coords,
            domain,
            components,
        })
    }

    /// Builds a chart from metric component source strings.
    pub fn parse(name: impl Into<String>, coords: Vec<String>, domain: Domain, metric: &[Vec<String>]) -> Result<Self> {
        let names: Vec<&str> = coords.iter().map(String::as_str).collect();
        let mut comps = Vec::new();
        for row in metric {
            if row.len() != coords.len() {
                return Err(Error::Dimension("metric rows must have one entry per coordinate".into()));
            }
            for s in row {
                comps.push(Expr::parse(s, &names)?);
            }
        }
        Self::new(name, coords, domain, comps)
    }

    /// Euclidean metric on ℝⁿ with coordinates `x1..xn`.
    pub fn flat(n: usize) -> Self {
        let coords = (1..=n).map(|i| format!("x{i}")).collect();
        let comps = (0..n * n)
            .map(|k| Expr::Const(if k / n == k % n { 1.0 } else { 0.0 }))
            .collect();
        MetricChart::new(format!("flat:{n}"), coords, Domain::unbounded(n), comps).expect("valid flat chart")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[i * self.dim() + j]
    }

    pub fn coord_names(&self) -> Vec<&str> {
        self.coords.iter().map(String::as_str).collect()
    }

    /// Metric matrix at `x`, validated for symmetry and positive definiteness.
    pub fn metric_at(&self, x: &[f64]) -> Result<Mat> {
        self.domain.check(x)?;
        let n = self.dim();
        let g = Mat::from_fn(n, n, |i, j| self.component(i, j).eval(x));
        check_metric(&g)?;
        Ok(g)
    }

    pub fn metric_jet(&self, x: &[f64]) -> Result<MetricJet> {
        self.domain.check(x)?;
        let n = self.dim();
        let seeds = Jet2::seed(x);
        let jets: Vec<Jet2<f64>> = self.components.iter().map(|e| e.eval(&seeds)).collect();
        let g = Mat::from_fn(n, n, |i, j| jets[i * n + j].value);
        check_metric(&g)?;
        let dg = (0..n)
            .map(|k| Mat::from_fn(n, n, |i, j| jets[i * n + j].grad[k]))
            .collect();
        let ddg = (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| Mat::from_fn(n, n, |i, j| jets[i * n + j].hess[k][l]))
                    .collect()
            })
            .collect();
        Ok(MetricJet { g, dg, ddg })
    }
}

/// Validates symmetry (componentwise, 1e-14 scaled by magnitude) and
/// positive definiteness (smallest eigenvalue above 1e-10).
pub fn check_metric(g: &Mat) -> Result<()> {
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = g[(i, j)];
            let b = g[(j, i)];
            let v = (a - b).abs();
            if !(v <= SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0)) {
                return Err(Error::Symmetry { i, j, violation: v });
            }
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("metric has non-finite components".into()));
    }
    let eig = SymmetricEigen::new(g.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > DEFINITENESS_TOL) {
        return Err(Error::Degenerate(format!("smallest metric eigenvalue {min:e}")));
    }
    Ok(())
}

/// Dense rank-3 array indexed `(k, i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    /// Bilinear application: `out^k = Σ T(k,i,j) a^i b^j`.
    pub fn apply(&self, a: &Vector, b: &Vector) -> Vector {
        let n = self.n;
        Vector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                if a[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }
}

/// Christoffel symbols of the second kind, `Γ^k_ij = gamma.get(k, i, j)`.
pub type Christoffel = Tensor3;

/// Dense rank-4 array indexed `(i, j, k, l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        t.data[((i * n + j) * n + k) * n + l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.data[((i * n + j) * n + k) * n + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Components in the basis `frame` (vectors in the original index space).
    pub fn in_frame(&self, frame: &[Vector]) -> Tensor4 {
        let n = self.n;
        let m = frame.len();
        // contract one slot at a time: n^4 -> m n^3 -> m^2 n^2 -> ...
        let mut a = vec![0.0; m * n * n * n];
        for p in 0..m {
            for i in 0..n {
                let f = frame[p][i];
                if f == 0.0 {
                    continue;
                }
                for rest in 0..n * n * n {
                    a[p * n * n * n + rest] += f * self.data[i * n * n * n + rest];
                }
            }
        }
        let mut b = vec![0.0; m * m * n * n];
        for p in 0..m {
            for q in 0..m {
                for j in 0..n {
                    let f = frame[q][j];
                    if f == 0.0 {
                        continue;
                    }
                    for rest in 0..n * n {
                        b[(p * m + q) * n * n + rest] += f * a[p * n * n * n + j * n * n + rest];
                    }
                }
            }
        }
        let mut c = vec![0.0; m * m * m * n];
        for pq in 0..m * m {
            for r in 0..m {
                for k in 0..n {
                    let f = frame[r][k];
                    if f == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        c[(pq * m + r) * n + l] += f * b[pq * n * n + k * n + l];
                    }
                }
            }
        }
        let mut out = Tensor4::zeros(m);
        for pqr in 0..m * m * m {
            for s in 0..m {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += frame[s][l] * c[pqr * n + l];
                }
                out.data[pqr * m + s] = acc;
            }
        }
        out
    }

    /// Largest violation of `R_ijkl = −R_jikl = −R_ijlk = R_klij` and of the
    /// first Bianchi identity, relative to `max(1, max |R|)`.
    pub fn symmetry_residuals(&self) -> (f64, f64) {
        let n = self.n;
        let scale = self.max_abs().max(1.0);
        let mut sym = 0.0f64;
        let mut bianchi = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        sym = sym
                            .max((r + self.get(j, i, k, l)).abs())
                            .max((r + self.get(i, j, l, k)).abs())
                            .max((r - self.get(k, l, i, j)).abs());
                        bianchi = bianchi.max((r + self.get(j, k, i, l) + self.get(k, i, j, l)).abs());
                    }
                }
            }
        }
        (sym / scale, bianchi / scale)
    }
}

/// Inverse metric, Christoffel symbols and their first derivatives at a point.
#[derive(Clone, Debug)]
pub struct Connection {
    pub g: Mat,
    pub ginv: Mat,
    pub gamma: Christoffel,
    /// `dgamma[p]` holds `∂_p Γ^k_ij` as a [`Tensor3`].
    pub dgamma: Vec<Tensor3>,
}

impl Connection {
    pub fn from_jet(jet: &MetricJet) -> Result<Self> {
        let n = jet.g.nrows();
        let ginv = jet
            .g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("metric is singular".into()))?;
        // first kind: Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
        fn first(l: usize, i: usize, j: usize, d: &[Mat]) -> f64 {
            0.5 * (d[i][(j, l)] + d[j][(i, l)] - d[l][(i, j)])
        }
        let mut gamma1 = Tensor3::zeros(n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gamma1.set(l, i, j, first(l, i, j, &jet.dg));
                }
            }
        }
        let mut gamma = Tensor3::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * gamma1.get(l, i, j);
                    }
                    gamma.set(k, i, j, s);
                }
            }
        }
        let mut dgamma = Vec::with_capacity(n);
        for p in 0..n {
            // ∂_p g^{kl} = −g^{ka} ∂_p g_ab g^{bl}
            let dginv = -(&ginv * &jet.dg[p] * &ginv);
            let mut t = Tensor3::zeros(n);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let dfirst = first(l, i, j, &jet.ddg[p]);
                            s += dginv[(k, l)] * gamma1.get(l, i, j) + ginv[(k, l)] * dfirst;
                        }
                        t.set(k, i, j, s);
                    }
                }
            }
            dgamma.push(t);
        }
        Ok(Connection {
            g: jet.g.clone(),
            ginv,
            gamma,
            dgamma,
        })
    }

    /// Covariant curvature components `R_ijkl = R(∂_i, ∂_j, ∂_k, ∂_l)`.
    pub fn riemann(&self) -> Tensor4 {
        let n = self.g.nrows();
        let gm = &self.gamma;
        // R^m_{k i j} = ∂_iΓ^m_jk − ∂_jΓ^m_ik + Γ^p_jk Γ^m_ip − Γ^p_ik Γ^m_jp
        let mut up = vec![0.0; n * n * n * n];
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = self.dgamma[i].get(m, j, k) - self.dgamma[j].get(m, i, k);
                        for p in 0..n {
                            s += gm.get(p, j, k) * gm.get(m, i, p) - gm.get(p, i, k) * gm.get(m, j, p);
                        }
                        up[((m * n + k) * n + i) * n + j] = s;
                    }
                }
            }
        }
        Tensor4::from_fn(n, |i, j, k, l| {
            let mut s = 0.0;
            for m in 0..n {
                s += self.g[(l, m)] * up[((m * n + k) * n + i) * n + j];
            }
            s
        })
    }
}

/// Christoffel symbols `Γ^k_ij` of the chart's Levi-Civita connection at `x`.
pub fn christoffel(chart: &MetricChart, x: &[f64]) -> Result<Christoffel> {
    Ok(Connection::from_jet(&chart.metric_jet(x)?)?.gamma)
}

/// Curvature data of a chart at one point.
#[derive(Clone, Debug)]
pub struct CurvaturePoint {
    pub x: Vec<f64>,
    pub metric: Mat,
    pub gamma: Christoffel,
    pub riemann: Tensor4,
}

pub fn riemann(chart: &MetricChart, x: &[f64]) -> Result<CurvaturePoint> {
    let conn = Connection::from_jet(&chart.metric_jet(x)?)?;
    let r = conn.riemann();
    Ok(CurvaturePoint {
        x: x.to_vec(),
        metric: conn.g,
        gamma: conn.gamma,
        riemann: r,
    })
}

/// Anything that evaluates the covariant curvature quadrilinear form at a point.
pub trait CurvatureTensor {
    fn dim(&self) -> usize;
    fn metric(&self) -> &Mat;
    fn eval(&self, a: &Vector, b: &Vector, c: &Vector, d: &Vector) -> f64;

    /// Components `R(e_p, e_q, e_r, e_s)` over the given vectors.
    fn in_frame(&self, frame: &[Vector]) -> Tensor4 {
        Tensor4::from_fn(frame.len(), |i, j, k, l| self.eval(&frame[i], &frame[j], &frame[k], &frame[l]))
    }
}

impl CurvatureTensor for CurvaturePoint {
    fn dim(&self) -> usize {
        self.metric.nrows()
    }
    fn metric(&self) -> &Mat {
        &self.metric
    }
    fn eval(&self, a: &Vector, b: &Vector, c: &Vector, d: &Vector) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if b[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    if c[k] == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        s += self.riemann.get(i, j, k, l) * a[i] * b[j] * c[k] * d[l];
                    }
                }
            }
        }
        s
    }
    fn in_frame(&self, frame: &[Vector]) -> Tensor4 {
        self.riemann.in_frame(frame)
    }
}

/// Vectors orthonormal with respect to a fixed metric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoFrame {
    pub vectors: Vec<Vector>,
    pub metric: Mat,
}

impl OrthoFrame {
    pub fn empty(metric: Mat) -> Self {
        OrthoFrame {
            vectors: Vec::new(),
            metric,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Largest `|g(e_a, e_b) − δ_ab|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, u) in self.vectors.iter().enumerate() {
            for (b, v) in self.vectors.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((inner(&self.metric, u, v) - target).abs());
            }
        }
        worst
    }

    /// Largest `|g(u, v)|` across the two frames.
    pub fn cross_defect(&self, other: &OrthoFrame) -> f64 {
        let mut worst = 0.0f64;
        for u in &self.vectors {
            for v in &other.vectors {
                worst = worst.max(inner(&self.metric, u, v).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn inner(g: &Mat, u: &Vector, v: &Vector) -> f64 {
    (u.transpose() * g * v)[(0, 0)]
}

/// Orthonormalizes `vectors` under `g` (modified Gram–Schmidt with one
/// re-orthogonalization pass).
pub fn gram_schmidt(vectors: &[Vector], g: &Mat) -> Result<OrthoFrame> {
    let mut out: Vec<Vector> = Vec::with_capacity(vectors.len());
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != g.nrows() {
            return Err(Error::Dimension(format!(
                "vector {index} has {} components, metric is {}×{}",
                v.len(),
                g.nrows(),
                g.nrows()
            )));
        }
        let norm0 = inner(g, v, v).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = inner(g, e, &w);
                w -= e * c;
            }
        }
        let norm = inner(g, &w, &w).max(0.0).sqrt();
        let residual = if norm0 > 0.0 { norm / norm0 } else { 0.0 };
        if !(residual > DEPENDENCY_TOL) {
            return Err(Error::Dependency { index, residual });
        }
        out.push(w / norm);
    }
    Ok(OrthoFrame {
        vectors: out,
        metric: g.clone(),
    })
}

/// Extends `frame` by `count` g-orthonormal vectors spanning (part of) its
/// orthogonal complement, picking at each step the coordinate direction with
/// the largest residual.
pub fn complete_frame(frame: &[Vector], g: &Mat, count: usize) -> Result<Vec<Vector>> {
    let n = g.nrows();
    let mut basis: Vec<Vector> = frame.to_vec();
    let mut added = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(f64, Vector)> = None;
        for i in 0..n {
            let mut w = Vector::zeros(n);
            w[i] = 1.0;
            let n0 = inner(g, &w, &w).sqrt();
            for _ in 0..2 {
                for e in &basis {
                    let c = inner(g, e, &w);
                    w -= e * c;
                }
            }
            let r = inner(g, &w, &w).max(0.0).sqrt() / n0;
            if best.as_ref().map_or(true, |(b, _)| r > *b) {
                best = Some((r, w));
            }
        }
        let (r, w) = best.expect("n > 0");
        if r < 1e-8 {
            return Err(Error::Dependency {
                index: basis.len(),
                residual: r,
            });
        }
        let norm = inner(g, &w, &w).sqrt();
        let e = w / norm;
        basis.push(e.clone());
        added.push(e);
    }
    Ok(added)
}

/// `2τ = Σ_{i,j} R(e_i, e_j, e_j, e_i)` over a frame (zero for fewer than two vectors).
pub fn scalar_curvature_of_frame(r: &dyn CurvatureTensor, frame: &OrthoFrame) -> f64 {
    let k = frame.len();
    if k < 2 {
        return 0.0;
    }
    scalar_from_components(&r.in_frame(&frame.vectors))
}

/// `Σ_{i≠j} R_ijji` of frame-restricted components.
pub fn scalar_from_components(t: &Tensor4) -> f64 {
    let mut s = 0.0;
    for i in 0..t.n {
        for j in 0..t.n {
            if i != j {
                s += t.get(i, j, j, i);
            }
        }
    }
    s
}

/// `2τ / (k(k−1))`; undefined below two dimensions.
pub fn normalized_scalar_curvature(two_tau: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Dimension(format!(
            "normalized scalar curvature needs at least 2 dimensions, got {k}"
        )));
    }
    Ok(two_tau / (k * (k - 1)) as f64)
}

/// `Σ_i Σ_j R(h_i, v_j, v_j, h_i)`.
pub fn mixed_scalar(r: &dyn CurvatureTensor, horizontal: &OrthoFrame, vertical: &OrthoFrame) -> f64 {
    let mut s = 0.0;
    for h in &horizontal.vectors {
        for v in &vertical.vectors {
            s += r.eval(h, v, v, h);
        }
    }
    s
}
