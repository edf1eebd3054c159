//! Riemannian maps and submersions between charts: differentials, splits,
//! the second fundamental form of a map, O'Neill tensors and the Gauss-type
//! curvature relations.

use nalgebra::SVD;

use crate::casorati::{CoeffArray, Coefficients, Symmetry};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{
    complete_frame, gram_schmidt, inner, Connection, Domain, Mat, MetricChart, MetricJet, OrthoFrame, Tensor3,
    Tensor4, Vector,
};
use crate::jet::Jet2;

/// Singular values at or below this are treated as zero.
pub const KERNEL_THRESHOLD: f64 = 1e-8;
/// Isometry violation above which a map is rejected.
pub const ISOMETRY_TOL: f64 = 1e-6;
/// Step for central differences of tensor fields.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapMode {
    RiemannianMap,
    RiemannianSubmersion,
}

/// A smooth map between charts given by closed-form components.
#[derive(Clone, Debug)]
pub struct SmoothMap {
    pub source: MetricChart,
    pub target: MetricChart,
    components: Vec<Expr>,
    pub mode: MapMode,
    /// Declared rank `s` of the differential.
    pub rank: usize,
}

/// Value, Jacobian and component Hessians of the map at a point.
#[derive(Clone, Debug)]
pub struct MapJet {
    pub y: Vec<f64>,
    /// `n₂ × n₁`, `jac[(a, i)] = ∂_i F^a`
    pub jac: Mat,
    /// `hess[a][(i, j)] = ∂_i ∂_j F^a`
    pub hess: Vec<Mat>,
}

impl SmoothMap {
    pub fn new(source: MetricChart, target: MetricChart, components: Vec<Expr>, mode: MapMode, rank: usize) -> Result<Self> {
        if components.len() != target.dim() {
            return Err(Error::Dimension(format!(
                "map has {} components, target has dimension {}",
                components.len(),
                target.dim()
            )));
        }
        if rank > source.dim().min(target.dim()) {
            return Err(Error::Dimension(format!("declared rank {rank} exceeds the chart dimensions")));
        }
        if mode == MapMode::RiemannianSubmersion && rank != target.dim() {
            return Err(Error::Dimension(format!(
                "a submersion onto a {}-dimensional target must have rank {}",
                target.dim(),
                target.dim()
            )));
        }
        Ok(SmoothMap {
            source,
            target,
            components,
            mode,
            rank,
        })
    }

    pub fn parse(source: MetricChart, target: MetricChart, components: &[String], mode: MapMode, rank: usize) -> Result<Self> {
        let names = source.coord_names();
        let comps = components
            .iter()
            .map(|c| Expr::parse(c, &names))
            .collect::<Result<Vec<_>>>()?;
        Self::new(source, target, comps, mode, rank)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.source.domain.check(x)?;
        Ok(self.components.iter().map(|c| c.eval(x)).collect())
    }

    pub fn jet(&self, x: &[f64]) -> Result<MapJet> {
        self.source.domain.check(x)?;
        let n1 = self.source.dim();
        let seeds = Jet2::seed(x);
        let jets: Vec<Jet2<f64>> = self.components.iter().map(|c| c.eval(&seeds)).collect();
        let y: Vec<f64> = jets.iter().map(|j| j.value).collect();
        self.target.domain.check(&y)?;
        Ok(MapJet {
            jac: Mat::from_fn(jets.len(), n1, |a, i| jets[a].grad[i]),
            hess: jets
                .iter()
                .map(|j| Mat::from_fn(n1, n1, |i, k| j.hess[i][k]))
                .collect(),
            y,
        })
    }
}

/// Orthonormal frames adapted to `ker F∗ ⊕ (ker F∗)^⊥` in the source and
/// `range F∗ ⊕ (range F∗)^⊥` in the target.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSplit {
    pub vertical: OrthoFrame,
    pub horizontal: OrthoFrame,
    pub range: OrthoFrame,
    pub range_perp: OrthoFrame,
}

impl SceneSplit {
    pub fn s(&self) -> usize {
        self.horizontal.len()
    }
    pub fn l(&self) -> usize {
        self.vertical.len()
    }

    /// Rotates the vertical and horizontal frames within their spans by the
    /// given orthogonal matrices; the range frame follows the horizontal one.
    pub fn rotated(&self, qv: &Mat, qh: &Mat, jac: &Mat) -> SceneSplit {
        let rot = |f: &OrthoFrame, q: &Mat| OrthoFrame {
            vectors: (0..f.len())
                .map(|p| (0..f.len()).fold(Vector::zeros(f.metric.nrows()), |acc, i| acc + &f.vectors[i] * q[(i, p)]))
                .collect(),
            metric: f.metric.clone(),
        };
        let horizontal = rot(&self.horizontal, qh);
        let range = OrthoFrame {
            vectors: horizontal.vectors.iter().map(|h| jac * h).collect(),
            metric: self.range.metric.clone(),
        };
        SceneSplit {
            vertical: rot(&self.vertical, qv),
            horizontal,
            range,
            range_perp: self.range_perp.clone(),
        }
    }
}

/// Everything computed about a map at one source point.
#[derive(Clone, Debug)]
pub struct MapPoint {
    pub x: Vec<f64>,
    pub jet: MapJet,
    pub source_jet: MetricJet,
    pub source: Connection,
    pub target: Connection,
    pub singular_values: Vec<f64>,
    pub split: SceneSplit,
    pub isometry_defect: f64,
    pub mode: MapMode,
}

/// Differential of the map at `x` with its adapted split.
pub fn differential(map: &SmoothMap, x: &[f64]) -> Result<MapPoint> {
    let jet = map.jet(x)?;
    let source_jet = map.source.metric_jet(x)?;
    let source = Connection::from_jet(&source_jet)?;
    let target = Connection::from_jet(&map.target.metric_jet(&jet.y)?)?;
    let (n1, n2) = (map.source.dim(), map.target.dim());

    // pad to square so the SVD returns a full set of right singular vectors
    let rows = n2.max(n1);
    let mut padded = Mat::zeros(rows, n1);
    padded.view_mut((0, 0), (n2, n1)).copy_from(&jet.jac);
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let found = singular_values.iter().filter(|&&s| s > KERNEL_THRESHOLD).count();
    if found != map.rank {
        return Err(Error::Rank {
            expected: map.rank,
            found,
        });
    }
    let kernel: Vec<Vector> = order[found..]
        .iter()
        .map(|&i| v_t.row(i).transpose().into_owned())
        .collect();
    let vertical = gram_schmidt(&kernel, &source.g)?;
    let horizontal = OrthoFrame {
        vectors: complete_frame(&vertical.vectors, &source.g, n1 - vertical.len())?,
        metric: source.g.clone(),
    };
    let range = OrthoFrame {
        vectors: horizontal.vectors.iter().map(|h| &jet.jac * h).collect(),
        metric: target.g.clone(),
    };
    let isometry_defect = range.orthonormality_defect();
    if isometry_defect > ISOMETRY_TOL {
        return Err(Error::NotRiemannian {
            violation: isometry_defect,
        });
    }
    let range_perp = OrthoFrame {
        vectors: complete_frame(&range.vectors, &target.g, n2 - range.len())?,
        metric: target.g.clone(),
    };
    Ok(MapPoint {
        x: x.to_vec(),
        jet,
        source_jet,
        source,
        target,
        singular_values,
        split: SceneSplit {
            vertical,
            horizontal,
            range,
            range_perp,
        },
        isometry_defect,
        mode: map.mode,
    })
}

/// `(∇F∗)^a_ij = ∂_ij F^a − Γ₁^k_ij ∂_k F^a + Γ₂^a_bc ∂_i F^b ∂_j F^c`, one
/// `n₁ × n₁` matrix per target component `a`.
pub fn map_hessian(mp: &MapPoint) -> Vec<Mat> {
    let n1 = mp.source.g.nrows();
    let n2 = mp.target.g.nrows();
    let jac = &mp.jet.jac;
    let g1 = &mp.source.gamma;
    let g2 = &mp.target.gamma;
    (0..n2)
        .map(|a| {
            Mat::from_fn(n1, n1, |i, j| {
                let mut v = mp.jet.hess[a][(i, j)];
                for k in 0..n1 {
                    v -= g1.get(k, i, j) * jac[(a, k)];
                }
                for b in 0..n2 {
                    for c in 0..n2 {
                        v += g2.get(a, b, c) * jac[(b, i)] * jac[(c, j)];
                    }
                }
                v
            })
        })
        .collect()
}

fn hessian_apply(t: &[Mat], u: &Vector, v: &Vector) -> Vector {
    Vector::from_fn(t.len(), |a, _| (u.transpose() * &t[a] * v)[(0, 0)])
}

/// `β_ij = (∇F∗)(h_i, h_j)` as target vectors.
pub fn beta_vectors(mp: &MapPoint, split: &SceneSplit) -> Vec<Vec<Vector>> {
    let t = map_hessian(mp);
    let h = &split.horizontal.vectors;
    h.iter()
        .map(|hi| h.iter().map(|hj| hessian_apply(&t, hi, hj)).collect())
        .collect()
}

/// `B^α_ij = g₂((∇F∗)(h_i, h_j), V_α)`.
pub fn second_fundamental_form(mp: &MapPoint, split: &SceneSplit) -> Result<Coefficients> {
    let beta = beta_vectors(mp, split);
    let s = split.s();
    let g2 = &mp.target.g;
    let slices = split
        .range_perp
        .vectors
        .iter()
        .map(|va| (0..s * s).map(|k| inner(g2, &beta[k / s][k % s], va)).collect())
        .collect();
    CoeffArray::new(s.max(1), slices, Symmetry::Symmetric)
}

/// Horizontal projector of a submersion and its coordinate derivatives.
#[derive(Clone, Debug)]
pub struct Projector {
    pub p: Mat,
    pub dp: Vec<Mat>,
}

/// `P = G⁻¹Jᵀ(JG⁻¹Jᵀ)⁻¹J` and `∂_k P` by the product rule.
pub fn horizontal_projector(metric: &MetricJet, jet: &MapJet) -> Result<Projector> {
    let n1 = metric.g.nrows();
    let n2 = jet.jac.nrows();
    let k = metric
        .g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("source metric is singular".into()))?;
    let j = &jet.jac;
    let m = j * &k * j.transpose();
    let nm = m
        .try_inverse()
        .ok_or_else(|| Error::Rank {
            expected: n2,
            found: n2 - 1,
        })?;
    let p = &k * j.transpose() * &nm * j;
    let dp = (0..n1)
        .map(|q| {
            let dk = -(&k * &metric.dg[q] * &k);
            let dj = Mat::from_fn(n2, n1, |a, i| jet.hess[a][(i, q)]);
            let dm = &dj * &k * j.transpose() + j * &dk * j.transpose() + j * &k * dj.transpose();
            let dn = -(&nm * dm * &nm);
            &dk * j.transpose() * &nm * j
                + &k * dj.transpose() * &nm * j
                + &k * j.transpose() * dn * j
                + &k * j.transpose() * &nm * dj
        })
        .collect();
    Ok(Projector { p, dp })
}

/// O'Neill tensors as (1,2) coordinate fields: `t.get(m, i, j) = (T_{∂_i} ∂_j)^m`.
#[derive(Clone, Debug)]
pub struct OneillFields {
    pub t: Tensor3,
    pub a: Tensor3,
}

fn oneill_from(proj: &Projector, gamma: &Tensor3) -> OneillFields {
    let n = proj.p.nrows();
    let id = Mat::identity(n, n);
    let p = &proj.p;
    let pv = &id - p;
    let dp_along = |w: &Vector| proj.dp.iter().enumerate().fold(Mat::zeros(n, n), |acc, (k, d)| acc + d * w[k]);
    let mut t = Tensor3::zeros(n);
    let mut a = Tensor3::zeros(n);
    for i in 0..n {
        let e_i = id.column(i).into_owned();
        let he = p * &e_i;
        let ve = &e_i - &he;
        let dph = dp_along(&he);
        let dpv = dp_along(&ve);
        for j in 0..n {
            let f = id.column(j).into_owned();
            let hf = p * &f;
            let vf = &f - &hf;
            // A_E F = v∇_{hE}(hF) + h∇_{hE}(vF), fields extended as P(x)F, (I−P(x))F
            let av = &pv * (&dph * &f + gamma.apply(&he, &hf)) + p * (-(&dph * &f) + gamma.apply(&he, &vf));
            // T_E F = h∇_{vE}(vF) + v∇_{vE}(hF)
            let tv = p * (-(&dpv * &f) + gamma.apply(&ve, &vf)) + &pv * (&dpv * &f + gamma.apply(&ve, &hf));
            for m in 0..n {
                a.set(m, i, j, av[m]);
                t.set(m, i, j, tv[m]);
            }
        }
    }
    OneillFields { t, a }
}

/// O'Neill `T` and `A` fields of a submersion at `x`.
pub fn oneill_fields(map: &SmoothMap, x: &[f64]) -> Result<OneillFields> {
    let jet = map.jet(x)?;
    let metric = map.source.metric_jet(x)?;
    let conn = Connection::from_jet(&metric)?;
    Ok(oneill_from(&horizontal_projector(&metric, &jet)?, &conn.gamma))
}

fn require_submersion(mp: &MapPoint) -> Result<()> {
    if mp.mode != MapMode::RiemannianSubmersion {
        return Err(Error::Config("O'Neill tensors need a Riemannian submersion".into()));
    }
    Ok(())
}

impl MapPoint {
    pub fn projector(&self) -> Result<Projector> {
        horizontal_projector(&self.source_jet, &self.jet)
    }

    pub fn oneill(&self) -> Result<OneillFields> {
        require_submersion(self)?;
        Ok(oneill_from(&self.projector()?, &self.source.gamma))
    }
}

/// `T^α_ij = g₁(T_{v_i} v_j, h_α)`, symmetric in `i, j`.
pub fn oneill_t(mp: &MapPoint, fields: &OneillFields, split: &SceneSplit) -> Result<Coefficients> {
    let g = &mp.source.g;
    let v = &split.vertical.vectors;
    let l = v.len();
    let tv: Vec<Vec<Vector>> = v.iter().map(|a| v.iter().map(|b| fields.t.apply(a, b)).collect()).collect();
    let slices = split
        .horizontal
        .vectors
        .iter()
        .map(|h| (0..l * l).map(|k| inner(g, &tv[k / l][k % l], h)).collect())
        .collect();
    CoeffArray::new(l.max(1), slices, Symmetry::Symmetric)
}

/// `A^α_ij = g₁(A_{h_i} h_j, v_α)`, skew in `i, j`.
pub fn oneill_a(mp: &MapPoint, fields: &OneillFields, split: &SceneSplit) -> Result<Coefficients> {
    let g = &mp.source.g;
    let h = &split.horizontal.vectors;
    let s = h.len();
    let ah: Vec<Vec<Vector>> = h.iter().map(|a| h.iter().map(|b| fields.a.apply(a, b)).collect()).collect();
    let slices = split
        .vertical
        .vectors
        .iter()
        .map(|v| (0..s * s).map(|k| inner(g, &ah[k / s][k % s], v)).collect())
        .collect();
    CoeffArray::new(s.max(1), slices, Symmetry::Skew)
}

fn rel(scale: f64) -> f64 {
    scale.max(1.0)
}

/// Largest `|R₂(F∗h_i, …) − R₁(h_i, …) − g₂(β_ik, β_jl) + g₂(β_il, β_jk)|`
/// over horizontal quadruples, using the supplied `β`.
pub fn gauss_residual_map_from(mp: &MapPoint, split: &SceneSplit, beta: &[Vec<Vector>]) -> f64 {
    let h = &split.horizontal.vectors;
    let r1 = mp.source.riemann().in_frame(h);
    let r2 = mp.target.riemann().in_frame(&split.range.vectors);
    let g2 = &mp.target.g;
    let s = h.len();
    let mut worst = 0.0f64;
    for i in 0..s {
        for j in 0..s {
            for k in 0..s {
                for l in 0..s {
                    let rhs = r1.get(i, j, k, l) + inner(g2, &beta[i][k], &beta[j][l]) - inner(g2, &beta[i][l], &beta[j][k]);
                    worst = worst.max((r2.get(i, j, k, l) - rhs).abs());
                }
            }
        }
    }
    worst
}

/// Gauss equation residual of a Riemannian map.
pub fn gauss_residual_map(mp: &MapPoint, split: &SceneSplit) -> f64 {
    gauss_residual_map_from(mp, split, &beta_vectors(mp, split))
}

/// Curvature of the fibers on the vertical frame, from the ambient curvature
/// and `T` as the fibers' second fundamental form.
pub fn fiber_curvature(mp: &MapPoint, fields: &OneillFields, vectors: &[Vector]) -> Tensor4 {
    let g = &mp.source.g;
    let r1 = mp.source.riemann().in_frame(vectors);
    let t: Vec<Vec<Vector>> = vectors
        .iter()
        .map(|a| vectors.iter().map(|b| fields.t.apply(a, b)).collect())
        .collect();
    Tensor4::from_fn(vectors.len(), |a, b, c, d| {
        r1.get(a, b, c, d) + inner(g, &t[a][d], &t[b][c]) - inner(g, &t[a][c], &t[b][d])
    })
}

/// Curvature of the horizontal distribution reconstructed from the ambient
/// curvature and `A`:
/// `R^⊥ = R₁ − 2g(A₁₂, A₃₄) + g(A₂₃, A₁₄) − g(A₁₃, A₂₄)`.
pub fn horizontal_curvature(mp: &MapPoint, fields: &OneillFields, vectors: &[Vector]) -> Tensor4 {
    let g = &mp.source.g;
    let r1 = mp.source.riemann().in_frame(vectors);
    let a: Vec<Vec<Vector>> = vectors
        .iter()
        .map(|x| vectors.iter().map(|y| fields.a.apply(x, y)).collect())
        .collect();
    Tensor4::from_fn(vectors.len(), |i, j, k, l| {
        r1.get(i, j, k, l) - 2.0 * inner(g, &a[i][j], &a[k][l]) + inner(g, &a[j][k], &a[i][l])
            - inner(g, &a[i][k], &a[j][l])
    })
}

/// Residuals of the three submersion curvature identities.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmersionResiduals {
    /// Symmetry and Bianchi defect of the fiber curvature rebuilt from `T`.
    pub vertical: f64,
    /// Reconstructed horizontal curvature against the base curvature.
    pub horizontal: f64,
    /// Mixed identity with `∇T` and `∇A`.
    pub mixed: f64,
}

/// `∂_k` of the O'Neill fields by central differences.
fn oneill_derivatives(map: &SmoothMap, x: &[f64]) -> Result<Vec<OneillFields>> {
    (0..x.len())
        .map(|k| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += FD_STEP;
            xm[k] -= FD_STEP;
            let fp = oneill_fields(map, &xp)?;
            let fm = oneill_fields(map, &xm)?;
            let d = |p: &Tensor3, m: &Tensor3| Tensor3 {
                n: p.n,
                data: p.data.iter().zip(&m.data).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect(),
            };
            Ok(OneillFields {
                t: d(&fp.t, &fm.t),
                a: d(&fp.a, &fm.a),
            })
        })
        .collect()
}

/// `(∇_W S)(E, F)` for a (1,2) field `S` with coordinate derivatives `ds`.
fn covariant_derivative(s: &Tensor3, ds: &[&Tensor3], gamma: &Tensor3, w: &Vector, e: &Vector, f: &Vector) -> Vector {
    let n = s.n;
    // ∇_W (S(E,F)) − S(∇_W E, F) − S(E, ∇_W F) with E, F coordinate-constant
    let mut out = Vector::zeros(n);
    for k in 0..n {
        if w[k] == 0.0 {
            continue;
        }
        let dsk = ds[k].apply(e, f);
        let sef = s.apply(e, f);
        let gk = |v: &Vector| Vector::from_fn(n, |m, _| (0..n).map(|p| gamma.get(m, k, p) * v[p]).sum());
        let term = dsk + gk(&sef) - s.apply(&gk(e), f) - s.apply(e, &gk(f));
        out += term * w[k];
    }
    out
}

pub fn gauss_residual_submersion(map: &SmoothMap, mp: &MapPoint, split: &SceneSplit) -> Result<SubmersionResiduals> {
    let fields = mp.oneill()?;
    let g = &mp.source.g;
    let rv = fiber_curvature(mp, &fields, &split.vertical.vectors);
    let (sym, bianchi) = rv.symmetry_residuals();
    let vertical = sym.max(bianchi);

    let h = &split.horizontal.vectors;
    let rh = horizontal_curvature(mp, &fields, h);
    let r2 = mp.target.riemann().in_frame(&split.range.vectors);
    let scale = rel(r2.max_abs());
    let horizontal = rh
        .data
        .iter()
        .zip(&r2.data)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale;

    let derivs = oneill_derivatives(map, &mp.x)?;
    let dt: Vec<&Tensor3> = derivs.iter().map(|d| &d.t).collect();
    let da: Vec<&Tensor3> = derivs.iter().map(|d| &d.a).collect();
    let r1 = mp.source.riemann();
    let v = &split.vertical.vectors;
    let mut mixed = 0.0f64;
    let mut mscale = 1.0f64;
    for x1 in h {
        for f1 in v {
            for f2 in v {
                for x2 in h {
                    let lhs = r1.in_frame(&[x1.clone(), f1.clone(), f2.clone(), x2.clone()]).get(0, 1, 2, 3);
                    let nt = covariant_derivative(&fields.t, &dt, &mp.source.gamma, x1, f1, f2);
                    let na = covariant_derivative(&fields.a, &da, &mp.source.gamma, f1, x1, x2);
                    let rhs = inner(g, &nt, x2) + inner(g, &na, f2)
                        - inner(g, &fields.t.apply(f1, x1), &fields.t.apply(f2, x2))
                        + inner(g, &fields.a.apply(x2, f2), &fields.a.apply(x1, f1));
                    mscale = mscale.max(lhs.abs());
                    mixed = mixed.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(SubmersionResiduals {
        vertical,
        horizontal,
        mixed: mixed / mscale,
    })
}

/// Vertical part of brackets of horizontal fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BracketCheck {
    /// Largest `|v[X, Y]|`.
    pub vertical_max: f64,
    /// Largest `|v[X, Y] − 2A_X Y|`.
    pub consistency: f64,
}

/// Brackets over horizontal frame pairs, with the extensions `X(x) = P(x)X`
/// differentiated by central differences of `P`.
pub fn bracket_check(map: &SmoothMap, mp: &MapPoint, split: &SceneSplit) -> Result<BracketCheck> {
    let fields = mp.oneill()?;
    let n = mp.x.len();
    let p_at = |x: &[f64]| -> Result<Mat> {
        let jet = map.jet(x)?;
        let g = map.source.metric_at(x)?;
        let k = g.try_inverse().ok_or_else(|| Error::Degenerate("source metric is singular".into()))?;
        let m = (&jet.jac * &k * jet.jac.transpose())
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("differential lost rank".into()))?;
        Ok(&k * jet.jac.transpose() * m * &jet.jac)
    };
    let mut dp = Vec::with_capacity(n);
    for k in 0..n {
        let mut xp = mp.x.clone();
        let mut xm = mp.x.clone();
        xp[k] += FD_STEP;
        xm[k] -= FD_STEP;
        dp.push((p_at(&xp)? - p_at(&xm)?) / (2.0 * FD_STEP));
    }
    let p = p_at(&mp.x)?;
    let pv = Mat::identity(n, n) - &p;
    let along = |w: &Vector| dp.iter().enumerate().fold(Mat::zeros(n, n), |acc, (k, d)| acc + d * w[k]);
    let g = &mp.source.g;
    let h = &split.horizontal.vectors;
    let mut out = BracketCheck {
        vertical_max: 0.0,
        consistency: 0.0,
    };
    for x in h {
        for y in h {
            let vb = &pv * (along(x) * y - along(y) * x);
            let diff = &vb - fields.a.apply(x, y) * 2.0;
            out.vertical_max = out.vertical_max.max(inner(g, &vb, &vb).sqrt());
            out.consistency = out.consistency.max(inner(g, &diff, &diff).sqrt());
        }
    }
    Ok(out)
}

/// A local parametrization of the fibers, for an independent fiber-curvature path.
///
/// Metric and embedding expressions are written in the fiber coordinates
/// followed by the level parameters.
#[derive(Clone, Debug)]
pub struct FiberChart {
    pub coords: Vec<String>,
    pub levels: Vec<String>,
    metric: Vec<Expr>,
    embedding: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiberCheck {
    pub x: Vec<f64>,
    /// `max |g_fiber − g₁(∂E, ∂E)|`.
    pub metric_defect: f64,
    /// Relative defect between the chart curvature and the `T`-based one.
    pub curvature_defect: f64,
}

impl FiberChart {
    pub fn parse(coords: Vec<String>, levels: Vec<String>, metric: &[Vec<String>], embedding: &[String]) -> Result<Self> {
        let names: Vec<&str> = coords.iter().chain(&levels).map(String::as_str).collect();
        let l = coords.len();
        if metric.len() != l || metric.iter().any(|r| r.len() != l) {
            return Err(Error::Dimension("fiber metric must be square in the fiber coordinates".into()));
        }
        let metric = metric
            .iter()
            .flatten()
            .map(|s| Expr::parse(s, &names))
            .collect::<Result<Vec<_>>>()?;
        let embedding = embedding
            .iter()
            .map(|s| Expr::parse(s, &names))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiberChart {
            coords,
            levels,
            metric,
            embedding,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn chart_at(&self, level: &[f64]) -> Result<MetricChart> {
        let l = self.dim();
        let comps = self.metric.iter().map(|e| e.bind(l, level)).collect();
        MetricChart::new("fiber", self.coords.clone(), Domain::unbounded(l), comps)
    }

    /// Source point and the embedded coordinate vectors `∂E/∂u_a`.
    pub fn embed(&self, u: &[f64], level: &[f64]) -> Result<(Vec<f64>, Vec<Vector>)> {
        if u.len() != self.dim() || level.len() != self.levels.len() {
            return Err(Error::Dimension("fiber point or level has the wrong length".into()));
        }
        let l = self.dim();
        let seeds = Jet2::seed(u);
        let jets: Vec<Jet2<f64>> = self
            .embedding
            .iter()
            .map(|e| e.bind(l, level).eval(&seeds))
            .collect();
        let x = jets.iter().map(|j| j.value).collect();
        let tangents = (0..l)
            .map(|a| Vector::from_fn(jets.len(), |i, _| jets[i].grad[a]))
            .collect();
        Ok((x, tangents))
    }

    /// Compares the fiber chart curvature with the `T`-based fiber curvature.
    pub fn cross_check(&self, map: &SmoothMap, u: &[f64], level: &[f64]) -> Result<FiberCheck> {
        let (x, tangents) = self.embed(u, level)?;
        if x.len() != map.source.dim() {
            return Err(Error::Dimension("fiber embedding does not land in the source chart".into()));
        }
        let mp = differential(map, &x)?;
        let fields = mp.oneill()?;
        let chart = self.chart_at(level)?;
        let cp = crate::geometry::riemann(&chart, u)?;
        let l = self.dim();
        let mut metric_defect = 0.0f64;
        for a in 0..l {
            for b in 0..l {
                metric_defect = metric_defect.max((cp.metric[(a, b)] - inner(&mp.source.g, &tangents[a], &tangents[b])).abs());
            }
        }
        let rv = fiber_curvature(&mp, &fields, &tangents);
        let scale = rel(cp.riemann.max_abs());
        let curvature_defect = rv
            .data
            .iter()
            .zip(&cp.riemann.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        Ok(FiberCheck {
            x,
            metric_defect,
            curvature_defect,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casorati::casorati;
    use crate::charts::builtin_chart;
    use crate::geometry::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn projection() -> SmoothMap {
        SmoothMap::parse(
            MetricChart::flat(8),
            MetricChart::flat(4),
            &s(&["x1", "x2", "x3", "x4"]),
            MapMode::RiemannianSubmersion,
            4,
        )
        .unwrap()
    }

    fn radial() -> SmoothMap {
        let target = MetricChart::parse("line", s(&["r"]), Domain { lo: vec![0.0], hi: vec![f64::INFINITY] }, &[s(&["1"])]).unwrap();
        SmoothMap::parse(MetricChart::flat(4), target, &s(&["norm(x1, x2, x3, x4)"]), MapMode::RiemannianSubmersion, 1).unwrap()
    }

    fn hopf() -> SmoothMap {
        let target = MetricChart::parse(
            "hopf-base",
            s(&["y1", "y2", "y3"]),
            Domain::unbounded(3),
            &[
                s(&["1/(4*norm(y1, y2, y3))", "0", "0"]),
                s(&["0", "1/(4*norm(y1, y2, y3))", "0"]),
                s(&["0", "0", "1/(4*norm(y1, y2, y3))"]),
            ],
        )
        .unwrap();
        SmoothMap::parse(
            MetricChart::flat(4),
            target,
            &s(&["x1^2 + x2^2 - x3^2 - x4^2", "2*(x1*x3 + x2*x4)", "2*(x2*x3 - x1*x4)"]),
            MapMode::RiemannianSubmersion,
            3,
        )
        .unwrap()
    }

    fn paraboloid() -> SmoothMap {
        let source = MetricChart::parse(
            "graph",
            s(&["u", "v"]),
            Domain::unbounded(2),
            &[s(&["1 + u^2", "u*v"]), s(&["u*v", "1 + v^2"])],
        )
        .unwrap();
        SmoothMap::parse(source, MetricChart::flat(3), &s(&["u", "v", "(u^2 + v^2)/2"]), MapMode::RiemannianMap, 2).unwrap()
    }

    #[test]
    fn projection_split_and_tensors_vanish() {
        let map = projection();
        let x = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8];
        let mp = differential(&map, &x).unwrap();
        assert_eq!(mp.split.l(), 4);
        for v in &mp.split.vertical.vectors {
            assert!(v.rows(0, 4).norm() < 1e-12);
        }
        assert!(mp.isometry_defect < 1e-12);
        let f = mp.oneill().unwrap();
        assert_eq!(oneill_t(&mp, &f, &mp.split).unwrap().norm_sq(), 0.0);
        assert_eq!(oneill_a(&mp, &f, &mp.split).unwrap().norm_sq(), 0.0);
        let r = gauss_residual_submersion(&map, &mp, &mp.split).unwrap();
        assert!(r.vertical == 0.0 && r.horizontal == 0.0 && r.mixed < 1e-12);
        let b = bracket_check(&map, &mp, &mp.split).unwrap();
        assert!(b.consistency < 1e-12 && b.vertical_max < 1e-12);
    }

    #[test]
    fn radial_split_and_umbilical_t() {
        let map = radial();
        for r in [0.5, 1.0, 2.0] {
            let dir = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0]).normalize();
            let x: Vec<f64> = (dir.clone() * r).iter().cloned().collect();
            let mp = differential(&map, &x).unwrap();
            let h = &mp.split.horizontal.vectors[0];
            assert!((h.dot(&dir).abs() - 1.0).abs() < 1e-12);
            let f = mp.oneill().unwrap();
            let t = oneill_t(&mp, &f, &mp.split).unwrap();
            let sign = h.dot(&dir).signum();
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { -sign / r } else { 0.0 };
                    assert!((t.get(0, i, j) - want).abs() < 1e-10);
                }
            }
            assert!((t.norm_sq() - 3.0 / (r * r)).abs() < 1e-10);
            assert!((casorati(&t) - 1.0 / (r * r)).abs() < 1e-10);
            let rv = fiber_curvature(&mp, &f, &mp.split.vertical.vectors);
            let v = &mp.split.vertical.vectors;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!((rv.get(i, j, j, i) - 1.0 / (r * r)).abs() < 1e-10);
                    }
                }
            }
            let res = gauss_residual_submersion(&map, &mp, &mp.split).unwrap();
            assert!(res.vertical < 1e-9 && res.horizontal < 1e-9 && res.mixed < 1e-6, "{res:?}");
            assert!(v.len() == 3);
        }
    }

    #[test]
    fn radial_fiber_chart_cross_check() {
        let fc = FiberChart::parse(
            s(&["psi", "theta", "phi"]),
            s(&["rho"]),
            &[
                s(&["rho^2", "0", "0"]),
                s(&["0", "rho^2*sin(psi)^2", "0"]),
                s(&["0", "0", "rho^2*sin(psi)^2*sin(theta)^2"]),
            ],
            &s(&[
                "rho*cos(psi)",
                "rho*sin(psi)*cos(theta)",
                "rho*sin(psi)*sin(theta)*cos(phi)",
                "rho*sin(psi)*sin(theta)*sin(phi)",
            ]),
        )
        .unwrap();
        for r in [0.5, 1.0, 2.0] {
            let c = fc.cross_check(&radial(), &[1.1, 0.7, 2.3], &[r]).unwrap();
            assert!(c.metric_defect < 1e-12);
            assert!(c.curvature_defect < 1e-9, "{c:?}");
        }
    }

    #[test]
    fn hopf_has_nonzero_a_and_consistent_identities() {
        let map = hopf();
        let x = [0.3, -0.4, 0.5, 0.6];
        let mp = differential(&map, &x).unwrap();
        assert_eq!(mp.split.l(), 1);
        assert!(mp.isometry_defect < 1e-12);
        let f = mp.oneill().unwrap();
        let a = oneill_a(&mp, &f, &mp.split).unwrap();
        assert!(a.norm_sq() > 1e-4);
        let res = gauss_residual_submersion(&map, &mp, &mp.split).unwrap();
        assert!(res.horizontal < 1e-8 && res.mixed < 1e-6, "{res:?}");
        let b = bracket_check(&map, &mp, &mp.split).unwrap();
        assert!(b.consistency < 1e-6 && b.vertical_max > 0.1);
    }

    #[test]
    fn mixed_identity_sign_on_hyperbolic_warped_product() {
        // dr² + e^{2r}dθ² → r has K = −1 with T ≠ 0; fixes the sign of the mixed identity
        let source = MetricChart::parse(
            "warped",
            s(&["r", "theta"]),
            Domain::unbounded(2),
            &[s(&["1", "0"]), s(&["0", "exp(2*r)"])],
        )
        .unwrap();
        let map = SmoothMap::parse(source, MetricChart::flat(1), &s(&["r"]), MapMode::RiemannianSubmersion, 1).unwrap();
        let mp = differential(&map, &[0.3, 0.2]).unwrap();
        let res = gauss_residual_submersion(&map, &mp, &mp.split).unwrap();
        assert!(res.mixed < 1e-7, "{res:?}");
    }

    #[test]
    fn alternation_identities() {
        let map = hopf();
        let mp = differential(&map, &[0.7, 0.1, -0.2, 0.4]).unwrap();
        let f = mp.oneill().unwrap();
        let g = &mp.source.g;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let r = |rng: &mut ChaCha8Rng| Vector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let (e, a, b) = (r(&mut rng), r(&mut rng), r(&mut rng));
            for t in [&f.t, &f.a] {
                let lhs = inner(g, &t.apply(&e, &a), &b);
                let rhs = -inner(g, &a, &t.apply(&e, &b));
                assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn a_field_matches_generic_extension_by_differences() {
        // A_X Y = v∇_X Ỹ for any horizontal extension Ỹ of Y; use P(x)(Y + M(x − p))
        let map = hopf();
        let p = [0.3, -0.4, 0.5, 0.6];
        let mp = differential(&map, &p).unwrap();
        let f = mp.oneill().unwrap();
        let h = &mp.split.horizontal.vectors;
        let (x, y) = (&h[0], &h[1]);
        let m = Mat::from_fn(4, 4, |i, j| ((i * 3 + j) as f64).sin());
        let field = |q: &[f64]| -> Vector {
            let pm = {
                let jet = map.jet(q).unwrap();
                let me = map.source.metric_jet(q).unwrap();
                horizontal_projector(&me, &jet).unwrap().p
            };
            let d = Vector::from_fn(4, |i, _| q[i] - p[i]);
            pm * (y + &m * d)
        };
        let step = 1e-5;
        let mut dy = Vector::zeros(4);
        for k in 0..4 {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[k] += step;
            b[k] -= step;
            dy += (field(&a) - field(&b)) / (2.0 * step) * x[k];
        }
        let nabla = dy + mp.source.gamma.apply(x, y);
        let pv = Mat::identity(4, 4) - mp.projector().unwrap().p;
        assert!((pv * nabla - f.a.apply(x, y)).norm() < 1e-7);
    }

    #[test]
    fn tensor_norms_invariant_under_split_rotation() {
        let map = hopf();
        let mp = differential(&map, &[0.3, -0.4, 0.5, 0.6]).unwrap();
        let f = mp.oneill().unwrap();
        let th = 0.7f64;
        let qh = Mat::from_row_slice(3, 3, &[th.cos(), -th.sin(), 0.0, th.sin(), th.cos(), 0.0, 0.0, 0.0, 1.0]);
        let qv = Mat::from_row_slice(1, 1, &[-1.0]);
        let rot = mp.split.rotated(&qv, &qh, &mp.jet.jac);
        let a0 = oneill_a(&mp, &f, &mp.split).unwrap().norm_sq();
        let a1 = oneill_a(&mp, &f, &rot).unwrap().norm_sq();
        assert!((a0 - a1).abs() < 1e-9);
        let t0 = oneill_t(&mp, &f, &mp.split).unwrap().norm_sq();
        let t1 = oneill_t(&mp, &f, &rot).unwrap().norm_sq();
        assert!((t0 - t1).abs() < 1e-9);
    }

    #[test]
    fn map_mode_examples() {
        let emb = SmoothMap::parse(MetricChart::flat(2), MetricChart::flat(4), &s(&["x1", "x2", "0", "0"]), MapMode::RiemannianMap, 2).unwrap();
        let mp = differential(&emb, &[0.2, 0.3]).unwrap();
        assert_eq!(mp.split.l(), 0);
        assert_eq!(mp.split.range_perp.len(), 2);
        assert_eq!(second_fundamental_form(&mp, &mp.split).unwrap().norm_sq(), 0.0);
        assert_eq!(gauss_residual_map(&mp, &mp.split), 0.0);

        let par = paraboloid();
        let mp = differential(&par, &[0.0, 0.0]).unwrap();
        let b = second_fundamental_form(&mp, &mp.split).unwrap();
        let sign = mp.split.range_perp.vectors[0][2].signum();
        assert!((b.get(0, 0, 0) - sign).abs() < 1e-12);
        assert!((b.get(0, 1, 1) - sign).abs() < 1e-12);
        assert!(b.get(0, 0, 1).abs() < 1e-12);
        assert!(gauss_residual_map(&mp, &mp.split) < 1e-6);

        let mut beta = beta_vectors(&mp, &mp.split);
        let va = mp.split.range_perp.vectors[0].clone();
        beta[0][0] += &va * 0.1;
        assert!(gauss_residual_map_from(&mp, &mp.split, &beta) >= 0.005);
    }

    #[test]
    fn errors() {
        let bad_rank = SmoothMap::parse(MetricChart::flat(2), MetricChart::flat(2), &s(&["x1", "0"]), MapMode::RiemannianMap, 2).unwrap();
        assert!(matches!(differential(&bad_rank, &[0.0, 0.0]), Err(Error::Rank { expected: 2, found: 1 })));
        let stretch = SmoothMap::parse(MetricChart::flat(2), MetricChart::flat(2), &s(&["2*x1", "x2"]), MapMode::RiemannianMap, 2).unwrap();
        assert!(matches!(differential(&stretch, &[0.0, 0.0]), Err(Error::NotRiemannian { .. })));
        let sphere = builtin_chart("sphere:1").unwrap();
        let m = SmoothMap::parse(sphere, MetricChart::flat(1), &s(&["theta"]), MapMode::RiemannianSubmersion, 1).unwrap();
        assert!(matches!(differential(&m, &[-1.0, 0.0]), Err(Error::Domain { .. })));
    }
}
