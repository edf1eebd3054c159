//! Pointwise evaluation of the Casorati inequalities with slack reporting and
//! equality diagnostics.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::casorati::{casorati, delta_casorati, hyperplane_extrema, Coefficients, HyperplaneExtrema};
use crate::geometry::{
    mixed_scalar, scalar_from_components, CurvaturePoint, CurvatureTensor, Mat, OrthoFrame, Tensor4, Vector,
};
use crate::maps::{
    bracket_check, fiber_curvature, horizontal_curvature, oneill_a, oneill_t, second_fundamental_form, MapMode,
    MapPoint, SmoothMap,
};
use crate::quaternionic::{decompose_j, JDecomposition, QsfOracle, QuaternionicStructure};
use crate::{Error, Result};

/// Equality tolerance for scenes evaluated against the space-form oracle.
pub const ORACLE_TOL: f64 = 1e-8;
/// Equality tolerance for chart scenes (AD through Christoffel symbols).
pub const CHART_TOL: f64 = 1e-5;
/// How closely chart curvature must match the space-form formula.
pub const SPACE_FORM_TOL: f64 = 1e-6;
/// `‖A‖` below this counts as integrable.
pub const A_ZERO_TOL: f64 = 1e-8;
/// Largest vertical bracket component still counted as integrable.
pub const BRACKET_ZERO_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TheoremId {
    #[serde(rename = "map_3_2")]
    Map,
    #[serde(rename = "vertical_5_2")]
    Vertical,
    #[serde(rename = "horizontal_6_2")]
    Horizontal,
    #[serde(rename = "combined_7_2")]
    Combined,
    #[serde(rename = "lemma_map_3_1")]
    LemmaMap,
    #[serde(rename = "lemma_vertical_5_1")]
    LemmaVertical,
    #[serde(rename = "lemma_horizontal_6_1")]
    LemmaHorizontal,
    #[serde(rename = "lemma_combined_7_1")]
    LemmaCombined,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::Map,
        TheoremId::Vertical,
        TheoremId::Horizontal,
        TheoremId::Combined,
        TheoremId::LemmaMap,
        TheoremId::LemmaVertical,
        TheoremId::LemmaHorizontal,
        TheoremId::LemmaCombined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Map => "map_3_2",
            TheoremId::Vertical => "vertical_5_2",
            TheoremId::Horizontal => "horizontal_6_2",
            TheoremId::Combined => "combined_7_2",
            TheoremId::LemmaMap => "lemma_map_3_1",
            TheoremId::LemmaVertical => "lemma_vertical_5_1",
            TheoremId::LemmaHorizontal => "lemma_horizontal_6_1",
            TheoremId::LemmaCombined => "lemma_combined_7_1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown theorem id `{s}`")))
    }

    pub fn is_lemma(self) -> bool {
        matches!(
            self,
            TheoremId::LemmaMap | TheoremId::LemmaVertical | TheoremId::LemmaHorizontal | TheoremId::LemmaCombined
        )
    }

    /// Whether the theorem concerns a Riemannian map (as opposed to a submersion).
    pub fn is_map(self) -> bool {
        matches!(self, TheoremId::Map | TheoremId::LemmaMap)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Delta,
    DeltaHat,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Delta, Variant::DeltaHat];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Delta => "delta",
            Variant::DeltaHat => "delta_hat",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equality,
    Strict,
    Violated,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Equality => "equality",
            Verdict::Strict => "strict",
            Verdict::Violated => "violated",
        }
    }
}

/// `δ(N)` in the combined inequality. It has no canonical value, so it is
/// always supplied explicitly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaN {
    Zero,
    User(f64),
}

impl DeltaN {
    /// `"zero"` or `"user:<value>"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(DeltaN::Zero);
        }
        if let Some(v) = s.strip_prefix("user:") {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("deltaN `{s}`: `{v}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("deltaN `{s}` is not finite")));
            }
            return Ok(DeltaN::User(v));
        }
        Err(Error::Config(format!("deltaN `{s}`: expected \"zero\" or \"user:<value>\"")))
    }

    pub fn value(self) -> f64 {
        match self {
            DeltaN::Zero => 0.0,
            DeltaN::User(v) => v,
        }
    }
}

impl fmt::Display for DeltaN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaN::Zero => f.write_str("zero"),
            DeltaN::User(v) => write!(f, "user:{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EqualityDiagnostics {
    pub offdiag_max: f64,
    /// `Σ_α min_λ ‖diag(h^α) − (λ, …, λ, 2λ)‖²`.
    pub eigen_pattern_residual: f64,
    /// The same divided by `Σ_α ‖h^α‖²`.
    pub eigen_pattern_residual_normalized: f64,
    /// `(Σ_α ‖(I − uuᵀ) h^α u‖²)^{1/2}` for the distinguished direction `u`.
    pub common_eigendirection_residual: f64,
    pub commutator_max: f64,
    pub a_norm: f64,
    /// Largest vertical part of `[h_i, h_j]` (chart scenes only).
    pub bracket_verticality_residual: Option<f64>,
    /// Largest `|v[h_i, h_j] − 2A_{h_i} h_j|` (chart scenes only).
    pub bracket_a_consistency: Option<f64>,
    pub diagonal: bool,
    pub pattern: bool,
    pub common_eigendirection: bool,
    pub integrable: bool,
}

impl EqualityDiagnostics {
    /// Equality conditions: diagonal shape operators with the
    /// `(λ, …, λ, 2λ)` pattern and vanishing `A`.
    pub fn conditions_met(&self) -> bool {
        self.diagonal && self.pattern && self.integrable
    }
}

/// Orthogonal matrix whose last column is the unit vector `u`.
fn frame_ending_with(u: &[f64]) -> Mat {
    let n = u.len();
    let mut w = Vector::from_column_slice(u);
    w[n - 1] -= 1.0;
    let ww = w.dot(&w);
    let id = Mat::identity(n, n);
    if ww < 1e-30 {
        return id;
    }
    // Householder reflection swapping e_n and u
    id - (&w * w.transpose()) * (2.0 / ww)
}

/// Frame ending with `u` whose first `n − 1` vectors diagonalize a generic
/// combination of the slices compressed to `u^⊥`. Commuting slices come out
/// diagonal, and the choice does not depend on the overall scale of `h`.
fn adapted_frame(h: &Coefficients, u: &[f64]) -> Mat {
    let n = h.n;
    let q = frame_ending_with(u);
    let r = h.rotated(&q);
    let mut m = Mat::zeros(n - 1, n - 1);
    for a in 0..r.codim() {
        let w = 1.0 + 0.618_033_988_749_894_8 * a as f64;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                m[(i, j)] += w * 0.5 * (r.get(a, i, j) + r.get(a, j, i));
            }
        }
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n - 1).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut inner = Mat::identity(n, n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n - 1 {
            inner[(i, col)] = eig.eigenvectors[(i, k)];
        }
    }
    q * inner
}

fn rel_to(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x / scale
    } else {
        0.0
    }
}

/// Diagnostics for the equality cases, computed in a frame whose last vector is
/// the optimizer's minimizing hyperplane normal.
pub fn equality_diagnostics(
    h: &Coefficients,
    extrema: &HyperplaneExtrema,
    a: Option<&Coefficients>,
    bracket: Option<(f64, f64)>,
    tol: f64,
) -> EqualityDiagnostics {
    let n = h.n;
    let q = adapted_frame(h, &extrema.argmin_normal);
    let r = h.rotated(&q);
    let norm_sq = h.norm_sq();
    let mut offdiag = 0.0f64;
    let mut pattern = 0.0;
    let mut eigdir = 0.0;
    for al in 0..r.codim() {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    offdiag = offdiag.max(r.get(al, i, j).abs());
                }
            }
        }
        let d: Vec<f64> = (0..n).map(|i| r.get(al, i, i)).collect();
        // least squares fit of (λ, …, λ, 2λ)
        let lam = (d[..n - 1].iter().sum::<f64>() + 2.0 * d[n - 1]) / (n as f64 + 3.0);
        pattern += d[..n - 1].iter().map(|x| (x - lam).powi(2)).sum::<f64>() + (d[n - 1] - 2.0 * lam).powi(2);
        for i in 0..n - 1 {
            let s = 0.5 * (r.get(al, i, n - 1) + r.get(al, n - 1, i));
            eigdir += s * s;
        }
    }
    let mats: Vec<Mat> = (0..h.codim()).map(|al| h.slice_matrix(al)).collect();
    let mut commutator = 0.0f64;
    for x in 0..mats.len() {
        for y in x + 1..mats.len() {
            commutator = commutator.max((&mats[x] * &mats[y] - &mats[y] * &mats[x]).norm());
        }
    }
    let a_norm = a.map_or(0.0, |a| a.norm_sq().sqrt());
    let eigdir = eigdir.sqrt();
    let scale = norm_sq.sqrt();
    let pattern_norm = rel_to(pattern, norm_sq);
    EqualityDiagnostics {
        offdiag_max: offdiag,
        eigen_pattern_residual: pattern,
        eigen_pattern_residual_normalized: pattern_norm,
        common_eigendirection_residual: eigdir,
        commutator_max: commutator,
        a_norm,
        bracket_verticality_residual: bracket.map(|b| b.0),
        bracket_a_consistency: bracket.map(|b| b.1),
        diagonal: rel_to(offdiag, scale) < tol,
        pattern: pattern_norm < tol,
        common_eigendirection: rel_to(eigdir, scale) < tol,
        integrable: a_norm < A_ZERO_TOL && bracket.is_none_or(|b| b.0 < BRACKET_ZERO_TOL),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem_id: TheoremId,
    pub variant: Variant,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `slack / max(1, |lhs|, |rhs|)`; the verdict is decided on this.
    pub normalized_slack: f64,
    pub verdict: Verdict,
    /// Right-hand side of the lemma form minus that of the theorem form.
    pub assembly_gap: f64,
    /// Named pieces of both sides.
    pub terms: BTreeMap<String, f64>,
    pub diagnostics: EqualityDiagnostics,
}

fn normalized_slack(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / 1f64.max(lhs.abs()).max(rhs.abs())
}

fn verdict(normalized: f64, tol: f64, conditions: bool) -> Verdict {
    if normalized < -tol {
        Verdict::Violated
    } else if normalized.abs() < tol && conditions {
        Verdict::Equality
    } else {
        Verdict::Strict
    }
}

/// Purely algebraic part of the map lemma:
/// `lhs = (‖trace B‖² − ‖B‖²)/(s(s−1))` against `δ_C` and `δ̂_C`.
pub fn algebraic_gap(b: &Coefficients) -> Result<(f64, f64, f64)> {
    let s = b.n;
    let ext = hyperplane_extrema(b)?;
    let lhs = (b.trace_norm_sq() - b.norm_sq()) / (s * (s - 1)) as f64;
    let (d, dh) = delta_casorati(casorati(b), ext.inf_cl, ext.sup_cl, s);
    Ok((lhs, d, dh))
}

/// Casorati data of one fundamental tensor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CasoratiData {
    pub casorati: f64,
    pub delta: f64,
    pub delta_hat: f64,
    pub extrema: HyperplaneExtrema,
}

impl CasoratiData {
    pub fn new(h: &Coefficients) -> Result<Self> {
        let extrema = hyperplane_extrema(h)?;
        let c = casorati(h);
        let (delta, delta_hat) = delta_casorati(c, extrema.inf_cl, extrema.sup_cl, h.n);
        Ok(CasoratiData {
            casorati: c,
            delta,
            delta_hat,
            extrema,
        })
    }

    fn value(&self, v: Variant) -> f64 {
        match v {
            Variant::Delta => self.delta,
            Variant::DeltaHat => self.delta_hat,
        }
    }
}

fn casorati_if(h: &Coefficients) -> Result<Option<CasoratiData>> {
    if h.n < 3 {
        return Ok(None);
    }
    CasoratiData::new(h).map(Some)
}

/// Everything the map inequality needs at one point.
#[derive(Clone, Debug)]
pub struct MapScene {
    pub c: f64,
    pub s: usize,
    /// Second fundamental form on the horizontal frame, normal slices along
    /// `(range F∗)^⊥`.
    pub b: Coefficients,
    /// `2τ` of the source over the horizontal frame.
    pub two_tau_h: f64,
    /// `2τ` of the target over the range frame.
    pub two_tau_r: f64,
    pub jdec: JDecomposition,
    pub cas: Option<CasoratiData>,
}

/// Everything the submersion inequalities need at one point.
#[derive(Clone, Debug)]
pub struct SubmersionScene {
    pub c: f64,
    pub s: usize,
    pub l: usize,
    /// `T` on the vertical frame, slices along the horizontal frame.
    pub t: Coefficients,
    /// `A` on the horizontal frame, slices along the vertical frame.
    pub a: Coefficients,
    /// `2τ` of the fibers.
    pub two_tau_fiber: f64,
    /// `2τ` of the source over the vertical frame.
    pub two_tau_v_ambient: f64,
    /// `2τ` of the horizontal distribution (curvature rebuilt from `A`).
    pub two_tau_h_dist: f64,
    /// `2τ` of the source over the horizontal frame.
    pub two_tau_h_ambient: f64,
    /// `Σ R(h_i, v_j, v_j, h_i)`.
    pub mixed: f64,
    pub jdec: JDecomposition,
    /// `(max |v[X,Y]|, max |v[X,Y] − 2A_X Y|)` when brackets can be differentiated.
    pub bracket: Option<(f64, f64)>,
    pub cas_t: Option<CasoratiData>,
    pub cas_a: Option<CasoratiData>,
}

fn frame_tensor(oracle: &dyn CurvatureTensor, vectors: &[Vector]) -> Tensor4 {
    oracle.in_frame(vectors)
}

impl MapScene {
    /// Pointwise scene: target curvature from the space-form oracle, source
    /// horizontal curvature through the Gauss equation.
    pub fn pointwise(oracle: &QsfOracle, range: &OrthoFrame, range_perp: &OrthoFrame, b: Coefficients) -> Result<Self> {
        let s = range.len();
        if b.n != s || b.codim() != range_perp.len() {
            return Err(Error::Dimension(format!(
                "B is {}×{} with {} slices, split has s = {s} and {} normal directions",
                b.n,
                b.n,
                b.codim(),
                range_perp.len()
            )));
        }
        let jdec = decompose_j(&oracle.structure, range, range_perp)?;
        let r2 = frame_tensor(oracle, &range.vectors);
        let two_tau_r = scalar_from_components(&r2);
        // R₁(h_i,h_j,h_j,h_i) = R₂ − g(β_ij, β_ji) + g(β_ii, β_jj)
        let mut two_tau_h = 0.0;
        for i in 0..s {
            for j in 0..s {
                if i == j {
                    continue;
                }
                let mut v = r2.get(i, j, j, i);
                for al in 0..b.codim() {
                    v += b.get(al, i, i) * b.get(al, j, j) - b.get(al, i, j) * b.get(al, j, i);
                }
                two_tau_h += v;
            }
        }
        let cas = casorati_if(&b)?;
        Ok(MapScene {
            c: oracle.c,
            s,
            b,
            two_tau_h,
            two_tau_r,
            jdec,
            cas,
        })
    }

    /// Chart scene at a computed map point; the target must match the
    /// space-form formula for `c` and `structure`.
    pub fn chart(mp: &MapPoint, c: f64, structure: &QuaternionicStructure, space_form_tol: f64) -> Result<Self> {
        let split = &mp.split;
        validate_space_form(&mp.target.riemann(), &mp.target.g, structure, c, space_form_tol, "target")?;
        let b = second_fundamental_form(mp, split)?;
        let two_tau_h = scalar_from_components(&mp.source.riemann().in_frame(&split.horizontal.vectors));
        let two_tau_r = scalar_from_components(&mp.target.riemann().in_frame(&split.range.vectors));
        let jdec = decompose_j(structure, &split.range, &split.range_perp)?;
        let cas = casorati_if(&b)?;
        Ok(MapScene {
            c,
            s: split.s(),
            b,
            two_tau_h,
            two_tau_r,
            jdec,
            cas,
        })
    }
}

impl SubmersionScene {
    /// Pointwise scene: source curvature from the oracle, fiber and horizontal
    /// curvature rebuilt from the supplied `T` and `A`.
    pub fn pointwise(
        oracle: &QsfOracle,
        horizontal: &OrthoFrame,
        vertical: &OrthoFrame,
        t: Coefficients,
        a: Coefficients,
    ) -> Result<Self> {
        let (s, l) = (horizontal.len(), vertical.len());
        if t.n != l || t.codim() != s {
            return Err(Error::Dimension(format!(
                "T must be {l}×{l} with {s} slices, got {0}×{0} with {1}",
                t.n,
                t.codim()
            )));
        }
        if a.n != s || a.codim() != l {
            return Err(Error::Dimension(format!(
                "A must be {s}×{s} with {l} slices, got {0}×{0} with {1}",
                a.n,
                a.codim()
            )));
        }
        let jdec = decompose_j(&oracle.structure, horizontal, vertical)?;
        let rv = frame_tensor(oracle, &vertical.vectors);
        let rh = frame_tensor(oracle, &horizontal.vectors);
        let tt = |p: usize, q: usize, r: usize, w: usize| (0..t.codim()).map(|al| t.get(al, p, q) * t.get(al, r, w)).sum::<f64>();
        let aa = |p: usize, q: usize, r: usize, w: usize| (0..a.codim()).map(|al| a.get(al, p, q) * a.get(al, r, w)).sum::<f64>();
        let fiber = Tensor4::from_fn(l, |p, q, r, w| rv.get(p, q, r, w) + tt(p, w, q, r) - tt(p, r, q, w));
        let hdist = Tensor4::from_fn(s, |i, j, k, m| {
            rh.get(i, j, k, m) - 2.0 * aa(i, j, k, m) + aa(j, k, i, m) - aa(i, k, j, m)
        });
        let two_tau_v_ambient = scalar_from_components(&rv);
        let two_tau_h_ambient = scalar_from_components(&rh);
        let mixed = mixed_scalar(oracle, horizontal, vertical);
        let cas_t = casorati_if(&t)?;
        let cas_a = casorati_if(&a)?;
        Ok(SubmersionScene {
            c: oracle.c,
            s,
            l,
            t,
            a,
            two_tau_fiber: scalar_from_components(&fiber),
            two_tau_v_ambient,
            two_tau_h_dist: scalar_from_components(&hdist),
            two_tau_h_ambient,
            mixed,
            jdec,
            bracket: None,
            cas_t,
            cas_a,
        })
    }

    /// Chart scene at a computed submersion point; the source must match the
    /// space-form formula for `c` and `structure`.
    pub fn chart(
        map: &SmoothMap,
        mp: &MapPoint,
        c: f64,
        structure: &QuaternionicStructure,
        space_form_tol: f64,
    ) -> Result<Self> {
        if mp.mode != MapMode::RiemannianSubmersion {
            return Err(Error::Config("submersion theorems need a Riemannian submersion".into()));
        }
        let split = &mp.split;
        let r1 = mp.source.riemann();
        validate_space_form(&r1, &mp.source.g, structure, c, space_form_tol, "source")?;
        let fields = mp.oneill()?;
        let t = oneill_t(mp, &fields, split)?;
        let a = oneill_a(mp, &fields, split)?;
        let (h, v) = (&split.horizontal, &split.vertical);
        let jdec = decompose_j(structure, h, v)?;
        let point = CurvaturePoint {
            x: mp.x.clone(),
            metric: mp.source.g.clone(),
            gamma: mp.source.gamma.clone(),
            riemann: r1,
        };
        let two_tau_fiber = if v.len() >= 2 {
            scalar_from_components(&fiber_curvature(mp, &fields, &v.vectors))
        } else {
            0.0
        };
        let two_tau_h_dist = if h.len() >= 2 {
            scalar_from_components(&horizontal_curvature(mp, &fields, &h.vectors))
        } else {
            0.0
        };
        let b = bracket_check(map, mp, split)?;
        let cas_t = casorati_if(&t)?;
        let cas_a = casorati_if(&a)?;
        Ok(SubmersionScene {
            c,
            s: h.len(),
            l: v.len(),
            two_tau_fiber,
            two_tau_v_ambient: scalar_from_components(&point.in_frame(&v.vectors)),
            two_tau_h_dist,
            two_tau_h_ambient: scalar_from_components(&point.in_frame(&h.vectors)),
            mixed: mixed_scalar(&point, h, v),
            t,
            a,
            jdec,
            bracket: Some((b.vertical_max, b.consistency)),
            cas_t,
            cas_a,
        })
    }
}

/// Checks coordinate curvature components against the space-form formula.
/// Returns the largest deviation relative to `max(1, max |R|)`.
pub fn validate_space_form(
    r: &Tensor4,
    g: &Mat,
    structure: &QuaternionicStructure,
    c: f64,
    tol: f64,
    which: &str,
) -> Result<f64> {
    let oracle = QsfOracle::new(c, structure.clone(), g.clone())?;
    let n = g.nrows();
    let basis: Vec<Vector> = (0..n).map(|i| Mat::identity(n, n).column(i).into_owned()).collect();
    let q = oracle.in_frame(&basis);
    let scale = r.max_abs().max(1.0);
    let dev = r.data.iter().zip(&q.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    if !(dev <= tol) {
        return Err(Error::Oracle(format!(
            "{which} curvature deviates from the quaternionic space form with c = {c} by {dev:e}"
        )));
    }
    Ok(dev)
}

fn need(cas: &Option<CasoratiData>, what: &str, n: usize) -> Result<CasoratiData> {
    cas.clone()
        .ok_or_else(|| Error::Dimension(format!("{what} needs dimension ≥ 3, got {n}")))
}

fn pair(n: usize) -> f64 {
    (n * (n - 1)) as f64
}

fn report(
    id: TheoremId,
    variant: Variant,
    lhs: f64,
    rhs_lemma: f64,
    rhs_theorem: f64,
    terms: BTreeMap<String, f64>,
    diagnostics: EqualityDiagnostics,
    conditions: bool,
    tol: f64,
) -> TheoremReport {
    let rhs = if id.is_lemma() { rhs_lemma } else { rhs_theorem };
    let ns = normalized_slack(lhs, rhs);
    TheoremReport {
        theorem_id: id,
        variant,
        lhs,
        rhs,
        slack: rhs - lhs,
        normalized_slack: ns,
        verdict: verdict(ns, tol, conditions),
        assembly_gap: rhs_lemma - rhs_theorem,
        terms,
        diagnostics,
    }
}

fn terms(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Map inequality: `ρ^H ≤ δ_C^H(s−1) + ρ^R` (lemma) with
/// `ρ^R = c/4 + 3c/(4s(s−1)) Σ‖P_α^R‖²` (theorem).
pub fn check_map_theorem(scene: &MapScene, lemma: bool, variant: Variant, tol: f64) -> Result<TheoremReport> {
    let s = scene.s;
    let cas = need(&scene.cas, "the map inequality", s)?;
    let lhs = scene.two_tau_h / pair(s);
    let rho_r = scene.two_tau_r / pair(s);
    let p = scene.jdec.sum_p();
    let rho_r_c = scene.c / 4.0 + 3.0 * scene.c / (4.0 * pair(s)) * p;
    let d = cas.value(variant);
    let diag = equality_diagnostics(&scene.b, &cas.extrema, None, None, tol);
    let id = if lemma { TheoremId::LemmaMap } else { TheoremId::Map };
    Ok(report(
        id,
        variant,
        lhs,
        d + rho_r,
        d + rho_r_c,
        terms(&[
            ("rho_h", lhs),
            ("rho_r", rho_r),
            ("rho_r_space_form", rho_r_c),
            ("casorati", cas.casorati),
            ("delta_casorati", d),
            ("sum_p_r_sq", p),
            ("c", scene.c),
        ]),
        diag,
        true,
        tol,
    ))
}

/// Vertical inequality: `ρ_V^{ker} ≤ δ_C^V(ℓ−1) + ρ_V^{N₁}`.
pub fn check_vertical_theorem(scene: &SubmersionScene, lemma: bool, variant: Variant, tol: f64) -> Result<TheoremReport> {
    let l = scene.l;
    let cas = need(&scene.cas_t, "the vertical inequality", l)?;
    let lhs = scene.two_tau_fiber / pair(l);
    let rho_n = scene.two_tau_v_ambient / pair(l);
    let q = scene.jdec.sum_q();
    let rho_n_c = scene.c / 4.0 + 3.0 * scene.c / (4.0 * pair(l)) * q;
    let d = cas.value(variant);
    let diag = equality_diagnostics(&scene.t, &cas.extrema, Some(&scene.a), scene.bracket, tol);
    let id = if lemma { TheoremId::LemmaVertical } else { TheoremId::Vertical };
    Ok(report(
        id,
        variant,
        lhs,
        d + rho_n,
        d + rho_n_c,
        terms(&[
            ("rho_v_fiber", lhs),
            ("rho_v_ambient", rho_n),
            ("rho_v_space_form", rho_n_c),
            ("casorati", cas.casorati),
            ("delta_casorati", d),
            ("sum_q_sq", q),
            ("c", scene.c),
        ]),
        diag,
        true,
        tol,
    ))
}

/// Horizontal inequality: `ρ^H ≤ δ_C^H(s−1) + ρ_H^{N₁}`, equality only with `A = 0`.
pub fn check_horizontal_theorem(scene: &SubmersionScene, lemma: bool, variant: Variant, tol: f64) -> Result<TheoremReport> {
    let s = scene.s;
    let cas = need(&scene.cas_a, "the horizontal inequality", s)?;
    let lhs = scene.two_tau_h_dist / pair(s);
    let rho_n = scene.two_tau_h_ambient / pair(s);
    let p = scene.jdec.sum_p();
    let rho_n_c = scene.c / 4.0 + 3.0 * scene.c / (4.0 * pair(s)) * p;
    let d = cas.value(variant);
    let diag = equality_diagnostics(&scene.a, &cas.extrema, Some(&scene.a), scene.bracket, tol);
    let integrable = diag.integrable;
    let id = if lemma { TheoremId::LemmaHorizontal } else { TheoremId::Horizontal };
    Ok(report(
        id,
        variant,
        lhs,
        d + rho_n,
        d + rho_n_c,
        terms(&[
            ("rho_h_distribution", lhs),
            ("rho_h_ambient", rho_n),
            ("rho_h_space_form", rho_n_c),
            ("casorati", cas.casorati),
            ("delta_casorati", d),
            ("sum_p_sq", p),
            ("a_norm_sq", scene.a.norm_sq()),
            ("c", scene.c),
        ]),
        diag,
        integrable,
        tol,
    ))
}

/// Combined inequality over both distributions. `delta_n` is mandatory.
pub fn check_combined_theorem(
    scene: &SubmersionScene,
    lemma: bool,
    variant: Variant,
    delta_n: Option<DeltaN>,
    tol: f64,
) -> Result<TheoremReport> {
    let delta_n = delta_n.ok_or_else(|| Error::Config("the combined inequality needs deltaN".into()))?;
    let (s, l) = (scene.s, scene.l);
    let cas_t = need(&scene.cas_t, "the combined inequality (vertical)", l)?;
    let cas_a = need(&scene.cas_a, "the combined inequality (horizontal)", s)?;
    let (ps, pl) = (pair(s), pair(l));
    let den = ps * pl;
    let (sf, lf) = (s as f64, l as f64);
    let c = scene.c;

    let rho_h = scene.two_tau_h_dist / ps;
    let rho_v = scene.two_tau_fiber / pl;
    let lhs = rho_h / pl + rho_v / ps;

    let dv = cas_t.value(variant);
    let dh = cas_a.value(variant);
    let t_sq = scene.t.norm_sq();
    let a_sq = scene.a.norm_sq();
    let dn = delta_n.value();
    let common = dv / ps + dh / pl + (2.0 * dn - t_sq + a_sq) / den;

    let rho_v_n = scene.two_tau_v_ambient / pl;
    let rho_h_n = scene.two_tau_h_ambient / ps;
    let rhs_lemma = common + rho_v_n / ps + rho_h_n / pl + 2.0 * scene.mixed / den;

    let j = &scene.jdec;
    let j_sum = j.sum_q() + j.sum_p() + 2.0 * j.sum_pv();
    let c_term = c * (lf * lf + sf * sf + 2.0 * sf * lf - lf - sf) / (4.0 * den) + 3.0 * c / (4.0 * den) * j_sum;
    let rhs_theorem = common + c_term;

    let diag = equality_diagnostics(&scene.t, &cas_t.extrema, Some(&scene.a), scene.bracket, tol);
    let conditions = diag.conditions_met();
    let id = if lemma { TheoremId::LemmaCombined } else { TheoremId::Combined };
    Ok(report(
        id,
        variant,
        lhs,
        rhs_lemma,
        rhs_theorem,
        terms(&[
            ("rho_h_distribution", rho_h),
            ("rho_v_fiber", rho_v),
            ("rho_v_ambient", rho_v_n),
            ("rho_h_ambient", rho_h_n),
            ("mixed_scalar", scene.mixed),
            ("mixed_scalar_space_form", c / 4.0 * sf * lf + 0.75 * c * j.sum_pv()),
            ("space_form_term", c_term),
            ("delta_casorati_v", dv),
            ("delta_casorati_h", dh),
            ("t_v_norm_sq", t_sq),
            ("t_h_norm_sq", t_sq),
            ("a_h_norm_sq", a_sq),
            ("a_v_norm_sq", a_sq),
            ("delta_n", dn),
            ("c", c),
        ]),
        diag,
        conditions,
        tol,
    ))
}

/// Dispatches a submersion theorem id.
pub fn check_submersion(
    scene: &SubmersionScene,
    id: TheoremId,
    variant: Variant,
    delta_n: Option<DeltaN>,
    tol: f64,
) -> Result<TheoremReport> {
    let lemma = id.is_lemma();
    match id {
        TheoremId::Vertical | TheoremId::LemmaVertical => check_vertical_theorem(scene, lemma, variant, tol),
        TheoremId::Horizontal | TheoremId::LemmaHorizontal => check_horizontal_theorem(scene, lemma, variant, tol),
        TheoremId::Combined | TheoremId::LemmaCombined => check_combined_theorem(scene, lemma, variant, delta_n, tol),
        TheoremId::Map | TheoremId::LemmaMap => {
            Err(Error::Config(format!("{id} applies to Riemannian maps, not submersion scenes")))
        }
    }
}
