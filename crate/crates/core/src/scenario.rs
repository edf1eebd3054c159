//! Declarative scenario files and the builtin registry.

use serde::Deserialize;

use crate::casorati::{Coefficients, Symmetry};
use crate::charts::builtin_chart;
use crate::geometry::{check_metric, Domain, Mat, MetricChart, OrthoFrame, Vector};
use crate::inequalities::{DeltaN, TheoremId, CHART_TOL, ORACLE_TOL, SPACE_FORM_TOL};
use crate::maps::{FiberChart, MapMode, SmoothMap};
use crate::quaternionic::{check_quaternionic_structure, QuaternionicStructure};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Builtin scenes, shipped as scenario files.
pub const BUILTINS: &[(&str, &str)] = &[
    ("product-projection:8to4", include_str!("../scenarios/product-projection-8to4.toml")),
    ("radial:4", include_str!("../scenarios/radial-4.toml")),
    ("paraboloid-vertex", include_str!("../scenarios/paraboloid-vertex.toml")),
    ("flat-embedding:2in4", include_str!("../scenarios/flat-embedding-2in4.toml")),
    ("flat-embedding:3in4", include_str!("../scenarios/flat-embedding-3in4.toml")),
    ("hopf:4", include_str!("../scenarios/hopf-4.toml")),
    ("equality-map", include_str!("../scenarios/equality-map.toml")),
    ("equality-vertical", include_str!("../scenarios/equality-vertical.toml")),
    ("equality-combined", include_str!("../scenarios/equality-combined.toml")),
];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Chart,
    Pointwise,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub name: String,
    pub mode: Mode,
    pub c: f64,
    pub delta_n: Option<String>,
    pub theorems: Vec<String>,
    pub structure: Option<StructureSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub source: Option<ChartSpec>,
    pub target: Option<ChartSpec>,
    pub map: Option<MapSpec>,
    pub points: Option<PointsSpec>,
    pub fiber: Option<FiberSpec>,
    pub pointwise: Option<PointwiseSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StructureSpec {
    Builtin(String),
    Matrices(StructureMatrices),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureMatrices {
    pub j1: Vec<Vec<f64>>,
    pub j2: Vec<Vec<f64>>,
    pub j3: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Verdict threshold on the normalized slack.
    pub equality: Option<f64>,
    /// Allowed deviation of chart curvature from the space-form formula.
    pub space_form: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub builtin: Option<String>,
    pub name: Option<String>,
    pub coords: Option<Vec<String>>,
    pub metric: Option<Vec<Vec<String>>>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Submersion,
    RiemannianMap,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub kind: MapKind,
    pub rank: usize,
    pub components: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsSpec {
    #[serde(default)]
    pub explicit: Vec<Vec<f64>>,
    pub sample: Option<SampleSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub coords: Vec<String>,
    pub levels: Vec<String>,
    pub metric: Vec<Vec<String>>,
    pub embedding: Vec<String>,
    pub checks: Vec<FiberPoint>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberPoint {
    pub u: Vec<f64>,
    pub level: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointwiseKind {
    Map,
    Submersion,
}

/// One point given by explicit frames and tensors in `ℝ^{4m}`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointwiseSpec {
    pub kind: PointwiseKind,
    /// Defaults to the identity.
    pub metric: Option<Vec<Vec<f64>>>,
    pub horizontal: Option<Vec<Vec<f64>>>,
    pub vertical: Option<Vec<Vec<f64>>>,
    pub range: Option<Vec<Vec<f64>>>,
    pub range_perp: Option<Vec<Vec<f64>>>,
    pub t: Option<Vec<Vec<Vec<f64>>>>,
    pub a: Option<Vec<Vec<Vec<f64>>>>,
    pub b: Option<Vec<Vec<Vec<f64>>>>,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ScenarioFile {
    pub fn parse(src: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(src, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        if file.version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    /// A builtin name or a path to a scenario file.
    pub fn load(reference: &str) -> Result<Self> {
        if let Some(src) = builtin_source(reference) {
            return Self::parse(src);
        }
        let src = std::fs::read_to_string(reference)
            .map_err(|e| Error::Io(format!("{reference}: {e} (and no builtin of that name)")))?;
        Self::parse(&src)
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Dimension(format!("{what} must be a non-empty rectangular matrix")));
    }
    Ok(Mat::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

fn structure(spec: &Option<StructureSpec>) -> Result<QuaternionicStructure> {
    match spec {
        None => Err(Error::Config("scene needs a quaternionic `structure`".into())),
        Some(StructureSpec::Builtin(name)) => QuaternionicStructure::builtin(name),
        Some(StructureSpec::Matrices(m)) => QuaternionicStructure::from_matrices([
            matrix(&m.j1, "j1")?,
            matrix(&m.j2, "j2")?,
            matrix(&m.j3, "j3")?,
        ]),
    }
}

fn chart(spec: &ChartSpec, role: &str) -> Result<MetricChart> {
    if let Some(b) = &spec.builtin {
        if spec.name.is_some() || spec.coords.is_some() || spec.metric.is_some() || spec.lo.is_some() || spec.hi.is_some() {
            return Err(Error::Config(format!("{role}: `builtin` excludes the other chart keys")));
        }
        return builtin_chart(b);
    }
    let coords = spec
        .coords
        .clone()
        .ok_or_else(|| Error::Config(format!("{role}: needs `builtin` or `coords` and `metric`")))?;
    let metric = spec
        .metric
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{role}: missing `metric`")))?;
    let n = coords.len();
    let domain = Domain {
        lo: spec.lo.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n]),
        hi: spec.hi.clone().unwrap_or_else(|| vec![f64::INFINITY; n]),
    };
    if domain.lo.len() != n || domain.hi.len() != n {
        return Err(Error::Dimension(format!("{role}: domain bounds need {n} entries")));
    }
    MetricChart::parse(spec.name.clone().unwrap_or_else(|| role.to_string()), coords, domain, metric)
}

/// A scenario resolved into evaluable objects.
#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub c: f64,
    pub delta_n: Option<DeltaN>,
    pub theorems: Vec<TheoremId>,
    pub tolerance: f64,
    pub space_form_tolerance: f64,
    pub kind: SceneKind,
}

#[derive(Clone, Debug)]
pub enum SceneKind {
    Chart(ChartScene),
    Pointwise(PointwiseScene),
}

#[derive(Clone, Debug)]
pub struct ChartScene {
    pub map: SmoothMap,
    /// `None` when no theorem is requested (only self-checks run).
    pub structure: Option<QuaternionicStructure>,
    pub points: Vec<Vec<f64>>,
    pub fiber: Option<(FiberChart, Vec<FiberPoint>)>,
}

#[derive(Clone, Debug)]
pub struct PointwiseScene {
    pub structure: QuaternionicStructure,
    pub metric: Mat,
    pub data: PointwiseData,
}

#[derive(Clone, Debug)]
pub enum PointwiseData {
    Map {
        range: OrthoFrame,
        range_perp: OrthoFrame,
        b: Coefficients,
    },
    Submersion {
        horizontal: OrthoFrame,
        vertical: OrthoFrame,
        t: Coefficients,
        a: Coefficients,
    },
}

fn frame(rows: &Option<Vec<Vec<f64>>>, metric: &Mat, what: &str) -> Result<OrthoFrame> {
    let rows = rows.as_ref().ok_or_else(|| Error::Config(format!("pointwise scene needs `{what}`")))?;
    let n = metric.nrows();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("every `{what}` vector needs {n} entries")));
    }
    Ok(OrthoFrame {
        vectors: rows.iter().map(|r| Vector::from_column_slice(r)).collect(),
        metric: metric.clone(),
    })
}

fn tensor(slices: &Option<Vec<Vec<Vec<f64>>>>, n: usize, codim: usize, kind: Symmetry, what: &str) -> Result<Coefficients> {
    let slices = slices.as_ref().ok_or_else(|| Error::Config(format!("pointwise scene needs `{what}`")))?;
    if slices.len() != codim {
        return Err(Error::Dimension(format!("`{what}` needs {codim} slices, got {}", slices.len())));
    }
    if n == 0 {
        return Err(Error::Dimension(format!("`{what}` lives on an empty distribution")));
    }
    if codim == 0 {
        return Ok(Coefficients::zeros(n, 0, kind));
    }
    let mats = slices
        .iter()
        .map(|s| {
            let m = matrix(s, what)?;
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!("`{what}` slices must be {n}×{n}")));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Coefficients::from_matrices(&mats, kind)
}

fn sample_points(s: &SampleSpec, dim: usize) -> Result<Vec<Vec<f64>>> {
    use rand::{Rng, SeedableRng};
    if s.lo.len() != dim || s.hi.len() != dim {
        return Err(Error::Dimension(format!("sampling box needs {dim} bounds per side")));
    }
    if s.lo.iter().zip(&s.hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
        return Err(Error::Config("sampling box must be finite with lo < hi".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed);
    Ok((0..s.count)
        .map(|_| (0..dim).map(|k| rng.gen_range(s.lo[k]..s.hi[k])).collect())
        .collect())
}

impl Scene {
    pub fn from_file(f: &ScenarioFile) -> Result<Self> {
        let theorems = f
            .theorems
            .iter()
            .map(|t| TheoremId::parse(t))
            .collect::<Result<Vec<_>>>()?;
        let delta_n = f.delta_n.as_deref().map(DeltaN::parse).transpose()?;
        if delta_n.is_none() && theorems.iter().any(|t| matches!(t, TheoremId::Combined | TheoremId::LemmaCombined)) {
            return Err(Error::Config("the combined inequality needs `delta_n` (\"zero\" or \"user:<value>\")".into()));
        }
        if !f.c.is_finite() {
            return Err(Error::Config("`c` must be finite".into()));
        }
        let default_tol = match f.mode {
            Mode::Chart => CHART_TOL,
            Mode::Pointwise => ORACLE_TOL,
        };
        let kind = match f.mode {
            Mode::Chart => SceneKind::Chart(Self::chart_scene(f, &theorems)?),
            Mode::Pointwise => SceneKind::Pointwise(Self::pointwise_scene(f, &theorems)?),
        };
        Ok(Scene {
            name: f.name.clone(),
            c: f.c,
            delta_n,
            theorems,
            tolerance: f.tolerances.equality.unwrap_or(default_tol),
            space_form_tolerance: f.tolerances.space_form.unwrap_or(SPACE_FORM_TOL),
            kind,
        })
    }

    fn chart_scene(f: &ScenarioFile, theorems: &[TheoremId]) -> Result<ChartScene> {
        if f.pointwise.is_some() {
            return Err(Error::Config("chart scenes take no `pointwise` table".into()));
        }
        let source = chart(f.source.as_ref().ok_or_else(|| Error::Config("chart scene needs `source`".into()))?, "source")?;
        let target = chart(f.target.as_ref().ok_or_else(|| Error::Config("chart scene needs `target`".into()))?, "target")?;
        let spec = f.map.as_ref().ok_or_else(|| Error::Config("chart scene needs `map`".into()))?;
        let mode = match spec.kind {
            MapKind::Submersion => MapMode::RiemannianSubmersion,
            MapKind::RiemannianMap => MapMode::RiemannianMap,
        };
        for t in theorems {
            if t.is_map() != (mode == MapMode::RiemannianMap) {
                return Err(Error::Config(format!("theorem {t} does not apply to a {:?} scene", spec.kind)));
            }
        }
        let n = source.dim();
        let map = SmoothMap::parse(source, target, &spec.components, mode, spec.rank)?;
        let structure = if theorems.is_empty() {
            None
        } else {
            Some(structure(&f.structure)?)
        };
        let pts = f.points.as_ref().ok_or_else(|| Error::Config("chart scene needs `points`".into()))?;
        let mut points = pts.explicit.clone();
        if let Some(s) = &pts.sample {
            points.extend(sample_points(s, n)?);
        }
        if points.is_empty() {
            return Err(Error::Config("chart scene has no evaluation points".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::Dimension(format!("point {p:?} needs {n} coordinates")));
        }
        let fiber = f
            .fiber
            .as_ref()
            .map(|fs| {
                FiberChart::parse(fs.coords.clone(), fs.levels.clone(), &fs.metric, &fs.embedding)
                    .map(|c| (c, fs.checks.clone()))
            })
            .transpose()?;
        Ok(ChartScene {
            map,
            structure,
            points,
            fiber,
        })
    }

    fn pointwise_scene(f: &ScenarioFile, theorems: &[TheoremId]) -> Result<PointwiseScene> {
        if f.source.is_some() || f.target.is_some() || f.map.is_some() || f.points.is_some() || f.fiber.is_some() {
            return Err(Error::Config("pointwise scenes take only a `pointwise` table".into()));
        }
        let p = f
            .pointwise
            .as_ref()
            .ok_or_else(|| Error::Config("pointwise scene needs a `pointwise` table".into()))?;
        let structure = structure(&f.structure)?;
        let n = structure.dim();
        let metric = match &p.metric {
            Some(m) => matrix(m, "metric")?,
            None => Mat::identity(n, n),
        };
        if metric.nrows() != n || metric.ncols() != n {
            return Err(Error::Dimension(format!("metric must be {n}×{n} to match the structure")));
        }
        check_metric(&metric)?;
        check_quaternionic_structure(&structure, &metric).into_result()?;
        let is_map = p.kind == PointwiseKind::Map;
        for t in theorems {
            if t.is_map() != is_map {
                return Err(Error::Config(format!("theorem {t} does not apply to a {:?} scene", p.kind)));
            }
        }
        let split_defect = |x: &OrthoFrame, y: &OrthoFrame| -> Result<()> {
            if x.len() + y.len() != n {
                return Err(Error::Dimension(format!(
                    "split has {} + {} vectors in dimension {n}",
                    x.len(),
                    y.len()
                )));
            }
            let d = x.orthonormality_defect().max(y.orthonormality_defect()).max(x.cross_defect(y));
            if d > 1e-9 {
                return Err(Error::Frame(format!("split is not orthonormal (defect {d:e})")));
            }
            Ok(())
        };
        let data = if is_map {
            if p.horizontal.is_some() || p.vertical.is_some() || p.t.is_some() || p.a.is_some() {
                return Err(Error::Config("map scenes use `range`, `range_perp` and `b`".into()));
            }
            let range = frame(&p.range, &metric, "range")?;
            let range_perp = frame(&p.range_perp, &metric, "range_perp")?;
            split_defect(&range, &range_perp)?;
            let b = tensor(&p.b, range.len(), range_perp.len(), Symmetry::Symmetric, "b")?;
            PointwiseData::Map { range, range_perp, b }
        } else {
            if p.range.is_some() || p.range_perp.is_some() || p.b.is_some() {
                return Err(Error::Config("submersion scenes use `horizontal`, `vertical`, `t` and `a`".into()));
            }
            let horizontal = frame(&p.horizontal, &metric, "horizontal")?;
            let vertical = frame(&p.vertical, &metric, "vertical")?;
            split_defect(&horizontal, &vertical)?;
            let (s, l) = (horizontal.len(), vertical.len());
            let t = tensor(&p.t, l, s, Symmetry::Symmetric, "t")?;
            let a = tensor(&p.a, s, l, Symmetry::Skew, "a")?;
            PointwiseData::Submersion {
                horizontal,
                vertical,
                t,
                a,
            }
        };
        Ok(PointwiseScene { structure, metric, data })
    }
}
