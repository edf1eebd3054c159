//! Running scenes and assembling deterministic reports.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::casorati::HyperplaneExtrema;
use crate::inequalities::{
    check_map_theorem, check_submersion, MapScene, SubmersionScene, TheoremId, TheoremReport, Variant, Verdict,
};
use crate::maps::{bracket_check, differential, gauss_residual_map, gauss_residual_submersion, MapMode};
use crate::quaternionic::QsfOracle;
use crate::scenario::{ChartScene, PointwiseData, PointwiseScene, Scene, SceneKind, FORMAT_VERSION};
use crate::{Error, Result};

/// Exit codes of `run` and `validate`.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GaussResiduals {
    pub map: Option<f64>,
    pub vertical: Option<f64>,
    pub horizontal: Option<f64>,
    pub mixed: Option<f64>,
    pub bracket_vertical: Option<f64>,
    pub bracket_consistency: Option<f64>,
    pub isometry_defect: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub theorem_id: TheoremId,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointReport {
    pub index: usize,
    /// Source coordinates (chart scenes only).
    pub x: Option<Vec<f64>>,
    pub valid: bool,
    pub error: Option<String>,
    pub gauss: GaussResiduals,
    /// Hyperplane extrema per fundamental tensor (`"B"`, `"T"`, `"A"`).
    pub extrema: BTreeMap<String, HyperplaneExtrema>,
    pub theorems: Vec<TheoremReport>,
    pub skipped: Vec<Skipped>,
}

impl PointReport {
    fn new(index: usize, x: Option<Vec<f64>>) -> Self {
        PointReport {
            index,
            x,
            valid: true,
            error: None,
            gauss: GaussResiduals::default(),
            extrema: BTreeMap::new(),
            theorems: Vec::new(),
            skipped: Vec::new(),
        }
    }

    fn fail(mut self, e: &Error) -> Self {
        self.valid = false;
        self.error = Some(e.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub theorem_id: TheoremId,
    pub variant: Variant,
    pub min_slack: f64,
    pub min_point: usize,
    pub equality: usize,
    pub strict: usize,
    pub violated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussSummary {
    pub map_max: Option<f64>,
    pub vertical_max: Option<f64>,
    pub horizontal_max: Option<f64>,
    pub mixed_max: Option<f64>,
    pub bracket_consistency_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberCheckReport {
    pub u: Vec<f64>,
    pub level: Vec<f64>,
    pub x: Option<Vec<f64>>,
    pub metric_defect: Option<f64>,
    pub curvature_defect: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub equality: f64,
    pub space_form: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scene: String,
    pub format_version: u32,
    pub mode: &'static str,
    pub c: f64,
    pub delta_n: Option<String>,
    pub tolerances: Tolerances,
    pub theorems: Vec<TheoremId>,
    pub points: Vec<PointReport>,
    pub aggregate: Vec<Aggregate>,
    pub gauss: GaussSummary,
    pub fiber_checks: Vec<FiberCheckReport>,
    pub invalid_points: usize,
    pub violated: usize,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.invalid_points > 0 {
            EXIT_INVALID
        } else if self.violated > 0 {
            EXIT_VIOLATED
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per (point, theorem, variant).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["point", "theorem", "variant", "lhs", "rhs", "slack", "verdict"])
            .map_err(io)?;
        for p in &self.points {
            for t in &p.theorems {
                out.write_record([
                    p.index.to_string(),
                    t.theorem_id.name().to_string(),
                    t.variant.name().to_string(),
                    number(t.lhs),
                    number(t.rhs),
                    number(t.slack),
                    t.verdict.name().to_string(),
                ])
                .map_err(io)?;
            }
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Shortest round-trip decimal, matching the JSON report.
fn number(v: f64) -> String {
    serde_json::to_string(&v).expect("float serializes")
}

fn evaluate<F>(point: &mut PointReport, ids: &[TheoremId], mut check: F)
where
    F: FnMut(TheoremId, Variant) -> Result<TheoremReport>,
{
    for &id in ids {
        for v in Variant::BOTH {
            match check(id, v) {
                Ok(r) => point.theorems.push(r),
                Err(Error::Dimension(reason)) => {
                    if v == Variant::Delta {
                        point.skipped.push(Skipped { theorem_id: id, reason });
                    }
                }
                Err(e) => {
                    point.valid = false;
                    point.error = Some(e.to_string());
                    return;
                }
            }
        }
    }
}

fn chart_point(scene: &Scene, cs: &ChartScene, index: usize, x: &[f64]) -> (PointReport, Option<Error>) {
    let point = PointReport::new(index, Some(x.to_vec()));
    let mp = match differential(&cs.map, x) {
        Ok(mp) => mp,
        Err(e) => return (point.fail(&e), Some(e)),
    };
    let mut point = point;
    point.gauss.isometry_defect = Some(mp.isometry_defect);
    let split = &mp.split;
    let res = match mp.mode {
        MapMode::RiemannianMap => {
            point.gauss.map = Some(gauss_residual_map(&mp, split));
            Ok(())
        }
        MapMode::RiemannianSubmersion => gauss_residual_submersion(&cs.map, &mp, split).and_then(|r| {
            point.gauss.vertical = Some(r.vertical);
            point.gauss.horizontal = Some(r.horizontal);
            point.gauss.mixed = Some(r.mixed);
            let b = bracket_check(&cs.map, &mp, split)?;
            point.gauss.bracket_vertical = Some(b.vertical_max);
            point.gauss.bracket_consistency = Some(b.consistency);
            Ok(())
        }),
    };
    if let Err(e) = res {
        return (point.fail(&e), Some(e));
    }
    let Some(structure) = &cs.structure else {
        return (point, None);
    };
    let tol = scene.tolerance;
    match mp.mode {
        MapMode::RiemannianMap => match MapScene::chart(&mp, scene.c, structure, scene.space_form_tolerance) {
            Ok(ms) => {
                if let Some(c) = &ms.cas {
                    point.extrema.insert("B".into(), c.extrema.clone());
                }
                evaluate(&mut point, &scene.theorems, |id, v| check_map_theorem(&ms, id.is_lemma(), v, tol));
            }
            Err(e) => return (point.fail(&e), Some(e)),
        },
        MapMode::RiemannianSubmersion => {
            match SubmersionScene::chart(&cs.map, &mp, scene.c, structure, scene.space_form_tolerance) {
                Ok(ss) => {
                    insert_submersion_extrema(&mut point, &ss);
                    evaluate(&mut point, &scene.theorems, |id, v| check_submersion(&ss, id, v, scene.delta_n, tol));
                }
                Err(e) => return (point.fail(&e), Some(e)),
            }
        }
    }
    let err = point.error.clone().map(Error::Config);
    (point, err)
}

fn insert_submersion_extrema(point: &mut PointReport, ss: &SubmersionScene) {
    if let Some(c) = &ss.cas_t {
        point.extrema.insert("T".into(), c.extrema.clone());
    }
    if let Some(c) = &ss.cas_a {
        point.extrema.insert("A".into(), c.extrema.clone());
    }
}

fn pointwise_point(scene: &Scene, ps: &PointwiseScene) -> (PointReport, Option<Error>) {
    let mut point = PointReport::new(0, None);
    let oracle = match QsfOracle::new(scene.c, ps.structure.clone(), ps.metric.clone()) {
        Ok(o) => o,
        Err(e) => return (point.fail(&e), Some(e)),
    };
    let tol = scene.tolerance;
    match &ps.data {
        PointwiseData::Map { range, range_perp, b } => match MapScene::pointwise(&oracle, range, range_perp, b.clone()) {
            Ok(ms) => {
                if let Some(c) = &ms.cas {
                    point.extrema.insert("B".into(), c.extrema.clone());
                }
                evaluate(&mut point, &scene.theorems, |id, v| check_map_theorem(&ms, id.is_lemma(), v, tol));
            }
            Err(e) => return (point.fail(&e), Some(e)),
        },
        PointwiseData::Submersion {
            horizontal,
            vertical,
            t,
            a,
        } => match SubmersionScene::pointwise(&oracle, horizontal, vertical, t.clone(), a.clone()) {
            Ok(ss) => {
                insert_submersion_extrema(&mut point, &ss);
                evaluate(&mut point, &scene.theorems, |id, v| check_submersion(&ss, id, v, scene.delta_n, tol));
            }
            Err(e) => return (point.fail(&e), Some(e)),
        },
    }
    let err = point.error.clone().map(Error::Config);
    (point, err)
}

fn max_of<'a>(it: impl Iterator<Item = &'a Option<f64>>) -> Option<f64> {
    it.flatten().copied().fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
}

/// Evaluates every point of a scene. With `strict`, the first invalid point
/// (by index) aborts the run.
pub fn run(scene: &Scene, strict: bool) -> Result<RunReport> {
    let (mode, results, fiber_checks) = match &scene.kind {
        SceneKind::Chart(cs) => {
            let results: Vec<(PointReport, Option<Error>)> = cs
                .points
                .par_iter()
                .enumerate()
                .map(|(i, x)| chart_point(scene, cs, i, x))
                .collect();
            let fibers = cs
                .fiber
                .as_ref()
                .map(|(chart, checks)| {
                    checks
                        .iter()
                        .map(|c| {
                            let (x, m, k, e) = match chart.cross_check(&cs.map, &c.u, &c.level) {
                                Ok(f) => (Some(f.x), Some(f.metric_defect), Some(f.curvature_defect), None),
                                Err(e) => (None, None, None, Some(e.to_string())),
                            };
                            FiberCheckReport {
                                u: c.u.clone(),
                                level: c.level.clone(),
                                x,
                                metric_defect: m,
                                curvature_defect: k,
                                error: e,
                            }
                        })
                        .collect()
                })
                .unwrap_or_default();
            ("chart", results, fibers)
        }
        SceneKind::Pointwise(ps) => ("pointwise", vec![pointwise_point(scene, ps)], Vec::new()),
    };
    if strict {
        if let Some((_, Some(e))) = results.iter().find(|(p, _)| !p.valid) {
            return Err(e.clone());
        }
    }
    let points: Vec<PointReport> = results.into_iter().map(|(p, _)| p).collect();

    let mut agg: BTreeMap<(TheoremId, Variant), Aggregate> = BTreeMap::new();
    for p in &points {
        for t in &p.theorems {
            let a = agg.entry((t.theorem_id, t.variant)).or_insert(Aggregate {
                theorem_id: t.theorem_id,
                variant: t.variant,
                min_slack: t.slack,
                min_point: p.index,
                equality: 0,
                strict: 0,
                violated: 0,
            });
            if t.slack < a.min_slack {
                a.min_slack = t.slack;
                a.min_point = p.index;
            }
            match t.verdict {
                Verdict::Equality => a.equality += 1,
                Verdict::Strict => a.strict += 1,
                Verdict::Violated => a.violated += 1,
            }
        }
    }
    let gauss = GaussSummary {
        map_max: max_of(points.iter().map(|p| &p.gauss.map)),
        vertical_max: max_of(points.iter().map(|p| &p.gauss.vertical)),
        horizontal_max: max_of(points.iter().map(|p| &p.gauss.horizontal)),
        mixed_max: max_of(points.iter().map(|p| &p.gauss.mixed)),
        bracket_consistency_max: max_of(points.iter().map(|p| &p.gauss.bracket_consistency)),
    };
    let invalid_points = points.iter().filter(|p| !p.valid).count();
    let violated = points
        .iter()
        .flat_map(|p| &p.theorems)
        .filter(|t| t.verdict == Verdict::Violated)
        .count();
    Ok(RunReport {
        scene: scene.name.clone(),
        format_version: FORMAT_VERSION,
        mode,
        c: scene.c,
        delta_n: scene.delta_n.map(|d| d.to_string()),
        tolerances: Tolerances {
            equality: scene.tolerance,
            space_form: scene.space_form_tolerance,
        },
        theorems: scene.theorems.clone(),
        points,
        aggregate: agg.into_values().collect(),
        gauss,
        fiber_checks,
        invalid_points,
        violated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointValidation {
    pub index: usize,
    pub x: Option<Vec<f64>>,
    pub valid: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub scene: String,
    pub points: Vec<PointValidation>,
    pub invalid_points: usize,
}

impl ValidationReport {
    pub fn exit_code(&self) -> i32 {
        if self.invalid_points > 0 {
            EXIT_INVALID
        } else {
            EXIT_OK
        }
    }

    /// First failure with its point index.
    pub fn first_error(&self) -> Option<(usize, &str)> {
        self.points
            .iter()
            .find_map(|p| p.error.as_deref().map(|e| (p.index, e)))
    }
}

fn validate_chart_point(scene: &Scene, cs: &ChartScene, x: &[f64]) -> Result<()> {
    let mp = differential(&cs.map, x)?;
    let Some(structure) = &cs.structure else {
        return Ok(());
    };
    let tol = scene.space_form_tolerance;
    let r = match mp.mode {
        MapMode::RiemannianMap => (mp.target.riemann(), &mp.target.g, "target"),
        MapMode::RiemannianSubmersion => (mp.source.riemann(), &mp.source.g, "source"),
    };
    crate::inequalities::validate_space_form(&r.0, r.1, structure, scene.c, tol, r.2)?;
    Ok(())
}

/// Runs every scene invariant without evaluating theorems.
pub fn validate(scene: &Scene) -> ValidationReport {
    let points: Vec<PointValidation> = match &scene.kind {
        SceneKind::Chart(cs) => cs
            .points
            .par_iter()
            .enumerate()
            .map(|(index, x)| {
                let err = validate_chart_point(scene, cs, x).err();
                PointValidation {
                    index,
                    x: Some(x.clone()),
                    valid: err.is_none(),
                    error: err.map(|e| e.to_string()),
                }
            })
            .collect(),
        SceneKind::Pointwise(ps) => {
            let err = QsfOracle::new(scene.c, ps.structure.clone(), ps.metric.clone()).err();
            vec![PointValidation {
                index: 0,
                x: None,
                valid: err.is_none(),
                error: err.map(|e| e.to_string()),
            }]
        }
    };
    ValidationReport {
        scene: scene.name.clone(),
        invalid_points: points.iter().filter(|p| !p.valid).count(),
        points,
    }
}
