//! Task dispatch and report assembly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{AsymptoticsKind, BggKind, Scenario};
use crate::boundary::{
    einstein_asymptotics, normalize_defining_function, orbit_tensors, ricci_flat_asymptotics,
    second_fundamental_form, EinsteinAsymptotics, ModelMetric, Normalization, NormalizeOptions,
    OrbitReport, Provenance, RicciFlatAsymptotics, SecondFundamentalForm,
};
use crate::compactness::{check_compactness, estimate_order, CompactnessReport, OrderEstimate};
use crate::connections::{scalar_curvature, scale_density, Connection, ScaleAt};
use crate::error::Error;
use crate::fields::ScalarField;
use crate::geodesics::{
    approach_law_fit, cutoff_divergence, integrate_batch, ApproachFit, CutoffDivergence,
    GeodesicOptions, Termination, Trajectory,
};
use crate::tractor::{
    bgg_residual_e1, bgg_residual_e2, is_normal, Normality, SectionKind, NORMAL_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Compactness,
    Order,
    Bgg,
    Geodesics,
    Orbits,
    Asymptotics,
    Normalize,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Compactness => "compactness",
            Task::Order => "order",
            Task::Bgg => "bgg",
            Task::Geodesics => "geodesics",
            Task::Orbits => "orbits",
            Task::Asymptotics => "asymptotics",
            Task::Normalize => "normalize",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub level: &'static str,
    pub message: String,
}

impl Diagnostic {
    fn error(e: &Error) -> Self {
        Diagnostic {
            level: "error",
            message: e.to_string(),
        }
    }

    fn warning(msg: impl Into<String>) -> Self {
        Diagnostic {
            level: "warning",
            message: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub pcompact: &'static str,
    pub report_schema: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioEcho {
    pub name: Option<String>,
    pub task: Task,
    pub seed: u64,
    pub config: Scenario,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: ScenarioEcho,
    pub results: Option<TaskResult>,
    pub diagnostics: Vec<Diagnostic>,
    pub versions: Versions,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum TaskResult {
    Compactness(CompactnessResult),
    Order(OrderResult),
    Bgg(BggResult),
    Geodesics(GeodesicsResult),
    Orbits(OrbitReport),
    Asymptotics(AsymptoticsResult),
    Normalize(Normalization),
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessResult {
    pub extrapolation_tol: f64,
    pub divergence_slope: f64,
    pub divergence_r2: f64,
    pub report: CompactnessReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderResult {
    pub expected_alpha: Option<f64>,
    /// `|α − expected|/expected`.
    pub relative_error: Option<f64>,
    pub estimate: OrderEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointResidual {
    pub point: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BggResult {
    pub kind: BggKind,
    pub density: String,
    pub normal_tol: f64,
    pub normality: Normality,
    pub max_residual: Option<f64>,
    pub residuals: Vec<PointResidual>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicRun {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub terminated: Option<Termination>,
    pub t_end: Option<f64>,
    pub energy_drift: Option<f64>,
    pub rejected_steps: Option<usize>,
    pub fit: Option<ApproachFit>,
    pub fit_consistent: Option<bool>,
    pub divergence: Option<CutoffDivergence>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicsResult {
    pub alpha: Option<f64>,
    pub rtol: f64,
    pub slope_tol: f64,
    pub r2_min: f64,
    pub runs: Vec<GeodesicRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsResult {
    pub kind: AsymptoticsKind,
    pub scalar_curvature: f64,
    pub einstein: Option<EinsteinAsymptotics>,
    pub normalization: Option<Normalization>,
    pub ricci_flat: Option<RicciFlatAsymptotics>,
    pub second_fundamental_form: Option<SecondFundamentalForm>,
}

/// A CSV table.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Series {
    fn new(name: &str, header: Vec<String>) -> Self {
        Series {
            name: name.into(),
            header,
            rows: vec![],
        }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Outcome of a run: invalid input is reported separately from task failures,
/// which are embedded in the report.
pub enum Outcome {
    Ran(Box<Report>, Vec<Series>),
    Invalid(Error),
}

pub fn run(scenario: &Scenario, task: Task, seed_override: Option<u64>) -> Outcome {
    let model = match scenario.model() {
        Ok(m) => m,
        Err(e) => return Outcome::Invalid(e),
    };
    let seed = seed_override.or(scenario.seed).unwrap_or(0);
    let mut rng = scenario.rng(Some(seed));
    let mut diagnostics = Vec::new();
    let mut series = Vec::new();
    let results = match dispatch(
        scenario,
        task,
        &model,
        &mut rng,
        &mut diagnostics,
        &mut series,
    ) {
        Ok(r) => r,
        Err(TaskError::Invalid(e)) => return Outcome::Invalid(e),
        Err(TaskError::Failed(e)) => {
            diagnostics.push(Diagnostic::error(&e));
            None
        }
    };
    let report = Report {
        scenario: ScenarioEcho {
            name: scenario.name.clone(),
            task,
            seed,
            config: scenario.clone(),
            provenance: model.provenance.clone(),
        },
        results,
        diagnostics,
        versions: Versions {
            pcompact: env!("CARGO_PKG_VERSION"),
            report_schema: 1,
        },
    };
    Outcome::Ran(Box::new(report), series)
}

enum TaskError {
    Invalid(Error),
    Failed(Error),
}

impl From<Error> for TaskError {
    fn from(e: Error) -> Self {
        TaskError::Failed(e)
    }
}

fn invalid(e: Error) -> TaskError {
    TaskError::Invalid(e)
}

fn dispatch(
    s: &Scenario,
    task: Task,
    m: &ModelMetric,
    rng: &mut ChaCha8Rng,
    diags: &mut Vec<Diagnostic>,
    series: &mut Vec<Series>,
) -> std::result::Result<Option<TaskResult>, TaskError> {
    let conn = m.connection();
    let needs_boundary = matches!(
        task,
        Task::Compactness | Task::Order | Task::Orbits | Task::Asymptotics | Task::Normalize
    );
    let (bases, ray) = if needs_boundary {
        let bases = s.base_points(m, rng).map_err(invalid)?;
        (bases, Some(s.ray_options(&m.chart).map_err(invalid)?))
    } else {
        (vec![], None)
    };
    let result = match task {
        Task::Compactness => {
            let alpha = s
                .task
                .alpha
                .ok_or_else(|| invalid(Error::invalid("task.alpha is required for compactness")))?;
            let report = check_compactness(&conn, &m.rho, alpha, &bases, ray.as_ref().unwrap())?;
            series.push(compactness_series(&report, m.dim()));
            TaskResult::Compactness(CompactnessResult {
                extrapolation_tol: s.tolerances.extrapolation,
                divergence_slope: crate::compactness::DIVERGENCE_SLOPE,
                divergence_r2: crate::compactness::DIVERGENCE_R2,
                report,
            })
        }
        Task::Order => {
            let estimate = estimate_order(&conn, &m.rho, &bases, ray.as_ref().unwrap())?;
            let mut t = Series::new("order", vec!["ray".into(), "slope".into(), "r2".into()]);
            for (i, r) in estimate.volume.rays.iter().enumerate() {
                t.rows.push(vec![i.to_string(), num(r.slope), num(r.r2)]);
            }
            series.push(t);
            let expected = s.task.alpha;
            TaskResult::Order(OrderResult {
                expected_alpha: expected,
                relative_error: expected.map(|a| (estimate.alpha - a).abs() / a),
                estimate,
            })
        }
        Task::Bgg => TaskResult::Bgg(bgg(s, m, &conn, rng, series)?),
        Task::Geodesics => TaskResult::Geodesics(geodesics(s, m, &conn, rng, series)?),
        Task::Orbits => {
            let report = orbit_tensors(&m.metric, &m.rho, &bases, ray.as_ref().unwrap())?;
            let mut header: Vec<String> = m.chart.coord_names().to_vec();
            header.extend(
                [
                    "rank",
                    "class",
                    "sign",
                    "nu",
                    "tau_constraint",
                    "lambda_constraint",
                    "flagged",
                ]
                .map(String::from),
            );
            let mut t = Series::new("orbits", header);
            for p in &report.points {
                let mut row: Vec<String> = p.coords.iter().map(|x| num(*x)).collect();
                row.push(p.rank.to_string());
                row.push(snake(&p.class));
                row.push(p.sign.as_ref().map(snake).unwrap_or_default());
                row.push(num(p.nu));
                row.push(num(p.tau_constraint));
                row.push(num(p.lambda_constraint));
                row.push(p.flagged.to_string());
                t.rows.push(row);
            }
            series.push(t);
            if report.points.iter().any(|p| p.flagged) {
                diags.push(Diagnostic::warning("some boundary points are flagged"));
            }
            TaskResult::Orbits(report)
        }
        Task::Asymptotics => {
            TaskResult::Asymptotics(asymptotics(s, m, &conn, &bases, diags, series)?)
        }
        Task::Normalize => {
            let n = normalize(s, m)?;
            series.push(normalization_series(&n, m));
            TaskResult::Normalize(n)
        }
    };
    Ok(Some(result))
}

fn snake<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn compactness_series(report: &CompactnessReport, d: usize) -> Series {
    let mut header = vec!["ray".to_string(), "eps".to_string()];
    for c in 0..d {
        for a in 0..d {
            for b in 0..d {
                header.push(format!("G{c}{a}{b}"));
            }
        }
    }
    let mut t = Series::new("compactness", header);
    for (i, ray) in report.rays.iter().enumerate() {
        for (e, v) in ray.eps.iter().zip(&ray.values) {
            let mut row = vec![i.to_string(), num(*e)];
            row.extend(v.iter().map(|x| num(*x)));
            t.rows.push(row);
        }
    }
    t
}

fn interior_points(
    s: &Scenario,
    m: &ModelMetric,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Vec<Vec<f64>>, TaskError> {
    match &s.task.points {
        Some(list) => {
            for (i, p) in list.iter().enumerate() {
                m.chart
                    .check_point(p)
                    .map_err(|e| invalid(Error::invalid(format!("task.points[{i}]: {e}"))))?;
            }
            Ok(list.clone())
        }
        None => Ok(m.random_interior_points(rng, s.task.samples)),
    }
}

fn bgg(
    s: &Scenario,
    m: &ModelMetric,
    conn: &Connection,
    rng: &mut ChaCha8Rng,
    series: &mut Vec<Series>,
) -> std::result::Result<BggResult, TaskError> {
    let points = interior_points(s, m, rng)?;
    let kind = s.task.bgg_kind;
    let (field, label) = match &s.task.density {
        Some(text) => (
            ScalarField::parse(&m.chart, text)
                .map_err(|e| invalid(Error::invalid(format!("task.density: {e}"))))?,
            text.clone(),
        ),
        None => {
            let w = if kind == BggKind::E2 { 2.0 } else { 1.0 };
            (scale_density(conn, w)?, format!("own scale of weight {w}"))
        }
    };
    let section = match kind {
        BggKind::E1 => SectionKind::E1,
        BggKind::E2 => SectionKind::E2,
        BggKind::Metricity => SectionKind::Metricity,
    };
    let normality = is_normal(conn, section, &field, &points)?;
    let mut residuals = Vec::new();
    if kind != BggKind::Metricity {
        for p in &points {
            let r = match kind {
                BggKind::E1 => {
                    let at = ScaleAt::new(conn, p, 1)?;
                    bgg_residual_e1(&at, &field.jet(p, 2)?)?
                        .iter()
                        .fold(0.0, |a: f64, x| a.max(x.abs()))
                }
                _ => {
                    let at = ScaleAt::new(conn, p, 2)?;
                    bgg_residual_e2(&at, &field.jet(p, 3)?)?.max_abs()
                }
            };
            residuals.push(PointResidual {
                point: p.clone(),
                residual: r,
            });
        }
    }
    let mut header: Vec<String> = m.chart.coord_names().to_vec();
    header.push("residual".into());
    let mut t = Series::new("bgg", header);
    for r in &residuals {
        let mut row: Vec<String> = r.point.iter().map(|x| num(*x)).collect();
        row.push(num(r.residual));
        t.rows.push(row);
    }
    series.push(t);
    Ok(BggResult {
        kind,
        density: label,
        normal_tol: NORMAL_TOL,
        normality,
        max_residual: residuals.iter().map(|r| r.residual).reduce(f64::max),
        residuals,
    })
}

fn geodesics(
    s: &Scenario,
    m: &ModelMetric,
    conn: &Connection,
    rng: &mut ChaCha8Rng,
    series: &mut Vec<Series>,
) -> std::result::Result<GeodesicsResult, TaskError> {
    let b = m.chart.require_boundary().map_err(invalid)?;
    let initial: Vec<(Vec<f64>, Vec<f64>)> = match &s.task.initial {
        Some(list) => list.iter().map(|[x, v]| (x.clone(), v.clone())).collect(),
        None => (0..s.task.samples)
            .map(|_| {
                let x = m.chart.random_interior_point(rng, 0.25);
                let mut v: Vec<f64> = (0..m.dim())
                    .map(|_| 0.2 * rng.random_range(-1.0..1.0))
                    .collect();
                v[b] = -1.0;
                (x, v)
            })
            .collect(),
    };
    let mut opts = GeodesicOptions::new(s.task.t_max, s.tolerances.geodesic_rtol);
    opts.max_steps = 200_000;
    let trajectories = integrate_batch(conn, &initial, &opts);
    let alpha = s.task.alpha;
    let mut header = vec!["run".to_string(), "t".to_string()];
    header.extend(m.chart.coord_names().iter().cloned());
    header.extend(m.chart.coord_names().iter().map(|c| format!("v_{c}")));
    header.push("rho_value".into());
    let mut t = Series::new("geodesics", header);
    let mut runs = Vec::new();
    for (i, ((x0, v0), tr)) in initial.iter().zip(trajectories).enumerate() {
        let mut run = GeodesicRun {
            x0: x0.clone(),
            v0: v0.clone(),
            terminated: None,
            t_end: None,
            energy_drift: None,
            rejected_steps: None,
            fit: None,
            fit_consistent: None,
            divergence: None,
            error: None,
        };
        match tr {
            Ok(tr) => {
                push_trajectory(&mut t, i, &tr, &m.rho);
                run.terminated = Some(tr.terminated);
                run.t_end = Some(tr.t_end());
                run.energy_drift = tr.energy_drift;
                run.rejected_steps = Some(tr.rejected_steps);
                if let Some(a) = alpha {
                    match approach_law_fit(&tr, &m.rho, a) {
                        Ok(f) => {
                            run.fit_consistent = Some(
                                f.consistent(s.tolerances.approach_slope, s.tolerances.approach_r2),
                            );
                            run.fit = Some(f);
                        }
                        Err(e) => run.error = Some(e.to_string()),
                    }
                }
                if !s.task.cutoffs.is_empty() {
                    match cutoff_divergence(conn, x0, v0, &s.task.cutoffs, &opts) {
                        Ok(d) => run.divergence = Some(d),
                        Err(e) => run.error = Some(e.to_string()),
                    }
                }
            }
            Err(e) => run.error = Some(e.to_string()),
        }
        runs.push(run);
    }
    series.push(t);
    Ok(GeodesicsResult {
        alpha,
        rtol: s.tolerances.geodesic_rtol,
        slope_tol: s.tolerances.approach_slope,
        r2_min: s.tolerances.approach_r2,
        runs,
    })
}

fn push_trajectory(t: &mut Series, run: usize, tr: &Trajectory, rho: &ScalarField) {
    for smp in &tr.samples {
        let mut row = vec![run.to_string(), num(smp.t)];
        row.extend(smp.x.iter().map(|x| num(*x)));
        row.extend(smp.v.iter().map(|x| num(*x)));
        row.push(rho.value(&smp.x).map(num).unwrap_or_default());
        t.rows.push(row);
    }
}

fn patch(s: &Scenario, m: &ModelMetric) -> std::result::Result<Vec<(f64, f64)>, TaskError> {
    let b = m.chart.require_boundary().map_err(invalid)?;
    Ok(match &s.task.patch {
        Some(p) => p.iter().map(|x| (x[0], x[1])).collect(),
        None => m
            .chart
            .domain()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != b)
            .map(|(_, &(lo, hi))| (lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)))
            .collect(),
    })
}

fn normalize(s: &Scenario, m: &ModelMetric) -> std::result::Result<Normalization, TaskError> {
    let mut opts = NormalizeOptions::for_chart(&m.chart).map_err(invalid)?;
    opts.ray = s.ray_options(&m.chart).map_err(invalid)?;
    if let Some(d) = s.task.degree {
        opts.degree = d;
        opts.nodes = d + 6;
    }
    if let Some(n) = s.task.nodes {
        opts.nodes = n;
    }
    Ok(normalize_defining_function(
        &m.metric,
        &m.rho,
        &patch(s, m)?,
        &opts,
    )?)
}

fn normalization_series(n: &Normalization, m: &ModelMetric) -> Series {
    let dim = m.dim();
    let mut header: Vec<String> = m.chart.coord_names().to_vec();
    header.extend((0..dim - 1).map(|i| format!("phi{i}")));
    header.extend((0..dim - 1).map(|i| format!("lambda_tilde{i}")));
    header.extend(["f", "nu0", "nu_residual"].map(String::from));
    let mut t = Series::new("normalize", header);
    for node in &n.nodes {
        let mut row: Vec<String> = node.coords.iter().map(|x| num(*x)).collect();
        row.extend(node.phi.iter().map(|x| num(*x)));
        row.extend(node.lambda_tilde.iter().map(|x| num(*x)));
        row.push(n.f.value(&node.coords).map(num).unwrap_or_default());
        row.push(num(node.nu0));
        row.push(num(node.nu_residual));
        t.rows.push(row);
    }
    t
}

fn asymptotics(
    s: &Scenario,
    m: &ModelMetric,
    conn: &Connection,
    bases: &[Vec<f64>],
    diags: &mut Vec<Diagnostic>,
    series: &mut Vec<Series>,
) -> std::result::Result<AsymptoticsResult, TaskError> {
    let ray = s.ray_options(&m.chart).map_err(invalid)?;
    let mid: Vec<f64> = m
        .chart
        .domain()
        .iter()
        .map(|(lo, hi)| lo + 0.5 * (hi - lo))
        .collect();
    let r = scalar_curvature(&m.metric, &mid)?;
    let kind = match s.task.asymptotics {
        AsymptoticsKind::Auto if r.abs() < 1e-8 => AsymptoticsKind::RicciFlat,
        AsymptoticsKind::Auto => AsymptoticsKind::Einstein,
        k => k,
    };
    let mut out = AsymptoticsResult {
        kind,
        scalar_curvature: r,
        einstein: None,
        normalization: None,
        ricci_flat: None,
        second_fundamental_form: None,
    };
    let d = m.dim();
    let mut header = vec!["ray".to_string()];
    header.extend(m.chart.coord_names().iter().cloned());
    for a in 0..d {
        for b in 0..d {
            header.push(format!("h{a}{b}"));
        }
    }
    let mut t = Series::new("asymptotics", header);
    let decomposition = if kind == AsymptoticsKind::Einstein {
        let e = einstein_asymptotics(&m.metric, &m.rho, bases, &ray)?;
        let dcp = e.decomposition.clone();
        out.einstein = Some(e);
        dcp
    } else {
        let n = normalize(s, m)?;
        let rho_tilde = n.rho_tilde.clone();
        out.normalization = Some(n);
        let a = ricci_flat_asymptotics(&m.metric, &rho_tilde, bases, &ray)?;
        let dcp = a.decomposition.clone();
        out.ricci_flat = Some(a);
        match second_fundamental_form(conn, &m.rho, bases, &ray) {
            Ok(f) => out.second_fundamental_form = Some(f),
            Err(e) => diags.push(Diagnostic::warning(format!("second fundamental form: {e}"))),
        }
        dcp
    };
    for (i, ray) in decomposition.rays.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(ray.base.iter().map(|x| num(*x)));
        row.extend(ray.h_boundary.iter().map(|x| num(*x)));
        t.rows.push(row);
    }
    series.push(t);
    Ok(out)
}
