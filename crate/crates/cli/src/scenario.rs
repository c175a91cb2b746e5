//! Scenario documents (JSON, schema version 1) and their validation.

use std::f64::consts::PI;
use std::fmt;

use ricci_lab::flow::{FlowControls, Horizon};
use ricci_lab::geom::{compute_curvature, max_epsilon, FrameMetric, HomogeneousModel, ModelKind};
use ricci_lab::rvol::{FlowBackground, VolumeOptions};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelName,
    /// Structure constants; required for `custom`, checked against the named value otherwise.
    #[serde(default)]
    pub lambda: Option<[f64; 3]>,
    pub g0: InitialMetric,
    #[serde(default)]
    pub controls: ControlsSpec,
    pub tasks: Vec<Task>,
    /// Output directory, relative to the scenario file; `--out` overrides it.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Su2,
    Nil,
    Sol,
    Abelian,
    Custom,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialMetric {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EndSpec {
    Time(f64),
    Keyword(EndKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKeyword {
    UntilSingularity,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsSpec {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_start: Option<f64>,
    pub t_end: Option<EndSpec>,
    pub max_steps: Option<usize>,
    pub dense_output_stride: Option<f64>,
    pub blowup_threshold: Option<f64>,
    pub max_relative_change: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Value(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundSpec {
    StaticFlat { dim: usize },
    ShrinkingRoundS3 { a0: f64 },
    /// The scenario's own flow run.
    HomogeneousNumeric,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub n_polar: Option<usize>,
    pub n_azimuth: Option<usize>,
    pub n_radial: Option<usize>,
    pub cutoff: Option<f64>,
    pub steps: Option<usize>,
}

impl QuadratureSpec {
    pub fn options(&self) -> VolumeOptions {
        let mut o = VolumeOptions::default();
        o.n_polar = self.n_polar.unwrap_or(o.n_polar);
        o.n_azimuth = self.n_azimuth.unwrap_or(o.n_azimuth);
        o.n_radial = self.n_radial.unwrap_or(o.n_radial);
        o.cutoff = self.cutoff.unwrap_or(o.cutoff);
        if let Some(s) = self.steps {
            o.shoot.steps = s;
        }
        o
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Flow,
    Pinching {
        epsilon: EpsilonSpec,
    },
    Decay {
        omega: f64,
        #[serde(default)]
        epsilon: Option<EpsilonSpec>,
    },
    Classify,
    Blowup {
        gammas: Vec<f64>,
    },
    Noncollapse {
        t0: f64,
        r: f64,
        kappa: f64,
    },
    Ballvolume {
        r_max: f64,
        #[serde(default = "default_grid")]
        grid: usize,
    },
    Collapse {
        eps0: f64,
        #[serde(default = "default_r_cap")]
        r_cap: f64,
    },
    Rvol {
        background: BackgroundSpec,
        taus: Vec<f64>,
        #[serde(default)]
        quadrature: QuadratureSpec,
    },
    Limitcheck {
        background: BackgroundSpec,
        vs: Vec<Vec<f64>>,
        taus: Vec<f64>,
    },
}

fn default_grid() -> usize {
    64
}

fn default_r_cap() -> f64 {
    10.0
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Flow => "flow",
            Task::Pinching { .. } => "pinching",
            Task::Decay { .. } => "decay",
            Task::Classify => "classify",
            Task::Blowup { .. } => "blowup",
            Task::Noncollapse { .. } => "noncollapse",
            Task::Ballvolume { .. } => "ballvolume",
            Task::Collapse { .. } => "collapse",
            Task::Rvol { .. } => "rvol",
            Task::Limitcheck { .. } => "limitcheck",
        }
    }

    pub fn needs_flow(&self) -> bool {
        match self {
            Task::Flow | Task::Ballvolume { .. } | Task::Collapse { .. } => false,
            Task::Rvol { background, .. } | Task::Limitcheck { background, .. } => {
                matches!(background, BackgroundSpec::HomogeneousNumeric)
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    /// `scenario`, `controls`, or `tasks[i]`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{s}: {}: {}", self.location, self.message)
    }
}

#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

pub fn parse(text: &str) -> Result<Scenario, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError { line: e.line(), column: e.column(), message: e.to_string() })
}

impl Scenario {
    pub fn model(&self) -> anyhow::Result<HomogeneousModel<f64>> {
        Ok(match self.model {
            ModelName::Su2 => HomogeneousModel::named(ModelKind::Su2),
            ModelName::Nil => HomogeneousModel::named(ModelKind::Nil),
            ModelName::Sol => HomogeneousModel::named(ModelKind::Sol),
            ModelName::Abelian => HomogeneousModel::named(ModelKind::Abelian),
            ModelName::Custom => {
                let l = self.lambda.ok_or_else(|| anyhow::anyhow!("custom model needs lambda"))?;
                HomogeneousModel::custom(l)?
            }
        })
    }

    pub fn initial_metric(&self) -> anyhow::Result<FrameMetric<f64>> {
        Ok(match &self.g0 {
            InitialMetric::Diagonal(d) => FrameMetric::diagonal(*d)?,
            InitialMetric::Full(m) => FrameMetric::new(*m)?,
        })
    }

    pub fn controls(&self) -> FlowControls<f64> {
        let c = &self.controls;
        let mut out = FlowControls::default();
        if let Some(v) = c.rel_tol {
            out.rel_tol = v;
        }
        if let Some(v) = c.abs_tol {
            out.abs_tol = v;
        }
        if let Some(v) = c.t_start {
            out.t_start = v;
        }
        out.t_end = match c.t_end {
            Some(EndSpec::Time(t)) => Horizon::Time(t),
            _ => Horizon::UntilSingularity,
        };
        if let Some(v) = c.max_steps {
            out.max_steps = v;
        }
        if let Some(v) = c.dense_output_stride {
            out.dense_output_stride = v;
        }
        if let Some(v) = c.blowup_threshold {
            out.blowup_threshold = v;
        }
        if let Some(v) = c.max_relative_change {
            out.max_relative_change = v;
        }
        out
    }

    /// Largest admissible pinching constant of `g₀`, if `g₀` is pinched at all.
    pub fn max_epsilon(&self) -> Option<f64> {
        let model = self.model().ok()?;
        let g = self.initial_metric().ok()?;
        max_epsilon(&compute_curvature(&model, &g))
    }

    pub fn resolve_epsilon(&self, spec: EpsilonSpec) -> Option<f64> {
        match spec {
            EpsilonSpec::Value(e) => Some(e),
            EpsilonSpec::Auto(_) => self.max_epsilon(),
        }
    }

    /// The ε used for the CSV margin column: the first pinching task's, else `max_epsilon(g₀)`.
    pub fn csv_epsilon(&self) -> f64 {
        self.tasks
            .iter()
            .find_map(|t| match t {
                Task::Pinching { epsilon } => self.resolve_epsilon(*epsilon),
                _ => None,
            })
            .or_else(|| self.max_epsilon())
            .unwrap_or(0.0)
    }

    /// Background for an rvol task, given the scenario's trajectory when needed.
    pub fn background(
        spec: &BackgroundSpec,
        flow: Option<&ricci_lab::flow::FlowTrajectory<f64>>,
    ) -> anyhow::Result<FlowBackground<f64>> {
        Ok(match spec {
            BackgroundSpec::StaticFlat { dim } => FlowBackground::flat(*dim),
            BackgroundSpec::ShrinkingRoundS3 { a0 } => FlowBackground::round(*a0),
            BackgroundSpec::HomogeneousNumeric => {
                let traj = flow.ok_or_else(|| anyhow::anyhow!("numeric background needs the flow task"))?;
                FlowBackground::numeric(traj.clone())
            }
        })
    }

    pub fn validate(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut err = |loc: &str, msg: String| {
            out.push(Finding { severity: Severity::Error, location: loc.to_string(), message: msg })
        };
        if self.schema_version != SCHEMA_VERSION {
            err("scenario", format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.name.trim().is_empty() {
            err("scenario", "name must not be empty".into());
        }
        let model = match self.model() {
            Ok(m) => Some(m),
            Err(e) => {
                err("scenario", format!("model: {e}"));
                None
            }
        };
        if let (Some(m), Some(l), false) = (model, self.lambda, self.model == ModelName::Custom) {
            if m.lambda != l {
                err("scenario", format!("lambda {l:?} contradicts the named model (λ = {:?})", m.lambda));
            }
        }
        let g0 = match self.initial_metric() {
            Ok(g) => Some(g),
            Err(e) => {
                err("scenario", format!("g0: {e}"));
                None
            }
        };
        if let Err(e) = self.controls().validate() {
            err("controls", e.to_string());
        }
        if self.tasks.is_empty() {
            err("scenario", "no tasks".into());
        }
        let has_flow = self.tasks.iter().any(|t| matches!(t, Task::Flow));
        let report = match (model, g0) {
            (Some(m), Some(g)) => Some(compute_curvature(&m, &g)),
            _ => None,
        };
        let eps_max = report.as_ref().and_then(max_epsilon);
        let t_start = self.controls().t_start;
        let mut findings_tail = Vec::new();
        for (i, task) in self.tasks.iter().enumerate() {
            let loc = format!("tasks[{i}] ({})", task.kind());
            let mut e = |m: String| findings_tail.push(Finding { severity: Severity::Error, location: loc.clone(), message: m });
            if task.needs_flow() && !has_flow {
                e("requires a flow task in the same scenario".into());
            }
            let check_eps = |eps: Option<EpsilonSpec>, e: &mut dyn FnMut(String)| {
                let requested = match eps {
                    Some(EpsilonSpec::Value(v)) => Some(v),
                    _ => None,
                };
                if let Some(v) = requested {
                    if !(v > 0.0 && v <= 1.0 / 3.0) {
                        e(format!("ε = {v} outside (0, 1/3]"));
                    }
                }
                match (requested, eps_max) {
                    (_, None) if report.is_some() => e(format!(
                        "pinching precondition unsatisfiable: g0 has no pinching constant (R = {:.6e})",
                        report.as_ref().map(|r| r.scalar).unwrap_or(f64::NAN)
                    )),
                    (Some(v), Some(m)) if v > m + 1e-12 => {
                        e(format!("pinching precondition unsatisfiable: ε = {v} exceeds max ε = {m:.6} of g0"))
                    }
                    _ => {}
                }
            };
            match task {
                Task::Flow | Task::Classify => {}
                Task::Pinching { epsilon } => check_eps(Some(*epsilon), &mut e),
                Task::Decay { omega, epsilon } => {
                    check_eps(Some(epsilon.unwrap_or(EpsilonSpec::Auto(AutoKeyword::Auto))), &mut e);
                    if !omega.is_finite() || *omega > t_start {
                        e(format!("ω = {omega} must not exceed t_start = {t_start}"));
                    }
                }
                Task::Blowup { gammas } => {
                    if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
                        e("γ values must lie in (0, 1)".into());
                    }
                    if gammas.windows(2).any(|w| w[1] <= w[0]) {
                        e("γ sequence must be strictly increasing".into());
                    }
                }
                Task::Noncollapse { t0, r, kappa } => {
                    if !(*r > 0.0) || !(*kappa > 0.0) {
                        e("r and κ must be positive".into());
                    }
                    if *t0 - r * r < t_start {
                        e(format!("parabolic window [{}, {t0}] starts before t_start = {t_start}", t0 - r * r));
                    }
                }
                Task::Ballvolume { r_max, grid } => {
                    if !(*r_max > 0.0) || *grid == 0 {
                        e("r_max and grid must be positive".into());
                    }
                }
                Task::Collapse { eps0, r_cap } => {
                    if *eps0 >= 4.0 * PI / 3.0 {
                        e(format!("ε₀ = {eps0}: ε₀ ≥ 4π/3 degenerate (every ball is below the Euclidean ratio)"));
                    } else if !(*eps0 > 0.0) {
                        e(format!("ε₀ = {eps0} must be positive"));
                    }
                    if !(*r_cap > 0.0) {
                        e("r_cap must be positive".into());
                    }
                }
                Task::Rvol { background, taus, quadrature } => {
                    check_background(background, taus, &mut e);
                    let o = quadrature.options();
                    if let Err(x) = o.validate() {
                        e(x.to_string());
                    }
                    if o.cutoff < 3.2 {
                        findings_tail.push(Finding {
                            severity: Severity::Warning,
                            location: loc.clone(),
                            message: format!("cutoff {} < 3.2: the Gaussian tail may dominate the error", o.cutoff),
                        });
                    }
                }
                Task::Limitcheck { background, vs, taus } => {
                    check_background(background, taus, &mut e);
                    let dim = match background {
                        BackgroundSpec::StaticFlat { dim } => *dim,
                        _ => 3,
                    };
                    if vs.is_empty() || vs.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
                        e(format!("every V must have {dim} finite components"));
                    }
                }
            }
        }
        if self.tasks.iter().filter(|t| matches!(t, Task::Flow)).count() > 1 {
            findings_tail.push(Finding {
                severity: Severity::Warning,
                location: "scenario".into(),
                message: "more than one flow task; they produce identical runs".into(),
            });
        }
        if has_flow
            && matches!(self.controls().t_end, Horizon::UntilSingularity)
            && matches!(self.model, ModelName::Nil | ModelName::Sol | ModelName::Abelian)
        {
            findings_tail.push(Finding {
                severity: Severity::Warning,
                location: "controls".into(),
                message: "no t_end on an immortal model: the run stops at max_steps".into(),
            });
        }
        out.extend(findings_tail);
        out
    }
}

fn check_background(bg: &BackgroundSpec, taus: &[f64], e: &mut dyn FnMut(String)) {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        e("τ values must be positive and finite".into());
    }
    match bg {
        BackgroundSpec::StaticFlat { dim } if !(1..=3).contains(dim) => e(format!("flat dimension {dim} not in 1..=3")),
        BackgroundSpec::ShrinkingRoundS3 { a0 } => {
            if !(*a0 > 0.0) {
                e(format!("A₀ = {a0} must be positive"));
            } else if let Some(t) = taus.iter().find(|t| **t >= a0 / 4.0) {
                e(format!("τ = {t} is past the extinction time A₀/4 = {}", a0 / 4.0));
            }
        }
        _ => {}
    }
}
