//! Run configuration: a TOML document, deserialized strictly (unknown keys are errors).

use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every other seed is derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    pub system: SystemSpec,
    pub space: SpaceSpec,
    pub construction: ConstructionSpec,
    #[serde(default)]
    pub numerics: Numerics,
    pub safety: Option<SafetySpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub plot: PlotSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Over,
    Under,
    Complete,
    Conservativeness,
    Safety,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Over => "over",
            CheckKind::Under => "under",
            CheckKind::Complete => "complete",
            CheckKind::Conservativeness => "conservativeness",
            CheckKind::Safety => "safety",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `x' = -x` in the space's dimension.
    Radial {},
    Rotation {},
    DampedPendulum {
        damping: f64,
    },
    /// `theta' = -sin(theta)`.
    CircleGradient {},
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    /// One expression per component over `x0, x1, ...`.
    Expressions {
        rhs: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKindSpec {
    #[default]
    Box,
    Torus,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    #[serde(default)]
    pub kind: SpaceKindSpec,
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGridSpec {
    /// `t = 0` plus `count` log-spaced times up to `t_max` (default: numerics.t_max).
    Log {
        count: usize,
        t_max: Option<f64>,
    },
    /// `0, step, 2 step, ...` (`count` times).
    Uniform {
        step: f64,
        count: usize,
    },
    Explicit {
        times: Vec<f64>,
    },
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        TimeGridSpec::Log { count: 32, t_max: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub step: f64,
    pub t_max: f64,
    pub time_grid: TimeGridSpec,
    /// Points per checker run.
    pub n_points: usize,
    pub mc_samples: usize,
    pub preimage_samples: usize,
    pub conservativeness_bloat: f64,
    pub coverage_samples: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            step: 1e-3,
            t_max: 10.0,
            time_grid: TimeGridSpec::default(),
            n_points: 1000,
            mc_samples: 10_000,
            preimage_samples: 1000,
            conservativeness_bloat: 0.0,
            coverage_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Rect {
        bounds: Vec<[f64; 2]>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Points at Euclidean distance `>= radius` from `center`.
    OutsideBall {
        center: Vec<f64>,
        radius: f64,
    },
    /// Points with `expr <= level`.
    Sublevel {
        expr: String,
        level: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaNormSpec {
    #[default]
    Sphere,
    Simplex,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiModeSpec {
    #[default]
    Verbatim,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilitySpec {
    Attracting,
    Repelling,
    Saddle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub label: String,
    /// Equilibrium point, or a point of the orbit when `period` is set.
    pub point: Vec<f64>,
    pub period: Option<f64>,
    pub stability: StabilitySpec,
    pub capture_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example1Spec {
    /// Tiles per axis; alternative to `regions`.
    pub partition: Option<Vec<usize>>,
    pub regions: Option<Vec<RegionSpec>>,
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default = "d_inclusion_samples")]
    pub inclusion_samples: usize,
    #[serde(default = "d_inclusion_tol")]
    pub inclusion_tol: f64,
    #[serde(default = "d_vertex_samples")]
    pub vertex_samples: usize,
    #[serde(default = "d_alpha_samples")]
    pub alpha_samples: usize,
    #[serde(default = "d_ball_samples")]
    pub ball_samples: usize,
    /// Fixed bloat radius; default `2 h^2 max|L| t`.
    pub bloat: Option<f64>,
    #[serde(default)]
    pub alpha_norm: AlphaNormSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example2Spec {
    /// Quadratic form `P` of `V = w' P w`; identity when absent.
    pub metric: Option<Vec<Vec<f64>>>,
    /// User Finsler-Lyapunov function over `x0.., w0..`; overrides `metric` for the certificate.
    pub finsler: Option<String>,
    #[serde(default = "d_degree")]
    pub degree: u32,
    /// `alpha(s)`.
    pub alpha: String,
    /// `beta(t, r)`; derived from `alpha` when absent.
    pub envelope: Option<String>,
    pub radius: f64,
    #[serde(default = "d_certificate_samples")]
    pub certificate_samples: usize,
    #[serde(default = "d_certificate_tol")]
    pub certificate_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example3Spec {
    pub elements: Vec<ElementSpec>,
    #[serde(default = "d_morse_samples")]
    pub n_samples: usize,
    #[serde(default = "d_morse_t_max")]
    pub t_max: f64,
    #[serde(default = "d_dwell")]
    pub dwell: f64,
    #[serde(default = "d_unresolved")]
    pub unresolved_threshold: f64,
    #[serde(default = "d_tol_eq")]
    pub tol_eq: f64,
    #[serde(default = "d_tol_orbit")]
    pub tol_orbit: f64,
    #[serde(default = "d_invariance_times")]
    pub invariance_times: Vec<f64>,
    #[serde(default = "d_invariance_per_cell")]
    pub invariance_per_cell: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    /// Expression over `x0..`, or `squared_norm`.
    pub v: String,
    pub gradient: Option<Vec<String>>,
    /// Strictly increasing; `-inf` / `inf` allowed at the ends.
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example4Spec {
    pub functions: Vec<LevelSpec>,
    #[serde(default)]
    pub phi_mode: PhiModeSpec,
    #[serde(default = "d_chain_tol")]
    pub chain_tol: f64,
    #[serde(default = "d_n_trajectories")]
    pub n_trajectories: usize,
    #[serde(default = "d_emptiness_probes")]
    pub emptiness_probes: usize,
    #[serde(default = "d_descent_samples")]
    pub descent_samples: usize,
    #[serde(default = "d_descent_tol")]
    pub descent_tol: f64,
    /// Optional singular elements to cross-check the levels against.
    #[serde(default)]
    pub elements: Vec<ElementSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstructionSpec {
    Example1(Example1Spec),
    Example2(Example2Spec),
    Example3(Example3Spec),
    Example4(Example4Spec),
}

impl ConstructionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ConstructionSpec::Example1(_) => "example1",
            ConstructionSpec::Example2(_) => "example2",
            ConstructionSpec::Example3(_) => "example3",
            ConstructionSpec::Example4(_) => "example4",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetySpec {
    pub init: RegionSpec,
    #[serde(rename = "unsafe")]
    pub unsafe_region: RegionSpec,
    /// Defaults to the last grid time.
    pub horizon: Option<f64>,
    #[serde(default = "d_samples_per_cell")]
    pub samples_per_cell: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSpec {
    /// Time of the drawn phi arrows; defaults to the middle grid time.
    pub t: Option<f64>,
    pub trajectories: usize,
    /// Raster cells per axis used to shade non-rectangular cells.
    pub resolution: usize,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            t: None,
            trajectories: 20,
            resolution: 60,
        }
    }
}

fn d_inclusion_samples() -> usize {
    2000
}
fn d_inclusion_tol() -> f64 {
    1e-9
}
fn d_vertex_samples() -> usize {
    64
}
fn d_alpha_samples() -> usize {
    16
}
fn d_ball_samples() -> usize {
    4
}
fn d_degree() -> u32 {
    2
}
fn d_certificate_samples() -> usize {
    1000
}
fn d_certificate_tol() -> f64 {
    1e-4
}
fn d_morse_samples() -> usize {
    1000
}
fn d_morse_t_max() -> f64 {
    60.0
}
fn d_dwell() -> f64 {
    cellflow::morse::DEFAULT_DWELL
}
fn d_unresolved() -> f64 {
    0.01
}
fn d_tol_eq() -> f64 {
    1e-8
}
fn d_tol_orbit() -> f64 {
    1e-3
}
fn d_invariance_times() -> Vec<f64> {
    vec![-10.0, -2.0, -0.5, 0.0, 0.5, 2.0, 10.0]
}
fn d_invariance_per_cell() -> usize {
    20
}
fn d_chain_tol() -> f64 {
    cellflow::levelset::DEFAULT_CHAIN_TOL
}
fn d_n_trajectories() -> usize {
    200
}
fn d_emptiness_probes() -> usize {
    20_000
}
fn d_descent_samples() -> usize {
    2000
}
fn d_descent_tol() -> f64 {
    1e-9
}
fn d_samples_per_cell() -> usize {
    200
}

/// A configuration problem, optionally anchored to a line of the source.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            line: None,
        }
    }

    /// Anchors the error at `key` inside `table` (dotted path, `name[k]` for the k-th array table).
    pub fn at(mut self, text: &str, table: &str, key: &str) -> Self {
        self.line = locate(text, table, key);
        self
    }
}

/// Parses a configuration document. Syntax and schema errors carry the line.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| {
        let mut line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        // Tagged tables report the header span; point at the offending key instead.
        if let (Some(l), Some(key)) = (line, unknown_key(e.message())) {
            line = text
                .lines()
                .enumerate()
                .skip(l - 1)
                .take_while(|(i, t)| *i + 1 == l || !t.trim_start().starts_with('['))
                .find(|(_, t)| t.split('=').next().is_some_and(|k| k.trim() == key))
                .map_or(line, |(i, _)| Some(i + 1));
        }
        ConfigError {
            message: e.message().to_string(),
            line,
        }
    })
}

fn unknown_key(message: &str) -> Option<&str> {
    message.strip_prefix("unknown field `")?.split('`').next()
}

/// 1-based line of `key = ...` inside `[table]`; `table` may end in `[k]` for
/// the k-th `[[table]]` block. Falls back to the table header.
pub fn locate(text: &str, table: &str, key: &str) -> Option<usize> {
    let (name, index) = match table.strip_suffix(']').and_then(|t| t.rsplit_once('[')) {
        Some((n, k)) => (n, k.parse::<usize>().ok()),
        None => (table, None),
    };
    let mut current = String::new();
    let mut seen = 0usize;
    let mut active = false;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.split("]]").next()) {
            current = h.trim().to_string();
            active = current == name && index == Some(seen);
            if current == name {
                seen += 1;
            }
        } else if let Some(h) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = h.trim().to_string();
            active = current == name && index.is_none();
        } else if active || (name.is_empty() && current.is_empty()) {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
            continue;
        }
        if active && header.is_none() {
            header = Some(i + 1);
        }
    }
    header
}
