//! Run configuration (TOML).
//!
//! Every block and key is optional; omitted values take the shipped
//! defaults. [`RunConfig::resolve`] expands defaults that depend on other
//! values (the cutoff radius, the time step) and the result can be echoed
//! back with [`ResolvedConfig::to_toml`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiscreteOperators, GridSpec};
use crate::ic::RandomFieldSpec;
use crate::model::{resolve_model, BoundaryLift, BoundaryPreset, ModelParams, RateLaw};
use crate::oracle::ExpSineSolution;
use crate::solver::{Scheme, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub dimension: usize,
    pub lengths: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            dimension: 1,
            lengths: vec![1.0],
            counts: vec![128],
        }
    }
}

impl GridBlock {
    pub fn build(&self) -> Result<GridSpec> {
        if self.lengths.len() != self.dimension || self.counts.len() != self.dimension {
            return Err(Error::param("dimension", "lengths and counts need one entry per axis"));
        }
        GridSpec::new(&self.lengths, &self.counts)
    }
}

/// Model constants; `R_cut` may be omitted to use the data-dependent default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "D")]
    pub diffusion: f64,
    #[serde(rename = "E")]
    pub stress_diffusion: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(rename = "beta_R")]
    pub beta_rubber: f64,
    #[serde(rename = "beta_G")]
    pub beta_glass: f64,
    pub delta_beta: f64,
    #[serde(rename = "u_RG")]
    pub u_transition: f64,
    pub beta_inf: f64,
    #[serde(rename = "R_cut", skip_serializing_if = "Option::is_none")]
    pub cutoff_radius: Option<f64>,
    pub law: RateLaw,
    pub boundary: BoundaryPreset,
}

impl Default for ModelBlock {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            diffusion: p.diffusion,
            stress_diffusion: p.stress_diffusion,
            mu: p.mu,
            nu: p.nu,
            beta_rubber: p.beta_rubber,
            beta_glass: p.beta_glass,
            delta_beta: p.delta_beta,
            u_transition: p.u_transition,
            beta_inf: p.beta_inf,
            cutoff_radius: None,
            law: p.law,
            boundary: BoundaryPreset::default(),
        }
    }
}

impl ModelBlock {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            diffusion: self.diffusion,
            stress_diffusion: self.stress_diffusion,
            mu: self.mu,
            nu: self.nu,
            beta_rubber: self.beta_rubber,
            beta_glass: self.beta_glass,
            delta_beta: self.delta_beta,
            u_transition: self.u_transition,
            beta_inf: self.beta_inf,
            cutoff_radius: self.cutoff_radius.unwrap_or(f64::INFINITY),
            law: self.law,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    pub scheme: Scheme,
    /// Omitted: the largest step ≤ `min(0.25/β_R, h)` dividing `sample_interval`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Time between recorded samples; must be a multiple of `dt`.
    pub sample_interval: f64,
    pub max_value_guard: f64,
    pub frozen_concentration: bool,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            scheme: Scheme::ImexCn,
            dt: None,
            t_end: 60.0,
            sample_interval: 0.25,
            max_value_guard: 1e12,
            frozen_concentration: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsBlock {
    /// Exponent of the H^{-δ} metric, in (0, 1].
    pub delta: f64,
    /// Window length M of the trajectory metric.
    pub horizon: f64,
    pub shifts: Vec<f64>,
    pub ensemble_size: usize,
    pub calibration_size: usize,
    pub validation_size: usize,
    /// Largest initial χ of the validation ensemble, in units of Γ̂.
    pub chi_max_factor: f64,
    /// Dissipation runs use `[0, dissipation_t_end]`.
    pub dissipation_t_end: f64,
    pub late_fraction: f64,
    pub safety: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for DiagnosticsBlock {
    fn default() -> Self {
        Self {
            delta: 0.5,
            horizon: 5.0,
            shifts: vec![0.0, 5.0, 10.0, 20.0, 40.0],
            ensemble_size: 8,
            calibration_size: 10,
            validation_size: 10,
            chi_max_factor: 1e6,
            dissipation_t_end: 50.0,
            late_fraction: crate::diagnostics::DEFAULT_LATE_FRACTION,
            safety: crate::diagnostics::DEFAULT_SAFETY,
            tolerance: 0.05,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    Random,
}

/// Initial data for `simulate` and the random ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub kind: InitialKind,
    /// Number of eigenmodes in random fields.
    pub modes: usize,
    /// Coefficient k is drawn with standard deviation `k^{-decay}`.
    pub decay: f64,
    /// Product L₂ norm of `(v, τ)` for random data.
    pub norm: f64,
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self {
            kind: InitialKind::Random,
            modes: 16,
            decay: 1.0,
            norm: 2.0,
        }
    }
}

impl InitialBlock {
    pub fn field_spec(&self) -> RandomFieldSpec {
        RandomFieldSpec {
            modes: self.modes,
            decay: self.decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsBlock {
    /// Grid counts per axis for the spatial study; `h` should halve.
    pub spatial_counts: Vec<usize>,
    /// `dt = spatial_dt_ratio · h` in the spatial study.
    pub spatial_dt_ratio: f64,
    pub temporal_count: usize,
    pub temporal_dts: Vec<f64>,
    pub t_end: f64,
    pub amp_v: f64,
    pub amp_tau: f64,
    pub rate: f64,
}

impl Default for MmsBlock {
    fn default() -> Self {
        Self {
            spatial_counts: vec![15, 31, 63, 127],
            spatial_dt_ratio: 0.5,
            temporal_count: 31,
            temporal_dts: vec![0.04, 0.02, 0.01, 0.005],
            t_end: 0.5,
            amp_v: 1.0,
            amp_tau: 1.0,
            rate: 1.0,
        }
    }
}

impl MmsBlock {
    pub fn solution(&self) -> ExpSineSolution {
        ExpSineSolution {
            amp_v: self.amp_v,
            amp_tau: self.amp_tau,
            rate: self.rate,
            modes: [1, 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Pdif,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec![OutputFormat::Csv, OutputFormat::Pdif],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub model: ModelBlock,
    pub solver: SolverBlock,
    pub diagnostics: DiagnosticsBlock,
    pub initial: InitialBlock,
    pub mms: MmsBlock,
    pub output: OutputBlock,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Line of the first `key = …` assignment, if any.
fn find_key_line(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl RunConfig {
    /// Parses and validates; errors carry `line N` anchors where possible.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| {
            let msg = e.message().trim().to_owned();
            match e.span() {
                Some(span) => {
                    let (l, c) = line_col(src, span.start);
                    Error::Config(format!("line {l}, column {c}: {msg}"))
                }
                None => Error::Config(msg),
            }
        })?;
        cfg.resolve().map_err(|e| {
            let key = match &e {
                Error::Parameter { name, .. } => Some(name.rsplit(['.', '/']).next().unwrap_or(name).to_owned()),
                _ => None,
            };
            match key.and_then(|k| find_key_line(src, &k)) {
                Some(line) => Error::Config(format!("line {line}: {e}")),
                None => Error::Config(e.to_string()),
            }
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&src)
    }

    /// Validates every block and expands data-dependent defaults.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let grid = self.grid.build()?;
        let raw = self.model.params();
        raw.validate()?;
        let (params, lift) = resolve_model(&grid, &self.model.boundary, &raw)?;

        let s = &self.solver;
        if !(s.sample_interval > 0.0) || !s.sample_interval.is_finite() {
            return Err(Error::param("sample_interval", "must be positive"));
        }
        let (dt, stride) = match s.dt {
            Some(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::param("dt", "must be positive"));
                }
                let k = s.sample_interval / dt;
                if (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() < 1.0 {
                    return Err(Error::param("sample_interval", "must be a positive multiple of dt"));
                }
                (dt, k.round() as usize)
            }
            None => {
                let cap = SolverConfig::default_dt(&grid, &params);
                let k = (s.sample_interval / cap).ceil().max(1.0);
                (s.sample_interval / k, k as usize)
            }
        };
        let solver = SolverConfig {
            dt,
            t_end: s.t_end,
            scheme: s.scheme,
            sample_stride: stride,
            max_value_guard: s.max_value_guard,
            frozen_concentration: s.frozen_concentration,
        };
        solver.validate()?;

        let d = &self.diagnostics;
        if !(d.delta > 0.0 && d.delta <= 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1]"));
        }
        if !(d.horizon >= 0.0) || d.shifts.is_empty() || d.shifts.iter().any(|h| !(*h >= 0.0)) {
            return Err(Error::param("shifts", "need a nonnegative horizon and at least one nonnegative shift"));
        }
        if d.shifts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("shifts", "must be strictly increasing"));
        }
        if d.ensemble_size == 0 || d.calibration_size == 0 || d.validation_size == 0 {
            return Err(Error::param("ensemble_size", "ensembles must be nonempty"));
        }
        if !(d.chi_max_factor >= 1.0) {
            return Err(Error::param("chi_max_factor", "must be at least 1"));
        }
        if !(d.dissipation_t_end > 0.0) {
            return Err(Error::param("dissipation_t_end", "must be positive"));
        }
        if !(0.0..1.0).contains(&d.late_fraction) || !(d.safety >= 1.0) || !(d.tolerance >= 0.0) {
            return Err(Error::param("late_fraction", "need 0 ≤ late_fraction < 1, safety ≥ 1, tolerance ≥ 0"));
        }
        self.initial.field_spec().validate()?;
        if !(self.initial.norm >= 0.0) || !self.initial.norm.is_finite() {
            return Err(Error::param("norm", "must be finite and nonnegative"));
        }
        let m = &self.mms;
        if m.spatial_counts.len() < 2 || m.temporal_dts.len() < 2 {
            return Err(Error::param("spatial_counts", "refinement studies need at least two levels"));
        }
        if !(m.t_end > 0.0) || !(m.spatial_dt_ratio > 0.0) || m.temporal_dts.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::param("t_end", "MMS times and steps must be positive"));
        }
        Ok(ResolvedConfig {
            source: self.clone(),
            grid,
            params,
            lift,
            solver,
        })
    }
}

/// Validated configuration with all derived quantities filled in.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub source: RunConfig,
    pub grid: GridSpec,
    pub params: ModelParams,
    pub lift: BoundaryLift,
    pub solver: SolverConfig,
}

impl ResolvedConfig {
    pub fn operators(&self) -> Result<DiscreteOperators> {
        DiscreteOperators::new(self.grid)
    }

    /// The run configuration with `R_cut` and `dt` made explicit.
    pub fn expanded(&self) -> RunConfig {
        let mut c = self.source.clone();
        c.model.cutoff_radius = Some(self.params.cutoff_radius);
        c.solver.dt = Some(self.solver.dt);
        c
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.expanded()).map_err(|e| Error::Config(e.to_string()))
    }
}
