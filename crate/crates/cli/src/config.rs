//! Experiment configuration files (TOML).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nonlocal_core::{DiscreteKernel, Grid, InitialDatum, Kernel, KernelSpec};
use serde::Deserialize;

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LinearAsymptotics,
    WEstimates,
    Supercritical,
    LogCase,
    TailPreservation,
    SolverCrossval,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LinearAsymptotics => "linear-asymptotics",
            ExperimentKind::WEstimates => "w-estimates",
            ExperimentKind::Supercritical => "supercritical",
            ExperimentKind::LogCase => "log-case",
            ExperimentKind::TailPreservation => "tail-preservation",
            ExperimentKind::SolverCrossval => "solver-crossval",
        }
    }

    /// Checks run when the config lists none.
    pub fn default_checks(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::LinearAsymptotics => &["decreasing", "slope"],
            ExperimentKind::WEstimates => &["mass_identity", "symbol_diffusivity", "rate_q1", "rate_q2", "rate_q4"],
            ExperimentKind::Supercritical => &["ratio", "slope_negative", "comparison", "bounded", "duhamel_trend"],
            ExperimentKind::LogCase => &["ratio", "log_constant", "comparison"],
            ExperimentKind::TailPreservation => &["datum_tail", "tail"],
            ExperimentKind::SolverCrossval => &["picard_gap", "richardson_order"],
        }
    }

    pub fn accepts(self, check: &str) -> bool {
        let fixed: &[&str] = match self {
            ExperimentKind::LinearAsymptotics => &["decreasing", "slope"],
            ExperimentKind::WEstimates => &["mass_identity", "diffusivity", "symbol_diffusivity", "rescaled_bounded"],
            ExperimentKind::Supercritical => &[
                "ratio",
                "slope_negative",
                "decreasing",
                "comparison",
                "bounded",
                "duhamel_trend",
                "duhamel_agreement",
            ],
            ExperimentKind::LogCase => &["ratio", "log_constant", "comparison", "bounded", "decreasing"],
            ExperimentKind::TailPreservation => &["datum_tail", "tail"],
            ExperimentKind::SolverCrossval => &["picard_gap", "richardson_order", "contraction"],
        };
        fixed.contains(&check) || (self == ExperimentKind::WEstimates && rate_exponent(check).is_some())
    }
}

/// `q` encoded in a `rate_q<q>` check name (`rate_qinf` for infinity).
pub fn rate_exponent(check: &str) -> Option<f64> {
    let q = check.strip_prefix("rate_q")?;
    let q = if q == "inf" { f64::INFINITY } else { q.parse::<f64>().ok()? };
    (q >= 1.0).then_some(q)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dimension: usize,
    pub half_length: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatumForm {
    Regularized,
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    pub form: DatumForm,
    #[serde(default)]
    pub amplitude: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    List(Vec<f64>),
    Decades { from: f64, to: f64, per_decade: usize },
}

impl TimeSpec {
    pub fn expand(&self) -> Vec<f64> {
        match self {
            TimeSpec::List(v) => v.clone(),
            TimeSpec::Decades { from, to, per_decade } => {
                let (a, b) = (from.log10(), to.log10());
                let steps = ((b - a) * *per_decade as f64).round().max(0.0) as usize;
                (0..=steps)
                    .map(|k| {
                        let t = 10f64.powf(a + k as f64 / *per_decade as f64);
                        // snap to a clean value when the exponent is an integer
                        let rounded = t.round();
                        if (t - rounded).abs() <= 1e-9 * t { rounded } else { t }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_growth")]
    pub growth: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_dt_min() -> f64 {
    0.01
}
fn default_dt_max() -> f64 {
    2.0
}
fn default_growth() -> f64 {
    0.02
}
fn default_safety() -> f64 {
    2.0
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            dt_min: default_dt_min(),
            dt_max: default_dt_max(),
            growth: default_growth(),
            safety: default_safety(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    /// Overrides the default limit (or tolerance around a target).
    pub tolerance: Option<f64>,
    pub target: Option<f64>,
    pub early: Option<f64>,
    pub late: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    /// Rerun on a grid of twice the length; the error may move by <= 10%.
    Domain,
    /// Rerun with halved steps; the error may drift by <= 1%.
    Timestep,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub datum: Option<DatumSpec>,
    pub exponent: Option<f64>,
    pub times: Option<TimeSpec>,
    pub window: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub export_fields: bool,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    pub audits: Option<Vec<AuditKind>>,
}

/// A parsed config with its module objects constructed and preconditions
/// checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub source: String,
    pub base_dir: PathBuf,
    pub grid: Grid,
    pub kernel: DiscreteKernel,
    pub datum: Option<InitialDatum>,
    pub times: Vec<f64>,
    pub checks: Vec<CheckSpec>,
    pub audits: Vec<AuditKind>,
}

fn invalid(message: impl Into<String>) -> LabError {
    LabError::Config(message.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Experiment::from_source(source, base_dir)
    }

    pub fn from_source(source: String, base_dir: PathBuf) -> Result<Self, LabError> {
        let config = ExperimentConfig::parse(&source)?;
        let kind = config.kind;
        if config.name.is_empty() || config.name.contains(['/', '\\']) || config.name.starts_with('.') {
            return Err(invalid(format!("name `{}` is not a plain directory name", config.name)));
        }
        if config.grid.dimension != config.kernel.dimension {
            return Err(invalid(format!(
                "grid dimension {} differs from kernel dimension {}",
                config.grid.dimension, config.kernel.dimension
            )));
        }
        let grid = Grid::new(config.grid.dimension, config.grid.half_length, config.grid.points)?;
        let kernel = Kernel::from_spec(&config.kernel)?.discretize(&grid)?;

        let datum = match (&config.datum, kind) {
            (None, ExperimentKind::WEstimates) => None,
            (None, _) => return Err(invalid(format!("experiment kind {} needs a [datum] table", kind.name()))),
            (Some(d), _) => Some(match d.form {
                DatumForm::Zero => InitialDatum::zero(d.alpha)?,
                DatumForm::Regularized => InitialDatum::regularized_power(d.amplitude, d.alpha)?,
            }),
        };
        if let Some(d) = &datum {
            d.check_tail(&grid)?;
        }

        let needs_exponent = matches!(
            kind,
            ExperimentKind::Supercritical | ExperimentKind::LogCase | ExperimentKind::SolverCrossval
        );
        if needs_exponent && config.exponent.is_none() {
            return Err(invalid(format!("experiment kind {} needs `exponent`", kind.name())));
        }
        if let Some(p) = config.exponent {
            if !(p > 1.0 && p.is_finite()) {
                return Err(invalid(format!("exponent must exceed 1, got {p}")));
            }
        }
        let n = config.grid.dimension as f64;
        if let (Some(d), Some(p)) = (&datum, config.exponent) {
            let alpha = d.alpha();
            match kind {
                ExperimentKind::Supercritical => {
                    if alpha >= n {
                        return Err(invalid(format!(
                            "supercritical experiments need alpha < N (got alpha = {alpha}); use kind log-case"
                        )));
                    }
                    if p <= 1.0 + 2.0 / alpha {
                        return Err(invalid(format!(
                            "p = {p} is not supercritical for alpha = {alpha} (need p > {})",
                            1.0 + 2.0 / alpha
                        )));
                    }
                }
                ExperimentKind::LogCase if (alpha - n).abs() > 1e-12 => {
                    return Err(invalid(format!("log-case experiments need alpha = N, got alpha = {alpha}")));
                }
                _ => {}
            }
        }

        let times = match (&config.times, kind) {
            (None, ExperimentKind::SolverCrossval) => Vec::new(),
            (None, _) => return Err(invalid(format!("experiment kind {} needs `times`", kind.name()))),
            (Some(spec), _) => spec.expand(),
        };
        if kind != ExperimentKind::SolverCrossval {
            if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(invalid("times must be positive and finite"));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("times must be strictly increasing"));
            }
        }
        if kind == ExperimentKind::LogCase && times[0] < 2f64.exp() {
            return Err(invalid(format!("log-case times must be >= e^2, got {}", times[0])));
        }
        let window = match kind {
            ExperimentKind::Supercritical | ExperimentKind::LogCase => {
                let k = config
                    .window
                    .ok_or_else(|| invalid(format!("experiment kind {} needs `window`", kind.name())))?;
                let w = nonlocal_core::ParabolaWindow::new(k)?;
                w.check(&grid, *times.last().expect("validated nonempty"))?;
                k
            }
            _ => 0.0,
        };
        if matches!(
            kind,
            ExperimentKind::Supercritical | ExperimentKind::LogCase | ExperimentKind::LinearAsymptotics
        ) {
            let t_max = *times.last().expect("validated nonempty");
            grid.check_budget(nonlocal_core::grid::domain_budget(
                config.kernel.radius,
                window,
                t_max,
                config.solver.safety,
            ))?;
        }
        if let Some(q) = &config.q {
            if q.iter().any(|q| q.is_nan() || *q < 1.0) {
                return Err(invalid("every q must lie in [1, inf]"));
            }
        }
        if let Some(h) = config.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid(format!("horizon must be positive, got {h}")));
            }
        }
        let s = &config.solver;
        if !(s.dt_min > 0.0 && s.dt_max >= s.dt_min && s.growth >= 0.0 && s.safety >= 0.0) {
            return Err(invalid("solver needs 0 < dt_min <= dt_max, growth >= 0 and safety >= 0"));
        }

        let checks: Vec<CheckSpec> = if config.checks.is_empty() {
            kind.default_checks()
                .iter()
                .map(|name| CheckSpec {
                    name: (*name).to_string(),
                    tolerance: None,
                    target: None,
                    early: None,
                    late: None,
                })
                .collect()
        } else {
            config.checks.clone()
        };
        let mut seen = BTreeSet::new();
        for c in &checks {
            if !kind.accepts(&c.name) {
                return Err(invalid(format!("unknown check `{}` for kind {}", c.name, kind.name())));
            }
            if !seen.insert(c.name.clone()) {
                return Err(invalid(format!("check `{}` listed twice", c.name)));
            }
            if c.name == "diffusivity" && c.target.is_none() {
                return Err(invalid("check `diffusivity` needs a `target`"));
            }
            if let Some(tol) = c.tolerance {
                if !(tol >= 0.0) {
                    return Err(invalid(format!("check `{}`: tolerance must be >= 0", c.name)));
                }
            }
            for (label, t) in [("early", c.early), ("late", c.late)] {
                if let Some(t) = t {
                    if !times.iter().any(|s| (s - t).abs() <= 1e-9 * t.max(1.0)) {
                        return Err(invalid(format!("check `{}`: {label} time {t} is not a sample time", c.name)));
                    }
                }
            }
        }

        let audits = match &config.audits {
            Some(list) => list.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
            None => match kind {
                ExperimentKind::Supercritical | ExperimentKind::LogCase => vec![AuditKind::Domain, AuditKind::Timestep],
                ExperimentKind::LinearAsymptotics => vec![AuditKind::Domain],
                _ => Vec::new(),
            },
        };

        Ok(Experiment {
            config,
            source,
            base_dir,
            grid,
            kernel,
            datum,
            times,
            checks,
            audits,
        })
    }
}
