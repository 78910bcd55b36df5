//! Experiment configuration: a TOML file whose keys mirror the fields below.

use super::HarnessError;
use crate::models::{FluxModel, ViscosityConstants, ViscosityModel};
use crate::solver::{Grid1D, SimState};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluxSpec {
    Zero,
    Burgers,
    Power {
        m: f64,
    },
    Table {
        u: Vec<f64>,
        f: Vec<f64>,
        m: f64,
        #[serde(default = "one")]
        c1: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViscositySpec {
    Linear {
        #[serde(default)]
        constants: Option<ViscosityConstantsSpec>,
    },
    VonNeumann {
        #[serde(default)]
        constants: Option<ViscosityConstantsSpec>,
    },
    Power {
        r: f64,
        #[serde(default)]
        constants: Option<ViscosityConstantsSpec>,
    },
    Table {
        lambda: Vec<f64>,
        beta: Vec<f64>,
        #[serde(default)]
        constants: Option<ViscosityConstantsSpec>,
    },
}

/// Declared constants for the viscosity assumptions; omitted keys keep the
/// model's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscosityConstantsSpec {
    pub r: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub c5: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `u_l` on the left half of the domain, `u_r` on the right half.
    Riemann { u_l: f64, u_r: f64 },
    /// `amplitude · sin(2π · periods · (x − x_left) / L)`.
    Sine { amplitude: f64, periods: u32 },
    /// `amplitude · exp(−((x − centre) / width)²)`.
    GaussianBump { amplitude: f64, width: f64 },
    /// Nodal values from an `x,u` CSV with exactly `cells` rows.
    FromFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub x_left: f64,
    pub x_right: f64,
    pub cells: usize,
    /// When set, the cell count becomes ⌈L · cells_per_epsilon / ε⌉ for
    /// ε > 0 (so h ≈ ε / cells_per_epsilon), which lets sweeps refine with ε.
    #[serde(default)]
    pub cells_per_epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    pub entropy: bool,
    pub histogram: bool,
    /// Evenly spaced states stored in addition to `snapshot_times`.
    pub stored_states: usize,
    pub k_count: usize,
    pub space_hats: usize,
    pub time_hats: usize,
    pub histogram_cells_x: usize,
    pub histogram_cells_t: usize,
    pub histogram_bins: usize,
    /// Histogram window starts here instead of at t = 0.
    pub histogram_t_min: f64,
    /// Godunov reference grid is this many times finer than the run grid.
    pub reference_refinement: usize,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        let (cx, ct, b) = crate::diagnostics::DEFAULT_HISTOGRAM_SHAPE;
        Self {
            entropy: true,
            histogram: true,
            stored_states: 48,
            k_count: crate::diagnostics::DEFAULT_K_COUNT,
            space_hats: 8,
            time_hats: 8,
            histogram_cells_x: cx,
            histogram_cells_t: ct,
            histogram_bins: b,
            histogram_t_min: 0.0,
            reference_refinement: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionSpec {
    /// Samples are drawn from [−range, range].
    pub range: f64,
    pub samples: usize,
}

impl Default for AssumptionSpec {
    fn default() -> Self {
        Self { range: 10.0, samples: crate::models::DEFAULT_ASSUMPTION_SAMPLES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub flux: FluxSpec,
    pub viscosity: ViscositySpec,
    pub initial: InitialSpec,
    pub domain: DomainSpec,
    pub final_time: f64,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub assumptions: AssumptionSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Skip the resolution rule h ≤ min(ε, √δ)/4.
    #[serde(default)]
    pub override_resolution: bool,
    /// With ε = δ = 0, run the Godunov scheme instead of the regularized one.
    #[serde(default)]
    pub godunov_fallback: bool,
    /// Rayon workers used by sweeps; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    /// Fraction of the stable step actually taken.
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn one() -> f64 {
    1.0
}

fn default_safety() -> f64 {
    0.5
}

fn validation<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Validation(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Validation(e.to_string()))
    }

    /// Reads a config; a relative `from_file` path is resolved against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let InitialSpec::FromFile { path: p } = &mut cfg.initial {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn flux_model(&self) -> Result<FluxModel, HarnessError> {
        Ok(match &self.flux {
            FluxSpec::Zero => FluxModel::zero(),
            FluxSpec::Burgers => FluxModel::burgers(),
            FluxSpec::Power { m } => FluxModel::power(*m)?,
            FluxSpec::Table { u, f, m, c1 } => FluxModel::table(u.clone(), f.clone(), *m, *c1)?,
        })
    }

    pub fn viscosity_model(&self) -> Result<ViscosityModel, HarnessError> {
        let (model, constants) = match &self.viscosity {
            ViscositySpec::Linear { constants } => (ViscosityModel::linear(), constants),
            ViscositySpec::VonNeumann { constants } => (ViscosityModel::von_neumann(), constants),
            ViscositySpec::Power { r, constants } => (ViscosityModel::power(*r)?, constants),
            ViscositySpec::Table { lambda, beta, constants } => {
                (ViscosityModel::table(lambda.clone(), beta.clone())?, constants)
            }
        };
        match constants {
            None => Ok(model),
            Some(spec) => {
                let base: ViscosityConstants = *model.constants();
                let merged = ViscosityConstants {
                    r: spec.r.unwrap_or(base.r),
                    c2: spec.c2.unwrap_or(base.c2),
                    c3: spec.c3.unwrap_or(base.c3),
                    c4: spec.c4.unwrap_or(base.c4),
                    c5: spec.c5.unwrap_or(base.c5),
                    threshold: spec.threshold.unwrap_or(base.threshold),
                };
                Ok(model.with_constants(merged)?)
            }
        }
    }

    pub fn cells(&self) -> usize {
        match self.domain.cells_per_epsilon {
            Some(c) if self.epsilon > 0.0 => {
                let n = ((self.domain.x_right - self.domain.x_left) * c / self.epsilon).ceil() as usize;
                n.max(Grid1D::MIN_CELLS)
            }
            _ => self.domain.cells,
        }
    }

    pub fn grid(&self) -> Result<Grid1D, HarnessError> {
        Ok(Grid1D::new(self.domain.x_left, self.domain.x_right, self.cells())?)
    }

    /// Largest spacing allowed by h ≤ min(ε, √δ)/4 over the positive
    /// parameters, or `None` when both vanish.
    pub fn resolution_limit(&self) -> Option<f64> {
        let mut scales = Vec::new();
        if self.epsilon > 0.0 {
            scales.push(self.epsilon);
        }
        if self.delta > 0.0 {
            scales.push(self.delta.sqrt());
        }
        scales.into_iter().reduce(f64::min).map(|s| s / 4.0)
    }

    /// Checks everything that can be checked before computing.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.final_time.is_finite() && self.final_time > 0.0) {
            return validation(format!("final_time must be positive, got {}", self.final_time));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return validation(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return validation(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return validation(format!("safety must be in (0, 1], got {}", self.safety));
        }
        if self.snapshot_times.iter().any(|&t| !(t > 0.0 && t <= self.final_time)) {
            return validation("snapshot_times must lie in (0, final_time]");
        }
        if self.epsilon == 0.0 && self.delta == 0.0 && !self.godunov_fallback {
            return validation("epsilon = delta = 0 needs godunov_fallback = true");
        }
        if let Some(c) = self.domain.cells_per_epsilon {
            if !(c > 0.0) {
                return validation("cells_per_epsilon must be positive");
            }
        }
        let grid = self.grid()?;
        if let Some(limit) = self.resolution_limit() {
            if grid.spacing() > limit * (1.0 + 1e-12) && !self.override_resolution {
                return validation(format!(
                    "h = {} exceeds min(epsilon, sqrt(delta))/4 = {limit}; refine the grid or set override_resolution",
                    grid.spacing()
                ));
            }
        }
        let d = &self.diagnostics;
        if d.entropy && (d.space_hats < 2 || d.time_hats < 2 || d.k_count == 0) {
            return validation("entropy diagnostics need space_hats, time_hats >= 2 and k_count >= 1");
        }
        if d.histogram && d.histogram_bins < 16 {
            return validation("histogram_bins must be at least 16");
        }
        if d.histogram && !(d.histogram_t_min >= 0.0 && d.histogram_t_min < self.final_time) {
            return validation("histogram_t_min must lie in [0, final_time)");
        }
        if d.reference_refinement == 0 {
            return validation("reference_refinement must be at least 1");
        }
        match self.initial {
            InitialSpec::Sine { periods: 0, .. } => validation("sine needs periods >= 1"),
            InitialSpec::GaussianBump { width, .. } if !(width > 0.0) => validation("gaussian width must be positive"),
            _ => Ok(()),
        }?;
        self.flux_model()?;
        self.viscosity_model()?;
        Ok(())
    }

    /// The initial state on [`Self::grid`].
    pub fn initial_state(&self) -> Result<SimState, HarnessError> {
        let grid = self.grid()?;
        let (a, len) = (grid.x_left(), grid.length());
        let mid = a + 0.5 * len;
        let state = match &self.initial {
            InitialSpec::Riemann { u_l, u_r } => SimState::from_fn(grid, 0.0, |x| if x < mid { *u_l } else { *u_r })?,
            InitialSpec::Sine { amplitude, periods } => {
                let k = 2.0 * PI * *periods as f64 / len;
                SimState::from_fn(grid, 0.0, |x| amplitude * (k * (x - a)).sin())?
            }
            InitialSpec::GaussianBump { amplitude, width } => {
                SimState::from_fn(grid, 0.0, |x| amplitude * (-((x - mid) / width).powi(2)).exp())?
            }
            InitialSpec::FromFile { path } => {
                let text = std::fs::read_to_string(path)?;
                let (_, u) = crate::io::read_state_csv(&text).map_err(HarnessError::Validation)?;
                if u.len() != grid.cells() {
                    return validation(format!(
                        "{} has {} values but the grid has {} cells",
                        path.display(),
                        u.len(),
                        grid.cells()
                    ));
                }
                SimState::new(grid, u, 0.0)?
            }
        };
        Ok(state)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
final_time = 1.5
epsilon = 0.02
delta = 8e-7
snapshot_times = [0.5, 1.0]
seed = 3
override_resolution = true

[flux]
kind = "burgers"

[viscosity]
kind = "von_neumann"

[initial]
kind = "sine"
amplitude = 1.0
periods = 1

[domain]
x_left = 0.0
x_right = 1.0
cells = 200
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.flux, FluxSpec::Burgers);
        assert_eq!(cfg.initial, InitialSpec::Sine { amplitude: 1.0, periods: 1 });
        assert_eq!(cfg.diagnostics, DiagnosticsSpec::default());
        assert_eq!(cfg.safety, 0.5);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SAMPLE.replace("seed = 3", "seed = 3\ncolour = 1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(HarnessError::Validation(_))));
    }

    #[test]
    fn resolution_rule() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        cfg.override_resolution = false;
        // √δ ≈ 8.9e-4 so h must be ≤ 2.2e-4; 200 cells gives 5e-3.
        assert!(matches!(cfg.validate(), Err(HarnessError::Validation(m)) if m.contains("override_resolution")));
        cfg.delta = 0.0;
        cfg.domain.cells = 200;
        assert!(cfg.validate().is_ok());
        cfg.epsilon = 0.01;
        assert!(cfg.validate().is_err());
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        cfg.godunov_fallback = true;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn cells_follow_epsilon() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        cfg.domain.cells_per_epsilon = Some(4.0);
        assert_eq!(cfg.cells(), 200);
        cfg.epsilon = 0.01;
        assert_eq!(cfg.cells(), 400);
        cfg.epsilon = 0.0;
        assert_eq!(cfg.cells(), 200);
    }

    #[test]
    fn initial_families() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        cfg.initial = InitialSpec::Riemann { u_l: 1.0, u_r: 0.0 };
        let s = cfg.initial_state().unwrap();
        assert_eq!(s.u[99], 1.0);
        assert_eq!(s.u[100], 0.0);
        cfg.initial = InitialSpec::GaussianBump { amplitude: 2.0, width: 0.1 };
        let s = cfg.initial_state().unwrap();
        assert!((s.max_abs() - 2.0).abs() < 2e-3);
        cfg.initial = InitialSpec::Sine { amplitude: 1.0, periods: 0 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn from_file_is_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid1D::new(0.0, 1.0, 200).unwrap();
        let s = SimState::from_fn(grid, 0.0, |x| x * x).unwrap();
        let mut f = std::fs::File::create(dir.path().join("u0.csv")).unwrap();
        crate::io::write_state_csv(&s, &mut f).unwrap();
        let text =
            SAMPLE.replace("kind = \"sine\"\namplitude = 1.0\nperiods = 1", "kind = \"from_file\"\npath = \"u0.csv\"");
        std::fs::write(dir.path().join("c.toml"), text).unwrap();
        let cfg = ExperimentConfig::load(&dir.path().join("c.toml")).unwrap();
        assert_eq!(cfg.initial_state().unwrap().u, s.u);
    }

    #[test]
    fn declared_constants_are_applied() {
        let text = SAMPLE.replace("kind = \"von_neumann\"", "kind = \"linear\"\nconstants = { r = 1.0 }");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.viscosity_model().unwrap().constants().r, 1.0);
    }
}
