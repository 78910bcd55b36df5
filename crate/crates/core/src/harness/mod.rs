//! Experiment driver: single runs, (ε, δ)-sweeps along coupling curves
//! δ = C ε^p, regime classification and artifact output.

pub mod config;
pub mod output;

pub use config::ExperimentConfig;

use crate::diagnostics::{
    self, default_k_grid, entropy_production, entropy_scale, l1_distance, lq_norm, total_variation, young_histogram,
    DiagnosticsError, EntropyProductionReport, HatLattice, Window, YoungHistogram,
};
use crate::models::{FluxModel, ModelError};
use crate::reference::{
    godunov_integrate, periodic_riemann_profile, periodic_riemann_valid, Godunov, ReferenceSolution, RiemannData,
    GODUNOV_CFL,
};
use crate::solver::{
    energy_balance, integrate, second_energy_balance, Grid1D, IntegrationSettings, RegularizationParams, SimState,
    SolverError, Trajectory,
};
use config::InitialSpec;
use log::{info, warn};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("blow-up at node {node}, t = {time}")]
    BlowUp { node: usize, time: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("plotting failed: {0}")]
    Plot(String),
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::BlowUp { node, time, .. } => HarnessError::BlowUp { node, time },
            SolverError::Invalid(m) => HarnessError::Validation(m),
        }
    }
}

impl HarnessError {
    /// Process exit code: 2 for invalid input, 3 for blow-up, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::Model(_) => 2,
            HarnessError::Diagnostics(DiagnosticsError::Invalid(_) | DiagnosticsError::EmptyCell { .. }) => 2,
            HarnessError::BlowUp { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Convergent,
    Oscillatory,
    Indeterminate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Convergent => "convergent",
            Regime::Oscillatory => "oscillatory",
            Regime::Indeterminate => "indeterminate",
        })
    }
}

impl FromStr for Regime {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convergent" => Ok(Regime::Convergent),
            "oscillatory" => Ok(Regime::Oscillatory),
            "indeterminate" => Ok(Regime::Indeterminate),
            other => Err(HarnessError::Validation(format!("unknown regime label {other:?}"))),
        }
    }
}

/// One line of a sweep table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub delta: f64,
    pub h: f64,
    pub dt: f64,
    pub l1_error: f64,
    pub l2_norm: f64,
    pub l5_norm: f64,
    pub linf: f64,
    pub tv_ratio: f64,
    pub energy_residual: f64,
    pub max_entropy_production: f64,
    pub concentration: f64,
    pub regime: Regime,
}

pub const TV_CONVERGENT: f64 = 2.0;
pub const TV_OSCILLATORY: f64 = 5.0;
pub const PRODUCTION_FRACTION: f64 = 0.1;

/// Convergent when TV stays within a factor 2 of the initial TV and entropy
/// production is below a tenth of `entropy_scale`; oscillatory when TV has
/// grown fivefold; indeterminate otherwise.
pub fn classify_regime(row: &SweepRow, entropy_scale: f64) -> Regime {
    if row.tv_ratio <= TV_CONVERGENT && row.max_entropy_production <= PRODUCTION_FRACTION * entropy_scale {
        Regime::Convergent
    } else if row.tv_ratio >= TV_OSCILLATORY {
        Regime::Oscillatory
    } else {
        Regime::Indeterminate
    }
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub row: SweepRow,
    pub trajectory: Trajectory,
    pub reference: ReferenceSolution,
    pub entropy: Option<EntropyProductionReport>,
    pub histogram: Option<YoungHistogram>,
    pub entropy_scale: f64,
    pub second_energy_residual: f64,
    /// Set when compactly supported data reached the outer band of the domain.
    pub seam_contaminated: bool,
}

fn tv_ratio(initial: &SimState, last: &SimState) -> f64 {
    let (a, b) = (total_variation(initial), total_variation(last));
    if a == 0.0 {
        if b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        b / a
    }
}

/// Initial data from the config, sampled on an arbitrary grid over the same
/// domain. File data are prolonged piecewise constantly.
fn initial_on(cfg: &ExperimentConfig, grid: Grid1D) -> Result<SimState, HarnessError> {
    if let InitialSpec::FromFile { .. } = cfg.initial {
        let base = cfg.initial_state()?;
        let factor = grid.cells() / base.grid.cells();
        if factor * base.grid.cells() != grid.cells() {
            return Err(HarnessError::Validation("reference grid must refine the file grid".into()));
        }
        let u = base.u.iter().flat_map(|&v| std::iter::repeat_n(v, factor)).collect();
        return Ok(SimState::new(grid, u, 0.0)?);
    }
    let mut c = cfg.clone();
    c.domain.cells = grid.cells();
    c.domain.cells_per_epsilon = None;
    c.initial_state()
}

/// The entropy solution used as reference at `cfg.final_time`: the exact
/// periodic Riemann solution while its wave fans are separate, otherwise
/// Godunov on a refined grid.
pub fn compute_reference(cfg: &ExperimentConfig) -> Result<ReferenceSolution, HarnessError> {
    let flux = cfg.flux_model()?;
    let grid = cfg.grid()?;
    if let InitialSpec::Riemann { u_l, u_r } = cfg.initial {
        let data = RiemannData { u_left: u_l, u_right: u_r };
        if flux.is_convex_on(u_l.min(u_r), u_l.max(u_r)) && periodic_riemann_valid(&grid, data, &flux, cfg.final_time) {
            let mid = grid.x_left() + 0.5 * grid.length();
            return Ok(periodic_riemann_profile(grid, data, &flux, mid, cfg.final_time)?);
        }
    }
    let fine = grid.refined(cfg.diagnostics.reference_refinement);
    Ok(godunov_integrate(&initial_on(cfg, fine)?, cfg.final_time, &flux)?)
}

fn stored_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = cfg.diagnostics.stored_states;
    let mut times: Vec<f64> = (1..=n).map(|i| cfg.final_time * i as f64 / n as f64).collect();
    times.extend(&cfg.snapshot_times);
    times.push(cfg.final_time);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * cfg.final_time);
    *times.last_mut().unwrap() = cfg.final_time;
    times
}

fn godunov_trajectory(
    initial: &SimState,
    times: &[f64],
    flux: &FluxModel,
    params: RegularizationParams,
) -> Result<Trajectory, HarnessError> {
    let mut states = Vec::with_capacity(times.len());
    let mut current = initial.clone();
    for &t in times {
        current = godunov_integrate(&current, t, flux)?.as_state();
        states.push(current.clone());
    }
    Ok(Trajectory::from_states(initial.clone(), states, params)?)
}

/// True when |u| in the outer 5% on either side exceeds 10⁻⁸ max|u|.
pub fn seam_contaminated(state: &SimState) -> bool {
    let g = state.grid;
    let band = 0.05 * g.length();
    let max = state.max_abs();
    state
        .u
        .iter()
        .enumerate()
        .filter(|&(j, _)| {
            let x = g.node(j);
            x < g.x_left() + band || x > g.x_right() - band
        })
        .any(|(_, v)| v.abs() > 1e-8 * max)
}

/// Integrates, builds the reference, evaluates the enabled diagnostics and,
/// when `output_dir` is set, writes the run's artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let flux = cfg.flux_model()?;
    let visc = cfg.viscosity_model()?;
    let initial = cfg.initial_state()?;
    let params = RegularizationParams::new(cfg.epsilon, cfg.delta)?;
    let times = stored_times(cfg);
    info!("run: epsilon = {}, delta = {}, cells = {}", cfg.epsilon, cfg.delta, initial.grid.cells());

    let trajectory = if cfg.epsilon == 0.0 && cfg.delta == 0.0 {
        godunov_trajectory(&initial, &times, &flux, params)?
    } else {
        let settings = IntegrationSettings { safety: cfg.safety, ..Default::default() };
        match integrate(&initial, cfg.final_time, &params, &flux, &visc, &times, &settings) {
            Ok(t) => t,
            Err(SolverError::BlowUp { node, time, partial }) => {
                if let (Some(dir), Some(traj)) = (&cfg.output_dir, partial) {
                    output::write_partial(dir, &traj)?;
                }
                return Err(HarnessError::BlowUp { node, time });
            }
            Err(e) => return Err(e.into()),
        }
    };

    let reference = compute_reference(cfg)?;
    let last = trajectory.final_state();
    let k_grid = default_k_grid(&initial, cfg.diagnostics.k_count);
    let scale = entropy_scale(&initial, &flux, &k_grid);
    let d = cfg.diagnostics;
    let entropy = if d.entropy {
        let lattice = HatLattice { space_cells: d.space_hats, time_cells: d.time_hats };
        Some(entropy_production(&trajectory, &flux, &k_grid, lattice)?)
    } else {
        None
    };
    let histogram = if d.histogram {
        let window = Window { t_min: d.histogram_t_min, ..Window::of(&trajectory) };
        Some(young_histogram(&trajectory, window, d.histogram_cells_x, d.histogram_cells_t, d.histogram_bins)?)
    } else {
        None
    };
    let seam = matches!(cfg.initial, InitialSpec::GaussianBump { .. }) && seam_contaminated(last);
    if seam {
        warn!("solution reached the outer 5% band; enlarge the domain");
    }

    let mut row = SweepRow {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        h: initial.grid.spacing(),
        dt: if trajectory.min_dt.is_finite() {
            trajectory.min_dt
        } else {
            Godunov::new(initial.clone(), &flux).stable_dt(GODUNOV_CFL).unwrap_or(cfg.final_time)
        },
        l1_error: l1_distance(last, &reference)?,
        l2_norm: lq_norm(last, 2.0)?,
        l5_norm: lq_norm(last, 5.0)?,
        linf: lq_norm(last, f64::INFINITY)?,
        tv_ratio: tv_ratio(&initial, last),
        energy_residual: energy_balance(&trajectory),
        max_entropy_production: entropy.as_ref().map_or(0.0, |e| e.max),
        concentration: histogram.as_ref().map_or(0.0, diagnostics::concentration_metric),
        regime: Regime::Indeterminate,
    };
    row.regime = classify_regime(&row, scale);

    let report = RunReport {
        row,
        second_energy_residual: second_energy_balance(&trajectory, &flux),
        trajectory,
        reference,
        entropy,
        histogram,
        entropy_scale: scale,
        seam_contaminated: seam,
    };
    if let Some(dir) = &cfg.output_dir {
        output::write_run(dir, cfg, &report)?;
    }
    Ok(report)
}

/// Coupling laws δ = C ε^p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// p = (5 − m)/(3 − m), for m < 3.
    Thm41,
    /// p = (5 − m)/(r(5 − m) − 1), for r ≥ 1 and m < 5 − 1/r.
    Thm42,
    /// p = 3, for m = 2.
    Thm43,
    /// Any user-chosen p > 0.
    Free(f64),
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Thm41 => f.write_str("41"),
            Coupling::Thm42 => f.write_str("42"),
            Coupling::Thm43 => f.write_str("43"),
            Coupling::Free(p) => write!(f, "free(p = {p})"),
        }
    }
}

/// The exponent p of the coupling law for flux growth `m` and viscosity
/// exponent `r`.
pub fn coupling_exponent(coupling: Coupling, m: f64, r: f64) -> Result<f64, HarnessError> {
    let fail = |msg: &str| Err(HarnessError::Validation(msg.to_string()));
    match coupling {
        Coupling::Thm41 => {
            if !(m < 3.0) || !(m > 1.0) {
                return fail("coupling 41 requires 1 < m < 3");
            }
            Ok((5.0 - m) / (3.0 - m))
        }
        Coupling::Thm42 => {
            if !(r >= 1.0) {
                return fail("coupling 42 requires r >= 1");
            }
            if !(m < 5.0 - 1.0 / r) || !(m > 1.0) {
                return fail("coupling 42 requires 1 < m < 5 - 1/r");
            }
            Ok((5.0 - m) / (r * (5.0 - m) - 1.0))
        }
        Coupling::Thm43 => {
            if m != 2.0 {
                return fail("coupling 43 requires m = 2");
            }
            Ok(3.0)
        }
        Coupling::Free(p) => {
            if !(p > 0.0 && p.is_finite()) {
                return fail("free coupling needs a positive exponent");
            }
            Ok(p)
        }
    }
}

/// Final state and reference of one sweep member, kept for overlay plots.
#[derive(Debug, Clone)]
pub struct Overlay {
    pub epsilon: f64,
    pub state: SimState,
    pub reference: ReferenceSolution,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub coupling: Coupling,
    pub exponent: f64,
    pub coupling_constant: f64,
    /// Ordered by decreasing ε.
    pub rows: Vec<SweepRow>,
    pub overlays: Vec<Overlay>,
    /// l1_error strictly decreasing down the table.
    pub l1_decreasing: bool,
}

impl SweepResult {
    fn new(coupling: Coupling, exponent: f64, c: f64, reports: Vec<RunReport>) -> Self {
        let rows: Vec<SweepRow> = reports.iter().map(|r| r.row).collect();
        let l1_decreasing = rows.windows(2).all(|w| w[1].l1_error < w[0].l1_error);
        let overlays = reports
            .into_iter()
            .map(|r| Overlay {
                epsilon: r.row.epsilon,
                state: r.trajectory.final_state().clone(),
                reference: r.reference,
            })
            .collect();
        Self { coupling, exponent, coupling_constant: c, rows, overlays, l1_decreasing }
    }
}

/// A sweep that stopped on a member's error; `partial` holds the rows that
/// precede it in ε order.
#[derive(Debug, Error)]
#[error("sweep stopped at epsilon = {epsilon}: {source}")]
pub struct SweepFailure {
    pub epsilon: f64,
    pub partial: Box<SweepResult>,
    #[source]
    pub source: HarnessError,
}

/// The ε-member of a sweep: same config with δ = C ε^p and its own
/// output subdirectory.
pub fn sweep_member(cfg: &ExperimentConfig, epsilon: f64, delta: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.epsilon = epsilon;
    c.delta = delta;
    c.output_dir = cfg.output_dir.as_ref().map(|d| d.join(format!("eps_{epsilon}")));
    c
}

fn sweep_checks(coupling: Coupling, c: f64, eps: &[f64], cfg: &ExperimentConfig) -> Result<f64, HarnessError> {
    if eps.len() < 3 {
        return Err(HarnessError::Validation(format!("a sweep needs at least 3 epsilons, got {}", eps.len())));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(HarnessError::Validation("epsilons must be positive and strictly decreasing".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(HarnessError::Validation(format!("coupling constant must be positive, got {c}")));
    }
    let flux = cfg.flux_model()?;
    let visc = cfg.viscosity_model()?;
    coupling_exponent(coupling, flux.growth_exponent(), visc.constants().r)
}

/// Runs one experiment per ε with δ = C ε^p, concurrently on
/// `cfg.workers` threads. Rows come back in the order of `eps`.
pub fn sweep(cfg: &ExperimentConfig, coupling: Coupling, c: f64, eps: &[f64]) -> Result<SweepResult, SweepFailure> {
    let empty = |source| SweepFailure {
        epsilon: eps.first().copied().unwrap_or(f64::NAN),
        partial: Box::new(SweepResult::new(coupling, f64::NAN, c, Vec::new())),
        source,
    };
    let p = sweep_checks(coupling, c, eps, cfg).map_err(empty)?;
    let members: Vec<ExperimentConfig> = eps.iter().map(|&e| sweep_member(cfg, e, c * e.powf(p))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| empty(HarnessError::Validation(e.to_string())))?;
    let results: Vec<Result<RunReport, HarnessError>> =
        pool.install(|| members.par_iter().map(run_experiment).collect());
    let mut reports = Vec::with_capacity(results.len());
    for (e, r) in eps.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(source) => {
                return Err(SweepFailure {
                    epsilon: *e,
                    partial: Box::new(SweepResult::new(coupling, p, c, reports)),
                    source,
                })
            }
        }
    }
    Ok(SweepResult::new(coupling, p, c, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tv: f64, production: f64) -> SweepRow {
        SweepRow {
            epsilon: 0.01,
            delta: 1e-7,
            h: 1e-3,
            dt: 1e-4,
            l1_error: 0.0,
            l2_norm: 0.0,
            l5_norm: 0.0,
            linf: 0.0,
            tv_ratio: tv,
            energy_residual: 0.0,
            max_entropy_production: production,
            concentration: 0.0,
            regime: Regime::Indeterminate,
        }
    }

    #[test]
    fn regime_thresholds() {
        assert_eq!(classify_regime(&row(0.0, 0.0), 0.0), Regime::Convergent);
        assert_eq!(classify_regime(&row(8.0, 1.0), 4.0), Regime::Oscillatory);
        assert_eq!(classify_regime(&row(3.0, 0.0), 4.0), Regime::Indeterminate);
        assert_eq!(classify_regime(&row(1.5, 0.5), 4.0), Regime::Indeterminate);
        assert_eq!(classify_regime(&row(2.0, 0.4), 4.0), Regime::Convergent);
        assert_eq!(classify_regime(&row(5.0, 0.0), 4.0), Regime::Oscillatory);
    }

    #[test]
    fn regime_labels_round_trip() {
        for r in [Regime::Convergent, Regime::Oscillatory, Regime::Indeterminate] {
            assert_eq!(r.to_string().parse::<Regime>().unwrap(), r);
        }
        assert!("mixed".parse::<Regime>().is_err());
    }

    #[test]
    fn coupling_exponents() {
        assert_eq!(coupling_exponent(Coupling::Thm43, 2.0, 1.0).unwrap(), 3.0);
        assert_eq!(coupling_exponent(Coupling::Thm41, 2.0, 1.0).unwrap(), 3.0);
        assert_eq!(coupling_exponent(Coupling::Thm42, 2.0, 1.0).unwrap(), 1.5);
        assert!(coupling_exponent(Coupling::Thm43, 2.5, 1.0).is_err());
        assert!(coupling_exponent(Coupling::Thm41, 3.0, 1.0).is_err());
        assert!(coupling_exponent(Coupling::Thm42, 2.0, 0.5).is_err());
        assert!(coupling_exponent(Coupling::Thm42, 4.0, 1.0).is_err());
        assert!(coupling_exponent(Coupling::Thm42, 4.4, 2.0).is_ok());
        assert_eq!(coupling_exponent(Coupling::Free(0.5), 2.0, 1.0).unwrap(), 0.5);
        let near = coupling_exponent(Coupling::Thm41, 3.0 - 1e-9, 1.0).unwrap();
        assert!(near > 1e9);
    }

    #[test]
    fn tv_ratio_edge_cases() {
        let g = Grid1D::new(0.0, 1.0, 32).unwrap();
        let flat = SimState::from_fn(g, 0.0, |_| 1.0).unwrap();
        let wavy = SimState::from_fn(g, 0.0, |x| (6.0 * x).sin()).unwrap();
        assert_eq!(tv_ratio(&flat, &flat), 0.0);
        assert_eq!(tv_ratio(&flat, &wavy), f64::INFINITY);
        assert_eq!(tv_ratio(&wavy, &wavy), 1.0);
    }

    #[test]
    fn seam_monitor() {
        let g = Grid1D::new(-1.0, 1.0, 400).unwrap();
        let narrow = SimState::from_fn(g, 0.0, |x| (-(x / 0.05).powi(2)).exp()).unwrap();
        let wide = SimState::from_fn(g, 0.0, |x| (-(x / 0.5).powi(2)).exp()).unwrap();
        assert!(!seam_contaminated(&narrow));
        assert!(seam_contaminated(&wide));
    }

    #[test]
    fn stored_times_include_requests() {
        let mut cfg = ExperimentConfig::from_toml(config::tests::SAMPLE).unwrap();
        cfg.diagnostics.stored_states = 4;
        cfg.snapshot_times = vec![0.5, 0.3];
        let t = stored_times(&cfg);
        assert_eq!(t, vec![0.3, 0.375, 0.5, 0.75, 1.125, 1.5]);
    }
}
