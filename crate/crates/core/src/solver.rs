//! Method-of-lines solver for u_t + f(u)_x = ε (β(u_x))_x − δ u_xxx on a
//! periodic grid, with the bookkeeping needed to check the two energy
//! balances of the regularized equation.
//!
//! Every spatial term is a centered difference in divergence form, so the
//! discrete mass Σ u_j h is conserved to roundoff and the dispersive term is
//! skew-symmetric (it neither creates nor destroys discrete L² energy).

use crate::models::{FluxModel, ViscosityModel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("non-finite value at node {node}, t = {time}")]
    BlowUp {
        node: usize,
        time: f64,
        /// Trajectory recorded up to the last finite state, when integrating.
        partial: Option<Box<Trajectory>>,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SolverError> {
    Err(SolverError::Invalid(msg.into()))
}

/// Uniform periodic grid; node j sits at the centre of cell j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_left: f64,
    x_right: f64,
    cells: usize,
}

impl Grid1D {
    pub const MIN_CELLS: usize = 16;

    pub fn new(x_left: f64, x_right: f64, cells: usize) -> Result<Self, SolverError> {
        if !(x_left.is_finite() && x_right.is_finite()) || x_right <= x_left {
            return invalid(format!("grid interval [{x_left}, {x_right}] is empty"));
        }
        if cells < Self::MIN_CELLS {
            return invalid(format!("grid needs at least {} cells, got {cells}", Self::MIN_CELLS));
        }
        Ok(Self { x_left, x_right, cells })
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x_left + (j as f64 + 0.5) * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cells).map(|j| self.node(j))
    }

    /// Same interval, `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Self {
        Self { cells: self.cells * factor.max(1), ..*self }
    }

    pub fn same_domain(&self, other: &Grid1D) -> bool {
        let tol = 1e-12 * self.length().max(other.length());
        (self.x_left - other.x_left).abs() <= tol && (self.x_right - other.x_right).abs() <= tol
    }
}

/// Diffusion strength ε and dispersion strength δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl RegularizationParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, SolverError> {
        if !(epsilon.is_finite() && epsilon >= 0.0 && delta.is_finite() && delta >= 0.0) {
            return invalid(format!("need finite epsilon, delta >= 0, got ({epsilon}, {delta})"));
        }
        Ok(Self { epsilon, delta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub grid: Grid1D,
    pub u: Vec<f64>,
    pub t: f64,
}

impl SimState {
    pub fn new(grid: Grid1D, u: Vec<f64>, t: f64) -> Result<Self, SolverError> {
        if u.len() != grid.cells() {
            return invalid(format!("{} values for a grid of {} cells", u.len(), grid.cells()));
        }
        if !(t.is_finite() && t >= 0.0) {
            return invalid(format!("time must be finite and >= 0, got {t}"));
        }
        if let Some(node) = u.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::BlowUp { node, time: t, partial: None });
        }
        Ok(Self { grid, u, t })
    }

    pub fn from_fn(grid: Grid1D, t: f64, f: impl Fn(f64) -> f64) -> Result<Self, SolverError> {
        let u = grid.nodes().map(f).collect();
        Self::new(grid, u, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mass(&self) -> f64 {
        self.u.iter().sum::<f64>() * self.grid.spacing()
    }

    /// Trapezoid rule for ∫ u² on the periodic grid.
    pub fn l2_squared(&self) -> f64 {
        self.u.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()
    }

    /// Face slopes λ_{j+1/2} = (u_{j+1} − u_j)/h, periodic.
    pub fn face_slopes(&self) -> Vec<f64> {
        face_slopes(&self.u, self.grid.spacing())
    }
}

fn face_slopes(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    (0..n).map(|j| (u[(j + 1) % n] - u[j]) / h).collect()
}

/// Time-ordered snapshots of one integration plus the accumulated integrals
/// that enter the energy balances.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: RegularizationParams,
    pub initial: SimState,
    /// Requested snapshots followed by the final state.
    pub snapshots: Vec<SimState>,
    /// ∫₀ᵗ ∫ β(u_x) u_x dx ds at each snapshot.
    pub dissipation_at_snapshots: Vec<f64>,
    /// ∫₀ᵀ ∫ β(u_x) u_x dx ds.
    pub dissipation: f64,
    /// ∫₀ᵀ ∫ u_xx² β'(u_x) dx ds.
    pub parabolic_dissipation: f64,
    /// ∫₀ᵀ ∫ f'(u) β(u_x) u_x dx ds.
    pub flux_dissipation: f64,
    /// max over every time step of max_j |u_j|.
    pub max_sup: f64,
    pub steps: usize,
    pub min_dt: f64,
}

impl Trajectory {
    fn start(initial: SimState, params: RegularizationParams) -> Self {
        let sup = initial.max_abs();
        Self {
            params,
            initial,
            snapshots: Vec::new(),
            dissipation_at_snapshots: Vec::new(),
            dissipation: 0.0,
            parabolic_dissipation: 0.0,
            flux_dissipation: 0.0,
            max_sup: sup,
            steps: 0,
            min_dt: f64::INFINITY,
        }
    }

    /// Builds a trajectory from externally produced states (for example an
    /// exact solution). Dissipation integrals are left at zero.
    pub fn from_states(
        initial: SimState,
        snapshots: Vec<SimState>,
        params: RegularizationParams,
    ) -> Result<Self, SolverError> {
        let mut prev = initial.t;
        for s in &snapshots {
            if !(s.t > prev) {
                return invalid("snapshot times must be strictly increasing");
            }
            if s.grid != initial.grid {
                return invalid("all snapshots must share the initial grid");
            }
            prev = s.t;
        }
        let mut traj = Self::start(initial, params);
        traj.max_sup = snapshots.iter().fold(traj.max_sup, |m, s| m.max(s.max_abs()));
        traj.dissipation_at_snapshots = vec![0.0; snapshots.len()];
        traj.snapshots = snapshots;
        Ok(traj)
    }

    pub fn final_state(&self) -> &SimState {
        self.snapshots.last().unwrap_or(&self.initial)
    }

    /// Initial state followed by every snapshot.
    pub fn states(&self) -> impl Iterator<Item = &SimState> {
        std::iter::once(&self.initial).chain(self.snapshots.iter())
    }
}

/// Reusable buffers for right-hand-side evaluation.
#[derive(Debug, Default)]
struct Scratch {
    ext: Vec<f64>,
    fext: Vec<f64>,
    face_beta: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn rhs_into(
    u: &[f64],
    t: f64,
    h: f64,
    params: &RegularizationParams,
    flux: &FluxModel,
    visc: &ViscosityModel,
    scratch: &mut Scratch,
    out: &mut [f64],
) -> Result<(), SolverError> {
    let n = u.len();
    // Two ghost nodes on each side: ext[j + 2] = u_j.
    scratch.ext.clear();
    scratch.ext.extend_from_slice(&u[n - 2..]);
    scratch.ext.extend_from_slice(u);
    scratch.ext.extend_from_slice(&u[..2]);
    let ext = &scratch.ext;

    scratch.fext.clear();
    scratch.fext.extend(ext.iter().map(|&v| flux.f(v)));
    let fext = &scratch.fext;

    let eps = params.epsilon;
    let delta = params.delta;
    let inv_2h = 0.5 / h;
    let inv_h = 1.0 / h;
    let disp = delta * 0.5 / (h * h * h);

    // face_beta[k] = β(λ_{k-1/2}), k = 0..=n.
    scratch.face_beta.clear();
    if eps > 0.0 {
        scratch.face_beta.extend((0..=n).map(|k| visc.beta((ext[k + 2] - ext[k + 1]) * inv_h)));
    }
    let fb = &scratch.face_beta;

    for j in 0..n {
        let mut r = -(fext[j + 3] - fext[j + 1]) * inv_2h;
        if eps > 0.0 {
            r += eps * (fb[j + 1] - fb[j]) * inv_h;
        }
        if delta > 0.0 {
            r -= disp * (-ext[j] + 2.0 * ext[j + 1] - 2.0 * ext[j + 3] + ext[j + 4]);
        }
        out[j] = r;
    }
    if let Some(node) = out.iter().position(|v| !v.is_finite()) {
        return Err(SolverError::BlowUp { node, time: t, partial: None });
    }
    Ok(())
}

/// du/dt at every node: centered conservative flux difference, face-slope
/// viscosity in divergence form and the 5-point centered third difference.
pub fn semidiscrete_rhs(
    state: &SimState,
    params: &RegularizationParams,
    flux: &FluxModel,
    visc: &ViscosityModel,
) -> Result<Vec<f64>, SolverError> {
    let mut out = vec![0.0; state.u.len()];
    rhs_into(&state.u, state.t, state.grid.spacing(), params, flux, visc, &mut Scratch::default(), &mut out)?;
    Ok(out)
}

/// Explicit step bound: `safety · min(h/max|f'|, h²/(2ε max β'), h³/(4δ))`,
/// ignoring inactive terms. Returns `interval` when no term is active.
pub fn stable_timestep(
    state: &SimState,
    params: &RegularizationParams,
    flux: &FluxModel,
    visc: &ViscosityModel,
    safety: f64,
    interval: f64,
) -> f64 {
    let h = state.grid.spacing();
    let mut dt = f64::INFINITY;
    let max_speed = state.u.iter().fold(0.0_f64, |m, &v| m.max(flux.df(v).abs()));
    if max_speed > 0.0 {
        dt = dt.min(h / max_speed);
    }
    if params.epsilon > 0.0 {
        let n = state.u.len();
        let max_bp = (0..n).map(|j| visc.beta_prime((state.u[(j + 1) % n] - state.u[j]) / h)).fold(0.0_f64, f64::max);
        if max_bp > 0.0 {
            dt = dt.min(h * h / (2.0 * params.epsilon * max_bp));
        }
    }
    if params.delta > 0.0 {
        dt = dt.min(h * h * h / (4.0 * params.delta));
    }
    if dt.is_finite() {
        safety * dt
    } else {
        interval
    }
}

/// SSP-RK3 (Shu–Osher form) driver with its own buffers.
struct Stepper<'a> {
    params: RegularizationParams,
    flux: &'a FluxModel,
    visc: &'a ViscosityModel,
    scratch: Scratch,
    k: Vec<f64>,
    stage1: Vec<f64>,
    stage2: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(n: usize, params: RegularizationParams, flux: &'a FluxModel, visc: &'a ViscosityModel) -> Self {
        Self {
            params,
            flux,
            visc,
            scratch: Scratch::default(),
            k: vec![0.0; n],
            stage1: vec![0.0; n],
            stage2: vec![0.0; n],
        }
    }

    fn step(&mut self, u: &mut [f64], t: f64, dt: f64, h: f64) -> Result<(), SolverError> {
        let (p, f, v) = (&self.params, self.flux, self.visc);
        rhs_into(u, t, h, p, f, v, &mut self.scratch, &mut self.k)?;
        for ((s1, &u0), &k) in self.stage1.iter_mut().zip(u.iter()).zip(&self.k) {
            *s1 = u0 + dt * k;
        }
        rhs_into(&self.stage1, t + dt, h, p, f, v, &mut self.scratch, &mut self.k)?;
        for (((s2, &u0), &s1), &k) in self.stage2.iter_mut().zip(u.iter()).zip(&self.stage1).zip(&self.k) {
            *s2 = u0 + 0.25 * ((s1 - u0) + dt * k);
        }
        rhs_into(&self.stage2, t + 0.5 * dt, h, p, f, v, &mut self.scratch, &mut self.k)?;
        for ((u0, &s2), &k) in u.iter_mut().zip(&self.stage2).zip(&self.k) {
            *u0 += 2.0 / 3.0 * ((s2 - *u0) + dt * k);
        }
        if let Some(node) = u.iter().position(|x| !x.is_finite()) {
            return Err(SolverError::BlowUp { node, time: t + dt, partial: None });
        }
        Ok(())
    }
}

/// One SSP-RK3 step of size `dt`.
pub fn advance(
    state: &SimState,
    dt: f64,
    params: &RegularizationParams,
    flux: &FluxModel,
    visc: &ViscosityModel,
) -> Result<SimState, SolverError> {
    if !(dt.is_finite() && dt > 0.0) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let mut u = state.u.clone();
    Stepper::new(u.len(), *params, flux, visc).step(&mut u, state.t, dt, state.grid.spacing())?;
    Ok(SimState { grid: state.grid, u, t: state.t + dt })
}

/// Instantaneous integrands of the dissipation terms for the state `u`:
/// (∫ β(u_x)u_x, ∫ u_xx² β'(u_x), ∫ f'(u) β(u_x) u_x).
fn dissipation_rates(u: &[f64], h: f64, flux: &FluxModel, visc: &ViscosityModel) -> (f64, f64, f64) {
    let n = u.len();
    let lam = face_slopes(u, h);
    let mut energy = 0.0;
    let mut flux_work = 0.0;
    let mut parabolic = 0.0;
    for j in 0..n {
        let l = lam[j];
        let e = visc.beta(l) * l;
        energy += e;
        flux_work += flux.df(0.5 * (u[j] + u[(j + 1) % n])) * e;
        let lm = lam[(j + n - 1) % n];
        let uxx = (l - lm) / h;
        parabolic += uxx * uxx * 0.5 * (visc.beta_prime(l) + visc.beta_prime(lm));
    }
    (energy * h, parabolic * h, flux_work * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSettings {
    /// Fraction of the stable step actually taken.
    pub safety: f64,
    /// Abort (as an invalid-input error) after this many steps.
    pub max_steps: usize,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self { safety: 0.5, max_steps: 50_000_000 }
    }
}

/// Integrates to `final_time`, landing exactly on each requested snapshot
/// time. Dissipation integrals use the midpoint rule in time on every step.
pub fn integrate(
    initial: &SimState,
    final_time: f64,
    params: &RegularizationParams,
    flux: &FluxModel,
    visc: &ViscosityModel,
    snapshot_times: &[f64],
    settings: &IntegrationSettings,
) -> Result<Trajectory, SolverError> {
    if !(final_time > initial.t) || !final_time.is_finite() {
        return invalid(format!("final time {final_time} must exceed the initial time {}", initial.t));
    }
    if !(settings.safety > 0.0 && settings.safety <= 1.0) {
        return invalid(format!("safety factor must be in (0, 1], got {}", settings.safety));
    }
    let mut targets: Vec<f64> = snapshot_times.to_vec();
    if targets.iter().any(|&s| !(s > initial.t && s <= final_time)) {
        return invalid("snapshot times must lie in (t0, T]");
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    if targets.last() != Some(&final_time) {
        targets.push(final_time);
    }

    let h = initial.grid.spacing();
    let n = initial.grid.cells();
    let mut traj = Trajectory::start(initial.clone(), *params);
    let mut stepper = Stepper::new(n, *params, flux, visc);
    let mut state = initial.clone();
    let mut prev = vec![0.0; n];
    let mut mid = vec![0.0; n];

    for &target in &targets {
        while state.t < target {
            if traj.steps >= settings.max_steps {
                return invalid(format!("exceeded {} steps at t = {}", settings.max_steps, state.t));
            }
            let remaining = target - state.t;
            let stable = stable_timestep(&state, params, flux, visc, settings.safety, remaining);
            // Equal steps up to the target, so none is a roundoff sliver.
            let pieces = (remaining / stable * (1.0 - 1e-12)).ceil().max(1.0);
            let landing = pieces == 1.0;
            let dt = if landing { remaining } else { remaining / pieces };
            prev.copy_from_slice(&state.u);
            if let Err(SolverError::BlowUp { node, time, .. }) = stepper.step(&mut state.u, state.t, dt, h) {
                return Err(SolverError::BlowUp { node, time, partial: Some(Box::new(traj)) });
            }
            state.t = if landing { target } else { state.t + dt };
            traj.steps += 1;
            traj.min_dt = traj.min_dt.min(dt);
            traj.max_sup = traj.max_sup.max(state.max_abs());

            if params.epsilon > 0.0 {
                for ((m, &a), &b) in mid.iter_mut().zip(&prev).zip(&state.u) {
                    *m = 0.5 * (a + b);
                }
                let (e, p, w) = dissipation_rates(&mid, h, flux, visc);
                traj.dissipation += dt * e;
                traj.parabolic_dissipation += dt * p;
                traj.flux_dissipation += dt * w;
            }
        }
        traj.snapshots.push(state.clone());
        traj.dissipation_at_snapshots.push(traj.dissipation);
    }
    Ok(traj)
}

/// Residual of the L² energy identity,
/// ∫u²(T) + 2ε ∫∫ β(u_x)u_x − ∫u₀², which vanishes for exact solutions.
pub fn energy_balance(traj: &Trajectory) -> f64 {
    traj.final_state().l2_squared() + 2.0 * traj.params.epsilon * traj.dissipation - traj.initial.l2_squared()
}

fn second_energy(state: &SimState, delta: f64, flux: &FluxModel) -> f64 {
    let h = state.grid.spacing();
    let grad: f64 = state.face_slopes().iter().map(|l| l * l).sum::<f64>() * h;
    let pot: f64 = state.u.iter().map(|&v| flux.primitive(v)).sum::<f64>() * h;
    0.5 * delta * grad - pot
}

/// Residual of the second energy balance, built on the KdV-type quantity
/// δ/2 ∫u_x² − ∫F(u):
/// [E(T) − E(0)] + εδ ∫∫ u_xx² β'(u_x) − ε ∫∫ f'(u) β(u_x) u_x.
pub fn second_energy_balance(traj: &Trajectory, flux: &FluxModel) -> f64 {
    let RegularizationParams { epsilon, delta } = traj.params;
    second_energy(traj.final_state(), delta, flux) - second_energy(&traj.initial, delta, flux)
        + epsilon * delta * traj.parabolic_dissipation
        - epsilon * traj.flux_dissipation
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_state(cells: usize) -> SimState {
        let grid = Grid1D::new(0.0, 2.0 * PI, cells).unwrap();
        SimState::from_fn(grid, 0.0, f64::sin).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 15).is_err());
        assert!(Grid1D::new(1.0, 1.0, 64).is_err());
        let g = Grid1D::new(-1.0, 1.0, 400).unwrap();
        assert!((g.spacing() - 0.005).abs() < 1e-15);
        assert!((g.node(0) + 0.9975).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(RegularizationParams::new(-1.0, 0.0).is_err());
        assert!(RegularizationParams::new(0.0, f64::NAN).is_err());
        assert!(RegularizationParams::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn state_rejects_non_finite() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        let mut u = vec![0.0; 16];
        u[5] = f64::NAN;
        assert!(matches!(SimState::new(g, u, 0.0), Err(SolverError::BlowUp { node: 5, .. })));
    }

    #[test]
    fn rhs_of_constant_is_zero() {
        let grid = Grid1D::new(0.0, 1.0, 32).unwrap();
        let s = SimState::from_fn(grid, 0.0, |_| 0.7).unwrap();
        let p = RegularizationParams::new(0.1, 0.01).unwrap();
        for v in [ViscosityModel::von_neumann(), ViscosityModel::linear()] {
            let r = semidiscrete_rhs(&s, &p, &FluxModel::burgers(), &v).unwrap();
            assert!(r.iter().all(|&x| x == 0.0));
        }
    }

    fn max_err(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
        a.iter().enumerate().map(|(j, v)| (v - b(j)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn rhs_advection_matches_analytic_derivative() {
        // −(sin²/2)_x = −sin cos, second-order accurate.
        let p = RegularizationParams::new(0.0, 0.0).unwrap();
        let err = |n: usize| {
            let s = sine_state(n);
            let r = semidiscrete_rhs(&s, &p, &FluxModel::burgers(), &ViscosityModel::linear()).unwrap();
            max_err(&r, |j| {
                let x = s.grid.node(j);
                -x.sin() * x.cos()
            })
        };
        let (e1, e2) = (err(128), err(256));
        assert!(e2 < 1e-3);
        assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn rhs_dispersion_matches_third_derivative() {
        // −(sin)_xxx = cos.
        let p = RegularizationParams::new(0.0, 1.0).unwrap();
        let err = |n: usize| {
            let s = sine_state(n);
            let r = semidiscrete_rhs(&s, &p, &FluxModel::zero(), &ViscosityModel::linear()).unwrap();
            max_err(&r, |j| s.grid.node(j).cos())
        };
        let (e1, e2) = (err(128), err(256));
        assert!(e2 < 1e-3);
        assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
    }

    #[test]
    fn rhs_diffusion_matches_second_derivative() {
        // ((sin)_x)_x = −sin with linear viscosity.
        let p = RegularizationParams::new(1.0, 0.0).unwrap();
        let s = sine_state(256);
        let r = semidiscrete_rhs(&s, &p, &FluxModel::zero(), &ViscosityModel::linear()).unwrap();
        assert!(max_err(&r, |j| -s.grid.node(j).sin()) < 1e-3);
    }

    #[test]
    fn rhs_reports_blow_up() {
        let grid = Grid1D::new(0.0, 1.0, 16).unwrap();
        let mut s = SimState::from_fn(grid, 0.25, |_| 0.0).unwrap();
        s.u[3] = 1e200;
        let p = RegularizationParams::new(0.0, 0.0).unwrap();
        let err = semidiscrete_rhs(&s, &p, &FluxModel::burgers(), &ViscosityModel::linear()).unwrap_err();
        match err {
            SolverError::BlowUp { node, time, .. } => {
                assert!(node == 2 || node == 4);
                assert_eq!(time, 0.25);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn timestep_terms() {
        let grid = Grid1D::new(0.0, 1.0, 100).unwrap();
        let s = SimState::from_fn(grid, 0.0, |x| (2.0 * PI * x).sin()).unwrap();
        let flat = SimState::from_fn(grid, 0.0, |_| 0.0).unwrap();
        let (b, z) = (FluxModel::burgers(), FluxModel::zero());
        let lin = ViscosityModel::linear();
        let umax = s.max_abs();
        let dt = stable_timestep(&s, &RegularizationParams::new(0.0, 0.0).unwrap(), &b, &lin, 0.5, 1.0);
        assert!((dt - 0.5 * 0.01 / umax).abs() < 1e-15);
        let dt = stable_timestep(&flat, &RegularizationParams::new(0.0, 1e-4).unwrap(), &z, &lin, 1.0, 1.0);
        assert!((dt - 2.5e-3).abs() < 1e-15);
        let dt = stable_timestep(&flat, &RegularizationParams::new(0.01, 0.0).unwrap(), &z, &lin, 1.0, 1.0);
        assert!((dt - 5e-3).abs() < 1e-15);
        let dt = stable_timestep(&flat, &RegularizationParams::new(0.0, 0.0).unwrap(), &z, &lin, 1.0, 0.3);
        assert_eq!(dt, 0.3);
    }

    #[test]
    fn timestep_with_unit_amplitude() {
        let grid = Grid1D::new(0.0, 1.0, 100).unwrap();
        let s = SimState::from_fn(grid, 0.0, |_| 1.0).unwrap();
        let dt = stable_timestep(
            &s,
            &RegularizationParams::new(0.0, 0.0).unwrap(),
            &FluxModel::burgers(),
            &ViscosityModel::linear(),
            0.5,
            1.0,
        );
        assert!((dt - 0.005).abs() < 1e-15);
    }

    #[test]
    fn advance_keeps_constant_state() {
        let grid = Grid1D::new(0.0, 1.0, 32).unwrap();
        let s = SimState::from_fn(grid, 0.0, |_| -0.4).unwrap();
        let p = RegularizationParams::new(0.01, 1e-4).unwrap();
        let next = advance(&s, 1e-3, &p, &FluxModel::burgers(), &ViscosityModel::von_neumann()).unwrap();
        assert_eq!(next.u, s.u);
        assert_eq!(next.t, 1e-3);
    }

    #[test]
    fn advance_conserves_mass() {
        let s = sine_state(256);
        let (f, v) = (FluxModel::burgers(), ViscosityModel::von_neumann());
        for p in [(0.0, 0.0), (0.05, 0.0), (0.0, 1e-3), (0.02, 1e-4)] {
            let p = RegularizationParams::new(p.0, p.1).unwrap();
            let dt = stable_timestep(&s, &p, &f, &v, 0.5, 1.0);
            let mut cur = s.clone();
            for _ in 0..20 {
                let next = advance(&cur, dt, &p, &f, &v).unwrap();
                let bound = 10.0 * f64::EPSILON * 256.0 * cur.max_abs();
                assert!((next.mass() - cur.mass()).abs() <= bound, "{p:?}");
                cur = next;
            }
        }
    }

    /// Inviscid Burgers solution before breaking: u = u₀(x − u t), solved by
    /// fixed-point iteration (a contraction while t·max|u₀'| < 1).
    fn characteristics(x: f64, t: f64) -> f64 {
        let mut u = x.sin();
        for _ in 0..200 {
            u = (x - u * t).sin();
        }
        u
    }

    #[test]
    fn inviscid_run_matches_characteristics() {
        let p = RegularizationParams::new(0.0, 0.0).unwrap();
        let (f, v) = (FluxModel::burgers(), ViscosityModel::linear());
        let err = |n: usize| {
            let s = sine_state(n);
            let traj = integrate(&s, 0.5, &p, &f, &v, &[], &IntegrationSettings::default()).unwrap();
            let fin = traj.final_state();
            max_err(&fin.u, |j| characteristics(fin.grid.node(j), 0.5))
        };
        let (e1, e2) = (err(256), err(512));
        assert!(e2 < 1e-3, "{e2}");
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }

    #[test]
    fn integrate_contract() {
        let s = sine_state(64);
        let p = RegularizationParams::new(0.05, 0.0).unwrap();
        let (f, v) = (FluxModel::burgers(), ViscosityModel::von_neumann());
        let set = IntegrationSettings::default();
        assert!(integrate(&s, 0.0, &p, &f, &v, &[], &set).is_err());
        assert!(integrate(&s, 1.0, &p, &f, &v, &[1.5], &set).is_err());
        let traj = integrate(&s, 0.3, &p, &f, &v, &[], &set).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.final_state().t, 0.3);
        let traj = integrate(&s, 0.3, &p, &f, &v, &[0.2, 0.1], &set).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.1, 0.2, 0.3]);
        assert!(traj.dissipation_at_snapshots.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn blow_up_carries_partial_trajectory() {
        // Centered inviscid Burgers through a shock with a huge step blows up.
        let s = sine_state(64);
        let p = RegularizationParams::new(0.0, 0.0).unwrap();
        let set = IntegrationSettings { safety: 1.0, ..Default::default() };
        let res = integrate(&s, 200.0, &p, &FluxModel::burgers(), &ViscosityModel::linear(), &[1.0], &set);
        match res {
            Err(SolverError::BlowUp { partial: Some(traj), time, .. }) => {
                assert!(time > 1.0);
                assert_eq!(traj.snapshots.len(), 1);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn constant_data_balances_exactly() {
        let grid = Grid1D::new(0.0, 1.0, 64).unwrap();
        let s = SimState::from_fn(grid, 0.0, |_| 0.3).unwrap();
        let p = RegularizationParams::new(0.01, 1e-4).unwrap();
        let f = FluxModel::burgers();
        let traj = integrate(&s, 0.5, &p, &f, &ViscosityModel::von_neumann(), &[], &Default::default()).unwrap();
        assert!(energy_balance(&traj).abs() < 1e-14);
        assert!(second_energy_balance(&traj, &f).abs() < 1e-14);
    }

    #[test]
    fn pure_dispersion_conserves_l2() {
        let s = sine_state(128);
        let p = RegularizationParams::new(0.0, 1e-2).unwrap();
        let traj =
            integrate(&s, 1.0, &p, &FluxModel::zero(), &ViscosityModel::linear(), &[], &Default::default()).unwrap();
        assert!(energy_balance(&traj).abs() < 1e-10 * s.l2_squared());
    }

    #[test]
    fn parabolic_run_respects_sup_bound() {
        let s = sine_state(256);
        let p = RegularizationParams::new(0.05, 0.0).unwrap();
        let times: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64).collect();
        let traj =
            integrate(&s, 2.0, &p, &FluxModel::burgers(), &ViscosityModel::von_neumann(), &times, &Default::default())
                .unwrap();
        let sup0 = s.max_abs();
        assert!(traj.snapshots.iter().all(|st| st.max_abs() <= 1.05 * sup0));
        assert!(energy_balance(&traj).abs() < 1e-3 * s.l2_squared());
    }
}
