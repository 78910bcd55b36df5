//! Entropy-solution reference for the inviscid conservation law
//! u_t + f(u)_x = 0: a first-order Godunov scheme and the closed-form
//! Riemann solution for convex fluxes.

use crate::models::{FluxKind, FluxModel, ModelError};
use crate::solver::{Grid1D, SimState, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceScheme {
    Godunov,
    ExactRiemann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub grid: Grid1D,
    pub u: Vec<f64>,
    pub t: f64,
    pub scheme: ReferenceScheme,
}

impl ReferenceSolution {
    pub fn as_state(&self) -> SimState {
        SimState { grid: self.grid, u: self.u.clone(), t: self.t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannData {
    pub u_left: f64,
    pub u_right: f64,
}

/// Extremum of f over `[lo, hi]`. Closed form for the built-in convex
/// fluxes; tabulated fluxes are sampled and then refined by golden-section
/// search around the best sample.
fn extremum(flux: &FluxModel, lo: f64, hi: f64, maximize: bool) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    match flux.kind() {
        FluxKind::Zero => 0.0,
        FluxKind::Burgers | FluxKind::Power { .. } => {
            if maximize {
                flux.f(lo).max(flux.f(hi))
            } else {
                flux.f(0.0_f64.clamp(lo, hi))
            }
        }
        FluxKind::Table(_) => {
            const SAMPLES: usize = 64;
            let g = |u: f64| sign * flux.f(u);
            let step = (hi - lo) / SAMPLES as f64;
            let (mut best_i, mut best) = (0, g(lo));
            for i in 1..=SAMPLES {
                let v = g(lo + step * i as f64);
                if v < best {
                    best = v;
                    best_i = i;
                }
            }
            let mut a = (lo + step * (best_i as f64 - 1.0)).max(lo);
            let mut b = (lo + step * (best_i as f64 + 1.0)).min(hi);
            let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if g(c) < g(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let refined = g(0.5 * (a + b));
            sign * best.min(refined).min(g(lo)).min(g(hi))
        }
    }
}

/// Godunov numerical flux: min of f over [uₗ, uᵣ] when uₗ ≤ uᵣ, else max
/// over [uᵣ, uₗ].
pub fn godunov_flux(u_left: f64, u_right: f64, flux: &FluxModel) -> f64 {
    if u_left == u_right {
        flux.f(u_left)
    } else if u_left < u_right {
        extremum(flux, u_left, u_right, false)
    } else {
        extremum(flux, u_right, u_left, true)
    }
}

/// Conservative first-order Godunov evolution on a periodic grid.
#[derive(Debug, Clone)]
pub struct Godunov<'a> {
    flux: &'a FluxModel,
    pub state: SimState,
    faces: Vec<f64>,
}

impl<'a> Godunov<'a> {
    pub fn new(initial: SimState, flux: &'a FluxModel) -> Self {
        let n = initial.u.len();
        Self { flux, state: initial, faces: vec![0.0; n] }
    }

    /// Largest stable step `cfl · h / max|f'|`; `None` when nothing moves.
    pub fn stable_dt(&self, cfl: f64) -> Option<f64> {
        let speed = self.state.u.iter().fold(0.0_f64, |m, &v| m.max(self.flux.df(v).abs()));
        (speed > 0.0).then(|| cfl * self.state.grid.spacing() / speed)
    }

    pub fn step(&mut self, dt: f64) {
        let u = &self.state.u;
        let n = u.len();
        // faces[j] = flux through the face between j and j+1.
        for j in 0..n {
            self.faces[j] = godunov_flux(u[j], u[(j + 1) % n], self.flux);
        }
        let r = dt / self.state.grid.spacing();
        for j in 0..n {
            self.state.u[j] -= r * (self.faces[j] - self.faces[(j + n - 1) % n]);
        }
        self.state.t += dt;
    }

    pub fn into_reference(self) -> ReferenceSolution {
        ReferenceSolution { grid: self.state.grid, u: self.state.u, t: self.state.t, scheme: ReferenceScheme::Godunov }
    }
}

/// Godunov CFL number used by [`godunov_integrate`].
pub const GODUNOV_CFL: f64 = 0.9;

/// Runs the Godunov scheme from `initial.t` to `final_time`, landing exactly
/// on `final_time`.
pub fn godunov_integrate(
    initial: &SimState,
    final_time: f64,
    flux: &FluxModel,
) -> Result<ReferenceSolution, SolverError> {
    godunov_integrate_observed(initial, final_time, flux, |_| {})
}

/// As [`godunov_integrate`], calling `observe` after every step.
pub fn godunov_integrate_observed(
    initial: &SimState,
    final_time: f64,
    flux: &FluxModel,
    mut observe: impl FnMut(&SimState),
) -> Result<ReferenceSolution, SolverError> {
    if !(final_time >= initial.t) || !final_time.is_finite() {
        return Err(SolverError::Invalid(format!("final time {final_time} precedes the initial time {}", initial.t)));
    }
    let mut g = Godunov::new(initial.clone(), flux);
    while g.state.t < final_time {
        let remaining = final_time - g.state.t;
        let dt = g.stable_dt(GODUNOV_CFL).map_or(remaining, |d| d.min(remaining));
        g.step(dt);
        if remaining - dt <= 1e-14 * final_time.max(1.0) {
            g.state.t = final_time;
        }
        observe(&g.state);
    }
    Ok(g.into_reference())
}

/// Self-similar entropy solution of the Riemann problem at ξ = x/t for a
/// convex flux. At ξ equal to the shock speed the left state is returned.
pub fn riemann_exact(data: RiemannData, flux: &FluxModel, xi: f64) -> Result<f64, ModelError> {
    let RiemannData { u_left: ul, u_right: ur } = data;
    for v in [ul, ur, xi] {
        if !v.is_finite() {
            return Err(ModelError::NonFinite(v));
        }
    }
    let (lo, hi) = (ul.min(ur), ul.max(ur));
    if !flux.is_convex_on(lo, hi) {
        return Err(ModelError::NotConvex { lo, hi });
    }
    if ul == ur {
        return Ok(ul);
    }
    if ul > ur {
        let s = (flux.f(ul) - flux.f(ur)) / (ul - ur);
        Ok(if xi <= s { ul } else { ur })
    } else {
        let (sl, sr) = (flux.df(ul), flux.df(ur));
        Ok(if xi <= sl {
            ul
        } else if xi >= sr {
            ur
        } else {
            flux.inverse_derivative(xi, ul, ur)
        })
    }
}

/// Samples the exact Riemann solution with the jump at `x0` on `grid` at
/// time `t` (the initial step at `t = 0`).
pub fn riemann_profile(
    grid: Grid1D,
    data: RiemannData,
    flux: &FluxModel,
    x0: f64,
    t: f64,
) -> Result<ReferenceSolution, ModelError> {
    let u = grid
        .nodes()
        .map(|x| {
            if t > 0.0 {
                riemann_exact(data, flux, (x - x0) / t)
            } else {
                Ok(if x < x0 { data.u_left } else { data.u_right })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReferenceSolution { grid, u, t, scheme: ReferenceScheme::ExactRiemann })
}

/// Exact solution for step data on a periodic grid: `u_left` on
/// `[x_left, x0)` and `u_right` on `[x0, x_right)`. The wrap-around produces
/// a second, reversed Riemann problem at the seam; the two wave fans are
/// treated independently, which is exact until they meet.
pub fn periodic_riemann_profile(
    grid: Grid1D,
    data: RiemannData,
    flux: &FluxModel,
    x0: f64,
    t: f64,
) -> Result<ReferenceSolution, ModelError> {
    let reversed = RiemannData { u_left: data.u_right, u_right: data.u_left };
    let (a, b) = (grid.x_left(), grid.x_right());
    let u = grid
        .nodes()
        .map(|x| {
            let to_main = (x - x0).abs();
            let to_seam = (x - a).min(b - x);
            if to_main <= to_seam {
                if t > 0.0 {
                    riemann_exact(data, flux, (x - x0) / t)
                } else {
                    Ok(if x < x0 { data.u_left } else { data.u_right })
                }
            } else {
                let offset = if x - a < b - x { x - a } else { x - b };
                if t > 0.0 {
                    riemann_exact(reversed, flux, offset / t)
                } else {
                    Ok(if offset < 0.0 { reversed.u_left } else { reversed.u_right })
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReferenceSolution { grid, u, t, scheme: ReferenceScheme::ExactRiemann })
}

/// True while the wave fans of [`periodic_riemann_profile`] cannot have met:
/// the fastest wave has covered at most a quarter of the domain.
pub fn periodic_riemann_valid(grid: &Grid1D, data: RiemannData, flux: &FluxModel, t: f64) -> bool {
    let speed = flux.df(data.u_left).abs().max(flux.df(data.u_right).abs());
    speed * t <= 0.25 * grid.length()
}

fn lr_norm(u: &[f64], h: f64, r: f64) -> f64 {
    if r.is_infinite() {
        u.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        (u.iter().map(|v| v.abs().powf(r)).sum::<f64>() * h).powf(1.0 / r)
    }
}

/// True when the L^r norm never grows between consecutive states by more
/// than 1e-12 of the first state's norm.
pub fn norm_contraction_check(states: &[SimState], r: f64) -> Result<bool, SolverError> {
    if states.len() < 2 {
        return Err(SolverError::Invalid("norm contraction needs at least two states".into()));
    }
    if !(r >= 1.0) {
        return Err(SolverError::Invalid(format!("norm exponent must be >= 1, got {r}")));
    }
    let norms: Vec<f64> = states.iter().map(|s| lr_norm(&s.u, s.grid.spacing(), r)).collect();
    let slack = 1e-12 * norms[0];
    Ok(norms.windows(2).all(|w| w[1] <= w[0] + slack))
}
