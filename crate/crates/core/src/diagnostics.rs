//! Measurements on simulated states and trajectories: norms, total
//! variation, distance to the entropy reference, Kruzkov entropy
//! production, space-time value histograms and power-law fits.

use crate::models::{EntropyPair, FluxModel};
use crate::reference::ReferenceSolution;
use crate::solver::{Grid1D, SimState, Trajectory};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("grids do not match: {0}")]
    Mismatch(String),
    #[error("macro-cell ({cell_x}, {cell_t}) contains no samples; use fewer cells")]
    EmptyCell { cell_x: usize, cell_t: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, DiagnosticsError> {
    Err(DiagnosticsError::Invalid(msg.into()))
}

/// (Σ |u_j|^q h)^{1/q}, or max |u_j| for `q = f64::INFINITY`.
pub fn lq_norm(state: &SimState, q: f64) -> Result<f64, DiagnosticsError> {
    if !(q >= 1.0) {
        return invalid(format!("norm exponent must be >= 1, got {q}"));
    }
    if q.is_infinite() {
        return Ok(state.max_abs());
    }
    let h = state.grid.spacing();
    let s: f64 = if q == 1.0 {
        state.u.iter().map(|v| v.abs()).sum()
    } else if q == 2.0 {
        state.u.iter().map(|v| v * v).sum()
    } else {
        state.u.iter().map(|v| v.abs().powf(q)).sum()
    };
    Ok((s * h).powf(1.0 / q))
}

/// Σ |u_{j+1} − u_j| including the periodic wrap.
pub fn total_variation(state: &SimState) -> f64 {
    total_variation_of(&state.u)
}

pub(crate) fn total_variation_of(u: &[f64]) -> f64 {
    let n = u.len();
    (0..n).map(|j| (u[(j + 1) % n] - u[j]).abs()).sum()
}

/// Cell averages of the piecewise-constant field `values` (on `from`)
/// over the cells of `to`. Both grids must cover the same interval.
pub fn restrict_conservative(values: &[f64], from: &Grid1D, to: &Grid1D) -> Vec<f64> {
    let (hf, hc) = (from.spacing(), to.spacing());
    let x0 = from.x_left();
    let mut out = Vec::with_capacity(to.cells());
    let mut i = 0usize;
    for j in 0..to.cells() {
        let (a, b) = (x0 + j as f64 * hc, x0 + (j + 1) as f64 * hc);
        let mut acc = 0.0;
        while i < from.cells() {
            let (fa, fb) = (x0 + i as f64 * hf, x0 + (i + 1) as f64 * hf);
            let overlap = fb.min(b) - fa.max(a);
            if overlap > 0.0 {
                acc += overlap * values[i];
            }
            if fb <= b {
                i += 1;
            } else {
                break;
            }
        }
        out.push(acc / hc);
    }
    out
}

const TIME_TOLERANCE: f64 = 1e-9;

/// Σ |a_j − b̄_j| h where b̄ is the reference averaged onto the cells of `a`.
pub fn l1_distance(a: &SimState, b: &ReferenceSolution) -> Result<f64, DiagnosticsError> {
    if !a.grid.same_domain(&b.grid) {
        return Err(DiagnosticsError::Mismatch(format!(
            "[{}, {}] vs [{}, {}]",
            a.grid.x_left(),
            a.grid.x_right(),
            b.grid.x_left(),
            b.grid.x_right()
        )));
    }
    if (a.t - b.t).abs() > TIME_TOLERANCE * a.t.abs().max(1.0) {
        return Err(DiagnosticsError::Mismatch(format!("times {} and {} differ", a.t, b.t)));
    }
    let restricted =
        if b.grid.cells() == a.grid.cells() { b.u.clone() } else { restrict_conservative(&b.u, &b.grid, &a.grid) };
    Ok(a.u.iter().zip(&restricted).map(|(x, y)| (x - y).abs()).sum::<f64>() * a.grid.spacing())
}

/// `count` evenly spaced Kruzkov constants on [min u₀ − 0.1, max u₀ + 0.1].
pub fn default_k_grid(initial: &SimState, count: usize) -> Vec<f64> {
    let lo = initial.u.iter().copied().fold(f64::INFINITY, f64::min) - 0.1;
    let hi = initial.u.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.1;
    if count <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

pub const DEFAULT_K_COUNT: usize = 33;

/// TV(u₀) · max over k of the range of Q_k on the initial values; the
/// normalizer for entropy production in regime classification.
pub fn entropy_scale(initial: &SimState, flux: &FluxModel, k_grid: &[f64]) -> f64 {
    let q_range = k_grid
        .iter()
        .map(|&k| {
            let pair = EntropyPair::new(k);
            let (lo, hi) = initial.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
                let q = pair.eval(flux, u).1;
                (lo.min(q), hi.max(q))
            });
            hi - lo
        })
        .fold(0.0, f64::max);
    total_variation(initial) * q_range
}

/// Tensor-product hat test functions: `space_cells` periodic hats in x and
/// the interior hats of `time_cells` equal intervals in t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatLattice {
    pub space_cells: usize,
    pub time_cells: usize,
}

impl Default for HatLattice {
    fn default() -> Self {
        Self { space_cells: 8, time_cells: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProductionReport {
    pub k_grid: Vec<f64>,
    /// P⁺(k) = max(0, −min_φ A(k, φ)) / ‖φ‖_{L¹}.
    pub production: Vec<f64>,
    /// min_φ A(k, φ) / ‖φ‖_{L¹}, which is ≥ 0 for an entropy solution.
    pub signed_min: Vec<f64>,
    pub max: f64,
    pub lattice: HatLattice,
}

impl EntropyProductionReport {
    pub fn write_csv(&self, mut w: impl Write) -> Result<(), DiagnosticsError> {
        writeln!(w, "k,production")?;
        for (k, p) in self.k_grid.iter().zip(&self.production) {
            writeln!(w, "{},{}", crate::io::fmt17(*k), crate::io::fmt17(*p))?;
        }
        Ok(())
    }
}

/// ∫ₐᵇ of the hat with peak at `center` and half-width `width` on a periodic
/// domain of length `period` whose hat nodes sit at `origin + i·width`.
/// The hat is linear between lattice nodes, so splitting [a, b] there and
/// applying the midpoint rule is exact.
fn hat_value(x: f64, center: f64, width: f64, period: f64) -> f64 {
    let mut d = (x - center).rem_euclid(period);
    if d > 0.5 * period {
        d = period - d;
    }
    (1.0 - d / width).max(0.0)
}

struct CellWeights {
    /// (hat index, ∫_cell X_i dx, X_i(right edge) − X_i(left edge)).
    entries: Vec<(usize, f64, f64)>,
}

fn cell_weights(grid: &Grid1D, hats: usize) -> Vec<CellWeights> {
    let (xl, len, h) = (grid.x_left(), grid.length(), grid.spacing());
    let width = len / hats as f64;
    (0..grid.cells())
        .map(|j| {
            let (a, b) = (xl + j as f64 * h, xl + (j + 1) as f64 * h);
            let first = ((a - xl) / width).floor() as i64 - 1;
            let last = ((b - xl) / width).floor() as i64 + 1;
            let mut idx: Vec<usize> = (first..=last).map(|i| i.rem_euclid(hats as i64) as usize).collect();
            idx.sort_unstable();
            idx.dedup();
            // Interior breakpoints of the piecewise-linear hats inside [a, b].
            let mut cuts = vec![a];
            let mut node = (((a - xl) / width).floor() + 1.0) * width + xl;
            while node < b {
                cuts.push(node);
                node += width;
            }
            cuts.push(b);
            let entries = idx
                .into_iter()
                .filter_map(|i| {
                    let c = xl + i as f64 * width;
                    let integral: f64 =
                        cuts.windows(2).map(|w| (w[1] - w[0]) * hat_value(0.5 * (w[0] + w[1]), c, width, len)).sum();
                    let jump = hat_value(b, c, width, len) - hat_value(a, c, width, len);
                    (integral != 0.0 || jump != 0.0).then_some((i, integral, jump))
                })
                .collect();
            CellWeights { entries }
        })
        .collect()
}

/// ∫ₐᵇ of the piecewise-linear interpolant of `vals` at `times`.
fn linear_integral(times: &[f64], vals: &[f64], a: f64, b: f64) -> f64 {
    let mut acc = 0.0;
    for s in 0..times.len() - 1 {
        let (t0, t1) = (times[s], times[s + 1]);
        let (lo, hi) = (t0.max(a), t1.min(b));
        if hi > lo {
            let interp = |t: f64| vals[s] + (vals[s + 1] - vals[s]) * (t - t0) / (t1 - t0);
            acc += 0.5 * (hi - lo) * (interp(lo) + interp(hi));
        }
    }
    acc
}

/// ∫ of the piecewise-linear interpolant times the hat centred at `c` with
/// half-width `w`. Each piece is a product of two linear functions, so
/// Simpson's rule on pieces split at all breakpoints is exact.
fn linear_hat_integral(times: &[f64], vals: &[f64], c: f64, w: f64) -> f64 {
    let mut acc = 0.0;
    let hat = |t: f64| (1.0 - (t - c).abs() / w).max(0.0);
    for s in 0..times.len() - 1 {
        let (t0, t1) = (times[s], times[s + 1]);
        let mut cuts = vec![t0.max(c - w)];
        if c > t0 && c < t1 {
            cuts.push(c);
        }
        cuts.push(t1.min(c + w));
        for p in cuts.windows(2) {
            let (lo, hi) = (p[0], p[1]);
            if hi <= lo {
                continue;
            }
            let interp = |t: f64| vals[s] + (vals[s + 1] - vals[s]) * (t - t0) / (t1 - t0);
            let g = |t: f64| interp(t) * hat(t);
            let m = 0.5 * (lo + hi);
            acc += (hi - lo) / 6.0 * (g(lo) + 4.0 * g(m) + g(hi));
        }
    }
    acc
}

/// Kruzkov entropy production of a trajectory against hat test functions.
///
/// For each k and each lattice hat φ ≥ 0 this evaluates
/// A(k, φ) = ∬ (|u−k| φ_t + Q_k(u) φ_x) dx dt, with u piecewise constant per
/// cell in space and piecewise linear between stored states in time. An
/// entropy solution has A ≥ 0 for every φ; the report keeps the worst
/// violation per k, normalized by ‖φ‖_{L¹}.
pub fn entropy_production(
    traj: &Trajectory,
    flux: &FluxModel,
    k_grid: &[f64],
    lattice: HatLattice,
) -> Result<EntropyProductionReport, DiagnosticsError> {
    let states: Vec<&SimState> = traj.states().collect();
    if states.len() < 3 {
        return invalid("entropy production needs at least three stored states");
    }
    if lattice.space_cells < 2 || lattice.time_cells < 2 {
        return invalid("hat lattice needs at least 2 cells in space and in time");
    }
    if k_grid.is_empty() {
        return invalid("empty k grid");
    }
    let grid = states[0].grid;
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let (t0, t1) = (times[0], times[times.len() - 1]);
    if !(t1 > t0) {
        return invalid("degenerate time window");
    }
    let nx = lattice.space_cells;
    let dx = grid.length() / nx as f64;
    let dt = (t1 - t0) / lattice.time_cells as f64;
    let norm = dx * dt;
    let weights = cell_weights(&grid, nx);

    let mut production = Vec::with_capacity(k_grid.len());
    let mut signed_min = Vec::with_capacity(k_grid.len());
    let ns = states.len();
    let mut eta_series = vec![0.0; nx * ns];
    let mut q_series = vec![0.0; nx * ns];
    for &k in k_grid {
        let pair = EntropyPair::new(k);
        // Hat derivatives integrate to zero, so a constant offset is free and
        // makes constant states produce exactly nothing.
        let (eta0, q0) = pair.eval(flux, states[0].u[0]);
        eta_series.iter_mut().for_each(|v| *v = 0.0);
        q_series.iter_mut().for_each(|v| *v = 0.0);
        for (s, st) in states.iter().enumerate() {
            for (u, cw) in st.u.iter().zip(&weights) {
                let (eta, q) = pair.eval(flux, *u);
                let (eta, q) = (eta - eta0, q - q0);
                for &(i, integral, jump) in &cw.entries {
                    eta_series[i * ns + s] += eta * integral;
                    q_series[i * ns + s] += q * jump;
                }
            }
        }
        let mut worst = f64::INFINITY;
        for i in 0..nx {
            let eta = &eta_series[i * ns..(i + 1) * ns];
            let q = &q_series[i * ns..(i + 1) * ns];
            for n in 1..lattice.time_cells {
                let c = t0 + n as f64 * dt;
                let time_part =
                    (linear_integral(&times, eta, c - dt, c) - linear_integral(&times, eta, c, c + dt)) / dt;
                let space_part = linear_hat_integral(&times, q, c, dt);
                worst = worst.min((time_part + space_part) / norm);
            }
        }
        signed_min.push(worst);
        production.push((-worst).max(0.0));
    }
    let max = production.iter().copied().fold(0.0, f64::max);
    Ok(EntropyProductionReport { k_grid: k_grid.to_vec(), production, signed_min, max, lattice })
}

/// Space-time box over which histograms are collected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Window {
    /// The whole grid over the whole stored time span.
    pub fn of(traj: &Trajectory) -> Self {
        let g = traj.initial.grid;
        Self { x_min: g.x_left(), x_max: g.x_right(), t_min: traj.initial.t, t_max: traj.final_state().t }
    }
}

/// Empirical stand-in for a Young measure: one value histogram per
/// space-time macro-cell, each normalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungHistogram {
    pub window: Window,
    pub cells_x: usize,
    pub cells_t: usize,
    pub bins: usize,
    pub value_min: f64,
    pub value_max: f64,
    masses: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl YoungHistogram {
    fn cell(&self, cx: usize, ct: usize) -> usize {
        ct * self.cells_x + cx
    }

    /// Bin centres run from `value_min` (bin 0) to `value_max` (last bin).
    pub fn bin_center(&self, b: usize) -> f64 {
        if self.bins < 2 || self.value_max == self.value_min {
            return self.value_min;
        }
        self.value_min + (self.value_max - self.value_min) * b as f64 / (self.bins - 1) as f64
    }

    pub fn masses(&self, cx: usize, ct: usize) -> &[f64] {
        let c = self.cell(cx, ct);
        &self.masses[c * self.bins..(c + 1) * self.bins]
    }

    pub fn mean(&self, cx: usize, ct: usize) -> f64 {
        self.means[self.cell(cx, ct)]
    }

    pub fn variance(&self, cx: usize, ct: usize) -> f64 {
        self.variances[self.cell(cx, ct)]
    }

    /// ⟨ν, g⟩ in one macro-cell.
    pub fn expectation(&self, cx: usize, ct: usize, g: impl Fn(f64) -> f64) -> f64 {
        self.masses(cx, ct).iter().enumerate().map(|(b, m)| m * g(self.bin_center(b))).sum()
    }

    pub fn mean_variance(&self) -> f64 {
        self.variances.iter().sum::<f64>() / self.variances.len() as f64
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<(), DiagnosticsError> {
        writeln!(w, "cell_x,cell_t,bin,mass")?;
        for ct in 0..self.cells_t {
            for cx in 0..self.cells_x {
                for (b, m) in self.masses(cx, ct).iter().enumerate() {
                    if *m > 0.0 {
                        writeln!(w, "{cx},{ct},{b},{}", crate::io::fmt17(*m))?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub const DEFAULT_HISTOGRAM_SHAPE: (usize, usize, usize) = (16, 8, 64);

/// Bins every stored nodal value inside `window` into `cells_x × cells_t`
/// macro-cells with `bins` value bins over the observed range.
pub fn young_histogram(
    traj: &Trajectory,
    window: Window,
    cells_x: usize,
    cells_t: usize,
    bins: usize,
) -> Result<YoungHistogram, DiagnosticsError> {
    if bins < 16 {
        return invalid(format!("need at least 16 bins, got {bins}"));
    }
    if cells_x == 0 || cells_t == 0 {
        return invalid("need at least one macro-cell in each direction");
    }
    let span = Window::of(traj);
    let eps_t = 1e-12 * span.t_max.abs().max(1.0);
    if !(window.x_min < window.x_max && window.t_min <= window.t_max)
        || window.x_min < span.x_min - 1e-12
        || window.x_max > span.x_max + 1e-12
        || window.t_min < span.t_min - eps_t
        || window.t_max > span.t_max + eps_t
    {
        return invalid("window must be non-empty and inside the trajectory extent");
    }
    let t_len = window.t_max - window.t_min;
    let x_len = window.x_max - window.x_min;
    let mut samples: Vec<(usize, f64)> = Vec::new();
    for st in traj.states() {
        if st.t < window.t_min - eps_t || st.t > window.t_max + eps_t {
            continue;
        }
        let ct =
            if t_len > 0.0 { (((st.t - window.t_min) / t_len * cells_t as f64) as usize).min(cells_t - 1) } else { 0 };
        for (j, &v) in st.u.iter().enumerate() {
            let x = st.grid.node(j);
            if x < window.x_min || x >= window.x_max {
                continue;
            }
            let cx = (((x - window.x_min) / x_len * cells_x as f64) as usize).min(cells_x - 1);
            samples.push((ct * cells_x + cx, v));
        }
    }
    if samples.is_empty() {
        return Err(DiagnosticsError::EmptyCell { cell_x: 0, cell_t: 0 });
    }
    let vmin = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let vmax = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let ncells = cells_x * cells_t;
    let mut counts = vec![0usize; ncells * bins];
    let mut totals = vec![0usize; ncells];
    let width = (vmax - vmin) / (bins - 1) as f64;
    for &(c, v) in &samples {
        let b = if width > 0.0 { (((v - vmin) / width).round() as usize).min(bins - 1) } else { 0 };
        counts[c * bins + b] += 1;
        totals[c] += 1;
    }
    if let Some(c) = totals.iter().position(|&n| n == 0) {
        return Err(DiagnosticsError::EmptyCell { cell_x: c % cells_x, cell_t: c / cells_x });
    }
    let masses: Vec<f64> = counts.iter().enumerate().map(|(i, &n)| n as f64 / totals[i / bins] as f64).collect();
    let mut hist = YoungHistogram {
        window,
        cells_x,
        cells_t,
        bins,
        value_min: vmin,
        value_max: vmax,
        masses,
        means: vec![0.0; ncells],
        variances: vec![0.0; ncells],
    };
    for c in 0..ncells {
        let (cx, ct) = (c % cells_x, c / cells_x);
        let mean = hist.expectation(cx, ct, |v| v);
        let var = hist.expectation(cx, ct, |v| (v - mean) * (v - mean));
        hist.means[c] = mean;
        hist.variances[c] = var.max(0.0);
    }
    Ok(hist)
}

/// Mean over macro-cells of the per-cell standard deviation, divided by the
/// global value range. Zero exactly when every cell is a single bin.
pub fn concentration_metric(hist: &YoungHistogram) -> f64 {
    let range = hist.value_max - hist.value_min;
    if range <= 0.0 {
        return 0.0;
    }
    let n = hist.cells_x * hist.cells_t;
    (0..n).map(|c| hist.variances[c].sqrt()).sum::<f64>() / n as f64 / range
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64, DiagnosticsError> {
    if points.len() < 2 {
        return invalid("a slope needs at least two points");
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return invalid("log-log fit needs positive data");
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid("abscissae are all equal");
    }
    Ok(sxy / sxx)
}

/// Slope of log sup|u| against log(1/δ) over runs `(δ, sup|u|)`.
pub fn sup_scaling_fit(runs: &[(f64, f64)]) -> Result<f64, DiagnosticsError> {
    if runs.len() < 3 {
        return invalid(format!("need at least 3 runs, got {}", runs.len()));
    }
    let lo = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 10.0 * (1.0 - 1e-12) {
        return invalid("runs must span at least a decade of delta");
    }
    let pts: Vec<(f64, f64)> = runs.iter().map(|&(d, s)| (1.0 / d, s)).collect();
    log_log_slope(&pts)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn st(values: Vec<f64>) -> SimState {
        let g = Grid1D::new(0.0, 2.5, values.len()).unwrap();
        SimState::new(g, values, 0.0).unwrap()
    }

    fn rf(s: &SimState) -> ReferenceSolution {
        ReferenceSolution { grid: s.grid, u: s.u.clone(), t: s.t, scheme: crate::reference::ReferenceScheme::Godunov }
    }

    proptest! {
        #[test]
        fn holder_on_finite_domain(values in prop::collection::vec(-5.0f64..5.0, 16..64), q in 1.0f64..8.0) {
            let s = st(values);
            let sup = lq_norm(&s, f64::INFINITY).unwrap();
            let lq = lq_norm(&s, q).unwrap();
            prop_assert!(sup >= lq / s.grid.length().powf(1.0 / q) * (1.0 - 1e-12));
        }

        #[test]
        fn l1_is_a_metric(
            a in prop::collection::vec(-5.0f64..5.0, 32),
            b in prop::collection::vec(-5.0f64..5.0, 32),
            c in prop::collection::vec(-5.0f64..5.0, 32),
        ) {
            let (a, b, c) = (st(a), st(b), st(c));
            let ab = l1_distance(&a, &rf(&b)).unwrap();
            let ba = l1_distance(&b, &rf(&a)).unwrap();
            let bc = l1_distance(&b, &rf(&c)).unwrap();
            let ac = l1_distance(&a, &rf(&c)).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn dirac_cells_iff_zero_concentration(levels in prop::collection::vec(-3.0f64..3.0, 4)) {
            // Piecewise-constant in x per macro-cell and constant in time.
            let g = Grid1D::new(0.0, 1.0, 64).unwrap();
            let mk = |t: f64| SimState::new(g, (0..64).map(|j| levels[j / 16]).collect(), t).unwrap();
            let traj = Trajectory::from_states(
                mk(0.0),
                (1..=4).map(|i| mk(i as f64)).collect(),
                crate::solver::RegularizationParams::new(0.0, 0.0).unwrap(),
            ).unwrap();
            let h = young_histogram(&traj, Window::of(&traj), 4, 2, 16).unwrap();
            prop_assert_eq!(concentration_metric(&h), 0.0);
        }
    }
}
