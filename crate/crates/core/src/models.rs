//! Flux and viscosity models, their calculus, and sampled checks of the
//! structural growth assumptions placed on them.
//!
//! Models are immutable once built. The `f`, `df`, `beta`, ... accessors are
//! unchecked and meant for inner loops; the `*_eval` functions validate their
//! argument first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite argument {0}")]
    NonFinite(f64),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid sample range: {0}")]
    InvalidRange(String),
    #[error("flux is not convex on [{lo}, {hi}]")]
    NotConvex { lo: f64, hi: f64 },
}

fn finite(x: f64) -> Result<f64, ModelError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ModelError::NonFinite(x))
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson
/// slopes with the Fritsch–Butland harmonic mean at interior knots).
///
/// Outside the tabulated range the interpolant continues linearly with the
/// end slopes, so it stays C¹ everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    /// `cumulative[i]` = integral of the interpolant from `xs[0]` to `xs[i]`.
    cumulative: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, ModelError> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(ModelError::InvalidParameter("table needs at least two (x, y) pairs of equal length".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter("table contains non-finite values".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidParameter("table abscissae must be strictly increasing".into()));
        }
        let n = xs.len();
        let widths: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let secants: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / widths[k]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = secants[0];
            slopes[1] = secants[0];
        } else {
            for k in 1..n - 1 {
                let (d0, d1) = (secants[k - 1], secants[k]);
                if d0 * d1 > 0.0 {
                    let w1 = 2.0 * widths[k] + widths[k - 1];
                    let w2 = widths[k] + 2.0 * widths[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(widths[0], widths[1], secants[0], secants[1]);
            slopes[n - 1] = end_slope(widths[n - 2], widths[n - 3], secants[n - 2], secants[n - 3]);
        }
        let mut cumulative = vec![0.0; n];
        for k in 0..n - 1 {
            let h = widths[k];
            cumulative[k + 1] =
                cumulative[k] + h * (0.5 * (ys[k] + ys[k + 1]) + h * (slopes[k] - slopes[k + 1]) / 12.0);
        }
        Ok(Self { xs, ys, slopes, cumulative })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.xs.partition_point(|&v| v <= x);
        i.clamp(1, self.xs.len() - 1) - 1
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x > self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        self.ys[k] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * self.slopes[k] * (t3 - 2.0 * t2 + t)
            + self.ys[k + 1] * (-2.0 * t3 + 3.0 * t2)
            + h * self.slopes[k + 1] * (t3 - t2)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.slopes[0];
        }
        if x > self.xs[n - 1] {
            return self.slopes[n - 1];
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        (self.ys[k] * (6.0 * t2 - 6.0 * t) + self.ys[k + 1] * (6.0 * t - 6.0 * t2)) / h
            + self.slopes[k] * (3.0 * t2 - 4.0 * t + 1.0)
            + self.slopes[k + 1] * (3.0 * t2 - 2.0 * t)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        ((self.ys[k] - self.ys[k + 1]) * (12.0 * t - 6.0) / h
            + self.slopes[k] * (6.0 * t - 4.0)
            + self.slopes[k + 1] * (6.0 * t - 2.0))
            / h
    }

    /// Integral of the interpolant from `xs[0]` to `x`.
    fn integral_from_start(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            let d = x - self.xs[0];
            return self.ys[0] * d + 0.5 * self.slopes[0] * d * d;
        }
        if x > self.xs[n - 1] {
            let d = x - self.xs[n - 1];
            return self.cumulative[n - 1] + self.ys[n - 1] * d + 0.5 * self.slopes[n - 1] * d * d;
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        self.cumulative[k]
            + h * (self.ys[k] * (t - t3 + 0.5 * t4)
                + h * self.slopes[k] * (0.5 * t2 - 2.0 * t3 / 3.0 + 0.25 * t4)
                + self.ys[k + 1] * (t3 - 0.5 * t4)
                + h * self.slopes[k + 1] * (-t3 / 3.0 + 0.25 * t4))
    }

    /// Integral of the interpolant from 0 to `x`.
    pub fn integral_from_zero(&self, x: f64) -> f64 {
        self.integral_from_start(x) - self.integral_from_start(0.0)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxKind {
    /// f ≡ 0: isolates the diffusion and dispersion terms.
    Zero,
    /// f(u) = u²/2.
    Burgers,
    /// f(u) = |u|^m / m, so f'(u) = u|u|^{m-2}.
    Power { m: f64 },
    /// Tabulated flux values, interpolated by a monotone cubic.
    Table(MonotoneCubic),
}

/// Flux function together with the declared growth exponent `m` and
/// constant `C1` of the bound |f'(u)| ≤ C1 (1 + |u|^{m-1}).
#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    kind: FluxKind,
    growth_exponent: f64,
    growth_constant: f64,
}

impl FluxModel {
    pub fn burgers() -> Self {
        Self { kind: FluxKind::Burgers, growth_exponent: 2.0, growth_constant: 1.0 }
    }

    pub fn zero() -> Self {
        Self { kind: FluxKind::Zero, growth_exponent: 2.0, growth_constant: 1.0 }
    }

    pub fn power(m: f64) -> Result<Self, ModelError> {
        if !(m.is_finite() && m > 1.0) {
            return Err(ModelError::InvalidParameter(format!("power flux needs m > 1, got {m}")));
        }
        Ok(Self { kind: FluxKind::Power { m }, growth_exponent: m, growth_constant: 1.0 })
    }

    /// Tabulated flux through the points `(us[i], fs[i])`; `m` and `c1` are
    /// the declared growth constants.
    pub fn table(us: Vec<f64>, fs: Vec<f64>, m: f64, c1: f64) -> Result<Self, ModelError> {
        let cubic = MonotoneCubic::new(us, fs)?;
        Self { kind: FluxKind::Table(cubic), growth_exponent: 2.0, growth_constant: 1.0 }.with_growth(m, c1)
    }

    /// Overrides the declared growth constants.
    pub fn with_growth(mut self, m: f64, c1: f64) -> Result<Self, ModelError> {
        if !(m.is_finite() && m > 1.0) {
            return Err(ModelError::InvalidParameter(format!("growth exponent m must exceed 1, got {m}")));
        }
        if !(c1.is_finite() && c1 > 0.0) {
            return Err(ModelError::InvalidParameter(format!("C1 must be positive, got {c1}")));
        }
        self.growth_exponent = m;
        self.growth_constant = c1;
        Ok(self)
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Zero => 0.0,
            FluxKind::Burgers => 0.5 * u * u,
            FluxKind::Power { m } => u.abs().powf(*m) / m,
            FluxKind::Table(t) => t.value(u),
        }
    }

    #[inline]
    pub fn df(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Zero => 0.0,
            FluxKind::Burgers => u,
            FluxKind::Power { m } => u * u.abs().powf(m - 2.0),
            FluxKind::Table(t) => t.derivative(u),
        }
    }

    /// Primitive F with F' = f and F(0) = 0.
    pub fn primitive(&self, u: f64) -> f64 {
        match &self.kind {
            FluxKind::Zero => 0.0,
            FluxKind::Burgers => u * u * u / 6.0,
            FluxKind::Power { m } => u.signum() * u.abs().powf(m + 1.0) / (m * (m + 1.0)),
            FluxKind::Table(t) => t.integral_from_zero(u),
        }
    }

    /// True when f is convex on `[lo, hi]` (sampled for tabulated fluxes).
    pub fn is_convex_on(&self, lo: f64, hi: f64) -> bool {
        match &self.kind {
            FluxKind::Zero | FluxKind::Burgers | FluxKind::Power { .. } => true,
            FluxKind::Table(t) => {
                let (lo, hi) = (lo.min(hi), lo.max(hi));
                (0..=256).all(|i| {
                    let u = lo + (hi - lo) * i as f64 / 256.0;
                    t.second_derivative(u) >= -1e-12
                })
            }
        }
    }

    /// Inverse of f' on `[lo, hi]`, clamped to the interval. Requires f' to
    /// be non-decreasing there.
    pub fn inverse_derivative(&self, slope: f64, lo: f64, hi: f64) -> f64 {
        let raw = match &self.kind {
            FluxKind::Zero => 0.5 * (lo + hi),
            FluxKind::Burgers => slope,
            FluxKind::Power { m } => slope.signum() * slope.abs().powf(1.0 / (m - 1.0)),
            FluxKind::Table(t) => {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if t.derivative(mid) < slope {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            }
        };
        raw.clamp(lo, hi)
    }
}

/// `flux_eval`: f(u), rejecting non-finite input.
pub fn flux_eval(model: &FluxModel, u: f64) -> Result<f64, ModelError> {
    Ok(model.f(finite(u)?))
}

/// `flux_primitive`: F(u) with F(0) = 0.
pub fn flux_primitive(model: &FluxModel, u: f64) -> Result<f64, ModelError> {
    Ok(model.primitive(finite(u)?))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViscosityKind {
    /// β(λ) = λ.
    Linear,
    /// β(λ) = |λ|λ (pseudo-viscosity).
    VonNeumann,
    /// β(λ) = |λ|^{3r-2} λ.
    Power {
        r: f64,
    },
    Table(MonotoneCubic),
}

/// Declared constants of the growth conditions on β(λ)λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityConstants {
    pub r: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// Large-argument threshold N.
    pub threshold: f64,
}

impl Default for ViscosityConstants {
    fn default() -> Self {
        Self { r: 1.0, c2: 1.0, c3: 1.0, c4: 1.0, c5: 1.0, threshold: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityModel {
    kind: ViscosityKind,
    constants: ViscosityConstants,
}

impl ViscosityModel {
    pub fn linear() -> Self {
        Self { kind: ViscosityKind::Linear, constants: ViscosityConstants::default() }
    }

    pub fn von_neumann() -> Self {
        Self { kind: ViscosityKind::VonNeumann, constants: ViscosityConstants::default() }
    }

    pub fn power(r: f64) -> Result<Self, ModelError> {
        if !(r.is_finite() && r >= 1.0) {
            return Err(ModelError::InvalidParameter(format!("power viscosity needs r >= 1, got {r}")));
        }
        Ok(Self {
            kind: ViscosityKind::Power { r },
            constants: ViscosityConstants { r, ..ViscosityConstants::default() },
        })
    }

    pub fn table(lambdas: Vec<f64>, betas: Vec<f64>) -> Result<Self, ModelError> {
        Ok(Self {
            kind: ViscosityKind::Table(MonotoneCubic::new(lambdas, betas)?),
            constants: ViscosityConstants::default(),
        })
    }

    pub fn with_constants(mut self, constants: ViscosityConstants) -> Result<Self, ModelError> {
        let c = constants;
        if !(c.r.is_finite() && c.r >= 1.0) {
            return Err(ModelError::InvalidParameter(format!("r must be >= 1, got {}", c.r)));
        }
        for (name, v) in [("C2", c.c2), ("C3", c.c3), ("C4", c.c4), ("C5", c.c5), ("N", c.threshold)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        self.constants = constants;
        Ok(self)
    }

    pub fn kind(&self) -> &ViscosityKind {
        &self.kind
    }

    pub fn constants(&self) -> &ViscosityConstants {
        &self.constants
    }

    #[inline]
    pub fn beta(&self, lambda: f64) -> f64 {
        match &self.kind {
            ViscosityKind::Linear => lambda,
            ViscosityKind::VonNeumann => lambda.abs() * lambda,
            ViscosityKind::Power { r } => lambda.abs().powf(3.0 * r - 2.0) * lambda,
            ViscosityKind::Table(t) => t.value(lambda),
        }
    }

    /// β'(λ); the power laws use the limit value 0 at λ = 0.
    #[inline]
    pub fn beta_prime(&self, lambda: f64) -> f64 {
        match &self.kind {
            ViscosityKind::Linear => 1.0,
            ViscosityKind::VonNeumann => 2.0 * lambda.abs(),
            ViscosityKind::Power { r } => (3.0 * r - 1.0) * lambda.abs().powf(3.0 * r - 2.0),
            ViscosityKind::Table(t) => t.derivative(lambda),
        }
    }
}

/// `beta_eval`: β(λ), rejecting non-finite input.
pub fn beta_eval(model: &ViscosityModel, lambda: f64) -> Result<f64, ModelError> {
    Ok(model.beta(finite(lambda)?))
}

/// Kruzkov entropy pair η_k(u) = |u − k|, Q_k(u) = sgn(u − k)(f(u) − f(k)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPair {
    pub k: f64,
}

impl EntropyPair {
    pub fn new(k: f64) -> Self {
        Self { k }
    }

    #[inline]
    pub fn eval(&self, flux: &FluxModel, u: f64) -> (f64, f64) {
        let d = u - self.k;
        if d == 0.0 {
            return (0.0, 0.0);
        }
        (d.abs(), d.signum() * (flux.f(u) - flux.f(self.k)))
    }
}

pub fn kruzkov_pair_eval(pair: &EntropyPair, flux: &FluxModel, u: f64) -> (f64, f64) {
    pair.eval(flux, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assumption {
    /// |f'(u)| ≤ C1 (1 + |u|^{m-1}).
    A1,
    /// β non-decreasing with β(0) = 0.
    A2,
    /// C2 |λ|^{3r} ≤ β(λ)λ ≤ C3 |λ|^{3r} for |λ| ≥ N.
    B1,
    /// β(λ)λ ≥ C4 |λ|³ for |λ| ≥ N.
    B2,
    /// β(λ)λ ≥ C5 |λ|^{3r} for all λ.
    B3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub assumption: Assumption,
    pub passed: bool,
    /// First sample at which the check failed.
    pub witness: Option<f64>,
    pub note: String,
}

/// Smallest (or largest, for C3) constants compatible with the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub verdicts: Vec<Verdict>,
    pub fitted: FittedConstants,
    pub samples: usize,
}

impl AssumptionReport {
    pub fn verdict(&self, which: Assumption) -> &Verdict {
        self.verdicts.iter().find(|v| v.assumption == which).expect("every assumption has a verdict")
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

pub const DEFAULT_ASSUMPTION_SAMPLES: usize = 10_000;
const REL_TOL: f64 = 1e-12;

fn le_tol(a: f64, b: f64) -> bool {
    a <= b + REL_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Checks A1, A2, B1, B2, B3 on a sampled symmetric interval.
///
/// The verdicts are sampled, not proven: a pass means no sample violated the
/// inequality. The B conditions are only checked where they are stated
/// (|λ| ≥ N for B1/B2, everywhere for B3). With `jitter_seed`, a quarter as
/// many uniformly random points are added to the regular grid.
pub fn verify_assumptions(
    flux: &FluxModel,
    visc: &ViscosityModel,
    range: (f64, f64),
    samples: usize,
    jitter_seed: Option<u64>,
) -> Result<AssumptionReport, ModelError> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(ModelError::InvalidRange(format!("[{lo}, {hi}] is empty")));
    }
    if samples < 100 {
        return Err(ModelError::InvalidRange(format!("need at least 100 samples, got {samples}")));
    }
    if (lo + hi).abs() > 1e-12 * hi.abs() {
        return Err(ModelError::InvalidRange(format!("[{lo}, {hi}] is not symmetric about 0")));
    }
    let c = *visc.constants();
    if hi < c.threshold + 1.0 {
        return Err(ModelError::InvalidRange(format!(
            "[{lo}, {hi}] does not contain [-N-1, N+1] with N = {}",
            c.threshold
        )));
    }

    let mut points: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
    points.extend([0.0, c.threshold, -c.threshold, c.threshold + 1.0, -(c.threshold + 1.0)]);
    if let Some(seed) = jitter_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        points.extend((0..samples / 4).map(|_| rng.gen_range(lo..=hi)));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    let m = flux.growth_exponent();
    let c1 = flux.growth_constant();
    let mut a1 = Verdict { assumption: Assumption::A1, passed: true, witness: None, note: String::new() };
    let mut fitted_c1: f64 = 0.0;
    for &u in &points {
        let bound = 1.0 + u.abs().powf(m - 1.0);
        let slope = flux.df(u).abs();
        fitted_c1 = fitted_c1.max(slope / bound);
        if a1.passed && !le_tol(slope, c1 * bound) {
            a1.passed = false;
            a1.witness = Some(u);
            a1.note = format!("|f'({u})| = {slope} exceeds C1 (1 + |u|^(m-1)) = {}", c1 * bound);
        }
    }
    a1.note = if a1.passed {
        format!("holds with declared C1 = {c1}; minimal feasible C1 = {fitted_c1}")
    } else {
        format!("{}; minimal feasible C1 = {fitted_c1}", a1.note)
    };

    let mut a2 = Verdict { assumption: Assumption::A2, passed: true, witness: None, note: String::new() };
    let beta0 = visc.beta(0.0);
    if beta0.abs() > 1e-14 {
        a2.passed = false;
        a2.witness = Some(0.0);
        a2.note = format!("beta(0) = {beta0}");
    }
    let mut prev: Option<(f64, f64)> = None;
    for &lambda in &points {
        let b = visc.beta(lambda);
        if a2.passed && b * lambda < 0.0 {
            a2.passed = false;
            a2.witness = Some(lambda);
            a2.note = format!("beta({lambda}) * lambda = {} < 0", b * lambda);
        }
        if let Some((pl, pb)) = prev {
            if a2.passed && !le_tol(pb, b) {
                a2.passed = false;
                a2.witness = Some(lambda);
                a2.note = format!("beta decreases between {pl} and {lambda}");
            }
        }
        prev = Some((lambda, b));
    }
    if a2.passed {
        a2.note = "beta(0) = 0 and beta non-decreasing on samples".into();
    }

    let r = c.r;
    let mut b1 = Verdict { assumption: Assumption::B1, passed: true, witness: None, note: String::new() };
    let mut b2 = Verdict { assumption: Assumption::B2, passed: true, witness: None, note: String::new() };
    let mut b3 = Verdict { assumption: Assumption::B3, passed: true, witness: None, note: String::new() };
    let (mut fit_c2, mut fit_c3, mut fit_c4, mut fit_c5) = (f64::INFINITY, 0.0_f64, f64::INFINITY, f64::INFINITY);
    for &lambda in &points {
        let energy = visc.beta(lambda) * lambda;
        let a = lambda.abs();
        let p3r = a.powf(3.0 * r);
        if a > 0.0 {
            fit_c5 = fit_c5.min(energy / p3r);
            if b3.passed && !le_tol(c.c5 * p3r, energy) {
                b3.passed = false;
                b3.witness = Some(lambda);
                b3.note = format!("beta(l) l = {energy} < C5 |l|^(3r) = {} at l = {lambda}", c.c5 * p3r);
            }
        }
        if a >= c.threshold {
            fit_c2 = fit_c2.min(energy / p3r);
            fit_c3 = fit_c3.max(energy / p3r);
            fit_c4 = fit_c4.min(energy / (a * a * a));
            if b1.passed && !le_tol(c.c2 * p3r, energy) {
                b1.passed = false;
                b1.witness = Some(lambda);
                b1.note =
                    format!("lower bound fails: beta(l) l = {energy} < C2 |l|^(3r) = {} at l = {lambda}", c.c2 * p3r);
            }
            if b1.passed && !le_tol(energy, c.c3 * p3r) {
                b1.passed = false;
                b1.witness = Some(lambda);
                b1.note =
                    format!("upper bound fails: beta(l) l = {energy} > C3 |l|^(3r) = {} at l = {lambda}", c.c3 * p3r);
            }
            if b2.passed && !le_tol(c.c4 * a * a * a, energy) {
                b2.passed = false;
                b2.witness = Some(lambda);
                b2.note = format!("beta(l) l = {energy} < C4 |l|^3 = {} at l = {lambda}", c.c4 * a * a * a);
            }
        }
    }
    for v in [&mut b1, &mut b2, &mut b3] {
        if v.passed {
            v.note = "holds on samples".into();
        }
    }

    Ok(AssumptionReport {
        verdicts: vec![a1, a2, b1, b2, b3],
        fitted: FittedConstants { c1: fitted_c1, c2: fit_c2, c3: fit_c3, c4: fit_c4, c5: fit_c5 },
        samples: points.len(),
    })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn ulps_apart(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    proptest! {
        #[test]
        fn beta_lambda_is_nonnegative(lambda in -50.0f64..50.0, r in 1.0f64..3.0) {
            for v in [ViscosityModel::linear(), ViscosityModel::von_neumann(), ViscosityModel::power(r).unwrap()] {
                prop_assert!(v.beta(lambda) * lambda >= 0.0);
            }
        }

        #[test]
        fn power_viscosity_energy_is_exact(lambda in -50.0f64..50.0, r in 1.0f64..3.0) {
            prop_assume!(lambda.abs() > 1e-3);
            let v = ViscosityModel::power(r).unwrap();
            let lhs = v.beta(lambda) * lambda;
            let rhs = lambda.abs().powf(3.0 * r);
            prop_assert!(ulps_apart(lhs, rhs) <= 4, "{lhs} vs {rhs}");
        }

        #[test]
        fn kruzkov_pair_is_lipschitz(k in -2.0f64..2.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let f = FluxModel::burgers();
            let p = EntropyPair::new(k);
            let (ea, qa) = p.eval(&f, a);
            let (eb, qb) = p.eval(&f, b);
            // max |f'| on [-2, 2] is 2.
            let lip = 1.0 + 2.0;
            prop_assert!((ea - eb).abs() <= lip * (a - b).abs() + 1e-12);
            prop_assert!((qa - qb).abs() <= lip * (a - b).abs() + 1e-12);
        }
    }

    #[test]
    fn primitive_differentiates_back_to_flux() {
        // Central differences of F at 1000 points; error must fall like h².
        for flux in [FluxModel::burgers(), FluxModel::power(3.0).unwrap(), FluxModel::power(2.5).unwrap()] {
            let pts: Vec<f64> = (0..1000).map(|i| -3.0 + 6.0 * (i as f64 + 0.37) / 1000.0).collect();
            let err = |h: f64| {
                pts.iter()
                    .map(|&u| ((flux.primitive(u + h) - flux.primitive(u - h)) / (2.0 * h) - flux.f(u)).abs())
                    .fold(0.0, f64::max)
            };
            let (e1, e2, e3) = (err(1e-2), err(5e-3), err(2.5e-3));
            let order1 = (e1 / e2).log2();
            let order2 = (e2 / e3).log2();
            assert!(order1 >= 1.8 && order2 >= 1.8, "{flux:?}: orders {order1} {order2}");
        }
    }
}
