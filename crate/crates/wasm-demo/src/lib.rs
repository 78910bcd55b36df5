//! Browser bindings for the `ddlab` solver: a single regularized run, the
//! entropy-solution reference for a Riemann problem, and the coupling
//! rule `delta = C * epsilon^p`.

use ddlab::harness::config::{DiagnosticsSpec, DomainSpec, ExperimentConfig, FluxSpec, InitialSpec, ViscositySpec};
use ddlab::harness::{compute_reference, coupling_exponent, run_experiment, Coupling};
use wasm_bindgen::prelude::*;

/// Final state of one regularized run with its reference and summary.
#[wasm_bindgen]
pub struct Simulation {
    x: Vec<f64>,
    initial: Vec<f64>,
    u: Vec<f64>,
    reference_x: Vec<f64>,
    reference: Vec<f64>,
    l1_error: f64,
    tv_ratio: f64,
    max_entropy_production: f64,
    regime: String,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn initial(&self) -> Vec<f64> {
        self.initial.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn u(&self) -> Vec<f64> {
        self.u.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn reference_x(&self) -> Vec<f64> {
        self.reference_x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn reference(&self) -> Vec<f64> {
        self.reference.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn l1_error(&self) -> f64 {
        self.l1_error
    }
    #[wasm_bindgen(getter)]
    pub fn tv_ratio(&self) -> f64 {
        self.tv_ratio
    }
    #[wasm_bindgen(getter)]
    pub fn max_entropy_production(&self) -> f64 {
        self.max_entropy_production
    }
    #[wasm_bindgen(getter)]
    pub fn regime(&self) -> String {
        self.regime.clone()
    }
}

fn viscosity(kind: &str) -> Result<ViscositySpec, String> {
    match kind {
        "linear" => Ok(ViscositySpec::Linear { constants: None }),
        "von_neumann" => Ok(ViscositySpec::VonNeumann { constants: None }),
        other => Err(format!("unknown viscosity {other:?}")),
    }
}

fn config(flux: FluxSpec, visc: ViscositySpec, initial: InitialSpec, domain: DomainSpec) -> ExperimentConfig {
    ExperimentConfig {
        flux,
        viscosity: visc,
        initial,
        domain,
        final_time: 1.0,
        epsilon: 0.0,
        delta: 0.0,
        snapshot_times: Vec::new(),
        diagnostics: DiagnosticsSpec { histogram: false, stored_states: 24, ..Default::default() },
        assumptions: Default::default(),
        seed: 0,
        output_dir: None,
        override_resolution: true,
        godunov_fallback: true,
        workers: 1,
        safety: 0.5,
    }
}

/// Burgers flux on sin x over one period, run to `final_time`.
pub fn simulate_native(
    viscosity_kind: &str,
    epsilon: f64,
    delta: f64,
    cells: usize,
    final_time: f64,
) -> Result<Simulation, String> {
    let mut cfg = config(
        FluxSpec::Burgers,
        viscosity(viscosity_kind)?,
        InitialSpec::Sine { amplitude: 1.0, periods: 1 },
        DomainSpec { x_left: 0.0, x_right: std::f64::consts::TAU, cells, cells_per_epsilon: None },
    );
    cfg.epsilon = epsilon;
    cfg.delta = delta;
    cfg.final_time = final_time;
    let rep = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let last = rep.trajectory.final_state();
    let g = last.grid;
    let reference = rep.reference.as_state();
    let rg = reference.grid;
    Ok(Simulation {
        x: (0..g.cells()).map(|j| g.node(j)).collect(),
        initial: rep.trajectory.initial.u.clone(),
        u: last.u.clone(),
        reference_x: (0..rg.cells()).map(|j| rg.node(j)).collect(),
        reference: reference.u,
        l1_error: rep.row.l1_error,
        tv_ratio: rep.row.tv_ratio,
        max_entropy_production: rep.row.max_entropy_production,
        regime: rep.row.regime.to_string(),
    })
}

/// Burgers Riemann problem on [-1, 1]: exact where valid, Godunov otherwise.
/// Returns interleaved `[x0, u0, x1, u1, ...]`.
pub fn riemann_native(u_left: f64, u_right: f64, cells: usize, t: f64) -> Result<Vec<f64>, String> {
    let mut cfg = config(
        FluxSpec::Burgers,
        ViscositySpec::Linear { constants: None },
        InitialSpec::Riemann { u_l: u_left, u_r: u_right },
        DomainSpec { x_left: -1.0, x_right: 1.0, cells, cells_per_epsilon: None },
    );
    cfg.final_time = t;
    cfg.diagnostics.reference_refinement = 1;
    cfg.validate().map_err(|e| e.to_string())?;
    let reference = compute_reference(&cfg).map_err(|e| e.to_string())?.as_state();
    let g = reference.grid;
    Ok(reference.u.iter().enumerate().flat_map(|(j, u)| [g.node(j), *u]).collect())
}

/// `delta = C * epsilon^p` with `p` from the named coupling ("41", "42",
/// "43", or a numeric exponent).
pub fn coupled_delta_native(theorem: &str, m: f64, r: f64, constant: f64, epsilon: f64) -> Result<f64, String> {
    let coupling = match theorem {
        "41" => Coupling::Thm41,
        "42" => Coupling::Thm42,
        "43" => Coupling::Thm43,
        p => Coupling::Free(p.parse().map_err(|_| format!("unknown coupling {p:?}"))?),
    };
    let p = coupling_exponent(coupling, m, r).map_err(|e| e.to_string())?;
    Ok(constant * epsilon.powf(p))
}

#[wasm_bindgen]
pub fn simulate(
    viscosity_kind: &str,
    epsilon: f64,
    delta: f64,
    cells: usize,
    final_time: f64,
) -> Result<Simulation, JsError> {
    simulate_native(viscosity_kind, epsilon, delta, cells, final_time).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn riemann(u_left: f64, u_right: f64, cells: usize, t: f64) -> Result<Vec<f64>, JsError> {
    riemann_native(u_left, u_right, cells, t).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coupled_delta(theorem: &str, m: f64, r: f64, constant: f64, epsilon: f64) -> Result<f64, JsError> {
    coupled_delta_native(theorem, m, r, constant, epsilon).map_err(|e| JsError::new(&e))
}
