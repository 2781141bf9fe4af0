use rayon::prelude::*;
use serde::Serialize;

use super::scenario::Scenario;
use crate::diagnostics::{
    entropy_production_terms, fit_scaling, DiagnosticsReport, EntropyProduction, Functional, ScalingFit,
};
use crate::error::Result;
use crate::flux_entropy::{Entropy, EntropyPair, Flux, Velocity};
use crate::grid::{l1_distance_on_window, total_variation, Extension, GridFunction};
use crate::kernels::Kernel;
use crate::local_solver::{godunov_step, solve_local};
use crate::nonlocal_solver::{solve, Snapshot, SolverConfig, StepRecord};

/// Tolerance for `TV(w)` growth per step.
pub const TV_INCREASE_TOL: f64 = 1e-6;
/// Largest admissible relative gap in the TV transfer identity.
pub const TV_TRANSFER_GAP_TOL: f64 = 0.05;
/// Edge-layer share above which a functional is flagged in the manifest.
pub const BOUNDARY_SHARE_TOL: f64 = 0.01;
const MAX_PRINCIPLE_TOL: f64 = 1e-12;
const FUNCTIONAL_FLOOR: f64 = -1e-10;
/// `C` in the `‖u − w‖ ≤ ε·TV(w) + C·dx` bound on the error gap.
const GAP_DX_CONSTANT: f64 = 4.0;

/// Which convergence result covers a kernel and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// `γ = 𝟙_[-1,0]` with `V(ξ) = 1 − ξ`: `w_ε` converges.
    ConstantGreenshields,
    /// `γ' > 0` on the support: `w_ε` converges.
    StrictlyIncreasingKernel,
    /// Exponential kernel: both `w_ε` and `u_ε` converge.
    ExponentialKernel,
    /// Simulated anyway; no convergence theorem applies.
    None,
}

impl Coverage {
    pub fn of(kernel: &Kernel, velocity: &Velocity, genuinely_nonlinear: bool) -> Self {
        if !genuinely_nonlinear {
            return Coverage::None;
        }
        match kernel {
            Kernel::PiecewiseConstant if *velocity == Velocity::Greenshields => Coverage::ConstantGreenshields,
            Kernel::Exponential => Coverage::ExponentialKernel,
            k if k.strictly_increasing_on_support() => Coverage::StrictlyIncreasingKernel,
            _ => Coverage::None,
        }
    }

    pub fn note(&self) -> &'static str {
        match self {
            Coverage::ConstantGreenshields | Coverage::StrictlyIncreasingKernel => "w converges",
            Coverage::ExponentialKernel => "u and w converge",
            Coverage::None => "no convergence theorem applies",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonResult {
    pub epsilon: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub err_w: f64,
    pub err_u: f64,
    /// `∫₀ᵀ ‖w − u_ref‖_{L¹(window)} dt`, when enabled.
    pub err_w_space_time: Option<f64>,
    pub err_u_space_time: Option<f64>,
    /// `TV(w)` at `t_end`
    pub tv_w_end: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub truncation_tail: f64,
    pub report: DiagnosticsReport,
    pub tv_transfer_max_gap: Option<f64>,
    pub entropy_production: Option<EntropyProduction>,
    #[serde(skip)]
    pub history: Vec<StepRecord>,
    #[serde(skip)]
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EpsilonOutcome {
    Ok(Box<EpsilonResult>),
    Failed { epsilon: f64, error: String },
}

impl EpsilonOutcome {
    pub fn epsilon(&self) -> f64 {
        match self {
            EpsilonOutcome::Ok(r) => r.epsilon,
            EpsilonOutcome::Failed { epsilon, .. } => *epsilon,
        }
    }

    pub fn ok(&self) -> Option<&EpsilonResult> {
        match self {
            EpsilonOutcome::Ok(r) => Some(r),
            EpsilonOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub n_cells: usize,
    pub refinement: usize,
    pub dt: f64,
    pub n_steps: usize,
}

/// One inequality instance: `satisfied` when `lower ≤ value ≤ bound`.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub epsilon: f64,
    pub quantity: String,
    pub value: f64,
    pub bound: Option<f64>,
    pub satisfied: bool,
}

impl InequalityCheck {
    /// `bound − value`, positive when the bound holds.
    pub fn slack(&self) -> Option<f64> {
        self.bound.map(|b| b - self.value)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedFit {
    pub quantity: String,
    pub fit: Option<ScalingFit>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryNote {
    pub epsilon: f64,
    pub quantity: String,
    pub boundary_share: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub dx: f64,
    pub coverage: Coverage,
    pub reference: ReferenceInfo,
    pub runs: Vec<EpsilonOutcome>,
    pub checks: Vec<InequalityCheck>,
    pub fits: Vec<NamedFit>,
    pub boundary: Vec<BoundaryNote>,
}

impl SweepResult {
    pub fn violations(&self) -> impl Iterator<Item = &InequalityCheck> {
        self.checks.iter().filter(|c| !c.satisfied)
    }

    pub fn all_failed(&self) -> bool {
        self.runs.iter().all(|r| r.ok().is_none())
    }

    pub fn fit(&self, quantity: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.quantity == quantity)?.fit.as_ref()
    }
}

fn fine_initial(scenario: &Scenario) -> Result<GridFunction> {
    let fine = scenario.grid()?.refined(scenario.reference_refinement)?;
    scenario.initial_datum.cell_averages(fine, scenario.extension)
}

/// Local Godunov on a refined grid, averaged back to the scenario grid.
fn reference_solution(scenario: &Scenario) -> Result<(GridFunction, ReferenceInfo)> {
    let r = scenario.reference_refinement;
    let u0 = fine_initial(scenario)?;
    let fine = *u0.grid();
    let config = SolverConfig {
        cfl: scenario.cfl,
        t_end: scenario.t_end,
        record_every: usize::MAX,
        ..Default::default()
    };
    let tr = solve_local(&u0, &scenario.velocity, &config)?;
    let info = ReferenceInfo {
        n_cells: fine.n_cells(),
        refinement: r,
        dt: tr.meta.dt,
        n_steps: tr.meta.n_steps,
    };
    Ok((tr.last().u.coarsen(r)?, info))
}

/// Left-endpoint time sums of the windowed `L¹` distance of `u` and `w` to
/// the refined local reference, which is advanced to each snapshot time.
fn space_time_errors(scenario: &Scenario, snapshots: &[Snapshot]) -> Result<(f64, f64)> {
    let r = scenario.reference_refinement;
    let mut fine = fine_initial(scenario)?;
    let flux = Flux::new(scenario.velocity.clone());
    let dx = fine.dx();
    let dt_max = scenario.cfl * dx / flux.max_speed().max(f64::MIN_POSITIVE);
    let window = scenario.window();
    let (mut t, mut ew, mut eu) = (0.0, 0.0, 0.0);
    for pair in snapshots.windows(2) {
        let reference = fine.coarsen(r)?;
        let h = pair[1].t - pair[0].t;
        ew += h * l1_distance_on_window(&pair[0].w, &reference, window)?;
        eu += h * l1_distance_on_window(&pair[0].u, &reference, window)?;
        let target = pair[1].t;
        while t < target {
            let dt = dt_max.min(target - t);
            fine = godunov_step(&flux, &fine, dt / dx)?.0;
            t = if dt == target - t { target } else { t + dt };
        }
    }
    Ok((ew, eu))
}

fn run_epsilon(scenario: &Scenario, u0: &GridFunction, reference: &GridFunction, epsilon: f64) -> Result<EpsilonResult> {
    let toggles = scenario.resolved_toggles();
    let config = SolverConfig {
        cfl: scenario.cfl,
        t_end: scenario.t_end,
        record_every: scenario.record_every,
        tail_tol: scenario.tail_tol,
        ..Default::default()
    };
    let tr = solve(u0, &scenario.kernel, epsilon, &scenario.velocity, &config)?;
    let mut report = DiagnosticsReport::compute(&tr)?;
    let on = |t: Option<bool>| t.unwrap_or(false);
    if !on(toggles.energy_identity) {
        report.energy_ueps = None;
    }
    if !on(toggles.dissipation) {
        report.diss_quadratic = None;
        report.diss_exp = None;
    }
    if !on(toggles.grad_w) {
        report.grad_w_l2 = None;
    }
    if !on(toggles.exp_identity) {
        report.exp_identity_residual = None;
    }
    if !on(toggles.tv_transfer) {
        report.dist_uw_l1.clear();
    }
    let tv_transfer_max_gap = (!report.dist_uw_l1.is_empty()).then(|| {
        report
            .dist_uw_l1
            .iter()
            .skip(1)
            .map(|p| p.relative_gap())
            .fold(0.0, f64::max)
    });
    let entropy_production = if toggles.entropy_production {
        let pair = EntropyPair::new(Entropy::Quadratic, scenario.velocity.clone())?;
        Some(entropy_production_terms(&tr, &pair, toggles.entropy_production_stride)?)
    } else {
        None
    };
    let window = scenario.window();
    let last = tr.last();
    let space_time = scenario
        .space_time_error
        .then(|| space_time_errors(scenario, &tr.snapshots))
        .transpose()?;
    Ok(EpsilonResult {
        epsilon,
        dt: tr.meta.dt,
        n_steps: tr.meta.n_steps,
        err_w: l1_distance_on_window(&last.w, reference, window)?,
        err_u: l1_distance_on_window(&last.u, reference, window)?,
        err_w_space_time: space_time.map(|p| p.0),
        err_u_space_time: space_time.map(|p| p.1),
        tv_w_end: total_variation(&last.w),
        inflow: tr.meta.inflow,
        outflow: tr.meta.outflow,
        truncation_tail: tr.meta.truncation_tail,
        report,
        tv_transfer_max_gap,
        entropy_production,
        history: tr.history,
        snapshots: if scenario.snapshots { tr.snapshots } else { Vec::new() },
    })
}

fn checks_for(r: &EpsilonResult, dx: f64, periodic: bool) -> Vec<InequalityCheck> {
    let d = &r.report;
    let eps = r.epsilon;
    let mut out = Vec::new();
    let mut push = |quantity: &str, value: f64, lower: f64, bound: Option<f64>| {
        out.push(InequalityCheck {
            epsilon: eps,
            quantity: quantity.into(),
            value,
            bound,
            satisfied: value >= lower && bound.iter().all(|&b| value <= b),
        });
    };
    let overshoot = (-d.min_value).max(d.max_value - 1.0).max(0.0);
    push("max_principle_overshoot", overshoot, 0.0, Some(MAX_PRINCIPLE_TOL));
    let c0 = d.c0 * d.slack;
    if let Some(f) = d.energy_ueps {
        push("energy_ueps", f.value, FUNCTIONAL_FLOOR, Some(eps * c0));
    }
    if let Some(f) = d.diss_quadratic {
        push("diss_quadratic", f.value, FUNCTIONAL_FLOOR, Some(c0));
    }
    if let Some(f) = d.diss_exp {
        push("diss_exp", f.value, FUNCTIONAL_FLOOR, Some(c0));
    }
    push("tv_w_increase", d.max_tv_w_increase, f64::NEG_INFINITY, Some(TV_INCREASE_TOL));
    if d.kernel == "exponential" {
        let bound = eps * r.tv_w_end + GAP_DX_CONSTANT * dx;
        push("err_uw_gap", (r.err_u - r.err_w).abs(), 0.0, Some(bound));
    }
    if let Some(gap) = r.tv_transfer_max_gap {
        push("tv_transfer_gap", gap, 0.0, periodic.then_some(TV_TRANSFER_GAP_TOL));
    }
    out
}

fn boundary_notes(r: &EpsilonResult) -> Vec<BoundaryNote> {
    let d = &r.report;
    let named: [(&str, Option<Functional>); 4] = [
        ("energy_ueps", d.energy_ueps),
        ("diss_quadratic", d.diss_quadratic),
        ("diss_exp", d.diss_exp),
        ("grad_w_l2", d.grad_w_l2),
    ];
    named
        .into_iter()
        .filter_map(|(q, f)| {
            f.map(|f| BoundaryNote {
                epsilon: r.epsilon,
                quantity: q.into(),
                boundary_share: f.boundary_share(),
                within_tolerance: f.boundary_share() <= BOUNDARY_SHARE_TOL,
            })
        })
        .collect()
}

/// Quantities fitted against `ε` when present in every successful run.
pub const FITTED_QUANTITIES: [&str; 9] = [
    "err_w",
    "err_u",
    "err_w_space_time",
    "err_u_space_time",
    "grad_w_l2",
    "energy_ueps",
    "diss_quadratic",
    "diss_exp",
    "exp_identity_residual",
];

pub fn quantity(r: &EpsilonResult, name: &str) -> Option<f64> {
    let d = &r.report;
    match name {
        "err_w" => Some(r.err_w),
        "err_u" => Some(r.err_u),
        "err_w_space_time" => r.err_w_space_time,
        "err_u_space_time" => r.err_u_space_time,
        "grad_w_l2" => d.grad_w_l2.map(|f| f.value),
        "energy_ueps" => d.energy_ueps.map(|f| f.value),
        "diss_quadratic" => d.diss_quadratic.map(|f| f.value),
        "diss_exp" => d.diss_exp.map(|f| f.value),
        "exp_identity_residual" => d.exp_identity_residual,
        _ => None,
    }
}

fn fits_for(ok: &[&EpsilonResult]) -> Vec<NamedFit> {
    FITTED_QUANTITIES
        .iter()
        .filter_map(|&q| {
            let vals: Option<Vec<f64>> = ok.iter().map(|r| quantity(r, q)).collect();
            let vals = vals.filter(|v| !v.is_empty())?;
            let eps: Vec<f64> = ok.iter().map(|r| r.epsilon).collect();
            Some(match fit_scaling(&eps, &vals) {
                Ok(fit) => NamedFit { quantity: q.into(), fit: Some(fit), note: None },
                Err(e) => NamedFit { quantity: q.into(), fit: None, note: Some(e.to_string()) },
            })
        })
        .collect()
}

/// Runs every `ε` of an already validated scenario. A failing `ε` is recorded
/// and the remaining runs continue.
pub fn run_sweep(scenario: &Scenario) -> Result<SweepResult> {
    let grid = scenario.grid()?;
    let u0 = scenario.initial()?;
    let (reference, info) = reference_solution(scenario)?;
    let runs: Vec<EpsilonOutcome> = scenario
        .epsilons
        .par_iter()
        .map(|&eps| match run_epsilon(scenario, &u0, &reference, eps) {
            Ok(r) => EpsilonOutcome::Ok(Box::new(r)),
            Err(e) => EpsilonOutcome::Failed { epsilon: eps, error: e.to_string() },
        })
        .collect();
    let ok: Vec<&EpsilonResult> = runs.iter().filter_map(EpsilonOutcome::ok).collect();
    let periodic = scenario.extension == Extension::Periodic;
    let checks = ok.iter().flat_map(|r| checks_for(r, grid.dx(), periodic)).collect();
    let boundary = ok.iter().flat_map(|r| boundary_notes(r)).collect();
    let fits = fits_for(&ok);
    let coverage = Coverage::of(
        &scenario.kernel,
        &scenario.velocity,
        Flux::new(scenario.velocity.clone()).genuinely_nonlinear,
    );
    Ok(SweepResult {
        dx: grid.dx(),
        coverage,
        reference: info,
        runs,
        checks,
        fits,
        boundary,
    })
}
