use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_entropy::Velocity;
use crate::grid::{Extension, Grid, GridFunction};
use crate::kernels::{Kernel, DEFAULT_TAIL_TOL};
use crate::local_solver::RiemannDatum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    Riemann {
        u_left: f64,
        u_right: f64,
        #[serde(default)]
        x_jump: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<[f64; 2]>,
    },
    /// `height · 𝟙_[a, b)`
    Box { height: f64, a: f64, b: f64 },
    /// `base + amplitude · cos²(π(x − center)/(2 width))` on `|x − center| < width`
    SmoothBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `base + amplitude · sin(2π k (x − x_min)/L)`, periodic on the domain
    Sine {
        base: f64,
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: u32,
    },
    /// Piecewise-linear through `(x, u)` points, constant beyond the ends.
    Table { points: Vec<[f64; 2]> },
}

fn one() -> u32 {
    1
}

impl InitialDatum {
    pub fn riemann(&self) -> Option<RiemannDatum> {
        match *self {
            InitialDatum::Riemann {
                u_left,
                u_right,
                x_jump,
                support,
            } => Some(RiemannDatum {
                u_left,
                u_right,
                x_jump,
                support,
            }),
            _ => None,
        }
    }

    /// Smallest and largest value the datum takes.
    fn range(&self) -> (f64, f64) {
        let span = |vals: &[f64]| {
            vals.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
        };
        match self {
            InitialDatum::Riemann { u_left, u_right, support, .. } => {
                let mut v = vec![*u_left, *u_right];
                if support.is_some() {
                    v.push(0.0);
                }
                span(&v)
            }
            InitialDatum::Box { height, .. } => span(&[0.0, *height]),
            InitialDatum::SmoothBump { base, amplitude, .. } => span(&[*base, base + amplitude]),
            InitialDatum::Sine { base, amplitude, .. } => span(&[base - amplitude, base + amplitude]),
            InitialDatum::Table { points } => span(&points.iter().map(|p| p[1]).collect::<Vec<_>>()),
        }
    }

    fn problems(&self, out: &mut Vec<String>) {
        let (lo, hi) = self.range();
        if !(lo >= 0.0 && hi <= 1.0) {
            out.push(format!(
                "initial datum takes values in [{lo}, {hi}]; densities must satisfy 0 ≤ u₀ ≤ 1"
            ));
        }
        match self {
            InitialDatum::Riemann { .. } => {
                if let Err(e) = self.riemann().unwrap().validate() {
                    if !matches!(e, Error::StateOutOfRange(_)) {
                        out.push(format!("riemann datum: {e}"));
                    }
                }
            }
            InitialDatum::Box { a, b, .. } if !(a < b) => out.push(format!("box needs a < b, got [{a}, {b}]")),
            InitialDatum::SmoothBump { width, .. } if !(*width > 0.0) => {
                out.push(format!("smooth_bump width must be > 0, got {width}"))
            }
            InitialDatum::Sine { wavenumber: 0, .. } => out.push("sine wavenumber must be ≥ 1".into()),
            InitialDatum::Table { points } => {
                if points.len() < 2 {
                    out.push("table needs at least two points".into());
                } else if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    out.push("table x values must be strictly increasing".into());
                }
            }
            _ => {}
        }
    }

    /// Exact cell averages on `grid`.
    pub fn cell_averages(&self, grid: Grid, extension: Extension) -> Result<GridFunction> {
        let u = match self {
            InitialDatum::Riemann { .. } => self.riemann().unwrap().cell_averages(grid, extension)?,
            &InitialDatum::Box { height, a, b } => {
                GridFunction::from_antiderivative(grid, extension, |x| height * (x.clamp(a, b) - a))?
            }
            &InitialDatum::SmoothBump {
                base,
                amplitude,
                center,
                width,
            } => GridFunction::from_antiderivative(grid, extension, |x| {
                let y = (x - center).clamp(-width, width);
                base * x + amplitude * (0.5 * y + width / (2.0 * PI) * (PI * y / width).sin())
            })?,
            &InitialDatum::Sine {
                base,
                amplitude,
                wavenumber,
            } => {
                let k = 2.0 * PI * wavenumber as f64 / grid.length();
                let x0 = grid.x_min();
                GridFunction::from_antiderivative(grid, extension, |x| base * x - amplitude * (k * (x - x0)).cos() / k)?
            }
            InitialDatum::Table { points } => {
                GridFunction::from_cell_integrals(grid, extension, |a, b| table_integral(points, a, b))?
            }
        };
        Ok(u.map(|v| v.clamp(0.0, 1.0)))
    }
}

fn table_value(points: &[[f64; 2]], x: f64) -> f64 {
    let n = points.len();
    if x <= points[0][0] {
        return points[0][1];
    }
    if x >= points[n - 1][0] {
        return points[n - 1][1];
    }
    let i = points.partition_point(|p| p[0] <= x) - 1;
    let [x0, y0] = points[i];
    let [x1, y1] = points[i + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn table_integral(points: &[[f64; 2]], a: f64, b: f64) -> f64 {
    let mut pts = vec![a];
    pts.extend(points.iter().map(|p| p[0]).filter(|&x| x > a && x < b));
    pts.push(b);
    pts.windows(2)
        .map(|w| 0.5 * (table_value(points, w[0]) + table_value(points, w[1])) * (w[1] - w[0]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

/// `None` computes a diagnostic when it applies; `Some(true)` requires it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsToggles {
    pub energy_identity: Option<bool>,
    pub dissipation: Option<bool>,
    pub grad_w: Option<bool>,
    pub exp_identity: Option<bool>,
    pub tv_transfer: Option<bool>,
    pub entropy_production: bool,
    pub entropy_production_stride: usize,
}

impl Default for DiagnosticsToggles {
    fn default() -> Self {
        Self {
            energy_identity: None,
            dissipation: None,
            grad_w: None,
            exp_identity: None,
            tv_transfer: None,
            entropy_production: false,
            entropy_production_stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub initial_datum: InitialDatum,
    #[serde(default = "default_velocity")]
    pub velocity: Velocity,
    pub kernel: Kernel,
    pub epsilons: Vec<f64>,
    pub grid: GridSpec,
    pub t_end: f64,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub extension: Extension,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub diagnostics: DiagnosticsToggles,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_refinement")]
    pub reference_refinement: usize,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default)]
    pub space_time_error: bool,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_velocity() -> Velocity {
    Velocity::Greenshields
}
fn default_cfl() -> f64 {
    0.5
}
fn one_usize() -> usize {
    1
}
fn default_refinement() -> usize {
    4
}
fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n_cells)
    }

    /// Error window, the whole domain unless configured.
    pub fn window(&self) -> [f64; 2] {
        self.window.unwrap_or([self.grid.x_min, self.grid.x_max])
    }

    pub fn initial(&self) -> Result<GridFunction> {
        self.initial_datum.cell_averages(self.grid()?, self.extension)
    }

    fn is_constant_kernel(&self) -> bool {
        matches!(self.kernel, Kernel::PiecewiseConstant)
    }

    fn is_exponential(&self) -> bool {
        matches!(self.kernel, Kernel::Exponential)
    }

    /// Resolves `None` toggles to whether the diagnostic applies.
    pub fn resolved_toggles(&self) -> DiagnosticsToggles {
        let gs = self.velocity == Velocity::Greenshields;
        let t = &self.diagnostics;
        let pick = |v: Option<bool>, applies: bool| Some(v.unwrap_or(applies) && applies);
        DiagnosticsToggles {
            energy_identity: pick(t.energy_identity, self.is_constant_kernel() && gs),
            dissipation: pick(t.dissipation, self.is_constant_kernel() || self.is_exponential()),
            grad_w: pick(t.grad_w, self.is_constant_kernel()),
            exp_identity: pick(t.exp_identity, self.is_exponential()),
            tv_transfer: pick(t.tv_transfer, self.is_exponential()),
            entropy_production: t.entropy_production,
            entropy_production_stride: t.entropy_production_stride,
        }
    }

    /// Every violated constraint, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.trim().is_empty() {
            out.push("name must not be empty".into());
        }
        let g = &self.grid;
        let grid_ok = g.x_min.is_finite() && g.x_max.is_finite() && g.x_min < g.x_max && g.n_cells >= 2;
        if !grid_ok {
            out.push(format!(
                "grid must have finite x_min < x_max and n_cells ≥ 2, got ({}, {}, {})",
                g.x_min, g.x_max, g.n_cells
            ));
        }
        let dx = (g.x_max - g.x_min) / g.n_cells.max(1) as f64;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            out.push(format!("t_end must be finite and ≥ 0, got {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            out.push(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if self.record_every == 0 {
            out.push("record_every must be ≥ 1".into());
        }
        if self.reference_refinement == 0 {
            out.push("reference_refinement must be ≥ 1".into());
        }
        if !(self.tail_tol > 0.0 && self.tail_tol <= 1e-8) {
            out.push(format!("tail_tol must lie in (0, 1e-8], got {}", self.tail_tol));
        }
        if self.epsilons.is_empty() {
            out.push("epsilons must not be empty".into());
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e.is_finite()) {
                out.push(format!("epsilon {e} must be positive"));
            } else if grid_ok && e < 4.0 * dx * (1.0 - 1e-12) {
                out.push(format!("epsilon {e} is below the resolution guard 4·dx = {}", 4.0 * dx));
            }
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            out.push("epsilons must be strictly decreasing".into());
        }
        if let Some([a, b]) = self.window {
            if !(a < b && a >= g.x_min && b <= g.x_max) {
                out.push(format!("window [{a}, {b}] must be a non-empty subset of [{}, {}]", g.x_min, g.x_max));
            }
        }
        self.initial_datum.problems(&mut out);
        if let Err(e) = self.velocity.check() {
            out.push(e.to_string());
        }
        let gs = self.velocity == Velocity::Greenshields;
        let t = &self.diagnostics;
        if t.energy_identity == Some(true) && !(self.is_constant_kernel() && gs) {
            out.push("energy_identity needs the greenshields velocity with the piecewise_constant kernel".into());
        }
        if t.grad_w == Some(true) && !self.is_constant_kernel() {
            out.push("grad_w needs the piecewise_constant kernel".into());
        }
        if t.dissipation == Some(true) && !(self.is_constant_kernel() || self.is_exponential()) {
            out.push("dissipation needs the piecewise_constant or exponential kernel".into());
        }
        if t.exp_identity == Some(true) && !self.is_exponential() {
            out.push("exp_identity needs the exponential kernel".into());
        }
        if t.tv_transfer == Some(true) && !self.is_exponential() {
            out.push("tv_transfer needs the exponential kernel".into());
        }
        if t.entropy_production_stride == 0 {
            out.push("entropy_production_stride must be ≥ 1".into());
        }
        out
    }

    /// Canonical JSON with every default filled in.
    pub fn canonical_json(&self) -> String {
        let mut echo = self.clone();
        echo.diagnostics = self.resolved_toggles();
        serde_json::to_string_pretty(&echo).expect("scenario serializes")
    }
}

/// Parses and fully validates a JSON scenario.
pub fn validate_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Validation(vec![format!("malformed scenario: {e}")]))?;
    let problems = scenario.problems();
    if problems.is_empty() {
        Ok(scenario)
    } else {
        Err(Error::Validation(problems))
    }
}
