//! Upwind finite-volume evolution of `∂t u + ∂x(V(w) u) = 0`, `w = γ_ε ∗ u`.
//!
//! The numerical flux at face `j+1/2` is `u_j · V(w_{j+1/2})`, where the
//! face impact uses weights anchored at that face. `V ≥ 0` makes the upwind
//! cell always the left one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_entropy::{Velocity, STATE_TOL};
use crate::grid::{l2_norm_sq, total_variation, GridFunction};
use crate::kernels::{
    build_weights_shifted, convolve, convolve_extended, Kernel, ScaledKernelWeights,
    DEFAULT_TAIL_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    UpwindNonlocal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub scheme: Scheme,
    pub tail_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_end: 0.5,
            record_every: 1,
            scheme: Scheme::UpwindNonlocal,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be ≥ 0, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be positive".into()));
        }
        Ok(())
    }

    /// Uniform step `dt ≤ dt_max` that lands exactly on `t_end`.
    pub fn uniform_dt(&self, dt_max: f64) -> (f64, usize) {
        if self.t_end == 0.0 {
            return (0.0, 0);
        }
        let steps = (self.t_end / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (self.t_end / steps as f64, steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: GridFunction,
    pub w: GridFunction,
}

/// Scalars recorded after every step (and at `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub tv_w: f64,
    pub tv_u: f64,
    pub mass: f64,
    pub l2_u: f64,
}

impl StepRecord {
    fn of(t: f64, u: &GridFunction, w: &GridFunction) -> Self {
        Self {
            t,
            tv_w: total_variation(w),
            tv_u: total_variation(u),
            mass: u.mass(),
            l2_u: l2_norm_sq(u).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    /// `nonlocal` or `local`
    pub model: String,
    pub kernel: Option<Kernel>,
    pub epsilon: Option<f64>,
    pub velocity: Velocity,
    pub dt: f64,
    pub dx: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub cfl: f64,
    /// Time-integrated flux through the left and right domain faces.
    pub inflow: f64,
    pub outflow: f64,
    pub truncation_tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub snapshots: Vec<Snapshot>,
    pub history: Vec<StepRecord>,
}

impl Trajectory {
    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    /// Left-endpoint time weights `t_{i+1} − t_i` paired with snapshot `i`.
    pub fn time_weights(&self) -> impl Iterator<Item = (f64, &Snapshot)> {
        self.snapshots
            .windows(2)
            .map(|p| (p[1].t - p[0].t, &p[0]))
    }

    /// Largest single-step increase of `TV(w)`.
    pub fn max_tv_w_increase(&self) -> f64 {
        self.history
            .windows(2)
            .map(|p| p[1].tv_w - p[0].tv_w)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalState {
    pub t: f64,
    pub u: GridFunction,
    pub w: GridFunction,
    pub epsilon: f64,
}

/// Kernel, horizon and velocity, with weights prepared for one grid spacing.
#[derive(Debug, Clone)]
pub struct NonlocalModel {
    kernel: Kernel,
    epsilon: f64,
    velocity: Velocity,
    cfl: f64,
    face_weights: ScaledKernelWeights,
    center_weights: ScaledKernelWeights,
}

impl NonlocalModel {
    pub fn new(
        kernel: Kernel,
        epsilon: f64,
        velocity: Velocity,
        dx: f64,
        cfl: f64,
        tail_tol: f64,
    ) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        let face_weights = build_weights_shifted(&kernel, epsilon, dx, tail_tol, 0.0)?;
        let center_weights = build_weights_shifted(&kernel, epsilon, dx, tail_tol, 0.5)?;
        Ok(Self {
            kernel,
            epsilon,
            velocity,
            cfl,
            face_weights,
            center_weights,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn velocity(&self) -> &Velocity {
        &self.velocity
    }

    pub fn face_weights(&self) -> &ScaledKernelWeights {
        &self.face_weights
    }

    pub fn center_weights(&self) -> &ScaledKernelWeights {
        &self.center_weights
    }

    /// `cfl · dx / max V`.
    pub fn max_dt(&self) -> f64 {
        self.cfl * self.face_weights.dx() / self.velocity.max_value().max(f64::MIN_POSITIVE)
    }

    pub fn impact(&self, u: &GridFunction) -> Result<GridFunction> {
        let w = convolve(u, &self.center_weights)?;
        Ok(w.map(|v| v.clamp(0.0, 1.0)))
    }

    /// Impact at faces `j − 1/2`, `j = 0..=N`.
    pub fn face_impact(&self, u: &GridFunction) -> Vec<f64> {
        let n = u.len();
        let ext = u.extended(0, n + self.face_weights.len());
        convolve_extended(&ext, &self.face_weights, n + 1)
    }

    pub fn initial_state(&self, u: GridFunction) -> Result<NonlocalState> {
        check_range(u.values())?;
        let u = u.map(|v| v.clamp(0.0, 1.0));
        let w = self.impact(&u)?;
        Ok(NonlocalState {
            t: 0.0,
            u,
            w,
            epsilon: self.epsilon,
        })
    }

    pub fn step(&self, state: &NonlocalState, dt: f64) -> Result<NonlocalState> {
        Ok(self.step_with_fluxes(state, dt)?.0)
    }

    /// One step; also returns the boundary fluxes `(F_{-1/2}, F_{N-1/2})`.
    pub fn step_with_fluxes(&self, state: &NonlocalState, dt: f64) -> Result<(NonlocalState, (f64, f64))> {
        let w_face = self.face_impact(&state.u);
        let (u, bflux) = self.advance(&state.u, &w_face, dt, true)?;
        let w = self.impact(&u)?;
        Ok((
            NonlocalState {
                t: state.t + dt,
                u,
                w,
                epsilon: self.epsilon,
            },
            bflux,
        ))
    }

    /// Step with a prescribed face impact; this map is order preserving in `u`.
    /// Values are not clamped, since a foreign impact need not keep them in `[0, 1]`.
    pub fn step_with_frozen_impact(&self, u: &GridFunction, w_face: &[f64], dt: f64) -> Result<GridFunction> {
        if w_face.len() != u.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "need {} face values, got {}",
                u.len() + 1,
                w_face.len()
            )));
        }
        Ok(self.advance(u, w_face, dt, false)?.0)
    }

    fn advance(&self, u: &GridFunction, w_face: &[f64], dt: f64, trap: bool) -> Result<(GridFunction, (f64, f64))> {
        let limit = self.max_dt();
        if !(dt >= 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::TimeStepTooLarge { dt, limit });
        }
        let n = u.len();
        let lambda = dt / u.dx();
        let v = u.values();
        let flux: Vec<f64> = (0..=n)
            .map(|f| {
                let upwind = if f == 0 { u.at(-1) } else { v[f - 1] };
                upwind * self.velocity.eval(w_face[f].clamp(0.0, 1.0))
            })
            .collect();
        let mut next = Vec::with_capacity(n);
        for j in 0..n {
            let value = v[j] - lambda * (flux[j + 1] - flux[j]);
            if !trap {
                next.push(value);
                continue;
            }
            if !value.is_finite() || !(-STATE_TOL..=1.0 + STATE_TOL).contains(&value) {
                return Err(Error::MaximumPrincipleViolated { index: j, value });
            }
            next.push(value.clamp(0.0, 1.0));
        }
        Ok((u.with_values(next)?, (flux[0], flux[n])))
    }
}

fn check_range(values: &[f64]) -> Result<()> {
    if let Some((index, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, &v)| !(-STATE_TOL..=1.0 + STATE_TOL).contains(&v))
    {
        return Err(Error::MaximumPrincipleViolated { index, value });
    }
    Ok(())
}

/// Evolves `initial` to `config.t_end` with a uniform CFL-limited step.
pub fn solve(
    initial: &GridFunction,
    kernel: &Kernel,
    epsilon: f64,
    velocity: &Velocity,
    config: &SolverConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let model = NonlocalModel::new(
        kernel.clone(),
        epsilon,
        velocity.clone(),
        initial.dx(),
        config.cfl,
        config.tail_tol,
    )?;
    solve_model(&model, initial, config)
}

pub fn solve_model(model: &NonlocalModel, initial: &GridFunction, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    let (dt, n_steps) = config.uniform_dt(model.max_dt());
    let mut state = model.initial_state(initial.clone())?;
    let mut snapshots = vec![Snapshot {
        t: 0.0,
        u: state.u.clone(),
        w: state.w.clone(),
    }];
    let mut history = vec![StepRecord::of(0.0, &state.u, &state.w)];
    let (mut inflow, mut outflow) = (0.0, 0.0);
    for k in 1..=n_steps {
        let (next, (fin, fout)) = model.step_with_fluxes(&state, dt)?;
        state = next;
        // land exactly on t_end
        state.t = if k == n_steps { config.t_end } else { k as f64 * dt };
        inflow += dt * fin;
        outflow += dt * fout;
        history.push(StepRecord::of(state.t, &state.u, &state.w));
        if k % config.record_every == 0 || k == n_steps {
            snapshots.push(Snapshot {
                t: state.t,
                u: state.u.clone(),
                w: state.w.clone(),
            });
        }
    }
    Ok(Trajectory {
        meta: TrajectoryMeta {
            model: "nonlocal".into(),
            kernel: Some(model.kernel.clone()),
            epsilon: Some(model.epsilon),
            velocity: model.velocity.clone(),
            dt,
            dx: initial.dx(),
            n_steps,
            record_every: config.record_every,
            cfl: model.cfl,
            inflow,
            outflow,
            truncation_tail: model.center_weights.truncation_tail(),
        },
        snapshots,
        history,
    })
}
