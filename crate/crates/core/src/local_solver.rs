//! Godunov solver for the local equation `∂t u + ∂x(u V(u)) = 0` and the
//! exact Greenshields Riemann solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux_entropy::{clamp_state, godunov_flux, Flux, Velocity, STATE_TOL};
use crate::grid::{Extension, Grid, GridFunction};
use crate::nonlocal_solver::{Snapshot, SolverConfig, StepRecord, Trajectory, TrajectoryMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannDatum {
    pub u_left: f64,
    pub u_right: f64,
    #[serde(default)]
    pub x_jump: f64,
    /// Optional finite support `[a, b]`; the datum vanishes outside it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<[f64; 2]>,
}

impl RiemannDatum {
    pub fn new(u_left: f64, u_right: f64, x_jump: f64) -> Result<Self> {
        let d = Self {
            u_left,
            u_right,
            x_jump,
            support: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.u_left, self.u_right] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::StateOutOfRange(v));
            }
        }
        if !self.x_jump.is_finite() {
            return Err(Error::InvalidArgument("x_jump must be finite".into()));
        }
        if let Some([a, b]) = self.support {
            if !(a < self.x_jump && self.x_jump < b) {
                return Err(Error::InvalidArgument(format!(
                    "support [{a}, {b}] must contain the jump at {}",
                    self.x_jump
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        if let Some([a, b]) = self.support {
            if x < a || x >= b {
                return 0.0;
            }
        }
        if x < self.x_jump {
            self.u_left
        } else {
            self.u_right
        }
    }

    /// `∫_0^x` of the datum, used for exact cell averages.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let (a, b) = self.support.map_or((f64::NEG_INFINITY, f64::INFINITY), |s| (s[0], s[1]));
        let piece = |lo: f64, hi: f64, v: f64| -> f64 {
            // signed ∫_0^x of v·𝟙_[lo,hi)
            let clip = |y: f64| y.clamp(lo, hi);
            v * (clip(x) - clip(0.0))
        };
        piece(a, self.x_jump, self.u_left) + piece(self.x_jump, b, self.u_right)
    }

    pub fn cell_averages(&self, grid: Grid, extension: Extension) -> Result<GridFunction> {
        GridFunction::from_antiderivative(grid, extension, |x| self.antiderivative(x))
    }
}

/// Entropy solution of a Greenshields Riemann problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenshieldsRiemann {
    pub datum: RiemannDatum,
}

impl GreenshieldsRiemann {
    pub fn new(datum: RiemannDatum) -> Result<Self> {
        datum.validate()?;
        if datum.support.is_some() {
            return Err(Error::InvalidArgument(
                "exact solution needs a pure Riemann datum (no support)".into(),
            ));
        }
        Ok(Self { datum })
    }

    fn speed(u: f64) -> f64 {
        1.0 - 2.0 * u
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        let RiemannDatum { u_left: ul, u_right: ur, x_jump, .. } = self.datum;
        if t <= 0.0 || ul == ur {
            return self.datum.value(x);
        }
        let xi = (x - x_jump) / t;
        if ul < ur {
            // shock
            if xi < 1.0 - ul - ur {
                ul
            } else {
                ur
            }
        } else if xi <= Self::speed(ul) {
            ul
        } else if xi >= Self::speed(ur) {
            ur
        } else {
            0.5 * (1.0 - xi)
        }
    }

    /// Points where the solution at time `t` is not smooth.
    fn breakpoints(&self, t: f64) -> Vec<f64> {
        let RiemannDatum { u_left: ul, u_right: ur, x_jump, .. } = self.datum;
        if t <= 0.0 || ul == ur {
            vec![x_jump]
        } else if ul < ur {
            vec![x_jump + (1.0 - ul - ur) * t]
        } else {
            vec![x_jump + Self::speed(ul) * t, x_jump + Self::speed(ur) * t]
        }
    }

    /// Exact average over `[a, b]`; the solution is piecewise linear.
    pub fn average(&self, a: f64, b: f64, t: f64) -> f64 {
        let mut pts = vec![a];
        pts.extend(self.breakpoints(t).into_iter().filter(|&p| p > a && p < b));
        pts.push(b);
        let integral: f64 = pts
            .windows(2)
            .map(|w| (w[1] - w[0]) * self.value(0.5 * (w[0] + w[1]), t))
            .sum();
        integral / (b - a)
    }

    pub fn cell_averages(&self, grid: Grid, t: f64, extension: Extension) -> Result<GridFunction> {
        let values = (0..grid.n_cells())
            .map(|j| self.average(grid.face(j), grid.face(j + 1), t))
            .collect();
        GridFunction::new(grid, values, extension)
    }
}

/// Exact Greenshields Riemann solution sampled as cell averages.
pub fn exact_riemann_greenshields(datum: RiemannDatum, t: f64, grid: Grid, extension: Extension) -> Result<GridFunction> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be ≥ 0, got {t}")));
    }
    GreenshieldsRiemann::new(datum)?.cell_averages(grid, t, extension)
}

fn godunov_fluxes(flux: &Flux, u: &GridFunction) -> Vec<f64> {
    let n = u.len();
    (0..=n)
        .map(|f| godunov_flux(flux, u.at(f as isize - 1), u.at(f as isize)))
        .collect()
}

/// One Godunov step with `λ = dt/dx`.
pub fn godunov_step(flux: &Flux, u: &GridFunction, lambda: f64) -> Result<(GridFunction, (f64, f64))> {
    let n = u.len();
    let g = godunov_fluxes(flux, u);
    let mut next = Vec::with_capacity(n);
    for j in 0..n {
        let value = u.values()[j] - lambda * (g[j + 1] - g[j]);
        if !value.is_finite() || !(-STATE_TOL..=1.0 + STATE_TOL).contains(&value) {
            return Err(Error::MaximumPrincipleViolated { index: j, value });
        }
        next.push(value.clamp(0.0, 1.0));
    }
    Ok((u.with_values(next)?, (g[0], g[n])))
}

/// Godunov evolution to `config.t_end` with `dt = cfl·dx / max|f'|`.
pub fn solve_local(initial: &GridFunction, velocity: &Velocity, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    for &v in initial.values() {
        clamp_state(v).map_err(|_| Error::MaximumPrincipleViolated { index: 0, value: v })?;
    }
    let flux = Flux::new(velocity.clone());
    let dx = initial.dx();
    let dt_max = config.cfl * dx / flux.max_speed().max(f64::MIN_POSITIVE);
    let (dt, n_steps) = config.uniform_dt(dt_max);
    let lambda = dt / dx;
    let mut u = initial.map(|v| v.clamp(0.0, 1.0));
    let mut snapshots = vec![Snapshot { t: 0.0, u: u.clone(), w: u.clone() }];
    let mut history = vec![record(0.0, &u)];
    let (mut inflow, mut outflow) = (0.0, 0.0);
    for k in 1..=n_steps {
        let (next, (fin, fout)) = godunov_step(&flux, &u, lambda)?;
        u = next;
        inflow += dt * fin;
        outflow += dt * fout;
        let t = if k == n_steps { config.t_end } else { k as f64 * dt };
        history.push(record(t, &u));
        if k % config.record_every == 0 || k == n_steps {
            snapshots.push(Snapshot { t, u: u.clone(), w: u.clone() });
        }
    }
    Ok(Trajectory {
        meta: TrajectoryMeta {
            model: "local".into(),
            kernel: None,
            epsilon: None,
            velocity: velocity.clone(),
            dt,
            dx,
            n_steps,
            record_every: config.record_every,
            cfl: config.cfl,
            inflow,
            outflow,
            truncation_tail: 0.0,
        },
        snapshots,
        history,
    })
}

fn record(t: f64, u: &GridFunction) -> StepRecord {
    let tv = crate::grid::total_variation(u);
    StepRecord {
        t,
        tv_w: tv,
        tv_u: tv,
        mass: u.mass(),
        l2_u: crate::grid::l2_norm_sq(u).sqrt(),
    }
}

/// Largest positive part of the discrete Kruzhkov entropy residual for
/// `η = |ξ − k|` over one Godunov step `u → next`.
pub fn kruzhkov_residual(flux: &Flux, u: &GridFunction, next: &GridFunction, k: f64, lambda: f64) -> Result<f64> {
    u.check_same_grid(next)?;
    let n = u.len();
    let q: Vec<f64> = (0..=n)
        .map(|f| {
            let (a, b) = (u.at(f as isize - 1), u.at(f as isize));
            godunov_flux(flux, a.max(k), b.max(k)) - godunov_flux(flux, a.min(k), b.min(k))
        })
        .collect();
    Ok((0..n)
        .map(|j| {
            (next.values()[j] - k).abs() - (u.values()[j] - k).abs() + lambda * (q[j + 1] - q[j])
        })
        .fold(0.0, f64::max))
}
