//! Dissipation functionals, entropy-production norms, identity residuals,
//! TV bookkeeping and log-log scaling fits, all evaluated on trajectories.
//!
//! Time integrals are left-endpoint sums over consecutive snapshots, so a
//! trajectory recorded with stride 1 integrates at the solver's `dt`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_entropy::{EntropyPair, Velocity};
use crate::grid::{l1_norm, l2_norm_sq, shift_sample, total_variation, GridFunction};
use crate::kernels::{build_weights_shifted, Kernel};
use crate::nonlocal_solver::{Snapshot, Trajectory};

/// Multiplicative discretization slack `1 + 5·dx/ε` applied to the
/// continuum bounds.
pub fn discretization_slack(dx: f64, epsilon: f64) -> f64 {
    1.0 + 5.0 * dx / epsilon
}

/// A space-time integral with the part contributed by the edge layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Functional {
    pub value: f64,
    pub boundary: f64,
}

impl Functional {
    /// `|boundary| / |value|`, zero when the functional vanishes.
    pub fn boundary_share(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            (self.boundary / self.value).abs()
        }
    }
}

fn require_kernel(traj: &Trajectory, expected: &str) -> Result<()> {
    let found = traj.meta.kernel.as_ref().map_or("none", |k| k.name());
    if found != expected {
        return Err(Error::KernelMismatch {
            expected: expected.into(),
            found: found.into(),
        });
    }
    Ok(())
}

fn require_greenshields(traj: &Trajectory) -> Result<()> {
    if traj.meta.velocity != Velocity::Greenshields {
        return Err(Error::VelocityMismatch {
            expected: "greenshields".into(),
            found: traj.meta.velocity.name().into(),
        });
    }
    Ok(())
}

/// `Σ_i Δt_i · dx · Σ_j f_j(snapshot_i)`; cells within `layer` of either
/// edge are also summed separately.
fn space_time_sum(traj: &Trajectory, layer: usize, f: impl Fn(&Snapshot) -> Vec<f64>) -> Functional {
    let mut value = 0.0;
    let mut boundary = 0.0;
    for (dt, snap) in traj.time_weights() {
        let cells = f(snap);
        let n = cells.len();
        let dx = snap.u.dx();
        let edge = layer.min(n / 2);
        let b: f64 = cells[..edge].iter().chain(&cells[n - edge..]).sum();
        value += dt * dx * cells.iter().sum::<f64>();
        boundary += dt * dx * b;
    }
    Functional { value, boundary }
}

fn edge_layer(epsilon: f64, dx: f64) -> usize {
    (epsilon / dx).ceil() as usize + 1
}

/// `∫ (V(z) − V(b)) dz` from `a` to `b`.
fn h_quadratic(v: &Velocity, a: f64, b: f64) -> f64 {
    v.integral(b) - v.integral(a) - v.eval(b) * (b - a)
}

/// `∫∫ (1/ε) u(x+ε) ∫_{w(x)}^{w(x+ε)} (V(z) − V(w(x+ε))) dz` for the
/// piecewise-constant kernel.
pub fn dissipation_constant_kernel(traj: &Trajectory, epsilon: f64) -> Result<Functional> {
    require_kernel(traj, "piecewise_constant")?;
    let v = &traj.meta.velocity;
    Ok(space_time_sum(traj, edge_layer(epsilon, traj.meta.dx), |s| {
        let u_s = shift_sample(&s.u, epsilon);
        let w_s = shift_sample(&s.w, epsilon);
        (0..s.u.len())
            .map(|j| u_s.values()[j] * h_quadratic(v, s.w.values()[j], w_s.values()[j]) / epsilon)
            .collect()
    }))
}

/// `∫∫ u² (u − u(x+ε))`, bounded by `ε ‖u₀‖²_{L²}` for Greenshields with the
/// piecewise-constant kernel.
pub fn energy_identity_constant_kernel(traj: &Trajectory, epsilon: f64) -> Result<Functional> {
    require_kernel(traj, "piecewise_constant")?;
    require_greenshields(traj)?;
    Ok(space_time_sum(traj, edge_layer(epsilon, traj.meta.dx), |s| {
        let u_s = shift_sample(&s.u, epsilon);
        s.u.values()
            .iter()
            .zip(u_s.values())
            .map(|(u, us)| u * u * (u - us))
            .collect()
    }))
}

/// `ε² ∫∫ (∂x w)²` with `∂x w = (u(x+ε) − u(x))/ε`, exact for the
/// piecewise-constant kernel.
pub fn grad_w_scaling(traj: &Trajectory, epsilon: f64) -> Result<Functional> {
    require_kernel(traj, "piecewise_constant")?;
    Ok(space_time_sum(traj, edge_layer(epsilon, traj.meta.dx), |s| {
        let u_s = shift_sample(&s.u, epsilon);
        s.u.values()
            .iter()
            .zip(u_s.values())
            .map(|(u, us)| (us - u).powi(2))
            .collect()
    }))
}

/// Same quantity with `∂x w` replaced by the forward difference of `w`.
pub fn grad_w_forward_difference(traj: &Trajectory, epsilon: f64) -> Functional {
    let dx = traj.meta.dx;
    space_time_sum(traj, edge_layer(epsilon, dx), |s| {
        (0..s.w.len())
            .map(|j| {
                let d = (s.w.at(j as isize + 1) - s.w.values()[j]) / dx;
                (epsilon * d).powi(2)
            })
            .collect()
    })
}

/// `−(1/2ε) ∫∫ V'(w) (w − u)² (w + u)` for the exponential kernel.
pub fn dissipation_exponential(traj: &Trajectory, epsilon: f64) -> Result<Functional> {
    require_kernel(traj, "exponential")?;
    let v = &traj.meta.velocity;
    Ok(space_time_sum(traj, edge_layer(epsilon, traj.meta.dx), |s| {
        s.u.values()
            .iter()
            .zip(s.w.values())
            .map(|(&u, &w)| -v.derivative(w) * (w - u).powi(2) * (w + u) / (2.0 * epsilon))
            .collect()
    }))
}

/// `−(1/ε) ∫∫ V'(w) (P(w) − P(u)) (w − u)` for a general entropy.
pub fn dissipation_exponential_general(traj: &Trajectory, epsilon: f64, pair: &EntropyPair) -> Result<Functional> {
    require_kernel(traj, "exponential")?;
    let v = &traj.meta.velocity;
    Ok(space_time_sum(traj, edge_layer(epsilon, traj.meta.dx), |s| {
        s.u.values()
            .iter()
            .zip(s.w.values())
            .map(|(&u, &w)| -v.derivative(w) * (pair.p(w) - pair.p(u)) * (w - u) / epsilon)
            .collect()
    }))
}

/// `max_t dx·Σ_j |ε D⁺w_j − (w_j − u_j)|`, interior cells only.
pub fn exp_identity_residual(traj: &Trajectory, epsilon: f64) -> Result<f64> {
    require_kernel(traj, "exponential")?;
    Ok(traj
        .snapshots
        .iter()
        .map(|s| identity_residual(&s.u, &s.w, epsilon))
        .fold(0.0, f64::max))
}

pub fn identity_residual(u: &GridFunction, w: &GridFunction, epsilon: f64) -> f64 {
    let dx = u.dx();
    let (uv, wv) = (u.values(), w.values());
    let n = uv.len();
    let last = if u.extension() == crate::grid::Extension::Periodic { n } else { n - 1 };
    dx * (0..last)
        .map(|j| {
            let next = w.at(j as isize + 1);
            (epsilon * (next - wv[j]) / dx - (wv[j] - uv[j])).abs()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvPoint {
    pub t: f64,
    pub tv_w: f64,
    pub tv_u: f64,
}

/// `TV(w)` and `TV(u)` after every solver step.
pub fn tv_history(traj: &Trajectory) -> Vec<TvPoint> {
    traj.history
        .iter()
        .map(|r| TvPoint {
            t: r.t,
            tv_w: r.tv_w,
            tv_u: r.tv_u,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferPoint {
    pub t: f64,
    /// `‖w − u‖_{L¹}`
    pub lhs: f64,
    /// `ε TV(w)`
    pub rhs: f64,
}

/// Below this both sides of the transfer identity are round-off or
/// truncation noise.
const TRANSFER_NOISE: f64 = 1e-10;

impl TransferPoint {
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both sides are noise.
    pub fn relative_gap(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale <= TRANSFER_NOISE {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / scale
        }
    }
}

/// `‖w − u‖_{L¹}` against `ε TV(w)` per snapshot.
pub fn tv_transfer_check(traj: &Trajectory, epsilon: f64) -> Result<Vec<TransferPoint>> {
    require_kernel(traj, "exponential")?;
    traj.snapshots
        .iter()
        .map(|s| {
            let diff = s.w.zip_with(&s.u, |a, b| a - b)?;
            Ok(TransferPoint {
                t: s.t,
                lhs: l1_norm(&diff),
                rhs: epsilon * total_variation(&s.w),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyProduction {
    pub i1_l2_sq: f64,
    pub i2_l2_sq: f64,
    pub i3_l1: f64,
}

/// Norms of the three pieces of the entropy production of `w`, using every
/// `stride`-th snapshot interval.
pub fn entropy_production_terms(traj: &Trajectory, pair: &EntropyPair, stride: usize) -> Result<EntropyProduction> {
    let kernel = traj
        .meta
        .kernel
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("entropy production needs a nonlocal trajectory".into()))?;
    let epsilon = traj.meta.epsilon.unwrap_or(f64::NAN);
    let weights = build_weights_shifted(kernel, epsilon, traj.meta.dx, crate::kernels::DEFAULT_TAIL_TOL, 0.5)?;
    let dweights = weights.derivative_weights();
    let w_k = weights.weights();
    let v = &traj.meta.velocity;
    let stride = stride.max(1);
    let snaps = &traj.snapshots;
    let mut out = EntropyProduction {
        i1_l2_sq: 0.0,
        i2_l2_sq: 0.0,
        i3_l1: 0.0,
    };
    let mut i = 0;
    while i + 1 < snaps.len() {
        let next = (i + stride).min(snaps.len() - 1);
        let dt = snaps[next].t - snaps[i].t;
        let s = &snaps[i];
        let n = s.u.len();
        let k = w_k.len();
        let u = s.u.extended(0, n + k);
        let w = s.w.extended(0, n + k);
        let vw: Vec<f64> = w.iter().map(|&x| v.eval(x)).collect();
        let dx = s.u.dx();
        for j in 0..n {
            let (mut c1, mut c2, mut c3) = (0.0, 0.0, 0.0);
            for m in 0..k {
                let um = u[j + m];
                if um == 0.0 {
                    continue;
                }
                c1 += w_k[m] * um * (vw[j + m] - vw[j]);
                if w[j + m] != w[j] {
                    let h = pair.h_eta(w[j], w[j + m])?;
                    c2 += w_k[m] * um * h;
                    c3 += dweights[m] * um * h;
                }
            }
            c1 *= pair.d_eta(w[j]);
            out.i1_l2_sq += dt * dx * c1 * c1;
            out.i2_l2_sq += dt * dx * c2 * c2;
            out.i3_l1 += dt * dx * c3;
        }
        i = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GPoint {
    pub s: f64,
    pub g: f64,
}

/// `g_ε(s) = ∫∫ u(x − εs) ∫_{w(x)}^{w(x−εs)} (V(z) − V(w(x−εs))) dz` for `s ≤ 0`.
pub fn g_epsilon_profile(traj: &Trajectory, epsilon: f64, s_samples: &[f64]) -> Result<Vec<GPoint>> {
    if let Some(&s) = s_samples.iter().find(|&&s| !(s <= 0.0)) {
        return Err(Error::InvalidArgument(format!("s samples must be ≤ 0, got {s}")));
    }
    let v = &traj.meta.velocity;
    Ok(s_samples
        .iter()
        .map(|&s| {
            let offset = -epsilon * s;
            let g = space_time_sum(traj, 0, |snap| {
                let u_s = shift_sample(&snap.u, offset);
                let w_s = shift_sample(&snap.w, offset);
                (0..snap.u.len())
                    .map(|j| u_s.values()[j] * h_quadratic(v, snap.w.values()[j], w_s.values()[j]))
                    .collect()
            })
            .value;
            GPoint { s, g }
        })
        .collect())
}

/// Trapezoidal `∫ g(s) φ(s) ds` over the sampled range.
pub fn integrate_profile(profile: &[GPoint], phi: impl Fn(f64) -> f64) -> f64 {
    profile
        .windows(2)
        .map(|p| 0.5 * (p[1].s - p[0].s) * (p[0].g * phi(p[0].s) + p[1].g * phi(p[1].s)))
        .sum::<f64>()
        .abs()
}

/// `C₁ = T ‖V‖_∞ ‖u₀‖_{L¹}`.
pub fn g_bound(traj: &Trajectory) -> f64 {
    let t_end = traj.last().t;
    t_end * traj.meta.velocity.max_value() * l1_norm(&traj.initial().u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_exponent: f64,
    pub intercept: f64,
    pub fit_residual: f64,
}

/// Least-squares slope of `log value` against `log ε`.
pub fn fit_scaling(epsilons: &[f64], values: &[f64]) -> Result<ScalingFit> {
    if epsilons.len() != values.len() {
        return Err(Error::InvalidArgument("epsilons and values differ in length".into()));
    }
    if epsilons.len() < 3 {
        return Err(Error::TooFewPoints(epsilons.len()));
    }
    if epsilons.windows(2).any(|p| p[1] >= p[0]) || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("epsilons must be positive and strictly decreasing".into()));
    }
    let bad: Vec<f64> = epsilons
        .iter()
        .zip(values)
        .filter(|(_, &v)| !(v > 0.0 && v.is_finite()))
        .map(|(&e, _)| e)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonPositiveValues(bad));
    }
    let n = epsilons.len() as f64;
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(ScalingFit {
        epsilons: epsilons.to_vec(),
        values: values.to_vec(),
        fitted_exponent: slope,
        intercept,
        fit_residual: (rss / n).sqrt(),
    })
}

/// Everything applicable to one nonlocal run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub epsilon: f64,
    pub kernel: String,
    /// `‖u₀‖²_{L²}`
    pub c0: f64,
    pub slack: f64,
    pub diss_quadratic: Option<Functional>,
    pub diss_exp: Option<Functional>,
    pub energy_ueps: Option<Functional>,
    pub grad_w_l2: Option<Functional>,
    pub exp_identity_residual: Option<f64>,
    pub dist_uw_l1: Vec<TransferPoint>,
    pub max_tv_w_increase: f64,
    pub min_value: f64,
    pub max_value: f64,
}

impl DiagnosticsReport {
    pub fn compute(traj: &Trajectory) -> Result<Self> {
        let epsilon = traj
            .meta
            .epsilon
            .ok_or_else(|| Error::InvalidArgument("diagnostics need a nonlocal trajectory".into()))?;
        let kernel = traj.meta.kernel.clone().unwrap_or(Kernel::PiecewiseConstant);
        let c0 = l2_norm_sq(&traj.initial().u);
        let constant = matches!(kernel, Kernel::PiecewiseConstant);
        let exponential = matches!(kernel, Kernel::Exponential);
        let greenshields = traj.meta.velocity == Velocity::Greenshields;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &traj.snapshots {
            lo = lo.min(s.u.min()).min(s.w.min());
            hi = hi.max(s.u.max()).max(s.w.max());
        }
        Ok(Self {
            epsilon,
            kernel: kernel.name().into(),
            c0,
            slack: discretization_slack(traj.meta.dx, epsilon),
            diss_quadratic: constant.then(|| dissipation_constant_kernel(traj, epsilon)).transpose()?,
            diss_exp: exponential.then(|| dissipation_exponential(traj, epsilon)).transpose()?,
            energy_ueps: (constant && greenshields)
                .then(|| energy_identity_constant_kernel(traj, epsilon))
                .transpose()?,
            grad_w_l2: constant.then(|| grad_w_scaling(traj, epsilon)).transpose()?,
            exp_identity_residual: exponential.then(|| exp_identity_residual(traj, epsilon)).transpose()?,
            dist_uw_l1: if exponential { tv_transfer_check(traj, epsilon)? } else { Vec::new() },
            max_tv_w_increase: traj.max_tv_w_increase(),
            min_value: lo,
            max_value: hi,
        })
    }
}
