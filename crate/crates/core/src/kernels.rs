//! Nonlocal kernels `γ`, their ε-rescaling and the discrete convolution
//! `w = γ_ε ∗ u`.
//!
//! Kernels are supported in `]-∞, 0]`, so `(γ_ε ∗ u)(x) = ∫ γ_ε(x − y) u(y) dy`
//! only sees `y ≥ x`: drivers look downstream. Discrete weights are exact
//! integrals of `γ_ε` over cell-sized offset intervals, which keeps the
//! weights summing to one and the convolution a convex combination.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Upper bound on the number of cell weights a kernel may occupy.
pub const MAX_WEIGHTS: usize = 1 << 22;

/// Default mass allowed to fall outside a truncated (infinite-support) kernel.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Below this many weights the direct O(N·K) sum is used.
const FAST_PATH_MIN_WEIGHTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    /// `γ = 𝟙_{[-1,0]}`
    PiecewiseConstant,
    /// `γ = 𝟙_{]-∞,0]} e^z`
    Exponential,
    /// `γ = 2(1 + z) 𝟙_{[-1,0]}`
    Linear,
    Tabulated(TabulatedKernel),
}

/// Piecewise-linear, non-decreasing kernel on `[breakpoints[0], 0]`,
/// normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct TabulatedKernel {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTable {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawTable> for TabulatedKernel {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        TabulatedKernel::new(raw.breakpoints, raw.values)
    }
}

impl TabulatedKernel {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidKernel(m));
        if breakpoints.len() != values.len() {
            return bad(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            ));
        }
        if breakpoints.len() < 2 {
            return bad("need at least two breakpoints".into());
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return bad("breakpoints must be strictly increasing".into());
        }
        if *breakpoints.last().unwrap() != 0.0 {
            return bad("support must end at 0 (last breakpoint = 0)".into());
        }
        if values.iter().any(|&v| v < 0.0) {
            return bad("kernel values must be nonnegative".into());
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return bad("kernel must be non-decreasing on its support".into());
        }
        let mass: f64 = breakpoints
            .windows(2)
            .zip(values.windows(2))
            .map(|(b, v)| 0.5 * (v[0] + v[1]) * (b[1] - b[0]))
            .sum();
        if mass <= 0.0 {
            return bad("kernel has zero mass".into());
        }
        let values: Vec<f64> = values.iter().map(|v| v / mass).collect();
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for (b, v) in breakpoints.windows(2).zip(values.windows(2)) {
            acc += 0.5 * (v[0] + v[1]) * (b[1] - b[0]);
            cumulative.push(acc);
        }
        Ok(Self {
            breakpoints,
            values,
            cumulative,
        })
    }

    /// Reads a two-column text table `breakpoint value` (whitespace or comma
    /// separated, `#` comments).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected 2 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(cols[0])?);
            ys.push(parse(cols[1])?);
        }
        Self::new(xs, ys)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Normalized values at the breakpoints.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, z: f64) -> usize {
        let i = self.breakpoints.partition_point(|&b| b <= z);
        i.clamp(1, self.breakpoints.len() - 1) - 1
    }

    fn density(&self, z: f64) -> f64 {
        if z < self.breakpoints[0] || z > 0.0 {
            return 0.0;
        }
        let i = self.segment(z);
        let (b0, b1) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let t = (z - b0) / (b1 - b0);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    fn cumulative(&self, z: f64) -> f64 {
        if z <= self.breakpoints[0] {
            return 0.0;
        }
        if z >= 0.0 {
            return *self.cumulative.last().unwrap();
        }
        let i = self.segment(z);
        let b0 = self.breakpoints[i];
        let v0 = self.values[i];
        self.cumulative[i] + 0.5 * (v0 + self.density(z)) * (z - b0)
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.breakpoints[i + 1] - self.breakpoints[i])
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.breakpoints.len() - 1).map(move |i| {
            (self.breakpoints[i], self.breakpoints[i + 1], self.slope(i))
        })
    }
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::PiecewiseConstant => "piecewise_constant",
            Kernel::Exponential => "exponential",
            Kernel::Linear => "linear",
            Kernel::Tabulated(_) => "tabulated",
        }
    }

    /// Parses `piecewise_constant | exponential | linear`, or treats the
    /// argument as a path to a tabulated kernel file.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec {
            "piecewise_constant" | "constant" => Ok(Kernel::PiecewiseConstant),
            "exponential" | "exp" => Ok(Kernel::Exponential),
            "linear" => Ok(Kernel::Linear),
            path => Ok(Kernel::Tabulated(TabulatedKernel::from_file(path)?)),
        }
    }

    /// `γ(z)`; at `z = 0` this is the left limit.
    pub fn density(&self, z: f64) -> f64 {
        if z > 0.0 {
            return 0.0;
        }
        match self {
            Kernel::PiecewiseConstant => {
                if z >= -1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Exponential => z.exp(),
            Kernel::Linear => {
                if z >= -1.0 {
                    2.0 * (1.0 + z)
                } else {
                    0.0
                }
            }
            Kernel::Tabulated(t) => t.density(z),
        }
    }

    /// Absolutely continuous part of `γ'` (a.e. derivative).
    pub fn derivative(&self, z: f64) -> f64 {
        if z >= 0.0 {
            return 0.0;
        }
        match self {
            Kernel::PiecewiseConstant => 0.0,
            Kernel::Exponential => z.exp(),
            Kernel::Linear => {
                if z > -1.0 {
                    2.0
                } else {
                    0.0
                }
            }
            Kernel::Tabulated(t) => {
                if z < t.breakpoints[0] {
                    0.0
                } else {
                    t.slope(t.segment(z))
                }
            }
        }
    }

    /// `Γ(z) = ∫_{-∞}^{min(z,0)} γ`.
    pub fn cumulative(&self, z: f64) -> f64 {
        let z = z.min(0.0);
        match self {
            Kernel::PiecewiseConstant => (z + 1.0).clamp(0.0, 1.0),
            Kernel::Exponential => z.exp(),
            Kernel::Linear => {
                let s = (z + 1.0).clamp(0.0, 1.0);
                s * s
            }
            Kernel::Tabulated(t) => t.cumulative(z),
        }
    }

    /// `∫_lo^hi γ` for `lo ≤ hi`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let hi = hi.min(0.0);
        if hi <= lo {
            return 0.0;
        }
        match self {
            // e^hi - e^lo without cancellation
            Kernel::Exponential => -hi.exp() * (lo - hi).exp_m1(),
            _ => (self.cumulative(hi) - self.cumulative(lo)).max(0.0),
        }
    }

    /// Left end of the support, `None` for unbounded support.
    pub fn support_left(&self) -> Option<f64> {
        match self {
            Kernel::PiecewiseConstant | Kernel::Linear => Some(-1.0),
            Kernel::Exponential => None,
            Kernel::Tabulated(t) => Some(t.breakpoints[0]),
        }
    }

    /// Convex on `]-∞, 0]` (zero extension included).
    pub fn is_convex(&self) -> bool {
        match self {
            Kernel::PiecewiseConstant => false,
            Kernel::Exponential | Kernel::Linear => true,
            Kernel::Tabulated(t) => {
                if t.values[0] > 0.0 {
                    return false;
                }
                let slopes: Vec<f64> = t.segments().map(|s| s.2).collect();
                slopes.windows(2).all(|w| w[1] >= w[0] - 1e-12)
            }
        }
    }

    /// `γ' > 0` almost everywhere on the support.
    pub fn strictly_increasing_on_support(&self) -> bool {
        match self {
            Kernel::PiecewiseConstant => false,
            Kernel::Exponential | Kernel::Linear => true,
            Kernel::Tabulated(t) => t.segments().all(|(_, _, s)| s > 0.0),
        }
    }
}

/// Exact cell integrals of `γ_ε`, laid out by downstream offset.
///
/// Weight `k` is `∫ γ_ε(-s) ds` over `s ∈ [(k - shift)·dx, (k + 1 - shift)·dx] ∩ [0, ∞)`.
/// With `shift = 0` the evaluation point is the left face of each cell;
/// with `shift = 0.5` it is the cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledKernelWeights {
    kernel: Kernel,
    epsilon: f64,
    dx: f64,
    shift: f64,
    weights: Vec<f64>,
    truncation_tail: f64,
}

/// Weights with the evaluation point on the left face of each cell.
pub fn build_weights(
    kernel: &Kernel,
    epsilon: f64,
    dx: f64,
    tail_tol: f64,
) -> Result<ScaledKernelWeights> {
    build_weights_shifted(kernel, epsilon, dx, tail_tol, 0.0)
}

pub fn build_weights_shifted(
    kernel: &Kernel,
    epsilon: f64,
    dx: f64,
    tail_tol: f64,
    shift: f64,
) -> Result<ScaledKernelWeights> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::InvalidArgument(format!("dx must be > 0, got {dx}")));
    }
    if !(tail_tol > 0.0 && tail_tol <= 1e-8) {
        return Err(Error::InvalidArgument(format!(
            "tail_tol must lie in (0, 1e-8], got {tail_tol}"
        )));
    }
    if !(0.0..1.0).contains(&shift) {
        return Err(Error::InvalidArgument(format!("shift must lie in [0, 1), got {shift}")));
    }
    let h = dx / epsilon;
    let count = match kernel.support_left() {
        Some(left) => shift + (-left) / h,
        None => shift + (1.0 / tail_tol).ln() / h,
    }
    .ceil()
    .max(1.0);
    if !count.is_finite() || count > MAX_WEIGHTS as f64 {
        return Err(Error::KernelSupportTooWide {
            needed: if count.is_finite() { count as usize } else { usize::MAX },
            cap: MAX_WEIGHTS,
        });
    }
    let count = count as usize;
    let weights: Vec<f64> = (0..count)
        .map(|k| {
            let near = (k as f64 - shift).max(0.0);
            let far = k as f64 + 1.0 - shift;
            match kernel {
                // exact plateau value h for interior cells
                Kernel::PiecewiseConstant => {
                    let cells = far.min(1.0 / h) - near;
                    (cells.max(0.0) * h).min(1.0)
                }
                _ => kernel.mass_between(-far * h, -near * h),
            }
        })
        .collect();
    let truncation_tail = kernel.cumulative(-(count as f64 - shift) * h);
    Ok(ScaledKernelWeights {
        kernel: kernel.clone(),
        epsilon,
        dx,
        shift,
        weights,
        truncation_tail,
    })
}

impl ScaledKernelWeights {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn truncation_tail(&self) -> f64 {
        self.truncation_tail
    }

    /// Offset interval `[lo, hi]` (downstream distance) covered by weight `k`.
    pub fn offset_interval(&self, k: usize) -> (f64, f64) {
        (
            ((k as f64 - self.shift) * self.dx).max(0.0),
            (k as f64 + 1.0 - self.shift) * self.dx,
        )
    }

    /// Cell integrals of the distributional derivative `γ'_ε` on the same
    /// offset intervals, with the atom at offset 0 dropped (it multiplies a
    /// vanishing integrand in every use). A jump at the far end of a finite
    /// support is kept.
    pub fn derivative_weights(&self) -> Vec<f64> {
        let h = self.dx / self.epsilon;
        (0..self.weights.len())
            .map(|k| {
                let near = (k as f64 - self.shift).max(0.0);
                let far = k as f64 + 1.0 - self.shift;
                let rise = self.kernel.density(-near * h) - self.kernel.density(-far * h);
                rise.max(0.0) / self.epsilon
            })
            .collect()
    }

    fn check_spacing(&self, u: &GridFunction) -> Result<()> {
        if (u.dx() - self.dx).abs() > 1e-12 * self.dx {
            return Err(Error::SpacingMismatch {
                weights_dx: self.dx,
                grid_dx: u.dx(),
            });
        }
        Ok(())
    }

    /// Longest run of exactly equal weights, as `(start, end, value)`.
    fn plateau(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        let mut start = 0;
        for k in 1..=self.weights.len() {
            if k == self.weights.len() || self.weights[k] != self.weights[start] {
                if k - start >= 2 && best.iter().all(|&(a, b, _)| k - start > b - a) {
                    best = Some((start, k, self.weights[start]));
                }
                start = k;
            }
        }
        best
    }
}

/// Which evaluation route [`convolve`] takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionPath {
    Direct,
    SlidingWindow,
    Recursive,
}

pub fn select_path(weights: &ScaledKernelWeights) -> ConvolutionPath {
    if weights.len() < FAST_PATH_MIN_WEIGHTS {
        return ConvolutionPath::Direct;
    }
    match weights.kernel {
        Kernel::Exponential => ConvolutionPath::Recursive,
        Kernel::PiecewiseConstant if weights.plateau().is_some() => ConvolutionPath::SlidingWindow,
        _ => ConvolutionPath::Direct,
    }
}

/// `w_j = Σ_k weights_k · u_{j+k}`, using `u`'s extension beyond the domain.
pub fn convolve(u: &GridFunction, weights: &ScaledKernelWeights) -> Result<GridFunction> {
    convolve_with(u, weights, select_path(weights))
}

pub fn convolve_with(
    u: &GridFunction,
    weights: &ScaledKernelWeights,
    path: ConvolutionPath,
) -> Result<GridFunction> {
    weights.check_spacing(u)?;
    let n = u.len();
    let k = weights.len();
    let ext = u.extended(0, n + k - 1);
    let values = match path {
        ConvolutionPath::Direct => convolve_direct(&ext, &weights.weights, n),
        ConvolutionPath::SlidingWindow => match weights.plateau() {
            Some(plateau) => convolve_plateau(&ext, &weights.weights, n, plateau),
            None => convolve_direct(&ext, &weights.weights, n),
        },
        ConvolutionPath::Recursive => match weights.kernel {
            Kernel::Exponential if k >= 2 => convolve_exponential(&ext, weights, n),
            _ => convolve_direct(&ext, &weights.weights, n),
        },
    };
    u.with_values(values)
}

/// Same sum on a raw extended array `ext` (length `n + K - 1`).
pub(crate) fn convolve_extended(ext: &[f64], weights: &ScaledKernelWeights, n: usize) -> Vec<f64> {
    match select_path(weights) {
        ConvolutionPath::Direct => convolve_direct(ext, &weights.weights, n),
        ConvolutionPath::SlidingWindow => {
            convolve_plateau(ext, &weights.weights, n, weights.plateau().unwrap())
        }
        ConvolutionPath::Recursive => convolve_exponential(ext, weights, n),
    }
}

fn convolve_direct(ext: &[f64], weights: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            weights
                .iter()
                .zip(&ext[j..j + weights.len()])
                .map(|(w, u)| w * u)
                .sum()
        })
        .collect()
}

/// Error-free transformation `a + b = s + e`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn convolve_plateau(
    ext: &[f64],
    weights: &[f64],
    n: usize,
    (p0, p1, c): (usize, usize, f64),
) -> Vec<f64> {
    // compensated prefix sums: window sums keep full precision
    let mut hi = Vec::with_capacity(ext.len() + 1);
    let mut lo = Vec::with_capacity(ext.len() + 1);
    hi.push(0.0);
    lo.push(0.0);
    let (mut s, mut e) = (0.0f64, 0.0f64);
    for &v in ext {
        let (s2, err) = two_sum(s, v);
        s = s2;
        e += err;
        hi.push(s);
        lo.push(e);
    }
    let edges: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(k, _)| *k < p0 || *k >= p1)
        .map(|(k, &w)| (k, w))
        .collect();
    (0..n)
        .map(|j| {
            let window = (hi[j + p1] - hi[j + p0]) + (lo[j + p1] - lo[j + p0]);
            let rest: f64 = edges.iter().map(|&(k, w)| w * ext[j + k]).sum();
            c * window + rest
        })
        .collect()
}

fn convolve_exponential(ext: &[f64], weights: &ScaledKernelWeights, n: usize) -> Vec<f64> {
    let k = weights.len();
    let h = weights.dx / weights.epsilon;
    let s = weights.shift;
    let r = (-h).exp();
    let z0 = -(-h).exp_m1();
    let rho = (-(1.0 - s) * h).exp();
    let w0 = weights.weights[0];
    // z_i = Σ_{m < K-1} z0 r^m ext[i+m]; w_j = w0 ext[j] + rho z_{j+1}
    let terms = k - 1;
    let drop = z0 * r.powi(terms as i32);
    let mut z = vec![0.0; n + 1];
    let mut acc = 0.0;
    let mut coef = z0;
    for m in 0..terms {
        acc += coef * ext[n + m];
        coef *= r;
    }
    z[n] = acc;
    for i in (1..n).rev() {
        z[i] = z0 * ext[i] + r * z[i + 1] - drop * ext[i + terms];
    }
    (0..n).map(|j| w0 * ext[j] + rho * z[j + 1]).collect()
}

/// Largest `D ≥ 0` with `γ' ≥ D·γ` a.e. where `γ > 0`; `None` when `γ'`
/// vanishes on a set of positive measure inside the support.
pub fn kernel_growth_ratio(kernel: &Kernel) -> Option<f64> {
    match kernel {
        Kernel::PiecewiseConstant => None,
        Kernel::Exponential => Some(1.0),
        // γ'/γ = 1/(1+z), smallest as z → 0⁻
        Kernel::Linear => Some(1.0),
        Kernel::Tabulated(t) => {
            let mut best = f64::INFINITY;
            for (i, (_, _, slope)) in t.segments().enumerate() {
                if slope <= 0.0 {
                    return None;
                }
                best = best.min(slope / t.values[i + 1]);
            }
            Some(best)
        }
    }
}

/// `K_γ(δ, M) = ∫_{-∞}^0 𝟙{s ≤ -M or γ'(s) < δ} γ(s) ds`.
pub fn k_gamma(kernel: &Kernel, delta: f64, m: f64) -> Result<f64> {
    if !(delta > 0.0 && m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need delta > 0 and M > 0, got ({delta}, {m})"
        )));
    }
    let below = kernel.cumulative(-m);
    let value = match kernel {
        Kernel::PiecewiseConstant => 1.0,
        // {γ' < δ} = {s < ln δ}
        Kernel::Exponential => (-m).max(delta.ln().min(0.0)).exp(),
        Kernel::Linear => {
            if delta > 2.0 {
                1.0
            } else {
                below
            }
        }
        Kernel::Tabulated(t) => {
            let mut total = below;
            for (a, b, slope) in t.segments() {
                if slope < delta {
                    let lo = a.max(-m);
                    if lo < b {
                        total += kernel.mass_between(lo, b);
                    }
                }
            }
            total
        }
    };
    Ok(value.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Extension, Grid};
    use approx::assert_abs_diff_eq;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    fn sample_tabulated() -> Kernel {
        Kernel::Tabulated(
            TabulatedKernel::new(vec![-2.0, -1.0, -0.5, 0.0], vec![0.0, 0.5, 1.0, 3.0]).unwrap(),
        )
    }

    #[test]
    fn analytic_kernels_have_unit_mass() {
        for k in [Kernel::PiecewiseConstant, Kernel::Exponential, Kernel::Linear, sample_tabulated()] {
            assert_abs_diff_eq!(k.cumulative(0.0), 1.0, epsilon = 1e-12);
            let lo = k.support_left().unwrap_or(-40.0);
            // quadrature oracle on the density
            let q = simpson(|z| k.density(z), lo, 0.0, 20_000);
            assert_abs_diff_eq!(q, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn tabulated_validation() {
        assert!(TabulatedKernel::new(vec![-1.0, 0.0], vec![1.0, 0.5]).is_err());
        assert!(TabulatedKernel::new(vec![-1.0, -0.5], vec![1.0, 1.0]).is_err());
        assert!(TabulatedKernel::new(vec![0.0, -1.0], vec![1.0, 1.0]).is_err());
        assert!(TabulatedKernel::new(vec![-1.0, 0.0], vec![-1.0, 1.0]).is_err());
        assert!(TabulatedKernel::new(vec![-1.0, 0.0], vec![0.0, 0.0]).is_err());
        let t = TabulatedKernel::from_text("# z gamma\n-1, 1\n0 1\n").unwrap();
        assert_abs_diff_eq!(t.values()[0], 1.0);
        assert!(TabulatedKernel::from_text("-1 1 3\n0 1").is_err());
    }

    #[test]
    fn constant_kernel_four_cells() {
        let w = build_weights(&Kernel::PiecewiseConstant, 0.4, 0.1, 1e-12).unwrap();
        assert_eq!(w.len(), 4);
        for &x in w.weights() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
        assert_eq!(w.truncation_tail(), 0.0);
    }

    #[test]
    fn constant_kernel_fractional_end_cell() {
        let w = build_weights(&Kernel::PiecewiseConstant, 0.35, 0.1, 1e-12).unwrap();
        assert_eq!(w.len(), 4);
        assert_abs_diff_eq!(w.weights()[3], 0.05 / 0.35, epsilon = 1e-14);
        let sum: f64 = w.weights().iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exponential_weights_are_geometric() {
        let dx = 0.05;
        let w = build_weights(&Kernel::Exponential, dx, dx, 1e-12).unwrap();
        let e = (-1.0f64).exp();
        for (k, &x) in w.weights().iter().enumerate() {
            assert_abs_diff_eq!(x, (1.0 - e) * e.powi(k as i32), epsilon = 1e-15);
        }
        // geometric series: Σ_{k<K} (1-e^-1) e^-k = 1 - e^-K
        let k = w.len() as i32;
        assert_abs_diff_eq!(w.truncation_tail(), e.powi(k), epsilon = 1e-20);
        assert!(w.truncation_tail() < 1e-12);
        let sum: f64 = w.weights().iter().sum();
        assert_abs_diff_eq!(sum + w.truncation_tail(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weights_normalized_and_monotone() {
        for kernel in [Kernel::PiecewiseConstant, Kernel::Exponential, Kernel::Linear, sample_tabulated()] {
            for (eps, dx) in [(0.1, 0.01), (0.37, 0.013), (0.05, 0.05), (1.0, 0.003)] {
                let w = build_weights(&kernel, eps, dx, 1e-12).unwrap();
                let sum: f64 = w.weights().iter().sum();
                assert_abs_diff_eq!(sum + w.truncation_tail(), 1.0, epsilon = 1e-12);
                assert!(w.weights().iter().all(|&x| x >= 0.0));
                assert!(
                    w.weights().windows(2).all(|p| p[1] <= p[0] + 1e-15),
                    "{} eps={eps} dx={dx}",
                    kernel.name()
                );
            }
        }
    }

    #[test]
    fn weights_match_quadrature() {
        let kernel = sample_tabulated();
        let (eps, dx) = (0.3, 0.07);
        let w = build_weights_shifted(&kernel, eps, dx, 1e-12, 0.5).unwrap();
        for k in 0..w.len() {
            let (lo, hi) = w.offset_interval(k);
            let q = simpson(|s| kernel.density(-s / eps) / eps, lo, hi, 2000);
            assert_abs_diff_eq!(w.weights()[k], q, epsilon = 1e-6);
        }
    }

    #[test]
    fn support_cap_is_enforced() {
        let err = build_weights(&Kernel::Exponential, 10.0, 1e-6, 1e-12).unwrap_err();
        assert!(matches!(err, Error::KernelSupportTooWide { .. }));
        assert!(build_weights(&Kernel::Exponential, 0.1, 0.01, 1e-6).is_err());
    }

    #[test]
    fn convolve_constant_is_mass_times_constant() {
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        for kernel in [Kernel::PiecewiseConstant, Kernel::Exponential, Kernel::Linear] {
            let w = build_weights(&kernel, 0.2, g.dx(), 1e-12).unwrap();
            let u = GridFunction::constant(g, 0.7, Extension::Periodic).unwrap();
            let out = convolve(&u, &w).unwrap();
            for &v in out.values() {
                assert_abs_diff_eq!(v, 0.7 * (1.0 - w.truncation_tail()), epsilon = 1e-14);
            }
            let one = GridFunction::constant(g, 1.0, Extension::Periodic).unwrap();
            let out = convolve(&one, &w).unwrap();
            for &v in out.values() {
                assert_abs_diff_eq!(v, 1.0 - w.truncation_tail(), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn constant_kernel_step_gives_ramp() {
        // w(x) = (1/ε)∫_x^{x+ε} 𝟙_{y≥0} dy = clamp(x/ε + 1, 0, 1)
        let g = Grid::new(-2.0, 2.0, 400).unwrap();
        let u = GridFunction::from_antiderivative(g, Extension::ConstantLeftRight, |x| x.max(0.0))
            .unwrap();
        let w = build_weights_shifted(&Kernel::PiecewiseConstant, 1.0, g.dx(), 1e-12, 0.5).unwrap();
        let out = convolve(&u, &w).unwrap();
        for (j, &v) in out.values().iter().enumerate() {
            let x = g.center(j);
            let exact = (x + 1.0).clamp(0.0, 1.0);
            assert!((v - exact).abs() <= g.dx(), "x={x} v={v} exact={exact}");
        }
    }

    #[test]
    fn exponential_kernel_step_gives_exponential() {
        let eps = 0.3;
        let g = Grid::new(-3.0, 1.0, 800).unwrap();
        let u = GridFunction::from_antiderivative(g, Extension::ConstantLeftRight, |x| x.max(0.0))
            .unwrap();
        let w = build_weights_shifted(&Kernel::Exponential, eps, g.dx(), 1e-12, 0.5).unwrap();
        let out = convolve(&u, &w).unwrap();
        for (j, &v) in out.values().iter().enumerate() {
            let x = g.center(j);
            let exact = (x / eps).exp().min(1.0);
            assert!((v - exact).abs() <= g.dx(), "x={x}");
        }
    }

    #[test]
    fn fast_paths_agree_with_direct() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for ext in [Extension::Zero, Extension::ConstantLeftRight, Extension::Periodic] {
            let g = Grid::new(-1.0, 1.0, 1024).unwrap();
            let u = GridFunction::new(g, (0..1024).map(|_| rng.gen()).collect(), ext).unwrap();
            for shift in [0.0, 0.5] {
                for eps in [0.05, 0.1234, 0.4, 3.0] {
                    for kernel in [Kernel::PiecewiseConstant, Kernel::Exponential] {
                        let w = build_weights_shifted(&kernel, eps, g.dx(), 1e-12, shift).unwrap();
                        let path = select_path(&w);
                        assert_ne!(path, ConvolutionPath::Direct);
                        let fast = convolve_with(&u, &w, path).unwrap();
                        let direct = convolve_with(&u, &w, ConvolutionPath::Direct).unwrap();
                        let diff = fast
                            .values()
                            .iter()
                            .zip(direct.values())
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        assert!(diff <= 1e-12, "{} eps={eps} shift={shift}: {diff}", kernel.name());
                    }
                }
            }
        }
    }

    #[test]
    fn convolve_rejects_spacing_mismatch() {
        let g = Grid::new(0.0, 1.0, 10).unwrap();
        let u = GridFunction::constant(g, 0.5, Extension::Zero).unwrap();
        let w = build_weights(&Kernel::Linear, 0.3, 0.05, 1e-12).unwrap();
        assert!(matches!(convolve(&u, &w), Err(Error::SpacingMismatch { .. })));
    }

    #[test]
    fn growth_ratios() {
        assert_eq!(kernel_growth_ratio(&Kernel::Exponential), Some(1.0));
        assert_eq!(kernel_growth_ratio(&Kernel::PiecewiseConstant), None);
        assert_eq!(kernel_growth_ratio(&Kernel::Linear), Some(1.0));
        // sampled oracle: inf of γ'/γ on the open support
        let lin = Kernel::Linear;
        let sampled = (1..10_000)
            .map(|i| -1.0 + i as f64 / 10_000.0)
            .map(|z| lin.derivative(z) / lin.density(z))
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(sampled, 1.0, epsilon = 1e-3);
        let flat = Kernel::Tabulated(TabulatedKernel::new(vec![-1.0, -0.5, 0.0], vec![1.0, 1.0, 2.0]).unwrap());
        assert_eq!(kernel_growth_ratio(&flat), None);
    }

    #[test]
    fn k_gamma_linear_vanishes() {
        for delta in [0.1, 1.0, 2.0] {
            for m in [1.0, 2.0, 10.0] {
                assert_eq!(k_gamma(&Kernel::Linear, delta, m).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn k_gamma_exponential() {
        // {γ' < δ} = {s < ln δ}; with δ = ε and M = -ln ε the value is ε.
        for eps in [0.1, 0.01, 1e-4] {
            let v = k_gamma(&Kernel::Exponential, eps, -f64::ln(eps)).unwrap();
            assert_abs_diff_eq!(v, eps, epsilon = 1e-15);
        }
        // with δ = 1 every s < 0 has γ'(s) < 1, so the whole mass counts
        assert_abs_diff_eq!(k_gamma(&Kernel::Exponential, 1.0, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn k_gamma_quadrature_oracle() {
        let kernels = [Kernel::Exponential, Kernel::Linear, sample_tabulated()];
        for kernel in kernels {
            for (delta, m) in [(0.5, 0.7), (1.5, 1.2), (0.05, 3.0)] {
                let n = 400_000;
                let a = -40.0;
                let h = -a / n as f64;
                let mut q = 0.0;
                for i in 0..n {
                    let s = a + (i as f64 + 0.5) * h;
                    if s <= -m || kernel.derivative(s) < delta {
                        q += kernel.density(s) * h;
                    }
                }
                let v = k_gamma(&kernel, delta, m).unwrap();
                assert_abs_diff_eq!(v, q, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn k_gamma_monotone_towards_zero() {
        for kernel in [Kernel::Exponential, Kernel::Linear, sample_tabulated(), Kernel::PiecewiseConstant] {
            let mut prev = f64::INFINITY;
            for i in 0..30 {
                let delta = 0.5f64.powi(i);
                let m = 1.0 + i as f64;
                let v = k_gamma(&kernel, delta, m).unwrap();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
            if kernel.strictly_increasing_on_support() {
                assert!(prev < 1e-6, "{}", kernel.name());
            }
        }
    }

    #[test]
    fn derivative_weights_constant_kernel_is_single_atom() {
        let dx = 0.01;
        let eps = 0.1;
        let w = build_weights_shifted(&Kernel::PiecewiseConstant, eps, dx, 1e-12, 0.5).unwrap();
        let d = w.derivative_weights();
        let nonzero: Vec<usize> = (0..d.len()).filter(|&k| d[k] != 0.0).collect();
        assert_eq!(nonzero, vec![10]);
        assert_abs_diff_eq!(d[10], 1.0 / eps, epsilon = 1e-12);
    }

    #[test]
    fn derivative_weights_exponential_equal_weights_over_eps() {
        let eps = 0.2;
        let w = build_weights_shifted(&Kernel::Exponential, eps, 0.01, 1e-12, 0.5).unwrap();
        let d = w.derivative_weights();
        for (a, b) in d.iter().zip(w.weights()) {
            assert_abs_diff_eq!(*a, b / eps, epsilon = 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn convolution_is_monotone(
                pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 8..64),
                eps in 0.05f64..0.6,
                which in 0usize..3,
            ) {
                let n = pairs.len();
                let g = Grid::new(0.0, 1.0, n).unwrap();
                let kernel = [Kernel::PiecewiseConstant, Kernel::Exponential, Kernel::Linear][which].clone();
                let w = build_weights_shifted(&kernel, eps, g.dx(), 1e-12, 0.5).unwrap();
                let lo: Vec<f64> = pairs.iter().map(|p| p.0.min(p.1)).collect();
                let hi: Vec<f64> = pairs.iter().map(|p| p.0.max(p.1)).collect();
                let cl = convolve(&GridFunction::new(g, lo.clone(), Extension::ConstantLeftRight).unwrap(), &w).unwrap();
                let ch = convolve(&GridFunction::new(g, hi, Extension::ConstantLeftRight).unwrap(), &w).unwrap();
                for (a, b) in cl.values().iter().zip(ch.values()) {
                    prop_assert!(a <= &(b + 1e-15));
                }
                let (mn, mx) = lo.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                for &v in cl.values() {
                    prop_assert!(v >= mn - w.truncation_tail() - 1e-14 && v <= mx + 1e-14);
                }
            }
        }
    }
}
