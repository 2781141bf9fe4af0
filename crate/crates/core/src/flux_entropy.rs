//! Velocities, the flux `f(ξ) = ξ V(ξ)`, and the entropy calculus built on
//! them: `q`, `I_η`, `H_η`, `P` and `Q`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on states before they count as out of `[0, 1]`.
pub const STATE_TOL: f64 = 1e-12;

/// Clamps floating-point drift back into `[0, 1]`; larger excursions are errors.
pub fn clamp_state(x: f64) -> Result<f64> {
    if !x.is_finite() || !(-STATE_TOL..=1.0 + STATE_TOL).contains(&x) {
        return Err(Error::StateOutOfRange(x));
    }
    Ok(x.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Velocity {
    /// `V(ξ) = 1 − ξ`
    Greenshields,
    /// `V(ξ) = (1 − ξ)²`
    Quadratic,
    Tabulated(TabulatedVelocity),
}

/// Piecewise-linear, non-increasing, nonnegative velocity on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVelocity")]
pub struct TabulatedVelocity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawVelocity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawVelocity> for TabulatedVelocity {
    type Error = Error;

    fn try_from(raw: RawVelocity) -> Result<Self> {
        TabulatedVelocity::new(raw.breakpoints, raw.values)
    }
}

impl TabulatedVelocity {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidVelocity(m.to_string()));
        if breakpoints.len() != values.len() || breakpoints.len() < 2 {
            return bad("need matching breakpoints and values, at least two");
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return bad("non-finite entry");
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return bad("breakpoints must span exactly [0, 1]");
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return bad("breakpoints must be strictly increasing");
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return bad("velocity must be non-increasing");
        }
        if values.iter().any(|&v| v < 0.0) {
            return bad("velocity must be nonnegative");
        }
        Ok(Self { breakpoints, values })
    }

    /// Two-column text `ξ V(ξ)`, whitespace or comma separated, `#` comments.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            if cols.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected 2 columns", i + 1)));
            }
            xs.push(cols[0]);
            vs.push(cols[1]);
        }
        Self::new(xs, vs)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        i.clamp(1, self.breakpoints.len() - 1) - 1
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.breakpoints[i + 1] - self.breakpoints[i])
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        self.values[i] + self.slope(i) * (x - self.breakpoints[i])
    }

    fn integral(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.breakpoints.len() - 1 {
            let (b0, b1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if x <= b0 {
                break;
            }
            let hi = x.min(b1);
            acc += 0.5 * (self.values[i] + self.eval(hi)) * (hi - b0);
        }
        acc
    }
}

impl Velocity {
    pub fn name(&self) -> &'static str {
        match self {
            Velocity::Greenshields => "greenshields",
            Velocity::Quadratic => "quadratic",
            Velocity::Tabulated(_) => "tabulated",
        }
    }

    /// `greenshields | quadratic`, otherwise a path to a tabulated file.
    pub fn from_spec(spec: &str) -> Result<Self> {
        match spec {
            "greenshields" => Ok(Velocity::Greenshields),
            "quadratic" => Ok(Velocity::Quadratic),
            path => Ok(Velocity::Tabulated(TabulatedVelocity::from_file(path)?)),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Velocity::Greenshields => 1.0 - x,
            Velocity::Quadratic => (1.0 - x) * (1.0 - x),
            Velocity::Tabulated(t) => t.eval(x),
        }
    }

    /// `V'`; at tabulated breakpoints the right-hand slope.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Velocity::Greenshields => -1.0,
            Velocity::Quadratic => -2.0 * (1.0 - x),
            Velocity::Tabulated(t) => t.slope(t.segment(x)),
        }
    }

    /// `∫_0^x V`.
    pub fn integral(&self, x: f64) -> f64 {
        match self {
            Velocity::Greenshields => x - 0.5 * x * x,
            Velocity::Quadratic => (1.0 - (1.0 - x).powi(3)) / 3.0,
            Velocity::Tabulated(t) => t.integral(x),
        }
    }

    /// `‖V'‖_∞` on `[0, 1]`.
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            Velocity::Greenshields => 1.0,
            Velocity::Quadratic => 2.0,
            Velocity::Tabulated(t) => (0..t.breakpoints.len() - 1)
                .map(|i| t.slope(i).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Largest `v ≥ 0` with `V' ≤ −v` on `[0, 1]`.
    pub fn v_star(&self) -> f64 {
        match self {
            Velocity::Greenshields => 1.0,
            Velocity::Quadratic => 0.0,
            Velocity::Tabulated(t) => (0..t.breakpoints.len() - 1)
                .map(|i| -t.slope(i))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
        }
    }

    /// `‖V‖_∞ = V(0)` for a non-increasing, nonnegative velocity.
    pub fn max_value(&self) -> f64 {
        self.eval(0.0)
    }

    /// Points where `V` is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Velocity::Tabulated(t) => t.breakpoints[1..t.breakpoints.len() - 1].to_vec(),
            _ => Vec::new(),
        }
    }

    /// Sampled check of `V' ≤ 0` and `V ≥ 0` on `[0, 1]`.
    pub fn check(&self) -> Result<()> {
        for i in 0..=4096 {
            let x = i as f64 / 4096.0;
            if self.eval(x) < 0.0 || self.derivative(x) > 0.0 {
                return Err(Error::InvalidVelocity(format!(
                    "{} fails monotonicity or sign at {x}",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flux {
    pub velocity: Velocity,
    pub genuinely_nonlinear: bool,
}

impl Flux {
    pub fn new(velocity: Velocity) -> Self {
        let genuinely_nonlinear = match &velocity {
            Velocity::Greenshields | Velocity::Quadratic => true,
            Velocity::Tabulated(t) => (0..t.breakpoints.len() - 1).all(|i| t.slope(i) != 0.0),
        };
        Self {
            velocity,
            genuinely_nonlinear,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        x * self.velocity.eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.velocity.eval(x) + x * self.velocity.derivative(x)
    }

    /// `max |f'|` over `[0, 1]`.
    pub fn max_speed(&self) -> f64 {
        match &self.velocity {
            // f' = 1 − 2ξ
            Velocity::Greenshields => 1.0,
            // f' = (1 − ξ)(1 − 3ξ), extremes at 0 and 2/3
            Velocity::Quadratic => 1.0,
            // f' is affine on each segment, so check both ends with that segment's slope
            Velocity::Tabulated(t) => (0..t.breakpoints.len() - 1)
                .flat_map(|i| {
                    let beta = t.slope(i);
                    [i, i + 1].map(|k| (t.values[k] + t.breakpoints[k] * beta).abs())
                })
                .fold(0.0, f64::max),
        }
    }

    /// Interior points of `[0, 1]` where `f'` vanishes or jumps.
    pub fn critical_points(&self) -> Vec<f64> {
        match &self.velocity {
            Velocity::Greenshields => vec![0.5],
            Velocity::Quadratic => vec![1.0 / 3.0, 1.0],
            Velocity::Tabulated(t) => {
                let mut pts = t.breakpoints.clone();
                for i in 0..t.breakpoints.len() - 1 {
                    let beta = t.slope(i);
                    let alpha = t.values[i] - beta * t.breakpoints[i];
                    if beta != 0.0 {
                        let xs = -alpha / (2.0 * beta);
                        if xs > t.breakpoints[i] && xs < t.breakpoints[i + 1] {
                            pts.push(xs);
                        }
                    }
                }
                pts
            }
        }
    }
}

/// Exact Riemann flux: `min f` on `[a, b]` if `a ≤ b`, else `max f` on `[b, a]`.
pub fn godunov_flux(flux: &Flux, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let candidates = flux
        .critical_points()
        .into_iter()
        .filter(|&c| c > lo && c < hi)
        .chain([a, b])
        .map(|x| flux.eval(x));
    if a <= b {
        candidates.fold(f64::INFINITY, f64::min)
    } else {
        candidates.fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(V(a) − V(b))²` and `2‖V'‖_∞ ∫_a^b (V(z) − V(b)) dz`.
pub fn ineq_v_gap(velocity: &Velocity, a: f64, b: f64) -> Result<(f64, f64)> {
    let (a, b) = (clamp_state(a)?, clamp_state(b)?);
    let vb = velocity.eval(b);
    let lhs = (velocity.eval(a) - vb).powi(2);
    let integral = velocity.integral(b) - velocity.integral(a) - vb * (b - a);
    Ok((lhs, 2.0 * velocity.lipschitz_constant() * integral))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Entropy {
    /// `ξ²/2`
    Quadratic,
    /// `ξ^p`, `p ≥ 2`
    Power { p: f64 },
    /// `e^ξ`
    Exponential,
    /// `ξ V(ξ)`; not convex in general
    Flux,
}

impl Entropy {
    pub fn name(&self) -> String {
        match self {
            Entropy::Quadratic => "quadratic".into(),
            Entropy::Power { p } => format!("power_{p}"),
            Entropy::Exponential => "exponential".into(),
            Entropy::Flux => "flux".into(),
        }
    }
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * f(m + r * x))
        .sum::<f64>()
        * r
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Antiderivative vanishing at 0, tabulated on Gauss–Legendre panels.
#[derive(Debug, Clone)]
struct Antiderivative {
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Antiderivative {
    fn build(f: &impl Fn(f64) -> f64, nodes: Vec<f64>) -> Self {
        let mut cumulative = vec![0.0];
        for w in nodes.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + gauss_legendre(f, w[0], w[1]));
        }
        Self { nodes, cumulative }
    }

    fn eval(&self, f: &impl Fn(f64) -> f64, x: f64) -> f64 {
        let i = self.nodes.partition_point(|&b| b <= x).clamp(1, self.nodes.len() - 1) - 1;
        self.cumulative[i] + gauss_legendre(f, self.nodes[i], x)
    }
}

/// An entropy `η` together with the objects derived from it under `V`.
#[derive(Debug, Clone)]
pub struct EntropyPair {
    entropy: Entropy,
    velocity: Velocity,
    flux: Flux,
    q: Antiderivative,
    i_eta: Antiderivative,
    big_q: Antiderivative,
    dd_eta_sup: f64,
}

impl EntropyPair {
    pub fn new(entropy: Entropy, velocity: Velocity) -> Result<Self> {
        if let Entropy::Power { p } = entropy {
            if !(p >= 2.0 && p.is_finite()) {
                return Err(Error::InvalidEntropy(format!("power entropy needs p ≥ 2, got {p}")));
            }
        }
        if matches!(entropy, Entropy::Flux) && matches!(velocity, Velocity::Tabulated(_)) {
            return Err(Error::InvalidEntropy(
                "flux entropy needs a C² velocity".into(),
            ));
        }
        let mut nodes: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        nodes.extend(velocity.kinks());
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let flux = Flux::new(velocity.clone());
        let mut pair = Self {
            entropy,
            velocity,
            flux,
            q: Antiderivative { nodes: vec![0.0, 1.0], cumulative: vec![0.0, 0.0] },
            i_eta: Antiderivative { nodes: vec![0.0, 1.0], cumulative: vec![0.0, 0.0] },
            big_q: Antiderivative { nodes: vec![0.0, 1.0], cumulative: vec![0.0, 0.0] },
            dd_eta_sup: 0.0,
        };
        pair.q = Antiderivative::build(&|x| pair.q_integrand(x), nodes.clone());
        pair.i_eta = Antiderivative::build(&|x| pair.i_integrand(x), nodes.clone());
        pair.big_q = Antiderivative::build(&|x| pair.big_q_integrand(x), nodes);
        pair.dd_eta_sup = (0..=4096)
            .map(|i| pair.dd_eta(i as f64 / 4096.0).abs())
            .fold(0.0, f64::max);
        Ok(pair)
    }

    pub fn entropy(&self) -> Entropy {
        self.entropy
    }

    pub fn velocity(&self) -> &Velocity {
        &self.velocity
    }

    pub fn flux(&self) -> &Flux {
        &self.flux
    }

    pub fn convex(&self) -> bool {
        !matches!(self.entropy, Entropy::Flux)
    }

    pub fn eta(&self, x: f64) -> f64 {
        match self.entropy {
            Entropy::Quadratic => 0.5 * x * x,
            Entropy::Power { p } => x.max(0.0).powf(p),
            Entropy::Exponential => x.exp(),
            Entropy::Flux => x * self.velocity.eval(x),
        }
    }

    pub fn d_eta(&self, x: f64) -> f64 {
        match self.entropy {
            Entropy::Quadratic => x,
            Entropy::Power { p } => p * x.max(0.0).powf(p - 1.0),
            Entropy::Exponential => x.exp(),
            Entropy::Flux => self.flux.derivative(x),
        }
    }

    pub fn dd_eta(&self, x: f64) -> f64 {
        match self.entropy {
            Entropy::Quadratic => 1.0,
            Entropy::Power { p } => p * (p - 1.0) * x.max(0.0).powf(p - 2.0),
            Entropy::Exponential => x.exp(),
            Entropy::Flux => match self.velocity {
                Velocity::Greenshields => -2.0,
                Velocity::Quadratic => 6.0 * x - 4.0,
                Velocity::Tabulated(_) => unreachable!("rejected in constructor"),
            },
        }
    }

    /// `‖η''‖_∞` on `[0, 1]`, sampled.
    pub fn dd_eta_sup(&self) -> f64 {
        self.dd_eta_sup
    }

    fn q_integrand(&self, x: f64) -> f64 {
        self.d_eta(x) * self.flux.derivative(x)
    }

    fn i_integrand(&self, x: f64) -> f64 {
        self.dd_eta(x) * self.velocity.eval(x)
    }

    fn big_q_integrand(&self, x: f64) -> f64 {
        self.p(x) * self.velocity.derivative(x)
    }

    /// Entropy flux, `q' = η' f'`, `q(0) = 0`.
    pub fn q(&self, x: f64) -> f64 {
        self.q.eval(&|s| self.q_integrand(s), x)
    }

    /// `I_η' = η'' V`, `I_η(0) = 0`.
    pub fn i_eta(&self, x: f64) -> f64 {
        self.i_eta.eval(&|s| self.i_integrand(s), x)
    }

    /// `P(ξ) = ξ η'(ξ) − η(ξ)`.
    pub fn p(&self, x: f64) -> f64 {
        x * self.d_eta(x) - self.eta(x)
    }

    /// `Q' = P V'`, `Q(0) = 0`.
    pub fn big_q(&self, x: f64) -> f64 {
        self.big_q.eval(&|s| self.big_q_integrand(s), x)
    }

    /// `H_η(a|b) = ∫_a^b η''(z) (V(z) − V(b)) dz`.
    pub fn h_eta(&self, a: f64, b: f64) -> Result<f64> {
        let (a, b) = (clamp_state(a)?, clamp_state(b)?);
        if a == b {
            return Ok(0.0);
        }
        if matches!(self.entropy, Entropy::Quadratic) {
            if let Velocity::Greenshields = self.velocity {
                return Ok(0.5 * (b - a) * (b - a));
            }
            let v = &self.velocity;
            return Ok(v.integral(b) - v.integral(a) - v.eval(b) * (b - a));
        }
        let vb = self.velocity.eval(b);
        Ok(self.i_eta(b) - self.i_eta(a) - vb * (self.d_eta(b) - self.d_eta(a)))
    }

    /// `H_η(a|b)` by adaptive quadrature, for cross-checks.
    pub fn h_eta_quadrature(&self, a: f64, b: f64) -> Result<f64> {
        let (a, b) = (clamp_state(a)?, clamp_state(b)?);
        let vb = self.velocity.eval(b);
        let f = |z: f64| self.dd_eta(z) * (self.velocity.eval(z) - vb);
        let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut pts = vec![lo];
        pts.extend(self.velocity.kinks().into_iter().filter(|&k| k > lo && k < hi));
        pts.push(hi);
        Ok(sign * pts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-13)).sum::<f64>())
    }
}
