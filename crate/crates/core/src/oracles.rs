//! Brute-force checks of the rearrangement and bathtub inequalities, and a
//! seeded suite that also exercises the entropy calculus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux_entropy::{adaptive_simpson, ineq_v_gap, Entropy, EntropyPair, TabulatedVelocity, Velocity};

/// Nonnegative values on unit cells, zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProfile {
    values: Vec<f64>,
}

impl DiscreteProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::NegativeProfile { index, value });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Symmetric decreasing rearrangement: sorted descending, placed
    /// center-out alternating right and left.
    pub fn rearranged(&self) -> Vec<f64> {
        let n = self.values.len();
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut out = vec![0.0; n];
        for (rank, pos) in center_out(n).into_iter().enumerate() {
            out[pos] = sorted[rank];
        }
        out
    }
}

fn center_out(n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let c = (n - 1) / 2;
    let mut order = vec![c];
    for d in 1..n {
        if c + d < n {
            order.push(c + d);
        }
        if d <= c {
            order.push(c - d);
        }
        if order.len() == n {
            break;
        }
    }
    order
}

/// `(Σ f g, Σ f* g*)`; the shorter profile is zero-padded.
pub fn rearrangement_pairing(f: &DiscreteProfile, g: &DiscreteProfile) -> (f64, f64) {
    let n = f.values.len().max(g.values.len());
    let pad = |p: &DiscreteProfile| {
        let mut v = p.values.clone();
        v.resize(n, 0.0);
        DiscreteProfile { values: v }
    };
    let (f, g) = (pad(f), pad(g));
    let lhs = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
    let rhs = f.rearranged().iter().zip(g.rearranged()).map(|(a, b)| a * b).sum();
    (lhs, rhs)
}

/// `Σ_i F(h_i)(h_i − h_{i+shift})` over all integers, `h` zero outside.
pub fn shifted_monotone_positivity(h: &DiscreteProfile, f: impl Fn(f64) -> f64, shift: usize) -> Result<f64> {
    if shift == 0 {
        return Err(Error::InvalidArgument("shift must be positive".into()));
    }
    let v = &h.values;
    let (lo, hi) = v
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if hi > lo {
        let mut pts: Vec<f64> = (0..=1000).map(|i| lo + (hi - lo) * i as f64 / 1000.0).collect();
        pts.extend(v.iter().copied());
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        for p in pts.windows(2) {
            // near-coincident samples may round to equal or slightly smaller values
            let strict = p[1] - p[0] > 1e-9;
            let (a, b) = (f(p[0]), f(p[1]));
            if !(b > a || (!strict && b >= a - 1e-12 * (1.0 + a.abs()))) {
                return Err(Error::NonMonotoneMap(p[0]));
            }
        }
    }
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= v.len() {
            0.0
        } else {
            v[i as usize]
        }
    };
    let s = shift as isize;
    Ok((-s..v.len() as isize)
        .map(|i| f(at(i)) * (at(i) - at(i + s)))
        .sum())
}

/// The proof's test map `F(ξ) = ξ²/δ − max(ξ, δ) + δ`.
pub fn proof_map(delta: f64) -> impl Fn(f64) -> f64 {
    move |x| x * x / delta - x.max(delta) + delta
}

/// `(min, max)` of `∫_0^L ψ h` over `0 ≤ h ≤ M`, `∫ h = m`, for
/// non-decreasing `ψ`: the bang-bang profiles at the left and right ends.
pub fn bathtub_extremes(psi: impl Fn(f64) -> f64, l: f64, big_m: f64, m: f64) -> Result<(f64, f64)> {
    if !(l > 0.0 && big_m >= 0.0) {
        return Err(Error::InvalidArgument(format!("need L > 0 and M ≥ 0, got ({l}, {big_m})")));
    }
    let max = big_m * l;
    if !(m >= 0.0 && m <= max * (1.0 + 1e-12)) {
        return Err(Error::InfeasibleMass { mass: m, max });
    }
    if m == 0.0 {
        return Ok((0.0, 0.0));
    }
    let width = (m / big_m).min(l);
    let tol = 1e-13;
    let lo = big_m * adaptive_simpson(&psi, 0.0, width, tol);
    let hi = big_m * adaptive_simpson(&psi, l - width, l, tol);
    Ok((lo, hi))
}

/// Random `h` on `n` equal cells of `[0, L]` with `0 ≤ h ≤ M`, `∫ h = m`.
pub fn random_feasible_profile(rng: &mut impl Rng, n: usize, l: f64, big_m: f64, m: f64) -> Vec<f64> {
    let dx = l / n as f64;
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(2)).collect();
    let mass = |lam: f64| raw.iter().map(|r| (lam * r).min(big_m)).sum::<f64>() * dx;
    let (mut a, mut b) = (0.0, 1.0);
    while mass(b) < m && b < 1e12 {
        b *= 2.0;
    }
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if mass(c) < m {
            a = c;
        } else {
            b = c;
        }
    }
    let mut h: Vec<f64> = raw.iter().map(|r| (b * r).min(big_m)).collect();
    // distribute the bisection residue over unsaturated cells
    let free: Vec<usize> = (0..n).filter(|&i| h[i] < big_m).collect();
    let residue = m - h.iter().sum::<f64>() * dx;
    if !free.is_empty() {
        let add = residue / (free.len() as f64 * dx);
        for i in free {
            h[i] = (h[i] + add).clamp(0.0, big_m);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest amount by which an inequality failed (0 if none).
    pub worst: f64,
}

impl OracleCheck {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            violations: 0,
            worst: 0.0,
        }
    }

    /// Records a case with `excess > 0` meaning a violation.
    fn record(&mut self, excess: f64) {
        self.cases += 1;
        if !(excess <= 0.0) {
            self.violations += 1;
            self.worst = self.worst.max(if excess.is_nan() { f64::INFINITY } else { excess });
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(OracleCheck::passed)
    }

    /// Fixed-format text, one line per check.
    pub fn render(&self) -> String {
        let mut out = format!("oracle suite seed={}\n", self.seed);
        for c in &self.checks {
            out += &format!(
                "{:<6} {:<40} cases={:<6} violations={:<4} worst={:.3e}\n",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.cases,
                c.violations,
                c.worst
            );
        }
        out
    }
}

fn random_profile(rng: &mut ChaCha8Rng, len: usize) -> DiscreteProfile {
    let values = (0..len)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
        .collect();
    DiscreteProfile { values }
}

fn suite_velocities() -> Vec<Velocity> {
    vec![
        Velocity::Greenshields,
        Velocity::Quadratic,
        Velocity::Tabulated(
            TabulatedVelocity::new(vec![0.0, 0.25, 0.6, 1.0], vec![1.0, 0.85, 0.3, 0.0])
                .expect("valid table"),
        ),
    ]
}

/// Runs every randomized check with the given seed.
pub fn run_oracle_suite(seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut hl = OracleCheck::new("hardy_littlewood_pairing");
    for _ in 0..1000 {
        let (lf, lg) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let (f, g) = (random_profile(&mut rng, lf), random_profile(&mut rng, lg));
        let (lhs, rhs) = rearrangement_pairing(&f, &g);
        hl.record(lhs - rhs - 1e-12);
    }
    checks.push(hl);

    let mut smp = OracleCheck::new("shifted_monotone_positivity");
    let maps: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|x| x),
        Box::new(|x| x * x * x + 0.1 * x),
        Box::new(|x: f64| x.exp()),
        Box::new(|x: f64| (x + 0.5).ln()),
    ];
    for i in 0..1000 {
        let len = rng.gen_range(1..=12);
        let h = random_profile(&mut rng, len);
        let shift = rng.gen_range(1..=4);
        let v = shifted_monotone_positivity(&h, &maps[i % maps.len()], shift)?;
        smp.record(-v - 1e-12);
    }
    checks.push(smp);

    let mut pm = OracleCheck::new("shifted_positivity_proof_map");
    for _ in 0..1000 {
        let delta = if rng.gen_bool(0.5) { 0.3 } else { rng.gen_range(0.01..1.0) };
        let h = DiscreteProfile {
            values: (0..8).map(|_| rng.gen::<f64>()).collect(),
        };
        let shift = rng.gen_range(1..=4);
        let v = shifted_monotone_positivity(&h, proof_map(delta), shift)?;
        pm.record(-v - 1e-12);
    }
    checks.push(pm);

    let mut bt = OracleCheck::new("bathtub_bracket");
    let psis: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|z| z),
        Box::new(|z| z * z),
        Box::new(|z: f64| z.exp()),
        Box::new(|z: f64| (z - 0.5).max(0.0)),
    ];
    for i in 0..1000 {
        let psi = &psis[i % psis.len()];
        let l = rng.gen_range(0.5..2.0);
        let big_m = rng.gen_range(0.2..1.5);
        let m = rng.gen::<f64>() * big_m * l;
        let n = 64;
        let h = random_feasible_profile(&mut rng, n, l, big_m, m);
        let dx = l / n as f64;
        let value: f64 = h
            .iter()
            .enumerate()
            .map(|(j, hj)| hj * adaptive_simpson(psi, j as f64 * dx, (j + 1) as f64 * dx, 1e-14))
            .sum();
        let (lo, hi) = bathtub_extremes(psi, l, big_m, m)?;
        let tol = 1e-9;
        bt.record((lo - value - tol).max(value - hi - tol));
    }
    checks.push(bt);

    let entropies = [Entropy::Quadratic, Entropy::Power { p: 3.0 }, Entropy::Exponential];
    let mut h_zero = OracleCheck::new("h_eta_diagonal_zero");
    let mut h_pos = OracleCheck::new("h_eta_nonnegative");
    let mut h_bound = OracleCheck::new("h_eta_upper_bound");
    for e in entropies {
        let v = Velocity::Greenshields;
        let pair = EntropyPair::new(e, v.clone())?;
        let bound = pair.dd_eta_sup() * v.max_value();
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            let h = pair.h_eta(a, b)?;
            h_zero.record(pair.h_eta(b, b)?.abs());
            h_pos.record(-h - 1e-10);
            h_bound.record(h - bound - 1e-10);
        }
    }
    checks.extend([h_zero, h_pos, h_bound]);

    let mut iv = OracleCheck::new("ineq_v");
    for v in suite_velocities() {
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            let (lhs, rhs) = ineq_v_gap(&v, a, b)?;
            iv.record(lhs - rhs - 1e-10);
        }
    }
    checks.push(iv);

    Ok(OracleReport { seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(v: &[f64]) -> DiscreteProfile {
        DiscreteProfile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn profile_validation() {
        assert!(matches!(DiscreteProfile::new(vec![1.0, -0.1]), Err(Error::NegativeProfile { index: 1, .. })));
    }

    #[test]
    fn rearrangement_is_centered_and_unimodal() {
        let r = p(&[0.1, 0.5, 0.3, 0.9, 0.2]).rearranged();
        assert_eq!(r[2], 0.9);
        let peak = r.iter().cloned().fold(0.0, f64::max);
        let i = r.iter().position(|&x| x == peak).unwrap();
        assert!(r[..=i].windows(2).all(|w| w[0] <= w[1]));
        assert!(r[i..].windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(center_out(4), vec![1, 2, 0, 3]);
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(rearrangement_pairing(&p(&[1.0, 0.0]), &p(&[0.0, 1.0])), (0.0, 1.0));
        let f = p(&[0.3, 0.7, 0.1]);
        let (l, r) = rearrangement_pairing(&f, &f);
        assert_abs_diff_eq!(l, r, epsilon = 1e-15);
    }

    #[test]
    fn pairing_matches_brute_force_permutation_maximum() {
        // rhs equals the maximum over all relative orderings for short lists
        let f = [0.2, 0.9, 0.4, 0.0];
        let g = [0.5, 0.1, 0.8, 0.3];
        let mut best = f64::NEG_INFINITY;
        let mut idx = [0usize, 1, 2, 3];
        permute(&mut idx, 0, &mut |perm| {
            let s: f64 = (0..4).map(|i| f[i] * g[perm[i]]).sum();
            best = best.max(s);
        });
        let (_, rhs) = rearrangement_pairing(&p(&f), &p(&g));
        assert_abs_diff_eq!(rhs, best, epsilon = 1e-15);
    }

    fn permute(a: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
        if k == a.len() {
            f(a);
            return;
        }
        for i in k..a.len() {
            a.swap(k, i);
            permute(a, k + 1, f);
            a.swap(k, i);
        }
    }

    #[test]
    fn shifted_positivity_examples() {
        assert_eq!(shifted_monotone_positivity(&p(&[1.0, 0.0, 0.0]), |x| x, 1).unwrap(), 1.0);
        let c = shifted_monotone_positivity(&p(&[0.4; 5]), |x| x, 2).unwrap();
        assert!(c >= 0.0);
        assert!(matches!(
            shifted_monotone_positivity(&p(&[0.1, 0.9]), |x| -x, 1),
            Err(Error::NonMonotoneMap(_))
        ));
        let f = proof_map(0.3);
        assert_abs_diff_eq!(f(0.3), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(f(0.0), 0.0);
    }

    #[test]
    fn bathtub_examples() {
        let (lo, hi) = bathtub_extremes(|z| z, 1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(lo, 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.375, epsilon = 1e-12);
        assert_eq!(bathtub_extremes(|z| z, 1.0, 1.0, 0.0).unwrap(), (0.0, 0.0));
        let (lo, hi) = bathtub_extremes(|z| z * z, 2.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-12);
        assert_abs_diff_eq!(lo, 0.5 * 8.0 / 3.0, epsilon = 1e-12);
        assert!(matches!(bathtub_extremes(|z| z, 1.0, 1.0, 1.5), Err(Error::InfeasibleMass { .. })));
    }

    #[test]
    fn feasible_profiles_respect_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = rng.gen::<f64>() * 0.8;
            let h = random_feasible_profile(&mut rng, 32, 1.0, 0.8, m);
            assert!(h.iter().all(|&x| (0.0..=0.8).contains(&x)));
            assert_abs_diff_eq!(h.iter().sum::<f64>() / 32.0, m, epsilon = 1e-10);
        }
    }

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = run_oracle_suite(7).unwrap();
        assert!(a.passed(), "{}", a.render());
        let b = run_oracle_suite(7).unwrap();
        assert_eq!(a.render(), b.render());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hardy_littlewood(f in prop::collection::vec(0.0f64..1.0, 1..9), g in prop::collection::vec(0.0f64..1.0, 1..9)) {
                let (l, r) = rearrangement_pairing(&p(&f), &p(&g));
                prop_assert!(l <= r + 1e-12);
            }

            #[test]
            fn shifted_positivity(h in prop::collection::vec(0.0f64..1.0, 1..12), shift in 1usize..5, delta in 0.01f64..1.0) {
                let v = shifted_monotone_positivity(&p(&h), proof_map(delta), shift).unwrap();
                prop_assert!(v >= -1e-12);
            }

            #[test]
            fn bathtub_min_le_max(l in 0.1f64..3.0, big_m in 0.1f64..2.0, frac in 0.0f64..1.0) {
                let (lo, hi) = bathtub_extremes(|z: f64| z.exp(), l, big_m, frac * l * big_m).unwrap();
                prop_assert!(lo <= hi + 1e-12);
            }
        }
    }
}
