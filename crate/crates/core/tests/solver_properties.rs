use std::f64::consts::PI;

use nonlocal_lwr::grid::{l1_norm, Extension, Grid, GridFunction};
use nonlocal_lwr::kernels::{build_weights_shifted, convolve, DEFAULT_TAIL_TOL};
use nonlocal_lwr::{solve, Kernel, SolverConfig, Velocity};
use proptest::prelude::*;

fn kernels() -> [Kernel; 3] {
    [Kernel::PiecewiseConstant, Kernel::Exponential, Kernel::Linear]
}

fn riemann(g: Grid, ul: f64, ur: f64, ext: Extension) -> GridFunction {
    GridFunction::from_antiderivative(g, ext, |x| if x < 0.0 { ul * x } else { ur * x }).unwrap()
}

#[test]
fn non_increasing_data_stay_non_increasing() {
    let g = Grid::new(-2.0, 2.0, 400).unwrap();
    let ramp = GridFunction::from_antiderivative(g, Extension::ConstantLeftRight, |x| {
        // 0.8 on the left, 0.1 on the right, linear in between
        let y = x.clamp(-1.0, 1.0);
        0.8 * x.min(-1.0) + 0.1 * x.max(1.0) + 0.45 * y - 0.175 * y * y
    })
    .unwrap();
    for u0 in [riemann(g, 0.9, 0.1, Extension::ConstantLeftRight), ramp] {
        assert!(u0.values().windows(2).all(|p| p[1] <= p[0] + 1e-12));
        for kernel in kernels() {
            let cfg = SolverConfig { t_end: 0.5, ..Default::default() };
            let tr = solve(&u0, &kernel, 0.1, &Velocity::Greenshields, &cfg).unwrap();
            for s in &tr.snapshots {
                for f in [&s.u, &s.w] {
                    let rise = f.values().windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
                    assert!(rise <= 1e-12, "{} t={} rise {rise:e}", kernel.name(), s.t);
                }
            }
        }
    }
}

#[test]
fn smooth_data_self_converge_first_order() {
    for kernel in kernels() {
        let finals: Vec<GridFunction> = [128usize, 256, 512, 1024]
            .iter()
            .map(|&n| {
                let g = Grid::new(0.0, 2.0, n).unwrap();
                let u0 =
                    GridFunction::from_antiderivative(g, Extension::Periodic, |x| 0.5 * x - 0.3 * (PI * x).cos() / PI)
                        .unwrap();
                let cfg = SolverConfig { t_end: 0.25, record_every: usize::MAX, ..Default::default() };
                solve(&u0, &kernel, 0.2, &Velocity::Greenshields, &cfg).unwrap().last().u.clone()
            })
            .collect();
        let diffs: Vec<f64> = finals
            .windows(2)
            .map(|p| l1_norm(&p[1].coarsen(2).unwrap().zip_with(&p[0], |a, b| a - b).unwrap()))
            .collect();
        for d in diffs.windows(2) {
            let order = (d[0] / d[1]).log2();
            assert!(order >= 0.8, "{}: order {order}", kernel.name());
        }
    }
}

fn profile(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, n)
}

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        Just(Kernel::PiecewiseConstant),
        Just(Kernel::Exponential),
        Just(Kernel::Linear),
    ]
}

fn velocity_strategy() -> impl Strategy<Value = Velocity> {
    prop_oneof![Just(Velocity::Greenshields), Just(Velocity::Quadratic)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn maximum_principle_on_random_data(
        values in profile(64),
        kernel in kernel_strategy(),
        velocity in velocity_strategy(),
        eps_cells in 4.0..20.0f64,
        ext in prop_oneof![Just(Extension::Zero), Just(Extension::ConstantLeftRight), Just(Extension::Periodic)],
    ) {
        let g = Grid::new(0.0, 1.0, 64).unwrap();
        let u0 = GridFunction::new(g, values, ext).unwrap();
        let cfg = SolverConfig { t_end: 0.2, ..Default::default() };
        let tr = solve(&u0, &kernel, eps_cells * g.dx(), &velocity, &cfg).unwrap();
        for s in &tr.snapshots {
            prop_assert!(s.u.min() >= 0.0 && s.u.max() <= 1.0);
            prop_assert!(s.w.min() >= -1e-12 && s.w.max() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn periodic_mass_is_conserved(values in profile(50), kernel in kernel_strategy(), eps in 0.1..0.5f64) {
        let g = Grid::new(0.0, 1.0, 50).unwrap();
        let u0 = GridFunction::new(g, values, Extension::Periodic).unwrap();
        let cfg = SolverConfig { t_end: 0.3, ..Default::default() };
        let tr = solve(&u0, &kernel, eps, &Velocity::Greenshields, &cfg).unwrap();
        let m0 = tr.history[0].mass;
        for (k, h) in tr.history.iter().enumerate() {
            prop_assert!((h.mass - m0).abs() <= 1e-12 * k.max(1) as f64);
        }
    }

    #[test]
    fn impact_is_a_convex_combination(values in profile(40), kernel in kernel_strategy(), eps_cells in 1.0..30.0f64) {
        let g = Grid::new(0.0, 1.0, 40).unwrap();
        let u = GridFunction::new(g, values, Extension::ConstantLeftRight).unwrap();
        let wts = build_weights_shifted(&kernel, eps_cells * g.dx(), g.dx(), DEFAULT_TAIL_TOL, 0.5).unwrap();
        let w = convolve(&u, &wts).unwrap();
        for &v in w.values() {
            prop_assert!(v >= u.min() - wts.truncation_tail() - 1e-14 && v <= u.max() + 1e-14);
        }
        let one = convolve(&GridFunction::constant(g, 1.0, Extension::Periodic).unwrap(), &wts).unwrap();
        for &v in one.values() {
            prop_assert!((v - (1.0 - wts.truncation_tail())).abs() <= 1e-14);
        }
    }
}
