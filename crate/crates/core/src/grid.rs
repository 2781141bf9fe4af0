//! Uniform 1D grids and cell-averaged functions.
//!
//! Every field in the crate (densities, nonlocal impacts, reference
//! solutions) is a [`GridFunction`]: one average per cell plus a rule for
//! what lies outside the computational domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!("need n_cells >= 2, got {n_cells}")));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 0.5) * self.dx()
    }

    /// Left edge of cell `j` (`j == n_cells` gives `x_max`).
    pub fn face(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |j| self.center(j))
    }

    /// Same domain with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.n_cells * factor.max(1))
    }

    /// Index of the cell containing `x`, if inside the domain.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if x < self.x_min || x > self.x_max {
            return None;
        }
        let j = ((x - self.x_min) / self.dx()).floor() as usize;
        Some(j.min(self.n_cells - 1))
    }
}

/// What a grid function takes outside `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    #[default]
    Zero,
    ConstantLeftRight,
    Periodic,
}

impl Extension {
    pub fn name(&self) -> &'static str {
        match self {
            Extension::Zero => "zero",
            Extension::ConstantLeftRight => "constant_left_right",
            Extension::Periodic => "periodic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    extension: Extension,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { grid, values, extension })
    }

    pub fn constant(grid: Grid, value: f64, extension: Extension) -> Result<Self> {
        Self::new(grid, vec![value; grid.n_cells()], extension)
    }

    /// Builds cell averages from an antiderivative `F` of the target function,
    /// `avg_j = (F(x_{j+1/2}) - F(x_{j-1/2})) / dx`.
    pub fn from_antiderivative(
        grid: Grid,
        extension: Extension,
        antiderivative: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let dx = grid.dx();
        let mut left = antiderivative(grid.face(0));
        let values = (0..grid.n_cells())
            .map(|j| {
                let right = antiderivative(grid.face(j + 1));
                let avg = (right - left) / dx;
                left = right;
                avg
            })
            .collect();
        Self::new(grid, values, extension)
    }

    /// Builds cell averages from a per-cell integrator `(a, b) -> ∫_a^b f`.
    pub fn from_cell_integrals(
        grid: Grid,
        extension: Extension,
        integral: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let dx = grid.dx();
        let values = (0..grid.n_cells())
            .map(|j| integral(grid.face(j), grid.face(j + 1)) / dx)
            .collect();
        Self::new(grid, values, extension)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of cell `i` where `i` may lie outside `0..n`.
    pub fn at(&self, i: isize) -> f64 {
        let n = self.values.len() as isize;
        if (0..n).contains(&i) {
            return self.values[i as usize];
        }
        match self.extension {
            Extension::Zero => 0.0,
            Extension::ConstantLeftRight => {
                if i < 0 {
                    self.values[0]
                } else {
                    self.values[(n - 1) as usize]
                }
            }
            Extension::Periodic => self.values[i.rem_euclid(n) as usize],
        }
    }

    /// Point value of the piecewise-constant function at `x`.
    pub fn sample(&self, x: f64) -> f64 {
        let k = ((x - self.grid.x_min()) / self.dx()).floor();
        // saturating cast keeps far-away samples finite
        let k = k.clamp(-(1i64 << 52) as f64, (1i64 << 52) as f64) as isize;
        self.at(k)
    }

    /// Cell values on indices `start..start + len`, extension applied.
    pub fn extended(&self, start: isize, len: usize) -> Vec<f64> {
        (0..len as isize).map(|k| self.at(start + k)).collect()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, values, self.extension)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            extension: self.extension,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            extension: self.extension,
        })
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.dx() * self.values.iter().sum::<f64>()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Averages groups of `factor` consecutive cells onto a grid with
    /// `n_cells / factor` cells.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.len().is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {} cells by factor {factor}",
                self.len()
            )));
        }
        let grid = Grid::new(self.grid.x_min(), self.grid.x_max(), self.len() / factor)?;
        let values = self
            .values
            .chunks(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect();
        Self::new(grid, values, self.extension)
    }
}

pub fn l1_norm(f: &GridFunction) -> f64 {
    f.dx() * f.values().iter().map(|v| v.abs()).sum::<f64>()
}

pub fn l2_norm_sq(f: &GridFunction) -> f64 {
    f.dx() * f.values().iter().map(|v| v * v).sum::<f64>()
}

/// Total variation on the whole line, including the jumps the extension
/// policy creates at the domain edges.
pub fn total_variation(f: &GridFunction) -> f64 {
    let v = f.values();
    let interior: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let n = v.len();
    interior
        + match f.extension() {
            Extension::Zero => v[0].abs() + v[n - 1].abs(),
            Extension::ConstantLeftRight => 0.0,
            Extension::Periodic => (v[0] - v[n - 1]).abs(),
        }
}

/// dx-weighted L¹ distance over the cells whose centers lie in `[a, b]`.
pub fn l1_distance_on_window(f: &GridFunction, g: &GridFunction, window: [f64; 2]) -> Result<f64> {
    f.check_same_grid(g)?;
    let [a, b] = window;
    let grid = f.grid();
    if a > b || a < grid.x_min() || b > grid.x_max() {
        return Err(Error::InvalidArgument(format!(
            "window [{a}, {b}] not inside [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let sum: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .enumerate()
        .filter(|(j, _)| {
            let x = grid.center(*j);
            x >= a && x <= b
        })
        .map(|(_, (p, q))| (p - q).abs())
        .sum();
    Ok(grid.dx() * sum)
}

/// Exact cell averages of `x ↦ f(x + offset)` for piecewise-constant `f`.
pub fn shift_sample(f: &GridFunction, offset: f64) -> GridFunction {
    let dx = f.dx();
    let cells = offset / dx;
    let whole = cells.floor();
    let mut frac = cells - whole;
    let mut whole = whole as isize;
    // fractional parts within rounding of a whole cell snap to it
    if frac > 1.0 - 1e-12 {
        frac = 0.0;
        whole += 1;
    } else if frac < 1e-12 {
        frac = 0.0;
    }
    let values = (0..f.len() as isize)
        .map(|j| {
            let a = f.at(j + whole);
            if frac == 0.0 {
                a
            } else {
                (1.0 - frac) * a + frac * f.at(j + whole + 1)
            }
        })
        .collect();
    GridFunction {
        grid: *f.grid(),
        values,
        extension: f.extension(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_inputs() {
        assert!(Grid::new(1.0, 0.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert!(Grid::new(0.0, f64::NAN, 4).is_err());
        let g = Grid::new(-1.0, 1.0, 4).unwrap();
        assert_abs_diff_eq!(g.dx(), 0.5);
        assert_abs_diff_eq!(g.center(0), -0.75);
        assert_abs_diff_eq!(g.center(3), 0.75);
    }

    #[test]
    fn grid_function_rejects_wrong_length_and_nan() {
        assert!(GridFunction::new(unit(4), vec![0.0; 3], Extension::Zero).is_err());
        assert!(GridFunction::new(unit(2), vec![0.0, f64::NAN], Extension::Zero).is_err());
    }

    #[test]
    fn l1_norm_examples() {
        let z = GridFunction::constant(unit(8), 0.0, Extension::Zero).unwrap();
        assert_eq!(l1_norm(&z), 0.0);
        let one = GridFunction::constant(unit(8), 1.0, Extension::Zero).unwrap();
        assert_abs_diff_eq!(l1_norm(&one), 1.0, epsilon = 1e-15);
        let ind = GridFunction::new(unit(4), vec![1.0, 1.0, 0.0, 0.0], Extension::Zero).unwrap();
        let direct: f64 = ind.values().iter().map(|v| v.abs() * 0.25).sum();
        assert_abs_diff_eq!(l1_norm(&ind), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(l1_norm(&ind), direct, epsilon = 1e-15);
    }

    #[test]
    fn l2_norm_examples() {
        let one = GridFunction::constant(unit(7), 1.0, Extension::Zero).unwrap();
        assert_abs_diff_eq!(l2_norm_sq(&one), 1.0, epsilon = 1e-14);
        let half = GridFunction::constant(Grid::new(0.0, 2.0, 10).unwrap(), 0.5, Extension::Zero)
            .unwrap();
        let direct: f64 = half.values().iter().map(|v| v * v * 0.2).sum();
        assert_abs_diff_eq!(l2_norm_sq(&half), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(l2_norm_sq(&half), direct, epsilon = 1e-15);
    }

    #[test]
    fn total_variation_examples() {
        let c = GridFunction::constant(unit(5), -0.3, Extension::Zero).unwrap();
        assert_abs_diff_eq!(total_variation(&c), 0.6, epsilon = 1e-15);
        let step = GridFunction::new(unit(4), vec![0.0, 0.0, 1.0, 1.0], Extension::ConstantLeftRight)
            .unwrap();
        assert_eq!(total_variation(&step), 1.0);
        let bump = GridFunction::new(unit(3), vec![0.0, 1.0, 0.0], Extension::ConstantLeftRight)
            .unwrap();
        assert_eq!(total_variation(&bump), 2.0);
        let per = GridFunction::new(unit(3), vec![0.0, 1.0, 0.5], Extension::Periodic).unwrap();
        assert_eq!(total_variation(&per), 2.0);
    }

    #[test]
    fn window_distance() {
        let g = unit(8);
        let one = GridFunction::constant(g, 1.0, Extension::Zero).unwrap();
        let zero = GridFunction::constant(g, 0.0, Extension::Zero).unwrap();
        assert_eq!(l1_distance_on_window(&one, &one, [0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            l1_distance_on_window(&one, &zero, [0.25, 0.75]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let other = GridFunction::constant(unit(4), 1.0, Extension::Zero).unwrap();
        assert!(matches!(
            l1_distance_on_window(&one, &other, [0.0, 1.0]),
            Err(Error::GridMismatch)
        ));
        assert!(l1_distance_on_window(&one, &zero, [-1.0, 0.5]).is_err());
    }

    #[test]
    fn window_distance_matches_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = Grid::new(-1.0, 3.0, 16).unwrap();
        let f = GridFunction::new(g, (0..16).map(|_| rng.gen()).collect(), Extension::Zero).unwrap();
        let h = GridFunction::new(g, (0..16).map(|_| rng.gen()).collect(), Extension::Zero).unwrap();
        let (a, b) = (0.1, 2.2);
        let mut oracle = 0.0;
        for j in 0..16 {
            let x = -1.0 + (j as f64 + 0.5) * 0.25;
            if a <= x && x <= b {
                oracle += 0.25 * (f.values()[j] - h.values()[j]).abs();
            }
        }
        assert_abs_diff_eq!(l1_distance_on_window(&f, &h, [a, b]).unwrap(), oracle, epsilon = 1e-15);
    }

    #[test]
    fn shift_examples() {
        let g = unit(4);
        let f = GridFunction::new(g, vec![0.1, 0.2, 0.3, 0.4], Extension::Periodic).unwrap();
        assert_eq!(shift_sample(&f, 0.0).values(), f.values());
        assert_eq!(shift_sample(&f, 0.25).values(), &[0.2, 0.3, 0.4, 0.1]);
        let two = GridFunction::new(unit(2), vec![0.0, 1.0], Extension::Zero).unwrap();
        let s = shift_sample(&two, 0.25);
        assert_abs_diff_eq!(s.values()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.values()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn extension_sampling() {
        let f = GridFunction::new(unit(3), vec![1.0, 2.0, 3.0], Extension::ConstantLeftRight).unwrap();
        assert_eq!(f.sample(-5.0), 1.0);
        assert_eq!(f.sample(1e300), 3.0);
        assert_eq!(f.at(-1), 1.0);
        assert_eq!(f.at(5), 3.0);
        let p = GridFunction::new(unit(3), vec![1.0, 2.0, 3.0], Extension::Periodic).unwrap();
        assert_eq!(p.at(-1), 3.0);
        assert_eq!(p.at(7), 2.0);
        assert!(p.sample(-1e300).is_finite());
    }

    #[test]
    fn antiderivative_cell_averages() {
        // indicator of [0, 0.5) on [0, 1] with 4 cells
        let f = GridFunction::from_antiderivative(unit(4), Extension::Zero, |x| x.min(0.5)).unwrap();
        assert_eq!(f.values(), &[1.0, 1.0, 0.0, 0.0]);
        let c = f.coarsen(2).unwrap();
        assert_eq!(c.values(), &[1.0, 0.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn periodic_fn() -> impl Strategy<Value = GridFunction> {
            prop::collection::vec(-2.0f64..2.0, 2..40).prop_map(|v| {
                let g = Grid::new(-1.0, 2.0, v.len()).unwrap();
                GridFunction::new(g, v, Extension::Periodic).unwrap()
            })
        }

        proptest! {
            #[test]
            fn norms_nonnegative(f in periodic_fn()) {
                prop_assert!(l1_norm(&f) >= 0.0);
                prop_assert!(l2_norm_sq(&f) >= 0.0);
                prop_assert!(total_variation(&f) >= 0.0);
            }

            #[test]
            fn whole_cell_shift_preserves_tv(f in periodic_fn(), k in -50i32..50) {
                let s = shift_sample(&f, k as f64 * f.dx());
                prop_assert!((total_variation(&s) - total_variation(&f)).abs() <= 1e-12);
            }

            #[test]
            fn shift_conserves_mass_periodic(f in periodic_fn(), offset in -5.0f64..5.0) {
                let s = shift_sample(&f, offset);
                prop_assert!((s.mass() - f.mass()).abs() <= 1e-12);
            }

            #[test]
            fn full_window_distance_is_l1_norm(f in periodic_fn(), shift in -3.0f64..3.0) {
                let g = shift_sample(&f, shift);
                let diff = f.zip_with(&g, |a, b| a - b).unwrap();
                let grid = *f.grid();
                let d = l1_distance_on_window(&f, &g, [grid.x_min(), grid.x_max()]).unwrap();
                prop_assert!((d - l1_norm(&diff)).abs() <= 1e-14);
            }
        }
    }
}
