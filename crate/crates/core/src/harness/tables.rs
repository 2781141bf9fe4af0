use std::fmt::Write as _;

use crate::error::Result;
use crate::grid::{Extension, Grid};
use crate::kernels::{build_weights_shifted, select_path, Kernel, DEFAULT_TAIL_TOL};
use crate::local_solver::{GreenshieldsRiemann, RiemannDatum};

/// Riemann pairs tabulated when none are given: shock, fan, moving shock,
/// moving fan, constant state.
pub const DEFAULT_RIEMANN_PAIRS: [(f64, f64); 5] = [(0.0, 1.0), (1.0, 0.0), (0.2, 0.6), (0.6, 0.2), (0.5, 0.5)];

/// Exact Greenshields cell averages at time `t`, one column per pair.
pub fn riemann_table(pairs: &[(f64, f64)], grid: Grid, t: f64) -> Result<String> {
    let columns = pairs
        .iter()
        .map(|&(l, r)| {
            let exact = GreenshieldsRiemann::new(RiemannDatum::new(l, r, 0.0)?)?;
            exact.cell_averages(grid, t, Extension::ConstantLeftRight)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = String::from("x");
    for (l, r) in pairs {
        let _ = write!(s, ",u_{l}_{r}");
    }
    s.push('\n');
    for j in 0..grid.n_cells() {
        let _ = write!(s, "{}", grid.center(j));
        for c in &columns {
            let _ = write!(s, ",{}", c.values()[j]);
        }
        s.push('\n');
    }
    Ok(s)
}

/// Human-readable dump of the center weights of `kernel` at `(ε, dx)`.
pub fn inspect_kernel(kernel: &Kernel, epsilon: f64, dx: f64) -> Result<String> {
    let w = build_weights_shifted(kernel, epsilon, dx, DEFAULT_TAIL_TOL, 0.5)?;
    let sum: f64 = w.weights().iter().sum();
    let mut s = String::new();
    let _ = writeln!(s, "kernel          {}", kernel.name());
    let _ = writeln!(s, "epsilon         {epsilon}");
    let _ = writeln!(s, "dx              {dx}");
    let _ = writeln!(s, "weights         {}", w.len());
    let _ = writeln!(s, "sum             {sum:.15}");
    let _ = writeln!(s, "truncation_tail {:e}", w.truncation_tail());
    let _ = writeln!(s, "path            {:?}", select_path(&w));
    let _ = writeln!(s, "k,offset_lo,offset_hi,weight");
    for (k, v) in w.weights().iter().enumerate() {
        let (lo, hi) = w.offset_interval(k);
        let _ = writeln!(s, "{k},{lo},{hi},{v:.17e}");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_shape_and_values() {
        let g = Grid::new(-1.0, 1.0, 4).unwrap();
        let t = riemann_table(&[(0.0, 1.0), (0.5, 0.5)], g, 0.25).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "x,u_0_1,u_0.5_0.5");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "-0.75,0,0.5");
        assert_eq!(lines[4], "0.75,1,0.5");
    }

    #[test]
    fn inspect_lists_every_weight() {
        let s = inspect_kernel(&Kernel::PiecewiseConstant, 0.1, 0.025).unwrap();
        assert!(s.contains("weights         5"));
        assert!(s.contains("0,0,0.0125,"));
        assert_eq!(s.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 5);
    }
}
