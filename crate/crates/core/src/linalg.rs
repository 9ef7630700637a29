//! Small dense solves used by the placement routines.

use nalgebra::{DMatrix, DVector};

/// Solution of an equilibrated dense system.
#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub x: Vec<f64>,
    /// 1-norm condition number of the row- and column-equilibrated matrix.
    pub condition: f64,
}

/// Solves `A x = rhs` by LU with partial pivoting after scaling rows and
/// columns to unit max-norm. Returns `None` when the factorization is singular.
pub(crate) fn solve_equilibrated(a: &DMatrix<f64>, rhs: &[f64]) -> Option<Solved> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    debug_assert_eq!(n, rhs.len());

    let col_scale: Vec<f64> = (0..n)
        .map(|j| {
            let m = a.column(j).amax();
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in col_scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let row_scale: Vec<f64> = (0..n)
        .map(|i| {
            let m = scaled.row(i).amax();
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    for (i, s) in row_scale.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*s);
    }
    let b = DVector::from_iterator(n, rhs.iter().zip(&row_scale).map(|(v, s)| v * s));

    let lu = scaled.clone().lu();
    let y = lu.solve(&b)?;
    let inv = lu.try_inverse()?;
    let condition = one_norm(&scaled) * one_norm(&inv);
    if !condition.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = y.iter().zip(&col_scale).map(|(v, s)| v * s).collect();
    Some(Solved { x, condition })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
