//! Dense phase-1 simplex for `A λ = b, λ ≥ 0` with Bland's rule.

use nalgebra::{DMatrix, DVector};

const PIVOT_EPS: f64 = 1e-12;
const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    /// A nonnegative solution of `A λ = b`.
    Feasible(DVector<f64>),
    /// Farkas certificate: `yᵀA ≤ 0` and `yᵀb > 0`.
    Infeasible(DVector<f64>),
}

/// Minimizes the sum of artificial variables in `A λ + s = b` starting from
/// the all-artificial basis. Rows with negative right-hand side are negated
/// first, so any `b` is accepted.
pub fn phase_one(a: &DMatrix<f64>, b: &DVector<f64>) -> PhaseOne {
    let (rows, cols) = a.shape();
    assert_eq!(b.len(), rows, "right-hand side length");
    let width = cols + rows;
    // tableau: constraint rows, then the reduced-cost row; last column is the rhs
    let mut t = DMatrix::<f64>::zeros(rows + 1, width + 1);
    let mut sign = vec![1.0; rows];
    for i in 0..rows {
        if b[i] < 0.0 {
            sign[i] = -1.0;
        }
        for j in 0..cols {
            t[(i, j)] = sign[i] * a[(i, j)];
        }
        t[(i, cols + i)] = 1.0;
        t[(i, width)] = sign[i] * b[i];
    }
    for j in 0..cols {
        t[(rows, j)] = -(0..rows).map(|i| t[(i, j)]).sum::<f64>();
    }
    t[(rows, width)] = -(0..rows).map(|i| t[(i, width)]).sum::<f64>();
    let mut basis: Vec<usize> = (cols..width).collect();

    while let Some(enter) = (0..width).find(|&j| t[(rows, j)] < -PIVOT_EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let aij = t[(i, enter)];
            if aij <= PIVOT_EPS {
                continue;
            }
            let ratio = t[(i, width)] / aij;
            let better = match leave {
                None => true,
                Some((l, r)) => ratio < r - PIVOT_EPS || (ratio <= r + PIVOT_EPS && basis[i] < basis[l]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        // phase 1 is bounded below by zero, so some row always qualifies
        let (row, _) = leave.expect("phase-one objective is bounded");
        let pivot = t[(row, enter)];
        for j in 0..=width {
            t[(row, j)] /= pivot;
        }
        for i in 0..=rows {
            if i != row {
                let factor = t[(i, enter)];
                if factor != 0.0 {
                    for j in 0..=width {
                        t[(i, j)] -= factor * t[(row, j)];
                    }
                }
            }
        }
        basis[row] = enter;
    }

    let residual = -t[(rows, width)];
    if residual > FEASIBILITY_EPS {
        // duals y_i = 1 - (reduced cost of artificial i), mapped back to the unflipped rows
        let y = DVector::from_fn(rows, |i, _| sign[i] * (1.0 - t[(rows, cols + i)]));
        return PhaseOne::Infeasible(y);
    }
    let mut x = DVector::zeros(cols);
    for (i, &j) in basis.iter().enumerate() {
        if j < cols {
            x[j] = t[(i, width)].max(0.0);
        }
    }
    PhaseOne::Feasible(x)
}
