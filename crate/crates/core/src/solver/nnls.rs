//! Lawson–Hanson nonnegative least squares, used to recover multipliers
//! when the barrier path is unavailable.

use nalgebra::{DMatrix, DVector};

/// `argmin_{x >= 0} |A x - b|`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = a.ncols();
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let tol = 1e-12 * (1.0 + a.norm() * b.norm());

    for _outer in 0..3 * m + 3 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..m)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        for _inner in 0..3 * m + 3 {
            let s = restricted_lstsq(a, b, &passive);
            if (0..m).all(|i| !passive[i] || s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in 0..m {
                if passive[i] && s[i] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - s[i]));
                }
            }
            x += (s - &x) * alpha;
            for i in 0..m {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

fn restricted_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let mut out = DVector::zeros(passive.len());
    if cols.is_empty() {
        return out;
    }
    let sub = a.select_columns(&cols);
    let svd = sub.svd(true, true);
    if let Ok(sol) = svd.solve(b, 1e-13) {
        for (k, &i) in cols.iter().enumerate() {
            out[i] = sol[k];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clips_negative_component() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, -2.0]);
        let x = nnls(&a, &b);
        assert_relative_eq!(x[0], 1.0);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn exact_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let truth = DVector::from_vec(vec![0.5, 1.5]);
        let x = nnls(&a, &(&a * &truth));
        assert_relative_eq!(x, truth, epsilon = 1e-10);
    }
}
