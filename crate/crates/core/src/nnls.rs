//! Lawson–Hanson nonnegative least squares for small dense systems.

use nalgebra::{DMatrix, DVector};

/// `argmin ‖A·x − b‖₂` subject to `x ≥ 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-14 * a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0) * b.amax().max(1.0);
    let mut best = (b.norm_squared(), x.clone());

    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        for _ in 0..3 * n + 10 {
            let z = solve_passive(a, b, &passive);
            let blocking = (0..n)
                .filter(|&i| passive[i] && z[i] <= 0.0)
                .map(|i| (x[i] / (x[i] - z[i]), i))
                .min_by(|p, q| p.0.total_cmp(&q.0));
            let Some((alpha, k)) = blocking else {
                x = z;
                break;
            };
            x += (z - &x) * alpha;
            x[k] = 0.0;
            passive[k] = false;
            for i in 0..n {
                if passive[i] && x[i] <= 0.0 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
        let residual = (a * &x - b).norm_squared();
        if residual < best.0 {
            best = (residual, x.clone());
        }
    }
    best.1
}

/// Unconstrained least squares over the passive columns, zero elsewhere.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&j| passive[j]).collect();
    let mut out = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return out;
    }
    let sub = a.select_columns(&cols);
    let qr = sub.clone().qr();
    let r = qr.r();
    let diag = r.diagonal().abs();
    let sol = if diag.min() > 1e-12 * diag.max() {
        r.solve_upper_triangular(&(qr.q().transpose() * b)).expect("nonsingular triangle")
    } else {
        sub.svd(true, true).solve(b, 1e-13).expect("SVD with both factors computed")
    };
    for (k, &j) in cols.iter().enumerate() {
        out[j] = sol[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_unconstrained_solution_when_positive() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_negative_components() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let x = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_of_random_problems() {
        // Optimality: x ≥ 0, w = Aᵀ(b − Ax) ≤ 0, and w_j = 0 where x_j > 0.
        let a = DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + 0.1 * j as f64);
        let b = DVector::from_fn(6, |i, _| (i as f64 * 1.3).sin());
        let x = nnls(&a, &b);
        let w = a.transpose() * (&b - &a * &x);
        for j in 0..4 {
            assert!(x[j] >= 0.0);
            assert!(w[j] <= 1e-10);
            if x[j] > 0.0 {
                assert!(w[j].abs() <= 1e-10);
            }
        }
    }
}
