//! Small dense solves (a few dozen unknowns at most).

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when `a` is numerically singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(r);
                for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *x -= f * y;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Ordinary least squares via the normal equations. `rows[t]` is the regressor
/// vector of observation t. Returns coefficients and the residual sum of squares.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = rows.first()?.len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (x, &yt) in rows.iter().zip(y) {
        for r in 0..p {
            xty[r] += x[r] * yt;
            for c in 0..p {
                xtx[r][c] += x[r] * x[c];
            }
        }
    }
    let beta = solve(xtx, xty)?;
    let rss = rows
        .iter()
        .zip(y)
        .map(|(x, &yt)| {
            let fit: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (yt - fit).powi(2)
        })
        .sum();
    Some((beta, rss))
}

/// Sample mean and (n-1)-denominator covariance matrix of row vectors.
pub fn mean_cov(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; p];
    for r in rows {
        for (a, x) in mean.iter_mut().zip(r) {
            *a += x / m as f64;
        }
    }
    let mut cov = vec![vec![0.0; p]; p];
    if m > 1 {
        for r in rows {
            for i in 0..p {
                for j in 0..p {
                    cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (m - 1) as f64;
                }
            }
        }
    }
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn ols_exact_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|t| vec![1.0, t as f64]).collect();
        let y: Vec<f64> = (0..5).map(|t| 2.0 + 3.0 * t as f64).collect();
        let (b, rss) = ols(&rows, &y).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-10 && (b[1] - 3.0).abs() < 1e-10 && rss < 1e-18);
    }
}
