//! Small one-dimensional solvers shared by the scanners.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Bisection for a sign change of `g` on `[lo, hi]`. `glo` is `g(lo)`;
/// `g(lo)` and `g(hi)` must have opposite signs.
pub fn bisect<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64, mut glo: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for a minimum of `g` on `[lo, hi]`. Stops when the
/// bracket is narrower than `tol` or stops shrinking in floating point.
/// Returns `(argmin, min)`.
pub fn golden_min<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut ga = g(a);
    let mut gb = g(b);
    for _ in 0..300 {
        if hi - lo <= tol || !(a < b) {
            break;
        }
        if ga <= gb {
            hi = b;
            b = a;
            gb = ga;
            a = hi - INV_PHI * (hi - lo);
            ga = g(a);
        } else {
            lo = a;
            a = b;
            ga = gb;
            b = lo + INV_PHI * (hi - lo);
            gb = g(b);
        }
    }
    if ga <= gb {
        (a, ga)
    } else {
        (b, gb)
    }
}

/// Ordinary least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Linear-interpolation quantile of already sorted data, `q` in `[0, 1]`.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `None` when a pivot vanishes.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let k = a[row][col] / a[col][col];
            if k == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= k * a[col][c];
            }
            b[row] -= k * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let g = |x: f64| x * x - 2.0;
        let r = bisect(&g, 0.0, 2.0, g(0.0), 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let (x, v) = golden_min(&|x: f64| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solves_small_systems() {
        let x = solve_linear(vec![vec![0.0, 1.0], vec![2.0, 1.0]], vec![1.0, 5.0]).unwrap();
        assert_eq!(x, vec![2.0, 1.0]);
        assert!(solve_linear(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn line_and_quantiles() {
        let (s, c) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        let data = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(sorted_quantile(&data, 0.5), 3.0);
        assert_eq!(sorted_quantile(&data, 1.0), 5.0);
        assert_eq!(sorted_quantile(&data, 0.95), 4.8);
    }
}
