//! Symmetric tridiagonal eigenvalue helpers: Sturm counts, bisection and
//! inverse iteration.

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut d = diag[0] - x;
    for i in 0..n {
        if i > 0 {
            let b = off[i - 1];
            d = diag[i] - x - b * b / d;
        }
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by bisection to absolute width `tol`.
pub fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize, tol: f64) -> f64 {
    assert!(k < diag.len(), "eigenvalue index out of range");
    let (mut lo, mut hi) = gershgorin(diag, off);
    let span = (hi - lo).abs().max(lo.abs()).max(hi.abs()).max(f64::MIN_POSITIVE);
    lo -= 1e-12 * span;
    hi += 1e-12 * span;
    let tol = tol.max(4.0 * f64::EPSILON * span);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unit eigenvector for the eigenvalue estimate `lambda` by inverse iteration.
pub fn eigenvector(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        return vec![1.0];
    }
    let (glo, ghi) = gershgorin(diag, off);
    let scale = (ghi - glo).abs().max(lambda.abs()).max(f64::MIN_POSITIVE);
    let perturb = f64::EPSILON * scale;
    // Partial-pivot LU of T - lambda I. Rows hold up to three upper entries.
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut mult = vec![0.0; n];
    let mut swapped = vec![false; n];
    let mut a = diag[0] - lambda;
    let mut b = off[0];
    let mut c = 0.0;
    for i in 0..n - 1 {
        let sub = off[i];
        let next_d = diag[i + 1] - lambda;
        let next_o = if i + 2 < n { off[i + 1] } else { 0.0 };
        if a.abs() >= sub.abs() {
            let piv = if a == 0.0 { perturb } else { a };
            let m = sub / piv;
            u0[i] = piv;
            u1[i] = b;
            u2[i] = c;
            mult[i] = m;
            a = next_d - m * b;
            b = next_o;
            c = 0.0;
        } else {
            swapped[i] = true;
            let m = a / sub;
            u0[i] = sub;
            u1[i] = next_d;
            u2[i] = next_o;
            mult[i] = m;
            a = b - m * next_d;
            b = c - m * next_o;
            c = 0.0;
        }
    }
    u0[n - 1] = if a == 0.0 { perturb } else { a };

    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..3 {
        // Forward elimination.
        let mut rhs = x.clone();
        for i in 0..n - 1 {
            if swapped[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= mult[i] * rhs[i];
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * rhs[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * rhs[i + 2];
            }
            rhs[i] = s / u0[i];
        }
        let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        x = rhs.iter().map(|v| v / norm).collect();
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    fn dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
        let n = diag.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn free_chain_eigenvalues() {
        // Path Laplacian: eigenvalues 2 - 2 cos(pi k / n).
        let n = 40;
        let mut diag = vec![2.0; n];
        diag[0] = 1.0;
        diag[n - 1] = 1.0;
        let off = vec![-1.0; n - 1];
        for k in 0..5 {
            let want = 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos();
            let got = kth_eigenvalue(&diag, &off, k, 1e-15);
            assert!((got - want).abs() < 1e-13, "k={k}: {got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn matches_dense_solver(
            diag in prop::collection::vec(-5.0f64..5.0, 2..30),
            seed_off in prop::collection::vec(-3.0f64..3.0, 29),
            k_frac in 0.0f64..1.0,
        ) {
            let n = diag.len();
            let off: Vec<f64> = seed_off[..n - 1].to_vec();
            let m = dense(&diag, &off);
            let mut evs: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
            evs.sort_by(f64::total_cmp);
            let k = ((n as f64 * k_frac) as usize).min(n - 1);
            let lam = kth_eigenvalue(&diag, &off, k, 1e-14);
            prop_assert!((lam - evs[k]).abs() < 1e-10);
            let v = eigenvector(&diag, &off, lam);
            let gap = evs.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, e)| (e - lam).abs()).fold(f64::INFINITY, f64::min);
            if gap > 1e-3 {
                let mv = &m * nalgebra::DVector::from_vec(v.clone());
                let res: f64 = mv.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(res < 1e-8, "residual {}", res);
            }
        }
    }
}
