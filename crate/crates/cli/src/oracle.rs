//! Recomputations that share no numerics with the library: power-series
//! integration of the zero-energy equation, closed forms, and brute scans.

use bose_bounds::potential::{PotentialPair, RadialPotential};

/// Result of integrating `f'' = c V f`, `f(0) = 0`, `f'(0) = 1`, by Taylor
/// series on short sub-intervals.
#[derive(Debug, Clone, Copy)]
pub struct SeriesScattering {
    pub a: f64,
    pub f_positive: bool,
}

/// Coefficients of `p(r0 + t)` in powers of `t`.
fn shift_poly(coeffs: &[f64], r0: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    for (i, &c) in coeffs.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=i {
            out[j] += c * binom * r0.powi((i - j) as i32);
            binom *= (i - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

/// Advances `(f, f')` over `[r0, r0 + len]` with `f'' = g f`, `g` given by
/// its Taylor coefficients at `r0`.
fn series_step(g: &[f64], f: f64, df: f64, len: f64) -> (f64, f64) {
    let mut c = vec![f, df];
    let (mut val, mut der) = (f + df * len, df);
    let mut small = 0;
    for k in 0..400 {
        let s: f64 = (0..=k).filter(|&j| j < g.len()).map(|j| g[j] * c[k - j]).sum();
        let next = s / ((k + 2) * (k + 1)) as f64;
        c.push(next);
        let tv = next * len.powi(k as i32 + 2);
        let td = (k + 2) as f64 * next * len.powi(k as i32 + 1);
        val += tv;
        der += td;
        if tv.abs() <= 1e-17 * val.abs() && td.abs() <= 1e-17 * der.abs() {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    (val, der)
}

pub fn series_scattering_length(v: &RadialPotential, factor: f64) -> SeriesScattering {
    let support = v.support_radius();
    let (mut f, mut df) = (0.0, 1.0);
    let mut positive = true;
    let mut r = 0.0;
    for piece in v.pieces() {
        if piece.lo > r {
            // Gap with V = 0: f is linear.
            f += df * (piece.lo - r);
            r = piece.lo;
        }
        let hi = piece.hi.min(support);
        while r < hi {
            let len = (hi - r).min(0.02);
            let scaled: Vec<f64> = piece.coeffs.iter().map(|c| c * factor).collect();
            let g = shift_poly(&scaled, r);
            let (nf, ndf) = series_step(&g, f, df, len);
            f = nf;
            df = ndf;
            r += len;
            if r - len > 0.0 && f <= 0.0 {
                positive = false;
            }
        }
    }
    let end = support.max(r);
    f += df * (end - r);
    SeriesScattering {
        a: end - f / df,
        f_positive: positive && f > 0.0,
    }
}

/// `1 − tanh(κ r)/κ` form for a square barrier of height `v0` and range `r`
/// in `f'' = c v0 f`.
pub fn square_barrier_length(v0: f64, r: f64, c: f64) -> f64 {
    let kappa = (c * v0).sqrt();
    r - (kappa * r).tanh() / kappa
}

/// Minimum of `v1 − v2` over `r ∈ [0, reach]` on a grid of `points` nodes
/// plus every breakpoint.
pub fn pair_distance_scan(pair: &PotentialPair, points: usize) -> (f64, f64) {
    let reach = pair.v1.support_radius().max(pair.v2.support_radius()).max(pair.r1);
    let mut radii: Vec<f64> = (0..=points).map(|i| reach * i as f64 / points as f64).collect();
    radii.extend(pair.v1.breakpoints());
    radii.extend(pair.v2.breakpoints());
    let mut best = (f64::INFINITY, 0.0);
    for r in radii {
        // Just inside each side of a breakpoint as well.
        for s in [r, r * (1.0 - 1e-13), r * (1.0 + 1e-13)] {
            let e = pair.v1.value(s) - pair.v2.value(s);
            if e < best.0 {
                best = (e, s);
            }
        }
    }
    best
}

/// Root of `tan(h f) = h ℓ₀` on `(0, π/(2f))` with `f = ℓ₀ − a`, by Newton
/// on `sin(h f) − h ℓ₀ cos(h f)` from the small-`h` estimate.
pub fn wavenumber_newton(a: f64, l0: f64) -> f64 {
    let f = l0 - a;
    let mut h = (3.0 * a / l0.powi(3)).sqrt();
    for _ in 0..100 {
        let (s, c) = (h * f).sin_cos();
        let g = s - h * l0 * c;
        let dg = f * c - l0 * c + h * l0 * f * s;
        let step = g / dg;
        h -= step;
        if step.abs() <= 1e-16 * h {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_reproduces_square_barrier() {
        let v = RadialPotential::constant_on(0.0, 1.0, 8.0).unwrap();
        let s = series_scattering_length(&v, 0.5);
        assert!((s.a - (1.0 - 2f64.tanh() / 2.0)).abs() < 1e-13);
        assert!(s.f_positive);
    }

    #[test]
    fn shifted_polynomial() {
        let c = [1.0, -2.0, 3.0];
        let s = shift_poly(&c, 0.7);
        for t in [0.0, 0.3, -1.1] {
            let direct = 1.0 - 2.0 * (0.7 + t) + 3.0 * (0.7 + t) * (0.7f64 + t).powi(1);
            let via: f64 = s.iter().enumerate().map(|(k, &a)| a * t.powi(k as i32)).sum();
            assert!((direct - via).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_root_satisfies_equation() {
        let (a, l0) = (0.3, 50.0);
        let h = wavenumber_newton(a, l0);
        assert!(((h * (l0 - a)).tan() - h * l0).abs() < 1e-9);
    }
}
