//! Zero-energy s-wave scattering.
//!
//! Integrates `f'' = c V(r) f` with `f(0) = 0, f'(0) = 1` using classical
//! fourth-order Runge–Kutta, where `c = 1/2` for the `-Δ + V/2` normalization
//! used throughout the crate and `c = 1` otherwise. Every piece boundary of
//! the potential is a grid node, so each step sees a single polynomial.
//! Beyond the support `f` is linear and the scattering length is the root of
//! that line: `a = r_match - f(r_match) / f'(r_match)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{CompositePotential, Piece, PotentialPair, RadialPotential};

/// Default number of integration steps across the support.
pub const DEFAULT_STEPS: f64 = 1e5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScatteringOptions {
    /// Step length; defaults to `support_radius / 1e5`.
    pub step: Option<f64>,
    /// Matching radius; defaults to (and may not be below) the support radius.
    pub r_match: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSolution {
    /// Scattering length.
    pub a: f64,
    /// `(r, f(r))` at every integration node on `[0, r_match]`.
    pub f_samples: Vec<(f64, f64)>,
    /// `f(r)/r > 0` at every sampled `r > 0`.
    pub w_positive: bool,
    pub r_match: f64,
    pub slope_at_match: f64,
    pub grid_step: f64,
}

impl ScatteringSolution {
    /// `f(r)`: linear interpolation on the samples, exact line beyond `r_match`.
    pub fn f_at(&self, r: f64) -> f64 {
        if r >= self.r_match {
            return self.slope_at_match * (r - self.a);
        }
        let idx = self.f_samples.partition_point(|&(s, _)| s <= r);
        if idx == 0 {
            return 0.0;
        }
        let (r0, f0) = self.f_samples[idx - 1];
        let (r1, f1) = self.f_samples[idx.min(self.f_samples.len() - 1)];
        if r1 == r0 {
            f0
        } else {
            f0 + (f1 - f0) * (r - r0) / (r1 - r0)
        }
    }
}

#[inline]
fn rk4_step(piece: &Piece, scale: f64, r: f64, h: f64, f: f64, g: f64) -> (f64, f64) {
    let v0 = scale * piece.eval(r);
    let vm = scale * piece.eval(r + 0.5 * h);
    let v1 = scale * piece.eval(r + h);
    let k1f = g;
    let k1g = v0 * f;
    let k2f = g + 0.5 * h * k1g;
    let k2g = vm * (f + 0.5 * h * k1f);
    let k3f = g + 0.5 * h * k2g;
    let k3g = vm * (f + 0.5 * h * k2f);
    let k4f = g + h * k3g;
    let k4g = v1 * (f + h * k3f);
    (
        f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f),
        g + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g),
    )
}

/// Solves the zero-energy equation for an arbitrary radial potential.
///
/// `half = true` solves `-f'' + V f / 2 = 0`, `half = false` solves
/// `-f'' + V f = 0`.
pub fn solve_radial(
    v: &RadialPotential,
    half: bool,
    opts: ScatteringOptions,
) -> Result<ScatteringSolution> {
    let support = v.support_radius();
    let r_match = opts.r_match.unwrap_or(support).max(support);
    let step = opts
        .step
        .unwrap_or(if support > 0.0 { support / DEFAULT_STEPS } else { 1.0 });
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    let scale = if half { 0.5 } else { 1.0 };

    let mut pieces: Vec<Piece> = v.pieces().to_vec();
    if r_match > support {
        pieces.push(Piece::new(support, r_match, vec![0.0]));
    }

    let mut samples = Vec::with_capacity((r_match / step) as usize + pieces.len() + 2);
    samples.push((0.0, 0.0));
    let (mut f, mut g) = (0.0_f64, 1.0_f64);
    for piece in &pieces {
        let len = piece.hi - piece.lo;
        let n = ((len / step).ceil() as usize).max(1);
        let h = len / n as f64;
        for k in 0..n {
            let r = piece.lo + k as f64 * h;
            (f, g) = rk4_step(piece, scale, r, h, f, g);
            let r_next = if k + 1 == n { piece.hi } else { r + h };
            if f <= 0.0 {
                return Err(Error::BoundStateDetected { radius: r_next });
            }
            samples.push((r_next, f));
        }
    }
    if g <= 0.0 {
        // The exterior line f = g (r - a) would cross zero beyond the support.
        return Err(Error::BoundStateDetected { radius: r_match });
    }
    let a = r_match - f / g;
    let w_positive = samples.iter().skip(1).all(|&(r, f)| f / r > 0.0);
    Ok(ScatteringSolution {
        a,
        f_samples: samples,
        w_positive,
        r_match,
        slope_at_match: g,
        grid_step: step,
    })
}

/// Zero-energy solution for `v1 - λ v2`; the pair is validated first.
pub fn solve_zero_energy(v: &CompositePotential, half: bool) -> Result<ScatteringSolution> {
    solve_zero_energy_with(v, half, ScatteringOptions::default())
}

pub fn solve_zero_energy_with(
    v: &CompositePotential,
    half: bool,
    opts: ScatteringOptions,
) -> Result<ScatteringSolution> {
    v.pair.validate().into_result()?;
    let opts = ScatteringOptions {
        r_match: Some(opts.r_match.unwrap_or(v.support_radius()).max(v.support_radius())),
        step: opts.step.or(Some(v.support_radius() / DEFAULT_STEPS)),
    };
    solve_radial(&v.to_radial(), half, opts)
}

/// Scattering length in the `-Δ + V/2` normalization.
pub fn scattering_length(v: &RadialPotential) -> Result<f64> {
    Ok(solve_radial(v, true, ScatteringOptions::default())?.a)
}

/// Observed order of the integrator from three step sizes `h, h/2, h/4`.
pub fn convergence_order(v: &RadialPotential, half: bool, coarse_step: f64) -> Result<f64> {
    let a = |h: f64| -> Result<f64> {
        Ok(solve_radial(
            v,
            half,
            ScatteringOptions {
                step: Some(h),
                r_match: None,
            },
        )?
        .a)
    };
    let a1 = a(coarse_step)?;
    let a2 = a(coarse_step / 2.0)?;
    let a3 = a(coarse_step / 4.0)?;
    Ok(((a1 - a2) / (a2 - a3)).abs().log2())
}

/// `R = sup { r : v1(s) > v1(0)/2 for all s < r }`.
///
/// Scans with step at most `support / 10^4`, then bisects the first bracket
/// where the condition fails.
pub fn half_height_radius(v1: &RadialPotential) -> f64 {
    let support = v1.support_radius();
    let half = 0.5 * v1.value(0.0);
    let above = |r: f64| v1.value(r) > half;
    let n = 10_000usize;
    let step = support / n as f64;
    let mut radii: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    radii.extend(v1.breakpoints());
    radii.push(support * (1.0 + 1e-9) + 1e-12);
    radii.sort_by(f64::total_cmp);
    let Some(first_bad) = radii.iter().position(|&r| !above(r)) else {
        return support;
    };
    if first_bad == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (radii[first_bad - 1], radii[first_bad]);
    while hi - lo > 1e-15 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct V1PrimeResult {
    /// Scattering length of `2 V1'` in the half normalization.
    pub a_prime: f64,
    /// Half-height radius `R` of `v1`.
    pub radius: f64,
    /// `v1 - v1(0)/2` on `[0, R)`, zero beyond.
    pub v1_prime: RadialPotential,
}

/// Scattering length `a'` of `2 V1'`, where `V1' = v1 - v1(0)/2` inside the
/// half-height radius and zero outside.
///
/// The `-Δ + (2V1')/2` equation is `-f'' + V1' f = 0`, so this is the
/// unhalved solve on `V1'`.
pub fn scattering_length_v1_prime(pair: &PotentialPair) -> Result<V1PrimeResult> {
    pair.validate().into_result()?;
    let v10 = pair.v1.value(0.0);
    let radius = half_height_radius(&pair.v1);
    let v1_prime = pair.v1.restricted_shifted(radius, -0.5 * v10);
    let sol = solve_radial(
        &v1_prime,
        false,
        ScatteringOptions {
            step: Some(radius / DEFAULT_STEPS),
            r_match: None,
        },
    )?;
    Ok(V1PrimeResult {
        a_prime: sol.a,
        radius,
        v1_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form scattering length of a square barrier of height `v0` and
    /// range `r` for `-f'' + c v0 f = 0`: `a = r - tanh(κ r)/κ`, `κ = sqrt(c v0)`.
    fn barrier_oracle(v0: f64, r: f64, c: f64) -> f64 {
        let kappa = (c * v0).sqrt();
        r - (kappa * r).tanh() / kappa
    }

    fn barrier(v0: f64, r: f64) -> RadialPotential {
        RadialPotential::constant_on(0.0, r, v0).unwrap()
    }

    #[test]
    fn zero_potential_has_zero_length() {
        let sol = solve_radial(&RadialPotential::zero(), true, Default::default()).unwrap();
        assert_eq!(sol.a, 0.0);
        let sol = solve_radial(
            &RadialPotential::zero(),
            true,
            ScatteringOptions {
                step: Some(1e-3),
                r_match: Some(2.0),
            },
        )
        .unwrap();
        assert!(sol.a.abs() < 1e-12, "{}", sol.a);
    }

    #[test]
    fn square_barrier_matches_closed_form() {
        let a = scattering_length(&barrier(8.0, 1.0)).unwrap();
        let want = barrier_oracle(8.0, 1.0, 0.5);
        assert!((want - 0.517_986_2).abs() < 1e-6);
        assert!(((a - want) / want).abs() < 1e-10, "{a} vs {want}");
    }

    #[test]
    fn hard_sphere_limit() {
        let a = scattering_length(&barrier(2e4, 1.0)).unwrap();
        assert!((a - 1.0).abs() < 0.011);
        assert!(((a - barrier_oracle(2e4, 1.0, 0.5)) / a).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let p = convergence_order(&barrier(8.0, 1.0), true, 1.0 / 20.0).unwrap();
        assert!(p >= 3.5, "order {p}");
    }

    #[test]
    fn linear_beyond_support() {
        let pot = PotentialPair::reference().composite(0.05);
        let sol = solve_zero_energy_with(
            &pot,
            true,
            ScatteringOptions {
                step: Some(1e-4),
                r_match: Some(4.0),
            },
        )
        .unwrap();
        let max_f = sol.f_samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
        // Second differences vanish past r1 = 2.
        let tail: Vec<_> = sol.f_samples.iter().filter(|s| s.0 > 2.0 + 1e-9).collect();
        for w in tail.windows(3) {
            let h = w[1].0 - w[0].0;
            let second = (w[2].1 - 2.0 * w[1].1 + w[0].1) / (h * h);
            assert!(second.abs() * h * h <= 1e-8 * max_f);
        }
        // Matching at r1 instead of 4 gives the same length.
        let short = solve_zero_energy(&pot, true).unwrap();
        assert!((short.a - sol.a).abs() < 1e-10);
        for &(r, f) in tail.iter().step_by(1000) {
            let line = short.slope_at_match * (r - short.a);
            assert!((line - f).abs() <= 1e-10 * f.abs());
        }
        assert!(sol.w_positive);
    }

    #[test]
    fn deep_well_reports_bound_state() {
        let well = RadialPotential::constant_on(0.0, 1.0, -20.0).unwrap();
        assert!(matches!(
            solve_radial(&well, true, Default::default()),
            Err(Error::BoundStateDetected { .. })
        ));
    }

    #[test]
    fn half_height_radius_cases() {
        assert!((half_height_radius(&barrier(3.0, 1.0)) - 1.0).abs() < 1e-12);
        // v1 = 4 - 4 r^2 reaches 2 at r = 1/sqrt(2).
        let v = RadialPotential::new(vec![Piece::new(0.0, 1.0, vec![4.0, 0.0, -4.0])]).unwrap();
        assert!((half_height_radius(&v) - 0.5_f64.sqrt()).abs() < 1e-12);
        // v1 = 4 (1 - r) reaches 2 at r = 1/2, checked against a plain bisection.
        let v = RadialPotential::new(vec![Piece::new(0.0, 1.0, vec![4.0, -4.0])]).unwrap();
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if 4.0 - 4.0 * m > 2.0 {
                lo = m
            } else {
                hi = m
            }
        }
        assert!((half_height_radius(&v) - lo).abs() < 1e-12);
    }

    #[test]
    fn v1_prime_of_square_barrier() {
        let pair = PotentialPair::new(
            barrier(8.0, 1.0),
            RadialPotential::constant_on(1.0, 2.0, 1.0).unwrap(),
            1.0,
            2.0,
        );
        let res = scattering_length_v1_prime(&pair).unwrap();
        assert!((res.radius - 1.0).abs() < 1e-12);
        assert!((res.v1_prime.value(0.5) - 4.0).abs() < 1e-15);
        // -f'' + 4 f = 0 on [0, 1]: κ = 2.
        let want = barrier_oracle(4.0, 1.0, 1.0);
        assert!((res.a_prime - want).abs() < 1e-10, "{} vs {want}", res.a_prime);
    }

    #[test]
    fn scattering_length_decreases_with_coupling() {
        let pair = PotentialPair::reference();
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let lambda = 0.1 * k as f64;
            let a = solve_zero_energy(&pair.composite(lambda), true).unwrap().a;
            assert!(a <= prev + 1e-14, "a({lambda}) = {a} > {prev}");
            prev = a;
        }
        let a0 = solve_zero_energy(&pair.composite(0.0), true).unwrap().a;
        assert!(a0 > 0.0 && a0 <= pair.r1);
    }
}
