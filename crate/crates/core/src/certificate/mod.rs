//! Constants chain `ℓ̃ → E′(ℓ) → δ → ℓ → c₁ → λ → M`, the bound formulas built
//! on it, and a numerical probe of the stability constant.

mod bounds;
mod dyson;
mod stability;

use serde::{Deserialize, Serialize};

pub use bounds::{
    deficit_exponent, evaluate_bounds, inclusion_exclusion_count, inclusion_exclusion_monte_carlo,
    BoundEvaluation, InclusionExclusion, InclusionExclusionMc, OccupationOptimum,
};
pub use dyson::{dyson_e_prime, smallest_tilde_ell, DysonConstants, TILDE_ELL_TOL};
pub use stability::{
    probe_stability, probe_stability_with, StabilityEntry, StabilityEstimate, StabilityOptions,
    COLLAPSE_RATIO,
};

use crate::error::{Error, Result};
use crate::potential::PotentialPair;
use crate::scattering::solve_zero_energy;

pub const DEFAULT_KAPPA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BSource {
    Supplied,
    Probed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub a_prime: f64,
    /// Half-height radius of `v1`.
    #[serde(rename = "R")]
    pub radius: f64,
    pub v1_at_zero: f64,
    pub tilde_ell: f64,
    /// `3a'/((2ℓ̃)³ − R³)`, strictly between 0 and `v1(0)/2`.
    pub tilde_ell_constraint: f64,
    /// `E'(ℓ)` at the certified `ℓ`.
    #[serde(rename = "E_prime")]
    pub e_prime: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub b_source: BSource,
    pub delta: f64,
    /// `max(10 ℓ̃, 2 r1)`.
    pub ell: f64,
    pub c1: f64,
    pub lambda: f64,
    /// Scattering length of `v1 − λ v2`.
    pub a: f64,
    /// Scattering length of `v1`.
    pub a1: f64,
    pub w_positive: bool,
    pub kappa: f64,
    /// `(a/a1) 8κ² + 1`.
    pub m_real: f64,
    pub m_floor: u64,
    pub pair: PotentialPair,
}

/// `min(1/2, E'/(6B))`, with `B = 0` giving `1/2`.
pub fn delta_from(e_prime: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.5
    } else {
        (e_prime / (6.0 * b)).min(0.5)
    }
}

pub fn build_certificate(pair: &PotentialPair, b: f64) -> Result<CertificateReport> {
    build_certificate_with(pair, b, BSource::Supplied, DEFAULT_KAPPA)
}

pub fn build_certificate_with(
    pair: &PotentialPair,
    b: f64,
    b_source: BSource,
    kappa: f64,
) -> Result<CertificateReport> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidInput(format!("B must be finite and nonnegative, got {b}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    pair.validate().into_result()?;
    let dyson = DysonConstants::from_pair(pair)?;
    let ell = (10.0 * dyson.tilde_ell).max(2.0 * pair.r1);
    let e_prime = dyson.e_prime(ell);
    let delta = delta_from(e_prime, b);
    let c1 = (1.0 - 3f64.sqrt() * pair.r1 / ell) * delta;
    let lambda = 0.5 * c1;
    let sol = solve_zero_energy(&pair.composite(lambda), true)?;
    let a1 = solve_zero_energy(&pair.composite(0.0), true)?.a;
    let m_real = sol.a / a1 * 8.0 * kappa * kappa + 1.0;
    Ok(CertificateReport {
        a_prime: dyson.a_prime,
        radius: dyson.radius,
        v1_at_zero: dyson.v1_at_zero,
        tilde_ell: dyson.tilde_ell,
        tilde_ell_constraint: dyson.constraint_value(),
        e_prime,
        b,
        b_source,
        delta,
        ell,
        c1,
        lambda,
        a: sol.a,
        a1,
        w_positive: sol.w_positive,
        kappa,
        m_real,
        m_floor: m_real.floor() as u64,
        pair: pair.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::RadialPotential;

    #[test]
    fn delta_arithmetic() {
        assert!((delta_from(0.6, 1.0) - 0.1).abs() < 1e-16);
        assert_eq!(delta_from(0.6, 0.0), 0.5);
        assert_eq!(delta_from(100.0, 1.0), 0.5);
    }

    #[test]
    fn reference_chain() {
        let pair = PotentialPair::reference();
        let c = build_certificate(&pair, 0.0).unwrap();
        assert!((c.radius - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.delta, 0.5);
        assert!((c.lambda - (1.0 - 3f64.sqrt() * pair.r1 / c.ell) / 4.0).abs() < 1e-15);
        assert!(c.lambda > 0.0 && c.lambda <= 0.25);
        assert!(c.tilde_ell_constraint > 0.0 && c.tilde_ell_constraint < 0.5 * c.v1_at_zero);
        assert!(c.a <= c.a1 && c.w_positive);
        assert_eq!(c.m_floor, c.m_real.floor() as u64);
    }

    #[test]
    fn delta_and_lambda_decrease_in_b() {
        let pair = PotentialPair::reference();
        let mut prev = build_certificate(&pair, 0.0).unwrap();
        for b in [1e-6, 1e-4, 1e-3, 1e-2, 0.1, 1.0] {
            let c = build_certificate(&pair, b).unwrap();
            assert!(c.delta <= prev.delta && c.lambda <= prev.lambda);
            assert!(c.a >= prev.a);
            prev = c;
        }
    }

    #[test]
    fn absent_attraction() {
        let v1 = RadialPotential::constant_on(0.0, 1.0, 8.0).unwrap();
        let pair = PotentialPair::new(v1, RadialPotential::zero(), 1.0, 2.0);
        let c = build_certificate(&pair, 0.0).unwrap();
        assert_eq!(c.delta, 0.5);
        assert_eq!(c.a, c.a1);
    }
}
