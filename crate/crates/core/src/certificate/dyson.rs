use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialPair;
use crate::scattering::{scattering_length_v1_prime, V1PrimeResult};

/// Relative bisection tolerance for `ℓ̃`.
pub const TILDE_ELL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DysonConstants {
    pub a_prime: f64,
    /// Half-height radius `R` of `v1`.
    pub radius: f64,
    pub v1_at_zero: f64,
    /// Smallest `ℓ̃` (to bisection tolerance) with
    /// `0 < 3a'/((2ℓ̃)³ − R³) < v1(0)/2`.
    pub tilde_ell: f64,
}

impl DysonConstants {
    pub fn from_pair(pair: &PotentialPair) -> Result<Self> {
        let V1PrimeResult { a_prime, radius, .. } = scattering_length_v1_prime(pair)?;
        let v1_at_zero = pair.v1.value(0.0);
        let tilde_ell = smallest_tilde_ell(a_prime, radius, v1_at_zero)?;
        Ok(Self {
            a_prime,
            radius,
            v1_at_zero,
            tilde_ell,
        })
    }

    /// `E'(ℓ)`: `3a'/((2ℓ̃)³ − R³)` below `ℓ̃`, `3a'/((2ℓ)³ − R³)` above.
    pub fn e_prime(&self, ell: f64) -> f64 {
        let l = ell.max(self.tilde_ell);
        3.0 * self.a_prime / ((2.0 * l).powi(3) - self.radius.powi(3))
    }

    /// The constraint value `3a'/((2ℓ̃)³ − R³)` at the chosen `ℓ̃`.
    pub fn constraint_value(&self) -> f64 {
        self.e_prime(self.tilde_ell)
    }
}

fn admissible(a_prime: f64, radius: f64, v1_at_zero: f64, l: f64) -> bool {
    let denom = (2.0 * l).powi(3) - radius.powi(3);
    if denom <= 0.0 {
        return false;
    }
    let q = 3.0 * a_prime / denom;
    q > 0.0 && q < 0.5 * v1_at_zero
}

/// Bisection for the smallest admissible `ℓ̃`; the returned value satisfies
/// the strict inequality and lies within `TILDE_ELL_TOL` (relative) of the
/// infimum.
pub fn smallest_tilde_ell(a_prime: f64, radius: f64, v1_at_zero: f64) -> Result<f64> {
    if !(v1_at_zero > 0.0) {
        return Err(Error::NoAdmissibleTildeEll { v1_at_zero });
    }
    if !(a_prime > 0.0) {
        return Err(Error::InvalidInput(format!(
            "a' = {a_prime} must be positive for an admissible tilde-ell"
        )));
    }
    let mut lo = 0.5 * radius;
    let mut hi = lo.max(1.0);
    while !admissible(a_prime, radius, v1_at_zero, hi) {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoAdmissibleTildeEll { v1_at_zero });
        }
    }
    while hi - lo > TILDE_ELL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if admissible(a_prime, radius, v1_at_zero, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `E'(ℓ)` for a pair, computing `a'`, `R` and `ℓ̃` on the way.
pub fn dyson_e_prime(pair: &PotentialPair, ell: f64) -> Result<f64> {
    Ok(DysonConstants::from_pair(pair)?.e_prime(ell))
}
