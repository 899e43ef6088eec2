//! Spherically symmetric piecewise-polynomial potentials.
//!
//! A [`RadialPotential`] is a list of pieces, each a polynomial in the radius
//! `r` (coefficients of `r^0, r^1, ...`, absolute powers, not shifted to the
//! piece start) on a closed interval. Gaps between pieces are zero and the
//! potential vanishes beyond the last nonzero piece.
//!
//! A [`PotentialPair`] holds the repulsive part `v1` (supported in `[0, r0]`)
//! and the attractive tail `v2` (supported in `[r0, r1]`), both nonnegative.
//! The interaction actually studied is the [`CompositePotential`]
//! `v1 - coefficient * v2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing potential values to zero.
const ZERO_TOL: f64 = 1e-12;

/// One polynomial piece of a radial potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn new(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        Self { lo, hi, coeffs }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    /// Derivative with respect to `r`.
    pub fn eval_derivative(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * r + k as f64 * c)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Exact `∫_a^b p(r) r^power dr` for `[a, b]` inside the piece.
    pub fn integrate_moment(&self, a: f64, b: f64, power: u32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let e = k as i32 + power as i32 + 1;
                c * (b.powi(e) - a.powi(e)) / e as f64
            })
            .sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPotential {
    #[serde(default)]
    pieces: Vec<Piece>,
}

/// Piecewise-polynomial spherically symmetric potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct RadialPotential {
    pieces: Vec<Piece>,
}

impl TryFrom<RawPotential> for RadialPotential {
    type Error = Error;

    fn try_from(raw: RawPotential) -> Result<Self> {
        RadialPotential::new(raw.pieces)
    }
}

impl From<RadialPotential> for RawPotential {
    fn from(p: RadialPotential) -> Self {
        RawPotential { pieces: p.pieces }
    }
}

impl RadialPotential {
    /// Builds a potential from pieces in any order.
    ///
    /// Pieces must not overlap. Gaps (including `[0, first.lo]`) are filled
    /// with zero pieces and trailing zero pieces are dropped, so the stored
    /// pieces tile `[0, support_radius]` exactly.
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite()) || p.lo < 0.0 || p.hi <= p.lo {
                return Err(Error::InvalidInput(format!(
                    "piece interval [{}, {}] must satisfy 0 <= lo < hi",
                    p.lo, p.hi
                )));
            }
            if p.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
            }
        }
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut tiled: Vec<Piece> = Vec::with_capacity(pieces.len() + 1);
        let mut cursor = 0.0;
        for p in pieces {
            let scale = p.hi.abs().max(1.0);
            if p.lo < cursor - 1e-14 * scale {
                return Err(Error::InvalidInput(format!(
                    "pieces overlap at r = {} (previous piece ends at {cursor})",
                    p.lo
                )));
            }
            if p.lo > cursor {
                tiled.push(Piece::new(cursor, p.lo, vec![0.0]));
            }
            let lo = if p.lo < cursor { cursor } else { p.lo };
            cursor = p.hi;
            tiled.push(Piece::new(lo, p.hi, p.coeffs));
        }
        while tiled.last().is_some_and(Piece::is_zero) {
            tiled.pop();
        }
        Ok(Self { pieces: tiled })
    }

    /// The identically zero potential.
    pub fn zero() -> Self {
        Self { pieces: Vec::new() }
    }

    /// Constant `height` on `[lo, hi]`, zero elsewhere.
    pub fn constant_on(lo: f64, hi: f64, height: f64) -> Result<Self> {
        Self::new(vec![Piece::new(lo, hi, vec![height])])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Smallest `R` with `V(r) = 0` for all `r > R`.
    pub fn support_radius(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.hi)
    }

    /// Piece containing `r`; a shared endpoint belongs to the piece on its left.
    fn piece_at(&self, r: f64) -> Option<&Piece> {
        if r < 0.0 || r > self.support_radius() {
            return None;
        }
        let idx = self.pieces.partition_point(|p| p.hi < r);
        self.pieces.get(idx)
    }

    /// `V(r)`; zero outside `[0, support_radius]`.
    pub fn value(&self, r: f64) -> f64 {
        self.piece_at(r).map_or(0.0, |p| p.eval(r))
    }

    /// All piece endpoints, ascending, including 0 and the support radius.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        if let Some(first) = self.pieces.first() {
            out.push(first.lo);
        }
        out.extend(self.pieces.iter().map(|p| p.hi));
        out
    }

    /// Exact `∫_a^b V(r) r^power dr`.
    pub fn integrate_moment(&self, a: f64, b: f64, power: u32) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.pieces
            .iter()
            .filter(|p| p.hi > a && p.lo < b)
            .map(|p| p.integrate_moment(p.lo.max(a), p.hi.min(b), power))
            .sum()
    }

    /// Largest `|V|`, sampled densely on each piece (endpoints included).
    pub fn max_abs(&self) -> f64 {
        const PER_PIECE: usize = 2000;
        self.pieces
            .iter()
            .flat_map(|p| {
                (0..=PER_PIECE).map(move |k| {
                    let r = p.lo + (p.hi - p.lo) * k as f64 / PER_PIECE as f64;
                    p.eval(r).abs()
                })
            })
            .fold(0.0, f64::max)
    }

    /// Jumps at piece boundaries (and at the support edge, where the right
    /// limit is zero), as `(radius, left_limit - right_limit)`.
    pub fn boundary_jumps(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in self.pieces.windows(2) {
            let r = w[0].hi;
            out.push((r, w[0].eval(r) - w[1].eval(r)));
        }
        if let Some(last) = self.pieces.last() {
            out.push((last.hi, last.eval(last.hi)));
        }
        out
    }

    /// `alpha * self + beta * other` on the union of breakpoints.
    pub fn linear_combination(&self, alpha: f64, other: &RadialPotential, beta: f64) -> Self {
        let mut cuts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .chain(other.breakpoints())
            .collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
        let mut pieces = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let mut coeffs = Vec::new();
            if let Some(p) = self.piece_at(mid) {
                add_scaled(&mut coeffs, &p.coeffs, alpha);
            }
            if let Some(p) = other.piece_at(mid) {
                add_scaled(&mut coeffs, &p.coeffs, beta);
            }
            if coeffs.is_empty() {
                coeffs.push(0.0);
            }
            pieces.push(Piece::new(lo, hi, coeffs));
        }
        Self::new(pieces).expect("breakpoint union yields a valid tiling")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.linear_combination(factor, &RadialPotential::zero(), 0.0)
    }

    /// Restriction to `[0, radius]` with `shift` added on that interval:
    /// `r -> V(r) + shift` for `r < radius`, zero beyond.
    pub fn restricted_shifted(&self, radius: f64, shift: f64) -> Self {
        let mut pieces = Vec::new();
        let mut cursor = 0.0;
        for p in self.pieces.iter().filter(|p| p.lo < radius) {
            let hi = p.hi.min(radius);
            let mut coeffs = p.coeffs.clone();
            coeffs[0] += shift;
            pieces.push(Piece::new(p.lo, hi, coeffs));
            cursor = hi;
        }
        if cursor < radius {
            pieces.push(Piece::new(cursor, radius, vec![shift]));
        }
        Self::new(pieces).expect("restriction of a valid tiling is valid")
    }
}

fn add_scaled(acc: &mut Vec<f64>, coeffs: &[f64], factor: f64) {
    if acc.len() < coeffs.len() {
        acc.resize(coeffs.len(), 0.0);
    }
    for (a, &c) in acc.iter_mut().zip(coeffs) {
        *a += factor * c;
    }
}

/// Repulsive core `v1` on `[0, r0]` and attractive tail `v2` on `[r0, r1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub v1: RadialPotential,
    pub v2: RadialPotential,
    pub r0: f64,
    pub r1: f64,
}

/// A violated pair condition with the radius that witnesses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub condition: String,
    pub radius: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub failures: Vec<ValidationFailure>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<()> {
        if self.valid {
            Ok(())
        } else {
            let msg = self
                .failures
                .iter()
                .map(|f| format!("{} (r = {}, value = {})", f.condition, f.radius, f.value))
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Validation(msg))
        }
    }
}

impl PotentialPair {
    pub fn new(v1: RadialPotential, v2: RadialPotential, r0: f64, r1: f64) -> Self {
        Self { v1, v2, r0, r1 }
    }

    /// Continuous barrier-plus-well pair used throughout the tests and the
    /// acceptance suite: `v1 = 8 (1 - r^2)` on `[0, 1]` and the parabolic well
    /// `v2 = 0.4 (r - 1)(2 - r)` on `[1, 2]` (depth 0.1 at `r = 1.5`).
    pub fn reference() -> Self {
        let v1 = RadialPotential::new(vec![Piece::new(0.0, 1.0, vec![8.0, 0.0, -8.0])])
            .expect("static potential");
        let v2 = RadialPotential::new(vec![Piece::new(1.0, 2.0, vec![-0.8, 1.2, -0.4])])
            .expect("static potential");
        Self::new(v1, v2, 1.0, 2.0)
    }

    /// Checks every pair invariant by sampling with step at most `r1 / 10^4`.
    pub fn validate(&self) -> ValidationReport {
        let mut failures = Vec::new();
        let mut warnings = Vec::new();
        let fail = |failures: &mut Vec<ValidationFailure>, condition: &str, radius: f64, value: f64| {
            failures.push(ValidationFailure {
                condition: condition.to_string(),
                radius,
                value,
            })
        };

        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            fail(&mut failures, "r0 must be positive", self.r0, self.r0);
        }
        if !(self.r1 >= self.r0 && self.r1.is_finite()) {
            fail(&mut failures, "r1 must be at least r0", self.r1, self.r1);
        }
        if !failures.is_empty() {
            return ValidationReport {
                valid: false,
                failures,
                warnings,
            };
        }

        let scale = self.v1.max_abs().max(self.v2.max_abs()).max(f64::MIN_POSITIVE);
        let tol = ZERO_TOL * scale;
        let reach = self
            .r1
            .max(self.v1.support_radius())
            .max(self.v2.support_radius());
        let step = self.r1 / 1e4;
        let n = (reach / step).ceil() as usize + 1;
        let mut radii: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
        for b in self.v1.breakpoints().into_iter().chain(self.v2.breakpoints()) {
            radii.push(b);
            radii.push(b * (1.0 + 1e-9) + 1e-12);
        }
        radii.sort_by(f64::total_cmp);

        let mut seen = [false; 5];
        for &r in &radii {
            let a = self.v1.value(r);
            let b = self.v2.value(r);
            if !seen[0] && r > self.r0 && a.abs() > tol {
                seen[0] = true;
                fail(&mut failures, "v1 must vanish for r > r0", r, a);
            }
            if !seen[1] && r < self.r0 && b.abs() > tol {
                seen[1] = true;
                fail(&mut failures, "v2 must vanish for r < r0", r, b);
            }
            if !seen[2] && r > self.r1 && b.abs() > tol {
                seen[2] = true;
                fail(&mut failures, "v2 must vanish for r > r1", r, b);
            }
            if !seen[3] && a < -tol {
                seen[3] = true;
                fail(&mut failures, "v1 must be nonnegative", r, a);
            }
            if !seen[4] && b < -tol {
                seen[4] = true;
                fail(&mut failures, "v2 must be nonnegative", r, b);
            }
        }
        let v10 = self.v1.value(0.0);
        if v10 <= 0.0 {
            fail(&mut failures, "v1(0) must be positive", 0.0, v10);
        }

        for (name, pot) in [("v1", &self.v1), ("v2", &self.v2)] {
            for (r, jump) in pot.boundary_jumps() {
                if jump.abs() > tol {
                    warnings.push(format!(
                        "{name} is discontinuous at r = {r} (jump {jump:e}); accepted as a step potential"
                    ));
                }
            }
        }

        ValidationReport {
            valid: failures.is_empty(),
            failures,
            warnings,
        }
    }

    /// `v1 - coefficient * v2`.
    pub fn composite(&self, coefficient: f64) -> CompositePotential {
        CompositePotential {
            pair: self.clone(),
            coefficient,
        }
    }

    /// `V0 = v1 - v2`, the potential whose stability is assumed.
    pub fn unit_difference(&self) -> RadialPotential {
        self.v1.linear_combination(1.0, &self.v2, -1.0)
    }
}

/// `v1 - coefficient * v2` for a pair; `coefficient` is the coupling of the
/// attractive tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePotential {
    pub pair: PotentialPair,
    pub coefficient: f64,
}

impl CompositePotential {
    pub fn value(&self, r: f64) -> f64 {
        self.pair.v1.value(r) - self.coefficient * self.pair.v2.value(r)
    }

    /// Always `r1` of the pair, even when the tail coupling is zero.
    pub fn support_radius(&self) -> f64 {
        self.pair.r1
    }

    /// The composite as a single piecewise polynomial.
    pub fn to_radial(&self) -> RadialPotential {
        self.pair
            .v1
            .linear_combination(1.0, &self.pair.v2, -self.coefficient)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn barrier(height: f64, hi: f64) -> RadialPotential {
        RadialPotential::constant_on(0.0, hi, height).unwrap()
    }

    #[test]
    fn square_barrier_values() {
        let v = barrier(4.0, 1.0);
        assert_eq!(v.value(0.5), 4.0);
        assert_eq!(v.value(2.0), 0.0);
        assert_eq!(v.value(1.0), 4.0);
        assert_eq!(v.value(1.0 + 1e-12), 0.0);
        assert_eq!(v.support_radius(), 1.0);
    }

    #[test]
    fn composite_with_zero_coupling_is_v1() {
        let pair = PotentialPair::reference();
        let c = pair.composite(0.0);
        for k in 0..=300 {
            let r = k as f64 * 0.01;
            assert_eq!(c.value(r), pair.v1.value(r));
            assert_eq!(c.to_radial().value(r), pair.v1.value(r));
        }
        assert_eq!(c.support_radius(), 2.0);
    }

    #[test]
    fn gaps_are_filled_with_zero() {
        let v = RadialPotential::constant_on(1.0, 2.0, 1.0).unwrap();
        assert_eq!(v.pieces().len(), 2);
        assert_eq!(v.pieces()[0].lo, 0.0);
        assert_eq!(v.value(0.5), 0.0);
        assert_eq!(v.value(1.5), 1.0);
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let err = RadialPotential::new(vec![
            Piece::new(0.0, 1.0, vec![1.0]),
            Piece::new(0.5, 2.0, vec![1.0]),
        ]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn barrier_and_well_is_valid() {
        let pair = PotentialPair::new(
            barrier(4.0, 1.0),
            RadialPotential::constant_on(1.0, 2.0, 1.0).unwrap(),
            1.0,
            2.0,
        );
        let report = pair.validate();
        assert!(report.valid, "{report:?}");
        // Step potentials pass with warnings.
        assert!(!report.warnings.is_empty());
        assert!(PotentialPair::reference().validate().warnings.is_empty());
        assert!(PotentialPair::reference().validate().valid);
    }

    #[test]
    fn well_reaching_below_r0_is_invalid() {
        let pair = PotentialPair::new(
            barrier(4.0, 1.0),
            RadialPotential::constant_on(0.5, 2.0, 1.0).unwrap(),
            1.0,
            2.0,
        );
        let report = pair.validate();
        assert!(!report.valid);
        let f = report
            .failures
            .iter()
            .find(|f| f.condition.contains("v2 must vanish for r < r0"))
            .expect("v2 below r0 flagged");
        assert!(f.radius < 1.0 && f.radius >= 0.5);
    }

    #[test]
    fn v1_vanishing_at_origin_is_invalid() {
        // v1 = r on [0, 1]: nonnegative, but v1(0) = 0.
        let v1 = RadialPotential::new(vec![Piece::new(0.0, 1.0, vec![0.0, 1.0])]).unwrap();
        let pair = PotentialPair::new(v1, RadialPotential::zero(), 1.0, 2.0);
        let report = pair.validate();
        assert!(!report.valid);
        assert!(report
            .failures
            .iter()
            .any(|f| f.condition.contains("v1(0) must be positive")));
    }

    #[test]
    fn negative_parts_flagged() {
        let v1 = RadialPotential::new(vec![Piece::new(0.0, 1.0, vec![1.0, -3.0])]).unwrap();
        let pair = PotentialPair::new(v1, RadialPotential::zero(), 1.0, 2.0);
        assert!(pair
            .validate()
            .failures
            .iter()
            .any(|f| f.condition.contains("v1 must be nonnegative")));
    }

    #[test]
    fn moments_are_exact() {
        let v = PotentialPair::reference().v1;
        // ∫_0^1 8 (1 - r^2) r^2 dr = 8 (1/3 - 1/5) = 16/15
        assert!((v.integrate_moment(0.0, 5.0, 2) - 16.0 / 15.0).abs() < 1e-14);
        assert!((v.integrate_moment(0.0, 0.5, 0) - 8.0 * (0.5 - 0.125 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn restriction_and_shift() {
        let v = PotentialPair::reference().v1;
        let r = 0.5_f64.sqrt();
        let w = v.restricted_shifted(r, -4.0);
        assert!((w.value(0.0) - 4.0).abs() < 1e-15);
        assert!(w.value(r).abs() < 1e-12);
        assert_eq!(w.value(0.8), 0.0);
        assert!((w.support_radius() - r).abs() < 1e-15);
    }

    #[test]
    fn json_shape() {
        let json = r#"{"v1": {"pieces": [{"lo":0,"hi":1,"coeffs":[4]}]},
                       "v2": {"pieces": [{"lo":1,"hi":2,"coeffs":[1]}]},
                       "r0": 1, "r1": 2}"#;
        let pair: PotentialPair = serde_json::from_str(json).unwrap();
        assert_eq!(pair.v1.value(0.3), 4.0);
        assert_eq!(pair.v2.value(1.5), 1.0);
        let back = serde_json::to_string(&pair).unwrap();
        let again: PotentialPair = serde_json::from_str(&back).unwrap();
        assert_eq!(pair, again);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn composite_bounded_below(lambda in 0.0..=1.0f64, r in 0.0..3.0f64) {
            let pair = PotentialPair::reference();
            let c = pair.composite(lambda);
            let vmax = pair.v2.max_abs();
            prop_assert!(c.value(r) >= -lambda * vmax - 1e-12);
        }

        #[test]
        fn support_is_exact(eps in 1e-12..10.0f64, lambda in 0.0..1.0f64) {
            let c = PotentialPair::reference().composite(lambda);
            prop_assert_eq!(c.value(c.support_radius() + eps), 0.0);
            prop_assert_eq!(c.to_radial().value(2.0 + eps), 0.0);
        }

        #[test]
        fn continuity_under_refinement(r in 0.0..2.5f64, lambda in 0.0..1.0f64) {
            let v = PotentialPair::reference().composite(lambda);
            let mut prev = f64::INFINITY;
            for k in 1..8 {
                let d = 10f64.powi(-k);
                let diff = (v.value(r) - v.value(r + d)).abs();
                prop_assert!(diff <= 17.0 * d + 1e-12);
                prev = prev.min(diff);
            }
            prop_assert!(prev < 1e-5);
        }
    }
}
