use std::f64::consts::PI;

use bose_bounds::certificate::{
    build_certificate, evaluate_bounds, inclusion_exclusion_count, probe_stability, DysonConstants,
};
use bose_bounds::potential::{PotentialPair, RadialPotential};
use bose_bounds::Error;

#[test]
fn probed_b_feeds_a_complete_certificate() {
    let pair = PotentialPair::reference();
    let est = probe_stability(&pair, 4, 3000, 9).unwrap();
    assert!(est.b_hat > 0.0);
    let c = build_certificate(&pair, est.b_hat).unwrap();
    assert!(c.delta < 0.5 && c.lambda > 0.0 && c.w_positive);
    let e = evaluate_bounds(&c, 1e-6, 0.02, 1e5, 1.0).unwrap();
    assert!(e.theorem1_bound < 4.0 * PI * c.a * 1e-6 * 1e5);
}

#[test]
fn square_barrier_tilde_ell_satisfies_the_strict_inequality() {
    // Barrier of height 8 on [0, 1]: the half-height radius is 1.
    let v1 = RadialPotential::constant_on(0.0, 1.0, 8.0).unwrap();
    let pair = PotentialPair::new(v1, RadialPotential::zero(), 1.0, 2.0);
    let d = DysonConstants::from_pair(&pair).unwrap();
    assert!((d.radius - 1.0).abs() < 1e-12);
    let q = |l: f64| 3.0 * d.a_prime / ((2.0 * l).powi(3) - 1.0);
    assert!(q(d.tilde_ell) > 0.0 && q(d.tilde_ell) < 4.0);
    // Slightly smaller values are not admissible.
    let below = d.tilde_ell * (1.0 - 1e-9);
    assert!(!((2.0 * below).powi(3) > 1.0 && q(below) < 4.0));
}

#[test]
fn degenerate_inputs_are_rejected() {
    let c = build_certificate(&PotentialPair::reference(), 0.0).unwrap();
    assert!(matches!(evaluate_bounds(&c, 1e-4, 0.05, 10.0, 1.0), Err(Error::EpsilonOutOfRange(_))));
    assert!(matches!(inclusion_exclusion_count(3, 1.0, 1.5), Err(Error::DegenerateGeometry(_))));
    assert!(build_certificate(&PotentialPair::reference(), -1.0).is_err());
}
