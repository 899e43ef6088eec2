use bose_bounds::certificate::{build_certificate, delta_from};
use bose_bounds::lanczos::LanczosOptions;
use bose_bounds::perturbation::run_trial;
use bose_bounds::potential::{Piece, PotentialPair, RadialPotential};
use bose_bounds::scattering::{solve_radial, solve_zero_energy, ScatteringOptions};
use bose_bounds::spectral::{neumann_ball_ground, neumann_box_3d};
use proptest::prelude::*;

fn quadratic_barrier(height: f64, range: f64) -> RadialPotential {
    RadialPotential::new(vec![Piece::new(0.0, range, vec![height, 0.0, -height / (range * range)])]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nonnegative_potentials_have_bounded_length(height in 0.01f64..50.0, range in 0.2f64..3.0) {
        let v = quadratic_barrier(height, range);
        let a = solve_radial(&v, true, ScatteringOptions::default()).unwrap().a;
        prop_assert!(a >= 0.0 && a <= range);
    }

    #[test]
    fn length_is_nonincreasing_in_lambda(l1 in 0.0f64..0.5, dl in 0.001f64..0.5) {
        let pair = PotentialPair::reference();
        let a1 = solve_zero_energy(&pair.composite(l1), true).unwrap().a;
        let a2 = solve_zero_energy(&pair.composite(l1 + dl), true).unwrap().a;
        prop_assert!(a2 <= a1);
    }

    #[test]
    fn perturbation_trials_respect_the_bound(seed in any::<u64>(), trial in 0usize..20) {
        let o = run_trial(trial, seed, 40);
        prop_assert!(o.slack >= -1e-10 * o.scale);
        prop_assert!(o.e0 <= o.x_inf + 1e-10 * o.scale);
        prop_assert!(o.e0 <= o.mean + 1e-10 * o.scale);
        if o.psi_prime_bound.is_finite() {
            prop_assert!(o.psi_prime_norm <= o.psi_prime_bound * (1.0 + 1e-8) + 1e-14);
        }
    }

    #[test]
    fn delta_and_lambda_nonincreasing_in_b(b1 in 0.0f64..2.0, db in 0.0f64..2.0) {
        let pair = PotentialPair::reference();
        let c1 = build_certificate(&pair, b1).unwrap();
        let c2 = build_certificate(&pair, b1 + db).unwrap();
        prop_assert!(c2.delta <= c1.delta);
        prop_assert!(c2.lambda <= c1.lambda);
        prop_assert!(c2.lambda > 0.0 && c2.lambda <= 0.25);
        prop_assert!(c2.a <= c2.a1);
    }

    #[test]
    fn lambda_grows_with_ell_toward_half_delta(e in 1e-6f64..1.0, b in 0.0f64..1.0, r1 in 0.5f64..3.0, l in 1.0f64..100.0) {
        // c1 = (1 − √3 r1/ℓ) δ at two cell sizes ℓ < ℓ'.
        let ell = 2.0 * r1 * l;
        let delta = delta_from(e, b);
        let lam = |ell: f64| 0.5 * (1.0 - 3f64.sqrt() * r1 / ell) * delta;
        prop_assert!(lam(ell) < lam(2.0 * ell));
        prop_assert!(lam(2.0 * ell) < 0.5 * delta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn adding_a_multiplier_moves_the_ground_energy_its_way(c in 0.1f64..5.0, range in 0.3f64..1.2) {
        let opts = LanczosOptions::default();
        let free = neumann_box_3d(None, 3.0, 6, 1, &opts).unwrap().ground();
        let up = RadialPotential::constant_on(0.0, range, c).unwrap();
        let down = RadialPotential::constant_on(0.0, range, -c).unwrap();
        let e_up = neumann_box_3d(Some(&up), 3.0, 6, 1, &opts).unwrap().ground();
        let e_down = neumann_box_3d(Some(&down), 3.0, 6, 1, &opts).unwrap().ground();
        prop_assert!(free.abs() < 1e-10);
        prop_assert!(e_up >= free - 1e-8);
        prop_assert!(e_down <= free + 1e-8);
    }

    #[test]
    fn ball_energy_monotone_in_attraction(l1 in 0.0f64..0.5, dl in 0.01f64..0.5) {
        let pair = PotentialPair::reference();
        let e1 = neumann_ball_ground(&pair.composite(l1), 20.0, 4000).unwrap().ground();
        let e2 = neumann_ball_ground(&pair.composite(l1 + dl), 20.0, 4000).unwrap().ground();
        prop_assert!(e2 <= e1);
    }
}

#[test]
fn f_is_linear_beyond_the_support() {
    let pair = PotentialPair::reference();
    let sol = solve_zero_energy(&pair.composite(0.1), true).unwrap();
    let fmax = sol.f_samples.iter().fold(0.0_f64, |m, s| m.max(s.1.abs()));
    for r in [2.5, 3.0, 7.0] {
        let h = 0.1;
        let d2 = sol.f_at(r + h) - 2.0 * sol.f_at(r) + sol.f_at(r - h);
        assert!(d2.abs() <= 1e-8 * fmax);
    }
}

#[test]
fn pair_json_round_trip() {
    let pair = PotentialPair::reference();
    let text = serde_json::to_string(&pair).unwrap();
    let back: PotentialPair = serde_json::from_str(&text).unwrap();
    assert_eq!(pair, back);
    let handwritten = r#"{"v1": {"pieces": [{"lo": 0, "hi": 1, "coeffs": [4]}]}, "v2": {"pieces": []}, "r0": 1, "r1": 2}"#;
    let p: PotentialPair = serde_json::from_str(handwritten).unwrap();
    assert_eq!(p.v1.value(0.5), 4.0);
}
