use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CertificateReport;
use crate::error::{Error, Result};

/// Exclusive upper end of the admissible exponent range.
pub const EPSILON_MAX: f64 = 1.0 / 31.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationOptimum {
    /// Minimizer of `(ℓ₂³/L³)(t − N)² + Nκ² − t` over `[0, N]`.
    pub t_star: f64,
    /// Unconstrained vertex `N + L³/(2ℓ₂³)`.
    pub vertex: f64,
    pub minimum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub rho: f64,
    pub epsilon: f64,
    pub n: f64,
    pub c_prime: f64,
    pub a: f64,
    pub r1: f64,
    pub ell0: f64,
    pub ell1: f64,
    pub ell2: f64,
    pub kappa: f64,
    /// Side of the full box, `(N/ρ)^{1/3}`.
    pub big_l: f64,
    pub lemma5_bound: f64,
    /// Two-particle value of `q(n)`.
    pub q2: f64,
    /// `(k, 4πa/ℓ₂³ k(k−1)(1 − C′ρ^ε))` for `k = 2..=5`.
    pub lemma6_bounds: Vec<(usize, f64)>,
    pub occupation_optimum: OccupationOptimum,
    pub theorem1_bound: f64,
    /// `4πaρN`.
    pub reference: f64,
    pub ratio: f64,
}

impl BoundEvaluation {
    pub fn lemma6_bound(&self, k: usize) -> f64 {
        let kk = k as f64;
        4.0 * PI * self.a / self.ell2.powi(3) * kk * (kk - 1.0) * (1.0 - self.c_prime * self.rho.powf(self.epsilon))
    }
}

pub fn evaluate_bounds(
    cert: &CertificateReport,
    rho: f64,
    epsilon: f64,
    n: f64,
    c_prime: f64,
) -> Result<BoundEvaluation> {
    if !(epsilon > 0.0 && epsilon < EPSILON_MAX) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if !(rho > 0.0 && rho < 1.0) || !(n >= 1.0) || !c_prime.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need 0 < rho < 1, N >= 1 and finite C', got rho = {rho}, N = {n}, C' = {c_prime}"
        )));
    }
    let a = cert.a;
    let r1 = cert.pair.r1;
    let re = rho.powf(epsilon);
    let ell1 = rho.powf((-1.0 + epsilon) / 3.0);
    let ell0 = rho.powf((-1.0 + 5.0 * epsilon) / 3.0);
    let kappa = rho.powf(-epsilon);
    let ell2 = ell1 * kappa;
    let big_l = (n / rho).cbrt();

    let lemma5_bound = (1.0 - re) * 8.0 * PI * a / ell1.powi(3);
    let q2 = (1.0 - re) / (1.0 + 5.0 * re) * 8.0 * PI * a / ell1.powi(3);

    let curvature = ell2.powi(3) / big_l.powi(3);
    let vertex = n + 0.5 / curvature;
    let t_star = vertex.clamp(0.0, n);
    let g = |t: f64| curvature * (t - n).powi(2) + n * kappa * kappa - t;
    let occupation_optimum = OccupationOptimum {
        t_star,
        vertex,
        minimum: g(t_star),
    };

    let theorem1_bound = 4.0 * PI * a / ell2.powi(3) * (1.0 - c_prime * re) * occupation_optimum.minimum
        / (1.0 + 3f64.sqrt() * r1 / ell2);
    let reference = 4.0 * PI * a * rho * n;

    let mut eval = BoundEvaluation {
        rho,
        epsilon,
        n,
        c_prime,
        a,
        r1,
        ell0,
        ell1,
        ell2,
        kappa,
        big_l,
        lemma5_bound,
        q2,
        lemma6_bounds: Vec::new(),
        occupation_optimum,
        theorem1_bound,
        reference,
        ratio: theorem1_bound / reference,
    };
    eval.lemma6_bounds = (2..=5).map(|k| (k, eval.lemma6_bound(k))).collect();
    Ok(eval)
}

/// Least-squares slope of `ln(1 − ratio)` against `ln ρ`.
pub fn deficit_exponent(evals: &[BoundEvaluation]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = evals
        .iter()
        .filter(|e| e.ratio < 1.0)
        .map(|e| (e.rho.ln(), (1.0 - e.ratio).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionExclusion {
    pub k: usize,
    pub ell1: f64,
    pub ell2: f64,
    /// `C(k,2) (ℓ₂ − 2ℓ₁)³ ℓ₁³ / ℓ₂⁶`.
    pub pair_term: f64,
    /// `C(k,3) (ℓ₁/ℓ₂)⁶`.
    pub triple_term: f64,
    /// `(pair − 3·triple) / (C(k,2) (ℓ₁/ℓ₂)³)`.
    pub net_factor: f64,
    /// `C` with `net_factor = 1 − C ℓ₁/ℓ₂`.
    pub net_constant: f64,
}

fn binomial(k: usize, j: usize) -> f64 {
    if j > k {
        return 0.0;
    }
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

pub fn inclusion_exclusion_count(k: usize, ell1: f64, ell2: f64) -> Result<InclusionExclusion> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need k >= 2, got {k}")));
    }
    if !(ell1 > 0.0) || !(ell2 > 2.0 * ell1) {
        return Err(Error::DegenerateGeometry(format!(
            "need ell2 > 2 ell1 > 0, got ell1 = {ell1}, ell2 = {ell2}"
        )));
    }
    let x = ell1 / ell2;
    let pair_term = binomial(k, 2) * (ell2 - 2.0 * ell1).powi(3) * ell1.powi(3) / ell2.powi(6);
    let triple_term = binomial(k, 3) * x.powi(6);
    let net_factor = (pair_term - 3.0 * triple_term) / (binomial(k, 2) * x.powi(3));
    Ok(InclusionExclusion {
        k,
        ell1,
        ell2,
        pair_term,
        triple_term,
        net_factor,
        net_constant: (1.0 - net_factor) / x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionExclusionMc {
    pub closed: InclusionExclusion,
    pub samples: usize,
    pub seed: u64,
    /// Mean number of pairs sharing a full cell, and its standard error.
    pub pair_mean: f64,
    pub pair_sigma: f64,
    pub triple_mean: f64,
    pub triple_sigma: f64,
    /// Mean number of full cells holding exactly two points.
    pub exactly_two_mean: f64,
    pub exactly_two_sigma: f64,
    /// Expectations over a uniform shift: each axis has `ℓ₂/ℓ₁ − 1` full
    /// cells on average, so `C(k,j)(ℓ₂ − ℓ₁)³ ℓ₁^{3(j−1)} / ℓ₂^{3j}`.
    pub pair_exact: f64,
    pub triple_exact: f64,
    /// `(mean − closed form)/σ`.
    pub pair_z: f64,
    pub triple_z: f64,
    pub pair_exact_z: f64,
    pub triple_exact_z: f64,
    /// Mean exactly-two count minus `pair_term − 3·triple_term`.
    pub lower_bound_margin: f64,
}

impl InclusionExclusionMc {
    pub fn closed_form_within(&self, sigmas: f64) -> bool {
        self.pair_z.abs() <= sigmas && self.triple_z.abs() <= sigmas
    }

    pub fn exact_within(&self, sigmas: f64) -> bool {
        self.pair_exact_z.abs() <= sigmas && self.triple_exact_z.abs() <= sigmas
    }
}

/// Standardized deviation from `target`. The variance is floored at the
/// Poisson value `target` so that rare counts with no observed events are
/// not judged against a zero standard error.
fn z_score(mean: f64, sigma: f64, target: f64, samples: usize) -> f64 {
    let sigma = sigma.max((target / samples as f64).sqrt());
    if sigma > 0.0 {
        (mean - target) / sigma
    } else if mean == target {
        0.0
    } else {
        f64::INFINITY.copysign(mean - target)
    }
}

/// Drops `k` uniform points into `[0, ℓ₂]³` and a uniformly shifted grid of
/// side `ℓ₁`, then counts coincidences inside cells not cut by the walls.
pub fn inclusion_exclusion_monte_carlo(
    k: usize,
    ell1: f64,
    ell2: f64,
    samples: usize,
    seed: u64,
) -> Result<InclusionExclusionMc> {
    let closed = inclusion_exclusion_count(k, ell1, ell2)?;
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<Option<[i64; 3]>> = vec![None; k];
    let mut acc = [[0.0f64; 2]; 3];
    for _ in 0..samples {
        let shift: [f64; 3] = [rng.gen::<f64>() * ell1, rng.gen::<f64>() * ell1, rng.gen::<f64>() * ell1];
        for c in cells.iter_mut() {
            let mut idx = [0i64; 3];
            let mut full = true;
            for (d, slot) in idx.iter_mut().enumerate() {
                let x = rng.gen::<f64>() * ell2;
                let j = ((x - shift[d]) / ell1).floor();
                full &= j >= 0.0 && shift[d] + (j + 1.0) * ell1 <= ell2;
                *slot = j as i64;
            }
            *c = full.then_some(idx);
        }
        let (mut pairs, mut triples, mut twos) = (0.0, 0.0, 0.0);
        for i in 0..k {
            let Some(ci) = cells[i] else { continue };
            if cells[..i].contains(&Some(ci)) {
                continue;
            }
            let m = cells[i..].iter().filter(|&&c| c == Some(ci)).count();
            pairs += binomial(m, 2);
            triples += binomial(m, 3);
            if m == 2 {
                twos += 1.0;
            }
        }
        for (slot, v) in acc.iter_mut().zip([pairs, triples, twos]) {
            slot[0] += v;
            slot[1] += v * v;
        }
    }
    let ns = samples as f64;
    let stats = |s: [f64; 2]| {
        let mean = s[0] / ns;
        let var = ((s[1] - ns * mean * mean) / (ns - 1.0)).max(0.0);
        (mean, (var / ns).sqrt())
    };
    let (pair_mean, pair_sigma) = stats(acc[0]);
    let (triple_mean, triple_sigma) = stats(acc[1]);
    let (exactly_two_mean, exactly_two_sigma) = stats(acc[2]);
    let full = (ell2 - ell1).powi(3);
    let pair_exact = binomial(k, 2) * full * ell1.powi(3) / ell2.powi(6);
    let triple_exact = binomial(k, 3) * full * ell1.powi(6) / ell2.powi(9);
    Ok(InclusionExclusionMc {
        pair_z: z_score(pair_mean, pair_sigma, closed.pair_term, samples),
        triple_z: z_score(triple_mean, triple_sigma, closed.triple_term, samples),
        pair_exact_z: z_score(pair_mean, pair_sigma, pair_exact, samples),
        triple_exact_z: z_score(triple_mean, triple_sigma, triple_exact, samples),
        lower_bound_margin: exactly_two_mean - (closed.pair_term - 3.0 * closed.triple_term),
        closed,
        samples,
        seed,
        pair_mean,
        pair_sigma,
        triple_mean,
        triple_sigma,
        exactly_two_mean,
        exactly_two_sigma,
        pair_exact,
        triple_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::build_certificate;
    use crate::partition::sub_boxes;
    use crate::potential::PotentialPair;
    use proptest::prelude::*;

    #[test]
    fn two_points_have_no_triples() {
        let c = inclusion_exclusion_count(2, 1.0, 10.0).unwrap();
        assert_eq!(c.triple_term, 0.0);
        assert!((c.pair_term - 512.0 / 1e6).abs() < 1e-18);
        assert!(matches!(
            inclusion_exclusion_count(3, 1.0, 2.0),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn pair_term_small_cell_limit() {
        for k in [2usize, 3, 7] {
            let x: f64 = 1e-4;
            let c = inclusion_exclusion_count(k, x, 1.0).unwrap();
            let lead = (k * (k - 1)) as f64 / 2.0 * x.powi(3);
            assert!((c.pair_term / lead - 1.0).abs() < 7e-4);
        }
    }

    #[test]
    fn mean_full_cell_count_matches_sub_boxes() {
        // Average the number of full cells over a fine grid of shifts.
        let (side, cell, m) = (10.0, 1.0, 64);
        let mut total = 0.0;
        for i in 0..m {
            let u = (i as f64 + 0.5) / m as f64;
            total += sub_boxes(side, cell, [u, 0.5, 0.5]).iter().filter(|b| b.full).count() as f64;
        }
        assert!((total / m as f64 - 9.0f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_exact_expectation() {
        let mc = inclusion_exclusion_monte_carlo(3, 1.0, 5.0, 200_000, 11).unwrap();
        assert!(mc.exact_within(4.0), "{mc:?}");
        assert!(mc.lower_bound_margin > 0.0);
        assert!(mc.pair_mean > mc.closed.pair_term);
    }

    fn cert() -> CertificateReport {
        build_certificate(&PotentialPair::reference(), 0.0).unwrap()
    }

    #[test]
    fn k2_lemma6_is_scaled_lemma5() {
        let c = cert();
        for rho in [1e-3, 1e-5, 1e-8] {
            let e = evaluate_bounds(&c, rho, 0.03, 1000.0, 1.0).unwrap();
            let scaled = e.lemma5_bound * (e.ell1 / e.ell2).powi(3);
            assert!((e.lemma6_bound(2) / scaled - 1.0).abs() < 1e-12);
            assert_eq!(e.lemma6_bounds[0], (2, e.lemma6_bound(2)));
        }
    }

    #[test]
    fn epsilon_range() {
        let c = cert();
        assert!(matches!(evaluate_bounds(&c, 1e-3, 0.0, 10.0, 1.0), Err(Error::EpsilonOutOfRange(_))));
        assert!(matches!(evaluate_bounds(&c, 1e-3, 1.0 / 31.0, 10.0, 1.0), Err(Error::EpsilonOutOfRange(_))));
    }

    #[test]
    fn ratio_increases_toward_one() {
        let c = cert();
        let evals: Vec<_> = [1e-3, 1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&r| evaluate_bounds(&c, r, 0.03, 1e4, 1.0).unwrap())
            .collect();
        for w in evals.windows(2) {
            assert!(w[1].ratio > w[0].ratio && w[1].ratio < 1.0);
        }
    }

    #[test]
    fn deficit_exponent_reaches_epsilon_at_small_density() {
        // The deficit is about ρ^ε + ρ^{2ε}, whose log-slope exceeds ε only
        // once ρ^ε < 1/2.
        let c = cert();
        let eps = 0.03;
        let evals: Vec<_> = [1e-40, 1e-50, 1e-60]
            .iter()
            .map(|&r| evaluate_bounds(&c, r, eps, 1e6, 1.0).unwrap())
            .collect();
        assert!(deficit_exponent(&evals).unwrap() >= eps);
        let dense: Vec<_> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&r| evaluate_bounds(&c, r, eps, 1e6, 1.0).unwrap())
            .collect();
        assert!(deficit_exponent(&dense).unwrap() < eps);
    }

    proptest! {
        #[test]
        fn occupation_argmin_is_n(log_rho in -12.0f64..-1.0, eps in 0.001f64..0.032, n in 1.0f64..1e7) {
            let e = evaluate_bounds(&cert_cached(), 10f64.powf(log_rho), eps, n, 1.0).unwrap();
            prop_assert_eq!(e.occupation_optimum.t_star, n);
            // Brute-force scan of the quadratic on [0, N].
            let g = |t: f64| (e.ell2 / e.big_l).powi(3) * (t - n).powi(2) + n * e.kappa * e.kappa - t;
            for i in 0..=200 {
                let t = n * i as f64 / 200.0;
                prop_assert!(g(t) >= e.occupation_optimum.minimum - 1e-9 * g(t).abs());
            }
            prop_assert!(e.theorem1_bound <= e.reference);
            prop_assert!(e.lemma5_bound <= 8.0 * PI * e.a / e.ell1.powi(3));
            prop_assert!((e.ell1.powi(3) / e.rho.powf(-1.0 + eps) - 1.0).abs() < 1e-12);
            prop_assert!((e.ell0.powi(3) / e.rho.powf(-1.0 + 5.0 * eps) - 1.0).abs() < 1e-12);
        }
    }

    fn cert_cached() -> CertificateReport {
        use std::sync::OnceLock;
        static C: OnceLock<CertificateReport> = OnceLock::new();
        C.get_or_init(cert).clone()
    }
}
