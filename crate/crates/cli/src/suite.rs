//! The numbered acceptance criteria, each with its own checks and oracle.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use bose_bounds::certificate::{
    build_certificate, build_certificate_with, deficit_exponent, evaluate_bounds,
    inclusion_exclusion_monte_carlo, probe_stability, probe_stability_with, BSource,
    CertificateReport, StabilityOptions, DEFAULT_KAPPA,
};
use bose_bounds::partition::{quadrature_refinement, theorem2_bound_chain, verify_convolution_identity};
use bose_bounds::perturbation::verify_perturbation_lemma;
use bose_bounds::potential::{CompositePotential, Piece, PotentialPair, RadialPotential};
use bose_bounds::scattering::{convergence_order, scattering_length};
use bose_bounds::spectral::{neumann_ball_ground, two_body_torus_ground, wavenumber_h_for_length};
use bose_bounds::Result;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::oracle::{
    pair_distance_scan, series_scattering_length, square_barrier_length, wavenumber_newton,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Quick,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub seconds: f64,
    pub runtime_limit: f64,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub budget: Budget,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionOutcome>,
}

pub const CRITERIA: [(u8, &str, f64); 9] = [
    (1, "scattering oracle", 1.0),
    (2, "ball energy against 3a/l0^3", 60.0),
    (3, "torus energy against 8 pi a/L^3", 1200.0),
    (4, "perturbation bound fuzzing", 120.0),
    (5, "partition identities", 60.0),
    (6, "certificate pipeline", 60.0),
    (7, "inclusion-exclusion weights", 120.0),
    (8, "bound evaluation", 1.0),
    (9, "stability probe", 600.0),
];

/// Shared inputs: the reference pair certified with a probed `B`.
pub struct Suite {
    pub budget: Budget,
    pub seed: u64,
    cert: OnceLock<std::result::Result<CertificateReport, String>>,
}

struct Verdict {
    passed: bool,
    summary: String,
    details: Value,
}

impl Suite {
    pub fn new(budget: Budget, seed: u64) -> Self {
        Self {
            budget,
            seed,
            cert: OnceLock::new(),
        }
    }

    fn full(&self) -> bool {
        self.budget == Budget::Full
    }

    fn stability_options(&self) -> StabilityOptions {
        if self.full() {
            StabilityOptions {
                seed: self.seed,
                ..Default::default()
            }
        } else {
            StabilityOptions {
                n_max: 8,
                budget: 5000,
                restarts: 10,
                seed: self.seed,
                lattice_spacings: 100,
            }
        }
    }

    /// Reference pair with `B` from the stability probe.
    pub fn certificate(&self) -> Result<CertificateReport> {
        self.cert
            .get_or_init(|| {
                let pair = PotentialPair::reference();
                probe_stability_with(&pair, &self.stability_options())
                    .and_then(|est| build_certificate_with(&pair, est.b_hat, BSource::Probed, DEFAULT_KAPPA))
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(bose_bounds::Error::Validation)
    }

    pub fn run(&self, id: u8) -> CriterionOutcome {
        let (_, name, limit) = CRITERIA[(id - 1) as usize];
        // The certificate is an input, not part of the timed work.
        if matches!(id, 2 | 3 | 8) {
            let _ = self.certificate();
        }
        let start = Instant::now();
        let verdict = match id {
            1 => self.scattering(),
            2 => self.lemma4(),
            3 => self.lemma5(),
            4 => self.perturbation(),
            5 => self.partition(),
            6 => self.pipeline(),
            7 => self.inclusion_exclusion(),
            8 => self.bounds(),
            9 => self.stability(),
            _ => Err(bose_bounds::Error::InvalidInput(format!("no criterion {id}"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        let mut v = verdict.unwrap_or_else(|e| Verdict {
            passed: false,
            summary: format!("error: {e}"),
            details: Value::Null,
        });
        if self.full() && seconds > limit {
            v.passed = false;
            v.summary.push_str(&format!("; runtime {seconds:.1} s over {limit} s"));
        }
        CriterionOutcome {
            id,
            name,
            passed: v.passed,
            summary: v.summary,
            seconds,
            runtime_limit: limit,
            details: v.details,
        }
    }

    pub fn run_all(&self) -> SuiteReport {
        let criteria: Vec<_> = (1..=9).map(|id| self.run(id)).collect();
        SuiteReport {
            budget: self.budget,
            seed: self.seed,
            passed: criteria.iter().all(|c| c.passed),
            criteria,
        }
    }

    fn scattering(&self) -> Result<Verdict> {
        let v = RadialPotential::constant_on(0.0, 1.0, 8.0)?;
        let a = scattering_length(&v)?;
        let want = square_barrier_length(8.0, 1.0, 0.5);
        let rel = (a / want - 1.0).abs();
        let order = convergence_order(&v, true, 1.0 / 20.0)?;
        Ok(Verdict {
            passed: rel <= 1e-8 && order >= 3.5,
            summary: format!("a = {a:.12}, closed form {want:.12}, rel {rel:.2e}; order {order:.2}"),
            details: json!({"a": a, "closed_form": want, "relative_error": rel, "order": order}),
        })
    }

    fn lemma4(&self) -> Result<Verdict> {
        let cert = self.certificate()?;
        let v = cert.pair.composite(cert.lambda);
        let r1 = cert.pair.r1;
        let l0s: Vec<f64> = [25.0, 50.0, 100.0].iter().map(|m| m * r1).collect();
        let report = lemma4_check(&v, cert.a, &l0s, 100_000, r1)?;
        Ok(Verdict {
            passed: report.passed,
            summary: format!(
                "deviations {}; exponent {:.3}; h^2 rel {:.2e} at l0 = {}",
                report
                    .points
                    .iter()
                    .map(|p| format!("{:.3e}", p.deviation))
                    .collect::<Vec<_>>()
                    .join(", "),
                report.fitted_exponent,
                report.h_rel_at_largest,
                l0s[2]
            ),
            details: serde_json::to_value(&report).unwrap_or(Value::Null),
        })
    }

    fn lemma5(&self) -> Result<Verdict> {
        let cert = self.certificate()?;
        let v = cert.pair.composite(cert.lambda);
        let n = if self.full() { 96 } else { 64 };
        let extents: Vec<f64> = [100.0, 200.0, 400.0].iter().map(|m| m * cert.a).collect();
        let report = lemma5_check(&v, cert.a, &extents, n)?;
        let last = report.points.last().expect("three extents");
        Ok(Verdict {
            passed: report.passed,
            summary: format!(
                "E L^3/(8 pi a) = {} at n = {n}",
                report
                    .points
                    .iter()
                    .map(|p| format!("{:.4}", p.ratio))
                    .collect::<Vec<_>>()
                    .join(", ")
            ) + &format!("; largest L = {:.2}", last.extent),
            details: serde_json::to_value(&report).unwrap_or(Value::Null),
        })
    }

    fn perturbation(&self) -> Result<Verdict> {
        let (trials, dim) = if self.full() { (1000, 200) } else { (200, 100) };
        let r = verify_perturbation_lemma(trials, dim, self.seed)?;
        let passed = r.passed && r.worst_slack >= -1e-10;
        Ok(Verdict {
            passed,
            summary: format!(
                "{} violations in {trials} trials (dim <= {dim}); worst slack/scale {:.3e}; sharpest factor {:.4}",
                r.violations.len(),
                r.worst_slack,
                r.sharpest_factor
            ),
            details: serde_json::to_value(&r).unwrap_or(Value::Null),
        })
    }

    fn partition(&self) -> Result<Verdict> {
        let pair = PotentialPair::reference();
        let samples = if self.full() { 10_000 } else { 2_000 };
        let r = partition_check(&pair, 4.0, samples, self.seed)?;
        Ok(Verdict {
            passed: r.passed,
            summary: format!(
                "max deviation {:.3e} at Q = 256 (mean {:.2e}); orders {}; chain {}",
                r.convolution.max_deviation,
                r.convolution.mean_deviation,
                r.refinement
                    .iter()
                    .filter_map(|x| x.2.map(|o| format!("{o:.2}")))
                    .collect::<Vec<_>>()
                    .join(", "),
                if r.chain_holds { "holds" } else { "violated" }
            ),
            details: serde_json::to_value(&r).unwrap_or(Value::Null),
        })
    }

    fn pipeline(&self) -> Result<Verdict> {
        let pair = PotentialPair::reference();
        let est = probe_stability_with(&pair, &self.stability_options())?;
        let probed = build_certificate_with(&pair, est.b_hat, BSource::Probed, DEFAULT_KAPPA)?;
        let zero = build_certificate(&pair, 0.0)?;
        let bs = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
        let sweep: Vec<CertificateReport> = bs.iter().map(|&b| build_certificate(&pair, b)).collect::<Result<_>>()?;
        let decreasing = sweep.windows(2).all(|w| w[1].delta < w[0].delta) && sweep[0].delta < zero.delta;
        let all: Vec<&CertificateReport> = std::iter::once(&probed).chain(&sweep).chain([&zero]).collect();
        let lambda_ok = all.iter().all(|c| c.lambda > 0.0 && c.lambda <= 0.25);
        let w_ok = all.iter().all(|c| c.w_positive);
        let mut worst = 0.0_f64;
        let mut stages = Vec::new();
        for c in &all {
            let (rel, table) = recompute_certificate(c);
            worst = worst.max(rel);
            stages.push(table);
        }
        let passed = zero.delta == 0.5 && decreasing && lambda_ok && w_ok && worst <= 1e-8;
        Ok(Verdict {
            passed,
            summary: format!(
                "B^ = {:.4e}, lambda = {:.4e}; delta(B=0) = {}; delta decreasing: {decreasing}; lambda in (0, 1/4]: {lambda_ok}; w > 0: {w_ok}; worst stage rel diff {worst:.2e}",
                est.b_hat, probed.lambda, zero.delta
            ),
            details: json!({"probed": probed, "b_zero": zero, "b_sweep": bs, "deltas": sweep.iter().map(|c| c.delta).collect::<Vec<_>>(), "stages": stages, "stability": est}),
        })
    }

    fn inclusion_exclusion(&self) -> Result<Verdict> {
        let samples = if self.full() { 1_000_000 } else { 100_000 };
        let mut rows = Vec::new();
        let (mut closed_ok, mut exact_ok, mut bound_ok) = (true, true, true);
        let mut worst = (0.0_f64, 0usize, 0.0);
        for k in [2usize, 3, 5] {
            for x in [0.05, 0.1] {
                let seed = self.seed ^ ((k as u64) << 8) ^ ((x * 1000.0) as u64);
                let mc = inclusion_exclusion_monte_carlo(k, x, 1.0, samples, seed)?;
                closed_ok &= mc.closed_form_within(3.0);
                exact_ok &= mc.exact_within(3.0);
                bound_ok &= mc.lower_bound_margin >= -3.0 * mc.exactly_two_sigma;
                let z = mc.pair_z.abs().max(mc.triple_z.abs());
                if z > worst.0 {
                    worst = (z, k, x);
                }
                rows.push(mc);
            }
        }
        Ok(Verdict {
            passed: closed_ok,
            summary: format!(
                "closed forms within 3 sigma: {closed_ok} (worst |z| = {:.1} at k = {}, l1/l2 = {}); exact full-cell expectation within 3 sigma: {exact_ok}; exactly-two count above pair - 3 triple: {bound_ok}",
                worst.0, worst.1, worst.2
            ),
            details: serde_json::to_value(&rows).unwrap_or(Value::Null),
        })
    }

    fn bounds(&self) -> Result<Verdict> {
        let cert = self.certificate()?;
        let n = 1e6;
        let evals = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&rho| evaluate_bounds(&cert, rho, 0.03, n, 1.0))
            .collect::<Result<Vec<_>>>()?;
        let below = evals.iter().all(|e| e.theorem1_bound < 4.0 * PI * cert.a * e.rho * n);
        let monotone = evals.windows(2).all(|w| w[1].ratio > w[0].ratio) && evals.iter().all(|e| e.ratio < 1.0);
        let argmin = evals.iter().all(|e| e.occupation_optimum.t_star == n);
        let exponent = deficit_exponent(&evals);
        Ok(Verdict {
            passed: below && monotone && argmin,
            summary: format!(
                "ratios {}; below 4 pi a rho N: {below}; increasing as rho falls: {monotone}; t* = N: {argmin}; deficit exponent {}",
                evals.iter().map(|e| format!("{:.4}", e.ratio)).collect::<Vec<_>>().join(", "),
                exponent.map_or("n/a".into(), |p| format!("{p:.4}"))
            ),
            details: json!({"evaluations": evals, "deficit_exponent": exponent}),
        })
    }

    fn stability(&self) -> Result<Verdict> {
        let opts = self.stability_options();
        let barrier = RadialPotential::new(vec![Piece::new(0.0, 1.0, vec![8.0, 0.0, -8.0])])?;

        let free = PotentialPair::new(barrier.clone(), RadialPotential::zero(), 1.0, 2.0);
        let free_est = probe_stability_with(&free, &opts)?;

        let d = 0.5;
        let well = PotentialPair::new(barrier, RadialPotential::constant_on(1.0, 2.0, d)?, 1.0, 2.0);
        let mut wells = Vec::new();
        let mut wells_ok = true;
        for (label, pair, want) in [("square well", well, Some(0.5 * d)), ("reference", PotentialPair::reference(), None)] {
            let est = probe_stability(&pair, 2, opts.budget, opts.seed)?;
            let b2 = -est.per_n[0].min_energy / 2.0;
            let (scan_min, scan_r) = pair_distance_scan(&pair, 2_000_000);
            let oracle = -scan_min / 2.0;
            let ok = (b2 - oracle).abs() <= 1e-6 && want.is_none_or(|w| (b2 - w).abs() <= 1e-6);
            wells_ok &= ok;
            wells.push(json!({"pair": label, "b2": b2, "scan_oracle": oracle, "scan_radius": scan_r, "expected": want, "ok": ok}));
        }

        let unstable = PotentialPair::new(
            RadialPotential::constant_on(0.0, 1.0, 1.0)?,
            RadialPotential::constant_on(1.0, 4.0, 10.0)?,
            1.0,
            4.0,
        );
        let collapse = probe_stability_with(&unstable, &opts)?;
        let passed = free_est.b_hat == 0.0 && wells_ok && collapse.collapse;
        Ok(Verdict {
            passed,
            summary: format!(
                "B^ = {} without attraction; B^_2 matches scan: {wells_ok}; collapse flag {} (ratio {:.2}) at n_max = {}",
                free_est.b_hat,
                collapse.collapse,
                collapse.collapse_ratio.unwrap_or(f64::NAN),
                opts.n_max
            ),
            details: json!({"no_attraction": free_est, "pair_minimum": wells, "unstable": collapse}),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma4Point {
    pub l0: f64,
    pub energy: f64,
    /// `E ℓ₀³/(3a)`.
    pub ratio: f64,
    pub deviation: f64,
    pub limit: f64,
    pub above_leading: bool,
    pub h_squared: f64,
    pub h_relative_to_leading: f64,
    /// Relative difference of the root from an independent Newton solve.
    pub h_root_check: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma4Report {
    pub a: f64,
    pub points: Vec<Lemma4Point>,
    pub fitted_exponent: f64,
    pub h_rel_at_largest: f64,
    pub passed: bool,
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn lemma4_check(v: &CompositePotential, a: f64, l0s: &[f64], n: usize, r1: f64) -> Result<Lemma4Report> {
    let mut points = Vec::new();
    for &l0 in l0s {
        let energy = neumann_ball_ground(v, l0, n)?.ground();
        let leading = 3.0 * a / l0.powi(3);
        let ratio = energy / leading;
        let w = wavenumber_h_for_length(a, l0)?;
        let h_newton = wavenumber_newton(a, l0);
        points.push(Lemma4Point {
            l0,
            energy,
            ratio,
            deviation: ratio - 1.0,
            limit: 10.0 * r1 / l0,
            above_leading: energy >= leading,
            h_squared: w.h_squared,
            h_relative_to_leading: (w.h_squared / leading - 1.0).abs(),
            h_root_check: (w.h / h_newton - 1.0).abs(),
        });
    }
    let fitted_exponent = -log_slope(
        &points.iter().map(|p| p.l0).collect::<Vec<_>>(),
        &points.iter().map(|p| p.deviation.abs()).collect::<Vec<_>>(),
    );
    let last = points.last().expect("at least one l0");
    let h_rel_at_largest = last.h_relative_to_leading;
    let passed = points
        .iter()
        .all(|p| p.deviation.abs() <= p.limit && p.above_leading && p.h_root_check < 1e-10)
        && (fitted_exponent - 1.0).abs() <= 0.3
        && h_rel_at_largest <= 1e-2;
    Ok(Lemma4Report {
        a,
        points,
        fitted_exponent,
        h_rel_at_largest,
        passed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma5Point {
    pub extent: f64,
    pub energy: f64,
    pub raw_energy: f64,
    pub iterations: usize,
    /// `E L³/(8πa)` with the extrapolated energy when available.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma5Report {
    pub a: f64,
    pub n: usize,
    pub points: Vec<Lemma5Point>,
    pub passed: bool,
}

pub fn lemma5_check(v: &CompositePotential, a: f64, extents: &[f64], n: usize) -> Result<Lemma5Report> {
    let mut points = Vec::new();
    for &l in extents {
        let r = two_body_torus_ground(v, l, n)?;
        let energy = r.best();
        points.push(Lemma5Point {
            extent: l,
            energy,
            raw_energy: r.ground(),
            iterations: r.iterations,
            ratio: energy * l.powi(3) / (8.0 * PI * a),
        });
    }
    let passed = points.last().is_some_and(|p| (p.ratio - 1.0).abs() <= 0.1);
    Ok(Lemma5Report { a, n, points, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub convolution: bose_bounds::partition::ConvolutionReport,
    /// `(Q, max deviation, order against the previous Q)`.
    pub refinement: Vec<(usize, f64, Option<f64>)>,
    pub chain: Vec<bose_bounds::partition::ChainReport>,
    pub chain_holds: bool,
    pub passed: bool,
}

pub fn partition_check(pair: &PotentialPair, cell: f64, samples: usize, seed: u64) -> Result<PartitionReport> {
    let convolution = verify_convolution_identity(cell, 3, samples, 256, seed)?;
    let refinement = quadrature_refinement(cell, 3, samples.min(2000), &[64, 128, 256, 512], seed)?;
    let r1 = pair.r1;
    let mut chain = Vec::new();
    for factor in [2.0, 3.0, 5.0] {
        for delta in [0.5, 0.1] {
            chain.push(theorem2_bound_chain(pair, delta, factor * r1)?);
        }
    }
    let chain_holds = chain.iter().all(|c| c.steps.iter().all(|s| s.holds));
    let second_order = refinement.iter().filter_map(|r| r.2).all(|o| o >= 1.7);
    let passed = convolution.max_deviation <= 1e-3 && second_order && chain_holds;
    Ok(PartitionReport {
        convolution,
        refinement,
        chain,
        chain_holds,
        passed,
    })
}

/// Recomputes every stage of a certificate with power series and closed
/// forms; returns the largest relative difference and a per-stage table.
/// The half-height radius and `v1(0)` come from the reference formula
/// `v1 = 8(1 − r²)`, so this is only valid for that `v1`.
pub fn recompute_certificate(c: &CertificateReport) -> (f64, Value) {
    let pair = &c.pair;
    let v10 = 8.0;
    let radius = 0.5f64.sqrt();
    let v1_prime = RadialPotential::new(vec![Piece::new(0.0, radius, vec![v10 - 0.5 * v10, 0.0, -8.0])])
        .expect("valid piece");
    let a_prime = series_scattering_length(&v1_prime, 1.0).a;
    let tilde = 0.5 * (radius.powi(3) + 6.0 * a_prime / v10).cbrt();
    let ell = (10.0 * tilde).max(2.0 * pair.r1);
    let e_prime = 3.0 * a_prime / ((2.0 * ell).powi(3) - radius.powi(3));
    let delta = if c.b == 0.0 { 0.5 } else { (e_prime / (6.0 * c.b)).min(0.5) };
    let c1 = (1.0 - 3f64.sqrt() * pair.r1 / ell) * delta;
    let lambda = c1 / 2.0;
    let composite = RadialPotential::linear_combination(&pair.v1, 1.0, &pair.v2, -lambda);
    let s = series_scattering_length(&composite, 0.5);
    let a1 = series_scattering_length(&pair.v1, 0.5).a;
    let m_real = s.a / a1 * 8.0 * c.kappa * c.kappa + 1.0;
    let rows = [
        ("R", c.radius, radius),
        ("a_prime", c.a_prime, a_prime),
        ("tilde_ell", c.tilde_ell, tilde),
        ("ell", c.ell, ell),
        ("E_prime", c.e_prime, e_prime),
        ("delta", c.delta, delta),
        ("c1", c.c1, c1),
        ("lambda", c.lambda, lambda),
        ("a", c.a, s.a),
        ("a1", c.a1, a1),
        ("M", c.m_real, m_real),
    ];
    let mut worst = 0.0_f64;
    let table: Vec<Value> = rows
        .iter()
        .map(|&(name, got, want)| {
            let rel = (got / want - 1.0).abs();
            worst = worst.max(rel);
            json!({"stage": name, "library": got, "independent": want, "relative": rel})
        })
        .collect();
    if s.f_positive != c.w_positive {
        worst = f64::INFINITY;
    }
    (worst, json!({"B": c.b, "stages": table, "w_positive_independent": s.f_positive}))
}
