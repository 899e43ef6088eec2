//! Lower bound for the bottom of the spectrum of `A + X`, where `A ≥ 0` has a
//! simple zero eigenvalue with constant eigenvector and gap `γ`, and `X` is a
//! diagonal multiplier with `γ ≥ 4‖X‖∞`:
//!
//! `inf spec (A + X) ≥ ⟨ψ₀, Xψ₀⟩ − 2‖X‖∞²/γ`.
//!
//! The verifier builds random weighted graph Laplacians and checks the bound,
//! and the intermediate estimate on the ground-state correction, against
//! dense diagonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PerturbationInstance {
    pub base: DMatrix<f64>,
    /// Second-smallest eigenvalue of `base`.
    pub gap: f64,
    pub x_diag: Vec<f64>,
    pub x_inf: f64,
    /// `⟨ψ₀, Xψ₀⟩`, the average of the diagonal.
    pub mean: f64,
}

impl PerturbationInstance {
    /// Checks that `base` is symmetric with the constant vector in its kernel
    /// and a simple zero eigenvalue, then records the gap.
    pub fn new(base: DMatrix<f64>, x_diag: Vec<f64>) -> Result<Self> {
        let n = base.nrows();
        if n < 2 || base.ncols() != n || x_diag.len() != n {
            return Err(Error::InvalidInput("base must be square with n >= 2 matching x".into()));
        }
        let scale = base.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if base[(i, j)] != base[(j, i)] {
                    return Err(Error::InvalidInput("base is not symmetric".into()));
                }
            }
            let row: f64 = base.row(i).iter().sum();
            if row.abs() > 1e-12 * scale * n as f64 {
                return Err(Error::InvalidInput("constant vector is not in the kernel of base".into()));
            }
        }
        let evs = sorted_eigenvalues(&base);
        let gap = evs[1];
        if evs[0] < -1e-10 * scale || gap <= 1e-10 * scale {
            return Err(Error::InvalidInput(
                "base must be nonnegative with a simple zero eigenvalue".into(),
            ));
        }
        Ok(Self::with_gap(base, gap, x_diag))
    }

    fn with_gap(base: DMatrix<f64>, gap: f64, x_diag: Vec<f64>) -> Self {
        let x_inf = x_diag.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let mean = x_diag.iter().sum::<f64>() / x_diag.len() as f64;
        Self {
            base,
            gap,
            x_diag,
            x_inf,
            mean,
        }
    }

    pub fn dim(&self) -> usize {
        self.x_diag.len()
    }

    pub fn full(&self) -> DMatrix<f64> {
        let mut m = self.base.clone();
        for (i, x) in self.x_diag.iter().enumerate() {
            m[(i, i)] += x;
        }
        m
    }
}

/// `mean − 2 x_inf² / gap`.
pub fn perturb_lower_bound(inst: &PerturbationInstance) -> Result<f64> {
    if inst.gap < 4.0 * inst.x_inf {
        return Err(Error::HypothesisViolated {
            gap: inst.gap,
            x_inf: inst.x_inf,
        });
    }
    Ok(inst.mean - 2.0 * inst.x_inf * inst.x_inf / inst.gap)
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut evs: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    evs.sort_by(f64::total_cmp);
    evs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Random,
    /// `x_inf = γ/4` exactly.
    Boundary,
    /// `±x_inf` on two halves of the diagonal, `x_inf = γ/4`.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Path,
    Grid,
    RandomConnected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    /// Seed that regenerates this trial alone.
    pub seed: u64,
    pub kind: TrialKind,
    pub graph: GraphKind,
    pub dim: usize,
    pub gap: f64,
    pub x_inf: f64,
    pub mean: f64,
    pub e0: f64,
    pub bound: f64,
    /// `e0 − bound`.
    pub slack: f64,
    pub psi_prime_norm: f64,
    pub psi_prime_bound: f64,
    /// `psi_prime_bound − psi_prime_norm`.
    pub psi_prime_slack: f64,
    /// `(mean − e0) γ / x_inf²`: the smallest constant that would still work.
    pub factor: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub seed: u64,
    pub check: String,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub trials: usize,
    pub max_dim: usize,
    pub seed: u64,
    pub violations: Vec<Violation>,
    /// Smallest `slack / scale` over all trials.
    pub worst_slack: f64,
    /// Smallest `psi_prime_slack` relative to its bound.
    pub worst_psi_prime_slack: f64,
    pub hypothesis_boundary_cases: usize,
    pub adversarial_cases: usize,
    /// Largest measured `(mean − e0) γ / x_inf²`; the lemma uses 2.
    pub sharpest_factor: f64,
    pub passed: bool,
    #[serde(skip)]
    pub outcomes: Vec<TrialOutcome>,
}

/// Rounding allowance for the final bound, relative to the operator scale.
pub const BOUND_TOLERANCE: f64 = 1e-10;
/// Allowance for the eigenvector-based check, relative to its bound.
pub const PSI_TOLERANCE: f64 = 1e-8;

fn laplacian(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for &(i, j, w) in edges {
        m[(i, j)] -= w;
        m[(j, i)] -= w;
        m[(i, i)] += w;
        m[(j, j)] += w;
    }
    m
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> (GraphKind, usize, Vec<(usize, usize, f64)>) {
    match rng.gen_range(0..3) {
        0 => (
            GraphKind::Path,
            n,
            (0..n - 1).map(|i| (i, i + 1, 1.0)).collect(),
        ),
        1 => {
            let rows = ((n as f64).sqrt().floor() as usize).max(1);
            let cols = (n / rows).max(2);
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    if c + 1 < cols {
                        edges.push((i, i + 1, 1.0));
                    }
                    if r + 1 < rows {
                        edges.push((i, i + cols, 1.0));
                    }
                }
            }
            (GraphKind::Grid, rows * cols, edges)
        }
        _ => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut edges = Vec::new();
            for k in 1..n {
                let parent = order[rng.gen_range(0..k)];
                edges.push((order[k], parent, rng.gen_range(0.5..2.0)));
            }
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i != j {
                    edges.push((i, j, rng.gen_range(0.5..2.0)));
                }
            }
            (GraphKind::RandomConnected, n, edges)
        }
    }
}

/// Runs one trial from its own seed.
pub fn run_trial(trial: usize, seed: u64, max_dim: usize) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = match trial % 10 {
        0 => TrialKind::Boundary,
        5 => TrialKind::Adversarial,
        _ => TrialKind::Random,
    };
    let n_target = rng.gen_range(2..=max_dim.max(2));
    let (graph, n, edges) = random_graph(&mut rng, n_target);
    let lap = laplacian(n, &edges);
    let raw_gap = sorted_eigenvalues(&lap)[1];
    let target_gap = 10f64.powf(rng.gen_range(-2.0..2.0));
    let base = lap * (target_gap / raw_gap);
    let gap = sorted_eigenvalues(&base)[1];

    let quarter = gap / 4.0;
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-quarter..=quarter)).collect();
    match kind {
        TrialKind::Random => {}
        TrialKind::Boundary => {
            let i = rng.gen_range(0..n);
            x[i] = if rng.gen_bool(0.5) { quarter } else { -quarter };
        }
        TrialKind::Adversarial => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            for (k, &i) in idx.iter().enumerate() {
                x[i] = if k < n / 2 { -quarter } else { quarter };
            }
        }
    }
    let inst = PerturbationInstance::with_gap(base, gap, x);
    let check = check_instance(&inst).expect("instances satisfy the hypothesis by construction");
    TrialOutcome {
        trial,
        seed,
        kind,
        graph,
        dim: n,
        gap: inst.gap,
        x_inf: inst.x_inf,
        mean: inst.mean,
        e0: check.e0,
        bound: check.bound,
        slack: check.slack,
        psi_prime_norm: check.psi_prime_norm,
        psi_prime_bound: check.psi_prime_bound,
        psi_prime_slack: check.psi_prime_slack,
        factor: check.factor,
        scale: check.scale,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub e0: f64,
    pub bound: f64,
    pub slack: f64,
    pub psi_prime_norm: f64,
    pub psi_prime_bound: f64,
    pub psi_prime_slack: f64,
    pub factor: f64,
    pub scale: f64,
    pub passed: bool,
}

/// Compares the bound, and the estimate on the ground-state correction
/// `ψ′ = ψ/⟨ψ₀,ψ⟩ − ψ₀`, with dense diagonalization of `A + X`.
pub fn check_instance(inst: &PerturbationInstance) -> Result<InstanceCheck> {
    let bound = perturb_lower_bound(inst)?;
    let n = inst.dim();
    let eig = SymmetricEigen::new(inst.full());
    let (imin, e0) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty spectrum");
    let v = eig.eigenvectors.column(imin);
    let psi0 = 1.0 / (n as f64).sqrt();
    let overlap: f64 = v.iter().sum::<f64>() * psi0;
    let psi_prime_norm = v
        .iter()
        .map(|vi| (vi / overlap - psi0).powi(2))
        .sum::<f64>()
        .sqrt();
    let denom = inst.gap - e0 - inst.x_inf;
    let psi_prime_bound = if denom > 0.0 { inst.x_inf / denom } else { f64::INFINITY };
    let scale = eig.eigenvalues.amax().max(inst.x_inf).max(f64::MIN_POSITIVE);
    let slack = e0 - bound;
    let psi_prime_slack = psi_prime_bound - psi_prime_norm;
    let passed = slack >= -BOUND_TOLERANCE * scale
        && e0 <= inst.mean + BOUND_TOLERANCE * scale
        && (!psi_prime_bound.is_finite()
            || psi_prime_slack >= -PSI_TOLERANCE * psi_prime_bound.max(1e-300) - 1e-14);
    Ok(InstanceCheck {
        e0,
        bound,
        slack,
        psi_prime_norm,
        psi_prime_bound,
        psi_prime_slack,
        factor: if inst.x_inf > 0.0 {
            (inst.mean - e0) * inst.gap / (inst.x_inf * inst.x_inf)
        } else {
            0.0
        },
        scale,
        passed,
    })
}

/// Seeds for each trial, drawn from one stream so any trial can be replayed.
pub fn trial_seeds(trials: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.gen()).collect()
}

pub fn verify_perturbation_lemma(trials: usize, dim: usize, seed: u64) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidInput(format!("dim must be at least 2, got {dim}")));
    }
    let seeds = trial_seeds(trials, seed);
    let outcomes: Vec<TrialOutcome> = seeds
        .par_iter()
        .enumerate()
        .map(|(t, &s)| run_trial(t, s, dim))
        .collect();

    let mut violations = Vec::new();
    let mut worst_slack = f64::INFINITY;
    let mut worst_psi = f64::INFINITY;
    let mut sharpest: f64 = 0.0;
    for o in &outcomes {
        let rel = o.slack / o.scale;
        worst_slack = worst_slack.min(rel);
        if rel < -BOUND_TOLERANCE {
            violations.push(Violation {
                trial: o.trial,
                seed: o.seed,
                check: "inf spec >= mean - 2 x_inf^2 / gap".into(),
                slack: o.slack,
            });
        }
        if o.e0 > o.mean + BOUND_TOLERANCE * o.scale {
            violations.push(Violation {
                trial: o.trial,
                seed: o.seed,
                check: "e0 <= mean".into(),
                slack: o.mean - o.e0,
            });
        }
        if o.psi_prime_bound.is_finite() {
            let rel_psi = o.psi_prime_slack / o.psi_prime_bound.max(f64::MIN_POSITIVE);
            worst_psi = worst_psi.min(rel_psi);
            if o.psi_prime_slack < -PSI_TOLERANCE * o.psi_prime_bound.max(1e-300) - 1e-14 {
                violations.push(Violation {
                    trial: o.trial,
                    seed: o.seed,
                    check: "|psi'| <= x_inf / (gap - e0 - x_inf)".into(),
                    slack: o.psi_prime_slack,
                });
            }
        }
        sharpest = sharpest.max(o.factor);
    }
    Ok(VerificationReport {
        trials,
        max_dim: dim,
        seed,
        passed: violations.is_empty(),
        violations,
        worst_slack,
        worst_psi_prime_slack: worst_psi,
        hypothesis_boundary_cases: outcomes.iter().filter(|o| o.kind != TrialKind::Random).count(),
        adversarial_cases: outcomes.iter().filter(|o| o.kind == TrialKind::Adversarial).count(),
        sharpest_factor: sharpest,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> DMatrix<f64> {
        laplacian(n, &(0..n - 1).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>())
    }

    #[test]
    fn zero_perturbation_is_tight() {
        let inst = PerturbationInstance::new(path(8), vec![0.0; 8]).unwrap();
        assert_eq!(perturb_lower_bound(&inst).unwrap(), 0.0);
        assert!(sorted_eigenvalues(&inst.full())[0].abs() < 1e-14);
    }

    #[test]
    fn constant_shift() {
        let base = path(10);
        let gap = sorted_eigenvalues(&base)[1];
        let c = gap / 8.0;
        let inst = PerturbationInstance::new(base, vec![c; 10]).unwrap();
        let bound = perturb_lower_bound(&inst).unwrap();
        assert!((bound - (c - 2.0 * c * c / gap)).abs() < 1e-15);
        assert!((sorted_eigenvalues(&inst.full())[0] - c).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_is_enforced() {
        let base = path(6);
        let gap = sorted_eigenvalues(&base)[1];
        let mut x = vec![0.0; 6];
        x[2] = gap / 3.0;
        let inst = PerturbationInstance::new(base, x).unwrap();
        assert!(matches!(perturb_lower_bound(&inst), Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn disconnected_base_is_rejected() {
        let base = laplacian(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert!(PerturbationInstance::new(base, vec![0.0; 4]).is_err());
    }

    #[test]
    fn trials_replay_from_their_seed() {
        let report = verify_perturbation_lemma(12, 30, 99).unwrap();
        let o = &report.outcomes[7];
        assert_eq!(&run_trial(o.trial, o.seed, 30), o);
        assert!(report.passed, "{:?}", report.violations);
        assert!(report.hypothesis_boundary_cases >= 2);
    }

    #[test]
    fn boundary_trials_hit_the_quarter_gap() {
        let seeds = trial_seeds(11, 5);
        for t in [0usize, 5, 10] {
            let o = run_trial(t, seeds[t], 40);
            assert_eq!(4.0 * o.x_inf, o.gap);
        }
    }
}
