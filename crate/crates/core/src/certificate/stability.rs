use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{PotentialPair, RadialPotential};

/// Per-particle energy ratio `e(n_max)/e(⌈n_max/2⌉)` at or above which the
/// probe reports collapse. Saturating clusters stay below 2; pair energies
/// that all stay in the well give `(n−1)/(n/2−1) > 2`.
pub const COLLAPSE_RATIO: f64 = 1.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub n_max: usize,
    /// Metropolis moves per annealing restart.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Nearest-neighbour spacings tried per lattice.
    pub lattice_spacings: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            n_max: 12,
            budget: 20_000,
            restarts: 50,
            seed: 0x5eed,
            lattice_spacings: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub n: usize,
    pub min_energy: f64,
    pub per_particle: f64,
    /// `annealing` or `lattice:<kind>`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    /// Lower estimate of the stability constant; never a proof.
    pub b_hat: f64,
    pub per_n: Vec<StabilityEntry>,
    pub collapse: bool,
    pub collapse_ratio: Option<f64>,
    pub options: StabilityOptions,
}

pub fn probe_stability(
    pair: &PotentialPair,
    n_max: usize,
    budget: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    probe_stability_with(
        pair,
        &StabilityOptions {
            n_max,
            budget,
            seed,
            ..Default::default()
        },
    )
}

pub fn probe_stability_with(pair: &PotentialPair, opts: &StabilityOptions) -> Result<StabilityEstimate> {
    if opts.n_max < 2 || opts.restarts == 0 {
        return Err(Error::InvalidInput(format!(
            "need n_max >= 2 and at least one restart, got n_max = {}, restarts = {}",
            opts.n_max, opts.restarts
        )));
    }
    let v0 = RadialPotential::linear_combination(&pair.v1, 1.0, &pair.v2, -1.0);
    let scale = v0.max_abs().max(f64::MIN_POSITIVE);
    let range = v0.support_radius().max(pair.r1).max(f64::MIN_POSITIVE);

    let tasks: Vec<(usize, usize)> = (2..=opts.n_max)
        .flat_map(|n| (0..opts.restarts).map(move |r| (n, r)))
        .collect();
    let annealed: Vec<f64> = tasks
        .par_iter()
        .map(|&(n, r)| {
            let mut rng = ChaCha8Rng::seed_from_u64(task_seed(opts.seed, n, r));
            anneal(&v0, n, range, scale, opts.budget, &mut rng)
        })
        .collect();

    let mut per_n = Vec::with_capacity(opts.n_max - 1);
    for n in 2..=opts.n_max {
        let start = (n - 2) * opts.restarts;
        let mut best = annealed[start..start + opts.restarts]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mut source = "annealing".to_string();
        for kind in Lattice::ALL {
            let e = best_lattice_energy(&v0, kind, n, range, opts.lattice_spacings);
            if e < best {
                best = e;
                source = format!("lattice:{}", kind.name());
            }
        }
        per_n.push(StabilityEntry {
            n,
            min_energy: best,
            per_particle: best / n as f64,
            source,
        });
    }

    let b_hat = per_n
        .iter()
        .map(|e| -e.per_particle)
        .fold(0.0, |m: f64, x| if x > m { x } else { m });
    let (collapse, collapse_ratio) = if opts.n_max >= 4 {
        let top = per_n.last().unwrap().per_particle;
        let half = per_n[opts.n_max.div_ceil(2) - 2].per_particle;
        if half < 0.0 {
            let ratio = top / half;
            (top < 0.0 && ratio >= COLLAPSE_RATIO, Some(ratio))
        } else {
            (false, None)
        }
    } else {
        (false, None)
    };

    Ok(StabilityEstimate {
        b_hat,
        per_n,
        collapse,
        collapse_ratio,
        options: opts.clone(),
    })
}

fn task_seed(seed: u64, n: usize, restart: usize) -> u64 {
    let mut z = seed ^ ((n as u64) << 32) ^ restart as u64;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn total_energy(v: &RadialPotential, x: &[[f64; 3]]) -> f64 {
    let mut e = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            e += v.value(dist(&x[i], &x[j]));
        }
    }
    e
}

fn particle_energy(v: &RadialPotential, x: &[[f64; 3]], i: usize, p: &[f64; 3]) -> f64 {
    x.iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, q)| v.value(dist(p, q)))
        .sum()
}

/// Geometric-cooling Metropolis in the cube of side `4 r n^{1/3}`, followed
/// by a zero-temperature polish with shrinking steps.
fn anneal(v: &RadialPotential, n: usize, range: f64, scale: f64, budget: usize, rng: &mut ChaCha8Rng) -> f64 {
    let side = 4.0 * range * (n as f64).cbrt();
    let mut x: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side, rng.gen::<f64>() * side])
        .collect();
    let mut energy = total_energy(v, &x);
    let mut best = energy;
    let mut best_x = x.clone();

    let (t0, t1) = (scale, 1e-6 * scale);
    let cool = if budget > 1 { (t1 / t0).powf(1.0 / (budget - 1) as f64) } else { 1.0 };
    let mut temp = t0;
    let mut step = 0.5 * range;
    let mut accepted = 0usize;
    let propose = |x: &[[f64; 3]], step: f64, rng: &mut ChaCha8Rng| {
        let i = rng.gen_range(0..n);
        let mut p = x[i];
        for c in p.iter_mut() {
            *c = (*c + step * (2.0 * rng.gen::<f64>() - 1.0)).clamp(0.0, side);
        }
        (i, p)
    };

    for it in 0..budget {
        let (i, p) = propose(&x, step, rng);
        let de = particle_energy(v, &x, i, &p) - particle_energy(v, &x, i, &x[i]);
        if de <= 0.0 || rng.gen::<f64>() < (-de / temp).exp() {
            x[i] = p;
            energy += de;
            accepted += 1;
            if energy < best {
                best = energy;
                best_x.clone_from(&x);
            }
        }
        temp *= cool;
        if (it + 1) % 100 == 0 {
            let rate = accepted as f64 / 100.0;
            step *= if rate > 0.4 { 1.25 } else { 0.8 };
            step = step.clamp(1e-9 * range, side);
            accepted = 0;
        }
    }

    // Running sums drift; only exact totals of actual configurations count.
    let annealed = total_energy(v, &best_x);
    x = best_x;
    let mut step = 0.1 * range;
    while step > 1e-10 * range {
        let mut improved = 0usize;
        for _ in 0..(50 * n) {
            let (i, p) = propose(&x, step, rng);
            let de = particle_energy(v, &x, i, &p) - particle_energy(v, &x, i, &x[i]);
            if de < 0.0 {
                x[i] = p;
                improved += 1;
            }
        }
        if improved < 5 {
            step *= 0.5;
        }
    }
    total_energy(v, &x).min(annealed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lattice {
    Sc,
    Bcc,
    Fcc,
}

impl Lattice {
    const ALL: [Lattice; 3] = [Lattice::Fcc, Lattice::Bcc, Lattice::Sc];

    fn name(self) -> &'static str {
        match self {
            Lattice::Sc => "sc",
            Lattice::Bcc => "bcc",
            Lattice::Fcc => "fcc",
        }
    }

    /// Basis in units of the conventional cube, and the nearest-neighbour
    /// distance in the same units.
    fn basis(self) -> (&'static [[f64; 3]], f64) {
        match self {
            Lattice::Sc => (&[[0.0, 0.0, 0.0]], 1.0),
            Lattice::Bcc => (&[[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]], 0.75f64.sqrt()),
            Lattice::Fcc => (
                &[[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]],
                std::f64::consts::FRAC_1_SQRT_2,
            ),
        }
    }

    /// The `n` sites nearest to `center`, in units where the cube is 1.
    fn cluster(self, n: usize, center: [f64; 3]) -> Vec<[f64; 3]> {
        let (basis, _) = self.basis();
        let m = ((n as f64).cbrt().ceil() as i64) + 2;
        let mut sites = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                for k in -m..=m {
                    for b in basis {
                        sites.push([
                            i as f64 + b[0] - center[0],
                            j as f64 + b[1] - center[1],
                            k as f64 + b[2] - center[2],
                        ]);
                    }
                }
            }
        }
        let norm = |p: &[f64; 3]| p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        sites.sort_by(|a, b| norm(a).total_cmp(&norm(b)).then(a.partial_cmp(b).unwrap()));
        sites.truncate(n);
        sites
    }
}

fn best_lattice_energy(v: &RadialPotential, kind: Lattice, n: usize, range: f64, spacings: usize) -> f64 {
    let (_, nn) = kind.basis();
    let mut best = f64::INFINITY;
    for center in [[0.0, 0.0, 0.0], [0.25, 0.25, 0.25], [0.5, 0.5, 0.5]] {
        let unit = kind.cluster(n, center);
        for s in 1..=spacings {
            let d = 1.5 * range * s as f64 / spacings as f64;
            let a = d / nn;
            let x: Vec<[f64; 3]> = unit.iter().map(|p| [p[0] * a, p[1] * a, p[2] * a]).collect();
            best = best.min(total_energy(v, &x));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(n_max: usize) -> StabilityOptions {
        StabilityOptions {
            n_max,
            budget: 4000,
            restarts: 6,
            seed: 7,
            lattice_spacings: 100,
        }
    }

    #[test]
    fn repulsive_pair_has_zero_b() {
        let v1 = RadialPotential::constant_on(0.0, 1.0, 3.0).unwrap();
        let pair = PotentialPair::new(v1, RadialPotential::zero(), 1.0, 2.0);
        let est = probe_stability_with(&pair, &quick(5)).unwrap();
        assert_eq!(est.b_hat, 0.0);
        assert!(!est.collapse);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pair = PotentialPair::reference();
        let a = probe_stability_with(&pair, &quick(4)).unwrap();
        let b = probe_stability_with(&pair, &quick(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lattice_clusters_have_requested_size_and_spacing() {
        for kind in Lattice::ALL {
            let (_, nn) = kind.basis();
            let c = kind.cluster(13, [0.0; 3]);
            assert_eq!(c.len(), 13);
            let mut dmin = f64::INFINITY;
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    dmin = dmin.min(dist(&c[i], &c[j]));
                }
            }
            assert!((dmin - nn).abs() < 1e-12);
        }
    }
}
