//! Sliding-grid partition of space into cubes of side `ℓ`.
//!
//! Averaging over all shifts `u ∈ [0,1)³` of the grid `ℓ(u + ℤ³)`, the
//! probability that two points share a cube is the separable weight
//! `h_ℓ(z) = g(z¹/ℓ) g(z²/ℓ) g(z³/ℓ)`, `g(t) = max(0, 1 − |t|)`, where `z` is
//! their separation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{PotentialPair, RadialPotential};

/// Unit hat.
pub fn hat(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// `h_ℓ(z)`.
pub fn weight(z: [f64; 3], cell: f64) -> f64 {
    hat(z[0] / cell) * hat(z[1] / cell) * hat(z[2] / cell)
}

/// Separation of `x` and `y` on a circle of length `extent`.
pub fn min_image(x: f64, y: f64, extent: f64) -> f64 {
    let d = (x - y).rem_euclid(extent);
    d.min(extent - d)
}

/// Index of the cell containing `x` on a circle of `k` cells of side
/// `cell`, after shifting the grid by `u · cell`.
fn cell_index(x: f64, u: f64, cell: f64, k: usize) -> usize {
    let extent = cell * k as f64;
    (((x - u * cell).rem_euclid(extent) / cell).floor() as usize).min(k - 1)
}

/// Midpoint-rule average over `q` shifts of the indicator that `x` and `y`
/// share a cell along one axis.
pub fn same_cell_average(x: f64, y: f64, cell: f64, k: usize, q: usize) -> f64 {
    let hits = (0..q)
        .filter(|&i| {
            let u = (i as f64 + 0.5) / q as f64;
            cell_index(x, u, cell, k) == cell_index(y, u, cell, k)
        })
        .count();
    hits as f64 / q as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionReport {
    pub cell: f64,
    /// Torus side in cells.
    pub torus_cells: usize,
    pub samples: usize,
    pub quadrature: usize,
    /// Largest `|quadrature − h_ℓ|` over the sample pairs.
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// Separation at the worst pair.
    pub worst_separation: [f64; 3],
    pub mc_shifts: usize,
    /// Largest `|MC − h_ℓ| / σ` with σ the binomial standard error.
    pub mc_max_z: f64,
    /// Pairs with identical points or a separation of at least one cell in
    /// some axis, where both sides must agree exactly.
    pub trivial_cases_exact: bool,
}

/// Compares the shift-averaged same-cell indicator with `h_ℓ` at random
/// pairs on a torus of `torus_cells` cells per axis.
///
/// The tensor-product midpoint rule on `[0,1)³` factorizes into one rule per
/// axis, so the quadrature value is the product of per-axis averages. A
/// Monte Carlo average over random shifts is computed alongside.
pub fn verify_convolution_identity(
    cell: f64,
    torus_cells: usize,
    samples: usize,
    quadrature: usize,
    seed: u64,
) -> Result<ConvolutionReport> {
    if !(cell > 0.0) || torus_cells < 2 || samples == 0 || quadrature == 0 {
        return Err(Error::InvalidInput(
            "need cell > 0, at least 2 cells per axis, samples > 0 and quadrature > 0".into(),
        ));
    }
    let extent = cell * torus_cells as f64;
    let mc_shifts = 256;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<([f64; 3], [f64; 3], u64)> = (0..samples)
        .map(|_| {
            let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..extent));
            let y: [f64; 3] = std::array::from_fn(|k| (x[k] + rng.gen_range(-cell..cell)).rem_euclid(extent));
            (x, y, rng.gen())
        })
        .collect();
    let results: Vec<(f64, [f64; 3], f64)> = pairs
        .par_iter()
        .map(|(x, y, s)| {
            let sep: [f64; 3] = std::array::from_fn(|k| min_image(x[k], y[k], extent));
            let exact = weight(sep, cell);
            let quad: f64 = (0..3)
                .map(|k| same_cell_average(x[k], y[k], cell, torus_cells, quadrature))
                .product();
            let mut r = ChaCha8Rng::seed_from_u64(*s);
            let hits = (0..mc_shifts)
                .filter(|_| {
                    (0..3).all(|k| {
                        let u: f64 = r.gen();
                        cell_index(x[k], u, cell, torus_cells) == cell_index(y[k], u, cell, torus_cells)
                    })
                })
                .count();
            let mc = hits as f64 / mc_shifts as f64;
            let sigma = (exact * (1.0 - exact) / mc_shifts as f64).sqrt().max(0.5 / mc_shifts as f64);
            ((quad - exact).abs(), sep, (mc - exact).abs() / sigma)
        })
        .collect();
    let (mut max_dev, mut worst, mut sum, mut mc_max_z) = (0.0, [0.0; 3], 0.0, 0.0_f64);
    for (d, sep, z) in &results {
        sum += d;
        mc_max_z = mc_max_z.max(*z);
        if *d > max_dev {
            max_dev = *d;
            worst = *sep;
        }
    }
    let p = [0.3 * cell, 1.1 * cell, 0.7 * cell];
    let same = (0..3).all(|k| same_cell_average(p[k], p[k], cell, torus_cells, quadrature) == 1.0);
    let apart = same_cell_average(0.1 * cell, 1.2 * cell, cell, torus_cells, quadrature) == 0.0
        && weight([1.1 * cell, 0.0, 0.0], cell) == 0.0;
    Ok(ConvolutionReport {
        cell,
        torus_cells,
        samples,
        quadrature,
        max_deviation: max_dev,
        mean_deviation: sum / samples as f64,
        worst_separation: worst,
        mc_shifts,
        mc_max_z,
        trivial_cases_exact: same && apart,
    })
}

/// Maximum deviation at several quadrature sizes on the same sample pairs,
/// plus the order fitted between consecutive sizes.
pub fn quadrature_refinement(
    cell: f64,
    torus_cells: usize,
    samples: usize,
    quadratures: &[usize],
    seed: u64,
) -> Result<Vec<(usize, f64, Option<f64>)>> {
    let mut out: Vec<(usize, f64, Option<f64>)> = Vec::new();
    for &q in quadratures {
        let r = verify_convolution_identity(cell, torus_cells, samples, q, seed)?;
        let order = out
            .last()
            .map(|&(q0, d0, _)| (d0 / r.max_deviation).ln() / (q as f64 / q0 as f64).ln());
        out.push((q, r.max_deviation, order));
    }
    Ok(out)
}

/// Two-particle wavefunction sampled on a periodic `m⁶` grid of spacing
/// `extent / m`, indexed `((((x1 m + x2) m + x3) m + y1) m + y2) m + y3`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleGrid {
    pub extent: f64,
    pub m: usize,
    pub values: Vec<f64>,
}

impl TwoParticleGrid {
    pub fn from_fn(extent: f64, m: usize, f: impl Fn([f64; 3], [f64; 3]) -> f64) -> Self {
        let d = extent / m as f64;
        let m3 = m * m * m;
        let mut values = vec![0.0; m3 * m3];
        for p in 0..m3 {
            let x = [(p / (m * m)) as f64 * d, ((p / m) % m) as f64 * d, (p % m) as f64 * d];
            for q in 0..m3 {
                let y = [(q / (m * m)) as f64 * d, ((q / m) % m) as f64 * d, (q % m) as f64 * d];
                values[p * m3 + q] = f(x, y);
            }
        }
        Self { extent, m, values }
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.m as f64
    }

    /// `Σ |ψ|² d⁶`.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.spacing().powi(6)
    }

    pub fn normalized(mut self) -> Self {
        let s = 1.0 / self.norm_squared().sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    /// Shift average of the potential energy restricted to pairs in one cell.
    pub left: f64,
    /// Potential energy weighted by `h_ℓ`.
    pub right: f64,
}

/// Both sides of the localization identity for the potential energy.
///
/// `left` loops over the `quadrature³` shifts explicitly; when `quadrature`
/// is a multiple of the grid points per cell the two sides agree up to
/// rounding.
pub fn localized_energy_split(
    psi: &TwoParticleGrid,
    v: &RadialPotential,
    cell: f64,
    quadrature: usize,
) -> Result<EnergySplit> {
    let m = psi.m;
    let k = (psi.extent / cell).round() as usize;
    if k < 2 || ((k as f64) * cell - psi.extent).abs() > 1e-9 * psi.extent {
        return Err(Error::InvalidInput(format!(
            "torus side {} must be at least two whole cells of side {cell}",
            psi.extent
        )));
    }
    let norm = psi.norm_squared();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NormalizationError { norm });
    }
    let d = psi.spacing();
    let d6 = d.powi(6);
    let m3 = m * m * m;
    let coord = |p: usize| [(p / (m * m)) as f64 * d, ((p / m) % m) as f64 * d, (p % m) as f64 * d];

    // Pair data: potential, weight and |ψ|² for every pair with V ≠ 0.
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    let mut right = 0.0;
    for p in 0..m3 {
        let x = coord(p);
        for q in 0..m3 {
            let y = coord(q);
            let sep: [f64; 3] = std::array::from_fn(|a| min_image(x[a], y[a], psi.extent));
            let r = (sep[0] * sep[0] + sep[1] * sep[1] + sep[2] * sep[2]).sqrt();
            let vr = v.value(r);
            if vr == 0.0 {
                continue;
            }
            let dens = psi.values[p * m3 + q].powi(2) * vr * d6;
            right += dens * weight(sep, cell);
            pairs.push((p, q, dens));
        }
    }

    // Cell index of each grid coordinate for each shift.
    let shifts: Vec<f64> = (0..quadrature).map(|i| (i as f64 + 0.5) / quadrature as f64).collect();
    let idx: Vec<Vec<usize>> = shifts
        .iter()
        .map(|&u| (0..m).map(|i| cell_index(i as f64 * d, u, cell, k)).collect())
        .collect();
    let total: f64 = (0..quadrature * quadrature * quadrature)
        .into_par_iter()
        .map(|s| {
            let (a, b, c) = (&idx[s / (quadrature * quadrature)], &idx[(s / quadrature) % quadrature], &idx[s % quadrature]);
            pairs
                .iter()
                .filter(|&&(p, q, _)| {
                    a[p / (m * m)] == a[q / (m * m)] && b[(p / m) % m] == b[(q / m) % m] && c[p % m] == c[q % m]
                })
                .map(|&(_, _, dens)| dens)
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(EnergySplit {
        left: total / (quadrature * quadrature * quadrature) as f64,
        right,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub statement: String,
    pub holds: bool,
    /// Smallest value of (larger side − smaller side) over the samples.
    pub min_margin: f64,
    pub witness_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub cell: f64,
    pub delta: f64,
    /// `(1 − √3 r1/ℓ) δ`.
    pub c1: f64,
    /// `c1 ≤ 0`.
    pub degenerate: bool,
    /// `ℓ ≥ 2 r1`.
    pub precondition_met: bool,
    /// Smallest `h_ℓ` seen on `|z| ≤ r1`, and the lower bound `1 − √3 r1/ℓ`.
    pub min_weight_on_support: f64,
    pub weight_lower_bound: f64,
    pub steps: Vec<ChainStep>,
    pub radial_samples: usize,
    pub directions: usize,
}

/// Unit vectors on a Fibonacci sphere plus the body diagonal.
pub fn sphere_directions(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut dirs: Vec<[f64; 3]> = (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect();
    let c = 1.0 / 3f64.sqrt();
    dirs.push([c, c, c]);
    dirs
}

/// Checks `V₁ ≥ h_ℓ V₁` and `c₁ V₂ ≤ δ V₂ h_ℓ` pointwise on a radial grid of
/// step `r1/10⁴` times a set of directions.
pub fn theorem2_bound_chain(pair: &PotentialPair, delta: f64, cell: f64) -> Result<ChainReport> {
    if !(cell > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("need cell > 0 and delta > 0, got {cell}, {delta}")));
    }
    pair.validate().into_result()?;
    let r1 = pair.r1;
    let c1 = (1.0 - 3f64.sqrt() * r1 / cell) * delta;
    let n = 10_000;
    let mut radii: Vec<f64> = (0..=n).map(|i| r1 * i as f64 / n as f64).collect();
    radii.extend(pair.v1.breakpoints().into_iter().chain(pair.v2.breakpoints()).filter(|&b| b <= r1));
    radii.sort_by(f64::total_cmp);
    let dirs = sphere_directions(64);
    let scale = pair.v1.max_abs().max(pair.v2.max_abs());
    let tol = 1e-12 * scale;

    let mut m1 = (f64::INFINITY, 0.0);
    let mut m2 = (f64::INFINITY, 0.0);
    let mut min_h = f64::INFINITY;
    for &r in &radii {
        let a = pair.v1.value(r);
        let b = pair.v2.value(r);
        for dir in &dirs {
            let h = weight([r * dir[0], r * dir[1], r * dir[2]], cell);
            min_h = min_h.min(h);
            let g1 = a - h * a;
            let g2 = delta * b * h - c1 * b;
            if g1 < m1.0 {
                m1 = (g1, r);
            }
            if g2 < m2.0 {
                m2 = (g2, r);
            }
        }
    }
    let steps = vec![
        ChainStep {
            statement: "v1 >= h_l v1".into(),
            holds: m1.0 >= -tol,
            min_margin: m1.0,
            witness_radius: m1.1,
        },
        ChainStep {
            statement: "c1 v2 <= delta v2 h_l".into(),
            holds: m2.0 >= -tol,
            min_margin: m2.0,
            witness_radius: m2.1,
        },
    ];
    for s in &steps {
        if !s.holds {
            return Err(Error::PointwiseViolation {
                which: s.statement.clone(),
                radius: s.witness_radius,
                margin: s.min_margin,
            });
        }
    }
    Ok(ChainReport {
        cell,
        delta,
        c1,
        degenerate: c1 <= 0.0,
        precondition_met: cell >= 2.0 * r1,
        min_weight_on_support: min_h,
        weight_lower_bound: 1.0 - 3f64.sqrt() * r1 / cell,
        steps,
        radial_samples: radii.len(),
        directions: dirs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Not cut by the walls of the box.
    pub full: bool,
}

/// Pieces into which the grid `ℓ(u + ℤ³)` cuts the box `[0, side]³`.
pub fn sub_boxes(side: f64, cell: f64, u: [f64; 3]) -> Vec<SubBox> {
    let axis = |k: usize| -> Vec<(f64, f64, bool)> {
        let mut out = Vec::new();
        let mut start = u[k].rem_euclid(1.0) * cell;
        if start > 0.0 {
            start -= cell;
        }
        let mut lo = start;
        while lo < side {
            let hi = lo + cell;
            let (a, b) = (lo.max(0.0), hi.min(side));
            if b > a {
                out.push((a, b, lo >= 0.0 && hi <= side));
            }
            lo = hi;
        }
        out
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));
    let mut boxes = Vec::with_capacity(ax.len() * ay.len() * az.len());
    for x in &ax {
        for y in &ay {
            for z in &az {
                boxes.push(SubBox {
                    lo: [x.0, y.0, z.0],
                    hi: [x.1, y.1, z.1],
                    full: x.2 && y.2 && z.2,
                });
            }
        }
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `∫_{|z|<R} h_ℓ(z) dz` for `R ≤ ℓ`, from the moments of `|z¹|`,
    /// `|z¹z²|` and `|z¹z²z³|` over the ball.
    fn ball_integral_of_weight(radius: f64, cell: f64) -> f64 {
        let r = radius;
        4.0 * std::f64::consts::PI * r.powi(3) / 3.0 - 3.0 * (std::f64::consts::PI * r.powi(4) / 2.0) / cell
            + 3.0 * (8.0 * r.powi(5) / 15.0) / (cell * cell)
            - r.powi(6) / 6.0 / cell.powi(3)
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight([0.0; 3], 2.0), 1.0);
        assert_eq!(weight([2.0, 0.0, 0.0], 2.0), 0.0);
        let r1 = 1.0;
        let cell = 2.0 * r1;
        for dir in sphere_directions(50) {
            let z = [0.999 * r1 * dir[0], 0.999 * r1 * dir[1], 0.999 * r1 * dir[2]];
            assert!(weight(z, cell) >= 1.0 - 3f64.sqrt() * r1 / cell);
        }
    }

    proptest! {
        #[test]
        fn weight_properties(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0, cell in 0.5f64..4.0,
                             dx in -0.1f64..0.1, dy in -0.1f64..0.1, dz in -0.1f64..0.1) {
            let w = weight([x, y, z], cell);
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert_eq!(w, weight([-x, -y, -z], cell));
            prop_assert_eq!(w, hat(x / cell) * hat(y / cell) * hat(z / cell));
            let norm = (x * x + y * y + z * z).sqrt();
            if norm <= cell {
                prop_assert!(w >= 1.0 - 3f64.sqrt() * norm / cell - 1e-15);
            }
            let w2 = weight([x + dx, y + dy, z + dz], cell);
            let step = (dx * dx + dy * dy + dz * dz).sqrt();
            prop_assert!((w - w2).abs() <= 3f64.sqrt() * step / cell + 1e-15);
        }
    }

    #[test]
    fn same_cell_average_on_lattice_points_is_exact() {
        // Points on a lattice of spacing cell/4, quadrature a multiple of 4.
        let cell = 2.0;
        for i in 0..16 {
            for j in 0..16 {
                let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
                let avg = same_cell_average(x, y, cell, 4, 8);
                let want = hat(min_image(x, y, 8.0) / cell);
                assert!((avg - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn convolution_report_runs() {
        let r = verify_convolution_identity(1.0, 3, 500, 64, 1).unwrap();
        assert!(r.trivial_cases_exact);
        assert!(r.max_deviation <= 3.0 / 64.0);
        assert!(r.mc_max_z < 6.0);
    }

    #[test]
    fn energy_split_agrees_on_aligned_quadrature() {
        let cell = 2.0;
        let v = RadialPotential::constant_on(0.0, 1.2, 3.0).unwrap();
        let psi = TwoParticleGrid::from_fn(4.0, 8, |x, y| {
            1.0 + 0.3 * (std::f64::consts::PI * x[0] / 2.0).sin() * (std::f64::consts::PI * y[2] / 2.0).cos()
                + 0.1 * (std::f64::consts::PI * (x[1] - y[1]) / 2.0).cos()
        })
        .normalized();
        let s = localized_energy_split(&psi, &v, cell, 8).unwrap();
        assert!((s.left - s.right).abs() <= 1e-10 * s.right.abs());
        assert!(s.right > 0.0);
        let zero = localized_energy_split(&psi, &RadialPotential::zero(), cell, 4).unwrap();
        assert_eq!((zero.left, zero.right), (0.0, 0.0));
    }

    #[test]
    fn energy_split_constant_psi_matches_ball_integral() {
        // For constant ψ on the torus both sides reduce to
        // (1/L³) Σ_z V(z) h(z) d³ → (height/L³) ∫_{|z|<R} h.
        let (extent, cell, radius, height) = (4.0, 2.0, 1.0, 3.0);
        let v = RadialPotential::constant_on(0.0, radius, height).unwrap();
        let psi = TwoParticleGrid::from_fn(extent, 8, |_, _| 1.0).normalized();
        let s = localized_energy_split(&psi, &v, cell, 4).unwrap();
        assert!((s.left - s.right).abs() <= 1e-12 * s.right);
        let lattice = |m: usize| {
            let d = extent / m as f64;
            let mut sum = 0.0;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let z = [
                            min_image(i as f64 * d, 0.0, extent),
                            min_image(j as f64 * d, 0.0, extent),
                            min_image(k as f64 * d, 0.0, extent),
                        ];
                        sum += v.value((z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()) * weight(z, cell) * d.powi(3);
                    }
                }
            }
            sum / extent.powi(3)
        };
        assert!((lattice(8) - s.right).abs() <= 1e-12 * s.right);
        let want = height * ball_integral_of_weight(radius, cell) / extent.powi(3);
        let fine = lattice(160);
        assert!((fine - want).abs() / want < 0.02, "{fine} vs {want}");
    }

    #[test]
    fn normalization_is_checked() {
        let psi = TwoParticleGrid::from_fn(4.0, 4, |_, _| 1.0);
        let v = RadialPotential::constant_on(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            localized_energy_split(&psi, &v, 2.0, 4),
            Err(Error::NormalizationError { .. })
        ));
    }

    #[test]
    fn bound_chain_cases() {
        let pair = PotentialPair::reference();
        let r = theorem2_bound_chain(&pair, 0.5, 2.0 * pair.r1).unwrap();
        assert!(r.precondition_met && !r.degenerate);
        assert!((r.c1 - (1.0 - 3f64.sqrt() / 2.0) * 0.5).abs() < 1e-15);
        assert!(r.steps.iter().all(|s| s.holds));
        assert!(r.min_weight_on_support >= r.weight_lower_bound - 1e-15);
        let big = theorem2_bound_chain(&pair, 0.5, 1e8).unwrap();
        assert!((big.c1 - 0.5).abs() < 1e-7);
        let small = theorem2_bound_chain(&pair, 0.5, 1.5 * pair.r1).unwrap();
        assert!(small.degenerate && !small.precondition_met);
    }

    #[test]
    fn sub_boxes_tile_the_box() {
        let boxes = sub_boxes(5.0, 2.0, [0.3, 0.0, 0.75]);
        let vol: f64 = boxes
            .iter()
            .map(|b| (0..3).map(|k| b.hi[k] - b.lo[k]).product::<f64>())
            .sum();
        assert!((vol - 125.0).abs() < 1e-12);
        // Full cells per axis: [0.6,2.6], [2.6,4.6]; [0,2], [2,4]; [1.5,3.5].
        let full = boxes.iter().filter(|b| b.full).count();
        let per_axis_full = [2usize, 2, 1];
        assert_eq!(full, per_axis_full.iter().product::<usize>());
    }
}
