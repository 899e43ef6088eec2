use serde::{Deserialize, Serialize};

use super::grid::{cell_average_radial, Axis, GridOperator};
use super::richardson::extrapolate;
use super::{DomainKind, SpectralResult};
use crate::error::{Error, Result};
use crate::lanczos::{lowest, LanczosOptions};
use crate::potential::{CompositePotential, RadialPotential};

pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;
pub const MAX_BOX6_POINTS_PER_DIM: usize = 12;

/// Vectors of length `n⁶` alive at the same time during a 6-D solve.
const BOX6_VECTORS: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxOptions {
    pub memory_budget: u64,
    pub max_points_per_dim: usize,
    /// Also solve on a grid with `2n/3` points and extrapolate.
    pub extrapolate: bool,
    pub lanczos: LanczosOptions,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
            max_points_per_dim: MAX_BOX6_POINTS_PER_DIM,
            extrapolate: true,
            lanczos: LanczosOptions::default(),
        }
    }
}

/// Lowest `k` eigenvalues of `−Δ + V(|x − c|)` on the Neumann cube of side
/// `l` centered at `c`, with `V` optional and cell-averaged.
pub fn neumann_box_3d(
    potential: Option<&RadialPotential>,
    l: f64,
    n: usize,
    k: usize,
    lanczos: &LanczosOptions,
) -> Result<SpectralResult> {
    if !(l > 0.0) || n < 2 {
        return Err(Error::InvalidInput(format!("need l > 0 and n >= 2, got l = {l}, n = {n}")));
    }
    let axis = Axis::uniform(l, n, 1.0);
    let mut values = vec![0.0; n * n * n];
    if let Some(v) = potential {
        let f = &axis.faces;
        let c = 0.5 * l;
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    values[(i * n + j) * n + m] = cell_average_radial(
                        v,
                        [f[i] - c, f[j] - c, f[m] - c],
                        [f[i + 1] - c, f[j + 1] - c, f[m + 1] - c],
                        4,
                    );
                }
            }
        }
    }
    let op = GridOperator::new(
        DomainKind::BoxNeumann3d,
        l,
        vec![axis.clone(), axis.clone(), axis],
        values,
        if potential.is_some() { "radial, centered, cell averages" } else { "none" },
    );
    let pairs = lowest(&op, Some(&op.kernel_vector()), &LanczosOptions { k, ..lanczos.clone() })?;
    Ok(SpectralResult {
        domain_kind: DomainKind::BoxNeumann3d,
        extent: l,
        points_per_dim: n,
        eigenvalues: pairs.values,
        residuals: pairs.residuals,
        iterations: pairs.iterations,
        extrapolated: None,
        samples: Vec::new(),
        potential_ref: op.potential_ref.clone(),
    })
}

fn box6_operator(v: &RadialPotential, l: f64, n: usize) -> GridOperator {
    let axis = Axis::uniform(l, n, 1.0);
    let d = l / n as f64;
    let m = 2 * n - 1;
    let mut table = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let (x, y, z) = (
                    (a as f64 - (n - 1) as f64) * d,
                    (b as f64 - (n - 1) as f64) * d,
                    (c as f64 - (n - 1) as f64) * d,
                );
                table[(a * m + b) * m + c] = v.value((x * x + y * y + z * z).sqrt());
            }
        }
    }
    let n3 = n * n * n;
    let mut diag = vec![0.0; n3 * n3];
    for p in 0..n3 {
        let (i1, j1, k1) = (p / (n * n), (p / n) % n, p % n);
        let row = &mut diag[p * n3..(p + 1) * n3];
        for (q, out) in row.iter_mut().enumerate() {
            let (i2, j2, k2) = (q / (n * n), (q / n) % n, q % n);
            *out = table[((i1 + n - 1 - i2) * m + (j1 + n - 1 - j2)) * m + (k1 + n - 1 - k2)];
        }
    }
    GridOperator::new(
        DomainKind::BoxNeumann6d,
        l,
        vec![axis; 6],
        diag,
        "V(x1 - x2), point values at cell-center differences",
    )
}

pub fn two_body_box_ground(v: &CompositePotential, l1: f64, n: usize) -> Result<SpectralResult> {
    two_body_box_ground_with(v, l1, n, &BoxOptions::default())
}

/// Lowest eigenvalue of `−Δ₁ − Δ₂ + V(x₁ − x₂)` on the Neumann cube of side
/// `l1` for both particles, on a uniform `n⁶` grid.
pub fn two_body_box_ground_with(
    v: &CompositePotential,
    l1: f64,
    n: usize,
    opts: &BoxOptions,
) -> Result<SpectralResult> {
    v.pair.validate().into_result()?;
    let range = v.support_radius();
    if !(l1 > 2.0 * range) {
        return Err(Error::DomainTooSmall {
            extent: l1,
            range: 2.0 * range,
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    let required = (n as u64).pow(6) * 8 * BOX6_VECTORS;
    if n > opts.max_points_per_dim || required > opts.memory_budget {
        return Err(Error::ResourceLimit {
            required,
            budget: if n > opts.max_points_per_dim {
                (opts.max_points_per_dim as u64).pow(6) * 8 * BOX6_VECTORS
            } else {
                opts.memory_budget
            },
        });
    }
    let radial = v.to_radial();
    let mut grids = vec![n];
    if opts.extrapolate {
        let coarse = ((2 * n) as f64 / 3.0).round() as usize;
        if coarse >= 2 && coarse < n {
            grids.push(coarse);
        }
    }
    let mut result: Option<SpectralResult> = None;
    let mut values = Vec::new();
    for &m in &grids {
        let op = box6_operator(&radial, l1, m);
        let pairs = lowest(&op, Some(&op.kernel_vector()), &opts.lanczos)?;
        values.push((m, pairs.values[0]));
        if result.is_none() {
            result = Some(SpectralResult {
                domain_kind: DomainKind::BoxNeumann6d,
                extent: l1,
                points_per_dim: m,
                eigenvalues: pairs.values,
                residuals: pairs.residuals,
                iterations: pairs.iterations,
                extrapolated: None,
                samples: Vec::new(),
                potential_ref: op.potential_ref.clone(),
            });
        }
    }
    let mut result = result.expect("at least one grid");
    result.extrapolated = extrapolate(&values, 2.0);
    Ok(result)
}

/// Ground energy of `k` particles in a Neumann cube; only `k ≤ 2` is in reach.
pub fn neumann_box_k_ground(
    v: &CompositePotential,
    l: f64,
    k: usize,
    n: usize,
    opts: &BoxOptions,
) -> Result<SpectralResult> {
    match k {
        0 => Err(Error::InvalidInput("k must be positive".into())),
        1 => Ok(SpectralResult {
            domain_kind: DomainKind::BoxNeumann3d,
            extent: l,
            points_per_dim: n,
            eigenvalues: vec![0.0],
            residuals: vec![0.0],
            iterations: 0,
            extrapolated: None,
            samples: Vec::new(),
            potential_ref: "single particle, no interaction".into(),
        }),
        2 => two_body_box_ground_with(v, l, n, opts),
        _ => Err(Error::Unsupported(format!(
            "{k}-particle box needs a {}-dimensional grid",
            3 * k
        ))),
    }
}
