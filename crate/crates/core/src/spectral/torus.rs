use serde::{Deserialize, Serialize};

use super::grid::{cell_average_radial, Axis, GridOperator};
use super::richardson::extrapolate;
use super::{DomainKind, SpectralResult};
use crate::error::{Error, Result};
use crate::lanczos::{lowest, LanczosOptions};
use crate::potential::CompositePotential;

/// The relative problem `−2Δ + V(x)` on the periodic cube `[0, L)³` with the
/// minimum-image distance.
///
/// The potential is even in every coordinate about both `0` and `L/2`, and the
/// positive ground state inherits these reflections, so it is computed on the
/// octant `[0, L/2]³` with Neumann faces. There `|x|` is the minimum-image
/// distance. `n` counts cells per axis of the octant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusOptions {
    /// Grid sizes; empty means `[n, round(2n/3)]`.
    pub grids: Vec<usize>,
    /// Grading parameter; `None` picks one from the finest grid.
    pub beta: Option<f64>,
    /// Gauss–Legendre points per axis for cell averages of `V`.
    pub quadrature: usize,
    pub lanczos: LanczosOptions,
}

impl Default for TorusOptions {
    fn default() -> Self {
        Self {
            grids: Vec::new(),
            beta: None,
            quadrature: 6,
            lanczos: LanczosOptions::default(),
        }
    }
}

/// Grading that makes the cells at the origin about `r0/8` wide on an `n`
/// cell axis of length `L/2`.
pub fn torus_grading(l: f64, n: usize, r0: f64) -> f64 {
    let half = 0.5 * l;
    (1.0 - 0.125 * r0 * n as f64 / half).clamp(0.0, 0.97)
}

/// Assembles the octant operator for one grid.
pub fn torus_operator(v: &CompositePotential, l: f64, n: usize, beta: f64, quadrature: usize) -> Result<GridOperator> {
    let half = 0.5 * l;
    let axis = Axis::graded(half, n, beta, 2.0);
    let r0 = v.pair.r0;
    let coarsest = axis
        .faces
        .windows(2)
        .filter(|f| f[0] < r0)
        .map(|f| f[1] - f[0])
        .fold(0.0, f64::max);
    if coarsest >= 0.25 * r0 {
        return Err(Error::GridTooCoarse {
            step: coarsest,
            limit: 0.25 * r0,
        });
    }
    let radial = v.to_radial();
    let reach = radial.support_radius();
    let faces = &axis.faces;
    let mut potential = vec![0.0; n * n * n];
    let inside = faces.iter().take_while(|&&f| f < reach).count().min(n);
    for i in 0..inside {
        for j in 0..inside {
            for k in 0..inside {
                potential[(i * n + j) * n + k] = cell_average_radial(
                    &radial,
                    [faces[i], faces[j], faces[k]],
                    [faces[i + 1], faces[j + 1], faces[k + 1]],
                    quadrature,
                );
            }
        }
    }
    Ok(GridOperator::new(
        DomainKind::Torus3d,
        l,
        vec![axis.clone(), axis.clone(), axis],
        potential,
        format!(
            "v1 - {} v2, minimum image, octant cell averages (beta = {beta})",
            v.coefficient
        ),
    ))
}

pub fn two_body_torus_ground(v: &CompositePotential, l: f64, n: usize) -> Result<SpectralResult> {
    two_body_torus_ground_with(v, l, n, &TorusOptions::default())
}

pub fn two_body_torus_ground_with(
    v: &CompositePotential,
    l: f64,
    n: usize,
    opts: &TorusOptions,
) -> Result<SpectralResult> {
    v.pair.validate().into_result()?;
    let range = v.support_radius();
    if !(l > 2.0 * range) {
        return Err(Error::DomainTooSmall {
            extent: l,
            range: 2.0 * range,
        });
    }
    let mut grids = if opts.grids.is_empty() {
        vec![n, ((2 * n) as f64 / 3.0).round() as usize]
    } else {
        opts.grids.clone()
    };
    grids.sort_unstable_by(|a, b| b.cmp(a));
    grids.dedup();
    if grids.iter().any(|&m| m < 2) {
        return Err(Error::InvalidInput("torus grids need at least 2 cells per axis".into()));
    }
    let finest = grids[0];
    let beta = opts.beta.unwrap_or_else(|| torus_grading(l, finest, v.pair.r0));

    let mut result: Option<SpectralResult> = None;
    let mut values = Vec::new();
    for &m in &grids {
        let op = torus_operator(v, l, m, beta, opts.quadrature)?;
        let pairs = lowest(&op, Some(&op.kernel_vector()), &opts.lanczos)?;
        values.push((m, pairs.values[0]));
        if result.is_none() {
            result = Some(SpectralResult {
                domain_kind: DomainKind::Torus3d,
                extent: l,
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
