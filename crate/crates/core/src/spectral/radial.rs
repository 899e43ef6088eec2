use serde::{Deserialize, Serialize};

use super::{DomainKind, SpectralResult};
use crate::error::{Error, Result};
use crate::potential::{CompositePotential, RadialPotential};
use crate::scattering::solve_zero_energy;

/// Radial finite-volume grid for `−Δφ + Vφ = Eφ` on a ball with a Neumann
/// boundary, restricted to radial functions.
///
/// Cell `i` carries volume `w_i = (r_{i+1}³ − r_i³)/3` and the exact cell
/// average of `V`; face `f` between two centers has conductance
/// `r_f² / (center distance)`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
    pub volumes: Vec<f64>,
    pub conductance: Vec<f64>,
    /// Cell averages of the (scaled) potential.
    pub vhat: Vec<f64>,
}

impl RadialGrid {
    /// `n` equal cells on `[0, radius]`, split further at every breakpoint of
    /// `v`. The operator uses `scale · v`.
    pub fn new(v: &RadialPotential, scale: f64, radius: f64, n: usize) -> Self {
        let h = radius / n as f64;
        let mut faces: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
        for b in v.breakpoints() {
            if b > 0.0 && b < radius {
                let k = (b / h).round();
                if (k * h - b).abs() > 1e-9 * h {
                    faces.push(b);
                }
            }
        }
        faces.sort_by(f64::total_cmp);
        let last = faces.len() - 1;
        faces[last] = radius;
        let m = faces.len() - 1;
        let centers: Vec<f64> = faces.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect();
        let volumes: Vec<f64> = faces.windows(2).map(|f| (f[1].powi(3) - f[0].powi(3)) / 3.0).collect();
        let conductance: Vec<f64> = (0..m - 1)
            .map(|i| faces[i + 1].powi(2) / (centers[i + 1] - centers[i]))
            .collect();
        let vhat: Vec<f64> = (0..m)
            .map(|i| scale * v.integrate_moment(faces[i], faces[i + 1], 2) / volumes[i])
            .collect();
        Self {
            faces,
            centers,
            volumes,
            conductance,
            vhat,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Number of eigenvalues strictly below `e`.
    ///
    /// Gaussian elimination written for the face fluxes: `ρ_i` is the
    /// effective coupling seen from the left, so pivots are formed without
    /// subtracting nearly equal conductances and the count stays reliable
    /// for `e` many orders of magnitude below the grid scale.
    pub fn count_below(&self, e: f64) -> usize {
        let n = self.len();
        let mut rho = 0.0;
        let mut count = 0;
        for i in 0..n {
            let sigma = rho + (self.vhat[i] - e) * self.volumes[i];
            if i + 1 == n {
                if sigma < 0.0 {
                    count += 1;
                }
                break;
            }
            let c = self.conductance[i];
            let mut t = 1.0 + sigma / c;
            if t == 0.0 {
                t = -f64::EPSILON;
            }
            if t < 0.0 {
                count += 1;
            }
            rho = sigma / t;
        }
        count
    }

    fn spectrum_bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = 0.0_f64;
        let mut hi = 0.0_f64;
        for i in 0..n {
            let left = if i > 0 { self.conductance[i - 1] } else { 0.0 };
            let right = if i + 1 < n { self.conductance[i] } else { 0.0 };
            let mut radius = 0.0;
            if i > 0 {
                radius += left / (self.volumes[i] * self.volumes[i - 1]).sqrt();
            }
            if i + 1 < n {
                radius += right / (self.volumes[i] * self.volumes[i + 1]).sqrt();
            }
            let d = self.vhat[i] + (left + right) / self.volumes[i];
            lo = lo.min(self.vhat[i]);
            hi = hi.max(d + radius);
        }
        (lo, hi)
    }

    /// The `k`-th eigenvalue (0-based) by bisection to relative precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.spectrum_bounds();
        lo -= 1e-300 + 1e-12 * lo.abs();
        for _ in 0..4000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2e-16 * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Cell values `φ_i` of the eigenfunction at `e`, normalized so that
    /// `Σ w_i φ_i² = 1` and `φ_0 > 0`.
    pub fn eigenfunction(&self, e: f64) -> Vec<f64> {
        let n = self.len();
        let mut phi = vec![0.0; n];
        phi[0] = 1.0;
        let mut rho = 0.0;
        for i in 0..n - 1 {
            let sigma = rho + (self.vhat[i] - e) * self.volumes[i];
            let c = self.conductance[i];
            let t = 1.0 + sigma / c;
            phi[i + 1] = phi[i] * t;
            rho = if t == 0.0 { 0.0 } else { sigma / t };
            if phi[i + 1].abs() > 1e150 {
                let s = 1.0 / phi[i + 1].abs();
                phi[..=i + 1].iter_mut().for_each(|p| *p *= s);
            }
        }
        let norm = phi
            .iter()
            .zip(&self.volumes)
            .map(|(p, w)| w * p * p)
            .sum::<f64>()
            .sqrt();
        phi.iter().map(|p| p / norm).collect()
    }

    /// Symmetrized residual `‖W^{-1/2}(K + VW − eW)φ‖ / ‖W^{1/2}φ‖`.
    pub fn residual(&self, e: f64, phi: &[f64]) -> f64 {
        let n = self.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let mut r = (self.vhat[i] - e) * self.volumes[i] * phi[i];
            if i > 0 {
                r += self.conductance[i - 1] * (phi[i] - phi[i - 1]);
            }
            if i + 1 < n {
                r += self.conductance[i] * (phi[i] - phi[i + 1]);
            }
            num += r * r / self.volumes[i];
            den += self.volumes[i] * phi[i] * phi[i];
        }
        (num / den).sqrt()
    }

    /// Symmetric tridiagonal form `(diag, off)` of the discrete operator.
    pub fn symmetric_tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let diag = (0..n)
            .map(|i| {
                let left = if i > 0 { self.conductance[i - 1] } else { 0.0 };
                let right = if i + 1 < n { self.conductance[i] } else { 0.0 };
                self.vhat[i] + (left + right) / self.volumes[i]
            })
            .collect();
        let off = (0..n - 1)
            .map(|i| -self.conductance[i] / (self.volumes[i] * self.volumes[i + 1]).sqrt())
            .collect();
        (diag, off)
    }

    fn solve(&self, k: usize, radius: f64, potential_ref: String) -> SpectralResult {
        let mut eigenvalues = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        let mut samples = Vec::new();
        for j in 0..k {
            let e = self.eigenvalue(j);
            let phi = self.eigenfunction(e);
            residuals.push(self.residual(e, &phi));
            if j == 0 {
                samples = self.centers.iter().zip(&phi).map(|(&r, &p)| (r, r * p)).collect();
            }
            eigenvalues.push(e);
        }
        SpectralResult {
            domain_kind: DomainKind::RadialBall,
            extent: radius,
            points_per_dim: self.len(),
            eigenvalues,
            residuals,
            iterations: 0,
            extrapolated: None,
            samples,
            potential_ref,
        }
    }
}

/// Lowest `k` radial eigenvalues of `−Δ + V/2` on the ball of radius `l0`
/// with a Neumann boundary.
pub fn neumann_ball_eigenvalues(v: &CompositePotential, l0: f64, n: usize, k: usize) -> Result<SpectralResult> {
    v.pair.validate().into_result()?;
    let range = v.support_radius();
    if !(l0 > range) {
        return Err(Error::DomainTooSmall { extent: l0, range });
    }
    if n < 1000 {
        return Err(Error::InvalidInput(format!("need at least 1000 radial cells, got {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let grid = RadialGrid::new(&v.to_radial(), 0.5, l0, n);
    Ok(grid.solve(
        k,
        l0,
        format!("(v1 - {} v2)/2, cell averages", v.coefficient),
    ))
}

pub fn neumann_ball_ground(v: &CompositePotential, l0: f64, n: usize) -> Result<SpectralResult> {
    neumann_ball_eigenvalues(v, l0, n, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wavenumber {
    pub a: f64,
    pub l0: f64,
    /// Smallest positive root of `h l0 = tan(h (l0 − a))`.
    pub h: f64,
    pub h_squared: f64,
    /// `3a / l0³`.
    pub leading: f64,
    /// `h² − 3a/l0³`.
    pub deviation: f64,
    /// Set when `a = 0`, where the branch collapses onto `h = 0`.
    pub degenerate: bool,
}

/// Wavenumber for a scattering length computed from `v` (half normalization).
pub fn wavenumber_h(v: &CompositePotential, l0: f64) -> Result<Wavenumber> {
    let a = solve_zero_energy(v, true)?.a;
    wavenumber_h_for_length(a, l0)
}

/// Smallest positive root of `G(h) = sin(hf) − h l0 cos(hf)`, `f = l0 − a`,
/// which lies in `(0, π/(2f))` for `0 < a < l0`.
pub fn wavenumber_h_for_length(a: f64, l0: f64) -> Result<Wavenumber> {
    if !(l0 > 0.0) {
        return Err(Error::InvalidInput(format!("l0 must be positive, got {l0}")));
    }
    if a >= l0 {
        return Err(Error::NoRoot(format!("a = {a} is not below l0 = {l0}")));
    }
    if a < 0.0 {
        return Err(Error::NoRoot(format!("a = {a} < 0 has no real root on the first branch")));
    }
    let leading = 3.0 * a / l0.powi(3);
    if a == 0.0 {
        return Ok(Wavenumber {
            a,
            l0,
            h: 0.0,
            h_squared: 0.0,
            leading,
            deviation: 0.0,
            degenerate: true,
        });
    }
    let f = l0 - a;
    let g = |h: f64| (h * f).sin() - h * l0 * (h * f).cos();
    let mut lo = 0.0;
    let mut hi = std::f64::consts::FRAC_PI_2 / f;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-16 * hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = 0.5 * (lo + hi);
    Ok(Wavenumber {
        a,
        l0,
        h,
        h_squared: h * h,
        leading,
        deviation: h * h - leading,
        degenerate: false,
    })
}
