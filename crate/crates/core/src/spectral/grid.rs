use rayon::prelude::*;

use super::DomainKind;
use crate::lanczos::SymmetricOperator;
use crate::potential::RadialPotential;

/// One axis of a cell-centered finite-volume grid with Neumann ends.
///
/// In the unknowns `ψ = sqrt(w) φ` the axis operator is the symmetric
/// tridiagonal matrix `W^{-1/2} K W^{-1/2}`, where `K` is the flux-form
/// stiffness matrix and `W` the cell widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// Interior face conductances `coef / (center distance)`.
    pub conductance: Vec<f64>,
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Axis {
    pub fn new(faces: Vec<f64>, centers: Vec<f64>, coef: f64) -> Self {
        let n = centers.len();
        assert_eq!(faces.len(), n + 1, "need one more face than cells");
        let widths: Vec<f64> = faces.windows(2).map(|f| f[1] - f[0]).collect();
        let conductance: Vec<f64> = centers.windows(2).map(|c| coef / (c[1] - c[0])).collect();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let left = if i > 0 { conductance[i - 1] } else { 0.0 };
            let right = if i + 1 < n { conductance[i] } else { 0.0 };
            diag[i] = (left + right) / widths[i];
        }
        for i in 0..n.saturating_sub(1) {
            off[i] = -conductance[i] / (widths[i] * widths[i + 1]).sqrt();
        }
        Self {
            faces,
            centers,
            widths,
            conductance,
            diag,
            off,
        }
    }

    /// `n` equal cells on `[0, extent]`.
    pub fn uniform(extent: f64, n: usize, coef: f64) -> Self {
        let d = extent / n as f64;
        let faces = (0..=n).map(|k| k as f64 * d).collect();
        let centers = (0..n).map(|k| (k as f64 + 0.5) * d).collect();
        Self::new(faces, centers, coef)
    }

    /// `n` cells under the smooth map `X(ξ) = S (ξ − β sin(πξ)/π)`, which is
    /// finest at 0 (width ≈ S(1−β)/n) and coarsest at `S`.
    pub fn graded(extent: f64, n: usize, beta: f64, coef: f64) -> Self {
        let map = |xi: f64| extent * (xi - beta * (std::f64::consts::PI * xi).sin() / std::f64::consts::PI);
        let mut faces: Vec<f64> = (0..=n).map(|k| map(k as f64 / n as f64)).collect();
        faces[0] = 0.0;
        faces[n] = extent;
        let centers = (0..n).map(|k| map((k as f64 + 0.5) / n as f64)).collect();
        Self::new(faces, centers, coef)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Symmetrized finite-volume operator `Σ_k (coef_k L_k ⊗ I) + diag(V)` on a
/// tensor grid, with Neumann faces on every axis.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub domain_kind: DomainKind,
    pub extent: f64,
    pub points_per_dim: usize,
    pub potential_ref: String,
    axes: Vec<Axis>,
    potential: Vec<f64>,
    strides: Vec<usize>,
}

impl GridOperator {
    pub fn new(
        domain_kind: DomainKind,
        extent: f64,
        axes: Vec<Axis>,
        potential: Vec<f64>,
        potential_ref: impl Into<String>,
    ) -> Self {
        let dims: Vec<usize> = axes.iter().map(Axis::len).collect();
        let total: usize = dims.iter().product();
        assert_eq!(potential.len(), total, "potential has wrong length");
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Self {
            domain_kind,
            extent,
            points_per_dim: dims.first().copied().unwrap_or(0),
            potential_ref: potential_ref.into(),
            axes,
            potential,
            strides,
        }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `sqrt` of the cell volumes: the image of the constant function, which
    /// spans the kernel of the kinetic part.
    pub fn kernel_vector(&self) -> Vec<f64> {
        let mut out = vec![1.0; self.potential.len()];
        self.for_each_axis_factor(&mut out, |w| w.sqrt());
        out
    }

    /// Cell volumes.
    pub fn volumes(&self) -> Vec<f64> {
        let mut out = vec![1.0; self.potential.len()];
        self.for_each_axis_factor(&mut out, |w| w);
        out
    }

    fn for_each_axis_factor(&self, out: &mut [f64], f: impl Fn(f64) -> f64) {
        for (k, axis) in self.axes.iter().enumerate() {
            let s = self.strides[k];
            let n = axis.len();
            for (idx, o) in out.iter_mut().enumerate() {
                *o *= f(axis.widths[(idx / s) % n]);
            }
        }
    }

    /// Unsymmetrized kinetic part in flux form, `W^{-1} K φ`. Every face
    /// contributes `c (φ_i − φ_j)`, so constants map to exactly zero.
    pub fn apply_kinetic_flux(&self, phi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, axis) in self.axes.iter().enumerate() {
            let s = self.strides[k];
            let n = axis.len();
            for (idx, o) in out.iter_mut().enumerate() {
                let i = (idx / s) % n;
                let mut flux = 0.0;
                if i > 0 {
                    flux += axis.conductance[i - 1] * (phi[idx] - phi[idx - s]);
                }
                if i + 1 < n {
                    flux += axis.conductance[i] * (phi[idx] - phi[idx + s]);
                }
                *o += flux / axis.widths[i];
            }
        }
    }

    /// Dense symmetric matrix; only for small grids.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                out[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        out
    }

    fn apply_slab(&self, i0: usize, x: &[f64], ys: &mut [f64]) {
        let slab = ys.len();
        let base = i0 * slab;
        let xs = &x[base..base + slab];
        let a0 = &self.axes[0];
        let n0 = a0.len();
        let d0 = a0.diag[i0];
        let pot = &self.potential[base..base + slab];
        for j in 0..slab {
            ys[j] = (pot[j] + d0) * xs[j];
        }
        if i0 > 0 {
            let o = a0.off[i0 - 1];
            let xp = &x[base - slab..base];
            for j in 0..slab {
                ys[j] += o * xp[j];
            }
        }
        if i0 + 1 < n0 {
            let o = a0.off[i0];
            let xn = &x[base + slab..base + 2 * slab];
            for j in 0..slab {
                ys[j] += o * xn[j];
            }
        }
        for (k, axis) in self.axes.iter().enumerate().skip(1) {
            let s = self.strides[k];
            let nk = axis.len();
            let block = nk * s;
            for start in (0..slab).step_by(block) {
                for i in 0..nk {
                    let row = start + i * s;
                    let d = axis.diag[i];
                    for j in row..row + s {
                        ys[j] += d * xs[j];
                    }
                    if i > 0 {
                        let o = axis.off[i - 1];
                        for j in row..row + s {
                            ys[j] += o * xs[j - s];
                        }
                    }
                    if i + 1 < nk {
                        let o = axis.off[i];
                        for j in row..row + s {
                            ys[j] += o * xs[j + s];
                        }
                    }
                }
            }
        }
    }
}

impl SymmetricOperator for GridOperator {
    fn dim(&self) -> usize {
        self.potential.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let slab = self.strides[0];
        y.par_chunks_mut(slab)
            .enumerate()
            .for_each(|(i0, ys)| self.apply_slab(i0, x, ys));
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=q {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, dp) = if q == 1 {
                (x, 1.0)
            } else {
                (p1, q as f64 * (x * p1 - p0) / (x * x - 1.0))
            };
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=q {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = if q == 1 { 1.0 } else { q as f64 * (x * p1 - p0) / (x * x - 1.0) };
                weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
                break;
            }
        }
        nodes[i] = x;
    }
    (nodes, weights)
}

/// Average of `v(|x|)` over the box `[lo, hi]` by `q`-point Gauss–Legendre
/// per axis. Boxes that do not reach the support return zero.
pub fn cell_average_radial(v: &RadialPotential, lo: [f64; 3], hi: [f64; 3], q: usize) -> f64 {
    let mut near2 = 0.0;
    for k in 0..3 {
        let d = if lo[k] > 0.0 {
            lo[k]
        } else if hi[k] < 0.0 {
            -hi[k]
        } else {
            0.0
        };
        near2 += d * d;
    }
    if near2.sqrt() >= v.support_radius() {
        return 0.0;
    }
    let (x, w) = gauss_legendre(q);
    let map = |k: usize, t: f64| 0.5 * (lo[k] + hi[k]) + 0.5 * (hi[k] - lo[k]) * t;
    let mut sum = 0.0;
    for a in 0..q {
        let xa = map(0, x[a]);
        for b in 0..q {
            let xb = map(1, x[b]);
            for c in 0..q {
                let xc = map(2, x[c]);
                sum += w[a] * w[b] * w[c] * v.value((xa * xa + xb * xb + xc * xc).sqrt());
            }
        }
    }
    sum / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanczos::{dot, lowest, LanczosOptions};
    use nalgebra::{DMatrix, SymmetricEigen};

    fn small_op(potential: impl Fn(usize) -> f64) -> GridOperator {
        let axes = vec![
            Axis::uniform(2.0, 4, 1.0),
            Axis::graded(3.0, 5, 0.6, 1.0),
            Axis::uniform(1.5, 3, 2.0),
        ];
        let v = (0..60).map(potential).collect();
        GridOperator::new(DomainKind::BoxNeumann3d, 2.0, axes, v, "test")
    }

    #[test]
    fn operator_is_exactly_symmetric() {
        let op = small_op(|i| (i as f64 * 0.3).sin());
        let m = op.to_dense();
        let n = op.dim();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(m[i * n + j], m[j * n + i]);
            }
        }
    }

    #[test]
    fn constants_are_exact_kernel() {
        let op = small_op(|_| 0.0);
        let ones = vec![1.0; op.dim()];
        let mut out = vec![1.0; op.dim()];
        op.apply_kinetic_flux(&ones, &mut out);
        assert!(out.iter().all(|&o| o == 0.0));
        let k = op.kernel_vector();
        let mut mk = vec![0.0; op.dim()];
        op.apply(&k, &mut mk);
        assert!(mk.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let op = small_op(|i| 0.5 + ((i * 7) % 5) as f64);
        let m = DMatrix::from_row_slice(op.dim(), op.dim(), &op.to_dense());
        let mut evs: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        evs.sort_by(f64::total_cmp);
        let res = lowest(&op, Some(&op.kernel_vector()), &LanczosOptions { k: 3, ..Default::default() }).unwrap();
        for i in 0..3 {
            assert!((res.values[i] - evs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in 1..8 {
            let (x, w) = gauss_legendre(q);
            for p in 0..2 * q {
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
                let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "q={q} p={p}");
            }
        }
    }

    #[test]
    fn cell_average_of_constant_ball() {
        let v = RadialPotential::constant_on(0.0, 10.0, 3.0).unwrap();
        let avg = cell_average_radial(&v, [0.0, 0.0, 0.0], [1.0, 2.0, 0.5], 4);
        assert!((avg - 3.0).abs() < 1e-14);
        assert_eq!(cell_average_radial(&v, [11.0, 0.0, 0.0], [12.0, 1.0, 1.0], 4), 0.0);
    }

    #[test]
    fn kernel_vector_is_normalizable() {
        let op = small_op(|_| 0.0);
        let k = op.kernel_vector();
        let vol: f64 = op.volumes().iter().sum();
        assert!((dot(&k, &k) - vol).abs() < 1e-12);
        assert!((vol - 2.0 * 3.0 * 1.5).abs() < 1e-12);
    }
}
