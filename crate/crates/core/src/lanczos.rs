//! Lanczos iteration for the bottom of a symmetric spectrum.
//!
//! For a single eigenpair the recurrence runs without reorthogonalization and
//! the Ritz vector is rebuilt in a second pass, so only four vectors are kept.
//! For several eigenpairs every Lanczos vector is stored and fully
//! reorthogonalized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tridiag;

const CHUNK: usize = 1 << 14;

pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Dot product with a fixed chunking, so the result does not depend on the
/// number of threads.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= CHUNK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(ys, xs)| {
            for (yi, xi) in ys.iter_mut().zip(xs) {
                *yi += alpha * xi;
            }
        });
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|xs| {
        for xi in xs {
            *xi *= alpha;
        }
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    /// Number of lowest eigenpairs.
    pub k: usize,
    /// Target residual `‖Av − θv‖` for unit `v`.
    pub tol: f64,
    pub max_iter: usize,
    /// Ritz values are examined every this many steps.
    pub check_every: usize,
    pub seed: u64,
    /// Relative size of the random perturbation added to the start vector.
    pub noise: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            k: 1,
            tol: 1e-8,
            max_iter: 200_000,
            check_every: 50,
            seed: 0x5eed,
            noise: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpairs {
    /// Rayleigh quotients of the Ritz vectors, nondecreasing.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Explicit residual norms `‖Av − θv‖` for unit `v`.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn start_vector(n: usize, start: Option<&[f64]>, opts: &LanczosOptions) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = match start {
        Some(s) => {
            let ns = norm(s);
            let amp = if ns > 0.0 { opts.noise * ns / (n as f64).sqrt() } else { 1.0 };
            s.iter().map(|x| x + amp * rng.gen_range(-1.0..1.0)).collect()
        }
        None => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    };
    let nv = norm(&v);
    scale(1.0 / nv, &mut v);
    v
}

struct Ritz {
    coords: Vec<Vec<f64>>,
    converged: bool,
    estimate: f64,
}

fn ritz(alpha: &[f64], beta: &[f64], k: usize, tol: f64) -> Ritz {
    let j = alpha.len();
    let off = &beta[..j - 1];
    let (lo, hi) = tridiag::gershgorin(alpha, off);
    let tnorm = lo.abs().max(hi.abs());
    let floor = 64.0 * f64::EPSILON * tnorm;
    let b_last = beta[j - 1];
    let mut coords = Vec::new();
    let mut estimate: f64 = 0.0;
    for i in 0..k.min(j) {
        let theta = tridiag::kth_eigenvalue(alpha, off, i, f64::EPSILON * tnorm);
        let y = tridiag::eigenvector(alpha, off, theta);
        estimate = estimate.max(b_last.abs() * y[j - 1].abs());
        coords.push(y);
    }
    Ritz {
        converged: coords.len() == k && estimate <= tol.max(floor),
        coords,
        estimate,
    }
}

/// Lowest `opts.k` eigenpairs of `op`, started from `start` (plus noise) or
/// from a random vector.
pub fn lowest<A: SymmetricOperator + ?Sized>(
    op: &A,
    start: Option<&[f64]>,
    opts: &LanczosOptions,
) -> Result<Eigenpairs> {
    let n = op.dim();
    if n == 0 || opts.k == 0 || opts.k > n {
        return Err(Error::InvalidInput(format!(
            "need 1 <= k <= dim, got k = {} for dim {n}",
            opts.k
        )));
    }
    if opts.k == 1 && n > 4096 {
        lowest_single(op, start, opts)
    } else {
        lowest_reorthogonalized(op, start, opts)
    }
}

fn finish<A: SymmetricOperator + ?Sized>(op: &A, mut vectors: Vec<Vec<f64>>, iterations: usize) -> Eigenpairs {
    let n = op.dim();
    let mut av = vec![0.0; n];
    let mut pairs: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    for v in vectors.iter_mut() {
        let nv = norm(v);
        scale(1.0 / nv, v);
        op.apply(v, &mut av);
        let theta = dot(v, &av);
        axpy(-theta, v, &mut av);
        let res = norm(&av);
        pairs.push((theta, std::mem::take(v), res));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Eigenpairs {
        values: Vec::new(),
        vectors: Vec::new(),
        residuals: Vec::new(),
        iterations,
    };
    for (t, v, r) in pairs {
        out.values.push(t);
        out.vectors.push(v);
        out.residuals.push(r);
    }
    out
}

fn lowest_single<A: SymmetricOperator + ?Sized>(
    op: &A,
    start: Option<&[f64]>,
    opts: &LanczosOptions,
) -> Result<Eigenpairs> {
    let n = op.dim();
    let v0 = start_vector(n, start, opts);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev = vec![0.0; n];
    let mut cur = v0.clone();
    let mut w = vec![0.0; n];
    let mut last: Option<Ritz> = None;
    let mut iterations = 0;
    let mut broke_down = false;

    // First pass: coefficients only.
    while iterations < opts.max_iter {
        op.apply(&cur, &mut w);
        let a = dot(&w, &cur);
        axpy(-a, &cur, &mut w);
        if let Some(&b) = beta.last() {
            axpy(-b, &prev, &mut w);
        }
        let b = norm(&w);
        alpha.push(a);
        beta.push(b);
        iterations += 1;
        let breakdown = b < f64::MIN_POSITIVE;
        if breakdown || b <= opts.tol || iterations % opts.check_every == 0 || iterations == opts.max_iter {
            let r = ritz(&alpha, &beta, 1, opts.tol);
            let done = r.converged || breakdown;
            broke_down = breakdown;
            last = Some(r);
            if done {
                break;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut w);
        scale(1.0 / b, &mut cur);
    }
    let r = last.expect("at least one Ritz check");
    if !r.converged && !broke_down {
        return Err(Error::NotConverged {
            iterations,
            estimate: r.estimate,
        });
    }

    // Second pass: rebuild the Lanczos vectors and accumulate the Ritz vector.
    let y = &r.coords[0];
    let mut x = vec![0.0; n];
    prev.iter_mut().for_each(|p| *p = 0.0);
    cur.copy_from_slice(&v0);
    for j in 0..y.len() {
        axpy(y[j], &cur, &mut x);
        if j + 1 == y.len() {
            break;
        }
        op.apply(&cur, &mut w);
        axpy(-alpha[j], &cur, &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &prev, &mut w);
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut w);
        scale(1.0 / beta[j], &mut cur);
    }
    Ok(finish(op, vec![x], iterations))
}

fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

fn lowest_reorthogonalized<A: SymmetricOperator + ?Sized>(
    op: &A,
    start: Option<&[f64]>,
    opts: &LanczosOptions,
) -> Result<Eigenpairs> {
    let n = op.dim();
    let k = opts.k;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut basis: Vec<Vec<f64>> = vec![start_vector(n, start, opts)];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut w = vec![0.0; n];
    let max_iter = opts.max_iter.min(n);
    let mut last: Option<Ritz> = None;

    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        orthogonalize(&basis, &mut w);
        let mut b = norm(&w);
        let exhausted = basis.len() == max_iter;
        let scale_t = alpha.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if b <= 1e-10 * scale_t && !exhausted {
            // Invariant subspace: continue with a fresh orthogonal direction.
            for wi in w.iter_mut() {
                *wi = rng.gen_range(-1.0..1.0);
            }
            orthogonalize(&basis, &mut w);
            let nw = norm(&w);
            scale(1.0 / nw, &mut w);
            beta.push(0.0);
            b = 0.0;
        } else {
            beta.push(b);
            if b > 0.0 {
                scale(1.0 / b, &mut w);
            }
        }
        let steps = alpha.len();
        if steps >= k && (steps % opts.check_every == 0 || exhausted || steps == k || b == 0.0) {
            let r = ritz(&alpha, &beta, k, opts.tol);
            let done = r.converged || exhausted;
            last = Some(r);
            if done {
                break;
            }
        }
        if exhausted {
            break;
        }
        basis.push(w.clone());
    }
    let r = last.expect("at least one Ritz check");
    if !r.converged && basis.len() < n {
        return Err(Error::NotConverged {
            iterations: alpha.len(),
            estimate: r.estimate,
        });
    }
    let vectors: Vec<Vec<f64>> = r
        .coords
        .iter()
        .map(|y| {
            let mut x = vec![0.0; n];
            for (c, q) in y.iter().zip(&basis) {
                axpy(*c, q, &mut x);
            }
            x
        })
        .collect();
    Ok(finish(op, vectors, alpha.len()))
}

/// Dense matrix wrapper, mainly for tests and small problems.
pub struct DenseOperator {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymmetricOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};

    /// 1-D Dirichlet chain of length n, large enough for the single-vector path.
    struct Chain {
        n: usize,
        shift: Vec<f64>,
    }
    impl SymmetricOperator for Chain {
        fn dim(&self) -> usize {
            self.n
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.n {
                let mut s = (2.0 + self.shift[i]) * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < self.n {
                    s -= x[i + 1];
                }
                y[i] = s;
            }
        }
    }

    #[test]
    fn single_pair_matches_tridiagonal_oracle() {
        let n = 6000;
        let shift: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin().abs()).collect();
        let op = Chain { n, shift: shift.clone() };
        let res = lowest(&op, None, &LanczosOptions::default()).unwrap();
        let diag: Vec<f64> = shift.iter().map(|s| 2.0 + s).collect();
        let want = tridiag::kth_eigenvalue(&diag, &vec![-1.0; n - 1], 0, 1e-15);
        assert!((res.values[0] - want).abs() < 1e-10, "{} vs {want}", res.values[0]);
        assert!(res.residuals[0] < 1e-7);
    }

    #[test]
    fn several_pairs_match_dense() {
        let n = 60;
        let mut data = vec![0.0; n * n];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        let m = DMatrix::from_row_slice(n, n, &data);
        let mut evs: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        evs.sort_by(f64::total_cmp);
        let op = DenseOperator { n, data };
        let res = lowest(
            &op,
            None,
            &LanczosOptions {
                k: 4,
                ..Default::default()
            },
        )
        .unwrap();
        for i in 0..4 {
            assert!((res.values[i] - evs[i]).abs() < 1e-9);
            assert!(res.residuals[i] < 1e-7);
        }
        assert!(res.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn exact_start_vector_terminates_immediately() {
        let n = 5000;
        let op = Chain {
            n,
            shift: vec![0.0; n],
        };
        // Lowest Dirichlet mode of the chain.
        let v: Vec<f64> = (0..n)
            .map(|i| (std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin())
            .collect();
        let res = lowest(
            &op,
            Some(&v),
            &LanczosOptions {
                noise: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let want = 2.0 - 2.0 * (std::f64::consts::PI / (n + 1) as f64).cos();
        assert!(res.iterations <= 2);
        assert!((res.values[0] - want).abs() < 1e-12);
    }

    #[test]
    fn dot_is_thread_count_independent() {
        let a: Vec<f64> = (0..100_000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..100_000).map(|i| (i as f64 * 0.5).cos()).collect();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| dot(&a, &b));
        let parallel = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| dot(&a, &b));
        assert_eq!(serial.to_bits(), parallel.to_bits());
    }
}
