//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use ethlab::{c64, Mat, MatRef};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng) -> c64 {
    c64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat<c64> {
    Mat::from_fn(r, c, |_, _| gaussian(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> Mat<c64> {
    let g = random_matrix(rng, d, d);
    Mat::from_fn(d, d, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5)
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<c64> {
    let mut v: Vec<c64> = (0..d).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= n;
    }
    v
}

/// Random density matrix of the given rank: `G G† / Tr(G G†)`.
pub fn random_density(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> Mat<c64> {
    let g = random_matrix(rng, d, rank.max(1));
    let mut m = Mat::<c64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = c64::new(0.0, 0.0);
            for k in 0..g.ncols() {
                acc += g[(i, k)] * g[(j, k)].conj();
            }
            m[(i, j)] = acc;
        }
    }
    let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    Mat::from_fn(d, d, |i, j| m[(i, j)] / tr)
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// Cyclic Jacobi on a real symmetric matrix stored row-major.
pub fn jacobi_symmetric(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a Hermitian matrix through its real `2d × 2d` embedding
/// `[[Re, −Im], [Im, Re]]`, which carries each eigenvalue twice.
pub fn hermitian_eigenvalues(h: MatRef<'_, c64>) -> Vec<f64> {
    let d = h.nrows();
    let n = 2 * d;
    let mut a = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            let z = h[(i, j)];
            a[i * n + j] = z.re;
            a[i * n + j + d] = -z.im;
            a[(i + d) * n + j] = z.im;
            a[(i + d) * n + j + d] = z.re;
        }
    }
    jacobi_symmetric(a, n).chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// `Σ|λ|` of a Hermitian matrix.
pub fn trace_norm_hermitian(h: MatRef<'_, c64>) -> f64 {
    hermitian_eigenvalues(h).iter().map(|x| x.abs()).sum()
}

fn orthonormalize(cols: &mut [Vec<c64>]) {
    for k in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..k {
                let proj: c64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a.conj() * b).sum();
                let (head, tail) = cols.split_at_mut(k);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= proj * y;
                }
            }
        }
        let n = cols[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let inv = if n > 1e-200 { 1.0 / n } else { 0.0 };
        for z in &mut cols[k] {
            *z *= inv;
        }
    }
}

/// Largest singular value by block power iteration on `X†X` with a
/// Rayleigh-Ritz step; the block keeps near-degenerate tops from stalling.
pub fn power_iteration_norm(x: MatRef<'_, c64>, rng: &mut ChaCha8Rng) -> f64 {
    let (r, c) = (x.nrows(), x.ncols());
    let p = c.min(8);
    let apply = |v: &[c64]| -> Vec<c64> {
        let xv: Vec<c64> = (0..r).map(|i| (0..c).map(|j| x[(i, j)] * v[j]).sum()).collect();
        (0..c).map(|j| (0..r).map(|i| x[(i, j)].conj() * xv[i]).sum()).collect()
    };
    let mut block: Vec<Vec<c64>> = (0..p).map(|_| random_unit_vector(rng, c)).collect();
    orthonormalize(&mut block);
    let mut last = f64::NAN;
    for it in 0..5_000 {
        let mut next: Vec<Vec<c64>> = block.iter().map(|v| apply(v)).collect();
        orthonormalize(&mut next);
        block = next;
        if it % 10 == 9 {
            let images: Vec<Vec<c64>> = block.iter().map(|v| apply(v)).collect();
            let ritz = Mat::from_fn(p, p, |a, b| {
                block[a].iter().zip(&images[b]).map(|(u, w)| u.conj() * w).sum::<c64>()
            });
            let ritz = Mat::from_fn(p, p, |a, b| (ritz[(a, b)] + ritz[(b, a)].conj()) * 0.5);
            let top = hermitian_eigenvalues(ritz.as_ref()).last().copied().unwrap_or(0.0);
            if (top - last).abs() <= 1e-15 * top.abs() {
                return top.max(0.0).sqrt();
            }
            last = top;
        }
    }
    last.max(0.0).sqrt()
}

/// `Tr_B` by explicit index summation, global index `s·d_B + b`.
pub fn partial_trace_oracle(rho: MatRef<'_, c64>, d_s: usize, d_b: usize) -> Mat<c64> {
    Mat::from_fn(d_s, d_s, |s, t| {
        let mut acc = c64::new(0.0, 0.0);
        for b in 0..d_b {
            acc += rho[(s * d_b + b, t * d_b + b)];
        }
        acc
    })
}

pub fn kron_oracle(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn outer(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
}

pub fn sub(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}
