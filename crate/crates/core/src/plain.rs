//! Plaintext reference algorithms: Arnoldi/Lanczos reductions, the
//! Givens-rotation QR iteration, independent dense eigensolvers used as
//! ground truth, and accuracy metrics.

use crate::graph::GraphDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlainError {
    #[error("Krylov breakdown: residual norm {0:e} below tolerance")]
    Breakdown(f64),
    #[error("eigensolver did not converge (complex or clustered spectrum?)")]
    NonConvergent,
    #[error("dimension mismatch")]
    Dimension,
}

/// Sparse N×N real matrix in COO triples.
#[derive(Debug, Clone)]
pub struct SparseCoo {
    pub n: usize,
    pub triples: Vec<(u32, u32, f64)>,
}

impl SparseCoo {
    pub fn from_graph(g: &GraphDataset, scale: f64) -> Self {
        SparseCoo {
            n: g.n as usize,
            triples: g
                .edges
                .iter()
                .map(|&(u, v, w)| (u, v, w as f64 * scale))
                .collect(),
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, j, w) in &self.triples {
            out[i as usize] += w * v[j as usize];
        }
        out
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n * self.n];
        for &(i, j, w) in &self.triples {
            a[i as usize * self.n + j as usize] += w;
        }
        a
    }

    pub fn is_symmetric(&self) -> bool {
        let mut map = std::collections::HashMap::new();
        for &(i, j, w) in &self.triples {
            *map.entry((i, j)).or_insert(0.0) += w;
        }
        map.iter()
            .all(|(&(i, j), &w)| (map.get(&(j, i)).copied().unwrap_or(0.0) - w).abs() < 1e-9)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Arnoldi reduction with modified Gram-Schmidt: returns the M×M upper
/// Hessenberg projection, the N×M orthonormal basis (row-major, columns are
/// the basis vectors), and the final residual norm.
///
/// The start vector is the first standard basis vector, matching the secure
/// variant so the two pipelines are comparable step by step.
pub fn arnoldi(a: &SparseCoo, m: usize) -> Result<(Vec<f64>, Vec<f64>, f64), PlainError> {
    assert!(m >= 2 && m <= a.n);
    let n = a.n;
    let mut p: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    p.push(e1);
    let mut h = vec![0.0; m * m];
    let mut resid = 0.0;
    for k in 0..m {
        let mut w = a.matvec(&p[k]);
        for j in 0..=k {
            let hij = dot(&p[j], &w);
            h[j * m + k] = hij;
            for (wi, pj) in w.iter_mut().zip(&p[j]) {
                *wi -= hij * pj;
            }
        }
        let nw = norm(&w);
        if k + 1 < m {
            if nw < BREAKDOWN_TOL {
                return Err(PlainError::Breakdown(nw));
            }
            h[(k + 1) * m + k] = nw;
            p.push(w.iter().map(|x| x / nw).collect());
        } else {
            resid = nw;
        }
    }
    let mut basis = vec![0.0; n * m];
    for (j, col) in p.iter().enumerate() {
        for i in 0..n {
            basis[i * m + j] = col[i];
        }
    }
    Ok((h, basis, resid))
}

/// Lanczos three-term recurrence for symmetric input; same output layout as
/// [`arnoldi`] with a tridiagonal projection.
pub fn lanczos(a: &SparseCoo, m: usize) -> Result<(Vec<f64>, Vec<f64>, f64), PlainError> {
    assert!(m >= 2 && m <= a.n);
    let n = a.n;
    let mut t = vec![0.0; m * m];
    let mut p: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    p.push(e1);
    let mut beta_prev = 0.0;
    let mut resid = 0.0;
    for k in 0..m {
        let mut w = a.matvec(&p[k]);
        if k > 0 {
            for (wi, pj) in w.iter_mut().zip(&p[k - 1]) {
                *wi -= beta_prev * pj;
            }
        }
        let alpha = dot(&p[k], &w);
        t[k * m + k] = alpha;
        for (wi, pj) in w.iter_mut().zip(&p[k]) {
            *wi -= alpha * pj;
        }
        // full reorthogonalization: the three-term recurrence alone loses
        // orthogonality once the dominant Ritz pair converges, and the ghost
        // eigenvalues that follow would differ between this mirror and the
        // fixed-point pipeline; one clean-up pass keeps both bases orthonormal
        for pj in &p {
            let c = dot(pj, &w);
            for (wi, pji) in w.iter_mut().zip(pj) {
                *wi -= c * pji;
            }
        }
        let beta = norm(&w);
        if k + 1 < m {
            if beta < BREAKDOWN_TOL {
                return Err(PlainError::Breakdown(beta));
            }
            t[k * m + k + 1] = beta;
            t[(k + 1) * m + k] = beta;
            p.push(w.iter().map(|x| x / beta).collect());
            beta_prev = beta;
        } else {
            resid = beta;
        }
    }
    let mut basis = vec![0.0; n * m];
    for (j, col) in p.iter().enumerate() {
        for i in 0..n {
            basis[i * m + j] = col[i];
        }
    }
    Ok((t, basis, resid))
}

/// `K` sweeps of the Givens-rotation QR iteration on an M×M (Hessenberg)
/// matrix. Returns `(T_K, S)` with `S` the accumulated orthogonal factor.
pub fn qr_givens(h: &[f64], m: usize, sweeps: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(h.len(), m * m);
    let mut t = h.to_vec();
    let mut s = vec![0.0; m * m];
    for i in 0..m {
        s[i * m + i] = 1.0;
    }
    for _ in 0..sweeps {
        let mut rots = Vec::with_capacity(m - 1);
        for i in 0..m - 1 {
            let a = t[i * m + i];
            let b = t[(i + 1) * m + i];
            let r = (a * a + b * b).sqrt();
            let (c, sn) = if r < 1e-300 { (1.0, 0.0) } else { (a / r, b / r) };
            rots.push((c, sn));
            // left-apply G_i to rows i, i+1
            for col in 0..m {
                let x = t[i * m + col];
                let y = t[(i + 1) * m + col];
                t[i * m + col] = c * x + sn * y;
                t[(i + 1) * m + col] = -sn * x + c * y;
            }
        }
        // T <- R Q with Q = G_0^T ... G_{m-2}^T, and accumulate S <- S Q
        for (i, &(c, sn)) in rots.iter().enumerate() {
            for row in 0..m {
                let x = t[row * m + i];
                let y = t[row * m + i + 1];
                t[row * m + i] = c * x + sn * y;
                t[row * m + i + 1] = -sn * x + c * y;
                let x = s[row * m + i];
                let y = s[row * m + i + 1];
                s[row * m + i] = c * x + sn * y;
                s[row * m + i + 1] = -sn * x + c * y;
            }
        }
    }
    (t, s)
}

/// Cyclic Jacobi eigensolver for symmetric matrices (ground truth for
/// desk-scale inputs). Returns eigenvalues and row-major eigenvector matrix
/// whose columns are the eigenvectors, unsorted.
pub fn jacobi_eig(a_in: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>), PlainError> {
    assert_eq!(a_in.len(), n * n);
    let mut a = a_in.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    // relative stop: the off-diagonal mass bottoms out at ~||A||*eps*n, so an
    // absolute threshold would spin forever on matrices with large entries
    let fro: f64 = a_in.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * fro.max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off.sqrt() < tol {
            let vals = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((vals, v));
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(PlainError::NonConvergent)
}

/// Dominant eigenpair of a dense matrix by power iteration with a Rayleigh
/// quotient convergence test; valid when the dominant eigenvalue is real and
/// separated.
fn power_dominant(a: &[f64], n: usize, seed: u64) -> Result<(f64, Vec<f64>), PlainError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let matvec = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = dot(&a[i * n..(i + 1) * n], v);
        }
        out
    };
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let w = matvec(&v);
        let nw = norm(&w);
        if nw < 1e-300 {
            return Ok((0.0, v));
        }
        let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
        lambda = dot(&next, &matvec(&next));
        let resid: f64 = matvec(&next)
            .iter()
            .zip(&next)
            .map(|(x, y)| (x - lambda * y).powi(2))
            .sum::<f64>()
            .sqrt();
        v = next;
        if resid <= 1e-10 * lambda.abs().max(1.0) {
            return Ok((lambda, v));
        }
    }
    let final_resid: f64 = matvec(&v)
        .iter()
        .zip(&v)
        .map(|(x, y)| (x - lambda * y).powi(2))
        .sum::<f64>()
        .sqrt();
    if final_resid <= 1e-6 * lambda.abs().max(1.0) {
        Ok((lambda, v))
    } else {
        Err(PlainError::NonConvergent)
    }
}

/// Householder similarity deflation: rotates `v` onto `e_1` and returns the
/// trailing (n-1)×(n-1) block of `H A H`.
fn deflate(a: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u[0] += v[0].signum() * norm(v);
    let nu = norm(&u);
    if nu < 1e-300 {
        return a[(n + 1)..].chunks(n).flat_map(|r| r[1..].to_vec()).collect();
    }
    u.iter_mut().for_each(|x| *x /= nu);
    // H = I - 2uu^T; B = H A H
    let mut b = a.to_vec();
    // B = A - 2u(u^T A)
    let uta: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| u[i] * a[i * n + j]).sum())
        .collect();
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] -= 2.0 * u[i] * uta[j];
        }
    }
    // B = B - 2(B u)u^T
    let bu: Vec<f64> = (0..n).map(|i| dot(&b[i * n..(i + 1) * n], &u)).collect();
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] -= 2.0 * bu[i] * u[j];
        }
    }
    let mut out = Vec::with_capacity((n - 1) * (n - 1));
    for i in 1..n {
        for j in 1..n {
            out.push(b[i * n + j]);
        }
    }
    out
}

/// Top-k eigenvalues of a dense (possibly non-symmetric) matrix by power
/// iteration with deflation, ordered by descending magnitude. Fails
/// explicitly when the spectrum is complex or clustered at the top.
pub fn power_deflate_topk(a: &[f64], n: usize, k: usize) -> Result<Vec<f64>, PlainError> {
    assert!(k <= n);
    let mut cur = a.to_vec();
    let mut dim = n;
    let mut vals = Vec::with_capacity(k);
    for stage in 0..k {
        let (lambda, v) = power_dominant(&cur, dim, 1000 + stage as u64)?;
        vals.push(lambda);
        if stage + 1 < k {
            cur = deflate(&cur, dim, &v);
            dim -= 1;
        }
    }
    // separation check: the method is only trustworthy with a relative gap
    for w in vals.windows(2) {
        if (w[0].abs() - w[1].abs()).abs() < 0.01 * w[0].abs().max(1e-12) {
            return Err(PlainError::NonConvergent);
        }
    }
    Ok(vals)
}

/// Independent dense eigensolver oracle: Jacobi for symmetric inputs (all
/// eigenpairs), power-with-deflation for the rest (values only).
pub fn oracle_eig(a: &[f64], n: usize) -> Result<(Vec<f64>, Option<Vec<f64>>), PlainError> {
    assert!(n <= 64, "dense oracle is desk-scale only");
    let sym = (0..n).all(|i| (0..n).all(|j| (a[i * n + j] - a[j * n + i]).abs() < 1e-9));
    if sym {
        let (vals, vecs) = jacobi_eig(a, n)?;
        Ok((vals, Some(vecs)))
    } else {
        Ok((power_deflate_topk(a, n, n.min(8))?, None))
    }
}

/// Sorts eigenpair indices by descending magnitude, ties by original index.
pub fn sort_by_magnitude(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| {
        vals[j]
            .abs()
            .partial_cmp(&vals[i].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    idx
}

/// Ground-truth top-k eigenpairs for a graph-scale matrix: a wide plaintext
/// Krylov reduction followed by the dense oracle. Symmetric inputs get
/// eigenvectors; general ones get values only.
pub fn oracle_graph_topk(
    a: &SparseCoo,
    k: usize,
    basis_dim: usize,
) -> Result<(Vec<f64>, Option<Vec<Vec<f64>>>), PlainError> {
    let m = basis_dim.min(a.n).min(64).max(k + 2).min(a.n);
    if a.is_symmetric() {
        let (t, p, _) = lanczos_reorth(a, m)?;
        let (vals, vecs) = jacobi_eig(&t, m)?;
        let order = sort_by_magnitude(&vals);
        let top: Vec<f64> = order.iter().take(k).map(|&i| vals[i]).collect();
        let mut top_vecs = Vec::with_capacity(k);
        for &i in order.iter().take(k) {
            // lift Ritz vector: v = P u_i
            let mut v = vec![0.0; a.n];
            for r in 0..a.n {
                for c in 0..m {
                    v[r] += p[r * m + c] * vecs[c * m + i];
                }
            }
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            top_vecs.push(v);
        }
        Ok((top, Some(top_vecs)))
    } else {
        let dense = a.to_dense();
        Ok((power_deflate_topk(&dense, a.n, k)?, None))
    }
}

/// Lanczos with full reorthogonalization: used only as a ground-truth aid,
/// where numerical robustness matters more than matching the pipeline recurrence.
pub fn lanczos_reorth(a: &SparseCoo, m: usize) -> Result<(Vec<f64>, Vec<f64>, f64), PlainError> {
    // Arnoldi on a symmetric input is exactly Lanczos with reorthogonalization
    arnoldi(a, m)
}

/// RMSE over the top-k eigenvalues (index-aligned).
pub fn rmse_eigenvalues(a: &[f64], b: &[f64], k: usize) -> Result<f64, PlainError> {
    if a.len() < k || b.len() < k {
        return Err(PlainError::Dimension);
    }
    let s: f64 = (0..k).map(|i| (a[i] - b[i]).powi(2)).sum();
    Ok((s / k as f64).sqrt())
}

/// RMSE over top-k eigenvectors after unit normalization and sign alignment.
pub fn rmse_eigenvectors(a: &[Vec<f64>], b: &[Vec<f64>], k: usize) -> Result<f64, PlainError> {
    if a.len() < k || b.len() < k {
        return Err(PlainError::Dimension);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..k {
        if a[i].len() != b[i].len() {
            return Err(PlainError::Dimension);
        }
        let na = norm(&a[i]);
        let nb = norm(&b[i]);
        let d = dot(&a[i], &b[i]);
        let sign = if d >= 0.0 { 1.0 } else { -1.0 };
        for (x, y) in a[i].iter().zip(&b[i]) {
            total += (x / na - sign * y / nb).powi(2);
        }
        count += a[i].len();
    }
    Ok((total / count as f64).sqrt())
}
