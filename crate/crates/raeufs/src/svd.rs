//! Singular value decomposition: exact one-sided Jacobi for small problems,
//! randomized range-finding with power iterations for larger ones.
//!
//! Determinism: the sign of the largest-magnitude entry of each left singular
//! vector is fixed positive (the paired right vector flips with it), so the
//! factorization is reproducible across platforms.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, RngState};
use crate::scalar::Scalar;

/// Thin SVD `m = U * diag(sigma) * V^T` with `U: rows x k`, `V: cols x k`.
#[derive(Clone, Debug)]
pub struct Svd<S> {
    pub u: Matrix<S>,
    pub sigma: Vec<S>,
    pub v: Matrix<S>,
}

const MAX_SWEEPS: usize = 60;

/// Side of the matrix below which the exact path is used.
pub const EXACT_SVD_MAX_DIM: usize = 32;

/// Exact thin SVD by one-sided Jacobi (Hestenes) rotations.
///
/// Always returns `min(rows, cols)` singular triplets, sorted non-increasing.
/// Rank-deficient inputs get orthonormal filler vectors for the null
/// directions, chosen deterministically.
pub fn exact_svd<S: Scalar>(m: &Matrix<S>) -> Svd<S> {
    if m.rows() >= m.cols() {
        exact_svd_tall(m)
    } else {
        let t = exact_svd_tall(&m.transpose());
        Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }
    }
}

fn exact_svd_tall<S: Scalar>(m: &Matrix<S>) -> Svd<S> {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols);
    // Work on column vectors; rotations touch pairs of columns.
    let mut a: Vec<Vec<S>> = (0..cols).map(|j| m.col(j)).collect();
    let mut v: Vec<Vec<S>> = (0..cols)
        .map(|j| {
            let mut e = vec![S::zero(); cols];
            e[j] = S::one();
            e
        })
        .collect();

    let tol = S::epsilon() * S::of(64.0);
    for _sweep in 0..MAX_SWEEPS {
        let mut max_off = S::zero();
        for p in 0..cols.saturating_sub(1) {
            for q in (p + 1)..cols {
                let alpha = sq_norm(&a[p]);
                let beta = sq_norm(&a[q]);
                let gamma = dot(&a[p], &a[q]);
                let denom = (alpha * beta).sqrt();
                if denom == S::zero() {
                    continue;
                }
                let rel = gamma.abs() / denom;
                if rel > max_off {
                    max_off = rel;
                }
                if rel <= tol {
                    continue;
                }
                let tau = (beta - alpha) / (S::of(2.0) * gamma);
                let t = tau.signum() / (tau.abs() + (S::one() + tau * tau).sqrt());
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut a, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if max_off <= tol {
            break;
        }
    }

    let mut sigma: Vec<S> = a.iter().map(|col| sq_norm(col).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("finite singular values"));
    let a: Vec<Vec<S>> = order.iter().map(|&j| a[j].clone()).collect();
    let v: Vec<Vec<S>> = order.iter().map(|&j| v[j].clone()).collect();
    sigma = order.iter().map(|&j| sigma[j]).collect();

    // Normalize columns with sigma > cutoff; orthonormally complete the rest.
    let cutoff = sigma.first().copied().unwrap_or(S::zero()) * S::epsilon() * S::of(rows as f64);
    let mut u_cols: Vec<Vec<S>> = Vec::with_capacity(cols);
    for (j, col) in a.iter().enumerate() {
        if sigma[j] > cutoff && sigma[j] > S::zero() {
            u_cols.push(col.iter().map(|&x| x / sigma[j]).collect());
        } else {
            sigma[j] = S::zero();
            u_cols.push(complete_orthonormal(&u_cols, rows));
        }
    }

    let mut u = Matrix::zeros(rows, cols);
    let mut v_mat = Matrix::zeros(cols, cols);
    for j in 0..cols {
        for i in 0..rows {
            u.set(i, j, u_cols[j][i]);
        }
        for i in 0..cols {
            v_mat.set(i, j, v[j][i]);
        }
    }
    sign_fix(&mut u, &mut v_mat);
    Svd { u, sigma, v: v_mat }
}

/// Randomized thin SVD of rank `k` (oversampling 10, two power iterations).
///
/// Small inputs (`min(rows, cols) <= 32`) are routed through the exact path.
pub fn randomized_svd<S: Scalar>(m: &Matrix<S>, k: usize, rng: &mut RngState) -> Result<Svd<S>> {
    let min_dim = m.rows().min(m.cols());
    if k == 0 || k > min_dim {
        return Err(Error::invalid_arg(
            "k",
            format!("rank {k} not in 1..={min_dim} for a {}x{} matrix", m.rows(), m.cols()),
        ));
    }
    if min_dim <= EXACT_SVD_MAX_DIM {
        return Ok(truncate(exact_svd(m), k));
    }
    if m.rows() >= m.cols() {
        randomized_tall(m, k, rng)
    } else {
        let t = randomized_tall(&m.transpose(), k, rng)?;
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

fn randomized_tall<S: Scalar>(m: &Matrix<S>, k: usize, rng: &mut RngState) -> Result<Svd<S>> {
    let sketch = (k + 10).min(m.cols());
    let omega = gaussian_matrix::<S>(m.cols(), sketch, rng);
    let mut q = orthonormal_columns(&m.matmul(&omega)?);
    for _ in 0..2 {
        let z = orthonormal_columns(&m.matmul_tn(&q)?);
        q = orthonormal_columns(&m.matmul(&z)?);
    }
    let b = q.matmul_tn(m)?; // sketch x cols
    let small = exact_svd(&b);
    let mut u = q.matmul(&small.u)?;
    let mut v = small.v;
    sign_fix(&mut u, &mut v);
    Ok(truncate(
        Svd {
            u,
            sigma: small.sigma,
            v,
        },
        k,
    ))
}

fn truncate<S: Scalar>(svd: Svd<S>, k: usize) -> Svd<S> {
    let keep: Vec<usize> = (0..k).collect();
    Svd {
        u: svd.u.select_columns(&keep).expect("k within bounds"),
        sigma: svd.sigma[..k].to_vec(),
        v: svd.v.select_columns(&keep).expect("k within bounds"),
    }
}

/// Thin orthonormal basis for the column space, via twice-iterated
/// modified Gram-Schmidt. Zero columns are replaced deterministically.
pub fn orthonormal_columns<S: Scalar>(m: &Matrix<S>) -> Matrix<S> {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols, "orthonormal_columns expects a tall matrix");
    let mut basis: Vec<Vec<S>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut col = m.col(j);
        let scale = sq_norm(&col).sqrt();
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(&col, b);
                for (c, &bv) in col.iter_mut().zip(b) {
                    *c -= proj * bv;
                }
            }
        }
        let norm = sq_norm(&col).sqrt();
        if norm > S::epsilon() * S::of(rows as f64) * scale.max(S::one()) {
            for c in col.iter_mut() {
                *c /= norm;
            }
            basis.push(col);
        } else {
            basis.push(complete_orthonormal(&basis, rows));
        }
    }
    let mut q = Matrix::zeros(rows, cols);
    for (j, b) in basis.iter().enumerate() {
        for (i, &x) in b.iter().enumerate() {
            q.set(i, j, x);
        }
    }
    q
}

/// First coordinate vector that survives orthogonalization against `basis`,
/// normalized. Deterministic filler for rank-deficient factorizations.
fn complete_orthonormal<S: Scalar>(basis: &[Vec<S>], rows: usize) -> Vec<S> {
    for start in 0..rows {
        let mut cand = vec![S::zero(); rows];
        cand[start] = S::one();
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&cand, b);
                for (c, &bv) in cand.iter_mut().zip(b) {
                    *c -= proj * bv;
                }
            }
        }
        let norm = sq_norm(&cand).sqrt();
        if norm > S::of(0.5) {
            return cand.iter().map(|&x| x / norm).collect();
        }
    }
    unreachable!("fewer basis vectors than dimensions, a coordinate vector must survive");
}

/// Flips each (u_j, v_j) pair so the largest-magnitude entry of u_j is positive.
fn sign_fix<S: Scalar>(u: &mut Matrix<S>, v: &mut Matrix<S>) {
    for j in 0..u.cols() {
        let mut best = 0usize;
        let mut best_abs = S::zero();
        for i in 0..u.rows() {
            let a = u.get(i, j).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u.get(best, j) < S::zero() {
            for i in 0..u.rows() {
                let x = u.get(i, j);
                u.set(i, j, -x);
            }
            for i in 0..v.rows() {
                let x = v.get(i, j);
                v.set(i, j, -x);
            }
        }
    }
}

fn sq_norm<S: Scalar>(xs: &[S]) -> S {
    xs.iter().map(|&x| x * x).sum()
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    crate::matrix::dot(a, b)
}

fn rotate_pair<S: Scalar>(cols: &mut [Vec<S>], p: usize, q: usize, c: S, s: S) {
    debug_assert!(p < q);
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Matrix<f64>;

    fn orthonormality_defect(m: &M) -> f64 {
        let gram = m.matmul_tn(m).unwrap();
        gram.sub(&M::identity(m.cols())).unwrap().frobenius_norm()
    }

    fn reconstruct(svd: &Svd<f64>) -> M {
        let mut us = svd.u.clone();
        for j in 0..us.cols() {
            for i in 0..us.rows() {
                us.set(i, j, us.get(i, j) * svd.sigma[j]);
            }
        }
        us.matmul_nt(&svd.v).unwrap()
    }

    /// Independent oracle: singular values via cyclic Jacobi eigensolver on
    /// the Gram matrix A^T A (different algorithm and code path from the
    /// one-sided implementation above).
    fn gram_eig_singular_values(m: &M) -> Vec<f64> {
        let n = m.cols();
        let mut g = m.matmul_tn(m).unwrap();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += g.get(p, q).abs();
                }
            }
            if off < 1e-14 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = g.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = g.get(p, p);
                    let aqq = g.get(q, q);
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..n {
                        let gip = g.get(i, p);
                        let giq = g.get(i, q);
                        g.set(i, p, c * gip - s * giq);
                        g.set(i, q, s * gip + c * giq);
                    }
                    for i in 0..n {
                        let gpi = g.get(p, i);
                        let gqi = g.get(q, i);
                        g.set(p, i, c * gpi - s * gqi);
                        g.set(q, i, s * gpi + c * gqi);
                    }
                }
            }
        }
        let mut evs: Vec<f64> = (0..n).map(|i| g.get(i, i).max(0.0).sqrt()).collect();
        evs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        evs
    }

    #[test]
    fn diagonal_matrix_recovers_diagonal() {
        let m = M::from_vec(3, 3, vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rng = RngState::new(0);
        let svd = randomized_svd(&m, 3, &mut rng).unwrap();
        assert!((svd.sigma[0] - 3.0).abs() < 1e-12);
        assert!((svd.sigma[1] - 2.0).abs() < 1e-12);
        assert!((svd.sigma[2] - 1.0).abs() < 1e-12);
        // U and V are signed permutations of the identity.
        for m in [&svd.u, &svd.v] {
            for j in 0..3 {
                let col = m.col(j);
                let ones = col.iter().filter(|x| (x.abs() - 1.0).abs() < 1e-10).count();
                let zeros = col.iter().filter(|x| x.abs() < 1e-10).count();
                assert_eq!((ones, zeros), (1, 2));
            }
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let u = [1.0, 2.0, -2.0];
        let v = [3.0, 4.0];
        let m = M::from_fn(3, 2, |i, j| u[i] * v[j]);
        let mut rng = RngState::new(1);
        let svd = randomized_svd(&m, 1, &mut rng).unwrap();
        let expect = (u.iter().map(|x| x * x).sum::<f64>()).sqrt()
            * (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        assert!((svd.sigma[0] - expect).abs() < 1e-12, "{} vs {expect}", svd.sigma[0]);
    }

    #[test]
    fn random_matrix_matches_gram_eigensolver_oracle() {
        let mut rng = RngState::new(2024);
        let m = gaussian_matrix::<f64>(20, 6, &mut rng);
        let svd = randomized_svd(&m, 6, &mut rng).unwrap();
        let oracle = gram_eig_singular_values(&m);
        for (got, want) in svd.sigma.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(orthonormality_defect(&svd.u) < 1e-8);
        assert!(orthonormality_defect(&svd.v) < 1e-8);
        assert!(reconstruct(&svd).sub(&m).unwrap().frobenius_norm() < 1e-9);
    }

    #[test]
    fn invalid_rank_is_rejected() {
        let m = M::zeros(4, 3);
        let mut rng = RngState::new(0);
        assert!(randomized_svd(&m, 0, &mut rng).is_err());
        assert!(randomized_svd(&m, 4, &mut rng).is_err());
    }

    #[test]
    fn large_path_near_optimal_truncation() {
        // 40x40 forces the randomized path; compare against the exact
        // truncation computed by the Jacobi path.
        let mut rng = RngState::new(5);
        let left = gaussian_matrix::<f64>(40, 5, &mut rng);
        let right = gaussian_matrix::<f64>(5, 40, &mut rng);
        let low_rank = left.matmul(&right).unwrap();
        let noise = gaussian_matrix::<f64>(40, 40, &mut rng).scale(0.01);
        let m = low_rank.add(&noise).unwrap();

        let k = 5;
        let svd = randomized_svd(&m, k, &mut rng).unwrap();
        assert!(orthonormality_defect(&svd.u) < 1e-8);
        assert!(orthonormality_defect(&svd.v) < 1e-8);
        let err = reconstruct(&svd).sub(&m).unwrap().frobenius_norm();

        let exact = truncate(exact_svd(&m), k);
        let best = reconstruct(&exact).sub(&m).unwrap().frobenius_norm();
        assert!(err <= best * 1.05, "randomized {err} vs best {best}");
    }

    #[test]
    fn rank_deficient_input_still_orthonormal() {
        let m = M::zeros(6, 3);
        let svd = exact_svd(&m);
        assert!(orthonormality_defect(&svd.u) < 1e-12);
        assert_eq!(svd.sigma, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut r1 = RngState::new(77);
        let m = gaussian_matrix::<f64>(50, 40, &mut r1);
        let s1 = randomized_svd(&m, 8, &mut r1.derive(1)).unwrap();
        let s2 = randomized_svd(&m, 8, &mut r1.derive(1)).unwrap();
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.sigma, s2.sigma);
        assert_eq!(s1.v, s2.v);
    }

    #[test]
    fn f32_instantiation_works() {
        let mut rng = RngState::new(3);
        let m = gaussian_matrix::<f32>(10, 4, &mut rng);
        let svd = randomized_svd(&m, 4, &mut rng).unwrap();
        let gram = svd.u.matmul_tn(&svd.u).unwrap();
        let defect = gram.sub(&Matrix::<f32>::identity(4)).unwrap().frobenius_norm();
        assert!(defect < 1e-4);
    }
}
