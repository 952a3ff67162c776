//! Adaptive affinity graph.
//!
//! The affinity matrix is the entropy-regularized closed form: a row-wise
//! softmax of negative pairwise squared distances between pseudo-label rows,
//! with temperature `2 * beta`. Rows are strictly positive and sum to one, so
//! the entropy term stays defined and the Laplacian is always well formed.

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::scalar::Scalar;

/// Row-stochastic, strictly positive similarity matrix.
#[derive(Clone, Debug)]
pub struct AffinityGraph<S> {
    pub s: Matrix<S>,
    /// Entropy regularization weight used to build `s`.
    pub beta: S,
}

/// Degree vector and Laplacian `L = D - S` of an affinity matrix.
#[derive(Clone, Debug)]
pub struct LaplacianView<S> {
    pub degrees: Vec<S>,
    pub l: Matrix<S>,
}

impl<S: Scalar> AffinityGraph<S> {
    /// Uniform graph `s_ij = 1/n`, the maximum-entropy start.
    pub fn uniform(n: usize, beta: S) -> Self {
        let v = S::one() / S::of(n as f64);
        Self {
            s: Matrix::from_fn(n, n, |_, _| v),
            beta,
        }
    }

    pub fn laplacian(&self) -> LaplacianView<S> {
        laplacian(&self.s).expect("affinity matrix is square by construction")
    }
}

/// Degree vector `d_i = sum_k s_ik` and `L = diag(d) - S`.
pub fn laplacian<S: Scalar>(s: &Matrix<S>) -> Result<LaplacianView<S>> {
    if s.rows() != s.cols() {
        return Err(Error::BadShape {
            op: "laplacian",
            rows: s.rows(),
            cols: s.cols(),
            reason: "affinity matrix must be square".into(),
        });
    }
    let n = s.rows();
    let mut degrees = vec![S::zero(); n];
    for i in 0..n {
        degrees[i] = s.row(i).iter().copied().sum();
    }
    let mut l = s.scale(-S::one());
    for (i, &d) in degrees.iter().enumerate() {
        let v = l.get(i, i);
        l.set(i, i, v + d);
    }
    Ok(LaplacianView { degrees, l })
}

/// Laplacian of the symmetrized affinity `W = (S + S^T)/2`, with degrees
/// taken from `W` itself.
///
/// The pairwise sum `1/2 sum_ij s_ij |f_i - f_j|^2` only sees the symmetric
/// part of `S`, so this is the operator for which the trace identity is exact
/// even when the softmax affinity is asymmetric. For symmetric `S` it
/// coincides with [`laplacian`].
pub fn symmetrized_laplacian<S: Scalar>(s: &Matrix<S>) -> Result<LaplacianView<S>> {
    if s.rows() != s.cols() {
        return Err(Error::BadShape {
            op: "symmetrized_laplacian",
            rows: s.rows(),
            cols: s.cols(),
            reason: "affinity matrix must be square".into(),
        });
    }
    let w = s.add(&s.transpose())?.scale(S::of(0.5));
    laplacian(&w)
}

/// Graph smoothness `Tr(F^T L_S F) = 1/2 sum_ij s_ij |f_i - f_j|^2`,
/// computed through the symmetrized Laplacian so the identity is exact for
/// asymmetric affinities as well.
pub fn smoothness<S: Scalar>(f: &Matrix<S>, s: &Matrix<S>) -> Result<S> {
    if s.rows() != s.cols() || s.rows() != f.rows() {
        return Err(Error::DimMismatch {
            op: "smoothness",
            left_rows: f.rows(),
            left_cols: f.cols(),
            right_rows: s.rows(),
            right_cols: s.cols(),
        });
    }
    let lap = symmetrized_laplacian(s)?;
    let lf = lap.l.matmul(f)?;
    let mut tr = S::zero();
    for (a, b) in f.data().iter().zip(lf.data()) {
        tr += *a * *b;
    }
    Ok(tr)
}

/// Negative entropy `sum_ij s_ij ln(s_ij)`. Errors on nonpositive entries.
pub fn entropy_term<S: Scalar>(s: &Matrix<S>) -> Result<S> {
    let mut acc = S::zero();
    for &v in s.data() {
        if v <= S::zero() {
            return Err(Error::invalid_arg(
                "s",
                format!("entropy requires strictly positive entries, found {v}"),
            ));
        }
        acc += v * v.ln();
    }
    Ok(acc)
}

/// Closed-form affinity update: row-wise softmax of `-|f_i - f_j|^2 / (2 beta)`
/// over all j (including j = i), computed with max-subtraction. Entries are
/// floored at a subnormal-safe minimum so none is flushed to exact zero.
pub fn update_affinity<S: Scalar>(f: &Matrix<S>, beta: S) -> Result<AffinityGraph<S>> {
    if beta <= S::zero() {
        return Err(Error::invalid_arg("beta", format!("must be positive, got {beta}")));
    }
    let n = f.rows();
    let floor = S::of(1e-300).max(S::min_positive_value());
    let mut s = Matrix::zeros(n, n);
    let two_beta = S::of(2.0) * beta;
    let mut logits = vec![S::zero(); n];
    for i in 0..n {
        let fi = f.row(i);
        let mut max_logit = S::neg_infinity();
        for j in 0..n {
            let logit = -sq_dist(fi, f.row(j)) / two_beta;
            logits[j] = logit;
            if logit > max_logit {
                max_logit = logit;
            }
        }
        let mut sum = S::zero();
        let row = s.row_mut(i);
        for (slot, &logit) in row.iter_mut().zip(&logits) {
            let e = (logit - max_logit).exp().max(floor);
            *slot = e;
            sum += e;
        }
        for slot in row.iter_mut() {
            *slot /= sum;
        }
    }
    Ok(AffinityGraph { s, beta })
}
