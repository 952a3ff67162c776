//! Generalized power iteration for the pseudo-label subproblem.
//!
//! Solves `min eta |Z - F|_F^2 + gamma Tr(F^T L F)` over `F^T F = I` by
//! repeating a linear map and a polar orthogonalization. Each polar step
//! maximizes a linear minorant, so the objective never increases.

use crate::error::{Error, Result};
use crate::graph::LaplacianView;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::svd::exact_svd;

/// N x d matrix with orthonormal columns (the relaxed cluster indicator).
#[derive(Clone, Debug)]
pub struct PseudoLabelMatrix<S> {
    pub f: Matrix<S>,
}

impl<S: Scalar> PseudoLabelMatrix<S> {
    /// Wraps a matrix after checking the orthonormality invariant.
    pub fn new(f: Matrix<S>) -> Result<Self> {
        let defect = orthonormality_defect(&f);
        if defect > S::of(1e-8) {
            return Err(Error::BadShape {
                op: "pseudo_label",
                rows: f.rows(),
                cols: f.cols(),
                reason: format!("columns not orthonormal, defect {defect}"),
            });
        }
        Ok(Self { f })
    }

    /// Orthonormalized Gaussian start.
    pub fn random(n: usize, d: usize, rng: &mut crate::rng::RngState) -> Self {
        let g = crate::rng::gaussian_matrix::<S>(n, d, rng);
        Self {
            f: crate::svd::orthonormal_columns(&g),
        }
    }
}

/// Settings for the power iteration.
#[derive(Clone, Copy, Debug)]
pub struct GpiConfig<S> {
    pub max_iters: usize,
    /// Stop when `|F_t - F_{t-1}|_F <= tolerance * sqrt(d)`.
    pub tolerance: S,
    pub eta: S,
    pub gamma: S,
}

impl<S: Scalar> Default for GpiConfig<S> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tolerance: S::of(1e-6),
            eta: S::one(),
            gamma: S::zero(),
        }
    }
}

/// Shift `xi` and matrix `C = xi I - (I + (gamma/eta) L)` whose symmetric part
/// is positive definite.
///
/// `xi` is `1 + (gamma/eta) * max(2 max_i d_i, g) + 1e-6`, where `g` is the
/// Gershgorin bound on the symmetrized Laplacian. For symmetric affinities the
/// degree bound dominates; the Gershgorin term keeps the guarantee when the
/// softmax affinity has very concentrated columns.
pub fn spectral_shift<S: Scalar>(lap: &LaplacianView<S>, gamma: S, eta: S) -> Result<(Matrix<S>, S)> {
    if eta == S::zero() {
        return Err(Error::invalid_arg("eta", "must be nonzero"));
    }
    let n = lap.l.rows();
    let two = S::of(2.0);
    let degree_bound = lap
        .degrees
        .iter()
        .fold(S::zero(), |acc, &d| acc.max(d))
        * two;
    let mut gershgorin = S::zero();
    for i in 0..n {
        let mut row_bound = lap.l.get(i, i);
        for j in 0..n {
            if j != i {
                row_bound += ((lap.l.get(i, j) + lap.l.get(j, i)) / two).abs();
            }
        }
        gershgorin = gershgorin.max(row_bound);
    }
    let lam_bound = degree_bound.max(gershgorin);
    let ratio = gamma / eta;
    let xi = S::one() + ratio * lam_bound + S::of(1e-6);

    let mut c = lap.l.scale(-ratio);
    for i in 0..n {
        let v = c.get(i, i);
        c.set(i, i, v + xi - S::one());
    }
    Ok((c, xi))
}

/// Orthonormal polar factor `U_d V^T` of an N x d matrix — the maximizer of
/// `Tr(F^T M)` over the Stiefel manifold. Rank-deficient inputs still yield an
/// orthonormal result (null directions filled deterministically).
pub fn polar_orthogonalize<S: Scalar>(m: &Matrix<S>, d: usize) -> Result<Matrix<S>> {
    if m.cols() < d || d == 0 || d > m.rows() {
        return Err(Error::BadShape {
            op: "polar_orthogonalize",
            rows: m.rows(),
            cols: m.cols(),
            reason: format!("cannot extract a rank-{d} polar factor"),
        });
    }
    let svd = exact_svd(m);
    let rank_tol = svd.sigma.first().copied().unwrap_or(S::zero()) * S::epsilon() * S::of(m.rows() as f64);
    if svd.sigma.iter().take(d).any(|&s| s <= rank_tol) {
        log::warn!(
            "polar_orthogonalize: rank-deficient input ({}x{}), null directions filled",
            m.rows(),
            m.cols()
        );
    }
    let keep: Vec<usize> = (0..d).collect();
    let u = svd.u.select_columns(&keep)?;
    let v = svd.v.select_columns(&keep)?;
    u.matmul_nt(&v)
}

/// Objective of the pseudo-label subproblem.
pub fn f_subproblem_objective<S: Scalar>(
    f: &Matrix<S>,
    z_tilde: &Matrix<S>,
    lap: &LaplacianView<S>,
    eta: S,
    gamma: S,
) -> Result<S> {
    let fit = z_tilde.sub(f)?.frobenius_norm();
    let lf = lap.l.matmul(f)?;
    let mut tr = S::zero();
    for (a, b) in f.data().iter().zip(lf.data()) {
        tr += *a * *b;
    }
    Ok(eta * fit * fit + gamma * tr)
}

/// Diagnostics from a [`gpi_solve`] run.
#[derive(Clone, Debug)]
pub struct GpiReport<S> {
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration (non-increasing).
    pub objective_trace: Vec<S>,
}

/// Solves the pseudo-label subproblem from `f0` by generalized power iteration.
pub fn gpi_solve<S: Scalar>(
    z_tilde: &Matrix<S>,
    lap: &LaplacianView<S>,
    cfg: &GpiConfig<S>,
    f0: &PseudoLabelMatrix<S>,
) -> Result<(PseudoLabelMatrix<S>, GpiReport<S>)> {
    let (n, d) = z_tilde.shape();
    if lap.l.rows() != n || f0.f.shape() != (n, d) {
        return Err(Error::DimMismatch {
            op: "gpi_solve",
            left_rows: n,
            left_cols: d,
            right_rows: lap.l.rows(),
            right_cols: f0.f.cols(),
        });
    }
    let (c, _xi) = spectral_shift(lap, cfg.gamma, cfg.eta)?;
    // The quadratic form only sees the symmetric part; use it explicitly so
    // the ascent argument holds for asymmetric affinities too.
    let c_sym = c.add(&c.transpose())?.scale(S::of(0.5));

    let mut f = f0.f.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let threshold = cfg.tolerance * S::of(d as f64).sqrt();
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let m = c_sym.matmul(&f)?.scale(S::of(2.0)).add(&z_tilde.scale(S::of(2.0)))?;
        let f_next = polar_orthogonalize(&m, d)?;
        let step = f_next.sub(&f)?.frobenius_norm();
        f = f_next;
        trace.push(f_subproblem_objective(&f, z_tilde, lap, cfg.eta, cfg.gamma)?);
        if step <= threshold {
            converged = true;
            break;
        }
    }
    Ok((
        PseudoLabelMatrix::new(f)?,
        GpiReport {
            iterations,
            converged,
            objective_trace: trace,
        },
    ))
}

/// `|F^T F - I|_F`.
pub fn orthonormality_defect<S: Scalar>(f: &Matrix<S>) -> S {
    let gram = f.matmul_tn(f).expect("self-product");
    gram.sub(&Matrix::identity(f.cols()))
        .expect("square")
        .frobenius_norm()
}
