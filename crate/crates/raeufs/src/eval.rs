//! Clustering and metrics: Lloyd's k-means with k-means++ seeding,
//! Hungarian-matched clustering accuracy, normalized mutual information,
//! silhouette scores, and the clean-samples-only repetition protocol.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};
use crate::rng::RngState;
use crate::scalar::Scalar;

/// Result of one k-means run.
#[derive(Clone, Debug)]
pub struct ClusterAssignment<S> {
    pub labels: Vec<usize>,
    pub inertia: S,
    pub centroids: Matrix<S>,
}

/// Centroid seeding strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KmeansInit {
    PlusPlus,
    Random,
}

/// NMI normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmiVariant {
    /// `I / sqrt(H1 * H2)`.
    Geometric,
    /// `2 I / (H1 + H2)`.
    Arithmetic,
}

/// Metric options threaded through [`evaluate_with`].
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub init: KmeansInit,
    pub nmi: NmiVariant,
    pub max_iters: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            init: KmeansInit::PlusPlus,
            nmi: NmiVariant::Geometric,
            max_iters: 300,
        }
    }
}

/// Per-repetition metrics with population mean/std.
#[derive(Clone, Debug)]
pub struct MetricReport {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub acc_per_rep: Vec<f64>,
    pub nmi_per_rep: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
}

/// Lloyd's algorithm with k-means++ seeding, at most 300 iterations, empty
/// clusters reseeded to the farthest point. Inertia is checked non-increasing
/// across iterations.
pub fn kmeans<S: Scalar>(x: &Matrix<S>, c: usize, rng: &mut RngState) -> Result<ClusterAssignment<S>> {
    kmeans_with(x, c, rng, &EvalOptions::default())
}

pub fn kmeans_with<S: Scalar>(
    x: &Matrix<S>,
    c: usize,
    rng: &mut RngState,
    opts: &EvalOptions,
) -> Result<ClusterAssignment<S>> {
    let n = x.rows();
    if c == 0 || c > n {
        return Err(Error::invalid_arg(
            "c",
            format!("cluster count {c} not in 1..={n} for {n} samples"),
        ));
    }
    let dim = x.cols();
    let mut centroids = match opts.init {
        KmeansInit::PlusPlus => plus_plus_seeds(x, c, rng),
        KmeansInit::Random => {
            let mut seeds = Matrix::zeros(c, dim);
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            for k in 0..c {
                seeds.row_mut(k).copy_from_slice(x.row(order[k]));
            }
            seeds
        }
    };

    let mut labels = vec![0usize; n];
    let mut prev_inertia = S::infinity();
    let mut inertia = S::zero();
    for iter in 0..opts.max_iters {
        // Assignment phase; ties go to the lowest cluster index.
        let mut changed = false;
        inertia = S::zero();
        for i in 0..n {
            let mut best = S::infinity();
            let mut arg = 0usize;
            for k in 0..c {
                let d = sq_dist(x.row(i), centroids.row(k));
                if d < best {
                    best = d;
                    arg = k;
                }
            }
            if labels[i] != arg {
                labels[i] = arg;
                changed = true;
            }
            inertia += best;
        }
        assert!(
            inertia <= prev_inertia + S::of(1e-9) * prev_inertia.abs().max(S::one()),
            "k-means inertia rose: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;
        if !changed && iter > 0 {
            break;
        }

        // Update phase.
        let mut counts = vec![0usize; c];
        let mut sums: Matrix<S> = Matrix::zeros(c, dim);
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, &v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for k in 0..c {
            if counts[k] > 0 {
                let inv = S::one() / S::of(counts[k] as f64);
                for (cent, &s) in centroids.row_mut(k).iter_mut().zip(sums.row(k)) {
                    *cent = s * inv;
                }
            } else {
                // Reseed to the point farthest from its assigned centroid.
                let mut far = 0usize;
                let mut far_d = S::neg_infinity();
                for i in 0..n {
                    let d = sq_dist(x.row(i), centroids.row(labels[i]));
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centroids.row_mut(k).copy_from_slice(x.row(far));
            }
        }
    }
    Ok(ClusterAssignment {
        labels,
        inertia,
        centroids,
    })
}

fn plus_plus_seeds<S: Scalar>(x: &Matrix<S>, c: usize, rng: &mut RngState) -> Matrix<S> {
    let n = x.rows();
    let dim = x.cols();
    let mut centroids = Matrix::zeros(c, dim);
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut min_sq: Vec<S> = (0..n).map(|i| sq_dist(x.row(i), centroids.row(0))).collect();
    for k in 1..c {
        let total: S = min_sq.iter().copied().sum();
        let pick = if total > S::zero() {
            let mut r = rng.uniform::<S>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_sq.iter().enumerate() {
                if r < d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.row_mut(k).copy_from_slice(x.row(pick));
        for i in 0..n {
            let d = sq_dist(x.row(i), centroids.row(k));
            if d < min_sq[i] {
                min_sq[i] = d;
            }
        }
    }
    centroids
}

/// Clustering accuracy: the matched fraction under the best one-to-one map
/// between predicted clusters and classes (optimal assignment on the
/// contingency matrix).
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid_arg(
            "pred",
            format!("length {} != truth length {}", pred.len(), truth.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::invalid_arg("pred", "empty label vectors"));
    }
    let k = pred.iter().chain(truth).map(|&l| l + 1).max().unwrap_or(1);
    let mut counts = vec![vec![0i64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    // Maximize matches == minimize negated counts.
    let cost: Vec<Vec<i64>> = counts.iter().map(|row| row.iter().map(|&v| -v).collect()).collect();
    let assignment = hungarian_min_cost(&cost);
    let matched: i64 = assignment.iter().enumerate().map(|(r, &col)| counts[r][col]).sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// O(n^3) Hungarian algorithm (potentials form) for a square integer cost
/// matrix; returns the column assigned to each row.
fn hungarian_min_cost(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row matched to column j (1-based)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Normalized mutual information with the chosen normalization (natural log).
///
/// When either partition has zero entropy: 1 if both are the trivial
/// single-cluster partition (identical), else 0.
pub fn nmi_with(pred: &[usize], truth: &[usize], variant: NmiVariant) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid_arg(
            "pred",
            format!("length {} != truth length {}", pred.len(), truth.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::invalid_arg("pred", "empty label vectors"));
    }
    let n = pred.len() as f64;
    let kp = pred.iter().map(|&l| l + 1).max().unwrap();
    let kt = truth.iter().map(|&l| l + 1).max().unwrap();
    let mut joint = vec![vec![0f64; kt]; kp];
    let mut cp = vec![0f64; kp];
    let mut ct = vec![0f64; kt];
    for (&p, &t) in pred.iter().zip(truth) {
        joint[p][t] += 1.0;
        cp[p] += 1.0;
        ct[t] += 1.0;
    }
    let h = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let q = c / n;
                -q * q.ln()
            })
            .sum()
    };
    let hp = h(&cp);
    let ht = h(&ct);
    if hp == 0.0 || ht == 0.0 {
        // Zero entropy means a single occupied cluster; both zero means the
        // partitions coincide.
        return Ok(if hp == 0.0 && ht == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (p, row) in joint.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c > 0.0 {
                let q = c / n;
                mi += q * (q * n * n / (cp[p] * ct[t])).ln();
            }
        }
    }
    let norm = match variant {
        NmiVariant::Geometric => (hp * ht).sqrt(),
        NmiVariant::Arithmetic => 0.5 * (hp + ht),
    };
    Ok((mi / norm).clamp(0.0, 1.0))
}

/// NMI with geometric-mean normalization.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(pred, truth, NmiVariant::Geometric)
}

/// Mean silhouette score with Euclidean distances; samples in singleton
/// clusters contribute 0. Requires at least two non-empty clusters.
pub fn silhouette<S: Scalar>(x: &Matrix<S>, labels: &[usize]) -> Result<f64> {
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::invalid_arg(
            "labels",
            format!("length {} != sample count {n}", labels.len()),
        ));
    }
    let k = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::invalid_arg(
            "labels",
            "silhouette needs at least two non-empty clusters",
        ));
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if counts[own] <= 1 {
            continue; // singleton contributes exactly 0
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..n {
            if j == i {
                continue;
            }
            sums[labels[j]] += sq_dist(x.row(i), x.row(j)).as_f64().sqrt();
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for (l, &cnt) in counts.iter().enumerate() {
            if l != own && cnt > 0 {
                b = b.min(sums[l] / cnt as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Runs k-means `repetitions` times on ALL rows of `reduced` (outliers are
/// part of what the method has to cluster, one derived stream per
/// repetition); ACC/NMI are computed on the rows that are inliers and carry
/// ground truth. This is what lets contamination hurt a non-robust method:
/// the clustering sees the outliers even though the metrics do not.
pub fn evaluate<S: Scalar>(
    dataset: &Dataset<S>,
    reduced: &Matrix<S>,
    c: usize,
    repetitions: usize,
    seed: u64,
) -> Result<MetricReport> {
    evaluate_with(dataset, reduced, c, repetitions, seed, &EvalOptions::default())
}

pub fn evaluate_with<S: Scalar>(
    dataset: &Dataset<S>,
    reduced: &Matrix<S>,
    c: usize,
    repetitions: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    if repetitions == 0 {
        return Err(Error::invalid_arg("repetitions", "must be at least 1"));
    }
    if reduced.rows() != dataset.n_samples() {
        return Err(Error::DimMismatch {
            op: "evaluate",
            left_rows: dataset.n_samples(),
            left_cols: dataset.n_features(),
            right_rows: reduced.rows(),
            right_cols: reduced.cols(),
        });
    }
    let rows = dataset.labeled_inlier_rows();
    if rows.is_empty() {
        return Err(Error::invalid_arg(
            "dataset",
            "no labeled inlier rows to evaluate on",
        ));
    }
    let labels = dataset.labels.as_ref().expect("labeled rows imply labels");
    let truth: Vec<usize> = rows.iter().map(|&i| labels[i].expect("filtered")).collect();

    let base = RngState::new(seed);
    let mut acc_per_rep = Vec::with_capacity(repetitions);
    let mut nmi_per_rep = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut rng = base.derive(rep as u64);
        let assignment = kmeans_with(reduced, c, &mut rng, opts)?;
        let pred: Vec<usize> = rows.iter().map(|&i| assignment.labels[i]).collect();
        acc_per_rep.push(clustering_accuracy(&pred, &truth)?);
        nmi_per_rep.push(nmi_with(&pred, &truth, opts.nmi)?);
    }
    let (acc_mean, acc_std) = mean_std(&acc_per_rep);
    let (nmi_mean, nmi_std) = mean_std(&nmi_per_rep);
    Ok(MetricReport {
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
        acc_per_rep,
        nmi_per_rep,
        repetitions,
        seed,
    })
}

/// Per-repetition silhouette report for unlabeled data.
#[derive(Clone, Debug)]
pub struct SilhouetteReport {
    pub mean: f64,
    pub std: f64,
    pub per_rep: Vec<f64>,
}

/// Clusters ALL rows of `reduced` and scores silhouettes over the inlier
/// rows; the selection criterion when no ground truth exists.
pub fn evaluate_silhouette<S: Scalar>(
    dataset: &Dataset<S>,
    reduced: &Matrix<S>,
    c: usize,
    repetitions: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<SilhouetteReport> {
    if repetitions == 0 {
        return Err(Error::invalid_arg("repetitions", "must be at least 1"));
    }
    let rows: Vec<usize> = (0..dataset.n_samples()).filter(|&i| dataset.inlier_mask[i]).collect();
    if rows.is_empty() {
        return Err(Error::invalid_arg("dataset", "no inlier rows"));
    }
    let x_inliers = reduced.select_rows(&rows)?;
    let base = RngState::new(seed);
    let mut per_rep = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut rng = base.derive(rep as u64);
        let assignment = kmeans_with(reduced, c, &mut rng, opts)?;
        let labels: Vec<usize> = rows.iter().map(|&i| assignment.labels[i]).collect();
        per_rep.push(silhouette(&x_inliers, &labels)?);
    }
    let (mean, std) = mean_std(&per_rep);
    Ok(SilhouetteReport { mean, std, per_rep })
}

/// Population mean and standard deviation (divide by n).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
