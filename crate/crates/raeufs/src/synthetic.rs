//! Synthetic blob generator: Gaussian clusters on a few informative
//! dimensions, low-variance noise on the rest. The desk-scale fixture for
//! experiments and tests.

use crate::data::Dataset;
use crate::matrix::Matrix;
use crate::rng::RngState;
use crate::scalar::Scalar;

/// Parameters of the generator.
#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub informative: usize,
    pub noise: usize,
    pub per_cluster: usize,
    /// Minimum pairwise distance between cluster means on the informative
    /// dimensions (within-cluster std is 1 there).
    pub separation: f64,
    pub seed: u64,
}

/// Draws the dataset: informative dims are unit-variance Gaussians around
/// cluster means rescaled to the requested separation; noise dims are
/// `N(0, 0.1 I)`. Rows are ordered by cluster and labeled.
pub fn make_blobs<S: Scalar>(spec: &SyntheticSpec) -> Dataset<S> {
    let mut rng = RngState::new(spec.seed);
    let c = spec.clusters;
    let d_total = spec.informative + spec.noise;
    let n = c * spec.per_cluster;

    // Cluster means: Gaussian directions scaled so the closest pair sits at
    // exactly `separation`.
    let mut means = crate::rng::gaussian_matrix::<f64>(c, spec.informative, &mut rng);
    let mut min_dist = f64::INFINITY;
    for i in 0..c {
        for j in (i + 1)..c {
            min_dist = min_dist.min(crate::matrix::sq_dist(means.row(i), means.row(j)).sqrt());
        }
    }
    if c > 1 && min_dist > 0.0 {
        means = means.scale(spec.separation / min_dist);
    }

    let noise_std = 0.1f64.sqrt();
    let mut x = Matrix::<S>::zeros(n, d_total);
    let mut labels = Vec::with_capacity(n);
    for k in 0..c {
        for s in 0..spec.per_cluster {
            let row = k * spec.per_cluster + s;
            labels.push(Some(k));
            for j in 0..spec.informative {
                x.set(row, j, S::of(means.get(k, j) + rng.normal::<f64>()));
            }
            for j in spec.informative..d_total {
                x.set(row, j, S::of(noise_std * rng.normal::<f64>()));
            }
        }
    }
    Dataset {
        x,
        labels: Some(labels),
        inlier_mask: vec![true; n],
        feature_names: None,
    }
}
