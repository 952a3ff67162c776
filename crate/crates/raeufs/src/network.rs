//! The selector + RSR autoencoder: forward pass, robust losses, hand-derived
//! gradients, and Adam.
//!
//! The network is the chain
//!
//! ```text
//! X (N x D) --W--> selected (N x p) --encoder--> latent (N x q)
//!           --rsr A--> embedded (N x d) --decoder--> reconstructed (N x D)
//! ```
//!
//! Losses use the least-absolute-deviations form: per-sample Euclidean norms,
//! smoothed as `sqrt(|r|^2 + eps)` so they are differentiable everywhere. The
//! same smoothing applies to the row norms of the l2,1 penalty.
//!
//! Gradients follow the alternating scheme: the autoencoder block sees the
//! reconstruction loss plus the pseudo-label fit term, the RSR block sees only
//! its own projection-residual and orthogonality terms, and the selector block
//! sees the reconstruction path plus the sparsity penalty.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngState;
use crate::scalar::Scalar;

/// Per-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Linear,
    LeakyRelu { slope: f64 },
}

impl Activation {
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Linear => x,
            Activation::LeakyRelu { slope } => {
                if x > S::zero() {
                    x
                } else {
                    S::of(slope) * x
                }
            }
        }
    }

    fn derivative<S: Scalar>(self, pre: S) -> S {
        match self {
            Activation::Linear => S::one(),
            Activation::LeakyRelu { slope } => {
                if pre > S::zero() {
                    S::one()
                } else {
                    S::of(slope)
                }
            }
        }
    }
}

/// Affine layer `out = act(input * weight + bias)`.
#[derive(Clone, Debug)]
pub struct DenseLayer<S> {
    /// `in_dim x out_dim`.
    pub weight: Matrix<S>,
    /// `1 x out_dim`.
    pub bias: Matrix<S>,
    pub activation: Activation,
}

/// Multi-layer perceptron; houses the encoder and decoder parameter blocks.
#[derive(Clone, Debug)]
pub struct Mlp<S> {
    pub layers: Vec<DenseLayer<S>>,
}

/// Cached intermediates of one layer, kept for backprop.
#[derive(Clone, Debug)]
struct LayerCache<S> {
    input: Matrix<S>,
    pre: Matrix<S>,
}

/// Gradient tensors, interleaved `[w0, b0, w1, b1, ...]`.
pub type TensorList<S> = Vec<Matrix<S>>;

impl<S: Scalar> Mlp<S> {
    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn params(&self) -> Vec<&Matrix<S>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix<S>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    fn forward(&self, input: &Matrix<S>) -> Result<(Matrix<S>, Vec<LayerCache<S>>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let mut pre = current.matmul(&layer.weight)?;
            for i in 0..pre.rows() {
                for (v, &b) in pre.row_mut(i).iter_mut().zip(layer.bias.row(0)) {
                    *v += b;
                }
            }
            let out = Matrix::from_fn(pre.rows(), pre.cols(), |i, j| {
                layer.activation.apply(pre.get(i, j))
            });
            caches.push(LayerCache { input: current, pre });
            current = out;
        }
        Ok((current, caches))
    }

    /// Backpropagates `upstream = dL/d(output)`; returns parameter gradients
    /// in `params()` order and the gradient with respect to the input.
    fn backward(
        &self,
        caches: &[LayerCache<S>],
        upstream: &Matrix<S>,
    ) -> Result<(TensorList<S>, Matrix<S>)> {
        let mut g_out = upstream.clone();
        let mut rev: Vec<(Matrix<S>, Matrix<S>)> = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            let g_pre = Matrix::from_fn(g_out.rows(), g_out.cols(), |i, j| {
                g_out.get(i, j) * layer.activation.derivative(cache.pre.get(i, j))
            });
            let g_w = cache.input.matmul_tn(&g_pre)?;
            let g_b = Matrix::from_vec(1, g_pre.cols(), g_pre.col_sums())?;
            g_out = g_pre.matmul_nt(&layer.weight)?;
            rev.push((g_w, g_b));
        }
        let mut grads: TensorList<S> = Vec::with_capacity(self.layers.len() * 2);
        for (g_w, g_b) in rev.into_iter().rev() {
            grads.push(g_w);
            grads.push(g_b);
        }
        Ok((grads, g_out))
    }
}

/// Full parameter set of the selector + RSR autoencoder.
#[derive(Clone, Debug)]
pub struct Network<S> {
    /// Selector `W`, `D x p`; row norms rank the original features.
    pub selector: Matrix<S>,
    /// Encoder `p -> q`.
    pub encoder: Mlp<S>,
    /// RSR layer `A`, `q x d` with `q >= d`.
    pub rsr: Matrix<S>,
    /// Decoder `d -> D`.
    pub decoder: Mlp<S>,
}

/// Architecture description used to initialize a [`Network`].
#[derive(Clone, Debug)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub selected_dim: usize,
    pub latent_dim: usize,
    pub embed_dim: usize,
    /// Encoder hidden widths; the decoder mirrors them in reverse.
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
}

impl NetworkConfig {
    /// Two affine layers each way, one hidden layer of width
    /// `max(latent_dim, 64)`, leaky-ReLU slope 0.2.
    pub fn with_defaults(
        input_dim: usize,
        selected_dim: usize,
        latent_dim: usize,
        embed_dim: usize,
    ) -> Self {
        Self {
            input_dim,
            selected_dim,
            latent_dim,
            embed_dim,
            hidden: vec![latent_dim.max(64)],
            leaky_slope: 0.2,
        }
    }
}

impl<S: Scalar> Network<S> {
    /// Validates the shape chain `D -> p -> q -> d -> D` plus `q >= d`, `p <= D`.
    pub fn new(selector: Matrix<S>, encoder: Mlp<S>, rsr: Matrix<S>, decoder: Mlp<S>) -> Result<Self> {
        let (d_in, p) = selector.shape();
        let (q, d_embed) = rsr.shape();
        if p > d_in {
            return Err(Error::BadShape {
                op: "network",
                rows: d_in,
                cols: p,
                reason: "selector needs p <= D".into(),
            });
        }
        if q < d_embed {
            return Err(Error::BadShape {
                op: "network",
                rows: q,
                cols: d_embed,
                reason: "rsr layer needs q >= d".into(),
            });
        }
        let chain_ok = encoder.in_dim() == p
            && encoder.out_dim() == q
            && decoder.in_dim() == d_embed
            && decoder.out_dim() == d_in;
        if !chain_ok {
            return Err(Error::BadShape {
                op: "network",
                rows: encoder.in_dim(),
                cols: decoder.out_dim(),
                reason: format!(
                    "shape chain broken: D={d_in} p={p} enc {}->{} rsr {q}x{d_embed} dec {}->{}",
                    encoder.in_dim(),
                    encoder.out_dim(),
                    decoder.in_dim(),
                    decoder.out_dim()
                ),
            });
        }
        Ok(Self {
            selector,
            encoder,
            rsr,
            decoder,
        })
    }

    /// Random initialization: affine weights `N(0, 1/fan_in)`, biases zero,
    /// selector `N(0, 1/D)`, RSR layer Gaussian with orthonormalized columns.
    ///
    /// Draw order is fixed (selector, encoder, decoder, rsr) so a seed pins
    /// the whole parameter set.
    pub fn init(cfg: &NetworkConfig, rng: &mut RngState) -> Result<Self> {
        let selector_std = S::of((1.0 / cfg.input_dim as f64).sqrt());
        let selector =
            crate::rng::gaussian_matrix::<S>(cfg.input_dim, cfg.selected_dim, rng).scale(selector_std);

        let mut enc_dims = vec![cfg.selected_dim];
        enc_dims.extend_from_slice(&cfg.hidden);
        enc_dims.push(cfg.latent_dim);
        let encoder = init_mlp(&enc_dims, cfg.leaky_slope, rng);

        let mut dec_dims = vec![cfg.embed_dim];
        dec_dims.extend(cfg.hidden.iter().rev());
        dec_dims.push(cfg.input_dim);
        let decoder = init_mlp(&dec_dims, cfg.leaky_slope, rng);

        let rsr_raw = crate::rng::gaussian_matrix::<S>(cfg.latent_dim, cfg.embed_dim, rng);
        let rsr = crate::svd::orthonormal_columns(&rsr_raw);

        Self::new(selector, encoder, rsr, decoder)
    }

    /// Encoder + decoder parameter tensors, in gradient order.
    pub fn autoencoder_params_mut(&mut self) -> Vec<&mut Matrix<S>> {
        let mut ps = self.encoder.params_mut();
        ps.extend(self.decoder.params_mut());
        ps
    }

    /// Every tensor (selector, encoder, rsr, decoder), for checkpointing.
    pub fn all_params(&self) -> Vec<&Matrix<S>> {
        let mut ps = vec![&self.selector];
        ps.extend(self.encoder.params());
        ps.push(&self.rsr);
        ps.extend(self.decoder.params());
        ps
    }

    pub fn all_params_mut(&mut self) -> Vec<&mut Matrix<S>> {
        let mut ps = vec![&mut self.selector];
        ps.extend(self.encoder.params_mut());
        ps.push(&mut self.rsr);
        ps.extend(self.decoder.params_mut());
        ps
    }
}

fn init_mlp<S: Scalar>(dims: &[usize], leaky_slope: f64, rng: &mut RngState) -> Mlp<S> {
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (idx, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = S::of((1.0 / fan_in as f64).sqrt());
        let weight = crate::rng::gaussian_matrix::<S>(fan_in, fan_out, rng).scale(std);
        let bias = Matrix::zeros(1, fan_out);
        let activation = if idx + 2 == dims.len() {
            Activation::Linear
        } else {
            Activation::LeakyRelu { slope: leaky_slope }
        };
        layers.push(DenseLayer {
            weight,
            bias,
            activation,
        });
    }
    Mlp { layers }
}

/// Intermediates of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    /// `X W`, `N x p`.
    pub selected: Matrix<S>,
    /// Encoder output, `N x q`.
    pub latent: Matrix<S>,
    /// RSR output, `N x d`.
    pub embedded: Matrix<S>,
    /// Decoder output, `N x D`.
    pub reconstructed: Matrix<S>,
    enc_caches: Vec<LayerCache<S>>,
    dec_caches: Vec<LayerCache<S>>,
}

/// Runs the full chain and keeps every intermediate for backprop.
pub fn forward<S: Scalar>(net: &Network<S>, x: &Matrix<S>) -> Result<ForwardCache<S>> {
    let selected = x.matmul(&net.selector)?;
    let (latent, enc_caches) = net.encoder.forward(&selected)?;
    let embedded = latent.matmul(&net.rsr)?;
    let (reconstructed, dec_caches) = net.decoder.forward(&embedded)?;
    Ok(ForwardCache {
        selected,
        latent,
        embedded,
        reconstructed,
        enc_caches,
        dec_caches,
    })
}

/// Reconstruction loss `sum_i sqrt(|x_i - xr_i|^2 + eps)`.
pub fn loss_ae<S: Scalar>(x: &Matrix<S>, reconstructed: &Matrix<S>, eps_smooth: S) -> Result<S> {
    if x.shape() != reconstructed.shape() {
        return Err(Error::DimMismatch {
            op: "loss_ae",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: reconstructed.rows(),
            right_cols: reconstructed.cols(),
        });
    }
    let mut acc = S::zero();
    for i in 0..x.rows() {
        acc += (crate::matrix::sq_dist(x.row(i), reconstructed.row(i)) + eps_smooth).sqrt();
    }
    Ok(acc)
}

/// RSR loss `lambda1 sum_i sqrt(|z_i - A A^T z_i|^2 + eps) + lambda2 |A^T A - I|_F^2`.
pub fn loss_rsr<S: Scalar>(
    latent: &Matrix<S>,
    a: &Matrix<S>,
    lambda1: S,
    lambda2: S,
    eps_smooth: S,
) -> Result<S> {
    if latent.cols() != a.rows() {
        return Err(Error::DimMismatch {
            op: "loss_rsr",
            left_rows: latent.rows(),
            left_cols: latent.cols(),
            right_rows: a.rows(),
            right_cols: a.cols(),
        });
    }
    let residual = rsr_residual(latent, a)?;
    let mut lad = S::zero();
    for i in 0..residual.rows() {
        let mut sq = S::zero();
        for &v in residual.row(i) {
            sq += v * v;
        }
        lad += (sq + eps_smooth).sqrt();
    }
    let gram_defect = a
        .matmul_tn(a)?
        .sub(&Matrix::identity(a.cols()))?
        .frobenius_norm();
    Ok(lambda1 * lad + lambda2 * gram_defect * gram_defect)
}

/// `Z - Z A A^T`.
fn rsr_residual<S: Scalar>(latent: &Matrix<S>, a: &Matrix<S>) -> Result<Matrix<S>> {
    let projected = latent.matmul(a)?.matmul_nt(a)?;
    latent.sub(&projected)
}

/// Exact l2,1 norm: sum of row Euclidean norms.
pub fn l21_norm<S: Scalar>(w: &Matrix<S>) -> S {
    (0..w.rows())
        .map(|i| w.row(i).iter().map(|&v| v * v).sum::<S>().sqrt())
        .sum()
}

/// Smoothed l2,1 norm `sum_i sqrt(|w_i|^2 + eps)`; the form that enters the
/// composite objective and the gradients.
pub fn l21_norm_smoothed<S: Scalar>(w: &Matrix<S>, eps_smooth: S) -> S {
    (0..w.rows())
        .map(|i| (w.row(i).iter().map(|&v| v * v).sum::<S>() + eps_smooth).sqrt())
        .sum()
}

/// Weights of the composite loss terms.
#[derive(Clone, Copy, Debug)]
pub struct LossWeights<S> {
    pub eta: S,
    pub alpha: S,
    pub lambda1: S,
    pub lambda2: S,
    pub eps_smooth: S,
}

/// Gradients of the three alternating blocks.
#[derive(Clone, Debug)]
pub struct NetworkGrads<S> {
    /// Encoder then decoder tensors, matching `autoencoder_params_mut` order.
    /// Gradient of `loss_ae + eta |embedded - F|_F^2`.
    pub autoencoder: TensorList<S>,
    /// Gradient of `loss_rsr` with the latent codes held fixed.
    pub rsr: Matrix<S>,
    /// Gradient of `loss_ae + alpha |W|_{2,1}` through the whole chain.
    pub selector: Matrix<S>,
}

/// Hand-derived gradients of the block objectives at the cached point.
pub fn grad_net<S: Scalar>(
    net: &Network<S>,
    cache: &ForwardCache<S>,
    x: &Matrix<S>,
    f: &Matrix<S>,
    w: &LossWeights<S>,
) -> Result<NetworkGrads<S>> {
    let n = x.rows();

    // d(loss_ae)/d(reconstructed): row i is (xr_i - x_i) / sqrt(|r_i|^2 + eps).
    let mut g_recon = Matrix::zeros(n, x.cols());
    for i in 0..n {
        let xi = x.row(i);
        let ri = cache.reconstructed.row(i);
        let sq = crate::matrix::sq_dist(xi, ri);
        let denom = (sq + w.eps_smooth).sqrt();
        if denom > S::zero() {
            let out = g_recon.row_mut(i);
            for ((o, &xv), &rv) in out.iter_mut().zip(xi).zip(ri) {
                *o = (rv - xv) / denom;
            }
        }
    }

    // Decoder block and the reconstruction pull on the embedding.
    let (dec_grads, g_embedded_ae) = net.decoder.backward(&cache.dec_caches, &g_recon)?;

    // Autoencoder block: reconstruction + pseudo-label fit term (encoder side).
    let fit_pull = cache.embedded.sub(f)?.scale(S::of(2.0) * w.eta);
    let g_embedded_theta = g_embedded_ae.add(&fit_pull)?;
    let g_latent_theta = g_embedded_theta.matmul_nt(&net.rsr)?;
    let (enc_grads, _) = net.encoder.backward(&cache.enc_caches, &g_latent_theta)?;
    let mut autoencoder = enc_grads;
    autoencoder.extend(dec_grads);

    // RSR block: latent codes fixed. For r_i = z_i - A A^T z_i,
    // d sqrt(|r_i|^2 + eps) / dA = -(r_i z_i^T + z_i r_i^T) A / v_i,
    // and d |A^T A - I|_F^2 / dA = 4 A (A^T A - I).
    let residual = rsr_residual(&cache.latent, &net.rsr)?;
    let mut scaled_residual = residual.clone();
    for i in 0..n {
        let sq: S = residual.row(i).iter().map(|&v| v * v).sum();
        let denom = (sq + w.eps_smooth).sqrt();
        let row = scaled_residual.row_mut(i);
        if denom > S::zero() {
            for v in row.iter_mut() {
                *v /= denom;
            }
        } else {
            for v in row.iter_mut() {
                *v = S::zero();
            }
        }
    }
    let cross = scaled_residual
        .matmul_tn(&cache.latent)?
        .add(&cache.latent.matmul_tn(&scaled_residual)?)?;
    let lad_grad = cross.matmul(&net.rsr)?.scale(-w.lambda1);
    let gram = net.rsr.matmul_tn(&net.rsr)?.sub(&Matrix::identity(net.rsr.cols()))?;
    let gram_grad = net.rsr.matmul(&gram)?.scale(S::of(4.0) * w.lambda2);
    let rsr = lad_grad.add(&gram_grad)?;

    // Selector block: reconstruction path only (no fit term), plus the
    // smoothed l2,1 subgradient.
    let g_latent_w = g_embedded_ae.matmul_nt(&net.rsr)?;
    let (_, g_selected) = net.encoder.backward(&cache.enc_caches, &g_latent_w)?;
    let mut selector = x.matmul_tn(&g_selected)?;
    for i in 0..selector.rows() {
        let wi = net.selector.row(i);
        let sq: S = wi.iter().map(|&v| v * v).sum();
        let denom = (sq + w.eps_smooth).sqrt();
        if denom > S::zero() {
            let row = selector.row_mut(i);
            for (g, &wv) in row.iter_mut().zip(wi) {
                *g += w.alpha * wv / denom;
            }
        }
    }

    Ok(NetworkGrads {
        autoencoder,
        rsr,
        selector,
    })
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter block (a list of tensors).
#[derive(Clone, Debug)]
pub struct AdamState<S> {
    cfg: AdamConfig,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(cfg: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        Self {
            cfg,
            m: shapes.iter().map(|&(r, c)| vec![S::zero(); r * c]).collect(),
            v: shapes.iter().map(|&(r, c)| vec![S::zero(); r * c]).collect(),
            step: 0,
        }
    }

    pub fn for_tensors(cfg: AdamConfig, tensors: &[&Matrix<S>]) -> Self {
        let shapes: Vec<(usize, usize)> = tensors.iter().map(|t| t.shape()).collect();
        Self::new(cfg, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over the block.
    pub fn step(&mut self, params: &mut [&mut Matrix<S>], grads: &[&Matrix<S>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::invalid_arg(
                "params",
                format!(
                    "block has {} tensors, got {} params / {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        self.step += 1;
        let b1 = S::of(self.cfg.beta1);
        let b2 = S::of(self.cfg.beta2);
        let lr = S::of(self.cfg.learning_rate);
        let eps = S::of(self.cfg.epsilon);
        let corr1 = S::one() - b1.powi(self.step as i32);
        let corr2 = S::one() - b2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            debug_assert_eq!(param.shape(), grad.shape());
            for ((p, &g), (mi, vi)) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = b1 * *mi + (S::one() - b1) * g;
                *vi = b2 * *vi + (S::one() - b2) * g * g;
                let m_hat = *mi / corr1;
                let v_hat = *vi / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
