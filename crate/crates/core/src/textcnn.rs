//! Multi-window convolutional title classifier.
//!
//! Titles arrive as n x d embedding matrices, zero-padded to a common length.
//! For each filter width w in 1..=w_max: conv1d -> batch norm -> ReLU ->
//! max-over-time, giving `channels` values per width. The concatenation feeds
//! a hidden dense layer (batch norm, ReLU), whose activations double as the
//! extracted text features, then dropout and a sigmoid output layer.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::checkpoint::{self, TensorMap};
use crate::nn::layers::BatchNormCache;
use crate::nn::{
    bce_backward, bce_loss, conv1d_backward, conv1d_forward, dense_backward, dense_forward,
    dropout, dropout_backward, init, max_over_time_backward, max_over_time_forward, relu_backward,
    relu_forward, sigmoid_backward, sigmoid_forward, Adam, BatchNorm, Mode, Tensor,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TextCnnConfig {
    /// Filter widths run 1..=w_max.
    pub w_max: usize,
    /// Feature maps per filter width.
    pub channels: usize,
    /// Hidden layer width; also the extracted feature dimension.
    pub hidden: usize,
    /// Common padded title length. Must be >= w_max.
    pub n_max: usize,
    pub embed_dim: usize,
    pub num_labels: usize,
    pub dropout_rate: f64,
}

impl TextCnnConfig {
    /// Paper-scale defaults: widths 1..=8, 512 channels, 4096 hidden units,
    /// dropout 0.5.
    pub fn with_defaults(embed_dim: usize, num_labels: usize) -> Self {
        TextCnnConfig {
            w_max: 8,
            channels: 512,
            hidden: 4096,
            n_max: 30,
            embed_dim,
            num_labels,
            dropout_rate: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.w_max == 0 || self.channels == 0 || self.hidden == 0 || self.num_labels == 0 {
            return Err(Error::invalid("textcnn config: zero-sized component"));
        }
        if self.n_max < self.w_max {
            return Err(Error::invalid(format!(
                "textcnn config: n_max {} < w_max {}",
                self.n_max, self.w_max
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("textcnn config: dropout rate outside [0,1)"));
        }
        Ok(())
    }

    pub fn concat_dim(&self) -> usize {
        self.w_max * self.channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextCnnParams {
    pub config: TextCnnConfig,
    /// Per width w (index w-1): filters [w, d, channels].
    pub conv_filters: Vec<Tensor>,
    pub conv_bias: Vec<Tensor>,
    pub conv_bn: Vec<BatchNorm>,
    pub hidden_w: Tensor,
    pub hidden_b: Tensor,
    pub hidden_bn: BatchNorm,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl TextCnnParams {
    pub fn init(config: TextCnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = init::seeded_rng(seed);
        let mut conv_filters = Vec::with_capacity(config.w_max);
        let mut conv_bias = Vec::with_capacity(config.w_max);
        let mut conv_bn = Vec::with_capacity(config.w_max);
        for w in 1..=config.w_max {
            conv_filters.push(init::kaiming(
                &[w, config.embed_dim, config.channels],
                w * config.embed_dim,
                &mut rng,
            ));
            conv_bias.push(Tensor::zeros(&[config.channels]));
            conv_bn.push(BatchNorm::new(config.channels));
        }
        let hidden_w = init::kaiming(
            &[config.concat_dim(), config.hidden],
            config.concat_dim(),
            &mut rng,
        );
        let hidden_b = Tensor::zeros(&[config.hidden]);
        let hidden_bn = BatchNorm::new(config.hidden);
        let out_w = init::xavier(
            &[config.hidden, config.num_labels],
            config.hidden,
            config.num_labels,
            &mut rng,
        );
        let out_b = Tensor::zeros(&[config.num_labels]);
        Ok(TextCnnParams {
            config,
            conv_filters,
            conv_bias,
            conv_bn,
            hidden_w,
            hidden_b,
            hidden_bn,
            out_w,
            out_b,
        })
    }
}

/// Zero-pads a batch of title embedding matrices (each n_i x d) to a common
/// `[B, n_max, d]` tensor. Returns the original lengths alongside.
pub fn pad_batch(titles: &[Tensor], n_max: usize, embed_dim: usize) -> Result<(Tensor, Vec<usize>)> {
    let b = titles.len();
    let mut data = vec![0.0; b * n_max * embed_dim];
    let mut lengths = Vec::with_capacity(b);
    for (i, t) in titles.iter().enumerate() {
        if t.rank() != 2 || t.shape()[1] != embed_dim {
            return Err(Error::shape(format!(
                "pad_batch: title {i} has shape {:?}, expected [*,{embed_dim}]",
                t.shape()
            )));
        }
        let n = t.shape()[0];
        if n > n_max {
            return Err(Error::invalid(format!(
                "pad_batch: title {i} has {n} tokens, n_max = {n_max}"
            )));
        }
        lengths.push(n);
        let dst = &mut data[i * n_max * embed_dim..i * n_max * embed_dim + n * embed_dim];
        dst.copy_from_slice(t.data());
    }
    Ok((Tensor::from_vec(&[b, n_max, embed_dim], data), lengths))
}

struct WidthCache {
    bn_out: Tensor,
    bn_cache: Option<BatchNormCache>,
    relu_out_shape: Vec<usize>,
    argmax: Vec<usize>,
}

struct ForwardCache {
    widths: Vec<WidthCache>,
    concat: Tensor,
    hidden_bn_out: Tensor,
    hidden_bn_cache: Option<BatchNormCache>,
    dropout_mask: Tensor,
    dropped: Tensor,
    scores: Tensor,
}

fn forward_impl(
    params: &mut TextCnnParams,
    batch: &Tensor,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(Tensor, Tensor, ForwardCache)> {
    let cfg = params.config.clone();
    if batch.rank() != 3 || batch.shape()[2] != cfg.embed_dim {
        return Err(Error::shape(format!(
            "textcnn batch: expected [B,n,{}], got {:?}",
            cfg.embed_dim,
            batch.shape()
        )));
    }
    let b = batch.shape()[0];
    let n = batch.shape()[1];
    if n < cfg.w_max {
        return Err(Error::shape(format!(
            "textcnn batch length {n} shorter than widest filter {}",
            cfg.w_max
        )));
    }

    let mut widths = Vec::with_capacity(cfg.w_max);
    let mut concat = vec![0.0; b * cfg.concat_dim()];
    for wi in 0..cfg.w_max {
        let conv_out = conv1d_forward(batch, &params.conv_filters[wi], Some(&params.conv_bias[wi]))?;
        let t_out = conv_out.shape()[1];
        // batch norm runs per channel over (batch, time)
        let flat = conv_out.reshape(&[b * t_out, cfg.channels])?;
        let (bn_flat, bn_cache) = params.conv_bn[wi].forward(&flat, mode)?;
        let relu_out = relu_forward(&bn_flat);
        let pooled_in = relu_out.reshape(&[b, t_out, cfg.channels])?;
        let (pooled, argmax) = max_over_time_forward(&pooled_in)?;
        for bi in 0..b {
            let dst =
                &mut concat[bi * cfg.concat_dim() + wi * cfg.channels..bi * cfg.concat_dim() + (wi + 1) * cfg.channels];
            dst.copy_from_slice(pooled.row(bi));
        }
        widths.push(WidthCache {
            bn_out: bn_flat,
            bn_cache,
            relu_out_shape: vec![b, t_out, cfg.channels],
            argmax,
        });
    }
    let concat = Tensor::from_vec(&[b, cfg.concat_dim()], concat);

    let hidden_z = dense_forward(&concat, &params.hidden_w, &params.hidden_b)?;
    let (hidden_bn_out, hidden_bn_cache) = params.hidden_bn.forward(&hidden_z, mode)?;
    drop(hidden_z);
    let features = relu_forward(&hidden_bn_out);
    let (dropped, dropout_mask) = dropout(&features, cfg.dropout_rate, dropout_seed, mode)?;
    let out_z = dense_forward(&dropped, &params.out_w, &params.out_b)?;
    let scores = sigmoid_forward(&out_z);

    let cache = ForwardCache {
        widths,
        concat,
        hidden_bn_out,
        hidden_bn_cache,
        dropout_mask,
        dropped,
        scores: scores.clone(),
    };
    Ok((scores, features, cache))
}

/// Forward pass returning (scores `[B,L]`, features `[B,hidden]`).
/// Features are the post-ReLU, pre-dropout hidden activations.
pub fn textcnn_forward(
    params: &mut TextCnnParams,
    batch: &Tensor,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(Tensor, Tensor)> {
    let (scores, features, _) = forward_impl(params, batch, mode, dropout_seed)?;
    Ok((scores, features))
}

/// Infer-mode feature head only.
pub fn textcnn_extract_features(params: &TextCnnParams, batch: &Tensor) -> Result<Tensor> {
    // infer mode never mutates; clone the running-stat holders cheaply
    let mut p = params.clone();
    let (_, features, _) = forward_impl(&mut p, batch, Mode::Infer, 0)?;
    Ok(features)
}

/// All trainable tensors in a fixed order, paired by `grads_of_cache`.
fn param_refs(params: &mut TextCnnParams) -> Vec<&mut Tensor> {
    let mut refs: Vec<&mut Tensor> = Vec::new();
    for f in params.conv_filters.iter_mut() {
        refs.push(f);
    }
    for bias in params.conv_bias.iter_mut() {
        refs.push(bias);
    }
    for bn in params.conv_bn.iter_mut() {
        refs.push(&mut bn.gamma);
        refs.push(&mut bn.beta);
    }
    refs.push(&mut params.hidden_w);
    refs.push(&mut params.hidden_b);
    refs.push(&mut params.hidden_bn.gamma);
    refs.push(&mut params.hidden_bn.beta);
    refs.push(&mut params.out_w);
    refs.push(&mut params.out_b);
    refs
}

fn backward_impl(
    params: &TextCnnParams,
    batch: &Tensor,
    cache: &ForwardCache,
    targets: &Tensor,
) -> Result<Vec<Tensor>> {
    let cfg = &params.config;
    let b = batch.shape()[0];

    let dp = bce_backward(&cache.scores, targets)?;
    let dz_out = sigmoid_backward(&cache.scores, &dp)?;
    let (d_dropped, d_out_w, d_out_b) = dense_backward(&cache.dropped, &params.out_w, &dz_out)?;
    let d_features = dropout_backward(&cache.dropout_mask, &d_dropped)?;
    let d_hidden_bn_out = relu_backward(&cache.hidden_bn_out, &d_features)?;
    let (d_hidden_z, d_hbn_gamma, d_hbn_beta) = match &cache.hidden_bn_cache {
        Some(c) => params.hidden_bn.backward(c, &d_hidden_bn_out)?,
        None => {
            return Err(Error::invalid(
                "textcnn backward requires a train-mode forward cache",
            ))
        }
    };
    let (d_concat, d_hidden_w, d_hidden_b) =
        dense_backward(&cache.concat, &params.hidden_w, &d_hidden_z)?;

    let mut d_filters = Vec::with_capacity(cfg.w_max);
    let mut d_biases = Vec::with_capacity(cfg.w_max);
    let mut d_bn_gammas = Vec::with_capacity(cfg.w_max);
    let mut d_bn_betas = Vec::with_capacity(cfg.w_max);
    for (wi, wc) in cache.widths.iter().enumerate() {
        // slice this width's columns out of the concat gradient
        let mut d_pooled = vec![0.0; b * cfg.channels];
        for bi in 0..b {
            let src = &d_concat.row(bi)[wi * cfg.channels..(wi + 1) * cfg.channels];
            d_pooled[bi * cfg.channels..(bi + 1) * cfg.channels].copy_from_slice(src);
        }
        let d_pooled = Tensor::from_vec(&[b, cfg.channels], d_pooled);
        let d_relu_out = max_over_time_backward(&wc.relu_out_shape, &wc.argmax, &d_pooled)?;
        let t_out = wc.relu_out_shape[1];
        let d_relu_flat = d_relu_out.reshape(&[b * t_out, cfg.channels])?;
        let d_bn_out = relu_backward(&wc.bn_out, &d_relu_flat)?;
        let (d_conv_flat, d_gamma, d_beta) = match &wc.bn_cache {
            Some(c) => params.conv_bn[wi].backward(c, &d_bn_out)?,
            None => {
                return Err(Error::invalid(
                    "textcnn backward requires a train-mode forward cache",
                ))
            }
        };
        let d_conv = d_conv_flat.reshape(&[b, t_out, cfg.channels])?;
        // dx is discarded: title embeddings are frozen
        let (_, d_f, d_b) = conv1d_backward(batch, &params.conv_filters[wi], &d_conv)?;
        d_filters.push(d_f);
        d_biases.push(d_b);
        d_bn_gammas.push(d_gamma);
        d_bn_betas.push(d_beta);
    }

    // order must mirror param_refs
    let mut grads = Vec::new();
    grads.extend(d_filters);
    grads.extend(d_biases);
    for (g, bta) in d_bn_gammas.into_iter().zip(d_bn_betas.into_iter()) {
        grads.push(g);
        grads.push(bta);
    }
    grads.push(d_hidden_w);
    grads.push(d_hidden_b);
    grads.push(d_hbn_gamma);
    grads.push(d_hbn_beta);
    grads.push(d_out_w);
    grads.push(d_out_b);
    Ok(grads)
}

/// Train-mode loss at the given params; used by gradient checks. Works on a
/// clone so running statistics are untouched.
pub fn loss_of(
    params: &TextCnnParams,
    batch: &Tensor,
    targets: &Tensor,
    dropout_seed: u64,
) -> Result<f64> {
    let mut p = params.clone();
    let (scores, _, _) = forward_impl(&mut p, batch, Mode::Train, dropout_seed)?;
    bce_loss(&scores, targets)
}

/// Train-mode loss plus analytic gradients for every trainable tensor, in the
/// same order as the flattened parameter list (conv filters, conv biases,
/// conv BN gamma/beta pairs, hidden w/b, hidden BN gamma/beta, out w/b).
pub fn loss_and_param_grads(
    params: &TextCnnParams,
    batch: &Tensor,
    targets: &Tensor,
    dropout_seed: u64,
) -> Result<(f64, Vec<Tensor>)> {
    let mut p = params.clone();
    let (scores, _, cache) = forward_impl(&mut p, batch, Mode::Train, dropout_seed)?;
    let loss = bce_loss(&scores, targets)?;
    let grads = backward_impl(params, batch, &cache, targets)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone)]
pub struct TextCnnHyper {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for TextCnnHyper {
    fn default() -> Self {
        // paper budget: 5 epochs, batch 512, l2 decay 1e-7
        TextCnnHyper {
            epochs: 5,
            batch: 512,
            lr: 0.001,
            seed: 0,
            weight_decay: 1e-7,
        }
    }
}

/// Trains on pre-embedded titles (one n_i x d matrix per record). Batches are
/// seeded shuffles; singleton trailing batches are skipped because batch norm
/// needs at least two rows. Returns the params and per-epoch mean losses.
pub fn textcnn_train(
    config: TextCnnConfig,
    titles: &[Tensor],
    labels: &Tensor,
    hyper: &TextCnnHyper,
) -> Result<(TextCnnParams, Vec<f64>)> {
    if titles.is_empty() {
        return Err(Error::invalid("textcnn_train: empty training set"));
    }
    if labels.rank() != 2 || labels.shape()[0] != titles.len() {
        return Err(Error::shape(format!(
            "textcnn_train: {} titles vs labels {:?}",
            titles.len(),
            labels.shape()
        )));
    }
    let mut params = TextCnnParams::init(config, derive_seed(hyper.seed, "textcnn-init"))?;
    let refs = param_refs(&mut params);
    let shapes: Vec<&Tensor> = refs.iter().map(|t| &**t).collect();
    let mut opt = Adam::new(hyper.lr, hyper.weight_decay, &shapes);
    drop(refs);

    let n = titles.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = init::seeded_rng(derive_seed(hyper.seed, "textcnn-shuffle"));
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (bi, chunk) in order.chunks(hyper.batch.max(2)) .enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let title_refs: Vec<Tensor> = chunk.iter().map(|&i| titles[i].clone()).collect();
            let (batch, _) = pad_batch(&title_refs, params.config.n_max, params.config.embed_dim)?;
            let mut target = Vec::with_capacity(chunk.len() * labels.shape()[1]);
            for &i in chunk {
                target.extend_from_slice(labels.row(i));
            }
            let target = Tensor::from_vec(&[chunk.len(), labels.shape()[1]], target);
            let drop_seed = derive_seed(hyper.seed, &format!("textcnn-drop-{epoch}-{bi}"));
            let (_, _, cache) = forward_impl(&mut params, &batch, Mode::Train, drop_seed)?;
            let loss = bce_loss(&cache.scores, &target)?;
            let grads = backward_impl(&params, &batch, &cache, &target)?;
            let grad_refs: Vec<&Tensor> = grads.iter().collect();
            let mut refs = param_refs(&mut params);
            opt.step(&mut refs, &grad_refs)?;
            epoch_loss += loss;
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::invalid(
                "textcnn_train: no trainable batch of size >= 2",
            ));
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    Ok((params, epoch_losses))
}

// ---------------------------------------------------------------------------
// checkpoint
// ---------------------------------------------------------------------------

pub fn save_textcnn(params: &TextCnnParams, path: &Path) -> Result<()> {
    let cfg = &params.config;
    let config_tensor = Tensor::from_vec(&[2], vec![cfg.n_max as f64, cfg.dropout_rate]);
    let mut named: Vec<(String, &Tensor)> = vec![("config".to_string(), &config_tensor)];
    for (wi, f) in params.conv_filters.iter().enumerate() {
        named.push((format!("conv{}.filters", wi + 1), f));
    }
    for (wi, b) in params.conv_bias.iter().enumerate() {
        named.push((format!("conv{}.bias", wi + 1), b));
    }
    for (wi, bn) in params.conv_bn.iter().enumerate() {
        named.push((format!("conv{}.bn.gamma", wi + 1), &bn.gamma));
        named.push((format!("conv{}.bn.beta", wi + 1), &bn.beta));
        named.push((format!("conv{}.bn.running_mean", wi + 1), &bn.running_mean));
        named.push((format!("conv{}.bn.running_var", wi + 1), &bn.running_var));
    }
    named.push(("hidden.w".to_string(), &params.hidden_w));
    named.push(("hidden.b".to_string(), &params.hidden_b));
    named.push(("hidden.bn.gamma".to_string(), &params.hidden_bn.gamma));
    named.push(("hidden.bn.beta".to_string(), &params.hidden_bn.beta));
    named.push((
        "hidden.bn.running_mean".to_string(),
        &params.hidden_bn.running_mean,
    ));
    named.push((
        "hidden.bn.running_var".to_string(),
        &params.hidden_bn.running_var,
    ));
    named.push(("out.w".to_string(), &params.out_w));
    named.push(("out.b".to_string(), &params.out_b));
    let refs: Vec<(&str, &Tensor)> = named.iter().map(|(n, t)| (n.as_str(), *t)).collect();
    checkpoint::save_tensors(path, &refs)
}

pub fn load_textcnn(path: &Path) -> Result<TextCnnParams> {
    let mut map = TensorMap::load(path)?;
    let config_tensor = map.take("config")?;
    if config_tensor.numel() != 2 {
        return Err(Error::malformed(path, 0, "bad config tensor"));
    }
    let n_max = config_tensor.data()[0] as usize;
    let dropout_rate = config_tensor.data()[1];

    let mut conv_filters = Vec::new();
    let mut conv_bias = Vec::new();
    let mut conv_bn = Vec::new();
    let mut w = 1usize;
    while let Ok(f) = map.take(&format!("conv{w}.filters")) {
        let channels = f.shape()[2];
        let mut bn = BatchNorm::new(channels);
        bn.gamma = map.take(&format!("conv{w}.bn.gamma"))?;
        bn.beta = map.take(&format!("conv{w}.bn.beta"))?;
        bn.running_mean = map.take(&format!("conv{w}.bn.running_mean"))?;
        bn.running_var = map.take(&format!("conv{w}.bn.running_var"))?;
        conv_bias.push(map.take(&format!("conv{w}.bias"))?);
        conv_bn.push(bn);
        conv_filters.push(f);
        w += 1;
    }
    if conv_filters.is_empty() {
        return Err(Error::malformed(path, 0, "no conv layers in checkpoint"));
    }
    let hidden_w = map.take("hidden.w")?;
    let hidden_b = map.take("hidden.b")?;
    let hidden = hidden_w.shape()[1];
    let mut hidden_bn = BatchNorm::new(hidden);
    hidden_bn.gamma = map.take("hidden.bn.gamma")?;
    hidden_bn.beta = map.take("hidden.bn.beta")?;
    hidden_bn.running_mean = map.take("hidden.bn.running_mean")?;
    hidden_bn.running_var = map.take("hidden.bn.running_var")?;
    let out_w = map.take("out.w")?;
    let out_b = map.take("out.b")?;

    let config = TextCnnConfig {
        w_max: conv_filters.len(),
        channels: conv_filters[0].shape()[2],
        hidden,
        n_max,
        embed_dim: conv_filters[0].shape()[1],
        num_labels: out_w.shape()[1],
        dropout_rate,
    };
    config.validate().map_err(|e| {
        Error::malformed(path, 0, format!("inconsistent checkpoint config: {e}"))
    })?;
    Ok(TextCnnParams {
        config,
        conv_filters,
        conv_bias,
        conv_bn,
        hidden_w,
        hidden_b,
        hidden_bn,
        out_w,
        out_b,
    })
}
