//! Forward and reverse passes of the fused network:
//!
//! ```text
//! x ─ conv─relu─pool ─ conv─relu─pool ─ flatten ─ e
//! e ─ branch_k: dense─relu ─ f_k(e)                       k = 0..K
//! e ─ dense─relu─dense ─ domain logits ─ softmax ─ w       (fusion weights)
//! z = Σ_k w_k f_k(e) ─ dense ─ softmax ─ class probabilities
//! ```

use ndarray::{s, Array2, Array3, Array4, ArrayView2, ArrayView3, Axis};

use super::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, maxpool_backward, maxpool_forward, relu_backward,
    relu_forward, softmax, softmax_backward,
};
use super::ModelParams;
use crate::data::SensorWindow;
use crate::error::{Error, Result};

/// Lower bound of every fusion weight.
pub const WEIGHT_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Keep the caches needed by [`backward`].
    Train,
    Infer,
}

/// Where the fusion weights come from.
#[derive(Debug, Clone, Copy)]
pub enum Fusion<'a> {
    /// The domain classifier's softmax output.
    Predicted,
    /// Externally supplied `N × K` weights (e.g. one-hot true domains). No
    /// gradient flows from the fusion into the domain classifier.
    Fixed(ArrayView2<'a, f64>),
}

#[derive(Debug, Clone)]
struct Cache {
    input: Array4<f64>,
    conv1_pre: Array4<f64>,
    pool1_idx: Vec<usize>,
    pool1: Array4<f64>,
    conv2_pre: Array4<f64>,
    pool2_idx: Vec<usize>,
    pool2_dim: (usize, usize, usize, usize),
    branch_pre: Vec<Array2<f64>>,
    domain_hidden_pre: Array2<f64>,
}

/// Everything computed by [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub mode: Mode,
    /// Shared feature `e`, `N × feature_len`.
    pub features: Array2<f64>,
    /// `f_k(e)` for every branch, each `N × branch_width`.
    pub branch_features: Vec<Array2<f64>>,
    pub domain_logits: Array2<f64>,
    /// Plain softmax of the domain logits.
    pub domain_probs: Array2<f64>,
    /// Fusion weights actually used, `N × K`.
    pub weights: Array2<f64>,
    pub weights_fixed: bool,
    pub fused: Array2<f64>,
    pub class_logits: Array2<f64>,
    pub probs: Array2<f64>,
    cache: Option<Cache>,
}

/// Gradients of the loss with respect to intermediate outputs.
#[derive(Debug, Clone, Default)]
pub struct Upstream {
    /// `∂L/∂ class probabilities`, `N × C`.
    pub probs: Option<Array2<f64>>,
    /// `∂L/∂ domain logits`, `N × K`.
    pub domain_logits: Option<Array2<f64>>,
    /// `∂L/∂ f_k(e)` per branch, each `N × branch_width`.
    pub branch_features: Option<Vec<Array2<f64>>>,
}

/// Stacks windows into an `N × channels × timesteps` batch.
pub fn stack_windows<'a, I>(windows: I) -> Result<Array3<f64>>
where
    I: IntoIterator<Item = &'a SensorWindow>,
{
    let windows: Vec<&SensorWindow> = windows.into_iter().collect();
    let first = windows
        .first()
        .ok_or_else(|| Error::shape("stack_windows", "empty batch"))?;
    let (c, t) = (first.channels(), first.timesteps());
    let mut out = Array3::zeros((windows.len(), c, t));
    for (i, w) in windows.iter().enumerate() {
        if w.values.dim() != (c, t) {
            return Err(Error::shape("stack_windows", format!("window {i} has shape {:?}", w.values.dim())));
        }
        out.index_axis_mut(Axis(0), i).assign(&w.values);
    }
    Ok(out)
}

fn check_input(x: &ArrayView3<f64>, params: &ModelParams) -> Result<()> {
    let c = &params.config;
    let (_, ch, t) = x.dim();
    if ch != c.channels || t != c.timesteps || x.is_empty() {
        return Err(Error::shape(
            "input",
            format!("batch {:?} does not match model ({}, {})", x.dim(), c.channels, c.timesteps),
        ));
    }
    Ok(())
}

fn extract_cached(x: &ArrayView3<f64>, params: &ModelParams) -> Result<(Array2<f64>, Cache)> {
    check_input(x, params)?;
    let (n, ch, t) = x.dim();
    let input = x.to_owned().into_shape_with_order((n, 1, ch, t)).expect("contiguous copy");
    let conv1_pre = conv_forward(&input, &params.conv1_w, &params.conv1_b)?;
    let (pool1, pool1_idx) = maxpool_forward(&relu_forward(&conv1_pre), params.config.pool)?;
    let conv2_pre = conv_forward(&pool1, &params.conv2_w, &params.conv2_b)?;
    let (pool2, pool2_idx) = maxpool_forward(&relu_forward(&conv2_pre), params.config.pool)?;
    let pool2_dim = pool2.dim();
    let features = pool2
        .into_shape_with_order((n, pool2_dim.1 * pool2_dim.2 * pool2_dim.3))
        .expect("standard layout");
    Ok((
        features,
        Cache {
            input,
            conv1_pre,
            pool1_idx,
            pool1,
            conv2_pre,
            pool2_idx,
            pool2_dim,
            branch_pre: Vec::new(),
            domain_hidden_pre: Array2::zeros((0, 0)),
        },
    ))
}

/// Shared convolutional feature `e = f_e(x)` for an `N × channels × T` batch.
pub fn extract(x: &ArrayView3<f64>, params: &ModelParams) -> Result<Array2<f64>> {
    Ok(extract_cached(x, params)?.0)
}

/// Output of branch `k`: `relu(e · W_k + b_k)`.
pub fn branch(e: &ArrayView2<f64>, k: usize, params: &ModelParams) -> Result<Array2<f64>> {
    let (w, b) = params
        .branch_w
        .get(k)
        .zip(params.branch_b.get(k))
        .ok_or_else(|| Error::InvalidArgument(format!("branch {k} out of range for {} domains", params.branch_w.len())))?;
    Ok(relu_forward(&dense_forward(e, w, b)?))
}

/// Maps a softmax output onto the simplex with every weight at least
/// [`WEIGHT_FLOOR`]: `w = ε + (1 − Kε)·p`.
fn floor_weights(p: &Array2<f64>) -> Array2<f64> {
    let k = p.ncols() as f64;
    p.mapv(|v| WEIGHT_FLOOR + (1.0 - k * WEIGHT_FLOOR) * v)
}

fn domain_head(e: &ArrayView2<f64>, params: &ModelParams) -> Result<(Array2<f64>, Array2<f64>)> {
    let pre = dense_forward(e, &params.domain_w1, &params.domain_b1)?;
    let logits = dense_forward(&relu_forward(&pre).view(), &params.domain_w2, &params.domain_b2)?;
    Ok((pre, logits))
}

/// Domain logits and fusion weights for shared features `e`.
pub fn domain_weights(e: &ArrayView2<f64>, params: &ModelParams) -> Result<(Array2<f64>, Array2<f64>)> {
    let (_, logits) = domain_head(e, params)?;
    let w = floor_weights(&softmax(&logits.view()));
    Ok((logits, w))
}

/// `z = Σ_k w_k f_k`, row by row.
pub fn fuse(branch_features: &[Array2<f64>], weights: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let first = branch_features
        .first()
        .ok_or_else(|| Error::shape("fuse", "no branch features"))?;
    if weights.ncols() != branch_features.len() || weights.nrows() != first.nrows() {
        return Err(Error::shape(
            "fuse",
            format!("weights {:?} for {} branches of {} rows", weights.dim(), branch_features.len(), first.nrows()),
        ));
    }
    let mut z = Array2::zeros(first.raw_dim());
    for (k, f) in branch_features.iter().enumerate() {
        if f.dim() != first.dim() {
            return Err(Error::shape("fuse", "branch features disagree in shape"));
        }
        z += &(f * &weights.column(k).insert_axis(Axis(1)));
    }
    Ok(z)
}

/// Full forward pass. Train and infer modes compute identical outputs; only
/// train mode keeps the caches needed by [`backward`].
pub fn forward(x: &ArrayView3<f64>, params: &ModelParams, mode: Mode, fusion: Fusion<'_>) -> Result<ForwardTrace> {
    if !params.is_finite() {
        return Err(Error::InvalidArgument("parameters contain non-finite values".into()));
    }
    let (features, mut cache) = extract_cached(x, params)?;
    let k = params.config.num_domains;
    let e = features.view();
    let mut branch_pre = Vec::with_capacity(k);
    let mut branch_features = Vec::with_capacity(k);
    for (w, b) in params.branch_w.iter().zip(&params.branch_b) {
        let pre = dense_forward(&e, w, b)?;
        branch_features.push(relu_forward(&pre));
        branch_pre.push(pre);
    }
    let (hidden_pre, domain_logits) = domain_head(&e, params)?;
    let domain_probs = softmax(&domain_logits.view());
    let (weights, weights_fixed) = match fusion {
        Fusion::Predicted => (floor_weights(&domain_probs), false),
        Fusion::Fixed(w) => {
            if w.dim() != (features.nrows(), k) {
                return Err(Error::shape("fuse", format!("fixed weights {:?}", w.dim())));
            }
            (w.to_owned(), true)
        }
    };
    let fused = fuse(&branch_features, &weights.view())?;
    let class_logits = dense_forward(&fused.view(), &params.class_w, &params.class_b)?;
    let probs = softmax(&class_logits.view());
    cache.branch_pre = branch_pre;
    cache.domain_hidden_pre = hidden_pre;
    Ok(ForwardTrace {
        mode,
        features,
        branch_features,
        domain_logits,
        domain_probs,
        weights,
        weights_fixed,
        fused,
        class_logits,
        probs,
        cache: (mode == Mode::Train).then_some(cache),
    })
}

fn check_grad(name: &'static str, g: &Array2<f64>, expected: (usize, usize)) -> Result<()> {
    if g.dim() != expected {
        return Err(Error::shape(name, format!("upstream gradient {:?}, expected {:?}", g.dim(), expected)));
    }
    Ok(())
}

/// Reverse pass: gradients of the loss with respect to every parameter,
/// given the loss gradients with respect to the trace outputs.
pub fn backward(params: &ModelParams, trace: &ForwardTrace, upstream: &Upstream) -> Result<ModelParams> {
    let cache = trace
        .cache
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("backward needs a trace recorded in train mode".into()))?;
    let cfg = &params.config;
    let n = trace.probs.nrows();
    let k = cfg.num_domains;
    let mut grads = params.zeros_like();

    // activity classifier
    let mut d_fused = Array2::zeros(trace.fused.raw_dim());
    if let Some(dp) = &upstream.probs {
        check_grad("classifier", dp, trace.probs.dim())?;
        let d_logits = softmax_backward(&trace.probs, dp);
        let (dz, dw, db) = dense_backward(&trace.fused.view(), &params.class_w, &d_logits.view());
        d_fused = dz;
        grads.class_w = dw;
        grads.class_b = db;
    }

    // fusion
    let mut d_branch: Vec<Array2<f64>> = trace
        .weights
        .columns()
        .into_iter()
        .map(|w| &d_fused * &w.insert_axis(Axis(1)))
        .collect();
    if let Some(extra) = &upstream.branch_features {
        if extra.len() != k {
            return Err(Error::shape("branch", format!("{} branch gradients for {k} branches", extra.len())));
        }
        for (d, e) in d_branch.iter_mut().zip(extra) {
            check_grad("branch", e, d.dim())?;
            *d += e;
        }
    }
    let mut d_domain_logits = Array2::zeros((n, k));
    if !trace.weights_fixed {
        let mut d_w = Array2::zeros((n, k));
        for (j, f) in trace.branch_features.iter().enumerate() {
            d_w.column_mut(j).assign(&(&d_fused * f).sum_axis(Axis(1)));
        }
        d_w *= 1.0 - k as f64 * WEIGHT_FLOOR;
        d_domain_logits = softmax_backward(&trace.domain_probs, &d_w);
    }
    if let Some(dl) = &upstream.domain_logits {
        check_grad("domain classifier", dl, (n, k))?;
        d_domain_logits += dl;
    }

    // domain classifier
    let hidden = relu_forward(&cache.domain_hidden_pre);
    let (d_hidden, dw2, db2) = dense_backward(&hidden.view(), &params.domain_w2, &d_domain_logits.view());
    grads.domain_w2 = dw2;
    grads.domain_b2 = db2;
    let d_hidden_pre = relu_backward(&d_hidden, &cache.domain_hidden_pre);
    let e = trace.features.view();
    let (mut d_e, dw1, db1) = dense_backward(&e, &params.domain_w1, &d_hidden_pre.view());
    grads.domain_w1 = dw1;
    grads.domain_b1 = db1;

    // branches
    for j in 0..k {
        let d_pre = relu_backward(&d_branch[j], &cache.branch_pre[j]);
        let (de, dw, db) = dense_backward(&e, &params.branch_w[j], &d_pre.view());
        d_e += &de;
        grads.branch_w[j] = dw;
        grads.branch_b[j] = db;
    }

    // extractor
    let d_pool2 = d_e.into_shape_with_order(cache.pool2_dim).expect("feature layout");
    let d_relu2 = maxpool_backward(&d_pool2, &cache.pool2_idx, cache.conv2_pre.dim())?;
    let d_conv2 = relu_backward(&d_relu2, &cache.conv2_pre);
    let (d_pool1, dw, db) = conv_backward(&cache.pool1, &params.conv2_w, &d_conv2, true)?;
    grads.conv2_w = dw;
    grads.conv2_b = db;
    let d_relu1 = maxpool_backward(&d_pool1.expect("requested"), &cache.pool1_idx, cache.conv1_pre.dim())?;
    let d_conv1 = relu_backward(&d_relu1, &cache.conv1_pre);
    let (_, dw, db) = conv_backward(&cache.input, &params.conv1_w, &d_conv1, false)?;
    grads.conv1_w = dw;
    grads.conv1_b = db;
    Ok(grads)
}

/// One-hot `N × K` weights selecting each sample's domain.
pub fn one_hot(labels: &[usize], k: usize) -> Array2<f64> {
    let mut w = Array2::zeros((labels.len(), k));
    for (i, &l) in labels.iter().enumerate() {
        w[[i, l]] = 1.0;
    }
    w
}

/// Rows `rows` of `m`.
pub(crate) fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), m.ncols()));
    for (o, &r) in rows.iter().enumerate() {
        out.row_mut(o).assign(&m.slice(s![r, ..]));
    }
    out
}
