//! Primitive layers with exact gradients.
//!
//! Feature maps are `[batch, channels, height, width]`. Convolutions are
//! valid (no padding), stride 1, with kernels of shape `(1, k)` sliding
//! along the width (time) axis. Pooling is non-overlapping max along time;
//! trailing timesteps that do not fill a pool window are dropped.

use ndarray::{Array1, Array2, Array3, Array4, ArrayView2, Axis};

use crate::error::{Error, Result};

/// `out[n, o, h, t] = b[o] + Σ_i Σ_j w[o, i, j] · x[n, i, h, t + j]`.
pub fn conv_forward(input: &Array4<f64>, weight: &Array3<f64>, bias: &Array1<f64>) -> Result<Array4<f64>> {
    let (n, cin, h, w) = input.dim();
    let (cout, wcin, k) = weight.dim();
    if wcin != cin || bias.len() != cout || k == 0 || k > w {
        return Err(Error::shape(
            "conv",
            format!("input {:?}, weight {:?}, bias {}", input.dim(), weight.dim(), bias.len()),
        ));
    }
    let wout = w - k + 1;
    let x = input.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let wt = weight.as_standard_layout();
    let wt = wt.as_slice().expect("standard layout");
    let mut out = Array4::zeros((n, cout, h, wout));
    let o = out.as_slice_mut().expect("fresh array");
    for b in 0..n {
        for co in 0..cout {
            for row in 0..h {
                let dst = &mut o[((b * cout + co) * h + row) * wout..][..wout];
                dst.fill(bias[co]);
                for ci in 0..cin {
                    let kern = &wt[(co * cin + ci) * k..][..k];
                    let src = &x[((b * cin + ci) * h + row) * w..][..w];
                    for (t, d) in dst.iter_mut().enumerate() {
                        let win = &src[t..t + k];
                        *d += kern.iter().zip(win).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_input, grad_weight, grad_bias)`. The input gradient is only
/// computed when `need_input` is set.
pub fn conv_backward(
    input: &Array4<f64>,
    weight: &Array3<f64>,
    grad_out: &Array4<f64>,
    need_input: bool,
) -> Result<(Option<Array4<f64>>, Array3<f64>, Array1<f64>)> {
    let (n, cin, h, w) = input.dim();
    let (cout, _, k) = weight.dim();
    let wout = w + 1 - k;
    if grad_out.dim() != (n, cout, h, wout) {
        return Err(Error::shape(
            "conv",
            format!("gradient {:?} does not match output {:?}", grad_out.dim(), (n, cout, h, wout)),
        ));
    }
    let x = input.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let wt = weight.as_standard_layout();
    let wt = wt.as_slice().expect("standard layout");
    let g = grad_out.as_standard_layout();
    let g = g.as_slice().expect("standard layout");
    let mut gw = Array3::<f64>::zeros((cout, cin, k));
    let mut gb = Array1::<f64>::zeros(cout);
    let mut gx = need_input.then(|| Array4::<f64>::zeros((n, cin, h, w)));
    {
        let gw_s = gw.as_slice_mut().expect("fresh array");
        let mut gx_s = gx.as_mut().map(|a| a.as_slice_mut().expect("fresh array"));
        for b in 0..n {
            for co in 0..cout {
                for row in 0..h {
                    let go = &g[((b * cout + co) * h + row) * wout..][..wout];
                    gb[co] += go.iter().sum::<f64>();
                    for ci in 0..cin {
                        let base = ((b * cin + ci) * h + row) * w;
                        let src = &x[base..base + w];
                        let kern_grad = &mut gw_s[(co * cin + ci) * k..][..k];
                        for (j, kg) in kern_grad.iter_mut().enumerate() {
                            *kg += go.iter().zip(&src[j..j + wout]).map(|(a, b)| a * b).sum::<f64>();
                        }
                        if let Some(gxs) = gx_s.as_deref_mut() {
                            let kern = &wt[(co * cin + ci) * k..][..k];
                            let dst = &mut gxs[base..base + w];
                            for (t, &gv) in go.iter().enumerate() {
                                for (j, &kv) in kern.iter().enumerate() {
                                    dst[t + j] += gv * kv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gw, gb))
}

/// Non-overlapping max pooling of width `pool` along time. Returns the pooled
/// map and, for every output cell, the flat input index of its maximum (the
/// first one on ties).
pub fn maxpool_forward(input: &Array4<f64>, pool: usize) -> Result<(Array4<f64>, Vec<usize>)> {
    let (n, c, h, w) = input.dim();
    if pool == 0 || w < pool {
        return Err(Error::shape("maxpool", format!("width {w} with pool {pool}")));
    }
    let wout = w / pool;
    let x = input.as_standard_layout();
    let x = x.as_slice().expect("standard layout");
    let mut out = Array4::zeros((n, c, h, wout));
    let mut argmax = Vec::with_capacity(n * c * h * wout);
    let o = out.as_slice_mut().expect("fresh array");
    let mut idx = 0;
    for line in 0..n * c * h {
        for t in 0..wout {
            let start = line * w + t * pool;
            let mut best = start;
            for j in start + 1..start + pool {
                if x[j] > x[best] {
                    best = j;
                }
            }
            o[idx] = x[best];
            argmax.push(best);
            idx += 1;
        }
    }
    Ok((out, argmax))
}

/// Routes each output gradient to the input position that won the max.
pub fn maxpool_backward(grad_out: &Array4<f64>, argmax: &[usize], input_dim: (usize, usize, usize, usize)) -> Result<Array4<f64>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape("maxpool", "gradient and argmax lengths differ"));
    }
    let mut gx = Array4::zeros(input_dim);
    let gxs = gx.as_slice_mut().expect("fresh array");
    for (g, &i) in grad_out.iter().zip(argmax) {
        gxs[i] += g;
    }
    Ok(gx)
}

pub fn relu_forward<D: ndarray::Dimension>(x: &ndarray::Array<f64, D>) -> ndarray::Array<f64, D> {
    x.mapv(|v| v.max(0.0))
}

/// Passes the gradient where the pre-activation was strictly positive.
pub fn relu_backward<D: ndarray::Dimension>(
    grad: &ndarray::Array<f64, D>,
    pre: &ndarray::Array<f64, D>,
) -> ndarray::Array<f64, D> {
    let mut g = grad.clone();
    g.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    g
}

/// `x · W + b` with `W` of shape `[in, out]`.
pub fn dense_forward(x: &ArrayView2<f64>, weight: &Array2<f64>, bias: &Array1<f64>) -> Result<Array2<f64>> {
    if x.ncols() != weight.nrows() || weight.ncols() != bias.len() {
        return Err(Error::shape(
            "dense",
            format!("input {:?}, weight {:?}, bias {}", x.dim(), weight.dim(), bias.len()),
        ));
    }
    Ok(x.dot(weight) + bias)
}

/// Returns `(grad_input, grad_weight, grad_bias)`.
pub fn dense_backward(
    x: &ArrayView2<f64>,
    weight: &Array2<f64>,
    grad_out: &ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    (
        grad_out.dot(&weight.t()),
        x.t().dot(grad_out),
        grad_out.sum_axis(Axis(0)),
    )
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

/// Gradient through a row-wise softmax: `p ⊙ (g − ⟨p, g⟩)`.
pub fn softmax_backward(probs: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    for ((p, g), mut o) in probs.rows().into_iter().zip(grad.rows()).zip(out.rows_mut()) {
        let dot: f64 = p.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        for ((o, &pi), &gi) in o.iter_mut().zip(p.iter()).zip(g.iter()) {
            *o = pi * (gi - dot);
        }
    }
    out
}
