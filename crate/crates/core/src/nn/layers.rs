//! Forward and backward passes over flat `f64` slices.
//!
//! Weight matrices are stored input-major (`[in][out]`), so a forward pass
//! is a sum of weight rows scaled by the inputs and zero inputs (one-hot
//! encodings) are skipped.

/// Records activation patterns (ReLU masks, pooling argmaxes) so gradient
/// checks can discard coordinates whose perturbation crosses a kink.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Trace {
    pub pattern: Vec<u32>,
}

/// `y = x W + b` with `W` of shape `[x.len()][y.len()]`.
pub fn dense_forward(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n_out = y.len();
    debug_assert_eq!(w.len(), x.len() * n_out);
    y.copy_from_slice(b);
    for (xi, row) in x.iter().zip(w.chunks_exact(n_out)) {
        if *xi == 0.0 {
            continue;
        }
        for (yo, wo) in y.iter_mut().zip(row) {
            *yo += xi * wo;
        }
    }
}

/// Accumulates `dW`, `db` and, when requested, writes `dx`.
pub fn dense_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n_out = dy.len();
    for (d, g) in db.iter_mut().zip(dy) {
        *d += g;
    }
    for (xi, drow) in x.iter().zip(dw.chunks_exact_mut(n_out)) {
        if *xi == 0.0 {
            continue;
        }
        for (d, g) in drow.iter_mut().zip(dy) {
            *d += xi * g;
        }
    }
    if let Some(dx) = dx {
        for (dxi, row) in dx.iter_mut().zip(w.chunks_exact(n_out)) {
            *dxi = row.iter().zip(dy).map(|(a, b)| a * b).sum();
        }
    }
}

/// Same-padded 1-D convolution, stride 1.
///
/// `x` is `[len][c_in]`, `w` is `[width][c_in][c_out]`, `y` is `[len][c_out]`.
pub fn conv1d_forward(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    len: usize,
    c_in: usize,
    c_out: usize,
    width: usize,
    y: &mut [f64],
) {
    debug_assert_eq!(x.len(), len * c_in);
    debug_assert_eq!(w.len(), width * c_in * c_out);
    let pad = (width - 1) / 2;
    for t in 0..len {
        let out = &mut y[t * c_out..(t + 1) * c_out];
        out.copy_from_slice(b);
        for j in 0..width {
            let Some(src) = (t + j).checked_sub(pad).filter(|s| *s < len) else {
                continue;
            };
            let xs = &x[src * c_in..(src + 1) * c_in];
            let wj = &w[j * c_in * c_out..(j + 1) * c_in * c_out];
            for (xi, row) in xs.iter().zip(wj.chunks_exact(c_out)) {
                if *xi == 0.0 {
                    continue;
                }
                for (o, wo) in out.iter_mut().zip(row) {
                    *o += xi * wo;
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    len: usize,
    c_in: usize,
    c_out: usize,
    width: usize,
    dw: &mut [f64],
    db: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let pad = (width - 1) / 2;
    if let Some(dx) = dx.as_deref_mut() {
        dx.iter_mut().for_each(|v| *v = 0.0);
    }
    for t in 0..len {
        let g = &dy[t * c_out..(t + 1) * c_out];
        for (d, gv) in db.iter_mut().zip(g) {
            *d += gv;
        }
        for j in 0..width {
            let Some(src) = (t + j).checked_sub(pad).filter(|s| *s < len) else {
                continue;
            };
            let xs = &x[src * c_in..(src + 1) * c_in];
            let dwj = &mut dw[j * c_in * c_out..(j + 1) * c_in * c_out];
            for (xi, drow) in xs.iter().zip(dwj.chunks_exact_mut(c_out)) {
                if *xi == 0.0 {
                    continue;
                }
                for (d, gv) in drow.iter_mut().zip(g) {
                    *d += xi * gv;
                }
            }
            if let Some(dx) = dx.as_deref_mut() {
                let wj = &w[j * c_in * c_out..(j + 1) * c_in * c_out];
                let dxs = &mut dx[src * c_in..(src + 1) * c_in];
                for (dxi, row) in dxs.iter_mut().zip(wj.chunks_exact(c_out)) {
                    *dxi += row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }
}

/// Non-overlapping max pooling over time. Returns the argmax source index
/// for every output element; ties go to the earlier position.
pub fn maxpool1d_forward(
    x: &[f64],
    len: usize,
    channels: usize,
    width: usize,
    y: &mut [f64],
    trace: Option<&mut Trace>,
) -> Vec<usize> {
    let out_len = len / width;
    let mut arg = vec![0usize; out_len * channels];
    for t in 0..out_len {
        for c in 0..channels {
            let mut best = t * width;
            for k in 1..width {
                let src = t * width + k;
                if x[src * channels + c] > x[best * channels + c] {
                    best = src;
                }
            }
            y[t * channels + c] = x[best * channels + c];
            arg[t * channels + c] = best;
        }
    }
    if let Some(tr) = trace {
        tr.pattern.extend(arg.iter().map(|a| *a as u32));
    }
    arg
}

pub fn maxpool1d_backward(dy: &[f64], arg: &[usize], channels: usize, dx: &mut [f64]) {
    dx.iter_mut().for_each(|v| *v = 0.0);
    for (i, (g, a)) in dy.iter().zip(arg).enumerate() {
        let c = i % channels;
        dx[a * channels + c] += g;
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_inplace(x: &mut [f64], trace: Option<&mut Trace>) {
    if let Some(tr) = trace {
        let mut word = 0u32;
        for (i, v) in x.iter().enumerate() {
            if *v > 0.0 {
                word |= 1 << (i % 32);
            }
            if i % 32 == 31 || i + 1 == x.len() {
                tr.pattern.push(word);
                word = 0;
            }
        }
    }
    x.iter_mut().for_each(|v| *v = relu(*v));
}

/// Gradient through ReLU given its output.
pub fn relu_backward(out: &[f64], dy: &mut [f64]) {
    for (g, o) in dy.iter_mut().zip(out) {
        if *o <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax followed by categorical cross-entropy against class `target`.
/// Writes the gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize, dlogits: Option<&mut [f64]>) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let log_z = max + sum.ln();
    if let Some(d) = dlogits {
        for (i, (g, l)) in d.iter_mut().zip(logits).enumerate() {
            *g = (l - log_z).exp() - if i == target { 1.0 } else { 0.0 };
        }
    }
    log_z - logits[target]
}

/// Per-class sigmoid with binary cross-entropy, averaged over classes.
pub fn sigmoid_bce(logits: &[f64], targets: &[f64], dlogits: Option<&mut [f64]>) -> f64 {
    let k = logits.len() as f64;
    let mut loss = 0.0;
    for (l, t) in logits.iter().zip(targets) {
        // log(1 + e^l) computed stably
        let softplus = l.max(0.0) + (-l.abs()).exp().ln_1p();
        loss += softplus - t * l;
    }
    if let Some(d) = dlogits {
        for ((g, l), t) in d.iter_mut().zip(logits).zip(targets) {
            *g = (sigmoid(*l) - t) / k;
        }
    }
    loss / k
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)`.
pub fn dropout_mask<R: rand::Rng>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Cached values of one LSTM step, needed for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmStep {
    /// `[x; h_prev]`
    pub input: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Gate activations `i, f, g, o`, each of width `hidden`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One LSTM step. `w` is `[in + hidden][4 * hidden]` with gate blocks
/// ordered input, forget, cell, output.
pub fn lstm_step(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> LstmStep {
    let hidden = h_prev.len();
    let mut input = Vec::with_capacity(x.len() + hidden);
    input.extend_from_slice(x);
    input.extend_from_slice(h_prev);
    let mut z = vec![0.0; 4 * hidden];
    dense_forward(w, b, &input, &mut z);
    let mut gates = z;
    for (k, v) in gates.iter_mut().enumerate() {
        *v = if k / hidden == 2 { v.tanh() } else { sigmoid(*v) };
    }
    let mut c = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for j in 0..hidden {
        let (i, f, g, o) = (
            gates[j],
            gates[hidden + j],
            gates[2 * hidden + j],
            gates[3 * hidden + j],
        );
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        h[j] = o * tanh_c[j];
    }
    LstmStep {
        input,
        c_prev: c_prev.to_vec(),
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Backward through one step. `dh` and `dc` are the gradients flowing into
/// this step's outputs; returns `(d[x; h_prev], dc_prev)`.
pub fn lstm_step_backward(
    w: &[f64],
    step: &LstmStep,
    dh: &[f64],
    dc: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> (Vec<f64>, Vec<f64>) {
    let hidden = dh.len();
    let mut dz = vec![0.0; 4 * hidden];
    let mut dc_prev = vec![0.0; hidden];
    for j in 0..hidden {
        let (i, f, g, o) = (
            step.gates[j],
            step.gates[hidden + j],
            step.gates[2 * hidden + j],
            step.gates[3 * hidden + j],
        );
        let tc = step.tanh_c[j];
        let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
        let d_o = dh[j] * tc;
        let d_i = dcj * g;
        let d_g = dcj * i;
        let d_f = dcj * step.c_prev[j];
        dc_prev[j] = dcj * f;
        dz[j] = d_i * i * (1.0 - i);
        dz[hidden + j] = d_f * f * (1.0 - f);
        dz[2 * hidden + j] = d_g * (1.0 - g * g);
        dz[3 * hidden + j] = d_o * o * (1.0 - o);
    }
    let mut dinput = vec![0.0; step.input.len()];
    dense_backward(w, &step.input, &dz, dw, db, Some(&mut dinput));
    (dinput, dc_prev)
}
