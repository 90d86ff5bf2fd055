//! Central-difference verification of the analytic gradients.

use rand::Rng;

use crate::dataset::{Encoded, Slot};
use crate::nn::layers::Trace;
use crate::nn::models::{CnnArch, CnnSample, LstmArch, LstmSample, MlpArch, MlpSample, SlotFeatures};
use crate::nn::train::{Differentiable, Mode};
use crate::par::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub checked: usize,
    /// Coordinates whose perturbation changed a ReLU mask or pool argmax.
    pub skipped: usize,
    pub max_rel_err: f64,
}

/// Denominator floor: below it both gradients are treated as zero.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the analytic gradient of `model` at `params` on `sample` with
/// central differences of step `eps` for every parameter.
pub fn check_gradients<M: Differentiable>(
    model: &M,
    params: &[f64],
    sample: &M::Sample,
    mode: Mode,
    eps: f64,
) -> GradReport {
    assert!(eps > 0.0);
    let mut grad = vec![0.0; params.len()];
    let mut base = Trace::default();
    model.loss(params, sample, mode, Some(&mut grad), Some(&mut base));
    let mut p = params.to_vec();
    let mut report = GradReport {
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
    };
    for i in 0..p.len() {
        let orig = p[i];
        let mut t_plus = Trace::default();
        let mut t_minus = Trace::default();
        p[i] = orig + eps;
        let f_plus = model.loss(&p, sample, mode, None, Some(&mut t_plus));
        p[i] = orig - eps;
        let f_minus = model.loss(&p, sample, mode, None, Some(&mut t_minus));
        p[i] = orig;
        if t_plus != base || t_minus != base {
            report.skipped += 1;
            continue;
        }
        let numeric = (f_plus - f_minus) / (2.0 * eps);
        report.checked += 1;
        report.max_rel_err = report.max_rel_err.max(relative_error(grad[i], numeric));
    }
    report
}

fn random_params(len: usize, seed: u64, stream: &str) -> Vec<f64> {
    let mut rng = rng_for(seed, stream);
    (0..len).map(|_| rng.gen_range(-0.8..0.8)).collect()
}

/// Dense+ReLU stack with a sigmoid/BCE head.
pub fn probe_dense(seed: u64, eps: f64) -> GradReport {
    let (arch, _) = MlpArch::new(4, &[6, 5], 3);
    let p = random_params(arch.num_params(), seed, "probe/dense");
    let s = MlpSample { a: 1, b: 3, label: 2 };
    check_gradients(&arch, &p, &s, Mode::Eval, eps)
}

fn probe_slots(blocks: usize, rels: usize, len: usize, seed: u64) -> Vec<Slot> {
    let mut rng = rng_for(seed, "probe/slots");
    (0..len)
        .map(|t| {
            (t + 2 < len).then(|| Encoded {
                x: rng.gen_range(0..blocks),
                y: rng.gen_range(0..blocks),
                rel: rng.gen_range(0..rels),
            })
        })
        .collect()
}

/// Convolutions, max pooling, inverted dropout and a softmax/CE head.
pub fn probe_conv(seed: u64, eps: f64) -> GradReport {
    let features = SlotFeatures {
        blocks: 3,
        relations: 2,
    };
    let (arch, _) = CnnArch::new(features, 8, [3, 3, 4, 4], 3);
    let p = random_params(arch.num_params(), seed, "probe/conv");
    let s = CnnSample {
        seq: probe_slots(3, 2, 8, seed),
        label: 1,
    };
    check_gradients(&arch, &p, &s, Mode::Train { seed }, eps)
}

/// Two stacked LSTM layers unrolled over 3 read steps and 3 emit steps.
pub fn probe_lstm(seed: u64, eps: f64) -> GradReport {
    let features = SlotFeatures {
        blocks: 3,
        relations: 2,
    };
    let tokens = vec![
        Encoded { x: 0, y: 1, rel: 0 },
        Encoded { x: 1, y: 0, rel: 1 },
        Encoded { x: 2, y: 0, rel: 1 },
    ];
    let (arch, _) = LstmArch::new(features, tokens, 3, 2, 4);
    let p = random_params(arch.num_params(), seed, "probe/lstm");
    let s = LstmSample {
        window: vec![Encoded { x: 2, y: 1, rel: 0 }, Encoded { x: 0, y: 2, rel: 1 }],
        target: vec![2, 3, 0],
    };
    check_gradients(&arch, &p, &s, Mode::Eval, eps)
}
