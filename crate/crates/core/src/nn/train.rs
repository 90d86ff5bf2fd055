use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::layers::Trace;
use crate::nn::optim::RmsProp;
use crate::par::{derive_seed, rng_for, Exec};

/// Forward pass mode. Training mode carries the seed for dropout masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// A network whose per-sample loss and parameter gradient can be evaluated
/// at an arbitrary flat parameter vector.
pub trait Differentiable: Sync {
    type Sample: Sync;

    fn num_params(&self) -> usize;

    /// Loss of one sample. When `grad` is given the parameter gradient is
    /// added to it.
    fn loss(
        &self,
        params: &[f64],
        sample: &Self::Sample,
        mode: Mode,
        grad: Option<&mut [f64]>,
        trace: Option<&mut Trace>,
    ) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub optimizer: RmsProp,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            optimizer: RmsProp::default(),
            batch: 32,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub seconds: f64,
    pub samples: usize,
}

/// Samples summed sequentially inside one work item; fixed so the
/// floating-point reduction order does not depend on the thread count.
const CHUNK: usize = 4;

/// Mini-batch RMSProp training.
pub fn fit<M: Differentiable>(
    model: &M,
    params: &mut [f64],
    state: &mut [f64],
    samples: &[M::Sample],
    hp: &TrainParams,
    exec: Exec,
) -> Result<TrainLog> {
    let start = Instant::now();
    let p = model.num_params();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = rng_for(hp.seed, "shuffle");
    let mut log = TrainLog {
        samples: samples.len(),
        ..TrainLog::default()
    };
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hp.batch.max(1)) {
            let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
            let frozen: &[f64] = params;
            let parts = exec.map(&chunks, |chunk| {
                let mut g = vec![0.0; p];
                let mut loss = 0.0;
                for &i in chunk.iter() {
                    let seed = derive_seed(hp.seed, &format!("dropout/{epoch}/{i}"));
                    loss += model.loss(frozen, &samples[i], Mode::Train { seed }, Some(&mut g), None);
                }
                (loss, g)
            });
            let mut grad = vec![0.0; p];
            for (loss, g) in parts {
                total += loss;
                for (a, v) in grad.iter_mut().zip(&g) {
                    *a += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|v| *v *= scale);
            hp.optimizer.update(params, &grad, state)?;
        }
        log.epoch_losses.push(total / samples.len().max(1) as f64);
    }
    log.seconds = start.elapsed().as_secs_f64();
    Ok(log)
}

/// Mean evaluation-mode loss over `samples`.
pub fn mean_loss<M: Differentiable>(model: &M, params: &[f64], samples: &[M::Sample], exec: Exec) -> f64 {
    let losses = exec.map(samples, |s| model.loss(params, s, Mode::Eval, None, None));
    losses.iter().sum::<f64>() / samples.len().max(1) as f64
}
