//! The three task networks.
//!
//! * [`Mlp`]: first-move relation classifier over a pair of block indices.
//! * [`Cnn`]: reference-example classifier over an encoded relation sequence.
//! * [`LstmNet`]: holdout predictor. The stacked LSTM reads the padded window
//!   for `n` steps, then emits one triple token per step for `n` more steps,
//!   fed its previous token (the gold token while training).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, CorpusIndex, Encoded, Slot, WindowPair, PAD};
use crate::error::{Error, Result};
use crate::nn::layers::*;
use crate::nn::params::{ParamBuilder, Segment};
use crate::nn::train::{fit, Differentiable, Mode, TrainLog, TrainParams};
use crate::par::{rng_for, Exec};
use crate::qsr::{BlockId, RelTriple, RelationSet};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Segment,
    pub b: Segment,
}

impl DenseLayer {
    fn new(pb: &mut ParamBuilder, inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            w: pb.weights(inputs * outputs, inputs, outputs),
            b: pb.constant(outputs, 0.0),
        }
    }

    fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.outputs];
        dense_forward(self.w.of(p), self.b.of(p), x, &mut y);
        y
    }

    fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], grad: &mut [f64], want_dx: bool) -> Vec<f64> {
        let (dw, db) = split_two(grad, self.w, self.b);
        let mut dx = if want_dx { vec![0.0; self.inputs] } else { Vec::new() };
        dense_backward(
            self.w.of(p),
            x,
            dy,
            dw,
            db,
            want_dx.then_some(dx.as_mut_slice()),
        );
        dx
    }
}

/// Two disjoint mutable segments of one gradient vector; `a` precedes `b`.
fn split_two(grad: &mut [f64], a: Segment, b: Segment) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.offset + a.len <= b.offset);
    let (head, tail) = grad.split_at_mut(b.offset);
    (
        &mut head[a.offset..a.offset + a.len],
        &mut tail[..b.len],
    )
}

fn one_hot_into(out: &mut [f64], index: usize) {
    out[index] = 1.0;
}

// ---------------------------------------------------------------- MLP

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSample {
    pub a: usize,
    pub b: usize,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArch {
    pub blocks: usize,
    pub classes: usize,
    pub layers: Vec<DenseLayer>,
    len: usize,
}

impl MlpArch {
    pub fn new(blocks: usize, hidden: &[usize], classes: usize) -> (Self, ParamBuilder) {
        let mut pb = ParamBuilder::new();
        let mut layers = Vec::new();
        let mut width = 2 * blocks;
        for h in hidden.iter().copied().chain([classes]) {
            layers.push(DenseLayer::new(&mut pb, width, h));
            width = h;
        }
        let len = pb.len();
        (
            MlpArch {
                blocks,
                classes,
                layers,
                len,
            },
            pb,
        )
    }

    fn input(&self, a: usize, b: usize) -> Vec<f64> {
        let mut x = vec![0.0; 2 * self.blocks];
        one_hot_into(&mut x, a);
        one_hot_into(&mut x, self.blocks + b);
        x
    }

    /// Activations of every layer; the last entry holds the output logits.
    fn forward(&self, p: &[f64], x: Vec<f64>, mut trace: Option<&mut Trace>) -> Vec<Vec<f64>> {
        let mut acts = vec![x];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(p, acts.last().unwrap());
            if i < last {
                relu_inplace(&mut y, trace.as_deref_mut());
            }
            acts.push(y);
        }
        acts
    }

    pub fn logits(&self, p: &[f64], a: usize, b: usize) -> Vec<f64> {
        self.forward(p, self.input(a, b), None).pop().unwrap()
    }
}

impl Differentiable for MlpArch {
    type Sample = MlpSample;

    fn num_params(&self) -> usize {
        self.len
    }

    fn loss(
        &self,
        p: &[f64],
        s: &MlpSample,
        _mode: Mode,
        grad: Option<&mut [f64]>,
        trace: Option<&mut Trace>,
    ) -> f64 {
        let acts = self.forward(p, self.input(s.a, s.b), trace);
        let mut target = vec![0.0; self.classes];
        target[s.label] = 1.0;
        let logits = acts.last().unwrap();
        let Some(grad) = grad else {
            return sigmoid_bce(logits, &target, None);
        };
        let mut dy = vec![0.0; self.classes];
        let loss = sigmoid_bce(logits, &target, Some(&mut dy));
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i + 1 < self.layers.len() {
                relu_backward(&acts[i + 1], &mut dy);
            }
            dy = layer.backward(p, &acts[i], &dy, grad, i > 0);
        }
        loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: MlpArch,
    pub params: Vec<f64>,
    pub rms: Vec<f64>,
    pub log: TrainLog,
}

/// Every ordered block pair of every example, labeled with its relation.
pub fn mlp_samples(corpus: &Corpus) -> Result<Vec<MlpSample>> {
    let mut out = Vec::new();
    for ex in &corpus.examples {
        for t in &corpus.index.ordered(&ex.relations) {
            let e = corpus.index.encode_triple(t)?;
            out.push(MlpSample {
                a: e.x,
                b: e.y,
                label: e.rel,
            });
        }
    }
    Ok(out)
}

impl Mlp {
    pub fn untrained(index: &CorpusIndex, seed: u64) -> Mlp {
        let (arch, pb) = MlpArch::new(index.roster.len(), &[64; 4], index.relations.len());
        let params = pb.initialize(&mut rng_for(seed, "init/mlp"));
        let rms = vec![0.0; params.len()];
        Mlp {
            arch,
            params,
            rms,
            log: TrainLog::default(),
        }
    }

    pub fn train(corpus: &Corpus, hp: &TrainParams, exec: Exec) -> Result<Mlp> {
        let mut model = Mlp::untrained(&corpus.index, hp.seed);
        let samples = mlp_samples(corpus)?;
        model.log = fit(&model.arch, &mut model.params, &mut model.rms, &samples, hp, exec)?;
        Ok(model)
    }

    /// Per-class logits for the ordered pair of block indices.
    pub fn scores(&self, a: usize, b: usize) -> Vec<f64> {
        self.arch.logits(&self.params, a, b)
    }

    /// Most likely relation index between two distinct blocks.
    pub fn predict_first_relation(&self, index: &CorpusIndex, b1: BlockId, b2: BlockId) -> Result<usize> {
        if b1 == b2 {
            return Err(Error::SameBlock(b1));
        }
        let a = index
            .block_index(b1)
            .ok_or_else(|| Error::UnknownLabel(b1.to_string()))?;
        let b = index
            .block_index(b2)
            .ok_or_else(|| Error::UnknownLabel(b2.to_string()))?;
        Ok(argmax(&self.scores(a, b)))
    }
}

// ---------------------------------------------------------------- CNN

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub c_in: usize,
    pub c_out: usize,
    pub width: usize,
    pub w: Segment,
    pub b: Segment,
}

impl ConvLayer {
    fn new(pb: &mut ParamBuilder, c_in: usize, c_out: usize, width: usize) -> Self {
        ConvLayer {
            c_in,
            c_out,
            width,
            w: pb.weights(width * c_in * c_out, width * c_in, width * c_out),
            b: pb.constant(c_out, 0.0),
        }
    }

    fn forward(&self, p: &[f64], x: &[f64], len: usize) -> Vec<f64> {
        let mut y = vec![0.0; len * self.c_out];
        conv1d_forward(self.w.of(p), self.b.of(p), x, len, self.c_in, self.c_out, self.width, &mut y);
        y
    }

    fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], len: usize, grad: &mut [f64], want_dx: bool) -> Vec<f64> {
        let (dw, db) = split_two(grad, self.w, self.b);
        let mut dx = if want_dx { vec![0.0; len * self.c_in] } else { Vec::new() };
        conv1d_backward(
            self.w.of(p),
            x,
            dy,
            len,
            self.c_in,
            self.c_out,
            self.width,
            dw,
            db,
            want_dx.then_some(dx.as_mut_slice()),
        );
        dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnSample {
    pub seq: Vec<Slot>,
    pub label: usize,
}

/// Per-position features: one-hot x block, one-hot y block, one-hot
/// relation, and a PAD flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFeatures {
    pub blocks: usize,
    pub relations: usize,
}

impl SlotFeatures {
    pub fn width(&self) -> usize {
        2 * self.blocks + self.relations + 1
    }

    fn write(&self, slot: &Slot, out: &mut [f64]) {
        match slot {
            Some(e) => {
                out[e.x] = 1.0;
                out[self.blocks + e.y] = 1.0;
                out[2 * self.blocks + e.rel] = 1.0;
            }
            None => out[2 * self.blocks + self.relations] = 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnArch {
    pub features: SlotFeatures,
    /// Input length after padding; divisible by the total pooling factor.
    pub len: usize,
    pub classes: usize,
    pub convs: Vec<ConvLayer>,
    pub pool: usize,
    pub dropout: f64,
    pub out: DenseLayer,
    total: usize,
}

impl CnnArch {
    /// Convolutions with `channels` widths; pooling after the 2nd and 4th.
    pub fn new(features: SlotFeatures, n: usize, channels: [usize; 4], classes: usize) -> (Self, ParamBuilder) {
        let pool = 2;
        let len = n.max(1).div_ceil(pool * pool) * pool * pool;
        let mut pb = ParamBuilder::new();
        let mut convs = Vec::new();
        let mut c_in = features.width();
        for c in channels {
            convs.push(ConvLayer::new(&mut pb, c_in, c, 3));
            c_in = c;
        }
        let out = DenseLayer::new(&mut pb, (len / (pool * pool)) * c_in, classes);
        let total = pb.len();
        (
            CnnArch {
                features,
                len,
                classes,
                convs,
                pool,
                dropout: 0.5,
                out,
                total,
            },
            pb,
        )
    }

    fn input(&self, seq: &[Slot]) -> Vec<f64> {
        let w = self.features.width();
        let mut x = vec![0.0; self.len * w];
        for t in 0..self.len {
            let slot = seq.get(t).copied().flatten();
            self.features.write(&slot, &mut x[t * w..(t + 1) * w]);
        }
        x
    }

    /// Output logits; dropout applies only in training mode.
    fn run(
        &self,
        p: &[f64],
        seq: &[Slot],
        mode: Mode,
        target: Option<usize>,
        grad: Option<&mut [f64]>,
        mut trace: Option<&mut Trace>,
    ) -> (f64, Vec<f64>) {
        let l0 = self.len;
        let l1 = l0 / self.pool;
        let l2 = l1 / self.pool;
        let [c1, c2, c3, c4] = [0, 1, 2, 3].map(|i| self.convs[i]);

        let x = self.input(seq);
        let mut a1 = c1.forward(p, &x, l0);
        relu_inplace(&mut a1, trace.as_deref_mut());
        let mut a2 = c2.forward(p, &a1, l0);
        relu_inplace(&mut a2, trace.as_deref_mut());
        let mut q1 = vec![0.0; l1 * c2.c_out];
        let arg1 = maxpool1d_forward(&a2, l0, c2.c_out, self.pool, &mut q1, trace.as_deref_mut());
        let mut a3 = c3.forward(p, &q1, l1);
        relu_inplace(&mut a3, trace.as_deref_mut());
        let mut a4 = c4.forward(p, &a3, l1);
        relu_inplace(&mut a4, trace.as_deref_mut());
        let mut q2 = vec![0.0; l2 * c4.c_out];
        let arg2 = maxpool1d_forward(&a4, l1, c4.c_out, self.pool, &mut q2, trace.as_deref_mut());
        let mask = match mode {
            Mode::Train { seed } if self.dropout > 0.0 => {
                Some(dropout_mask(q2.len(), self.dropout, &mut ChaCha8Rng::seed_from_u64(seed)))
            }
            _ => None,
        };
        let d = match &mask {
            Some(m) => q2.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => q2.clone(),
        };
        let logits = self.out.forward(p, &d);
        let Some(target) = target else {
            return (0.0, logits);
        };
        let Some(grad) = grad else {
            return (softmax_cross_entropy(&logits, target, None), logits);
        };
        let mut dlogits = vec![0.0; self.classes];
        let loss = softmax_cross_entropy(&logits, target, Some(&mut dlogits));
        let mut dd = self.out.backward(p, &d, &dlogits, grad, true);
        if let Some(m) = &mask {
            dd.iter_mut().zip(m).for_each(|(g, k)| *g *= k);
        }
        let mut da4 = vec![0.0; a4.len()];
        maxpool1d_backward(&dd, &arg2, c4.c_out, &mut da4);
        relu_backward(&a4, &mut da4);
        let mut da3 = c4.backward(p, &a3, &da4, l1, grad, true);
        relu_backward(&a3, &mut da3);
        let dq1 = c3.backward(p, &q1, &da3, l1, grad, true);
        let mut da2 = vec![0.0; a2.len()];
        maxpool1d_backward(&dq1, &arg1, c2.c_out, &mut da2);
        relu_backward(&a2, &mut da2);
        let mut da1 = c2.backward(p, &a1, &da2, l0, grad, true);
        relu_backward(&a1, &mut da1);
        c1.backward(p, &x, &da1, l0, grad, false);
        (loss, logits)
    }

    pub fn logits(&self, p: &[f64], seq: &[Slot]) -> Vec<f64> {
        self.run(p, seq, Mode::Eval, None, None, None).1
    }
}

impl Differentiable for CnnArch {
    type Sample = CnnSample;

    fn num_params(&self) -> usize {
        self.total
    }

    fn loss(&self, p: &[f64], s: &CnnSample, mode: Mode, grad: Option<&mut [f64]>, trace: Option<&mut Trace>) -> f64 {
        self.run(p, &s.seq, mode, Some(s.label), grad, trace).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn {
    pub arch: CnnArch,
    pub params: Vec<f64>,
    pub rms: Vec<f64>,
    pub log: TrainLog,
}

/// Copies of each full example per training epoch.
const CNN_FULL_COPIES: usize = 4;
/// Windows per (example, window length) used for CNN training.
const CNN_WINDOWS_PER_LENGTH: usize = 2;

/// Full examples plus a few windows of each length, labeled with the
/// source example.
pub fn cnn_samples(corpus: &Corpus, pairs: &[WindowPair]) -> Result<Vec<CnnSample>> {
    let mut out = Vec::new();
    for ex in &corpus.examples {
        let seq = corpus.index.encode_padded(&corpus.index.ordered(&ex.relations), corpus.n())?;
        for _ in 0..CNN_FULL_COPIES {
            out.push(CnnSample {
                seq: seq.clone(),
                label: ex.id,
            });
        }
    }
    let mut taken = std::collections::HashMap::new();
    for pair in pairs {
        let k = taken.entry((pair.example, pair.window.len())).or_insert(0usize);
        if *k >= CNN_WINDOWS_PER_LENGTH {
            continue;
        }
        *k += 1;
        out.push(CnnSample {
            seq: corpus.index.encode_padded(&pair.window, corpus.n())?,
            label: pair.example,
        });
    }
    Ok(out)
}

impl Cnn {
    pub fn untrained(index: &CorpusIndex, examples: usize, seed: u64) -> Cnn {
        let features = SlotFeatures {
            blocks: index.roster.len(),
            relations: index.relations.len(),
        };
        let (arch, pb) = CnnArch::new(features, index.n, [64, 64, 128, 128], examples);
        let params = pb.initialize(&mut rng_for(seed, "init/cnn"));
        let rms = vec![0.0; params.len()];
        Cnn {
            arch,
            params,
            rms,
            log: TrainLog::default(),
        }
    }

    pub fn train(corpus: &Corpus, pairs: &[WindowPair], hp: &TrainParams, exec: Exec) -> Result<Cnn> {
        let mut model = Cnn::untrained(&corpus.index, corpus.len(), hp.seed);
        let samples = cnn_samples(corpus, pairs)?;
        model.log = fit(&model.arch, &mut model.params, &mut model.rms, &samples, hp, exec)?;
        Ok(model)
    }

    /// Encodes a relation set for the network, keeping at most `len` triples.
    pub fn encode(&self, index: &CorpusIndex, rels: &RelationSet) -> Result<Vec<Slot>> {
        let mut triples = index.ordered(rels);
        triples.truncate(self.arch.len);
        index.encode_padded(&triples, self.arch.len)
    }

    pub fn probabilities(&self, index: &CorpusIndex, rels: &RelationSet) -> Result<Vec<f64>> {
        let seq = self.encode(index, rels)?;
        Ok(softmax(&self.arch.logits(&self.params, &seq)))
    }

    /// Example ids ranked by predicted probability (ties: lower id first).
    pub fn ranked_examples(&self, index: &CorpusIndex, rels: &RelationSet) -> Result<Vec<usize>> {
        let probs = self.probabilities(index, rels)?;
        let mut ids: Vec<usize> = (0..probs.len()).collect();
        ids.sort_by(|a, b| probs[*b].total_cmp(&probs[*a]).then(a.cmp(b)));
        Ok(ids)
    }

    pub fn predict_example(&self, index: &CorpusIndex, rels: &RelationSet) -> Result<usize> {
        Ok(argmax(&self.probabilities(index, rels)?))
    }
}

// ---------------------------------------------------------------- LSTM

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub inputs: usize,
    pub hidden: usize,
    pub w: Segment,
    pub b: Segment,
}

impl LstmLayer {
    fn new(pb: &mut ParamBuilder, inputs: usize, hidden: usize) -> Self {
        let w = pb.weights((inputs + hidden) * 4 * hidden, inputs + hidden, hidden);
        let b_i = pb.constant(hidden, 0.0);
        // Forget-gate bias starts at one.
        pb.constant(hidden, 1.0);
        pb.constant(2 * hidden, 0.0);
        LstmLayer {
            inputs,
            hidden,
            w,
            b: Segment {
                offset: b_i.offset,
                len: 4 * hidden,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSample {
    pub window: Vec<Encoded>,
    /// Holdout tokens right-padded with PAD to `n`.
    pub target: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmArch {
    pub features: SlotFeatures,
    /// Triple-token vocabulary without PAD; token `i + 1` is `tokens[i]`.
    pub tokens: Vec<Encoded>,
    /// Steps read and steps emitted.
    pub n: usize,
    pub layers: Vec<LstmLayer>,
    pub out: DenseLayer,
    total: usize,
}

struct Unrolled {
    /// `steps[layer][t]`
    steps: Vec<Vec<LstmStep>>,
}

impl LstmArch {
    pub fn new(features: SlotFeatures, tokens: Vec<Encoded>, n: usize, layers: usize, hidden: usize) -> (Self, ParamBuilder) {
        let mut pb = ParamBuilder::new();
        let mut width = features.width() + 1;
        let mut ls = Vec::new();
        for _ in 0..layers {
            ls.push(LstmLayer::new(&mut pb, width, hidden));
            width = hidden;
        }
        let out = DenseLayer::new(&mut pb, hidden, tokens.len() + 1);
        let total = pb.len();
        (
            LstmArch {
                features,
                tokens,
                n,
                layers: ls,
                out,
                total,
            },
            pb,
        )
    }

    pub fn vocab(&self) -> usize {
        self.tokens.len() + 1
    }

    fn input_width(&self) -> usize {
        self.features.width() + 1
    }

    /// Features of a window slot or an emitted token; the extra last flag marks GO.
    fn slot_input(&self, slot: &Slot) -> Vec<f64> {
        let mut x = vec![0.0; self.input_width()];
        self.features.write(slot, &mut x);
        x
    }

    fn token_input(&self, token: Option<usize>) -> Vec<f64> {
        match token {
            None => {
                let mut x = vec![0.0; self.input_width()];
                x[self.features.width()] = 1.0;
                x
            }
            Some(PAD) => self.slot_input(&None),
            Some(t) => self.slot_input(&Some(self.tokens[t - 1])),
        }
    }

    /// Full input sequence with teacher forcing.
    /// Read step `t` sees the window right-aligned: PAD first, so the
    /// window's last triple immediately precedes the first emit step.
    fn encoder_slot(&self, window: &[Encoded], t: usize) -> Slot {
        let lead = self.n.saturating_sub(window.len());
        t.checked_sub(lead).and_then(|i| window.get(i).copied())
    }

    fn sequence(&self, window: &[Encoded], target: &[usize]) -> Vec<Vec<f64>> {
        let mut xs = Vec::with_capacity(2 * self.n);
        for t in 0..self.n {
            xs.push(self.slot_input(&self.encoder_slot(window, t)));
        }
        for t in 0..self.n {
            xs.push(self.token_input(if t == 0 { None } else { Some(target[t - 1]) }));
        }
        xs
    }

    fn unroll(&self, p: &[f64], xs: Vec<Vec<f64>>) -> Unrolled {
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut cur = xs;
        for layer in &self.layers {
            let h0 = vec![0.0; layer.hidden];
            let mut h = h0.clone();
            let mut c = h0;
            let mut ls = Vec::with_capacity(cur.len());
            for x in &cur {
                let st = lstm_step(layer.w.of(p), layer.b.of(p), x, &h, &c);
                h.clone_from(&st.h);
                c.clone_from(&st.c);
                ls.push(st);
            }
            cur = ls.iter().map(|s| s.h.clone()).collect();
            steps.push(ls);
        }
        Unrolled { steps }
    }

    fn sample_loss(&self, p: &[f64], s: &LstmSample, grad: Option<&mut [f64]>) -> f64 {
        let n = self.n;
        let un = self.unroll(p, self.sequence(&s.window, &s.target));
        let top = un.steps.last().unwrap();
        let scale = 1.0 / n as f64;
        let Some(grad) = grad else {
            return (0..n)
                .map(|t| softmax_cross_entropy(&self.out.forward(p, &top[n + t].h), s.target[t], None))
                .sum::<f64>()
                * scale;
        };
        let mut loss = 0.0;
        let hidden_top = self.layers.last().unwrap().hidden;
        // Gradient flowing into each top-layer h.
        let mut dh_top = vec![vec![0.0; hidden_top]; 2 * n];
        for t in 0..n {
            let h = &top[n + t].h;
            let logits = self.out.forward(p, h);
            let mut dl = vec![0.0; logits.len()];
            loss += softmax_cross_entropy(&logits, s.target[t], Some(&mut dl));
            dl.iter_mut().for_each(|v| *v *= scale);
            dh_top[n + t] = self.out.backward(p, h, &dl, grad, true);
        }
        let mut dh_out = dh_top;
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let (dw, db) = split_two(grad, layer.w, layer.b);
            let steps = &un.steps[li];
            let mut dh_next = vec![0.0; layer.hidden];
            let mut dc_next = vec![0.0; layer.hidden];
            let mut dx_all = vec![Vec::new(); steps.len()];
            for t in (0..steps.len()).rev() {
                let dh: Vec<f64> = dh_out[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                let (dinput, dc_prev) = lstm_step_backward(layer.w.of(p), &steps[t], &dh, &dc_next, dw, db);
                dh_next = dinput[layer.inputs..].to_vec();
                dc_next = dc_prev;
                if li > 0 {
                    dx_all[t] = dinput[..layer.inputs].to_vec();
                }
            }
            dh_out = dx_all;
        }
        loss * scale
    }

    /// Cross-entropy of each emit step under teacher forcing.
    pub fn step_losses(&self, p: &[f64], s: &LstmSample) -> Vec<f64> {
        let un = self.unroll(p, self.sequence(&s.window, &s.target));
        let top = un.steps.last().unwrap();
        (0..self.n)
            .map(|t| softmax_cross_entropy(&self.out.forward(p, &top[self.n + t].h), s.target[t], None))
            .collect()
    }

    /// Greedy decoding: returns the emitted tokens up to the first PAD.
    pub fn decode(&self, p: &[f64], window: &[Encoded]) -> Vec<usize> {
        let mut hs: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.hidden]).collect();
        let mut cs = hs.clone();
        let step = |x: Vec<f64>, hs: &mut Vec<Vec<f64>>, cs: &mut Vec<Vec<f64>>| {
            let mut cur = x;
            for (li, layer) in self.layers.iter().enumerate() {
                let st = lstm_step(layer.w.of(p), layer.b.of(p), &cur, &hs[li], &cs[li]);
                hs[li] = st.h.clone();
                cs[li] = st.c;
                cur = st.h;
            }
            cur
        };
        for t in 0..self.n {
            step(self.slot_input(&self.encoder_slot(window, t)), &mut hs, &mut cs);
        }
        let mut out = Vec::new();
        let mut prev = None;
        for _ in 0..self.n {
            let h = step(self.token_input(prev), &mut hs, &mut cs);
            let tok = argmax(&self.out.forward(p, &h));
            if tok == PAD {
                break;
            }
            out.push(tok);
            prev = Some(tok);
        }
        out
    }
}

impl Differentiable for LstmArch {
    type Sample = LstmSample;

    fn num_params(&self) -> usize {
        self.total
    }

    fn loss(&self, p: &[f64], s: &LstmSample, _mode: Mode, grad: Option<&mut [f64]>, _trace: Option<&mut Trace>) -> f64 {
        self.sample_loss(p, s, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNet {
    pub arch: LstmArch,
    pub params: Vec<f64>,
    pub rms: Vec<f64>,
    pub log: TrainLog,
}

pub fn lstm_samples(index: &CorpusIndex, pairs: &[WindowPair]) -> Result<Vec<LstmSample>> {
    pairs
        .iter()
        .map(|pair| {
            let window = pair
                .window
                .iter()
                .map(|t| index.encode_triple(t))
                .collect::<Result<Vec<_>>>()?;
            Ok(LstmSample {
                window,
                target: index.tokens_padded(&pair.holdout, index.n)?,
            })
        })
        .collect()
}

impl LstmNet {
    pub fn untrained(index: &CorpusIndex, seed: u64) -> LstmNet {
        let features = SlotFeatures {
            blocks: index.roster.len(),
            relations: index.relations.len(),
        };
        let (arch, pb) = LstmArch::new(features, index.tokens.clone(), index.n, 3, 32);
        let params = pb.initialize(&mut rng_for(seed, "init/lstm"));
        let rms = vec![0.0; params.len()];
        LstmNet {
            arch,
            params,
            rms,
            log: TrainLog::default(),
        }
    }

    pub fn train(index: &CorpusIndex, pairs: &[WindowPair], hp: &TrainParams, exec: Exec) -> Result<LstmNet> {
        let mut model = LstmNet::untrained(index, hp.seed);
        let samples = lstm_samples(index, pairs)?;
        model.log = fit(&model.arch, &mut model.params, &mut model.rms, &samples, hp, exec)?;
        Ok(model)
    }

    /// Predicted remaining relations for a window; repeated tokens collapse.
    pub fn predict_holdout(&self, index: &CorpusIndex, window: &[RelTriple]) -> Result<RelationSet> {
        let enc = window
            .iter()
            .take(self.arch.n)
            .map(|t| index.encode_triple(t))
            .collect::<Result<Vec<_>>>()?;
        self.arch
            .decode(&self.params, &enc)
            .into_iter()
            .filter_map(|tok| index.decode_token(tok))
            .try_fold(RelationSet::new(), |mut set, t| {
                let t = t?;
                if !set.contains(&t) {
                    set.push(t);
                }
                Ok(set)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize_corpus, NoiseParams};

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn zeroed_output_layer_ties_to_class_zero() {
        let corpus = synthesize_corpus(2, &NoiseParams::default(), 5).unwrap();
        let mut mlp = Mlp::untrained(&corpus.index, 1);
        let out = *mlp.arch.layers.last().unwrap();
        out.w.of_mut(&mut mlp.params).fill(0.0);
        out.b.of_mut(&mut mlp.params).fill(0.0);
        let r = &corpus.index.roster;
        assert_eq!(mlp.predict_first_relation(&corpus.index, r[0], r[1]).unwrap(), 0);
        assert_eq!(
            mlp.predict_first_relation(&corpus.index, r[0], r[0]),
            Err(Error::SameBlock(r[0]))
        );
    }

    #[test]
    fn cnn_input_length_is_divisible_by_pooling() {
        let corpus = synthesize_corpus(3, &NoiseParams::default(), 5).unwrap();
        let cnn = Cnn::untrained(&corpus.index, 3, 0);
        assert_eq!(cnn.arch.len % 4, 0);
        assert!(cnn.arch.len >= corpus.n());
        let all_pad = vec![None; cnn.arch.len];
        let id = argmax(&cnn.arch.logits(&cnn.params, &all_pad));
        assert!(id < 3);
    }

    #[test]
    fn untrained_lstm_decodes_at_most_n_tokens() {
        let corpus = synthesize_corpus(2, &NoiseParams::default(), 5).unwrap();
        let lstm = LstmNet::untrained(&corpus.index, 0);
        let out = lstm.predict_holdout(&corpus.index, &[]).unwrap();
        assert!(out.len() <= corpus.n());
    }
}
