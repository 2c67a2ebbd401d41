//! Training of reliable classifiers: warm-start epochs on the plain
//! classification loss, then scaling epochs on the loss of the scaled model
//! `x ↦ f(r x)` with the gradient flowing through `r`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ScreeningDataset, Split};
use crate::error::{Error, Result};
use crate::icnn::{ForwardCache, IcnnParams, ScaledClassifier};
use crate::oracle::{certify, r_gradient, CertificationReport, FastScaler, ScalingResult};
use crate::region::{BoundingBox, ContingencyRegion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub warm_epochs: usize,
    pub scaling_epochs: usize,
    pub batch_size: usize,
    pub pos_weight: f64,
    pub learning_rate: f64,
    /// Epochs (global counter) at which the learning rate is multiplied by `decay_factor`.
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub box_gain: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            warm_epochs: 500,
            scaling_epochs: 9_500,
            batch_size: 500,
            pos_weight: 1.0,
            learning_rate: 1e-2,
            decay_epochs: vec![1_500, 8_500],
            decay_factor: 0.1,
            seed: 0,
            depth: 1,
            width: 50,
            box_gain: crate::icnn::DEFAULT_BOX_GAIN,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.scaling_epochs == 0 {
            return bad("scaling_epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.pos_weight > 0.0) {
            return bad("pos_weight must be positive");
        }
        if !(self.learning_rate >= 0.0) || !(self.decay_factor > 0.0) {
            return bad("learning rate and decay factor must be nonnegative and positive");
        }
        if self.width == 0 && self.depth > 0 {
            return bad("width must be positive");
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<usize> {
        vec![self.width; self.depth]
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.learning_rate * self.decay_factor.powi(drops as i32)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
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

/// `−[w y log σ(f) + (1 − y) log(1 − σ(f))]` with `y = 1` for infeasible.
pub fn weighted_bce(f: f64, infeasible: bool, pos_weight: f64) -> f64 {
    if infeasible {
        pos_weight * softplus(-f)
    } else {
        softplus(f)
    }
}

/// Derivative of [`weighted_bce`] with respect to `f`.
pub fn weighted_bce_grad(f: f64, infeasible: bool, pos_weight: f64) -> f64 {
    if infeasible {
        -pos_weight * sigmoid(-f)
    } else {
        sigmoid(f)
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Mini-batches that cycle through seeded shuffles of `0..n`.
#[derive(Debug, Clone)]
pub struct BatchCycler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl BatchCycler {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self { order, pos: 0, rng }
    }

    /// Next batch of at most `size` indices; a pass ends with a short batch
    /// and the following call reshuffles.
    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + size).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }

    pub fn batches_per_pass(&self, size: usize) -> usize {
        self.order.len().div_ceil(size)
    }
}

/// Confusion counts with "infeasible" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(pred_infeasible: &[bool], infeasible: &[bool]) -> Self {
        let mut c = Self::default();
        for (&p, &y) in pred_infeasible.iter().zip(infeasible) {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// Share of infeasible samples predicted feasible.
    pub fn fnr(&self) -> f64 {
        self.fn_ as f64 / (self.fn_ + self.tp).max(1) as f64
    }

    /// Share of feasible samples predicted infeasible.
    pub fn fpr(&self) -> f64 {
        self.fp as f64 / (self.fp + self.tn).max(1) as f64
    }
}

/// Columns `scale · x_i` for the given indices.
pub fn batch_matrix(xs: &[Vec<f64>], idx: &[usize], scale: f64) -> DMatrix<f64> {
    let n = xs.first().map_or(0, |x| x.len());
    DMatrix::from_fn(n, idx.len(), |q, s| scale * xs[idx[s]][q])
}

/// Mean batch loss with upstream gradients for the raw and box branches of
/// `f = max(raw, box_gain · violation)`. Infeasible samples take
/// [`weighted_bce`] of `f`. Feasible samples take the branch-split upper
/// bound `softplus(raw) + softplus(box_gain · violation) ≥ softplus(f)`, which
/// keeps a gradient on `raw` where the box term wins.
pub fn split_loss(box_gain: f64, raw: &[f64], violation: &[f64], infeasible: &[bool], pos_weight: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let inv = 1.0 / infeasible.len().max(1) as f64;
    let mut loss = 0.0;
    let mut up_raw = vec![0.0; infeasible.len()];
    let mut up_box = vec![0.0; infeasible.len()];
    for (s, &y) in infeasible.iter().enumerate() {
        let (r, bx) = (raw[s], box_gain * violation[s]);
        if y {
            let f = r.max(bx);
            loss += weighted_bce(f, true, pos_weight) * inv;
            let g = weighted_bce_grad(f, true, pos_weight) * inv;
            if bx > r {
                up_box[s] = g;
            } else {
                up_raw[s] = g;
            }
        } else {
            loss += (softplus(r) + softplus(bx)) * inv;
            up_raw[s] = sigmoid(r) * inv;
            up_box[s] = sigmoid(bx) * inv;
        }
    }
    (loss, up_raw, up_box)
}

fn cache_loss(params: &IcnnParams, cache: &ForwardCache, idx: &[usize], ys: &[bool], pos_weight: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let labels: Vec<bool> = idx.iter().map(|&i| ys[i]).collect();
    split_loss(params.box_gain, &cache.raw, &cache.box_violation(), &labels, pos_weight)
}

/// [`split_loss`] of `f` on a batch and its parameter gradient.
pub fn batch_loss_grad(params: &IcnnParams, xs: &[Vec<f64>], ys: &[bool], idx: &[usize], pos_weight: f64) -> (f64, Vec<f64>) {
    let cache = params.forward_batch(&batch_matrix(xs, idx, 1.0));
    let (loss, up_raw, up_box) = cache_loss(params, &cache, idx, ys, pos_weight);
    let mut grad = vec![0.0; params.num_params()];
    params.backward_split(&cache, &up_raw, &up_box, &mut grad);
    (loss, grad)
}

/// [`split_loss`] of the scaled model `x ↦ f(r x)` with `r` from `scaling`,
/// and its total gradient: the direct path at `r x_i` plus
/// `(∂loss/∂r)(∂r/∂θ)`.
pub fn scaled_batch_loss_grad(
    params: &IcnnParams,
    region: &ContingencyRegion,
    scaling: &ScalingResult,
    xs: &[Vec<f64>],
    ys: &[bool],
    idx: &[usize],
    pos_weight: f64,
) -> Result<(f64, Vec<f64>)> {
    let cache = params.forward_batch(&batch_matrix(xs, idx, scaling.r));
    let (loss, up_raw, up_box) = cache_loss(params, &cache, idx, ys, pos_weight);
    let mut grad = vec![0.0; params.num_params()];
    let gx = params.backward_split(&cache, &up_raw, &up_box, &mut grad);
    let dl_dr: f64 = idx
        .iter()
        .enumerate()
        .map(|(s, &i)| gx.column(s).iter().zip(&xs[i]).map(|(g, x)| g * x).sum::<f64>())
        .sum();
    if dl_dr != 0.0 {
        let dr = r_gradient(params, region, scaling)?;
        for (g, d) in grad.iter_mut().zip(dr) {
            *g += dl_dr * d;
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Warm,
    Scaling,
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub loss: f64,
    pub lr: f64,
    pub r: Option<f64>,
    pub j_star: Option<usize>,
    pub lp_solves: usize,
    pub val_fpr: f64,
    pub val_fnr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub seconds: f64,
}

impl TrainRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,phase,loss,lr,r,j_star,lp_solves,val_fpr,val_fnr\n");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                e.epoch,
                match e.phase {
                    Phase::Warm => "warm",
                    Phase::Scaling => "scaling",
                    Phase::Standard => "standard",
                },
                e.loss,
                e.lr,
                opt(e.r.map(|r| r.to_string())),
                opt(e.j_star.map(|j| j.to_string())),
                e.lp_solves,
                e.val_fpr,
                e.val_fnr
            ));
        }
        out
    }
}

/// Training state: parameters, optimizer, batch order, scaler and epoch clock.
pub struct Trainer<'a> {
    pub cfg: TrainingConfig,
    pub params: IcnnParams,
    adam: Adam,
    cycler: BatchCycler,
    scaler: FastScaler,
    epoch: usize,
    xs: &'a [Vec<f64>],
    ys: &'a [bool],
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainingConfig, params: IcnnParams, xs: &'a [Vec<f64>], ys: &'a [bool]) -> Result<Self> {
        cfg.validate()?;
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidConfig("training data is empty or misaligned".into()));
        }
        Ok(Self {
            adam: Adam::new(params.num_params()),
            cycler: BatchCycler::new(xs.len(), cfg.seed ^ 0xba7c),
            scaler: FastScaler::new(),
            epoch: 0,
            cfg,
            params,
            xs,
            ys,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn step(&mut self, grad: &[f64]) {
        let lr = self.cfg.lr_at(self.epoch);
        self.adam.step(&mut self.params.theta, grad, lr);
        self.params.project_convex();
    }

    /// One pass of mini-batch descent on the unscaled loss; returns the mean batch loss.
    pub fn warm_epoch(&mut self) -> f64 {
        let batches = self.cycler.batches_per_pass(self.cfg.batch_size);
        let mut total = 0.0;
        for _ in 0..batches {
            let idx = self.cycler.next_batch(self.cfg.batch_size);
            let (loss, grad) = batch_loss_grad(&self.params, self.xs, self.ys, &idx, self.cfg.pos_weight);
            total += loss;
            self.step(&grad);
        }
        self.epoch += 1;
        total / batches as f64
    }

    /// Scales the current model, takes one step on a mini-batch of the scaled
    /// loss and returns the loss with the scaling used.
    pub fn scaling_epoch(&mut self, region: &ContingencyRegion) -> Result<(f64, ScalingResult)> {
        let scaling = self.scaler.scale(&self.params, region)?;
        let idx = self.cycler.next_batch(self.cfg.batch_size);
        let (loss, grad) =
            scaled_batch_loss_grad(&self.params, region, &scaling, self.xs, self.ys, &idx, self.cfg.pos_weight)?;
        self.step(&grad);
        self.epoch += 1;
        Ok((loss, scaling))
    }

    /// LP solves of the last scaling.
    pub fn last_solves(&self) -> usize {
        self.scaler.last_solves
    }

    /// Exact scaling of the current parameters.
    pub fn scale(&mut self, region: &ContingencyRegion) -> Result<ScalingResult> {
        self.scaler.scale(&self.params, region)
    }
}

/// Classifier with the best validation false-positive rate among scaling
/// epochs with zero validation false negatives, and its certificate.
pub struct TrainOutput {
    pub classifier: ScaledClassifier,
    pub record: TrainRecord,
    pub certificate: CertificationReport,
}

pub(crate) fn evaluate(c: &ScaledClassifier, xs: &[Vec<f64>], ys: &[bool]) -> Confusion {
    let pred: Vec<bool> = c.forward_many(xs).iter().map(|f| *f > 0.0).collect();
    Confusion::from_predictions(&pred, ys)
}

/// Runs warm-start and scaling epochs. `progress` receives each epoch record.
pub fn train(
    dataset: &ScreeningDataset,
    region: &ContingencyRegion,
    bbox: &BoundingBox,
    cfg: &TrainingConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutput> {
    let start = Instant::now();
    region.check_dims(dataset.dims())?;
    let tr = dataset.range(Split::Train);
    let va = dataset.range(Split::Val);
    let (xs, ys) = (&dataset.x[tr.clone()], &dataset.infeasible[tr]);
    let (vx, vy) = (&dataset.x[va.clone()], &dataset.infeasible[va]);
    let params = IcnnParams::init(dataset.dims(), &cfg.widths(), bbox.clone(), cfg.box_gain, cfg.seed)?;
    let mut t = Trainer::new(cfg.clone(), params, xs, ys)?;
    let mut record = TrainRecord::default();
    let mut best: Option<(f64, ScaledClassifier)> = None;

    for _ in 0..cfg.warm_epochs {
        let lr = cfg.lr_at(t.epoch());
        let loss = t.warm_epoch();
        let conf = evaluate(&ScaledClassifier::unscaled(t.params.clone()), vx, vy);
        let e = EpochRecord {
            epoch: t.epoch() - 1,
            phase: Phase::Warm,
            loss,
            lr,
            r: None,
            j_star: None,
            lp_solves: 0,
            val_fpr: conf.fpr(),
            val_fnr: conf.fnr(),
        };
        progress(&e);
        record.epochs.push(e);
    }
    for _ in 0..cfg.scaling_epochs {
        let lr = cfg.lr_at(t.epoch());
        let before = t.params.clone();
        let (loss, scaling) = t.scaling_epoch(region)?;
        let scaled = scaling.classifier(&before)?;
        let conf = evaluate(&scaled, vx, vy);
        let e = EpochRecord {
            epoch: t.epoch() - 1,
            phase: Phase::Scaling,
            loss,
            lr,
            r: Some(scaling.r),
            j_star: Some(scaling.j_star),
            lp_solves: t.last_solves(),
            val_fpr: conf.fpr(),
            val_fnr: conf.fnr(),
        };
        if conf.fn_ == 0 && best.as_ref().is_none_or(|(f, _)| conf.fpr() < *f) {
            best = Some((conf.fpr(), scaled));
            record.best_epoch = Some(e.epoch);
        }
        progress(&e);
        record.epochs.push(e);
    }
    let (_, classifier) = best.ok_or(Error::NoReliableEpoch)?;
    let certificate = certify(&classifier, region);
    record.seconds = start.elapsed().as_secs_f64();
    Ok(TrainOutput {
        classifier,
        record,
        certificate,
    })
}
