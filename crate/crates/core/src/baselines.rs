//! Comparison screeners: an unconstrained ReLU network trained on the same
//! protocol and the exhaustive row sweep, behind a common [`Screener`] trait.

use std::time::Instant;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ScreeningDataset, Split};
use crate::error::{Error, Result};
use crate::icnn::{Block, ScaledClassifier};
use crate::region::{BoundingBox, ContingencyRegion};
use crate::training::{split_loss, Adam, BatchCycler, Confusion, EpochRecord, Phase, TrainRecord, TrainingConfig};

/// Feed-forward ReLU network `x ↦ W_k relu(… relu(W_0 x + b_0) …) + b_k`
/// with the same box layer as the convex model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub theta: Vec<f64>,
    pub bbox: BoundingBox,
    pub box_gain: f64,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of every layer.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<DMatrix<f64>>,
    pub raw: Vec<f64>,
    pub violation: Vec<f64>,
    pub output: Vec<f64>,
}

fn view(theta: &[f64], b: Block) -> DMatrixView<'_, f64> {
    DMatrixView::from_slice(&theta[b.range()], b.rows, b.cols)
}

fn view_mut(theta: &mut [f64], b: Block) -> DMatrixViewMut<'_, f64> {
    DMatrixViewMut::from_slice(&mut theta[b.range()], b.rows, b.cols)
}

impl MlpParams {
    /// Uniform fan-in initialization `U(−1/√fan_in, 1/√fan_in)`.
    pub fn init(input_dim: usize, widths: &[usize], bbox: BoundingBox, box_gain: f64, seed: u64) -> Result<Self> {
        if bbox.dims() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                got: bbox.dims(),
            });
        }
        if !(box_gain > 0.0) {
            return Err(Error::InvalidConfig("box_gain must be positive".into()));
        }
        let mut p = Self {
            input_dim,
            widths: widths.to_vec(),
            theta: Vec::new(),
            bbox,
            box_gain,
        };
        let (w, b) = p.blocks();
        let total = b.last().map_or(0, |l| l.offset + l.len());
        p.theta = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (wb, bb) in w.iter().zip(&b) {
            let bound = 1.0 / (wb.cols as f64).sqrt();
            for i in wb.range().chain(bb.range()) {
                p.theta[i] = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// Weight and bias blocks per layer; all weights first, then all biases.
    pub fn blocks(&self) -> (Vec<Block>, Vec<Block>) {
        let k = self.depth();
        let dims = |i: usize| {
            let cols = if i == 0 { self.input_dim } else { self.widths[i - 1] };
            let rows = if i == k { 1 } else { self.widths[i] };
            (rows, cols)
        };
        let mut off = 0;
        let mut w = Vec::with_capacity(k + 1);
        for i in 0..=k {
            let (rows, cols) = dims(i);
            w.push(Block { offset: off, rows, cols });
            off += rows * cols;
        }
        let mut b = Vec::with_capacity(k + 1);
        for i in 0..=k {
            let (rows, _) = dims(i);
            b.push(Block { offset: off, rows, cols: 1 });
            off += rows;
        }
        (w, b)
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    /// Forward pass over the columns of `x` (n × B).
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> MlpCache {
        let (wb, bb) = self.blocks();
        let k = self.depth();
        let mut inputs = vec![x.clone()];
        let mut pre = Vec::with_capacity(k);
        let mut raw = Vec::new();
        for i in 0..=k {
            let mut a = view(&self.theta, wb[i]) * &inputs[i];
            let bias = view(&self.theta, bb[i]);
            for mut col in a.column_iter_mut() {
                col += &bias;
            }
            if i < k {
                inputs.push(a.map(|v| v.max(0.0)));
                pre.push(a);
            } else {
                raw = a.iter().copied().collect();
            }
        }
        let violation: Vec<f64> = x
            .column_iter()
            .map(|c| self.bbox.violation(&c.iter().copied().collect::<Vec<_>>()))
            .collect();
        let output = raw.iter().zip(&violation).map(|(r, v)| r.max(self.box_gain * v)).collect();
        MlpCache {
            inputs,
            pre,
            raw,
            violation,
            output,
        }
    }

    /// Accumulates `Σ_s upstream_s ∂raw(x_s)/∂θ` into `grad`.
    pub fn backward_raw(&self, cache: &MlpCache, upstream: &[f64], grad: &mut [f64]) {
        let (wb, bb) = self.blocks();
        let mut g = DMatrix::from_row_slice(1, upstream.len(), upstream);
        for i in (0..=self.depth()).rev() {
            view_mut(grad, wb[i]).gemm(1.0, &g, &cache.inputs[i].transpose(), 1.0);
            {
                let mut gb = view_mut(grad, bb[i]);
                for col in g.column_iter() {
                    gb += col;
                }
            }
            if i == 0 {
                break;
            }
            let gz = view(&self.theta, wb[i]).transpose() * &g;
            g = gz.zip_map(&cache.pre[i - 1], |a, p| if p > 0.0 { a } else { 0.0 });
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x)).output[0]
    }

    pub fn raw(&self, x: &[f64]) -> f64 {
        self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x)).raw[0]
    }

    pub fn forward_many(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let n = self.input_dim;
        let m = DMatrix::from_fn(n, xs.len(), |q, s| xs[s][q]);
        self.forward_batch(&m).output
    }
}

/// Mean training loss on a batch and its parameter gradient.
pub fn mlp_batch_loss_grad(params: &MlpParams, xs: &[Vec<f64>], ys: &[bool], idx: &[usize], pos_weight: f64) -> (f64, Vec<f64>) {
    let m = DMatrix::from_fn(params.input_dim, idx.len(), |q, s| xs[idx[s]][q]);
    let cache = params.forward_batch(&m);
    let labels: Vec<bool> = idx.iter().map(|&i| ys[i]).collect();
    let (loss, up_raw, _) = split_loss(params.box_gain, &cache.raw, &cache.violation, &labels, pos_weight);
    let mut grad = vec![0.0; params.num_params()];
    params.backward_raw(&cache, &up_raw, &mut grad);
    (loss, grad)
}

/// Trained baseline and its per-epoch record.
#[derive(Debug, Clone)]
pub struct MlpOutput {
    pub params: MlpParams,
    pub record: TrainRecord,
    pub validation: Confusion,
}

fn mlp_confusion(p: &MlpParams, xs: &[Vec<f64>], ys: &[bool]) -> Confusion {
    let pred: Vec<bool> = p.forward_many(xs).iter().map(|f| *f > 0.0).collect();
    Confusion::from_predictions(&pred, ys)
}

/// Runs `warm_epochs + scaling_epochs` full passes of mini-batch Adam with the
/// configured schedule and keeps the epoch with the fewest validation errors.
pub fn train_mlp(
    dataset: &ScreeningDataset,
    bbox: &BoundingBox,
    cfg: &TrainingConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<MlpOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let tr = dataset.range(Split::Train);
    let va = dataset.range(Split::Val);
    let (xs, ys) = (&dataset.x[tr.clone()], &dataset.infeasible[tr]);
    let (vx, vy) = (&dataset.x[va.clone()], &dataset.infeasible[va]);
    if xs.is_empty() {
        return Err(Error::InvalidConfig("training data is empty".into()));
    }
    let mut params = MlpParams::init(dataset.dims(), &cfg.widths(), bbox.clone(), cfg.box_gain, cfg.seed)?;
    let mut adam = Adam::new(params.num_params());
    let mut cycler = BatchCycler::new(xs.len(), cfg.seed ^ 0xba7c);
    let mut record = TrainRecord::default();
    let mut best: Option<(usize, MlpParams, Confusion)> = None;
    for epoch in 0..cfg.warm_epochs + cfg.scaling_epochs {
        let lr = cfg.lr_at(epoch);
        let batches = cycler.batches_per_pass(cfg.batch_size);
        let mut total = 0.0;
        for _ in 0..batches {
            let idx = cycler.next_batch(cfg.batch_size);
            let (loss, grad) = mlp_batch_loss_grad(&params, xs, ys, &idx, cfg.pos_weight);
            total += loss;
            adam.step(&mut params.theta, &grad, lr);
        }
        let conf = mlp_confusion(&params, vx, vy);
        let errors = conf.fp + conf.fn_;
        if best.as_ref().is_none_or(|(e, _, _)| errors < *e) {
            best = Some((errors, params.clone(), conf));
            record.best_epoch = Some(epoch);
        }
        let e = EpochRecord {
            epoch,
            phase: Phase::Standard,
            loss: total / batches as f64,
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
    record.seconds = start.elapsed().as_secs_f64();
    let (_, params, validation) = best.ok_or_else(|| Error::InvalidConfig("no training epochs".into()))?;
    Ok(MlpOutput {
        params,
        record,
        validation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScreenOutcome {
    Feasible,
    Infeasible,
}

/// Exact screening by sweeping the rows of `A x ≤ b`. With `early_exit` the
/// sweep stops at the first violated row.
pub fn exhaustive_screen(region: &ContingencyRegion, x: &[f64], early_exit: bool) -> Result<ScreenOutcome> {
    region.check_dims(x.len())?;
    let b = region.b();
    let mut violated = false;
    for j in 0..region.num_rows() {
        let v: f64 = region.row(j).iter().zip(x).map(|(a, x)| a * x).sum();
        if v > b[j] {
            violated = true;
            if early_exit {
                break;
            }
        }
    }
    Ok(if violated {
        ScreenOutcome::Infeasible
    } else {
        ScreenOutcome::Feasible
    })
}

/// A screening method: `true` marks a sample predicted infeasible.
pub trait Screener: Send + Sync {
    fn name(&self) -> &'static str;
    fn screen(&self, xs: &[Vec<f64>]) -> Result<Vec<bool>>;
}

pub struct IcnnScreener(pub ScaledClassifier);

pub struct MlpScreener(pub MlpParams);

pub struct ExhaustiveScreener {
    pub region: ContingencyRegion,
    pub early_exit: bool,
}

fn check_all(dims: usize, xs: &[Vec<f64>]) -> Result<()> {
    match xs.iter().find(|x| x.len() != dims) {
        Some(x) => Err(Error::DimensionMismatch {
            expected: dims,
            got: x.len(),
        }),
        None => Ok(()),
    }
}

const SCREEN_CHUNK: usize = 256;

impl Screener for IcnnScreener {
    fn name(&self) -> &'static str {
        "icnn"
    }

    fn screen(&self, xs: &[Vec<f64>]) -> Result<Vec<bool>> {
        check_all(self.0.params.input_dim, xs)?;
        Ok(xs
            .par_chunks(SCREEN_CHUNK)
            .flat_map_iter(|c| self.0.forward_many(c).into_iter().map(|f| f > 0.0))
            .collect())
    }
}

impl Screener for MlpScreener {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn screen(&self, xs: &[Vec<f64>]) -> Result<Vec<bool>> {
        check_all(self.0.input_dim, xs)?;
        Ok(xs
            .par_chunks(SCREEN_CHUNK)
            .flat_map_iter(|c| self.0.forward_many(c).into_iter().map(|f| f > 0.0))
            .collect())
    }
}

impl Screener for ExhaustiveScreener {
    fn name(&self) -> &'static str {
        if self.early_exit {
            "exhaustive-early-exit"
        } else {
            "exhaustive"
        }
    }

    fn screen(&self, xs: &[Vec<f64>]) -> Result<Vec<bool>> {
        xs.par_iter()
            .map(|x| exhaustive_screen(&self.region, x, self.early_exit).map(|o| o == ScreenOutcome::Infeasible))
            .collect()
    }
}

pub const SCREENERS: [&str; 4] = ["icnn", "mlp", "exhaustive", "exhaustive-early-exit"];

/// Models a screener may be built from.
#[derive(Default)]
pub struct ScreenerInputs<'a> {
    pub classifier: Option<&'a ScaledClassifier>,
    pub mlp: Option<&'a MlpParams>,
    pub region: Option<&'a ContingencyRegion>,
}

pub fn screener(name: &str, inputs: &ScreenerInputs<'_>) -> Result<Box<dyn Screener>> {
    let missing = |what: &str| Error::InvalidConfig(format!("screener {name} needs {what}"));
    match name {
        "icnn" => Ok(Box::new(IcnnScreener(inputs.classifier.ok_or_else(|| missing("a classifier"))?.clone()))),
        "mlp" => Ok(Box::new(MlpScreener(inputs.mlp.ok_or_else(|| missing("an MLP"))?.clone()))),
        "exhaustive" | "exhaustive-early-exit" => Ok(Box::new(ExhaustiveScreener {
            region: inputs.region.ok_or_else(|| missing("a region"))?.clone(),
            early_exit: name == "exhaustive-early-exit",
        })),
        _ => Err(Error::UnknownStrategy {
            kind: "screener",
            name: name.into(),
        }),
    }
}

/// Wall-clock and confusion of one screener on labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub method: String,
    pub seconds: f64,
    pub confusion: Confusion,
    pub fnr: f64,
    pub fpr: f64,
}

pub fn run_screen(s: &dyn Screener, xs: &[Vec<f64>], labels: &[bool]) -> Result<ScreenReport> {
    let t = Instant::now();
    let pred = s.screen(xs)?;
    let seconds = t.elapsed().as_secs_f64();
    let confusion = Confusion::from_predictions(&pred, labels);
    Ok(ScreenReport {
        method: s.name().into(),
        seconds,
        fnr: confusion.fnr(),
        fpr: confusion.fpr(),
        confusion,
    })
}
