//! Input-convex network with a bounding-box output layer.
//!
//! With hidden layers `z_1 … z_k`:
//!
//! ```text
//! z_1     = relu(D_1 x + b_1)
//! z_{i+1} = relu(W_i z_i + D_{i+1} x + b_{i+1})
//! raw     = W_k z_k + D_{k+1} x + b_{k+1}
//! f(x)    = max(raw, gain · box_violation(x))
//! ```
//!
//! Every `W_i` is kept nonnegative, so `raw` is convex and nondecreasing in
//! each `z_i`. The box term makes `f` positive outside the box.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::BoundingBox;

pub const DEFAULT_BOX_GAIN: f64 = 10.0;

/// Location of one matrix inside the flat parameter vector (column-major).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    /// Flat index of entry `(r, c)`.
    pub fn at(&self, r: usize, c: usize) -> usize {
        self.offset + c * self.rows + r
    }
}

/// Parameter layout: all `W`, then all `D`, then all biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    /// `w[i]` maps hidden layer `i` to layer `i + 1` (the output for the last).
    pub w: Vec<Block>,
    /// `d[i]` feeds the input into layer `i`; `d[k]` feeds the output.
    pub d: Vec<Block>,
    pub b: Vec<Block>,
    pub total: usize,
}

impl Layout {
    pub fn new(input_dim: usize, widths: &[usize]) -> Self {
        let k = widths.len();
        let out_rows = |i: usize| if i + 1 < k { widths[i + 1] } else { 1 };
        let layer_rows = |i: usize| if i < k { widths[i] } else { 1 };
        let mut offset = 0;
        let mut take = |rows: usize, cols: usize| {
            let b = Block { offset, rows, cols };
            offset += rows * cols;
            b
        };
        let w = (0..k).map(|i| take(out_rows(i), widths[i])).collect();
        let d = (0..=k).map(|i| take(layer_rows(i), input_dim)).collect();
        let b = (0..=k).map(|i| take(layer_rows(i), 1)).collect();
        Self {
            input_dim,
            widths: widths.to_vec(),
            w,
            d,
            b,
            total: offset,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    /// Flat range holding the nonnegative weights.
    pub fn w_range(&self) -> std::ops::Range<usize> {
        match (self.w.first(), self.w.last()) {
            (Some(f), Some(l)) => f.offset..l.offset + l.len(),
            _ => 0..0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcnnParams {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub theta: Vec<f64>,
    pub bbox: BoundingBox,
    pub box_gain: f64,
}

/// Activations kept from a batched forward pass (samples are columns).
pub struct ForwardCache {
    x: DMatrix<f64>,
    pre: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    pub raw: Vec<f64>,
    /// Per sample: the largest signed box violation with its dimension and sign.
    viol: Vec<(f64, usize, f64)>,
    /// Per sample: the dimension/sign of the box term, when it wins.
    box_win: Vec<Option<(usize, f64)>>,
    pub output: Vec<f64>,
}

impl ForwardCache {
    /// Per sample: the largest signed box violation `max_i max(l_i − x_i, x_i − u_i)`.
    pub fn box_violation(&self) -> Vec<f64> {
        self.viol.iter().map(|v| v.0).collect()
    }
}

fn view(theta: &[f64], b: Block) -> DMatrixView<'_, f64> {
    DMatrixView::from_slice(&theta[b.range()], b.rows, b.cols)
}

fn view_mut(theta: &mut [f64], b: Block) -> DMatrixViewMut<'_, f64> {
    DMatrixViewMut::from_slice(&mut theta[b.range()], b.rows, b.cols)
}

impl IcnnParams {
    /// Zero parameters.
    pub fn zeros(input_dim: usize, widths: &[usize], bbox: BoundingBox, box_gain: f64) -> Result<Self> {
        if bbox.dims() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                got: bbox.dims(),
            });
        }
        if !(box_gain > 0.0) {
            return Err(Error::InvalidConfig("box_gain must be positive".into()));
        }
        let layout = Layout::new(input_dim, widths);
        Ok(Self {
            input_dim,
            widths: widths.to_vec(),
            theta: vec![0.0; layout.total],
            bbox,
            box_gain,
        })
    }

    /// Uniform fan-in initialization; `W` entries take absolute values.
    pub fn init(input_dim: usize, widths: &[usize], bbox: BoundingBox, box_gain: f64, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(input_dim, widths, bbox, box_gain)?;
        let layout = p.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = layout.depth();
        for i in 0..=k {
            let fan_in = input_dim + if i > 0 { widths[i - 1] } else { 0 };
            let bound = 1.0 / (fan_in as f64).sqrt();
            if i > 0 {
                for t in layout.w[i - 1].range() {
                    p.theta[t] = rng.random_range(-bound..bound).abs();
                }
            }
            for t in layout.d[i].range().chain(layout.b[i].range()) {
                p.theta[t] = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.input_dim, &self.widths)
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    /// Clips every `W` entry to be nonnegative.
    pub fn project_convex(&mut self) {
        let r = self.layout().w_range();
        for v in &mut self.theta[r] {
            *v = v.max(0.0);
        }
    }

    pub fn is_convex(&self) -> bool {
        self.theta[self.layout().w_range()].iter().all(|v| *v >= 0.0)
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x)).output[0]
    }

    /// Network output without the box term.
    pub fn raw(&self, x: &[f64]) -> f64 {
        self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x)).raw[0]
    }

    /// Feasible iff the output is at most zero.
    /// Hidden activations at `x`, layer by layer.
    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let cache = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x));
        cache.z.iter().flat_map(|z| z.iter().copied()).collect()
    }

    pub fn classify_feasible(&self, x: &[f64]) -> bool {
        self.forward(x) <= 0.0
    }

    /// Forward pass over the columns of `x`.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> ForwardCache {
        let layout = self.layout();
        let k = layout.depth();
        let ns = x.ncols();
        let mut pre = Vec::with_capacity(k);
        let mut z: Vec<DMatrix<f64>> = Vec::with_capacity(k);
        for i in 0..=k {
            let mut a = view(&self.theta, layout.d[i]) * x;
            if i > 0 {
                a += view(&self.theta, layout.w[i - 1]) * &z[i - 1];
            }
            let bias = view(&self.theta, layout.b[i]);
            for mut col in a.column_iter_mut() {
                col += &bias;
            }
            if i < k {
                z.push(a.map(|v| v.max(0.0)));
                pre.push(a);
            } else {
                pre.push(a);
            }
        }
        let raw: Vec<f64> = pre.pop().expect("output layer").iter().copied().collect();
        let mut viol = Vec::with_capacity(ns);
        let mut box_win = Vec::with_capacity(ns);
        let mut output = Vec::with_capacity(ns);
        for s in 0..ns {
            let mut best = (f64::NEG_INFINITY, 0usize, 0.0);
            for i in 0..self.input_dim {
                let lo = self.bbox.lower[i] - x[(i, s)];
                let hi = x[(i, s)] - self.bbox.upper[i];
                if lo > best.0 {
                    best = (lo, i, -1.0);
                }
                if hi > best.0 {
                    best = (hi, i, 1.0);
                }
            }
            viol.push(best);
            let term = self.box_gain * best.0;
            if term > raw[s] {
                box_win.push(Some((best.1, best.2)));
                output.push(term);
            } else {
                box_win.push(None);
                output.push(raw[s]);
            }
        }
        ForwardCache {
            x: x.clone(),
            pre,
            z,
            raw,
            viol,
            box_win,
            output,
        }
    }

    /// Accumulates `Σ_s upstream_s ∂f(x_s)/∂θ` into `grad` and returns
    /// `upstream_s ∇_x f(x_s)` as the columns of a matrix. ReLU kinks take
    /// derivative 0.
    pub fn backward_batch(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) -> DMatrix<f64> {
        let (up_raw, up_box): (Vec<f64>, Vec<f64>) = upstream
            .iter()
            .zip(&cache.box_win)
            .map(|(&u, w)| if w.is_some() { (0.0, u) } else { (u, 0.0) })
            .unzip();
        self.backward_split(cache, &up_raw, &up_box, grad)
    }

    /// Accumulates `Σ_s up_raw_s ∂raw(x_s)/∂θ` into `grad` and returns the
    /// columns `up_raw_s ∇_x raw(x_s) + up_box_s ∇_x (box_gain · violation(x_s))`.
    pub fn backward_split(&self, cache: &ForwardCache, up_raw: &[f64], up_box: &[f64], grad: &mut [f64]) -> DMatrix<f64> {
        let layout = self.layout();
        let k = layout.depth();
        let ns = cache.x.ncols();
        let mut gx = DMatrix::zeros(self.input_dim, ns);
        for s in 0..ns {
            let (_, i, sign) = cache.viol[s];
            gx[(i, s)] += up_box[s] * self.box_gain * sign;
        }
        let g_out = DMatrix::from_row_slice(1, ns, up_raw);
        let mut g = g_out;
        for i in (0..=k).rev() {
            view_mut(grad, layout.d[i]).gemm(1.0, &g, &cache.x.transpose(), 1.0);
            {
                let mut gb = view_mut(grad, layout.b[i]);
                for col in g.column_iter() {
                    gb += col;
                }
            }
            gx.gemm(1.0, &view(&self.theta, layout.d[i]).transpose(), &g, 1.0);
            if i == 0 {
                break;
            }
            view_mut(grad, layout.w[i - 1]).gemm(1.0, &g, &cache.z[i - 1].transpose(), 1.0);
            let gz = view(&self.theta, layout.w[i - 1]).transpose() * &g;
            let pre = &cache.pre[i - 1];
            g = gz.zip_map(pre, |a, p| if p > 0.0 { a } else { 0.0 });
        }
        gx
    }

    /// Gradient of `f(x)` with respect to all parameters.
    pub fn param_gradient(&self, x: &[f64]) -> Vec<f64> {
        let cache = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x));
        let mut grad = vec![0.0; self.num_params()];
        self.backward_batch(&cache, &[1.0], &mut grad);
        grad
    }

    /// Gradient of `f(x)` with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        let cache = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x));
        let mut grad = vec![0.0; self.num_params()];
        self.backward_batch(&cache, &[1.0], &mut grad).iter().copied().collect()
    }
}

/// Classifier `x ↦ f(r x + v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledClassifier {
    pub params: IcnnParams,
    pub r: f64,
    pub v: Vec<f64>,
}

impl ScaledClassifier {
    pub fn new(params: IcnnParams, r: f64, v: Vec<f64>) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::DegenerateRatio(r));
        }
        if v.len() != params.input_dim {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim,
                got: v.len(),
            });
        }
        Ok(Self { params, r, v })
    }

    pub fn unscaled(params: IcnnParams) -> Self {
        let n = params.input_dim;
        Self {
            params,
            r: 1.0,
            v: vec![0.0; n],
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.v).map(|(a, b)| self.r * a + b).collect()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.params.forward(&self.transform(x))
    }

    pub fn classify_feasible(&self, x: &[f64]) -> bool {
        self.forward(x) <= 0.0
    }

    /// Outputs for many samples at once.
    pub fn forward_many(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let n = self.params.input_dim;
        let m = DMatrix::from_fn(n, xs.len(), |i, s| self.r * xs[s][i] + self.v[i]);
        self.params.forward_batch(&m).output
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-contained deployable classifier: network, scaling and standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub classifier: ScaledClassifier,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Bus index of each input dimension.
    pub dim_map: Vec<usize>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported checkpoint version {}", c.version)));
        }
        let p = &c.classifier.params;
        if Layout::new(p.input_dim, &p.widths).total != p.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: Layout::new(p.input_dim, &p.widths).total,
                got: p.theta.len(),
            });
        }
        Ok(c)
    }
}
