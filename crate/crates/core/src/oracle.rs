//! Linear programs over the 0-sublevel set of an input-convex network:
//! support functions, reliability certificates, scaling and the gradient of
//! the scaling ratio.
//!
//! Because every `W_i ≥ 0`, the network output is nondecreasing in each hidden
//! unit, so replacing `z_i = relu(·)` by the epigraph rows `z_i ≥ ·`, `z_i ≥ 0`
//! leaves the projection of `{raw ≤ 0}` onto the input unchanged.

use std::time::Instant;

use nkscreen_lp::{dot, solve, ActiveSetSolver, LpProblem, LpSolution, LpStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icnn::{IcnnParams, ScaledClassifier};
use crate::region::ContingencyRegion;

/// Smallest admissible scaling ratio.
pub const R_MIN: f64 = 1e-6;
/// Certification tolerance, relative to `1 + |b_j|`.
pub const TOL_CERT: f64 = 1e-6;

/// Network input as an affine function of LP variables: `x_q = Σ s·u_j + shift_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineInput {
    pub terms: Vec<Vec<(usize, f64)>>,
    pub shift: Vec<f64>,
}

impl AffineInput {
    pub fn identity(n: usize) -> Self {
        Self::scaled(1.0, &vec![0.0; n])
    }

    /// `x = r u + v`.
    pub fn scaled(r: f64, v: &[f64]) -> Self {
        Self {
            terms: (0..v.len()).map(|q| vec![(q, r)]).collect(),
            shift: v.to_vec(),
        }
    }

    pub fn dims(&self) -> usize {
        self.shift.len()
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.terms
            .iter()
            .zip(&self.shift)
            .map(|(t, c)| c + t.iter().map(|&(j, s)| s * u[j]).sum::<f64>())
            .collect()
    }
}

/// Where the encoding placed its variables and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    /// Index of the first variable of each hidden layer.
    pub z_start: Vec<usize>,
    /// Row of neuron 0 of the first hidden layer; hidden rows follow in layer order.
    pub hidden_rows: usize,
    /// `None` when the output expression is a nonpositive constant.
    pub output_row: Option<usize>,
}

/// Adds the sublevel rows of `params` to `lp`, hidden units occupying the
/// variables from `z_offset` on. Box constraints on single-term inputs become
/// variable bounds.
pub fn encode_sublevel(params: &IcnnParams, input: &AffineInput, z_offset: usize, lp: &mut LpProblem) -> Result<Encoding> {
    let n = params.input_dim;
    if input.dims() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: input.dims(),
        });
    }
    let layout = params.layout();
    let k = layout.depth();
    let nv = lp.num_vars();
    let nz: usize = params.widths.iter().sum();
    if z_offset + nz > nv {
        return Err(Error::DimensionMismatch {
            expected: z_offset + nz,
            got: nv,
        });
    }
    let theta = &params.theta;
    let mut z_start = Vec::with_capacity(k);
    let mut off = z_offset;
    for &w in &params.widths {
        z_start.push(off);
        off += w;
    }
    for j in z_offset..z_offset + nz {
        lp.set_bounds(j, 0.0, f64::INFINITY)?;
    }

    // coefficients and constant of W_{i-1} z_{i-1} + D_i x + b_i for row p
    let affine_row = |i: usize, p: usize| -> (Vec<f64>, f64) {
        let mut c = vec![0.0; nv];
        let mut k0 = theta[layout.b[i].at(p, 0)];
        for q in 0..n {
            let d = theta[layout.d[i].at(p, q)];
            if d == 0.0 {
                continue;
            }
            for &(j, s) in &input.terms[q] {
                c[j] += d * s;
            }
            k0 += d * input.shift[q];
        }
        if i > 0 {
            for s in 0..params.widths[i - 1] {
                c[z_start[i - 1] + s] += theta[layout.w[i - 1].at(p, s)];
            }
        }
        (c, k0)
    };

    let hidden_rows = lp.num_constraints();
    for i in 0..k {
        for p in 0..params.widths[i] {
            let (mut c, k0) = affine_row(i, p);
            c[z_start[i] + p] -= 1.0;
            lp.add_le(c, -k0)?;
        }
    }
    let (c, k0) = affine_row(k, 0);
    let output_row = if c.iter().all(|v| *v == 0.0) {
        if k0 > 0.0 {
            return Err(Error::EmptyPredictedSet);
        }
        None
    } else {
        Some(lp.add_le(c, -k0)?)
    };

    for q in 0..n {
        let (lo, hi) = (params.bbox.lower[q] - input.shift[q], params.bbox.upper[q] - input.shift[q]);
        let terms: Vec<(usize, f64)> = input.terms[q].iter().copied().filter(|t| t.1 != 0.0).collect();
        match terms.as_slice() {
            [] => {
                if lo > 0.0 || hi < 0.0 {
                    return Err(Error::EmptyPredictedSet);
                }
            }
            [(j, s)] => {
                let (a, b) = if *s > 0.0 { (lo / s, hi / s) } else { (hi / s, lo / s) };
                let (l0, u0) = (lp.lower()[*j], lp.upper()[*j]);
                lp.set_bounds(*j, l0.max(a), u0.min(b))?;
            }
            _ => {
                let mut c = vec![0.0; nv];
                for &(j, s) in &terms {
                    c[j] += s;
                }
                let neg: Vec<f64> = c.iter().map(|v| -v).collect();
                lp.add_le(c, hi)?;
                lp.add_le(neg, -lo)?;
            }
        }
    }
    Ok(Encoding {
        z_start,
        hidden_rows,
        output_row,
    })
}

/// Optimum of `max a·x` over the sublevel set.
#[derive(Debug, Clone, PartialEq)]
pub struct SublevelMaxResult {
    pub value: f64,
    pub x: Vec<f64>,
    /// Hidden-unit values at the optimum, layer by layer.
    pub z: Vec<f64>,
    /// Multipliers of all LP rows (hidden rows, then the output row).
    pub duals: Vec<f64>,
}

/// Warm-started program maximizing linear functionals over
/// `{u : f(input(u)) ≤ 0}`, with `u` the first `n_outer` variables.
pub struct SublevelProgram {
    solver: ActiveSetSolver,
    n_outer: usize,
    nv: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    encoding: Encoding,
    objective: Vec<f64>,
}

impl SublevelProgram {
    pub fn new(params: &IcnnParams) -> Result<Self> {
        Self::with_input(params, &AffineInput::identity(params.input_dim), params.input_dim)
    }

    /// Program over the sublevel set of `x ↦ f(r x + v)`.
    pub fn scaled(c: &ScaledClassifier) -> Result<Self> {
        Self::with_input(&c.params, &AffineInput::scaled(c.r, &c.v), c.params.input_dim)
    }

    pub fn with_input(params: &IcnnParams, input: &AffineInput, n_outer: usize) -> Result<Self> {
        let nz: usize = params.widths.iter().sum();
        let nv = n_outer + nz;
        let mut lp = LpProblem::new(vec![0.0; nv]);
        for j in 0..n_outer {
            lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY)?;
        }
        let encoding = encode_sublevel(params, input, n_outer, &mut lp)?;
        let lower = lp.lower().to_vec();
        let upper = lp.upper().to_vec();
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::EmptyPredictedSet);
        }
        Ok(Self {
            solver: ActiveSetSolver::new(&lp)?,
            n_outer,
            nv,
            lower,
            upper,
            encoding,
            objective: vec![0.0; nv],
        })
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    /// Upper bound on `max a·u` from the variable bounds alone.
    pub fn bound(&self, a: &[f64]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(j, &c)| {
                if c > 0.0 {
                    c * self.upper[j]
                } else if c < 0.0 {
                    c * self.lower[j]
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn maximize(&mut self, a: &[f64]) -> Result<SublevelMaxResult> {
        if a.len() != self.n_outer {
            return Err(Error::DimensionMismatch {
                expected: self.n_outer,
                got: a.len(),
            });
        }
        if a.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        self.objective[..self.n_outer].copy_from_slice(a);
        self.solver.set_objective(&self.objective)?;
        let sol = self.solver.solve()?;
        self.result(sol)
    }

    fn result(&self, sol: LpSolution) -> Result<SublevelMaxResult> {
        match sol.status {
            LpStatus::Infeasible => Err(Error::EmptyPredictedSet),
            LpStatus::Unbounded => Err(Error::UnboundedSublevel),
            LpStatus::Optimal => Ok(SublevelMaxResult {
                value: sol.objective_value,
                x: sol.primal[..self.n_outer].to_vec(),
                z: sol.primal[self.n_outer..self.nv].to_vec(),
                duals: sol.duals,
            }),
        }
    }
}

/// `max a·x` subject to `f(x) ≤ 0`.
pub fn sublevel_max(params: &IcnnParams, a: &[f64]) -> Result<SublevelMaxResult> {
    SublevelProgram::new(params)?.maximize(a)
}

/// Value of `max a_j·x` per row; `None` where the box bound already falls
/// below `skip_below(j)`.
fn sweep<F>(build: &F, region: &ContingencyRegion, order: &[usize], skip_below: &(dyn Fn(usize, f64) -> bool + Sync)) -> Result<Vec<Option<f64>>>
where
    F: Fn() -> Result<SublevelProgram> + Sync,
{
    let chunks = rayon::current_num_threads().max(1);
    let size = order.len().div_ceil(chunks).max(1);
    let parts: Vec<Vec<(usize, Option<f64>)>> = order
        .par_chunks(size)
        .map(|part| -> Result<Vec<(usize, Option<f64>)>> {
            let mut prog = build()?;
            let mut out = Vec::with_capacity(part.len());
            for &j in part {
                let a = region.row(j);
                if skip_below(j, prog.bound(a)) {
                    out.push((j, None));
                } else {
                    out.push((j, Some(prog.maximize(a)?.value)));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut z = vec![None; region.num_rows()];
    for (j, v) in parts.into_iter().flatten() {
        z[j] = v;
    }
    Ok(z)
}

/// Row values `max a_j·x` over the sublevel set of `params`, all solved.
pub fn support_values(params: &IcnnParams, region: &ContingencyRegion) -> Result<Vec<f64>> {
    region.check_dims(params.input_dim)?;
    let order: Vec<usize> = (0..region.num_rows()).collect();
    let z = sweep(&|| SublevelProgram::new(params), region, &order, &|_, _| false)?;
    Ok(z.into_iter().map(|v| v.expect("solved")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCheck {
    pub row: usize,
    /// LP optimum, or the box bound when that alone settles the row.
    pub z: f64,
    pub b: f64,
    pub solved: bool,
}

impl RowCheck {
    pub fn margin(&self) -> f64 {
        self.b - self.z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Reliable,
    Violations(Vec<RowCheck>),
    Unknown(String),
}

/// Per-row containment certificate of a scaled classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub verdict: Verdict,
    pub rows: Vec<RowCheck>,
    pub seconds: f64,
}

impl CertificationReport {
    pub fn is_reliable(&self) -> bool {
        self.verdict == Verdict::Reliable
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn cert_slack(b: f64) -> f64 {
    TOL_CERT * (1.0 + b.abs())
}

/// Reliable iff `max a_j·x ≤ b_j` over the predicted-feasible set for every row.
/// Solver failures yield `Unknown`.
pub fn certify(classifier: &ScaledClassifier, region: &ContingencyRegion) -> CertificationReport {
    let start = Instant::now();
    let unknown = |msg: String| CertificationReport {
        verdict: Verdict::Unknown(msg),
        rows: Vec::new(),
        seconds: start.elapsed().as_secs_f64(),
    };
    if let Err(e) = region.check_dims(classifier.params.input_dim) {
        return unknown(e.to_string());
    }
    let b = region.b();
    let order: Vec<usize> = (0..region.num_rows()).collect();
    let z = match sweep(&|| SublevelProgram::scaled(classifier), region, &order, &|j, bound| {
        bound <= b[j] + cert_slack(b[j])
    }) {
        Ok(z) => z,
        Err(Error::EmptyPredictedSet) => {
            return CertificationReport {
                verdict: Verdict::Reliable,
                rows: Vec::new(),
                seconds: start.elapsed().as_secs_f64(),
            }
        }
        Err(e) => return unknown(e.to_string()),
    };
    let prog = match SublevelProgram::scaled(classifier) {
        Ok(p) => p,
        Err(e) => return unknown(e.to_string()),
    };
    let rows: Vec<RowCheck> = z
        .iter()
        .enumerate()
        .map(|(j, v)| RowCheck {
            row: j,
            z: v.unwrap_or_else(|| prog.bound(region.row(j))),
            b: b[j],
            solved: v.is_some(),
        })
        .collect();
    let bad: Vec<RowCheck> = rows.iter().filter(|r| r.z > r.b + cert_slack(r.b)).cloned().collect();
    CertificationReport {
        verdict: if bad.is_empty() { Verdict::Reliable } else { Verdict::Violations(bad) },
        rows,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Scaling that makes `x ↦ f(r x + v)` contained in the region.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    /// `max a_j·x` over the unscaled sublevel set; the box bound where `solved[j]` is false.
    pub z: Vec<f64>,
    pub solved: Vec<bool>,
    pub j_star: usize,
    pub r: f64,
    pub v: Vec<f64>,
    /// Optimum of row `j*` (with LP multipliers), when available.
    pub at_j_star: Option<SublevelMaxResult>,
}

impl ScalingResult {
    pub fn classifier(&self, params: &IcnnParams) -> Result<ScaledClassifier> {
        ScaledClassifier::new(params.clone(), self.r, self.v.clone())
    }
}

/// Index of the largest `z_j / b_j`, lowest index on ties.
pub fn argmax_ratio(z: &[f64], b: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, (zj, bj)) in z.iter().zip(b).enumerate() {
        let ratio = zj / bj;
        if ratio > best.1 {
            best = (j, ratio);
        }
    }
    best
}

/// Minimal `r` (and `v` when `translate`) with `z_j ≤ a_j·v + b_j r` for all rows.
pub fn scale_full(params: &IcnnParams, region: &ContingencyRegion, translate: bool) -> Result<ScalingResult> {
    let z = support_values(params, region)?;
    let n = region.dims();
    let mut lp = LpProblem::new(std::iter::once(-1.0).chain(std::iter::repeat_n(0.0, n)).collect());
    lp.set_bounds(0, 0.0, f64::INFINITY)?;
    for q in 0..n {
        let (lo, hi) = if translate { (f64::NEG_INFINITY, f64::INFINITY) } else { (0.0, 0.0) };
        lp.set_bounds(q + 1, lo, hi)?;
    }
    for (j, zj) in z.iter().enumerate() {
        let row: Vec<f64> = std::iter::once(-region.b()[j]).chain(region.row(j).iter().map(|a| -a)).collect();
        lp.add_le(row, -zj)?;
    }
    let sol = solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::ScalingInfeasible);
    }
    let r = sol.primal[0];
    if r <= R_MIN {
        return Err(Error::DegenerateRatio(r));
    }
    let v = sol.primal[1..].to_vec();
    let shifted: Vec<f64> = (0..z.len()).map(|j| z[j] - dot(region.row(j), &v)).collect();
    let (j_star, _) = argmax_ratio(&shifted, region.b());
    Ok(ScalingResult {
        solved: vec![true; z.len()],
        z,
        j_star,
        r,
        v,
        at_j_star: None,
    })
}

/// Interval upper bounds of every hidden unit over the box, layer by layer.
pub fn hidden_upper_bounds(params: &IcnnParams) -> Vec<f64> {
    hidden_upper_bounds_over(params, &params.bbox.lower, &params.bbox.upper)
}

/// Interval upper bounds of every hidden unit for inputs in `[lo, hi]`.
pub fn hidden_upper_bounds_over(params: &IcnnParams, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let layout = params.layout();
    let theta = &params.theta;
    let mut out: Vec<f64> = Vec::new();
    let mut prev: Vec<f64> = Vec::new();
    for (i, &w) in params.widths.iter().enumerate() {
        let cur: Vec<f64> = (0..w)
            .map(|p| {
                let mut v = theta[layout.b[i].at(p, 0)];
                for q in 0..params.input_dim {
                    let d = theta[layout.d[i].at(p, q)];
                    v += (d * lo[q]).max(d * hi[q]);
                }
                if i > 0 {
                    for (s, u) in prev.iter().enumerate() {
                        v += theta[layout.w[i - 1].at(p, s)] * u;
                    }
                }
                v.max(0.0)
            })
            .collect();
        out.extend_from_slice(&cur);
        prev = cur;
    }
    out
}

/// Weak-duality bounds `max c·u ≤ yᵀh + Σ_j max((c − Gᵀy)_j · [l_j, u_j])` for
/// the sublevel program, valid for any `y ≥ 0`.
struct LagrangeBounds {
    g: Vec<Vec<f64>>,
    h: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LagrangeBounds {
    fn new(params: &IcnnParams) -> Result<Self> {
        let n = params.input_dim;
        let nz: usize = params.widths.iter().sum();
        let mut lp = LpProblem::new(vec![0.0; n + nz]);
        for j in 0..n {
            lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY)?;
        }
        encode_sublevel(params, &AffineInput::identity(n), n, &mut lp)?;
        let mut upper = lp.upper().to_vec();
        for (u, zb) in upper[n..].iter_mut().zip(hidden_upper_bounds(params)) {
            *u = u.min(zb);
        }
        Ok(Self {
            g: lp.constraints().iter().map(|c| c.coeffs.clone()).collect(),
            h: lp.constraints().iter().map(|c| c.rhs).collect(),
            lower: lp.lower().to_vec(),
            upper,
        })
    }

    fn bound(&self, a: &[f64], y: &[f64]) -> f64 {
        if y.len() != self.h.len() {
            return f64::INFINITY;
        }
        let mut c: Vec<f64> = a.to_vec();
        c.resize(self.lower.len(), 0.0);
        let mut total = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            if yi <= 0.0 {
                continue;
            }
            total += yi * self.h[i];
            for (cj, gij) in c.iter_mut().zip(&self.g[i]) {
                *cj -= yi * gij;
            }
        }
        for (j, cj) in c.iter().enumerate() {
            total += if *cj > 0.0 {
                cj * self.upper[j]
            } else if *cj < 0.0 {
                cj * self.lower[j]
            } else {
                0.0
            };
        }
        total + 1e-9 * (1.0 + total.abs())
    }
}

/// Exact `r = max_j z_j / b_j` with `v = 0`, reusing row multipliers across
/// calls. Rows are visited in decreasing order of an upper bound on their
/// ratio (the box bound, or a weak-duality bound from the multipliers of the
/// previous call); a row is solved only while its bound can still beat the
/// running maximum, so `r` and `j*` are exact.
#[derive(Debug, Clone, Default)]
pub struct FastScaler {
    duals: Vec<Option<Vec<f64>>>,
    /// LP solves performed by the last call.
    pub last_solves: usize,
}

impl FastScaler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scale(&mut self, params: &IcnnParams, region: &ContingencyRegion) -> Result<ScalingResult> {
        region.check_dims(params.input_dim)?;
        let m = region.num_rows();
        if self.duals.len() != m {
            self.duals = vec![None; m];
        }
        let b = region.b();
        let mut prog = SublevelProgram::new(params)?;
        let lagrange = LagrangeBounds::new(params)?;
        let mut z: Vec<f64> = (0..m)
            .map(|j| {
                let a = region.row(j);
                let boxb = prog.bound(a);
                match &self.duals[j] {
                    Some(y) => lagrange.bound(a, y).min(boxb),
                    None => boxb,
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| (z[j] / b[j]).total_cmp(&(z[i] / b[i])).then(i.cmp(&j)));
        let mut solved = vec![false; m];
        let mut best: Option<(usize, f64, SublevelMaxResult)> = None;
        self.last_solves = 0;
        for &j in &order {
            let ub = z[j] / b[j];
            if let Some((bj, br, _)) = &best {
                if ub < *br {
                    break;
                }
                if ub == *br && j > *bj {
                    continue;
                }
            }
            let res = prog.maximize(region.row(j))?;
            self.last_solves += 1;
            z[j] = res.value;
            solved[j] = true;
            self.duals[j] = Some(res.duals.clone());
            let ratio = res.value / b[j];
            let better = match &best {
                None => true,
                Some((bj, br, _)) => ratio > *br || (ratio == *br && j < *bj),
            };
            if better {
                best = Some((j, ratio, res));
            }
        }
        let (j_star, r, at) = best.ok_or(Error::EmptyRegion)?;
        if r <= R_MIN {
            return Err(Error::DegenerateRatio(r));
        }
        Ok(ScalingResult {
            z,
            solved,
            j_star,
            r,
            v: vec![0.0; params.input_dim],
            at_j_star: Some(at),
        })
    }
}

/// One-off [`FastScaler::scale`].
pub fn scale_fast(params: &IcnnParams, region: &ContingencyRegion) -> Result<ScalingResult> {
    FastScaler::new().scale(params, region)
}

/// Gradient of `r = z_{j*} / b_{j*}` with respect to every network parameter,
/// from the LP multipliers at the optimum of row `j*`: for a row
/// `g(θ)·u ≤ h(θ)` with multiplier `μ`, the optimal value moves by
/// `μ (∂h/∂θ − ∂g/∂θ · u*)`.
pub fn r_gradient(params: &IcnnParams, region: &ContingencyRegion, scaling: &ScalingResult) -> Result<Vec<f64>> {
    let at = match &scaling.at_j_star {
        Some(at) => at,
        None => &SublevelProgram::new(params)?.maximize(region.row(scaling.j_star))?,
    };
    let layout = params.layout();
    let k = layout.depth();
    let n = params.input_dim;
    let mut grad = vec![0.0; params.num_params()];
    let mut z_start = Vec::with_capacity(k);
    let mut off = 0;
    for &w in &params.widths {
        z_start.push(off);
        off += w;
    }
    let mut add_row = |i: usize, p: usize, mu: f64| {
        if mu == 0.0 {
            return;
        }
        grad[layout.b[i].at(p, 0)] -= mu;
        for q in 0..n {
            grad[layout.d[i].at(p, q)] -= mu * at.x[q];
        }
        if i > 0 {
            for s in 0..params.widths[i - 1] {
                grad[layout.w[i - 1].at(p, s)] -= mu * at.z[z_start[i - 1] + s];
            }
        }
    };
    let mut row = 0;
    for i in 0..k {
        for p in 0..params.widths[i] {
            add_row(i, p, at.duals[row]);
            row += 1;
        }
    }
    if row < at.duals.len() {
        add_row(k, 0, at.duals[row]);
    }
    let bj = region.b()[scaling.j_star];
    for g in &mut grad {
        *g /= bj;
    }
    Ok(grad)
}

/// Interchangeable scaling procedures.
pub trait ScalingStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn scale(&self, params: &IcnnParams, region: &ContingencyRegion) -> Result<ScalingResult>;
}

/// Scaling and translation from one LP over all row optima.
pub struct FullScaling;

/// Ratio of the single most binding row.
pub struct FastScaling;

impl ScalingStrategy for FullScaling {
    fn name(&self) -> &'static str {
        "full"
    }

    fn scale(&self, params: &IcnnParams, region: &ContingencyRegion) -> Result<ScalingResult> {
        scale_full(params, region, true)
    }
}

impl ScalingStrategy for FastScaling {
    fn name(&self) -> &'static str {
        "fast"
    }

    fn scale(&self, params: &IcnnParams, region: &ContingencyRegion) -> Result<ScalingResult> {
        scale_fast(params, region)
    }
}

pub const SCALING_STRATEGIES: [&str; 2] = ["full", "fast"];

pub fn scaling_strategy(name: &str) -> Result<Box<dyn ScalingStrategy>> {
    match name {
        "full" => Ok(Box::new(FullScaling)),
        "fast" => Ok(Box::new(FastScaling)),
        _ => Err(Error::UnknownStrategy {
            kind: "scaling",
            name: name.into(),
        }),
    }
}
