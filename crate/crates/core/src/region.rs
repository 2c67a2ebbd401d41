//! Post-contingency feasible region `{x : A x ≤ b}` and its reduction pipeline.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use nkscreen_lp::{ActiveSetSolver, LpProblem, LpStatus};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Network;

/// Rows whose PTDF coefficients all fall below this norm are vacuous.
pub const ZERO_ROW_NORM: f64 = 1e-10;
/// Dimensions whose sample standard deviation is at most this are constant.
pub const CONSTANT_STD: f64 = 1e-12;
/// Redundancy tolerance for unit-normal rows in box-normalized coordinates.
pub const REDUNDANCY_TOL: f64 = 1e-6;

/// Canonically ordered line-outage sets: by size, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencySet {
    pub contingencies: Vec<Vec<usize>>,
}

impl ContingencySet {
    pub fn len(&self) -> usize {
        self.contingencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contingencies.is_empty()
    }
}

/// All outage sets of 1..=k lines that keep the network connected.
pub fn enumerate_nk(net: &Network, k: usize) -> ContingencySet {
    let m = net.num_lines();
    let mut out = Vec::new();
    let mut current = Vec::new();
    for size in 1..=k.min(m) {
        subsets(m, size, 0, &mut current, &mut |c| {
            let set: BTreeSet<usize> = c.iter().copied().collect();
            if !net.is_islanding(&set) {
                out.push(c.to_vec());
            }
        });
    }
    ContingencySet { contingencies: out }
}

fn subsets(m: usize, size: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == size {
        f(cur);
        return;
    }
    for l in start..m {
        cur.push(l);
        subsets(m, size, l + 1, cur, f);
        cur.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Upper,
    Lower,
}

/// Origin of a row: contingency id, surviving line and limit side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub contingency: usize,
    pub line: usize,
    pub direction: Direction,
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    /// Dimension-wise sample minimum and maximum times `factor`, extended to
    /// contain the origin.
    pub fn from_samples(samples: &[Vec<f64>], factor: f64) -> Self {
        let d = samples[0].len();
        let mut lower = vec![0.0f64; d];
        let mut upper = vec![0.0f64; d];
        for s in samples {
            for i in 0..d {
                lower[i] = lower[i].min(factor * s[i]);
                upper[i] = upper[i].max(factor * s[i]);
            }
        }
        Self { lower, upper }
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    /// Largest amount by which `x` leaves the box (negative inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, v) in x.iter().enumerate() {
            worst = worst.max(self.lower[i] - v).max(v - self.upper[i]);
        }
        worst
    }

    /// Keeps the listed dimensions.
    pub fn select(&self, dims: &[usize]) -> Self {
        Self {
            lower: dims.iter().map(|&i| self.lower[i]).collect(),
            upper: dims.iter().map(|&i| self.upper[i]).collect(),
        }
    }

    /// Image under `x ↦ (x − μ) / σ`.
    pub fn standardize(&self, mu: &[f64], sigma: &[f64]) -> Self {
        Self {
            lower: (0..self.dims()).map(|i| (self.lower[i] - mu[i]) / sigma[i]).collect(),
            upper: (0..self.dims()).map(|i| (self.upper[i] - mu[i]) / sigma[i]).collect(),
        }
    }

    /// `max a·x` over the box.
    pub fn support(&self, a: &[f64]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, &ai)| (ai * self.lower[i]).max(ai * self.upper[i]))
            .sum()
    }
}

/// Halfspace description `A x ≤ b` with per-row provenance. `A` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyRegion {
    dims: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    row_meta: Vec<RowMeta>,
    /// Original bus index of each retained dimension.
    dim_map: Vec<usize>,
    contingencies: Vec<Vec<usize>>,
}

impl ContingencyRegion {
    /// Builds a region and checks its structural invariants: at least one row,
    /// no zero rows, finite entries. Positivity of `b` is checked separately
    /// by [`ContingencyRegion::check_origin_interior`].
    pub fn new(
        dims: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        row_meta: Vec<RowMeta>,
        dim_map: Vec<usize>,
        contingencies: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if a.len() != b.len() * dims {
            return Err(Error::DimensionMismatch {
                expected: b.len() * dims,
                got: a.len(),
            });
        }
        if row_meta.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                got: row_meta.len(),
            });
        }
        if dim_map.len() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: dim_map.len(),
            });
        }
        let r = Self {
            dims,
            a,
            b,
            row_meta,
            dim_map,
            contingencies,
        };
        for j in 0..r.num_rows() {
            if r.row(j).iter().all(|v| *v == 0.0) {
                return Err(Error::Lp(nkscreen_lp::LpError::ZeroRow(j)));
            }
        }
        if r.a.iter().chain(&r.b).any(|v| !v.is_finite()) {
            return Err(Error::Lp(nkscreen_lp::LpError::NonFinite));
        }
        Ok(r)
    }

    /// Region from plain rows, with placeholder provenance.
    pub fn from_halfspaces(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.len());
        if let Some(r) = rows.iter().find(|r| r.len() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: r.len(),
            });
        }
        let meta = (0..rows.len())
            .map(|j| RowMeta {
                contingency: 0,
                line: j,
                direction: Direction::Upper,
            })
            .collect();
        Self::new(dims, rows.concat(), b.to_vec(), meta, (0..dims).collect(), vec![Vec::new()])
    }

    /// Fails with the offending rows unless `A·0 < b`.
    pub fn check_origin_interior(&self) -> Result<()> {
        let bad: Vec<usize> = (0..self.num_rows()).filter(|&j| !(self.b[j] > 0.0)).collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::AssumptionViolated(bad))
        }
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.a[j * self.dims..(j + 1) * self.dims]
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn row_meta(&self) -> &[RowMeta] {
        &self.row_meta
    }

    pub fn dim_map(&self) -> &[usize] {
        &self.dim_map
    }

    pub fn contingencies(&self) -> &[Vec<usize>] {
        &self.contingencies
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.num_rows(), self.dims, &self.a)
    }

    /// `max_j (a_j·x − b_j)`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.num_rows())
            .map(|j| dot(self.row(j), x) - self.b[j])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.check_dims(x.len()).is_ok() && (0..self.num_rows()).all(|j| dot(self.row(j), x) <= self.b[j] + tol)
    }

    pub fn check_dims(&self, got: usize) -> Result<()> {
        if got != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got,
            });
        }
        Ok(())
    }

    /// Infeasibility label (`true` = some row violated) for every sample.
    pub fn label_all(&self, samples: &[Vec<f64>]) -> Result<Vec<bool>> {
        let mut out = vec![false; samples.len()];
        self.for_each_block(samples, |start, block| {
            for (s, row) in block.row_iter().enumerate() {
                out[start + s] = row.iter().zip(&self.b).any(|(v, b)| v > b);
            }
        })?;
        Ok(out)
    }

    /// Evaluates `X Aᵀ` block by block over the samples.
    fn for_each_block(&self, samples: &[Vec<f64>], mut f: impl FnMut(usize, &DMatrix<f64>)) -> Result<()> {
        for s in samples {
            self.check_dims(s.len())?;
        }
        let at = DMatrix::from_column_slice(self.dims, self.num_rows(), &self.a);
        let block = (4_000_000 / self.num_rows().max(1)).clamp(1, 512);
        let mut start = 0;
        while start < samples.len() {
            let end = (start + block).min(samples.len());
            let x = DMatrix::from_fn(end - start, self.dims, |r, c| samples[start + r][c]);
            f(start, &(x * &at));
            start = end;
        }
        Ok(())
    }

    fn subset(&self, keep: &[usize]) -> Result<Self> {
        let mut a = Vec::with_capacity(keep.len() * self.dims);
        for &j in keep {
            a.extend_from_slice(self.row(j));
        }
        Self::new(
            self.dims,
            a,
            keep.iter().map(|&j| self.b[j]).collect(),
            keep.iter().map(|&j| self.row_meta[j]).collect(),
            self.dim_map.clone(),
            self.contingencies.clone(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("region serializes")
    }

    /// Parses and re-checks the structural invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        Self::new(r.dims, r.a, r.b, r.row_meta, r.dim_map, r.contingencies)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stacks `f̲ ≤ H_c x ≤ f̄` for every contingency, two rows per surviving line.
pub fn assemble_region(net: &Network, cs: &ContingencySet) -> Result<ContingencyRegion> {
    let n = net.num_buses();
    let (mut a, mut b, mut meta) = (Vec::new(), Vec::new(), Vec::new());
    for (id, c) in cs.contingencies.iter().enumerate() {
        let removed: BTreeSet<usize> = c.iter().copied().collect();
        let h = net.ptdf(&removed)?;
        let surviving = (0..net.num_lines()).filter(|l| !removed.contains(l));
        for (r, l) in surviving.enumerate() {
            let row: Vec<f64> = h.row(r).iter().copied().collect();
            if row.iter().map(|v| v * v).sum::<f64>().sqrt() <= ZERO_ROW_NORM {
                continue;
            }
            let line = &net.lines()[l];
            a.extend_from_slice(&row);
            b.push(line.flow_max_mw);
            meta.push(RowMeta {
                contingency: id,
                line: l,
                direction: Direction::Upper,
            });
            a.extend(row.iter().map(|v| -v));
            b.push(-line.flow_min_mw);
            meta.push(RowMeta {
                contingency: id,
                line: l,
                direction: Direction::Lower,
            });
        }
    }
    let r = ContingencyRegion::new(n, a, b, meta, (0..n).collect(), cs.contingencies.clone())?;
    r.check_origin_interior()?;
    Ok(r)
}

/// Removes the rows of every contingency violated by more than `threshold`
/// of the samples.
pub fn filter_frequently_infeasible(
    region: &ContingencyRegion,
    samples: &[Vec<f64>],
    threshold: f64,
) -> Result<ContingencyRegion> {
    let nc = region.contingencies.len();
    let mut violated = vec![0usize; nc];
    let mut hit = vec![false; nc];
    region.for_each_block(samples, |_, block| {
        for row in block.row_iter() {
            hit.iter_mut().for_each(|h| *h = false);
            for (j, v) in row.iter().enumerate() {
                if *v > region.b[j] {
                    hit[region.row_meta[j].contingency] = true;
                }
            }
            for (c, h) in hit.iter().enumerate() {
                violated[c] += *h as usize;
            }
        }
    })?;
    let total = samples.len().max(1) as f64;
    let keep: Vec<usize> = (0..region.num_rows())
        .filter(|&j| violated[region.row_meta[j].contingency] as f64 / total <= threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyRegion);
    }
    region.subset(&keep)
}

/// A dimension removed because its samples never vary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedDim {
    pub bus: usize,
    pub value: f64,
}

/// Drops dimensions with constant samples and folds their contribution into
/// `b`. Rows left without coefficients are removed when vacuous.
pub fn drop_constant_dims(
    region: &ContingencyRegion,
    samples: &[Vec<f64>],
) -> Result<(ContingencyRegion, Vec<FixedDim>)> {
    let d = region.dims;
    let count = samples.len() as f64;
    let mut keep_dims = Vec::new();
    let mut fixed = Vec::new();
    for i in 0..d {
        let mean = samples.iter().map(|s| s[i]).sum::<f64>() / count;
        let var = samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
        if var.sqrt() <= CONSTANT_STD {
            fixed.push((i, mean));
        } else {
            keep_dims.push(i);
        }
    }
    let (mut a, mut b, mut meta) = (Vec::new(), Vec::new(), Vec::new());
    let mut violated = Vec::new();
    for j in 0..region.num_rows() {
        let row = region.row(j);
        let shift: f64 = fixed.iter().map(|&(i, v)| row[i] * v).sum();
        let bj = region.b[j] - shift;
        let reduced: Vec<f64> = keep_dims.iter().map(|&i| row[i]).collect();
        if reduced.iter().map(|v| v * v).sum::<f64>().sqrt() <= ZERO_ROW_NORM {
            if bj < 0.0 {
                violated.push(j);
            }
            continue;
        }
        a.extend(reduced);
        b.push(bj);
        meta.push(region.row_meta[j]);
    }
    if !violated.is_empty() {
        return Err(Error::AssumptionViolated(violated));
    }
    let dim_map = keep_dims.iter().map(|&i| region.dim_map[i]).collect();
    let fixed = fixed
        .into_iter()
        .map(|(i, value)| FixedDim {
            bus: region.dim_map[i],
            value,
        })
        .collect();
    let r = ContingencyRegion::new(keep_dims.len(), a, b, meta, dim_map, region.contingencies.clone())?;
    Ok((r, fixed))
}

/// Rewrites the region in coordinates `x' = (x − μ) / σ`.
pub fn standardize_region(region: &ContingencyRegion, mu: &[f64], sigma: &[f64]) -> Result<ContingencyRegion> {
    region.check_dims(mu.len())?;
    region.check_dims(sigma.len())?;
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidConfig("standard deviations must be positive".into()));
    }
    let d = region.dims;
    let mut a = Vec::with_capacity(region.a.len());
    let mut b = Vec::with_capacity(region.num_rows());
    let mut bad = Vec::new();
    for j in 0..region.num_rows() {
        let row = region.row(j);
        a.extend((0..d).map(|i| row[i] * sigma[i]));
        let bj = region.b[j] - dot(row, mu);
        if !(bj > 0.0) {
            bad.push(j);
        }
        b.push(bj);
    }
    if !bad.is_empty() {
        return Err(Error::AssumptionViolated(bad));
    }
    ContingencyRegion::new(
        d,
        a,
        b,
        region.row_meta.clone(),
        region.dim_map.clone(),
        region.contingencies.clone(),
    )
}

/// Rows rescaled to unit normals in box-normalized coordinates
/// `y = (x − center) / width`, where the box becomes `[−½, ½]^d`.
struct Normalized {
    d: usize,
    g: Vec<f64>,
    beta: Vec<f64>,
}

impl Normalized {
    fn new(region: &ContingencyRegion, bbox: &BoundingBox) -> Self {
        let d = region.dims;
        let center: Vec<f64> = (0..d).map(|i| 0.5 * (bbox.lower[i] + bbox.upper[i])).collect();
        let width: Vec<f64> = (0..d).map(|i| (bbox.upper[i] - bbox.lower[i]).max(1e-12)).collect();
        let mut g = Vec::with_capacity(region.a.len());
        let mut beta = Vec::with_capacity(region.num_rows());
        for j in 0..region.num_rows() {
            let row = region.row(j);
            let gj: Vec<f64> = (0..d).map(|i| row[i] * width[i]).collect();
            let norm = gj.iter().map(|v| v * v).sum::<f64>().sqrt();
            g.extend(gj.iter().map(|v| v / norm));
            beta.push((region.b[j] - dot(row, &center)) / norm);
        }
        Self { d, g, beta }
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.g[j * self.d..(j + 1) * self.d]
    }

    /// Rows not implied by the box alone, keeping only the tightest of each
    /// group of parallel rows (lowest index on ties).
    fn box_screen(&self) -> Vec<usize> {
        let mut best: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
        let mut order = Vec::new();
        for j in 0..self.beta.len() {
            let gj = self.row(j);
            let support = 0.5 * gj.iter().map(|v| v.abs()).sum::<f64>();
            if support <= self.beta[j] + REDUNDANCY_TOL {
                continue;
            }
            let key: Vec<i64> = gj.iter().map(|v| (v * 1e9).round() as i64).collect();
            match best.get_mut(&key) {
                Some(k) => {
                    if self.beta[j] < self.beta[*k] {
                        *k = j;
                    }
                }
                None => {
                    best.insert(key.clone(), j);
                    order.push(key);
                }
            }
        }
        let mut out: Vec<usize> = order.iter().map(|k| best[k]).collect();
        out.sort_unstable();
        out
    }
}

/// Removes rows implied by the box alone and rows dominated by a parallel row
/// with a smaller right-hand side. The region intersected with the box is
/// unchanged.
pub fn eliminate_box_redundant(region: &ContingencyRegion, bbox: &BoundingBox) -> Result<ContingencyRegion> {
    region.check_dims(bbox.dims())?;
    let keep = Normalized::new(region, bbox).box_screen();
    if keep.is_empty() {
        return Err(Error::EmptyRegion);
    }
    region.subset(&keep)
}

/// Removes every row implied by the remaining rows together with the box:
/// row `j` goes iff `max a_j·x` over the other retained rows and the box is
/// at most `b_j` (within [`REDUNDANCY_TOL`] on the normalized scale).
///
/// After the box screen, Clarkson's method finds the irredundant rows: each
/// LP either proves a row redundant or a ray from an interior point discovers
/// a new facet. A last pass drops rows implied by the other survivors.
/// Retained rows keep their original order.
pub fn eliminate_redundant(region: &ContingencyRegion, bbox: &BoundingBox) -> Result<ContingencyRegion> {
    region.check_dims(bbox.dims())?;
    let d = region.dims;
    let m = region.num_rows();
    let norm = Normalized::new(region, bbox);
    let candidates = norm.box_screen();
    if candidates.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (g, beta) = (&norm.g, &norm.beta);
    let grow = |j: usize| norm.row(j);

    let p0 = chebyshev_center(&candidates, g, beta, d)?;

    let mut lp = LpProblem::new(vec![0.0; d]);
    for i in 0..d {
        lp.set_bounds(i, -0.5, 0.5)?;
    }
    let mut solver = ActiveSetSolver::new(&lp)?;
    solver.restart_from(&p0)?;
    let mut slot: Vec<Option<usize>> = vec![None; m];
    let mut redundant = vec![false; m];
    let mut kept: Vec<usize> = Vec::new();

    let lp_max = |solver: &mut ActiveSetSolver, c: &[f64]| -> Result<f64> {
        solver.set_objective(c)?;
        let sol = solver.solve()?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.objective_value),
            _ => Err(Error::Lp(nkscreen_lp::LpError::NumericalFailure(
                "redundancy program lost feasibility".into(),
            ))),
        }
    };

    for &j in &candidates {
        while slot[j].is_none() && !redundant[j] {
            let value = lp_max(&mut solver, grow(j))?;
            if value <= beta[j] + REDUNDANCY_TOL {
                redundant[j] = true;
                break;
            }
            let x = solver.point();
            let dir: Vec<f64> = x.iter().zip(&p0).map(|(a, b)| a - b).collect();
            // First candidate hyperplane crossed on the segment from p0 to x.
            let mut best: Option<(f64, usize)> = None;
            for &k in &candidates {
                if slot[k].is_some() || redundant[k] {
                    continue;
                }
                let rate = dot(grow(k), &dir);
                if rate > 0.0 {
                    let t = (beta[k] - dot(grow(k), &p0)) / rate;
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, k));
                    }
                }
            }
            let (_, k) = best.expect("violated row is crossed");
            slot[k] = Some(solver.push_row(grow(k), beta[k])?);
            kept.push(k);
        }
    }

    // Drop survivors implied by the others, one at a time.
    kept.sort_unstable();
    let mut retained = Vec::new();
    for &j in &kept {
        let s = slot[j].expect("kept rows are loaded");
        solver.disable_row(s);
        let value = lp_max(&mut solver, grow(j))?;
        if value <= beta[j] + REDUNDANCY_TOL {
            continue;
        }
        solver.enable_row(s);
        retained.push(j);
    }
    region.subset(&retained)
}

/// A redundancy-elimination method selectable by name.
pub trait RedundancyEliminator: Send + Sync {
    fn name(&self) -> &'static str;
    fn eliminate(&self, region: &ContingencyRegion, bbox: &BoundingBox) -> Result<ContingencyRegion>;
}

/// Box bounds plus parallel-row dominance.
pub struct BoxBound;

/// Exact LP redundancy over the remaining rows and the box.
pub struct LpExact;

impl RedundancyEliminator for BoxBound {
    fn name(&self) -> &'static str {
        "box"
    }

    fn eliminate(&self, region: &ContingencyRegion, bbox: &BoundingBox) -> Result<ContingencyRegion> {
        eliminate_box_redundant(region, bbox)
    }
}

impl RedundancyEliminator for LpExact {
    fn name(&self) -> &'static str {
        "lp"
    }

    fn eliminate(&self, region: &ContingencyRegion, bbox: &BoundingBox) -> Result<ContingencyRegion> {
        eliminate_redundant(region, bbox)
    }
}

pub const REDUNDANCY_STRATEGIES: [&str; 2] = ["box", "lp"];

pub fn redundancy_strategy(name: &str) -> Result<Box<dyn RedundancyEliminator>> {
    match name {
        "box" => Ok(Box::new(BoxBound)),
        "lp" => Ok(Box::new(LpExact)),
        _ => Err(Error::UnknownStrategy {
            kind: "redundancy",
            name: name.to_string(),
        }),
    }
}

/// Center of the largest ball inside the rows and the unit box, in the
/// normalized coordinates. Fails when the intersection has no interior.
fn chebyshev_center(rows: &[usize], g: &[f64], beta: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;
    let mut lp = LpProblem::new(c);
    lp.set_bounds(d, f64::NEG_INFINITY, 1.0)?;
    for &j in rows {
        let mut row = g[j * d..(j + 1) * d].to_vec();
        row.push(1.0);
        lp.add_le(row, beta[j])?;
    }
    for i in 0..d {
        let mut row = vec![0.0; d + 1];
        row[i] = 1.0;
        row[d] = 1.0;
        lp.add_le(row.clone(), 0.5)?;
        row[i] = -1.0;
        lp.add_le(row, 0.5)?;
    }
    let sol = nkscreen_lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal || sol.primal[d] <= 1e-9 {
        return Err(Error::EmptyRegion);
    }
    Ok(sol.primal[..d].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(rows: &[(&[f64], f64)]) -> ContingencyRegion {
        let d = rows[0].0.len();
        let mut a = Vec::new();
        for (r, _) in rows {
            a.extend_from_slice(r);
        }
        let meta = (0..rows.len())
            .map(|j| RowMeta {
                contingency: 0,
                line: j,
                direction: Direction::Upper,
            })
            .collect();
        ContingencyRegion::new(d, a, rows.iter().map(|r| r.1).collect(), meta, (0..d).collect(), vec![vec![0]])
            .unwrap()
    }

    fn unit_box(d: usize, h: f64) -> BoundingBox {
        BoundingBox {
            lower: vec![-h; d],
            upper: vec![h; d],
        }
    }

    #[test]
    fn duplicate_row_removed_once() {
        let r = region(&[(&[1.0, 0.0], 1.0), (&[1.0, 0.0], 1.0), (&[0.0, 1.0], 1.0)]);
        let out = eliminate_redundant(&r, &unit_box(2, 5.0)).unwrap();
        assert_eq!(out.num_rows(), 2);
    }

    #[test]
    fn dominated_parallel_row_removed() {
        let r = region(&[(&[1.0, 1.0], 10.0), (&[1.0, 1.0], 5.0), (&[-1.0, 0.0], 1.0)]);
        let out = eliminate_redundant(&r, &unit_box(2, 20.0)).unwrap();
        assert_eq!(out.b(), &[5.0, 1.0]);
    }

    #[test]
    fn box_implied_row_removed() {
        let r = region(&[(&[1.0, 0.0], 10.0), (&[0.0, 1.0], 0.5)]);
        let out = eliminate_redundant(&r, &unit_box(2, 1.0)).unwrap();
        assert_eq!(out.b(), &[0.5]);
    }

    #[test]
    fn implied_by_combination_removed() {
        // x ≤ 1 and y ≤ 1 imply x + y ≤ 2.5
        let r = region(&[(&[1.0, 0.0], 1.0), (&[1.0, 1.0], 2.5), (&[0.0, 1.0], 1.0)]);
        let out = eliminate_redundant(&r, &unit_box(2, 3.0)).unwrap();
        assert_eq!(out.b(), &[1.0, 1.0]);
    }

    #[test]
    fn box_strategy_keeps_combination_rows() {
        let r = region(&[(&[1.0, 0.0], 1.0), (&[1.0, 1.0], 2.5), (&[0.0, 1.0], 1.0), (&[2.0, 0.0], 4.0)]);
        let out = eliminate_box_redundant(&r, &unit_box(2, 3.0)).unwrap();
        assert_eq!(out.b(), &[1.0, 2.5, 1.0]);
        assert_eq!(redundancy_strategy("box").unwrap().name(), "box");
        assert!(redundancy_strategy("nope").is_err());
    }

    #[test]
    fn constant_dims_fold_into_rhs() {
        let r = region(&[(&[1.0, 2.0], 20.0), (&[0.0, 1.0], 7.0), (&[1.0, 0.0], 3.0)]);
        let samples = vec![vec![0.0, 5.0], vec![1.0, 5.0], vec![-1.0, 5.0]];
        let (out, fixed) = drop_constant_dims(&r, &samples).unwrap();
        assert_eq!(out.dims(), 1);
        assert_eq!(out.dim_map(), &[0]);
        assert_eq!(fixed, vec![FixedDim { bus: 1, value: 5.0 }]);
        // second row has no remaining coefficient and 7 − 5 > 0, so it is vacuous
        assert_eq!(out.b(), &[10.0, 3.0]);

        let zero = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let (out, _) = drop_constant_dims(&r, &zero).unwrap();
        assert_eq!(out.b(), &[20.0, 3.0]);

        let vary = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let (out, fixed) = drop_constant_dims(&r, &vary).unwrap();
        assert!(fixed.is_empty());
        assert_eq!(out, r);
    }

    #[test]
    fn standardize_identity_and_violation() {
        let r = region(&[(&[1.0, 2.0], 4.0), (&[-1.0, 0.0], 1.0)]);
        assert_eq!(standardize_region(&r, &[0.0, 0.0], &[1.0, 1.0]).unwrap(), r);
        assert!(matches!(
            standardize_region(&r, &[-2.0, 0.0], &[1.0, 1.0]),
            Err(Error::AssumptionViolated(rows)) if rows == vec![1]
        ));
    }

    #[test]
    fn filter_threshold_cases() {
        let mut r = region(&[(&[1.0], 1.0), (&[1.0], 2.0)]);
        r.row_meta[1].contingency = 1;
        r.contingencies = vec![vec![0], vec![1]];
        let samples: Vec<Vec<f64>> = (0..20).map(|i| vec![if i == 0 { 0.0 } else { 1.5 }]).collect();
        // contingency 0 violated by 95%, contingency 1 never
        let out = filter_frequently_infeasible(&r, &samples, 0.9).unwrap();
        assert_eq!(out.b(), &[2.0]);
        let one = vec![vec![2.5], vec![0.0]];
        assert!(matches!(filter_frequently_infeasible(&r, &one, 0.0), Err(Error::EmptyRegion)));
    }

    #[test]
    fn box_from_samples_contains_origin() {
        let b = BoundingBox::from_samples(&[vec![1.0, -2.0], vec![3.0, -1.0]], 1.2);
        assert_eq!(b.lower, vec![0.0, -2.4]);
        assert!((b.upper[0] - 3.6).abs() < 1e-12);
        assert_eq!(b.upper[1], 0.0);
    }

    #[test]
    fn region_invariants_checked() {
        assert!(ContingencyRegion::new(1, vec![], vec![], vec![], vec![0], vec![]).is_err());
        let meta = vec![RowMeta {
            contingency: 0,
            line: 0,
            direction: Direction::Upper,
        }];
        assert!(ContingencyRegion::new(1, vec![0.0], vec![1.0], meta.clone(), vec![0], vec![]).is_err());
        let r = ContingencyRegion::new(1, vec![1.0], vec![0.0], meta, vec![0], vec![]).unwrap();
        assert!(matches!(r.check_origin_interior(), Err(Error::AssumptionViolated(v)) if v == vec![0]));
    }
}
