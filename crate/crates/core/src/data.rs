//! Random demand sampling, DC-OPF injections and labeled screening datasets.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::region::{ContingencyRegion, FixedDim};

/// Oversampling cap when infeasible demand draws are resampled.
pub const RESAMPLE_FACTOR: usize = 10;

/// Multivariate normal demand model centered at the nominal demand.
///
/// The covariance is `S C S` where `S = diag(rel_std·|nominal|)` and `C` is the
/// correlation matrix of `Q diag(u) Qᵀ` for a seeded random orthogonal `Q` and
/// `u ~ U[0.5, 1.5]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemandSampler {
    pub nominal: Vec<f64>,
    pub rel_std: f64,
    pub seed: u64,
    /// Lower Cholesky factor of the covariance, row-major.
    factor: Vec<f64>,
}

impl DemandSampler {
    pub fn new(nominal: Vec<f64>, rel_std: f64, seed: u64) -> Self {
        let n = nominal.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(u)) * q.transpose();
        let corr = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt());
        let l = corr.cholesky().expect("correlation matrix is positive definite").l();
        let std: Vec<f64> = nominal.iter().map(|d| rel_std * d.abs()).collect();
        let factor = (0..n * n).map(|k| std[k / n] * l[(k / n, k % n)]).collect();
        Self {
            nominal,
            rel_std,
            seed,
            factor,
        }
    }

    pub fn dims(&self) -> usize {
        self.nominal.len()
    }

    /// Covariance matrix `L Lᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.dims();
        let l = DMatrix::from_row_slice(n, n, &self.factor);
        &l * l.transpose()
    }

    pub fn stream(&self) -> DemandStream<'_> {
        DemandStream {
            sampler: self,
            rng: ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_d4a7),
        }
    }

    /// `count` i.i.d. draws; identical for identical samplers.
    pub fn sample_demands(&self, count: usize) -> Vec<Vec<f64>> {
        let mut s = self.stream();
        (0..count).map(|_| s.draw()).collect()
    }
}

/// Sequential draws from a [`DemandSampler`].
pub struct DemandStream<'a> {
    sampler: &'a DemandSampler,
    rng: ChaCha8Rng,
}

impl DemandStream<'_> {
    pub fn draw(&mut self) -> Vec<f64> {
        let n = self.sampler.dims();
        let z: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|i| {
                let row = &self.sampler.factor[i * n..(i + 1) * n];
                self.sampler.nominal[i] + row[..=i].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

/// Demand instances with a feasible DC-OPF and their injections `p − d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionSet {
    pub demands: Vec<Vec<f64>>,
    pub injections: Vec<Vec<f64>>,
    /// Demand draws rejected because the DC-OPF was infeasible.
    pub rejected: usize,
}

/// Draws demands until `count` of them admit a DC-OPF dispatch, solving the
/// dispatch problems in parallel.
pub fn generate_injections(net: &Network, sampler: &DemandSampler, count: usize) -> Result<InjectionSet> {
    if sampler.dims() != net.num_buses() {
        return Err(Error::DimensionMismatch {
            expected: net.num_buses(),
            got: sampler.dims(),
        });
    }
    let mut stream = sampler.stream();
    let cap = RESAMPLE_FACTOR * count.max(1);
    let mut drawn = 0;
    let mut out = InjectionSet {
        demands: Vec::with_capacity(count),
        injections: Vec::with_capacity(count),
        rejected: 0,
    };
    while out.demands.len() < count {
        let need = count - out.demands.len();
        let batch = need.min(cap - drawn);
        if batch == 0 {
            return Err(Error::ResampleLimit {
                wanted: count,
                attempts: cap,
            });
        }
        let demands: Vec<Vec<f64>> = (0..batch).map(|_| stream.draw()).collect();
        drawn += batch;
        let solved: Vec<Option<Vec<f64>>> = demands
            .par_iter()
            .map(|d| net.solve_dcopf(d).map(|r| r.map(|disp| disp.injection(d))))
            .collect::<Result<_>>()?;
        for (d, x) in demands.into_iter().zip(solved) {
            match x {
                Some(x) => {
                    out.demands.push(d);
                    out.injections.push(x);
                }
                None => out.rejected += 1,
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train: 10_000,
            val: 2_000,
            test: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Labeled injections in standardized coordinates. Samples are stored in
/// split order: train, then validation, then test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningDataset {
    /// Standardized injections over the retained dimensions.
    pub x: Vec<Vec<f64>>,
    /// `true` when some region row is violated.
    pub infeasible: Vec<bool>,
    /// Full demand vectors of every instance.
    pub demands: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sizes: SplitSizes,
}

impl ScreeningDataset {
    pub fn range(&self, split: Split) -> std::ops::Range<usize> {
        let s = self.sizes;
        match split {
            Split::Train => 0..s.train,
            Split::Val => s.train..s.train + s.val,
            Split::Test => s.train + s.val..s.total(),
        }
    }

    pub fn dims(&self) -> usize {
        self.mu.len()
    }

    pub fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn unstandardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn infeasible_share(&self, split: Split) -> f64 {
        let r = self.range(split);
        let n = r.len().max(1) as f64;
        self.infeasible[r].iter().filter(|v| **v).count() as f64 / n
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Projects full injections onto the retained dimensions of `region`.
pub fn project(region: &ContingencyRegion, full: &[Vec<f64>]) -> Vec<Vec<f64>> {
    full.iter()
        .map(|x| region.dim_map().iter().map(|&i| x[i]).collect())
        .collect()
}

/// Per-dimension mean and sample standard deviation.
pub fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mu: Vec<f64> = (0..d).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n).collect();
    let sigma = (0..d)
        .map(|i| (rows.iter().map(|r| (r[i] - mu[i]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt())
        .collect();
    (mu, sigma)
}

/// Labels injections against the reduced unstandardized region, computes the
/// standardization from the training split and stores standardized inputs.
/// `set` must hold exactly `sizes.total()` instances.
pub fn build_dataset(
    set: &InjectionSet,
    region_unstd: &ContingencyRegion,
    fixed: &[FixedDim],
    sizes: SplitSizes,
) -> Result<ScreeningDataset> {
    label_dataset(set, region_unstd, fixed, sizes, None)
}

/// Like [`build_dataset`] but standardizes with a given `(mu, sigma)`, so that
/// fresh samples share the coordinates of an existing region artifact.
pub fn build_dataset_with(
    set: &InjectionSet,
    region_unstd: &ContingencyRegion,
    fixed: &[FixedDim],
    sizes: SplitSizes,
    mu: &[f64],
    sigma: &[f64],
) -> Result<ScreeningDataset> {
    region_unstd.check_dims(mu.len())?;
    region_unstd.check_dims(sigma.len())?;
    label_dataset(set, region_unstd, fixed, sizes, Some((mu.to_vec(), sigma.to_vec())))
}

fn label_dataset(
    set: &InjectionSet,
    region_unstd: &ContingencyRegion,
    fixed: &[FixedDim],
    sizes: SplitSizes,
    standardization: Option<(Vec<f64>, Vec<f64>)>,
) -> Result<ScreeningDataset> {
    if set.injections.len() != sizes.total() {
        return Err(Error::DimensionMismatch {
            expected: sizes.total(),
            got: set.injections.len(),
        });
    }
    for f in fixed {
        let spread = set.injections.iter().map(|x| (x[f.bus] - f.value).abs()).fold(0.0, f64::max);
        if spread > 1e-9 * (1.0 + f.value.abs()) {
            return Err(Error::InvalidConfig(format!("dimension {} is not constant in the data", f.bus)));
        }
    }
    let raw = project(region_unstd, &set.injections);
    let infeasible = region_unstd.label_all(&raw)?;
    let (mu, sigma) = match standardization {
        Some(s) => s,
        None if sizes.train > 0 => mean_std(&raw[..sizes.train]),
        None => return Err(Error::InvalidConfig("the training split is empty".into())),
    };
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidConfig("a retained dimension is constant on the training split".into()));
    }
    let x = raw
        .iter()
        .map(|r| r.iter().zip(mu.iter().zip(&sigma)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    Ok(ScreeningDataset {
        x,
        infeasible,
        demands: set.demands.clone(),
        mu,
        sigma,
        sizes,
    })
}
