//! End-to-end preparation: contingencies, injections, region reduction,
//! labels and standardization.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{build_dataset, build_dataset_with, generate_injections, project, DemandSampler, ScreeningDataset, SplitSizes};
use crate::error::Result;
use crate::grid::Network;
use crate::region::{
    assemble_region, drop_constant_dims, enumerate_nk, filter_frequently_infeasible, redundancy_strategy,
    standardize_region, BoundingBox, ContingencyRegion, FixedDim,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub k: usize,
    pub rel_std: f64,
    pub seed: u64,
    pub sizes: SplitSizes,
    pub filter_threshold: f64,
    pub box_factor: f64,
    /// Redundancy strategy name (see [`crate::region::REDUNDANCY_STRATEGIES`]).
    pub redundancy: String,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            k: 2,
            rel_std: 0.15,
            seed: 0,
            sizes: SplitSizes::default(),
            filter_threshold: 0.9,
            box_factor: 1.2,
            redundancy: "box".into(),
        }
    }
}

impl PrepareConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(crate::Error::InvalidConfig(m.into()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.rel_std > 0.0 && self.rel_std.is_finite()) {
            return bad("rel_std must be positive and finite");
        }
        if self.sizes.train < 2 {
            return bad("the training split needs at least 2 samples");
        }
        if !(self.filter_threshold > 0.0 && self.filter_threshold <= 1.0) {
            return bad("filter_threshold must lie in (0, 1]");
        }
        if !(self.box_factor >= 1.0 && self.box_factor.is_finite()) {
            return bad("box_factor must be at least 1");
        }
        Ok(())
    }
}

/// Row counts and wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepareStats {
    pub contingencies: usize,
    pub islanding_excluded: usize,
    pub assembled_rows: usize,
    pub contingencies_filtered: usize,
    pub filtered_rows: usize,
    pub constant_dims: usize,
    pub reduced_rows: usize,
    pub reduced_dims: usize,
    pub rejected_demands: usize,
    pub infeasible_share_train: f64,
    pub stage_seconds: Vec<(String, f64)>,
}

/// Everything downstream stages need about the feasible region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionArtifact {
    /// Reduced region in MW over the retained dimensions.
    pub region: ContingencyRegion,
    /// Same region in standardized coordinates.
    pub region_std: ContingencyRegion,
    pub fixed: Vec<FixedDim>,
    pub bbox: BoundingBox,
    pub bbox_std: BoundingBox,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub config: PrepareConfig,
    pub stats: PrepareStats,
}

impl RegionArtifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        // Re-validate region invariants after deserialization.
        ContingencyRegion::from_json(&a.region.to_json())?;
        ContingencyRegion::from_json(&a.region_std.to_json())?;
        Ok(a)
    }

    /// Maps a full bus-injection vector to standardized retained coordinates.
    pub fn standardize_full(&self, x: &[f64]) -> Vec<f64> {
        self.region
            .dim_map()
            .iter()
            .enumerate()
            .map(|(k, &i)| (x[i] - self.mu[k]) / self.sigma[k])
            .collect()
    }
}

/// Runs enumerate → assemble → inject → filter → drop constant dimensions →
/// eliminate redundant rows → label → standardize.
pub fn prepare(net: &Network, cfg: &PrepareConfig) -> Result<(RegionArtifact, ScreeningDataset)> {
    cfg.validate()?;
    let mut stats = PrepareStats::default();
    let mut clock = Instant::now();
    let mut lap = |name: &str, stats: &mut PrepareStats| {
        stats.stage_seconds.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let eliminator = redundancy_strategy(&cfg.redundancy)?;
    let cs = enumerate_nk(net, cfg.k);
    let m = net.num_lines();
    let all: usize = (1..=cfg.k.min(m)).map(|s| binomial(m, s)).sum();
    stats.contingencies = cs.len();
    stats.islanding_excluded = all - cs.len();
    lap("enumerate", &mut stats);

    let full = assemble_region(net, &cs)?;
    stats.assembled_rows = full.num_rows();
    lap("assemble", &mut stats);

    let sampler = DemandSampler::new(net.demand(), cfg.rel_std, cfg.seed);
    let set = generate_injections(net, &sampler, cfg.sizes.total())?;
    stats.rejected_demands = set.rejected;
    lap("injections", &mut stats);

    let train = &set.injections[..cfg.sizes.train];
    let filtered = filter_frequently_infeasible(&full, train, cfg.filter_threshold)?;
    stats.filtered_rows = filtered.num_rows();
    let remaining: std::collections::BTreeSet<usize> =
        filtered.row_meta().iter().map(|r| r.contingency).collect();
    stats.contingencies_filtered = cs.len() - remaining.len();
    lap("filter", &mut stats);

    let (reduced, fixed) = drop_constant_dims(&filtered, &set.injections)?;
    stats.constant_dims = fixed.len();
    lap("constant_dims", &mut stats);

    let raw = project(&reduced, &set.injections);
    let bbox = BoundingBox::from_samples(&raw, cfg.box_factor);
    let region = eliminator.eliminate(&reduced, &bbox)?;
    stats.reduced_rows = region.num_rows();
    stats.reduced_dims = region.dims();
    lap("eliminate_redundant", &mut stats);

    let dataset = build_dataset(&set, &region, &fixed, cfg.sizes)?;
    let region_std = standardize_region(&region, &dataset.mu, &dataset.sigma)?;
    let bbox_std = bbox.standardize(&dataset.mu, &dataset.sigma);
    stats.infeasible_share_train = dataset.infeasible_share(crate::data::Split::Train);
    lap("label_standardize", &mut stats);

    let artifact = RegionArtifact {
        region,
        region_std,
        fixed,
        bbox,
        bbox_std,
        mu: dataset.mu.clone(),
        sigma: dataset.sigma.clone(),
        config: cfg.clone(),
        stats,
    };
    Ok((artifact, dataset))
}

/// Draws a fresh labeled dataset in the coordinates of `artifact`, with the
/// sampler spread of the artifact's configuration and a new seed.
pub fn generate_dataset(net: &Network, artifact: &RegionArtifact, sizes: SplitSizes, seed: u64) -> Result<ScreeningDataset> {
    let n = net.num_buses();
    if artifact.region.dims() + artifact.fixed.len() != n {
        return Err(crate::Error::DimensionMismatch {
            expected: artifact.region.dims() + artifact.fixed.len(),
            got: n,
        });
    }
    let sampler = DemandSampler::new(net.demand(), artifact.config.rel_std, seed);
    let set = generate_injections(net, &sampler, sizes.total())?;
    build_dataset_with(&set, &artifact.region, &artifact.fixed, sizes, &artifact.mu, &artifact.sigma)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
