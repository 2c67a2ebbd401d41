//! Security-constrained DC-OPF: the full formulation with every region row,
//! the variant with the certified classifier's sublevel set in place of the
//! region, and the plain DC-OPF, each a single LP behind [`ScopfFormulation`].

use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::DMatrix;
use nkscreen_lp::{solve, solve_near, LpProblem, LpStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dispatch, DispatchModel, Network};
use crate::icnn::ScaledClassifier;
use crate::oracle::{encode_sublevel, hidden_upper_bounds_over, AffineInput};
use crate::pipeline::RegionArtifact;
use crate::region::{ContingencyRegion, FixedDim};

/// Coefficients below this magnitude are treated as zero when rows are added.
const ZERO_COEFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScopfStatus {
    Optimal,
    Infeasible,
    /// The solve raised an error; the benchmark records it and continues.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopfResult {
    pub formulation: String,
    pub status: ScopfStatus,
    pub dispatch: Option<Dispatch>,
    pub seconds: f64,
}

impl ScopfResult {
    pub fn cost(&self) -> Option<f64> {
        self.dispatch.as_ref().map(|d| d.cost)
    }
}

/// Region data in MW over the retained dimensions, with the values of the
/// dimensions that were dropped as constant.
#[derive(Debug, Clone, Copy)]
pub struct SecurityRegion<'a> {
    pub region: &'a ContingencyRegion,
    pub fixed: &'a [FixedDim],
    pub mu: &'a [f64],
    pub sigma: &'a [f64],
}

impl<'a> SecurityRegion<'a> {
    pub fn from_artifact(a: &'a RegionArtifact) -> Self {
        Self {
            region: &a.region,
            fixed: &a.fixed,
            mu: &a.mu,
            sigma: &a.sigma,
        }
    }

    /// Largest violation of a bus injection vector: region rows over the
    /// retained dimensions and deviations of the dropped ones.
    pub fn violation(&self, injection: &[f64]) -> f64 {
        let x: Vec<f64> = self.region.dim_map().iter().map(|&i| injection[i]).collect();
        let pinned = self
            .fixed
            .iter()
            .map(|f| (injection[f.bus] - f.value).abs())
            .fold(f64::NEG_INFINITY, f64::max);
        self.region.max_violation(&x).max(pinned)
    }
}

/// Network with its nominal PTDF and flow limits.
#[derive(Debug, Clone)]
pub struct Nominal<'a> {
    pub net: &'a Network,
    ptdf: DMatrix<f64>,
    limits: Vec<(f64, f64)>,
}

impl<'a> Nominal<'a> {
    pub fn new(net: &'a Network) -> Result<Self> {
        Ok(Self {
            net,
            ptdf: net.ptdf(&BTreeSet::new())?,
            limits: net.flow_limits(),
        })
    }
}

/// One way of solving the dispatch problem for a demand vector.
pub trait ScopfFormulation: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, demand: &[f64]) -> Result<ScopfResult>;
}

/// Dispatch LP with the nominal flow limits, optionally with the dropped
/// dimensions pinned to their values, and `extra` trailing variables.
fn base_problem(nominal: &Nominal<'_>, demand: &[f64], pinned: &[FixedDim], extra: usize) -> Result<(DispatchModel, LpProblem)> {
    let net = nominal.net;
    if demand.len() != net.num_buses() {
        return Err(Error::DimensionMismatch {
            expected: net.num_buses(),
            got: demand.len(),
        });
    }
    let mut model = DispatchModel::new(net, demand);
    let mut lp = model.problem_with_extra(extra);
    model.add_flow_rows(&mut lp, &nominal.ptdf, &nominal.limits, ZERO_COEFF)?;
    for f in pinned {
        match model.var_of(f.bus) {
            Some(j) => {
                let p = f.value + demand[f.bus];
                lp.set_bounds(j, lp.lower()[j].max(p), lp.upper()[j].min(p))?;
            }
            None => {
                if (model.base_injection[f.bus] - f.value).abs() > 1e-7 * (1.0 + f.value.abs()) {
                    model.constant_rows_ok = false;
                }
            }
        }
    }
    Ok((model, lp))
}

/// Optimal generator variables of the nominal problem with pinned dimensions,
/// used as the phase-1 starting point of the secured problems.
fn nominal_start(nominal: &Nominal<'_>, demand: &[f64], pinned: &[FixedDim]) -> Result<Option<Vec<f64>>> {
    let (model, lp) = base_problem(nominal, demand, pinned, 0)?;
    if !model.constant_rows_ok {
        return Ok(None);
    }
    let sol = solve(&lp)?;
    Ok((sol.status == LpStatus::Optimal).then_some(sol.primal))
}

fn finish(
    name: &str,
    net: &Network,
    model: &DispatchModel,
    lp: Option<&LpProblem>,
    guess: Option<&[f64]>,
    start: Instant,
) -> Result<ScopfResult> {
    let dispatch = match lp {
        Some(lp) if model.constant_rows_ok => {
            let sol = match guess {
                Some(g) => solve_near(lp, g)?,
                None => solve(lp)?,
            };
            match sol.status {
                LpStatus::Optimal => Some(model.dispatch(net, &sol.primal[..model.num_vars()])),
                LpStatus::Infeasible => None,
                LpStatus::Unbounded => return Err(Error::InvalidNetwork("dispatch LP is unbounded".into())),
            }
        }
        _ => None,
    };
    Ok(ScopfResult {
        formulation: name.into(),
        status: if dispatch.is_some() {
            ScopfStatus::Optimal
        } else {
            ScopfStatus::Infeasible
        },
        dispatch,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Economic dispatch with the nominal topology only.
pub struct DcOpf<'a> {
    pub nominal: Nominal<'a>,
}

impl ScopfFormulation for DcOpf<'_> {
    fn name(&self) -> &'static str {
        "dcopf"
    }

    fn solve(&self, demand: &[f64]) -> Result<ScopfResult> {
        let start = Instant::now();
        let (model, lp) = base_problem(&self.nominal, demand, &[], 0)?;
        finish(self.name(), self.nominal.net, &model, Some(&lp), None, start)
    }
}

/// Dispatch with every region row.
pub struct FullScopf<'a> {
    pub nominal: Nominal<'a>,
    pub security: SecurityRegion<'a>,
}

impl ScopfFormulation for FullScopf<'_> {
    fn name(&self) -> &'static str {
        "full"
    }

    fn solve(&self, demand: &[f64]) -> Result<ScopfResult> {
        let start = Instant::now();
        let (mut model, mut lp) = base_problem(&self.nominal, demand, self.security.fixed, 0)?;
        let region = self.security.region;
        let mut row = vec![0.0; self.nominal.net.num_buses()];
        for j in 0..region.num_rows() {
            row.iter_mut().for_each(|v| *v = 0.0);
            for (q, &bus) in region.dim_map().iter().enumerate() {
                row[bus] = region.row(j)[q];
            }
            model.add_injection_row(&mut lp, &row, region.b()[j], ZERO_COEFF)?;
        }
        let guess = nominal_start(&self.nominal, demand, self.security.fixed)?;
        finish(self.name(), self.nominal.net, &model, Some(&lp), guess.as_deref(), start)
    }
}

/// Dispatch with `f(r·(p − d − μ)/σ + v) ≤ 0` in place of the region rows.
pub struct IcnnScopf<'a> {
    pub nominal: Nominal<'a>,
    pub security: SecurityRegion<'a>,
    pub classifier: &'a ScaledClassifier,
}

impl IcnnScopf<'_> {
    /// Classifier input as an affine map of the generator variables.
    fn input(&self, model: &DispatchModel) -> AffineInput {
        let c = self.classifier;
        let s = self.security;
        let dims = s.region.dim_map();
        let mut terms = Vec::with_capacity(dims.len());
        let mut shift = Vec::with_capacity(dims.len());
        for (q, &bus) in dims.iter().enumerate() {
            let scale = c.r / s.sigma[q];
            terms.push(model.var_of(bus).map(|j| vec![(j, scale)]).unwrap_or_default());
            shift.push(scale * (model.base_injection[bus] - s.mu[q]) + c.v[q]);
        }
        AffineInput { terms, shift }
    }

    /// Pins hidden units whose interval bound over the input range implied
    /// by the variable bounds is nonpositive.
    fn pin_dead_units(&self, input: &AffineInput, z_offset: usize, lp: &mut LpProblem) -> Result<()> {
        let params = &self.classifier.params;
        let (mut lo, mut hi) = (params.bbox.lower.clone(), params.bbox.upper.clone());
        for q in 0..input.dims() {
            let (mut a, mut b) = (input.shift[q], input.shift[q]);
            for &(j, s) in &input.terms[q] {
                let (l, u) = (lp.lower()[j], lp.upper()[j]);
                a += (s * l).min(s * u);
                b += (s * l).max(s * u);
            }
            lo[q] = lo[q].max(a);
            hi[q] = hi[q].min(b);
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Ok(());
        }
        for (k, u) in hidden_upper_bounds_over(params, &lo, &hi).into_iter().enumerate() {
            if u <= 0.0 {
                lp.set_bounds(z_offset + k, 0.0, 0.0)?;
            }
        }
        Ok(())
    }
}

impl ScopfFormulation for IcnnScopf<'_> {
    fn name(&self) -> &'static str {
        "icnn"
    }

    fn solve(&self, demand: &[f64]) -> Result<ScopfResult> {
        let start = Instant::now();
        let params = &self.classifier.params;
        self.security.region.check_dims(params.input_dim)?;
        let nz: usize = params.widths.iter().sum();
        let (model, mut lp) = base_problem(&self.nominal, demand, self.security.fixed, nz)?;
        let input = self.input(&model);
        match encode_sublevel(params, &input, model.num_vars(), &mut lp) {
            Ok(_) => {
                self.pin_dead_units(&input, model.num_vars(), &mut lp)?;
                let guess = nominal_start(&self.nominal, demand, self.security.fixed)?.map(|mut g| {
                    let hidden = self.classifier.params.hidden(&input.eval(&g));
                    g.extend(hidden);
                    g
                });
                finish(self.name(), self.nominal.net, &model, Some(&lp), guess.as_deref(), start)
            }
            Err(Error::EmptyPredictedSet) => finish(self.name(), self.nominal.net, &model, None, None, start),
            Err(e) => Err(e),
        }
    }
}

pub const SCOPF_FORMULATIONS: [&str; 3] = ["dcopf", "full", "icnn"];

/// Inputs the formulations may draw on.
#[derive(Clone, Copy)]
pub struct ScopfSetup<'a> {
    pub net: &'a Network,
    pub security: Option<SecurityRegion<'a>>,
    pub classifier: Option<&'a ScaledClassifier>,
}

pub fn scopf_formulation<'a>(name: &str, setup: &ScopfSetup<'a>) -> Result<Box<dyn ScopfFormulation + 'a>> {
    let missing = |what: &str| Error::InvalidConfig(format!("formulation {name} needs {what}"));
    let nominal = Nominal::new(setup.net)?;
    match name {
        "dcopf" => Ok(Box::new(DcOpf { nominal })),
        "full" => Ok(Box::new(FullScopf {
            nominal,
            security: setup.security.ok_or_else(|| missing("a region"))?,
        })),
        "icnn" => Ok(Box::new(IcnnScopf {
            nominal,
            security: setup.security.ok_or_else(|| missing("a region"))?,
            classifier: setup.classifier.ok_or_else(|| missing("a classifier"))?,
        })),
        _ => Err(Error::UnknownStrategy {
            kind: "scopf formulation",
            name: name.into(),
        }),
    }
}

/// One solve in a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: usize,
    pub formulation: String,
    pub status: ScopfStatus,
    pub cost: Option<f64>,
    pub seconds: f64,
    /// Largest violation of the full security region by the returned dispatch.
    pub violation: Option<f64>,
    /// Cost above the reference formulation in percent, when both are feasible.
    pub excess_cost_pct: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub reference: String,
    pub candidate: String,
    pub instances: usize,
    pub reference_infeasible_share: f64,
    pub candidate_infeasible_share: f64,
    /// Candidate infeasible share minus reference infeasible share.
    pub extra_infeasible_share: f64,
    pub mean_excess_cost_pct: f64,
    pub max_excess_cost_pct: f64,
    /// Seconds summed over instances feasible under both formulations.
    pub reference_seconds: f64,
    pub candidate_seconds: f64,
    pub speedup: f64,
    pub max_candidate_violation: f64,
    /// Instances feasible for the candidate but not for the reference.
    pub candidate_only_feasible: usize,
    /// Solves that raised an error, over both formulations.
    pub failed_solves: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: BenchSummary,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,formulation,status,cost,seconds,violation,excess_cost_pct,error\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:?},{},{},{},{},{}\n",
                r.instance,
                r.formulation,
                r.status,
                opt(r.cost),
                r.seconds,
                opt(r.violation),
                opt(r.excess_cost_pct),
                r.error.as_deref().unwrap_or_default().replace([',', '\n'], ";")
            ));
        }
        out
    }
}

/// Solves every demand with both formulations and compares cost,
/// feasibility and runtime. Dispatches are verified against `security`.
/// A solve that raises an error is recorded as `Failed` and the run continues.
pub fn run_bench(
    reference: &dyn ScopfFormulation,
    candidate: &dyn ScopfFormulation,
    security: SecurityRegion<'_>,
    demands: &[Vec<f64>],
) -> Result<BenchReport> {
    let buses = security.region.dim_map().len() + security.fixed.len();
    if let Some(d) = demands.iter().find(|d| d.len() != buses) {
        return Err(Error::DimensionMismatch {
            expected: buses,
            got: d.len(),
        });
    }
    let attempt = |f: &dyn ScopfFormulation, d: &[f64]| match f.solve(d) {
        Ok(r) => (r, None),
        Err(e) => (
            ScopfResult {
                formulation: f.name().into(),
                status: ScopfStatus::Failed,
                dispatch: None,
                seconds: 0.0,
            },
            Some(e.to_string()),
        ),
    };
    let pairs: Vec<_> = demands.par_iter().map(|d| (attempt(reference, d), attempt(candidate, d))).collect();
    let mut rows = Vec::with_capacity(2 * pairs.len());
    let (mut ref_inf, mut cand_inf, mut cand_only, mut failed) = (0, 0, 0, 0);
    let (mut ref_s, mut cand_s) = (0.0, 0.0);
    let mut excess = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    for (i, (((rr, re), (cr, ce)), d)) in pairs.into_iter().zip(demands).enumerate() {
        let verify = |r: &ScopfResult| r.dispatch.as_ref().map(|disp| security.violation(&disp.injection(d)));
        let pct = match (rr.cost(), cr.cost()) {
            (Some(a), Some(b)) => {
                ref_s += rr.seconds;
                cand_s += cr.seconds;
                let p = 100.0 * (b - a) / a.abs().max(1e-12);
                excess.push(p);
                Some(p)
            }
            _ => None,
        };
        ref_inf += usize::from(rr.status == ScopfStatus::Infeasible);
        cand_inf += usize::from(cr.status == ScopfStatus::Infeasible);
        cand_only += usize::from(rr.status == ScopfStatus::Infeasible && cr.status == ScopfStatus::Optimal);
        failed += usize::from(re.is_some()) + usize::from(ce.is_some());
        let cv = verify(&cr);
        if let Some(v) = cv {
            max_violation = max_violation.max(v);
        }
        rows.push(BenchRow {
            instance: i,
            violation: verify(&rr),
            formulation: rr.formulation,
            status: rr.status,
            cost: rr.dispatch.as_ref().map(|d| d.cost),
            seconds: rr.seconds,
            excess_cost_pct: None,
            error: re,
        });
        rows.push(BenchRow {
            instance: i,
            formulation: cr.formulation,
            status: cr.status,
            cost: cr.dispatch.as_ref().map(|d| d.cost),
            seconds: cr.seconds,
            violation: cv,
            excess_cost_pct: pct,
            error: ce,
        });
    }
    let n = demands.len().max(1) as f64;
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let summary = BenchSummary {
        reference: reference.name().into(),
        candidate: candidate.name().into(),
        instances: demands.len(),
        reference_infeasible_share: ref_inf as f64 / n,
        candidate_infeasible_share: cand_inf as f64 / n,
        extra_infeasible_share: (cand_inf as f64 - ref_inf as f64) / n,
        mean_excess_cost_pct: mean(&excess),
        max_excess_cost_pct: excess.iter().copied().fold(0.0, f64::max),
        reference_seconds: ref_s,
        candidate_seconds: cand_s,
        speedup: if cand_s > 0.0 { ref_s / cand_s } else { f64::INFINITY },
        max_candidate_violation: max_violation,
        candidate_only_feasible: cand_only,
        failed_solves: failed,
        note: "runtimes and excess cost cover instances feasible under both formulations".into(),
    };
    Ok(BenchReport { rows, summary })
}
