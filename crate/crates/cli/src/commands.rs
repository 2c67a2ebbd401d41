//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use nkscreen::baselines::{run_screen, screener, train_mlp, MlpParams, ScreenReport, ScreenerInputs};
use nkscreen::data::{ScreeningDataset, Split, SplitSizes};
use nkscreen::grid::{ieee39, Network, COST_SEED};
use nkscreen::icnn::{Checkpoint, CHECKPOINT_VERSION};
use nkscreen::oracle::{certify as certify_classifier, CertificationReport, Verdict};
use nkscreen::pipeline::{generate_dataset, prepare, PrepareConfig, RegionArtifact};
use nkscreen::scopf::{run_bench, scopf_formulation, BenchSummary, ScopfSetup, SecurityRegion};
use nkscreen::training::{train as train_icnn, Confusion, EpochRecord, TrainingConfig};

use crate::exit::{Invalid, Uncertified};
use crate::run::{load, load_config, sha256_hex, InputRef, Run, RunManifest};
use crate::{CertifyArgs, GenDataArgs, PrepareArgs, ScopfArgs, ScreenArgs, TrainArgs};

fn load_case(spec: &str) -> Result<(Network, InputRef)> {
    if spec == "ieee39" {
        let net = ieee39(COST_SEED);
        let sha256 = sha256_hex(net.to_json().as_bytes());
        return Ok((
            net,
            InputRef {
                path: "builtin:ieee39".into(),
                sha256,
            },
        ));
    }
    load(Path::new(spec), Network::from_json)
}

fn load_region(path: &Path) -> Result<(RegionArtifact, InputRef)> {
    load(path, RegionArtifact::from_json)
}

fn load_dataset(path: &Path, art: &RegionArtifact) -> Result<(ScreeningDataset, InputRef)> {
    let (ds, r) = load(path, ScreeningDataset::from_json)?;
    let consistent = ds.dims() == art.region.dims()
        && ds.mu == art.mu
        && ds.sigma == art.sigma
        && ds.x.iter().all(|x| x.len() == ds.dims())
        && ds.x.len() == ds.sizes.total()
        && ds.infeasible.len() == ds.x.len()
        && ds.demands.len() == ds.x.len();
    if !consistent {
        return Err(Invalid(format!("dataset {} does not match the region artifact", path.display())).into());
    }
    Ok((ds, r))
}

fn load_checkpoint(path: &Path, art: &RegionArtifact) -> Result<(Checkpoint, InputRef)> {
    let (ck, r) = load(path, Checkpoint::from_json)?;
    if ck.dim_map != art.region.dim_map() || ck.mu != art.mu || ck.sigma != art.sigma {
        return Err(Invalid(format!("checkpoint {} does not match the region artifact", path.display())).into());
    }
    Ok((ck, r))
}

fn parse_split(name: &str) -> Result<Split> {
    match name {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(Invalid(format!("unknown split '{name}' (expected train, val or test)")).into()),
    }
}

fn inputs<const N: usize>(refs: [(&str, InputRef); N]) -> BTreeMap<String, InputRef> {
    refs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub fn prepare_region(out: &Path, a: &PrepareArgs) -> Result<()> {
    let mut cfg: PrepareConfig = load_config(a.config.as_deref())?;
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(n) = a.train {
        cfg.sizes.train = n;
    }
    if let Some(n) = a.val {
        cfg.sizes.val = n;
    }
    if let Some(n) = a.test {
        cfg.sizes.test = n;
    }
    if let Some(r) = &a.redundancy {
        cfg.redundancy = r.clone();
    }
    cfg.validate()?;
    let (net, case) = load_case(&a.case)?;
    let manifest = RunManifest::new("prepare-region", a.config.as_deref(), serde_json::to_value(&cfg)?, cfg.seed, inputs([("case", case)]));

    let (mut art, ds) = prepare(&net, &cfg)?;
    let timings = std::mem::take(&mut art.stats.stage_seconds);
    let s = &art.stats;
    println!("case: {} ({} buses, {} lines)", net.name(), net.num_buses(), net.num_lines());
    println!("contingencies: {} ({} islanding excluded, {} filtered)", s.contingencies, s.islanding_excluded, s.contingencies_filtered);
    println!("rows: {} assembled, {} after filtering, {} after redundancy elimination", s.assembled_rows, s.filtered_rows, s.reduced_rows);
    println!("columns: {} ({} constant dimensions dropped)", s.reduced_dims, s.constant_dims);
    println!("samples: {} train, {} val, {} test; train infeasible share {:.4}", cfg.sizes.train, cfg.sizes.val, cfg.sizes.test, s.infeasible_share_train);
    for (stage, secs) in &timings {
        println!("  {stage:<20} {secs:.3} s");
    }

    let mut run = Run::start(out, manifest)?;
    run.write_json("case.json", &net)?;
    run.write_json("region.json", &art)?;
    run.write_json("dataset.json", &ds)?;
    run.write_json("timings.json", &timings)?;
    run.finish()?;
    Ok(())
}

pub fn gen_data(out: &Path, a: &GenDataArgs) -> Result<()> {
    let (net, case) = load_case(&a.case)?;
    let (art, region) = load_region(&a.region)?;
    let sizes = SplitSizes {
        train: a.train,
        val: a.val,
        test: a.test,
    };
    if sizes.total() == 0 {
        return Err(Invalid("at least one split must be nonempty".into()).into());
    }
    let manifest = RunManifest::new("gen-data", None, json!({ "sizes": sizes }), a.seed, inputs([("case", case), ("region", region)]));
    let ds = generate_dataset(&net, &art, sizes, a.seed)?;
    for (name, split) in [("train", Split::Train), ("val", Split::Val), ("test", Split::Test)] {
        if !ds.range(split).is_empty() {
            println!("{name}: {} samples, infeasible share {:.4}", ds.range(split).len(), ds.infeasible_share(split));
        }
    }
    let mut run = Run::start(out, manifest)?;
    run.write_json("dataset.json", &ds)?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct SplitMetrics {
    confusion: Confusion,
    fpr: f64,
    fnr: f64,
}

impl SplitMetrics {
    fn new(pred: &[bool], labels: &[bool]) -> Self {
        let confusion = Confusion::from_predictions(pred, labels);
        Self {
            fpr: confusion.fpr(),
            fnr: confusion.fnr(),
            confusion,
        }
    }
}

#[derive(Serialize)]
struct TrainMetrics {
    model: String,
    best_epoch: Option<usize>,
    seconds: f64,
    validation: SplitMetrics,
    test: SplitMetrics,
}

fn metrics(model: &str, ds: &ScreeningDataset, scores: impl Fn(&[Vec<f64>]) -> Vec<f64>, best_epoch: Option<usize>, seconds: f64) -> TrainMetrics {
    let eval = |split| {
        let r = ds.range(split);
        let pred: Vec<bool> = scores(&ds.x[r.clone()]).iter().map(|f| *f > 0.0).collect();
        SplitMetrics::new(&pred, &ds.infeasible[r])
    };
    TrainMetrics {
        model: model.into(),
        best_epoch,
        seconds,
        validation: eval(Split::Val),
        test: eval(Split::Test),
    }
}

fn progress(every: usize) -> impl FnMut(&EpochRecord) {
    move |e: &EpochRecord| {
        if every > 0 && e.epoch.is_multiple_of(every) {
            let r = e.r.map(|r| format!("{r:.4}")).unwrap_or_else(|| "-".into());
            eprintln!(
                "epoch {:>6} {:?} loss {:.5} r {} val fpr {:.4} fnr {:.4}",
                e.epoch, e.phase, e.loss, r, e.val_fpr, e.val_fnr
            );
        }
    }
}

pub fn train(out: &Path, a: &TrainArgs) -> Result<()> {
    let (art, region) = load_region(&a.region)?;
    let (ds, data) = load_dataset(&a.data, &art)?;
    let mut cfg: TrainingConfig = load_config(a.config.as_deref())?;
    if let Some(v) = a.depth {
        cfg.depth = v;
    }
    if let Some(v) = a.width {
        cfg.width = v;
    }
    if let Some(v) = a.pos_weight {
        cfg.pos_weight = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.warm_epochs {
        cfg.warm_epochs = v;
    }
    if let Some(v) = a.scaling_epochs {
        cfg.scaling_epochs = v;
    }
    cfg.validate()?;
    if !matches!(a.model.as_str(), "icnn" | "mlp") {
        return Err(Invalid(format!("unknown model '{}' (expected icnn or mlp)", a.model)).into());
    }
    let config = json!({ "model": a.model, "training": cfg });
    let manifest = RunManifest::new("train", a.config.as_deref(), config, cfg.seed, inputs([("region", region), ("data", data)]));

    if a.model == "mlp" {
        let out_mlp = train_mlp(&ds, &art.bbox_std, &cfg, progress(a.log_every))?;
        let m = metrics("mlp", &ds, |xs| out_mlp.params.forward_many(xs), out_mlp.record.best_epoch, out_mlp.record.seconds);
        println!("test fpr {:.4} fnr {:.4} (best epoch {:?})", m.test.fpr, m.test.fnr, m.best_epoch);
        let mut run = Run::start(out, manifest)?;
        run.write_json("mlp.json", &out_mlp.params)?;
        run.write_csv("train_log.csv", &out_mlp.record.to_csv())?;
        run.write_json("metrics.json", &m)?;
        run.finish()?;
        return Ok(());
    }

    let result = train_icnn(&ds, &art.region_std, &art.bbox_std, &cfg, progress(a.log_every))?;
    let m = metrics("icnn", &ds, |xs| result.classifier.forward_many(xs), result.record.best_epoch, result.record.seconds);
    println!(
        "test fpr {:.4} fnr {:.4} (best epoch {:?}, r {:.4}); certificate: {}",
        m.test.fpr,
        m.test.fnr,
        m.best_epoch,
        result.classifier.r,
        verdict_text(&result.certificate)
    );
    let mut run = Run::start(out, manifest)?;
    run.write_csv("train_log.csv", &result.record.to_csv())?;
    run.write_json("certificate.json", &result.certificate)?;
    run.write_json("metrics.json", &m)?;
    if !result.certificate.is_reliable() {
        run.finish()?;
        return Err(Uncertified(format!("{}; no checkpoint written", verdict_text(&result.certificate))).into());
    }
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        classifier: result.classifier,
        mu: art.mu.clone(),
        sigma: art.sigma.clone(),
        dim_map: art.region.dim_map().to_vec(),
    };
    run.write_json("checkpoint.json", &checkpoint)?;
    run.finish()?;
    Ok(())
}

fn verdict_text(report: &CertificationReport) -> String {
    match &report.verdict {
        Verdict::Reliable => "reliable".into(),
        Verdict::Violations(rows) => format!("{} region rows violated", rows.len()),
        Verdict::Unknown(msg) => format!("unknown ({msg})"),
    }
}

pub fn certify(out: &Path, a: &CertifyArgs) -> Result<()> {
    let (art, region) = load_region(&a.region)?;
    let (ck, checkpoint) = load_checkpoint(&a.checkpoint, &art)?;
    let manifest = RunManifest::new("certify", None, json!({}), 0, inputs([("region", region), ("checkpoint", checkpoint)]));
    let report = certify_classifier(&ck.classifier, &art.region_std);
    let min_margin = report.rows.iter().map(|r| r.margin()).fold(f64::INFINITY, f64::min);
    println!("verdict: {} ({} rows, smallest margin {min_margin:.6}, {:.2} s)", verdict_text(&report), report.rows.len(), report.seconds);
    let mut run = Run::start(out, manifest)?;
    run.write_json("certificate.json", &report)?;
    run.finish()?;
    if !report.is_reliable() {
        return Err(Uncertified(verdict_text(&report)).into());
    }
    Ok(())
}

pub fn screen(out: &Path, a: &ScreenArgs) -> Result<()> {
    let (art, region) = load_region(&a.region)?;
    let (ck, checkpoint) = load_checkpoint(&a.checkpoint, &art)?;
    let (ds, data) = load_dataset(&a.data, &art)?;
    let split = parse_split(&a.split)?;
    let mut refs = inputs([("region", region), ("checkpoint", checkpoint), ("data", data)]);
    let mlp = match &a.mlp {
        Some(p) => {
            let (m, r) = load(p, |s| Ok(serde_json::from_str::<MlpParams>(s)?))?;
            if m.input_dim != art.region.dims() {
                return Err(Invalid(format!("MLP {} expects {} inputs, region has {}", p.display(), m.input_dim, art.region.dims())).into());
            }
            refs.insert("mlp".into(), r);
            Some(m)
        }
        None => None,
    };
    let manifest = RunManifest::new("screen", None, json!({ "split": a.split }), 0, refs);

    let sources = ScreenerInputs {
        classifier: Some(&ck.classifier),
        mlp: mlp.as_ref(),
        region: Some(&art.region_std),
    };
    let mut methods = vec!["icnn", "exhaustive", "exhaustive-early-exit"];
    if mlp.is_some() {
        methods.push("mlp");
    }
    let r = ds.range(split);
    let (xs, ys) = (&ds.x[r.clone()], &ds.infeasible[r]);
    let reports: Vec<ScreenReport> = methods
        .iter()
        .map(|name| run_screen(screener(name, &sources)?.as_ref(), xs, ys))
        .collect::<nkscreen::Result<_>>()?;
    let secs = |name: &str| reports.iter().find(|r| r.method == name).map_or(f64::NAN, |r| r.seconds);
    let speedup = secs("exhaustive") / secs("icnn");
    let speedup_early = secs("exhaustive-early-exit") / secs("icnn");

    let mut csv = String::from("method,seconds,tp,fp,tn,fn,fpr,fnr\n");
    println!("{:<22} {:>10} {:>8} {:>8}", "method", "seconds", "fpr", "fnr");
    for r in &reports {
        let c = r.confusion;
        csv.push_str(&format!("{},{},{},{},{},{},{},{}\n", r.method, r.seconds, c.tp, c.fp, c.tn, c.fn_, r.fpr, r.fnr));
        println!("{:<22} {:>10.6} {:>8.4} {:>8.4}", r.method, r.seconds, r.fpr, r.fnr);
    }
    println!("speedup: {speedup:.1}x over exhaustive, {speedup_early:.1}x over exhaustive with early exit");

    let mut run = Run::start(out, manifest)?;
    run.write_json(
        "screen.json",
        &json!({
            "split": a.split,
            "samples": xs.len(),
            "reports": reports,
            "speedup_vs_exhaustive": speedup,
            "speedup_vs_exhaustive_early_exit": speedup_early,
        }),
    )?;
    run.write_csv("screen.csv", &csv)?;
    run.finish()?;
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn scopf_bench(out: &Path, a: &ScopfArgs) -> Result<()> {
    let (net, case) = load_case(&a.case)?;
    let (art, region) = load_region(&a.region)?;
    let (ds, data) = load_dataset(&a.data, &art)?;
    if art.region.dims() + art.fixed.len() != net.num_buses() {
        return Err(Invalid(format!("case has {} buses, region artifact covers {}", net.num_buses(), art.region.dims() + art.fixed.len())).into());
    }
    let split = parse_split(&a.split)?;
    let mut refs = inputs([("case", case), ("region", region), ("data", data)]);
    let mut checkpoints = Vec::new();
    for (i, p) in a.checkpoint.iter().enumerate() {
        let (ck, r) = load_checkpoint(p, &art)?;
        refs.insert(format!("checkpoint_{i}"), r);
        checkpoints.push(ck);
    }
    let manifest = RunManifest::new("scopf-bench", None, json!({ "split": a.split, "limit": a.limit }), 0, refs);

    let r = ds.range(split);
    let end = a.limit.map_or(r.end, |n| (r.start + n).min(r.end));
    let demands = &ds.demands[r.start..end];
    let security = SecurityRegion::from_artifact(&art);
    let mut run = Run::start(out, manifest)?;
    let mut summaries: Vec<BenchSummary> = Vec::new();
    for (i, ck) in checkpoints.iter().enumerate() {
        let setup = ScopfSetup {
            net: &net,
            security: Some(security),
            classifier: Some(&ck.classifier),
        };
        let full = scopf_formulation("full", &setup)?;
        let icnn = scopf_formulation("icnn", &setup)?;
        let report = run_bench(full.as_ref(), icnn.as_ref(), security, demands)
            .with_context(|| format!("benchmarking checkpoint {}", a.checkpoint[i].display()))?;
        let s = &report.summary;
        println!(
            "checkpoint {i}: excess cost mean {:.4}% max {:.4}%, extra infeasible {:.2} pp, speedup {:.2}x, max violation {:.2e}, failed solves {}",
            s.mean_excess_cost_pct,
            s.max_excess_cost_pct,
            100.0 * s.extra_infeasible_share,
            s.speedup,
            s.max_candidate_violation,
            s.failed_solves
        );
        run.write_csv(&format!("scopf_{i}.csv"), &report.to_csv())?;
        summaries.push(report.summary);
    }
    let stat = |f: fn(&BenchSummary) -> f64| {
        let (mean, std) = mean_std(&summaries.iter().map(f).collect::<Vec<_>>());
        json!({ "mean": mean, "std": std })
    };
    run.write_json(
        "scopf_summary.json",
        &json!({
            "instances": demands.len(),
            "checkpoints": summaries,
            "mean_excess_cost_pct": stat(|s| s.mean_excess_cost_pct),
            "extra_infeasible_share": stat(|s| s.extra_infeasible_share),
            "speedup": stat(|s| s.speedup),
        }),
    )?;
    run.finish()?;
    Ok(())
}
