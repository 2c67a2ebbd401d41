#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use nkscreen::data::{ScreeningDataset, SplitSizes};
use nkscreen::grid::{Bus, Line, Network};
use nkscreen::icnn::{IcnnParams, ScaledClassifier, DEFAULT_BOX_GAIN};
use nkscreen::pipeline::{prepare, PrepareConfig, RegionArtifact};
use nkscreen::training::{train, TrainingConfig};
use nkscreen::region::{BoundingBox, ContingencyRegion};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn cube(n: usize, h: f64) -> BoundingBox {
    BoundingBox {
        lower: vec![-h; n],
        upper: vec![h; n],
    }
}

/// Zero network with output bias −1: predicted-feasible set equals the box.
pub fn box_icnn(n: usize, h: f64) -> IcnnParams {
    let mut p = IcnnParams::zeros(n, &[2], cube(n, h), DEFAULT_BOX_GAIN).unwrap();
    let l = p.layout();
    p.theta[l.b[1].at(0, 0)] = -1.0;
    p
}

/// Random network shifted so that `raw(0) = −offset`.
pub fn random_icnn(seed: u64, n: usize, widths: &[usize], h: f64, offset: f64) -> IcnnParams {
    let mut p = IcnnParams::init(n, widths, cube(n, h), DEFAULT_BOX_GAIN, seed).unwrap();
    let l = p.layout();
    let r0 = p.raw(&vec![0.0; n]);
    p.theta[l.b[l.depth()].at(0, 0)] -= r0 + offset;
    p
}

/// Region with `m` random rows whose right-hand sides are positive.
pub fn random_region(rng: &mut ChaCha8Rng, n: usize, m: usize) -> ContingencyRegion {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.3..2.0)).collect();
    ContingencyRegion::from_halfspaces(&rows, &b).unwrap()
}

fn forward_many(p: &IcnnParams, pts: &[Vec<f64>]) -> Vec<f64> {
    let n = p.input_dim;
    let m = DMatrix::from_fn(n, pts.len(), |i, s| pts[s][i]);
    p.forward_batch(&m).output
}

/// `max a·x` over `f(x) ≤ 0` by a dense grid over the box followed by a
/// central-cut ellipsoid refinement. `None` when no grid point is feasible.
pub fn grid_polish_max(p: &IcnnParams, a: &[f64], per_dim: usize) -> Option<(f64, f64)> {
    let n = p.input_dim;
    let (lo, hi) = (&p.bbox.lower, &p.bbox.upper);
    let total = per_dim.pow(n as u32);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = 0;
    while idx < total {
        let end = (idx + 4096).min(total);
        let pts: Vec<Vec<f64>> = (idx..end)
            .map(|mut t| {
                (0..n)
                    .map(|i| {
                        let k = t % per_dim;
                        t /= per_dim;
                        lo[i] + (hi[i] - lo[i]) * k as f64 / (per_dim - 1) as f64
                    })
                    .collect()
            })
            .collect();
        for (x, f) in pts.iter().zip(forward_many(p, &pts)) {
            if f <= 0.0 {
                let v: f64 = a.iter().zip(x).map(|(u, w)| u * w).sum();
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, x.clone()));
                }
            }
        }
        idx = end;
    }
    let (grid_val, start) = best?;

    // ellipsoid {x : (x−c)ᵀ P⁻¹ (x−c) ≤ 1} started as a ball around the box
    let radius: f64 = lo.iter().zip(hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt();
    let mut c = DMatrix::from_column_slice(n, 1, &start);
    let mut pm = DMatrix::<f64>::identity(n, n) * (radius * radius);
    let mut polished = grid_val;
    let nf = n as f64;
    for _ in 0..400 * n * n + 2000 {
        let x: Vec<f64> = c.iter().copied().collect();
        let f = p.forward(&x);
        // cut keeps {y : g·(y − c) ≤ 0}
        let g: Vec<f64> = if f > 0.0 {
            p.input_gradient(&x)
        } else {
            let v: f64 = a.iter().zip(&x).map(|(u, w)| u * w).sum();
            polished = polished.max(v);
            a.iter().map(|u| -u).collect()
        };
        let g = DMatrix::from_column_slice(n, 1, &g);
        let pg = &pm * &g;
        let denom = (g.transpose() * &pg)[(0, 0)];
        if !(denom > 1e-300) {
            break;
        }
        let gt = pg / denom.sqrt();
        if n == 1 {
            c -= &gt * 0.5;
            pm *= 0.25;
        } else {
            c -= &gt * (1.0 / (nf + 1.0));
            pm = (&pm - &gt * gt.transpose() * (2.0 / (nf + 1.0))) * (nf * nf / (nf * nf - 1.0));
        }
    }
    Some((grid_val, polished))
}

/// Central-difference derivative of `f` in coordinate `i` of `theta`.
pub fn central_diff(theta: &[f64], i: usize, h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut t = theta.to_vec();
    t[i] = theta[i] + h;
    let up = f(&t);
    t[i] = theta[i] - h;
    let down = f(&t);
    (up - down) / (2.0 * h)
}

pub fn rel_close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs
}

fn toy_bus(d: f64, pmax: f64, cost: f64) -> Bus {
    Bus {
        name: String::new(),
        demand_mw: d,
        gen_min_mw: 0.0,
        gen_max_mw: pmax,
        gen_cost: cost,
    }
}

fn toy_line(from: usize, to: usize, susceptance: f64, lim: f64) -> Line {
    Line {
        from,
        to,
        susceptance,
        flow_min_mw: -lim,
        flow_max_mw: lim,
    }
}

/// Five-bus meshed network with three generators of different cost.
pub const TOY_LIMIT: f64 = 160.0;

pub fn toy_grid(limit: f64) -> Network {
    Network::new(
        "toy5".into(),
        0,
        vec![
            toy_bus(0.0, 400.0, 10.0),
            toy_bus(120.0, 0.0, 0.0),
            toy_bus(60.0, 250.0, 30.0),
            toy_bus(100.0, 0.0, 0.0),
            toy_bus(40.0, 150.0, 50.0),
        ],
        vec![
            toy_line(0, 1, 10.0, limit),
            toy_line(1, 2, 8.0, limit),
            toy_line(2, 3, 12.0, limit),
            toy_line(3, 4, 9.0, limit),
            toy_line(4, 0, 7.0, limit),
            toy_line(1, 3, 5.0, limit),
        ],
    )
    .unwrap()
}

pub fn toy_prepare_config(k: usize, seed: u64) -> PrepareConfig {
    PrepareConfig {
        k,
        seed,
        sizes: SplitSizes {
            train: 600,
            val: 200,
            test: 200,
        },
        ..Default::default()
    }
}

pub fn toy_training_config() -> TrainingConfig {
    TrainingConfig {
        warm_epochs: 150,
        scaling_epochs: 200,
        batch_size: 200,
        decay_epochs: vec![320],
        width: 16,
        ..Default::default()
    }
}

/// Region artifact, dataset and a trained certified classifier on the toy grid.
pub fn toy_pipeline() -> (Network, RegionArtifact, ScreeningDataset, ScaledClassifier) {
    let net = toy_grid(TOY_LIMIT);
    let (art, ds) = prepare(&net, &toy_prepare_config(2, 1)).unwrap();
    let out = train(&ds, &art.region_std, &art.bbox_std, &toy_training_config(), |_| {}).unwrap();
    assert!(out.certificate.is_reliable());
    (net, art, ds, out.classifier)
}

/// Flows from bus angles: solves the slack-grounded Laplacian system by
/// Gaussian elimination and applies `b (θ_from − θ_to)`.
pub fn angle_flows(net: &Network, removed: &BTreeSet<usize>, x: &[f64]) -> Vec<f64> {
    let n = net.num_buses();
    let s = net.slack_bus();
    let mut lap = vec![vec![0.0; n]; n];
    for (l, ln) in net.lines().iter().enumerate() {
        if removed.contains(&l) {
            continue;
        }
        lap[ln.from][ln.from] += ln.susceptance;
        lap[ln.to][ln.to] += ln.susceptance;
        lap[ln.from][ln.to] -= ln.susceptance;
        lap[ln.to][ln.from] -= ln.susceptance;
    }
    let idx: Vec<usize> = (0..n).filter(|&i| i != s).collect();
    let mut a: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| lap[i][j]).collect()).collect();
    let mut rhs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let k = idx.len();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        rhs.swap(c, p);
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            for q in c..k {
                a[r][q] -= f * a[c][q];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut th = vec![0.0; k];
    for r in (0..k).rev() {
        let tail: f64 = (r + 1..k).map(|q| a[r][q] * th[q]).sum();
        th[r] = (rhs[r] - tail) / a[r][r];
    }
    let mut theta = vec![0.0; n];
    for (t, &i) in th.iter().zip(&idx) {
        theta[i] = *t;
    }
    net.lines()
        .iter()
        .enumerate()
        .filter(|(l, _)| !removed.contains(l))
        .map(|(_, ln)| ln.susceptance * (theta[ln.from] - theta[ln.to]))
        .collect()
}
