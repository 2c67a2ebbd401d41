mod common;

use std::f64::consts::LN_2;

use common::*;
use nkscreen::data::{ScreeningDataset, Split, SplitSizes};
use nkscreen::icnn::{IcnnParams, DEFAULT_BOX_GAIN};
use nkscreen::oracle::scale_fast;
use nkscreen::region::ContingencyRegion;
use nkscreen::training::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_region() -> ContingencyRegion {
    let rows = vec![vec![1.0, 0.3], vec![-0.4, 1.0], vec![-1.0, -0.2], vec![0.2, -1.0], vec![0.7, 0.7]];
    ContingencyRegion::from_halfspaces(&rows, &[1.2, 1.0, 1.1, 0.9, 1.1]).unwrap()
}

fn toy_dataset(seed: u64, sizes: SplitSizes) -> ScreeningDataset {
    let region = toy_region();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..sizes.total())
        .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let infeasible = region.label_all(&x).unwrap();
    ScreeningDataset {
        demands: x.clone(),
        x,
        infeasible,
        mu: vec![0.0; 2],
        sigma: vec![1.0; 2],
        sizes,
    }
}

fn small_config() -> TrainingConfig {
    TrainingConfig {
        warm_epochs: 20,
        scaling_epochs: 150,
        batch_size: 100,
        decay_epochs: vec![120],
        width: 12,
        ..Default::default()
    }
}

#[test]
fn weighted_bce_examples() {
    assert!((weighted_bce(0.0, false, 1.0) - LN_2).abs() < 1e-12);
    assert!((weighted_bce(0.0, true, 1.5) - 1.5 * LN_2).abs() < 1e-12);
    assert!((weighted_bce_grad(0.0, false, 1.0) - 0.5).abs() < 1e-12);
    assert!((weighted_bce_grad(0.0, true, 2.0) + 1.0).abs() < 1e-12);
    assert!(weighted_bce(800.0, false, 1.0).is_finite());
    assert!(weighted_bce(-800.0, true, 1.0).is_finite());
}

#[test]
fn confusion_rates() {
    let c = Confusion::from_predictions(&[true, true, false, false, false], &[true, false, false, true, false]);
    assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 1, 2, 1));
    assert!((c.fnr() - 0.5).abs() < 1e-12);
    assert!((c.fpr() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn learning_rate_schedule() {
    let cfg = TrainingConfig {
        learning_rate: 1.0,
        decay_epochs: vec![10, 20],
        decay_factor: 0.1,
        ..Default::default()
    };
    assert_eq!(cfg.lr_at(9), 1.0);
    assert!((cfg.lr_at(10) - 0.1).abs() < 1e-15);
    assert!((cfg.lr_at(25) - 0.01).abs() < 1e-15);
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        TrainingConfig { scaling_epochs: 0, ..Default::default() },
        TrainingConfig { batch_size: 0, ..Default::default() },
        TrainingConfig { pos_weight: 0.0, ..Default::default() },
        TrainingConfig { learning_rate: f64::NAN, ..Default::default() },
    ] {
        assert!(cfg.validate().is_err());
    }
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let ds = toy_dataset(1, SplitSizes { train: 200, val: 50, test: 50 });
    let region = toy_region();
    let cfg = TrainingConfig {
        learning_rate: 0.0,
        ..small_config()
    };
    let p0 = random_icnn(4, 2, &[6], 2.5, 0.5);
    let tr = ds.range(Split::Train);
    let mut t = Trainer::new(cfg, p0.clone(), &ds.x[tr.clone()], &ds.infeasible[tr]).unwrap();
    t.warm_epoch();
    assert_eq!(t.params.theta, p0.theta);
    let (_, s1) = t.scaling_epoch(&region).unwrap();
    let (_, s2) = t.scaling_epoch(&region).unwrap();
    assert_eq!(s1.r, s2.r);
    assert_eq!(t.params.theta, p0.theta);
}

#[test]
fn single_sample_overfits() {
    let xs = vec![vec![0.3, -0.2]];
    for label in [false, true] {
        let mut p = IcnnParams::init(2, &[8], cube(2, 3.0), DEFAULT_BOX_GAIN, 9).unwrap();
        let mut adam = Adam::new(p.num_params());
        let mut loss = f64::INFINITY;
        for _ in 0..2000 {
            let (l, g) = batch_loss_grad(&p, &xs, &[label], &[0], 1.0);
            loss = l;
            adam.step(&mut p.theta, &g, 1e-2);
            p.project_convex();
        }
        assert!(loss < 1e-2, "label {label}: loss {loss}");
        assert!(p.is_convex());
    }
}

#[test]
fn batch_gradient_matches_finite_differences() {
    let ds = toy_dataset(2, SplitSizes { train: 64, val: 0, test: 0 });
    let p = IcnnParams::init(2, &[5, 4], cube(2, 2.5), DEFAULT_BOX_GAIN, 13).unwrap();
    let idx: Vec<usize> = (0..64).collect();
    let (_, g) = batch_loss_grad(&p, &ds.x, &ds.infeasible, &idx, 1.3);
    let loss = |theta: &[f64]| {
        let mut q = p.clone();
        q.theta.copy_from_slice(theta);
        batch_loss_grad(&q, &ds.x, &ds.infeasible, &idx, 1.3).0
    };
    for i in 0..p.num_params() {
        let fd = central_diff(&p.theta, i, 1e-6, loss);
        assert!(rel_close(fd, g[i], 1e-4, 1e-7), "param {i}: {fd} vs {}", g[i]);
    }
}

#[test]
fn scaled_loss_gradient_matches_finite_differences() {
    let region = toy_region();
    let ds = toy_dataset(3, SplitSizes { train: 40, val: 0, test: 0 });
    let idx: Vec<usize> = (0..40).collect();
    let mut checked = 0;
    for t in 0..40u64 {
        if checked == 8 {
            break;
        }
        let base = random_icnn(700 + t, 2, &[5], 2.5, 0.6);
        let Ok(s) = scale_fast(&base, &region) else { continue };
        let (_, g) = scaled_batch_loss_grad(&base, &region, &s, &ds.x, &ds.infeasible, &idx, 1.0).unwrap();
        let loss_of = |theta: &[f64]| {
            let mut q = base.clone();
            q.theta.copy_from_slice(theta);
            let s = scale_fast(&q, &region).ok()?;
            let (l, _) = scaled_batch_loss_grad(&q, &region, &s, &ds.x, &ds.infeasible, &idx, 1.0).ok()?;
            Some((l, s.j_star))
        };
        let l0 = loss_of(&base.theta).unwrap().0;
        let h = 1e-6;
        let (mut stable, mut ok) = (true, true);
        for i in 0..base.num_params() {
            let (mut up, mut down) = (base.theta.clone(), base.theta.clone());
            up[i] += h;
            down[i] -= h;
            let (Some(u), Some(d)) = (loss_of(&up), loss_of(&down)) else {
                stable = false;
                break;
            };
            let (fwd, bwd) = ((u.0 - l0) / h, (l0 - d.0) / h);
            if u.1 != s.j_star || d.1 != s.j_star || !rel_close(fwd, bwd, 1e-4, 1e-8) {
                stable = false;
                break;
            }
            ok &= rel_close((u.0 - d.0) / (2.0 * h), g[i], 1e-3, 1e-7);
        }
        if stable {
            assert!(ok, "configuration {t}");
            checked += 1;
        }
    }
    assert_eq!(checked, 8);
}

#[test]
fn training_keeps_weights_nonnegative_and_is_deterministic() {
    let ds = toy_dataset(4, SplitSizes { train: 400, val: 200, test: 200 });
    let region = toy_region();
    let cfg = TrainingConfig {
        depth: 2,
        scaling_epochs: 40,
        ..small_config()
    };
    let a = train(&ds, &region, &cube(2, 2.5), &cfg, |_| {}).unwrap();
    let b = train(&ds, &region, &cube(2, 2.5), &cfg, |_| {}).unwrap();
    assert_eq!(a.classifier, b.classifier);
    assert_eq!(a.record.best_epoch, b.record.best_epoch);
    assert!(a.classifier.params.is_convex());
    let w = a.classifier.params.layout().w_range();
    assert!(a.classifier.params.theta[w].iter().all(|v| *v >= 0.0));
}

#[test]
fn smoke_training_is_certified_and_reliable() {
    let ds = toy_dataset(5, SplitSizes { train: 1000, val: 500, test: 500 });
    let region = toy_region();
    let mut records = 0;
    let out = train(&ds, &region, &cube(2, 2.5), &small_config(), |_| records += 1).unwrap();
    assert_eq!(records, 170);
    assert_eq!(out.record.epochs.len(), 170);
    assert!(out.certificate.is_reliable());
    let te = ds.range(Split::Test);
    let pred: Vec<bool> = out.classifier.forward_many(&ds.x[te.clone()]).iter().map(|f| *f > 0.0).collect();
    let c = Confusion::from_predictions(&pred, &ds.infeasible[te]);
    assert_eq!(c.fn_, 0);
    assert!(c.fpr() < 0.5, "fpr {}", c.fpr());
    let csv = out.record.to_csv();
    assert_eq!(csv.lines().count(), 171);
    assert!(csv.starts_with("epoch,phase,"));
}

#[test]
fn training_rejects_mismatched_region() {
    let ds = toy_dataset(6, SplitSizes { train: 50, val: 10, test: 10 });
    let region = ContingencyRegion::from_halfspaces(&[vec![1.0, 0.0, 0.0]], &[1.0]).unwrap();
    assert!(train(&ds, &region, &cube(2, 2.5), &small_config(), |_| {}).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_loss_bounds_exact_loss(
        raw in proptest::collection::vec(-20.0f64..20.0, 1..20),
        viol_seed in proptest::collection::vec(-3.0f64..3.0, 20),
        labels in proptest::collection::vec(any::<bool>(), 20),
        w in 0.2f64..3.0,
    ) {
        let n = raw.len();
        let (viol, ys) = (&viol_seed[..n], &labels[..n]);
        let (loss, _, _) = split_loss(DEFAULT_BOX_GAIN, &raw, viol, ys, w);
        let exact: f64 = (0..n)
            .map(|s| weighted_bce(raw[s].max(DEFAULT_BOX_GAIN * viol[s]), ys[s], w))
            .sum::<f64>() / n as f64;
        prop_assert!(loss >= exact - 1e-12);
        if ys.iter().all(|y| *y) {
            prop_assert!((loss - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_cycler_covers_each_pass(n in 1usize..60, size in 1usize..25, seed in any::<u64>()) {
        let mut c = BatchCycler::new(n, seed);
        for _ in 0..2 {
            let mut seen = vec![0; n];
            for _ in 0..c.batches_per_pass(size) {
                for i in c.next_batch(size) {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|v| *v == 1));
        }
    }
}
