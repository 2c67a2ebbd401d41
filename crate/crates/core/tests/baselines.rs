mod common;

use common::*;
use nkscreen::baselines::*;
use nkscreen::data::{ScreeningDataset, Split, SplitSizes};
use nkscreen::icnn::DEFAULT_BOX_GAIN;
use nkscreen::pipeline::prepare;
use nkscreen::region::ContingencyRegion;
use nkscreen::training::{Adam, TrainingConfig};
use nkscreen::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square() -> ContingencyRegion {
    let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    ContingencyRegion::from_halfspaces(&rows, &[1.0; 4]).unwrap()
}

fn disc_dataset(seed: u64, sizes: SplitSizes) -> ScreeningDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..sizes.total())
        .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let infeasible = x.iter().map(|p| p[0] * p[0] + p[1] * p[1] > 1.5).collect();
    ScreeningDataset {
        demands: x.clone(),
        x,
        infeasible,
        mu: vec![0.0; 2],
        sigma: vec![1.0; 2],
        sizes,
    }
}

fn mlp_config() -> TrainingConfig {
    TrainingConfig {
        warm_epochs: 5,
        scaling_epochs: 25,
        batch_size: 64,
        depth: 2,
        width: 10,
        ..Default::default()
    }
}

#[test]
fn origin_is_feasible() {
    for early in [false, true] {
        assert_eq!(exhaustive_screen(&square(), &[0.0, 0.0], early).unwrap(), ScreenOutcome::Feasible);
    }
}

#[test]
fn single_violated_row_is_infeasible() {
    for early in [false, true] {
        assert_eq!(exhaustive_screen(&square(), &[0.0, -1.5], early).unwrap(), ScreenOutcome::Infeasible);
        assert_eq!(exhaustive_screen(&square(), &[1.0, 1.0], early).unwrap(), ScreenOutcome::Feasible);
    }
}

#[test]
fn exhaustive_dimension_mismatch() {
    assert!(matches!(
        exhaustive_screen(&square(), &[0.0], true),
        Err(Error::DimensionMismatch { expected: 2, got: 1 })
    ));
}

#[test]
fn exhaustive_agrees_with_pipeline_labels() {
    let (art, ds) = prepare(&toy_grid(TOY_LIMIT), &toy_prepare_config(2, 3)).unwrap();
    for early in [false, true] {
        let s = ExhaustiveScreener {
            region: art.region_std.clone(),
            early_exit: early,
        };
        let report = run_screen(&s, &ds.x, &ds.infeasible).unwrap();
        assert_eq!(report.confusion.fp, 0);
        assert_eq!(report.confusion.fn_, 0);
        assert!(report.confusion.tp > 0 && report.confusion.tn > 0);
    }
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let ds = disc_dataset(1, SplitSizes { train: 50, val: 0, test: 0 });
    let p = MlpParams::init(2, &[6, 5], cube(2, 2.5), DEFAULT_BOX_GAIN, 3).unwrap();
    let idx: Vec<usize> = (0..50).collect();
    let (_, g) = mlp_batch_loss_grad(&p, &ds.x, &ds.infeasible, &idx, 1.5);
    assert_eq!(g.len(), p.num_params());
    for i in 0..p.num_params() {
        let fd = central_diff(&p.theta, i, 1e-6, |theta| {
            let mut q = p.clone();
            q.theta.copy_from_slice(theta);
            mlp_batch_loss_grad(&q, &ds.x, &ds.infeasible, &idx, 1.5).0
        });
        assert!(rel_close(fd, g[i], 1e-4, 1e-7), "param {i}: {fd} vs {}", g[i]);
    }
}

#[test]
fn mlp_single_sample_overfits() {
    let xs = vec![vec![0.4, 0.1]];
    for label in [false, true] {
        let mut p = MlpParams::init(2, &[8], cube(2, 3.0), DEFAULT_BOX_GAIN, 5).unwrap();
        let mut adam = Adam::new(p.num_params());
        let mut loss = f64::INFINITY;
        for _ in 0..1500 {
            let (l, g) = mlp_batch_loss_grad(&p, &xs, &[label], &[0], 1.0);
            loss = l;
            adam.step(&mut p.theta, &g, 1e-2);
        }
        assert!(loss < 1e-2, "label {label}: loss {loss}");
    }
}

#[test]
fn mlp_training_is_deterministic_and_learns() {
    let ds = disc_dataset(2, SplitSizes { train: 600, val: 200, test: 200 });
    let a = train_mlp(&ds, &cube(2, 2.5), &mlp_config(), |_| {}).unwrap();
    let b = train_mlp(&ds, &cube(2, 2.5), &mlp_config(), |_| {}).unwrap();
    assert_eq!(a.params.theta, b.params.theta);
    assert_eq!(a.record.epochs.len(), 30);
    let te = ds.range(Split::Test);
    let report = run_screen(&MlpScreener(a.params), &ds.x[te.clone()], &ds.infeasible[te]).unwrap();
    assert!(report.fpr + report.fnr < 0.4, "{report:?}");
}

#[test]
fn certified_icnn_screens_without_false_negatives() {
    let (_, art, ds, clf) = toy_pipeline();
    let inputs = ScreenerInputs {
        classifier: Some(&clf),
        mlp: None,
        region: Some(&art.region_std),
    };
    let te = ds.range(Split::Test);
    let icnn = run_screen(screener("icnn", &inputs).unwrap().as_ref(), &ds.x[te.clone()], &ds.infeasible[te.clone()]).unwrap();
    assert_eq!(icnn.confusion.fn_, 0);
    assert_eq!(icnn.method, "icnn");
    let exact = run_screen(screener("exhaustive", &inputs).unwrap().as_ref(), &ds.x[te.clone()], &ds.infeasible[te]).unwrap();
    assert_eq!(exact.fpr, 0.0);
    assert_eq!(exact.fnr, 0.0);
}

#[test]
fn screener_registry() {
    let region = square();
    let mlp = MlpParams::init(2, &[3], cube(2, 2.0), DEFAULT_BOX_GAIN, 0).unwrap();
    let clf = nkscreen::icnn::ScaledClassifier::unscaled(box_icnn(2, 1.0));
    let inputs = ScreenerInputs {
        classifier: Some(&clf),
        mlp: Some(&mlp),
        region: Some(&region),
    };
    for name in SCREENERS {
        assert_eq!(screener(name, &inputs).unwrap().name(), name);
    }
    assert!(matches!(screener("psychic", &inputs), Err(Error::UnknownStrategy { .. })));
    assert!(matches!(screener("icnn", &ScreenerInputs::default()), Err(Error::InvalidConfig(_))));
    let s = screener("exhaustive", &inputs).unwrap();
    assert!(s.screen(&[vec![0.0, 0.0, 0.0]]).is_err());
    assert_eq!(s.screen(&[vec![0.0, 0.0], vec![3.0, 0.0]]).unwrap(), vec![false, true]);
}
