mod common;

use common::*;
use nkscreen::data::Split;
use nkscreen::icnn::ScaledClassifier;
use nkscreen::region::ContingencyRegion;
use nkscreen::scopf::*;
use nkscreen::Error;

#[test]
fn dcopf_formulation_matches_network_dcopf() {
    let net = toy_grid(TOY_LIMIT);
    let setup = ScopfSetup {
        net: &net,
        security: None,
        classifier: None,
    };
    let f = scopf_formulation("dcopf", &setup).unwrap();
    let d = net.demand();
    let got = f.solve(&d).unwrap();
    let want = net.solve_dcopf(&d).unwrap().unwrap();
    assert_eq!(got.status, ScopfStatus::Optimal);
    assert!((got.cost().unwrap() - want.cost).abs() < 1e-6 * want.cost);
}

#[test]
fn loose_region_leaves_dcopf_cost() {
    let net = toy_grid(TOY_LIMIT);
    let n = net.num_buses();
    let rows: Vec<Vec<f64>> = (0..n)
        .flat_map(|i| {
            [1.0, -1.0].map(|s| {
                let mut r = vec![0.0; n];
                r[i] = s;
                r
            })
        })
        .collect();
    let region = ContingencyRegion::from_halfspaces(&rows, &vec![1e4; 2 * n]).unwrap();
    let (mu, sigma) = (vec![0.0; n], vec![1.0; n]);
    let setup = ScopfSetup {
        net: &net,
        security: Some(SecurityRegion {
            region: &region,
            fixed: &[],
            mu: &mu,
            sigma: &sigma,
        }),
        classifier: None,
    };
    let d = net.demand();
    let full = scopf_formulation("full", &setup).unwrap().solve(&d).unwrap().cost().unwrap();
    let base = scopf_formulation("dcopf", &setup).unwrap().solve(&d).unwrap().cost().unwrap();
    assert!((full - base).abs() < 1e-6 * base);
}

#[test]
fn secured_formulations_are_sound_and_ordered() {
    let (net, art, ds, clf) = toy_pipeline();
    let security = SecurityRegion::from_artifact(&art);
    let setup = ScopfSetup {
        net: &net,
        security: Some(security),
        classifier: Some(&clf),
    };
    let [dcopf, full, icnn] = SCOPF_FORMULATIONS.map(|name| scopf_formulation(name, &setup).unwrap());
    let te = ds.range(Split::Test);
    let mut icnn_feasible = 0;
    for d in &ds.demands[te] {
        let base = dcopf.solve(d).unwrap();
        let secured = full.solve(d).unwrap();
        let inner = icnn.solve(d).unwrap();
        if let Some(disp) = &secured.dispatch {
            assert!(security.violation(&disp.injection(d)) <= 1e-6);
            assert!(secured.cost().unwrap() >= base.cost().unwrap() - 1e-6);
        }
        if let Some(disp) = &inner.dispatch {
            icnn_feasible += 1;
            assert!(security.violation(&disp.injection(d)) <= 1e-6);
            let reference = secured.cost().expect("ICNN-feasible instances are fully feasible");
            assert!(inner.cost().unwrap() >= reference - 1e-6 * reference);
        }
    }
    assert!(icnn_feasible > 0);
}

#[test]
fn benchmark_summary_is_consistent() {
    let (net, art, ds, clf) = toy_pipeline();
    let security = SecurityRegion::from_artifact(&art);
    let setup = ScopfSetup {
        net: &net,
        security: Some(security),
        classifier: Some(&clf),
    };
    let full = scopf_formulation("full", &setup).unwrap();
    let icnn = scopf_formulation("icnn", &setup).unwrap();
    let te = ds.range(Split::Test);
    let report = run_bench(full.as_ref(), icnn.as_ref(), security, &ds.demands[te.clone()]).unwrap();
    let s = &report.summary;
    assert_eq!(s.instances, te.len());
    assert_eq!(report.rows.len(), 2 * te.len());
    assert_eq!(s.candidate_only_feasible, 0);
    assert!(s.max_candidate_violation <= 1e-6);
    assert!(s.extra_infeasible_share >= 0.0);
    assert!(report.rows.iter().filter_map(|r| r.excess_cost_pct).all(|p| p >= -1e-6));
    assert_eq!(report.to_csv().lines().count(), 2 * te.len() + 1);
}

#[test]
fn empty_predicted_set_is_infeasible() {
    let (net, art, _, clf) = toy_pipeline();
    let mut params = clf.params.clone();
    let l = params.layout();
    params.theta[l.b[l.depth()].at(0, 0)] = 1e6;
    for v in &mut params.theta[l.d[l.depth()].range()] {
        *v = 0.0;
    }
    for v in &mut params.theta[l.w[l.depth() - 1].range()] {
        *v = 0.0;
    }
    let empty = ScaledClassifier::new(params, clf.r, clf.v.clone()).unwrap();
    let setup = ScopfSetup {
        net: &net,
        security: Some(SecurityRegion::from_artifact(&art)),
        classifier: Some(&empty),
    };
    let r = scopf_formulation("icnn", &setup).unwrap().solve(&net.demand()).unwrap();
    assert_eq!(r.status, ScopfStatus::Infeasible);
    assert!(r.dispatch.is_none());
}

#[test]
fn formulation_registry() {
    let net = toy_grid(TOY_LIMIT);
    let bare = ScopfSetup {
        net: &net,
        security: None,
        classifier: None,
    };
    assert_eq!(scopf_formulation("dcopf", &bare).unwrap().name(), "dcopf");
    assert!(matches!(scopf_formulation("full", &bare), Err(Error::InvalidConfig(_))));
    assert!(matches!(scopf_formulation("icnn", &bare), Err(Error::InvalidConfig(_))));
    assert!(matches!(scopf_formulation("ac", &bare), Err(Error::UnknownStrategy { .. })));
    let f = scopf_formulation("dcopf", &bare).unwrap();
    assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
}

struct Flaky;

impl ScopfFormulation for Flaky {
    fn name(&self) -> &'static str {
        "flaky"
    }

    fn solve(&self, demand: &[f64]) -> nkscreen::Result<ScopfResult> {
        if demand[1] > 120.0 {
            return Err(Error::InvalidNetwork("synthetic failure".into()));
        }
        Ok(ScopfResult {
            formulation: "flaky".into(),
            status: ScopfStatus::Infeasible,
            dispatch: None,
            seconds: 0.0,
        })
    }
}

#[test]
fn benchmark_records_failures_and_continues() {
    let (net, art, ds, _) = toy_pipeline();
    let security = SecurityRegion::from_artifact(&art);
    let setup = ScopfSetup {
        net: &net,
        security: Some(security),
        classifier: None,
    };
    let full = scopf_formulation("full", &setup).unwrap();
    let te = ds.range(Split::Test);
    let demands = &ds.demands[te];
    let report = run_bench(full.as_ref(), &Flaky, security, demands).unwrap();
    let expected = demands.iter().filter(|d| d[1] > 120.0).count();
    assert!(expected > 0 && expected < demands.len());
    assert_eq!(report.summary.failed_solves, expected);
    let failed: Vec<&BenchRow> = report.rows.iter().filter(|r| r.status == ScopfStatus::Failed).collect();
    assert_eq!(failed.len(), expected);
    assert!(failed.iter().all(|r| r.error.as_deref() == Some("invalid network: synthetic failure")));
    assert!(matches!(
        run_bench(full.as_ref(), &Flaky, security, &[vec![0.0; 3]]),
        Err(Error::DimensionMismatch { expected: 5, got: 3 })
    ));
}
