mod common;

use std::collections::{BTreeSet, VecDeque};

use common::*;
use nkscreen::grid::{Bus, Line, Network};
use nkscreen::region::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ring() -> Network {
    let bus = Bus {
        name: String::new(),
        demand_mw: 0.0,
        gen_min_mw: 0.0,
        gen_max_mw: 1.0,
        gen_cost: 1.0,
    };
    let line = |from, to| Line {
        from,
        to,
        susceptance: 1.0,
        flow_min_mw: -1.0,
        flow_max_mw: 1.0,
    };
    Network::new("ring".into(), 0, vec![bus; 3], vec![line(0, 1), line(1, 2), line(2, 0)]).unwrap()
}

fn connected_without(net: &Network, removed: &[usize]) -> bool {
    let n = net.num_buses();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for (l, ln) in net.lines().iter().enumerate() {
            if removed.contains(&l) {
                continue;
            }
            for (a, b) in [(ln.from, ln.to), (ln.to, ln.from)] {
                if a == u && !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
    }
    seen.iter().all(|s| *s)
}

/// Feasible iff every surviving line of every contingency stays within its limits.
fn flow_oracle(net: &Network, contingencies: &[Vec<usize>], x: &[f64], tol: f64) -> bool {
    contingencies.iter().all(|c| {
        let removed: BTreeSet<usize> = c.iter().copied().collect();
        let surviving = (0..net.num_lines()).filter(|l| !removed.contains(l));
        angle_flows(net, &removed, x).iter().zip(surviving).all(|(f, l)| {
            let line = &net.lines()[l];
            *f <= line.flow_max_mw + tol && *f >= line.flow_min_mw - tol
        })
    })
}

fn balanced_injections(rng: &mut ChaCha8Rng, n: usize, count: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            x.iter().map(|v| v - mean).collect()
        })
        .collect()
}

#[test]
fn ring_single_outages() {
    let net = ring();
    let cs = enumerate_nk(&net, 1);
    assert_eq!(cs.len(), 3);
    assert_eq!(assemble_region(&net, &cs).unwrap().num_rows(), 12);
    assert!(enumerate_nk(&net, 2).contingencies.iter().all(|c| c.len() == 1));
}

#[test]
fn enumeration_matches_connectivity_count() {
    let net = toy_grid(TOY_LIMIT);
    let m = net.num_lines();
    let mut expected = 0;
    for a in 0..m {
        expected += usize::from(connected_without(&net, &[a]));
        for b in a + 1..m {
            expected += usize::from(connected_without(&net, &[a, b]));
        }
    }
    let cs = enumerate_nk(&net, 2);
    assert_eq!(cs.len(), expected);
    assert!(cs.contingencies.iter().all(|c| connected_without(&net, c)));
    let distinct: BTreeSet<&Vec<usize>> = cs.contingencies.iter().collect();
    assert_eq!(distinct.len(), cs.len());
}

#[test]
fn membership_matches_flow_oracle_before_and_after_elimination() {
    let net = toy_grid(TOY_LIMIT);
    let cs = enumerate_nk(&net, 2);
    let full = assemble_region(&net, &cs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let xs = balanced_injections(&mut rng, net.num_buses(), 500, 260.0);
    let bbox = BoundingBox::from_samples(&xs, 1.2);
    let mut feasible = 0;
    let reduced: Vec<ContingencyRegion> = REDUNDANCY_STRATEGIES
        .iter()
        .map(|name| redundancy_strategy(name).unwrap().eliminate(&full, &bbox).unwrap())
        .collect();
    for x in &xs {
        let truth = flow_oracle(&net, &cs.contingencies, x, 1e-6);
        feasible += usize::from(truth);
        assert_eq!(full.contains(x, 1e-6), truth);
        for r in &reduced {
            assert!(bbox.contains(x, 0.0));
            assert_eq!(r.contains(x, 1e-6), truth);
        }
    }
    assert!(feasible > 50 && feasible < 450, "{feasible} feasible");
    for r in &reduced {
        assert!(r.num_rows() < full.num_rows());
    }
}

#[test]
fn elimination_is_idempotent() {
    let net = toy_grid(TOY_LIMIT);
    let full = assemble_region(&net, &enumerate_nk(&net, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bbox = BoundingBox::from_samples(&balanced_injections(&mut rng, net.num_buses(), 200, 200.0), 1.2);
    for name in REDUNDANCY_STRATEGIES {
        let s = redundancy_strategy(name).unwrap();
        let once = s.eliminate(&full, &bbox).unwrap();
        let twice = s.eliminate(&once, &bbox).unwrap();
        assert_eq!(once, twice, "{name}");
    }
}

#[test]
fn exact_elimination_is_no_larger_than_box_elimination() {
    let net = toy_grid(TOY_LIMIT);
    let full = assemble_region(&net, &enumerate_nk(&net, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let bbox = BoundingBox::from_samples(&balanced_injections(&mut rng, net.num_buses(), 200, 200.0), 1.2);
    let by_box = eliminate_box_redundant(&full, &bbox).unwrap();
    let exact = eliminate_redundant(&full, &bbox).unwrap();
    assert!(exact.num_rows() <= by_box.num_rows());
}

#[test]
fn unknown_redundancy_strategy() {
    assert!(redundancy_strategy("magic").is_err());
}

#[test]
fn region_json_round_trip() {
    let net = toy_grid(TOY_LIMIT);
    let r = assemble_region(&net, &enumerate_nk(&net, 1)).unwrap();
    assert_eq!(ContingencyRegion::from_json(&r.to_json()).unwrap(), r);
    assert!(ContingencyRegion::from_json("{\"dims\": 2}").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardization_preserves_membership(
        seed in any::<u64>(),
        mu in proptest::collection::vec(-0.2f64..0.2, 5),
        sigma in proptest::collection::vec(0.5f64..20.0, 5),
    ) {
        let net = toy_grid(TOY_LIMIT);
        let r = assemble_region(&net, &enumerate_nk(&net, 1)).unwrap();
        let std = standardize_region(&r, &mu, &sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in balanced_injections(&mut rng, 5, 20, 200.0) {
            let xs: Vec<f64> = x.iter().zip(mu.iter().zip(&sigma)).map(|(v, (m, s))| (v - m) / s).collect();
            let a = r.max_violation(&x);
            let b = std.max_violation(&xs);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn constant_dimensions_preserve_membership(seed in any::<u64>(), pinned in -50.0f64..50.0) {
        let net = toy_grid(TOY_LIMIT);
        let r = assemble_region(&net, &enumerate_nk(&net, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = balanced_injections(&mut rng, 5, 30, 150.0)
            .into_iter()
            .map(|mut x| {
                x[2] = pinned;
                x
            })
            .collect();
        let (reduced, fixed) = drop_constant_dims(&r, &xs).unwrap();
        prop_assert_eq!(fixed.len(), 1);
        prop_assert_eq!(fixed[0].bus, 2);
        prop_assert_eq!(reduced.dim_map(), &[0, 1, 3, 4]);
        for x in &xs {
            let y: Vec<f64> = reduced.dim_map().iter().map(|&i| x[i]).collect();
            prop_assert!((r.max_violation(x) - reduced.max_violation(&y)).abs() <= 1e-8);
        }
    }
}
