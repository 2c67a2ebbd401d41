//! Cross-checks the simplex against brute-force vertex enumeration on small
//! bounded programs, plus KKT and strong-duality properties.

use nkscreen_lp::{solve, LpProblem, LpStatus, Relation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    c: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn random_case(seed: u64, allow_infeasible: bool) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=8);
    let c = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut rows = Vec::new();
    for i in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rhs = if allow_infeasible {
            rng.random_range(-1.5..1.0)
        } else {
            rng.random_range(0.1..1.0)
        };
        let rel = if i == 0 && n > 1 && rng.random_bool(0.3) {
            Relation::Eq
        } else {
            Relation::Le
        };
        rows.push((a, rel, rhs));
    }
    let lo = (0..n).map(|_| rng.random_range(-2.0..-0.5)).collect();
    let hi = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    Case { c, rows, lo, hi }
}

fn build(case: &Case) -> LpProblem {
    let mut p = LpProblem::new(case.c.clone());
    for (a, rel, b) in &case.rows {
        p.add_constraint(a.clone(), *rel, *b).unwrap();
    }
    for j in 0..case.c.len() {
        p.set_bounds(j, case.lo[j], case.hi[j]).unwrap();
    }
    p
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(p, col);
        b.swap(p, col);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in 0..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Best objective over all vertices, or `None` when no vertex is feasible.
fn vertex_oracle(case: &Case) -> Option<f64> {
    let n = case.c.len();
    let mut all: Vec<(Vec<f64>, f64, bool)> = case
        .rows
        .iter()
        .map(|(a, rel, b)| (a.clone(), *b, *rel == Relation::Eq))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        all.push((e.clone(), case.hi[j], false));
        e[j] = -1.0;
        all.push((e, -case.lo[j], false));
    }
    let total = all.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| all[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| all[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            let ok = all.iter().all(|(g, h, eq)| {
                let lhs: f64 = g.iter().zip(&x).map(|(u, v)| u * v).sum();
                if *eq {
                    (lhs - h).abs() <= 1e-9
                } else {
                    lhs <= h + 1e-9
                }
            });
            if ok {
                let v: f64 = case.c.iter().zip(&x).map(|(u, v)| u * v).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next combination
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < total - n + k {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn objective_matches_vertex_enumeration(seed in any::<u64>(), loose in any::<bool>()) {
        let case = random_case(seed, loose);
        let p = build(&case);
        let sol = solve(&p).unwrap();
        match vertex_oracle(&case) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective_value - best).abs() <= 1e-6,
                    "simplex {} vs oracle {}", sol.objective_value, best);
            }
        }
    }

    #[test]
    fn kkt_and_strong_duality(seed in any::<u64>()) {
        let case = random_case(seed, false);
        let p = build(&case);
        let sol = solve(&p).unwrap();
        if sol.status != LpStatus::Optimal {
            // an equality row can make a shifted problem empty
            prop_assert!(vertex_oracle(&case).is_none());
            return Ok(());
        }
        let tol_feas = 1e-7;
        let tol_comp = 1e-6;
        prop_assert!(p.max_violation(&sol.primal) <= tol_feas);
        for (i, con) in p.constraints().iter().enumerate() {
            let lhs: f64 = con.coeffs.iter().zip(&sol.primal).map(|(u, v)| u * v).sum();
            if con.relation == Relation::Le {
                prop_assert!(sol.duals[i] >= -tol_feas);
                prop_assert!((sol.duals[i] * (con.rhs - lhs)).abs() <= tol_comp);
            }
        }
        // stationarity: c = Σ y_i a_i + bound duals
        for j in 0..p.num_vars() {
            let mut g = sol.bound_duals[j];
            for (i, con) in p.constraints().iter().enumerate() {
                g += sol.duals[i] * con.coeffs[j];
            }
            prop_assert!((g - p.objective()[j]).abs() <= 1e-8);
        }
        prop_assert!((sol.dual_objective(&p) - sol.objective_value).abs() <= 1e-6);
    }

    #[test]
    fn solve_is_deterministic(seed in any::<u64>()) {
        let p = build(&random_case(seed, true));
        let a = solve(&p).unwrap();
        let b = solve(&p).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert_eq!(a.primal, b.primal);
            prop_assert_eq!(a.duals, b.duals);
        }
    }
}

#[test]
fn tall_program_with_many_redundant_rows() {
    // Unit disc approximated by 2,000 tangent half-planes; max x + y.
    let k = 2000;
    let mut p = LpProblem::new(vec![1.0, 1.0]);
    for i in 0..k {
        let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        p.add_le(vec![th.cos(), th.sin()], 1.0).unwrap();
    }
    let sol = solve(&p).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective_value - 2f64.sqrt()).abs() < 1e-5);
    assert!((sol.dual_objective(&p) - sol.objective_value).abs() < 1e-9);
}
