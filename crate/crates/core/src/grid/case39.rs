//! The 39-bus New England test system in DC form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bus, Line, Network};

/// Seed for the generator cost draw of the shipped case file.
pub const COST_SEED: u64 = 39;

/// Uniform line limit in MW (both directions).
pub const LINE_LIMIT_MW: f64 = 1600.0;

// (from, to, reactance p.u.), 1-based buses.
const BRANCHES: [(usize, usize, f64); 46] = [
    (1, 2, 0.0411),
    (1, 39, 0.025),
    (2, 3, 0.0151),
    (2, 25, 0.0086),
    (2, 30, 0.0181),
    (3, 4, 0.0213),
    (3, 18, 0.0133),
    (4, 5, 0.0128),
    (4, 14, 0.0129),
    (5, 6, 0.0026),
    (5, 8, 0.0112),
    (6, 7, 0.0092),
    (6, 11, 0.0082),
    (6, 31, 0.025),
    (7, 8, 0.0046),
    (8, 9, 0.0363),
    (9, 39, 0.025),
    (10, 11, 0.0043),
    (10, 13, 0.0043),
    (10, 32, 0.02),
    (12, 11, 0.0435),
    (12, 13, 0.0435),
    (13, 14, 0.0101),
    (14, 15, 0.0217),
    (15, 16, 0.0094),
    (16, 17, 0.0089),
    (16, 19, 0.0195),
    (16, 21, 0.0135),
    (16, 24, 0.0059),
    (17, 18, 0.0082),
    (17, 27, 0.0173),
    (19, 20, 0.0138),
    (19, 33, 0.0142),
    (20, 34, 0.018),
    (21, 22, 0.014),
    (22, 23, 0.0096),
    (22, 35, 0.0143),
    (23, 24, 0.035),
    (23, 36, 0.0272),
    (25, 26, 0.0323),
    (25, 37, 0.0232),
    (26, 27, 0.0147),
    (26, 28, 0.0474),
    (26, 29, 0.0625),
    (28, 29, 0.0151),
    (29, 38, 0.0156),
];

// (bus, MW), 1-based.
const LOADS: [(usize, f64); 21] = [
    (1, 97.6),
    (3, 322.0),
    (4, 500.0),
    (7, 233.8),
    (8, 522.0),
    (9, 6.5),
    (12, 8.53),
    (15, 320.0),
    (16, 329.0),
    (18, 158.0),
    (20, 680.0),
    (21, 274.0),
    (23, 247.5),
    (24, 308.6),
    (25, 224.0),
    (26, 139.0),
    (27, 281.0),
    (28, 206.0),
    (29, 283.5),
    (31, 9.2),
    (39, 1104.0),
];

// (bus, Pmax MW), 1-based; Pmin is 0 for every unit.
const GENERATORS: [(usize, f64); 10] = [
    (30, 1040.0),
    (31, 646.0),
    (32, 725.0),
    (33, 652.0),
    (34, 508.0),
    (35, 687.0),
    (36, 580.0),
    (37, 564.0),
    (38, 865.0),
    (39, 1100.0),
];

const SLACK_BUS: usize = 31;

/// Builds the case with susceptances `1/x`, symmetric 1600 MW line limits and
/// generator costs drawn uniformly from `[10, 50]` under `cost_seed`.
pub fn ieee39(cost_seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(cost_seed);
    let mut buses: Vec<Bus> = (1..=39)
        .map(|i| Bus {
            name: format!("bus{i}"),
            demand_mw: 0.0,
            gen_min_mw: 0.0,
            gen_max_mw: 0.0,
            gen_cost: 0.0,
        })
        .collect();
    for &(bus, pd) in &LOADS {
        buses[bus - 1].demand_mw = pd;
    }
    for &(bus, pmax) in &GENERATORS {
        buses[bus - 1].gen_max_mw = pmax;
        buses[bus - 1].gen_cost = rng.random_range(10.0..50.0);
    }
    let lines = BRANCHES
        .iter()
        .map(|&(f, t, x)| Line {
            from: f - 1,
            to: t - 1,
            susceptance: 1.0 / x,
            flow_min_mw: -LINE_LIMIT_MW,
            flow_max_mw: LINE_LIMIT_MW,
        })
        .collect();
    Network::new("ieee39".into(), SLACK_BUS - 1, buses, lines).expect("39-bus data is valid")
}
