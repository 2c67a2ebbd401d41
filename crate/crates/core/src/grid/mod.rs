//! DC network model: topology, PTDF matrices, islanding checks and DC-OPF.

mod case39;

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use nkscreen_lp::{solve, LpProblem, LpStatus};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use case39::{ieee39, COST_SEED, LINE_LIMIT_MW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub name: String,
    pub demand_mw: f64,
    pub gen_min_mw: f64,
    pub gen_max_mw: f64,
    /// Linear generation cost in $/MWh.
    pub gen_cost: f64,
}

/// Directed line `from → to`; positive flow runs from `from` to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub flow_min_mw: f64,
    pub flow_max_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkData {
    name: String,
    slack_bus: usize,
    buses: Vec<Bus>,
    lines: Vec<Line>,
}

/// Validated network. Every bus carries one generator; buses without a
/// physical unit have `gen_min_mw = gen_max_mw = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkData", into = "NetworkData")]
pub struct Network {
    name: String,
    slack_bus: usize,
    buses: Vec<Bus>,
    lines: Vec<Line>,
}

impl TryFrom<NetworkData> for Network {
    type Error = Error;

    fn try_from(d: NetworkData) -> Result<Self> {
        Network::new(d.name, d.slack_bus, d.buses, d.lines)
    }
}

impl From<Network> for NetworkData {
    fn from(n: Network) -> Self {
        NetworkData {
            name: n.name,
            slack_bus: n.slack_bus,
            buses: n.buses,
            lines: n.lines,
        }
    }
}

impl Network {
    pub fn new(name: String, slack_bus: usize, buses: Vec<Bus>, lines: Vec<Line>) -> Result<Self> {
        let n = buses.len();
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if n == 0 {
            return bad("no buses".into());
        }
        if slack_bus >= n {
            return bad(format!("slack bus {slack_bus} out of range"));
        }
        for (i, b) in buses.iter().enumerate() {
            let vals = [b.demand_mw, b.gen_min_mw, b.gen_max_mw, b.gen_cost];
            if vals.iter().any(|v| !v.is_finite()) {
                return bad(format!("bus {i} has a non-finite field"));
            }
            if b.gen_min_mw > b.gen_max_mw {
                return bad(format!("bus {i} has gen_min_mw > gen_max_mw"));
            }
        }
        for (l, line) in lines.iter().enumerate() {
            if line.from >= n || line.to >= n || line.from == line.to {
                return bad(format!("line {l} has invalid endpoints"));
            }
            if !(line.susceptance > 0.0) || !line.susceptance.is_finite() {
                return bad(format!("line {l} susceptance must be positive"));
            }
            if !(line.flow_min_mw < 0.0 && line.flow_max_mw > 0.0)
                || !line.flow_min_mw.is_finite()
                || !line.flow_max_mw.is_finite()
            {
                return bad(format!("line {l} limits must satisfy min < 0 < max"));
            }
        }
        let net = Self {
            name,
            slack_bus,
            buses,
            lines,
        };
        if net.is_islanding(&BTreeSet::new()) {
            return bad("network is not connected".into());
        }
        Ok(net)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn slack_bus(&self) -> usize {
        self.slack_bus
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn demand(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.demand_mw).collect()
    }

    /// Bus-by-line incidence: `+1` at the sending bus, `−1` at the receiving bus.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.num_buses(), self.num_lines());
        for (l, line) in self.lines.iter().enumerate() {
            c[(line.from, l)] = 1.0;
            c[(line.to, l)] = -1.0;
        }
        c
    }

    /// True iff the graph without `removed` has more than one component.
    pub fn is_islanding(&self, removed: &BTreeSet<usize>) -> bool {
        let n = self.num_buses();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut components = n;
        for (l, line) in self.lines.iter().enumerate() {
            if removed.contains(&l) {
                continue;
            }
            let (a, b) = (find(&mut parent, line.from), find(&mut parent, line.to));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components > 1
    }

    /// PTDF of the lines that survive `removed`, in original line order
    /// (`m' × n`), equal to `B Cᵀ L†`; every row sums to zero.
    pub fn ptdf(&self, removed: &BTreeSet<usize>) -> Result<DMatrix<f64>> {
        if self.is_islanding(removed) {
            return Err(Error::IslandingContingency(removed.iter().copied().collect()));
        }
        let n = self.num_buses();
        let s = self.slack_bus;
        let reduced = |i: usize| if i < s { Some(i) } else if i > s { Some(i - 1) } else { None };
        let mut lap = DMatrix::<f64>::zeros(n - 1, n - 1);
        let surviving: Vec<usize> = (0..self.num_lines()).filter(|l| !removed.contains(l)).collect();
        for &l in &surviving {
            let line = &self.lines[l];
            let (f, t, b) = (reduced(line.from), reduced(line.to), line.susceptance);
            if let Some(f) = f {
                lap[(f, f)] += b;
            }
            if let Some(t) = t {
                lap[(t, t)] += b;
            }
            if let (Some(f), Some(t)) = (f, t) {
                lap[(f, t)] -= b;
                lap[(t, f)] -= b;
            }
        }
        let inv = lap
            .cholesky()
            .ok_or_else(|| Error::InvalidNetwork("reduced Laplacian is singular".into()))?
            .inverse();
        // Slack-grounded inverse; centering the PTDF columns below turns it into L†.
        let mut x = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (reduced(i), reduced(j)) {
                    x[(i, j)] = inv[(a, b)];
                }
            }
        }
        let mut h = DMatrix::<f64>::zeros(surviving.len(), n);
        for (r, &l) in surviving.iter().enumerate() {
            let line = &self.lines[l];
            for j in 0..n {
                h[(r, j)] = line.susceptance * (x[(line.from, j)] - x[(line.to, j)]);
            }
            let mean = h.row(r).sum() / n as f64;
            for j in 0..n {
                h[(r, j)] -= mean;
            }
        }
        Ok(h)
    }

    /// Economic dispatch under the nominal topology. `Ok(None)` when no
    /// dispatch satisfies generator limits, balance and line limits.
    pub fn solve_dcopf(&self, demand: &[f64]) -> Result<Option<Dispatch>> {
        let n = self.num_buses();
        if demand.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: demand.len(),
            });
        }
        let h = self.ptdf(&BTreeSet::new())?;
        let mut model = DispatchModel::new(self, demand);
        let mut lp = model.problem();
        model.add_flow_rows(&mut lp, &h, &self.flow_limits(), 1e-12)?;
        if !model.constant_rows_ok {
            return Ok(None);
        }
        let sol = solve(&lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(Some(model.dispatch(self, &sol.primal))),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::InvalidNetwork("DC-OPF is unbounded".into())),
        }
    }

    /// `(lower, upper)` per line.
    pub fn flow_limits(&self) -> Vec<(f64, f64)> {
        self.lines.iter().map(|l| (l.flow_min_mw, l.flow_max_mw)).collect()
    }
}

/// Dispatch and its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub p: Vec<f64>,
    pub cost: f64,
}

impl Dispatch {
    /// Net injection `p − d`.
    pub fn injection(&self, demand: &[f64]) -> Vec<f64> {
        self.p.iter().zip(demand).map(|(p, d)| p - d).collect()
    }
}

/// LP skeleton shared by DC-OPF and SC-OPF: one variable per bus whose
/// generator is not fixed, a balance row, and helpers to add affine rows in
/// injection space.
#[derive(Debug, Clone)]
pub struct DispatchModel {
    /// Bus index of each LP variable.
    pub var_bus: Vec<usize>,
    /// Injection `p − d` with variable generators at zero.
    pub base_injection: Vec<f64>,
    pub costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Cleared once a row without variables turned out violated.
    pub constant_rows_ok: bool,
}

impl DispatchModel {
    pub fn new(net: &Network, demand: &[f64]) -> Self {
        let mut var_bus = Vec::new();
        let mut base_injection = Vec::with_capacity(demand.len());
        let (mut costs, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
        for (i, b) in net.buses().iter().enumerate() {
            if b.gen_max_mw > b.gen_min_mw {
                var_bus.push(i);
                costs.push(b.gen_cost);
                lower.push(b.gen_min_mw);
                upper.push(b.gen_max_mw);
                base_injection.push(-demand[i]);
            } else {
                base_injection.push(b.gen_min_mw - demand[i]);
            }
        }
        Self {
            var_bus,
            base_injection,
            costs,
            lower,
            upper,
            constant_rows_ok: true,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.var_bus.len()
    }

    /// Minimum-cost objective (as a maximization), bounds and the balance row.
    pub fn problem(&self) -> LpProblem {
        self.problem_with_extra(0)
    }

    /// As [`Self::problem`] with `extra` free zero-cost variables appended
    /// after the generator variables.
    pub fn problem_with_extra(&self, extra: usize) -> LpProblem {
        let nv = self.num_vars();
        let mut obj: Vec<f64> = self.costs.iter().map(|c| -c).collect();
        obj.resize(nv + extra, 0.0);
        let mut lp = LpProblem::new(obj);
        for j in 0..nv {
            lp.set_bounds(j, self.lower[j], self.upper[j]).expect("valid bounds");
        }
        let imbalance: f64 = self.base_injection.iter().sum();
        if nv > 0 {
            let mut row = vec![1.0; nv];
            row.resize(nv + extra, 0.0);
            lp.add_eq(row, -imbalance).expect("balance row");
        }
        lp
    }

    /// LP variable of the generator at `bus`, if it is free.
    pub fn var_of(&self, bus: usize) -> Option<usize> {
        self.var_bus.iter().position(|&b| b == bus)
    }

    /// Adds `row·x ≤ rhs` with `x` the bus injection vector. Rows without any
    /// variable coefficient above `zero_tol` are checked as constants instead.
    pub fn add_injection_row(&mut self, lp: &mut LpProblem, row: &[f64], rhs: f64, zero_tol: f64) -> Result<()> {
        let mut coeffs: Vec<f64> = self.var_bus.iter().map(|&i| row[i]).collect();
        let shift: f64 = row.iter().zip(&self.base_injection).map(|(a, x)| a * x).sum();
        coeffs.resize(lp.num_vars(), 0.0);
        if coeffs.iter().all(|c| c.abs() <= zero_tol) {
            if shift > rhs + 1e-7 * (1.0 + rhs.abs()) {
                self.constant_rows_ok = false;
            }
            return Ok(());
        }
        lp.add_le(coeffs, rhs - shift)?;
        Ok(())
    }

    /// Adds `lower ≤ H x ≤ upper` for every row of `h`.
    pub fn add_flow_rows(&mut self, lp: &mut LpProblem, h: &DMatrix<f64>, limits: &[(f64, f64)], zero_tol: f64) -> Result<()> {
        for r in 0..h.nrows() {
            let row: Vec<f64> = h.row(r).iter().copied().collect();
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            self.add_injection_row(lp, &row, limits[r].1, zero_tol)?;
            self.add_injection_row(lp, &neg, -limits[r].0, zero_tol)?;
        }
        Ok(())
    }

    /// Expands LP variables into a per-bus dispatch.
    pub fn dispatch(&self, net: &Network, vars: &[f64]) -> Dispatch {
        let mut p: Vec<f64> = net.buses().iter().map(|b| b.gen_min_mw).collect();
        for (j, &i) in self.var_bus.iter().enumerate() {
            p[i] = vars[j];
        }
        let cost = p.iter().zip(net.buses()).map(|(p, b)| p * b.gen_cost).sum();
        Dispatch { p, cost }
    }
}
