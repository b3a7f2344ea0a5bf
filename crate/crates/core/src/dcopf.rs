//! DC optimal power flow in the B-theta form, with optional line-limit screening.
//!
//! Variables are generator outputs (per-unit) and bus angles (radians). Every bus
//! contributes one nodal balance row; each monitored branch contributes two rows
//! bounding its flow from both sides. Costs are scaled by `base_mva` so that the
//! LP objective is directly in currency per hour.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus};
use crate::netcase::Network;

/// Tolerance (MW) used when reporting limit violations and checking invariants.
pub const REPORT_TOL_MW: f64 = 1e-6;

/// Set of branches whose flow limits are enforced. Sorted, duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonitoredSet(Vec<usize>);

impl MonitoredSet {
    pub fn all(num_branches: usize) -> Self {
        Self((0..num_branches).collect())
    }

    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn new(indices: impl IntoIterator<Item = usize>, num_branches: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("monitored set has duplicate branches".into()));
        }
        if let Some(&k) = v.last() {
            if k >= num_branches {
                return Err(Error::InvalidArgument(format!(
                    "branch index {k} out of range for {num_branches} branches"
                )));
            }
        }
        Ok(Self(v))
    }

    /// Builds the set from per-branch flags.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self(mask.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| k).collect())
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
    pub fn is_subset(&self, other: &MonitoredSet) -> bool {
        self.iter().all(|k| other.contains(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub status: LpStatus,
    pub p_g: Vec<f64>,
    pub theta: Vec<f64>,
    pub flows: Vec<f64>,
    pub objective: f64,
    /// Wall-clock seconds spent inside the LP solver.
    pub solve_seconds: f64,
}

impl DispatchSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violated: Vec<bool>,
    /// `|P_k| - RateA_k` where positive, else zero.
    pub overload_mw: Vec<f64>,
    pub any_violation: bool,
}

impl ViolationReport {
    pub fn violated_branches(&self) -> impl Iterator<Item = usize> + '_ {
        self.violated.iter().enumerate().filter(|(_, &v)| v).map(|(k, _)| k)
    }
}

/// Variable layout of the OPF LP: generators first, then one angle per bus.
pub fn theta_var(network: &Network, n: usize) -> usize {
    network.num_generators() + n
}

pub fn build_opf(network: &Network, load_mw: &[f64], monitored: &MonitoredSet) -> Result<LinearProgram> {
    if load_mw.len() != network.num_buses() {
        return Err(Error::Dimension(format!(
            "load vector has {} entries, network has {} buses",
            load_mw.len(),
            network.num_buses()
        )));
    }
    if let Some(bad) = load_mw.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "load entries must be finite and >= 0, got {bad}"
        )));
    }
    if monitored.iter().any(|k| k >= network.num_branches()) {
        return Err(Error::InvalidArgument("monitored branch out of range".into()));
    }
    let base = network.base_mva();
    let mut lp = LinearProgram::new();
    for (g, gen) in network.generators().iter().enumerate() {
        lp.add_variable(
            format!("P_g{}@{}", g + 1, gen.bus),
            gen.cost_per_mwh * base,
            gen.p_min_mw / base,
            gen.p_max_mw / base,
        );
    }
    for (n, bus) in network.buses().iter().enumerate() {
        let (lo, hi) = if n == network.slack() {
            (0.0, 0.0)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        lp.add_variable(format!("theta_{}", bus.id), 0.0, lo, hi);
    }

    // flow on branch k in per-unit as sparse coefficients over angles
    let flow_row = |k: usize, sign: f64| {
        let (f, t) = network.endpoints(k);
        let b = 1.0 / network.branches()[k].reactance_pu;
        vec![(theta_var(network, f), sign * b), (theta_var(network, t), -sign * b)]
    };

    for n in 0..network.num_buses() {
        let mut row: lp::Row = network.generators_at(n).iter().map(|&g| (g, 1.0)).collect();
        for &k in network.incoming(n) {
            row.extend(flow_row(k, 1.0));
        }
        for &k in network.outgoing(n) {
            row.extend(flow_row(k, -1.0));
        }
        lp.add_eq(row, load_mw[n] / base);
    }
    for k in monitored.iter() {
        let limit = network.branches()[k].rate_a_mw / base;
        lp.add_le(flow_row(k, 1.0), limit);
        lp.add_le(flow_row(k, -1.0), limit);
    }
    Ok(lp)
}

/// Branch flow `P_k = (theta_f - theta_t) / x_k`, scaled to MW.
pub fn line_flows(network: &Network, theta: &[f64]) -> Vec<f64> {
    assert_eq!(theta.len(), network.num_buses(), "theta length must equal bus count");
    let base = network.base_mva();
    network
        .branches()
        .iter()
        .enumerate()
        .map(|(k, br)| {
            let (f, t) = network.endpoints(k);
            (theta[f] - theta[t]) / br.reactance_pu * base
        })
        .collect()
}

pub fn check_limits(network: &Network, flows: &[f64], tolerance_mw: f64) -> ViolationReport {
    assert_eq!(
        flows.len(),
        network.num_branches(),
        "flows length must equal branch count"
    );
    let mut violated = Vec::with_capacity(flows.len());
    let mut overload_mw = Vec::with_capacity(flows.len());
    for (flow, br) in flows.iter().zip(network.branches()) {
        let excess = flow.abs() - br.rate_a_mw;
        let v = excess > tolerance_mw;
        violated.push(v);
        overload_mw.push(if v { excess } else { 0.0 });
    }
    let any_violation = violated.iter().any(|&v| v);
    ViolationReport {
        violated,
        overload_mw,
        any_violation,
    }
}

/// Builds and solves the (reduced) OPF. Flows are reported on every branch.
pub fn solve_opf(network: &Network, load_mw: &[f64], monitored: &MonitoredSet) -> Result<DispatchSolution> {
    let lp = build_opf(network, load_mw, monitored)?;
    let start = Instant::now();
    let sol = lp::solve_lp(&lp)?;
    let solve_seconds = start.elapsed().as_secs_f64();

    let ng = network.num_generators();
    let base = network.base_mva();
    if sol.status != LpStatus::Optimal {
        return Ok(DispatchSolution {
            status: sol.status,
            p_g: vec![f64::NAN; ng],
            theta: vec![f64::NAN; network.num_buses()],
            flows: vec![f64::NAN; network.num_branches()],
            objective: f64::NAN,
            solve_seconds,
        });
    }
    let p_g: Vec<f64> = sol.values[..ng].iter().map(|p| p * base).collect();
    let theta = sol.values[ng..].to_vec();
    let flows = line_flows(network, &theta);
    let objective = p_g
        .iter()
        .zip(network.generators())
        .map(|(p, g)| p * g.cost_per_mwh)
        .sum();
    Ok(DispatchSolution {
        status: LpStatus::Optimal,
        p_g,
        theta,
        flows,
        objective,
        solve_seconds,
    })
}

/// Relative difference `|a - b| / max(1, |b|)`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
