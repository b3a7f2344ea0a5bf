//! Reduced OPF runs driven by congestion predictions, and the evaluation metrics
//! built on them.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcopf::{check_limits, solve_opf, DispatchSolution, MonitoredSet, ViolationReport, REPORT_TOL_MW};
use crate::error::{Error, Result};
use crate::gnn::{train, Binding, EdgeModel, GnnModel, MlpModel, ModelConfig, SavedModel, TrainHistory};
use crate::netcase::{to_graph, GraphTopology, Network};
use crate::samplegen::{in_pool, label_sample, Normalizer, Sample, Splits, EDGE_FEATURES, NODE_FEATURES};

/// Chooses which branches get flow-limit constraints for a sample.
pub trait Predictor: Sync {
    fn name(&self) -> String;

    /// Threshold the predictor was built for, when it has one.
    fn trained_threshold(&self) -> Option<f64> {
        None
    }

    fn predict(&self, network: &Network, topology: &GraphTopology, sample: &Sample) -> Result<MonitoredSet>;
}

impl Predictor for GnnModel {
    fn name(&self) -> String {
        "gnn".into()
    }
    fn trained_threshold(&self) -> Option<f64> {
        self.threshold
    }
    fn predict(&self, _: &Network, topology: &GraphTopology, sample: &Sample) -> Result<MonitoredSet> {
        self.predict_congested(sample, topology)
    }
}

impl Predictor for MlpModel {
    fn name(&self) -> String {
        "mlp".into()
    }
    fn trained_threshold(&self) -> Option<f64> {
        self.threshold
    }
    fn predict(&self, _: &Network, topology: &GraphTopology, sample: &Sample) -> Result<MonitoredSet> {
        self.predict_congested(sample, topology)
    }
}

impl Predictor for SavedModel {
    fn name(&self) -> String {
        match self {
            SavedModel::Xenet(m) => m.name(),
            SavedModel::Mlp(m) => m.name(),
        }
    }
    fn trained_threshold(&self) -> Option<f64> {
        self.threshold()
    }
    fn predict(&self, network: &Network, topology: &GraphTopology, sample: &Sample) -> Result<MonitoredSet> {
        match self {
            SavedModel::Xenet(m) => m.predict(network, topology, sample),
            SavedModel::Mlp(m) => m.predict(network, topology, sample),
        }
    }
}

/// Feeds the true labels at `tau` back as predictions.
#[derive(Debug, Clone, Copy)]
pub struct OracleLabels {
    pub tau: f64,
}

impl Predictor for OracleLabels {
    fn name(&self) -> String {
        "oracle".into()
    }
    fn trained_threshold(&self) -> Option<f64> {
        Some(self.tau)
    }
    fn predict(&self, network: &Network, _: &GraphTopology, sample: &Sample) -> Result<MonitoredSet> {
        Ok(label_sample(&sample.flows_mw, network, self.tau).to_monitored())
    }
}

/// Monitors the same branches for every sample.
#[derive(Debug, Clone)]
pub struct FixedSet(pub MonitoredSet);

impl FixedSet {
    pub fn all(network: &Network) -> Self {
        Self(MonitoredSet::all(network.num_branches()))
    }
}

impl Predictor for FixedSet {
    fn name(&self) -> String {
        "fixed".into()
    }
    fn predict(&self, _: &Network, _: &GraphTopology, _: &Sample) -> Result<MonitoredSet> {
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopfResult {
    pub sample_id: u64,
    pub monitored: MonitoredSet,
    pub dispatch: DispatchSolution,
    /// Audit over every branch, monitored or not.
    pub violations: ViolationReport,
    pub ropf_objective: f64,
    /// Full-OPF objective stored with the sample.
    pub full_objective: f64,
    pub ropf_solve_seconds: f64,
}

fn check_sample(network: &Network, sample: &Sample) -> Result<()> {
    if sample.load_mw.len() != network.num_buses() || sample.flows_mw.len() != network.num_branches() {
        return Err(Error::Dimension(format!(
            "sample {} has {} loads and {} flows; network has {} buses and {} branches",
            sample.sample_id,
            sample.load_mw.len(),
            sample.flows_mw.len(),
            network.num_buses(),
            network.num_branches()
        )));
    }
    Ok(())
}

/// Solves the OPF with limits on `monitored` only and audits all branches.
pub fn run_ropf(network: &Network, sample: &Sample, monitored: &MonitoredSet) -> Result<RopfResult> {
    check_sample(network, sample)?;
    let dispatch = solve_opf(network, &sample.load_mw, monitored)?;
    if !dispatch.is_optimal() {
        return Err(Error::Invariant(format!(
            "reduced OPF for sample {} is {:?} although its full OPF was solved; this is a solver bug",
            sample.sample_id, dispatch.status
        )));
    }
    let violations = check_limits(network, &dispatch.flows, REPORT_TOL_MW);
    Ok(RopfResult {
        sample_id: sample.sample_id,
        monitored: monitored.clone(),
        ropf_objective: dispatch.objective,
        full_objective: sample.objective,
        ropf_solve_seconds: dispatch.solve_seconds,
        dispatch,
        violations,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub true_neg: usize,
    /// Type 1: predicted congested, actually not.
    pub false_pos: usize,
    /// Type 2: predicted not congested, actually congested.
    pub false_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }
    pub fn errors(&self) -> usize {
        self.false_pos + self.false_neg
    }
    fn add(&mut self, other: &Confusion) {
        self.true_pos += other.true_pos;
        self.true_neg += other.true_neg;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_branch: Vec<Confusion>,
    pub totals: Confusion,
}

impl ConfusionCounts {
    pub fn new(num_branches: usize) -> Self {
        Self {
            per_branch: vec![Confusion::default(); num_branches],
            totals: Confusion::default(),
        }
    }

    /// Records one sample; returns the `(false_positive, false_negative)` branches.
    pub fn record(&mut self, labels: &[bool], predicted: &MonitoredSet) -> (Vec<usize>, Vec<usize>) {
        assert_eq!(labels.len(), self.per_branch.len());
        let mut fp = Vec::new();
        let mut fneg = Vec::new();
        for (k, &truth) in labels.iter().enumerate() {
            let mut one = Confusion::default();
            match (predicted.contains(k), truth) {
                (true, true) => one.true_pos = 1,
                (false, false) => one.true_neg = 1,
                (true, false) => {
                    one.false_pos = 1;
                    fp.push(k);
                }
                (false, true) => {
                    one.false_neg = 1;
                    fneg.push(k);
                }
            }
            self.per_branch[k].add(&one);
            self.totals.add(&one);
        }
        (fp, fneg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: u64,
    pub monitored: Vec<usize>,
    pub false_positives: Vec<usize>,
    pub false_negatives: Vec<usize>,
    pub violated: Vec<usize>,
    pub max_overload_mw: f64,
    pub full_objective: f64,
    pub ropf_objective: f64,
    pub cost_delta: f64,
    pub full_seconds: f64,
    pub ropf_seconds: f64,
}

/// Per-branch overlay of type 2 errors and limit violations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchOverlay {
    pub branch: usize,
    pub label: String,
    pub type2: usize,
    pub violations: usize,
    /// Samples in which the branch was both a type 2 error and violated.
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub predictor: String,
    pub num_samples: usize,
    pub num_branches: usize,
    pub edge_prediction_error_pct: f64,
    pub confusion: ConfusionCounts,
    pub pct_samples_with_violation: f64,
    pub violations_per_branch: Vec<usize>,
    /// Entry `i` counts samples with exactly `i` mispredicted branches.
    pub wrong_prediction_histogram: Vec<usize>,
    pub pct_lines_monitored: f64,
    pub total_ropf_seconds: f64,
    pub total_full_opf_seconds: f64,
    /// ROPF time as a percentage of full-OPF time.
    pub time_pct: f64,
    pub overlay: Vec<BranchOverlay>,
    pub samples: Vec<SampleOutcome>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    /// Workers for the prediction pass. Solves and their timing always run sequentially.
    pub threads: Option<usize>,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 1], got {tau}"
        )))
    }
}

fn exceeds_relaxation(ropf: f64, full: f64) -> bool {
    ropf > full + 1e-6 * full.abs().max(1.0)
}

/// Evaluates `predictor` on `test` against labels at `tau`.
pub fn evaluate(
    network: &Network,
    predictor: &dyn Predictor,
    test: &[Sample],
    tau: f64,
    options: EvalOptions,
) -> Result<EvalReport> {
    check_tau(tau)?;
    if test.is_empty() {
        return Err(Error::InvalidArgument("test split is empty".into()));
    }
    for s in test {
        check_sample(network, s)?;
    }
    let mut order: Vec<&Sample> = test.iter().collect();
    order.sort_by_key(|s| s.sample_id);

    let topology = to_graph(network);
    let predictions: Vec<MonitoredSet> = in_pool(options.threads, || {
        order
            .par_iter()
            .map(|s| predictor.predict(network, &topology, s))
            .collect::<Result<Vec<_>>>()
    })??;

    let k = network.num_branches();
    let all = MonitoredSet::all(k);
    let mut confusion = ConfusionCounts::new(k);
    let mut samples = Vec::with_capacity(order.len());
    let mut violations_per_branch = vec![0usize; k];
    let mut histogram = vec![0usize; k + 1];
    let mut with_violation = 0usize;
    let mut monitored_fraction_sum = 0.0;
    let mut total_ropf = 0.0;
    let mut total_full = 0.0;

    for (sample, predicted) in order.iter().zip(&predictions) {
        let labels = label_sample(&sample.flows_mw, network, tau);
        let (fp, fneg) = confusion.record(&labels.0, predicted);
        histogram[fp.len() + fneg.len()] += 1;

        let full = solve_opf(network, &sample.load_mw, &all)?;
        if !full.is_optimal() {
            return Err(Error::Infeasible(format!(
                "full OPF of sample {} is {:?} on re-solve",
                sample.sample_id, full.status
            )));
        }
        let result = run_ropf(network, sample, predicted)?;
        if exceeds_relaxation(result.ropf_objective, result.full_objective) {
            return Err(Error::Invariant(format!(
                "sample {}: reduced objective {} exceeds full objective {}",
                sample.sample_id, result.ropf_objective, result.full_objective
            )));
        }
        let violated: Vec<usize> = result.violations.violated_branches().collect();
        if let Some(&bad) = violated.iter().find(|&&b| predicted.contains(b)) {
            return Err(Error::Invariant(format!(
                "sample {}: monitored branch {} violates its limit",
                sample.sample_id,
                network.branch_label(bad)
            )));
        }
        for &b in &violated {
            violations_per_branch[b] += 1;
        }
        with_violation += usize::from(result.violations.any_violation);
        monitored_fraction_sum += predicted.len() as f64 / k as f64;
        total_ropf += result.ropf_solve_seconds;
        total_full += full.solve_seconds;

        samples.push(SampleOutcome {
            sample_id: sample.sample_id,
            monitored: predicted.as_slice().to_vec(),
            false_positives: fp,
            false_negatives: fneg,
            violated,
            max_overload_mw: result.violations.overload_mw.iter().cloned().fold(0.0, f64::max),
            full_objective: result.full_objective,
            ropf_objective: result.ropf_objective,
            cost_delta: result.ropf_objective - result.full_objective,
            full_seconds: full.solve_seconds,
            ropf_seconds: result.ropf_solve_seconds,
        });
    }

    let n = order.len();
    let overlay = correlate_violations_type2(network, &samples);
    Ok(EvalReport {
        threshold: tau,
        predictor: predictor.name(),
        num_samples: n,
        num_branches: k,
        edge_prediction_error_pct: error_pct(&confusion.totals, n, k),
        pct_samples_with_violation: 100.0 * with_violation as f64 / n as f64,
        confusion,
        violations_per_branch,
        wrong_prediction_histogram: histogram,
        pct_lines_monitored: 100.0 * monitored_fraction_sum / n as f64,
        total_ropf_seconds: total_ropf,
        total_full_opf_seconds: total_full,
        time_pct: 100.0 * total_ropf / total_full,
        overlay,
        samples,
    })
}

fn error_pct(c: &Confusion, samples: usize, branches: usize) -> f64 {
    100.0 * c.errors() as f64 / (samples * branches) as f64
}

/// For each branch: type 2 count, violation count, and samples with both.
pub fn correlate_violations_type2(network: &Network, samples: &[SampleOutcome]) -> Vec<BranchOverlay> {
    let mut out: Vec<BranchOverlay> = (0..network.num_branches())
        .map(|k| BranchOverlay {
            branch: k,
            label: network.branch_label(k),
            type2: 0,
            violations: 0,
            overlap: 0,
        })
        .collect();
    for s in samples {
        for &k in &s.false_negatives {
            out[k].type2 += 1;
        }
        for &k in &s.violated {
            out[k].violations += 1;
            if s.false_negatives.contains(&k) {
                out[k].overlap += 1;
            }
        }
    }
    out
}

impl EvalReport {
    /// Recomputes every summary figure from the per-sample outcomes and confusion
    /// counts, and reports the first disagreement.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let (n, k) = (self.num_samples, self.num_branches);
        if self.samples.len() != n || self.confusion.per_branch.len() != k {
            return Err("sample or branch count mismatch".into());
        }
        let mut totals = Confusion::default();
        for (b, c) in self.confusion.per_branch.iter().enumerate() {
            if c.total() != n {
                return Err(format!("branch {b} confusion sums to {} not {n}", c.total()));
            }
            totals.add(c);
        }
        if totals != self.confusion.totals {
            return Err("aggregate confusion differs from per-branch sum".into());
        }
        let fp: usize = self.samples.iter().map(|s| s.false_positives.len()).sum();
        let fneg: usize = self.samples.iter().map(|s| s.false_negatives.len()).sum();
        if fp != totals.false_pos || fneg != totals.false_neg {
            return Err("per-sample errors disagree with confusion totals".into());
        }
        if error_pct(&totals, n, k) != self.edge_prediction_error_pct {
            return Err("prediction error percentage does not recompute".into());
        }
        let with_violation = self.samples.iter().filter(|s| !s.violated.is_empty()).count();
        if 100.0 * with_violation as f64 / n as f64 != self.pct_samples_with_violation {
            return Err("violation percentage does not recompute".into());
        }
        let frac: f64 = self.samples.iter().map(|s| s.monitored.len() as f64 / k as f64).sum();
        if 100.0 * frac / n as f64 != self.pct_lines_monitored {
            return Err("monitored percentage does not recompute".into());
        }
        for o in &self.overlay {
            let c = &self.confusion.per_branch[o.branch];
            if o.type2 != c.false_neg {
                return Err(format!(
                    "branch {}: overlay type 2 count {} != {}",
                    o.label, o.type2, c.false_neg
                ));
            }
            if o.violations != self.violations_per_branch[o.branch] {
                return Err(format!("branch {}: overlay violation count differs", o.label));
            }
            if o.overlap > o.type2.min(o.violations) {
                return Err(format!("branch {}: overlap exceeds its parts", o.label));
            }
        }
        for s in &self.samples {
            if s.violated.iter().any(|b| s.monitored.contains(b)) {
                return Err(format!("sample {}: violation on a monitored branch", s.sample_id));
            }
        }
        if self.wrong_prediction_histogram.iter().sum::<usize>() != n {
            return Err("histogram does not cover every sample".into());
        }
        for pct in [
            self.edge_prediction_error_pct,
            self.pct_samples_with_violation,
            self.pct_lines_monitored,
        ] {
            if !(0.0..=100.0).contains(&pct) {
                return Err(format!("percentage {pct} out of range"));
            }
        }
        Ok(())
    }

    /// Copy with all wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.total_ropf_seconds = 0.0;
        r.total_full_opf_seconds = 0.0;
        r.time_pct = 0.0;
        for s in &mut r.samples {
            s.full_seconds = 0.0;
            s.ropf_seconds = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per branch: confusion counts and the type 2 overlay.
    pub fn branch_csv(&self) -> String {
        let mut out = String::from("branch,label,true_pos,true_neg,false_pos,false_neg,violations,overlap\n");
        for o in &self.overlay {
            let c = &self.confusion.per_branch[o.branch];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                o.branch + 1,
                o.label,
                c.true_pos,
                c.true_neg,
                c.false_pos,
                c.false_neg,
                o.violations,
                o.overlap
            );
        }
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("wrong_predictions,samples\n");
        for (i, c) in self.wrong_prediction_histogram.iter().enumerate() {
            let _ = writeln!(out, "{i},{c}");
        }
        out
    }

    pub fn cost_csv(&self) -> String {
        let mut out = String::from("sample_id,full_objective,ropf_objective,cost_delta,any_violation\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.sample_id,
                s.full_objective,
                s.ropf_objective,
                s.cost_delta,
                !s.violated.is_empty()
            );
        }
        out
    }
}

/// `threshold,time_pct,pct_samples_over_limit,pct_lines_monitored,prediction_error_pct`.
pub fn table_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("threshold,time_pct,pct_samples_over_limit,pct_lines_monitored,prediction_error_pct\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.threshold, r.time_pct, r.pct_samples_with_violation, r.pct_lines_monitored, r.edge_prediction_error_pct
        );
    }
    out
}

/// Validates thresholds and returns them sorted and deduplicated. Values above 1
/// are read as percentages, so `70` and `0.7` are the same threshold.
pub fn canonical_thresholds(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("threshold list is empty".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let tau = if v > 1.0 { v / 100.0 } else { v };
        check_tau(tau)?;
        out.push(tau);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gnn,
    Mlp,
}

/// Fits the normalizer on `splits.train`, trains, and keeps the best-validation snapshot.
pub fn train_for_threshold(
    network: &Network,
    splits: &Splits,
    tau: f64,
    kind: ModelKind,
    config: &ModelConfig,
) -> Result<(SavedModel, TrainHistory)> {
    check_tau(tau)?;
    let binding = Binding::for_network(network, NODE_FEATURES, EDGE_FEATURES);
    let normalizer = Normalizer::fit(&splits.train)?;
    let (model, history) = match kind {
        ModelKind::Gnn => {
            let mut m = GnnModel::init(config.clone(), binding);
            m.set_normalizer(normalizer);
            let out = train(m, &splits.train, &splits.validation, network, tau)?;
            let mut best = out.best_model;
            best.threshold = Some(tau);
            (SavedModel::Xenet(best), out.history)
        }
        ModelKind::Mlp => {
            let mut m = MlpModel::init(config.clone(), binding);
            m.set_normalizer(normalizer);
            let out = train(m, &splits.train, &splits.validation, network, tau)?;
            let mut best = out.best_model;
            best.threshold = Some(tau);
            (SavedModel::Mlp(best), out.history)
        }
    };
    Ok((model, history))
}

/// Where sweep predictions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepPredictor {
    Model(ModelKind),
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub report: EvalReport,
    pub history: Option<TrainHistory>,
}

/// One evaluation per threshold, ascending. Model predictors are retrained for
/// each threshold with the same config and seed.
pub fn threshold_sweep(
    network: &Network,
    splits: &Splits,
    thresholds: &[f64],
    predictor: SweepPredictor,
    config: &ModelConfig,
    options: EvalOptions,
) -> Result<Vec<SweepEntry>> {
    let taus = canonical_thresholds(thresholds)?;
    let mut out = Vec::with_capacity(taus.len());
    for tau in taus {
        let entry = match predictor {
            SweepPredictor::Oracle => SweepEntry {
                report: evaluate(network, &OracleLabels { tau }, &splits.test, tau, options)?,
                history: None,
            },
            SweepPredictor::Model(kind) => {
                let (model, history) = train_for_threshold(network, splits, tau, kind, config)?;
                SweepEntry {
                    report: evaluate(network, &model, &splits.test, tau, options)?,
                    history: Some(history),
                }
            }
        };
        log::info!(
            "threshold {tau}: error {:.3}%, monitored {:.2}%, time {:.2}%",
            entry.report.edge_prediction_error_pct,
            entry.report.pct_lines_monitored,
            entry.report.time_pct
        );
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{IEEE14, TRI3};
    use crate::netcase::parse_case;
    use crate::samplegen::{extract_features, generate_dataset, split_dataset, GenerateOptions};

    fn tri3_sample(net: &Network) -> Sample {
        let load = net.base_load();
        let sol = solve_opf(net, &load, &MonitoredSet::all(3)).unwrap();
        let (node_features, edge_features) = extract_features(net, &load);
        Sample {
            sample_id: 0,
            load_mw: load,
            node_features,
            edge_features,
            flows_mw: sol.flows,
            objective: sol.objective,
            solve_seconds: 0.0,
        }
    }

    #[test]
    fn tri3_reduced_runs() {
        let net = parse_case(TRI3).unwrap();
        let s = tri3_sample(&net);
        let r = run_ropf(&net, &s, &MonitoredSet::new([1], 3).unwrap()).unwrap();
        assert!((r.ropf_objective - 2100.0).abs() < 1e-6);
        assert!(!r.violations.any_violation);

        let r = run_ropf(&net, &s, &MonitoredSet::none()).unwrap();
        assert!((r.ropf_objective - 1500.0).abs() < 1e-6);
        assert_eq!(r.violations.violated, vec![false, true, false]);
        assert!((r.violations.overload_mw[1] - 20.0).abs() < 1e-6);

        let r = run_ropf(&net, &s, &MonitoredSet::all(3)).unwrap();
        assert!(crate::dcopf::relative_gap(r.ropf_objective, r.full_objective) <= 1e-6);
    }

    #[test]
    fn confusion_arithmetic() {
        let mut c = ConfusionCounts::new(10);
        let mut labels = vec![false; 10];
        labels[3] = true;
        let (fp, fneg) = c.record(&labels, &MonitoredSet::none());
        assert!(fp.is_empty());
        assert_eq!(fneg, vec![3]);
        assert_eq!(error_pct(&c.totals, 1, 10), 10.0);
        assert_eq!(c.totals.false_neg, 1);
        assert_eq!(c.totals.false_pos, 0);
    }

    #[test]
    fn tri3_missing_branch_is_type2_and_violation() {
        let net = parse_case(TRI3).unwrap();
        let data = generate_dataset(&net, 5, 0.05, 1, GenerateOptions::default()).unwrap();
        let pred = FixedSet(MonitoredSet::new([0, 2], 3).unwrap());
        let r = evaluate(&net, &pred, &data.samples, 0.95, EvalOptions::default()).unwrap();
        r.check_consistency().unwrap();
        assert_eq!(r.overlay[1].type2, 5);
        assert_eq!(r.overlay[1].violations, 5);
        assert_eq!(r.overlay[1].overlap, 5);
        assert_eq!(r.pct_samples_with_violation, 100.0);
        assert!(r.samples.iter().all(|s| s.cost_delta < 0.0));
    }

    #[test]
    fn oracle_and_all_lines_predictors() {
        let net = parse_case(IEEE14).unwrap();
        let data = generate_dataset(&net, 30, 0.1, 5, GenerateOptions::default()).unwrap();
        let oracle = evaluate(
            &net,
            &OracleLabels { tau: 0.9 },
            &data.samples,
            0.9,
            EvalOptions::default(),
        )
        .unwrap();
        oracle.check_consistency().unwrap();
        assert_eq!(oracle.edge_prediction_error_pct, 0.0);
        assert!(oracle.pct_lines_monitored < 100.0);
        assert!(oracle.time_pct > 0.0);

        let all = evaluate(&net, &FixedSet::all(&net), &data.samples, 0.9, EvalOptions::default()).unwrap();
        all.check_consistency().unwrap();
        assert_eq!(all.pct_samples_with_violation, 0.0);
        assert_eq!(all.pct_lines_monitored, 100.0);
        let negatives = all.confusion.totals.true_neg + all.confusion.totals.false_pos;
        assert_eq!(
            all.edge_prediction_error_pct,
            100.0 * negatives as f64 / (30 * net.num_branches()) as f64
        );
        for s in &all.samples {
            assert!(crate::dcopf::relative_gap(s.ropf_objective, s.full_objective) <= 1e-6);
        }
    }

    #[test]
    fn zero_violations_means_zero_overlap() {
        let net = parse_case(IEEE14).unwrap();
        let data = generate_dataset(&net, 4, 0.1, 2, GenerateOptions::default()).unwrap();
        let r = evaluate(&net, &FixedSet::all(&net), &data.samples, 0.8, EvalOptions::default()).unwrap();
        assert!(r.overlay.iter().all(|o| o.overlap == 0 && o.violations == 0));
    }

    #[test]
    fn evaluation_errors() {
        let net = parse_case(TRI3).unwrap();
        let s = tri3_sample(&net);
        assert!(evaluate(&net, &FixedSet::all(&net), &[], 0.9, EvalOptions::default()).is_err());
        assert!(evaluate(
            &net,
            &FixedSet::all(&net),
            std::slice::from_ref(&s),
            1.2,
            EvalOptions::default()
        )
        .is_err());
        let big = parse_case(IEEE14).unwrap();
        assert!(matches!(
            run_ropf(&big, &s, &MonitoredSet::none()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn thresholds_canonicalize() {
        assert_eq!(
            canonical_thresholds(&[95.0, 70.0, 0.8, 80.0]).unwrap(),
            vec![0.7, 0.8, 0.95]
        );
        assert!(canonical_thresholds(&[]).is_err());
        assert!(canonical_thresholds(&[0.0]).is_err());
        assert!(canonical_thresholds(&[150.0]).is_err());
    }

    #[test]
    fn oracle_sweep_nests() {
        let net = parse_case(IEEE14).unwrap();
        let data = generate_dataset(&net, 40, 0.1, 8, GenerateOptions::default()).unwrap();
        let splits = split_dataset(&data.samples, (0.5, 0.25, 0.25), 8).unwrap();
        let taus = [0.95, 0.7, 0.8, 0.75, 0.9, 0.85];
        let out = threshold_sweep(
            &net,
            &splits,
            &taus,
            SweepPredictor::Oracle,
            &ModelConfig::default(),
            EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 6);
        for w in out.windows(2) {
            assert!(w[0].report.threshold < w[1].report.threshold);
            assert!(w[1].report.pct_lines_monitored <= w[0].report.pct_lines_monitored);
        }
        let csv = table_csv(&out.iter().map(|e| e.report.clone()).collect::<Vec<_>>());
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("threshold,time_pct,pct_samples_over_limit,pct_lines_monitored,prediction_error_pct\n"));
    }
}
