//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL line per
//! criterion, and exits non-zero if any fails.

mod support;

use std::time::Instant;

use anyhow::{ensure, Context, Result};
use gridscreen::dcopf::{relative_gap, solve_opf, DispatchSolution, MonitoredSet};
use gridscreen::fixtures::{IEEE14, TRI3};
use gridscreen::gnn::{gradient_check, Binding, EdgeModel, GnnModel, MlpModel, ModelConfig, PreparedSplit};
use gridscreen::netcase::{parse_case, to_graph, Network};
use gridscreen::ropf::{
    evaluate, run_ropf, threshold_sweep, train_for_threshold, EvalOptions, EvalReport, FixedSet, ModelKind,
    SweepPredictor,
};
use gridscreen::samplegen::{
    extract_features, generate_dataset, perturb_load, split_dataset, GenerateOptions, Normalizer, Sample,
    EDGE_FEATURES, NODE_FEATURES,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SWEEP: [f64; 6] = [0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Power-balance residuals gathered from every optimal solve in the suite.
#[derive(Default)]
struct Balance {
    solves: usize,
    worst_mw: f64,
}

impl Balance {
    fn record(&mut self, sol: &DispatchSolution, load: &[f64]) {
        if sol.is_optimal() {
            let r = (sol.p_g.iter().sum::<f64>() - load.iter().sum::<f64>()).abs();
            self.worst_mw = self.worst_mw.max(r);
            self.solves += 1;
        }
    }
}

fn criterion_1(balance: &mut Balance) -> Result<String> {
    let start = Instant::now();
    let net = parse_case(TRI3)?;
    let load = net.base_load();
    let sol = solve_opf(&net, &load, &MonitoredSet::all(3))?;
    let elapsed = start.elapsed().as_secs_f64();
    balance.record(&sol, &load);
    let oracle = support::vertex_oracle(&net, &load, &[0, 1, 2]).context("oracle found tri3 infeasible")?;
    ensure!((sol.objective - 2100.0).abs() <= 1e-6, "objective {}", sol.objective);
    ensure!(
        (oracle.objective - sol.objective).abs() <= 1e-6,
        "oracle objective {}",
        oracle.objective
    );
    for (i, e) in [90.0, 60.0].iter().enumerate() {
        ensure!((sol.p_g[i] - e).abs() <= 1e-6, "dispatch {:?}", sol.p_g);
        ensure!((oracle.p_g[i] - e).abs() <= 1e-6, "oracle dispatch {:?}", oracle.p_g);
    }
    for (k, e) in [10.0, 80.0, 70.0].iter().enumerate() {
        ensure!((sol.flows[k] - e).abs() <= 1e-6, "flows {:?}", sol.flows);
        ensure!((oracle.flows[k] - e).abs() <= 1e-6, "oracle flows {:?}", oracle.flows);
    }
    ensure!(elapsed < 1.0, "took {elapsed:.3} s");
    Ok(format!(
        "objective {:.6}, oracle {:.6}, {:.4} s",
        sol.objective, oracle.objective, elapsed
    ))
}

struct SuiteStats {
    pairs: usize,
    clean: usize,
    violating: usize,
    seconds: f64,
}

fn random_sample(net: &Network, rng: &mut ChaCha8Rng, id: u64) -> Result<Option<Sample>> {
    let load = perturb_load(&net.base_load(), 0.3, rng.gen());
    let full = solve_opf(net, &load, &MonitoredSet::all(net.num_branches()))?;
    if !full.is_optimal() {
        return Ok(None);
    }
    let (node_features, edge_features) = extract_features(net, &load);
    Ok(Some(Sample {
        sample_id: id,
        load_mw: load,
        node_features,
        edge_features,
        flows_mw: full.flows,
        objective: full.objective,
        solve_seconds: full.solve_seconds,
    }))
}

/// Criteria 2 and 3 share one suite of random (load, monitored set) pairs.
fn relaxation_suite(balance: &mut Balance) -> Result<(Result<String>, Result<String>)> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut stats = SuiteStats {
        pairs: 0,
        clean: 0,
        violating: 0,
        seconds: 0.0,
    };
    let mut relax_err: Option<String> = None;
    let mut equal_err: Option<String> = None;
    for text in [TRI3, IEEE14] {
        let net = parse_case(text)?;
        let k = net.num_branches();
        let mut done = 0;
        let mut id = 0;
        while done < 300 {
            id += 1;
            let Some(sample) = random_sample(&net, &mut rng, id)? else {
                continue;
            };
            let p = rng.gen_range(0.0..1.0);
            let mask: Vec<bool> = (0..k).map(|_| rng.gen_bool(p)).collect();
            let monitored = MonitoredSet::from_mask(&mask);
            let r = run_ropf(&net, &sample, &monitored)?;
            let full = run_ropf(&net, &sample, &MonitoredSet::all(k))?;
            balance.record(&r.dispatch, &sample.load_mw);
            balance.record(&full.dispatch, &sample.load_mw);
            stats.pairs += 1;
            done += 1;

            let tol = 1e-6 * r.full_objective.abs().max(1.0);
            if r.ropf_objective > r.full_objective + tol {
                relax_err.get_or_insert(format!("sample {id}: {} > {}", r.ropf_objective, r.full_objective));
            }
            if relative_gap(full.ropf_objective, r.full_objective) > 1e-6 {
                relax_err.get_or_insert(format!(
                    "monitored=K gives {} vs {}",
                    full.ropf_objective, r.full_objective
                ));
            }
            if r.violations.violated_branches().any(|b| monitored.contains(b)) {
                equal_err.get_or_insert(format!("sample {id}: violation on a monitored branch"));
            }
            if r.violations.any_violation {
                stats.violating += 1;
            } else {
                stats.clean += 1;
                if relative_gap(r.ropf_objective, r.full_objective) > 1e-6 {
                    equal_err.get_or_insert(format!(
                        "sample {id}: clean ROPF {} differs from full {}",
                        r.ropf_objective, r.full_objective
                    ));
                }
            }
        }
    }
    stats.seconds = start.elapsed().as_secs_f64();
    let c2 = match relax_err {
        Some(e) => Err(anyhow::anyhow!(e)),
        None if stats.seconds >= 60.0 => Err(anyhow::anyhow!("took {:.1} s", stats.seconds)),
        None => Ok(format!(
            "{} pairs on tri3 and ieee14, {:.2} s",
            stats.pairs, stats.seconds
        )),
    };
    let c3 = match equal_err {
        Some(e) => Err(anyhow::anyhow!(e)),
        None if stats.clean == 0 || stats.violating == 0 => Err(anyhow::anyhow!(
            "suite lacks clean or violating cases ({} / {})",
            stats.clean,
            stats.violating
        )),
        None => Ok(format!(
            "{} clean results equal full OPF, {} violating results all on unmonitored branches",
            stats.clean, stats.violating
        )),
    };
    Ok((c2, c3))
}

fn criterion_5() -> Result<String> {
    let start = Instant::now();
    let net = parse_case(TRI3)?;
    let data = generate_dataset(&net, 6, 0.1, 31, GenerateOptions::default())?.samples;
    let norm = Normalizer::fit(&data)?;
    let split = PreparedSplit::new(&data, &net, 0.5, &norm);
    let idx: Vec<usize> = (0..data.len()).collect();
    let (batch, targets) = split.batch(&idx, &to_graph(&net));
    let binding = Binding::for_network(&net, NODE_FEATURES, EDGE_FEATURES);
    let (mut checked, mut skipped, mut worst) = (0, 0, 0.0f64);
    let mut seed = 0;
    while checked < 2000 {
        let cfg = ModelConfig {
            num_layers: 2,
            node_channels: 8,
            edge_channels: 8,
            seed,
            ..ModelConfig::default()
        };
        let mut model = GnnModel::init(cfg, binding.clone());
        model.set_normalizer(norm.clone());
        let r = gradient_check(&model, &batch, &targets, 1e-5);
        checked += r.checked;
        skipped += r.skipped_kinks;
        worst = worst.max(r.max_rel_error);
        seed += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(worst <= 1e-4, "max relative error {worst:e}");
    ensure!(elapsed < 30.0, "took {elapsed:.1} s");
    Ok(format!(
        "{checked} parameters over {seed} models, max rel error {worst:.2e}, {skipped} skipped at ReLU kinks, {elapsed:.2} s"
    ))
}

fn criterion_6() -> Result<String> {
    let net = parse_case(IEEE14)?;
    let data = generate_dataset(&net, 10, 0.1, 17, GenerateOptions::default())?.samples;
    let binding = Binding::for_network(&net, NODE_FEATURES, EDGE_FEATURES);
    let norm = Normalizer::fit(&data)?;
    let mut gnn = GnnModel::init(
        ModelConfig {
            seed: 21,
            ..ModelConfig::default()
        },
        binding.clone(),
    );
    let mut mlp = MlpModel::init(
        ModelConfig {
            seed: 21,
            ..ModelConfig::default()
        },
        binding,
    );
    gnn.set_normalizer(norm.clone());
    mlp.set_normalizer(norm);
    let load = &data[3].load_mw;
    let (node, edge) = extract_features(&net, load);
    let topo = to_graph(&net);
    let g0 = gnn.forward(&node, &edge, &topo)?;
    let m0 = mlp.forward(&node, &edge, &topo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut counterexamples = 0;
    for t in 0..20 {
        let mut perm: Vec<usize> = (0..net.num_buses()).collect();
        perm.shuffle(&mut rng);
        let pnet = net.permute_buses(&perm);
        let pload: Vec<f64> = perm.iter().map(|&old| load[old]).collect();
        let (pn, pe) = extract_features(&pnet, &pload);
        let ptopo = to_graph(&pnet);
        let g = gnn.forward(&pn, &pe, &ptopo)?;
        ensure!(g == g0, "permutation {t} changed GNN outputs");
        if mlp.forward(&pn, &pe, &ptopo)? != m0 {
            counterexamples += 1;
        }
    }
    ensure!(counterexamples > 0, "MLP outputs were invariant under all permutations");
    Ok(format!(
        "GNN bit-identical under 20 permutations; MLP differed under {counterexamples}"
    ))
}

struct LearningRun {
    net: Network,
    splits: gridscreen::samplegen::Splits,
    report: EvalReport,
}

fn criterion_7() -> Result<(String, LearningRun)> {
    let start = Instant::now();
    let net = parse_case(IEEE14)?;
    let data = generate_dataset(&net, 2000, 0.1, 7, GenerateOptions::default())?;
    let splits = split_dataset(&data.samples, (0.8, 0.1, 0.1), 7)?;
    let config = ModelConfig {
        learning_rate: 3e-4,
        epochs: 150,
        ..ModelConfig::default()
    };
    let (model, history) = train_for_threshold(&net, &splits, 0.95, ModelKind::Gnn, &config)?;
    let report = evaluate(&net, &model, &splits.test, 0.95, EvalOptions::default())?;
    let elapsed = start.elapsed().as_secs_f64();
    let positives: usize = splits.test.iter().map(|s| s.labels(&net, 0.95).count()).sum();
    let majority_pct = 100.0 * positives as f64 / (splits.test.len() * net.num_branches()) as f64;
    let msg = format!(
        "epoch 1 loss {:.5}, epoch 10 loss {:.5}, test error {:.3}% (all-safe rule {:.3}%), {} epochs, {:.0} s",
        history.train_loss[0],
        history.train_loss[9],
        report.edge_prediction_error_pct,
        majority_pct,
        history.len(),
        elapsed
    );
    let run = LearningRun { net, splits, report };
    let verdict = (|| {
        ensure!(
            history.train_loss[9] < history.train_loss[0],
            "loss did not drop by epoch 10"
        );
        ensure!(
            run.report.edge_prediction_error_pct <= 5.0,
            "test error {}%",
            run.report.edge_prediction_error_pct
        );
        ensure!(elapsed < 600.0, "took {elapsed:.0} s");
        Ok(())
    })();
    match verdict {
        Ok(()) => Ok((msg, run)),
        Err(e) => Err(e.context(msg)),
    }
}

fn criterion_8(run: &LearningRun, reports: &mut Vec<EvalReport>) -> Result<String> {
    let entries = threshold_sweep(
        &run.net,
        &run.splits,
        &SWEEP,
        SweepPredictor::Oracle,
        &ModelConfig::default(),
        EvalOptions::default(),
    )?;
    let mut rows = Vec::new();
    for w in entries.windows(2) {
        ensure!(
            w[1].report.pct_lines_monitored <= w[0].report.pct_lines_monitored,
            "monitored fraction rose from {} to {}",
            w[0].report.threshold,
            w[1].report.threshold
        );
    }
    for e in &entries {
        let r = &e.report;
        if r.pct_lines_monitored < 100.0 {
            ensure!(
                r.total_ropf_seconds < r.total_full_opf_seconds,
                "threshold {}: ROPF {:.4} s not below full {:.4} s",
                r.threshold,
                r.total_ropf_seconds,
                r.total_full_opf_seconds
            );
        }
        rows.push(format!(
            "{}: {:.1}% lines, {:.1}% time",
            r.threshold, r.pct_lines_monitored, r.time_pct
        ));
        reports.push(r.clone());
    }
    Ok(rows.join("; "))
}

/// Predictors that miss congested branches, so the overlay sees real violations.
fn weak_evaluations(run: &LearningRun) -> Result<Vec<EvalReport>> {
    let none = FixedSet(MonitoredSet::none());
    let mut out = vec![evaluate(
        &run.net,
        &none,
        &run.splits.test,
        0.9,
        EvalOptions::default(),
    )?];
    let config = ModelConfig {
        epochs: 3,
        node_channels: 16,
        edge_channels: 16,
        ..ModelConfig::default()
    };
    let (mlp, _) = train_for_threshold(&run.net, &run.splits, 0.8, ModelKind::Mlp, &config)?;
    out.push(evaluate(&run.net, &mlp, &run.splits.test, 0.8, EvalOptions::default())?);
    Ok(out)
}

fn criterion_9(reports: &[EvalReport]) -> Result<String> {
    let mut violations = 0;
    for r in reports {
        r.check_consistency()
            .map_err(|e| anyhow::anyhow!("threshold {} ({}): {e}", r.threshold, r.predictor))?;
        for s in &r.samples {
            ensure!(
                s.violated.iter().all(|b| !s.monitored.contains(b)),
                "monitored violation"
            );
            violations += s.violated.len();
        }
        for o in &r.overlay {
            let recount_type2 = r
                .samples
                .iter()
                .filter(|s| s.false_negatives.contains(&o.branch))
                .count();
            let recount_overlap = r
                .samples
                .iter()
                .filter(|s| s.false_negatives.contains(&o.branch) && s.violated.contains(&o.branch))
                .count();
            ensure!(
                o.type2 == recount_type2 && o.overlap == recount_overlap,
                "overlay row {} off",
                o.label
            );
        }
    }
    Ok(format!(
        "{} evaluations consistent, {violations} violations, all unmonitored",
        reports.len()
    ))
}

fn strip_timing(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            for key in [
                "total_ropf_seconds",
                "total_full_opf_seconds",
                "time_pct",
                "full_seconds",
                "ropf_seconds",
            ] {
                m.remove(key);
            }
            m.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn criterion_10() -> Result<String> {
    let root = tempfile::tempdir()?;
    let case = root.path().join("ieee14.case");
    std::fs::write(&case, IEEE14)?;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        std::fs::create_dir_all(&dir)?;
        let p = |f: &str| dir.join(f).to_string_lossy().into_owned();
        let case = case.to_string_lossy().into_owned();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "gen-data",
                "--case",
                &case,
                "--samples",
                "120",
                "--seed",
                "5",
                "--no-timing",
                "--out",
                &p("d.jsonl"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "train",
                "--data",
                &p("d.jsonl"),
                "--threshold",
                "0.9",
                "--epochs",
                "4",
                "--node-channels",
                "16",
                "--edge-channels",
                "16",
                "--out",
                &p("m.json"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "eval",
                "--data",
                &p("d.jsonl"),
                "--model",
                &p("m.json"),
                "--out-dir",
                &p("eval"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ];
        for args in steps {
            let code = gridscreen::cli::run(std::iter::once("gridscreen".to_string()).chain(args.clone()));
            ensure!(code == 0, "`{}` exited with {code}", args.join(" "));
        }
        let mut report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("eval/report.json"))?)?;
        strip_timing(&mut report);
        outputs.push((
            std::fs::read(dir.join("d.jsonl"))?,
            std::fs::read(dir.join("m.json"))?,
            std::fs::read(dir.join("m.history.csv"))?,
            serde_json::to_string(&report)?,
        ));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    ensure!(a.0 == b.0, "datasets differ");
    ensure!(a.1 == b.1, "model files differ");
    ensure!(a.2 == b.2, "training histories differ");
    ensure!(a.3 == b.3, "reports differ outside timing fields");
    Ok(format!(
        "dataset {} B, model {} B and report identical across runs",
        a.0.len(),
        a.1.len()
    ))
}

fn main() {
    let mut results: Vec<(u32, Result<String>)> = Vec::new();
    let mut balance = Balance::default();
    let mut reports = Vec::new();

    results.push((1, criterion_1(&mut balance)));
    match relaxation_suite(&mut balance) {
        Ok((c2, c3)) => {
            results.push((2, c2));
            results.push((3, c3));
        }
        Err(e) => {
            results.push((2, Err(anyhow::anyhow!("suite aborted: {e:#}"))));
            results.push((3, Err(anyhow::anyhow!("suite aborted: {e:#}"))));
        }
    }
    results.push((5, criterion_5()));
    results.push((6, criterion_6()));
    let run = match criterion_7() {
        Ok((msg, run)) => {
            results.push((7, Ok(msg)));
            Some(run)
        }
        Err(e) => {
            results.push((7, Err(e)));
            None
        }
    };
    match &run {
        Some(run) => {
            reports.push(run.report.clone());
            results.push((8, criterion_8(run, &mut reports)));
            match weak_evaluations(run) {
                Ok(mut extra) => reports.append(&mut extra),
                Err(e) => results.push((9, Err(e.context("weak-predictor evaluations failed")))),
            }
            for r in &reports {
                for s in &r.samples {
                    let sample = run.splits.test.iter().find(|t| t.sample_id == s.sample_id);
                    if let Some(sample) = sample {
                        let sol = solve_opf(
                            &run.net,
                            &sample.load_mw,
                            &MonitoredSet::new(s.monitored.clone(), r.num_branches).unwrap(),
                        );
                        if let Ok(sol) = sol {
                            balance.record(&sol, &sample.load_mw);
                        }
                    }
                }
            }
        }
        None => results.push((8, Err(anyhow::anyhow!("skipped: criterion 7 produced no dataset")))),
    }
    if !results.iter().any(|(n, _)| *n == 9) {
        results.push((9, criterion_9(&reports)));
    }
    results.push((10, criterion_10()));

    let c4 = if balance.worst_mw <= 1e-6 && balance.solves > 0 {
        Ok(format!(
            "{} optimal solves, worst residual {:.2e} MW",
            balance.solves, balance.worst_mw
        ))
    } else {
        Err(anyhow::anyhow!(
            "worst residual {:e} MW over {} solves",
            balance.worst_mw,
            balance.solves
        ))
    };
    results.push((4, c4));
    results.sort_by_key(|(n, _)| *n);

    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(msg) => println!("criterion {n:>2}: PASS  {msg}"),
            Err(e) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {e:#}");
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
