//! Labeled corpus generation: load perturbation, full-OPF solves, graph features,
//! threshold labels, splitting, normalization, and the JSON Lines dataset format.

use std::io::{BufRead, Write};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcopf::{solve_opf, MonitoredSet};
use crate::error::{Error, Result};
use crate::netcase::{parse_case, to_graph, BusType, Network};

pub const DATASET_FORMAT_VERSION: u64 = 1;
pub const NODE_FEATURES: usize = 7;
pub const EDGE_FEATURES: usize = 2;
const STD_FLOOR: f64 = 1e-8;
const MAX_REDRAWS: usize = 10_000;

/// Mixes a run seed and a sample index into an independent per-sample seed (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index))
}

fn perturb_with(rng: &mut impl Rng, base: &[f64], magnitude: f64) -> Vec<f64> {
    base.iter()
        .map(|&d| {
            let u = 1.0 - magnitude + 2.0 * magnitude * rng.gen::<f64>();
            d * u
        })
        .collect()
}

/// Independent multiplicative uniform noise per bus: `base[n] * U(1 - m, 1 + m)`.
pub fn perturb_load(base: &[f64], magnitude: f64, seed: u64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&magnitude), "magnitude must be in [0, 1)");
    perturb_with(&mut ChaCha8Rng::seed_from_u64(seed), base, magnitude)
}

/// Node features `[d, sum Pmax, sum Pmin, degree, is_load, is_gen, is_slack]` and
/// edge features `[x, RateA]`, rows in internal order.
pub fn extract_features(network: &Network, load_mw: &[f64]) -> (Array2<f64>, Array2<f64>) {
    assert_eq!(load_mw.len(), network.num_buses());
    let degree = to_graph(network).degree;
    let mut node = Array2::zeros((network.num_buses(), NODE_FEATURES));
    for (n, bus) in network.buses().iter().enumerate() {
        let gens = network.generators_at(n).iter().map(|&g| &network.generators()[g]);
        let (pmax, pmin) = gens.fold((0.0, 0.0), |(a, b), g| (a + g.p_max_mw, b + g.p_min_mw));
        let onehot = match bus.bus_type {
            BusType::Load => [1.0, 0.0, 0.0],
            BusType::Generator => [0.0, 1.0, 0.0],
            BusType::Slack => [0.0, 0.0, 1.0],
        };
        let row = [
            load_mw[n],
            pmax,
            pmin,
            degree[n] as f64,
            onehot[0],
            onehot[1],
            onehot[2],
        ];
        node.row_mut(n).assign(&ndarray::ArrayView1::from(&row));
    }
    let mut edge = Array2::zeros((network.num_branches(), EDGE_FEATURES));
    for (k, br) in network.branches().iter().enumerate() {
        edge[[k, 0]] = br.reactance_pu;
        edge[[k, 1]] = br.rate_a_mw;
    }
    (node, edge)
}

/// Per-branch congestion flags at loading threshold `tau`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(pub Vec<bool>);

impl LabelVector {
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&l| l).count()
    }
    pub fn to_monitored(&self) -> MonitoredSet {
        MonitoredSet::from_mask(&self.0)
    }
}

/// `label[k] = |flow[k]| >= tau * RateA[k]` (boundary inclusive).
pub fn label_sample(flows_mw: &[f64], network: &Network, tau: f64) -> LabelVector {
    assert!(tau > 0.0 && tau <= 1.0, "threshold must lie in (0, 1]");
    assert_eq!(flows_mw.len(), network.num_branches());
    LabelVector(
        flows_mw
            .iter()
            .zip(network.branches())
            .map(|(f, br)| f.abs() >= tau * br.rate_a_mw)
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: u64,
    pub load_mw: Vec<f64>,
    #[serde(with = "crate::nested")]
    pub node_features: Array2<f64>,
    #[serde(with = "crate::nested")]
    pub edge_features: Array2<f64>,
    pub flows_mw: Vec<f64>,
    pub objective: f64,
    pub solve_seconds: f64,
}

impl Sample {
    pub fn labels(&self, network: &Network, tau: f64) -> LabelVector {
        label_sample(&self.flows_mw, network, tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u64,
    pub network_fingerprint: String,
    pub seed: u64,
    pub magnitude: f64,
    pub count: usize,
    pub base_mva: f64,
    /// Perturbed loads rejected as infeasible and redrawn.
    pub infeasible_redraws: usize,
    /// Canonical case text, so a dataset file is self-contained.
    pub case: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    /// Worker threads; `None` uses rayon's default pool.
    pub threads: Option<usize>,
    /// When false, `solve_seconds` is written as 0 so files are byte-reproducible.
    pub record_timing: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            threads: None,
            record_timing: true,
        }
    }
}

impl Dataset {
    pub fn network(&self) -> Result<Network> {
        let net = parse_case(&self.header.case)?;
        if net.fingerprint() != self.header.network_fingerprint {
            return Err(Error::Format("dataset case text does not match its fingerprint".into()));
        }
        Ok(net)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let raw: serde_json::Value = serde_json::from_str(&first)?;
        let version = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: version,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        let header: DatasetHeader = serde_json::from_value(raw)?;
        let mut samples = Vec::with_capacity(header.count);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line)?);
        }
        if samples.len() != header.count {
            return Err(Error::Format(format!(
                "header declares {} samples, file has {}",
                header.count,
                samples.len()
            )));
        }
        Ok(Self { header, samples })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}

fn generate_one(
    network: &Network,
    base: &[f64],
    magnitude: f64,
    seed: u64,
    index: u64,
    record_timing: bool,
) -> Result<(Sample, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index));
    let all = MonitoredSet::all(network.num_branches());
    for redraws in 0..MAX_REDRAWS {
        let load = perturb_with(&mut rng, base, magnitude);
        let sol = solve_opf(network, &load, &all)?;
        if !sol.is_optimal() {
            continue;
        }
        let (node_features, edge_features) = extract_features(network, &load);
        let sample = Sample {
            sample_id: index,
            load_mw: load,
            node_features,
            edge_features,
            flows_mw: sol.flows,
            objective: sol.objective,
            solve_seconds: if record_timing { sol.solve_seconds } else { 0.0 },
        };
        return Ok((sample, redraws));
    }
    Err(Error::Infeasible(format!(
        "sample {index}: no feasible load drawn in {MAX_REDRAWS} attempts"
    )))
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub(crate) fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(f)),
        None => Ok(f()),
    }
}

/// Solves `count` perturbed-load full OPFs. Sample `i` depends only on `derive_seed(seed, i)`.
pub fn generate_dataset(
    network: &Network,
    count: usize,
    magnitude: f64,
    seed: u64,
    options: GenerateOptions,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&magnitude) {
        return Err(Error::InvalidArgument(format!(
            "magnitude must lie in [0, 1), got {magnitude}"
        )));
    }
    let base = network.base_load();
    let base_sol = solve_opf(network, &base, &MonitoredSet::all(network.num_branches()))?;
    if !base_sol.is_optimal() {
        return Err(Error::Infeasible(format!("base-case OPF is {:?}", base_sol.status)));
    }

    let work = || -> Result<Vec<(Sample, usize)>> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| generate_one(network, &base, magnitude, seed, i, options.record_timing))
            .collect()
    };
    let results = in_pool(options.threads, work)??;
    let infeasible_redraws = results.iter().map(|(_, r)| r).sum();
    let samples = results.into_iter().map(|(s, _)| s).collect();
    Ok(Dataset {
        header: DatasetHeader {
            format_version: DATASET_FORMAT_VERSION,
            network_fingerprint: network.fingerprint(),
            seed,
            magnitude,
            count,
            base_mva: network.base_mva(),
            infeasible_redraws,
            case: network.to_case_string(),
        },
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Seeded shuffle followed by a contiguous train/validation/test cut.
/// Validation and test sizes are rounded down; the remainder goes to training.
pub fn split_dataset(samples: &[Sample], ratios: (f64, f64, f64), seed: u64) -> Result<Splits> {
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test].iter().any(|r| !(0.0..=1.0).contains(r))
        || (r_train + r_val + r_test - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(format!("split ratios {ratios:?} must sum to 1")));
    }
    let n = samples.len();
    let n_val = (n as f64 * r_val + 1e-9).floor() as usize;
    let n_test = (n as f64 * r_test + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    if n_train == 0 || (r_val > 0.0 && n_val == 0) || (r_test > 0.0 && n_test == 0) {
        return Err(Error::InvalidArgument(format!(
            "{n} samples are too few for a non-empty {ratios:?} split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok(Splits {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

/// Column-wise z-score statistics, fitted on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub node_mean: Vec<f64>,
    pub node_std: Vec<f64>,
    pub edge_mean: Vec<f64>,
    pub edge_std: Vec<f64>,
}

fn column_stats<'a>(blocks: impl Iterator<Item = &'a Array2<f64>>, width: usize) -> (Vec<f64>, Vec<f64>) {
    let stacked: Vec<ndarray::ArrayView2<f64>> = blocks.map(|b| b.view()).collect();
    let all = ndarray::concatenate(Axis(0), &stacked).unwrap_or_else(|_| Array2::zeros((0, width)));
    let mut mean = Vec::with_capacity(width);
    let mut std = Vec::with_capacity(width);
    for col in all.columns() {
        let n = col.len() as f64;
        let first = col.first().copied().unwrap_or(0.0);
        if col.iter().all(|&v| v == first) {
            mean.push(first);
            std.push(STD_FLOOR);
            continue;
        }
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.push(m);
        std.push(var.sqrt().max(STD_FLOOR));
    }
    (mean, std)
}

impl Normalizer {
    pub fn fit(train: &[Sample]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot fit a normalizer on an empty split".into(),
            ));
        }
        let (node_mean, node_std) = column_stats(train.iter().map(|s| &s.node_features), NODE_FEATURES);
        let (edge_mean, edge_std) = column_stats(train.iter().map(|s| &s.edge_features), EDGE_FEATURES);
        Ok(Self {
            node_mean,
            node_std,
            edge_mean,
            edge_std,
        })
    }

    /// Identity transform for the given widths.
    pub fn identity(node_width: usize, edge_width: usize) -> Self {
        Self {
            node_mean: vec![0.0; node_width],
            node_std: vec![1.0; node_width],
            edge_mean: vec![0.0; edge_width],
            edge_std: vec![1.0; edge_width],
        }
    }

    fn apply(m: &Array2<f64>, mean: &[f64], std: &[f64]) -> Array2<f64> {
        let mut out = m.clone();
        for mut row in out.rows_mut() {
            for ((v, mu), sd) in row.iter_mut().zip(mean).zip(std) {
                *v = (*v - mu) / sd;
            }
        }
        out
    }

    pub fn apply_node(&self, features: &Array2<f64>) -> Array2<f64> {
        Self::apply(features, &self.node_mean, &self.node_std)
    }

    pub fn apply_edge(&self, features: &Array2<f64>) -> Array2<f64> {
        Self::apply(features, &self.edge_mean, &self.edge_std)
    }
}
