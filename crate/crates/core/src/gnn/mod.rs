//! Edge-classification models that predict congested branches.
//!
//! [`GnnModel`] stacks XENet-style message-passing layers that update node and edge
//! embeddings together, followed by a dense softmax head on the final edge embeddings.
//! [`MlpModel`] is the topology-blind baseline: flattened node and branch features go
//! through separate dense towers and are merged by one dense layer.
//!
//! Both models are trained on the mean squared error between softmax outputs and
//! one-hot labels, with hand-written reverse-mode gradients and Adam.

mod check;
mod io;
mod mlp;
mod xenet;

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dcopf::MonitoredSet;
use crate::error::{Error, Result};
use crate::netcase::{GraphTopology, Network};
use crate::samplegen::{label_sample, Normalizer, Sample};

pub use check::{gradient_check, relative_error, GradientCheck};
pub use io::{load_model, save_model, SavedModel, MODEL_FORMAT_VERSION};
pub use mlp::MlpModel;
pub use xenet::{xenet_layer_forward, GnnModel, XenetLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub node_channels: usize,
    pub edge_channels: usize,
    pub activation: Activation,
    pub output_classes: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            node_channels: 64,
            edge_channels: 64,
            activation: Activation::Relu,
            output_classes: 2,
            seed: 0,
            learning_rate: 1e-3,
            epochs: 250,
            batch_size: 32,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.node_channels == 0 || self.edge_channels == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "layer count, channel widths and batch size must be positive".into(),
            ));
        }
        if self.output_classes != 2 {
            return Err(Error::InvalidArgument("only two output classes are supported".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Shapes the model was built for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub num_buses: usize,
    pub num_branches: usize,
    pub node_feature_width: usize,
    pub edge_feature_width: usize,
}

impl Binding {
    pub fn for_network(network: &Network, node_feature_width: usize, edge_feature_width: usize) -> Self {
        Self {
            num_buses: network.num_buses(),
            num_branches: network.num_branches(),
            node_feature_width,
            edge_feature_width,
        }
    }

    fn check(&self, node: &Array2<f64>, edge: &Array2<f64>, topology: &GraphTopology) -> Result<()> {
        let ok = node.dim() == (self.num_buses, self.node_feature_width)
            && edge.dim() == (self.num_branches, self.edge_feature_width)
            && topology.num_nodes() == self.num_buses
            && topology.num_edges() == self.num_branches;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "model expects {} buses x {} and {} branches x {}, got node {:?}, edge {:?}",
                self.num_buses,
                self.node_feature_width,
                self.num_branches,
                self.edge_feature_width,
                node.dim(),
                edge.dim()
            )))
        }
    }
}

/// `|K| x 2` softmax rows: `(p_not_congested, p_congested)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeProbabilities(pub Array2<f64>);

impl EdgeProbabilities {
    pub fn congested(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.column(1).into_iter().copied()
    }

    /// Branches with `p_congested >= 0.5`; ties count as congested.
    pub fn monitored(&self) -> MonitoredSet {
        let mask: Vec<bool> = self.0.rows().into_iter().map(|r| r[1] >= r[0]).collect();
        MonitoredSet::from_mask(&mask)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.train_loss.len()
    }
    pub fn is_empty(&self) -> bool {
        self.train_loss.is_empty()
    }

    /// `epoch,train_loss,val_loss,train_acc,val_acc`, epochs numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,train_acc,val_acc\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                self.train_loss[i],
                self.val_loss[i],
                self.train_acc[i],
                self.val_acc[i]
            ));
        }
        out
    }
}

/// Normalized, stacked features for a batch of samples on one topology.
///
/// Sample `b` occupies node rows `b*N..(b+1)*N` and edge rows `b*K..(b+1)*K`; graph
/// edges are offset accordingly so the batch is a disjoint union of copies.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub node: Array2<f64>,
    pub edge: Array2<f64>,
    pub from: Vec<usize>,
    pub to: Vec<usize>,
}

impl Batch {
    pub fn new(items: &[(&Array2<f64>, &Array2<f64>)], topology: &GraphTopology, normalizer: &Normalizer) -> Self {
        let nodes: Vec<Array2<f64>> = items.iter().map(|(nf, _)| normalizer.apply_node(nf)).collect();
        let edges: Vec<Array2<f64>> = items.iter().map(|(_, ef)| normalizer.apply_edge(ef)).collect();
        Self::from_normalized(
            &nodes.iter().collect::<Vec<_>>(),
            &edges.iter().collect::<Vec<_>>(),
            topology,
        )
    }

    pub fn from_normalized(nodes: &[&Array2<f64>], edges: &[&Array2<f64>], topology: &GraphTopology) -> Self {
        let n = topology.num_nodes();
        let k = topology.num_edges();
        let size = nodes.len();
        let nv: Vec<_> = nodes.iter().map(|m| m.view()).collect();
        let ev: Vec<_> = edges.iter().map(|m| m.view()).collect();
        let node = ndarray::concatenate(Axis(0), &nv).expect("uniform node widths");
        let edge = ndarray::concatenate(Axis(0), &ev).expect("uniform edge widths");
        let mut from = Vec::with_capacity(size * k);
        let mut to = Vec::with_capacity(size * k);
        for b in 0..size {
            for &(f, t) in &topology.edges {
                from.push(b * n + f);
                to.push(b * n + t);
            }
        }
        Self {
            size,
            num_nodes: n,
            num_edges: k,
            node,
            edge,
            from,
            to,
        }
    }
}

/// Common surface of the trainable edge classifiers.
pub trait EdgeModel: Clone {
    fn config(&self) -> &ModelConfig;
    fn binding(&self) -> &Binding;
    fn normalizer(&self) -> &Normalizer;
    fn set_normalizer(&mut self, normalizer: Normalizer);

    /// `(B*K) x 2` probabilities for a batch.
    fn forward_batch(&self, batch: &Batch) -> Array2<f64>;

    /// Mean MSE over the batch and its gradient, aligned with [`EdgeModel::params`].
    fn loss_and_gradients(&self, batch: &Batch, targets: &Array2<f64>) -> (f64, Vec<Vec<f64>>);

    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    /// Sign pattern of every ReLU pre-activation; lets gradient checks detect kinks.
    fn relu_pattern(&self, batch: &Batch) -> Vec<bool>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn forward(
        &self,
        node_features: &Array2<f64>,
        edge_features: &Array2<f64>,
        topology: &GraphTopology,
    ) -> Result<EdgeProbabilities> {
        self.binding().check(node_features, edge_features, topology)?;
        let batch = Batch::new(&[(node_features, edge_features)], topology, self.normalizer());
        Ok(EdgeProbabilities(self.forward_batch(&batch)))
    }

    fn predict_congested(&self, sample: &Sample, topology: &GraphTopology) -> Result<MonitoredSet> {
        Ok(self
            .forward(&sample.node_features, &sample.edge_features, topology)?
            .monitored())
    }

    fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.fill(0.0);
        }
    }
}

/// Glorot-uniform `rows x cols` matrix.
pub(crate) fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..=a))
}

pub(crate) fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

/// Zeroes `grad` where the pre-activation was not positive.
pub(crate) fn relu_backward(grad: &mut Array2<f64>, z: &Array2<f64>) {
    grad.zip_mut_with(z, |g, &zv| {
        if zv <= 0.0 {
            *g = 0.0;
        }
    });
}

pub(crate) fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    if !z.is_standard_layout() {
        z = z.as_standard_layout().into_owned();
    }
    z += b;
    z
}

pub(crate) fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

/// Mean of `(p - y)^2` over all entries.
pub fn loss_mse(probs: &Array2<f64>, labels: &Array2<f64>) -> f64 {
    assert_eq!(probs.dim(), labels.dim(), "probability and label shapes differ");
    let n = probs.len() as f64;
    probs.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n
}

/// Gradient of [`loss_mse`] pushed back through a row softmax, giving d/d(logits).
pub(crate) fn mse_softmax_backward(probs: &Array2<f64>, labels: &Array2<f64>) -> Array2<f64> {
    let scale = 2.0 / probs.len() as f64;
    let mut dz = Array2::zeros(probs.dim());
    for ((p, y), mut out) in probs.rows().into_iter().zip(labels.rows()).zip(dz.rows_mut()) {
        let dp: Vec<f64> = p.iter().zip(y).map(|(pi, yi)| scale * (pi - yi)).collect();
        let inner: f64 = dp.iter().zip(p).map(|(a, b)| a * b).sum();
        for j in 0..p.len() {
            out[j] = p[j] * (dp[j] - inner);
        }
    }
    dz
}

/// One-hot `(B*K) x 2` targets: column 1 is "congested".
pub fn one_hot(labels: impl IntoIterator<Item = bool>) -> Array2<f64> {
    let rows: Vec<[f64; 2]> = labels
        .into_iter()
        .map(|l| if l { [0.0, 1.0] } else { [1.0, 0.0] })
        .collect();
    let mut out = Array2::zeros((rows.len(), 2));
    for (i, r) in rows.iter().enumerate() {
        out[[i, 0]] = r[0];
        out[[i, 1]] = r[1];
    }
    out
}

pub(crate) fn col_sums(m: &Array2<f64>) -> Array1<f64> {
    m.sum_axis(Axis(0))
}

pub(crate) fn flatten(grads: Vec<Array2<f64>>) -> Vec<Vec<f64>> {
    grads.into_iter().map(|g| g.into_iter().collect()).collect()
}

pub(crate) fn split_cols(m: &Array2<f64>, at: &[usize]) -> Vec<Array2<f64>> {
    let mut out = Vec::with_capacity(at.len() + 1);
    let mut start = 0;
    for &end in at.iter().chain(std::iter::once(&m.ncols())) {
        out.push(m.slice(s![.., start..end]).to_owned());
        start = end;
    }
    out
}

/// Adam with the usual `beta1 = 0.9, beta2 = 0.999, eps = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Pre-normalized features and one-hot targets for a split at a fixed threshold.
pub struct PreparedSplit {
    nodes: Vec<Array2<f64>>,
    edges: Vec<Array2<f64>>,
    labels: Vec<Vec<bool>>,
}

impl PreparedSplit {
    pub fn new(samples: &[Sample], network: &Network, tau: f64, normalizer: &Normalizer) -> Self {
        Self {
            nodes: samples
                .iter()
                .map(|s| normalizer.apply_node(&s.node_features))
                .collect(),
            edges: samples
                .iter()
                .map(|s| normalizer.apply_edge(&s.edge_features))
                .collect(),
            labels: samples
                .iter()
                .map(|s| label_sample(&s.flows_mw, network, tau).0)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn batch(&self, idx: &[usize], topology: &GraphTopology) -> (Batch, Array2<f64>) {
        let nodes: Vec<&Array2<f64>> = idx.iter().map(|&i| &self.nodes[i]).collect();
        let edges: Vec<&Array2<f64>> = idx.iter().map(|&i| &self.edges[i]).collect();
        let batch = Batch::from_normalized(&nodes, &edges, topology);
        let targets = one_hot(idx.iter().flat_map(|&i| self.labels[i].iter().copied()));
        (batch, targets)
    }
}

/// Mean loss and edge accuracy of `model` over a prepared split.
pub fn evaluate_split<M: EdgeModel>(model: &M, split: &PreparedSplit, topology: &GraphTopology) -> (f64, f64) {
    if split.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let bs = model.config().batch_size.max(1);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    let all: Vec<usize> = (0..split.len()).collect();
    for chunk in all.chunks(bs) {
        let (batch, targets) = split.batch(chunk, topology);
        let probs = model.forward_batch(&batch);
        loss_sum += loss_mse(&probs, &targets) * targets.len() as f64;
        for (p, y) in probs.rows().into_iter().zip(targets.rows()) {
            let pred = p[1] >= p[0];
            correct += usize::from(pred == (y[1] == 1.0));
            total += 1;
        }
    }
    (loss_sum / (2 * total) as f64, correct as f64 / total as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub final_model: M,
    /// Parameters from the epoch with the lowest validation loss.
    pub best_model: M,
    pub best_epoch: Option<usize>,
    pub history: TrainHistory,
}

/// Mini-batch Adam on the mean MSE loss. The model's normalizer is used as-is.
pub fn train<M: EdgeModel>(
    model: M,
    train_samples: &[Sample],
    val_samples: &[Sample],
    network: &Network,
    tau: f64,
) -> Result<TrainOutcome<M>> {
    let config = model.config().clone();
    config.validate()?;
    if train_samples.is_empty() || val_samples.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation splits must be non-empty".into(),
        ));
    }
    let topology = crate::netcase::to_graph(network);
    let train_set = PreparedSplit::new(train_samples, network, tau, model.normalizer());
    let val_set = PreparedSplit::new(val_samples, network, tau, model.normalizer());

    let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(config.learning_rate, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005E_ED0F_E90C);
    let mut model = model;
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = None;
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let (batch, targets) = train_set.batch(chunk, &topology);
            let (loss, grads) = model.loss_and_gradients(&batch, &targets);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: bi + 1,
                });
            }
            adam.step(model.params_mut(), &grads);
        }
        let (tl, ta) = evaluate_split(&model, &train_set, &topology);
        let (vl, va) = evaluate_split(&model, &val_set, &topology);
        if !(tl.is_finite() && vl.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch: epoch + 1,
                batch: 0,
            });
        }
        history.train_loss.push(tl);
        history.val_loss.push(vl);
        history.train_acc.push(ta);
        history.val_acc.push(va);
        log::debug!("epoch {}: train {tl:.6} ({ta:.4}) val {vl:.6} ({va:.4})", epoch + 1);
        if vl < best_loss {
            best_loss = vl;
            best = model.clone();
            best_epoch = Some(epoch + 1);
        }
    }
    Ok(TrainOutcome {
        final_model: model,
        best_model: best,
        best_epoch,
        history,
    })
}
