use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    affine, col_sums, glorot, mse_softmax_backward, relu, relu_backward, softmax_rows, Batch, Binding, EdgeModel,
    ModelConfig,
};
use crate::samplegen::Normalizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    #[serde(rename = "W", with = "crate::nested")]
    pub w: Array2<f64>,
    #[serde(with = "crate::nested::vector")]
    pub b: Array1<f64>,
}

/// Topology-blind baseline: a dense tower over all bus features, another over all
/// branch features, and one dense layer mapping the concatenation to per-branch logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub node_layers: Vec<DenseLayer>,
    pub edge_layers: Vec<DenseLayer>,
    pub combine: DenseLayer,
    pub binding: Binding,
    pub threshold: Option<f64>,
}

struct TowerCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    out: Array2<f64>,
}

fn tower_forward(layers: &[DenseLayer], x: Array2<f64>) -> TowerCache {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut cur = x;
    for l in layers {
        let z = affine(&cur, &l.w, &l.b);
        let a = relu(&z);
        inputs.push(cur);
        pre.push(z);
        cur = a;
    }
    TowerCache { inputs, pre, out: cur }
}

fn tower_backward(layers: &[DenseLayer], cache: &TowerCache, d_out: Array2<f64>) -> Vec<(Array2<f64>, Array1<f64>)> {
    let mut grads = Vec::with_capacity(layers.len());
    let mut d = d_out;
    for (i, l) in layers.iter().enumerate().rev() {
        relu_backward(&mut d, &cache.pre[i]);
        grads.push((d.t().dot(&cache.inputs[i]), col_sums(&d)));
        if i > 0 {
            d = d.dot(&l.w);
        }
    }
    grads.reverse();
    grads
}

impl MlpModel {
    pub fn init(config: ModelConfig, binding: Binding) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut tower = |input: usize, width: usize| -> Vec<DenseLayer> {
            let mut layers = Vec::with_capacity(config.num_layers);
            let mut fan_in = input;
            for _ in 0..config.num_layers {
                layers.push(DenseLayer {
                    w: glorot(&mut rng, width, fan_in),
                    b: Array1::zeros(width),
                });
                fan_in = width;
            }
            layers
        };
        let node_layers = tower(binding.num_buses * binding.node_feature_width, config.node_channels);
        let edge_layers = tower(binding.num_branches * binding.edge_feature_width, config.edge_channels);
        let out = binding.num_branches * config.output_classes;
        let combine = DenseLayer {
            w: glorot(&mut rng, out, config.node_channels + config.edge_channels),
            b: Array1::zeros(out),
        };
        let normalizer = Normalizer::identity(binding.node_feature_width, binding.edge_feature_width);
        Self {
            config,
            normalizer,
            node_layers,
            edge_layers,
            combine,
            binding,
            threshold: None,
        }
    }

    fn inputs(&self, batch: &Batch) -> (Array2<f64>, Array2<f64>) {
        let node = batch
            .node
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch.size, batch.num_nodes * batch.node.ncols()))
            .expect("contiguous node block");
        let edge = batch
            .edge
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch.size, batch.num_edges * batch.edge.ncols()))
            .expect("contiguous edge block");
        (node, edge)
    }

    fn run(&self, batch: &Batch) -> (TowerCache, TowerCache, Array2<f64>, Array2<f64>) {
        let (xn, xe) = self.inputs(batch);
        let nc = tower_forward(&self.node_layers, xn);
        let ec = tower_forward(&self.edge_layers, xe);
        let joined = ndarray::concatenate(ndarray::Axis(1), &[nc.out.view(), ec.out.view()]).expect("batch rows agree");
        let logits = affine(&joined, &self.combine.w, &self.combine.b)
            .into_shape_with_order((batch.size * batch.num_edges, 2))
            .expect("logits are contiguous");
        let probs = softmax_rows(&logits);
        (nc, ec, joined, probs)
    }
}

impl EdgeModel for MlpModel {
    fn config(&self) -> &ModelConfig {
        &self.config
    }
    fn binding(&self) -> &Binding {
        &self.binding
    }
    fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }
    fn set_normalizer(&mut self, normalizer: Normalizer) {
        self.normalizer = normalizer;
    }

    fn forward_batch(&self, batch: &Batch) -> Array2<f64> {
        self.run(batch).3
    }

    fn loss_and_gradients(&self, batch: &Batch, targets: &Array2<f64>) -> (f64, Vec<Vec<f64>>) {
        let (nc, ec, joined, probs) = self.run(batch);
        let loss = super::loss_mse(&probs, targets);
        let dz = mse_softmax_backward(&probs, targets)
            .into_shape_with_order((batch.size, 2 * batch.num_edges))
            .expect("contiguous");
        let d_wc = dz.t().dot(&joined);
        let d_bc = col_sums(&dz);
        let d_joined = dz.dot(&self.combine.w);
        let cn = self.config.node_channels;
        let d_node = d_joined.slice(ndarray::s![.., ..cn]).to_owned();
        let d_edge = d_joined.slice(ndarray::s![.., cn..]).to_owned();
        let gn = tower_backward(&self.node_layers, &nc, d_node);
        let ge = tower_backward(&self.edge_layers, &ec, d_edge);
        let mut grads = Vec::new();
        for (w, b) in gn.into_iter().chain(ge) {
            grads.push(w.into_iter().collect());
            grads.push(b.to_vec());
        }
        grads.push(d_wc.into_iter().collect());
        grads.push(d_bc.to_vec());
        (loss, grads)
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in self
            .node_layers
            .iter()
            .chain(&self.edge_layers)
            .chain(std::iter::once(&self.combine))
        {
            out.push(l.w.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in self
            .node_layers
            .iter_mut()
            .chain(self.edge_layers.iter_mut())
            .chain(std::iter::once(&mut self.combine))
        {
            out.push(l.w.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    fn relu_pattern(&self, batch: &Batch) -> Vec<bool> {
        let (nc, ec, _, _) = self.run(batch);
        nc.pre
            .iter()
            .chain(&ec.pre)
            .flat_map(|z| z.iter().map(|&v| v > 0.0).collect::<Vec<_>>())
            .collect()
    }
}
