use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    affine, col_sums, flatten, glorot, mse_softmax_backward, relu, relu_backward, softmax_rows, split_cols, Batch,
    Binding, EdgeModel, ModelConfig,
};
use crate::netcase::GraphTopology;
use crate::samplegen::Normalizer;

/// One node/edge co-update layer.
///
/// For branch `k = (i, j)`: `m_k = relu(W_edge [h_i | h_j | e_k] + b_edge)` becomes the
/// new edge embedding. For bus `n`: `h'_n = relu(W_node [h_n | sum_out m | sum_in m] + b_node)`,
/// where outgoing and incoming messages follow branch orientation and are summed
/// separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XenetLayer {
    #[serde(rename = "W_edge", with = "crate::nested")]
    pub w_edge: Array2<f64>,
    #[serde(with = "crate::nested::vector")]
    pub b_edge: Array1<f64>,
    #[serde(rename = "W_node", with = "crate::nested")]
    pub w_node: Array2<f64>,
    #[serde(with = "crate::nested::vector")]
    pub b_node: Array1<f64>,
}

impl XenetLayer {
    fn node_in(&self) -> usize {
        self.w_node.ncols() - 2 * self.w_edge.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHead {
    #[serde(rename = "W_out", with = "crate::nested")]
    pub w_out: Array2<f64>,
    #[serde(with = "crate::nested::vector")]
    pub b_out: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub layers: Vec<XenetLayer>,
    pub dense: DenseHead,
    pub binding: Binding,
    /// Loading threshold the model was trained for, if any.
    pub threshold: Option<f64>,
}

struct LayerCache {
    x_edge: Array2<f64>,
    z_edge: Array2<f64>,
    x_node: Array2<f64>,
    z_node: Array2<f64>,
    h_out: Array2<f64>,
    e_out: Array2<f64>,
}

fn layer_forward(layer: &XenetLayer, h: &Array2<f64>, e: &Array2<f64>, from: &[usize], to: &[usize]) -> LayerCache {
    let h_from = h.select(Axis(0), from);
    let h_to = h.select(Axis(0), to);
    let x_edge = ndarray::concatenate(Axis(1), &[h_from.view(), h_to.view(), e.view()]).expect("row counts agree");
    let z_edge = affine(&x_edge, &layer.w_edge, &layer.b_edge);
    let m = relu(&z_edge);

    let ce = m.ncols();
    let mut sum_out = Array2::zeros((h.nrows(), ce));
    let mut sum_in = Array2::zeros((h.nrows(), ce));
    for (k, row) in m.rows().into_iter().enumerate() {
        let mut o = sum_out.row_mut(from[k]);
        o += &row;
        let mut i = sum_in.row_mut(to[k]);
        i += &row;
    }
    let x_node = ndarray::concatenate(Axis(1), &[h.view(), sum_out.view(), sum_in.view()]).expect("row counts agree");
    let z_node = affine(&x_node, &layer.w_node, &layer.b_node);
    let h_out = relu(&z_node);
    LayerCache {
        x_edge,
        z_edge,
        x_node,
        z_node,
        h_out,
        e_out: m,
    }
}

/// Applies one layer to a single graph's embeddings; returns `(H', E')`.
pub fn xenet_layer_forward(
    layer: &XenetLayer,
    h: &Array2<f64>,
    e: &Array2<f64>,
    topology: &GraphTopology,
) -> (Array2<f64>, Array2<f64>) {
    let from: Vec<usize> = topology.edges.iter().map(|e| e.0).collect();
    let to: Vec<usize> = topology.edges.iter().map(|e| e.1).collect();
    let c = layer_forward(layer, h, e, &from, &to);
    (c.h_out, c.e_out)
}

struct LayerGrads {
    w_edge: Array2<f64>,
    b_edge: Array1<f64>,
    w_node: Array2<f64>,
    b_node: Array1<f64>,
}

type InputGrads = (Array2<f64>, Array2<f64>);

/// Returns parameter gradients and gradients w.r.t. the layer inputs `(dH, dE)`.
fn layer_backward(
    layer: &XenetLayer,
    cache: &LayerCache,
    d_h_out: &Array2<f64>,
    d_e_out: &Array2<f64>,
    from: &[usize],
    to: &[usize],
    need_input_grads: bool,
) -> (LayerGrads, Option<InputGrads>) {
    let cn_in = layer.node_in();
    let ce = layer.w_edge.nrows();

    let mut dz_node = d_h_out.clone();
    relu_backward(&mut dz_node, &cache.z_node);
    let w_node = dz_node.t().dot(&cache.x_node);
    let b_node = col_sums(&dz_node);
    let dx_node = dz_node.dot(&layer.w_node);
    let parts = split_cols(&dx_node, &[cn_in, cn_in + ce]);
    let (d_h_direct, d_sum_out, d_sum_in) = (&parts[0], &parts[1], &parts[2]);

    let mut dm = d_e_out.clone();
    for (k, mut row) in dm.rows_mut().into_iter().enumerate() {
        row += &d_sum_out.row(from[k]);
        row += &d_sum_in.row(to[k]);
    }
    let mut dz_edge = dm;
    relu_backward(&mut dz_edge, &cache.z_edge);
    let w_edge = dz_edge.t().dot(&cache.x_edge);
    let b_edge = col_sums(&dz_edge);

    let inputs = need_input_grads.then(|| {
        let dx_edge = dz_edge.dot(&layer.w_edge);
        let mut dh = d_h_direct.clone();
        for k in 0..dx_edge.nrows() {
            let mut r = dh.row_mut(from[k]);
            r += &dx_edge.slice(s![k, 0..cn_in]);
            let mut r = dh.row_mut(to[k]);
            r += &dx_edge.slice(s![k, cn_in..2 * cn_in]);
        }
        let de = dx_edge.slice(s![.., 2 * cn_in..]).to_owned();
        (dh, de)
    });
    (
        LayerGrads {
            w_edge,
            b_edge,
            w_node,
            b_node,
        },
        inputs,
    )
}

impl GnnModel {
    /// Glorot-uniform weights, zero biases, identity normalizer.
    pub fn init(config: ModelConfig, binding: Binding) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (cn, ce) = (config.node_channels, config.edge_channels);
        let mut layers = Vec::with_capacity(config.num_layers);
        let (mut node_in, mut edge_in) = (binding.node_feature_width, binding.edge_feature_width);
        for _ in 0..config.num_layers {
            let w_edge = glorot(&mut rng, ce, 2 * node_in + edge_in);
            let w_node = glorot(&mut rng, cn, node_in + 2 * ce);
            layers.push(XenetLayer {
                w_edge,
                b_edge: Array1::zeros(ce),
                w_node,
                b_node: Array1::zeros(cn),
            });
            node_in = cn;
            edge_in = ce;
        }
        let dense = DenseHead {
            w_out: glorot(&mut rng, config.output_classes, ce),
            b_out: Array1::zeros(config.output_classes),
        };
        let normalizer = Normalizer::identity(binding.node_feature_width, binding.edge_feature_width);
        Self {
            config,
            normalizer,
            layers,
            dense,
            binding,
            threshold: None,
        }
    }

    fn run(&self, batch: &Batch) -> (Vec<LayerCache>, Array2<f64>) {
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let c = match caches.last() {
                None => layer_forward(layer, &batch.node, &batch.edge, &batch.from, &batch.to),
                Some(prev) => layer_forward(layer, &prev.h_out, &prev.e_out, &batch.from, &batch.to),
            };
            caches.push(c);
        }
        let last = caches.last().map_or(&batch.edge, |c| &c.e_out);
        let logits = affine(last, &self.dense.w_out, &self.dense.b_out);
        (caches, softmax_rows(&logits))
    }
}

impl EdgeModel for GnnModel {
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
        self.run(batch).1
    }

    fn loss_and_gradients(&self, batch: &Batch, targets: &Array2<f64>) -> (f64, Vec<Vec<f64>>) {
        let (caches, probs) = self.run(batch);
        let loss = super::loss_mse(&probs, targets);
        let dz = mse_softmax_backward(&probs, targets);
        let last_e = caches.last().map_or(&batch.edge, |c| &c.e_out);
        let d_w_out = dz.t().dot(last_e);
        let d_b_out = col_sums(&dz);
        let mut d_e = dz.dot(&self.dense.w_out);
        // the head reads edge embeddings only
        let mut d_h = Array2::zeros(caches.last().map_or(batch.node.dim(), |c| c.h_out.dim()));

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (i, (layer, cache)) in self.layers.iter().zip(&caches).enumerate().rev() {
            let (g, inputs) = layer_backward(layer, cache, &d_h, &d_e, &batch.from, &batch.to, i > 0);
            layer_grads.push(g);
            if let Some((dh, de)) = inputs {
                d_h = dh;
                d_e = de;
            }
        }
        layer_grads.reverse();

        let mut grads = Vec::with_capacity(4 * self.layers.len() + 2);
        for g in layer_grads {
            grads.push(g.w_edge.into_iter().collect());
            grads.push(g.b_edge.to_vec());
            grads.push(g.w_node.into_iter().collect());
            grads.push(g.b_node.to_vec());
        }
        grads.extend(flatten(vec![d_w_out]));
        grads.push(d_b_out.to_vec());
        (loss, grads)
    }

    fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.w_edge.as_slice().expect("standard layout"));
            out.push(l.b_edge.as_slice().expect("standard layout"));
            out.push(l.w_node.as_slice().expect("standard layout"));
            out.push(l.b_node.as_slice().expect("standard layout"));
        }
        out.push(self.dense.w_out.as_slice().expect("standard layout"));
        out.push(self.dense.b_out.as_slice().expect("standard layout"));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(4 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.w_edge.as_slice_mut().expect("standard layout"));
            out.push(l.b_edge.as_slice_mut().expect("standard layout"));
            out.push(l.w_node.as_slice_mut().expect("standard layout"));
            out.push(l.b_node.as_slice_mut().expect("standard layout"));
        }
        out.push(self.dense.w_out.as_slice_mut().expect("standard layout"));
        out.push(self.dense.b_out.as_slice_mut().expect("standard layout"));
        out
    }

    fn relu_pattern(&self, batch: &Batch) -> Vec<bool> {
        let (caches, _) = self.run(batch);
        caches
            .iter()
            .flat_map(|c| {
                c.z_edge
                    .iter()
                    .chain(c.z_node.iter())
                    .map(|&z| z > 0.0)
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::TRI3;
    use crate::netcase::{parse_case, to_graph};
    use crate::samplegen::{extract_features, EDGE_FEATURES, NODE_FEATURES};

    fn small_config() -> ModelConfig {
        ModelConfig {
            num_layers: 2,
            node_channels: 8,
            edge_channels: 8,
            seed: 3,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let net = parse_case(TRI3).unwrap();
        let binding = Binding::for_network(&net, NODE_FEATURES, EDGE_FEATURES);
        let a = GnnModel::init(ModelConfig::default(), binding.clone());
        let b = GnnModel::init(ModelConfig::default(), binding);
        assert_eq!(a, b);
        for l in &a.layers {
            assert!(l.b_edge.iter().chain(l.b_node.iter()).all(|&v| v == 0.0));
            for w in [&l.w_edge, &l.w_node] {
                let bound = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
                assert!(w.iter().all(|v| v.abs() <= bound));
            }
        }
        assert_eq!(a.layers[0].w_edge.dim(), (64, 2 * 7 + 2));
        assert_eq!(a.layers[0].w_node.dim(), (64, 7 + 128));
        assert_eq!(a.layers[1].w_edge.dim(), (64, 192));
        assert_eq!(a.dense.w_out.dim(), (2, 64));
    }

    #[test]
    fn zero_parameters_propagate_zeros() {
        let net = parse_case(TRI3).unwrap();
        let topo = to_graph(&net);
        let mut m = GnnModel::init(small_config(), Binding::for_network(&net, NODE_FEATURES, EDGE_FEATURES));
        m.zero_params();
        let (node, edge) = extract_features(&net, &net.base_load());
        let (h, e) = xenet_layer_forward(&m.layers[0], &node, &edge, &topo);
        assert!(h.iter().chain(e.iter()).all(|&v| v == 0.0));
        let p = m.forward(&node, &edge, &topo).unwrap();
        assert!(p.0.iter().all(|&v| v == 0.5));
        assert_eq!(p.monitored().len(), 3);
    }

    #[test]
    fn isolated_node_sees_only_itself() {
        // synthetic topology: node 2 has no branches
        let topo = GraphTopology {
            adjacency: vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]],
            degree: vec![1, 1, 0],
            edges: vec![(0, 1)],
        };
        let cfg = small_config();
        let binding = Binding {
            num_buses: 3,
            num_branches: 1,
            node_feature_width: 4,
            edge_feature_width: 2,
        };
        let mut m = GnnModel::init(cfg, binding);
        for l in &mut m.layers {
            l.b_edge.fill(0.3);
        }
        let h = Array2::from_shape_fn((3, 4), |(i, j)| (i * 4 + j) as f64 * 0.1 - 0.5);
        let e = Array2::from_shape_fn((1, 2), |(_, j)| j as f64 + 0.5);
        let (h1, _) = xenet_layer_forward(&m.layers[0], &h, &e, &topo);
        let layer = &m.layers[0];
        let mut x = vec![0.0; layer.w_node.ncols()];
        x[..4].copy_from_slice(h.row(2).as_slice().unwrap());
        let expected = relu(&affine(
            &Array2::from_shape_vec((1, x.len()), x).unwrap(),
            &layer.w_node,
            &layer.b_node,
        ));
        assert_eq!(h1.row(2), expected.row(0));
    }
}
