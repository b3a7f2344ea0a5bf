//! Central-difference check of the hand-written gradients for both models.

use anyhow::Result;
use gridscreen::fixtures::TRI3;
use gridscreen::gnn::{gradient_check, Binding, EdgeModel, GnnModel, MlpModel, ModelConfig, PreparedSplit};
use gridscreen::netcase::{parse_case, to_graph};
use gridscreen::samplegen::{generate_dataset, GenerateOptions, Normalizer, EDGE_FEATURES, NODE_FEATURES};

fn main() -> Result<()> {
    let net = parse_case(TRI3)?;
    let data = generate_dataset(&net, 8, 0.1, 0, GenerateOptions::default())?.samples;
    let norm = Normalizer::fit(&data)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let (batch, targets) = PreparedSplit::new(&data, &net, 0.5, &norm).batch(&idx, &to_graph(&net));
    let binding = Binding::for_network(&net, NODE_FEATURES, EDGE_FEATURES);
    let cfg = ModelConfig {
        num_layers: 2,
        node_channels: 8,
        edge_channels: 8,
        ..ModelConfig::default()
    };
    let gnn = GnnModel::init(cfg.clone(), binding.clone());
    let mlp = MlpModel::init(cfg, binding);
    println!(
        "gnn: {} parameters, {:?}",
        gnn.num_params(),
        gradient_check(&gnn, &batch, &targets, 1e-5)
    );
    println!(
        "mlp: {} parameters, {:?}",
        mlp.num_params(),
        gradient_check(&mlp, &batch, &targets, 1e-5)
    );
    Ok(())
}
