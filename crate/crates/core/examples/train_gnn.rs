//! Trains the edge-classification GNN on IEEE 14-bus samples at a 95% threshold.

use anyhow::Result;
use gridscreen::fixtures::IEEE14;
use gridscreen::gnn::ModelConfig;
use gridscreen::netcase::parse_case;
use gridscreen::ropf::{train_for_threshold, ModelKind};
use gridscreen::samplegen::{generate_dataset, split_dataset, GenerateOptions};

fn main() -> Result<()> {
    let net = parse_case(IEEE14)?;
    let data = generate_dataset(&net, 1000, 0.1, 1, GenerateOptions::default())?;
    let splits = split_dataset(&data.samples, (0.8, 0.1, 0.1), 1)?;
    let config = ModelConfig {
        epochs: 40,
        learning_rate: 3e-4,
        ..ModelConfig::default()
    };
    let (model, history) = train_for_threshold(&net, &splits, 0.95, ModelKind::Gnn, &config)?;
    print!("{}", history.to_csv());
    println!("model kind {}, threshold {:?}", model.kind(), model.threshold());
    Ok(())
}
