//! Compares the topology-blind MLP with the GNN on the same split.

use anyhow::Result;
use gridscreen::fixtures::IEEE14;
use gridscreen::gnn::ModelConfig;
use gridscreen::netcase::parse_case;
use gridscreen::ropf::{evaluate, train_for_threshold, EvalOptions, ModelKind};
use gridscreen::samplegen::{generate_dataset, split_dataset, GenerateOptions};

fn main() -> Result<()> {
    let net = parse_case(IEEE14)?;
    let data = generate_dataset(&net, 1000, 0.1, 3, GenerateOptions::default())?;
    let splits = split_dataset(&data.samples, (0.8, 0.1, 0.1), 3)?;
    let config = ModelConfig {
        epochs: 30,
        learning_rate: 3e-4,
        ..ModelConfig::default()
    };
    for kind in [ModelKind::Mlp, ModelKind::Gnn] {
        let (model, _) = train_for_threshold(&net, &splits, 0.9, kind, &config)?;
        let r = evaluate(&net, &model, &splits.test, 0.9, EvalOptions::default())?;
        println!(
            "{:?}: error {:.3}%, type 1 {}, type 2 {}, samples over limit {:.1}%",
            kind,
            r.edge_prediction_error_pct,
            r.confusion.totals.false_pos,
            r.confusion.totals.false_neg,
            r.pct_samples_with_violation
        );
    }
    Ok(())
}
