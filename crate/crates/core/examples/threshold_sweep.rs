//! Oracle-label sweep over loading thresholds: monitored fraction and solve time.

use anyhow::Result;
use gridscreen::fixtures::IEEE14;
use gridscreen::gnn::ModelConfig;
use gridscreen::netcase::parse_case;
use gridscreen::ropf::{table_csv, threshold_sweep, EvalOptions, SweepPredictor};
use gridscreen::samplegen::{generate_dataset, split_dataset, GenerateOptions};

fn main() -> Result<()> {
    let net = parse_case(IEEE14)?;
    let data = generate_dataset(&net, 1000, 0.1, 5, GenerateOptions::default())?;
    let splits = split_dataset(&data.samples, (0.8, 0.1, 0.1), 5)?;
    let entries = threshold_sweep(
        &net,
        &splits,
        &[70.0, 75.0, 80.0, 85.0, 90.0, 95.0],
        SweepPredictor::Oracle,
        &ModelConfig::default(),
        EvalOptions::default(),
    )?;
    let reports: Vec<_> = entries.into_iter().map(|e| e.report).collect();
    print!("{}", table_csv(&reports));
    Ok(())
}
