//! Generates a perturbed-load dataset for the IEEE 14-bus case and summarizes labels.
//!
//! Usage: `cargo run --release --example generate_dataset -- [samples] [out.jsonl]`

use anyhow::Result;
use gridscreen::fixtures::IEEE14;
use gridscreen::netcase::parse_case;
use gridscreen::samplegen::{generate_dataset, GenerateOptions};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(500);
    let out = args.next();
    let net = parse_case(IEEE14)?;
    let data = generate_dataset(&net, count, 0.1, 42, GenerateOptions::default())?;
    println!(
        "{} samples, {} infeasible redraws",
        data.samples.len(),
        data.header.infeasible_redraws
    );
    for tau in [0.7, 0.8, 0.9, 0.95] {
        let mut per_branch = vec![0usize; net.num_branches()];
        for s in &data.samples {
            for (k, l) in s.labels(&net, tau).0.iter().enumerate() {
                per_branch[k] += usize::from(*l);
            }
        }
        let hot: Vec<String> = per_branch
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, c)| format!("{}:{c}", net.branch_label(k)))
            .collect();
        println!("tau {tau}: congested counts {}", hot.join(" "));
    }
    if let Some(path) = out {
        data.save(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
