//! Parses a case file (default: the bundled IEEE 14-bus case) and prints its graph.

use anyhow::{Context, Result};
use gridscreen::fixtures::IEEE14;
use gridscreen::netcase::{parse_case, to_graph};

fn main() -> Result<()> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?,
        None => IEEE14.to_string(),
    };
    let net = parse_case(&text)?;
    let topo = to_graph(&net);
    println!(
        "{} buses, {} branches, {} generators, base {} MVA, slack bus {}",
        net.num_buses(),
        net.num_branches(),
        net.num_generators(),
        net.base_mva(),
        net.buses()[net.slack()].id
    );
    println!(
        "capacity {:.1} MW for {:.1} MW of load",
        net.total_capacity_mw(),
        net.base_load().iter().sum::<f64>()
    );
    for (bus, deg) in net.buses().iter().zip(&topo.degree) {
        println!("  bus {:>3} {:?} degree {}", bus.id, bus.bus_type, deg);
    }
    println!("fingerprint {}", net.fingerprint());
    Ok(())
}
