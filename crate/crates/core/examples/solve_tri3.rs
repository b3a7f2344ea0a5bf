//! Full and reduced OPF on the three-bus fixture.

use anyhow::Result;
use gridscreen::cli::format_dispatch;
use gridscreen::dcopf::{solve_opf, MonitoredSet};
use gridscreen::fixtures::TRI3;
use gridscreen::netcase::parse_case;

fn main() -> Result<()> {
    let net = parse_case(TRI3)?;
    let load = net.base_load();
    for (name, monitored) in [
        ("all branches", MonitoredSet::all(3)),
        ("no branches", MonitoredSet::none()),
    ] {
        let sol = solve_opf(&net, &load, &monitored)?;
        println!("== monitoring {name}");
        print!("{}", format_dispatch(&net, &sol, &monitored));
    }
    Ok(())
}
