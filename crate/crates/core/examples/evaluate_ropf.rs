//! Reduced OPF with oracle, all-lines and no-lines predictors; prints the report tables.

use anyhow::Result;
use gridscreen::dcopf::MonitoredSet;
use gridscreen::fixtures::IEEE14;
use gridscreen::netcase::parse_case;
use gridscreen::ropf::{evaluate, table_csv, EvalOptions, FixedSet, OracleLabels, Predictor};
use gridscreen::samplegen::{generate_dataset, GenerateOptions};

fn main() -> Result<()> {
    let net = parse_case(IEEE14)?;
    let data = generate_dataset(&net, 200, 0.1, 9, GenerateOptions::default())?;
    let tau = 0.9;
    let predictors: Vec<(&str, Box<dyn Predictor>)> = vec![
        ("oracle", Box::new(OracleLabels { tau })),
        ("all lines", Box::new(FixedSet::all(&net))),
        ("no lines", Box::new(FixedSet(MonitoredSet::none()))),
    ];
    for (name, p) in predictors {
        let report = evaluate(&net, p.as_ref(), &data.samples, tau, EvalOptions::default())?;
        report.check_consistency().map_err(anyhow::Error::msg)?;
        println!("== {name}");
        print!("{}", table_csv(std::slice::from_ref(&report)));
        print!("{}", report.branch_csv());
    }
    Ok(())
}
