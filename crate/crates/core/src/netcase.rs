//! Case-file parsing and the immutable network model.
//!
//! The accepted format is a small table dialect in the spirit of MATPOWER:
//!
//! ```text
//! % comment
//! #BASE
//! 100
//! #BUS
//! % id type load_mw        (type: 1 = load, 2 = generator, 3 = slack)
//! 1 3 0
//! #GEN
//! % bus cost_per_mwh p_min_mw p_max_mw
//! 1 10 0 200
//! #BRANCH
//! % from to reactance_pu rate_a_mw
//! 1 2 0.1 200
//! ```
//!
//! Anything outside this subset is rejected with a line/column diagnostic.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::CaseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Load,
    Generator,
    Slack,
}

impl BusType {
    fn code(self) -> u8 {
        match self {
            BusType::Load => 1,
            BusType::Generator => 2,
            BusType::Slack => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// External bus number, as written in the case file.
    pub id: u32,
    pub bus_type: BusType,
    pub base_load_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// External id of the from-bus.
    pub from_bus: u32,
    /// External id of the to-bus.
    pub to_bus: u32,
    pub reactance_pu: f64,
    pub rate_a_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: u32,
    pub cost_per_mwh: f64,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
}

/// Validated grid model. Internal indices are dense, 0-based, and follow file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    slack: usize,
    // internal endpoint indices, one pair per branch
    endpoints: Vec<(usize, usize)>,
    gen_bus: Vec<usize>,
    gens_at: Vec<Vec<usize>>,
    out_branches: Vec<Vec<usize>>,
    in_branches: Vec<Vec<usize>>,
}

impl Network {
    /// Validates raw tables and derives the incidence maps.
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        branches: Vec<Branch>,
    ) -> Result<Self, CaseError> {
        if !(base_mva.is_finite() && base_mva > 0.0) {
            return Err(CaseError::Invalid(format!("base_mva must be positive, got {base_mva}")));
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(CaseError::DuplicateBus(bus.id));
            }
            if !(bus.base_load_mw.is_finite() && bus.base_load_mw >= 0.0) {
                return Err(CaseError::Invalid(format!(
                    "bus {} has invalid load {}",
                    bus.id, bus.base_load_mw
                )));
            }
        }
        let slacks: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.bus_type == BusType::Slack)
            .map(|(i, _)| i)
            .collect();
        let slack = match slacks.as_slice() {
            [s] => *s,
            [] => return Err(CaseError::SlackCount(0)),
            many => return Err(CaseError::SlackCount(many.len())),
        };

        let lookup = |id: u32| index.get(&id).copied().ok_or(CaseError::UnknownBus(id));

        let mut gen_bus = Vec::with_capacity(generators.len());
        let mut gens_at = vec![Vec::new(); buses.len()];
        for (g, gen) in generators.iter().enumerate() {
            let n = lookup(gen.bus)?;
            let ok = gen.cost_per_mwh.is_finite()
                && gen.cost_per_mwh >= 0.0
                && gen.p_min_mw.is_finite()
                && gen.p_min_mw >= 0.0
                && gen.p_max_mw.is_finite()
                && gen.p_max_mw >= gen.p_min_mw;
            if !ok {
                return Err(CaseError::Invalid(format!(
                    "generator {} at bus {} has inconsistent cost or limits",
                    g + 1,
                    gen.bus
                )));
            }
            gen_bus.push(n);
            gens_at[n].push(g);
        }

        let mut endpoints = Vec::with_capacity(branches.len());
        let mut out_branches = vec![Vec::new(); buses.len()];
        let mut in_branches = vec![Vec::new(); buses.len()];
        for (k, br) in branches.iter().enumerate() {
            if br.from_bus == br.to_bus {
                return Err(CaseError::SelfLoop(br.from_bus));
            }
            let f = lookup(br.from_bus)?;
            let t = lookup(br.to_bus)?;
            if !(br.reactance_pu.is_finite() && br.reactance_pu > 0.0) {
                return Err(CaseError::NonPositive {
                    branch: k + 1,
                    field: "reactance",
                    value: br.reactance_pu,
                });
            }
            if !(br.rate_a_mw.is_finite() && br.rate_a_mw > 0.0) {
                return Err(CaseError::NonPositive {
                    branch: k + 1,
                    field: "rate_a",
                    value: br.rate_a_mw,
                });
            }
            endpoints.push((f, t));
            out_branches[f].push(k);
            in_branches[t].push(k);
        }

        if branches.is_empty() || !connected(buses.len(), &endpoints) {
            return Err(CaseError::Disconnected);
        }

        // Generator type is derived from generator placement; the slack flag is kept as written.
        let mut buses = buses;
        for (n, bus) in buses.iter_mut().enumerate() {
            if bus.bus_type != BusType::Slack {
                bus.bus_type = if gens_at[n].is_empty() {
                    BusType::Load
                } else {
                    BusType::Generator
                };
            }
        }

        Ok(Self {
            base_mva,
            buses,
            branches,
            generators,
            slack,
            endpoints,
            gen_bus,
            gens_at,
            out_branches,
            in_branches,
        })
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }
    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }
    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }
    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }
    /// Internal index of the slack bus.
    pub fn slack(&self) -> usize {
        self.slack
    }
    /// Internal (from, to) bus indices of branch `k`.
    pub fn endpoints(&self, k: usize) -> (usize, usize) {
        self.endpoints[k]
    }
    /// Internal bus index of generator `g`.
    pub fn generator_bus(&self, g: usize) -> usize {
        self.gen_bus[g]
    }
    /// G(n): generators connected at bus `n`.
    pub fn generators_at(&self, n: usize) -> &[usize] {
        &self.gens_at[n]
    }
    /// K(n+): branches whose from-bus is `n`.
    pub fn outgoing(&self, n: usize) -> &[usize] {
        &self.out_branches[n]
    }
    /// K(n-): branches whose to-bus is `n`.
    pub fn incoming(&self, n: usize) -> &[usize] {
        &self.in_branches[n]
    }
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }
    pub fn base_load(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.base_load_mw).collect()
    }
    pub fn total_capacity_mw(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max_mw).sum()
    }

    /// Short label like `1-3` for reports.
    pub fn branch_label(&self, k: usize) -> String {
        let br = &self.branches[k];
        format!("{}-{}", br.from_bus, br.to_bus)
    }

    /// Serializes back to the case-file format. Numbers use shortest round-trip notation.
    pub fn to_case_string(&self) -> String {
        let mut s = String::new();
        // type column records the slack flag; generator type is re-derived on parse
        let _ = writeln!(s, "#BASE\n{}", self.base_mva);
        s.push_str("#BUS\n");
        for b in &self.buses {
            let _ = writeln!(s, "{} {} {}", b.id, b.bus_type.code(), b.base_load_mw);
        }
        s.push_str("#GEN\n");
        for g in &self.generators {
            let _ = writeln!(s, "{} {} {} {}", g.bus, g.cost_per_mwh, g.p_min_mw, g.p_max_mw);
        }
        s.push_str("#BRANCH\n");
        for br in &self.branches {
            let _ = writeln!(s, "{} {} {} {}", br.from_bus, br.to_bus, br.reactance_pu, br.rate_a_mw);
        }
        s
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_case_string().as_bytes()))
    }

    /// Same network with buses reordered: new bus `i` is old bus `perm[i]`.
    /// Branch and generator order are unchanged.
    pub fn permute_buses(&self, perm: &[usize]) -> Network {
        assert_eq!(perm.len(), self.buses.len());
        let buses = perm.iter().map(|&old| self.buses[old].clone()).collect();
        Network::new(self.base_mva, buses, self.generators.clone(), self.branches.clone())
            .expect("permutation preserves validity")
    }
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Base,
    Bus,
    Gen,
    Branch,
}

impl Section {
    fn columns(self) -> usize {
        match self {
            Section::Base => 1,
            Section::Bus => 3,
            Section::Gen | Section::Branch => 4,
        }
    }
    fn name(self) -> &'static str {
        match self {
            Section::Base => "#BASE",
            Section::Bus => "#BUS",
            Section::Gen => "#GEN",
            Section::Branch => "#BRANCH",
        }
    }
}

/// Parses case-file text into a validated [`Network`].
pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut section: Option<Section> = None;
    let mut seen = BTreeSet::new();
    let mut base_mva: Option<f64> = None;
    let mut buses = Vec::new();
    let mut gens = Vec::new();
    let mut branches = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if trimmed.starts_with('#') {
            let header = trimmed.trim_end();
            let sec = match header {
                "#BASE" => Section::Base,
                "#BUS" => Section::Bus,
                "#GEN" => Section::Gen,
                "#BRANCH" => Section::Branch,
                other => {
                    return Err(CaseError::Syntax {
                        line: line_no,
                        column: line.len() - trimmed.len() + 1,
                        message: format!("unknown section header `{other}`"),
                    })
                }
            };
            if !seen.insert(sec.name()) {
                return Err(CaseError::Syntax {
                    line: line_no,
                    column: 1,
                    message: format!("section {} repeated", sec.name()),
                });
            }
            section = Some(sec);
            continue;
        }
        let Some(sec) = section else {
            return Err(CaseError::Syntax {
                line: line_no,
                column: line.len() - trimmed.len() + 1,
                message: "data before any section header".into(),
            });
        };

        let fields = split_fields(line);
        if fields.len() != sec.columns() {
            let column = fields.get(sec.columns()).map_or(line.len() + 1, |f| f.0);
            return Err(CaseError::Syntax {
                line: line_no,
                column,
                message: format!(
                    "{} rows have {} columns, found {}",
                    sec.name(),
                    sec.columns(),
                    fields.len()
                ),
            });
        }
        let num = |i: usize| -> Result<f64, CaseError> {
            let (col, tok) = fields[i];
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CaseError::Syntax {
                    line: line_no,
                    column: col,
                    message: format!("expected a number, found `{tok}`"),
                })
        };
        let id = |i: usize| -> Result<u32, CaseError> {
            let (col, tok) = fields[i];
            tok.parse::<u32>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| CaseError::Syntax {
                    line: line_no,
                    column: col,
                    message: format!("expected a positive integer bus id, found `{tok}`"),
                })
        };

        match sec {
            Section::Base => {
                if base_mva.is_some() {
                    return Err(CaseError::Syntax {
                        line: line_no,
                        column: fields[0].0,
                        message: "#BASE takes a single value".into(),
                    });
                }
                base_mva = Some(num(0)?);
            }
            Section::Bus => {
                let (col, tok) = fields[1];
                let bus_type = match tok {
                    "1" => BusType::Load,
                    "2" => BusType::Generator,
                    "3" => BusType::Slack,
                    _ => {
                        return Err(CaseError::Syntax {
                            line: line_no,
                            column: col,
                            message: format!("bus type must be 1, 2 or 3, found `{tok}`"),
                        })
                    }
                };
                buses.push(Bus {
                    id: id(0)?,
                    bus_type,
                    base_load_mw: num(2)?,
                });
            }
            Section::Gen => gens.push(Generator {
                bus: id(0)?,
                cost_per_mwh: num(1)?,
                p_min_mw: num(2)?,
                p_max_mw: num(3)?,
            }),
            Section::Branch => branches.push(Branch {
                from_bus: id(0)?,
                to_bus: id(1)?,
                reactance_pu: num(2)?,
                rate_a_mw: num(3)?,
            }),
        }
    }

    for sec in [Section::Base, Section::Bus, Section::Gen, Section::Branch] {
        if !seen.contains(sec.name()) {
            return Err(CaseError::MissingSection(sec.name()));
        }
    }
    let base_mva = base_mva.ok_or(CaseError::MissingSection("#BASE"))?;
    Network::new(base_mva, buses, gens, branches)
}

/// Whitespace-split tokens with their 1-based starting column.
fn split_fields(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// Bus connectivity view used by the graph models.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTopology {
    /// Row-major `nb x nb` 0/1 matrix.
    pub adjacency: Vec<Vec<u8>>,
    /// Incident-branch count per bus; parallel branches count separately.
    pub degree: Vec<usize>,
    /// `(from, to)` internal indices in branch order.
    pub edges: Vec<(usize, usize)>,
}

impl GraphTopology {
    pub fn num_nodes(&self) -> usize {
        self.degree.len()
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
}

pub fn to_graph(network: &Network) -> GraphTopology {
    let nb = network.num_buses();
    let mut adjacency = vec![vec![0u8; nb]; nb];
    let mut degree = vec![0usize; nb];
    let edges: Vec<(usize, usize)> = (0..network.num_branches()).map(|k| network.endpoints(k)).collect();
    for &(f, t) in &edges {
        adjacency[f][t] = 1;
        adjacency[t][f] = 1;
        degree[f] += 1;
        degree[t] += 1;
    }
    GraphTopology {
        adjacency,
        degree,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::TRI3;

    #[test]
    fn parses_tri3() {
        let net = parse_case(TRI3).unwrap();
        assert_eq!(net.num_buses(), 3);
        assert_eq!(net.num_branches(), 3);
        assert_eq!(net.num_generators(), 2);
        assert_eq!(net.slack(), 0);
        assert_eq!(net.buses()[1].bus_type, BusType::Generator);
        assert_eq!(net.buses()[2].bus_type, BusType::Load);
        assert_eq!(net.base_mva(), 100.0);
        assert_eq!(net.outgoing(0), &[0, 1]);
        assert_eq!(net.incoming(2), &[1, 2]);
    }

    #[test]
    fn round_trip_is_identical() {
        let net = parse_case(TRI3).unwrap();
        let again = parse_case(&net.to_case_string()).unwrap();
        assert_eq!(net, again);
        assert_eq!(net.fingerprint(), again.fingerprint());
    }

    #[test]
    fn crlf_and_comments_accepted() {
        let crlf = TRI3.replace('\n', "\r\n");
        assert_eq!(parse_case(&crlf).unwrap(), parse_case(TRI3).unwrap());
    }

    #[test]
    fn single_bus_rejected() {
        let text = "#BASE\n100\n#BUS\n1 3 10\n#GEN\n1 5 0 50\n#BRANCH\n";
        assert!(matches!(parse_case(text), Err(CaseError::Disconnected)));
    }

    #[test]
    fn self_loop_rejected() {
        let text = TRI3.replace("1 2 0.1 200", "1 1 0.1 200");
        assert!(matches!(parse_case(&text), Err(CaseError::SelfLoop(1))));
    }

    #[test]
    fn error_paths() {
        let dup = TRI3.replace("2 2 0", "1 2 0");
        assert!(matches!(parse_case(&dup), Err(CaseError::DuplicateBus(1))));

        let unknown = TRI3.replace("2 3 0.1 200", "2 9 0.1 200");
        assert!(matches!(parse_case(&unknown), Err(CaseError::UnknownBus(9))));

        let no_slack = TRI3.replace("1 3 0", "1 2 0");
        assert!(matches!(parse_case(&no_slack), Err(CaseError::SlackCount(0))));

        let two_slack = TRI3.replace("2 2 0", "2 3 0");
        assert!(matches!(parse_case(&two_slack), Err(CaseError::SlackCount(2))));

        let bad_x = TRI3.replace("1 3 0.1 80", "1 3 0 80");
        assert!(matches!(
            parse_case(&bad_x),
            Err(CaseError::NonPositive { field: "reactance", .. })
        ));

        let bad_rate = TRI3.replace("1 3 0.1 80", "1 3 0.1 -5");
        assert!(matches!(
            parse_case(&bad_rate),
            Err(CaseError::NonPositive { field: "rate_a", .. })
        ));

        let disconnected = TRI3.replace("3 1 150", "3 1 150\n4 1 0");
        assert!(matches!(parse_case(&disconnected), Err(CaseError::Disconnected)));
    }

    #[test]
    fn syntax_errors_report_position() {
        let text = TRI3.replace("1 3 0.1 80", "1 3 abc 80");
        match parse_case(&text) {
            Err(CaseError::Syntax { line, column, .. }) => {
                let expected_line = TRI3.lines().position(|l| l == "1 3 0.1 80").unwrap() + 1;
                assert_eq!(line, expected_line);
                assert_eq!(column, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_case("#FOO\n"), Err(CaseError::Syntax { line: 1, .. })));
        assert!(matches!(parse_case("1 2 3\n"), Err(CaseError::Syntax { line: 1, .. })));
        let extra = TRI3.replace("1 3 0.1 80", "1 3 0.1 80 7");
        assert!(matches!(parse_case(&extra), Err(CaseError::Syntax { column: 12, .. })));
        let missing = "#BASE\n100\n#BUS\n1 3 0\n2 1 5\n#BRANCH\n1 2 0.1 10\n";
        assert!(matches!(parse_case(missing), Err(CaseError::MissingSection("#GEN"))));
    }

    #[test]
    fn tri3_graph() {
        let g = to_graph(&parse_case(TRI3).unwrap());
        assert_eq!(g.adjacency, vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
        assert_eq!(g.degree, vec![2, 2, 2]);
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn path_graph_degrees() {
        let text = "#BASE\n100\n#BUS\n1 3 0\n2 1 10\n3 1 10\n#GEN\n1 1 0 100\n#BRANCH\n1 2 0.1 50\n2 3 0.1 50\n";
        let g = to_graph(&parse_case(text).unwrap());
        assert_eq!(g.degree, vec![1, 2, 1]);
    }

    #[test]
    fn parallel_branch_counts_in_degree_only() {
        let text = TRI3.replace("1 2 0.1 200", "1 2 0.1 200\n1 2 0.1 200");
        let net = parse_case(&text).unwrap();
        let g = to_graph(&net);
        assert_eq!(g.degree, vec![3, 3, 2]);
        assert_eq!(g.adjacency[0][1], 1);
        assert_eq!(g.adjacency[1][0], 1);
        assert_eq!(g.degree.iter().sum::<usize>(), 2 * net.num_branches());
    }
}
