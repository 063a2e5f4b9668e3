//! Plain-text topology listing, used both for inspection and as the input
//! format for user-defined networks.
//!
//! ```text
//! # comment
//! lane <id> length=<cells> from=entry|<node> to=exit|<node> [exits=<lane>:<w>,...]
//! intersection <id> phases=<lane>+<lane>;<lane>
//! neighbor <node> <upstream node> <travel time>
//! compat <node> <upstream node> <upstream phase> <phase>
//! entry <lane> <cell>
//! ```
//!
//! Ids must be dense and listed in order. `neighbor` and `compat` lines are
//! optional; when a file has none they are derived from the lanes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::{Compatibility, Downstream, EntryPoint, LaneDescriptor, NetworkTopology, Upstream};

pub fn export<S: Scalar>(topology: &NetworkTopology<S>) -> String {
    let mut out = String::new();
    for (id, lane) in topology.lanes().iter().enumerate() {
        let from = match lane.upstream {
            Upstream::Entry => "entry".to_string(),
            Upstream::Intersection(i) => i.to_string(),
        };
        let to = match lane.downstream {
            Downstream::Exit => "exit".to_string(),
            Downstream::Intersection(i) => i.to_string(),
        };
        let _ = write!(out, "lane {id} length={} from={from} to={to}", lane.length);
        if !lane.exits.is_empty() {
            let exits: Vec<String> = lane.exits.iter().map(|(l, w)| format!("{l}:{w}")).collect();
            let _ = write!(out, " exits={}", exits.join(","));
        }
        out.push('\n');
    }
    for (id, node) in topology.intersections().iter().enumerate() {
        let phases: Vec<String> = node
            .phases
            .iter()
            .map(|p| p.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("+"))
            .collect();
        let _ = writeln!(out, "intersection {id} phases={}", phases.join(";"));
    }
    for (id, node) in topology.intersections().iter().enumerate() {
        for (n, time) in &node.neighbors {
            let _ = writeln!(out, "neighbor {id} {n} {time}");
        }
        for c in &node.compatibility {
            let _ = writeln!(out, "compat {id} {} {} {}", c.neighbor, c.neighbor_phase, c.phase);
        }
    }
    for e in topology.entry_points() {
        let _ = writeln!(out, "entry {} {}", e.lane, e.cell);
    }
    out
}

struct LineError(String);

fn num<T: std::str::FromStr>(text: &str, what: &str) -> Result<T, LineError> {
    text.parse()
        .map_err(|_| LineError(format!("invalid {what} `{text}`")))
}

fn field<'a>(token: &'a str, key: &str) -> Result<&'a str, LineError> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| LineError(format!("expected `{key}=...`, found `{token}`")))
}

fn expect_dense(id: usize, next: usize, what: &str) -> Result<(), LineError> {
    if id == next {
        Ok(())
    } else {
        Err(LineError(format!("{what} {id} listed out of order, expected {next}")))
    }
}

/// Parses a listing. `v_max` sets derived travel times when the file has no
/// explicit `neighbor` lines.
pub fn parse<S: Scalar>(text: &str, path: &Path, v_max: u8) -> Result<NetworkTopology<S>> {
    let mut lanes = Vec::new();
    let mut phases = Vec::new();
    let mut entries = Vec::new();
    let mut neighbors = Vec::new();
    let mut compat = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parsed: Result<(), LineError> = (|| {
            match tokens.as_slice() {
                ["lane", id, rest @ ..] if rest.len() == 3 || rest.len() == 4 => {
                    expect_dense(num(id, "lane id")?, lanes.len(), "lane")?;
                    let length: usize = num(field(rest[0], "length")?, "length")?;
                    let upstream = match field(rest[1], "from")? {
                        "entry" => Upstream::Entry,
                        n => Upstream::Intersection(num(n, "intersection id")?),
                    };
                    let downstream = match field(rest[2], "to")? {
                        "exit" => Downstream::Exit,
                        n => Downstream::Intersection(num(n, "intersection id")?),
                    };
                    let mut lane = LaneDescriptor::new(length, upstream, downstream);
                    if let Some(token) = rest.get(3) {
                        for pair in field(token, "exits")?.split(',') {
                            let (l, w) = pair
                                .split_once(':')
                                .ok_or_else(|| LineError(format!("expected `lane:weight`, found `{pair}`")))?;
                            lane.exits.push((num(l, "lane id")?, num(w, "turn probability")?));
                        }
                    }
                    lanes.push(lane);
                }
                ["intersection", id, spec] => {
                    expect_dense(num(id, "intersection id")?, phases.len(), "intersection")?;
                    let mut node_phases = Vec::new();
                    for phase in field(spec, "phases")?.split(';') {
                        let members = phase
                            .split('+')
                            .map(|l| num(l, "lane id"))
                            .collect::<Result<Vec<usize>, _>>()?;
                        node_phases.push(members);
                    }
                    phases.push(node_phases);
                }
                ["neighbor", node, up, time] => {
                    neighbors.push((num::<usize>(node, "intersection id")?, num(up, "intersection id")?, num(time, "travel time")?));
                }
                ["compat", node, up, up_phase, phase] => {
                    compat.push((
                        num::<usize>(node, "intersection id")?,
                        Compatibility {
                            neighbor: num(up, "intersection id")?,
                            neighbor_phase: num(up_phase, "phase index")?,
                            phase: num(phase, "phase index")?,
                        },
                    ));
                }
                ["entry", lane, cell] => entries.push(EntryPoint {
                    lane: num(lane, "lane id")?,
                    cell: num(cell, "cell")?,
                }),
                _ => return Err(LineError(format!("unrecognized line `{line}`"))),
            }
            Ok(())
        })();
        parsed.map_err(|LineError(message)| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        })?;
    }

    let node_count = phases.len();
    let derived = NetworkTopology::derive(lanes, phases, entries, v_max);
    if neighbors.is_empty() && compat.is_empty() {
        return Ok(derived);
    }
    let mut nodes = derived.intersections().to_vec();
    for node in &mut nodes {
        node.neighbors.clear();
        node.compatibility.clear();
    }
    let unknown = |i: usize| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: format!("intersection {i} referenced but never declared (of {node_count})"),
    };
    for (node, up, time) in neighbors {
        nodes.get_mut(node).ok_or_else(|| unknown(node))?.neighbors.push((up, time));
    }
    for (node, c) in compat {
        nodes.get_mut(node).ok_or_else(|| unknown(node))?.compatibility.push(c);
    }
    Ok(NetworkTopology::new(
        derived.lanes().to_vec(),
        nodes,
        derived.entry_points().to_vec(),
    ))
}

pub fn load<S: Scalar>(path: &Path, v_max: u8) -> Result<NetworkTopology<S>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read topology {}: {e}", path.display())))?;
    parse(&text, path, v_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_arterial, build_grid};
    use crate::topology::validate_topology;

    #[test]
    fn export_round_trips() {
        for t in [build_grid::<f64>(3, 12, 2).unwrap(), build_arterial::<f64>(4, 40, 2).unwrap()] {
            let text = export(&t);
            let back: NetworkTopology<f64> = parse(&text, Path::new("t.txt"), 2).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn hand_written_listing_derives_neighbors() {
        let text = "\
# two approaches into one node
lane 0 length=10 from=entry to=0 exits=2:0.75,3:0.25
lane 1 length=10 from=entry to=0 exits=3:1
lane 2 length=10 from=0 to=exit
lane 3 length=10 from=0 to=exit
intersection 0 phases=0;1
entry 0 0
entry 1 0
";
        let t: NetworkTopology<f64> = parse(text, Path::new("x"), 2).unwrap();
        assert!(validate_topology(&t).is_empty());
        assert_eq!(t.lane(0).exits, vec![(2, 0.75), (3, 0.25)]);
        assert_eq!(t.entry_points().len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse::<f64>("lane 0 length=10 from=entry to=exit\nlane 2 length=3 from=entry to=exit\n", Path::new("f.txt"), 2)
            .unwrap_err();
        assert!(err.to_string().starts_with("f.txt:2:"), "{err}");
        let err = parse::<f64>("bogus\n", Path::new("f.txt"), 2).unwrap_err();
        assert!(err.to_string().contains("f.txt:1: unrecognized line"), "{err}");
    }
}
