//! Line-oriented text formats for coverage instances and topologies.
//!
//! Instance file: blank lines and lines starting with `#` are ignored, the
//! first remaining line is `I K universe_size`, and the next `K` lines list
//! the user ids liking strategy `0, 1, …, K−1` separated by whitespace. A
//! strategy liked by nobody is written as a line holding a single `-`.
//!
//! Topology file: same comment rules, a header holding the node count, then
//! one `u v` edge per line.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::objective::CoverageObjective;

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        })
}

fn parse_field<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} `{tok}`"),
    })
}

pub fn read_instance<R: BufRead>(reader: R) -> Result<CoverageObjective> {
    let mut lines = content_lines(reader);
    let (hline, header) = lines.next().transpose()?.ok_or(Error::Parse {
        line: 0,
        message: "missing header".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [agents, k, universe] = fields.as_slice() else {
        return Err(Error::Parse {
            line: hline,
            message: format!("header needs `I K universe_size`, got `{}`", header.trim()),
        });
    };
    let agents: usize = parse_field(hline, agents, "agent count")?;
    let k: usize = parse_field(hline, k, "strategy count")?;
    let universe: usize = parse_field(hline, universe, "universe size")?;

    let mut sets = Vec::with_capacity(k);
    for s in 0..k {
        let (line, text) = lines.next().transpose()?.ok_or(Error::Parse {
            line: 0,
            message: format!("expected {k} strategy lines, found {s}"),
        })?;
        let text = text.trim();
        let ids = if text == "-" {
            Vec::new()
        } else {
            text.split_whitespace()
                .map(|t| parse_field::<u32>(line, t, "user id"))
                .collect::<Result<Vec<_>>>()?
        };
        if let Some(&bad) = ids.iter().find(|&&u| u as usize >= universe) {
            return Err(Error::Parse {
                line,
                message: format!("user id {bad} outside universe of {universe}"),
            });
        }
        sets.push(ids);
    }
    if let Some(extra) = lines.next().transpose()? {
        return Err(Error::Parse {
            line: extra.0,
            message: format!("unexpected content after {k} strategy lines"),
        });
    }
    CoverageObjective::new(agents, universe, sets)
}

pub fn write_instance<W: Write>(objective: &CoverageObjective, mut out: W) -> Result<()> {
    use crate::objective::Objective;
    let k = objective.strategies();
    writeln!(
        out,
        "{} {} {}",
        objective.agents(),
        k,
        objective.universe_size()
    )?;
    for s in 0..k {
        let ids = objective.liker_ids(s);
        if ids.is_empty() {
            writeln!(out, "-")?;
        } else {
            let text: Vec<String> = ids.iter().map(u32::to_string).collect();
            writeln!(out, "{}", text.join(" "))?;
        }
    }
    Ok(())
}

/// Node count and undirected edge list.
pub fn read_topology<R: BufRead>(reader: R) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut lines = content_lines(reader);
    let (hline, header) = lines.next().transpose()?.ok_or(Error::Parse {
        line: 0,
        message: "missing node count".into(),
    })?;
    let nodes: usize = parse_field(hline, header.trim(), "node count")?;
    let mut edges = Vec::new();
    for entry in lines {
        let (line, text) = entry?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        let [u, v] = fields.as_slice() else {
            return Err(Error::Parse {
                line,
                message: format!("edge needs two endpoints, got `{}`", text.trim()),
            });
        };
        let u: usize = parse_field(line, u, "node")?;
        let v: usize = parse_field(line, v, "node")?;
        if u >= nodes || v >= nodes {
            return Err(Error::Parse {
                line,
                message: format!("edge ({u}, {v}) outside {nodes} nodes"),
            });
        }
        edges.push((u, v));
    }
    Ok((nodes, edges))
}

pub fn write_topology<W: Write>(nodes: usize, edges: &[(usize, usize)], mut out: W) -> Result<()> {
    writeln!(out, "{nodes}")?;
    for (u, v) in edges {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Objective;

    #[test]
    fn instance_round_trip() {
        let f = CoverageObjective::new(3, 6, vec![vec![0, 1], vec![], vec![5, 2, 2]]).unwrap();
        let mut buf = Vec::new();
        write_instance(&f, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "3 3 6\n0 1\n-\n2 5\n"
        );
        let g = read_instance(buf.as_slice()).unwrap();
        assert_eq!(g.agents(), 3);
        assert_eq!(g.strategies(), 3);
        for s in 0..3 {
            assert_eq!(f.liker_ids(s), g.liker_ids(s));
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# movies\n\n2 2 4\n# first\n0 1\n3\n";
        let g = read_instance(text.as_bytes()).unwrap();
        assert_eq!(g.liker_ids(1), vec![3]);
    }

    #[test]
    fn instance_errors_carry_line_numbers() {
        assert!(matches!(
            read_instance("2 2\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_instance("2 2 4\n0 x\n1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_instance("2 2 4\n0 9\n1\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(read_instance("2 2 4\n0\n".as_bytes()).is_err());
        assert!(matches!(
            read_instance("1 1 4\n0\n1\n".as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(read_instance("".as_bytes()).is_err());
    }

    #[test]
    fn topology_round_trip() {
        let mut buf = Vec::new();
        write_topology(3, &[(0, 1), (1, 2)], &mut buf).unwrap();
        assert_eq!(
            read_topology(buf.as_slice()).unwrap(),
            (3, vec![(0, 1), (1, 2)])
        );
        assert!(read_topology("2\n0 2\n".as_bytes()).is_err());
        assert!(read_topology("2\n0\n".as_bytes()).is_err());
    }
}
