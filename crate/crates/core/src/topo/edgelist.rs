//! Plain-text edge lists.
//!
//! One link per line: `u v [loss_rate] [delay_ns]`. Blank lines and lines
//! starting with `#` are ignored, except for an optional `# nodes: N`
//! directive which fixes the node count (so isolated trailing switches
//! survive a round trip).

use std::fmt::Write as _;

use super::{LinkParams, NodeId, Topology};
use crate::error::{Error, Result};

pub fn load_edge_list(text: &str) -> Result<Topology> {
    let mut declared: Option<usize> = None;
    let mut rows: Vec<(usize, u32, u32, LinkParams)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("nodes:") {
                let n = n.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad node count: {e}"),
                })?;
                declared = Some(n);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `u v [loss_rate] [delay_ns]`, got {} fields", fields.len()),
            });
        }
        let id = |s: &str| {
            s.parse::<u32>()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("bad node id `{s}`: {e}") })
        };
        let u = id(fields[0])?;
        let v = id(fields[1])?;
        if u == v {
            return Err(Error::Parse { line: line_no, msg: format!("self-loop on node {u}") });
        }
        let mut params = LinkParams::default();
        if let Some(s) = fields.get(2) {
            params.loss_rate = s
                .parse()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("bad loss rate `{s}`: {e}") })?;
        }
        if let Some(s) = fields.get(3) {
            let d: u64 = s
                .parse()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("bad delay `{s}`: {e}") })?;
            if d == 0 {
                return Err(Error::Parse { line: line_no, msg: "delay must be positive".into() });
            }
            params.base_prop_delay = d;
            params.prop_jitter = params.prop_jitter.min(d - 1);
        }
        params
            .validate()
            .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
        rows.push((line_no, u, v, params));
    }

    let max_id = rows.iter().map(|&(_, u, v, _)| u.max(v) as usize + 1).max().unwrap_or(0);
    let n = match declared {
        Some(d) if d < max_id => {
            return Err(Error::Parse { line: 0, msg: format!("declared {d} nodes but ids reach {}", max_id - 1) })
        }
        Some(d) => d,
        None => max_id,
    };
    let mut t = Topology::with_nodes(n);
    for (line, u, v, params) in rows {
        if t.link_between(NodeId(u), NodeId(v)).is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate link {u}-{v}") });
        }
        t.add_link(NodeId(u), NodeId(v), params)
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
    }
    Ok(t)
}

/// Inverse of [`load_edge_list`] on graph structure and link loss/delay.
pub fn serialize_edge_list(t: &Topology) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nodes: {}", t.node_count());
    let default = LinkParams::default();
    for l in t.links() {
        let p = &l.params;
        if p.loss_rate != default.loss_rate || p.base_prop_delay != default.base_prop_delay {
            let _ = writeln!(out, "{} {} {} {}", l.a, l.b, p.loss_rate, p.base_prop_delay);
        } else {
            let _ = writeln!(out, "{} {}", l.a, l.b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_of_three() {
        let t = load_edge_list("0 1\n1 2").unwrap();
        assert_eq!((t.node_count(), t.edge_count()), (3, 2));
    }

    #[test]
    fn symmetric_duplicate_names_line_two() {
        match load_edge_list("0 1\n1 0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_and_garbage() {
        assert!(matches!(load_edge_list("# c\n3 3"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_edge_list("0 x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_edge_list("0 1 0.5 0"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn optional_fields() {
        let t = load_edge_list("0 1 0.01 250\n").unwrap();
        let p = t.links()[0].params;
        assert_eq!(p.loss_rate, 0.01);
        assert_eq!(p.base_prop_delay, 250);
    }

    proptest! {
        #[test]
        fn roundtrip(n in 2usize..30, raw in proptest::collection::vec((0u32..30, 0u32..30), 0..80)) {
            let mut t = Topology::with_nodes(n);
            for (u, v) in raw {
                let (u, v) = (u % n as u32, v % n as u32);
                if u != v && t.link_between(NodeId(u), NodeId(v)).is_none() {
                    t.add_link(NodeId(u), NodeId(v), LinkParams::default()).unwrap();
                }
            }
            let back = load_edge_list(&serialize_edge_list(&t)).unwrap();
            prop_assert_eq!(back.node_count(), t.node_count());
            let a: Vec<_> = t.links().iter().map(|l| (l.a, l.b)).collect();
            let b: Vec<_> = back.links().iter().map(|l| (l.a, l.b)).collect();
            prop_assert_eq!(a, b);
        }
    }
}
