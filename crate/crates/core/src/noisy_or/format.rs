//! Versioned text format for networks.
//!
//! ```text
//! NORBN 1
//! nodes <n_hidden> <n_visible>
//! edges <E>
//! <child> <parent> <slot>      (E lines; parent 0 is the leak)
//! slots <S>
//! <value> <frozen 0|1>         (S lines)
//! ```
//!
//! Values are written with 17 significant digits so that a round trip is
//! bit-exact.

use std::io::{BufRead, Write};

use super::network::{NetworkBuilder, NodeId, NoisyOrNetwork};
use crate::error::{Error, Result};

pub const MAGIC: &str = "NORBN 1";

pub fn write_network<W: Write>(net: &NoisyOrNetwork, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "nodes {} {}", net.n_hidden(), net.n_visible())?;
    writeln!(w, "edges {}", net.n_edges())?;
    for i in 1..net.n_nodes() {
        for e in net.edges(NodeId(i as u32)) {
            writeln!(w, "{i} {} {}", e.parent, e.slot)?;
        }
    }
    let params = net.params();
    writeln!(w, "slots {}", params.len())?;
    for (v, &f) in params.values().iter().zip(params.frozen()) {
        writeln!(w, "{v:.16e} {}", f as u8)?;
    }
    w.flush()?;
    Ok(())
}

pub fn network_to_string(net: &NoisyOrNetwork) -> String {
    let mut buf = Vec::new();
    write_network(net, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                None => return Err(Error::parse(self.line, "unexpected end of file")),
                Some(l) => {
                    let l = l?;
                    let t = l.trim();
                    if !t.is_empty() {
                        return Ok(t.to_string());
                    }
                }
            }
        }
    }

    fn keyed(&mut self, key: &str, n: usize) -> Result<Vec<usize>> {
        let l = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::parse(self.line, format!("expected `{key}`")));
        }
        let vals = self.numbers(it)?;
        if vals.len() != n {
            return Err(Error::parse(self.line, format!("`{key}` takes {n} values")));
        }
        Ok(vals)
    }

    fn numbers<'a>(&self, it: impl Iterator<Item = &'a str>) -> Result<Vec<usize>> {
        it.map(|t| {
            t.parse()
                .map_err(|_| Error::parse(self.line, format!("bad integer `{t}`")))
        })
        .collect()
    }
}

pub fn read_network<R: BufRead>(r: R) -> Result<NoisyOrNetwork> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    if lines.next()? != MAGIC {
        return Err(Error::parse(lines.line, format!("expected `{MAGIC}` header")));
    }
    let dims = lines.keyed("nodes", 2)?;
    let mut b = NetworkBuilder::new(dims[0], dims[1]);
    let n_nodes = b.n_nodes();
    let n_edges = lines.keyed("edges", 1)?[0];
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let l = lines.next()?;
        let v = lines.numbers(l.split_whitespace())?;
        if v.len() != 3 {
            return Err(Error::parse(lines.line, "edge line needs `child parent slot`"));
        }
        if v[0] == 0 || v[0] >= n_nodes || v[1] >= n_nodes {
            return Err(Error::parse(lines.line, "node index out of range"));
        }
        edges.push((v[0], v[1], v[2], lines.line));
    }
    let n_slots = lines.keyed("slots", 1)?[0];
    for _ in 0..n_slots {
        let l = lines.next()?;
        let mut it = l.split_whitespace();
        let (Some(v), Some(f), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(lines.line, "slot line needs `value frozen`"));
        };
        let value: f64 = v
            .parse()
            .map_err(|_| Error::parse(lines.line, format!("bad number `{v}`")))?;
        let s = b.new_slot(value);
        match f {
            "0" => {}
            "1" => {
                b.freeze(s);
            }
            _ => return Err(Error::parse(lines.line, "frozen flag must be 0 or 1")),
        }
    }
    for (child, parent, slot, line) in edges {
        if slot >= n_slots {
            return Err(Error::parse(line, format!("slot {slot} out of range")));
        }
        if parent == 0 {
            b.set_leak(NodeId(child as u32), slot);
        } else {
            b.add_edge(NodeId(parent as u32), NodeId(child as u32), slot);
        }
    }
    b.build()
}

pub fn network_from_str(s: &str) -> Result<NoisyOrNetwork> {
    read_network(s.as_bytes())
}
