//! Graph files, deterministic JSON and DOT diagrams.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Number, Value};

use crate::dynamics::HydraSet;
use crate::error::{Error, Result};
use crate::graph::{Edge, MetricGraph, Vertex};
use crate::rational::Rational;
use crate::spectrum::{Clusters, Spectrum};

fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    // 1-based character columns
    out.into_iter().map(|(b, t)| (line[..b].chars().count() + 1, t)).collect()
}

/// Parses `vertex <id> [boundary]` and `edge <id> <v1> <v2> <length>`
/// records; `#` starts a comment.
pub fn parse_graph(text: &str) -> Result<MetricGraph> {
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut vindex: BTreeMap<String, usize> = BTreeMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut eindex: BTreeMap<String, usize> = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks = tokens(body);
        let syntax = |column: usize, message: String| Error::Syntax { line, column, message };
        let semantic = |column: usize, message: String| Error::Semantic { line, column, message };
        let Some(&(c0, kw)) = toks.first() else { continue };
        match kw {
            "vertex" => {
                let boundary = match toks.as_slice() {
                    [_, _] => false,
                    [_, _, (_, "boundary")] => true,
                    [_, _, (c, other)] => return Err(syntax(*c, format!("expected 'boundary', found '{other}'"))),
                    [_] => return Err(syntax(c0 + kw.len(), "missing vertex id".into())),
                    [_, _, _, (c, _), ..] => return Err(syntax(*c, "trailing tokens".into())),
                    [] => unreachable!(),
                };
                let (c, name) = toks[1];
                if vindex.contains_key(name) {
                    return Err(semantic(c, format!("duplicate vertex id '{name}'")));
                }
                vindex.insert(name.to_string(), vertices.len());
                vertices.push(Vertex { name: name.to_string(), boundary });
            }
            "edge" => {
                if toks.len() < 5 {
                    return Err(syntax(c0 + kw.len(), "expected: edge <id> <v1> <v2> <length>".into()));
                }
                if let Some(&(c, _)) = toks.get(5) {
                    return Err(syntax(c, "trailing tokens".into()));
                }
                let (cn, name) = toks[1];
                if eindex.contains_key(name) {
                    return Err(semantic(cn, format!("duplicate edge id '{name}'")));
                }
                let mut ends = [0; 2];
                for (k, &(c, v)) in toks[2..4].iter().enumerate() {
                    ends[k] = *vindex.get(v).ok_or_else(|| semantic(c, format!("unknown vertex '{v}'")))?;
                }
                let (cl, lit) = toks[4];
                let length = Rational::from_str(lit).map_err(|_| syntax(cl, format!("invalid rational '{lit}'")))?;
                if !length.is_positive() {
                    return Err(semantic(cl, format!("nonpositive length {length}")));
                }
                eindex.insert(name.to_string(), edges.len());
                edges.push(Edge { name: name.to_string(), from: ends[0], to: ends[1], length });
            }
            other => return Err(syntax(c0, format!("unknown record '{other}'"))),
        }
    }
    MetricGraph::from_parts(vertices, edges)
}

pub fn read_graph(path: &std::path::Path) -> Result<MetricGraph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

pub fn emit_graph(g: &MetricGraph) -> String {
    let mut out = String::new();
    for v in g.vertices() {
        let _ = writeln!(out, "vertex {}{}", v.name, if v.boundary { " boundary" } else { "" });
    }
    for e in g.edges() {
        let _ = writeln!(out, "edge {} {} {} {}", e.name, g.vertex(e.from).name, g.vertex(e.to).name, e.length);
    }
    out
}

fn fix_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("float number");
            *n = Number::from_str(&format!("{x:.16e}")).expect("formatted float parses");
        }
        Value::Array(a) => a.iter_mut().for_each(fix_floats),
        Value::Object(o) => o.values_mut().for_each(fix_floats),
        _ => {}
    }
}

pub fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    serde_json::to_value(value).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Pretty JSON with sorted keys and floats at 17 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fix_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn graph_json(g: &MetricGraph) -> Value {
    json!({
        "vertices": g.vertices().iter().map(|v| json!({"id": v.name, "boundary": v.boundary})).collect::<Vec<_>>(),
        "edges": g.edges().iter().map(|e| json!({
            "id": e.name, "from": g.vertex(e.from).name, "to": g.vertex(e.to).name, "length": e.length,
        })).collect::<Vec<_>>(),
    })
}

pub fn hydra_json(g: &MetricGraph, set: &HydraSet) -> Value {
    let hydras: Vec<Value> = set
        .hydras
        .iter()
        .map(|h| {
            json!({
                "gamma": g.vertex(h.gamma).name,
                "segments": h.segments.iter().map(|s| json!({
                    "edge": g.edge(s.edge).name, "t0": s.t0, "t1": s.t1,
                    "start": s.start, "end": s.end_offset(), "dir": s.dir, "amplitude": s.amplitude,
                })).collect::<Vec<_>>(),
                "events": h.events.iter().map(|e| json!({
                    "vertex": g.vertex(e.vertex).name, "time": e.time,
                    "incoming": e.incoming, "outgoing": e.outgoing,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "horizon": set.horizon(), "hydras": hydras })
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Space-time diagram: nodes are (place, time) pairs, edges are segments.
pub fn hydra_dot(g: &MetricGraph, set: &HydraSet) -> String {
    let mut nodes: BTreeMap<String, usize> = BTreeMap::new();
    let mut lines = Vec::new();
    for h in &set.hydras {
        for s in &h.segments {
            let label = |off: &Rational, t: &Rational| {
                let place = g.position(s.edge, off.clone()).map(|p| g.describe(&p)).unwrap_or_else(|_| format!("{}@{off}", g.edge(s.edge).name));
                format!("{place} t={t}")
            };
            let a = label(&s.start, &s.t0);
            let b = label(&s.end_offset(), &s.t1);
            let n = nodes.len();
            let ia = *nodes.entry(a).or_insert(n);
            let n = nodes.len();
            let ib = *nodes.entry(b).or_insert(n);
            lines.push(format!("  n{ia} -> n{ib} [label={}];", quote(&format!("{} a={}", g.edge(s.edge).name, s.amplitude))));
        }
    }
    let mut out = String::from("digraph hydra {\n  rankdir=LR;\n");
    let mut byid: Vec<_> = nodes.into_iter().collect();
    byid.sort_by_key(|(_, i)| *i);
    for (label, i) in byid {
        let _ = writeln!(out, "  n{i} [label={}];", quote(&label));
    }
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

/// Segments as edges; an end with several summands fans out into one node
/// per summand.
pub fn spectrum_dot(sp: &Spectrum) -> String {
    let mut out = String::from("graph spectrum {\n");
    for b in &sp.blocks {
        let _ = writeln!(out, "  b{0}s [shape=point];\n  b{0}e [shape=point];", b.id);
        let _ = writeln!(out, "  b{0}s -- b{0}e [label={1}];", b.id, quote(&format!("l={} zeta={} kappa={}", b.id, b.zeta, b.kappa)));
        for (tag, c) in [("s", &b.start), ("e", &b.end)] {
            if let Clusters::Known(dims) = c {
                if dims.len() >= 2 {
                    for (k, d) in dims.iter().enumerate() {
                        let _ = writeln!(out, "  b{0}{1}f{2} [label={3}];\n  b{0}{1} -- b{0}{1}f{2} [style=dashed];", b.id, tag, k, quote(&format!("M^{d}")));
                    }
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use proptest::prelude::*;

    const STAR: &str = "# unit star\nvertex c\nvertex g1 boundary\nvertex g2 boundary\nvertex g3 boundary\n\
                        edge e1 g1 c 1\nedge e2 g2 c 1\nedge e3 g3 c 1\n";

    #[test]
    fn parses_the_star() {
        let g = parse_graph(STAR).unwrap();
        assert_eq!(g, examples::unit_star());
        assert_eq!(g.boundary().len(), 3);
    }

    #[test]
    fn two_boundary_vertices_and_one_edge() {
        let g = parse_graph("vertex a boundary\nvertex b boundary\nedge e a b 1\n").unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn diagnostics_carry_positions() {
        let err = parse_graph("vertex a boundary\nvertex b boundary\nedge e a b 0\n").unwrap_err();
        assert!(matches!(&err, Error::Semantic { line: 3, column: 12, message } if message.contains("nonpositive length")), "{err}");
        let err = parse_graph("vertex a boundary\nedge e a zz 1\n").unwrap_err();
        assert!(matches!(&err, Error::Semantic { line: 2, column: 10, .. }), "{err}");
        let err = parse_graph("vertex a boundary\nvertex b boundary\nedge e a b 1/x\n").unwrap_err();
        assert!(matches!(&err, Error::Syntax { line: 3, column: 12, .. }), "{err}");
        let err = parse_graph("vertex a boundary\nvertex b boundary\nedge e a b 1\nedge e a b 1\n").unwrap_err();
        assert_eq!(err.code(), "semantic");
        assert!(parse_graph("  node a\n").is_err());
        assert!(matches!(parse_graph("vertex a\nvertex b boundary\nedge e a b 1\n"), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn json_is_sorted_and_fixed_format() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: Rational,
        }
        let s = to_json(&S { zeta: 0.1, alpha: Rational::frac(3, 6) }).unwrap();
        assert_eq!(s, "{\n  \"alpha\": \"1/2\",\n  \"zeta\": 1.0000000000000001e-1\n}\n");
    }

    #[test]
    fn interval_hydra_is_one_path() {
        let g = examples::unit_interval();
        let set = HydraSet::build(&g, &[0], &Rational::frac(1, 2)).unwrap();
        let dot = hydra_dot(&g, &set);
        assert_eq!(dot.matches(" -> ").count(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn graph_files_round_trip(seed in 0u64..10_000) {
            let g = crate::instances::random_graph(seed);
            prop_assert_eq!(parse_graph(&emit_graph(&g)).unwrap(), g);
        }
    }
}
