//! Small reference graphs used by tests, the CLI and benches.

use crate::graph::{MetricGraph, Vertex};
use crate::rational::Rational;

/// Single edge `e1` from boundary vertex `g1` to boundary vertex `g2`.
pub fn interval(length: Rational) -> MetricGraph {
    MetricGraph::new(
        vec![
            Vertex { name: "g1".into(), boundary: true },
            Vertex { name: "g2".into(), boundary: true },
        ],
        vec![("e1".into(), "g1".into(), "g2".into(), length)],
    )
    .expect("interval is valid")
}

/// Star with centre `c` and leaves `g1..gk`; edge `ek` runs from `gk` to `c`.
pub fn star(lengths: &[Rational]) -> MetricGraph {
    let mut vertices = vec![Vertex { name: "c".into(), boundary: false }];
    let mut edges = Vec::new();
    for (k, len) in lengths.iter().enumerate() {
        let leaf = format!("g{}", k + 1);
        vertices.push(Vertex { name: leaf.clone(), boundary: true });
        edges.push((format!("e{}", k + 1), leaf, "c".into(), len.clone()));
    }
    MetricGraph::new(vertices, edges).expect("star is valid")
}

pub fn unit_interval() -> MetricGraph {
    interval(Rational::one())
}

pub fn unit_star() -> MetricGraph {
    star(&[Rational::one(), Rational::one(), Rational::one()])
}
