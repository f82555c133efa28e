//! Compact metric graphs with rational edge lengths.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::Rational;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub name: String,
    pub boundary: bool,
}

/// Edge parametrized by offset in `[0, length]`, offset 0 at `from`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub name: String,
    pub from: VertexId,
    pub to: VertexId,
    pub length: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum End {
    Start,
    Finish,
}

/// One edge end attached to a vertex. A loop contributes two ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Port {
    pub edge: EdgeId,
    pub end: End,
}

/// A point of the graph. Offsets strictly between 0 and the edge length;
/// edge ends are always stored as `Vertex`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Position {
    Vertex(VertexId),
    Edge { edge: EdgeId, offset: Rational },
}

/// Piece of a metric ball on one edge. Vertex ends are closed when the
/// vertex lies in the ball.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BallPiece {
    pub edge: EdgeId,
    pub lo: Rational,
    pub hi: Rational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl BallPiece {
    pub fn contains(&self, offset: &Rational) -> bool {
        let above = if self.lo_closed { *offset >= self.lo } else { *offset > self.lo };
        let below = if self.hi_closed { *offset <= self.hi } else { *offset < self.hi };
        above && below
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    ports: Vec<Vec<Port>>,
}

impl MetricGraph {
    /// Builds and validates. Edges reference vertices by name.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<(String, String, String, Rational)>) -> Result<Self> {
        let mut problems = Vec::new();
        let mut index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                problems.push(format!("duplicate vertex '{}'", v.name));
            }
        }
        let mut names = BTreeSet::new();
        let mut built = Vec::new();
        for (name, a, b, len) in edges {
            if !names.insert(name.clone()) {
                problems.push(format!("duplicate edge '{name}'"));
            }
            match (index.get(&a), index.get(&b)) {
                (Some(&from), Some(&to)) => built.push(Edge { name, from, to, length: len }),
                _ => problems.push(format!("edge '{name}' references an unknown vertex")),
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidGraph(problems));
        }
        Self::from_parts(vertices, built)
    }

    pub fn from_parts(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        let mut ports = vec![Vec::new(); vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            ports[edge.from].push(Port { edge: e, end: End::Start });
            ports[edge.to].push(Port { edge: e, end: End::Finish });
        }
        let g = MetricGraph { vertices, edges, ports };
        let problems = g.validate();
        if problems.is_empty() {
            Ok(g)
        } else {
            Err(Error::InvalidGraph(problems))
        }
    }

    /// Lists every violated structural invariant.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.vertices.is_empty() {
            problems.push("graph has no vertices".to_string());
            return problems;
        }
        for e in &self.edges {
            if !e.length.is_positive() {
                problems.push(format!("edge '{}' has non-positive length {}", e.name, e.length));
            }
        }
        for (v, vert) in self.vertices.iter().enumerate() {
            let mu = self.ports[v].len();
            if vert.boundary && mu != 1 {
                problems.push(format!("boundary vertex '{}' has valence {mu}, expected 1", vert.name));
            }
            if !vert.boundary && mu < 3 {
                problems.push(format!("interior vertex '{}' has valence {mu}, expected at least 3", vert.name));
            }
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for p in &self.ports[v] {
                let w = self.other_end(*p);
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            problems.push("graph is not connected".to_string());
        }
        problems
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn ports(&self, v: VertexId) -> &[Port] {
        &self.ports[v]
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.ports[v].len()
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.vertices[v].boundary
    }

    pub fn boundary(&self) -> Vec<VertexId> {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].boundary).collect()
    }

    pub fn vertex_id(&self, name: &str) -> Result<VertexId> {
        self.vertices
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge_id(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name)
    }

    /// Resolves boundary vertex names, keeping the given order.
    pub fn boundary_ids(&self, names: &[&str]) -> Result<Vec<VertexId>> {
        let mut out = Vec::new();
        for n in names {
            let v = self.vertex_id(n)?;
            if !self.is_boundary(v) {
                return Err(Error::NotBoundary(n.to_string()));
            }
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Ok(out)
    }

    pub fn port_vertex(&self, p: Port) -> VertexId {
        let e = &self.edges[p.edge];
        match p.end {
            End::Start => e.from,
            End::Finish => e.to,
        }
    }

    /// Vertex at the far end of the edge seen from port `p`.
    pub fn other_end(&self, p: Port) -> VertexId {
        let e = &self.edges[p.edge];
        match p.end {
            End::Start => e.to,
            End::Finish => e.from,
        }
    }

    pub fn port_offset(&self, p: Port) -> Rational {
        match p.end {
            End::Start => Rational::zero(),
            End::Finish => self.edges[p.edge].length.clone(),
        }
    }

    /// Canonical position for an edge coordinate.
    pub fn position(&self, edge: EdgeId, offset: Rational) -> Result<Position> {
        let e = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::InvalidPosition(format!("no edge with index {edge}")))?;
        if offset.is_negative() || offset > e.length {
            return Err(Error::InvalidPosition(format!(
                "offset {offset} outside [0, {}] on edge '{}'",
                e.length, e.name
            )));
        }
        Ok(self.position_unchecked(edge, offset))
    }

    pub(crate) fn position_unchecked(&self, edge: EdgeId, offset: Rational) -> Position {
        let e = &self.edges[edge];
        if offset.is_zero() {
            Position::Vertex(e.from)
        } else if offset == e.length {
            Position::Vertex(e.to)
        } else {
            Position::Edge { edge, offset }
        }
    }

    pub fn describe(&self, p: &Position) -> String {
        match p {
            Position::Vertex(v) => self.vertices[*v].name.clone(),
            Position::Edge { edge, offset } => format!("{}@{}", self.edges[*edge].name, offset),
        }
    }

    /// Multi-source shortest path lengths to every vertex.
    pub fn vertex_distances(&self, sources: &[(VertexId, Rational)]) -> Vec<Option<Rational>> {
        let mut dist: Vec<Option<Rational>> = vec![None; self.vertices.len()];
        let mut heap = BinaryHeap::new();
        for (v, d) in sources {
            if dist[*v].as_ref().is_none_or(|old| d < old) {
                dist[*v] = Some(d.clone());
                heap.push(Reverse((d.clone(), *v)));
            }
        }
        while let Some(Reverse((d, v))) = heap.pop() {
            if dist[v].as_ref().is_some_and(|best| &d > best) {
                continue;
            }
            for p in &self.ports[v] {
                let w = self.other_end(*p);
                let nd = &d + &self.edges[p.edge].length;
                if dist[w].as_ref().is_none_or(|old| &nd < old) {
                    dist[w] = Some(nd.clone());
                    heap.push(Reverse((nd, w)));
                }
            }
        }
        dist
    }

    fn seeds(&self, x: &Position) -> Vec<(VertexId, Rational)> {
        match x {
            Position::Vertex(v) => vec![(*v, Rational::zero())],
            Position::Edge { edge, offset } => {
                let e = &self.edges[*edge];
                vec![(e.from, offset.clone()), (e.to, &e.length - offset)]
            }
        }
    }

    /// Distances from a set of positions to every vertex.
    pub fn set_vertex_distances(&self, set: &[Position]) -> Vec<Rational> {
        let seeds: Vec<_> = set.iter().flat_map(|x| self.seeds(x)).collect();
        self.vertex_distances(&seeds)
            .into_iter()
            .map(|d| d.expect("graph is connected"))
            .collect()
    }

    /// Distance from a set, given its vertex distances, to a position.
    pub fn distance_to(&self, set: &[Position], vdist: &[Rational], y: &Position) -> Rational {
        match y {
            Position::Vertex(w) => vdist[*w].clone(),
            Position::Edge { edge, offset } => {
                let e = &self.edges[*edge];
                let mut best = (&vdist[e.from] + offset).min(&vdist[e.to] + &(&e.length - offset));
                for x in set {
                    if let Position::Edge { edge: ex, offset: ox } = x {
                        if ex == edge {
                            best = best.min((offset - ox).abs());
                        }
                    }
                }
                best
            }
        }
    }

    /// Shortest path distance.
    pub fn distance(&self, x: &Position, y: &Position) -> Rational {
        let set = std::slice::from_ref(x);
        let vd = self.set_vertex_distances(set);
        self.distance_to(set, &vd, y)
    }

    /// Largest distance from `gamma` to any point of the graph.
    pub fn eccentricity(&self, gamma: VertexId) -> Rational {
        let vd = self.set_vertex_distances(&[Position::Vertex(gamma)]);
        self.edges
            .iter()
            .map(|e| (&(&vd[e.from] + &vd[e.to]) + &e.length) / Rational::int(2))
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Open ball `{x : dist(x, set) < r}` as per-edge pieces.
    pub fn metric_ball(&self, set: &[Position], r: &Rational) -> Result<Vec<BallPiece>> {
        if set.is_empty() {
            return Err(Error::InvalidInput("metric ball of an empty set".into()));
        }
        if r.is_negative() {
            return Err(Error::InvalidInput(format!("negative radius {r}")));
        }
        let vd = self.set_vertex_distances(set);
        let mut out = Vec::new();
        for (ei, e) in self.edges.iter().enumerate() {
            let len = &e.length;
            let mut raw: Vec<BallPiece> = Vec::new();
            if &vd[e.from] < r {
                let hi = (r - &vd[e.from]).min(len.clone());
                let closed = &hi == len && &vd[e.to] < r;
                raw.push(BallPiece { edge: ei, lo: Rational::zero(), hi, lo_closed: true, hi_closed: closed });
            }
            if &vd[e.to] < r {
                let lo = (len - &(r - &vd[e.to])).max(Rational::zero());
                let closed = lo.is_zero() && &vd[e.from] < r;
                raw.push(BallPiece { edge: ei, lo, hi: len.clone(), lo_closed: closed, hi_closed: true });
            }
            for x in set {
                if let Position::Edge { edge, offset } = x {
                    if *edge == ei && r.is_positive() {
                        let lo = (offset - r).max(Rational::zero());
                        let hi = (offset + r).min(len.clone());
                        let lo_closed = lo.is_zero() && &vd[e.from] < r;
                        let hi_closed = &hi == len && &vd[e.to] < r;
                        raw.push(BallPiece { edge: ei, lo, hi, lo_closed, hi_closed });
                    }
                }
            }
            raw.sort_by(|a, b| a.lo.cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
            let mut merged: Vec<BallPiece> = Vec::new();
            for p in raw {
                if let Some(cur) = merged.last_mut() {
                    let overlaps = p.lo < cur.hi || (p.lo == cur.hi && (cur.hi_closed || p.lo_closed));
                    if overlaps {
                        if p.hi > cur.hi || (p.hi == cur.hi && p.hi_closed) {
                            cur.hi_closed = p.hi_closed || (p.hi == cur.hi && cur.hi_closed);
                            cur.hi = p.hi;
                        }
                        continue;
                    }
                }
                merged.push(p);
            }
            out.extend(merged);
        }
        Ok(out)
    }
}
