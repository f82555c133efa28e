//! Impulse propagation on a metric graph and the resulting hydras.
//!
//! An impulse leaves a vertex, crosses an edge at unit speed and scatters at
//! the far vertex: reflection `(2 - mu)/mu`, transmission `2/mu` into every
//! other port, sign flip at boundary vertices. Arrivals at the same vertex
//! and time are combined before scattering. Impulses crossing mid-edge do
//! not interact.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, Port, Position, VertexId};
use crate::rational::Rational;

pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// Straight piece of a hydra: offset moves from `start` with slope `dir`
/// for `t` in `[t0, t1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub edge: usize,
    pub t0: Rational,
    pub t1: Rational,
    pub start: Rational,
    pub dir: i8,
    pub amplitude: Rational,
}

impl Segment {
    pub fn offset_at(&self, t: &Rational) -> Rational {
        let dt = t - &self.t0;
        if self.dir > 0 {
            &self.start + &dt
        } else {
            &self.start - &dt
        }
    }

    pub fn end_offset(&self) -> Rational {
        self.offset_at(&self.t1)
    }

    /// Time at which the segment passes `offset`, if it does.
    pub fn time_at_offset(&self, offset: &Rational) -> Option<Rational> {
        let d = offset - &self.start;
        let d = if self.dir > 0 { d } else { -d };
        if d.is_negative() {
            return None;
        }
        let t = &self.t0 + &d;
        (t <= self.t1).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScatterEvent {
    pub vertex: VertexId,
    pub time: Rational,
    pub incoming: Vec<(Port, Rational)>,
    pub outgoing: Vec<(Port, Rational)>,
}

/// Space-time support of the fundamental solution from one boundary vertex.
#[derive(Debug, Clone)]
pub struct Hydra {
    pub gamma: VertexId,
    pub horizon: Rational,
    pub segments: Vec<Segment>,
    pub events: Vec<ScatterEvent>,
    by_edge: Vec<Vec<usize>>,
    // (segment, true if the segment starts here)
    at_vertex: Vec<Vec<(usize, bool)>>,
    boundary: Vec<bool>,
    valence: Vec<usize>,
}

pub fn propagate(g: &MetricGraph, gamma: VertexId, horizon: &Rational) -> Result<Hydra> {
    propagate_capped(g, gamma, horizon, DEFAULT_EVENT_CAP)
}

pub fn propagate_capped(g: &MetricGraph, gamma: VertexId, horizon: &Rational, cap: usize) -> Result<Hydra> {
    if gamma >= g.vertices().len() {
        return Err(Error::UnknownVertex(format!("#{gamma}")));
    }
    if !g.is_boundary(gamma) {
        return Err(Error::NotBoundary(g.vertex(gamma).name.clone()));
    }
    if !horizon.is_positive() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let mut segments = Vec::new();
    let mut events = Vec::new();
    let mut pending: BTreeMap<(Rational, VertexId), BTreeMap<Port, Rational>> = BTreeMap::new();

    let emit = |port: Port, t: &Rational, a: Rational, segments: &mut Vec<Segment>,
                    pending: &mut BTreeMap<(Rational, VertexId), BTreeMap<Port, Rational>>|
     -> Result<()> {
        let len = &g.edge(port.edge).length;
        let arrival = t + len;
        let (start, dir) = match port.end {
            End::Start => (Rational::zero(), 1),
            End::Finish => (len.clone(), -1),
        };
        segments.push(Segment {
            edge: port.edge,
            t0: t.clone(),
            t1: arrival.clone().min(horizon.clone()),
            start,
            dir,
            amplitude: a.clone(),
        });
        if segments.len() > cap {
            return Err(Error::EventCap(cap));
        }
        if &arrival < horizon {
            let far = Port {
                edge: port.edge,
                end: match port.end {
                    End::Start => End::Finish,
                    End::Finish => End::Start,
                },
            };
            let slot = pending.entry((arrival, g.other_end(port))).or_default();
            *slot.entry(far).or_insert_with(Rational::zero) += a;
        }
        Ok(())
    };

    emit(g.ports(gamma)[0], &Rational::zero(), Rational::one(), &mut segments, &mut pending)?;

    while let Some(((t, v), arrivals)) = pending.pop_first() {
        let incoming: Vec<(Port, Rational)> = arrivals.into_iter().filter(|(_, a)| !a.is_zero()).collect();
        let ports = g.ports(v);
        let mut outgoing = Vec::new();
        if g.is_boundary(v) {
            for (p, a) in &incoming {
                outgoing.push((*p, -a));
            }
        } else {
            let mu = Rational::int(ports.len() as i64);
            let refl = &Rational::int(2 - ports.len() as i64) / &mu;
            let trans = &Rational::int(2) / &mu;
            for q in ports {
                let mut out = Rational::zero();
                for (p, a) in &incoming {
                    let c = if p == q { &refl } else { &trans };
                    out += c * a;
                }
                if !out.is_zero() {
                    outgoing.push((*q, out));
                }
            }
        }
        for (q, a) in &outgoing {
            emit(*q, &t, a.clone(), &mut segments, &mut pending)?;
        }
        events.push(ScatterEvent { vertex: v, time: t, incoming, outgoing });
        if events.len() > cap {
            return Err(Error::EventCap(cap));
        }
    }
    Ok(Hydra::index(g, gamma, horizon.clone(), segments, events))
}

impl Hydra {
    fn index(g: &MetricGraph, gamma: VertexId, horizon: Rational, segments: Vec<Segment>, events: Vec<ScatterEvent>) -> Hydra {
        let mut by_edge = vec![Vec::new(); g.edges().len()];
        let mut at_vertex = vec![Vec::new(); g.vertices().len()];
        for (i, s) in segments.iter().enumerate() {
            by_edge[s.edge].push(i);
            if let Position::Vertex(v) = g.position_unchecked(s.edge, s.start.clone()) {
                at_vertex[v].push((i, true));
            }
            if let Position::Vertex(v) = g.position_unchecked(s.edge, s.end_offset()) {
                at_vertex[v].push((i, false));
            }
        }
        Hydra {
            gamma,
            horizon,
            segments,
            events,
            by_edge,
            at_vertex,
            boundary: g.vertices().iter().map(|v| v.boundary).collect(),
            valence: (0..g.vertices().len()).map(|v| g.valence(v)).collect(),
        }
    }

    /// Times `t` with `(x, t)` on the hydra, ascending.
    pub fn times_at(&self, x: &Position) -> Vec<Rational> {
        let mut out = BTreeSet::new();
        match x {
            Position::Vertex(v) => {
                for (i, start) in &self.at_vertex[*v] {
                    let s = &self.segments[*i];
                    out.insert(if *start { s.t0.clone() } else { s.t1.clone() });
                }
            }
            Position::Edge { edge, offset } => {
                for i in &self.by_edge[*edge] {
                    if let Some(t) = self.segments[*i].time_at_offset(offset) {
                        out.insert(t);
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Positions occupied at time `t`, sorted.
    pub fn positions_at(&self, g: &MetricGraph, t: &Rational) -> Vec<Position> {
        let mut out = BTreeSet::new();
        for s in &self.segments {
            if &s.t0 <= t && t <= &s.t1 {
                out.insert(g.position_unchecked(s.edge, s.offset_at(t)));
            }
        }
        out.into_iter().collect()
    }

    /// Amplitude at a space-time point. At an interior vertex it is the
    /// common limit `2/mu` times the arriving amplitude; at boundary
    /// vertices it vanishes except for the source at `t = 0`.
    pub fn amplitude_at(&self, x: &Position, t: &Rational) -> Rational {
        match x {
            Position::Vertex(v) => {
                if self.boundary[*v] {
                    if *v == self.gamma && t.is_zero() {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                } else {
                    let arriving: Rational = self.at_vertex[*v]
                        .iter()
                        .filter(|(i, start)| !start && &self.segments[*i].t1 == t)
                        .map(|(i, _)| &self.segments[*i].amplitude)
                        .sum();
                    &arriving * &(&Rational::int(2) / &Rational::int(self.valence[*v] as i64))
                }
            }
            Position::Edge { edge, offset } => self.by_edge[*edge]
                .iter()
                .map(|i| &self.segments[*i])
                .filter(|s| s.time_at_offset(offset).as_ref() == Some(t))
                .map(|s| &s.amplitude)
                .sum(),
        }
    }

    /// Transversal crossings of this hydra with itself.
    pub fn self_intersections(&self, g: &MetricGraph) -> Vec<(Position, Rational)> {
        crossings(g, self, self)
    }

    /// Transversal crossings between two hydras.
    pub fn cross_intersections(&self, g: &MetricGraph, other: &Hydra) -> Vec<(Position, Rational)> {
        crossings(g, self, other)
    }

    pub fn segments_on(&self, edge: usize) -> impl Iterator<Item = &Segment> {
        self.by_edge[edge].iter().map(move |i| &self.segments[*i])
    }
}

/// Meeting point of two opposite segments, strictly inside both.
pub fn crossing(a: &Segment, b: &Segment) -> Option<Rational> {
    if a.edge != b.edge || a.dir == b.dir {
        return None;
    }
    // a.start + da (t - a.t0) = b.start + db (t - b.t0), db = -da
    let da = Rational::int(a.dir as i64);
    let num = &(&b.start - &a.start) + &(&(&da * &a.t0) + &(&da * &b.t0));
    let t = &num / &(&da * &Rational::int(2));
    (a.t0 < t && t < a.t1 && b.t0 < t && t < b.t1).then_some(t)
}

fn crossings(g: &MetricGraph, h1: &Hydra, h2: &Hydra) -> Vec<(Position, Rational)> {
    let same = std::ptr::eq(h1, h2);
    let mut out = BTreeSet::new();
    for e in 0..g.edges().len() {
        for (ia, &i) in h1.by_edge[e].iter().enumerate() {
            let a = &h1.segments[i];
            let js: &[usize] = if same { &h1.by_edge[e][ia + 1..] } else { &h2.by_edge[e] };
            for &j in js {
                let b = &h2.segments[j];
                if let Some(t) = crossing(a, b) {
                    out.insert((g.position_unchecked(e, a.offset_at(&t)), t));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// The union of the hydras of a control set.
#[derive(Debug, Clone)]
pub struct HydraSet {
    pub hydras: Vec<Hydra>,
}

impl HydraSet {
    pub fn build(g: &MetricGraph, sigma: &[VertexId], horizon: &Rational) -> Result<HydraSet> {
        if sigma.is_empty() {
            return Err(Error::InvalidInput("empty control set".into()));
        }
        let hydras = crate::par::map(sigma, |&gamma| propagate(g, gamma, horizon));
        Ok(HydraSet { hydras: hydras.into_iter().collect::<Result<_>>()? })
    }

    pub fn sigma(&self) -> Vec<VertexId> {
        self.hydras.iter().map(|h| h.gamma).collect()
    }

    pub fn horizon(&self) -> &Rational {
        &self.hydras[0].horizon
    }

    pub fn hydra(&self, gamma: VertexId) -> Option<&Hydra> {
        self.hydras.iter().find(|h| h.gamma == gamma)
    }

    pub fn times_at(&self, x: &Position) -> Vec<Rational> {
        let set: BTreeSet<Rational> = self.hydras.iter().flat_map(|h| h.times_at(x)).collect();
        set.into_iter().collect()
    }

    pub fn positions_at(&self, g: &MetricGraph, t: &Rational) -> Vec<Position> {
        let set: BTreeSet<Position> = self.hydras.iter().flat_map(|h| h.positions_at(g, t)).collect();
        set.into_iter().collect()
    }

    /// All transversal crossings, within and across hydras.
    pub fn intersections(&self, g: &MetricGraph) -> Vec<(Position, Rational)> {
        let mut out = BTreeSet::new();
        for (i, a) in self.hydras.iter().enumerate() {
            out.extend(a.self_intersections(g));
            for b in &self.hydras[i + 1..] {
                out.extend(a.cross_intersections(g, b));
            }
        }
        out.into_iter().collect()
    }
}

/// Value of the wave at `(x, T)` for controls applied at each hydra's
/// source: sum of `a(x, t) * f(T - t)` over the hydra times at `x`.
pub fn wave_eval(set: &HydraSet, controls: &[&dyn Fn(f64) -> f64], x: &Position) -> f64 {
    let horizon = set.horizon().to_f64();
    let mut u = 0.0;
    for (h, f) in set.hydras.iter().zip(controls) {
        match x {
            Position::Edge { edge, offset } => {
                for s in h.segments_on(*edge) {
                    if let Some(t) = s.time_at_offset(offset) {
                        u += s.amplitude.to_f64() * f(horizon - t.to_f64());
                    }
                }
            }
            Position::Vertex(_) => {
                for t in h.times_at(x) {
                    u += h.amplitude_at(x, &t).to_f64() * f(horizon - t.to_f64());
                }
            }
        }
    }
    u
}
