//! Lattice closure on the hydra union and the partition of the reached set
//! into families of equal-length cells.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::dynamics::HydraSet;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, MetricGraph, Position, VertexId};
use crate::rational::Rational;

pub const DEFAULT_CLOSURE_CAP: usize = 100_000;

/// Positions and times of a lattice-closed set of hydra points.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lattice {
    pub positions: BTreeSet<Position>,
    pub times: BTreeSet<Rational>,
    pub points: usize,
}

/// Smallest set of hydra points containing the seeds and closed under
/// "same position" and "same time".
pub fn lattice_closure(
    g: &MetricGraph,
    set: &HydraSet,
    seed_positions: &[Position],
    seed_times: &[Rational],
    cap: usize,
) -> Result<Lattice> {
    let mut lat = Lattice::default();
    let mut pos_queue: Vec<Position> = Vec::new();
    let mut time_queue: Vec<Rational> = Vec::new();
    for p in seed_positions {
        // points off the hydra generate nothing
        if set.times_at(p).is_empty() {
            continue;
        }
        if lat.positions.insert(p.clone()) {
            pos_queue.push(p.clone());
        }
    }
    for t in seed_times {
        if lat.times.insert(t.clone()) {
            time_queue.push(t.clone());
        }
    }
    while !pos_queue.is_empty() || !time_queue.is_empty() {
        while let Some(x) = pos_queue.pop() {
            let ts = set.times_at(&x);
            lat.points += ts.len();
            if lat.points > cap {
                return Err(Error::ClosureCap(cap));
            }
            for t in ts {
                if lat.times.insert(t.clone()) {
                    time_queue.push(t);
                }
            }
        }
        while let Some(t) = time_queue.pop() {
            for x in set.positions_at(g, &t) {
                if lat.positions.insert(x.clone()) {
                    pos_queue.push(x);
                }
            }
        }
    }
    Ok(lat)
}

/// Determination set of a point: positions and times of the lattice
/// generated by the hydra points above it.
pub fn determination_set(g: &MetricGraph, set: &HydraSet, x: &Position) -> Result<Lattice> {
    lattice_closure(g, set, std::slice::from_ref(x), &[], DEFAULT_CLOSURE_CAP)
}

/// Projection of the lattice generated by the corner points: hydra points
/// over vertices, transversal crossings and the final time slice.
pub fn critical_set(g: &MetricGraph, set: &HydraSet) -> Result<BTreeSet<Position>> {
    let mut seed_pos = BTreeSet::new();
    let mut seed_times = BTreeSet::new();
    for h in &set.hydras {
        for s in &h.segments {
            for (off, t) in [(s.start.clone(), &s.t0), (s.end_offset(), &s.t1)] {
                let p = g.position_unchecked(s.edge, off);
                if matches!(p, Position::Vertex(_)) {
                    seed_pos.insert(p);
                    seed_times.insert(t.clone());
                }
            }
        }
    }
    for (p, t) in set.intersections(g) {
        seed_pos.insert(p);
        seed_times.insert(t);
    }
    seed_times.insert(set.horizon().clone());
    let seed_pos: Vec<_> = seed_pos.into_iter().collect();
    let seed_times: Vec<_> = seed_times.into_iter().collect();
    Ok(lattice_closure(g, set, &seed_pos, &seed_times, DEFAULT_CLOSURE_CAP)?.positions)
}

/// `tau(r) = intercept + slope * r` on `[0, length]`, slope `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LinearTimeFn {
    pub intercept: Rational,
    pub slope: i8,
    pub length: Rational,
}

impl LinearTimeFn {
    pub fn eval(&self, r: &Rational) -> Rational {
        if self.slope > 0 {
            &self.intercept + r
        } else {
            &self.intercept - r
        }
    }

    pub fn eval_f64(&self, r: f64) -> f64 {
        self.intercept.to_f64() + self.slope as f64 * r
    }

    pub fn at_start(&self) -> Rational {
        self.intercept.clone()
    }

    pub fn at_end(&self) -> Rational {
        self.eval(&self.length)
    }

    /// Closed range `[min, max]`.
    pub fn range(&self) -> (Rational, Rational) {
        let (a, b) = (self.at_start(), self.at_end());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Same function read with `r -> length - r`.
    pub fn transposed(&self) -> LinearTimeFn {
        LinearTimeFn { intercept: self.at_end(), slope: -self.slope, length: self.length.clone() }
    }

    pub fn shifted(&self, by: &Rational) -> LinearTimeFn {
        LinearTimeFn { intercept: &self.intercept + by, slope: self.slope, length: self.length.clone() }
    }
}

/// Open edge interval `(lo, hi)`. `orientation` tells how the family
/// parameter runs through it: `+1` from `lo`, `-1` from `hi`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub edge: EdgeId,
    pub lo: Rational,
    pub hi: Rational,
    pub orientation: i8,
}

impl Cell {
    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        &(&self.lo + &self.hi) / &Rational::int(2)
    }

    /// Offset of the family point with parameter `r`.
    pub fn offset_at(&self, r: &Rational) -> Rational {
        if self.orientation > 0 {
            &self.lo + r
        } else {
            &self.hi - r
        }
    }

    /// Parameter of an offset inside the cell.
    pub fn param_of(&self, offset: &Rational) -> Rational {
        if self.orientation > 0 {
            offset - &self.lo
        } else {
            &self.hi - offset
        }
    }

    pub fn contains(&self, offset: &Rational) -> bool {
        &self.lo < offset && offset < &self.hi
    }
}

/// Cells sharing one determination-set structure, all of length `eps`.
/// Times `tau[i]` are sorted by their time cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Family {
    pub id: usize,
    pub eps: Rational,
    pub cells: Vec<Cell>,
    pub tau: Vec<LinearTimeFn>,
}

impl Family {
    pub fn points_at(&self, g: &MetricGraph, r: &Rational) -> Vec<Position> {
        self.cells.iter().map(|c| g.position_unchecked(c.edge, c.offset_at(r))).collect()
    }

    /// Time cell `(t_i, t_i + eps)` of each time function.
    pub fn time_cells(&self) -> Vec<(Rational, Rational)> {
        self.tau.iter().map(|f| f.range()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    pub sigma: Vec<VertexId>,
    pub horizon: Rational,
    #[serde(skip)]
    pub critical: Vec<Position>,
    pub families: Vec<Family>,
}

impl Partition {
    /// Family and cell containing a regular point.
    pub fn locate(&self, x: &Position) -> Option<(usize, usize)> {
        let Position::Edge { edge, offset } = x else { return None };
        for (fi, f) in self.families.iter().enumerate() {
            for (ci, c) in f.cells.iter().enumerate() {
                if c.edge == *edge && c.contains(offset) {
                    return Some((fi, ci));
                }
            }
        }
        None
    }

    pub fn cell_count(&self) -> usize {
        self.families.iter().map(|f| f.cells.len()).sum()
    }
}

fn cell_of(cells: &[Cell], edge: EdgeId, offset: &Rational) -> Option<usize> {
    let i = cells.partition_point(|c| (c.edge, &c.lo) < (edge, offset));
    // candidate is the cell just before the insertion point
    i.checked_sub(1).filter(|&k| cells[k].edge == edge && cells[k].contains(offset))
}

/// Cuts the closure of the reached set by the critical set and groups the
/// cells into families.
pub fn partition(g: &MetricGraph, set: &HydraSet) -> Result<Partition> {
    let horizon = set.horizon().clone();
    let sigma = set.sigma();
    let theta = critical_set(g, set)?;
    let sources: Vec<Position> = sigma.iter().map(|&v| Position::Vertex(v)).collect();
    let vdist = g.set_vertex_distances(&sources);

    let mut on_edge: BTreeMap<EdgeId, BTreeSet<Rational>> = BTreeMap::new();
    for p in &theta {
        match p {
            Position::Vertex(v) => {
                for port in g.ports(*v) {
                    on_edge.entry(port.edge).or_default().insert(g.port_offset(*port));
                }
            }
            Position::Edge { edge, offset } => {
                on_edge.entry(*edge).or_default().insert(offset.clone());
            }
        }
    }

    let mut cells = Vec::new();
    for (ei, e) in g.edges().iter().enumerate() {
        let marks = on_edge.get(&ei).cloned().unwrap_or_default();
        let mut cuts = marks.clone();
        cuts.insert(Rational::zero());
        cuts.insert(e.length.clone());
        let cuts: Vec<_> = cuts.into_iter().collect();
        for w in cuts.windows(2) {
            let mid = &(&w[0] + &w[1]) / &Rational::int(2);
            let x = g.position_unchecked(ei, mid);
            if g.distance_to(&sources, &vdist, &x) < horizon {
                if !marks.contains(&w[0]) || !marks.contains(&w[1]) {
                    return Err(Error::NonCovering(format!(
                        "reached interval ({}, {}) on edge '{}' is not bounded by critical points",
                        w[0], w[1], e.name
                    )));
                }
                cells.push(Cell { edge: ei, lo: w[0].clone(), hi: w[1].clone(), orientation: 1 });
            }
        }
    }

    let mids: Vec<Position> = cells.iter().map(|c| g.position_unchecked(c.edge, c.midpoint())).collect();
    let lattices = crate::par::map(&mids, |x| determination_set(g, set, x));
    let lattices: Vec<Lattice> = lattices.into_iter().collect::<Result<_>>()?;

    let mut family_of = vec![usize::MAX; cells.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (ci, lat) in lattices.iter().enumerate() {
        let members = lattice_cells(&cells, lat, true)?;
        if family_of[ci] == usize::MAX {
            for &k in &members {
                if family_of[k] != usize::MAX {
                    return Err(Error::InconsistentFamily(format!("cell {k} reached from two families")));
                }
                family_of[k] = groups.len();
            }
            groups.push(members);
        } else if groups[family_of[ci]] != members {
            return Err(Error::InconsistentFamily(format!(
                "determination sets of cells {ci} and {} differ",
                groups[family_of[ci]][0]
            )));
        }
    }

    let families = crate::par::map_range(groups.len(), |id| build_family(g, set, &cells, &groups[id], &lattices[groups[id][0]], id));
    let families = families.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Partition { sigma, horizon, critical: theta.into_iter().collect(), families })
}

/// Cells hit by a lattice's positions, one point per cell.
fn lattice_cells(cells: &[Cell], lat: &Lattice, at_midpoints: bool) -> Result<Vec<usize>> {
    let mut members = Vec::new();
    for p in &lat.positions {
        let Position::Edge { edge, offset } = p else {
            return Err(Error::InconsistentFamily("determination set meets a vertex".into()));
        };
        let k = cell_of(cells, *edge, offset)
            .ok_or_else(|| Error::InconsistentFamily("determination set meets a critical point".into()))?;
        if at_midpoints && offset != &cells[k].midpoint() {
            return Err(Error::InconsistentFamily("determination set is not at cell midpoints".into()));
        }
        members.push(k);
    }
    members.sort();
    let n = members.len();
    members.dedup();
    if members.len() != n {
        return Err(Error::InconsistentFamily("two points of one determination set in a cell".into()));
    }
    Ok(members)
}

fn build_family(g: &MetricGraph, set: &HydraSet, all: &[Cell], members: &[usize], mid_lat: &Lattice, id: usize) -> Result<Family> {
    let mut cells: Vec<Cell> = members.iter().map(|&k| all[k].clone()).collect();
    let eps = cells[0].length();
    if cells.iter().any(|c| c.length() != eps) {
        return Err(Error::InconsistentFamily(format!("family {id} has cells of different lengths")));
    }
    let quarter = &eps / &Rational::int(4);
    let probe = g.position_unchecked(cells[0].edge, &cells[0].lo + &quarter);
    let q_lat = determination_set(g, set, &probe)?;
    if q_lat.positions.len() != cells.len() {
        return Err(Error::InconsistentFamily(format!("family {id} changes size inside a cell")));
    }
    for p in &q_lat.positions {
        let Position::Edge { edge, offset } = p else { unreachable!("checked above") };
        let k = cells
            .iter()
            .position(|c| c.edge == *edge && c.contains(offset))
            .ok_or_else(|| Error::InconsistentFamily(format!("family {id} leaks out of its cells")))?;
        let c = &mut cells[k];
        if offset == &(&c.lo + &quarter) {
            c.orientation = 1;
        } else if offset == &(&c.hi - &quarter) {
            c.orientation = -1;
        } else {
            return Err(Error::InconsistentFamily(format!("family {id} does not move at unit speed")));
        }
    }
    let mid_times: Vec<_> = mid_lat.times.iter().cloned().collect();
    let q_times: Vec<_> = q_lat.times.iter().cloned().collect();
    if mid_times.len() != q_times.len() {
        return Err(Error::InconsistentFamily(format!("family {id} changes time count inside a cell")));
    }
    let half = &eps / &Rational::int(2);
    let mut tau = Vec::new();
    for (tm, tq) in mid_times.iter().zip(&q_times) {
        let d = tm - tq;
        let slope = if d == quarter {
            1
        } else if d == -&quarter {
            -1
        } else {
            return Err(Error::InconsistentFamily(format!("family {id} has a time not linear in r")));
        };
        let intercept = if slope > 0 { tm - &half } else { tm + &half };
        tau.push(LinearTimeFn { intercept, slope, length: eps.clone() });
    }
    let ranges: Vec<_> = tau.iter().map(|f| f.range()).collect();
    if ranges.iter().any(|(lo, _)| lo.is_negative()) || ranges.windows(2).any(|w| w[0].1 > w[1].0) {
        return Err(Error::InconsistentFamily(format!("family {id} has overlapping time cells")));
    }
    Ok(Family { id, eps, cells, tau })
}
