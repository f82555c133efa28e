//! Finite-difference solver for the controlled wave equation on a metric
//! graph. Unit Courant number, one-sided Kirchhoff condition at interior
//! vertices, Dirichlet data at boundary vertices.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::dynamics::{wave_eval, HydraSet};
use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexId};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub h: Rational,
}

impl GridSpec {
    pub fn new(h: Rational) -> Result<GridSpec> {
        if !h.is_positive() {
            return Err(Error::InvalidInput(format!("grid step {h} is not positive")));
        }
        Ok(GridSpec { h })
    }

    /// `2^-k`.
    pub fn dyadic(k: u32) -> GridSpec {
        GridSpec { h: Rational::frac(1, 1i64 << k) }
    }

    fn steps(&self, len: &Rational, what: &str) -> Result<usize> {
        let q = len / &self.h;
        if !q.denom().to_i64().is_some_and(|d| d == 1) {
            return Err(Error::InvalidInput(format!("grid step {} does not divide {what} {len}", self.h)));
        }
        q.numer().to_usize().ok_or_else(|| Error::InvalidInput(format!("{what} {len} too large for the grid")))
    }

    /// Coarsest step `1/(D 2^k)` with at least `per_unit` steps per unit
    /// length, `D` the common denominator of the edge lengths and `horizon`.
    pub fn fitting(g: &MetricGraph, horizon: &Rational, per_unit: i64) -> Result<GridSpec> {
        let mut d = horizon.denom().clone();
        for e in g.edges() {
            d = d.lcm(e.length.denom());
        }
        let mut k = d.to_i64().ok_or_else(|| Error::InvalidInput("denominators too large for a grid".into()))?;
        while k < per_unit {
            k *= 2;
        }
        GridSpec::new(Rational::frac(1, k))
    }

    /// Intervals per edge; at least two so every edge has an interior node.
    pub fn nodes(&self, g: &MetricGraph) -> Result<Vec<usize>> {
        g.edges()
            .iter()
            .map(|e| {
                let n = self.steps(&e.length, &format!("length of {}", e.name))?;
                if n < 2 {
                    return Err(Error::InvalidInput(format!("grid step {} too coarse for edge {}", self.h, e.name)));
                }
                Ok(n)
            })
            .collect()
    }
}

/// Bump width used by the command line and the acceptance checks. A
/// width of 1/2 is avoided: its reflection cancels exactly on the unit
/// interval at T = 5/4.
pub const DEFAULT_BUMP_WIDTH: f64 = 0.375;

/// Boundary control `f` applied at `gamma`.
#[derive(Clone)]
pub struct ControlSignal {
    pub gamma: VertexId,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ControlSignal {
    pub fn new(gamma: VertexId, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ControlSignal {
        ControlSignal { gamma, f: Arc::new(f) }
    }

    /// `sin^2(pi t / w)` on `[0, w]`, zero elsewhere.
    pub fn bump(gamma: VertexId, width: f64) -> ControlSignal {
        ControlSignal::new(gamma, move |t| if (0.0..=width).contains(&t) { (PI * t / width).sin().powi(2) } else { 0.0 })
    }
}

/// Wave values at the grid nodes of every edge, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: Rational,
    pub h: Rational,
    pub values: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn to_csv(&self, g: &MetricGraph) -> String {
        let h = self.h.to_f64();
        let mut out = String::from("edge,offset,value\n");
        for (e, vals) in self.values.iter().enumerate() {
            for (j, v) in vals.iter().enumerate() {
                let _ = writeln!(out, "{},{:.17e},{:.17e}", g.edge(e).name, j as f64 * h, v);
            }
        }
        out
    }

    fn norm(&self) -> f64 {
        self.values.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn control_at(controls: &[ControlSignal], v: VertexId, t: f64) -> f64 {
    controls.iter().filter(|c| c.gamma == v).map(|c| (c.f)(t)).sum()
}

pub fn fd_wave(g: &MetricGraph, controls: &[ControlSignal], horizon: &Rational, grid: &GridSpec) -> Result<Snapshot> {
    for c in controls {
        if c.gamma >= g.vertices().len() || !g.is_boundary(c.gamma) {
            return Err(Error::NotBoundary(format!("control vertex #{}", c.gamma)));
        }
    }
    let n = grid.nodes(g)?;
    let steps = grid.steps(horizon, "horizon")?;
    let dt = grid.h.to_f64();
    let mut prev: Vec<Vec<f64>> = n.iter().map(|&k| vec![0.0; k + 1]).collect();
    let mut cur = prev.clone();
    let mut next = prev.clone();
    for step in 1..=steps {
        let t = step as f64 * dt;
        for e in 0..n.len() {
            for j in 1..n[e] {
                next[e][j] = cur[e][j + 1] + cur[e][j - 1] - prev[e][j];
            }
        }
        for v in 0..g.vertices().len() {
            let value = if g.is_boundary(v) {
                control_at(controls, v, t)
            } else {
                // sum over ports of (u_1 - U) / h = 0
                let ports = g.ports(v);
                let s: f64 = ports
                    .iter()
                    .map(|p| match p.end {
                        End::Start => next[p.edge][1],
                        End::Finish => next[p.edge][n[p.edge] - 1],
                    })
                    .sum();
                s / ports.len() as f64
            };
            for p in g.ports(v) {
                let j = match p.end {
                    End::Start => 0,
                    End::Finish => n[p.edge],
                };
                next[p.edge][j] = value;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(Snapshot { time: horizon.clone(), h: grid.h.clone(), values: cur })
}

/// The impulse-response wave sampled on the same grid.
pub fn sample_wave(g: &MetricGraph, set: &HydraSet, controls: &[ControlSignal], grid: &GridSpec) -> Result<Snapshot> {
    let n = grid.nodes(g)?;
    let fs: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>> = set
        .sigma()
        .iter()
        .map(|&gamma| {
            let own: Vec<_> = controls.iter().filter(|c| c.gamma == gamma).map(|c| c.f.clone()).collect();
            Arc::new(move |t: f64| own.iter().map(|f| f(t)).sum::<f64>()) as Arc<dyn Fn(f64) -> f64 + Send + Sync>
        })
        .collect();
    let refs: Vec<&dyn Fn(f64) -> f64> = fs.iter().map(|f| f.as_ref() as &dyn Fn(f64) -> f64).collect();
    let mut values = Vec::new();
    for (e, &k) in n.iter().enumerate() {
        let row = (0..=k)
            .map(|j| {
                let x = g.position(e, &grid.h * &Rational::int(j as i64))?;
                Ok(wave_eval(set, &refs, &x))
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    Ok(Snapshot { time: set.horizon().clone(), h: grid.h.clone(), values })
}

/// `|a - b| / max(|a|, 1e-30)` in the discrete L2 norm.
pub fn compare_snapshots(a: &Snapshot, b: &Snapshot) -> Result<f64> {
    let same = a.h == b.h && a.time == b.time && a.values.len() == b.values.len() && a.values.iter().zip(&b.values).all(|(x, y)| x.len() == y.len());
    if !same {
        return Err(Error::InvalidInput("snapshots live on different grids".into()));
    }
    let diff: f64 = a.values.iter().flatten().zip(b.values.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok(diff / a.norm().max(1e-30))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    fn r(n: i64, d: i64) -> Rational {
        Rational::frac(n, d)
    }

    fn oracle_error(g: &MetricGraph, t: Rational, k: u32) -> f64 {
        let grid = GridSpec::dyadic(k);
        let c = vec![ControlSignal::bump(1, 0.5)];
        let set = HydraSet::build(g, &[1], &t).unwrap();
        let fd = fd_wave(g, &c, &t, &grid).unwrap();
        let ev = sample_wave(g, &set, &c, &grid).unwrap();
        compare_snapshots(&ev, &fd).unwrap()
    }

    #[test]
    fn zero_control_gives_zero_wave() {
        let g = examples::unit_star();
        let s = fd_wave(&g, &[ControlSignal::new(1, |_| 0.0)], &r(3, 2), &GridSpec::dyadic(6)).unwrap();
        assert!(s.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn interval_is_exact_along_characteristics() {
        let g = examples::unit_interval();
        let grid = GridSpec::dyadic(8);
        let f = ControlSignal::bump(0, 0.25);
        let s = fd_wave(&g, &[f.clone()], &r(1, 2), &grid).unwrap();
        for (j, v) in s.values[0].iter().enumerate() {
            let x = j as f64 / 256.0;
            let want = if x <= 0.5 { (f.f)(0.5 - x) } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "node {j}: {v} vs {want}");
        }
    }

    #[test]
    fn star_agrees_with_impulse_sum_and_converges() {
        let g = examples::unit_star();
        for t in [r(5, 4), r(3, 2)] {
            let coarse = oracle_error(&g, t.clone(), 9);
            let fine = oracle_error(&g, t, 10);
            assert!(fine < 1e-2 && fine < coarse, "{coarse} -> {fine}");
        }
    }

    #[test]
    fn causality_within_one_cell() {
        let g = examples::unit_star();
        let grid = GridSpec::dyadic(6);
        let t = r(5, 4);
        let s = fd_wave(&g, &[ControlSignal::bump(1, 0.25)], &t, &grid).unwrap();
        let vd: Vec<f64> = g.vertex_distances(&[(1, Rational::zero())]).into_iter().map(|d| d.map_or(f64::INFINITY, |d| d.to_f64())).collect();
        for (e, vals) in s.values.iter().enumerate() {
            let edge = g.edge(e);
            for (j, v) in vals.iter().enumerate() {
                let x = j as f64 / 64.0;
                let len = edge.length.to_f64();
                let d = (vd[edge.from] + x).min(vd[edge.to] + len - x);
                if d > t.to_f64() + 1.0 / 64.0 {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn comparison_edge_cases() {
        let a = Snapshot { time: r(1, 1), h: r(1, 2), values: vec![vec![1.0, 2.0, 0.0]] };
        let zero = Snapshot { values: vec![vec![0.0; 3]], ..a.clone() };
        assert_eq!(compare_snapshots(&a, &a).unwrap(), 0.0);
        assert_eq!(compare_snapshots(&a, &zero).unwrap(), 1.0);
        let other = Snapshot { h: r(1, 4), ..a.clone() };
        assert!(compare_snapshots(&a, &other).is_err());
    }

    #[test]
    fn incompatible_grids_are_rejected() {
        let g = examples::interval(r(1, 3));
        assert!(fd_wave(&g, &[], &r(1, 3), &GridSpec::dyadic(4)).is_err());
        assert!(fd_wave(&examples::unit_interval(), &[], &r(1, 3), &GridSpec::dyadic(4)).is_err());
        assert!(GridSpec::new(r(0, 1)).is_err());
    }

    #[test]
    fn fitting_grid_divides_everything() {
        let g = examples::star(&[r(1, 3), r(1, 2), r(1, 1)]);
        let grid = GridSpec::fitting(&g, &r(5, 4), 512).unwrap();
        assert_eq!(grid.h, r(1, 768));
        assert!(fd_wave(&g, &[], &r(5, 4), &grid).is_ok());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let g = examples::unit_interval();
        let s = fd_wave(&g, &[ControlSignal::bump(0, 0.25)], &r(1, 2), &GridSpec::dyadic(3)).unwrap();
        assert_eq!(s.to_csv(&g).lines().count(), 1 + 9);
    }
}
