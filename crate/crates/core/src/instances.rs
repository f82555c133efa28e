//! Seeded random instances: small graphs with rational lengths.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{MetricGraph, Vertex, VertexId};
use crate::rational::Rational;

const DENOMINATORS: [i64; 6] = [1, 2, 3, 4, 6, 12];

/// A graph, a control set and a horizon.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: MetricGraph,
    pub sigma: Vec<VertexId>,
    pub horizon: Rational,
}

/// Length in `[1/4, 2]` with denominator at most 12.
pub fn random_length<R: Rng>(rng: &mut R) -> Rational {
    let d = *DENOMINATORS.choose(rng).unwrap();
    let lo = (d + 3) / 4;
    let n = rng.gen_range(lo.max(1)..=2 * d);
    Rational::frac(n, d)
}

fn topology<R: Rng>(rng: &mut R) -> (usize, Vec<(usize, usize)>, usize) {
    // (interior count, edges between vertex slots, leaf count); interior
    // vertices occupy slots 0..k, leaves follow.
    match rng.gen_range(0..7) {
        0 => (0, vec![(0, 1)], 2),
        1 => {
            let k = rng.gen_range(3..=5);
            (1, (0..k).map(|i| (1 + i, 0)).collect(), k)
        }
        2 => (2, vec![(0, 1), (2, 0), (3, 0), (4, 1), (5, 1)], 4),
        3 => (2, vec![(0, 1), (0, 1), (2, 0), (3, 1)], 2),
        4 => (1, vec![(0, 0), (1, 0)], 1),
        5 => (2, vec![(0, 1), (1, 0), (2, 0), (3, 1), (4, 1)], 3),
        _ => (2, vec![(0, 1), (2, 0), (3, 0), (4, 1), (5, 1), (6, 1)], 5),
    }
}

/// Connected graph with at most six edges, boundary valence 1 and
/// interior valence at least 3.
pub fn random_graph(seed: u64) -> MetricGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_graph_with(&mut rng)
}

pub fn random_graph_with<R: Rng>(rng: &mut R) -> MetricGraph {
    let (interior, slots, leaves) = topology(rng);
    let mut vertices = Vec::new();
    for i in 0..interior {
        vertices.push(Vertex { name: format!("v{}", i + 1), boundary: false });
    }
    for i in 0..leaves {
        vertices.push(Vertex { name: format!("g{}", i + 1), boundary: true });
    }
    let edges = slots
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            (format!("e{}", k + 1), vertices[a].name.clone(), vertices[b].name.clone(), random_length(rng))
        })
        .collect();
    MetricGraph::new(vertices, edges).expect("generated graph is valid")
}

/// Random rational in `(0, bound)` on a grid of step `1/24`.
pub fn random_horizon_below<R: Rng>(rng: &mut R, bound: &Rational) -> Rational {
    let steps = (bound * &Rational::int(24)).to_f64().ceil() as i64;
    let k = rng.gen_range(1..steps.max(2));
    let t = Rational::frac(k, 24);
    if &t >= bound {
        bound * &Rational::frac(1, 2)
    } else {
        t
    }
}

/// Single control vertex with horizon strictly below its eccentricity.
pub fn random_subcritical(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_graph_with(&mut rng);
    let boundary = graph.boundary();
    let gamma = *boundary.choose(&mut rng).unwrap();
    let ecc = graph.eccentricity(gamma);
    let horizon = random_horizon_below(&mut rng, &ecc);
    Instance { graph, sigma: vec![gamma], horizon }
}

/// Up to two control vertices, horizon in `(0, max_horizon]`.
pub fn random_instance(seed: u64, max_horizon: &Rational) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_graph_with(&mut rng);
    let mut boundary = graph.boundary();
    boundary.shuffle(&mut rng);
    let count = if boundary.len() > 1 && rng.gen_bool(0.5) { 2 } else { 1 };
    let mut sigma: Vec<_> = boundary[..count].to_vec();
    sigma.sort();
    let horizon = random_horizon_below(&mut rng, &(max_horizon + &Rational::frac(1, 24)));
    Instance { graph, sigma, horizon }
}
