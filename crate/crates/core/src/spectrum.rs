//! Spectral data of a canonical form: block lengths and ranks, the
//! boundary algebras at block ends, and gamma-coordinates.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::algebra::{central_decomposition, CLUSTER_SEED};
use crate::canon::{CanonicalBlock, CanonicalForm, Side};
use crate::eikonal::merge_intervals;
use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::rational::Rational;

/// Blocks above this rank get their boundary algebra only when it is
/// forced to be the full matrix algebra.
pub const CLUSTER_LIMIT: usize = 24;

/// Summand dimensions `d` of the boundary algebra `M^{d_1} + ... + M^{d_k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Clusters {
    Known(Vec<usize>),
    Skipped { kappa: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumBlock {
    pub id: usize,
    pub zeta: Rational,
    pub kappa: usize,
    pub start: Clusters,
    pub end: Clusters,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientGraph {
    /// Each node is a set of glued block ends.
    pub nodes: Vec<Vec<(usize, Side)>>,
    /// `(block, start node, end node, length)`.
    pub edges: Vec<(usize, usize, usize, Rational)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub shift: Rational,
    pub blocks: Vec<SpectrumBlock>,
    /// Block ends identified by equal gamma-coordinates. Exploratory.
    pub quotient: QuotientGraph,
    pub quotient_status: &'static str,
}

fn end_param(b: &CanonicalBlock, side: Side) -> Rational {
    match side {
        Side::Start => Rational::zero(),
        Side::End => b.zeta.clone(),
    }
}

/// Boundary algebra of a block at one end.
pub fn boundary_clusters(b: &CanonicalBlock, sigma: &[VertexId], side: Side, shift: &Rational, tol: f64) -> Result<Clusters> {
    let s = end_param(b, side);
    let mut forced = true;
    for &g in sigma {
        let vals: Vec<Rational> = b.terms_of(g).map(|t| &t.tau.eval(&s) + shift).collect();
        let distinct: BTreeSet<&Rational> = vals.iter().collect();
        if distinct.len() != vals.len() || vals.iter().any(|v| v.is_zero()) {
            forced = false;
        }
    }
    // separated non-zero eigenvalues give back every line, as inside
    if forced {
        return Ok(Clusters::Known(vec![b.kappa]));
    }
    if b.kappa > CLUSTER_LIMIT {
        return Ok(Clusters::Skipped { kappa: b.kappa });
    }
    let gens: Vec<_> = sigma.iter().map(|&g| b.generator(g, s.to_f64(), shift.to_f64())).collect();
    let mut dims: Vec<usize> = central_decomposition(&gens, tol.max(1e-9), CLUSTER_SEED)?.into_iter().map(|(_, d)| d).collect();
    dims.sort_unstable();
    Ok(Clusters::Known(dims))
}

/// Sorted values `tau_k(s) + shift` of each control on block `l`.
pub fn gamma_coordinates(cf: &CanonicalForm, l: usize, s: &Rational) -> Result<BTreeMap<VertexId, Vec<Rational>>> {
    let b = cf.blocks.get(l).ok_or_else(|| Error::InvalidInput(format!("no block {l}")))?;
    if s.is_negative() || s > &b.zeta {
        return Err(Error::InvalidInput(format!("parameter {s} outside [0, {}]", b.zeta)));
    }
    Ok(cf
        .sigma
        .iter()
        .map(|&g| {
            let mut v: Vec<Rational> = b.terms_of(g).map(|t| &t.tau.eval(s) + &cf.shift).collect();
            v.sort();
            (g, v)
        })
        .collect())
}

/// Shifted time ranges of `gamma` over all blocks, merged.
pub fn sigma_ac(cf: &CanonicalForm, gamma: VertexId) -> Vec<(Rational, Rational)> {
    let mut ranges: Vec<_> = cf
        .blocks
        .iter()
        .flat_map(|b| b.terms_of(gamma))
        .map(|t| {
            let (lo, hi) = t.tau.range();
            (&lo + &cf.shift, &hi + &cf.shift)
        })
        .collect();
    merge_intervals(&mut ranges)
}

pub fn quotient_graph(cf: &CanonicalForm) -> QuotientGraph {
    let mut keys: BTreeMap<BTreeMap<VertexId, Vec<Rational>>, Vec<(usize, Side)>> = BTreeMap::new();
    for (l, b) in cf.blocks.iter().enumerate() {
        for side in [Side::Start, Side::End] {
            keys.entry(gamma_coordinates(cf, l, &end_param(b, side)).expect("end in range")).or_default().push((l, side));
        }
    }
    let nodes: Vec<Vec<(usize, Side)>> = keys.into_values().collect();
    let node_of = |l: usize, side: Side| nodes.iter().position(|n| n.contains(&(l, side))).expect("every end has a node");
    let edges = cf.blocks.iter().enumerate().map(|(l, b)| (l, node_of(l, Side::Start), node_of(l, Side::End), b.zeta.clone())).collect();
    QuotientGraph { nodes, edges }
}

pub fn build_spectrum(cf: &CanonicalForm, tol: f64) -> Result<Spectrum> {
    let blocks = crate::par::map(&cf.blocks, |b| -> Result<SpectrumBlock> {
        Ok(SpectrumBlock {
            id: b.id,
            zeta: b.zeta.clone(),
            kappa: b.kappa,
            start: boundary_clusters(b, &cf.sigma, Side::Start, &cf.shift, tol)?,
            end: boundary_clusters(b, &cf.sigma, Side::End, &cf.shift, tol)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum { shift: cf.shift.clone(), blocks, quotient: quotient_graph(cf), quotient_status: "exploratory" })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonicalize;
    use crate::eikonal::build_pipeline;
    use crate::examples;

    fn r(n: i64, d: i64) -> Rational {
        Rational::frac(n, d)
    }

    fn spectrum(sigma: &[&str], t: Rational) -> (CanonicalForm, Spectrum) {
        let g = examples::unit_star();
        let ids = g.boundary_ids(sigma).unwrap();
        let p = build_pipeline(&g, &ids, &t, 1e-9, true).unwrap();
        let cf = canonicalize(&p.repr, 1e-9).unwrap();
        let s = build_spectrum(&cf, 1e-9).unwrap();
        (cf, s)
    }

    #[test]
    fn single_block_has_trivial_ends() {
        let (_, s) = spectrum(&["g1"], r(3, 2));
        assert_eq!(s.blocks.len(), 1);
        assert_eq!(s.blocks[0].start, Clusters::Known(vec![1]));
        assert_eq!(s.blocks[0].end, Clusters::Known(vec![1]));
        assert_eq!(s.quotient.nodes.len(), 2);
        assert_eq!(s.quotient.edges[0].3, r(3, 2));
    }

    #[test]
    fn coordinates_on_the_star_block() {
        let (cf, _) = spectrum(&["g1"], r(3, 2));
        let c = gamma_coordinates(&cf, 0, &r(1, 4)).unwrap();
        assert_eq!(c.values().next().unwrap(), &vec![r(5, 4)]);
        assert_eq!(sigma_ac(&cf, cf.sigma[0]), vec![(r(1, 1), r(5, 2))]);
    }

    #[test]
    fn disjoint_controls_on_the_interval() {
        let g = examples::unit_interval();
        let ids = g.boundary_ids(&["g1", "g2"]).unwrap();
        let p = build_pipeline(&g, &ids, &r(1, 4), 1e-9, true).unwrap();
        let cf = canonicalize(&p.repr, 1e-9).unwrap();
        let s = build_spectrum(&cf, 1e-9).unwrap();
        assert_eq!(s.blocks.len(), 2);
        assert!(s.blocks.iter().all(|b| b.start == Clusters::Known(vec![1]) && b.end == Clusters::Known(vec![1])));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn canonical_spectrum_matches_parametric(seed in 0u64..5_000) {
            let inst = crate::instances::random_instance(seed, &r(5, 2));
            let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, 1e-9, true).unwrap();
            let cf = canonicalize(&p.repr, 1e-9).unwrap();
            for &gamma in &inst.sigma {
                proptest::prop_assert_eq!(sigma_ac(&cf, gamma), p.repr.sigma_ac(gamma).unwrap());
            }
            for b in build_spectrum(&cf, 1e-9).unwrap().blocks {
                for c in [b.start, b.end] {
                    if let Clusters::Known(d) = c {
                        proptest::prop_assert!(d.iter().sum::<usize>() <= b.kappa && !d.is_empty());
                    }
                }
            }
        }
    }

    #[test]
    fn coinciding_times_split_the_boundary_algebra() {
        let (cf, s) = spectrum(&["g1", "g2"], r(5, 4));
        let big = s.blocks.iter().find(|b| b.kappa == 3).unwrap();
        assert_eq!(big.start, Clusters::Known(vec![3]));
        assert_eq!(big.end, Clusters::Known(vec![1, 2]));
        let coords = gamma_coordinates(&cf, big.id, &big.zeta).unwrap();
        assert!(gamma_coordinates(&cf, big.id, &r(1, 1)).is_err());
        assert!(coords.values().all(|v| v == &vec![r(2, 1), r(2, 1)]));
    }

    #[test]
    fn forced_shortcut_agrees_with_decomposition() {
        let (cf, _) = spectrum(&["g1", "g2"], r(5, 4));
        for b in &cf.blocks {
            let gens: Vec<_> = cf.sigma.iter().map(|&g| b.generator(g, 0.0, 1.0)).collect();
            let dims: Vec<usize> = central_decomposition(&gens, 1e-9, CLUSTER_SEED).unwrap().into_iter().map(|x| x.1).collect();
            let shortcut = boundary_clusters(b, &cf.sigma, Side::Start, &cf.shift, 1e-9).unwrap();
            assert_eq!(shortcut, Clusters::Known(dims));
        }
    }

    #[test]
    fn quotient_glues_matching_ends() {
        let (_, s) = spectrum(&["g1", "g2"], r(5, 4));
        // every block end appears in exactly one node
        let total: usize = s.quotient.nodes.iter().map(|n| n.len()).sum();
        assert_eq!(total, 2 * s.blocks.len());
        assert_eq!(s.quotient.edges.len(), s.blocks.len());
    }
}
