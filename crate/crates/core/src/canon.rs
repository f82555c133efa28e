//! Canonical form: split families into irreducible blocks, glue blocks
//! whose boundary projectors are exchanged by the boundary map and are
//! isomorphic, then reduce each block to its own span.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{self, connection_test, equivalence_classes, irreducible_reduction, projector, Connection, Isomorphism};
use crate::eikonal::{ser_vector, ParametricRepr};
use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::partition::LinearTimeFn;
use crate::rational::Rational;

#[derive(Debug, Clone, Serialize)]
pub struct BlockTerm {
    pub gamma: VertexId,
    pub tau: LinearTimeFn,
    #[serde(serialize_with = "ser_vector")]
    pub beta: DVector<f64>,
}

/// Where a stretch of a block's parameter came from: the block of `class`
/// in family `family`, occupying `[offset, offset + length]`, possibly
/// read backwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub family: usize,
    pub class: usize,
    pub offset: Rational,
    pub length: Rational,
    pub reversed: bool,
}

impl Piece {
    /// Block parameter of the family parameter `r`.
    pub fn block_param(&self, r: f64) -> f64 {
        let local = if self.reversed { self.length.to_f64() - r } else { r };
        self.offset.to_f64() + local
    }
}

/// A block before reduction: terms live in the ambient space of the
/// family the block started from.
#[derive(Debug, Clone, Serialize)]
pub struct BlockRepr {
    pub length: Rational,
    pub terms: Vec<BlockTerm>,
    pub pieces: Vec<Piece>,
}

impl BlockRepr {
    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.terms.iter().map(|t| t.beta.clone()).collect()
    }

    pub fn transposed(&self) -> BlockRepr {
        let terms = self
            .terms
            .iter()
            .map(|t| BlockTerm { gamma: t.gamma, tau: t.tau.transposed(), beta: t.beta.clone() })
            .collect();
        let pieces = self
            .pieces
            .iter()
            .rev()
            .map(|p| Piece {
                family: p.family,
                class: p.class,
                offset: &(&self.length - &p.offset) - &p.length,
                length: p.length.clone(),
                reversed: !p.reversed,
            })
            .collect();
        BlockRepr { length: self.length.clone(), terms, pieces }
    }
}

/// One block per equivalence class of each family's projectors. Terms
/// keep control-vertex order, then time order.
pub fn split_blocks(repr: &ParametricRepr, tol: f64) -> Vec<BlockRepr> {
    let mut out = Vec::new();
    for (fi, f) in repr.families.iter().enumerate() {
        let mut all = Vec::new();
        for &gamma in &repr.sigma {
            for t in f.terms.get(&gamma).into_iter().flatten() {
                all.push(BlockTerm { gamma, tau: t.tau.clone(), beta: t.beta.clone() });
            }
        }
        let vs: Vec<_> = all.iter().map(|t| t.beta.clone()).collect();
        for (ci, class) in equivalence_classes(&vs, tol).into_iter().enumerate() {
            out.push(BlockRepr {
                length: f.eps.clone(),
                terms: class.members.iter().map(|&k| all[k].clone()).collect(),
                pieces: vec![Piece { family: fi, class: ci, offset: Rational::zero(), length: f.eps.clone(), reversed: false }],
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    Start,
    End,
}

/// A projector of a block, seen from one end of the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Tag {
    pub gamma: VertexId,
    pub block: usize,
    pub term: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Collision {
    /// No other tag shares the end value.
    Unpaired,
    /// Partner in the same block at the same end.
    SameEnd,
    /// Partner in another block.
    CrossBlock,
    /// Partner in the same block at the other end.
    OppositeEnd,
}

#[derive(Debug, Clone, Default)]
pub struct BoundaryMap {
    pub partner: BTreeMap<Tag, Tag>,
    pub kind: BTreeMap<Tag, Collision>,
}

fn end_value(b: &BlockRepr, term: usize, side: Side) -> Rational {
    let t = &b.terms[term].tau;
    match side {
        Side::Start => t.at_start(),
        Side::End => t.at_end(),
    }
}

/// Pairs boundary tags of the same control vertex whose time functions
/// take the same value. More than two tags on one value is a fault.
pub fn boundary_map(blocks: &[BlockRepr]) -> Result<BoundaryMap> {
    let mut groups: BTreeMap<(VertexId, Rational), Vec<Tag>> = BTreeMap::new();
    for (l, b) in blocks.iter().enumerate() {
        for (k, t) in b.terms.iter().enumerate() {
            for side in [Side::Start, Side::End] {
                let tag = Tag { gamma: t.gamma, block: l, term: k, side };
                groups.entry((t.gamma, end_value(b, k, side))).or_default().push(tag);
            }
        }
    }
    let mut map = BoundaryMap::default();
    for ((gamma, value), tags) in groups {
        match tags.as_slice() {
            [t] => {
                map.kind.insert(*t, Collision::Unpaired);
            }
            [a, b] => {
                let kind = if a.block != b.block {
                    Collision::CrossBlock
                } else if a.side == b.side {
                    Collision::SameEnd
                } else {
                    Collision::OppositeEnd
                };
                map.partner.insert(*a, *b);
                map.partner.insert(*b, *a);
                map.kind.insert(*a, kind);
                map.kind.insert(*b, kind);
            }
            _ => {
                return Err(Error::Structural(format!(
                    "{} boundary tags of control #{gamma} share the value {value}",
                    tags.len()
                )))
            }
        }
    }
    Ok(map)
}

/// Glues `b` onto `a`. `pairing[k]` is the term of `b` partnered with
/// term `k` of `a`; `iso` carries `a`'s projectors onto `b`'s.
pub fn junction(a: &BlockRepr, side_a: Side, b: &BlockRepr, side_b: Side, pairing: &[usize], iso: &Isomorphism) -> Result<BlockRepr> {
    let a = if side_a == Side::Start { a.transposed() } else { a.clone() };
    let b = if side_b == Side::End { b.transposed() } else { b.clone() };
    let length = &a.length + &b.length;
    let mut terms = Vec::new();
    for (k, ta) in a.terms.iter().enumerate() {
        let tb = &b.terms[pairing[k]];
        if ta.gamma != tb.gamma || ta.tau.at_end() != tb.tau.at_start() || ta.tau.slope != tb.tau.slope {
            return Err(Error::Structural(format!(
                "joined time function is not linear: {} then {}",
                ta.tau.at_end(),
                tb.tau.at_start()
            )));
        }
        if (iso.apply(&projector(&ta.beta)) - projector(&tb.beta)).abs().max() > 1e-8 {
            return Err(Error::Structural("isomorphism does not carry the paired projectors".into()));
        }
        terms.push(BlockTerm {
            gamma: ta.gamma,
            tau: LinearTimeFn { intercept: ta.tau.intercept.clone(), slope: ta.tau.slope, length: length.clone() },
            beta: ta.beta.clone(),
        });
    }
    let mut pieces = a.pieces.clone();
    for p in &b.pieces {
        pieces.push(Piece { offset: &p.offset + &a.length, ..p.clone() });
    }
    Ok(BlockRepr { length, terms, pieces })
}

/// A reduced block: `kappa`-dimensional projectors and linear times on
/// `[0, zeta]`.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalBlock {
    pub id: usize,
    pub zeta: Rational,
    pub kappa: usize,
    pub terms: Vec<BlockTerm>,
    pub pieces: Vec<Piece>,
}

impl CanonicalBlock {
    pub fn terms_of(&self, gamma: VertexId) -> impl Iterator<Item = &BlockTerm> {
        self.terms.iter().filter(move |t| t.gamma == gamma)
    }

    /// `sum (tau(s) + shift) P` over the terms of `gamma`.
    pub fn generator(&self, gamma: VertexId, s: f64, shift: f64) -> DMatrix<f64> {
        self.terms_of(gamma)
            .fold(DMatrix::zeros(self.kappa, self.kappa), |acc, t| acc + projector(&t.beta) * (t.tau.eval_f64(s) + shift))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalForm {
    pub sigma: Vec<VertexId>,
    pub horizon: Rational,
    pub shift: Rational,
    pub blocks: Vec<CanonicalBlock>,
    pub junctions: usize,
    pub notes: Vec<String>,
}

impl CanonicalForm {
    pub fn evaluate_at(&self, s: &[f64]) -> Result<BTreeMap<VertexId, Vec<DMatrix<f64>>>> {
        if s.len() != self.blocks.len() {
            return Err(Error::InvalidInput(format!("expected {} parameters, got {}", self.blocks.len(), s.len())));
        }
        let shift = self.shift.to_f64();
        Ok(self
            .sigma
            .iter()
            .map(|&g| (g, self.blocks.iter().zip(s).map(|(b, &x)| b.generator(g, x, shift)).collect()))
            .collect())
    }

    pub fn to_blocks(&self) -> Vec<BlockRepr> {
        self.blocks
            .iter()
            .map(|b| BlockRepr { length: b.zeta.clone(), terms: b.terms.clone(), pieces: b.pieces.clone() })
            .collect()
    }
}

pub fn canonicalize(repr: &ParametricRepr, tol: f64) -> Result<CanonicalForm> {
    let blocks = split_blocks(repr, tol);
    canonicalize_blocks(blocks, &repr.sigma, &repr.horizon, &repr.shift, tol)
}

/// Runs the canonicalizer again on an existing canonical form.
pub fn recanonicalize(cf: &CanonicalForm, tol: f64) -> Result<CanonicalForm> {
    let mut out = canonicalize_blocks(cf.to_blocks(), &cf.sigma, &cf.horizon, &cf.shift, tol)?;
    out.junctions += cf.junctions;
    Ok(out)
}

struct Candidate {
    a: usize,
    side_a: Side,
    b: usize,
    side_b: Side,
    pairing: Vec<usize>,
}

fn candidate(blocks: &[BlockRepr], map: &BoundaryMap, a: usize, side_a: Side) -> Option<Candidate> {
    let mut target: Option<(usize, Side)> = None;
    let mut pairing = Vec::new();
    for k in 0..blocks[a].terms.len() {
        let tag = Tag { gamma: blocks[a].terms[k].gamma, block: a, term: k, side: side_a };
        let p = map.partner.get(&tag)?;
        match target {
            None => target = Some((p.block, p.side)),
            Some(t) if t != (p.block, p.side) => return None,
            _ => {}
        }
        pairing.push(p.term);
    }
    let (b, side_b) = target?;
    if b == a || blocks[b].terms.len() != pairing.len() {
        return None;
    }
    Some(Candidate { a, side_a, b, side_b, pairing })
}

pub fn canonicalize_blocks(
    mut blocks: Vec<BlockRepr>,
    sigma: &[VertexId],
    horizon: &Rational,
    shift: &Rational,
    tol: f64,
) -> Result<CanonicalForm> {
    let mut junctions = 0;
    let mut notes = Vec::new();
    loop {
        let map = boundary_map(&blocks)?;
        let mut chosen = None;
        'search: for a in 0..blocks.len() {
            for side_a in [Side::Start, Side::End] {
                if let Some(c) = self_pairing(&blocks, &map, a, side_a) {
                    let note = format!("block {a} pairs with itself across its ends ({c}); self-junction rejected");
                    if !notes.contains(&note) {
                        notes.push(note);
                    }
                }
                let Some(c) = candidate(&blocks, &map, a, side_a) else { continue };
                match connection_test(&blocks[c.a].vectors(), &blocks[c.b].vectors(), &c.pairing, tol)? {
                    Connection::Connected(iso) => {
                        chosen = Some((c, iso));
                        break 'search;
                    }
                    Connection::Separated(why) => {
                        let note = format!("ends of blocks {} and {} are paired but separated: {why}", c.a, c.b);
                        if !notes.contains(&note) {
                            notes.push(note);
                        }
                    }
                }
            }
        }
        let Some((c, iso)) = chosen else { break };
        let joined = junction(&blocks[c.a], c.side_a, &blocks[c.b], c.side_b, &c.pairing, &iso)?;
        blocks[c.a] = joined;
        blocks.remove(c.b);
        junctions += 1;
    }
    let blocks = blocks
        .into_iter()
        .enumerate()
        .map(|(id, b)| {
            let red = irreducible_reduction(&b.vectors(), tol)?;
            let terms = b
                .terms
                .iter()
                .zip(red.vectors)
                .map(|(t, v)| BlockTerm { gamma: t.gamma, tau: t.tau.clone(), beta: v })
                .collect();
            Ok(CanonicalBlock { id, zeta: b.length, kappa: red.basis.ncols(), terms, pieces: b.pieces })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CanonicalForm { sigma: sigma.to_vec(), horizon: horizon.clone(), shift: shift.clone(), blocks, junctions, notes })
}

fn self_pairing(blocks: &[BlockRepr], map: &BoundaryMap, a: usize, side: Side) -> Option<usize> {
    if side != Side::Start {
        return None;
    }
    let n = blocks[a].terms.len();
    let count = (0..n)
        .filter(|&k| {
            let tag = Tag { gamma: blocks[a].terms[k].gamma, block: a, term: k, side };
            map.kind.get(&tag) == Some(&Collision::OppositeEnd)
        })
        .count();
    (count == n).then_some(count)
}

/// Above this size the word span is not enumerated.
pub const WORD_SPAN_LIMIT: usize = 8;

/// Violated structural invariants of a canonical form.
pub fn check_invariants(cf: &CanonicalForm, tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    for b in &cf.blocks {
        for t in &b.terms {
            if t.tau.length != b.zeta {
                bad.push(format!("block {}: time function length differs from block length", b.id));
            }
            if (t.beta.norm() - 1.0).abs() > 1e-8 || t.beta.len() != b.kappa {
                bad.push(format!("block {}: projector is not a unit vector of dimension kappa", b.id));
            }
        }
        for &gamma in &cf.sigma {
            let ts: Vec<_> = b.terms_of(gamma).collect();
            for (i, x) in ts.iter().enumerate() {
                for y in &ts[i + 1..] {
                    if x.beta.dot(&y.beta).abs() > 1e-8 {
                        bad.push(format!("block {}: projectors of one control are not orthogonal", b.id));
                    }
                    let (a0, a1) = x.tau.range();
                    let (b0, b1) = y.tau.range();
                    if a0 < b1 && b0 < a1 {
                        bad.push(format!("block {}: time ranges of one control overlap", b.id));
                    }
                }
            }
        }
        if b.kappa <= WORD_SPAN_LIMIT {
            let gens: Vec<_> = cf.sigma.iter().map(|&g| b.generator(g, 0.37 * b.zeta.to_f64(), cf.shift.to_f64())).collect();
            let dim = algebra::word_span_dimension(&gens, Some(2 * b.kappa.max(1)), tol.max(1e-9));
            if dim != b.kappa * b.kappa {
                bad.push(format!("block {}: word span {dim} differs from kappa^2 = {}", b.id, b.kappa * b.kappa));
            }
        } else {
            // Large blocks: a connected family of lines spanning the space
            // generates the full matrix algebra.
            let vs: Vec<_> = b.terms.iter().map(|t| t.beta.clone()).collect();
            let classes = equivalence_classes(&vs, tol);
            if classes.len() != 1 || classes[0].kappa != b.kappa {
                bad.push(format!("block {}: projectors do not form one class of rank kappa", b.id));
            }
        }
    }
    bad
}

/// Equality of canonical forms up to block order, transposition of blocks
/// and isomorphism of each block.
pub fn equivalent_forms(x: &CanonicalForm, y: &CanonicalForm, tol: f64) -> bool {
    if x.sigma != y.sigma || x.shift != y.shift || x.blocks.len() != y.blocks.len() {
        return false;
    }
    let mut used = vec![false; y.blocks.len()];
    match_blocks(x, y, 0, &mut used, tol)
}

fn match_blocks(x: &CanonicalForm, y: &CanonicalForm, i: usize, used: &mut [bool], tol: f64) -> bool {
    if i == x.blocks.len() {
        return true;
    }
    for j in 0..y.blocks.len() {
        if !used[j] && same_block(&x.blocks[i], &y.blocks[j], tol) {
            used[j] = true;
            if match_blocks(x, y, i + 1, used, tol) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

fn term_order(b: &CanonicalBlock) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..b.terms.len()).collect();
    idx.sort_by_key(|&k| (b.terms[k].gamma, b.terms[k].tau.range()));
    idx
}

fn same_block(a: &CanonicalBlock, b: &CanonicalBlock, tol: f64) -> bool {
    if a.zeta != b.zeta || a.kappa != b.kappa || a.terms.len() != b.terms.len() {
        return false;
    }
    let ia = term_order(a);
    let ib = term_order(b);
    let same = ia.iter().zip(&ib).all(|(&p, &q)| a.terms[p].gamma == b.terms[q].gamma && a.terms[p].tau == b.terms[q].tau);
    let flipped = ia
        .iter()
        .zip(&ib)
        .all(|(&p, &q)| a.terms[p].gamma == b.terms[q].gamma && a.terms[p].tau == b.terms[q].tau.transposed());
    if !same && !flipped {
        return false;
    }
    let va: Vec<_> = ia.iter().map(|&k| a.terms[k].beta.clone()).collect();
    let vb: Vec<_> = ib.iter().map(|&k| b.terms[k].beta.clone()).collect();
    let pairing: Vec<usize> = (0..va.len()).collect();
    matches!(connection_test(&va, &vb, &pairing, tol), Ok(Connection::Connected(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eikonal::build_pipeline;
    use crate::examples;

    fn r(n: i64, d: i64) -> Rational {
        Rational::frac(n, d)
    }

    fn canon(g: &crate::MetricGraph, sigma: &[&str], t: Rational) -> CanonicalForm {
        let ids = g.boundary_ids(sigma).unwrap();
        let p = build_pipeline(g, &ids, &t, 1e-9, true).unwrap();
        canonicalize(&p.repr, 1e-9).unwrap()
    }

    #[test]
    fn unit_interval_golden() {
        let cf = canon(&examples::unit_interval(), &["g1"], r(1, 2));
        assert_eq!(cf.blocks.len(), 1);
        let b = &cf.blocks[0];
        assert_eq!((b.zeta.clone(), b.kappa), (r(1, 2), 1));
        assert_eq!(b.terms[0].tau, LinearTimeFn { intercept: r(0, 1), slope: 1, length: r(1, 2) });
        assert_eq!(cf.junctions, 0);
    }

    #[test]
    fn three_star_golden_after_two_junctions() {
        let cf = canon(&examples::unit_star(), &["g1"], r(3, 2));
        assert_eq!(cf.junctions, 2);
        assert_eq!(cf.blocks.len(), 1);
        let b = &cf.blocks[0];
        assert_eq!((b.zeta.clone(), b.kappa), (r(3, 2), 1));
        assert_eq!(b.terms[0].tau, LinearTimeFn { intercept: r(0, 1), slope: 1, length: r(3, 2) });
        let gen = b.generator(b.terms[0].gamma, 0.5, 1.0);
        assert!((gen[(0, 0)] - 1.5).abs() < 1e-15);
        assert!(check_invariants(&cf, 1e-9).is_empty());
    }

    #[test]
    fn boundary_types_on_three_star() {
        let g = examples::unit_star();
        let p = build_pipeline(&g, &[1], &r(3, 2), 1e-9, true).unwrap();
        let blocks = split_blocks(&p.repr, 1e-9);
        assert_eq!(blocks.len(), 3);
        let map = boundary_map(&blocks).unwrap();
        let t = |block, side| Tag { gamma: 1, block, term: 0, side };
        assert_eq!(map.kind[&t(0, Side::Start)], Collision::Unpaired);
        assert_eq!(map.partner[&t(0, Side::End)], t(1, Side::Start));
        assert_eq!(map.partner[&t(1, Side::End)], t(2, Side::End));
        assert_eq!(map.kind[&t(2, Side::Start)], Collision::Unpaired);
    }

    #[test]
    fn transposition_is_an_involution() {
        let g = examples::unit_star();
        let p = build_pipeline(&g, &[1], &r(3, 2), 1e-9, true).unwrap();
        for b in split_blocks(&p.repr, 1e-9) {
            let back = b.transposed().transposed();
            assert_eq!(back.pieces, b.pieces);
            assert!(back.terms.iter().zip(&b.terms).all(|(x, y)| x.tau == y.tau));
        }
    }

    #[test]
    fn canonicalization_is_idempotent_and_transposition_blind() {
        let cf = canon(&examples::unit_star(), &["g1", "g2"], r(5, 4));
        let again = recanonicalize(&cf, 1e-9).unwrap();
        assert_eq!(again.junctions, cf.junctions);
        assert!(equivalent_forms(&cf, &again, 1e-9));
        let mut flipped = cf.clone();
        let b0 = flipped.to_blocks()[0].transposed();
        flipped.blocks[0].terms = b0.terms;
        assert!(equivalent_forms(&cf, &flipped, 1e-9));
        flipped.blocks.reverse();
        assert!(equivalent_forms(&cf, &flipped, 1e-9));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn random_forms_are_canonical_and_stable(seed in 0u64..5_000) {
            let inst = crate::instances::random_instance(seed, &r(5, 2));
            let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, 1e-9, true).unwrap();
            let cf = canonicalize(&p.repr, 1e-9).unwrap();
            proptest::prop_assert!(check_invariants(&cf, 1e-9).is_empty());
            let again = recanonicalize(&cf, 1e-9).unwrap();
            proptest::prop_assert_eq!(again.junctions, cf.junctions);
            proptest::prop_assert!(equivalent_forms(&cf, &again, 1e-9));
            // Pieces tile each block exactly.
            for b in &cf.blocks {
                let mut at = Rational::zero();
                for piece in &b.pieces {
                    proptest::prop_assert_eq!(&piece.offset, &at);
                    at = &at + &piece.length;
                }
                proptest::prop_assert_eq!(&at, &b.zeta);
            }
        }
    }

    #[test]
    fn triple_collision_is_a_fault() {
        let unit = DVector::from_vec(vec![1.0]);
        let block = |a: i64| BlockRepr {
            length: r(1, 2),
            terms: vec![BlockTerm { gamma: 0, tau: LinearTimeFn { intercept: r(a, 2), slope: 1, length: r(1, 2) }, beta: unit.clone() }],
            pieces: vec![],
        };
        let blocks = vec![block(0), block(1), block(1)];
        assert!(matches!(boundary_map(&blocks), Err(Error::Structural(_))));
    }
}
