//! Parametric form of the eikonal algebra: per family, projectors with
//! linear time coefficients, one set per control vertex.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::projector;
use crate::dynamics::HydraSet;
use crate::error::{Error, Result};
use crate::frames::{all_frames, BetaFrame};
use crate::graph::{MetricGraph, Position, VertexId};
use crate::partition::{partition, Cell, LinearTimeFn, Partition};
use crate::rational::Rational;

/// A projector `beta beta^T` with its time coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct Term {
    /// Index of the time cell in the family.
    pub index: usize,
    pub tau: LinearTimeFn,
    #[serde(serialize_with = "ser_vector")]
    pub beta: DVector<f64>,
}

pub(crate) fn ser_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v.iter() {
        seq.serialize_element(x)?;
    }
    seq.end()
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyRepr {
    pub id: usize,
    pub eps: Rational,
    pub cells: Vec<Cell>,
    pub tau: Vec<LinearTimeFn>,
    /// Non-zero terms per control vertex, by ascending time index.
    pub terms: BTreeMap<VertexId, Vec<Term>>,
}

impl FamilyRepr {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParametricRepr {
    pub sigma: Vec<VertexId>,
    pub horizon: Rational,
    /// Added to every time function when evaluating (1 shifted, 0 not).
    pub shift: Rational,
    pub families: Vec<FamilyRepr>,
}

/// Everything computed on the way to the parametric form.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub hydras: HydraSet,
    pub partition: Partition,
    pub frames: Vec<Vec<BetaFrame>>,
    pub repr: ParametricRepr,
}

pub fn build_pipeline(g: &MetricGraph, sigma: &[VertexId], horizon: &Rational, tol: f64, shifted: bool) -> Result<Pipeline> {
    let hydras = HydraSet::build(g, sigma, horizon)?;
    let part = partition(g, &hydras)?;
    let frames = all_frames(g, &hydras, &part, tol)?;
    let repr = parametric_repr(&part, &frames, shifted);
    Ok(Pipeline { hydras, partition: part, frames, repr })
}

pub fn parametric_repr(part: &Partition, frames: &[Vec<BetaFrame>], shifted: bool) -> ParametricRepr {
    let families = part
        .families
        .iter()
        .zip(frames)
        .map(|(f, fr)| {
            let terms = fr
                .iter()
                .map(|b| {
                    let ts = b.vectors().into_iter().map(|(i, beta)| Term { index: i, tau: f.tau[i].clone(), beta }).collect();
                    (b.gamma, ts)
                })
                .collect();
            FamilyRepr { id: f.id, eps: f.eps.clone(), cells: f.cells.clone(), tau: f.tau.clone(), terms }
        })
        .collect();
    ParametricRepr {
        sigma: part.sigma.clone(),
        horizon: part.horizon.clone(),
        shift: if shifted { Rational::one() } else { Rational::zero() },
        families,
    }
}

impl ParametricRepr {
    fn family(&self, fam: usize) -> Result<&FamilyRepr> {
        self.families.get(fam).ok_or_else(|| Error::InvalidInput(format!("no family {fam}")))
    }

    fn terms(&self, fam: usize, gamma: VertexId) -> Result<&[Term]> {
        let f = self.family(fam)?;
        if !self.sigma.contains(&gamma) {
            return Err(Error::InvalidInput(format!("vertex #{gamma} is not a control vertex")));
        }
        Ok(f.terms.get(&gamma).map_or(&[], |v| v.as_slice()))
    }

    /// `sum_i P^i` on one family.
    pub fn projector_block(&self, fam: usize, gamma: VertexId) -> Result<DMatrix<f64>> {
        let m = self.family(fam)?.dim();
        Ok(self.terms(fam, gamma)?.iter().fold(DMatrix::zeros(m, m), |acc, t| acc + projector(&t.beta)))
    }

    /// `sum_i (tau^i(r) + shift) P^i` on one family.
    pub fn eikonal_block(&self, fam: usize, gamma: VertexId, r: f64) -> Result<DMatrix<f64>> {
        let f = self.family(fam)?;
        let eps = f.eps.to_f64();
        if !(0.0..=eps).contains(&r) {
            return Err(Error::InvalidInput(format!("parameter {r} outside [0, {eps}]")));
        }
        let shift = self.shift.to_f64();
        let m = f.dim();
        Ok(self
            .terms(fam, gamma)?
            .iter()
            .fold(DMatrix::zeros(m, m), |acc, t| acc + projector(&t.beta) * (t.tau.eval_f64(r) + shift)))
    }

    /// Blocks of every generator at a parameter tuple, one entry per family.
    pub fn evaluate_at(&self, r: &[f64]) -> Result<BTreeMap<VertexId, Vec<DMatrix<f64>>>> {
        if r.len() != self.families.len() {
            return Err(Error::InvalidInput(format!("expected {} parameters, got {}", self.families.len(), r.len())));
        }
        let mut out = BTreeMap::new();
        for &gamma in &self.sigma {
            let blocks = (0..self.families.len())
                .map(|k| self.eikonal_block(k, gamma, r[k]))
                .collect::<Result<Vec<_>>>()?;
            out.insert(gamma, blocks);
        }
        Ok(out)
    }

    /// Closed shifted time cells of the non-zero terms, merged where they
    /// touch or overlap.
    pub fn sigma_ac(&self, gamma: VertexId) -> Result<Vec<(Rational, Rational)>> {
        if !self.sigma.contains(&gamma) {
            return Err(Error::InvalidInput(format!("vertex #{gamma} is not a control vertex")));
        }
        let mut ranges: Vec<(Rational, Rational)> = self
            .families
            .iter()
            .flat_map(|f| f.terms.get(&gamma).into_iter().flatten())
            .map(|t| {
                let (a, b) = t.tau.range();
                (&a + &self.shift, &b + &self.shift)
            })
            .collect();
        Ok(merge_intervals(&mut ranges))
    }

    /// Projection of a sampled function onto the range of `P_gamma`,
    /// evaluated at `queries`. Needs samples on the whole determination
    /// set of every query point; points outside the families map to 0.
    pub fn apply_projector(
        &self,
        g: &MetricGraph,
        gamma: VertexId,
        samples: &BTreeMap<Position, f64>,
        queries: &[Position],
    ) -> Result<Vec<f64>> {
        queries
            .iter()
            .map(|x| {
                self.project_with(g, gamma, x, |p| {
                    samples
                        .get(p)
                        .copied()
                        .ok_or_else(|| Error::InvalidInput(format!("missing sample at {}", g.describe(p))))
                })
            })
            .collect()
    }

    /// As `apply_projector` with the function given as a closure.
    pub fn project_with<F: Fn(&Position) -> Result<f64>>(&self, g: &MetricGraph, gamma: VertexId, x: &Position, y: F) -> Result<f64> {
        let Position::Edge { edge, offset } = x else { return Ok(0.0) };
        for (fi, f) in self.families.iter().enumerate() {
            if let Some(k) = f.cells.iter().position(|c| c.edge == *edge && c.contains(offset)) {
                let r = f.cells[k].param_of(offset);
                let ys = f
                    .cells
                    .iter()
                    .map(|c| y(&g.position_unchecked(c.edge, c.offset_at(&r))))
                    .collect::<Result<Vec<f64>>>()?;
                let yv = DVector::from_vec(ys);
                return Ok(self.terms(fi, gamma)?.iter().map(|t| t.beta.dot(&yv) * t.beta[k]).sum());
            }
        }
        Ok(0.0)
    }
}

pub fn merge_intervals(ranges: &mut [(Rational, Rational)]) -> Vec<(Rational, Rational)> {
    ranges.sort();
    let mut out: Vec<(Rational, Rational)> = Vec::new();
    for (a, b) in ranges.iter() {
        match out.last_mut() {
            Some(last) if a <= &last.1 => {
                if b > &last.1 {
                    last.1 = b.clone();
                }
            }
            _ => out.push((a.clone(), b.clone())),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::wave_eval;
    use crate::examples;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::frac(n, d)
    }

    #[test]
    fn unit_interval_generator() {
        let g = examples::unit_interval();
        let p = build_pipeline(&g, &[0], &r(1, 2), 1e-9, true).unwrap();
        let e = p.repr.eikonal_block(0, 0, 0.25).unwrap();
        assert_eq!(e.shape(), (1, 1));
        assert!((e[(0, 0)] - 1.25).abs() < 1e-15);
        assert_eq!(p.repr.sigma_ac(0).unwrap(), vec![(r(1, 1), r(3, 2))]);
        let unshifted = build_pipeline(&g, &[0], &r(1, 2), 1e-9, false).unwrap();
        assert!((unshifted.repr.eikonal_block(0, 0, 0.25).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bad_parameters_rejected() {
        let g = examples::unit_interval();
        let p = build_pipeline(&g, &[0], &r(1, 2), 1e-9, true).unwrap();
        assert!(p.repr.eikonal_block(0, 0, 0.75).is_err());
        assert!(p.repr.eikonal_block(3, 0, 0.1).is_err());
        assert!(p.repr.eikonal_block(0, 1, 0.1).is_err());
        assert!(p.repr.evaluate_at(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn projector_reproduces_waves_on_star() {
        let g = examples::unit_star();
        let t = r(3, 2);
        let p = build_pipeline(&g, &[1], &t, 1e-9, true).unwrap();
        let bump = |s: f64| if (0.0..0.5).contains(&s) { (std::f64::consts::PI * s / 0.5).sin().powi(2) } else { 0.0 };
        let controls: [&dyn Fn(f64) -> f64; 1] = [&bump];
        let u = |x: &Position| Ok(wave_eval(&p.hydras, &controls, x));
        for k in 2..12 {
            let x = g.position(k % 3, r(11 + k as i64, 24)).unwrap();
            let py = p.repr.project_with(&g, 1, &x, u).unwrap();
            assert!((py - u(&x).unwrap()).abs() < 1e-12);
        }
        assert!(p.repr.apply_projector(&g, 1, &BTreeMap::new(), &[g.position(0, r(1, 4)).unwrap()]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spectrum_fills_shifted_interval(seed in 0u64..5_000) {
            let inst = crate::instances::random_subcritical(seed);
            let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, 1e-9, true).unwrap();
            prop_assert_eq!(p.repr.sigma_ac(inst.sigma[0]).unwrap(), vec![(r(1, 1), &inst.horizon + &r(1, 1))]);
        }

        #[test]
        fn eigenvalues_are_time_values(seed in 0u64..5_000, s in 0.05f64..0.95) {
            let inst = crate::instances::random_instance(seed, &r(5, 2));
            let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, 1e-9, true).unwrap();
            for (fi, f) in p.repr.families.iter().enumerate() {
                let rr = s * f.eps.to_f64();
                for &gamma in &inst.sigma {
                    let e = p.repr.eikonal_block(fi, gamma, rr).unwrap();
                    for t in &f.terms[&gamma] {
                        let want = t.tau.eval_f64(rr) + 1.0;
                        prop_assert!((&e * &t.beta - &t.beta * want).norm() < 1e-8);
                    }
                }
            }
        }
    }
}
