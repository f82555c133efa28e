//! Amplitude frames of a family and their Gram-Schmidt orthogonalization.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::HydraSet;
use crate::error::{Error, Result};
use crate::graph::{MetricGraph, VertexId};
use crate::partition::{Family, Partition};
use crate::rational::Rational;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Orthogonalized rows of an amplitude matrix.
#[derive(Debug, Clone, Serialize)]
pub struct GramSchmidt {
    /// `beta = transition * alpha`, one row per input row.
    #[serde(skip)]
    pub beta: DMatrix<f64>,
    #[serde(skip)]
    pub transition: DMatrix<f64>,
    pub nonzero: Vec<bool>,
}

/// Three-branch Gram-Schmidt on the rows of `alpha`: normalize the first
/// row, orthogonalize and normalize independent rows, zero dependent ones.
/// A row is dependent when its residual norm is at most `tol`.
pub fn gram_schmidt(alpha: &DMatrix<f64>, tol: f64) -> Result<GramSchmidt> {
    if alpha.nrows() == 0 || alpha.ncols() == 0 {
        return Err(Error::InvalidInput("empty amplitude matrix".into()));
    }
    if alpha.row(0).norm() <= tol {
        return Err(Error::InvalidInput("first amplitude row vanishes".into()));
    }
    Ok(orthogonalize(alpha, tol))
}

/// As `gram_schmidt` but a vanishing first row is simply dependent.
pub(crate) fn orthogonalize(alpha: &DMatrix<f64>, tol: f64) -> GramSchmidt {
    let (n, m) = alpha.shape();
    let mut beta = DMatrix::zeros(n, m);
    let mut transition = DMatrix::zeros(n, n);
    let mut nonzero = vec![false; n];
    for i in 0..n {
        let a = alpha.row(i).transpose();
        let mut w = a.clone();
        let mut coef = DVector::zeros(n);
        coef[i] = 1.0;
        for j in 0..i {
            if nonzero[j] {
                let bj = beta.row(j).transpose();
                let c = bj.dot(&a);
                w.axpy(-c, &bj, 1.0);
                coef.axpy(-c, &transition.row(j).transpose(), 1.0);
            }
        }
        let norm = w.norm();
        if norm > tol {
            beta.set_row(i, &(w / norm).transpose());
            transition.set_row(i, &(coef / norm).transpose());
            nonzero[i] = true;
        }
    }
    GramSchmidt { beta, transition, nonzero }
}

/// Frame of one control vertex on one family.
#[derive(Debug, Clone, Serialize)]
pub struct BetaFrame {
    pub gamma: VertexId,
    pub family: usize,
    /// `alpha[i][k]`: amplitude at the k-th family point at the i-th time.
    pub alpha: Vec<Vec<Rational>>,
    #[serde(flatten)]
    pub frame: GramSchmidt,
}

impl BetaFrame {
    /// Non-zero frame vectors with their time index.
    pub fn vectors(&self) -> Vec<(usize, DVector<f64>)> {
        (0..self.frame.nonzero.len())
            .filter(|&i| self.frame.nonzero[i])
            .map(|i| (i, self.frame.beta.row(i).transpose()))
            .collect()
    }
}

fn alpha_at(g: &MetricGraph, set: &HydraSet, gamma: VertexId, fam: &Family, r: &Rational) -> Vec<Vec<Rational>> {
    let h = set.hydra(gamma).expect("gamma in control set");
    let points = fam.points_at(g, r);
    fam.tau
        .iter()
        .map(|f| {
            let t = f.eval(r);
            points.iter().map(|x| h.amplitude_at(x, &t)).collect()
        })
        .collect()
}

fn to_matrix(alpha: &[Vec<Rational>]) -> DMatrix<f64> {
    let n = alpha.len();
    let m = alpha.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, m, |i, k| alpha[i][k].to_f64())
}

/// Frames of every control vertex on one family, checked to be the same
/// at two interior parameters.
pub fn family_frames(g: &MetricGraph, set: &HydraSet, fam: &Family, tol: f64) -> Result<Vec<BetaFrame>> {
    let half = &fam.eps / &Rational::int(2);
    let quarter = &fam.eps / &Rational::int(4);
    let mut out = Vec::new();
    for gamma in set.sigma() {
        let alpha = alpha_at(g, set, gamma, fam, &half);
        let frame = orthogonalize(&to_matrix(&alpha), tol);
        let probe = orthogonalize(&to_matrix(&alpha_at(g, set, gamma, fam, &quarter)), tol);
        let drift = (&frame.beta - &probe.beta).abs().max();
        if frame.nonzero != probe.nonzero || drift > 1e-8 {
            return Err(Error::InconsistentFamily(format!(
                "frame of family {} varies along the family (drift {drift:.3e})",
                fam.id
            )));
        }
        out.push(BetaFrame { gamma, family: fam.id, alpha, frame });
    }
    Ok(out)
}

/// Frames for all families; outer index follows the families.
pub fn all_frames(g: &MetricGraph, set: &HydraSet, part: &Partition, tol: f64) -> Result<Vec<Vec<BetaFrame>>> {
    crate::par::map(&part.families, |f| family_frames(g, set, f, tol)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::partition::partition;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::frac(n, d)
    }

    #[test]
    fn three_branches() {
        let a = DMatrix::from_row_slice(3, 2, &[3.0, 4.0, 6.0, 8.0, 0.0, 1.0]);
        let gs = gram_schmidt(&a, 1e-9).unwrap();
        assert_eq!(gs.nonzero, vec![true, false, true]);
        assert!((gs.beta.row(0) - DMatrix::from_row_slice(1, 2, &[0.6, 0.8])).abs().max() < 1e-15);
        assert!(gs.beta.row(1).norm() == 0.0);
        assert!((gs.beta.row(2) - DMatrix::from_row_slice(1, 2, &[-0.8, 0.6])).abs().max() < 1e-15);
        assert!((&gs.transition * &a - &gs.beta).abs().max() < 1e-14);
        assert!(gram_schmidt(&DMatrix::from_row_slice(1, 2, &[0.0, 0.0]), 1e-9).is_err());
    }

    #[test]
    fn three_star_frames_by_hand() {
        let g = examples::unit_star();
        let set = HydraSet::build(&g, &[1], &r(3, 2)).unwrap();
        let p = partition(&g, &set).unwrap();
        let f = &family_frames(&g, &set, &p.families[1], 1e-9).unwrap()[0];
        assert_eq!(f.alpha, vec![vec![r(1, 1), r(0, 1), r(0, 1)], vec![r(-1, 3), r(2, 3), r(2, 3)]]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, s, s]);
        assert!((&f.frame.beta - want).abs().max() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn frames_are_orthonormal(seed in 0u64..5_000) {
            let inst = crate::instances::random_instance(seed, &r(5, 2));
            let g = &inst.graph;
            let set = HydraSet::build(g, &inst.sigma, &inst.horizon).unwrap();
            let p = partition(g, &set).unwrap();
            for frames in all_frames(g, &set, &p, 1e-9).unwrap() {
                for f in frames {
                    let b = &f.frame.beta;
                    let gram = b * b.transpose();
                    for i in 0..b.nrows() {
                        for j in 0..b.nrows() {
                            let want = if i == j && f.frame.nonzero[i] { 1.0 } else { 0.0 };
                            prop_assert!((gram[(i, j)] - want).abs() < 1e-9);
                        }
                    }
                    let a = to_matrix(&f.alpha);
                    prop_assert!((&f.frame.transition * &a - b).abs().max() < 1e-9);
                }
            }
        }
    }
}
