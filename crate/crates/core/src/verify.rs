//! Invariant checks over a full pipeline run. Each check returns the list
//! of violations; an empty list means the check passed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::algebra::{equivalence_classes, operator_norm, orthonormal_basis, word_product, word_span_dimension, Matrix};
use crate::canon::{canonicalize, check_invariants, equivalent_forms, recanonicalize, CanonicalForm};
use crate::dynamics::HydraSet;
use crate::eikonal::{build_pipeline, Pipeline};
use crate::error::Result;
use crate::fd::{compare_snapshots, fd_wave, sample_wave, ControlSignal, GridSpec};
use crate::graph::{MetricGraph, VertexId};
use crate::rational::Rational;

/// Rule-based check of every scattering event at an interior vertex:
/// outgoing on port `q` is `sum_p in_p (2/mu - [p = q])`, and the total
/// outgoing equals the total incoming.
pub fn conservation(g: &MetricGraph, set: &HydraSet) -> Vec<String> {
    let mut bad = Vec::new();
    for h in &set.hydras {
        for ev in &h.events {
            if g.is_boundary(ev.vertex) {
                continue;
            }
            let mu = Rational::int(g.ports(ev.vertex).len() as i64);
            let total_in: Rational = ev.incoming.iter().map(|(_, a)| a.clone()).sum();
            let total_out: Rational = ev.outgoing.iter().map(|(_, a)| a.clone()).sum();
            if total_in != total_out {
                bad.push(format!("{} at t={}: in {total_in}, out {total_out}", g.vertex(ev.vertex).name, ev.time));
            }
            let two_over_mu = &Rational::int(2) / &mu;
            for (q, a) in &ev.outgoing {
                let want: Rational = ev
                    .incoming
                    .iter()
                    .map(|(p, b)| if p == q { b * &(&two_over_mu - &Rational::one()) } else { b * &two_over_mu })
                    .sum();
                if &want != a {
                    bad.push(format!("{} at t={}: port amplitude {a}, rule gives {want}", g.vertex(ev.vertex).name, ev.time));
                }
            }
        }
    }
    bad
}

/// No zero frame rows and orthonormal frames; meant for `T < T_gamma`.
pub fn frames_full(p: &Pipeline) -> Vec<String> {
    let mut bad = Vec::new();
    for frames in &p.frames {
        for f in frames {
            if f.frame.nonzero.iter().any(|nz| !nz) {
                bad.push(format!("family {}: zero frame row", f.family));
            }
            let b = &f.frame.beta;
            let n = b.nrows();
            let dev = (b * b.transpose() - DMatrix::identity(n, n)).abs().max();
            if dev > 1e-8 {
                bad.push(format!("family {}: |BB* - I| = {dev:.3e}", f.family));
            }
        }
    }
    bad
}

/// Spectrum of each control fills `[1, T + 1]`; meant for `T < T_gamma`.
pub fn spectrum_filling(p: &Pipeline) -> Vec<String> {
    let want = vec![(Rational::one(), &p.repr.horizon + &Rational::one())];
    let mut bad = Vec::new();
    for &gamma in &p.repr.sigma {
        match p.repr.sigma_ac(gamma) {
            Ok(got) if got == want => {}
            Ok(got) => bad.push(format!("control #{gamma}: spectrum {got:?}")),
            Err(e) => bad.push(e.to_string()),
        }
    }
    bad
}

fn interior_param<R: Rng>(rng: &mut R, eps: f64) -> f64 {
    eps * rng.gen_range(0.01..0.99)
}

/// Eigenvalues of each block on the span of its projectors are the
/// shifted time values.
pub fn eigenvalue_identity<R: Rng>(p: &Pipeline, rng: &mut R, samples: usize) -> Vec<String> {
    let mut bad = Vec::new();
    let shift = p.repr.shift.to_f64();
    for (k, f) in p.repr.families.iter().enumerate() {
        for (&gamma, terms) in &f.terms {
            if terms.is_empty() {
                continue;
            }
            let vs: Vec<_> = terms.iter().map(|t| t.beta.clone()).collect();
            let q = Matrix::from_columns(&orthonormal_basis(&vs, 1e-9));
            for _ in 0..samples {
                let r = interior_param(rng, f.eps.to_f64());
                let e = p.repr.eikonal_block(k, gamma, r).expect("family and control exist");
                let mut got: Vec<f64> = SymmetricEigen::new(q.transpose() * e * &q).eigenvalues.iter().copied().collect();
                let mut want: Vec<f64> = terms.iter().map(|t| t.tau.eval_f64(r) + shift).collect();
                got.sort_by(f64::total_cmp);
                want.sort_by(f64::total_cmp);
                let dev = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if got.len() != want.len() || dev > 1e-8 {
                    bad.push(format!("family {k}, control #{gamma}, r={r}: eigenvalues off by {dev:.3e}"));
                }
            }
        }
    }
    bad
}

/// Sum of squared class ranks over all families.
pub fn expected_interior_dimension(p: &Pipeline, tol: f64) -> usize {
    p.repr
        .families
        .iter()
        .map(|f| {
            let vs: Vec<_> = f.terms.values().flatten().map(|t| t.beta.clone()).collect();
            equivalence_classes(&vs, tol).iter().map(|c| c.kappa * c.kappa).sum::<usize>()
        })
        .sum()
}

/// Word span of the generators at a random interior tuple, as one
/// block-diagonal matrix per control.
pub fn interior_word_span<R: Rng>(p: &Pipeline, rng: &mut R, tol: f64) -> usize {
    let r: Vec<f64> = p.repr.families.iter().map(|f| interior_param(rng, f.eps.to_f64())).collect();
    let blocks = p.repr.evaluate_at(&r).expect("tuple has one entry per family");
    let n: usize = p.repr.families.iter().map(|f| f.dim()).sum();
    let gens: Vec<Matrix> = blocks
        .values()
        .map(|bs| {
            let mut m = Matrix::zeros(n, n);
            let mut at = 0;
            for b in bs {
                m.view_mut((at, at), b.shape()).copy_from(b);
                at += b.nrows();
            }
            m
        })
        .collect();
    word_span_dimension(&gens, None, tol)
}

fn random_words<R: Rng>(rng: &mut R, count: usize, letters: usize) -> Vec<Vec<usize>> {
    (0..count).map(|_| (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..letters)).collect()).collect()
}

/// Largest difference, over random words and sampled family parameters,
/// between the word norm on a class block and on the canonical block
/// carrying it.
pub fn norm_preservation<R: Rng>(p: &Pipeline, cf: &CanonicalForm, rng: &mut R, words: usize, tuples: usize, tol: f64) -> f64 {
    let sigma: &[VertexId] = &p.repr.sigma;
    let ws = random_words(rng, words, sigma.len());
    let shift = cf.shift.to_f64();
    let mut worst: f64 = 0.0;
    for _ in 0..tuples {
        let r: Vec<f64> = p.repr.families.iter().map(|f| interior_param(rng, f.eps.to_f64())).collect();
        for w in &ws {
            let mut pre: f64 = 0.0;
            let mut post: f64 = 0.0;
            for (k, f) in p.repr.families.iter().enumerate() {
                let terms: Vec<_> = sigma.iter().flat_map(|g| f.terms.get(g).into_iter().flatten()).collect();
                let vs: Vec<_> = terms.iter().map(|t| t.beta.clone()).collect();
                let gens: Vec<Matrix> = sigma.iter().map(|&g| p.repr.eikonal_block(k, g, r[k]).expect("in range")).collect();
                for (c, class) in equivalence_classes(&vs, tol).iter().enumerate() {
                    let members: Vec<_> = class.members.iter().map(|&i| vs[i].clone()).collect();
                    let q = Matrix::from_columns(&orthonormal_basis(&members, tol));
                    let restricted: Vec<Matrix> = gens.iter().map(|g| q.transpose() * g * &q).collect();
                    pre = pre.max(operator_norm(&word_product(&restricted, w)));
                    let Some((b, piece)) = cf.blocks.iter().find_map(|b| b.pieces.iter().find(|pc| pc.family == k && pc.class == c).map(|pc| (b, pc))) else {
                        return f64::INFINITY;
                    };
                    let s = piece.block_param(r[k]);
                    let cg: Vec<Matrix> = sigma.iter().map(|&g| b.generator(g, s, shift)).collect();
                    post = post.max(operator_norm(&word_product(&cg, w)));
                }
            }
            worst = worst.max((pre - post).abs());
        }
    }
    worst
}

/// Relative L2 distance between the finite-difference wave and the
/// impulse sum for a bump control at every control vertex.
pub fn oracle_error(g: &MetricGraph, sigma: &[VertexId], horizon: &Rational, grid: &GridSpec, width: f64) -> Result<f64> {
    let set = HydraSet::build(g, sigma, horizon)?;
    let controls: Vec<_> = sigma.iter().map(|&s| ControlSignal::bump(s, width)).collect();
    let fd = fd_wave(g, &controls, horizon, grid)?;
    let ev = sample_wave(g, &set, &controls, grid)?;
    compare_snapshots(&ev, &fd)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &'static str, detail: Vec<String>) -> Check {
    Check { name, passed: detail.is_empty(), detail }
}

/// The invariant suite for one instance. Checks that only hold below the
/// first return time are skipped above it.
pub fn verify_instance(g: &MetricGraph, sigma: &[VertexId], horizon: &Rational, tol: f64, seed: u64) -> Result<Report> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let p = build_pipeline(g, sigma, horizon, tol, true)?;
    let cf = canonicalize(&p.repr, tol)?;
    let mut checks = vec![
        check("scattering conservation", conservation(g, &p.hydras)),
        check("eigenvalue identity", eigenvalue_identity(&p, &mut rng, 10)),
    ];
    let subcritical = sigma.iter().all(|&s| horizon < &g.eccentricity(s));
    if sigma.len() == 1 && subcritical {
        checks.push(check("frame orthonormality", frames_full(&p)));
        checks.push(check("spectrum filling", spectrum_filling(&p)));
    }
    let n: usize = p.repr.families.iter().map(|f| f.dim()).sum();
    if n <= 12 {
        let want = expected_interior_dimension(&p, tol);
        let got = interior_word_span(&p, &mut rng, tol);
        let detail = if got == want { vec![] } else { vec![format!("word span {got}, expected {want}")] };
        checks.push(check("interior fullness", detail));
    }
    checks.push(check("canonical invariants", check_invariants(&cf, tol)));
    let again = recanonicalize(&cf, tol)?;
    let idem = if again.junctions == cf.junctions && equivalent_forms(&cf, &again, tol) { vec![] } else { vec!["second pass changed the form".into()] };
    checks.push(check("idempotence", idem));
    let dev = norm_preservation(&p, &cf, &mut rng, 50, 32, tol);
    checks.push(check("norm preservation", if dev <= 1e-8 { vec![] } else { vec![format!("word norms differ by {dev:.3e}")] }));
    Ok(Report { checks })
}
