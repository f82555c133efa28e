//! Acceptance criteria. One PASS/FAIL line per criterion; exits non-zero
//! when any criterion fails.

use std::time::{Duration, Instant};

use eikonal_core::algebra::{connection_test, Connection, Vector};
use eikonal_core::canon::{canonicalize, check_invariants, equivalent_forms, recanonicalize};
use eikonal_core::dynamics::HydraSet;
use eikonal_core::eikonal::build_pipeline;
use eikonal_core::fd::{GridSpec, DEFAULT_BUMP_WIDTH};
use eikonal_core::instances::{random_instance, random_subcritical};
use eikonal_core::partition::LinearTimeFn;
use eikonal_core::spectrum::{build_spectrum, Clusters};
use eikonal_core::verify;
use eikonal_core::{examples, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn r(n: i64, d: i64) -> Rational {
    Rational::frac(n, d)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scattering_conservation() -> Outcome {
    let mut events = 0;
    for seed in 0..1000 {
        let inst = random_instance(seed, &r(3, 1));
        let set = HydraSet::build(&inst.graph, &inst.sigma, &inst.horizon).map_err(|e| format!("seed {seed}: {e}"))?;
        let bad = verify::conservation(&inst.graph, &set);
        ensure(bad.is_empty(), || format!("seed {seed}: {}", bad[0]))?;
        events += set.hydras.iter().flat_map(|h| &h.events).filter(|e| !inst.graph.is_boundary(e.vertex)).count();
    }
    Ok(format!("{events} interior events over 1000 propagations"))
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for (label, g) in [("interval", examples::unit_interval()), ("3-star", examples::unit_star())] {
        let gamma = g.vertex_id("g1").unwrap();
        for t in [r(1, 2), r(5, 4), r(3, 2)] {
            let coarse = verify::oracle_error(&g, &[gamma], &t, &GridSpec::dyadic(10), DEFAULT_BUMP_WIDTH).map_err(|e| e.to_string())?;
            let fine = verify::oracle_error(&g, &[gamma], &t, &GridSpec::dyadic(11), DEFAULT_BUMP_WIDTH).map_err(|e| e.to_string())?;
            ensure(coarse <= 1e-2, || format!("{label}, T={t}: error {coarse:.3e} at h=2^-10"))?;
            // exact cases sit at rounding level on both grids
            ensure(fine < coarse || coarse < 1e-12, || format!("{label}, T={t}: {coarse:.3e} -> {fine:.3e} under refinement"))?;
            worst = worst.max(coarse);
        }
    }
    Ok(format!("worst relative L2 {worst:.3e} at h=2^-10"))
}

fn frame_orthonormality() -> Outcome {
    let mut families = 0;
    for seed in 0..200 {
        let inst = random_subcritical(seed);
        let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, TOL, true).map_err(|e| format!("seed {seed}: {e}"))?;
        let bad = verify::frames_full(&p);
        ensure(bad.is_empty(), || format!("seed {seed}: {}", bad[0]))?;
        families += p.frames.len();
    }
    Ok(format!("{families} families, no zero rows, |BB*-I| <= 1e-8"))
}

fn spectrum_filling() -> Outcome {
    for seed in 0..200 {
        let inst = random_subcritical(seed);
        let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, TOL, true).map_err(|e| format!("seed {seed}: {e}"))?;
        let bad = verify::spectrum_filling(&p);
        ensure(bad.is_empty(), || format!("seed {seed}, T={}: {}", inst.horizon, bad[0]))?;
    }
    Ok("200 instances fill [1, T+1] exactly".into())
}

fn eigenvalue_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..100 {
        let inst = random_instance(seed, &r(5, 2));
        let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, TOL, true).map_err(|e| format!("seed {seed}: {e}"))?;
        let bad = verify::eigenvalue_identity(&p, &mut rng, 10);
        ensure(bad.is_empty(), || format!("seed {seed}: {}", bad[0]))?;
    }
    Ok("100 instances, 10 samples per block".into())
}

fn interior_fullness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut used = 0;
    let mut largest = 0;
    for seed in 0..400 {
        let inst = random_instance(seed, &r(5, 2));
        let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, TOL, true).map_err(|e| format!("seed {seed}: {e}"))?;
        let n: usize = p.repr.families.iter().map(|f| f.dim()).sum();
        if n > 12 {
            continue;
        }
        let want = verify::expected_interior_dimension(&p, TOL);
        for _ in 0..3 {
            let got = verify::interior_word_span(&p, &mut rng, TOL);
            ensure(got == want, || format!("seed {seed}: word span {got}, sum of kappa^2 {want}"))?;
        }
        used += 1;
        largest = largest.max(want);
        if used == 60 {
            break;
        }
    }
    ensure(used >= 30, || format!("only {used} instances small enough"))?;
    Ok(format!("{used} instances, up to dimension {largest}"))
}

fn canonicalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut junctions = 0;
    for seed in 0..40 {
        let inst = random_instance(seed, &r(5, 2));
        let p = build_pipeline(&inst.graph, &inst.sigma, &inst.horizon, TOL, true).map_err(|e| format!("seed {seed}: {e}"))?;
        let cf = canonicalize(&p.repr, TOL).map_err(|e| format!("seed {seed}: {e}"))?;
        let dev = verify::norm_preservation(&p, &cf, &mut rng, 50, 32, TOL);
        ensure(dev <= 1e-8, || format!("seed {seed}: word norms differ by {dev:.3e}"))?;
        worst = worst.max(dev);
        let again = recanonicalize(&cf, TOL).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(again.junctions == cf.junctions && equivalent_forms(&cf, &again, TOL), || format!("seed {seed}: not idempotent"))?;
        let bad = check_invariants(&cf, TOL);
        ensure(bad.is_empty(), || format!("seed {seed}: {}", bad[0]))?;
        for b in &cf.blocks {
            ensure(b.terms.iter().all(|t| t.tau.slope.abs() == 1), || format!("seed {seed}: slope not +-1"))?;
        }
        junctions += cf.junctions;
    }
    Ok(format!("40 instances, {junctions} junctions, worst norm gap {worst:.1e}"))
}

fn end_to_end_goldens() -> Outcome {
    let cases = [(examples::unit_interval(), r(1, 2), r(1, 2), 0), (examples::unit_star(), r(3, 2), r(3, 2), 2)];
    for (g, t, zeta, joins) in cases {
        let gamma = g.vertex_id("g1").unwrap();
        let p = build_pipeline(&g, &[gamma], &t, TOL, true).map_err(|e| e.to_string())?;
        let cf = canonicalize(&p.repr, TOL).map_err(|e| e.to_string())?;
        ensure(cf.blocks.len() == 1, || format!("T={t}: {} blocks", cf.blocks.len()))?;
        let b = &cf.blocks[0];
        let want = LinearTimeFn { intercept: r(0, 1), slope: 1, length: zeta.clone() };
        ensure(b.zeta == zeta && b.kappa == 1, || format!("T={t}: zeta {} kappa {}", b.zeta, b.kappa))?;
        ensure(b.terms.len() == 1 && b.terms[0].tau == want && cf.shift == Rational::one(), || format!("T={t}: generator is not 1 + r"))?;
        ensure(cf.junctions == joins, || format!("T={t}: {} junctions", cf.junctions))?;
    }
    Ok("interval zeta=1/2, 3-star zeta=3/2 after 2 junctions, both 1 + r".into())
}

fn cluster_emergence() -> Outcome {
    let g = examples::unit_star();
    let sigma = g.boundary_ids(&["g1", "g2"]).unwrap();
    let sizes = |t: Rational| -> Result<Vec<usize>, String> {
        let p = build_pipeline(&g, &sigma, &t, TOL, true).map_err(|e| e.to_string())?;
        let sp = build_spectrum(&canonicalize(&p.repr, TOL).map_err(|e| e.to_string())?, TOL).map_err(|e| e.to_string())?;
        sp.blocks
            .iter()
            .flat_map(|b| [&b.start, &b.end])
            .map(|c| match c {
                Clusters::Known(d) => Ok(d.len()),
                Clusters::Skipped { kappa } => Err(format!("boundary algebra skipped at kappa {kappa}")),
            })
            .collect()
    };
    let early = sizes(r(1, 2))?;
    ensure(early.iter().all(|&n| n == 1), || format!("T=1/2 cluster sizes {early:?}"))?;
    let late = sizes(r(5, 4))?;
    let max = late.iter().copied().max().unwrap_or(0);
    ensure(max >= 2, || format!("T=5/4 cluster sizes {late:?}"))?;
    Ok(format!("T=1/2 sizes {early:?}; T=5/4 sizes {late:?}"))
}

fn connection_ground_truths() -> Outcome {
    let v = |xs: &[f64]| Vector::from_column_slice(xs);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let verdict = |a: &[Vector], b: &[Vector], pairing: &[usize]| -> Result<(bool, bool), String> {
        let fwd = connection_test(a, b, pairing, TOL).map_err(|e| e.to_string())?;
        let mut inv = vec![0; pairing.len()];
        for (i, &j) in pairing.iter().enumerate() {
            inv[j] = i;
        }
        let back = connection_test(b, a, &inv, TOL).map_err(|e| e.to_string())?;
        Ok((fwd.is_connected(), back.is_connected()))
    };
    let ident = [v(&[1.0, 0.0, 0.0]), v(&[s, s, 0.0]), v(&[0.0, 0.6, 0.8])];
    match connection_test(&ident, &ident, &[0, 1, 2], TOL).map_err(|e| e.to_string())? {
        Connection::Connected(iso) => {
            let dev = (iso.map - nalgebra::DMatrix::identity(3, 3)).abs().max();
            ensure(dev < 1e-9, || format!("identity witness off by {dev:.3e}"))?;
        }
        Connection::Separated(why) => return Err(format!("identical classes separated: {why}")),
    }
    ensure(verdict(&ident, &ident, &[0, 1, 2])? == (true, true), || "identity verdict not symmetric".into())?;
    let p1 = [v(&[1.0, 0.0]), v(&[s, s])];
    let p2 = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
    ensure(verdict(&p1, &p2, &[0, 1])? == (false, false), || "mismatched Gram pair not separated both ways".into())?;
    let q1 = [v(&[0.0, 1.0, 0.0])];
    let q2 = [v(&[0.6, 0.0, -0.8, 0.0])];
    ensure(verdict(&q1, &q2, &[0])? == (true, true), || "kappa=1 pair not connected both ways".into())?;
    Ok("identity connected, Gram mismatch separated, kappa=1 connected; symmetric".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("scattering conservation", scattering_conservation, Duration::from_secs(10)),
        ("oracle equivalence", oracle_equivalence, Duration::from_secs(60)),
        ("frame orthonormality", frame_orthonormality, Duration::from_secs(60)),
        ("spectrum filling", spectrum_filling, Duration::from_secs(60)),
        ("eigenvalue identity", eigenvalue_identity, Duration::from_secs(60)),
        ("interior fullness", interior_fullness, Duration::from_secs(60)),
        ("canonicalization correctness", canonicalization, Duration::from_secs(120)),
        ("end-to-end goldens", end_to_end_goldens, Duration::from_secs(10)),
        ("cluster emergence", cluster_emergence, Duration::from_secs(30)),
        ("connection ground truths", connection_ground_truths, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = outcome.and_then(|msg| if took <= limit { Ok(msg) } else { Err(format!("{msg}; took longer than {limit:?}")) });
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} ({took:.2?})", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} ({took:.2?})", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
