//! Finite-dimensional algebra of projector families: equivalence classes,
//! Gram matrices, subspace angles, isomorphism tests, word spans and the
//! central decomposition of a generated algebra.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub const CLUSTER_SEED: u64 = 0x5EED;

pub fn projector(v: &Vector) -> Matrix {
    v * v.transpose()
}

/// Modified Gram-Schmidt; drops vectors whose residual is at most `tol`.
pub fn orthonormal_basis(vectors: &[Vector], tol: f64) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let n = w.norm();
        if n > tol {
            basis.push(w / n);
        }
    }
    basis
}

fn columns(vectors: &[Vector]) -> Matrix {
    let rows = vectors.first().map_or(0, |v| v.len());
    Matrix::from_columns(vectors).resize(rows, vectors.len(), 0.0)
}

/// Rank with singular values below `tol * sigma_max` treated as zero.
pub fn numerical_rank(vectors: &[Vector], tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let sv = columns(vectors).singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * top).count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub members: Vec<usize>,
    pub kappa: usize,
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut i = i;
    while parent[i] != r {
        let next = parent[i];
        parent[i] = r;
        i = next;
    }
    r
}

/// Transitive closure of "not orthogonal". Classes are ordered by their
/// smallest member; members ascend.
pub fn equivalence_classes(vectors: &[Vector], tol: f64) -> Vec<EquivalenceClass> {
    let n = vectors.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if vectors[i].dot(&vectors[j]).abs() > tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups
        .into_values()
        .map(|members| {
            let vs: Vec<Vector> = members.iter().map(|&i| vectors[i].clone()).collect();
            EquivalenceClass { kappa: numerical_rank(&vs, tol), members }
        })
        .collect()
}

/// `G_ij = |<v_i, v_j>|`.
pub fn gram_matrix(vectors: &[Vector]) -> Matrix {
    let n = vectors.len();
    Matrix::from_fn(n, n, |i, j| vectors[i].dot(&vectors[j]).abs())
}

/// `||P_L P_M||` for the spans of two vector lists.
pub fn subspace_cosine(l: &[Vector], m: &[Vector], tol: f64) -> Result<f64> {
    let ql = orthonormal_basis(l, tol);
    let qm = orthonormal_basis(m, tol);
    if ql.is_empty() || qm.is_empty() {
        return Err(Error::InvalidInput("angle with a zero subspace".into()));
    }
    let c = columns(&ql).transpose() * columns(&qm);
    Ok(c.singular_values().max().min(1.0))
}

/// `arccos ||P_L P_M||`.
pub fn subspace_angle(l: &[Vector], m: &[Vector], tol: f64) -> Result<f64> {
    Ok(subspace_cosine(l, m, tol)?.acos())
}

/// Cosines of the angle invariants of an ordered projector family:
/// `single[i]` against the span of all earlier lines (0 for the first),
/// `pairs[(i, j)]` between two lines, `triples[(i, j, l)]` between the
/// plane of `i < j` and line `l`.
#[derive(Debug, Clone)]
pub struct AngleInvariants {
    pub single: Vec<f64>,
    pub pairs: Matrix,
    pub triples: BTreeMap<(usize, usize, usize), f64>,
}

impl AngleInvariants {
    pub fn single_angles(&self) -> Vec<f64> {
        self.single.iter().map(|c| c.acos()).collect()
    }

    /// Largest difference between corresponding cosines.
    pub fn distance(&self, other: &AngleInvariants) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.single.iter().zip(&other.single) {
            d = d.max((a - b).abs());
        }
        d = d.max((&self.pairs - &other.pairs).abs().max());
        for (k, a) in &self.triples {
            d = d.max((a - other.triples.get(k).copied().unwrap_or(f64::NAN)).abs());
        }
        if d.is_nan() {
            f64::INFINITY
        } else {
            d
        }
    }
}

pub fn angle_invariants(vectors: &[Vector], tol: f64) -> Result<AngleInvariants> {
    let n = vectors.len();
    if vectors.iter().any(|v| v.norm() <= tol) {
        return Err(Error::InvalidInput("zero vector in projector family".into()));
    }
    let mut single = vec![0.0];
    for i in 1..n {
        single.push(subspace_cosine(&vectors[i..=i], &vectors[..i], tol)?);
    }
    single.truncate(n);
    let pairs = Matrix::from_fn(n, n, |i, j| {
        let (a, b) = (&vectors[i], &vectors[j]);
        (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0)
    });
    let mut triples = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let plane = [vectors[i].clone(), vectors[j].clone()];
            for l in 0..n {
                if l != i && l != j {
                    triples.insert((i, j, l), subspace_cosine(&plane, &vectors[l..=l], tol)?);
                }
            }
        }
    }
    Ok(AngleInvariants { single, pairs, triples })
}

/// Orthogonal map between two spans, carrying each projector of the first
/// family onto its partner in the second.
#[derive(Debug, Clone)]
pub struct Isomorphism {
    pub map: Matrix,
    pub signs: Vec<f64>,
}

impl Isomorphism {
    pub fn apply(&self, a: &Matrix) -> Matrix {
        &self.map * a * self.map.transpose()
    }

    pub fn apply_vector(&self, v: &Vector) -> Vector {
        &self.map * v
    }

    pub fn identity(m: usize) -> Isomorphism {
        Isomorphism { map: Matrix::identity(m, m), signs: vec![] }
    }
}

#[derive(Debug, Clone)]
pub enum Connection {
    Connected(Isomorphism),
    Separated(String),
}

impl Connection {
    pub fn is_connected(&self) -> bool {
        matches!(self, Connection::Connected(_))
    }
}

/// Decides whether two ordered projector families are isomorphic under
/// `pairing[i]` (index in `p2` of the partner of `p1[i]`).
pub fn connection_test(p1: &[Vector], p2: &[Vector], pairing: &[usize], tol: f64) -> Result<Connection> {
    if pairing.len() != p1.len() {
        return Err(Error::InvalidInput("pairing is not total".into()));
    }
    let mut hit = vec![false; p2.len()];
    for &k in pairing {
        if k >= p2.len() || hit[k] {
            return Err(Error::InvalidInput("pairing is not injective".into()));
        }
        hit[k] = true;
    }
    if p1.len() != p2.len() {
        return Ok(Connection::Separated("pairing is not a bijection".into()));
    }
    let q: Vec<Vector> = pairing.iter().map(|&k| p2[k].clone()).collect();
    let g1 = gram_matrix(p1);
    let g2 = gram_matrix(&q);
    let dg = (&g1 - &g2).abs().max();
    if dg > tol {
        return Ok(Connection::Separated(format!("Gram matrices differ by {dg:.3e}")));
    }
    let a1 = angle_invariants(p1, tol)?;
    let a2 = angle_invariants(&q, tol)?;
    let da = a1.distance(&a2);
    if da > tol {
        return Ok(Connection::Separated(format!("angle invariants differ by {da:.3e}")));
    }
    match witness(p1, &q, tol) {
        Some(iso) => Ok(Connection::Connected(iso)),
        None => Ok(Connection::Separated("invariants agree but no orthogonal witness exists".into())),
    }
}

fn witness(p1: &[Vector], q: &[Vector], tol: f64) -> Option<Isomorphism> {
    let n = p1.len();
    // Signs along a maximum-overlap spanning forest, so that every sign is
    // read off a well-conditioned inner product.
    let mut signs = vec![0.0; n];
    let mut best = vec![(0.0f64, usize::MAX); n];
    for root in 0..n {
        if signs[root] != 0.0 {
            continue;
        }
        signs[root] = 1.0;
        let mut last = root;
        loop {
            for j in 0..n {
                let a = p1[last].dot(&p1[j]);
                if signs[j] == 0.0 && a.abs() > best[j].0 {
                    best[j] = (a.abs(), last);
                }
            }
            let next = (0..n).filter(|&j| signs[j] == 0.0 && best[j].0 > tol).max_by(|&x, &y| best[x].0.total_cmp(&best[y].0));
            let Some(j) = next else { break };
            let i = best[j].1;
            signs[j] = signs[i] * p1[i].dot(&p1[j]).signum() * q[i].dot(&q[j]).signum();
            last = j;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let a = p1[i].dot(&p1[j]);
            let b = signs[i] * signs[j] * q[i].dot(&q[j]);
            if (a - b).abs() > tol.max(1e-12) * 10.0 {
                return None;
            }
        }
    }
    let a1 = columns(p1);
    let a2 = Matrix::from_fn(q[0].len(), n, |r, c| signs[c] * q[c][r]);
    // Orthogonal Procrustes between the two spans.
    let q1 = columns(&orthonormal_basis(p1, tol));
    let q2 = columns(&orthonormal_basis(q, tol));
    if q1.ncols() != q2.ncols() {
        return None;
    }
    let c = (q2.transpose() * &a2) * (q1.transpose() * &a1).transpose();
    let svd = c.svd(true, true);
    let map = q2 * (svd.u? * svd.v_t?) * q1.transpose();
    let err = (&map * &a1 - &a2).abs().max();
    (err <= 1e-7).then_some(Isomorphism { map, signs })
}

/// Orthonormal basis of a class span and the class vectors in it.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub basis: Matrix,
    pub vectors: Vec<Vector>,
}

pub fn irreducible_reduction(vectors: &[Vector], tol: f64) -> Result<Reduction> {
    let q = orthonormal_basis(vectors, tol);
    if q.is_empty() {
        return Err(Error::InvalidInput("reduction of a zero class".into()));
    }
    let basis = columns(&q);
    let reduced = vectors.iter().map(|v| basis.transpose() * v).collect();
    Ok(Reduction { basis, vectors: reduced })
}

pub fn operator_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Product of generators along a word.
pub fn word_product(gens: &[Matrix], word: &[usize]) -> Matrix {
    let n = gens[0].nrows();
    let mut out = Matrix::identity(n, n);
    for &k in word {
        out = &out * &gens[k];
    }
    out
}

/// Frobenius-orthonormal basis of the span of all words of length at most
/// `max_len` (unbounded for `None`) in the generators.
pub fn algebra_basis(gens: &[Matrix], max_len: Option<usize>, tol: f64) -> Vec<Matrix> {
    let mut basis: Vec<Matrix> = Vec::new();
    // residuals are measured against the size of the factors, so tiny
    // products that cancel numerically are not promoted to new directions
    let add = |c: Matrix, scale: f64, basis: &mut Vec<Matrix>| -> Option<Matrix> {
        let mut w = c;
        for _ in 0..2 {
            for b in basis.iter() {
                let k = b.dot(&w);
                w -= b * k;
            }
        }
        let r = w.norm();
        if r > tol * scale.max(1e-300) {
            let w = w / r;
            basis.push(w.clone());
            Some(w)
        } else {
            None
        }
    };
    let mut frontier: Vec<Matrix> = gens.iter().filter_map(|g| add(g.clone(), g.norm(), &mut basis)).collect();
    let mut len = 1;
    while !frontier.is_empty() && max_len.is_none_or(|m| len < m) {
        let mut next = Vec::new();
        for f in &frontier {
            for g in gens {
                if let Some(w) = add(f * g, g.norm(), &mut basis) {
                    next.push(w);
                }
            }
        }
        frontier = next;
        len += 1;
    }
    basis
}

pub fn word_span_dimension(gens: &[Matrix], max_len: Option<usize>, tol: f64) -> usize {
    algebra_basis(gens, max_len, tol).len()
}

/// Null space of `m`, singular values below `tol * sigma_max` count as zero.
fn null_space(m: &Matrix, tol: f64) -> Vec<Vector> {
    let cols = m.ncols();
    if cols == 0 {
        return vec![];
    }
    let padded;
    let m = if m.nrows() < cols {
        padded = m.clone().resize(cols, cols, 0.0);
        &padded
    } else {
        m
    };
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.max().max(1e-300);
    (0..cols)
        .filter(|&i| svd.singular_values[i] <= tol * top)
        .map(|i| v_t.row(i).transpose())
        .collect()
}

/// Minimal central projections of the algebra generated by `gens`, with
/// the dimension `d` of each simple summand `M^d`.
pub fn central_decomposition(gens: &[Matrix], tol: f64, seed: u64) -> Result<Vec<(Matrix, usize)>> {
    let basis = algebra_basis(gens, None, tol);
    if basis.is_empty() {
        return Ok(vec![]);
    }
    let n = gens[0].nrows();
    // coefficients c with sum c_j [B_j, G] = 0 for every generator
    let rows = n * n * gens.len();
    let mut sys = Matrix::zeros(rows, basis.len());
    for (j, b) in basis.iter().enumerate() {
        for (k, g) in gens.iter().enumerate() {
            let comm = b * g - g * b;
            for (idx, v) in comm.iter().enumerate() {
                sys[(k * n * n + idx, j)] = *v;
            }
        }
    }
    let centre: Vec<Matrix> = null_space(&sys, tol.max(1e-12) * 10.0)
        .into_iter()
        .map(|c| basis.iter().zip(c.iter()).fold(Matrix::zeros(n, n), |acc, (b, w)| acc + b * *w))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Matrix::zeros(n, n);
    for c in &centre {
        z += c * rng.gen_range(1.0..2.0);
    }
    let z = (&z + z.transpose()) * 0.5;
    let eig = SymmetricEigen::new(z);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(gr) if (eig.eigenvalues[i] - eig.eigenvalues[*gr.last().unwrap()]).abs() <= 1e-6 * scale => gr.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut out = Vec::new();
    for gr in groups {
        let vs: Vec<Vector> = gr.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        let e = columns(&vs) * columns(&vs).transpose();
        // keep eigenprojections lying in the algebra; the rest is its kernel
        let mut resid = e.clone();
        for b in &basis {
            let k = b.dot(&resid);
            resid -= b * k;
        }
        if resid.norm() > 1e-6 * e.norm() {
            let killed = basis.iter().all(|b| (&e * b).norm() <= 1e-6);
            if killed {
                continue;
            }
            return Err(Error::Numerical("eigenprojection of a central element is not central".into()));
        }
        let corner: Vec<Matrix> = basis.iter().map(|b| &e * b * &e).collect();
        let d2 = algebra_basis(&corner, Some(1), 1e-8).len();
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 {
            return Err(Error::Numerical(format!("summand of dimension {d2} is not a full matrix algebra")));
        }
        out.push((e, d));
    }
    Ok(out)
}
