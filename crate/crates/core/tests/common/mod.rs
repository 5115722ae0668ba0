//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the inference code under test.
#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use structal::chain::{ChainScores, ConstraintMask};
use structal::tree::{ArcScores, HeadConstraint};

pub mod ie_fixtures;

pub fn random_chain(rng: &mut ChaCha8Rng, max_n: usize, max_l: usize) -> ChainScores {
    let n = rng.gen_range(1..=max_n);
    let l = rng.gen_range(1..=max_l);
    let mut g = |shape: usize| -> Vec<f64> { (0..shape).map(|_| rng.gen_range(-2.0..2.0)).collect() };
    ChainScores::new(
        Array2::from_shape_vec((n, l), g(n * l)).unwrap(),
        Array2::from_shape_vec((l, l), g(l * l)).unwrap(),
        Array1::from(g(l)),
        Array1::from(g(l)),
    )
    .unwrap()
}

/// Random mask that leaves at least one label per position.
pub fn random_mask(rng: &mut ChaCha8Rng, n: usize, l: usize, density: f64) -> ConstraintMask {
    let mut allowed = Array2::from_elem((n, l), true);
    for i in 0..n {
        if rng.gen_bool(density) {
            for y in 0..l {
                allowed[[i, y]] = rng.gen_bool(0.5);
            }
            let keep = rng.gen_range(0..l);
            allowed[[i, keep]] = true;
        }
    }
    ConstraintMask::from_allowed(allowed).unwrap()
}

/// All label sequences of length `n` over `l` labels.
pub fn sequences(n: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..l).map(move |y| {
                    let mut p = prefix.clone();
                    p.push(y);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn path_score(s: &ChainScores, y: &[usize]) -> f64 {
    let mut total = s.start[y[0]] + s.end[y[y.len() - 1]];
    for i in 0..y.len() {
        total += s.emissions[[i, y[i]]];
        if i > 0 {
            total += s.transitions[[y[i - 1], y[i]]];
        }
    }
    total
}

fn consistent(mask: Option<&ConstraintMask>, y: &[usize]) -> bool {
    mask.is_none_or(|m| y.iter().enumerate().all(|(i, &l)| m.allowed(i, l)))
}

pub fn chain_log_z(s: &ChainScores, mask: Option<&ConstraintMask>) -> f64 {
    let scores: Vec<f64> = sequences(s.len(), s.n_labels())
        .iter()
        .filter(|y| consistent(mask, y))
        .map(|y| path_score(s, y))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Sequence probabilities under the (masked) distribution.
pub fn chain_distribution(s: &ChainScores, mask: Option<&ConstraintMask>) -> Vec<(Vec<usize>, f64)> {
    let log_z = chain_log_z(s, mask);
    sequences(s.len(), s.n_labels())
        .into_iter()
        .filter(|y| consistent(mask, y))
        .map(|y| {
            let p = (path_score(s, &y) - log_z).exp();
            (y, p)
        })
        .collect()
}

pub fn chain_marginals(s: &ChainScores, mask: Option<&ConstraintMask>) -> (Array2<f64>, Array3<f64>) {
    let (n, l) = (s.len(), s.n_labels());
    let mut unary = Array2::zeros((n, l));
    let mut pairwise = Array3::zeros((n.saturating_sub(1), l, l));
    for (y, p) in chain_distribution(s, mask) {
        for i in 0..n {
            unary[[i, y[i]]] += p;
            if i + 1 < n {
                pairwise[[i, y[i], y[i + 1]]] += p;
            }
        }
    }
    (unary, pairwise)
}

/// `-Σ_y p_teacher(y) log p_student(y)` with the teacher given as an
/// explicit distribution.
pub fn chain_cross_entropy(teacher: &[(Vec<usize>, f64)], student: &ChainScores) -> f64 {
    let log_z = chain_log_z(student, None);
    -teacher
        .iter()
        .map(|(y, p)| p * (path_score(student, y) - log_z))
        .sum::<f64>()
}

pub fn chain_argmax(s: &ChainScores, mask: Option<&ConstraintMask>) -> Vec<usize> {
    sequences(s.len(), s.n_labels())
        .into_iter()
        .filter(|y| consistent(mask, y))
        .fold((vec![], f64::NEG_INFINITY), |best, y| {
            let v = path_score(s, &y);
            if v > best.1 {
                (y, v)
            } else {
                best
            }
        })
        .0
}

pub fn random_arcs(rng: &mut ChaCha8Rng, max_n: usize) -> ArcScores {
    let n = rng.gen_range(1..=max_n);
    let data = (0..(n + 1) * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    ArcScores::new(Array2::from_shape_vec((n + 1, n), data).unwrap()).unwrap()
}

/// Random constraint that keeps the witness tree feasible. Each chosen
/// token either gets its head fixed or keeps a random subset of heads
/// that includes the witness head.
pub fn random_head_constraint(rng: &mut ChaCha8Rng, witness: &[usize], density: f64) -> HeadConstraint {
    let n = witness.len();
    let mut allowed = Array2::from_elem((n + 1, n), true);
    for m in 1..=n {
        if rng.gen_bool(density) {
            let fixed = rng.gen_bool(0.5);
            for h in 0..=n {
                allowed[[h, m - 1]] = !fixed && rng.gen_bool(0.5);
            }
            allowed[[witness[m - 1], m - 1]] = true;
        }
    }
    HeadConstraint::from_allowed(allowed).unwrap()
}

/// A uniformly chosen tree over `n` tokens, from the enumeration.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let all = trees(n);
    all[rng.gen_range(0..all.len())].clone()
}

/// All head vectors (1-based heads, 0 = root) forming arborescences.
pub fn trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut heads = vec![0usize; n];
    fn rec(j: usize, n: usize, heads: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if j == n {
            if is_tree(heads) {
                out.push(heads.clone());
            }
            return;
        }
        for h in 0..=n {
            if h != j + 1 {
                heads[j] = h;
                rec(j + 1, n, heads, out);
            }
        }
    }
    rec(0, n, &mut heads, &mut out);
    out
}

pub fn is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    (1..=n).all(|start| {
        let mut v = start;
        for _ in 0..=n {
            if v == 0 {
                return true;
            }
            v = heads[v - 1];
        }
        false
    })
}

pub fn tree_score(a: &ArcScores, heads: &[usize]) -> f64 {
    heads.iter().enumerate().map(|(j, &h)| a.get(h, j + 1)).sum()
}

fn tree_consistent(c: Option<&HeadConstraint>, heads: &[usize]) -> bool {
    c.is_none_or(|c| heads.iter().enumerate().all(|(j, &h)| c.allowed(h, j + 1)))
}

pub fn tree_distribution(a: &ArcScores, c: Option<&HeadConstraint>) -> Vec<(Vec<usize>, f64)> {
    let all: Vec<(Vec<usize>, f64)> = trees(a.len())
        .into_iter()
        .filter(|t| tree_consistent(c, t))
        .map(|t| {
            let s = tree_score(a, &t);
            (t, s)
        })
        .collect();
    let max = all.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + all.iter().map(|x| (x.1 - max).exp()).sum::<f64>().ln();
    all.into_iter().map(|(t, s)| (t, (s - log_z).exp())).collect()
}

pub fn tree_log_z(a: &ArcScores, c: Option<&HeadConstraint>) -> f64 {
    let scores: Vec<f64> = trees(a.len())
        .into_iter()
        .filter(|t| tree_consistent(c, t))
        .map(|t| tree_score(a, &t))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn tree_marginals(a: &ArcScores, c: Option<&HeadConstraint>) -> Array2<f64> {
    let n = a.len();
    let mut m = Array2::zeros((n + 1, n));
    for (t, p) in tree_distribution(a, c) {
        for (j, &h) in t.iter().enumerate() {
            m[[h, j]] += p;
        }
    }
    m
}

pub fn tree_cross_entropy(teacher: &[(Vec<usize>, f64)], student: &ArcScores) -> f64 {
    let log_z = tree_log_z(student, None);
    -teacher
        .iter()
        .map(|(t, p)| p * (tree_score(student, t) - log_z))
        .sum::<f64>()
}

pub fn tree_argmax(a: &ArcScores, c: Option<&HeadConstraint>) -> Vec<usize> {
    trees(a.len())
        .into_iter()
        .filter(|t| tree_consistent(c, t))
        .fold((vec![], f64::NEG_INFINITY), |best, t| {
            let v = tree_score(a, &t);
            if v > best.1 {
                (t, v)
            } else {
                best
            }
        })
        .0
}

/// Maximum relative error between an analytic gradient and central
/// differences of `f`, over every coordinate of a flat parameter vector.
/// Relative error uses `max(|a|, |fd|, 1e-3)` in the denominator so
/// near-zero coordinates are compared absolutely.
pub fn finite_difference_error(params: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = params.to_vec();
    for i in 0..params.len() {
        if !params[i].is_finite() {
            continue;
        }
        p[i] = params[i] + eps;
        let up = f(&p);
        p[i] = params[i] - eps;
        let down = f(&p);
        p[i] = params[i];
        let fd = (up - down) / (2.0 * eps);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-3);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}

pub fn flatten_chain(s: &ChainScores) -> Vec<f64> {
    s.emissions
        .iter()
        .chain(s.transitions.iter())
        .chain(s.start.iter())
        .chain(s.end.iter())
        .copied()
        .collect()
}

pub fn unflatten_chain(template: &ChainScores, flat: &[f64]) -> ChainScores {
    let (n, l) = (template.len(), template.n_labels());
    let mut it = flat.iter().copied();
    let mut take = |k: usize| -> Vec<f64> { (&mut it).take(k).collect() };
    ChainScores::new(
        Array2::from_shape_vec((n, l), take(n * l)).unwrap(),
        Array2::from_shape_vec((l, l), take(l * l)).unwrap(),
        Array1::from(take(l)),
        Array1::from(take(l)),
    )
    .unwrap()
}
