//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use errscope::ingest::{GestureLabel, GrammarGraph};
use rand::Rng;

/// Minimum cost over every monotone warping path, found by explicit
/// enumeration. Costs are added in path order, starting at (0, 0).
pub fn brute_force_dtw(la: usize, lb: usize, cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    fn walk(i: usize, j: usize, acc: f64, la: usize, lb: usize, cost: &dyn Fn(usize, usize) -> f64, best: &mut f64) {
        if i == la - 1 && j == lb - 1 {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
            let (ni, nj) = (i + di, j + dj);
            if ni < la && nj < lb {
                walk(ni, nj, acc + cost(ni, nj), la, lb, cost, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    walk(0, 0, cost(0, 0), la, lb, cost, &mut best);
    best
}

/// Row-major multivariate series as plain rows.
pub fn rows(data: &[f64], width: usize) -> Vec<Vec<f64>> {
    data.chunks(width).map(<[f64]>::to_vec).collect()
}

pub fn brute_independent(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let width = a[0].len();
    (0..width)
        .map(|c| brute_force_dtw(a.len(), b.len(), &|i, j| (a[i][c] - b[j][c]).abs()))
        .sum()
}

pub fn brute_dependent(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    brute_force_dtw(a.len(), b.len(), &|i, j| {
        a[i].iter().zip(&b[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    })
}

fn log_normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// KL(P || Q) for normals by composite Simpson quadrature of
/// p(x) (ln p(x) − ln q(x)) over ±16 σ_p around μ_p.
pub fn quadrature_kl(mu_p: f64, sigma_p: f64, mu_q: f64, sigma_q: f64) -> f64 {
    let n = 20_000;
    let (lo, hi) = (mu_p - 16.0 * sigma_p, mu_p + 16.0 * sigma_p);
    let h = (hi - lo) / n as f64;
    let f = |x: f64| {
        let lp = log_normal_pdf(x, mu_p, sigma_p);
        lp.exp() * (lp - log_normal_pdf(x, mu_q, sigma_q))
    };
    let mut sum = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + k as f64 * h);
    }
    sum * h / 3.0
}

/// Literal re-trace of the grammar check on string tokens, returning the
/// appended entries in order together with their positions.
pub fn naive_retrace(
    start: &BTreeSet<String>,
    edges: &BTreeMap<String, BTreeSet<String>>,
    vertices: &BTreeSet<String>,
    transcript: &[String],
) -> Vec<(usize, Vec<String>)> {
    let mut out = Vec::new();
    let mut val: Vec<String> = start.iter().cloned().collect();
    for i in 0..transcript.len() {
        let g = &transcript[i];
        if vertices.contains(g) {
            if !val.contains(g) {
                let prev = if i == 0 { "START".to_string() } else { transcript[i - 1].clone() };
                out.push((i, vec![prev, g.clone()]));
            }
            val = edges.get(g).map(|s| s.iter().cloned().collect()).unwrap_or_default();
        } else {
            out.push((i, vec![g.clone()]));
            val = if i + 1 < transcript.len() { vec![transcript[i + 1].clone()] } else { vec![] };
        }
    }
    out
}

/// Random grammar over G1..Gk plus a plain-string copy of it for the
/// reference re-trace.
pub struct RandomGrammar {
    pub graph: GrammarGraph,
    pub start: BTreeSet<String>,
    pub edges: BTreeMap<String, BTreeSet<String>>,
    pub vertices: BTreeSet<String>,
    pub size: u16,
}

pub fn random_grammar(rng: &mut impl Rng) -> RandomGrammar {
    let size = rng.random_range(2..=8u16);
    let density = rng.random_range(0.1..0.7);
    let mut graph = GrammarGraph::new();
    let mut start = BTreeSet::new();
    let mut edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut vertices = BTreeSet::new();
    let first = rng.random_range(1..=size);
    for g in 1..=size {
        if g == first || rng.random_bool(0.25) {
            graph.add_start(GestureLabel::g(g));
            start.insert(format!("G{g}"));
            vertices.insert(format!("G{g}"));
        }
    }
    for a in 1..=size {
        for b in 1..=size {
            if rng.random_bool(density) {
                graph.add_edge(GestureLabel::g(a), GestureLabel::g(b));
                edges.entry(format!("G{a}")).or_default().insert(format!("G{b}"));
                vertices.insert(format!("G{a}"));
                vertices.insert(format!("G{b}"));
            }
        }
    }
    RandomGrammar { graph, start, edges, vertices, size }
}

/// Transcript over the grammar's labels plus a few out-of-vocabulary ones.
pub fn random_transcript(rng: &mut impl Rng, size: u16) -> Vec<GestureLabel> {
    let len = rng.random_range(1..=15);
    (0..len)
        .map(|_| match rng.random_range(0..10) {
            0 => GestureLabel::Unrecognized("X".into()),
            _ => GestureLabel::g(rng.random_range(1..=size + 2)),
        })
        .collect()
}

pub fn strings(labels: &[GestureLabel]) -> Vec<String> {
    labels.iter().map(ToString::to_string).collect()
}
