//! Brute-force reference implementations of the centrality features.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stargaze::Graph;

pub const UNREACHABLE: usize = usize::MAX;

pub fn distances(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut d = vec![vec![UNREACHABLE; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = 0;
    }
    for &(u, v) in g.edges() {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != UNREACHABLE && d[k][j] != UNREACHABLE && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Every shortest s-t path as a node sequence.
pub fn shortest_paths(g: &Graph, d: &[Vec<usize>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn extend(
        g: &Graph,
        d: &[Vec<usize>],
        t: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let last = *path.last().unwrap();
        if last == t {
            out.push(path.clone());
            return;
        }
        for &next in g.neighbors(last) {
            if d[next][t] != UNREACHABLE && d[next][t] + 1 == d[last][t] {
                path.push(next);
                extend(g, d, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    if d[s][t] != UNREACHABLE {
        extend(g, d, t, &mut vec![s], &mut out);
    }
    out
}

pub fn brute_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let d = distances(g);
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let paths = shortest_paths(g, &d, s, t);
            if paths.is_empty() {
                continue;
            }
            for (v, slot) in bc.iter_mut().enumerate() {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count();
                *slot += through as f64 / paths.len() as f64;
            }
        }
    }
    if n < 3 {
        return vec![0.0; n];
    }
    let scale = ((n - 1) * (n - 2)) as f64 / 2.0;
    bc.iter().map(|b| b / scale).collect()
}

pub fn brute_closeness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let d = distances(g);
    (0..n)
        .map(|u| {
            let reach: Vec<usize> = d[u].iter().copied().filter(|&x| x != UNREACHABLE).collect();
            let r = reach.len() as f64;
            let total: usize = reach.iter().sum();
            if total == 0 || n < 2 {
                0.0
            } else {
                ((r - 1.0) / (n as f64 - 1.0)) * ((r - 1.0) / total as f64)
            }
        })
        .collect()
}

pub fn brute_clustering(g: &Graph) -> Vec<f64> {
    (0..g.node_count())
        .map(|u| {
            let nb = g.neighbors(u);
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0;
            for i in 0..k {
                for j in i + 1..k {
                    if g.has_edge(nb[i], nb[j]) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

pub fn connected(g: &Graph) -> bool {
    distances(g)
        .first()
        .is_none_or(|row| row.iter().all(|&x| x != UNREACHABLE))
}

pub fn graph_from_mask(n: usize, mask: u32) -> Graph {
    let mut pairs = Vec::new();
    let mut bit = 0;
    for u in 0..n {
        for v in u + 1..n {
            if mask >> bit & 1 == 1 {
                pairs.push((u, v));
            }
            bit += 1;
        }
    }
    Graph::from_edges(n, &pairs).unwrap()
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> Graph {
    let n = rng.random_range(1..=max_nodes);
    let p = rng.random_range(0.05..0.95);
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &pairs).unwrap()
}

pub fn max_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Solves the PageRank fixed point directly, dangling mass spread uniformly.
pub fn dense_pagerank(g: &Graph, d: f64) -> Vec<f64> {
    let n = g.node_count();
    let mut m = DMatrix::<f64>::identity(n, n);
    for v in 0..n {
        let deg = g.degree(v);
        for u in 0..n {
            let share = if deg == 0 {
                1.0 / n as f64
            } else if g.has_edge(u, v) {
                1.0 / deg as f64
            } else {
                0.0
            };
            m[(u, v)] -= d * share;
        }
    }
    let rhs = DVector::from_element(n, (1.0 - d) / n as f64);
    m.lu().solve(&rhs).unwrap().iter().copied().collect()
}
