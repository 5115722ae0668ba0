//! Chu-Liu/Edmonds maximum spanning arborescence.

use ndarray::Array2;

/// Maximum arborescence rooted at 0 for a `[n + 1, n]` arc score matrix
/// (`-inf` marks forbidden arcs). Returns 1-based heads per token. Every
/// token must be reachable from the root through finite arcs.
pub fn chu_liu_edmonds(scores: &Array2<f64>) -> Vec<usize> {
    let n = scores.ncols();
    let size = n + 1;
    let mut full = vec![vec![f64::NEG_INFINITY; size]; size];
    for h in 0..size {
        for m in 1..size {
            if h != m {
                full[h][m] = scores[[h, m - 1]];
            }
        }
    }
    let parents = solve(&full);
    parents[1..].to_vec()
}

/// Recursive contraction on a dense `size x size` matrix rooted at 0.
fn solve(scores: &[Vec<f64>]) -> Vec<usize> {
    let size = scores.len();
    let mut parent = vec![0usize; size];
    for v in 1..size {
        let mut best = (0, f64::NEG_INFINITY);
        for (u, row) in scores.iter().enumerate() {
            if u != v && row[v] > best.1 {
                best = (u, row[v]);
            }
        }
        parent[v] = best.0;
    }

    let cycle = match find_cycle(&parent) {
        Some(c) => c,
        None => return parent,
    };
    let mut in_cycle = vec![false; size];
    for &v in &cycle {
        in_cycle[v] = true;
    }

    // Contracted graph: surviving nodes keep their relative order, the
    // cycle becomes the last node.
    let survivors: Vec<usize> = (0..size).filter(|&v| !in_cycle[v]).collect();
    let c = survivors.len();
    let mut index = vec![usize::MAX; size];
    for (i, &v) in survivors.iter().enumerate() {
        index[v] = i;
    }
    let mut contracted = vec![vec![f64::NEG_INFINITY; c + 1]; c + 1];
    // Which original endpoint realises each contracted arc into / out of
    // the cycle.
    let mut enter = vec![usize::MAX; c + 1];
    let mut leave = vec![usize::MAX; c + 1];

    for (iu, &u) in survivors.iter().enumerate() {
        for (iv, &v) in survivors.iter().enumerate() {
            if u != v {
                contracted[iu][iv] = scores[u][v];
            }
        }
        let mut best_in = (usize::MAX, f64::NEG_INFINITY);
        for &v in &cycle {
            let gain = scores[u][v] - scores[parent[v]][v];
            if gain > best_in.1 || best_in.0 == usize::MAX {
                best_in = (v, gain);
            }
        }
        contracted[iu][c] = best_in.1;
        enter[iu] = best_in.0;

        let mut best_out = (usize::MAX, f64::NEG_INFINITY);
        for &w in &cycle {
            if scores[w][u] > best_out.1 || best_out.0 == usize::MAX {
                best_out = (w, scores[w][u]);
            }
        }
        contracted[c][iu] = best_out.1;
        leave[iu] = best_out.0;
    }
    // No arcs into the root.
    for row in contracted.iter_mut() {
        row[0] = f64::NEG_INFINITY;
    }

    let sub = solve(&contracted);

    let mut result = parent.clone();
    for (iv, &v) in survivors.iter().enumerate().skip(1) {
        let p = sub[iv];
        result[v] = if p == c { leave[iv] } else { survivors[p] };
    }
    let from = sub[c];
    let entry = enter[from];
    result[entry] = survivors[from];
    result
}

fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let size = parent.len();
    let mut color = vec![0u8; size];
    color[0] = 2;
    for start in 1..size {
        let mut path = Vec::new();
        let mut v = start;
        while color[v] == 0 {
            color[v] = 1;
            path.push(v);
            v = parent[v];
        }
        if color[v] == 1 {
            let pos = path.iter().position(|&p| p == v).unwrap();
            return Some(path[pos..].to_vec());
        }
        for p in path {
            color[p] = 2;
        }
    }
    None
}
