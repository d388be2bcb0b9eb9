//! Fill-reducing symmetric ordering for envelope factorization.
//!
//! Reverse Cuthill-McKee on the sparse part of the graph, with high-degree
//! ("dense") nodes moved to the end so that they widen only their own rows of
//! the envelope. A hub left in the sparse part short-circuits the level
//! structure and widens every row, while too many dense nodes each cost a
//! full row; several degree thresholds are tried and the smallest envelope
//! wins.

use std::collections::VecDeque;

/// Most distinct degree thresholds tried by [`envelope_ordering`].
const MAX_CANDIDATES: usize = 12;

/// Returns `perm` with `perm[new] = old`.
pub fn envelope_ordering(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    if n == 0 {
        return Vec::new();
    }
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut sorted = degree.clone();
    sorted.sort_unstable();
    let median = sorted[n / 2];

    // Thresholds at the distinct degrees of the highest-degree nodes, down
    // to twice the median.
    let mut thresholds = vec![usize::MAX];
    for &d in sorted.iter().rev() {
        if d <= 2 * median.max(1) || thresholds.len() > MAX_CANDIDATES {
            break;
        }
        if d - 1 < *thresholds.last().unwrap() {
            thresholds.push(d - 1);
        }
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for t in thresholds {
        let perm = ordering_with_threshold(adjacency, &degree, t);
        let size = envelope_size(adjacency, &perm);
        if best.as_ref().is_none_or(|(b, _)| size < *b) {
            best = Some((size, perm));
        }
    }
    best.expect("at least one candidate").1
}

fn ordering_with_threshold(adjacency: &[Vec<usize>], degree: &[usize], threshold: usize) -> Vec<usize> {
    let n = adjacency.len();
    let dense: Vec<bool> = degree.iter().map(|&d| d > threshold).collect();

    // Degrees within the sparse subgraph.
    let sparse_degree: Vec<usize> = (0..n)
        .map(|i| adjacency[i].iter().filter(|&&j| !dense[j]).count())
        .collect();

    let mut visited = dense.clone();
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut neighbours = Vec::new();

    loop {
        // Lowest-degree unvisited node starts each component.
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (sparse_degree[i], i));
        let Some(start) = start else { break };
        let start = pseudo_peripheral(start, adjacency, &dense, &sparse_degree);

        let component_begin = order.len();
        visited[start] = true;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            order.push(node);
            neighbours.clear();
            neighbours.extend(adjacency[node].iter().copied().filter(|&j| !visited[j]));
            neighbours.sort_by_key(|&j| (sparse_degree[j], j));
            neighbours.dedup();
            for &j in &neighbours {
                visited[j] = true;
                queue.push_back(j);
            }
        }
        order[component_begin..].reverse();
    }
    // Components are reversed individually; keep components in discovery order.
    let mut dense_nodes: Vec<usize> = (0..n).filter(|&i| dense[i]).collect();
    dense_nodes.sort_by_key(|&i| (degree[i], i));
    order.extend(dense_nodes);
    order
}

fn pseudo_peripheral(start: usize, adjacency: &[Vec<usize>], dense: &[bool], deg: &[usize]) -> usize {
    let n = adjacency.len();
    let mut root = start;
    let mut best_ecc = 0;
    let mut level = vec![usize::MAX; n];
    for _ in 0..8 {
        level.iter_mut().for_each(|l| *l = usize::MAX);
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        let mut last = Vec::new();
        let mut ecc = 0;
        while let Some(node) = queue.pop_front() {
            if level[node] > ecc {
                ecc = level[node];
                last.clear();
            }
            if level[node] == ecc {
                last.push(node);
            }
            for &j in &adjacency[node] {
                if !dense[j] && level[j] == usize::MAX {
                    level[j] = level[node] + 1;
                    queue.push_back(j);
                }
            }
        }
        if ecc <= best_ecc && best_ecc > 0 {
            break;
        }
        best_ecc = ecc;
        let candidate = *last.iter().min_by_key(|&&j| (deg[j], j)).unwrap();
        if candidate == root {
            break;
        }
        root = candidate;
    }
    root
}

/// Lower-envelope size `Σ (i − first(i))` of the permuted pattern.
pub fn envelope_size(adjacency: &[Vec<usize>], perm: &[usize]) -> usize {
    let n = perm.len();
    let mut inverse = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    (0..n)
        .map(|new| {
            let old = perm[new];
            let first = adjacency[old]
                .iter()
                .map(|&j| inverse[j])
                .filter(|&j| j < new)
                .min()
                .unwrap_or(new);
            new - first
        })
        .sum()
}
