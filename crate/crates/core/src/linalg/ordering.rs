//! Fill-reducing orderings for symmetric sparse matrices.
//!
//! Permutations are returned as `perm[new] = old`.

use alloc::{collections::VecDeque, vec, vec::Vec};

use super::CsrMatrix;

/// How rows and columns are permuted before a sparse factorization.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Ordering {
    Natural,
    #[default]
    ReverseCuthillMcKee,
    /// Nested dissection driven by a coordinate per unknown; separators are
    /// taken from the matrix graph.
    NestedDissection(Vec<[f64; 2]>),
}

impl Ordering {
    pub fn permutation(&self, a: &CsrMatrix) -> Vec<usize> {
        match self {
            Ordering::Natural => (0..a.nrows()).collect(),
            Ordering::ReverseCuthillMcKee => reverse_cuthill_mckee(a),
            Ordering::NestedDissection(coords) => {
                assert_eq!(coords.len(), a.nrows(), "one coordinate per unknown");
                nested_dissection(a, coords, 64)
            }
        }
    }
}

fn neighbours(a: &CsrMatrix, i: usize) -> impl Iterator<Item = usize> + '_ {
    a.row(i).0.iter().copied().filter(move |&j| j != i)
}

/// Reverse Cuthill–McKee, one component at a time, each started from a
/// pseudo-peripheral node.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| neighbours(a, i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    let bfs_last = |start: usize, level: &mut Vec<usize>| -> (usize, usize) {
        let mut queue = VecDeque::from([start]);
        let mut touched = vec![start];
        level[start] = 0;
        let mut last = start;
        while let Some(i) = queue.pop_front() {
            last = i;
            for j in neighbours(a, i) {
                if level[j] == usize::MAX {
                    level[j] = level[i] + 1;
                    touched.push(j);
                    queue.push_back(j);
                }
            }
        }
        let depth = level[last];
        for t in touched {
            level[t] = usize::MAX;
        }
        (last, depth)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral node search.
        let mut start = seed;
        let (mut far, mut depth) = bfs_last(start, &mut level);
        for _ in 0..8 {
            let (next, d) = bfs_last(far, &mut level);
            if d <= depth {
                break;
            }
            start = far;
            far = next;
            depth = d;
        }
        let begin = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = begin;
        let mut buf = Vec::new();
        while head < order.len() {
            let i = order[head];
            head += 1;
            buf.clear();
            buf.extend(neighbours(a, i).filter(|&j| !visited[j]));
            buf.sort_by_key(|&j| (degree[j], j));
            for &j in &buf {
                visited[j] = true;
                order.push(j);
            }
        }
    }
    order.reverse();
    order
}

/// Nested dissection: split at the coordinate median along the longer box
/// side, take the nodes of one half adjacent to the other half as the
/// separator, recurse, and number separators last.
pub fn nested_dissection(a: &CsrMatrix, coords: &[[f64; 2]], leaf: usize) -> Vec<usize> {
    let n = a.nrows();
    let mut order = Vec::with_capacity(n);
    let mut side = vec![0u8; n];
    let nodes: Vec<usize> = (0..n).collect();
    dissect(a, coords, nodes, leaf.max(1), &mut side, &mut order);
    order
}

fn dissect(a: &CsrMatrix, coords: &[[f64; 2]], mut nodes: Vec<usize>, leaf: usize, side: &mut [u8], order: &mut Vec<usize>) {
    if nodes.len() <= leaf {
        order.extend(nodes);
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in &nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[i][d]);
            hi[d] = hi[d].max(coords[i][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    nodes.sort_by(|&i, &j| coords[i][axis].total_cmp(&coords[j][axis]).then(i.cmp(&j)));
    let right = nodes.split_off(nodes.len() / 2);
    let left = nodes;
    for &i in &left {
        side[i] = 1;
    }
    let (separator, rest): (Vec<usize>, Vec<usize>) =
        right.iter().partition(|&&i| neighbours(a, i).any(|j| side[j] == 1));
    for &i in &left {
        side[i] = 0;
    }
    if rest.is_empty() && separator.len() == right.len() && left.len() <= leaf {
        order.extend(left);
        order.extend(separator);
        return;
    }
    dissect(a, coords, left, leaf, side, order);
    dissect(a, coords, rest, leaf, side, order);
    order.extend(separator);
}

/// Inverse permutation: `inv[old] = new`.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}
