//! Symbolic elimination: from a pattern and an elimination order to the
//! maximal cliques of the resulting chordal extension, arranged in a
//! clique tree with the running intersection property.

use super::{CliqueTree, SparsityPattern};

/// Runs symbolic elimination of `pattern` in the given order and builds a
/// clique tree of the filled graph.
///
/// The filled column structures are computed by propagating each
/// eliminated vertex's higher neighborhood to its elimination-tree parent,
/// which reproduces the fill of the elimination game. A vertex is a clique
/// representative when no tree child has a higher neighborhood exactly one
/// larger than its own; the representatives' closed higher neighborhoods
/// are precisely the maximal cliques of the filled graph. The tree is a
/// maximum-weight spanning forest of the clique intersection graph, which
/// guarantees the running intersection property.
pub fn decompose(pattern: &SparsityPattern, order: &[usize]) -> CliqueTree {
    let n = pattern.n_vertices();
    assert_eq!(order.len(), n, "order must be a permutation of the vertices");
    let mut pos = vec![usize::MAX; n];
    for (k, &v) in order.iter().enumerate() {
        assert!(pos[v] == usize::MAX, "order repeats vertex {v}");
        pos[v] = k;
    }

    // hadj[v] accumulates the filled higher neighborhood of v; it is final
    // at the step v is eliminated.
    let mut hadj: Vec<std::collections::BTreeSet<usize>> = (0..n)
        .map(|v| pattern.neighbors(v).iter().copied().filter(|&w| pos[w] > pos[v]).collect())
        .collect();
    let mut madj_size = vec![0usize; n];
    let mut parent_vertex = vec![usize::MAX; n];
    let mut madj = vec![Vec::new(); n];
    for &v in order {
        madj_size[v] = hadj[v].len();
        madj[v] = hadj[v].iter().copied().collect();
        if let Some(&u) = hadj[v].iter().min_by_key(|&&w| pos[w]) {
            parent_vertex[v] = u;
            let fill: Vec<usize> = hadj[v].iter().copied().filter(|&w| w != u).collect();
            hadj[u].extend(fill);
        }
    }

    // Representative vertices: drop v when a tree child's clique strictly
    // contains v's clique, which happens exactly when the child's higher
    // neighborhood is one larger.
    let mut representative = vec![true; n];
    for &v in order {
        let u = parent_vertex[v];
        if u != usize::MAX && madj_size[v] == madj_size[u] + 1 {
            representative[u] = false;
        }
    }

    // Cliques listed by elimination position of their representative.
    let mut cliques = Vec::new();
    for &v in order {
        if representative[v] {
            let mut c = vec![v];
            c.extend_from_slice(&madj[v]);
            c.sort_unstable();
            cliques.push(c);
        }
    }
    build_tree(cliques)
}

/// Arranges cliques into a maximum-weight spanning forest of their
/// intersection graph, rooted at the lowest-index clique per component.
pub(crate) fn build_tree(cliques: Vec<Vec<usize>>) -> CliqueTree {
    let q = cliques.len();
    let mut edges = Vec::new();
    for i in 0..q {
        for j in i + 1..q {
            let w = sorted_intersection_len(&cliques[i], &cliques[j]);
            if w > 0 {
                edges.push((w, i, j));
            }
        }
    }
    // Heaviest separators first; ties broken by index for determinism.
    edges.sort_by_key(|&(w, i, j)| (std::cmp::Reverse(w), i, j));
    let mut uf = UnionFind::new(q);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); q];
    for (_, i, j) in edges {
        if uf.union(i, j) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut parent = vec![None; q];
    let mut separator = vec![Vec::new(); q];
    let mut visited = vec![false; q];
    for root in 0..q {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !visited[j] {
                    visited[j] = true;
                    parent[j] = Some(i);
                    separator[j] =
                        cliques[j].iter().copied().filter(|v| cliques[i].binary_search(v).is_ok()).collect();
                    queue.push_back(j);
                }
            }
        }
    }
    CliqueTree { cliques, parent, separator }
}

pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_oracles::maximal_cliques;
    use super::super::{fill_reducing_order, EliminationOrder};
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_graph_cliques() {
        let p = SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3)]);
        let t = decompose(&p, &[0, 1, 2, 3]);
        assert_eq!(t.cliques, vec![vec![0, 1], vec![1, 2], vec![2, 3]]);
        assert_eq!(t.stats().coupling_scalars, 2);
        t.verify(&p).unwrap();
    }

    #[test]
    fn four_cycle_fills_into_two_triangles() {
        let p = SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]);
        let t = decompose(&p, &[0, 1, 2, 3]);
        // Eliminating vertex 0 first adds the chord (1, 3).
        assert_eq!(t.cliques, vec![vec![0, 1, 3], vec![1, 2, 3]]);
        assert_eq!(t.separator.iter().map(|s| s.len()).max(), Some(2));
        t.verify(&p).unwrap();
    }

    #[test]
    fn complete_graph_is_one_clique() {
        let p = SparsityPattern::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let t = decompose(&p, &[3, 1, 0, 2]);
        assert_eq!(t.cliques, vec![vec![0, 1, 2, 3]]);
        assert_eq!(t.parent, vec![None]);
        t.verify(&p).unwrap();
    }

    #[test]
    fn disconnected_pattern_gives_forest() {
        let p = SparsityPattern::from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5)]);
        let t = decompose(&p, &fill_reducing_order(&p, EliminationOrder::Natural));
        assert_eq!(t.cliques.len(), 4);
        assert_eq!(t.parent.iter().filter(|p| p.is_none()).count(), 2);
        t.verify(&p).unwrap();
    }

    #[test]
    fn isolated_vertices_become_singleton_cliques() {
        let p = SparsityPattern::from_edges(4, [(1, 2)]);
        let t = decompose(&p, &[0, 1, 2, 3]);
        assert_eq!(t.cliques, vec![vec![0], vec![1, 2], vec![3]]);
        t.verify(&p).unwrap();
    }

    #[test]
    fn matches_bron_kerbosch_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for trial in 0..60 {
            let n = rng.random_range(2..14);
            let density = rng.random_range(0.1..0.7);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(density) {
                        edges.push((i, j));
                    }
                }
            }
            let p = SparsityPattern::from_edges(n, edges);
            let strategy = match trial % 3 {
                0 => EliminationOrder::Amd,
                1 => EliminationOrder::Rcm,
                _ => EliminationOrder::Natural,
            };
            let order = fill_reducing_order(&p, strategy);
            let t = decompose(&p, &order);
            t.verify(&p).unwrap_or_else(|e| panic!("trial {trial}: {e}"));

            // The decomposition must list exactly the maximal cliques of
            // the filled graph.
            let filled = t.union_graph(n);
            let mut got = t.cliques.clone();
            got.sort();
            assert_eq!(got, maximal_cliques(&filled), "trial {trial}");
            // Filled graph must contain the original pattern.
            for (i, j) in p.edges() {
                assert!(filled.has_edge(i, j));
            }
        }
    }

    #[test]
    fn network_case_decomposes_with_small_cliques() {
        use crate::caseio::{parse_matpower, preprocess, PreprocessOptions};
        let c = parse_matpower(include_str!("../../../../data/cases/case30.m")).unwrap();
        let (c, _) = preprocess(&c, &PreprocessOptions::default()).unwrap();
        let m = crate::netmodel::NetModel::build(&c);
        let prob = crate::relax::build_sdr(&c, &m);
        let p = SparsityPattern::from_lp(&prob.lp);
        let t = decompose(&p, &fill_reducing_order(&p, EliminationOrder::Amd));
        t.verify(&p).unwrap();
        let stats = t.stats();
        assert!(stats.count > 10, "expected many cliques, got {}", stats.count);
        assert!(stats.max_size <= 6, "unexpectedly large clique: {}", stats.max_size);
    }
}
