//! Clique-tree decomposition of the PSD block and the block conversions
//! built on it.
//!
//! Pipeline: extract the aggregate sparsity pattern of the matrix variable
//! from the problem data, pick a fill-reducing elimination order, run
//! symbolic elimination to obtain the maximal cliques of a chordal
//! extension and a clique tree satisfying the running intersection
//! property, optionally merge small or heavily overlapping cliques, then
//! rewrite the cone program so the single large PSD block becomes one block
//! per clique plus equality rows coupling the overlapping entries.
//! Finally, Hermitian blocks can be embedded into real symmetric blocks of
//! twice the order.
//!
//! Correctness rests on two classical facts, both exercised directly by
//! the tests instead of being taken on faith: a partial Hermitian matrix
//! whose specified entries cover a chordal pattern has a PSD completion
//! exactly when every clique submatrix is PSD, and in a clique tree the
//! set of cliques containing any fixed vertex set forms a connected
//! subtree, so pairwise coupling along tree edges chains all copies of a
//! shared entry together.

mod convert;
mod eliminate;
mod herm2sym;
mod merge;
mod order;

pub use convert::{convert, ChordalError, ConvertMap, Converted};
pub use eliminate::decompose;
pub use herm2sym::{herm_embed_dense, herm_project_dense, herm_to_sym, SymBlockMap, SymMap};
pub use merge::merge_cliques;
pub use order::{fill_reducing_order, EliminationOrder};

use crate::relax::{hvec::HvecCodec, ConeBlock, ConeLP};
use serde::Serialize;

/// Undirected sparsity pattern of a Hermitian matrix variable: vertex per
/// row/column, edge per off-diagonal entry that appears anywhere in the
/// problem data. The diagonal is always considered present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    /// Sorted neighbor lists, no self loops.
    adj: Vec<Vec<usize>>,
}

impl SparsityPattern {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
        for (i, j) in edges {
            assert!(i < n && j < n, "edge ({i}, {j}) out of bounds");
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
        SparsityPattern { n, adj: adj.into_iter().map(|s| s.into_iter().collect()).collect() }
    }

    /// Aggregate pattern of the PSD block of `lp`: the union of the
    /// supports of every constraint row and of the cost vector.
    ///
    /// `lp` must contain exactly one [`ConeBlock::PsdHerm`] block.
    pub fn from_lp(lp: &ConeLP) -> Self {
        let (start, order) = single_psd_block(lp).expect("problem must have exactly one Hermitian PSD block");
        let len = HvecCodec::new(order).len();
        let mut edges = Vec::new();
        let mut scan = |col: usize, val: f64| {
            if val != 0.0 && (start..start + len).contains(&col) {
                let (i, j, _) = slot_info(col - start);
                if i != j {
                    edges.push((i, j));
                }
            }
        };
        for (_, col, val) in lp.a.iter() {
            scan(col, val);
        }
        for (col, &val) in lp.c.iter().enumerate() {
            scan(col, val);
        }
        SparsityPattern::from_edges(order, edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(|a| a.len()).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.adj[i].iter().copied().filter(move |&j| i < j).map(move |j| (i, j)))
    }

    /// Whether the pattern itself is chordal, via a maximum cardinality
    /// search followed by a perfect-elimination check.
    pub fn is_chordal(&self) -> bool {
        let order = self.mcs_order();
        self.is_perfect_elimination(&order)
    }

    /// Maximum cardinality search order (reversed to elimination order).
    fn mcs_order(&self) -> Vec<usize> {
        let n = self.n;
        let mut weight = vec![0usize; n];
        let mut picked = vec![false; n];
        let mut rev = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n).filter(|&v| !picked[v]).max_by_key(|&v| (weight[v], std::cmp::Reverse(v))).unwrap();
            picked[v] = true;
            rev.push(v);
            for &w in &self.adj[v] {
                if !picked[w] {
                    weight[w] += 1;
                }
            }
        }
        rev.reverse();
        rev
    }

    /// Checks that eliminating in the given order produces no fill.
    fn is_perfect_elimination(&self, order: &[usize]) -> bool {
        let mut pos = vec![0usize; self.n];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        for &v in order {
            let later: Vec<usize> = self.adj[v].iter().copied().filter(|&w| pos[w] > pos[v]).collect();
            let Some(&u) = later.iter().min_by_key(|&&w| pos[w]) else { continue };
            for &w in &later {
                if w != u && !self.has_edge(u, w) {
                    return false;
                }
            }
        }
        true
    }
}

/// Finds the unique Hermitian PSD block of `lp`, returning its variable
/// offset and order.
pub fn single_psd_block(lp: &ConeLP) -> Option<(usize, usize)> {
    let mut found = None;
    for (start, blk) in lp.block_ranges() {
        if let ConeBlock::PsdHerm(r) = blk {
            if found.is_some() {
                return None;
            }
            found = Some((start, r));
        }
    }
    found
}

/// Decodes a packed slot into `(i, j, part)` with `i <= j`.
pub(crate) fn slot_info(slot: usize) -> (usize, usize, SlotPart) {
    let j = (slot as f64).sqrt() as usize;
    let j = if (j + 1) * (j + 1) <= slot { j + 1 } else { j };
    debug_assert!(j * j <= slot && slot < (j + 1) * (j + 1));
    let rem = slot - j * j;
    if rem == 2 * j {
        (j, j, SlotPart::Diag)
    } else if rem % 2 == 0 {
        (rem / 2, j, SlotPart::Re)
    } else {
        (rem / 2, j, SlotPart::Im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SlotPart {
    Diag,
    Re,
    Im,
}

/// A clique decomposition with tree structure.
///
/// Cliques hold sorted global vertex indices. `parent[i]` is the tree
/// parent (a spanning forest when the pattern is disconnected);
/// `separator[i]` is the intersection with the parent, empty at roots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueTree {
    pub cliques: Vec<Vec<usize>>,
    pub parent: Vec<Option<usize>>,
    pub separator: Vec<Vec<usize>>,
}

/// Summary numbers for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueStats {
    pub count: usize,
    pub max_size: usize,
    pub min_size: usize,
    pub mean_size: f64,
    /// Total coupled scalars: sum of squared separator sizes, which is the
    /// number of equality rows conversion adds.
    pub coupling_scalars: usize,
}

impl CliqueTree {
    pub fn stats(&self) -> CliqueStats {
        let sizes: Vec<usize> = self.cliques.iter().map(|c| c.len()).collect();
        CliqueStats {
            count: sizes.len(),
            max_size: sizes.iter().copied().max().unwrap_or(0),
            min_size: sizes.iter().copied().min().unwrap_or(0),
            mean_size: if sizes.is_empty() { 0.0 } else { sizes.iter().sum::<usize>() as f64 / sizes.len() as f64 },
            coupling_scalars: self.separator.iter().map(|s| s.len() * s.len()).sum(),
        }
    }

    /// Number of tree edges (cliques minus connected components).
    pub fn n_edges(&self) -> usize {
        self.parent.iter().flatten().count()
    }

    /// Verifies every structural invariant against the source pattern:
    ///
    /// * every vertex and pattern edge is covered by some clique;
    /// * the union graph (cliques made complete) is chordal;
    /// * each clique is a maximal clique of that union graph;
    /// * separators match `C_i` intersected with the parent clique;
    /// * the cliques containing any vertex form a connected subtree.
    pub fn verify(&self, pattern: &SparsityPattern) -> Result<(), String> {
        let n = pattern.n_vertices();
        for (idx, c) in self.cliques.iter().enumerate() {
            if c.is_empty() {
                return Err(format!("clique {idx} is empty"));
            }
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("clique {idx} is not sorted"));
            }
            if *c.last().unwrap() >= n {
                return Err(format!("clique {idx} has out-of-range vertex"));
            }
        }
        // Coverage.
        let mut covered = vec![false; n];
        for c in &self.cliques {
            for &v in c {
                covered[v] = true;
            }
        }
        if let Some(v) = covered.iter().position(|&c| !c) {
            return Err(format!("vertex {v} not covered"));
        }
        let union = self.union_graph(n);
        for (i, j) in pattern.edges() {
            if !union.has_edge(i, j) {
                return Err(format!("pattern edge ({i}, {j}) not covered"));
            }
        }
        if !union.is_chordal() {
            return Err("union graph is not chordal".to_string());
        }
        // Maximality within the union graph: no outside vertex adjacent to
        // all clique members, and no clique contained in another.
        for (idx, c) in self.cliques.iter().enumerate() {
            let inside: std::collections::HashSet<usize> = c.iter().copied().collect();
            for v in 0..n {
                if !inside.contains(&v) && c.iter().all(|&u| union.has_edge(u, v)) {
                    return Err(format!("clique {idx} is not maximal: vertex {v} extends it"));
                }
            }
            for (jdx, d) in self.cliques.iter().enumerate() {
                if idx != jdx && c.iter().all(|v| d.binary_search(v).is_ok()) {
                    return Err(format!("clique {idx} contained in clique {jdx}"));
                }
            }
        }
        // Tree shape and separators.
        if self.parent.len() != self.cliques.len() || self.separator.len() != self.cliques.len() {
            return Err("tree arrays disagree with clique count".to_string());
        }
        for (i, &p) in self.parent.iter().enumerate() {
            // Walk up; a cycle would loop forever, so bound the walk.
            let mut hops = 0;
            let mut cur = p;
            while let Some(q) = cur {
                hops += 1;
                if hops > self.cliques.len() {
                    return Err("parent pointers contain a cycle".to_string());
                }
                cur = self.parent[q];
            }
            let want: Vec<usize> = match p {
                Some(p) => self.cliques[i]
                    .iter()
                    .copied()
                    .filter(|v| self.cliques[p].binary_search(v).is_ok())
                    .collect(),
                None => Vec::new(),
            };
            if want != self.separator[i] {
                return Err(format!("separator {i} mismatch"));
            }
        }
        // Running intersection: cliques containing v form a subtree.
        for v in 0..n {
            let holders: Vec<usize> =
                (0..self.cliques.len()).filter(|&i| self.cliques[i].binary_search(&v).is_ok()).collect();
            // Count holders whose parent also holds v; in a subtree exactly
            // one holder (its root) lacks such a parent.
            let roots = holders
                .iter()
                .filter(|&&i| !matches!(self.parent[i], Some(p) if self.cliques[p].binary_search(&v).is_ok()))
                .count();
            if roots != 1 {
                return Err(format!("cliques containing vertex {v} form {roots} subtrees"));
            }
        }
        Ok(())
    }

    /// The chordal extension implied by the decomposition: every clique
    /// made complete.
    pub fn union_graph(&self, n: usize) -> SparsityPattern {
        let mut edges = Vec::new();
        for c in &self.cliques {
            for (a, &i) in c.iter().enumerate() {
                for &j in &c[a + 1..] {
                    edges.push((i, j));
                }
            }
        }
        SparsityPattern::from_edges(n, edges)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_basics() {
        let p = SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3), (1, 0)]);
        assert_eq!(p.n_edges(), 3);
        assert!(p.has_edge(0, 1) && p.has_edge(1, 0));
        assert!(!p.has_edge(0, 2));
        assert_eq!(p.neighbors(1), &[0, 2]);
        let edges: Vec<_> = p.edges().collect();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn chordality_detection() {
        // Path and triangle are chordal; the 4-cycle is not.
        assert!(SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3)]).is_chordal());
        assert!(SparsityPattern::from_edges(3, [(0, 1), (1, 2), (0, 2)]).is_chordal());
        assert!(!SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).is_chordal());
        // 4-cycle plus one chord is chordal again.
        assert!(SparsityPattern::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).is_chordal());
    }

    #[test]
    fn slot_info_inverts_codec() {
        let codec = HvecCodec::new(6);
        for j in 0..6 {
            for i in 0..j {
                assert_eq!(slot_info(codec.idx_re(i, j)), (i, j, SlotPart::Re));
                assert_eq!(slot_info(codec.idx_im(i, j)), (i, j, SlotPart::Im));
            }
            assert_eq!(slot_info(codec.idx_diag(j)), (j, j, SlotPart::Diag));
        }
    }

    #[test]
    fn lp_pattern_matches_network_graph() {
        use crate::caseio::{parse_matpower, preprocess, PreprocessOptions};
        let c = parse_matpower(include_str!("../../../../data/cases/case9.m")).unwrap();
        let (c, _) = preprocess(&c, &PreprocessOptions::default()).unwrap();
        let m = crate::netmodel::NetModel::build(&c);
        let prob = crate::relax::build_sdr(&c, &m);
        let p = SparsityPattern::from_lp(&prob.lp);
        assert_eq!(p.n_vertices(), 9);
        let idx = c.bus_index();
        let want = SparsityPattern::from_edges(
            9,
            c.branches.iter().map(|br| (idx[&br.from], idx[&br.to])),
        );
        assert_eq!(p, want);
    }
}
