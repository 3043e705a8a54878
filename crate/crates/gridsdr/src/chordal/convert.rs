//! Clique-splitting conversion of a cone program.
//!
//! The single Hermitian PSD block of order `r` is replaced by one block
//! per clique. Each matrix entry that appears in the data is rewritten
//! onto the lowest-index clique containing it (its owner), and for every
//! tree edge equality rows force the two copies of each separator entry
//! to agree. Because the cliques containing any entry form a connected
//! subtree, chaining copies along tree edges makes all of them equal, so
//! the converted problem is equivalent whenever the decomposition is a
//! valid clique tree of the aggregate pattern.

use super::{single_psd_block, slot_info, CliqueTree, SlotPart};
use crate::relax::hvec::HvecCodec;
use crate::relax::{ConeBlock, ConeLP, RowLabel};
use crate::sparse::CscMatrix;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChordalError {
    #[error("problem must contain exactly one Hermitian PSD block")]
    PsdBlockCount,
    #[error("clique decomposition covers no entry ({0}, {1}) used by the problem")]
    UncoveredEntry(usize, usize),
}

/// A converted problem plus the bookkeeping to move points between the
/// original and converted variable spaces.
#[derive(Debug, Clone)]
pub struct Converted {
    pub lp: ConeLP,
    pub map: ConvertMap,
}

#[derive(Debug, Clone)]
pub struct ConvertMap {
    pub dec: CliqueTree,
    /// Variable offset and order of the original PSD block.
    pub orig_start: usize,
    pub orig_order: usize,
    /// Start column of each clique block in the converted problem.
    pub clique_starts: Vec<usize>,
    /// Number of appended equality rows.
    pub n_coupling: usize,
    /// Rows of the original problem, before the coupling rows.
    pub n_orig_rows: usize,
    /// Per clique: global vertex id to local index.
    vertex_pos: Vec<HashMap<usize, usize>>,
    /// Canonical entry `(i <= j)` to owning clique.
    owner: HashMap<(usize, usize), usize>,
}

impl ConvertMap {
    fn codec(&self, t: usize) -> HvecCodec {
        HvecCodec::new(self.dec.cliques[t].len())
    }

    /// Owning clique of entry `(i, j)`, ignoring order of the arguments.
    pub fn owner_of(&self, i: usize, j: usize) -> Option<usize> {
        self.owner.get(&(i.min(j), i.max(j))).copied()
    }

    /// Column in the converted problem holding the same real scalar as
    /// packed slot `slot` of the original PSD block, taken from the
    /// owner's copy.
    fn owned_column(&self, slot: usize) -> Result<usize, ChordalError> {
        let (i, j, part) = slot_info(slot);
        let t = self.owner_of(i, j).ok_or(ChordalError::UncoveredEntry(i, j))?;
        let (a, b) = (self.vertex_pos[t][&i], self.vertex_pos[t][&j]);
        let local = self.codec(t);
        let s = match part {
            SlotPart::Diag => local.idx_diag(a),
            SlotPart::Re => local.idx_re(a, b),
            SlotPart::Im => local.idx_im(a, b),
        };
        Ok(self.clique_starts[t] + s)
    }

    /// Labels for the appended coupling rows, in row order.
    pub fn coupling_labels(&self) -> Vec<RowLabel> {
        let mut labels = Vec::with_capacity(self.n_coupling);
        for (edge, (c, _)) in self.tree_edges().into_iter().enumerate() {
            let s = self.dec.separator[c].len();
            for slot in 0..s * s {
                labels.push(RowLabel::Coupling { edge, slot });
            }
        }
        labels
    }

    /// `(child, parent)` tree edges in child order.
    fn tree_edges(&self) -> Vec<(usize, usize)> {
        (0..self.dec.cliques.len()).filter_map(|c| self.dec.parent[c].map(|p| (c, p))).collect()
    }

    /// Maps an original-space point into the converted space by sampling
    /// each clique's submatrix from the original block; coupling rows hold
    /// exactly by construction.
    pub fn embed(&self, x_orig: &[f64]) -> Vec<f64> {
        let big = HvecCodec::new(self.orig_order);
        let r2 = big.len();
        let prefix = self.orig_start;
        let suffix = &x_orig[prefix + r2..];
        let total = self.clique_starts.last().map_or(prefix, |&s| s) + self.dec.cliques.last().map_or(0, |c| c.len() * c.len()) + suffix.len();
        let mut out = vec![0.0; total];
        out[..prefix].copy_from_slice(&x_orig[..prefix]);
        for (t, clique) in self.dec.cliques.iter().enumerate() {
            let local = self.codec(t);
            let base = self.clique_starts[t];
            for (a, &i) in clique.iter().enumerate() {
                out[base + local.idx_diag(a)] = x_orig[prefix + big.idx_diag(i)];
                for (bo, &j) in clique[a + 1..].iter().enumerate() {
                    let b = a + 1 + bo;
                    out[base + local.idx_re(a, b)] = x_orig[prefix + big.idx_re(i, j)];
                    out[base + local.idx_im(a, b)] = x_orig[prefix + big.idx_im(i, j)];
                }
            }
        }
        let suffix_start = total - suffix.len();
        out[suffix_start..].copy_from_slice(suffix);
        out
    }

    /// Rebuilds an original-space point from the owner copies. Exact
    /// inverse of [`ConvertMap::embed`]; entries outside every clique are
    /// zero.
    pub fn to_original(&self, x_conv: &[f64]) -> Vec<f64> {
        let big = HvecCodec::new(self.orig_order);
        let r2 = big.len();
        let prefix = self.orig_start;
        let conv_psd_len: usize = self.dec.cliques.iter().map(|c| c.len() * c.len()).sum();
        let suffix = &x_conv[prefix + conv_psd_len..];
        let mut out = vec![0.0; prefix + r2 + suffix.len()];
        out[..prefix].copy_from_slice(&x_conv[..prefix]);
        for slot in 0..r2 {
            if let Ok(col) = self.owned_column(slot) {
                out[prefix + slot] = x_conv[col];
            }
        }
        out[prefix + r2..].copy_from_slice(suffix);
        out
    }
}

/// Rewrites `lp` onto the clique blocks of `dec`.
///
/// A decomposition with a single clique spanning all rows reproduces the
/// input exactly. The appended coupling rows carry `+1` on the parent
/// copy and `-1` on the child copy.
pub fn convert(lp: &ConeLP, dec: &CliqueTree) -> Result<Converted, ChordalError> {
    let (orig_start, orig_order) = single_psd_block(lp).ok_or(ChordalError::PsdBlockCount)?;
    let big = HvecCodec::new(orig_order);
    let r2 = big.len();

    let mut vertex_pos = Vec::with_capacity(dec.cliques.len());
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, clique) in dec.cliques.iter().enumerate() {
        vertex_pos.push(clique.iter().enumerate().map(|(a, &v)| (v, a)).collect());
        for (a, &i) in clique.iter().enumerate() {
            owner.entry((i, i)).or_insert(t);
            for &j in &clique[a + 1..] {
                owner.entry((i, j)).or_insert(t);
            }
        }
    }

    let mut clique_starts = Vec::with_capacity(dec.cliques.len());
    let mut cursor = orig_start;
    for clique in &dec.cliques {
        clique_starts.push(cursor);
        cursor += clique.len() * clique.len();
    }
    let conv_psd_len = cursor - orig_start;
    let shift = conv_psd_len as isize - r2 as isize;

    let map = ConvertMap {
        dec: dec.clone(),
        orig_start,
        orig_order,
        clique_starts,
        n_coupling: dec.separator.iter().map(|s| s.len() * s.len()).sum(),
        n_orig_rows: lp.n_row(),
        vertex_pos,
        owner,
    };

    let move_col = |col: usize| -> Result<usize, ChordalError> {
        if col < orig_start {
            Ok(col)
        } else if col < orig_start + r2 {
            map.owned_column(col - orig_start)
        } else {
            Ok((col as isize + shift) as usize)
        }
    };

    let n_var = lp.n_var() + conv_psd_len - r2;
    let n_row = lp.n_row() + map.n_coupling;
    let mut triplets = Vec::with_capacity(lp.a.nnz() + 4 * map.n_coupling);
    for (row, col, val) in lp.a.iter() {
        triplets.push((row, move_col(col)?, val));
    }
    let mut c = vec![0.0; n_var];
    for (col, &val) in lp.c.iter().enumerate() {
        if val != 0.0 {
            c[move_col(col)?] = val;
        }
    }

    // Coupling rows: parent copy minus child copy of every separator
    // entry, in the same scalar order as the labels.
    let mut row = lp.n_row();
    for (ch, p) in map.tree_edges() {
        let sep = &dec.separator[ch];
        let (base_c, base_p) = (map.clique_starts[ch], map.clique_starts[p]);
        let (loc_c, loc_p) = (map.codec(ch), map.codec(p));
        let pair = |u_c: usize, u_p: usize, v_c: usize, v_p: usize, row: &mut usize, out: &mut Vec<(usize, usize, f64)>| {
            if u_c == v_c {
                out.push((*row, base_p + loc_p.idx_diag(u_p), 1.0));
                out.push((*row, base_c + loc_c.idx_diag(u_c), -1.0));
                *row += 1;
            } else {
                out.push((*row, base_p + loc_p.idx_re(u_p, v_p), 1.0));
                out.push((*row, base_c + loc_c.idx_re(u_c, v_c), -1.0));
                *row += 1;
                out.push((*row, base_p + loc_p.idx_im(u_p, v_p), 1.0));
                out.push((*row, base_c + loc_c.idx_im(u_c, v_c), -1.0));
                *row += 1;
            }
        };
        for (a, &i) in sep.iter().enumerate() {
            pair(map.vertex_pos[ch][&i], map.vertex_pos[p][&i], map.vertex_pos[ch][&i], map.vertex_pos[p][&i], &mut row, &mut triplets);
            for &j in &sep[a + 1..] {
                pair(map.vertex_pos[ch][&i], map.vertex_pos[p][&i], map.vertex_pos[ch][&j], map.vertex_pos[p][&j], &mut row, &mut triplets);
            }
        }
    }
    debug_assert_eq!(row, n_row);

    let mut b = lp.b.clone();
    b.resize(n_row, 0.0);

    let psd_idx = lp
        .blocks
        .iter()
        .position(|blk| matches!(blk, ConeBlock::PsdHerm(_)))
        .expect("checked above");
    let mut blocks = lp.blocks[..psd_idx].to_vec();
    blocks.extend(dec.cliques.iter().map(|cl| ConeBlock::PsdHerm(cl.len())));
    blocks.extend_from_slice(&lp.blocks[psd_idx + 1..]);

    let lp = ConeLP {
        a: CscMatrix::from_triplets(n_row, n_var, &triplets),
        b,
        c,
        blocks,
        offset: lp.offset,
    };
    debug_assert!(lp.validate().is_ok());
    Ok(Converted { lp, map })
}
