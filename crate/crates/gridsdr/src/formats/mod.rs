//! Interchange with external conic solvers.
//!
//! A realified problem is written in the Conic Benchmark Format (version 2)
//! together with an [`ExportManifest`] that records, slot by slot, where each
//! internal variable landed in the file. Solutions computed externally come
//! back as a small JSON document and are routed through the manifest onto the
//! internal layout, so diagnostics and gap reports treat them exactly like
//! points produced by the internal solver.
//!
//! The file stores plain matrix entries for semidefinite blocks while the
//! internal packed layout scales off-diagonal entries by sqrt(2); the manifest
//! carries that convention so import and export stay inverses.

pub mod cbf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conesolve::{Solution, SolveStatus};
use crate::diagnostics::Dimacs;
use crate::linalg;
use crate::relax::hvec::SQRT2;
use crate::relax::{ConeBlock, ConeLP};

#[derive(Debug, Error)]
pub enum FormatError {
    /// Hermitian blocks cannot be written; realify the problem first.
    #[error("block {index} is Hermitian; realify the problem before export")]
    HermitianBlock { index: usize },
    #[error("section {section}: expected {expected} values, found {found}")]
    LengthMismatch { section: &'static str, expected: usize, found: usize },
    #[error("unknown status string {0:?}")]
    UnknownStatus(String),
    #[error("malformed solution file: {0}")]
    Malformed(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Where one internal slot lives in the exported file.
///
/// Scalar variables keep their internal order; each semidefinite block
/// becomes a matrix variable whose lower triangle is listed entry by entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotCoord {
    Scalar { var: usize },
    /// Lower-triangle entry of a matrix variable, `row >= col`.
    PsdEntry { var: usize, row: usize, col: usize },
}

/// One cone of the exported problem with its position in the file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cone", rename_all = "snake_case")]
pub enum LayoutBlock {
    NonNeg { scalar_start: usize, len: usize },
    Soc { scalar_start: usize, len: usize },
    Psd { psd_var: usize, order: usize },
}

/// Cross-reference between the internal cone vector and the exported file.
///
/// Solution vectors in the file are flat: scalar variables first, then each
/// matrix variable's lower triangle row by row. `index_map[k]` names the file
/// coordinate of internal slot `k`; off-diagonal matrix entries are stored
/// unscaled in the file and carry a sqrt(2) factor internally.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportManifest {
    pub format_version: u32,
    pub layout: Vec<LayoutBlock>,
    pub index_map: Vec<SlotCoord>,
    /// Constant added to the linear objective when reporting costs.
    pub offset: f64,
    pub scaling_note: String,
}

impl ExportManifest {
    /// Matrix variable orders in file order.
    pub fn psd_orders(&self) -> Vec<usize> {
        let mut dims: Vec<(usize, usize)> = self
            .layout
            .iter()
            .filter_map(|b| match b {
                LayoutBlock::Psd { psd_var, order } => Some((*psd_var, *order)),
                _ => None,
            })
            .collect();
        dims.sort_unstable();
        dims.into_iter().map(|(_, r)| r).collect()
    }

    /// Number of scalar variables in the file.
    pub fn n_scalar(&self) -> usize {
        self.layout
            .iter()
            .map(|b| match b {
                LayoutBlock::NonNeg { len, .. } | LayoutBlock::Soc { len, .. } => *len,
                LayoutBlock::Psd { .. } => 0,
            })
            .sum()
    }

    /// Length of a flat solution vector in file order.
    pub fn file_len(&self) -> usize {
        self.n_scalar() + self.psd_orders().iter().map(|r| r * (r + 1) / 2).sum::<usize>()
    }

    /// Flat position of a file coordinate.
    pub fn file_pos(&self, coord: SlotCoord) -> usize {
        match coord {
            SlotCoord::Scalar { var } => var,
            SlotCoord::PsdEntry { var, row, col } => {
                let orders = self.psd_orders();
                let before: usize = orders[..var].iter().map(|r| r * (r + 1) / 2).sum();
                self.n_scalar() + before + row * (row + 1) / 2 + col
            }
        }
    }
}

/// Builds the file layout for a problem whose blocks are all real.
pub fn manifest_for(lp: &ConeLP) -> Result<ExportManifest, FormatError> {
    let mut layout = Vec::new();
    let mut index_map = Vec::with_capacity(lp.n_var());
    let mut scalar_next = 0usize;
    let mut psd_next = 0usize;
    for (index, (_, blk)) in lp.block_ranges().enumerate() {
        match blk {
            ConeBlock::NonNeg(len) => {
                layout.push(LayoutBlock::NonNeg { scalar_start: scalar_next, len });
                for k in 0..len {
                    index_map.push(SlotCoord::Scalar { var: scalar_next + k });
                }
                scalar_next += len;
            }
            ConeBlock::Soc(len) => {
                layout.push(LayoutBlock::Soc { scalar_start: scalar_next, len });
                for k in 0..len {
                    index_map.push(SlotCoord::Scalar { var: scalar_next + k });
                }
                scalar_next += len;
            }
            ConeBlock::PsdSym(order) => {
                layout.push(LayoutBlock::Psd { psd_var: psd_next, order });
                // Packed slot t holds entry (i, j) of the upper triangle,
                // i <= j, with t = j(j+1)/2 + i; the file names it by the
                // mirrored lower-triangle coordinate.
                for j in 0..order {
                    for i in 0..=j {
                        index_map.push(SlotCoord::PsdEntry { var: psd_next, row: j, col: i });
                    }
                }
                psd_next += 1;
            }
            ConeBlock::PsdHerm(_) => return Err(FormatError::HermitianBlock { index }),
        }
    }
    Ok(ExportManifest {
        format_version: 2,
        layout,
        index_map,
        offset: lp.offset,
        scaling_note: "matrix entries are stored unscaled; internal packed slots carry \
                       off-diagonal entries times sqrt(2)"
            .to_string(),
    })
}

/// Solution document: flat vectors in file order plus a status string.
///
/// The objective field is written for human readers only; imports recompute
/// it from the problem data.
#[derive(Serialize, Deserialize)]
struct SolutionFile {
    status: String,
    #[serde(default)]
    objective: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
}

/// Writes a solution as JSON in file coordinates.
pub fn write_solution(sol: &Solution, manifest: &ExportManifest) -> String {
    let doc = SolutionFile {
        status: sol.status.to_string(),
        objective: sol.objective,
        x: to_file_order(&sol.x, manifest),
        y: sol.y.clone(),
        s: to_file_order(&sol.s, manifest),
    };
    serde_json::to_string(&doc).expect("solution serialization cannot fail")
}

/// Reads a solution document and routes it onto the internal layout.
///
/// The objective and the error measures are recomputed from `lp`; nothing
/// numeric is trusted from the file beyond the vectors themselves.
pub fn read_solution(
    text: &str,
    manifest: &ExportManifest,
    lp: &ConeLP,
) -> Result<Solution, FormatError> {
    let doc: SolutionFile =
        serde_json::from_str(text).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let status = parse_status(&doc.status)?;
    let want = manifest.file_len();
    check_len("x", doc.x.len(), want)?;
    check_len("y", doc.y.len(), lp.n_row())?;
    check_len("s", doc.s.len(), want)?;
    let x = from_file_order(&doc.x, manifest);
    let s = from_file_order(&doc.s, manifest);
    let metrics = Dimacs::measure(lp, &x, &doc.y, &s);
    Ok(Solution {
        status,
        objective: lp.objective(&x),
        dual_objective: linalg::dot(&lp.b, &doc.y) + lp.offset,
        x,
        y: doc.y,
        s,
        iters: 0,
        metrics,
    })
}

fn check_len(section: &'static str, found: usize, expected: usize) -> Result<(), FormatError> {
    if found != expected {
        return Err(FormatError::LengthMismatch { section, expected, found });
    }
    Ok(())
}

fn parse_status(s: &str) -> Result<SolveStatus, FormatError> {
    Ok(match s {
        "optimal" => SolveStatus::Optimal,
        "max_iters" => SolveStatus::MaxIters,
        "infeasible_certificate" => SolveStatus::InfeasibleCertificate,
        "unbounded_certificate" => SolveStatus::UnboundedCertificate,
        "numerical_error" => SolveStatus::NumericalError,
        other => return Err(FormatError::UnknownStatus(other.to_string())),
    })
}

fn to_file_order(internal: &[f64], manifest: &ExportManifest) -> Vec<f64> {
    let mut out = vec![0.0; manifest.file_len()];
    for (k, &coord) in manifest.index_map.iter().enumerate() {
        let v = match coord {
            SlotCoord::PsdEntry { row, col, .. } if row != col => internal[k] / SQRT2,
            _ => internal[k],
        };
        out[manifest.file_pos(coord)] = v;
    }
    out
}

fn from_file_order(file: &[f64], manifest: &ExportManifest) -> Vec<f64> {
    let mut out = vec![0.0; manifest.index_map.len()];
    for (k, &coord) in manifest.index_map.iter().enumerate() {
        let v = file[manifest.file_pos(coord)];
        out[k] = match coord {
            SlotCoord::PsdEntry { row, col, .. } if row != col => v * SQRT2,
            _ => v,
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conesolve::{self, Settings};
    use crate::sparse::CscMatrix;

    fn small_sdp() -> ConeLP {
        // min tr(diag(2, 1) X) s.t. tr X = 1, X psd, plus a nonneg slack
        // x0 with x0 = 0.25 pinned by a second row.
        let triplets = vec![
            (0usize, 1usize, 1.0),
            (0, 3, 1.0),
            (1, 0, 1.0),
        ];
        ConeLP {
            a: CscMatrix::from_triplets(2, 4, &triplets),
            b: vec![1.0, 0.25],
            c: vec![0.0, 2.0, 0.5, 1.0],
            blocks: vec![ConeBlock::NonNeg(1), ConeBlock::PsdSym(2)],
            offset: 0.75,
        }
    }

    #[test]
    fn manifest_covers_every_slot_exactly_once() {
        let lp = small_sdp();
        let man = manifest_for(&lp).unwrap();
        assert_eq!(man.index_map.len(), lp.n_var());
        let mut seen = vec![false; man.file_len()];
        for &coord in &man.index_map {
            let pos = man.file_pos(coord);
            assert!(!seen[pos], "file position {pos} mapped twice");
            seen[pos] = true;
        }
        assert!(seen.iter().all(|&v| v), "unused file positions");
    }

    #[test]
    fn hermitian_blocks_are_rejected() {
        let lp = ConeLP {
            a: CscMatrix::from_triplets(1, 4, &[(0, 0, 1.0)]),
            b: vec![1.0],
            c: vec![0.0; 4],
            blocks: vec![ConeBlock::PsdHerm(2)],
            offset: 0.0,
        };
        match manifest_for(&lp) {
            Err(FormatError::HermitianBlock { index: 0 }) => {}
            other => panic!("expected a Hermitian precondition error, got {other:?}"),
        }
    }

    #[test]
    fn solution_roundtrip_is_identity() {
        let lp = small_sdp();
        let sol = conesolve::solve(&lp, &Settings::default());
        assert_eq!(sol.status, conesolve::SolveStatus::Optimal);
        let man = manifest_for(&lp).unwrap();
        let text = write_solution(&sol, &man);
        let back = read_solution(&text, &man, &lp).unwrap();
        assert_eq!(back.status, sol.status);
        assert_eq!(back.y, sol.y);
        // Scalar slots come back bit-identical; matrix off-diagonals pass
        // through one divide and one multiply by sqrt(2).
        for (a, b) in back.x.iter().zip(&sol.x) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
        for (a, b) in back.s.iter().zip(&sol.s) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        assert!((back.objective - sol.objective).abs() <= 1e-12 * sol.objective.abs().max(1.0));
        assert!(back.metrics.max_abs() <= sol.metrics.max_abs() + 1e-12);
    }

    #[test]
    fn off_diagonal_entries_are_unscaled_in_the_file() {
        let lp = small_sdp();
        let man = manifest_for(&lp).unwrap();
        // Internal slot 2 is the (0, 1) entry of the matrix block.
        assert_eq!(man.index_map[2], SlotCoord::PsdEntry { var: 0, row: 1, col: 0 });
        let internal = vec![1.0, 2.0, 3.0, 4.0];
        let file = to_file_order(&internal, &man);
        let pos = man.file_pos(man.index_map[2]);
        assert_eq!(file[pos], 3.0 / SQRT2);
        let back = from_file_order(&file, &man);
        assert_eq!(back[0], 1.0);
        assert_eq!(back[1], 2.0);
        assert_eq!(back[3], 4.0);
    }

    #[test]
    fn truncated_solution_names_the_bad_section() {
        let lp = small_sdp();
        let man = manifest_for(&lp).unwrap();
        let sol = conesolve::solve(&lp, &Settings::default());
        let text = write_solution(&sol, &man);
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["s"].as_array_mut().unwrap().pop();
        let bad = serde_json::to_string(&doc).unwrap();
        match read_solution(&bad, &man, &lp) {
            Err(FormatError::LengthMismatch { section: "s", expected, found }) => {
                assert_eq!(expected, found + 1);
            }
            other => panic!("expected a length mismatch on s, got {other:?}"),
        }
    }

    #[test]
    fn unknown_status_is_an_error() {
        let lp = small_sdp();
        let man = manifest_for(&lp).unwrap();
        let text = r#"{"status":"maybe","x":[],"y":[],"s":[]}"#;
        match read_solution(text, &man, &lp) {
            Err(FormatError::UnknownStatus(s)) => assert_eq!(s, "maybe"),
            other => panic!("expected an unknown-status error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_serializes_and_restores() {
        let lp = small_sdp();
        let man = manifest_for(&lp).unwrap();
        let text = serde_json::to_string_pretty(&man).unwrap();
        let back: ExportManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.index_map, man.index_map);
        assert_eq!(back.layout, man.layout);
        assert_eq!(back.offset, man.offset);
    }
}
