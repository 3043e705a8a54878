//! Conic Benchmark Format, version 2, for the block structure this crate
//! produces: nonnegative and second-order scalar cones, semidefinite matrix
//! variables, and equality rows.
//!
//! The writer emits a fixed section order with shortest round-trip decimal
//! floats, so identical problems serialize to identical bytes. Equality rows
//! `a'x = b` are encoded as `a'x - b` in the zero cone, hence `BCOORD` holds
//! `-b`. Matrix coefficients are written on the lower triangle with
//! off-diagonal values halved relative to the symmetrized pair, which in the
//! packed sqrt(2) layout means dividing the stored slot value by sqrt(2).
//! The reader accepts exactly this subset and rebuilds the problem with
//! scalar cones first and matrix blocks after them, the order the conversion
//! pipeline itself uses.

use std::fmt::Write as _;

use super::{manifest_for, ExportManifest, FormatError, SlotCoord};
use crate::relax::hvec::SQRT2;
use crate::relax::{ConeBlock, ConeLP};
use crate::sparse::CscMatrix;

/// Serializes a realified problem; returns the file text and its manifest.
pub fn write_cbf(lp: &ConeLP) -> Result<(String, ExportManifest), FormatError> {
    let manifest = manifest_for(lp)?;
    let mut acoord: Vec<(usize, usize, f64)> = Vec::new();
    let mut fcoord: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    for (i, j, v) in lp.a.iter() {
        match manifest.index_map[j] {
            SlotCoord::Scalar { var } => acoord.push((i, var, v)),
            SlotCoord::PsdEntry { var, row, col } => {
                let f = if row == col { v } else { v / SQRT2 };
                fcoord.push((i, var, row, col, f));
            }
        }
    }
    acoord.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    fcoord.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));

    let mut obja: Vec<(usize, f64)> = Vec::new();
    let mut objf: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (j, &v) in lp.c.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        match manifest.index_map[j] {
            SlotCoord::Scalar { var } => obja.push((var, v)),
            SlotCoord::PsdEntry { var, row, col } => {
                let f = if row == col { v } else { v / SQRT2 };
                objf.push((var, row, col, f));
            }
        }
    }
    obja.sort_by(|a, b| a.0.cmp(&b.0));
    objf.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));

    let mut out = String::new();
    let w = &mut out;
    write!(w, "VER\n2\n\n").unwrap();
    write!(w, "OBJSENSE\nMIN\n\n").unwrap();

    let psd_orders = manifest.psd_orders();
    if !psd_orders.is_empty() {
        write!(w, "PSDVAR\n{}\n", psd_orders.len()).unwrap();
        for r in &psd_orders {
            write!(w, "{r}\n").unwrap();
        }
        write!(w, "\n").unwrap();
    }

    let groups: Vec<(&str, usize)> = lp
        .blocks
        .iter()
        .filter_map(|b| match b {
            ConeBlock::NonNeg(len) => Some(("L+", *len)),
            ConeBlock::Soc(len) => Some(("Q", *len)),
            _ => None,
        })
        .collect();
    if !groups.is_empty() {
        let n_scalar: usize = groups.iter().map(|g| g.1).sum();
        write!(w, "VAR\n{} {}\n", n_scalar, groups.len()).unwrap();
        for (kind, len) in &groups {
            write!(w, "{kind} {len}\n").unwrap();
        }
        write!(w, "\n").unwrap();
    }

    write!(w, "CON\n{} 1\nL= {}\n\n", lp.n_row(), lp.n_row()).unwrap();

    if !objf.is_empty() {
        write!(w, "OBJFCOORD\n{}\n", objf.len()).unwrap();
        for (var, row, col, v) in &objf {
            write!(w, "{var} {row} {col} {v:e}\n").unwrap();
        }
        write!(w, "\n").unwrap();
    }
    if !obja.is_empty() {
        write!(w, "OBJACOORD\n{}\n", obja.len()).unwrap();
        for (var, v) in &obja {
            write!(w, "{var} {v:e}\n").unwrap();
        }
        write!(w, "\n").unwrap();
    }
    write!(w, "OBJBCOORD\n{:e}\n\n", lp.offset).unwrap();

    if !fcoord.is_empty() {
        write!(w, "FCOORD\n{}\n", fcoord.len()).unwrap();
        for (con, var, row, col, v) in &fcoord {
            write!(w, "{con} {var} {row} {col} {v:e}\n").unwrap();
        }
        write!(w, "\n").unwrap();
    }
    if !acoord.is_empty() {
        write!(w, "ACOORD\n{}\n", acoord.len()).unwrap();
        for (con, var, v) in &acoord {
            write!(w, "{con} {var} {v:e}\n").unwrap();
        }
        write!(w, "\n").unwrap();
    }
    let bcoord: Vec<(usize, f64)> =
        lp.b.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, -v)).collect();
    if !bcoord.is_empty() {
        write!(w, "BCOORD\n{}\n", bcoord.len()).unwrap();
        for (con, v) in &bcoord {
            write!(w, "{con} {v:e}\n").unwrap();
        }
        write!(w, "\n").unwrap();
    }
    Ok((out, manifest))
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines { iter: text.lines().enumerate() }
    }

    /// Next non-blank, non-comment line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (idx, line) in self.iter.by_ref() {
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((idx + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), FormatError> {
        self.next().ok_or_else(|| FormatError::Malformed(format!("missing {what}")))
    }
}

fn bad(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

fn parse_fields<const K: usize>(line: usize, text: &str) -> Result<[f64; K], FormatError> {
    let mut out = [0.0; K];
    let mut parts = text.split_whitespace();
    for slot in &mut out {
        let tok = parts.next().ok_or_else(|| bad(line, format!("expected {K} fields")))?;
        *slot = tok.parse().map_err(|_| bad(line, format!("bad number {tok:?}")))?;
    }
    if parts.next().is_some() {
        return Err(bad(line, format!("expected {K} fields")));
    }
    Ok(out)
}

/// Parses the documented subset back into a problem.
///
/// Scalar cone groups become blocks in file order, followed by one symmetric
/// PSD block per matrix variable.
pub fn read_cbf(text: &str) -> Result<ConeLP, FormatError> {
    let mut lines = Lines::new(text);
    let (ver_line, ver_kw) = lines.expect("VER header")?;
    if ver_kw != "VER" {
        return Err(bad(ver_line, format!("expected VER, found {ver_kw:?}")));
    }
    let (vline, vtext) = lines.expect("format version")?;
    let version: u32 = vtext.parse().map_err(|_| bad(vline, "bad version number"))?;
    if !(1..=3).contains(&version) {
        return Err(bad(vline, format!("unsupported format version {version}")));
    }

    let mut psd_orders: Vec<usize> = Vec::new();
    let mut groups: Vec<(String, usize)> = Vec::new();
    let mut n_row = 0usize;
    let mut offset = 0.0f64;
    // Coordinate tuples keep the source line so range errors can point at it.
    let mut acoord: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut fcoord: Vec<(usize, usize, usize, usize, usize, f64)> = Vec::new();
    let mut bcoord: Vec<(usize, usize, f64)> = Vec::new();
    let mut obja: Vec<(usize, usize, f64)> = Vec::new();
    let mut objf: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    let mut saw_objsense = false;

    while let Some((kw_line, kw)) = lines.next() {
        match kw {
            "OBJSENSE" => {
                let (l, sense) = lines.expect("objective sense")?;
                if sense != "MIN" {
                    return Err(bad(l, format!("only MIN is supported, found {sense:?}")));
                }
                saw_objsense = true;
            }
            "PSDVAR" => {
                let (l, count) = lines.expect("PSDVAR count")?;
                let count: usize = count.parse().map_err(|_| bad(l, "bad PSDVAR count"))?;
                for _ in 0..count {
                    let (l, dim) = lines.expect("PSDVAR dimension")?;
                    psd_orders.push(dim.parse().map_err(|_| bad(l, "bad PSDVAR dimension"))?);
                }
            }
            "VAR" => {
                let (l, head) = lines.expect("VAR header")?;
                let [n, k] = parse_fields::<2>(l, head)?;
                let (n, k) = (n as usize, k as usize);
                let mut total = 0usize;
                for _ in 0..k {
                    let (l, g) = lines.expect("VAR cone group")?;
                    let mut it = g.split_whitespace();
                    let kind = it.next().ok_or_else(|| bad(l, "empty cone group"))?;
                    let len: usize = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(l, "bad cone group length"))?;
                    match kind {
                        "L+" | "Q" => groups.push((kind.to_string(), len)),
                        other => {
                            return Err(bad(l, format!("unsupported variable cone {other:?}")))
                        }
                    }
                    total += len;
                }
                if total != n {
                    return Err(bad(l, format!("cone groups cover {total} of {n} variables")));
                }
            }
            "CON" => {
                let (l, head) = lines.expect("CON header")?;
                let [m, k] = parse_fields::<2>(l, head)?;
                n_row = m as usize;
                let mut total = 0usize;
                for _ in 0..k as usize {
                    let (l, g) = lines.expect("CON cone group")?;
                    let mut it = g.split_whitespace();
                    let kind = it.next().ok_or_else(|| bad(l, "empty cone group"))?;
                    let len: usize = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(l, "bad cone group length"))?;
                    if kind != "L=" {
                        return Err(bad(l, format!("unsupported constraint cone {kind:?}")));
                    }
                    total += len;
                }
                if total != n_row {
                    return Err(bad(l, format!("cone groups cover {total} of {n_row} rows")));
                }
            }
            "OBJFCOORD" => {
                for_entries(&mut lines, "OBJFCOORD", |l, t| {
                    let [var, row, col, v] = parse_fields::<4>(l, t)?;
                    objf.push((l, var as usize, row as usize, col as usize, v));
                    Ok(())
                })?;
            }
            "OBJACOORD" => {
                for_entries(&mut lines, "OBJACOORD", |l, t| {
                    let [var, v] = parse_fields::<2>(l, t)?;
                    obja.push((l, var as usize, v));
                    Ok(())
                })?;
            }
            "OBJBCOORD" => {
                let (l, t) = lines.expect("OBJBCOORD value")?;
                let [v] = parse_fields::<1>(l, t)?;
                offset = v;
            }
            "FCOORD" => {
                for_entries(&mut lines, "FCOORD", |l, t| {
                    let [con, var, row, col, v] = parse_fields::<5>(l, t)?;
                    fcoord.push((l, con as usize, var as usize, row as usize, col as usize, v));
                    Ok(())
                })?;
            }
            "ACOORD" => {
                for_entries(&mut lines, "ACOORD", |l, t| {
                    let [con, var, v] = parse_fields::<3>(l, t)?;
                    acoord.push((l, con as usize, var as usize, v));
                    Ok(())
                })?;
            }
            "BCOORD" => {
                for_entries(&mut lines, "BCOORD", |l, t| {
                    let [con, v] = parse_fields::<2>(l, t)?;
                    bcoord.push((l, con as usize, v));
                    Ok(())
                })?;
            }
            other => return Err(bad(kw_line, format!("unsupported section {other:?}"))),
        }
    }
    if !saw_objsense {
        return Err(FormatError::Malformed("missing OBJSENSE section".into()));
    }

    let n_scalar: usize = groups.iter().map(|g| g.1).sum();
    let psd_base: Vec<usize> = psd_orders
        .iter()
        .scan(n_scalar, |acc, r| {
            let base = *acc;
            *acc += r * (r + 1) / 2;
            Some(base)
        })
        .collect();
    let n_var = n_scalar + psd_orders.iter().map(|r| r * (r + 1) / 2).sum::<usize>();

    let psd_col = |line: usize, var: usize, row: usize, col: usize| {
        if var >= psd_orders.len() {
            return Err(bad(line, format!("matrix variable {var} out of range")));
        }
        if row >= psd_orders[var] || col > row {
            return Err(bad(line, format!("entry ({row}, {col}) outside the lower triangle")));
        }
        Ok(psd_base[var] + row * (row + 1) / 2 + col)
    };
    let check_scalar = |line: usize, var: usize| {
        if var >= n_scalar {
            return Err(bad(line, format!("scalar variable {var} out of range")));
        }
        Ok(var)
    };
    let check_row = |line: usize, con: usize| {
        if con >= n_row {
            return Err(bad(line, format!("constraint {con} out of range")));
        }
        Ok(con)
    };

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (l, con, var, v) in acoord {
        triplets.push((check_row(l, con)?, check_scalar(l, var)?, v));
    }
    for (l, con, var, row, col, f) in fcoord {
        let j = psd_col(l, var, row, col)?;
        let v = if row == col { f } else { f * SQRT2 };
        triplets.push((check_row(l, con)?, j, v));
    }
    let mut b = vec![0.0; n_row];
    for (l, con, v) in bcoord {
        b[check_row(l, con)?] = -v;
    }
    let mut c = vec![0.0; n_var];
    for (l, var, v) in obja {
        c[check_scalar(l, var)?] = v;
    }
    for (l, var, row, col, f) in objf {
        let j = psd_col(l, var, row, col)?;
        c[j] = if row == col { f } else { f * SQRT2 };
    }

    let mut blocks: Vec<ConeBlock> = groups
        .into_iter()
        .map(|(kind, len)| if kind == "L+" { ConeBlock::NonNeg(len) } else { ConeBlock::Soc(len) })
        .collect();
    blocks.extend(psd_orders.into_iter().map(ConeBlock::PsdSym));

    Ok(ConeLP { a: CscMatrix::from_triplets(n_row, n_var, &triplets), b, c, blocks, offset })
}

fn for_entries(
    lines: &mut Lines,
    section: &str,
    mut f: impl FnMut(usize, &str) -> Result<(), FormatError>,
) -> Result<(), FormatError> {
    let (l, count) = lines.expect(&format!("{section} count"))?;
    let count: usize = count.parse().map_err(|_| bad(l, format!("bad {section} count")))?;
    for k in 0..count {
        let (l, t) = lines
            .next()
            .ok_or_else(|| FormatError::Malformed(format!("{section} ends after {k} entries")))?;
        f(l, t)?;
    }
    Ok(())
}
