//! Parser for the MATPOWER case text format, version 2.
//!
//! The format is a MATLAB script assigning fields of a struct `mpc`. Only
//! the assignment forms that occur in case files are understood: scalars,
//! quoted strings, numeric matrices in brackets, and cell arrays in braces.
//! Unknown fields are skipped with a warning so files carrying extra
//! metadata (generator fuel types, bus names) still load.

use super::{Branch, Bus, BusKind, CaseData, CaseError, CostCurve, Gen};
use std::collections::HashMap;

/// Parses case text into validated per-unit data.
pub fn parse_matpower(text: &str) -> Result<CaseData, CaseError> {
    let raw = scan_sections(text)?;
    build_case(raw)
}

/// A numeric matrix section.
struct Section {
    rows: Vec<Vec<f64>>,
}

struct RawCase {
    name: String,
    base_mva: Option<f64>,
    sections: HashMap<String, Section>,
    warnings: Vec<String>,
}

fn strip_comment(line: &str) -> &str {
    // A comment starts at a percent sign outside single quotes.
    let mut in_quote = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '\'' => in_quote = !in_quote,
            '%' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

fn scan_sections(text: &str) -> Result<RawCase, CaseError> {
    let mut raw = RawCase {
        name: "case".to_string(),
        base_mva: None,
        sections: HashMap::new(),
        warnings: Vec::new(),
    };
    let mut lines = text.lines().enumerate().peekable();
    while let Some((idx, line)) = lines.next() {
        let line = strip_comment(line).trim();
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some(name) = rest.split('=').nth(1) {
                raw.name = name.trim().trim_end_matches(';').to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            raw.warnings.push(format!("line {lineno}: ignored statement: {line}"));
            continue;
        };
        let Some(eq) = rest.find('=') else {
            raw.warnings.push(format!("line {lineno}: ignored statement: {line}"));
            continue;
        };
        let field = rest[..eq].trim().to_string();
        let value = rest[eq + 1..].trim();
        if value.starts_with('[') {
            // Numeric matrix, possibly spanning many lines.
            let mut body = value[1..].to_string();
            let mut closed = body.contains(']');
            while !closed {
                let Some((_, next)) = lines.next() else {
                    return Err(CaseError::Syntax { line: lineno, msg: format!("unterminated matrix mpc.{field}") });
                };
                body.push('\n');
                body.push_str(strip_comment(next));
                closed = next.contains(']');
            }
            let body = body[..body.find(']').unwrap()].to_string();
            let rows = parse_matrix(&body, lineno)?;
            raw.sections.insert(field, Section { rows });
        } else if value.starts_with('{') {
            // Cell array: irrelevant metadata, skip to the closing brace.
            let mut closed = value.contains('}');
            while !closed {
                let Some((_, next)) = lines.next() else {
                    return Err(CaseError::Syntax { line: lineno, msg: format!("unterminated cell array mpc.{field}") });
                };
                closed = strip_comment(next).contains('}');
            }
            raw.warnings.push(format!("line {lineno}: skipped cell array mpc.{field}"));
        } else if field == "version" {
            let v = value.trim_end_matches(';').trim().trim_matches('\'');
            if v != "2" {
                raw.warnings.push(format!("line {lineno}: file declares version '{v}', expected '2'"));
            }
        } else if field == "baseMVA" {
            let v = value.trim_end_matches(';').trim();
            let num: f64 = v
                .parse()
                .map_err(|_| CaseError::Syntax { line: lineno, msg: format!("bad baseMVA value: {v}") })?;
            raw.base_mva = Some(num);
        } else {
            raw.warnings.push(format!("line {lineno}: skipped scalar field mpc.{field}"));
        }
    }
    Ok(raw)
}

fn parse_matrix(body: &str, lineno: usize) -> Result<Vec<Vec<f64>>, CaseError> {
    let mut rows = Vec::new();
    for piece in body.split(|c| c == ';' || c == '\n') {
        let toks: Vec<&str> = piece.split([' ', '\t', ',']).filter(|t| !t.is_empty()).collect();
        if toks.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(toks.len());
        for t in toks {
            let v: f64 = t
                .parse()
                .map_err(|_| CaseError::Syntax { line: lineno, msg: format!("bad number: {t}") })?;
            if v.is_nan() {
                return Err(CaseError::Syntax { line: lineno, msg: "NaN entry".to_string() });
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn int_field(v: f64, section: &'static str, index: usize, what: &str) -> Result<u32, CaseError> {
    if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) {
        Ok(v as u32)
    } else {
        Err(CaseError::BadRow { section, index, msg: format!("{what} must be a nonnegative integer, got {v}") })
    }
}

fn build_case(raw: RawCase) -> Result<CaseData, CaseError> {
    let base = raw.base_mva.ok_or_else(|| CaseError::MissingSection("baseMVA".into()))?;
    if !(base > 0.0) {
        return Err(CaseError::InvalidData(format!("baseMVA must be positive, got {base}")));
    }
    let mut warnings = raw.warnings;
    let mut sections = raw.sections;
    let bus_sec = sections.remove("bus").ok_or_else(|| CaseError::MissingSection("bus".into()))?;
    let gen_sec = sections.remove("gen").ok_or_else(|| CaseError::MissingSection("gen".into()))?;
    let branch_sec = sections.remove("branch").ok_or_else(|| CaseError::MissingSection("branch".into()))?;
    let cost_sec = sections.remove("gencost").ok_or_else(|| CaseError::MissingSection("gencost".into()))?;
    for name in sections.keys() {
        warnings.push(format!("skipped unrecognized matrix section mpc.{name}"));
    }

    // --- buses ---
    let mut buses = Vec::with_capacity(bus_sec.rows.len());
    let mut ids = HashMap::new();
    for (i, row) in bus_sec.rows.iter().enumerate() {
        if row.len() < 13 {
            return Err(CaseError::BadRow { section: "bus", index: i, msg: format!("expected 13 columns, got {}", row.len()) });
        }
        let id = int_field(row[0], "bus", i, "bus id")?;
        if ids.insert(id, i).is_some() {
            return Err(CaseError::DuplicateBus(id));
        }
        let kind = match row[1] as i64 {
            1 => BusKind::Pq,
            2 => BusKind::Pv,
            3 => BusKind::Ref,
            4 => BusKind::Isolated,
            other => {
                return Err(CaseError::BadRow { section: "bus", index: i, msg: format!("unknown bus type {other}") });
            }
        };
        let (vmax, vmin) = (row[11], row[12]);
        if kind != BusKind::Isolated {
            if !(vmin > 0.0) {
                return Err(CaseError::BadRow { section: "bus", index: i, msg: format!("vmin must be positive, got {vmin}") });
            }
            if vmin > vmax {
                return Err(CaseError::BadRow { section: "bus", index: i, msg: format!("vmin {vmin} exceeds vmax {vmax}") });
            }
        }
        buses.push(Bus {
            id,
            kind,
            pd: row[2] / base,
            qd: row[3] / base,
            gs: row[4] / base,
            bs: row[5] / base,
            vmin,
            vmax,
            base_kv: row[9],
        });
    }

    // --- generators and their costs ---
    let ng = gen_sec.rows.len();
    let cost_rows: &[Vec<f64>] = if cost_sec.rows.len() == ng {
        &cost_sec.rows
    } else if cost_sec.rows.len() == 2 * ng {
        warnings.push("gencost has reactive cost rows; they are ignored".to_string());
        &cost_sec.rows[..ng]
    } else {
        return Err(CaseError::InvalidData(format!(
            "gencost has {} rows for {} generators",
            cost_sec.rows.len(),
            ng
        )));
    };
    let mut gens = Vec::with_capacity(ng);
    for (i, (row, cost)) in gen_sec.rows.iter().zip(cost_rows).enumerate() {
        if row.len() < 10 {
            return Err(CaseError::BadRow { section: "gen", index: i, msg: format!("expected at least 10 columns, got {}", row.len()) });
        }
        let bus = int_field(row[0], "gen", i, "bus id")?;
        if !ids.contains_key(&bus) {
            return Err(CaseError::UnknownBus { section: "gen", index: i, id: bus });
        }
        gens.push(Gen {
            bus,
            pmin: row[9] / base,
            pmax: row[8] / base,
            qmin: row[4] / base,
            qmax: row[3] / base,
            in_service: row[7] > 0.0,
            cost: parse_cost(cost, i, base)?,
            p_fixed: false,
            q_fixed: false,
        });
    }

    // --- branches ---
    let mut branches = Vec::with_capacity(branch_sec.rows.len());
    for (i, row) in branch_sec.rows.iter().enumerate() {
        if row.len() < 13 {
            return Err(CaseError::BadRow { section: "branch", index: i, msg: format!("expected 13 columns, got {}", row.len()) });
        }
        let from = int_field(row[0], "branch", i, "from bus")?;
        let to = int_field(row[1], "branch", i, "to bus")?;
        for id in [from, to] {
            if !ids.contains_key(&id) {
                return Err(CaseError::UnknownBus { section: "branch", index: i, id });
            }
        }
        let in_service = row[10] > 0.0;
        let (r, x) = (row[2], row[3]);
        if in_service {
            if from == to {
                return Err(CaseError::BadRow { section: "branch", index: i, msg: "self loop".to_string() });
            }
            if r * r + x * x == 0.0 {
                return Err(CaseError::BadRow { section: "branch", index: i, msg: "zero series impedance".to_string() });
            }
        }
        let tap = if row[8] == 0.0 { 1.0 } else { row[8] };
        if tap <= 0.0 {
            return Err(CaseError::BadRow { section: "branch", index: i, msg: format!("tap ratio must be positive, got {tap}") });
        }
        branches.push(Branch {
            from,
            to,
            r,
            x,
            b: row[4],
            rate: row[5] / base,
            tap,
            shift: row[9].to_radians(),
            in_service,
            ang_min_deg: row[11],
            ang_max_deg: row[12],
        });
    }

    Ok(CaseData { name: raw.name, base_mva: base, buses, gens, branches, warnings })
}

/// Converts one gencost row to per-unit polynomial coefficients.
///
/// Row layout: `model startup shutdown n c(n-1) ... c0`, where model 2 is a
/// polynomial in MW. The polynomial may carry trailing high-order zero
/// coefficients; only a nonzero coefficient above degree two is an error,
/// as is a nonconvex quadratic term.
fn parse_cost(row: &[f64], index: usize, base: f64) -> Result<CostCurve, CaseError> {
    if row.len() < 4 {
        return Err(CaseError::BadRow { section: "gencost", index, msg: "short row".to_string() });
    }
    let model = row[0] as i64;
    if model != 2 {
        return Err(CaseError::UnsupportedCost {
            index,
            msg: format!("cost model {model} (only polynomial model 2 is supported)"),
        });
    }
    let n = row[3] as usize;
    if row.len() < 4 + n {
        return Err(CaseError::BadRow { section: "gencost", index, msg: format!("row promises {n} coefficients but is short") });
    }
    let coeffs = &row[4..4 + n]; // highest order first
    let mut c = [0.0f64; 3]; // c[k] multiplies MW^k
    for (k, &v) in coeffs.iter().rev().enumerate() {
        if k <= 2 {
            c[k] = v;
        } else if v != 0.0 {
            return Err(CaseError::UnsupportedCost { index, msg: format!("polynomial degree {k} exceeds 2") });
        }
    }
    if c[2] < 0.0 {
        return Err(CaseError::UnsupportedCost { index, msg: "negative quadratic coefficient".to_string() });
    }
    Ok(CostCurve { alpha: c[2] * base * base, beta: c[1] * base, gamma: c[0] })
}
