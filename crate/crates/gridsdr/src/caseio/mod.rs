//! Network case data: parsing, validation, per-unit conversion, and
//! preprocessing.
//!
//! All quantities in [`CaseData`] are already per-unit on the system MVA
//! base; angles are radians. Cost coefficients apply to per-unit active
//! injections and yield cost in the currency of the source file. The parser
//! keeps out-of-service rows (flagged) so a case can be re-serialized
//! faithfully; [`preprocess`] is the step that removes them.

mod parse;
mod preprocess;

pub use parse::parse_matpower;
pub use preprocess::{preprocess, PreprocessOptions, PreprocessSummary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors arising while reading, validating, or preprocessing a case.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("syntax error at line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing required section mpc.{0}")]
    MissingSection(String),
    #[error("bad {section} row {index}: {msg}")]
    BadRow { section: &'static str, index: usize, msg: String },
    #[error("duplicate bus id {0}")]
    DuplicateBus(u32),
    #[error("{section} row {index} references unknown bus {id}")]
    UnknownBus { section: &'static str, index: usize, id: u32 },
    #[error("generator {index} has unsupported cost: {msg}")]
    UnsupportedCost { index: usize, msg: String },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("network splits into {islands} islands after removing out-of-service equipment")]
    Disconnected { islands: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    Pq,
    Pv,
    Ref,
    Isolated,
}

/// A bus with demand, shunt admittance, and voltage magnitude bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External bus number from the source file; not necessarily contiguous.
    pub id: u32,
    pub kind: BusKind,
    /// Active demand, p.u.
    pub pd: f64,
    /// Reactive demand, p.u.
    pub qd: f64,
    /// Shunt conductance, p.u.
    pub gs: f64,
    /// Shunt susceptance, p.u.
    pub bs: f64,
    /// Voltage magnitude bounds, p.u.
    pub vmin: f64,
    pub vmax: f64,
    pub base_kv: f64,
}

/// Convex polynomial generation cost `alpha*p^2 + beta*p + gamma` with `p`
/// the active injection in p.u.; the value is cost per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CostCurve {
    pub fn eval(&self, p: f64) -> f64 {
        (self.alpha * p + self.beta) * p + self.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gen {
    /// Bus this generator injects at.
    pub bus: u32,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub in_service: bool,
    pub cost: CostCurve,
    /// Set by preprocessing when the active injection is pinned
    /// (`pmin == pmax`); such a generator contributes a constant.
    pub p_fixed: bool,
    /// Like `p_fixed`, for the reactive injection.
    pub q_fixed: bool,
}

/// A transmission line or transformer on the standard pi model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    /// Series resistance, p.u. May be negative in reduced equivalents.
    pub r: f64,
    /// Series reactance, p.u.
    pub x: f64,
    /// Total line charging susceptance, p.u.
    pub b: f64,
    /// Apparent power rating, p.u.; `0` means unlimited.
    pub rate: f64,
    /// Off-nominal tap ratio at the from side; `1` for lines.
    pub tap: f64,
    /// Phase shift at the from side, radians.
    pub shift: f64,
    pub in_service: bool,
    /// Raw angle-difference bounds from the source file, degrees. Kept in
    /// degrees so the unconstrained sentinels stay exact.
    pub ang_min_deg: f64,
    pub ang_max_deg: f64,
}

impl Branch {
    /// Angle-difference bounds in radians, if this branch carries an actual
    /// phase constraint.
    ///
    /// Bounds of `(0, 0)`, bounds of magnitude 360 degrees, and bounds at or
    /// beyond 90 degrees all mean "unconstrained": the first two are the
    /// conventional sentinels, and beyond 90 degrees the tangent-based
    /// linearization is meaningless.
    pub fn phase_bounds(&self) -> Option<(f64, f64)> {
        let (lo, hi) = (self.ang_min_deg, self.ang_max_deg);
        if (lo, hi) == (0.0, 0.0) || lo.abs() >= 90.0 || hi.abs() >= 90.0 {
            None
        } else {
            Some((lo.to_radians(), hi.to_radians()))
        }
    }

    /// Whether this branch has a flow limit.
    pub fn has_rate(&self) -> bool {
        self.rate > 0.0
    }
}

/// A parsed, validated, per-unit network case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseData {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub gens: Vec<Gen>,
    pub branches: Vec<Branch>,
    /// Non-fatal irregularities encountered while parsing.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CaseData {
    /// Position of each bus id in `buses`.
    pub fn bus_index(&self) -> std::collections::HashMap<u32, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Index of the reference bus, falling back to bus 0 when the case does
    /// not mark one.
    pub fn ref_bus(&self) -> usize {
        self.buses.iter().position(|b| b.kind == BusKind::Ref).unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Serializes back to the source text format, in MW and degrees.
    pub fn to_matpower_string(&self) -> String {
        use std::fmt::Write;
        let b = self.base_mva;
        let mut s = String::new();
        writeln!(s, "function mpc = {}", self.name).unwrap();
        writeln!(s, "mpc.version = '2';").unwrap();
        writeln!(s, "mpc.baseMVA = {};", fmt_g(b)).unwrap();
        writeln!(s, "mpc.bus = [").unwrap();
        for bus in &self.buses {
            let kind = match bus.kind {
                BusKind::Pq => 1,
                BusKind::Pv => 2,
                BusKind::Ref => 3,
                BusKind::Isolated => 4,
            };
            writeln!(
                s,
                "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t1\t0\t{}\t1\t{}\t{};",
                bus.id,
                kind,
                fmt_g(bus.pd * b),
                fmt_g(bus.qd * b),
                fmt_g(bus.gs * b),
                fmt_g(bus.bs * b),
                fmt_g(bus.base_kv),
                fmt_g(bus.vmax),
                fmt_g(bus.vmin)
            )
            .unwrap();
        }
        writeln!(s, "];").unwrap();
        writeln!(s, "mpc.gen = [").unwrap();
        for g in &self.gens {
            writeln!(
                s,
                "\t{}\t0\t0\t{}\t{}\t1\t{}\t{}\t{}\t{};",
                g.bus,
                fmt_g(g.qmax * b),
                fmt_g(g.qmin * b),
                fmt_g(b),
                if g.in_service { 1 } else { 0 },
                fmt_g(g.pmax * b),
                fmt_g(g.pmin * b)
            )
            .unwrap();
        }
        writeln!(s, "];").unwrap();
        writeln!(s, "mpc.branch = [").unwrap();
        for br in &self.branches {
            // A unit tap is written as the 0 sentinel, matching convention.
            let tap = if br.tap == 1.0 { 0.0 } else { br.tap };
            writeln!(
                s,
                "\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t{}\t{}\t{}\t{}\t{};",
                br.from,
                br.to,
                fmt_g(br.r),
                fmt_g(br.x),
                fmt_g(br.b),
                fmt_g(br.rate * b),
                fmt_g(tap),
                fmt_g(br.shift.to_degrees()),
                if br.in_service { 1 } else { 0 },
                fmt_g(br.ang_min_deg),
                fmt_g(br.ang_max_deg)
            )
            .unwrap();
        }
        writeln!(s, "];").unwrap();
        writeln!(s, "mpc.gencost = [").unwrap();
        for g in &self.gens {
            writeln!(
                s,
                "\t2\t0\t0\t3\t{}\t{}\t{};",
                fmt_g(g.cost.alpha / (b * b)),
                fmt_g(g.cost.beta / b),
                fmt_g(g.cost.gamma)
            )
            .unwrap();
        }
        writeln!(s, "];").unwrap();
        s
    }
}

/// Shortest round-trippable decimal form, with whole numbers kept plain.
fn fmt_g(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
