//! The semidefinite relaxation as an explicit conic linear program.
//!
//! The relaxation of the operating problem replaces the voltage outer
//! product `v v'` by a Hermitian positive semidefinite matrix variable `X`
//! and keeps every physical constraint linear in `X`. The result is packed
//! into the standard primal form
//!
//! ```text
//!   minimize    c' x + offset
//!   subject to  A x = b,    x in K,
//! ```
//!
//! where `K` is a product of a nonnegative orthant (bound slacks), small
//! second-order cones (flow magnitudes and cost epigraphs), and one PSD
//! block (the packed `X`). Generators whose injections are pinned by equal
//! bounds contribute constants instead of variables.
//!
//! Everything about the layout is deterministic and documented on
//! [`SdrIndex`]; [`count_dims`] predicts all block sizes in closed form and
//! the builder asserts agreement.

pub mod hvec;

use crate::caseio::{CaseData, Gen};
use crate::netmodel::{BranchEnd, NetModel};
use crate::sparse::CscMatrix;
use hvec::HvecCodec;
use num_complex::Complex64;
use serde::Serialize;

type C = Complex64;

/// One factor of the cone `K`, in variable order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeBlock {
    /// Nonnegative orthant of the given dimension.
    NonNeg(usize),
    /// Second-order cone `{ z : z[0] >= |z[1..]| }` of the given dimension.
    Soc(usize),
    /// Hermitian PSD matrices of the given order, packed by [`HvecCodec`].
    PsdHerm(usize),
    /// Real symmetric PSD matrices of the given order, packed by
    /// [`hvec::SvecCodec`].
    PsdSym(usize),
}

impl ConeBlock {
    /// Number of scalar variables the block occupies.
    pub fn len(&self) -> usize {
        match *self {
            ConeBlock::NonNeg(d) | ConeBlock::Soc(d) => d,
            ConeBlock::PsdHerm(r) => r * r,
            ConeBlock::PsdSym(m) => m * (m + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A conic linear program in standard primal form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeLP {
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
    /// Constant added to `c' x` to report the objective.
    pub offset: f64,
}

impl ConeLP {
    pub fn n_var(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_row(&self) -> usize {
        self.a.nrows()
    }

    /// `(start, block)` pairs covering `0..n_var` in order.
    pub fn block_ranges(&self) -> impl Iterator<Item = (usize, ConeBlock)> + '_ {
        self.blocks.iter().scan(0usize, |acc, &blk| {
            let start = *acc;
            *acc += blk.len();
            Some((start, blk))
        })
    }

    /// Objective value at `x`, including the constant term.
    pub fn objective(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.c, x) + self.offset
    }

    /// Checks structural consistency of dimensions.
    pub fn validate(&self) -> Result<(), String> {
        let total: usize = self.blocks.iter().map(|b| b.len()).sum();
        if total != self.a.ncols() {
            return Err(format!("blocks cover {total} variables but A has {}", self.a.ncols()));
        }
        if self.b.len() != self.a.nrows() {
            return Err(format!("b has {} entries but A has {} rows", self.b.len(), self.a.nrows()));
        }
        if self.c.len() != self.a.ncols() {
            return Err(format!("c has {} entries but A has {} columns", self.c.len(), self.a.ncols()));
        }
        Ok(())
    }

    /// Serializes the full problem data as a JSON document: dimensions,
    /// cone blocks, dense `b` and `c`, the matrix as triplets, and the
    /// objective offset. Intended for debugging and for feeding external
    /// solvers; the format is stable.
    pub fn to_debug_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            n_var: usize,
            n_row: usize,
            offset: f64,
            blocks: &'a [ConeBlock],
            c: &'a [f64],
            b: &'a [f64],
            a_triplets: Vec<(usize, usize, f64)>,
        }
        let dump = Dump {
            n_var: self.n_var(),
            n_row: self.n_row(),
            offset: self.offset,
            blocks: &self.blocks,
            c: &self.c,
            b: &self.b,
            a_triplets: self.a.iter().collect(),
        };
        serde_json::to_string(&dump).expect("LP serialization cannot fail")
    }
}

/// Identity of a constraint row, for reports and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowLabel {
    /// Active power balance at a bus.
    BalanceP { bus: usize },
    /// Reactive power balance at a bus.
    BalanceQ { bus: usize },
    /// Pairing of lower and upper active bound slacks of a generator.
    GenPBox { gen: usize },
    GenQBox { gen: usize },
    /// `X[k,k]` tied to the squared voltage bounds.
    VoltLower { bus: usize },
    VoltUpper { bus: usize },
    /// Tangent cut for an angle-difference bound.
    PhaseLower { branch: usize },
    PhaseUpper { branch: usize },
    /// First element of a flow cone pinned to the rating.
    FlowCap { branch: usize, end: u8 },
    /// Cone elements tied to the real and imaginary flow.
    FlowRe { branch: usize, end: u8 },
    FlowIm { branch: usize, end: u8 },
    /// Cost epigraph cone rows of a quadratic-cost generator.
    EpiSum { gen: usize },
    EpiDiff { gen: usize },
    EpiLin { gen: usize },
    /// Equality of two copies of one matrix entry after conversion.
    Coupling { edge: usize, slot: usize },
}

/// Closed-form block sizes of the relaxation of a preprocessed case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub n_bus: usize,
    /// Generators with a free active injection.
    pub gen_p_free: usize,
    /// Generators with a free reactive injection.
    pub gen_q_free: usize,
    /// Generators contributing an epigraph cone: strictly convex cost and
    /// free active injection.
    pub gen_quad: usize,
    pub flow_limited: usize,
    pub phase_bounded: usize,
    /// Dimension of the nonnegative block.
    pub nonneg: usize,
    /// Number of three-dimensional second-order cones.
    pub socs: usize,
    pub n_var: usize,
    pub n_row: usize,
}

fn gen_p_free(g: &Gen) -> bool {
    !g.p_fixed
}

fn gen_q_free(g: &Gen) -> bool {
    !g.q_fixed
}

fn gen_quad(g: &Gen) -> bool {
    gen_p_free(g) && g.cost.alpha > 0.0
}

/// Predicts every dimension of [`build_sdr`]'s output without building it.
pub fn count_dims(case: &CaseData) -> Dims {
    let n = case.buses.len();
    let gp = case.gens.iter().filter(|g| gen_p_free(g)).count();
    let gq = case.gens.iter().filter(|g| gen_q_free(g)).count();
    let gquad = case.gens.iter().filter(|g| gen_quad(g)).count();
    let fl = case.branches.iter().filter(|b| b.has_rate()).count();
    let pa = case.branches.iter().filter(|b| b.phase_bounds().is_some()).count();
    let nonneg = 2 * gp + 2 * gq + gquad + 2 * n + 2 * pa;
    let socs = 2 * fl + gquad;
    Dims {
        n_bus: n,
        gen_p_free: gp,
        gen_q_free: gq,
        gen_quad: gquad,
        flow_limited: fl,
        phase_bounded: pa,
        nonneg,
        socs,
        n_var: nonneg + 3 * socs + n * n,
        n_row: 4 * n + gp + gq + 2 * pa + 3 * socs,
    }
}

/// Variable-slot map of the built relaxation.
///
/// Variable order: the nonnegative block holds, in sequence, the lower and
/// upper active bound slacks (free-P generators in case order), the lower
/// and upper reactive bound slacks, the epigraph values `t`, the lower and
/// upper squared-voltage slacks (buses in order), and the phase slack pairs
/// (phase-bounded branches in order). Then come the flow cones (each
/// rate-limited branch: from end, then to end), the epigraph cones
/// (quadratic generators in order), and finally the packed PSD block.
#[derive(Debug, Clone)]
pub struct SdrIndex {
    pub dims: Dims,
    /// Per generator: slots of `(p_low, p_high)` slack, `None` when fixed.
    pub gen_p: Vec<Option<(usize, usize)>>,
    pub gen_q: Vec<Option<(usize, usize)>>,
    /// Per generator: epigraph value slot, holding the squared lower
    /// bound slack `u^2`; the quadratic cost weight multiplies it in the
    /// objective.
    pub gen_t: Vec<Option<usize>>,
    /// Per bus: `(lower, upper)` squared-voltage slack slots.
    pub volt: Vec<(usize, usize)>,
    /// Per branch: `(lower, upper)` phase slack slots.
    pub phase: Vec<Option<(usize, usize)>>,
    /// Per branch: start of the from-end and to-end flow cones.
    pub flow_cone: Vec<Option<(usize, usize)>>,
    /// Per generator: start of the epigraph cone.
    pub epi_cone: Vec<Option<usize>>,
    /// Start of the PSD block.
    pub psd_start: usize,
    /// Packing of the PSD block.
    pub codec: HvecCodec,
    /// Label of every constraint row, in row order.
    pub rows: Vec<RowLabel>,
}

impl SdrIndex {
    /// Variable slot of matrix entry machinery: maps a Hermitian
    /// coefficient entry to global `(slot, value)` pairs.
    fn x_entry(&self, i: usize, j: usize, d: C) -> Vec<(usize, f64)> {
        self.codec
            .entry_slots(i, j, d)
            .into_iter()
            .map(|(s, v)| (self.psd_start + s, v))
            .collect()
    }
}

/// The relaxation bundled with its layout map.
#[derive(Debug, Clone)]
pub struct SdrProblem {
    pub lp: ConeLP,
    pub index: SdrIndex,
}

/// Builds the relaxation of a preprocessed case.
///
/// Row order: active balances (buses in order), reactive balances, active
/// box pairings (free-P generators), reactive box pairings, lower then
/// upper voltage rows (buses), lower then upper phase rows (phase-bounded
/// branches), then three rows per cone in cone order.
pub fn build_sdr(case: &CaseData, model: &NetModel) -> SdrProblem {
    let dims = count_dims(case);
    let n = dims.n_bus;
    let idx_of = case.bus_index();

    // ---- variable layout ----
    struct Cursor(usize);
    impl Cursor {
        fn take(&mut self, k: usize) -> usize {
            let s = self.0;
            self.0 += k;
            s
        }
    }
    let mut cur = Cursor(0);
    let gen_p_lo: Vec<Option<usize>> =
        case.gens.iter().map(|g| gen_p_free(g).then(|| cur.take(1))).collect();
    let gen_p_hi: Vec<Option<usize>> =
        case.gens.iter().map(|g| gen_p_free(g).then(|| cur.take(1))).collect();
    let gen_q_lo: Vec<Option<usize>> =
        case.gens.iter().map(|g| gen_q_free(g).then(|| cur.take(1))).collect();
    let gen_q_hi: Vec<Option<usize>> =
        case.gens.iter().map(|g| gen_q_free(g).then(|| cur.take(1))).collect();
    let gen_t: Vec<Option<usize>> =
        case.gens.iter().map(|g| gen_quad(g).then(|| cur.take(1))).collect();
    let volt_lo = cur.take(n);
    let volt_hi = cur.take(n);
    let phase_lo: Vec<Option<usize>> = case
        .branches
        .iter()
        .map(|br| br.phase_bounds().is_some().then(|| cur.take(1)))
        .collect();
    let phase_hi: Vec<Option<usize>> = case
        .branches
        .iter()
        .map(|br| br.phase_bounds().is_some().then(|| cur.take(1)))
        .collect();
    assert_eq!(cur.0, dims.nonneg);
    let flow_cone: Vec<Option<(usize, usize)>> = case
        .branches
        .iter()
        .map(|br| br.has_rate().then(|| (cur.take(3), cur.take(3))))
        .collect();
    let epi_cone: Vec<Option<usize>> =
        case.gens.iter().map(|g| gen_quad(g).then(|| cur.take(3))).collect();
    let psd_start = cur.0;
    let codec = HvecCodec::new(n);
    assert_eq!(psd_start + codec.len(), dims.n_var);

    let mut index = SdrIndex {
        dims,
        gen_p: gen_p_lo.iter().zip(&gen_p_hi).map(|(a, b)| a.zip(*b)).collect(),
        gen_q: gen_q_lo.iter().zip(&gen_q_hi).map(|(a, b)| a.zip(*b)).collect(),
        gen_t,
        volt: (0..n).map(|k| (volt_lo + k, volt_hi + k)).collect(),
        phase: phase_lo.iter().zip(&phase_hi).map(|(a, b)| a.zip(*b)).collect(),
        flow_cone,
        epi_cone,
        psd_start,
        codec,
        rows: Vec::with_capacity(dims.n_row),
    };

    // ---- rows ----
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut b: Vec<f64> = Vec::with_capacity(dims.n_row);
    let mut row = 0usize;
    let mut push_row = |trips: &mut Vec<(usize, usize, f64)>,
                        b: &mut Vec<f64>,
                        rows: &mut Vec<RowLabel>,
                        label: RowLabel,
                        coeffs: Vec<(usize, f64)>,
                        rhs: f64| {
        for (col, v) in coeffs {
            trips.push((row, col, v));
        }
        b.push(rhs);
        rows.push(label);
        row += 1;
    };

    // Base injection of each generator: the lower bound when free, the
    // pinned value when fixed (the bounds coincide then).
    let p_base: Vec<f64> = case.gens.iter().map(|g| g.pmin).collect();
    let q_base: Vec<f64> = case.gens.iter().map(|g| g.qmin).collect();

    // Active and reactive balance rows.
    for reactive in [false, true] {
        for k in 0..n {
            let (mp, mq) = model.injection_matrices(k);
            let m = if reactive { mq } else { mp };
            let mut coeffs = Vec::new();
            for &(i, j, d) in m.entries() {
                coeffs.extend(index.x_entry(i, j, d));
            }
            let mut rhs = if reactive { -case.buses[k].qd } else { -case.buses[k].pd };
            for (g, gen) in case.gens.iter().enumerate() {
                if idx_of[&gen.bus] != k {
                    continue;
                }
                if reactive {
                    rhs += q_base[g];
                    if let Some((lo, _)) = index.gen_q[g] {
                        coeffs.push((lo, -1.0));
                    }
                } else {
                    rhs += p_base[g];
                    if let Some((lo, _)) = index.gen_p[g] {
                        coeffs.push((lo, -1.0));
                    }
                }
            }
            let label = if reactive { RowLabel::BalanceQ { bus: k } } else { RowLabel::BalanceP { bus: k } };
            push_row(&mut trips, &mut b, &mut index.rows, label, coeffs, rhs);
        }
    }

    // Bound box pairings: slack_low + slack_high = width.
    for (g, gen) in case.gens.iter().enumerate() {
        if let Some((lo, hi)) = index.gen_p[g] {
            push_row(
                &mut trips,
                &mut b,
                &mut index.rows,
                RowLabel::GenPBox { gen: g },
                vec![(lo, 1.0), (hi, 1.0)],
                gen.pmax - gen.pmin,
            );
        }
    }
    for (g, gen) in case.gens.iter().enumerate() {
        if let Some((lo, hi)) = index.gen_q[g] {
            push_row(
                &mut trips,
                &mut b,
                &mut index.rows,
                RowLabel::GenQBox { gen: g },
                vec![(lo, 1.0), (hi, 1.0)],
                gen.qmax - gen.qmin,
            );
        }
    }

    // Voltage rows: X[k,k] - lo = vmin^2, X[k,k] + hi = vmax^2.
    for k in 0..n {
        let diag = index.x_entry(k, k, C::new(1.0, 0.0));
        let mut coeffs = diag.clone();
        coeffs.push((index.volt[k].0, -1.0));
        let vmin = case.buses[k].vmin;
        push_row(&mut trips, &mut b, &mut index.rows, RowLabel::VoltLower { bus: k }, coeffs, vmin * vmin);
    }
    for k in 0..n {
        let mut coeffs = index.x_entry(k, k, C::new(1.0, 0.0));
        coeffs.push((index.volt[k].1, 1.0));
        let vmax = case.buses[k].vmax;
        push_row(&mut trips, &mut b, &mut index.rows, RowLabel::VoltUpper { bus: k }, coeffs, vmax * vmax);
    }

    // Phase rows. The angle difference theta_f - theta_t obeys
    // tan(lo) <= Im X[f,t] / Re X[f,t] <= tan(hi) on rank-one points, which
    // linearizes to two slack equalities because bounds are within
    // (-pi/2, pi/2) and Re X[f,t] > 0 there.
    for pass in 0..2 {
        for (e, br) in case.branches.iter().enumerate() {
            let Some((lo, hi)) = br.phase_bounds() else { continue };
            let (slo, shi) = index.phase[e].unwrap();
            let (f, t, _) = model.branch(e);
            if pass == 0 {
                // Im - tan(lo) Re - slack = 0.
                let m = C::new(-lo.tan() / 2.0, 0.5);
                let mut coeffs = index.x_entry(t, f, m.conj());
                coeffs.push((slo, -1.0));
                push_row(&mut trips, &mut b, &mut index.rows, RowLabel::PhaseLower { branch: e }, coeffs, 0.0);
            } else {
                // Im - tan(hi) Re + slack = 0.
                let m = C::new(-hi.tan() / 2.0, 0.5);
                let mut coeffs = index.x_entry(t, f, m.conj());
                coeffs.push((shi, 1.0));
                push_row(&mut trips, &mut b, &mut index.rows, RowLabel::PhaseUpper { branch: e }, coeffs, 0.0);
            }
        }
    }

    // Flow cones: (rate, Re S, Im S) in the second-order cone caps the
    // apparent power magnitude at each end.
    for (e, br) in case.branches.iter().enumerate() {
        let Some((cf, ct)) = index.flow_cone[e] else { continue };
        for (end, z0) in [(BranchEnd::From, cf), (BranchEnd::To, ct)] {
            let tag = if end == BranchEnd::From { 0 } else { 1 };
            let (tre, tim) = model.flow_matrices(e, end);
            push_row(
                &mut trips,
                &mut b,
                &mut index.rows,
                RowLabel::FlowCap { branch: e, end: tag },
                vec![(z0, 1.0)],
                br.rate,
            );
            let mut coeffs = vec![(z0 + 1, 1.0)];
            for &(i, j, d) in tre.entries() {
                coeffs.extend(index.x_entry(i, j, -d));
            }
            push_row(&mut trips, &mut b, &mut index.rows, RowLabel::FlowRe { branch: e, end: tag }, coeffs, 0.0);
            let mut coeffs = vec![(z0 + 2, 1.0)];
            for &(i, j, d) in tim.entries() {
                coeffs.extend(index.x_entry(i, j, -d));
            }
            push_row(&mut trips, &mut b, &mut index.rows, RowLabel::FlowIm { branch: e, end: tag }, coeffs, 0.0);
        }
    }

    // Epigraph cones: w = ((1 + t)/2, (1 - t)/2, u) puts u^2 <= t in a
    // second-order cone, with u the lower bound slack. The quadratic
    // weight alpha sits in the objective, not the cone, so t stays the
    // same order of magnitude as the physical variables; dollar-scale
    // epigraph values next to per-unit voltages would otherwise wreck
    // the solver's equilibration.
    for (g, _) in case.gens.iter().enumerate() {
        let Some(w0) = index.epi_cone[g] else { continue };
        let t = index.gen_t[g].unwrap();
        let u = index.gen_p[g].unwrap().0;
        push_row(
            &mut trips,
            &mut b,
            &mut index.rows,
            RowLabel::EpiSum { gen: g },
            vec![(w0, 1.0), (t, -0.5)],
            0.5,
        );
        push_row(
            &mut trips,
            &mut b,
            &mut index.rows,
            RowLabel::EpiDiff { gen: g },
            vec![(w0 + 1, 1.0), (t, 0.5)],
            0.5,
        );
        push_row(
            &mut trips,
            &mut b,
            &mut index.rows,
            RowLabel::EpiLin { gen: g },
            vec![(w0 + 2, 1.0), (u, -1.0)],
            0.0,
        );
    }

    assert_eq!(row, dims.n_row);

    // ---- objective ----
    let mut c = vec![0.0; dims.n_var];
    let mut offset = 0.0;
    for (g, gen) in case.gens.iter().enumerate() {
        offset += gen.cost.eval(p_base[g]);
        if let Some((lo, _)) = index.gen_p[g] {
            // Reduced linear coefficient after shifting out the base point.
            c[lo] = gen.cost.beta + 2.0 * gen.cost.alpha * p_base[g];
        }
        if let Some(t) = index.gen_t[g] {
            c[t] = gen.cost.alpha;
        }
    }

    let mut blocks = Vec::with_capacity(1 + dims.socs + 1);
    blocks.push(ConeBlock::NonNeg(dims.nonneg));
    blocks.extend(std::iter::repeat(ConeBlock::Soc(3)).take(dims.socs));
    blocks.push(ConeBlock::PsdHerm(n));

    let a = CscMatrix::from_triplets(dims.n_row, dims.n_var, &trips);
    let lp = ConeLP { a, b, c, blocks, offset };
    lp.validate().expect("built LP must be structurally consistent");
    SdrProblem { lp, index }
}

/// Packs a physical operating point `(v, p, q)` into the variable vector of
/// the relaxation, with every slack set to its defining value.
///
/// The point need not be feasible; infeasibility shows up as residuals of
/// `A x = b` or cone violations, which is exactly what tests probe.
pub fn embed_point(case: &CaseData, model: &NetModel, index: &SdrIndex, v: &[C], p: &[f64], q: &[f64]) -> Vec<f64> {
    let n = case.buses.len();
    assert_eq!(v.len(), n);
    let mut x = vec![0.0; index.dims.n_var];
    for (g, gen) in case.gens.iter().enumerate() {
        if let Some((lo, hi)) = index.gen_p[g] {
            x[lo] = p[g] - gen.pmin;
            x[hi] = gen.pmax - p[g];
        }
        if let Some((lo, hi)) = index.gen_q[g] {
            x[lo] = q[g] - gen.qmin;
            x[hi] = gen.qmax - q[g];
        }
        if let Some(t) = index.gen_t[g] {
            let u = p[g] - gen.pmin;
            x[t] = u * u;
            let w0 = index.epi_cone[g].unwrap();
            x[w0] = (1.0 + x[t]) / 2.0;
            x[w0 + 1] = (1.0 - x[t]) / 2.0;
            x[w0 + 2] = u;
        }
    }
    for k in 0..n {
        let m2 = v[k].norm_sqr();
        x[index.volt[k].0] = m2 - case.buses[k].vmin.powi(2);
        x[index.volt[k].1] = case.buses[k].vmax.powi(2) - m2;
    }
    for (e, br) in case.branches.iter().enumerate() {
        if let Some((slo, shi)) = index.phase[e] {
            let (lo, hi) = br.phase_bounds().unwrap();
            let (f, t, _) = model.branch(e);
            let xft = v[f] * v[t].conj();
            x[slo] = xft.im - lo.tan() * xft.re;
            x[shi] = hi.tan() * xft.re - xft.im;
        }
        if let Some((cf, ct)) = index.flow_cone[e] {
            let (f, t, adm) = model.branch(e);
            let sf = v[f] * (adm.yff * v[f] + adm.yft * v[t]).conj();
            let st = v[t] * (adm.ytf * v[f] + adm.ytt * v[t]).conj();
            for (z0, s) in [(cf, sf), (ct, st)] {
                x[z0] = br.rate;
                x[z0 + 1] = s.re;
                x[z0 + 2] = s.im;
            }
        }
    }
    // X = v v'.
    for j in 0..n {
        for i in 0..j {
            let e = v[i] * v[j].conj();
            x[index.psd_start + index.codec.idx_re(i, j)] = hvec::SQRT2 * e.re;
            x[index.psd_start + index.codec.idx_im(i, j)] = hvec::SQRT2 * e.im;
        }
        x[index.psd_start + index.codec.idx_diag(j)] = v[j].norm_sqr();
    }
    x
}
