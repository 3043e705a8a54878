//! Electrical network model: admittance assembly, the Hermitian coefficient
//! matrices that express physical quantities as linear functionals of the
//! voltage outer product, and direct evaluation of the operating constraints
//! at a candidate operating point.
//!
//! With `v` the complex bus voltage vector and `X = v v'`, every quantity of
//! interest is `tr(M X)` for a Hermitian `M` built here:
//!
//! * active and reactive injection at bus `k`,
//! * active and reactive branch flow at either end,
//! * squared voltage magnitude (a diagonal unit matrix).
//!
//! The matrices follow from `S_k = v[k] * conj((Y v)[k])` and the branch
//! current equations; each identity is checked numerically in the tests
//! against direct evaluation, so a sign error in an assembly formula cannot
//! survive.

use crate::caseio::CaseData;
use crate::sparse::Csc;
use num_complex::Complex64;

type C = Complex64;

/// A small Hermitian matrix stored as canonical upper-triangle entries
/// `(i, j, value)` with `i <= j`; the mirrored conjugate entries are
/// implied. Diagonal values are real.
#[derive(Debug, Clone, PartialEq)]
pub struct HermSparse {
    entries: Vec<(usize, usize, C)>,
}

impl HermSparse {
    fn new(mut entries: Vec<(usize, usize, C)>) -> Self {
        // Canonicalize: fold lower-triangle entries onto the upper triangle.
        for e in &mut entries {
            if e.0 > e.1 {
                *e = (e.1, e.0, e.2.conj());
            }
        }
        entries.sort_by_key(|&(i, j, _)| (j, i));
        entries.dedup_by(|b, a| {
            if (a.0, a.1) == (b.0, b.1) {
                a.2 += b.2;
                true
            } else {
                false
            }
        });
        entries.retain(|&(i, j, v)| v != C::new(0.0, 0.0) || i == j);
        debug_assert!(entries
            .iter()
            .all(|&(i, j, v)| i < j || v.im.abs() <= 1e-12 * (1.0 + v.re.abs())));
        HermSparse { entries }
    }

    /// Canonical entries of the upper triangle, ordered by `(j, i)`.
    pub fn entries(&self) -> &[(usize, usize, C)] {
        &self.entries
    }

    /// `tr(M v v')`, which is real for Hermitian `M`.
    pub fn quad_form(&self, v: &[C]) -> f64 {
        let mut acc = 0.0;
        for &(i, j, m) in &self.entries {
            let t = (v[i].conj() * m * v[j]).re;
            acc += if i == j { t } else { 2.0 * t };
        }
        acc
    }
}

/// Per-branch pi-model admittances, from-side quantities first.
#[derive(Debug, Clone, Copy)]
pub struct BranchAdmittance {
    pub yff: C,
    pub yft: C,
    pub ytf: C,
    pub ytt: C,
}

/// Which end of a branch a flow quantity is metered at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchEnd {
    From,
    To,
}

/// Assembled network quantities over internal bus indices `0..n`.
#[derive(Debug, Clone)]
pub struct NetModel {
    n: usize,
    /// Bus admittance matrix.
    ybus: Csc<C>,
    /// Row `k` of the admittance matrix as an explicit adjacency list
    /// (including the diagonal), for building injection matrices.
    rows: Vec<Vec<(usize, C)>>,
    /// Internal endpoint indices and admittances per in-service branch,
    /// aligned with `CaseData::branches`.
    branch: Vec<(usize, usize, BranchAdmittance)>,
}

impl NetModel {
    /// Assembles the admittance structures for a preprocessed case.
    ///
    /// Expects out-of-service equipment to be gone; every branch present is
    /// included.
    pub fn build(case: &CaseData) -> Self {
        let idx = case.bus_index();
        let n = case.buses.len();
        let mut trips: Vec<(usize, usize, C)> = Vec::new();
        for (i, b) in case.buses.iter().enumerate() {
            trips.push((i, i, C::new(b.gs, b.bs)));
        }
        let mut branch = Vec::with_capacity(case.branches.len());
        for br in &case.branches {
            let f = idx[&br.from];
            let t = idx[&br.to];
            let y = C::new(1.0, 0.0) / C::new(br.r, br.x);
            let ych = C::new(0.0, br.b / 2.0);
            let tap = C::from_polar(br.tap, br.shift);
            let adm = BranchAdmittance {
                yff: (y + ych) / (br.tap * br.tap),
                yft: -y / tap.conj(),
                ytf: -y / tap,
                ytt: y + ych,
            };
            trips.push((f, f, adm.yff));
            trips.push((f, t, adm.yft));
            trips.push((t, f, adm.ytf));
            trips.push((t, t, adm.ytt));
            branch.push((f, t, adm));
        }
        let ybus = Csc::from_triplets(n, n, &trips);
        let mut rows: Vec<Vec<(usize, C)>> = vec![Vec::new(); n];
        for j in 0..n {
            for (i, v) in ybus.col(j) {
                rows[i].push((j, v));
            }
        }
        NetModel { n, ybus, rows, branch }
    }

    pub fn n_bus(&self) -> usize {
        self.n
    }

    pub fn ybus(&self) -> &Csc<C> {
        &self.ybus
    }

    /// Admittance row of bus `k`: pairs `(j, Y[k, j])` sorted by `j`.
    pub fn row(&self, k: usize) -> &[(usize, C)] {
        &self.rows[k]
    }

    /// Endpoints and admittances of branch `e` (internal indices).
    pub fn branch(&self, e: usize) -> (usize, usize, BranchAdmittance) {
        self.branch[e]
    }

    /// `i = Y v`.
    pub fn currents(&self, v: &[C]) -> Vec<C> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![C::new(0.0, 0.0); self.n];
        for (k, row) in self.rows.iter().enumerate() {
            out[k] = row.iter().map(|&(j, y)| y * v[j]).sum();
        }
        out
    }

    /// Complex injection `S_k = v_k * conj(i_k)` at every bus.
    pub fn injections(&self, v: &[C]) -> Vec<C> {
        self.currents(v).iter().zip(v).map(|(i, vk)| vk * i.conj()).collect()
    }

    /// Hermitian matrices `(P_k, Q_k)` with `tr(P_k X)` the active and
    /// `tr(Q_k X)` the reactive injection at bus `k` for `X = v v'`.
    pub fn injection_matrices(&self, k: usize) -> (HermSparse, HermSparse) {
        let mut re = Vec::new();
        let mut im = Vec::new();
        let half = C::new(0.5, 0.0);
        let half_i = C::new(0.0, 0.5);
        for &(j, ykj) in &self.rows[k] {
            if j == k {
                re.push((k, k, C::new(ykj.re, 0.0)));
                im.push((k, k, C::new(-ykj.im, 0.0)));
            } else {
                // Entry (k, j) of (e_k e_k' Y + Y' e_k e_k')/2 and of
                // (Y' e_k e_k' - e_k e_k' Y)/(2i).
                re.push((k, j, half * ykj));
                im.push((k, j, half_i * ykj));
            }
        }
        (HermSparse::new(re), HermSparse::new(im))
    }

    /// Hermitian matrices `(T, T~)` measuring the active and reactive flow
    /// of branch `e` at the given end.
    pub fn flow_matrices(&self, e: usize, end: BranchEnd) -> (HermSparse, HermSparse) {
        let (f, t, adm) = self.branch[e];
        // Metered current is (ya * v[a] + yb * v[b]); the flow is
        // v[a] * conj of it, giving the rank-one F = conj(f_row) e_a'.
        let (a, b, ya, yb) = match end {
            BranchEnd::From => (f, t, adm.yff, adm.yft),
            BranchEnd::To => (t, f, adm.ytt, adm.ytf),
        };
        // T = (F + F')/2; T~ = (F - F')/(2i). With F supported on column a
        // only: diagonal (a, a) from ya, pair (a, b) from yb.
        let re = vec![
            (a, a, C::new(ya.re, 0.0)),
            (b, a, C::new(0.5, 0.0) * yb.conj()),
        ];
        let im = vec![
            (a, a, C::new(-ya.im, 0.0)),
            (b, a, C::new(0.0, -0.5) * yb.conj()),
        ];
        (HermSparse::new(re), HermSparse::new(im))
    }
}

/// Worst-case violations of each operating constraint family at a candidate
/// point, plus the objective. All quantities per-unit; the objective is in
/// the cost units of the source file.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ResidualReport {
    /// Magnitude of the complex power mismatch at each bus.
    pub balance: Vec<f64>,
    pub max_balance: f64,
    pub max_gen_bound: f64,
    pub max_voltage: f64,
    pub max_flow: f64,
    /// Radians outside the phase-difference bounds.
    pub max_angle: f64,
    pub objective: f64,
}

/// Evaluates the operating constraints at `(v, p, q)`.
///
/// `p[g]`, `q[g]` are the per-generator injections aligned with
/// `case.gens`; `v` is over internal bus indices. The report states how far
/// the point is from satisfying power balance, generator and voltage
/// bounds, flow ratings, and phase-difference bounds.
pub fn evaluate_acopf(case: &CaseData, model: &NetModel, v: &[C], p: &[f64], q: &[f64]) -> ResidualReport {
    let idx = case.bus_index();
    assert_eq!(p.len(), case.gens.len());
    assert_eq!(q.len(), case.gens.len());

    let mut net = vec![C::new(0.0, 0.0); model.n_bus()];
    for (i, b) in case.buses.iter().enumerate() {
        net[i] -= C::new(b.pd, b.qd);
    }
    let mut objective = 0.0;
    let mut max_gen_bound = 0.0f64;
    for (g, (&pg, &qg)) in case.gens.iter().zip(p.iter().zip(q)) {
        net[idx[&g.bus]] += C::new(pg, qg);
        objective += g.cost.eval(pg);
        max_gen_bound = max_gen_bound
            .max(g.pmin - pg)
            .max(pg - g.pmax)
            .max(g.qmin - qg)
            .max(qg - g.qmax);
    }
    let inj = model.injections(v);
    let balance: Vec<f64> = inj.iter().zip(&net).map(|(s, t)| (s - t).norm()).collect();
    let max_balance = balance.iter().fold(0.0f64, |m, &x| m.max(x));

    let mut max_voltage = 0.0f64;
    for (i, b) in case.buses.iter().enumerate() {
        let vm = v[i].norm();
        max_voltage = max_voltage.max(b.vmin - vm).max(vm - b.vmax);
    }

    let mut max_flow = 0.0f64;
    let mut max_angle = 0.0f64;
    for (e, br) in case.branches.iter().enumerate() {
        let (f, t, adm) = model.branch(e);
        if br.has_rate() {
            let sf = v[f] * (adm.yff * v[f] + adm.yft * v[t]).conj();
            let st = v[t] * (adm.ytf * v[f] + adm.ytt * v[t]).conj();
            max_flow = max_flow.max(sf.norm() - br.rate).max(st.norm() - br.rate);
        }
        if let Some((lo, hi)) = br.phase_bounds() {
            let d = (v[f] * v[t].conj()).arg();
            max_angle = max_angle.max(lo - d).max(d - hi);
        }
    }

    ResidualReport { balance, max_balance, max_gen_bound: max_gen_bound.max(0.0), max_voltage: max_voltage.max(0.0), max_flow: max_flow.max(0.0), max_angle: max_angle.max(0.0), objective }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseio::{parse_matpower, preprocess, PreprocessOptions};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const CASE9: &str = include_str!("../../../data/cases/case9.m");
    const CASE30: &str = include_str!("../../../data/cases/case30.m");

    /// A 3-bus case exercising an off-nominal tap and a nonzero phase shift.
    const SHIFTED: &str = "function mpc = shifted
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0  0  0 0 1 1 0 138 1 1.1 0.9;
 2 1 40 10 2 5 1 1 0 138 1 1.1 0.9;
 3 1 25 10 0 0 1 1 0 138 1 1.1 0.9;
];
mpc.gen = [
 1 0 0 80 -80 1 100 1 150 5;
];
mpc.branch = [
 1 2 0.02 0.2  0.04 100 0 0 0.98 3.5 1 -30 30;
 2 3 0.05 0.25 0.02 80  0 0 0    0   1 -360 360;
 3 1 0.04 0.5  0    90  0 0 1.05 -2  1 0 0;
];
mpc.gencost = [
 2 0 0 3 0.04 25 100;
];
";

    fn model_for(text: &str) -> (crate::caseio::CaseData, NetModel) {
        let c = parse_matpower(text).unwrap();
        let (c, _) = preprocess(&c, &PreprocessOptions::default()).unwrap();
        let m = NetModel::build(&c);
        (c, m)
    }

    fn random_voltages(rng: &mut ChaCha8Rng, n: usize) -> Vec<C> {
        (0..n)
            .map(|_| C::from_polar(rng.random_range(0.9..1.1), rng.random_range(-0.5..0.5)))
            .collect()
    }

    #[test]
    fn case9_admittance_oracle() {
        let (_, m) = model_for(CASE9);
        let y = m.ybus();
        let close = |a: C, re: f64, im: f64| (a - C::new(re, im)).norm() < 1e-9;
        assert!(close(y.get(0, 0), 0.0, -17.361111111111));
        assert!(close(y.get(0, 3), 0.0, 17.361111111111));
        assert!(close(y.get(3, 3), 3.307378962025, -39.308888726119));
        assert!(close(y.get(3, 4), -1.942191248715, 10.510682051868));
        assert!(close(y.get(4, 4), 3.224200387139, -15.840927014229));
        assert!(close(y.get(8, 8), 2.552792092602, -17.338230096449));
        assert!(close(y.get(7, 8), -1.187604379291, 5.975134533309));
    }

    #[test]
    fn ybus_support_is_network_adjacency() {
        let (c, m) = model_for(CASE9);
        let idx = c.bus_index();
        for k in 0..m.n_bus() {
            let mut expect: std::collections::BTreeSet<usize> = [k].into();
            for br in &c.branches {
                let (f, t) = (idx[&br.from], idx[&br.to]);
                if f == k {
                    expect.insert(t);
                }
                if t == k {
                    expect.insert(f);
                }
            }
            let got: std::collections::BTreeSet<usize> = m.row(k).iter().map(|&(j, _)| j).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn injection_matrices_match_direct_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for text in [CASE9, CASE30, SHIFTED] {
            let (_, m) = model_for(text);
            for _ in 0..5 {
                let v = random_voltages(&mut rng, m.n_bus());
                let s = m.injections(&v);
                for k in 0..m.n_bus() {
                    let (pk, qk) = m.injection_matrices(k);
                    assert!((pk.quad_form(&v) - s[k].re).abs() < 1e-10, "P mismatch at bus {k}");
                    assert!((qk.quad_form(&v) - s[k].im).abs() < 1e-10, "Q mismatch at bus {k}");
                    // Support confined to row and column k.
                    for &(i, j, _) in pk.entries().iter().chain(qk.entries()) {
                        assert!(i == k || j == k);
                    }
                }
            }
        }
    }

    #[test]
    fn flow_matrices_match_direct_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for text in [CASE9, CASE30, SHIFTED] {
            let (c, m) = model_for(text);
            for _ in 0..5 {
                let v = random_voltages(&mut rng, m.n_bus());
                for e in 0..c.branches.len() {
                    let (f, t, adm) = m.branch(e);
                    let sf = v[f] * (adm.yff * v[f] + adm.yft * v[t]).conj();
                    let st = v[t] * (adm.ytf * v[f] + adm.ytt * v[t]).conj();
                    for (end, s) in [(BranchEnd::From, sf), (BranchEnd::To, st)] {
                        let (tt, tq) = m.flow_matrices(e, end);
                        assert!((tt.quad_form(&v) - s.re).abs() < 1e-10);
                        assert!((tq.quad_form(&v) - s.im).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn injections_sum_against_kirchhoff() {
        // Total injection equals v' Y' v; checks the assembled matrix as a
        // whole rather than row by row.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (_, m) = model_for(CASE30);
        let v = random_voltages(&mut rng, m.n_bus());
        let total: C = m.injections(&v).into_iter().sum();
        let i = m.currents(&v);
        let direct: C = v.iter().zip(&i).map(|(vk, ik)| vk * ik.conj()).sum();
        assert!((total - direct).norm() < 1e-10);
    }

    #[test]
    fn residual_report_flags_violations() {
        let (c, m) = model_for(CASE9);
        // A flat profile with zero generation: balance violated by the
        // loads, bounds violated by the zero injections (pmin is 0.1).
        let v = vec![C::new(1.0, 0.0); m.n_bus()];
        let p = vec![0.0; c.gens.len()];
        let q = vec![0.0; c.gens.len()];
        let rep = evaluate_acopf(&c, &m, &v, &p, &q);
        assert!(rep.max_balance > 0.5); // loads total 3.15 p.u.
        assert!((rep.max_gen_bound - 0.1).abs() < 1e-12);
        assert_eq!(rep.max_voltage, 0.0);
        assert_eq!(rep.max_flow, 0.0); // charging currents alone stay far below the ratings
        let gamma_sum: f64 = c.gens.iter().map(|g| g.cost.gamma).sum();
        assert!((rep.objective - gamma_sum).abs() < 1e-12);
    }

    #[test]
    fn residual_balance_is_analytic_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (c, m) = model_for(SHIFTED);
        let v = random_voltages(&mut rng, m.n_bus());
        let p = vec![0.7];
        let q = vec![0.1];
        let rep = evaluate_acopf(&c, &m, &v, &p, &q);
        let inj = m.injections(&v);
        let idx = c.bus_index();
        for (i, b) in c.buses.iter().enumerate() {
            let mut want = -C::new(b.pd, b.qd);
            for (g, (&pg, &qg)) in c.gens.iter().zip(p.iter().zip(&q)) {
                if idx[&g.bus] == i {
                    want += C::new(pg, qg);
                }
            }
            assert!(((inj[i] - want).norm() - rep.balance[i]).abs() < 1e-12);
        }
    }
}
