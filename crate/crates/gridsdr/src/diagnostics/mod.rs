//! Solution quality measures, relaxation gap bookkeeping, and rank-1
//! recovery of a voltage profile from the matrix blocks.

mod recover;

pub use recover::{recover_voltages, Recovery};

use crate::cones;
use crate::linalg;
use crate::relax::ConeLP;
use serde::{Deserialize, Serialize};

/// The five standard error measures of a conic primal-dual pair, all
/// computed on the problem exactly as solved (no rescaling).
///
/// Residual norms are Euclidean; the normalizations use the infinity
/// norms of the problem data. The gap measure is signed; use
/// [`Dimacs::max_abs`] for a scalar convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimacs {
    pub primal_res: f64,
    pub primal_cone: f64,
    pub dual_res: f64,
    pub dual_cone: f64,
    pub gap: f64,
}

impl Dimacs {
    /// Measures the pair `(x, (y, s))` against `lp`. Every block of the
    /// cone is self-dual, so the dual-cone distance reuses the primal
    /// projection.
    pub fn measure(lp: &ConeLP, x: &[f64], y: &[f64], s: &[f64]) -> Dimacs {
        let bn = 1.0 + linalg::norm_inf(&lp.b);
        let cn = 1.0 + linalg::norm_inf(&lp.c);

        // Ax - b.
        let mut pres: Vec<f64> = lp.b.iter().map(|v| -v).collect();
        lp.a.gemv(1.0, x, &mut pres);
        // A'y + s - c.
        let mut dres: Vec<f64> = lp.c.iter().zip(s).map(|(c, s)| s - c).collect();
        lp.a.gemv_t(1.0, y, &mut dres);

        let ctx = linalg::dot(&lp.c, x);
        let bty = linalg::dot(&lp.b, y);

        Dimacs {
            primal_res: linalg::norm2(&pres) / bn,
            primal_cone: cones::distance(&lp.blocks, x) / bn,
            dual_res: linalg::norm2(&dres) / cn,
            dual_cone: cones::distance(&lp.blocks, s) / cn,
            gap: (ctx - bty) / (1.0 + ctx.abs() + bty.abs()),
        }
    }

    /// Largest measure in absolute value.
    pub fn max_abs(&self) -> f64 {
        [self.primal_res, self.primal_cone, self.dual_res, self.dual_cone, self.gap.abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    /// Per-side test: primal measures against `ep`, dual measures
    /// against `ed`, gap against `eg`.
    pub fn meets(&self, ep: f64, ed: f64, eg: f64) -> bool {
        self.primal_res <= ep
            && self.primal_cone <= ep
            && self.dual_res <= ed
            && self.dual_cone <= ed
            && self.gap.abs() <= eg
    }
}

/// Relative gap between an upper bound (a feasible dispatch cost) and a
/// lower bound (the relaxation value), in percent of the upper bound.
/// Positive when the upper bound exceeds the lower bound.
pub fn gap_percent(upper: f64, lower: f64) -> f64 {
    100.0 * (upper - lower) / upper
}

/// Formats a gap to one decimal place, normalizing the sign of a zero so
/// that tiny negative gaps print as `-0.0` rather than rounding away.
pub fn format_gap(gap: f64) -> String {
    let rounded = (gap * 10.0).round() / 10.0;
    if rounded == 0.0 && gap.is_sign_negative() {
        "-0.0".to_string()
    } else {
        format!("{rounded:.1}")
    }
}
