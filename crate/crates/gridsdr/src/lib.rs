pub mod caseio;
pub mod chordal;
pub mod cones;
pub mod conesolve;
pub mod diagnostics;
pub mod formats;
pub mod linalg;
pub mod netmodel;
pub mod relax;
pub mod sparse;
