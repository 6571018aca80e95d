//! Small dense convex solvers used by the phase and beamforming blocks.

pub mod qcqp;
pub mod sdp;

use serde::{Deserialize, Serialize};

pub use qcqp::{solve_qcqp, QcqpMethod, QcqpProblem, QcqpSolution};
pub use sdp::{solve_sdp, SdpConstraint, SdpProblem, SdpSolution, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Scaled optimality residuals of a returned point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

fn fmt_complex(z: &num_complex::Complex64) -> String {
    format!("{:e} {:e}", z.re, z.im)
}

fn dump_matrix(out: &mut String, name: &str, m: &crate::linalg::CMat) {
    use std::fmt::Write;
    let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_complex(&m[(i, j)])).collect();
        let _ = writeln!(out, "  {}", row.join("  "));
    }
}
