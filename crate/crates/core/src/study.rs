//! Record types written by the convergence, spectrum and entropy studies.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One level of a mesh-convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub lev: usize,
    pub h_ref: f64,
    pub n_dof: usize,
    pub dt: f64,
    pub l2_error: f64,
    /// Observed rate against the previous row; empty on the first row.
    pub rate: Option<f64>,
}

/// Fills `rate` from consecutive errors given the refinement ratio between rows.
pub fn fill_rates(rows: &mut [ConvergenceRow]) {
    for k in 1..rows.len() {
        let ratio = rows[k - 1].h_ref / rows[k].h_ref;
        rows[k].rate = Some((rows[k - 1].l2_error / rows[k].l2_error).ln() / ratio.ln());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub step: usize,
    pub time: f64,
    pub total_entropy: f64,
    pub delta_entropy: f64,
}

/// One mesh of the vortex study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexRow {
    pub n: usize,
    pub h: f64,
    pub n_dof: usize,
    pub newton_iterations: usize,
    pub residual: f64,
    pub density_error: f64,
    pub drag: f64,
    pub drag_error: f64,
    pub density_rate: Option<f64>,
    pub drag_rate: Option<f64>,
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
