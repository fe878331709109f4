//! CSV export of epsilon curves.

use std::io::Write;

use crate::bound::EpsilonBound;
use crate::{AnalysisError, Result};

pub const HEADER: [&str; 13] = [
    "property", "N", "f", "G", "E", "E_hat", "R", "R_hat", "D", "D_hat", "epsilon", "method", "samples",
];

fn row(b: &EpsilonBound) -> Vec<String> {
    let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    let s = b.params.sizes;
    vec![
        b.property.to_string(),
        b.params.n.to_string(),
        b.params.f.to_string(),
        b.params.g.map(|g| g.to_string()).unwrap_or_default(),
        opt(s.map(|s| s.e)),
        opt(s.map(|s| s.e_hat)),
        opt(s.map(|s| s.r)),
        opt(s.map(|s| s.r_hat)),
        opt(s.map(|s| s.d)),
        opt(s.map(|s| s.d_hat)),
        format!("{:e}", b.epsilon),
        b.method.name().to_string(),
        b.method.samples().map(|s| s.to_string()).unwrap_or_default(),
    ]
}

/// Writes the header and one row per bound.
pub fn write_csv<W: Write>(out: W, bounds: &[EpsilonBound]) -> Result<()> {
    let err = |e: csv::Error| AnalysisError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(err)?;
    for b in bounds {
        w.write_record(row(b)).map_err(err)?;
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
}
