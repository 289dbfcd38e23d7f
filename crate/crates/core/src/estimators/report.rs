use super::EstimateResult;
use crate::error::{Error, Result};
use serde::Serialize;
use std::io::Write;

/// One CSV record; field order is the file's column order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub method: String,
    pub family: String,
    pub params: String,
    pub p: String,
    pub u_hat: String,
    pub sd: String,
    pub seconds: String,
    pub wnrv: String,
    pub theta: String,
    pub seed: u64,
}

impl From<&EstimateResult> for CsvRow {
    fn from(r: &EstimateResult) -> Self {
        CsvRow {
            method: r.method.label().into(),
            family: r.family.clone(),
            params: r.params.clone(),
            p: r.p_label.clone(),
            u_hat: format!("{:.6e}", r.u_hat),
            sd: format!("{:.6e}", r.sd),
            seconds: format!("{:.4}", r.seconds),
            wnrv: r.wnrv.map(|w| format!("{w:.6e}")).unwrap_or_default(),
            theta: r.theta.iter().map(|t| format!("{t:.6}")).collect::<Vec<_>>().join(";"),
            seed: r.seed,
        }
    }
}

pub fn write_csv<W: Write>(w: W, rows: &[EstimateResult]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(CsvRow::from(r)).map_err(|e| Error::Io(e.to_string()))?;
    }
    wr.flush().map_err(|e| Error::Io(e.to_string()))
}
