//! Published reference values for `reproduce`, stored as JSON next to this file.

use super::config::RunConfig;
use serde::Deserialize;
use std::sync::OnceLock;

#[derive(Clone, Debug, Deserialize)]
pub struct Cells {
    pub u: Vec<f64>,
    pub sd: Vec<f64>,
    pub wnrv: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct MethodRow {
    pub method: String,
    /// one tilting vector per threshold, in the solver's layout
    pub theta: Vec<Vec<f64>>,
    #[serde(flatten)]
    pub cells: Cells,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ReferenceTable {
    pub id: usize,
    pub title: String,
    /// model keys, in the run-config format
    pub model: RunConfig,
    pub ps: Vec<f64>,
    pub naive: Cells,
    pub rows: Vec<MethodRow>,
}

pub fn all_tables() -> &'static [ReferenceTable] {
    static T: OnceLock<Vec<ReferenceTable>> = OnceLock::new();
    T.get_or_init(|| serde_json::from_str(include_str!("reference_tables.json")).expect("embedded reference tables"))
}

pub fn reference_table(id: usize) -> Option<&'static ReferenceTable> {
    all_tables().iter().find(|t| t.id == id)
}
