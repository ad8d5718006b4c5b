use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assessment::{AssessmentConfig, Method};
use crate::error::{Error, Result};

use super::montecarlo::{estimate_cp_methods, CpResult};
use super::scenario::{builtin_scenarios, ShiftKind};

/// κ_r values of the table columns; with κ_{−r} = 10 they give the ratios
/// 0.0, 0.2, …, 1.0.
pub const KAPPA_R_GRID: [f64; 6] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
pub const KAPPA_MINUS_R: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceTable {
    A5,
    A6,
    A7,
}

impl ReferenceTable {
    pub fn shift(self) -> ShiftKind {
        match self {
            ReferenceTable::A5 => ShiftKind::Noshift,
            ReferenceTable::A6 => ShiftKind::ShiftI,
            ReferenceTable::A7 => ShiftKind::ShiftIi,
        }
    }
}

impl FromStr for ReferenceTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A5" => Ok(ReferenceTable::A5),
            "A6" => Ok(ReferenceTable::A6),
            "A7" => Ok(ReferenceTable::A7),
            _ => Err(Error::InvalidArgument(format!("unknown table \"{s}\" (expected A5, A6 or A7)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub scenario: String,
    pub kappa_r: f64,
    pub ratio: f64,
    pub result: CpResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableResult {
    pub table: ReferenceTable,
    pub reps: usize,
    pub seed: u64,
    pub cells: Vec<TableCell>,
}

fn format_cp(cp: Option<f64>) -> String {
    cp.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

impl TableResult {
    pub fn cell(&self, scenario: &str, method: &Method, kappa_r: f64) -> Option<&TableCell> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && &c.result.method == method && c.kappa_r == kappa_r)
    }

    /// One row per scenario and method, one column per κ ratio.
    pub fn to_wide_csv(&self) -> String {
        let mut out = String::from("scenario,method");
        for k in KAPPA_R_GRID {
            let _ = write!(out, ",{:.1}", k / KAPPA_MINUS_R);
        }
        out.push('\n');
        let mut rows: Vec<(&str, Method)> = Vec::new();
        for c in &self.cells {
            if !rows.iter().any(|(s, m)| *s == c.scenario && *m == c.result.method) {
                rows.push((&c.scenario, c.result.method));
            }
        }
        for (scenario, method) in rows {
            let _ = write!(out, "{scenario},{}", method.label());
            for k in KAPPA_R_GRID {
                let cp = self.cell(scenario, &method, k).and_then(|c| c.result.cp);
                let _ = write!(out, ",{}", format_cp(cp));
            }
            out.push('\n');
        }
        out
    }

    /// One row per cell with the Monte Carlo bookkeeping.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from(
            "scenario,method,kappa_r,ratio,cp,mc_se,power,reps_total,reps_significant,reps_failed,seed\n",
        );
        for c in &self.cells {
            let r = &c.result;
            let _ = writeln!(
                out,
                "{},{},{},{:.1},{},{},{:.4},{},{},{},{}",
                c.scenario,
                r.method.label(),
                c.kappa_r,
                c.ratio,
                format_cp(r.cp),
                r.mc_se.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}")),
                r.power,
                r.reps_total,
                r.reps_significant,
                r.reps_failed,
                r.seed
            );
        }
        out
    }
}

/// Estimates every family × κ ratio × method cell of one table. Every cell
/// uses the same master seed.
pub fn reproduce_table(
    table: ReferenceTable,
    reps: usize,
    seed: u64,
    config: &AssessmentConfig,
) -> Result<TableResult> {
    let methods = Method::table_set();
    let mut cells = Vec::new();
    for spec in builtin_scenarios().into_iter().filter(|s| s.shift == table.shift()) {
        for kappa_r in KAPPA_R_GRID {
            let mut cell_spec = spec.clone().with_kappa_r(kappa_r);
            cell_spec.kappa_minus_r = KAPPA_MINUS_R;
            let results = estimate_cp_methods(&cell_spec, &methods, config, reps, seed)?;
            log::info!(
                "{} κ_r={kappa_r}: power {:.3}, CP {}",
                spec.name,
                results[0].power,
                results.iter().map(|r| format_cp(r.cp)).collect::<Vec<_>>().join(" ")
            );
            for result in results {
                cells.push(TableCell {
                    scenario: spec.name.clone(),
                    kappa_r,
                    ratio: kappa_r / KAPPA_MINUS_R,
                    result,
                });
            }
        }
    }
    Ok(TableResult { table, reps, seed, cells })
}
