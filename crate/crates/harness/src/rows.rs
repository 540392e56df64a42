//! Per-trial CSV rows.

use std::io::{Read, Write};

use bandloc_core::estimators::TrialRecord;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One CSV row; wall time is left out so the file is a pure function of the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub index: u64,
    pub w: usize,
    pub n: usize,
    pub e: f64,
    pub master_seed: u64,
    pub cell_seed: u64,
    pub trial_index: u64,
    pub gamma: Option<f64>,
    pub edge_norm_log: Option<f64>,
    pub ill_conditioned_sites: usize,
    pub singular_site: Option<usize>,
    pub wegner_exceedances: usize,
    pub max_cond: f64,
    /// `;`-separated thinned `log r` values
    pub log_r: String,
}

impl TrialRow {
    pub fn from_record(index: u64, r: &TrialRecord) -> Self {
        Self {
            index,
            w: r.w,
            n: r.n,
            e: r.e,
            master_seed: r.master_seed,
            cell_seed: r.cell_seed,
            trial_index: r.trial_index,
            gamma: r.gamma,
            edge_norm_log: r.edge_norm_log,
            ill_conditioned_sites: r.ill_conditioned_sites,
            singular_site: r.singular_site,
            wegner_exceedances: r.wegner_exceedances,
            max_cond: r.max_cond,
            log_r: r.log_r.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
        }
    }

    pub fn to_record(&self) -> TrialRecord {
        TrialRecord {
            master_seed: self.master_seed,
            cell_seed: self.cell_seed,
            trial_index: self.trial_index,
            w: self.w,
            n: self.n,
            e: self.e,
            gamma: self.gamma,
            edge_norm_log: self.edge_norm_log,
            ill_conditioned_sites: self.ill_conditioned_sites,
            singular_site: self.singular_site,
            wegner_exceedances: self.wegner_exceedances,
            max_cond: self.max_cond,
            log_r: self.log_r.split(';').filter(|s| !s.is_empty()).map(|s| s.parse().unwrap_or(f64::NAN)).collect(),
            wall_time_s: 0.0,
        }
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[TrialRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<TrialRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<TrialRow>, _>>()?)
}
