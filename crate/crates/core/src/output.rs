//! CSV and metadata emission.
//!
//! Dialect: comma separators, `.` decimal point, one header row, LF line
//! endings, floats printed with 17 significant digits so a re-parse
//! reproduces the exact bits. No timestamps anywhere — reruns of the same
//! config must be byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::harness::{PairedRunReport, RegretAggregate, RoundRecord, ScalingTable};
use crate::rng::PRNG_FAMILY;

/// 17 significant digits: enough for a bit-stable f64 round trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-round log of one episode.
pub fn write_rounds_csv(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(
        b"k,action_index,weight,bonus,clean_reward,c_k,observed_reward,instant_regret,cum_regret,est_error,confidence_ok\n",
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.action_index,
            format_float(r.weight),
            format_float(r.bonus),
            format_float(r.clean_reward),
            format_float(r.c_k),
            format_float(r.observed_reward),
            format_float(r.instant_regret),
            format_float(r.cum_regret),
            format_float(r.est_error),
            u8::from(r.confidence_ok),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Cross-seed envelopes of the cumulative regret.
pub fn write_aggregate_csv(path: &Path, agg: &RegretAggregate) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"k,mean,std,min,max\n")?;
    for k in 0..agg.horizon {
        writeln!(
            w,
            "{},{},{},{},{}",
            k + 1,
            format_float(agg.mean[k]),
            format_float(agg.std[k]),
            format_float(agg.min[k]),
            format_float(agg.max[k]),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Scaling-study table: one row per (policy, grid corner).
pub fn write_scaling_csv(path: &Path, table: &ScalingTable) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"policy,dim,horizon,corruption_budget,mean_final_regret,instance_bound_ratio\n")?;
    for cell in &table.cells {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            cell.policy,
            cell.dim,
            cell.horizon,
            format_float(cell.corruption_budget),
            format_float(cell.mean_final_regret),
            cell.instance_bound_ratio.map(format_float).unwrap_or_default(),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Per-seed report of the paired lower-bound experiment.
pub fn write_lower_bound_csv(path: &Path, reports: &[PairedRunReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(
        b"seed,regret_a0,regret_a1,action_divergence_round,observation_divergence_round,realized_c,budget_exhausted,prefix_ok,regret_floor,floor_satisfied\n",
    )?;
    for r in reports {
        let floor = r.regret_floor;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            format_float(r.a0.final_regret()),
            format_float(r.a1.final_regret()),
            r.first_action_divergence
                .map(|k| k.to_string())
                .unwrap_or_default(),
            r.first_observation_divergence
                .map(|k| k.to_string())
                .unwrap_or_default(),
            format_float(r.a1.report.c_realized),
            u8::from(r.a1.first_declined_round.is_some()),
            u8::from(r.prefix_identical_through_decline),
            floor.map(format_float).unwrap_or_default(),
            floor
                .map(|f| u8::from(r.a1.final_regret() >= f).to_string())
                .unwrap_or_default(),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Derived per-(cell, policy) hyperparameters echoed for auditability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedPolicy {
    pub cell: String,
    pub policy: String,
    pub kind: String,
    pub lambda: f64,
    /// None means the weight threshold is uncapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub beta: f64,
    pub delta: f64,
    pub horizon: usize,
    /// Flagged because per-round regret clipping arguments assume β ≥ 1.
    pub beta_below_one: bool,
}

#[derive(Serialize)]
struct Metadata<'a> {
    format_version: u32,
    code_version: &'a str,
    prng: &'a str,
    config: &'a ExperimentConfig,
    derived: &'a [DerivedPolicy],
}

/// Run metadata: code/PRNG identification, the resolved config echo, and the
/// derived hyperparameters.
pub fn write_metadata(
    path: &Path,
    config: &ExperimentConfig,
    derived: &[DerivedPolicy],
) -> Result<()> {
    let meta = Metadata {
        format_version: 1,
        code_version: env!("CARGO_PKG_VERSION"),
        prng: PRNG_FAMILY,
        config,
        derived,
    };
    let text = toml::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Re-parse the config echoed inside a metadata file.
pub fn config_from_metadata(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let config = table
        .get("config")
        .ok_or_else(|| Error::Config("metadata has no [config] section".into()))?;
    let config: ExperimentConfig = config
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_bits() {
        for x in [
            0.1,
            -3.5e-17,
            123456.789,
            f64::MIN_POSITIVE,
            1.0 / 3.0,
            -0.0,
        ] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "{x} -> {s} -> {back}");
        }
    }
}
