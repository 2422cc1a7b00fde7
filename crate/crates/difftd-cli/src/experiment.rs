//! Seeded sweep execution and aggregation.
//!
//! A sweep fans independent (n, η, seed) runs out to a rayon pool; results
//! are merged back in job order, so parallelism never changes output
//! bytes. Per-run seeds are derived by mixing (n, η, replicate) into the
//! base seed, so adding sweep points never perturbs existing runs.

use std::io::Write;
use std::path::Path;

use difftd::learner::{run_trajectory, LearnerConfig};
use difftd::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// One probe of one run, as stored in the raw CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub n: usize,
    pub eta: f64,
    pub seed: u64,
    pub step: u64,
    pub rmsve_tvr: f64,
    #[serde(rename = "J_estimate")]
    pub j_estimate: f64,
}

/// One aggregated probe: mean over seeds with the standard error of the
/// mean (absent for single-seed sweeps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub step: u64,
    pub mean: f64,
    pub stderr: Option<f64>,
}

/// The aggregated series of one (n, η) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSeries {
    pub n: usize,
    pub eta: f64,
    pub points: Vec<SweepPoint>,
}

/// Per-(n, η) aggregation of a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSummary {
    pub series: Vec<SweepSeries>,
}

/// Everything a sweep produces.
pub struct SweepOutput {
    pub raw: Vec<RawRow>,
    pub summary: SweepSummary,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-run seed: the base seed xored with a hash of (n, η, replicate).
pub fn derive_seed(base_seed: u64, n: usize, eta: f64, replicate: u64) -> u64 {
    let mut h = mix64((n as u64).wrapping_add(0x9e37_79b9_7f4a_7c15));
    h = mix64(h ^ eta.to_bits());
    h = mix64(h ^ replicate);
    base_seed ^ h
}

/// Runs the full (n, η, seed) grid and aggregates it.
pub fn run_experiment(config: &ExperimentConfig, base_seed: u64) -> Result<SweepOutput> {
    config.validate()?;
    let resolved = config.resolve()?;

    let mut jobs = Vec::new();
    for &n in &config.n_values {
        for &eta in &config.eta_values {
            for replicate in 0..config.seeds {
                jobs.push((n, eta, replicate));
            }
        }
    }

    let records: Vec<(usize, f64, u64, difftd::learner::RunRecord)> = jobs
        .par_iter()
        .map(|&(n, eta, replicate)| {
            let seed = derive_seed(base_seed, n, eta, replicate);
            let learner_config = LearnerConfig {
                n,
                eta,
                schedule: config.schedule,
                num_states: resolved.mdp.num_states(),
            };
            run_trajectory(
                &resolved.mdp,
                &resolved.behavior,
                &resolved.target,
                &learner_config,
                config.steps,
                seed,
                config.probe_every,
            )
            .map_err(|e| Error::Config(format!("run (n={n}, eta={eta}, seed={seed}): {e}")))
            .map(|record| (n, eta, seed, record))
        })
        .collect::<Result<_>>()?;

    let mut raw = Vec::new();
    for (n, eta, seed, record) in &records {
        for sample in &record.samples {
            raw.push(RawRow {
                n: *n,
                eta: *eta,
                seed: *seed,
                step: sample.step,
                rmsve_tvr: sample.rmsve_tvr,
                j_estimate: sample.j_estimate,
            });
        }
    }
    let summary = aggregate_rows(&raw)?;
    Ok(SweepOutput { raw, summary })
}

/// Aggregates raw rows into per-(n, η) mean ± standard-error series.
///
/// Seeds within a cell must share one probe grid; the mean is accumulated
/// in ascending seed order, so the result is invariant to the order rows
/// arrive in. stderr = sample standard deviation / √seeds, reported only
/// when a cell has at least two seeds.
pub fn aggregate_rows(rows: &[RawRow]) -> Result<SweepSummary> {
    if rows.is_empty() {
        return Err(Error::Input("no rows to aggregate".into()));
    }
    // Cells keyed by (n, eta bits) in first-appearance order.
    let mut order: Vec<(usize, u64)> = Vec::new();
    for row in rows {
        let key = (row.n, row.eta.to_bits());
        if !order.contains(&key) {
            order.push(key);
        }
    }

    let mut series = Vec::with_capacity(order.len());
    for (n, eta_bits) in order {
        let eta = f64::from_bits(eta_bits);
        let mut cell: Vec<&RawRow> = rows
            .iter()
            .filter(|r| r.n == n && r.eta.to_bits() == eta_bits)
            .collect();
        cell.sort_by_key(|r| (r.seed, r.step));
        let mut seeds: Vec<u64> = cell.iter().map(|r| r.seed).collect();
        seeds.dedup();
        let num_seeds = seeds.len();
        let per_seed = cell.len() / num_seeds;
        let grid: Vec<u64> = cell[..per_seed].iter().map(|r| r.step).collect();
        for (chunk, &seed) in cell.chunks(per_seed).zip(&seeds) {
            if chunk.len() != per_seed
                || chunk.iter().zip(&grid).any(|(r, &step)| r.step != step || r.seed != seed)
            {
                return Err(Error::Input(format!(
                    "ragged probe grid in cell n={n}, eta={eta}: seeds disagree on probe steps"
                )));
            }
        }

        let mut points = Vec::with_capacity(per_seed);
        for (i, &step) in grid.iter().enumerate() {
            let values: Vec<f64> =
                cell.chunks(per_seed).map(|chunk| chunk[i].rmsve_tvr).collect();
            let mean = values.iter().sum::<f64>() / num_seeds as f64;
            let stderr = if num_seeds >= 2 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (num_seeds as f64 - 1.0);
                Some((var / num_seeds as f64).sqrt())
            } else {
                None
            };
            points.push(SweepPoint { step, mean, stderr });
        }
        series.push(SweepSeries { n, eta, points });
    }
    Ok(SweepSummary { series })
}

/// Writes the raw CSV (`n, eta, seed, step, rmsve_tvr, J_estimate`).
pub fn write_raw_csv<W: Write>(rows: &[RawRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Input(format!("csv write: {e}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses a raw CSV back into rows.
pub fn read_raw_csv(text: &str) -> Result<Vec<RawRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(|e| Error::Input(format!("csv parse: {e}")))?);
    }
    if rows.is_empty() {
        return Err(Error::Input("raw CSV has no data rows".into()));
    }
    Ok(rows)
}

/// Writes the aggregate CSV (`n, eta, step, mean, stderr`); the stderr
/// column is omitted entirely for single-seed sweeps.
pub fn write_aggregate_csv<W: Write>(summary: &SweepSummary, mut out: W) -> Result<()> {
    let with_stderr = summary
        .series
        .iter()
        .any(|s| s.points.iter().any(|p| p.stderr.is_some()));
    if with_stderr {
        writeln!(out, "n,eta,step,mean,stderr")?;
    } else {
        writeln!(out, "n,eta,step,mean")?;
    }
    for series in &summary.series {
        for point in &series.points {
            if with_stderr {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    series.n,
                    series.eta,
                    point.step,
                    point.mean,
                    point.stderr.map_or(String::new(), |s| s.to_string())
                )?;
            } else {
                writeln!(out, "{},{},{},{}", series.n, series.eta, point.step, point.mean)?;
            }
        }
    }
    Ok(())
}

/// Parses an aggregate CSV (either column shape) back into a summary.
pub fn read_aggregate_csv(text: &str) -> Result<SweepSummary> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Input(format!("csv parse: {e}")))?.clone();
    let has_stderr = headers.iter().any(|h| h == "stderr");
    let mut summary = SweepSummary::default();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Input(format!("csv parse: {e}")))?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Input("short csv row".into()))
        };
        let n: usize = field(0)?.parse().map_err(|e| Error::Input(format!("bad n: {e}")))?;
        let eta: f64 = field(1)?.parse().map_err(|e| Error::Input(format!("bad eta: {e}")))?;
        let step: u64 = field(2)?.parse().map_err(|e| Error::Input(format!("bad step: {e}")))?;
        let mean: f64 = field(3)?.parse().map_err(|e| Error::Input(format!("bad mean: {e}")))?;
        let stderr = if has_stderr {
            let raw = field(4)?;
            if raw.is_empty() {
                None
            } else {
                Some(raw.parse().map_err(|e| Error::Input(format!("bad stderr: {e}")))?)
            }
        } else {
            None
        };
        if !mean.is_finite() || stderr.is_some_and(|s: f64| !s.is_finite()) {
            return Err(Error::Input("non-finite aggregate value".into()));
        }
        let key_matches =
            |s: &SweepSeries| s.n == n && s.eta.to_bits() == eta.to_bits();
        if let Some(series) = summary.series.iter_mut().find(|s| key_matches(s)) {
            series.points.push(SweepPoint { step, mean, stderr });
        } else {
            summary.series.push(SweepSeries {
                n,
                eta,
                points: vec![SweepPoint { step, mean, stderr }],
            });
        }
    }
    if summary.series.is_empty() {
        return Err(Error::Input("aggregate CSV has no data rows".into()));
    }
    Ok(summary)
}

/// Runs a sweep and writes `raw.csv`, `aggregate.csv`, and `plot.svg`
/// under `out_dir`.
pub fn run_experiment_to_dir(
    config: &ExperimentConfig,
    base_seed: u64,
    out_dir: &Path,
) -> Result<SweepOutput> {
    let output = run_experiment(config, base_seed)?;
    std::fs::create_dir_all(out_dir)?;
    let mut raw_file = std::fs::File::create(out_dir.join("raw.csv"))?;
    write_raw_csv(&output.raw, &mut raw_file)?;
    let mut aggregate_file = std::fs::File::create(out_dir.join("aggregate.csv"))?;
    write_aggregate_csv(&output.summary, &mut aggregate_file)?;
    std::fs::write(out_dir.join("plot.svg"), crate::plot::render_svg(&output.summary)?)?;
    Ok(output)
}
