use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{run, RunOptions};
use crate::engine::scenario::Scenario;
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::traffic::replication_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Average per-provider arrival rate (calls/s); relative differences
    /// between providers are kept.
    MeanArrival,
    /// Pairwise rate correlation.
    Correlation,
    /// Sharing on or off.
    Sharing,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_arrival" => Ok(SweepAxis::MeanArrival),
            "correlation" => Ok(SweepAxis::Correlation),
            "sharing" => Ok(SweepAxis::Sharing),
            other => Err(Error::config(format!("unknown sweep axis `{other}`"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::MeanArrival => "mean_arrival",
            SweepAxis::Correlation => "correlation",
            SweepAxis::Sharing => "sharing",
        })
    }
}

/// Scenario for one point of a sweep.
pub fn apply_axis(base: &Scenario, axis: SweepAxis, value: &str) -> Result<Scenario> {
    let mut s = base.clone();
    let number = || -> Result<f64> {
        value.trim().parse::<f64>().map_err(|_| Error::config(format!("bad {axis} value `{value}`")))
    };
    match axis {
        SweepAxis::MeanArrival => {
            let v = number()?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("mean arrival must be >= 0, got {v}")));
            }
            let rates = &mut s.traffic.mean_rates;
            let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
            for r in rates.iter_mut() {
                *r = if mean > 0.0 { v * *r / mean } else { v };
            }
        }
        SweepAxis::Correlation => {
            s.traffic.correlation = number()?;
            s.traffic.covariance = None;
        }
        SweepAxis::Sharing => {
            s.sharing_enabled = match value.trim() {
                "on" | "true" | "1" => true,
                "off" | "false" | "0" => false,
                other => return Err(Error::config(format!("bad sharing value `{other}`"))),
            };
        }
    }
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: String,
    pub replication: usize,
    pub seed: u64,
    pub report: MetricsReport,
}

/// One run per point and replication. Replication `r` uses the same derived
/// seed at every point, so points are compared on matched randomness.
/// Runs execute in parallel; rows come back point-major in input order.
pub fn sweep(base: &Scenario, axis: SweepAxis, values: &[String], reps: usize) -> Result<Vec<SweepRow>> {
    if reps == 0 {
        return Err(Error::config("reps must be >= 1"));
    }
    let points = values.iter().map(|v| apply_axis(base, axis, v)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..reps).map(move |r| (p, r))).collect();
    let opts = RunOptions { check_invariants: false, ..RunOptions::default() };
    jobs.par_iter()
        .map(|&(p, r)| {
            let mut s = points[p].clone();
            s.seed = replication_seed(base.seed, r as u64);
            let out = run(&s, &opts)?;
            Ok(SweepRow { axis_value: values[p].clone(), replication: r, seed: s.seed, report: out.report })
        })
        .collect()
}
