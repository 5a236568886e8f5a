//! CSV report rows and message trace output.

use std::io::Write;

use crate::engine::{SweepRow, TraceLine};
use crate::error::Result;
use crate::metrics::{MetricsReport, ProviderReport};

pub const CSV_HEADER: [&str; 13] = [
    "scenario_id",
    "axis_value",
    "replication",
    "seed",
    "provider",
    "r_bl_global",
    "eta_s",
    "eta_s_user_weighted",
    "c_e",
    "n_blocked",
    "n_processed",
    "active_users_mean",
    "traffic_load_offered",
];

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Writes provider rows followed by one `ALL` row per report.
pub struct CsvReport<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvReport<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(CSV_HEADER)?;
        Ok(CsvReport { writer })
    }

    pub fn write_run(
        &mut self,
        scenario_id: &str,
        axis_value: &str,
        replication: usize,
        seed: u64,
        report: &MetricsReport,
    ) -> Result<()> {
        let rows = report.providers.iter().chain(std::iter::once(&report.total));
        for p in rows {
            self.writer.write_record(row(scenario_id, axis_value, replication, seed, report.blocking_rate, p))?;
        }
        Ok(())
    }

    pub fn write_sweep(&mut self, scenario_id: &str, rows: &[SweepRow]) -> Result<()> {
        for r in rows {
            self.write_run(scenario_id, &r.axis_value, r.replication, r.seed, &r.report)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| e.into_error().into())
    }
}

fn row(
    scenario_id: &str,
    axis_value: &str,
    replication: usize,
    seed: u64,
    r_bl: Option<f64>,
    p: &ProviderReport,
) -> [String; 13] {
    [
        scenario_id.to_string(),
        axis_value.to_string(),
        replication.to_string(),
        seed.to_string(),
        p.provider.map_or_else(|| "ALL".to_string(), |id| id.0.to_string()),
        num(r_bl),
        num(p.eta_s),
        num(p.eta_s_user_weighted),
        num(p.c_e),
        p.n_blocked.to_string(),
        p.n_processed.to_string(),
        p.active_users_mean.to_string(),
        p.traffic_load_offered.to_string(),
    ]
}

/// Report of a single run as CSV text.
pub fn run_csv(scenario_id: &str, seed: u64, report: &MetricsReport) -> Result<String> {
    let mut w = CsvReport::new(Vec::new())?;
    w.write_run(scenario_id, "", 0, seed, report)?;
    Ok(String::from_utf8(w.finish()?).expect("csv is utf-8"))
}

/// One tab-separated line per message: time, kind, source, destination,
/// payload summary.
pub fn write_trace<W: Write>(out: &mut W, lines: &[TraceLine]) -> Result<()> {
    for l in lines {
        writeln!(out, "{:.6}\t{}\t{}\t{}\t{}", l.time, l.kind, l.src, l.dst, l.summary)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{MetricsAccumulator, ProviderSetup};
    use crate::protocol::{MessageKind, NodeId};
    use crate::world::{CellId, CrNodeId, ProviderId};

    #[test]
    fn header_and_rows() {
        let mut acc = MetricsAccumulator::new(0.0, vec![ProviderSetup { n_channels: 2, user_slots: 20, alpha: 0.5 }; 2]);
        acc.record_decision(ProviderId(0), true, 0.0);
        acc.record_decision(ProviderId(1), false, 0.0);
        acc.record_occupancy_change(ProviderId(1), 1, 0.0).unwrap();
        let r = acc.finish(4.0).unwrap();
        let text = run_csv("s", 7, &r).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "s,,0,7,0,0.5,0,0,0,1,1,0,0");
        assert_eq!(lines[2], "s,,0,7,1,0.5,0.5,0,1,0,1,0,0");
        assert!(lines[3].starts_with("s,,0,7,ALL,0.5,0.25,"));
    }

    #[test]
    fn undefined_values_are_na() {
        let mut acc = MetricsAccumulator::new(0.0, vec![ProviderSetup { n_channels: 0, user_slots: 0, alpha: 1.0 }]);
        let r = acc.finish(1.0).unwrap();
        let text = run_csv("x", 1, &r).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "x,,0,1,0,NA,NA,NA,NA,0,0,0,0");
    }

    #[test]
    fn trace_format() {
        let mut buf = Vec::new();
        let l = TraceLine {
            time: 1.5,
            kind: MessageKind::ChannelRequest,
            src: NodeId::Bs(CellId(3)),
            dst: NodeId::Cr(CrNodeId(4)),
            summary: "req=0 sp=1".into(),
        };
        write_trace(&mut buf, &[l]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1.500000\tChannelRequest\tBS3\tCR4\treq=0 sp=1\n");
    }
}
