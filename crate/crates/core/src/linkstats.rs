//! Packet accounting for a link run: SNR from measured powers, packet error
//! and loss rates, throughput and latency, and CSV export of the result.

use chrono::{DateTime, SecondsFormat, Utc};
use std::fs::OpenOptions;
use std::path::Path;
use thiserror::Error;

pub const CSV_COLUMNS: [&str; 19] = [
    "timestamp_utc",
    "scheme",
    "fc_hz",
    "bw_hz",
    "symbol_rate",
    "sps",
    "packet_len_bytes",
    "n_tx",
    "n_discarded",
    "n_ok",
    "n_fail",
    "per",
    "plr",
    "snr_db",
    "total_time_s",
    "latency_ms",
    "throughput_kbps",
    "rx_bytes",
    "seed",
];

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("signal power {p_s} does not exceed noise power {p_n}")]
    BelowNoise { p_s: f64, p_n: f64 },
    #[error("noise power must be positive, got {0}")]
    BadNoise(f64),
    #[error("counters already finalized")]
    Finalized,
    #[error("accounting error: {0}")]
    Accounting(String),
    #[error("malformed report row: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// `10 log10((p_s - p_n) / p_n)`.
pub fn estimate_snr(p_s: f64, p_n: f64) -> Result<f64, LinkError> {
    if !(p_n > 0.0) {
        return Err(LinkError::BadNoise(p_n));
    }
    if !(p_s > p_n) {
        return Err(LinkError::BelowNoise { p_s, p_n });
    }
    Ok(10.0 * ((p_s - p_n) / p_n).log10())
}

/// Outcome of one packet as seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameResult {
    Ok,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCounters {
    pub n_ok: u64,
    pub n_fail: u64,
    pub n_discarded: u64,
    pub l_p: usize,
    seen: u64,
    finalized: bool,
}

/// Run metadata echoed into the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub scheme: String,
    pub fc_hz: f64,
    pub bw_hz: f64,
    pub symbol_rate: f64,
    pub sps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub timestamp: DateTime<Utc>,
    pub meta: ReportMeta,
    pub packet_len_bytes: usize,
    pub n_tx: u64,
    pub n_discarded: u64,
    pub n_ok: u64,
    pub n_fail: u64,
    pub per: f64,
    pub plr: f64,
    pub snr_db: Option<f64>,
    pub total_time_s: f64,
    /// Absent when no packet was delivered.
    pub latency_ms: Option<f64>,
    pub throughput_kbps: f64,
    pub rx_bytes: u64,
}

impl LinkCounters {
    /// Counters whose first `n_discarded` recorded results are ignored.
    pub fn new(l_p: usize, n_discarded: u64) -> Self {
        Self { n_ok: 0, n_fail: 0, n_discarded, l_p, seen: 0, finalized: false }
    }

    pub fn record(&mut self, result: FrameResult) -> Result<(), LinkError> {
        if self.finalized {
            return Err(LinkError::Finalized);
        }
        self.seen += 1;
        if self.seen <= self.n_discarded {
            return Ok(());
        }
        match result {
            FrameResult::Ok => self.n_ok += 1,
            FrameResult::Fail => self.n_fail += 1,
        }
        Ok(())
    }

    /// Freezes the counters into a report. `n_tx` counts every transmitted
    /// packet, discarded ones included.
    pub fn finalize(
        &mut self,
        n_tx: u64,
        t_total: f64,
        snr_db: Option<f64>,
        meta: ReportMeta,
    ) -> Result<LinkReport, LinkError> {
        if self.finalized {
            return Err(LinkError::Finalized);
        }
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(LinkError::Accounting(format!("total time must be positive, got {t_total}")));
        }
        let effective = n_tx
            .checked_sub(self.n_discarded)
            .ok_or_else(|| LinkError::Accounting(format!("{} discarded of {n_tx} transmitted", self.n_discarded)))?;
        let delivered = self.n_ok + self.n_fail;
        if effective < delivered {
            return Err(LinkError::Accounting(format!(
                "{delivered} packets observed but only {effective} transmitted"
            )));
        }
        if effective == 0 {
            return Err(LinkError::Accounting("no packets left after discarding".into()));
        }
        self.finalized = true;
        let n = effective as f64;
        Ok(LinkReport {
            timestamp: Utc::now(),
            meta,
            packet_len_bytes: self.l_p,
            n_tx,
            n_discarded: self.n_discarded,
            n_ok: self.n_ok,
            n_fail: self.n_fail,
            per: self.n_fail as f64 / n,
            plr: (effective - self.n_ok) as f64 / n,
            snr_db,
            total_time_s: t_total,
            latency_ms: (delivered > 0).then(|| 1000.0 * t_total / delivered as f64),
            throughput_kbps: 8.0 * self.n_ok as f64 * self.l_p as f64 / (1000.0 * t_total),
            rx_bytes: self.n_ok * self.l_p as u64,
        })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl LinkReport {
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true),
            self.meta.scheme.clone(),
            self.meta.fc_hz.to_string(),
            self.meta.bw_hz.to_string(),
            self.meta.symbol_rate.to_string(),
            self.meta.sps.to_string(),
            self.packet_len_bytes.to_string(),
            self.n_tx.to_string(),
            self.n_discarded.to_string(),
            self.n_ok.to_string(),
            self.n_fail.to_string(),
            self.per.to_string(),
            self.plr.to_string(),
            opt(self.snr_db),
            self.total_time_s.to_string(),
            opt(self.latency_ms),
            self.throughput_kbps.to_string(),
            self.rx_bytes.to_string(),
            self.meta.seed.to_string(),
        ]
    }

    /// Parses a row written by [`export_csv`].
    pub fn from_csv_record(rec: &csv::StringRecord) -> Result<Self, LinkError> {
        if rec.len() != CSV_COLUMNS.len() {
            return Err(LinkError::Parse(format!("expected {} fields, got {}", CSV_COLUMNS.len(), rec.len())));
        }
        fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, LinkError> {
            rec[i].parse().map_err(|_| LinkError::Parse(format!("{}: '{}'", CSV_COLUMNS[i], &rec[i])))
        }
        fn maybe(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>, LinkError> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(rec, i).map(Some)
            }
        }
        let timestamp = DateTime::parse_from_rfc3339(&rec[0])
            .map_err(|e| LinkError::Parse(format!("timestamp: {e}")))?
            .with_timezone(&Utc);
        Ok(Self {
            timestamp,
            meta: ReportMeta {
                scheme: rec[1].to_string(),
                fc_hz: num(rec, 2)?,
                bw_hz: num(rec, 3)?,
                symbol_rate: num(rec, 4)?,
                sps: num(rec, 5)?,
                seed: num(rec, 18)?,
            },
            packet_len_bytes: num(rec, 6)?,
            n_tx: num(rec, 7)?,
            n_discarded: num(rec, 8)?,
            n_ok: num(rec, 9)?,
            n_fail: num(rec, 10)?,
            per: num(rec, 11)?,
            plr: num(rec, 12)?,
            snr_db: maybe(rec, 13)?,
            total_time_s: num(rec, 14)?,
            latency_ms: maybe(rec, 15)?,
            throughput_kbps: num(rec, 16)?,
            rx_bytes: num(rec, 17)?,
        })
    }
}

/// Appends a row to `path`, writing the header first if the file is new or empty.
pub fn export_csv(report: &LinkReport, path: &Path) -> Result<(), LinkError> {
    export_csv_rows(std::slice::from_ref(report), path)
}

pub fn export_csv_rows(reports: &[LinkReport], path: &Path) -> Result<(), LinkError> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let fresh = file.metadata()?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in reports {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<LinkReport>, LinkError> {
    let mut r = csv::Reader::from_path(path)?;
    r.records().map(|rec| LinkReport::from_csv_record(&rec?)).collect()
}
