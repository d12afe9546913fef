use super::link::{load_payload, simulate};
use super::{AtStage, CampaignConfig, CampaignError, Stage};
use crate::linkstats::{LinkCounters, LinkReport};
use crate::txmodem::Scheme;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Metrics written by [`write_tables`], one file per scheme and metric.
pub const TABLE_METRICS: [&str; 5] = ["per", "plr", "throughput_kbps", "latency_ms", "snr_db"];

/// Odd constant spreading repeat seeds across the 64-bit space.
const REPEAT_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub scheme: Scheme,
    /// Channel SNR the point was configured with.
    pub snr_set_db: f64,
    /// All repeats pooled into one report.
    pub report: LinkReport,
}

fn pooled(cfg: &CampaignConfig, reports: &[LinkReport], seed: u64) -> Result<LinkReport, CampaignError> {
    let mut c = LinkCounters::new(cfg.frame.payload_len, reports.iter().map(|r| r.n_discarded).sum());
    c.n_ok = reports.iter().map(|r| r.n_ok).sum();
    c.n_fail = reports.iter().map(|r| r.n_fail).sum();
    let n_tx = reports.iter().map(|r| r.n_tx).sum();
    let t = reports.iter().map(|r| r.total_time_s).sum();
    // Average the SNR estimates in the linear domain.
    let snrs: Vec<f64> = reports.iter().filter_map(|r| r.snr_db).collect();
    let snr = (!snrs.is_empty())
        .then(|| 10.0 * (snrs.iter().map(|s| 10f64.powf(s / 10.0)).sum::<f64>() / snrs.len() as f64).log10());
    let mut meta = reports[0].meta.clone();
    meta.seed = seed;
    c.finalize(n_tx, t, snr, meta).at(Stage::Report)
}

/// A sweep point that could not be completed.
#[derive(Debug)]
pub struct SweepFailure {
    pub scheme: Scheme,
    pub snr_set_db: f64,
    pub error: CampaignError,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    /// Completed points in the order they were configured.
    pub points: Vec<SweepPoint>,
    pub failures: Vec<SweepFailure>,
}

/// Runs `cfg.repeats` simulated links at each SNR in `cfg.sweep_snr_db`.
/// Point `i` uses seed `cfg.seed + i`; repeat `r` of it adds
/// `r * 0x9E3779B97F4A7C15`. Points run in parallel, and a failed point is
/// recorded without stopping the others.
pub fn sweep(cfg: &CampaignConfig) -> Result<SweepOutcome, CampaignError> {
    cfg.validate().at(Stage::Config)?;
    if cfg.sweep_snr_db.len() < 2 {
        return Err(CampaignError::new(Stage::Config, "a sweep needs at least two SNR points"));
    }
    let payload = load_payload(cfg)?;
    let results: Vec<Result<SweepPoint, CampaignError>> = cfg
        .sweep_snr_db
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| {
            let seed_point = cfg.seed.wrapping_add(i as u64);
            let reports = (0..cfg.repeats as u64)
                .map(|r| {
                    let mut run = cfg.clone();
                    run.channel.snr_db = snr;
                    run.seed = seed_point.wrapping_add(r.wrapping_mul(REPEAT_STRIDE));
                    simulate(&run, &payload).map(|o| o.report)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SweepPoint { scheme: cfg.scheme, snr_set_db: snr, report: pooled(cfg, &reports, seed_point)? })
        })
        .collect();
    let mut out = SweepOutcome::default();
    for (result, &snr) in results.into_iter().zip(&cfg.sweep_snr_db) {
        match result {
            Ok(p) => out.points.push(p),
            Err(error) => out.failures.push(SweepFailure { scheme: cfg.scheme, snr_set_db: snr, error }),
        }
    }
    Ok(out)
}

fn metric(r: &LinkReport, name: &str) -> Option<f64> {
    match name {
        "per" => Some(r.per),
        "plr" => Some(r.plr),
        "throughput_kbps" => Some(r.throughput_kbps),
        "latency_ms" => r.latency_ms,
        "snr_db" => r.snr_db,
        _ => None,
    }
}

/// Writes `<scheme>_<metric>.dat` files into `dir`, each a two-column
/// table of configured SNR against the metric, sorted by SNR. Points with
/// no value for a metric are left out. Returns the files written.
pub fn write_tables(points: &[SweepPoint], dir: &Path) -> Result<Vec<PathBuf>, CampaignError> {
    std::fs::create_dir_all(dir).map_err(|e| CampaignError::new(Stage::Output, format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for scheme in Scheme::ALL {
        let mut rows: Vec<&SweepPoint> = points.iter().filter(|p| p.scheme == scheme).collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|a, b| a.snr_set_db.total_cmp(&b.snr_set_db));
        for name in TABLE_METRICS {
            let mut text = format!("# snr_db {name}\n");
            for p in &rows {
                if let Some(v) = metric(&p.report, name) {
                    writeln!(text, "{} {}", p.snr_set_db, v).expect("writing to a String");
                }
            }
            let path = dir.join(format!("{}_{name}.dat", scheme.as_str()));
            std::fs::write(&path, text)
                .map_err(|e| CampaignError::new(Stage::Output, format!("{}: {e}", path.display())))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CampaignConfig {
        CampaignConfig {
            file_size: 1_500,
            repeats: 2,
            sweep_snr_db: vec![-10.0, 25.0],
            ..CampaignConfig::default_for(Scheme::Gmsk)
        }
    }

    #[test]
    fn repeats_are_pooled() {
        let out = sweep(&small()).unwrap();
        assert!(out.failures.is_empty());
        let points = out.points;
        assert_eq!(points.len(), 2);
        let hi = &points[1].report;
        assert_eq!(points[1].snr_set_db, 25.0);
        assert_eq!(hi.n_tx, 6);
        assert_eq!(hi.n_ok, 6);
        assert!(points[0].report.n_ok < 6);
        assert_eq!(hi.meta.seed, 2);
    }

    #[test]
    fn sweep_is_deterministic() {
        let a = sweep(&small()).unwrap().points;
        let b = sweep(&small()).unwrap().points;
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.report.n_ok, y.report.n_ok);
            assert_eq!(x.report.n_fail, y.report.n_fail);
            assert_eq!(x.report.snr_db, y.report.snr_db);
        }
    }

    #[test]
    fn tables_have_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let points = sweep(&small()).unwrap().points;
        let files = write_tables(&points, dir.path()).unwrap();
        assert_eq!(files.len(), TABLE_METRICS.len());
        let per = std::fs::read_to_string(dir.path().join("gmsk_per.dat")).unwrap();
        let rows: Vec<&str> = per.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].starts_with("25 "));
    }

    #[test]
    fn needs_two_points() {
        let cfg = CampaignConfig { sweep_snr_db: vec![10.0], ..small() };
        assert_eq!(sweep(&cfg).unwrap_err().stage, Stage::Config);
    }

    #[test]
    fn failed_points_do_not_stop_the_sweep() {
        let cfg = CampaignConfig { sweep_snr_db: vec![f64::NAN, 25.0], ..small() };
        match sweep(&cfg) {
            Ok(out) => {
                assert_eq!(out.points.len(), 1);
                assert_eq!(out.failures.len(), 1);
                assert!(out.failures[0].snr_set_db.is_nan());
            }
            Err(e) => panic!("{e}"),
        }
    }
}
