use nbwsd::campaign::{run_link, sweep, write_tables, TABLE_METRICS};
use nbwsd::linkstats::{export_csv_rows, read_csv};
use nbwsd::{CampaignConfig, ChannelProfile, LinkReport, Scheme};
use proptest::prelude::*;

fn small(scheme: Scheme, snr_db: f64, seed: u64) -> CampaignConfig {
    let mut cfg = CampaignConfig { file_size: 3_000, seed, ..CampaignConfig::default_for(scheme) };
    cfg.channel = ChannelProfile::awgn(snr_db, seed);
    cfg
}

/// CSV fields of a report with the timestamp column dropped.
fn data_fields(r: &LinkReport) -> Vec<String> {
    r.csv_fields().into_iter().skip(1).collect()
}

#[test]
fn same_seed_same_report() {
    for scheme in Scheme::ALL {
        let cfg = small(scheme, 12.0, 9);
        let a = run_link(&cfg).unwrap();
        let b = run_link(&cfg).unwrap();
        assert_eq!(data_fields(&a.report), data_fields(&b.report), "{scheme}");
        assert_eq!(a.received, b.received);
    }
}

#[test]
fn different_seed_different_noise() {
    let a = run_link(&small(Scheme::Dbpsk, 8.0, 1)).unwrap();
    let b = run_link(&small(Scheme::Dbpsk, 8.0, 2)).unwrap();
    assert_ne!(a.report.snr_db, b.report.snr_db);
}

#[test]
fn input_file_round_trips_through_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.bin");
    let output = dir.path().join("out.bin");
    let csv = dir.path().join("run.csv");
    // Not a multiple of the packet length, so the last packet is padded.
    let data: Vec<u8> = (0..1_234u32).map(|k| (k * 31 % 251) as u8).collect();
    std::fs::write(&input, &data).unwrap();
    let cfg = CampaignConfig {
        input_path: Some(input),
        output_path: Some(output.clone()),
        csv_path: Some(csv.clone()),
        ..CampaignConfig::default_for(Scheme::Dqpsk)
    };
    let out = run_link(&cfg).unwrap();
    assert_eq!(out.report.n_tx, 3);
    assert_eq!(out.report.per, 0.0);
    assert_eq!(out.report.plr, 0.0);
    assert_eq!(std::fs::read(&output).unwrap(), data);
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(data_fields(&rows[0]), data_fields(&out.report));
}

#[test]
fn sweep_rows_regenerate_from_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CampaignConfig {
        file_size: 2_000,
        repeats: 2,
        seed: 7,
        sweep_snr_db: vec![4.0, 10.0, 16.0],
        ..CampaignConfig::default_for(Scheme::Dbpsk)
    };
    let first = sweep(&cfg).unwrap();
    assert!(first.failures.is_empty());
    let reports: Vec<LinkReport> = first.points.iter().map(|p| p.report.clone()).collect();
    let path = dir.path().join("sweep.csv");
    export_csv_rows(&reports, &path).unwrap();

    let again = sweep(&cfg).unwrap();
    let stored = read_csv(&path).unwrap();
    assert_eq!(stored.len(), 3);
    for (row, p) in stored.iter().zip(&again.points) {
        assert_eq!(data_fields(row), data_fields(&p.report));
    }

    let files = write_tables(&again.points, dir.path()).unwrap();
    assert_eq!(files.len(), TABLE_METRICS.len());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn packets_are_accounted_for(
        scheme in prop::sample::select(Scheme::ALL.to_vec()),
        snr in -5.0f64..20.0,
        seed in any::<u64>(),
        discarded in 0u64..3,
    ) {
        let cfg = CampaignConfig { n_discarded: discarded, ..small(scheme, snr, seed) };
        let r = run_link(&cfg).unwrap().report;
        let effective = r.n_tx - r.n_discarded;
        prop_assert!(r.n_ok + r.n_fail <= effective);
        let lost = effective - r.n_ok - r.n_fail;
        prop_assert_eq!(r.n_ok + r.n_fail + lost, effective);
        prop_assert!((r.plr - (r.n_fail + lost) as f64 / effective as f64).abs() < 1e-12);
        prop_assert!(r.per <= r.plr + 1e-12);
    }
}
