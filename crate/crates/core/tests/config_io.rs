use mwmodem::config::{ConfigError, ExperimentConfig};
use mwmodem::detector::{self, AcquisitionConfig, FringeModel};
use mwmodem::experiment;
use mwmodem::io::{self, EventRow, TraceRow, WienRow};
use mwmodem::keydist::SessionRecord;

#[test]
fn default_config_round_trips() {
    let cfg = ExperimentConfig::default();
    let text = cfg.to_toml();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
}

#[test]
fn partial_config_takes_defaults() {
    let cfg = ExperimentConfig::from_toml("seed = 9\n[transmit]\nmessage = \"hi\"\n").unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.transmit.message, "hi");
    assert_eq!(cfg.wien, ExperimentConfig::default().wien);
}

#[test]
fn bad_configs_are_rejected() {
    assert!(matches!(ExperimentConfig::from_toml("sede = 1"), Err(ConfigError::Parse(_))));
    let bad = ExperimentConfig::from_toml("[beam]\nmax_contrast = 1.5\n");
    assert!(matches!(bad, Err(ConfigError::Invalid { .. })));
    assert!(ExperimentConfig::from_toml("[channel.tap]\nkind = \"passive\"\nrho = -0.5\n").is_err());
    assert!(matches!(ExperimentConfig::load("/nonexistent/mwmodem.toml".as_ref()), Err(ConfigError::Io { .. })));
}

#[test]
fn event_file_feeds_the_fitter() {
    let dir = tempfile::tempdir().unwrap();
    let acq = AcquisitionConfig { pattern_rate: 50_000.0, ..AcquisitionConfig::default() };
    let frame = detector::sample_frame(&FringeModel::centered(0.45, 5.0).unwrap(), &acq, 0, 6).unwrap();
    let path = dir.path().join("events.csv");
    io::write_csv_file(&path, "events", io::event_rows(std::slice::from_ref(&frame))).unwrap();
    let rows: Vec<EventRow> = io::read_csv_file(&path, "events").unwrap();
    assert_eq!(io::frames_from_rows(&rows), vec![frame]);

    let mut cfg = ExperimentConfig::default();
    cfg.fit.events = Some(path);
    let out = experiment::fit(&cfg).unwrap();
    assert!((out.summary.fit.contrast - 0.45).abs() < 0.03);
    let written = out.write(dir.path()).unwrap();
    assert!(written.iter().all(|p| p.exists()));
}

#[test]
fn experiment_outputs_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.transmit.message = "ok".into();
    cfg.protocol.rounds = 300;
    experiment::transmit(&cfg).unwrap().write(dir.path()).unwrap();
    experiment::wien_curve(&cfg).unwrap().write(dir.path()).unwrap();
    experiment::keydist(&cfg).unwrap().write(dir.path()).unwrap();

    let trace: Vec<TraceRow> = io::read_csv_file(&dir.path().join("trace.csv"), "trace").unwrap();
    assert_eq!(trace.len(), 5 * (12 + 16));
    let curve: Vec<WienRow> = io::read_csv_file(&dir.path().join("wien_curve.csv"), "wien-curve").unwrap();
    assert_eq!(curve.len(), cfg.wien.sweep_points);
    let records: Vec<SessionRecord> =
        io::read_jsonl(std::fs::File::open(dir.path().join("transcript.jsonl")).unwrap()).unwrap();
    assert_eq!(records.len(), 300);
    let summary: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("transmit.json")).unwrap()).unwrap();
    assert_eq!(summary["message"], "ok");
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 2);
}
