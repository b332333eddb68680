mod common;

use std::fs;

use spillnet::rolling::{run_pipeline, PipelineOptions, SnapshotStatus, SnapshotStore};
use spillnet::{Error, RollingConfig};

fn small_config() -> RollingConfig {
    RollingConfig {
        window_length: 30,
        lags: 1,
        folds: 5,
        layout_iterations: 60,
        seed: 9,
        ..Default::default()
    }
}

#[test]
fn resume_recomputes_only_missing_dates() {
    let panel = common::synthetic_panel(4, 45, 21);
    let dir = tempfile::tempdir().unwrap();
    let store = SnapshotStore::new(dir.path());
    let cfg = small_config();

    let first = run_pipeline(&panel, None, &cfg, &store, PipelineOptions::default(), |_, _| {}).unwrap();
    assert_eq!(first.computed.len(), 16);
    assert!(first.failures.is_empty());
    let dates = store.dates().unwrap();
    assert_eq!(dates.len(), 16);
    assert_eq!(dates[0], panel.dates()[29]);

    let last_five = &dates[11..];
    let kept_positions: Vec<_> = last_five
        .iter()
        .map(|d| store.load(*d).unwrap().positions)
        .collect();
    for d in last_five {
        fs::remove_dir_all(store.snapshot_dir(*d)).unwrap();
    }

    let mut statuses = Vec::new();
    let second = run_pipeline(&panel, None, &cfg, &store, PipelineOptions::default(), |s, st| {
        statuses.push((s.date, st))
    })
    .unwrap();
    assert_eq!(second.reused.len(), 11);
    assert_eq!(second.computed, last_five);
    assert_eq!(statuses.len(), 16);
    assert!(statuses[..11].iter().all(|(_, s)| *s == SnapshotStatus::Reused));

    // Recomputed layouts seed from the reused snapshot and match the originals.
    for (d, pos) in last_five.iter().zip(&kept_positions) {
        assert_eq!(&store.load(*d).unwrap().positions, pos);
    }
}

#[test]
fn serial_and_parallel_runs_agree() {
    let panel = common::synthetic_panel(3, 40, 5);
    let cfg = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (sa, sb) = (SnapshotStore::new(a.path()), SnapshotStore::new(b.path()));
    run_pipeline(&panel, None, &cfg, &sa, PipelineOptions::default(), |_, _| {}).unwrap();
    let serial = PipelineOptions {
        parallel: false,
        batch_size: 3,
    };
    run_pipeline(&panel, None, &cfg, &sb, serial, |_, _| {}).unwrap();
    for d in sa.dates().unwrap() {
        let (x, y) = (sa.load(d).unwrap(), sb.load(d).unwrap());
        assert_eq!(x.table, y.table);
        assert_eq!(x.positions, y.positions);
        x.check_invariants().unwrap();
    }
}

#[test]
fn changed_config_is_not_reused() {
    let panel = common::synthetic_panel(3, 35, 8);
    let dir = tempfile::tempdir().unwrap();
    let store = SnapshotStore::new(dir.path());
    let cfg = small_config();
    run_pipeline(&panel, None, &cfg, &store, PipelineOptions::default(), |_, _| {}).unwrap();
    let other = RollingConfig { horizon: 5, ..cfg };
    let report = run_pipeline(
        &panel,
        None,
        &other,
        &store,
        PipelineOptions::default(),
        |_, _| {},
    )
    .unwrap();
    assert!(report.reused.is_empty());
    assert_eq!(report.computed.len(), 6);
    assert_eq!(store.load(report.computed[0]).unwrap().table.horizon, 5);
}

#[test]
fn tampered_snapshot_fails_checksum() {
    let panel = common::synthetic_panel(3, 31, 2);
    let dir = tempfile::tempdir().unwrap();
    let store = SnapshotStore::new(dir.path());
    run_pipeline(
        &panel,
        None,
        &small_config(),
        &store,
        PipelineOptions::default(),
        |_, _| {},
    )
    .unwrap();
    let date = store.dates().unwrap()[0];
    let snap_dir = store.snapshot_dir(date);
    let table = fs::read_dir(&snap_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let mut text = fs::read_to_string(&table).unwrap();
    text.push('\n');
    fs::write(&table, text).unwrap();
    assert!(matches!(store.load(date), Err(Error::Checksum(_))));
}

#[test]
fn too_short_panel_is_rejected() {
    let panel = common::synthetic_panel(3, 20, 1);
    let dir = tempfile::tempdir().unwrap();
    let store = SnapshotStore::new(dir.path());
    let err = run_pipeline(
        &panel,
        None,
        &small_config(),
        &store,
        PipelineOptions::default(),
        |_, _| {},
    );
    assert!(err.is_err());
    assert!(store.dates().unwrap().is_empty());
}
