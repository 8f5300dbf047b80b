use super::*;
use crate::geo::GeoPoint;
use crate::synth::generate;
use crate::synth::presets::{random_persona, two_buildings, weekday_campus_worker};
use crate::trajectory::Fix;

fn user(p: &crate::synth::Persona) -> UserInput {
    UserInput::ok(generate(p).unwrap().trajectory)
}

fn strip_time(rows: &[EvaluationRow]) -> Vec<EvaluationRow> {
    rows.iter()
        .cloned()
        .map(|mut r| {
            r.wall_time_s = 0.0;
            r
        })
        .collect()
}

#[test]
fn defaults_follow_the_published_parameters() {
    let c = RunConfig::default();
    assert_eq!(c.methods, Method::ALL);
    assert_eq!(c.baseline.delta_s, 1800);
    assert_eq!(c.baseline.theta_m, 50.0);
    assert_eq!(c.baseline.epsilon_m, 50.0);
    assert_eq!((c.global.f_vd_min, c.global.d_vd_min), (0.63, 120.0));
    assert_eq!((c.local.f_vd_min, c.local.d_vd_min), (0.13, 30.0));
    assert!(c.validate().is_ok());
}

#[test]
fn config_file_parses() {
    let text = "# thresholds\nmethods = pctc, dbscan\n\nf_vd_local = 0.2\nf_vd_local_sweep = 0.1,0.5, 0.9\nthreads=2\nout_dir = out\n";
    let c = RunConfig::parse(text).unwrap();
    assert_eq!(c.methods, vec![Method::Pctc, Method::Dbscan]);
    assert_eq!(c.local.f_vd_min, 0.2);
    assert_eq!(c.f_vd_local_sweep, vec![0.1, 0.5, 0.9]);
    assert_eq!(c.threads, 2);
    assert_eq!(c.out_dir, Some(PathBuf::from("out")));
    for key in RunConfig::KEYS {
        assert!(!matches!(RunConfig::default().set(key, "x"), Err(Error::InvalidInput(m)) if m.contains("unknown")));
    }
}

#[test]
fn bad_config_is_rejected() {
    assert!(matches!(RunConfig::parse("colour = red"), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(RunConfig::parse("\nthreads = many"), Err(Error::Parse { line: 2, .. })));
    assert!(RunConfig::parse("no equals sign").is_err());
    assert!(RunConfig::parse("methods = kmeans").is_err());
    assert!(RunConfig::parse("d_vd_local = -1").is_err());
    assert!(RunConfig::parse("optics_xi = 1.5").is_err());
    assert!(RunConfig::parse("f_vd_local_sweep = 0.1, -0.2").is_err());
}

#[test]
fn one_user_gets_a_row_per_method() {
    let rows = run_compare(&RunConfig::default(), &[user(&weekday_campus_worker(2))]).unwrap();
    assert_eq!(rows.iter().map(|r| r.method).collect::<Vec<_>>(), Method::ALL);
    for r in &rows {
        assert!(r.error.is_none(), "{r:?}");
        assert!(r.wall_time_s >= 0.0);
        for pl in [r.pl, r.global_pl].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&pl));
        }
    }
    // lab and library each hold the user over 120 minutes a day, so the
    // campus may come out as several global POIs
    let pctc = &rows[4];
    assert!((2..=5).contains(&pctc.global_poi_count.unwrap()));
    assert!(pctc.poi_count >= 4);
    assert!(pctc.global_pl.is_some());
}

#[test]
fn pctc_separates_the_dense_campus() {
    let rows = run_compare(&RunConfig::default(), &[user(&two_buildings(0))]).unwrap();
    let pctc = rows.iter().find(|r| r.method == Method::Pctc).unwrap();
    assert_eq!(pctc.global_poi_count, Some(2));
    // xi extraction splits each building's stay points into small clusters,
    // so OPTICS is left out
    for r in rows.iter().filter(|r| !matches!(r.method, Method::Pctc | Method::Optics)) {
        assert!(pctc.poi_count >= r.poi_count, "{} found {}", r.method, r.poi_count);
    }
    let dbscan = rows.iter().find(|r| r.method == Method::Dbscan).unwrap();
    assert_eq!(dbscan.poi_count, 1);
}

#[test]
fn empty_batch_gives_no_rows() {
    let rows = run_compare(&RunConfig::default(), &[]).unwrap();
    assert!(rows.is_empty());
    assert!(summarize(&rows).is_empty());
    let mut buf = Vec::new();
    write_rows(&rows, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().trim(), ROW_COLUMNS.join(","));
}

#[test]
fn sweep_counts_never_increase() {
    let mut cfg = RunConfig::default();
    cfg.methods = vec![Method::Pctc];
    cfg.f_vd_local_sweep = (1..=9).map(|k| k as f64 / 10.0).collect();
    let batch: Vec<UserInput> = (0..3).map(|s| user(&random_persona(s))).collect();
    let rows = run_compare(&cfg, &batch).unwrap();
    assert_eq!(rows.len(), 27);
    for per_user in rows.chunks(9) {
        assert!(per_user.iter().all(|r| r.user_id == per_user[0].user_id));
        for w in per_user.windows(2) {
            assert!(w[1].f_vd_local > w[0].f_vd_local);
            assert!(w[1].poi_count <= w[0].poi_count, "{w:?}");
        }
    }
}

#[test]
fn failures_stay_in_their_rows() {
    let origin = GeoPoint::new(10.0, 10.0).unwrap();
    let zero_accuracy: Vec<Fix> = (0..5).map(|k| Fix::new(1_364_169_600 + k * 60, origin, 0.0).unwrap()).collect();
    let batch = vec![
        UserInput {
            user_id: "unreadable".into(),
            trajectory: Err("line 3: bad".into()),
        },
        UserInput::ok(Trajectory::from_fixes("empty", zero_accuracy, 0)),
        user(&two_buildings(1)),
    ];
    let rows = run_compare(&RunConfig::default(), &batch).unwrap();
    assert_eq!(rows.len(), 15);
    assert!(rows[..10].iter().all(|r| r.error.is_some() && r.poi_count == 0));
    assert_eq!(rows[0].error.as_deref(), Some("line 3: bad"));
    assert!(rows[10..].iter().all(|r| r.error.is_none()));
    let s = summarize(&rows);
    assert_eq!(s.len(), 5);
    assert!(s.iter().all(|m| m.users == 1 && m.failures == 2));
}

#[test]
fn reruns_are_identical() {
    let batch: Vec<UserInput> = (3..6).map(|s| user(&random_persona(s))).collect();
    let mut cfg = RunConfig::default();
    cfg.threads = 3;
    let a = run_compare(&cfg, &batch).unwrap();
    cfg.threads = 1;
    let b = run_compare(&cfg, &batch).unwrap();
    assert_eq!(strip_time(&a), strip_time(&b));
}

#[test]
fn summary_matches_the_csv() {
    let batch: Vec<UserInput> = (0..4).map(|s| user(&random_persona(10 + s))).collect();
    let mut cfg = RunConfig::default();
    cfg.f_vd_local_sweep = vec![0.13, 0.5];
    let rows = run_compare(&cfg, &batch).unwrap();
    let mut buf = Vec::new();
    write_rows(&rows, &mut buf).unwrap();
    let back = read_rows(buf.as_slice()).unwrap();
    assert_eq!(back.len(), rows.len());

    let summary = summarize(&rows);
    assert_eq!(summary.len(), 6);
    // recompute from the CSV text alone
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    for s in &summary {
        let col = |name: &str| ROW_COLUMNS.iter().position(|c| *c == name).unwrap();
        let mine: Vec<&csv::StringRecord> = records
            .iter()
            .filter(|r| r[col("method")] == *s.method.name())
            .filter(|r| r[col("f_vd_local")].parse::<f64>().ok() == s.f_vd_local)
            .collect();
        let values = |name: &str| -> Vec<f64> { mine.iter().filter_map(|r| r[col(name)].parse().ok()).collect() };
        assert_eq!(median(&values("poi_count")), s.median_poi_count);
        assert_eq!(median(&values("pl")), s.median_pl);
        assert_eq!(median(&values("global_pl")), s.median_global_pl);
        assert_eq!(median(&values("wall_time_s")), s.median_wall_time_s);
    }
}

#[test]
fn medians() {
    assert_eq!(median(&[]), None);
    assert_eq!(median(&[3.0]), Some(3.0));
    assert_eq!(median(&[4.0, 1.0, 3.0]), Some(3.0));
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
}

#[test]
fn batch_loads_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let good = "timestamp,latitude,longitude,accuracy\n1364169600,10,10,5\n1364170200,10,10.001,5\n";
    std::fs::write(dir.path().join("b.csv"), good).unwrap();
    std::fs::write(dir.path().join("a.csv"), "time,lat\n1,2\n").unwrap();
    std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
    let batch = load_batch(dir.path(), &ColumnSchema::default(), 0).unwrap();
    assert_eq!(batch.iter().map(|u| u.user_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    assert!(batch[0].trajectory.is_err());
    assert_eq!(batch[1].trajectory.as_ref().unwrap().len(), 2);
    let one = load_batch(&dir.path().join("b.csv"), &ColumnSchema::default(), 0).unwrap();
    assert_eq!(one.len(), 1);
}
