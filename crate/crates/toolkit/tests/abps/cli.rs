use std::path::PathBuf;
use std::process::{Command, Output};

use abps_core::models::Variant;
use abps_toolkit::sweep::{ordering_violations, read_csv};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn listing(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn abps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abps")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn metric(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name}: ")))
        .unwrap_or_else(|| panic!("no {name} in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn solve_prints_three_metrics() {
    let o = abps(&["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((0.0..=1.0).contains(&metric(&out, "availability")));
    assert!(metric(&out, "power_W") > 0.0);
    assert!(metric(&out, "throughput_Mbps") > 0.0);
}

#[test]
fn listing_file_matches_builtin_appendix_oracle() {
    let path = listing("abps-oracle.sm");
    let file = abps(&[
        "solve",
        "--model",
        path.to_str().unwrap(),
        "--params",
        "T_W_minus=20",
        "--params",
        "T_W_plus=80",
    ]);
    let builtin = abps(&["solve", "--variant", "oracle", "--mode", "appendix"]);
    assert_eq!(file.status.code(), Some(0), "{}", stderr(&file));
    let (a, b) = (stdout(&file), stdout(&builtin));
    for m in ["availability", "power_W", "throughput_Mbps"] {
        assert_eq!(metric(&a, m), metric(&b, m), "{m}");
    }
}

#[test]
fn binding_file_works_for_listings() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("b.conf");
    std::fs::write(&conf, "# durations\nT_W_minus = 10\nT_W_plus = 40\n").unwrap();
    let path = listing("abps-plain.sm");
    let o = abps(&[
        "solve",
        "--model",
        path.to_str().unwrap(),
        "--config",
        conf.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("48 states"));
}

#[test]
fn missing_binding_exits_2_naming_it() {
    let path = listing("abps-plain.sm");
    let o = abps(&["solve", "--model", path.to_str().unwrap(), "--params", "T_W_plus=80"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("T_W_minus"), "{}", stderr(&o));
}

#[test]
fn malformed_model_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("bad.sm");
    std::fs::write(
        &m,
        "ctmc\nmodule m\n  x : [0..1] init 0;\n  [] x=0 -> 1 (x'=1);\nendmodule\n",
    )
    .unwrap();
    let o = abps(&["solve", "--model", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.sm: syntax error at 4:"), "{}", stderr(&o));
}

#[test]
fn sweep_rows_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = abps(&["sweep", "--variant", "both", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let rows = read_csv(&bytes[..], "a.csv").unwrap();
    assert_eq!(rows.len(), 24);
    assert_eq!(rows.iter().filter(|r| r.variant == Variant::Oracle).count(), 12);
    // text mode: availability and throughput orderings hold everywhere
    let v = ordering_violations(&rows, 0.0);
    assert!(v.iter().all(|s| s.contains("power")), "{v:?}");
}

#[test]
fn appendix_sweep_passes_all_ordering_checks() {
    let o = abps(&["sweep", "--mode", "appendix", "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn sweep_check_failure_exits_1() {
    let o = abps(&["sweep", "--grid", "tmin:20", "tplus:80", "--check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("power oracle"), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn sweep_keeps_failed_points_as_rows() {
    let o = abps(&["sweep", "--grid", "tmin:20,100 tplus:80", "--variant", "plain"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let bad = out.lines().find(|l| l.starts_with("plain,100,80,")).unwrap();
    assert!(
        bad.contains(",,,invalid parameters: T_W_plus (80) must not be shorter than T_W_minus (100)"),
        "{bad}"
    );
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--reps", "3", "--duration", "500", "--seed", "9"];
    let (a, b) = (abps(&args), abps(&args));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    // 3 replications plus mean and SE for each variant
    assert_eq!(stdout(&a).lines().count(), 1 + 2 * 5);
    let c = abps(&["simulate", "--reps", "3", "--duration", "500", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("trace.csv");
    let o = abps(&[
        "simulate",
        "--variant",
        "oracle",
        "--reps",
        "1",
        "--duration",
        "200",
        "--trace",
        t.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&t).unwrap();
    assert!(text.starts_with("time,entity,event,detail\n"));
    assert!(text.lines().count() > 10);
    let o = abps(&[
        "simulate",
        "--reps",
        "1",
        "--duration",
        "10",
        "--trace",
        t.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_compare_does_not_crash() {
    let o = abps(&["compare", "--reps", "1", "--duration", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 7);
}

#[test]
fn compare_exit_code_tracks_failures() {
    let o = abps(&[
        "compare",
        "--variant",
        "plain",
        "--reps",
        "4",
        "--duration",
        "20000",
        "--rate",
        "0",
        "--sojourns",
    ]);
    let out = stdout(&o);
    assert!(out.contains("plain,sojourn_O_W_s,80,"), "{out}");
    assert!(out.contains("plain,sojourn_O_UW_s,20,"), "{out}");
    let failed = out.lines().any(|l| l.ends_with("FAIL"));
    assert_eq!(o.status.code(), Some(if failed { 1 } else { 0 }), "{}", stderr(&o));
}

#[test]
fn corridor_is_one_long_event_with_umts_off() {
    let o = abps(&[
        "oracle",
        "--trajectory",
        fixture("corridor-walk.csv").to_str().unwrap(),
        "--catalog",
        fixture("corridor-aps.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let events: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(
        events,
        [
            "EV_NO_WIFI",
            "EV_LONG_WIFI",
            "EV_NO_WIFI",
            "EV_SHORT_WIFI",
            "EV_NO_WIFI"
        ]
    );
    let long = out.lines().find(|l| l.contains("EV_LONG_WIFI")).unwrap();
    assert!(long.contains(",true,false,"), "{long}");
    assert!(long.contains("AlmaWifi-01") && long.contains("AlmaWifi-06"));
}

#[test]
fn endpoints_keep_umts_on_in_the_middle() {
    let o = abps(&[
        "oracle",
        "--trajectory",
        fixture("endpoints-walk.csv").to_str().unwrap(),
        "--catalog",
        fixture("endpoints-aps.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_ne!(rows[0][2], "EV_NO_WIFI");
    assert_eq!(rows[1][2], "EV_NO_WIFI");
    assert_eq!((rows[1][4], rows[1][5]), ("false", "true"));
    assert_ne!(rows[2][2], "EV_NO_WIFI");
}

#[test]
fn threshold_changes_classification() {
    let args = |th: &'static str| {
        abps(&[
            "oracle",
            "--trajectory",
            fixture("corridor-walk.csv").to_str().unwrap(),
            "--catalog",
            fixture("corridor-aps.csv").to_str().unwrap(),
            "--threshold",
            th,
        ])
    };
    assert!(!stdout(&args("300")).contains("EV_LONG_WIFI"));
    assert_eq!(args("0").status.code(), Some(2));
}

#[test]
fn bad_oracle_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "t,lat,lon\n").unwrap();
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "0,44.5,11.35\n10,44.5,eleven\n").unwrap();
    let cat = fixture("corridor-aps.csv");
    for t in [&empty, &broken] {
        let o = abps(&[
            "oracle",
            "--trajectory",
            t.to_str().unwrap(),
            "--catalog",
            cat.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2));
    }
    let o = abps(&[
        "oracle",
        "--trajectory",
        broken.to_str().unwrap(),
        "--catalog",
        cat.to_str().unwrap(),
    ]);
    assert!(
        stderr(&o).contains("broken.csv:2: invalid lon 'eleven'"),
        "{}",
        stderr(&o)
    );
    let o = abps(&["oracle", "--trajectory", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_catalog_rows_are_skipped_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("cat.csv");
    let mut text = std::fs::read_to_string(fixture("endpoints-aps.csv")).unwrap();
    text.push_str("Broken,44.5,not-a-number,10,,true\n");
    std::fs::write(&cat, text).unwrap();
    let o = abps(&[
        "oracle",
        "--trajectory",
        fixture("endpoints-walk.csv").to_str().unwrap(),
        "--catalog",
        cat.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stderr(&o).contains("skipped 1 malformed catalog records (lines 5)"),
        "{}",
        stderr(&o)
    );
    assert_eq!(stdout(&o).lines().count(), 4);
}
