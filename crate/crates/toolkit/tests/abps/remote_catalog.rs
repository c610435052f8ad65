use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use abps_core::coverage::{query_aps, ApCatalog, CoverageError, GeoPoint};
use abps_toolkit::catalog::{CachedCatalog, RemoteCatalog, TOKEN_ENV};

/// Serves `reply(request_line)` to every connection and records the request
/// heads. `None` means accept and never answer.
fn serve(reply: impl Fn(&str) -> Option<(u16, String)> + Send + 'static) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/aps", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                head.push_str(&line);
            }
            let first = head.lines().next().unwrap_or("").to_string();
            log.lock().unwrap().push(head);
            match reply(&first) {
                Some((status, body)) => {
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                        body.len()
                    );
                }
                None => std::thread::sleep(Duration::from_secs(3)),
            }
        }
    });
    (url, seen)
}

fn origin() -> GeoPoint {
    GeoPoint::new(44.4969, 11.3530)
}

const BODY: &str = r#"{"results":[
  {"essid":"near","lat":44.4969,"lon":11.3536,"radius_m":40,"group":"campus","open":false},
  {"essid":"far","lat":44.51,"lon":11.36},
  {"essid":"broken","lat":"x","lon":11.35}
]}"#;

#[test]
fn query_sends_position_and_token() {
    let (url, seen) = serve(|_| Some((200, BODY.to_string())));
    let cat = RemoteCatalog::new(url, Duration::from_secs(2)).with_token(Some("s3cret".into()));
    let aps = query_aps(&cat, &origin(), 200.0).unwrap();
    // "far" lies outside the radius, "broken" is malformed
    assert_eq!(aps.len(), 1);
    assert_eq!(aps[0].essid, "near");
    assert_eq!(aps[0].group.as_deref(), Some("campus"));
    assert_eq!(cat.skipped(), 1);
    let head = seen.lock().unwrap()[0].clone();
    assert!(
        head.starts_with("GET /aps?lat=44.4969&lon=11.353&radius=200 "),
        "{head}"
    );
    assert!(
        head.to_ascii_lowercase().contains("authorization: bearer s3cret"),
        "{head}"
    );
}

#[test]
fn http_errors_and_timeouts_are_unavailable() {
    let (url, _) = serve(|_| Some((503, "busy".into())));
    let cat = RemoteCatalog::new(url, Duration::from_secs(2));
    assert!(matches!(
        cat.query(&origin(), 100.0),
        Err(CoverageError::CatalogUnavailable(_))
    ));

    let (url, _) = serve(|_| None);
    let cat = RemoteCatalog::new(url, Duration::from_millis(200));
    let t0 = std::time::Instant::now();
    assert!(matches!(
        cat.query(&origin(), 100.0),
        Err(CoverageError::CatalogUnavailable(_))
    ));
    assert!(t0.elapsed() < Duration::from_secs(2));

    let (url, _) = serve(|_| Some((200, "not json".into())));
    let cat = RemoteCatalog::new(url, Duration::from_secs(2));
    assert!(matches!(
        cat.query(&origin(), 100.0),
        Err(CoverageError::CatalogUnavailable(_))
    ));
}

#[test]
fn cache_is_shared_across_threads() {
    let (url, seen) = serve(|_| Some((200, BODY.to_string())));
    let cat = CachedCatalog::new(RemoteCatalog::new(url, Duration::from_secs(2)), Duration::from_secs(60));
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| {
                for _ in 0..5 {
                    assert_eq!(cat.query(&origin(), 200.0).unwrap().len(), 1);
                }
            });
        }
    });
    // concurrent first lookups may race, later ones hit the cache
    let n = seen.lock().unwrap().len();
    assert!((1..=8).contains(&n), "{n}");
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn cli_reads_token_from_environment() {
    let corridor = std::fs::read_to_string(fixture("corridor-aps.csv")).unwrap();
    let records: Vec<String> = corridor
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("essid"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let radius = if f[3].is_empty() {
                "null".to_string()
            } else {
                f[3].to_string()
            };
            format!(
                r#"{{"essid":"{}","lat":{},"lon":{},"radius_m":{},"group":"{}","open":{}}}"#,
                f[0], f[1], f[2], radius, f[4], f[5]
            )
        })
        .collect();
    let body = format!("[{}]", records.join(","));
    let (url, seen) = serve(move |_| Some((200, body.clone())));
    let o = Command::new(env!("CARGO_BIN_EXE_abps"))
        .env(TOKEN_ENV, "tok")
        .args([
            "oracle",
            "--trajectory",
            fixture("corridor-walk.csv").to_str().unwrap(),
            "--catalog-url",
            &url,
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let local = Command::new(env!("CARGO_BIN_EXE_abps"))
        .args([
            "oracle",
            "--trajectory",
            fixture("corridor-walk.csv").to_str().unwrap(),
            "--catalog",
            fixture("corridor-aps.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(o.stdout, local.stdout);
    assert!(seen
        .lock()
        .unwrap()
        .iter()
        .all(|h| h.to_ascii_lowercase().contains("bearer tok")));
}

#[test]
fn unreachable_catalog_falls_back_to_both_nics() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let o = Command::new(env!("CARGO_BIN_EXE_abps"))
        .args([
            "oracle",
            "--trajectory",
            fixture("endpoints-walk.csv").to_str().unwrap(),
            "--catalog-url",
            &format!("http://127.0.0.1:{port}/aps"),
            "--timeout",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains("EV_SHORT_WIFI,,true,true"), "{}", rows[0]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("catalog unavailable"));
}
