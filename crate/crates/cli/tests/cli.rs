use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use foodwise_cli::simulate::{self, BehaviorMix, SimulationSpec};
use foodwise_cli::{EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

fn foodwise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foodwise"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("FOODWISE_PORT")
        .env_remove("FOODWISE_DATA_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&foodwise(&[])), EXIT_USAGE);
    assert_eq!(code(&foodwise(&["frobnicate"])), EXIT_USAGE);
    assert_eq!(code(&foodwise(&["gen-trays", "--seed", "x", "--date", "2023-03-20"])), EXIT_USAGE);
    assert_eq!(code(&foodwise(&["gen-trays", "--seed", "1", "--date", "2023-02-30"])), EXIT_USAGE);
    assert_eq!(code(&foodwise(&["--help"])), EXIT_OK);
}

#[test]
fn gen_trays_is_deterministic() {
    let a = foodwise(&["gen-trays", "--seed", "42", "--date", "2023-03-21"]);
    let b = foodwise(&["gen-trays", "--seed", "42", "--date", "2023-03-21"]);
    let c = foodwise(&["gen-trays", "--seed", "43", "--date", "2023-03-21"]);
    assert_eq!(code(&a), EXIT_OK, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 400);
    assert!(v[0]["tray_id"].as_str().unwrap().starts_with("2023-03-21-"));
}

#[test]
fn gen_trays_with_profile_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let profile = write(
        dir.path(),
        "profile.toml",
        r#"
        trays_per_day = 0
        clean_tray_probability = 0.5
        rice = { mean_px = 100.0, stddev_px = 10.0 }
        meat = { mean_px = 100.0, stddev_px = 10.0 }
        vegetables = { mean_px = 100.0, stddev_px = 10.0 }
        "#,
    );
    let out = dir.path().join("trays.json");
    let r = foodwise(&["gen-trays", "--seed", "1", "--date", "2023-03-21", "--profile", &profile, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), EXIT_OK, "{}", stderr(&r));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v, serde_json::json!([]));

    let bad = write(dir.path(), "bad.toml", "trays_per_day = -1");
    assert_eq!(code(&foodwise(&["gen-trays", "--seed", "1", "--date", "2023-03-21", "--profile", &bad])), EXIT_RUNTIME);
}

#[test]
fn aggregate_against_a_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "foodwise.toml", "[storage]\ndata_dir = \"data\"\n");
    let r = foodwise(&["aggregate", "--config", &config, "--date", "2023-03-20"]);
    assert_eq!(code(&r), EXIT_OK, "{}", stderr(&r));
    let daily: foodwise_core::DailyAggregate = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(daily.total_trays, 0);
    assert!(daily.bowls.is_empty());
    assert!(dir.path().join("data").is_dir());
}

#[test]
fn missing_or_bad_config_is_a_runtime_failure() {
    let r = foodwise(&["aggregate", "--config", "/nonexistent/foodwise.toml", "--date", "2023-03-20"]);
    assert_eq!(code(&r), EXIT_RUNTIME);
    assert!(stderr(&r).contains("/nonexistent/foodwise.toml"), "{}", stderr(&r));

    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bad.toml", "[campaign]\nstart_date = \"2023-04-10\"\n");
    let r = foodwise(&["serve", "--config", &config]);
    assert_eq!(code(&r), EXIT_RUNTIME);
    assert!(stderr(&r).contains("bad config"), "{}", stderr(&r));
}

#[test]
fn load_config_applies_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "foodwise.toml", "[server]\nport = 9000\n");
    let env = |k: &str| match k {
        "FOODWISE_PORT" => Some("9100".to_string()),
        "FOODWISE_DATA_DIR" => Some("/srv/fw".to_string()),
        _ => None,
    };
    let c = foodwise_cli::commands::load_config(Path::new(&config), env).unwrap();
    assert_eq!(c.server.port, 9100);
    assert_eq!(c.storage.data_dir.as_deref(), Some(Path::new("/srv/fw")));
    assert!(foodwise_cli::commands::load_config(Path::new(&config), |_| Some("nope".into())).is_err());
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port)).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut out = String::new();
    s.read_to_string(&mut out).ok()?;
    Some(out)
}

#[test]
fn serve_answers_healthz_and_env_port_applies() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "foodwise.toml", "[scheduler]\nenabled = false\n");
    let port = free_port();
    let _server = Server(
        Command::new(env!("CARGO_BIN_EXE_foodwise"))
            .args(["serve", "--config", &config])
            .env("FOODWISE_PORT", port.to_string())
            .env("FOODWISE_DATA_DIR", dir.path().join("data"))
            .env("RUST_LOG", "warn")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let deadline = Instant::now() + Duration::from_secs(20);
    let reply = loop {
        if let Some(r) = http_get(port, "/healthz") {
            break r;
        }
        assert!(Instant::now() < deadline, "server never came up");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.ends_with("ok"), "{reply}");
    let tips = http_get(port, "/api/dashboard/tips").unwrap();
    assert!(tips.contains("less rice"), "{tips}");
}

#[test]
fn occupied_port_reports_port_in_use() {
    let holder = TcpListener::bind("0.0.0.0:0").unwrap();
    let port = holder.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "foodwise.toml", "[scheduler]\nenabled = false\n");
    let r = foodwise(&["serve", "--config", &config, "--port", &port]);
    assert_eq!(code(&r), EXIT_RUNTIME);
    assert!(stderr(&r).contains("already in use"), "{}", stderr(&r));
}

#[test]
fn simulate_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.toml",
        "seed = 9\nn_users = 12\ntotal_actions = 40\nmix = { dedicated = 0.25, casual = 0.75 }\n[trays]\ntrays_per_day = 20\nclean_tray_probability = 0.3\nrice = { mean_px = 700.0, stddev_px = 500.0 }\nmeat = { mean_px = 250.0, stddev_px = 200.0 }\nvegetables = { mean_px = 400.0, stddev_px = 300.0 }\n",
    );
    let out = dir.path().join("report.json");
    let r = foodwise(&["simulate", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), EXIT_OK, "{}", stderr(&r));
    let report: simulate::SimulationReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!((report.users, report.records), (12, 40));
    assert!(report.reward_eligible >= 3, "three dedicated users always qualify");
    assert!(report.days.iter().all(|d| d.trays == 20));

    let bad = write(dir.path(), "bad.toml", "mix = { dedicated = 0.5, casual = 0.6 }\n");
    let r = foodwise(&["simulate", "--spec", &bad]);
    assert_eq!(code(&r), EXIT_RUNTIME);
    assert!(stderr(&r).contains("bad simulation spec"), "{}", stderr(&r));
}

#[test]
fn spec_validation() {
    let ok = SimulationSpec::default();
    assert!(ok.validate().is_ok());
    assert_eq!(ok.head_counts(), (44, 176));
    let cases = [
        SimulationSpec { n_users: 0, ..ok.clone() },
        SimulationSpec { total_actions: 0, ..ok.clone() },
        SimulationSpec { concurrency: 0, ..ok.clone() },
        SimulationSpec { end_date: ok.start_date - chrono::Duration::days(1), ..ok.clone() },
        SimulationSpec { mix: BehaviorMix { dedicated: 1.2, casual: -0.2 }, ..ok.clone() },
        // 44 dedicated users need 440 actions
        SimulationSpec { total_actions: 439, ..ok.clone() },
        SimulationSpec { end_date: ok.start_date + chrono::Duration::days(3), ..ok.clone() },
    ];
    for spec in cases {
        assert!(spec.validate().is_err(), "{spec:?}");
    }
}

#[test]
fn plans_are_deterministic_and_sum_to_total() {
    let spec = SimulationSpec::default();
    let a = simulate::plan(&spec).unwrap();
    let b = simulate::plan(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 220);
    assert_eq!(a.iter().map(|p| p.actions.len()).sum::<usize>(), 811);
    let c = simulate::plan(&SimulationSpec { seed: 1, ..spec.clone() }).unwrap();
    assert_ne!(a, c);
    let days = spec.days();
    for p in &a {
        assert!(p.actions.windows(2).all(|w| w[0].date <= w[1].date));
        assert!(p.actions.iter().all(|x| days.contains(&x.date)));
        if p.dedicated {
            assert_eq!(p.actions.len(), 10);
            assert!(p.actions.iter().all(|x| x.scores.iter().all(|&s| s >= 90)));
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrency_does_not_change_the_report() {
    let base = SimulationSpec {
        n_users: 30,
        total_actions: 90,
        trays: foodwise_core::SyntheticProfile { trays_per_day: 10, ..Default::default() },
        ..SimulationSpec::default()
    };
    let serial = simulate::run(&SimulationSpec { concurrency: 1, ..base.clone() }).await.unwrap();
    let wide = simulate::run(&SimulationSpec { concurrency: 16, ..base }).await.unwrap();
    assert_eq!(serial.report.deterministic_part(), wide.report.deterministic_part());
    // every request in a round sees the same clock, so even timestamps agree
    assert_eq!(serial.states, wide.states);
}
