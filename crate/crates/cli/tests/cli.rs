use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peakon-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("PEAKON_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn empty_or_missing_times_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["eval-u", "--times", ""][..], &["eval-u"][..], &["eval-u", "--times", "2,1"][..]] {
        let o = lab(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn invalid_configuration_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["eval-u", "--times", "0", "--c1", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sign convention"));
    let o = lab(&["eval-u", "--times", "0", "--nx", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_peakon-lab"))
        .args(["eval-u", "--times", "0", "--nx", "2"])
        .current_dir(dir.path())
        .env("PEAKON_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_peakon-lab"))
        .args(["eval-u", "--times", "0", "--nx", "2"])
        .current_dir(dir.path())
        .env("PEAKON_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn eval_u_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["eval-u", "--times", "-1.5,1,3", "--nx", "41", "--out", "u.csv"];
    assert!(lab(&args, dir.path()).status.success());
    let first = fs::read(dir.path().join("u.csv")).unwrap();
    assert!(lab(&args, dir.path()).status.success());
    assert_eq!(first, fs::read(dir.path().join("u.csv")).unwrap());

    let text = String::from_utf8(first).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,u,u_x"));
    assert_eq!(text.lines().count(), 1 + 3 * 41);
    // breaking time, x = 0: u = c1 + c2
    let row = text.lines().find(|l| l.starts_with("1.0000000000000000e0,0.0000000000000000e0,")).unwrap();
    let u: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((u + 1.2).abs() < 1e-15);
    // 17 significant digits
    assert_eq!(row.split(',').nth(2).unwrap(), "-1.2000000000000000e0");
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["eval-lagrangian", "--times", "0.5", "--nx", "5", "--format", "json"], dir.path());
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let keys: Vec<&str> = rows[0].as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["t", "xi", "y", "y_xi", "U", "U_xi", "h", "h_bar"] {
        assert!(keys.contains(&k), "{k}");
    }
}

#[test]
fn measures_report_the_breaking_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["measures", "--times", "1", "--nx", "3"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let atom = text.lines().find(|l| l.contains(",atom,")).unwrap();
    let fields: Vec<f64> = atom.split(',').filter_map(|f| f.parse().ok()).collect();
    // t, x, mu, nu
    assert!((fields[2] - 3.2).abs() < 1e-12 && (fields[3] - 6.4).abs() < 1e-12, "{atom}");
}

#[test]
fn figures_work_without_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["figures"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("figures");
    let read = |name: &str| fs::read_to_string(out.join(name)).unwrap();
    let times = |text: &str| {
        let mut ts: Vec<String> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().to_owned()).collect();
        ts.dedup();
        ts
    };
    let u = read("u.csv");
    assert!(u.starts_with("t,x,u\n"));
    assert_eq!(times(&u), ["-1.5000000000000000e0", "1.0000000000000000e0", "3.0000000000000000e0"]);
    let big_u = read("U.csv");
    assert!(big_u.starts_with("t,xi,U\n"));
    assert_eq!(times(&big_u), ["-8.0000000000000004e-1", "1.0000000000000000e0", "2.0000000000000000e0"]);
    let chars = read("characteristics.csv");
    assert!(chars.starts_with("xi,t,y\n"));
    assert_eq!(times(&chars).len(), 5);
    let m = read("measures.csv");
    assert!(m.starts_with("t,kind,x,mu,nu\n"));
    assert_eq!(times(&m), ["-3.0000000000000000e0", "4.0000000000000000e0"]);
}

#[test]
fn verify_passes_on_the_reference_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["verify", "--out", "report.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("module,check,residual,tolerance,status\n"));
    for module in ["params", "eulerian", "measures", "lagrangian", "transforms", "oracle"] {
        assert!(report.lines().any(|l| l.starts_with(&format!("{module},"))), "{module}");
    }
    assert!(!report.contains("FAIL"));
    let summary = |key: &str| -> f64 {
        let line = report.lines().find(|l| l.starts_with("summary,") && l.contains(key)).unwrap();
        line.split(',').nth(2).unwrap().parse().unwrap()
    };
    assert!((summary("E2") - 9.28).abs() < 1e-6);
    assert!((summary("atom") - 6.4).abs() < 1e-12);
    assert!((summary("removed") - 3.2).abs() < 1e-6);
}

#[test]
fn oracle_failure_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let ok = lab(&["oracle-compare", "--dt", "0.01", "--nodes", "400", "--trace", "trace.csv"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).starts_with("leg,alpha,t_start,t_end,steps,max_error_y,max_error_U\n"));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,xi,y,U,h,h_bar\n"));

    let bad = lab(&["oracle-compare", "--dt", "0.01", "--nodes", "400", "--tol", "1e-20"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    let err = stderr(&bad);
    assert!(err.contains("invariant failed: oracle vs closed form") && err.contains("residual"), "{err}");
}
