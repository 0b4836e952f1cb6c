use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_semistatic-hedge");

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("claims.json"),
            r#"{"target":{"kind":"variance_swap"},"options":[
                {"kind":"put","strike":80},{"kind":"put","strike":90},
                {"kind":"call","strike":100},{"kind":"call","strike":115}]}"#,
        )
        .unwrap();
        fs::write(
            dir.path().join("params.json"),
            r#"{"kappa":0.0354,"lambda":1.3253,"rho":-0.7165,"sigma":0.3877,"v0":0.0174,"s0":100.0,"maturity":1.0}"#,
        )
        .unwrap();
        fs::write(
            dir.path().join("config.json"),
            r#"{"quadrature":{"time_nodes":32,"strip_tol":1e-10,"entry_tol":1e-8,"c_y_max":128.0,"c_panel_order":12,"max_evals":400000},
                "lambda_count":20}"#,
        )
        .unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(BIN);
        cmd.args(args)
            .arg("--config")
            .arg(self.path("config.json"))
            .arg("--claims")
            .arg(self.path("claims.json"))
            .arg("--params")
            .arg(self.path("params.json"))
            .arg("--cache")
            .arg(self.path("cache"));
        cmd.output().unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\nstdout {}\nstderr {}", o.status, stdout(o), String::from_utf8_lossy(&o.stderr));
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn outputs_are_byte_stable_with_a_warm_cache() {
    let ws = Workspace::new();
    let out1 = ws.path("out1");
    let out2 = ws.path("out2");
    let first = ws.run(&["abc", "--out", out1.to_str().unwrap()]);
    assert_ok(&first);
    assert!(stdout(&first).contains("cache hit  false"));
    let second = ws.run(&["abc", "--out", out2.to_str().unwrap()]);
    assert_ok(&second);
    assert!(stdout(&second).contains("cache hit  true"));
    assert_eq!(fs::read(out1.join("moments.json")).unwrap(), fs::read(out2.join("moments.json")).unwrap());

    for out in [&out1, &out2] {
        assert_ok(&ws.run(&["sweep-d", "--out", out.to_str().unwrap(), "--methods", "lb,bf,greedy,backward,lasso"]));
        assert_ok(&ws.run(&["portfolio", "--out", out.to_str().unwrap(), "--d", "1,2", "--nonneg"]));
    }
    for name in ["sweep_d.csv", "portfolio.csv"] {
        assert_eq!(fs::read(out1.join(name)).unwrap(), fs::read(out2.join(name)).unwrap(), "{name}");
    }
    assert_eq!(header(&out1.join("sweep_d.csv")), "method,d,lambda,rel_err,support,weights");
    assert_eq!(header(&out1.join("portfolio.csv")), "method,d,strike,kind,weight,log_strike,log_abs_weight");

    let csv = fs::read_to_string(out1.join("sweep_d.csv")).unwrap();
    let lb: Vec<&str> = csv.lines().filter(|l| l.starts_with("leaps_and_bounds,")).collect();
    let bf: Vec<&str> = csv.lines().filter(|l| l.starts_with("brute_force,")).collect();
    assert_eq!(lb.len(), 5);
    for (a, b) in lb.iter().zip(&bf) {
        assert_eq!(a.split_once(',').unwrap().1, b.split_once(',').unwrap().1);
    }
}

#[test]
fn rho_sweep_writes_fits() {
    let ws = Workspace::new();
    let out = ws.path("out");
    let o = ws.run(&["sweep-rho", "--out", out.to_str().unwrap(), "--rho-grid", "-0.6,0,0.6", "--methods", "lb"]);
    assert_ok(&o);
    assert_eq!(header(&out.join("sweep_rho.csv")), "rho,d,method,rel_err");
    assert_eq!(header(&out.join("semicircle_fit.csv")), "d,c_d,max_rel_dev");
    let rows = fs::read_to_string(out.join("sweep_rho.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 3 * 5);
}

#[test]
fn mc_check_flags_a_corrupted_a() {
    let ws = Workspace::new();
    let out = ws.path("out");
    let args = ["mc-check", "--out", out.to_str().unwrap(), "--paths", "20000", "--steps", "250", "--seed", "42"];
    let good = ws.run(&args);
    assert_ok(&good);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("mc_check.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["config"]["seed"], 42);

    let mut bad_args = args.to_vec();
    bad_args.extend(["--scale-a", "1.1"]);
    let bad = ws.run(&bad_args);
    assert_eq!(bad.status.code(), Some(4), "{}", stdout(&bad));
}

#[test]
fn bad_inputs_exit_with_config_code() {
    let ws = Workspace::new();
    let out = ws.path("out");
    let o = ws.run(&["sweep-d", "--out", out.to_str().unwrap(), "--d-max", "9"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ws.run(&["sweep-rho", "--out", out.to_str().unwrap(), "--rho-grid", "0.5,1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ws.run(&["abc", "--out", out.to_str().unwrap(), "--methods", "simplex"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(ws.path("params.json"), r#"{"kappa":-1,"lambda":1,"rho":0,"sigma":0.3,"v0":0.02,"s0":100,"maturity":1}"#).unwrap();
    let o = ws.run(&["abc", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    fs::remove_file(ws.path("claims.json")).unwrap();
    let o = ws.run(&["abc", "--out", out.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}
