use std::process::{Command, Output};

use cesaro_core::LeveledMagnitude;

fn cesaro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cesaro")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).filter(|r| r.starts_with(' ')).map(|r| r.trim().to_string()))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn pisier_hilbert() {
    let o = cesaro(&["pisier", "--modulus", "hilbert"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let q: f64 = field(&out, "q").parse().unwrap();
    let c: f64 = field(&out, "Cq").parse().unwrap();
    assert!((q - 1.000423).abs() < 1e-6 && (c - 2.0e4).abs() < 0.1e4, "{out}");
}

#[test]
fn pisier_rejects_delta() {
    let o = cesaro(&["pisier", "--delta", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(0, 1)"));
}

#[test]
fn pisier_theta_moves_q() {
    let q = |theta: &str| -> (f64, f64) {
        let out = stdout(&cesaro(&["pisier", "--delta", "0.25", "--theta", theta]));
        (field(&out, "q").parse().unwrap(), field(&out, "p").parse().unwrap())
    };
    let (lo, p) = q("0.5");
    let (hi, _) = q("0.9");
    assert!(hi > lo && p - hi < p - lo);
}

#[test]
fn rate_constant_half() {
    let o = cesaro(&["rate", "--modulus", "table:const_half", "--eps", "0.9", "--b", "1", "--q", "2", "--Cq", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(field(&out, "p_tilde"), "3600");
    let n: LeveledMagnitude = field(&out, "N").parse().unwrap();
    assert_eq!(n.level(), 2);
    let ll = n.log10().unwrap().magnitude.log10_f64().unwrap();
    assert!((ll - 9939.8).abs() < 0.5, "{ll}");
}

#[test]
fn rate_csv_parses_back() {
    let o = cesaro(&["--format", "csv", "rate", "--modulus", "hilbert", "--eps", "0.5", "--b", "1", "--hilbert-compare"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("eps,b,q,Cq,p_tilde,delta,p,alpha,N,hilbert_N"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    for cell in &row[4..] {
        cell.parse::<LeveledMagnitude>().unwrap_or_else(|_| panic!("{cell}"));
    }
    assert_eq!(row[9], "4");
}

#[test]
fn rate_hilbert_only() {
    let o = cesaro(&["rate", "--hilbert-only", "--eps", "0.01", "--diam", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "10000\n");
}

#[test]
fn rate_missing_eps() {
    let o = cesaro(&["rate", "--modulus", "hilbert", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_rademacher_passes() {
    let o = cesaro(&["verify", "rademacher", "--space", "l2:8", "--n", "10", "--q", "2", "--Cq", "3", "--trials", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn verify_rademacher_l1_witness() {
    let o = cesaro(&["verify", "rademacher", "--space", "l1:2", "--n", "2", "--q", "2", "--Cq", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("x1=(1,0)") && out.contains("x2=(0,1)"), "{out}");
}

#[test]
fn verify_csv_and_determinism() {
    let args = ["--format", "csv", "verify", "all", "--space", "l2:3", "--trials", "200", "--seed", "3"];
    let a = cesaro(&args);
    let b = cesaro(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    assert!(out.starts_with("check,trials,worst_slack,passed\n"));
    for line in out.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        assert!(cells[2].parse::<f64>().is_ok() && cells[3] == "true", "{line}");
    }
}

#[test]
fn verify_usage_errors() {
    assert_eq!(cesaro(&["verify", "rademacher", "--space", "l2"]).status.code(), Some(2));
    assert_eq!(cesaro(&["verify", "warp"]).status.code(), Some(2));
    assert_eq!(cesaro(&["verify", "rademacher", "--n", "21", "--trials", "1"]).status.code(), Some(2));
    assert_eq!(cesaro(&["verify", "nonsquare", "--trials", "0"]).status.code(), Some(2));
}

fn residual_at(csv: &str, n: u64) -> f64 {
    let row = csv.lines().nth(n as usize).unwrap();
    let (k, r) = row.split_once(',').unwrap();
    assert_eq!(k.parse::<u64>().unwrap(), n);
    r.split(',').next().unwrap().parse().unwrap()
}

#[test]
fn simulate_quarter_turn() {
    let o = cesaro(&["simulate", "--map", "rotation:angle=1.5708", "--space", "l2:2", "--x", "1,0", "--nmax", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("n,residual\n"));
    assert_eq!(out.lines().count(), 101);
    // 1.5708 misses pi/2 by 3.7e-6
    assert!(residual_at(&out, 4) < 1e-5);
    let exact = stdout(&cesaro(&["simulate", "--map", "rotation:angle=pi/2", "--space", "l2:2", "--x", "1,0", "--nmax", "8"]));
    assert!(residual_at(&exact, 4) < 1e-15 && residual_at(&exact, 8) < 1e-15);
}

#[test]
fn simulate_envelope() {
    let o = cesaro(&["simulate", "--map", "rotation:angle=1", "--space", "l2:2", "--x", "0.6,-0.8", "--nmax", "5000", "--envelope"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("n,residual,envelope\n"));
    for line in out.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(v[1] <= v[2] + 1e-9);
    }
    let noisy = ["simulate", "--map", "rotation:angle=1", "--space", "l2:2", "--x", "0.5,0", "--nmax", "50", "--noise", "0.05", "--seed", "9"];
    assert_eq!(cesaro(&noisy).stdout, cesaro(&noisy).stdout);
}

#[test]
fn simulate_start_outside() {
    let o = cesaro(&["simulate", "--map", "identity", "--space", "l2:2", "--x", "2,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("plan.txt");
    std::fs::write(&cfg, "# desk-scale plan\ncommand=rate\nmodulus=table:const_half\neps=0.5\nb=1\nq=2\nCq=3\n").unwrap();
    let o = cesaro(&["--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "rate", "--eps", "0.9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(field(&text, "eps"), "0.9");
    assert_eq!(field(&text, "p_tilde"), "3600");
    let bare = cesaro(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(field(&stdout(&bare), "eps"), "0.5");
}
