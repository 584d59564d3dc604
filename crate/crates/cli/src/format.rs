//! Text and CSV renderings. Floats use the shortest form that parses back
//! to the same value; magnitudes use the `10^(...)` grammar.

use std::fmt::Write as _;

use cesaro_core::pisier::RademacherProfile;
use cesaro_core::rates::RatePlan;
use cesaro_core::verify::Verdict;
use cesaro_core::LeveledMagnitude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

fn table(rows: &[(&str, String)], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Text => {
            let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
            for (k, v) in rows {
                let _ = writeln!(out, "{k:<w$}  {v}");
            }
        }
        Format::Csv => {
            let head: Vec<&str> = rows.iter().map(|r| r.0).collect();
            let vals: Vec<&str> = rows.iter().map(|r| r.1.as_str()).collect();
            let _ = writeln!(out, "{}\n{}", head.join(","), vals.join(","));
        }
    }
    out
}

pub fn profile(p: &RademacherProfile, format: Format) -> String {
    let rows = [
        ("delta", p.delta.to_string()),
        ("lambda", p.lambda.to_string()),
        ("mu2_bound", p.mu2_bound.to_string()),
        ("xi", p.xi_prob.to_string()),
        ("p_prime", p.p_prime.to_string()),
        ("p", p.p_conj.to_string()),
        ("theta", p.theta.to_string()),
        ("q", p.q.to_string()),
        ("Cq", p.c_q.to_string()),
        ("Kq", p.k_q.to_string()),
        ("Cq_second_moment", p.c_q_second_moment.to_string()),
        ("sum_constant", p.sum_constant.to_string()),
    ];
    table(&rows, format)
}

fn lm(x: &LeveledMagnitude) -> String {
    format!("{x:#}")
}

pub fn plan(p: &RatePlan, hilbert: Option<&LeveledMagnitude>, format: Format) -> String {
    let mut rows = vec![
        ("eps", p.eps.to_string()),
        ("b", p.b.to_string()),
        ("q", p.q.to_string()),
        ("Cq", p.c_q.to_string()),
        ("p_tilde", lm(&p.p_tilde)),
        ("delta", lm(&p.delta)),
        ("p", lm(&p.p)),
        ("alpha", lm(&p.alpha)),
        ("N", lm(&p.n)),
    ];
    if let Some(h) = hilbert {
        rows.push(("hilbert_N", lm(h)));
    }
    table(&rows, format)
}

pub fn verdicts(vs: &[Verdict], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("check,trials,worst_slack,passed\n");
            for v in vs {
                let _ = writeln!(out, "{},{},{},{}", v.check, v.trials, v.worst_slack, v.passed);
            }
        }
        Format::Text => {
            for v in vs {
                let status = if v.passed { "pass" } else { "FAIL" };
                let _ = write!(out, "{status}  {}  trials={}  worst_slack={}", v.check, v.trials, v.worst_slack);
                if let Some(se) = v.std_error {
                    let _ = write!(out, "  std_error={se}");
                }
                out.push('\n');
                if !v.passed {
                    out.push_str(&witness(v));
                }
            }
        }
    }
    out
}

/// The worst trial of `v`, one field per line.
pub fn witness(v: &Verdict) -> String {
    let Some(w) = &v.witness else { return String::new() };
    let mut out = String::new();
    let _ = writeln!(out, "  witness {} trial {}: lhs={} rhs={}", v.check, w.trial, w.lhs, w.rhs);
    for (k, x) in &w.params {
        let _ = writeln!(out, "    {k}={x}");
    }
    for (i, p) in w.points.iter().enumerate() {
        let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "    x{}=({})", i + 1, coords.join(","));
    }
    out
}

pub fn trace_header(envelope: bool) -> &'static str {
    if envelope {
        "n,residual,envelope\n"
    } else {
        "n,residual\n"
    }
}

pub fn trace_row(n: u64, residual: f64, envelope: Option<f64>) -> String {
    match envelope {
        Some(e) => format!("{n},{residual},{e}\n"),
        None => format!("{n},{residual}\n"),
    }
}
