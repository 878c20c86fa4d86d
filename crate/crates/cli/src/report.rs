//! Deterministic report assembly and serialization.
//!
//! Reports must be byte-identical across runs with the same (config, seed,
//! version), so JSON is emitted by hand with sorted keys and a single fixed
//! float representation, and wall times stay null unless timings were
//! requested explicitly.

use std::collections::BTreeMap;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// Pass when residual ≤ threshold.
    Le,
    /// Pass when residual ≥ threshold.
    Ge,
}

impl Comparison {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparison::Le => "le",
            Comparison::Ge => "ge",
        }
    }

    pub fn holds(self, residual: f64, threshold: f64) -> bool {
        match self {
            Comparison::Le => residual <= threshold,
            Comparison::Ge => residual >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// A hypothesis or guard was violated before the check could measure
    /// anything; maps to exit status 2.
    Guard,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Guard => "guard",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub comparison: Comparison,
    pub residual: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub version: String,
}

impl VerificationReport {
    pub fn overall_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    /// 0 all-pass, 1 check failure, 2 guard violation; config errors (3) are
    /// rejected before a report exists.
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| c.verdict == Verdict::Guard) {
            2
        } else if self.overall_pass() {
            0
        } else {
            1
        }
    }
}

/// Single canonical float form: 17 significant digits, exponent notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn string_map_json(map: &BTreeMap<String, f64>) -> String {
    let body: Vec<String> = map
        .iter()
        .map(|(k, v)| format!("\"{}\":{}", escape(k), fmt_float(*v)))
        .collect();
    format!("{{{}}}", body.join(","))
}

fn config_json(config: &RunConfig) -> String {
    let alpha: Vec<String> = config
        .params
        .alpha()
        .entries()
        .iter()
        .map(|e| e.to_string())
        .collect();
    let lambda: Vec<String> = config
        .params
        .lambda()
        .iter()
        .map(|l| fmt_float(*l))
        .collect();
    format!(
        "{{\"alpha\":[{}],\"degree\":{},\"lambda\":[{}],\"mu\":{},\"n\":{},\
         \"quadrature\":{{\"nodes\":{},\"radius\":{}}},\"samples\":{},\"seed\":{},\
         \"taylor_order\":{},\"tolerances\":{}}}",
        alpha.join(","),
        config.degree,
        lambda.join(","),
        string_map_json(&config.mu_echo()),
        config.params.n(),
        config.quadrature.nodes,
        fmt_float(config.quadrature.radius),
        config.samples,
        config.seed,
        config.taylor_order,
        string_map_json(&config.tolerances),
    )
}

fn check_json(c: &CheckResult) -> String {
    let note = match &c.note {
        Some(n) => format!("\"{}\"", escape(n)),
        None => "null".to_string(),
    };
    let wall = match c.wall_ms {
        Some(w) => fmt_float(w),
        None => "null".to_string(),
    };
    format!(
        "{{\"check\":\"{}\",\"comparison\":\"{}\",\"note\":{},\"residual\":{},\
         \"threshold\":{},\"verdict\":\"{}\",\"wall_ms\":{}}}",
        escape(&c.name),
        c.comparison.as_str(),
        note,
        fmt_float(c.residual),
        fmt_float(c.threshold),
        c.verdict.as_str(),
        wall,
    )
}

/// Full JSON report, keys sorted at every level.
pub fn report_json(report: &VerificationReport, config: &RunConfig) -> String {
    let checks: Vec<String> = report.checks.iter().map(check_json).collect();
    format!(
        "{{\"checks\":[{}],\"config\":{},\"overall\":\"{}\",\"suite\":\"{}\",\"version\":\"{}\"}}\n",
        checks.join(","),
        config_json(config),
        if report.overall_pass() { "pass" } else { "fail" },
        escape(&report.suite),
        escape(&report.version),
    )
}

/// One row per check: name, residual, threshold, verdict.
pub fn report_csv(report: &VerificationReport) -> String {
    let mut out = String::from("check,residual,threshold,verdict\n");
    for c in &report.checks {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.name,
            fmt_float(c.residual),
            fmt_float(c.threshold),
            c.verdict.as_str()
        ));
    }
    out
}
