//! `conduct`: step a trial from interim results typed on stdin.
//!
//! Each non-empty line is one stage, for example
//!
//! ```text
//! stage 1: 3 successes / 10
//! stage 2: total 6 / 20
//! stage 1: 14/25 vs 9/25
//! {"n": [25], "sum": [3.1]}
//! ```
//!
//! A line gives the new observations of the stage unless it starts with
//! `total` or `cumulative`. Two-arm results are separated by `vs`
//! (treatment first). JSON lines take a sufficient statistic, or
//! `{"increment": …}` / `{"cumulative": …}`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Deserialize;

use glr_adapt_core::{schema, Action, Decision, Design, Error, ExponentialFamily, SufficientStat};
use glr_adapt_service::session::{increment_from_cumulative, AuditEntry, TrialSession};
use glr_adapt_service::store::write_atomic;

use crate::CliError;

/// A parsed input line.
#[derive(Clone, Debug, PartialEq)]
pub struct StageInput {
    /// Stage number the user typed, if any.
    pub stage: Option<usize>,
    pub stat: SufficientStat,
    pub cumulative: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonLine {
    #[serde(default)]
    increment: Option<SufficientStat>,
    #[serde(default)]
    cumulative: Option<SufficientStat>,
}

fn bad(line: &str, why: &str) -> Error {
    Error::Usage(format!("cannot read {line:?}: {why}"))
}

fn first_number(s: &str) -> Option<f64> {
    s.split(|c: char| c.is_whitespace() || c == '=' || c == ',')
        .find_map(|t| t.parse::<f64>().ok())
}

/// Parses one line; `None` for blank lines and comments.
pub fn parse_line(raw: &str, arms: usize) -> Result<Option<StageInput>, Error> {
    let line = raw.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (stage, mut body) = match line.split_once(':') {
        Some((head, rest)) if head.trim().to_ascii_lowercase().starts_with("stage") => {
            let k = head.trim()[5..]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad(raw, "expected `stage K:`"))?;
            (Some(k), rest.trim())
        }
        _ => (None, line),
    };
    if body.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(body).map_err(|e| bad(raw, &e.to_string()))?;
        if value.get("n").is_some() {
            let stat: SufficientStat = serde_json::from_value(value).map_err(|e| bad(raw, &e.to_string()))?;
            return Ok(Some(StageInput { stage, stat, cumulative: false }));
        }
        let j: JsonLine = serde_json::from_value(value).map_err(|e| bad(raw, &e.to_string()))?;
        return match (j.increment, j.cumulative) {
            (Some(stat), None) => Ok(Some(StageInput { stage, stat, cumulative: false })),
            (None, Some(stat)) => Ok(Some(StageInput { stage, stat, cumulative: true })),
            _ => Err(bad(raw, "give exactly one of `increment` and `cumulative`")),
        };
    }
    let mut cumulative = false;
    let lower = body.to_ascii_lowercase();
    for kw in ["total", "cumulative"] {
        if lower.starts_with(kw) {
            cumulative = true;
            body = body[kw.len()..].trim_start();
        }
    }
    let parts: Vec<&str> = body.split(" vs ").collect();
    if parts.len() != arms {
        return Err(bad(raw, &format!("this design has {arms} arm(s)")));
    }
    let mut stat = SufficientStat::default();
    for (a, part) in parts.iter().enumerate() {
        let (s, n) = part.split_once('/').ok_or_else(|| bad(raw, "expected `S / N`"))?;
        let sum = first_number(s).ok_or_else(|| bad(raw, "missing sum"))?;
        let n = first_number(n).ok_or_else(|| bad(raw, "missing sample size"))?;
        if n < 0.0 || n.fract() != 0.0 {
            return Err(bad(raw, "sample size must be a whole number"));
        }
        stat.n[a] = n as u64;
        stat.sum[a] = sum;
    }
    Ok(Some(StageInput { stage, stat, cumulative }))
}

/// Human-readable decision line.
pub fn describe(decision: &Decision, next_stage: usize) -> String {
    let rule = serde_json::to_value(decision.rule)
        .ok()
        .and_then(|v| v.as_str().map(|s| s.replace('_', " ")))
        .unwrap_or_default();
    match decision.action {
        Action::Continue { next_n } => format!("Continue, n{next_stage} = {next_n}"),
        Action::RejectH0 => format!("Reject H0 at n = {} ({rule})", decision.n),
        Action::AcceptH0 => format!("Accept H0 at n = {} ({rule})", decision.n),
    }
}

pub struct Conductor {
    pub session: TrialSession,
    design: Design,
}

impl Conductor {
    pub fn new(session: TrialSession) -> Result<Self, Error> {
        let design = session.design()?;
        Ok(Conductor { session, design })
    }

    pub fn submit(&mut self, input: &StageInput, timestamp_ms: u64) -> Result<String, Error> {
        let state = &self.session.state;
        if state.terminal.is_some() {
            return Err(Error::Usage("the trial has already terminated".into()));
        }
        if let Some(k) = input.stage {
            if k != state.stage && k != state.analyses + 1 {
                return Err(Error::Usage(format!(
                    "stage {k} given, but stage {} is pending",
                    state.stage
                )));
            }
        }
        let increment = if input.cumulative {
            increment_from_cumulative(self.design.model(), state, &input.stat)?
        } else {
            input.stat
        };
        let (next, decision) = self.design.step(&self.session.thresholds, state, &increment)?;
        let line = describe(&decision, next.stage);
        self.session.state = next;
        self.session.audit_log.push(AuditEntry {
            timestamp_ms,
            increment,
            decision,
        });
        Ok(line)
    }

    pub fn arms(&self) -> usize {
        self.design.model().arms()
    }

    pub fn design(&self) -> &Design {
        &self.design
    }
}

pub fn save(path: &Path, session: &TrialSession) -> Result<(), CliError> {
    write_atomic(path, schema::to_string_pretty(session).as_bytes()).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads stage lines until EOF or termination. Returns the number of
/// rejected lines.
pub fn drive(
    conductor: &mut Conductor,
    session_file: Option<&Path>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
    clock: &dyn Fn() -> u64,
) -> Result<usize, CliError> {
    let mut failures = 0;
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(|source| CliError::Io { path: "<stdin>".into(), source })? == 0 {
            break;
        }
        let result = parse_line(&line, conductor.arms()).and_then(|parsed| match parsed {
            Some(p) => conductor.submit(&p, clock()).map(Some),
            None => Ok(None),
        });
        match result {
            Ok(Some(msg)) => {
                if let Some(path) = session_file {
                    save(path, &conductor.session)?;
                }
                writeln!(out, "{msg}").map_err(CliError::stdout)?;
            }
            Ok(None) => {}
            Err(e) => {
                failures += 1;
                let _ = writeln!(err, "{}", crate::error_json(&CliError::Core(e)));
            }
        }
    }
    Ok(failures)
}
