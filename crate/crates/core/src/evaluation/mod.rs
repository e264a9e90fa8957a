//! Operating characteristics and efficiency diagnostics.
//!
//! Every procedure — the adaptive GLR tests and the comparator designs —
//! is evaluated through the [`Procedure`] trait: one call runs one trial
//! at a parameter point and reports whether H₀ was rejected, the sample
//! size used (per arm) and the number of analyses. [`simulate`] drives it
//! by Monte Carlo; [`exact`] enumerates binomial designs.

pub mod diagnostics;
pub mod exact;
pub mod simulate;

use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{Design, Thresholds};
use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, Param};

pub use diagnostics::{eta_theta, EfficiencyDiagnostic};
pub use exact::exact_oc;
pub use simulate::simulate_oc;

/// Result of one simulated trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub reject: bool,
    /// Sample size at termination (per arm for two-arm designs).
    pub n: u64,
    /// Number of analyses performed.
    pub stages: u32,
}

/// A trial procedure that can be run at a parameter point.
pub trait Procedure: Sync {
    /// Names of the parameter coordinates.
    fn coordinates(&self) -> Vec<String>;
    /// Largest possible number of analyses.
    fn max_stages(&self) -> usize;
    /// Runs one trial with data drawn at `theta`.
    fn run(&self, theta: &Param, rng: &mut ChaCha8Rng) -> Result<Outcome>;
}

/// An adaptive GLR design with fixed thresholds.
#[derive(Clone, Debug)]
pub struct Adaptive {
    pub design: Design,
    pub thresholds: Thresholds,
}

impl Adaptive {
    pub fn new(design: Design, thresholds: Thresholds) -> Self {
        Adaptive { design, thresholds }
    }
}

impl Procedure for Adaptive {
    fn coordinates(&self) -> Vec<String> {
        self.design.model().coordinate_names().iter().map(|s| s.to_string()).collect()
    }

    fn max_stages(&self) -> usize {
        self.design.stages()
    }

    fn run(&self, theta: &Param, rng: &mut ChaCha8Rng) -> Result<Outcome> {
        let model = self.design.model();
        let mut state = self.design.initial_state();
        while let Some(k) = state.pending_increment() {
            let inc = model.sample_increment(theta, k, rng);
            let (next, decision) = self.design.step(&self.thresholds, &state, &inc)?;
            if decision.action.is_terminal() {
                return Ok(Outcome {
                    reject: matches!(decision.action, crate::design::Action::RejectH0),
                    n: decision.n,
                    stages: next.analyses as u32,
                });
            }
            state = next;
        }
        Err(Error::Numeric("trial ended without a terminal decision".into()))
    }
}

/// How a set of operating characteristics was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OcMethod {
    Exact,
    MonteCarlo { reps: u64, seed: u64 },
}

/// Operating characteristics at one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcPoint {
    pub param: Param,
    /// Probability of rejecting H₀.
    pub power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_se: Option<f64>,
    /// Expected sample size (per arm).
    pub ess: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess_se: Option<f64>,
    /// Expected number of analyses.
    pub e_stages: f64,
}

/// Operating characteristics over a parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingChars {
    pub coordinates: Vec<String>,
    #[serde(flatten)]
    pub method: OcMethod,
    pub points: Vec<OcPoint>,
    /// Average of the expected sample sizes at the null and alternative
    /// points named in [`OperatingChars::set_avss`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avss: Option<f64>,
}

impl OperatingChars {
    /// Point whose parameter equals `param` (to 1e-9).
    pub fn point(&self, param: &[f64]) -> Option<&OcPoint> {
        self.points
            .iter()
            .find(|p| p.param.len() == param.len() && p.param.iter().zip(param).all(|(a, b)| (a - b).abs() < 1e-9))
    }

    /// Sets the average sample size ½[E(N | null) + E(N | alternative)].
    pub fn set_avss(&mut self, null: &[f64], alt: &[f64]) -> Result<f64> {
        let e0 = self
            .point(null)
            .ok_or_else(|| Error::Usage(format!("AvSS null point {null:?} is not on the grid")))?
            .ess;
        let e1 = self
            .point(alt)
            .ok_or_else(|| Error::Usage(format!("AvSS alternative point {alt:?} is not on the grid")))?
            .ess;
        let v = 0.5 * (e0 + e1);
        self.avss = Some(v);
        Ok(v)
    }

    /// CSV with columns `<coordinates>, power, power_se, ess, ess_se,
    /// e_stages, avss`. Missing standard errors are left empty; the AvSS
    /// column repeats the summary on every row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.coordinates {
            let _ = write!(out, "{c},");
        }
        out.push_str("power,power_se,ess,ess_se,e_stages,avss\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let se = |v: Option<f64>| v.map(two_significant).unwrap_or_default();
        for p in &self.points {
            for v in p.param.iter() {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(
                out,
                "{:.6},{},{:.4},{},{:.4},{}",
                p.power,
                se(p.power_se),
                p.ess,
                se(p.ess_se),
                p.e_stages,
                opt(self.avss)
            );
        }
        out
    }
}

/// Standard errors are shown to two significant figures.
fn two_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (1 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Parses a grid expression `name=start:stop[:step]` (or a comma list
/// `name=v1,v2,…`) into values. Without a step, at most 25 points are
/// produced on a step that is a round number.
pub fn parse_grid(expr: &str) -> Result<(String, Vec<f64>)> {
    let bad = |msg: &str| Error::spec("grid", format!("{msg} in {expr:?}; expected name=start:stop[:step]"));
    let (name, range) = expr.split_once('=').ok_or_else(|| bad("missing '='"))?;
    let name = name.trim().to_string();
    if name.is_empty() {
        return Err(bad("empty parameter name"));
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a number")));
    if range.contains(',') || !range.contains(':') {
        let values = range.split(',').map(num).collect::<Result<Vec<_>>>()?;
        return Ok((name, values));
    }
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() > 3 {
        return Err(bad("too many ':'"));
    }
    let (start, stop) = (num(parts[0])?, num(parts[1])?);
    if !(stop >= start) {
        return Err(bad("stop below start"));
    }
    let step = match parts.get(2) {
        Some(s) => num(s)?,
        None => default_step(stop - start),
    };
    if !(step > 0.0) {
        return Err(bad("step must be positive"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(bad("grid has more than 10000 points"));
    }
    // Round to the step's decimal precision to avoid 0.30000000000000004.
    let digits = (-(step.log10().floor()) + 1.0).max(0.0) as i32;
    let scale = 10f64.powi(digits);
    let values = (0..count)
        .map(|i| ((start + i as f64 * step) * scale).round() / scale)
        .collect();
    Ok((name, values))
}

/// Smallest step from {1, 2, 5}·10^k giving at most 25 points on a span.
fn default_step(span: f64) -> f64 {
    if span == 0.0 {
        return 1.0;
    }
    let raw = span / 24.0;
    let mag = 10f64.powf(raw.log10().floor());
    for f in [1.0, 2.0, 5.0, 10.0] {
        if f * mag >= raw - 1e-12 {
            return f * mag;
        }
    }
    10.0 * mag
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        let (n, v) = parse_grid("p=.05:.6").unwrap();
        assert_eq!(n, "p");
        assert!(v.len() <= 25);
        assert_eq!(v[0], 0.05);
        assert!((v.last().unwrap() - 0.6).abs() < 1e-12);
        let (_, v) = parse_grid("p=.05:.6:.05").unwrap();
        assert_eq!(v.len(), 12);
        assert_eq!(v[5], 0.3);
        let (_, v) = parse_grid("theta=0,0.1,0.29").unwrap();
        assert_eq!(v, vec![0.0, 0.1, 0.29]);
        assert_eq!(parse_grid("p").unwrap_err().code(), "schema");
        assert_eq!(parse_grid("p=.6:.1").unwrap_err().code(), "schema");
    }

    #[test]
    fn csv_layout() {
        let oc = OperatingChars {
            coordinates: vec!["p".into()],
            method: OcMethod::Exact,
            points: vec![OcPoint {
                param: Param::scalar(0.1),
                power: 0.05,
                power_se: None,
                ess: 14.5,
                ess_se: None,
                e_stages: 1.3,
            }],
            avss: None,
        };
        let csv = oc.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "p,power,power_se,ess,ess_se,e_stages,avss");
        assert_eq!(lines.next().unwrap(), "0.1,0.050000,,14.5000,,1.3000,");
    }

    #[test]
    fn standard_errors_to_two_figures() {
        assert_eq!(two_significant(0.000466), "0.00047");
        assert_eq!(two_significant(0.0187), "0.019");
        assert_eq!(two_significant(12.3), "12");
    }
}
