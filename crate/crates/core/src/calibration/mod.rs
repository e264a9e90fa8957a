//! Threshold calibration.
//!
//! The thresholds are solved in succession: b̃ from the futility budget
//! ε̃·α̃ at the futility alternative, then b from the early-rejection
//! budget ε·α at u₀, then c from the final-rejection budget (1 − ε)·α.
//! Three engines compute the left-hand-side probabilities:
//! [`normal_approx`] (recursive integration), [`monte_carlo`] (simulated
//! trial paths, thresholds read off as order statistics) and [`exact`]
//! (binomial enumeration).

pub mod exact;
pub mod monte_carlo;
pub mod normal_approx;

use serde::{Deserialize, Serialize};

use crate::design::{Calibration, Design, Thresholds};
use crate::error::{Error, Result};
use crate::numerics::brent;

use normal_approx::{Events, NormalApprox};

/// Bracket searched for every threshold.
pub const BRACKET: (f64, f64) = (1e-4, 30.0);
/// Absolute tolerance of the threshold root finder.
pub const THRESHOLD_TOL: f64 = 1e-6;

/// The three calibration probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Futility stop at the futility alternative.
    pub futility: f64,
    /// Early rejection under u₀.
    pub early_rejection: f64,
    /// Final rejection under u₀.
    pub final_rejection: f64,
}

impl Budget {
    pub fn targets(design: &Design) -> Self {
        let s = design.spec();
        Budget {
            futility: s.eps_tilde * s.alpha_tilde,
            early_rejection: s.eps * s.alpha,
            final_rejection: (1.0 - s.eps) * s.alpha,
        }
    }

    fn minus(&self, other: &Budget) -> Budget {
        Budget {
            futility: self.futility - other.futility,
            early_rejection: self.early_rejection - other.early_rejection,
            final_rejection: self.final_rejection - other.final_rejection,
        }
    }
}

/// Method metadata recorded with a calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodInfo {
    NormalApprox {
        nodes_per_piece: usize,
        /// Canonical drift of the futility alternative.
        theta_fut: f64,
        /// Largest change of an achieved probability when the number of
        /// nodes per piece is doubled.
        refinement_change: f64,
    },
    MonteCarlo {
        reps: u64,
        seed: u64,
        /// Whether the simulation distributions were anchored at data.
        anchored: bool,
    },
    Exact,
}

/// Calibrated thresholds with achieved probabilities and diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub thresholds: Thresholds,
    pub method: MethodInfo,
    pub targets: Budget,
    pub achieved: Budget,
    pub residuals: Budget,
    /// Monte Carlo standard errors of the achieved probabilities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_se: Option<Budget>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Largest change under grid refinement that is reported without warning.
pub const REFINEMENT_TOL: f64 = 1e-4;

fn check_eps(design: &Design) -> Result<()> {
    let s = design.spec();
    for (name, v) in [("eps", s.eps), ("eps_tilde", s.eps_tilde)] {
        if !(0.05..=0.95).contains(&v) {
            return Err(Error::spec(
                name,
                format!("{v} leaves a degenerate error budget; use a value in [0.05, 0.95]"),
            ));
        }
    }
    Ok(())
}

/// Calibrates with the method named in the specification.
pub fn calibrate(design: &Design) -> Result<CalibrationReport> {
    match design.spec().calibration {
        Calibration::NormalApprox { nodes_per_piece } => calibrate_normal_approx(design, nodes_per_piece),
        Calibration::MonteCarlo { reps, seed } => monte_carlo::calibrate(design, reps, seed, None),
        Calibration::Exact => exact::calibrate(design),
    }
}

fn solve(name: &str, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
    brent(&mut f, BRACKET.0, BRACKET.1, THRESHOLD_TOL, 200).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!("{name}: {msg}")),
        other => other,
    })
}

/// Normal-approximation calibration of a three- or four-stage design.
pub fn calibrate_normal_approx(design: &Design, nodes_per_piece: usize) -> Result<CalibrationReport> {
    check_eps(design)?;
    let engine = NormalApprox::new(design, nodes_per_piece)?;
    let targets = Budget::targets(design);
    let theta_fut = engine.design.theta_fut;
    let off = f64::INFINITY;

    let b_tilde = solve("b_tilde", |bt| {
        engine.probabilities(theta_fut, off, bt, off, Events::Futility).futility - targets.futility
    })?;
    let b = solve("b", |b| {
        engine.probabilities(0.0, b, b_tilde, off, Events::Rejection).early_rejection() - targets.early_rejection
    })?;
    let c = solve("c", |c| {
        engine.probabilities(0.0, b, b_tilde, c, Events::Final).final_rejection - targets.final_rejection
    })?;

    let achieved_with = |e: &NormalApprox| {
        let fut = e.probabilities(theta_fut, off, b_tilde, off, Events::Futility).futility;
        let null = e.probabilities(0.0, b, b_tilde, c, Events::Final);
        Budget {
            futility: fut,
            early_rejection: null.early_rejection(),
            final_rejection: null.final_rejection,
        }
    };
    let achieved = achieved_with(&engine);
    let fine = NormalApprox::from_canonical(engine.design.clone(), 2 * nodes_per_piece);
    let refined = achieved_with(&fine);
    let delta = refined.minus(&achieved);
    let refinement_change = delta
        .futility
        .abs()
        .max(delta.early_rejection.abs())
        .max(delta.final_rejection.abs());
    let mut warnings = Vec::new();
    if refinement_change > REFINEMENT_TOL {
        warnings.push(format!(
            "doubling the integration nodes changes a probability by {refinement_change:.2e}"
        ));
    }
    Ok(CalibrationReport {
        thresholds: design.thresholds(b, b_tilde, c),
        method: MethodInfo::NormalApprox {
            nodes_per_piece,
            theta_fut,
            refinement_change,
        },
        targets,
        residuals: achieved.minus(&targets),
        achieved,
        mc_se: None,
        warnings,
    })
}

/// Threshold at which exactly the `j` largest of `values` exceed it: the
/// midpoint between the j-th and (j+1)-th largest. `values` is sorted in
/// decreasing order.
pub(crate) fn order_statistic_threshold(sorted_desc: &[f64], j: usize) -> f64 {
    let n = sorted_desc.len();
    if j == 0 {
        return sorted_desc.first().map_or(BRACKET.1, |&v| if v.is_finite() { v + 1.0 } else { BRACKET.1 });
    }
    let above = sorted_desc[j - 1];
    let below = if j < n { sorted_desc[j] } else { f64::NEG_INFINITY };
    if !above.is_finite() {
        return BRACKET.0;
    }
    if below.is_finite() {
        0.5 * (above + below)
    } else {
        0.5 * above
    }
}
