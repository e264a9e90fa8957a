//! Monte Carlo calibration from simulated trial paths.
//!
//! Paths are simulated under the futility alternative and under u₀ —
//! either at the model's planning points or, when first-stage data are
//! supplied, at the constrained estimates θ̂_{m,j} (the MLE under
//! u(θ) = u_j). Sample sizes do not depend on the thresholds, so each path
//! is simulated once to the end and reduced to a per-path statistic whose
//! exceedance of a threshold is exactly the calibration event:
//!
//! * futility: the largest futility GLR over interim analyses;
//! * early rejection: the largest null GLR over interim analyses up to and
//!   including the first futility stop (given b̃);
//! * final rejection: the final null GLR on paths that reach the end
//!   (given b̃ and b), −∞ otherwise.
//!
//! Each threshold is then an order statistic of the sorted per-path values,
//! an exact inversion of the simulated step function.

use crate::calibration::{check_eps, order_statistic_threshold, Budget, CalibrationReport, MethodInfo};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, Param, SufficientStat};
use crate::rng::{map_indices, replicate_rng, streams};

/// One analysis of a simulated path: (n, signed null statistic, signed
/// futility statistic). The signed statistics are Λ when the estimate lies
/// on the relevant side of the hypothesis and −∞ otherwise.
#[derive(Clone, Copy, Debug)]
struct Analysis {
    interim: bool,
    reject_stat: f64,
    futility_stat: f64,
}

/// Analyses of one path; a test has at most four.
type Path = ([Analysis; 4], usize);

fn simulate_path(design: &Design, theta: &Param, seed: u64, stream: u64, rep: u64) -> Result<Path> {
    let model = design.model();
    let (u0, u_fut, cap) = (design.u0(), design.u_fut(), design.cap());
    let mut rng = replicate_rng(seed, stream, rep);
    let mut stat = model.sample_increment(theta, design.m(), &mut rng);
    let mut stage = 1;
    let empty = Analysis {
        interim: false,
        reject_stat: f64::NEG_INFINITY,
        futility_stat: f64::NEG_INFINITY,
    };
    let mut out = ([empty; 4], 0usize);
    loop {
        let n = stat.size();
        let g0 = model.glr(&stat, u0)?;
        let gf = model.glr(&stat, u_fut)?;
        out.0[out.1] = Analysis {
            interim: n < cap,
            reject_stat: if g0.u_hat > u0 { g0.lambda } else { f64::NEG_INFINITY },
            futility_stat: if gf.u_hat < u_fut { gf.lambda } else { f64::NEG_INFINITY },
        };
        out.1 += 1;
        if n >= cap {
            return Ok(out);
        }
        let (next_stage, next_n) = design.next_stage(stage, &stat)?;
        let inc = model.sample_increment(theta, next_n - n, &mut rng);
        stat = stat.add(&inc);
        stage = next_stage;
    }
}

/// Simulates `reps` paths and reduces each one with `reduce`.
fn simulate_all<T, F>(design: &Design, theta: &Param, reps: u64, seed: u64, stream: u64, reduce: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[Analysis]) -> T + Sync + Send,
{
    map_indices(reps, |r| simulate_path(design, theta, seed, stream, r).map(|(a, n)| reduce(&a[..n])))
        .into_iter()
        .collect()
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn exceed(values: &[f64], t: f64) -> f64 {
    values.iter().filter(|&&v| v >= t).count() as f64 / values.len() as f64
}

/// Hypothesis points used for simulation: `(futility point, null point)`.
pub fn simulation_points(design: &Design, anchor: Option<&SufficientStat>) -> Result<(Param, Param)> {
    let model = design.model();
    match anchor {
        None => Ok((model.hypothesis_point(design.u_fut())?, model.hypothesis_point(design.u0())?)),
        Some(stat) => {
            let est = model.glr_estimate(stat)?;
            Ok((
                model.constrained_point(&est, design.u_fut())?,
                model.constrained_point(&est, design.u0())?,
            ))
        }
    }
}

/// Calibrates by simulation; `anchor` switches from planning points to the
/// constrained estimates at observed data.
pub fn calibrate(design: &Design, reps: u64, seed: u64, anchor: Option<&SufficientStat>) -> Result<CalibrationReport> {
    check_eps(design)?;
    let targets = Budget::targets(design);
    for (name, t) in [
        ("futility", targets.futility),
        ("early rejection", targets.early_rejection),
        ("final rejection", targets.final_rejection),
    ] {
        if t * (reps as f64) < 10.0 {
            return Err(Error::Precision(format!(
                "{name} target {t:.3e} is below the resolution of {reps} replicates (need at least {:.0})",
                (10.0 / t).ceil()
            )));
        }
    }
    let (theta_fut, theta_null) = simulation_points(design, anchor)?;
    let rank = |p: f64| (p * reps as f64).round() as usize;

    let t_fut = simulate_all(design, &theta_fut, reps, seed, streams::CALIBRATE_FUTILITY, |p| {
        p.iter()
            .filter(|a| a.interim)
            .map(|a| a.futility_stat)
            .fold(f64::NEG_INFINITY, f64::max)
    })?;
    let t_fut = sorted_desc(t_fut);
    let b_tilde = order_statistic_threshold(&t_fut, rank(targets.futility));

    // Per path: (early statistic up to the first futility stop, whether a
    // futility stop occurs, final statistic).
    let reduced: Vec<(f64, bool, f64)> =
        simulate_all(design, &theta_null, reps, seed, streams::CALIBRATE_NULL, |p| {
            let mut t = f64::NEG_INFINITY;
            let mut futile = false;
            let mut fin = f64::NEG_INFINITY;
            for a in p {
                if !a.interim {
                    fin = a.reject_stat;
                    break;
                }
                t = t.max(a.reject_stat);
                if a.futility_stat >= b_tilde {
                    futile = true;
                    break;
                }
            }
            (t, futile, fin)
        })?;
    let t_b = sorted_desc(reduced.iter().map(|r| r.0).collect());
    let b = order_statistic_threshold(&t_b, rank(targets.early_rejection));
    let t_c: Vec<f64> = reduced
        .iter()
        .map(|&(t, futile, fin)| if !futile && t < b { fin } else { f64::NEG_INFINITY })
        .collect();
    let t_c = sorted_desc(t_c);
    let c = order_statistic_threshold(&t_c, rank(targets.final_rejection));

    let achieved = Budget {
        futility: exceed(&t_fut, b_tilde),
        early_rejection: exceed(&t_b, b),
        final_rejection: exceed(&t_c, c),
    };
    let se = |p: f64| (p * (1.0 - p) / reps as f64).sqrt();
    let mc_se = Budget {
        futility: se(achieved.futility),
        early_rejection: se(achieved.early_rejection),
        final_rejection: se(achieved.final_rejection),
    };
    let mut warnings = Vec::new();
    for (name, a, t) in [
        ("futility", achieved.futility, targets.futility),
        ("early rejection", achieved.early_rejection, targets.early_rejection),
        ("final rejection", achieved.final_rejection, targets.final_rejection),
    ] {
        if (a - t).abs() > 3.0 * se(t) + 1.0 / reps as f64 {
            warnings.push(format!(
                "{name} probability {a:.5} misses its target {t:.5}; the statistic is too discrete at this design"
            ));
        }
    }
    Ok(CalibrationReport {
        thresholds: design.thresholds(b, b_tilde, c),
        method: MethodInfo::MonteCarlo {
            reps,
            seed,
            anchored: anchor.is_some(),
        },
        targets,
        residuals: Budget {
            futility: achieved.futility - targets.futility,
            early_rejection: achieved.early_rejection - targets.early_rejection,
            final_rejection: achieved.final_rejection - targets.final_rejection,
        },
        achieved,
        mc_se: Some(mc_se),
        warnings,
    })
}
