//! Exact calibration for single-arm binomial designs.
//!
//! Every interim path (s₁, s₂, …) is enumerated with its probability under
//! the futility alternative and under p₀; the final analysis is handled
//! through the distribution of the last increment. The per-path statistics
//! are the same as in the Monte Carlo engine, only weighted instead of
//! sampled, so each threshold is read off a finite step function.
//!
//! Attainable probabilities are discrete. b̃ takes the achievable level
//! closest to its target; b and c take the smallest threshold whose
//! probability does not exceed the target (conservative for Type I error).

use crate::calibration::{check_eps, Budget, CalibrationReport, MethodInfo, BRACKET};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, Model, SufficientStat};
use crate::numerics::binomial_pmf;

/// An interim path ending with a jump to the final analysis.
#[derive(Clone, Debug)]
struct InterimPath {
    /// Signed null and futility statistics at each interim analysis.
    analyses: Vec<(f64, f64)>,
    n_last: u64,
    s_last: u64,
    w_fut: f64,
    w_null: f64,
}

fn signed(design: &Design, n: u64, s: u64) -> Result<(f64, f64)> {
    let model = design.model();
    let stat = SufficientStat::one_arm(n, s as f64);
    let g0 = model.glr(&stat, design.u0())?;
    let gf = model.glr(&stat, design.u_fut())?;
    Ok((
        if g0.u_hat > design.u0() { g0.lambda } else { f64::NEG_INFINITY },
        if gf.u_hat < design.u_fut() { gf.lambda } else { f64::NEG_INFINITY },
    ))
}

fn enumerate(design: &Design, p_fut: f64, p_null: f64) -> Result<Vec<InterimPath>> {
    let (m, cap) = (design.m(), design.cap());
    let (pf, pn) = (binomial_pmf(m, p_fut), binomial_pmf(m, p_null));
    let mut frontier: Vec<(usize, InterimPath)> = Vec::with_capacity(m as usize + 1);
    for s in 0..=m {
        frontier.push((
            1,
            InterimPath {
                analyses: vec![signed(design, m, s)?],
                n_last: m,
                s_last: s,
                w_fut: pf[s as usize],
                w_null: pn[s as usize],
            },
        ));
    }
    let mut done = Vec::new();
    while let Some((stage, path)) = frontier.pop() {
        let stat = SufficientStat::one_arm(path.n_last, path.s_last as f64);
        let (next_stage, next_n) = design.next_stage(stage, &stat)?;
        if next_n >= cap {
            done.push(path);
            continue;
        }
        let k = next_n - path.n_last;
        let (pf, pn) = (binomial_pmf(k, p_fut), binomial_pmf(k, p_null));
        for x in 0..=k {
            let s = path.s_last + x;
            let mut analyses = path.analyses.clone();
            analyses.push(signed(design, next_n, s)?);
            frontier.push((
                next_stage,
                InterimPath {
                    analyses,
                    n_last: next_n,
                    s_last: s,
                    w_fut: path.w_fut * pf[x as usize],
                    w_null: path.w_null * pn[x as usize],
                },
            ));
        }
    }
    Ok(done)
}

/// Distinct finite values in decreasing order with the cumulative weight at
/// or above each one.
fn step_function(mut values: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    values.retain(|v| v.0.is_finite() && v.1 > 0.0);
    values.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    for (v, w) in values {
        cum += w;
        match out.last_mut() {
            Some(last) if (last.0 - v).abs() <= 1e-12 * (1.0 + v.abs()) => last.1 = cum,
            _ => out.push((v, cum)),
        }
    }
    out
}

/// Threshold with exactly the `j` largest distinct values at or above it.
fn threshold_at(steps: &[(f64, f64)], j: usize) -> f64 {
    match j {
        0 => steps.first().map_or(BRACKET.1, |s| s.0 + 1.0),
        j if j < steps.len() => 0.5 * (steps[j - 1].0 + steps[j].0),
        _ => {
            // Every finite value exceeds it; Λ is never negative.
            0.5 * steps[steps.len() - 1].0
        }
    }
}

fn prob_at(steps: &[(f64, f64)], j: usize) -> f64 {
    if j == 0 {
        0.0
    } else {
        steps[j - 1].1
    }
}

/// Threshold whose probability is closest to `target`.
fn closest(steps: &[(f64, f64)], target: f64) -> (f64, f64) {
    let j = (0..=steps.len())
        .min_by(|&a, &b| (prob_at(steps, a) - target).abs().total_cmp(&(prob_at(steps, b) - target).abs()))
        .unwrap_or(0);
    (threshold_at(steps, j), prob_at(steps, j))
}

/// Smallest threshold whose probability does not exceed `target`.
fn conservative(steps: &[(f64, f64)], target: f64) -> (f64, f64) {
    let j = (0..=steps.len())
        .take_while(|&j| prob_at(steps, j) <= target * (1.0 + 1e-12))
        .last()
        .unwrap_or(0);
    (threshold_at(steps, j), prob_at(steps, j))
}

/// Exact calibration of a single-arm binomial design.
pub fn calibrate(design: &Design) -> Result<CalibrationReport> {
    if !matches!(design.model(), Model::Bernoulli(_)) {
        return Err(Error::Usage(
            "exact calibration is available for the single-arm binomial model; use monte_carlo".into(),
        ));
    }
    check_eps(design)?;
    let targets = Budget::targets(design);
    let cap = design.cap();
    let paths = enumerate(design, design.u_fut(), design.u0())?;

    let fut = step_function(
        paths
            .iter()
            .map(|p| (p.analyses.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max), p.w_fut))
            .collect(),
    );
    let (b_tilde, fut_p) = closest(&fut, targets.futility);

    // Early statistic up to the first futility stop, and whether one occurs.
    let early: Vec<(f64, bool)> = paths
        .iter()
        .map(|p| {
            let mut t = f64::NEG_INFINITY;
            for a in &p.analyses {
                t = t.max(a.0);
                if a.1 >= b_tilde {
                    return (t, true);
                }
            }
            (t, false)
        })
        .collect();
    let early_steps = step_function(early.iter().zip(&paths).map(|(e, p)| (e.0, p.w_null)).collect());
    let (b, early_p) = conservative(&early_steps, targets.early_rejection);

    let mut final_weight = vec![0.0; cap as usize + 1];
    for (e, p) in early.iter().zip(&paths) {
        if e.1 || e.0 >= b {
            continue;
        }
        let pmf = binomial_pmf(cap - p.n_last, design.u0());
        for (x, w) in pmf.iter().enumerate() {
            final_weight[p.s_last as usize + x] += p.w_null * w;
        }
    }
    let mut finals = Vec::with_capacity(final_weight.len());
    for (s, &w) in final_weight.iter().enumerate() {
        finals.push((signed(design, cap, s as u64)?.0, w));
    }
    let (c, final_p) = conservative(&step_function(finals), targets.final_rejection);

    let achieved = Budget {
        futility: fut_p,
        early_rejection: early_p,
        final_rejection: final_p,
    };
    let mut warnings = Vec::new();
    if (fut_p - targets.futility).abs() > 0.25 * targets.futility {
        warnings.push(format!(
            "futility probability {fut_p:.5} is the nearest attainable level to {:.5}",
            targets.futility
        ));
    }
    Ok(CalibrationReport {
        thresholds: design.thresholds(b, b_tilde, c),
        method: MethodInfo::Exact,
        targets,
        residuals: achieved.minus(&targets),
        achieved,
        mc_se: None,
        warnings,
    })
}
