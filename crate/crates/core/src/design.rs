//! Adaptive three- and four-stage GLR tests.
//!
//! A [`DesignSpec`] is the user-facing description (sizes, error budget,
//! inflation factor, calibration method). [`Design::new`] validates it and
//! resolves the implied alternatives; together with calibrated
//! [`Thresholds`] a design can then be stepped stage by stage through
//! [`Design::step`], which is the single decision function shared by the
//! conductor service, the exact OC engine and the simulators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, Glr, Model, Param, SufficientStat};
use crate::numerics::{binomial_sf, brent, golden_min, guarded_ceil, norm_sf, z_upper};

/// How the thresholds (b, b̃, c) are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Calibration {
    /// Normal approximation of the signed roots, recursive integration.
    NormalApprox {
        #[serde(default = "default_nodes")]
        nodes_per_piece: usize,
    },
    /// Simulation of full trial paths.
    MonteCarlo {
        #[serde(default = "default_reps")]
        reps: u64,
        #[serde(default)]
        seed: u64,
    },
    /// Exact enumeration (binomial designs).
    Exact,
}

fn default_nodes() -> usize {
    64
}

fn default_reps() -> u64 {
    1_000_000
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration::NormalApprox {
            nodes_per_piece: default_nodes(),
        }
    }
}

/// Second-stage sample-size rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSizeRule {
    /// Hoeffding-type rule n(θ̂) with inflation (1 + ρ_m).
    #[default]
    Glr,
    /// Conditional-power rule (normal mean model only); used to build the
    /// three-stage conditional-power comparator.
    ConditionalPower,
}

/// Which information rule sizes the second stage of a four-stage test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourStageN2 {
    /// n(θ̂) with u₁ in the Type II term, capped at M (as in the three-stage
    /// test; the initial maximum M targets u₁).
    #[default]
    ThreeStage,
    /// ñ(θ̂) with u₂ in the Type II term, capped at M.
    Tilde,
}

/// Full specification of an adaptive test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub model: Model,
    /// Null boundary value u₀.
    pub u0: f64,
    /// First-stage size (per arm).
    pub m: u64,
    /// Maximum sample size (three-stage) or initial maximum (four-stage).
    #[serde(rename = "M")]
    pub max_n: u64,
    /// Third-stage cap M′ of the four-stage test (defaults to M̃).
    #[serde(rename = "M_prime", default, skip_serializing_if = "Option::is_none")]
    pub max_n_prime: Option<u64>,
    /// Extended maximum M̃; its presence makes the test four-stage.
    #[serde(rename = "M_tilde", default, skip_serializing_if = "Option::is_none")]
    pub max_n_tilde: Option<u64>,
    pub alpha: f64,
    pub alpha_tilde: f64,
    #[serde(default = "half")]
    pub eps: f64,
    #[serde(default = "half")]
    pub eps_tilde: f64,
    #[serde(default = "default_rho")]
    pub rho_m: f64,
    #[serde(default)]
    pub calibration: Calibration,
    /// Overrides the alternative implied by M.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u1: Option<f64>,
    /// Overrides the alternative implied by M̃ (four-stage).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u2: Option<f64>,
    #[serde(default)]
    pub sample_size_rule: SampleSizeRule,
    #[serde(default)]
    pub four_stage_n2: FourStageN2,
}

fn half() -> f64 {
    0.5
}

fn default_rho() -> f64 {
    0.1
}

/// Calibrated thresholds together with the alternatives they refer to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub b: f64,
    pub b_tilde: f64,
    pub c: f64,
    pub u1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u2: Option<f64>,
}

/// Which rule produced a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Interim rejection: u(θ̂) > u₀ and Λ₀ ≥ b.
    EarlyRejection,
    /// Interim futility stop: u(θ̂) below the futility alternative and Λ ≥ b̃.
    Futility,
    /// Neither interim boundary crossed.
    Continuation,
    /// Rejection at the maximum sample size: u(θ̂) > u₀ and Λ₀ ≥ c.
    FinalRejection,
    /// Acceptance at the maximum sample size.
    FinalAcceptance,
}

/// Outcome of an analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Continue { next_n: u64 },
    RejectH0,
    AcceptH0,
}

impl Action {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Action::Continue { .. })
    }
}

/// A decision with the statistics that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub rule: Rule,
    /// Index of the rule set applied (1-based; skipped stages count).
    pub stage: usize,
    /// Cumulative (per-arm) sample size at the analysis.
    pub n: u64,
    /// GLR against u₀.
    pub glr_null: Glr,
    /// GLR against the futility alternative (u₁, or u₂ for four-stage).
    pub glr_alt: Glr,
}

/// State of a running trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    /// Rule-set index of the pending analysis (1-based).
    pub stage: usize,
    /// Cumulative sufficient statistics so far.
    pub stat: SufficientStat,
    /// Cumulative sizes decided so far; the last entry is pending.
    pub planned_n: Vec<u64>,
    /// Number of completed analyses.
    pub analyses: usize,
    pub terminal: Option<Decision>,
}

impl TrialState {
    /// Observations still to be collected (per arm) for the pending stage.
    pub fn pending_increment(&self) -> Option<u64> {
        if self.terminal.is_some() {
            return None;
        }
        self.planned_n.last().map(|n| n - self.stat.size())
    }
}

/// `n(θ)`: the smaller of the two Hoeffding-type sample sizes
/// |log α| / I₀(θ) and |log α̃| / I_alt(θ). Returns +∞ when both
/// informations vanish (impossible for u_alt ≠ u₀).
pub fn hoeffding_sample_size(
    model: &Model,
    theta_hat: &Param,
    u0: f64,
    u_alt: f64,
    alpha: f64,
    alpha_tilde: f64,
) -> Result<f64> {
    let i0 = model.constrained_info(theta_hat, u0)?;
    let i1 = model.constrained_info(theta_hat, u_alt)?;
    let t0 = if i0 > 0.0 { alpha.ln().abs() / i0 } else { f64::INFINITY };
    let t1 = if i1 > 0.0 { alpha_tilde.ln().abs() / i1 } else { f64::INFINITY };
    Ok(t0.min(t1))
}

/// `lo ∨ (hi ∧ ⌈(1 + ρ) n⌉)`, with +∞ mapping to `hi`.
pub fn inflated_size(n: f64, rho: f64, lo: u64, hi: u64) -> u64 {
    let v = (1.0 + rho) * n;
    let capped = if v.is_finite() && v < hi as f64 {
        guarded_ceil(v) as u64
    } else {
        hi
    };
    capped.clamp(lo, hi)
}

/// The alternative u₁ at which the level-α fixed-sample test with `n`
/// observations has power 1 − α̃.
pub fn implied_alternative(model: &Model, n: u64, alpha: f64, alpha_tilde: f64, u0: f64) -> Result<f64> {
    let zsum = z_upper(alpha) + z_upper(alpha_tilde);
    let nf = n as f64;
    match model {
        Model::NormalKnownVar(m) => Ok(u0 + m.sigma2.sqrt() * zsum / nf.sqrt()),
        Model::TwoSampleNormalUnknownVar(m) => Ok(u0 + m.sigma0 * 2f64.sqrt() * zsum / nf.sqrt()),
        Model::Bernoulli(_) => implied_binomial(n, u0, alpha, alpha_tilde).map(|(p, _)| p),
        Model::TwoArmBernoulli(_) => {
            // Least favourable control rate: the difference whose smallest
            // per-pair information over q equals the fixed-sample requirement.
            let target = zsum * zsum / (2.0 * nf);
            let least = |d: f64| -> f64 {
                let (_, v) = golden_min(
                    |q| {
                        let p = q + d;
                        two_arm_null_info(p, q, u0)
                    },
                    1e-9,
                    1.0 - d - 1e-9,
                    1e-10,
                    300,
                );
                v
            };
            let hi = 1.0 - u0.max(0.0) - 1e-6;
            brent(|d| least(d) - target, u0 + 1e-6, hi, 1e-10, 200).map_err(|_| {
                Error::Infeasible(format!(
                    "no rate difference attains power {} with {n} subjects per arm",
                    1.0 - alpha_tilde
                ))
            })
        }
    }
}

fn two_arm_null_info(p: f64, q: f64, u0: f64) -> f64 {
    crate::expfam::two_arm_constrained(p, q, 1.0, 1.0, u0)
        .map(|(_, v)| v)
        .unwrap_or(f64::INFINITY)
}

/// Exact binomial implied alternative: with r the smallest critical value
/// satisfying P_{p₀}(S_n ≥ r) ≤ α, solves P_{p₁}(S_n ≥ r) = 1 − β.
/// Returns `(p₁, r)`.
pub fn implied_binomial(n: u64, p0: f64, alpha: f64, beta: f64) -> Result<(f64, u64)> {
    let r = (0..=n + 1)
        .find(|&r| binomial_sf(n, p0, r as i64) <= alpha)
        .expect("P(S ≥ n + 1) = 0 always qualifies");
    if r > n {
        return Err(Error::Infeasible(format!(
            "no level-{alpha} critical value exists for n = {n} at p0 = {p0}"
        )));
    }
    let p1 = brent(
        |p| binomial_sf(n, p, r as i64) - (1.0 - beta),
        p0,
        1.0 - 1e-12,
        1e-12,
        300,
    )
    .map_err(|_| Error::Infeasible(format!("power {} unattainable with n = {n}", 1.0 - beta)))?;
    Ok((p1, r))
}

/// A validated design with its resolved alternatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    spec: DesignSpec,
    u1: f64,
    u2: Option<f64>,
}

fn check_unit(value: f64, field: &str) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::spec(field, format!("must lie in (0, 1), got {value}")))
    }
}

impl DesignSpec {
    /// Structural and range validation with field-level errors.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !self.u0.is_finite() {
            return Err(Error::spec("u0", "must be finite"));
        }
        if self.m == 0 {
            return Err(Error::spec("m", "first-stage size must be positive"));
        }
        if self.m >= self.max_n {
            return Err(Error::spec("M", format!("must exceed m = {}", self.m)));
        }
        check_unit(self.alpha, "alpha")?;
        check_unit(self.alpha_tilde, "alpha_tilde")?;
        check_unit(self.eps, "eps")?;
        check_unit(self.eps_tilde, "eps_tilde")?;
        if !(self.rho_m >= 0.0 && self.rho_m.is_finite()) {
            return Err(Error::spec("rho_m", "inflation factor must be nonnegative"));
        }
        match (self.max_n_prime, self.max_n_tilde) {
            (Some(_), None) => {
                return Err(Error::spec("M_tilde", "M_prime requires M_tilde"));
            }
            (mp, Some(mt)) => {
                if mt <= self.max_n {
                    return Err(Error::spec("M_tilde", "must exceed M"));
                }
                let mp = mp.unwrap_or(mt);
                if mp <= self.max_n || mp > mt {
                    return Err(Error::spec("M_prime", "must lie in (M, M_tilde]"));
                }
            }
            (None, None) => {}
        }
        if let Some(u1) = self.u1 {
            if !(u1 > self.u0) {
                return Err(Error::spec("u1", "alternative must exceed u0"));
            }
        }
        if self.u2.is_some() && self.max_n_tilde.is_none() {
            return Err(Error::spec("u2", "only meaningful for four-stage designs"));
        }
        if self.sample_size_rule == SampleSizeRule::ConditionalPower {
            if !matches!(self.model, Model::NormalKnownVar(_)) {
                return Err(Error::spec(
                    "sample_size_rule",
                    "the conditional-power rule is defined for the normal mean model",
                ));
            }
            if self.max_n_tilde.is_some() {
                return Err(Error::spec("sample_size_rule", "conditional-power rule is three-stage only"));
            }
        }
        if let Calibration::MonteCarlo { reps, .. } = self.calibration {
            if reps < 1000 {
                return Err(Error::spec("calibration.reps", "at least 1000 replicates required"));
            }
        }
        if let Calibration::NormalApprox { nodes_per_piece } = self.calibration {
            if !(4..=512).contains(&nodes_per_piece) {
                return Err(Error::spec("calibration.nodes_per_piece", "must lie in 4..=512"));
            }
        }
        Ok(())
    }
}

impl Design {
    pub fn new(spec: DesignSpec) -> Result<Self> {
        spec.validate()?;
        let u1 = match spec.u1 {
            Some(u) => u,
            None => implied_alternative(&spec.model, spec.max_n, spec.alpha, spec.alpha_tilde, spec.u0)?,
        };
        let u2 = match spec.max_n_tilde {
            None => None,
            Some(mt) => Some(match spec.u2 {
                Some(u) => u,
                None => implied_alternative(&spec.model, mt, spec.alpha, spec.alpha_tilde, spec.u0)?,
            }),
        };
        if let Some(u2) = u2 {
            if !(u1 > u2 && u2 > spec.u0) {
                return Err(Error::spec("u2", format!("need u1 > u2 > u0, got u1 = {u1}, u2 = {u2}")));
            }
        }
        // Planning points must exist for both alternatives.
        spec.model.hypothesis_point(u1)?;
        if let Some(u2) = u2 {
            spec.model.hypothesis_point(u2)?;
        }
        Ok(Design { spec, u1, u2 })
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn model(&self) -> &Model {
        &self.spec.model
    }

    pub fn u0(&self) -> f64 {
        self.spec.u0
    }

    pub fn u1(&self) -> f64 {
        self.u1
    }

    pub fn u2(&self) -> Option<f64> {
        self.u2
    }

    pub fn m(&self) -> u64 {
        self.spec.m
    }

    pub fn is_four_stage(&self) -> bool {
        self.spec.max_n_tilde.is_some()
    }

    /// Number of rule sets (3 or 4).
    pub fn stages(&self) -> usize {
        if self.is_four_stage() {
            4
        } else {
            3
        }
    }

    /// Final (maximal) sample size: M, or M̃ for four-stage tests.
    pub fn cap(&self) -> u64 {
        self.spec.max_n_tilde.unwrap_or(self.spec.max_n)
    }

    /// Third-stage cap M′.
    pub fn max_n_prime(&self) -> Option<u64> {
        self.spec.max_n_tilde.map(|mt| self.spec.max_n_prime.unwrap_or(mt))
    }

    /// Alternative used by the futility rule: u₁, or u₂ for four-stage.
    pub fn u_fut(&self) -> f64 {
        self.u2.unwrap_or(self.u1)
    }

    /// Thresholds record with this design's alternatives attached.
    pub fn thresholds(&self, b: f64, b_tilde: f64, c: f64) -> Thresholds {
        Thresholds {
            b,
            b_tilde,
            c,
            u1: self.u1,
            u2: self.u2,
        }
    }

    fn estimate(&self, stat: &SufficientStat) -> Result<Param> {
        self.spec.model.glr_estimate(stat)
    }

    /// n(θ̂) with u₁ in the Type II term.
    pub fn n_theta(&self, theta_hat: &Param) -> Result<f64> {
        let s = &self.spec;
        hoeffding_sample_size(&s.model, theta_hat, s.u0, self.u1, s.alpha, s.alpha_tilde)
    }

    /// ñ(θ̂) with u₂ in the Type II term.
    pub fn n_tilde(&self, theta_hat: &Param) -> Result<f64> {
        let s = &self.spec;
        hoeffding_sample_size(&s.model, theta_hat, s.u0, self.u_fut(), s.alpha, s.alpha_tilde)
    }

    /// Cumulative size after the second stage, from first-stage data.
    pub fn second_stage_size(&self, stat: &SufficientStat) -> Result<u64> {
        let s = &self.spec;
        if let SampleSizeRule::ConditionalPower = s.sample_size_rule {
            return self.conditional_power_size(stat);
        }
        let th = self.estimate(stat)?;
        let n = if self.is_four_stage() && s.four_stage_n2 == FourStageN2::Tilde {
            self.n_tilde(&th)?
        } else {
            self.n_theta(&th)?
        };
        Ok(inflated_size(n, s.rho_m, s.m, s.max_n))
    }

    /// Cumulative size after the third stage of a four-stage test.
    pub fn third_stage_size(&self, stat: &SufficientStat, n2: u64) -> Result<u64> {
        let mp = self
            .max_n_prime()
            .ok_or_else(|| Error::Usage("third stage requested for a three-stage design".into()))?;
        let th = self.estimate(stat)?;
        Ok(inflated_size(self.n_tilde(&th)?, self.spec.rho_m, n2, mp))
    }

    /// Conditional-power sample size: the smallest n ≥ m at which the
    /// conditional probability, under θ̂, of ending above the fixed-sample
    /// critical value reaches 1 − α̃; for θ̂ ≤ θ₀ the Type II term alone.
    fn conditional_power_size(&self, stat: &SufficientStat) -> Result<u64> {
        let s = &self.spec;
        let sigma = match s.model {
            Model::NormalKnownVar(nm) => nm.sigma2.sqrt(),
            _ => unreachable!("validated"),
        };
        let m = stat.size();
        let sm = stat.sum[0];
        let th = sm / m as f64;
        conditional_power_rule(th, sm, m, s.max_n, s.u0, self.u1, sigma, s.alpha, s.alpha_tilde)
    }

    /// Decision at an analysis with cumulative statistics `stat`, applying
    /// rule set `stage`. For `Continue`, the next cumulative size skips
    /// any stage whose planned size would add no observations.
    pub fn evaluate(&self, th: &Thresholds, stage: usize, stat: &SufficientStat) -> Result<Decision> {
        let s = &self.spec;
        let n = stat.size();
        let glr_null = s.model.glr(stat, s.u0)?;
        let u_fut = th.u2.unwrap_or(th.u1);
        let glr_alt = s.model.glr(stat, u_fut)?;
        let mk = |action, rule| Decision {
            action,
            rule,
            stage,
            n,
            glr_null,
            glr_alt,
        };
        if n >= self.cap() {
            return Ok(if glr_null.u_hat > s.u0 && glr_null.lambda >= th.c {
                mk(Action::RejectH0, Rule::FinalRejection)
            } else {
                mk(Action::AcceptH0, Rule::FinalAcceptance)
            });
        }
        if glr_null.u_hat > s.u0 && glr_null.lambda >= th.b {
            return Ok(mk(Action::RejectH0, Rule::EarlyRejection));
        }
        if glr_alt.u_hat < u_fut && glr_alt.lambda >= th.b_tilde {
            return Ok(mk(Action::AcceptH0, Rule::Futility));
        }
        let (_, next_n) = self.next_stage(stage, stat)?;
        Ok(mk(Action::Continue { next_n }, Rule::Continuation))
    }

    /// Next rule-set index and cumulative size after a non-terminal
    /// analysis at `stage`.
    pub fn next_stage(&self, stage: usize, stat: &SufficientStat) -> Result<(usize, u64)> {
        let n = stat.size();
        let mut s = stage;
        loop {
            let next = match (self.is_four_stage(), s) {
                (false, 1) => self.second_stage_size(stat)?,
                (false, _) => self.spec.max_n,
                (true, 1) => self.second_stage_size(stat)?,
                (true, 2) => self.third_stage_size(stat, n)?,
                (true, _) => self.cap(),
            };
            s += 1;
            if next > n {
                return Ok((s, next));
            }
        }
    }

    /// State before any data.
    pub fn initial_state(&self) -> TrialState {
        let zero = SufficientStat::default();
        TrialState {
            stage: 1,
            stat: zero,
            planned_n: vec![self.spec.m],
            analyses: 0,
            terminal: None,
        }
    }

    /// Checks that `increment` covers exactly the pending stage.
    pub fn check_increment(&self, state: &TrialState, inc: &SufficientStat) -> Result<()> {
        let want = state
            .pending_increment()
            .ok_or_else(|| Error::Usage("trial has already terminated".into()))?;
        let arms = self.spec.model.arms();
        let ok = inc.n[0] == want && if arms == 2 { inc.n[1] == want } else { inc.n[1] == 0 };
        if !ok {
            return Err(Error::Usage(format!(
                "stage {} expects {want} new observations per arm, got {:?}",
                state.stage,
                &inc.n[..arms]
            )));
        }
        let cum = state.stat.add(inc);
        // Surface data errors (e.g. more successes than subjects) here.
        self.spec.model.mle(&cum)?;
        Ok(())
    }

    /// Adds one stage of data and applies the decision rules.
    pub fn step(&self, th: &Thresholds, state: &TrialState, inc: &SufficientStat) -> Result<(TrialState, Decision)> {
        self.check_increment(state, inc)?;
        let stat = state.stat.add(inc);
        let decision = self.evaluate(th, state.stage, &stat)?;
        let mut next = TrialState {
            stage: state.stage,
            stat,
            planned_n: state.planned_n.clone(),
            analyses: state.analyses + 1,
            terminal: None,
        };
        match decision.action {
            Action::Continue { next_n } => {
                let (stage, _) = self.next_stage(state.stage, &stat)?;
                next.stage = stage;
                next.planned_n.push(next_n);
            }
            _ => next.terminal = Some(decision),
        }
        Ok((next, decision))
    }
}

/// Conditional-power sample-size rule for the normal mean model.
///
/// For θ̂ > θ₀ returns the smallest n ∈ [m, M] such that
/// P_θ̂(S_n ≥ θ₀n + z_α σ √n | S_m) ≥ 1 − α̃ (M when none qualifies);
/// otherwise m ∨ ⌈|log α̃| / I(θ̂, θ₁)⌉, capped at M.
#[allow(clippy::too_many_arguments)]
pub fn conditional_power_rule(
    theta_hat: f64,
    s_m: f64,
    m: u64,
    max_n: u64,
    theta0: f64,
    theta1: f64,
    sigma: f64,
    alpha: f64,
    alpha_tilde: f64,
) -> Result<u64> {
    let za = z_upper(alpha);
    if theta_hat > theta0 {
        for n in m..=max_n {
            let crit = theta0 * n as f64 + za * sigma * (n as f64).sqrt();
            let cp = if n == m {
                if s_m >= crit {
                    1.0
                } else {
                    0.0
                }
            } else {
                let k = (n - m) as f64;
                norm_sf((crit - s_m - k * theta_hat) / (sigma * k.sqrt()))
            };
            if cp >= 1.0 - alpha_tilde {
                return Ok(n);
            }
        }
        Ok(max_n)
    } else {
        let i1 = (theta_hat - theta1).powi(2) / (2.0 * sigma * sigma);
        let n = alpha_tilde.ln().abs() / i1;
        let v = if n.is_finite() && n < max_n as f64 {
            guarded_ceil(n) as u64
        } else {
            max_n
        };
        Ok(v.clamp(m, max_n))
    }
}

/// Per-stage summary of a binomial three-stage design's decision regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    /// First-stage success count (treatment arm for two-arm designs is not
    /// supported; single-arm only).
    pub s1: u64,
    pub action: Action,
    pub rule: Rule,
    /// Second-stage region when continuing to an interim analysis below M.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage2: Option<StageRegion>,
}

/// Acceptance/rejection cut-offs of an analysis at cumulative size `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRegion {
    pub n: u64,
    /// Largest cumulative success count that stops for acceptance.
    pub accept_max: Option<u64>,
    /// Smallest cumulative success count that rejects H₀.
    pub reject_min: Option<u64>,
}

/// Decision table of a single-arm binomial three-stage design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub m: u64,
    pub max_n: u64,
    pub rows: Vec<DecisionRow>,
    /// Smallest S_M rejecting H₀ at the final analysis.
    pub final_reject_min: Option<u64>,
}

impl Design {
    /// Enumerates the decision regions of a single-arm binomial
    /// three-stage design.
    pub fn decision_table(&self, th: &Thresholds) -> Result<DecisionTable> {
        if !matches!(self.spec.model, Model::Bernoulli(_)) || self.is_four_stage() {
            return Err(Error::Usage(
                "decision tables are available for single-arm binomial three-stage designs".into(),
            ));
        }
        let (m, cap) = (self.spec.m, self.cap());
        let region = |n: u64, stage: usize, lo: u64, hi: u64| -> Result<StageRegion> {
            let mut accept_max = None;
            let mut reject_min = None;
            for s in lo..=hi {
                let d = self.evaluate(th, stage, &SufficientStat::one_arm(n, s as f64))?;
                match d.action {
                    Action::AcceptH0 => accept_max = Some(s),
                    Action::RejectH0 if reject_min.is_none() => reject_min = Some(s),
                    _ => {}
                }
            }
            Ok(StageRegion {
                n,
                accept_max,
                reject_min,
            })
        };
        let mut rows = Vec::with_capacity(m as usize + 1);
        for s1 in 0..=m {
            let d = self.evaluate(th, 1, &SufficientStat::one_arm(m, s1 as f64))?;
            let stage2 = match d.action {
                Action::Continue { next_n } if next_n < cap => {
                    Some(region(next_n, 2, s1, s1 + next_n - m)?)
                }
                _ => None,
            };
            rows.push(DecisionRow {
                s1,
                action: d.action,
                rule: d.rule,
                stage2,
            });
        }
        let fin = region(cap, 3, 0, cap)?;
        Ok(DecisionTable {
            m,
            max_n: cap,
            rows,
            final_reject_min: fin.reject_min,
        })
    }
}

/// Information separating two hypothesis values under the planning
/// model, expressed on the canonical (unit-variance normal) drift scale:
/// θ_eff(u) = sign(u − u₀)·{2·inf I(h(u), ·)}^{1/2}.
pub fn canonical_drift(model: &Model, u: f64, u0: f64) -> Result<f64> {
    let i = model.hypothesis_separation(u, u0)?;
    Ok((u - u0).signum() * (2.0 * i).sqrt())
}
