//! Reference designs the adaptive tests are benchmarked against.
//!
//! Each comparator is stepped like an adaptive design: the state names the
//! pending increment, [`Comparator::step`] consumes it and returns an
//! [`Action`]. The same loop drives simulation through
//! [`Procedure`](crate::evaluation::Procedure).

pub mod group_sequential;
pub mod simon;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::calibrate;
use crate::design::{conditional_power_rule, Action, Design, DesignSpec, SampleSizeRule, Thresholds, TrialState};
use crate::error::{Error, Result};
use crate::evaluation::{Adaptive, Outcome, Procedure};
use crate::expfam::{ExponentialFamily, Model, Param, SufficientStat};
use crate::numerics::{guarded_ceil, norm_sf, t_upper, z_upper};

pub use group_sequential::{obf_constant, upper_crossing};
pub use simon::{simon_oc, simon_search, SimonDesign, SimonOc};

fn one() -> f64 {
    1.0
}

/// Comparator designs, tagged by `comparator` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "comparator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComparatorSpec {
    /// Fixed sample size test: reject when the signed-root GLR statistic
    /// (standard normal scale) at n is at least `critical_value`.
    Fss {
        model: Model,
        u0: f64,
        n: u64,
        critical_value: f64,
    },
    /// Simon two-stage design: accept if S_m ≤ r₁, else reject at M if
    /// S_M > r₂.
    Simon2 {
        p0: f64,
        m: u64,
        #[serde(rename = "M")]
        max_n: u64,
        r1: u64,
        r2: u64,
    },
    /// Two-stage randomized binomial design: stop for futility if Z₁ ≤ y₁
    /// after n1 per arm, else reject at n2_total per arm if Z₂ > y₂.
    Thall2 {
        n1: u64,
        n2_total: u64,
        y1: f64,
        y2: f64,
        /// Pooled instead of unpooled variance in the Z statistics.
        #[serde(default)]
        pooled: bool,
    },
    /// Stein's two-stage t procedure for μ_X − μ_Y.
    Stein2 {
        m: u64,
        alpha: f64,
        alpha_tilde: f64,
        delta: f64,
        /// Optional cap on the per-arm total.
        #[serde(default, rename = "M_cap", skip_serializing_if = "Option::is_none")]
        max_n: Option<u64>,
    },
    /// Two-stage conditional-power test for a normal mean: futility stop
    /// unless θ̂_m ≥ θ₀ + δ, otherwise the conditional-power size.
    CondPower2 {
        #[serde(default = "one")]
        sigma2: f64,
        #[serde(default)]
        theta0: f64,
        m: u64,
        #[serde(rename = "M_cap")]
        max_n: u64,
        delta_futility: f64,
        alpha: f64,
        alpha_tilde: f64,
    },
    /// Three-stage conditional-power test: the adaptive design with the
    /// conditional-power second-stage rule.
    CondPower3 {
        design: DesignSpec,
        /// Calibrated by the design's method when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thresholds: Option<Thresholds>,
    },
    /// Weighted adaptive group sequential test with mid-course sample
    /// size update (normal mean, θ₀ = 0 after centring at `theta0`).
    Chw {
        #[serde(default = "one")]
        sigma2: f64,
        #[serde(default)]
        theta0: f64,
        /// Cumulative group sizes of the original plan; the last is M.
        groups: Vec<u64>,
        /// Analysis after which the update may happen.
        #[serde(rename = "L")]
        update_at: usize,
        theta1: f64,
        #[serde(rename = "M_tilde")]
        max_n_tilde: u64,
        alpha: f64,
    },
    /// One-sided O'Brien–Fleming test with stochastic-curtailment futility.
    ObfSc {
        #[serde(default = "one")]
        sigma2: f64,
        #[serde(default)]
        theta0: f64,
        /// Cumulative group sizes.
        groups: Vec<u64>,
        alpha: f64,
        gamma: f64,
        reference_alt: f64,
    },
}

/// A comparator decision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparatorDecision {
    pub action: Action,
    /// Analysis index (1-based).
    pub stage: u32,
    pub n: u64,
    /// The test statistic compared with the boundary at this analysis.
    pub statistic: f64,
}

/// Progress of a comparator trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparatorState {
    pub analyses: u32,
    pub stat: SufficientStat,
    /// Remaining planned cumulative sizes; the first is pending.
    pub plan: Vec<u64>,
    /// Procedure memory: CHW weighted sum, Stein first-stage variance.
    pub memo: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<TrialState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal: Option<ComparatorDecision>,
}

impl ComparatorState {
    /// Observations (per arm) expected at the next analysis.
    pub fn pending_increment(&self) -> Option<u64> {
        if self.terminal.is_some() {
            return None;
        }
        if let Some(t) = &self.inner {
            return t.pending_increment();
        }
        self.plan.first().map(|&n| n - self.stat.size())
    }
}

/// A validated comparator with its precomputed constants.
#[derive(Clone, Debug)]
pub struct Comparator {
    pub spec: ComparatorSpec,
    model: Model,
    /// Group sequential critical values on the Z scale.
    bounds: Vec<f64>,
    adaptive: Option<Adaptive>,
}

fn check_groups(groups: &[u64]) -> Result<()> {
    if groups.is_empty() || groups[0] == 0 || groups.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::spec("groups", "cumulative group sizes must be positive and increasing"));
    }
    Ok(())
}

fn check_unit(v: f64, field: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::spec(field, format!("{v} is not in (0, 1)")))
    }
}

fn obf_bounds(groups: &[u64], alpha: f64) -> Result<Vec<f64>> {
    let total = *groups.last().unwrap() as f64;
    let t: Vec<f64> = groups.iter().map(|&g| g as f64 / total).collect();
    let c = obf_constant(&t, alpha)?;
    Ok(t.iter().map(|tk| c / tk.sqrt()).collect())
}

/// Difference-of-proportions Z statistic (treatment minus control).
pub fn two_proportion_z(stat: &SufficientStat, pooled: bool) -> f64 {
    let (nx, ny) = (stat.n[0] as f64, stat.n[1] as f64);
    let (px, py) = (stat.sum[0] / nx, stat.sum[1] / ny);
    let diff = px - py;
    let var = if pooled {
        let p = (stat.sum[0] + stat.sum[1]) / (nx + ny);
        p * (1.0 - p) * (1.0 / nx + 1.0 / ny)
    } else {
        px * (1.0 - px) / nx + py * (1.0 - py) / ny
    };
    ratio_or_signed_inf(diff, var.sqrt())
}

fn ratio_or_signed_inf(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else if num < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// Pooled unbiased variance of a two-sample statistic.
pub fn pooled_sample_variance(stat: &SufficientStat) -> f64 {
    let (nx, ny) = (stat.n[0] as f64, stat.n[1] as f64);
    let ssx = stat.sum[2] - stat.sum[0] * stat.sum[0] / nx;
    let ssy = stat.sum[3] - stat.sum[1] * stat.sum[1] / ny;
    ((ssx + ssy) / (nx + ny - 2.0)).max(0.0)
}

/// Stein's total size per arm: max{m, ⌈2s²(t_α + t_α̃)²/δ²⌉} with t
/// quantiles on 2(m − 1) degrees of freedom.
pub fn stein_sample_size(s2: f64, m: u64, alpha: f64, alpha_tilde: f64, delta: f64) -> u64 {
    let df = 2.0 * (m as f64 - 1.0);
    let t = t_upper(alpha, df) + t_upper(alpha_tilde, df);
    let n = 2.0 * s2 * t * t / (delta * delta);
    if !n.is_finite() || n > u64::MAX as f64 / 2.0 {
        return u64::MAX / 2;
    }
    (guarded_ceil(n) as u64).max(m)
}

/// The new maximum M̃ ∧ M(θ₁/θ̂)² of the weighted adaptive test; the sign
/// of θ̂ plays no role.
pub fn chw_new_maximum(theta_hat: f64, theta1: f64, max_n: u64, max_n_tilde: u64) -> u64 {
    let v = max_n as f64 * (theta1 / theta_hat).powi(2);
    if !v.is_finite() || v >= max_n_tilde as f64 {
        max_n_tilde
    } else {
        guarded_ceil(v) as u64
    }
}

impl Comparator {
    pub fn new(spec: ComparatorSpec) -> Result<Self> {
        let mut bounds = Vec::new();
        let mut adaptive = None;
        let model = match &spec {
            ComparatorSpec::Fss { model, n, .. } => {
                model.validate()?;
                if *n == 0 {
                    return Err(Error::spec("n", "must be positive"));
                }
                *model
            }
            ComparatorSpec::Simon2 { p0, m, max_n, r1, r2 } => {
                check_unit(*p0, "p0")?;
                if !(m < max_n && r1 <= m && r2 <= max_n && *m > 0) {
                    return Err(Error::spec("r1", "need 0 < m < M, r1 ≤ m and r2 ≤ M"));
                }
                Model::bernoulli()
            }
            ComparatorSpec::Thall2 { n1, n2_total, y1, y2, .. } => {
                if !(0 < *n1 && n1 < n2_total) {
                    return Err(Error::spec("n2_total", "need 0 < n1 < n2_total"));
                }
                if !(y1.is_finite() && y2.is_finite()) {
                    return Err(Error::spec("y1", "thresholds must be finite"));
                }
                Model::two_arm_bernoulli(0.5)
            }
            ComparatorSpec::Stein2 { m, alpha, alpha_tilde, delta, max_n } => {
                if *m < 2 {
                    return Err(Error::Usage("Stein's procedure needs m ≥ 2 per arm to estimate the variance".into()));
                }
                check_unit(*alpha, "alpha")?;
                check_unit(*alpha_tilde, "alpha_tilde")?;
                if !(*delta > 0.0) {
                    return Err(Error::spec("delta", "must be positive"));
                }
                if max_n.is_some_and(|mx| mx < *m) {
                    return Err(Error::spec("M_cap", "must be at least m"));
                }
                Model::two_sample_normal(1.0)
            }
            ComparatorSpec::CondPower2 { sigma2, m, max_n, delta_futility, alpha, alpha_tilde, .. } => {
                check_unit(*alpha, "alpha")?;
                check_unit(*alpha_tilde, "alpha_tilde")?;
                if !(*m > 0 && m < max_n) {
                    return Err(Error::spec("M_cap", "need 0 < m < M_cap"));
                }
                if !(*delta_futility >= 0.0) {
                    return Err(Error::spec("delta_futility", "must be nonnegative"));
                }
                let model = Model::normal(*sigma2);
                model.validate()?;
                model
            }
            ComparatorSpec::CondPower3 { design, thresholds } => {
                let mut spec = design.clone();
                spec.sample_size_rule = SampleSizeRule::ConditionalPower;
                let d = Design::new(spec)?;
                let th = match thresholds {
                    Some(t) => *t,
                    None => calibrate(&d)?.thresholds,
                };
                let model = *d.model();
                adaptive = Some(Adaptive::new(d, th));
                model
            }
            ComparatorSpec::Chw { sigma2, groups, update_at, theta1, max_n_tilde, alpha, .. } => {
                check_groups(groups)?;
                check_unit(*alpha, "alpha")?;
                if *update_at == 0 || *update_at >= groups.len() {
                    return Err(Error::spec("L", "update must follow an interim analysis"));
                }
                if *max_n_tilde < *groups.last().unwrap() {
                    return Err(Error::spec("M_tilde", "must be at least the planned maximum"));
                }
                if !(*theta1 > 0.0) {
                    return Err(Error::spec("theta1", "must be positive"));
                }
                bounds = obf_bounds(groups, *alpha)?;
                let model = Model::normal(*sigma2);
                model.validate()?;
                model
            }
            ComparatorSpec::ObfSc { sigma2, groups, alpha, gamma, .. } => {
                check_groups(groups)?;
                check_unit(*alpha, "alpha")?;
                if !(*gamma > 0.5 && *gamma <= 1.0) {
                    return Err(Error::spec("gamma", "must lie in (0.5, 1]"));
                }
                bounds = obf_bounds(groups, *alpha)?;
                let model = Model::normal(*sigma2);
                model.validate()?;
                model
            }
        };
        Ok(Comparator {
            spec,
            model,
            bounds,
            adaptive,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Group sequential critical values (Z scale), for CHW and OBF.
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn max_stages(&self) -> usize {
        match &self.spec {
            ComparatorSpec::Fss { .. } => 1,
            ComparatorSpec::Simon2 { .. }
            | ComparatorSpec::Thall2 { .. }
            | ComparatorSpec::Stein2 { .. }
            | ComparatorSpec::CondPower2 { .. } => 2,
            ComparatorSpec::CondPower3 { .. } => 3,
            ComparatorSpec::Chw { groups, .. } | ComparatorSpec::ObfSc { groups, .. } => groups.len(),
        }
    }

    pub fn initial_state(&self) -> ComparatorState {
        let first = match &self.spec {
            ComparatorSpec::Fss { n, .. } => vec![*n],
            ComparatorSpec::Simon2 { m, max_n, .. } => vec![*m, *max_n],
            ComparatorSpec::Thall2 { n1, n2_total, .. } => vec![*n1, *n2_total],
            ComparatorSpec::Stein2 { m, .. } | ComparatorSpec::CondPower2 { m, .. } => vec![*m],
            ComparatorSpec::CondPower3 { .. } => vec![],
            ComparatorSpec::Chw { groups, .. } | ComparatorSpec::ObfSc { groups, .. } => groups.clone(),
        };
        ComparatorState {
            analyses: 0,
            stat: SufficientStat::default(),
            plan: first,
            memo: 0.0,
            inner: self.adaptive.as_ref().map(|a| a.design.initial_state()),
            terminal: None,
        }
    }

    /// Adds one stage of data and applies the comparator's rules.
    pub fn step(&self, state: &ComparatorState, inc: &SufficientStat) -> Result<(ComparatorState, ComparatorDecision)> {
        let want = state
            .pending_increment()
            .ok_or_else(|| Error::Usage("trial has already terminated".into()))?;
        let arms = self.model.arms();
        if inc.n[0] != want || (arms == 2 && inc.n[1] != want) {
            return Err(Error::Usage(format!(
                "stage {} expects {want} new observations per arm, got {:?}",
                state.analyses + 1,
                &inc.n[..arms]
            )));
        }
        let mut next = state.clone();
        next.analyses += 1;
        next.stat = state.stat.add(inc);
        let stage = next.analyses;
        let n = next.stat.size();
        let stat = next.stat;
        let done = |action: Action, statistic: f64| ComparatorDecision {
            action,
            stage,
            n,
            statistic,
        };
        let cont = |next_n: u64, statistic: f64| ComparatorDecision {
            action: Action::Continue { next_n },
            stage,
            n,
            statistic,
        };
        let verdict = |reject: bool| if reject { Action::RejectH0 } else { Action::AcceptH0 };

        let decision = match &self.spec {
            ComparatorSpec::Fss { u0, critical_value, .. } => {
                let z = self.model.glr(&stat, *u0)?.z;
                done(verdict(z >= *critical_value), z)
            }
            ComparatorSpec::Simon2 { m, r1, r2, .. } => {
                let s = stat.sum[0];
                if n == *m {
                    if s <= *r1 as f64 {
                        done(Action::AcceptH0, s)
                    } else {
                        next.plan.remove(0);
                        cont(next.plan[0], s)
                    }
                } else {
                    done(verdict(s > *r2 as f64), s)
                }
            }
            ComparatorSpec::Thall2 { n1, y1, y2, pooled, .. } => {
                let z = two_proportion_z(&stat, *pooled);
                if n == *n1 {
                    if z <= *y1 {
                        done(Action::AcceptH0, z)
                    } else {
                        next.plan.remove(0);
                        cont(next.plan[0], z)
                    }
                } else {
                    done(verdict(z > *y2), z)
                }
            }
            ComparatorSpec::Stein2 { m, alpha, alpha_tilde, delta, max_n } => {
                if stage == 1 {
                    next.memo = pooled_sample_variance(&stat);
                    let mut total = stein_sample_size(next.memo, *m, *alpha, *alpha_tilde, *delta);
                    if let Some(cap) = max_n {
                        total = total.min(*cap);
                    }
                    next.plan = vec![total];
                }
                let df = 2.0 * (*m as f64 - 1.0);
                let t = ratio_or_signed_inf(
                    stat.sum[0] / n as f64 - stat.sum[1] / n as f64,
                    (2.0 * next.memo / n as f64).sqrt(),
                );
                if n >= next.plan[0] {
                    done(verdict(t >= t_upper(*alpha, df)), t)
                } else {
                    cont(next.plan[0], t)
                }
            }
            ComparatorSpec::CondPower2 { sigma2, theta0, m, max_n, delta_futility, alpha, alpha_tilde } => {
                let sigma = sigma2.sqrt();
                let za = z_upper(*alpha);
                let s = stat.sum[0];
                let crit = theta0 * n as f64 + za * sigma * (n as f64).sqrt();
                let z = (s - theta0 * n as f64) / (sigma * (n as f64).sqrt());
                if stage == 1 {
                    let theta_hat = s / *m as f64;
                    if theta_hat < theta0 + delta_futility {
                        done(Action::AcceptH0, z)
                    } else {
                        let theta1 = theta0 + delta_futility.max(f64::EPSILON);
                        let n2 = conditional_power_rule(theta_hat, s, *m, *max_n, *theta0, theta1, sigma, *alpha, *alpha_tilde)?;
                        if n2 <= n {
                            done(verdict(s >= crit), z)
                        } else {
                            next.plan = vec![n2];
                            cont(n2, z)
                        }
                    }
                } else {
                    done(verdict(s >= crit), z)
                }
            }
            ComparatorSpec::CondPower3 { .. } => {
                let a = self.adaptive.as_ref().expect("constructed with the design");
                let inner = state.inner.as_ref().expect("initialised with the design");
                let (ts, d) = a.design.step(&a.thresholds, inner, inc)?;
                next.inner = Some(ts);
                ComparatorDecision {
                    action: d.action,
                    stage,
                    n,
                    statistic: d.glr_null.z,
                }
            }
            ComparatorSpec::Chw { sigma2, theta0, groups, update_at, theta1, max_n_tilde, .. } => {
                let sigma = sigma2.sqrt();
                let k = stage as usize;
                let total = *groups.last().unwrap() as f64;
                let t_prev = if k == 1 { 0.0 } else { groups[k - 2] as f64 / total };
                let t_k = groups[k - 1] as f64 / total;
                let z_inc = (inc.sum[0] - theta0 * inc.n[0] as f64) / (sigma * (inc.n[0] as f64).sqrt());
                next.memo += (t_k - t_prev).sqrt() * z_inc;
                let zw = next.memo / t_k.sqrt();
                next.plan.remove(0);
                if zw >= self.bounds[k - 1] {
                    done(Action::RejectH0, zw)
                } else if next.plan.is_empty() {
                    done(Action::AcceptH0, zw)
                } else if k == *update_at {
                    let m_orig = *groups.last().unwrap();
                    let s = stat.sum[0] - theta0 * n as f64;
                    let theta_hat = s / n as f64;
                    let rest = (m_orig - n) as f64;
                    let crit = self.bounds[groups.len() - 1] * sigma * total.sqrt();
                    let cp = |th: f64| norm_sf((crit - s - th * rest) / (sigma * rest.sqrt()));
                    let ratio = cp(theta_hat) / cp(*theta1);
                    if ratio > 1.0 || ratio < 0.8 || !ratio.is_finite() {
                        let new_max = chw_new_maximum(theta_hat, *theta1, m_orig, *max_n_tilde);
                        if new_max <= n {
                            // The update asks for no more data: stop with
                            // the current boundary decision.
                            done(Action::AcceptH0, zw)
                        } else {
                            let span = 1.0 - t_k;
                            let mut prev = n;
                            next.plan = groups[k..]
                                .iter()
                                .map(|&g| {
                                    let f = (g as f64 / total - t_k) / span;
                                    let v = (n + ((new_max - n) as f64 * f).round() as u64).max(prev + 1);
                                    prev = v;
                                    v
                                })
                                .collect();
                            cont(next.plan[0], zw)
                        }
                    } else {
                        cont(next.plan[0], zw)
                    }
                } else {
                    cont(next.plan[0], zw)
                }
            }
            ComparatorSpec::ObfSc { sigma2, theta0, groups, gamma, reference_alt, .. } => {
                let sigma = sigma2.sqrt();
                let k = stage as usize;
                let s = stat.sum[0] - theta0 * n as f64;
                let z = s / (sigma * (n as f64).sqrt());
                next.plan.remove(0);
                if z >= self.bounds[k - 1] {
                    done(Action::RejectH0, z)
                } else if next.plan.is_empty() {
                    done(Action::AcceptH0, z)
                } else {
                    let total = *groups.last().unwrap() as f64;
                    let rest = total - n as f64;
                    let crit = self.bounds[groups.len() - 1] * sigma * total.sqrt();
                    let cp = norm_sf((crit - s - (reference_alt - theta0) * rest) / (sigma * rest.sqrt()));
                    if cp < 1.0 - gamma {
                        done(Action::AcceptH0, z)
                    } else {
                        cont(next.plan[0], z)
                    }
                }
            }
        };
        if decision.action.is_terminal() {
            next.terminal = Some(decision);
            next.plan.clear();
        }
        Ok((next, decision))
    }
}

impl Procedure for Comparator {
    fn coordinates(&self) -> Vec<String> {
        self.model.coordinate_names().iter().map(|s| s.to_string()).collect()
    }

    fn max_stages(&self) -> usize {
        Comparator::max_stages(self)
    }

    fn run(&self, theta: &Param, rng: &mut ChaCha8Rng) -> Result<Outcome> {
        if let Some(a) = &self.adaptive {
            return a.run(theta, rng);
        }
        let mut state = self.initial_state();
        while let Some(k) = state.pending_increment() {
            let inc = self.model.sample_increment(theta, k, rng);
            let (next, d) = self.step(&state, &inc)?;
            if d.action.is_terminal() {
                return Ok(Outcome {
                    reject: d.action == Action::RejectH0,
                    n: d.n,
                    stages: next.analyses,
                });
            }
            state = next;
        }
        Err(Error::Numeric("comparator ended without a terminal decision".into()))
    }
}
