//! Asymptotic-efficiency diagnostics.
//!
//! The lower bound for the expected sample size of any test that takes
//! between m and M observations with error probabilities α and α̃ is
//!
//! ```text
//! m ∨ { M ∧ |log α| / (I₀(θ) ∨ I₁(θ)) },   I_j(θ) = inf_{u(λ)=u_j} I(θ, λ),
//! ```
//!
//! (with M̃ and u₂ for the four-stage test). The adaptive GLR tests attain
//! it asymptotically as α → 0 with m and M proportional to |log α|, while
//! the three-stage conditional-power test needs |log α|/I(η_θ, θ₀) instead
//! of |log α|/I(θ, θ₀), where I(η_θ, θ₀) = I(η_θ, θ).
//!
//! [`efficiency_diagnostic`] scales a base design along a sequence of α
//! values (m, M, M̃ ∝ |log α| and log α̃ ∝ log α), calibrates each member,
//! simulates its expected sample size and reports the ratio to the bound.

use serde::{Deserialize, Serialize};

use crate::calibration::calibrate_normal_approx;
use crate::design::{Calibration, Design, DesignSpec, SampleSizeRule, Thresholds};
use crate::error::{Error, Result};
use crate::evaluation::{simulate_oc, Adaptive};
use crate::expfam::{ExponentialFamily, Model, Param};

/// Tolerance of the η_θ bisection.
pub const ETA_TOL: f64 = 1e-10;

/// Default α sequence of the diagnostics.
pub const DEFAULT_ALPHAS: [f64; 3] = [0.05, 0.01, 0.001];

/// The point η strictly between θ₀ and θ with I(η, θ₀) = I(η, θ), for
/// one-parameter models.
pub fn eta_theta(model: &Model, theta0: f64, theta: f64) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::Usage(format!("η_θ is defined for one-parameter models, not {}", model.family())));
    }
    if !(theta > theta0) {
        return Err(Error::Usage(format!("η_θ needs θ > θ₀, got θ = {theta}, θ₀ = {theta0}")));
    }
    let (p0, p1) = (Param::scalar(theta0), Param::scalar(theta));
    let g = |eta: f64| -> Result<f64> {
        let e = Param::scalar(eta);
        Ok(model.kl(&e, &p0)? - model.kl(&e, &p1)?)
    };
    // g < 0 near θ₀ and g > 0 near θ; plain bisection.
    let (mut lo, mut hi) = (theta0, theta);
    while hi - lo > ETA_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Lower bound m ∨ {cap ∧ |log α|/(I₀(θ) ∨ I_alt(θ))}.
pub fn hoeffding_bound(model: &Model, theta: &Param, u0: f64, u_alt: f64, alpha: f64, m: u64, cap: u64) -> Result<f64> {
    let i0 = model.constrained_info(theta, u0)?;
    let i1 = model.constrained_info(theta, u_alt)?;
    let inner = (cap as f64).min(alpha.ln().abs() / i0.max(i1));
    Ok((m as f64).max(inner))
}

/// Asymptotic expected sample size of the three-stage conditional-power
/// test: m ∨ {M ∧ |log α|/I(η_θ, θ₀)} above θ₀, and the fallback size
/// max{m, ⌈|log α̃|/I(θ, θ₁)⌉} at or below θ₀.
pub fn cond_power_asymptotic(model: &Model, theta: f64, theta0: f64, theta1: f64, alpha: f64, alpha_tilde: f64, m: u64, max_n: u64) -> Result<f64> {
    if theta > theta0 {
        let eta = eta_theta(model, theta0, theta)?;
        let i = model.kl(&Param::scalar(eta), &Param::scalar(theta0))?;
        Ok((m as f64).max((max_n as f64).min(alpha.ln().abs() / i)))
    } else {
        let i = model.kl(&Param::scalar(theta), &Param::scalar(theta1))?;
        Ok((m as f64).max((alpha_tilde.ln().abs() / i).ceil()))
    }
}

/// Proportionality constants of a scaled design sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// m / |log α|.
    pub a: f64,
    /// M / |log α|.
    #[serde(rename = "A")]
    pub big_a: f64,
    /// M̃ / |log α| (four-stage).
    #[serde(rename = "A_tilde", skip_serializing_if = "Option::is_none")]
    pub big_a_tilde: Option<f64>,
    /// log α̃ / log α.
    pub log_ratio: f64,
}

impl Scaling {
    pub fn of(spec: &DesignSpec) -> Self {
        let l = spec.alpha.ln().abs();
        Scaling {
            a: spec.m as f64 / l,
            big_a: spec.max_n as f64 / l,
            big_a_tilde: spec.max_n_tilde.map(|v| v as f64 / l),
            log_ratio: spec.alpha_tilde.ln() / spec.alpha.ln(),
        }
    }

    /// Member of the sequence at level `alpha`, other settings as in `base`.
    pub fn apply(&self, base: &DesignSpec, alpha: f64) -> DesignSpec {
        let l = alpha.ln().abs();
        let mut s = base.clone();
        s.alpha = alpha;
        s.alpha_tilde = alpha.powf(self.log_ratio);
        s.m = (self.a * l).round().max(2.0) as u64;
        s.max_n = ((self.big_a * l).round() as u64).max(s.m + 1);
        s.max_n_tilde = self.big_a_tilde.map(|at| ((at * l).round() as u64).max(s.max_n + 1));
        if let (Some(mp), Some(mt)) = (base.max_n_prime, base.max_n_tilde) {
            // Keep M′ at the same relative position between M and M̃.
            let f = (mp - base.max_n) as f64 / (mt - base.max_n) as f64;
            let new_mt = s.max_n_tilde.unwrap_or(mt);
            s.max_n_prime = Some(s.max_n + (f * (new_mt - s.max_n) as f64).round() as u64);
        }
        s.u1 = None;
        s.u2 = None;
        s
    }
}

/// Which procedure a diagnostic row describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosedProcedure {
    Adaptive,
    CondPower3,
}

/// Expected sample size against its asymptotic benchmark at one (α, θ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyDiagnostic {
    pub procedure: DiagnosedProcedure,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub m: u64,
    #[serde(rename = "M")]
    pub max_n: u64,
    #[serde(rename = "M_tilde", skip_serializing_if = "Option::is_none")]
    pub max_n_tilde: Option<u64>,
    pub scaling: Scaling,
    pub theta: Param,
    pub thresholds: Thresholds,
    /// Hoeffding-type lower bound for any test with these constraints.
    pub hoeffding_bound: f64,
    /// The procedure's own asymptotic expected sample size.
    pub asymptotic: f64,
    pub ess: f64,
    pub ess_se: f64,
    /// ess / hoeffding_bound.
    pub ratio: f64,
    pub ratio_se: f64,
    /// η_θ, for one-parameter models with θ above θ₀.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_theta: Option<f64>,
}

/// Options of [`efficiency_diagnostic`].
#[derive(Clone, Debug)]
pub struct DiagnosticPlan {
    pub alphas: Vec<f64>,
    pub thetas: Vec<Param>,
    pub reps: u64,
    pub seed: u64,
    /// Also evaluate the three-stage conditional-power test (normal model,
    /// three-stage base only).
    pub cond_power3: bool,
}

/// Runs the diagnostic over `plan.alphas` × `plan.thetas` for the design
/// family generated by `base`.
pub fn efficiency_diagnostic(base: &DesignSpec, plan: &DiagnosticPlan) -> Result<Vec<EfficiencyDiagnostic>> {
    if plan.alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::spec("alphas", "the α sequence must be decreasing"));
    }
    base.validate()?;
    let scaling = Scaling::of(base);
    let nodes = match base.calibration {
        Calibration::NormalApprox { nodes_per_piece } => nodes_per_piece,
        _ => 64,
    };
    let mut out = Vec::new();
    for &alpha in &plan.alphas {
        let spec = scaling.apply(base, alpha);
        let mut procs = vec![(DiagnosedProcedure::Adaptive, spec.clone())];
        if plan.cond_power3 {
            let mut cp = spec.clone();
            cp.sample_size_rule = SampleSizeRule::ConditionalPower;
            procs.push((DiagnosedProcedure::CondPower3, cp));
        }
        for (which, spec) in procs {
            let design = Design::new(spec.clone())?;
            let th = calibrate_normal_approx(&design, nodes)?.thresholds;
            let proc = Adaptive::new(design.clone(), th);
            let oc = simulate_oc(&proc, &plan.thetas, plan.reps, plan.seed)?;
            let model = design.model();
            for (theta, pt) in plan.thetas.iter().zip(&oc.points) {
                let (u_alt, cap) = match design.u2() {
                    Some(u2) => (u2, design.cap()),
                    None => (design.u1(), spec.max_n),
                };
                let bound = hoeffding_bound(model, theta, spec.u0, u_alt, alpha, spec.m, cap)?;
                let u = model.u(theta);
                let eta = if model.dim() == 1 && u > spec.u0 {
                    Some(eta_theta(model, spec.u0, u)?)
                } else {
                    None
                };
                let asymptotic = match which {
                    DiagnosedProcedure::Adaptive => bound,
                    DiagnosedProcedure::CondPower3 => cond_power_asymptotic(
                        model,
                        u,
                        spec.u0,
                        design.u1(),
                        alpha,
                        spec.alpha_tilde,
                        spec.m,
                        spec.max_n,
                    )?,
                };
                let ess_se = pt.ess_se.unwrap_or(0.0);
                out.push(EfficiencyDiagnostic {
                    procedure: which,
                    alpha,
                    alpha_tilde: spec.alpha_tilde,
                    m: spec.m,
                    max_n: spec.max_n,
                    max_n_tilde: spec.max_n_tilde,
                    scaling,
                    theta: *theta,
                    thresholds: th,
                    hoeffding_bound: bound,
                    asymptotic,
                    ess: pt.ess,
                    ess_se,
                    ratio: pt.ess / bound,
                    ratio_se: ess_se / bound,
                    eta_theta: eta,
                });
            }
        }
    }
    Ok(out)
}
