//! Exponential-family models: log-partition functions, Kullback–Leibler
//! information, maximum likelihood, constrained information and the GLR
//! statistic with its signed root.
//!
//! Parameters are exchanged in the mean (interpretable) parametrisation —
//! μ, p, (p, q), (μ_X, μ_Y, σ²) — while natural parameters are used
//! internally for ψ and ∇ψ. For two-population models one "observation"
//! is one subject per arm, so per-observation information is per pair.

use std::fmt;
use std::ops::Deref;

use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::golden_min;

/// Largest parameter dimension among the supported models.
pub const MAX_DIM: usize = 3;

/// A parameter vector in the mean parametrisation.
#[derive(Clone, Copy, PartialEq)]
pub struct Param {
    v: [f64; MAX_DIM],
    dim: u8,
}

impl Param {
    pub fn new(values: &[f64]) -> Self {
        assert!(
            !values.is_empty() && values.len() <= MAX_DIM,
            "parameter dimension must be 1..={MAX_DIM}"
        );
        let mut v = [0.0; MAX_DIM];
        v[..values.len()].copy_from_slice(values);
        Param {
            v,
            dim: values.len() as u8,
        }
    }

    pub fn scalar(x: f64) -> Self {
        Param::new(&[x])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v[..self.dim as usize]
    }
}

impl Deref for Param {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        self.as_slice()
    }
}

impl fmt::Debug for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Serialize for Param {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Param {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "parameter must have between 1 and {MAX_DIM} components"
            )));
        }
        Ok(Param::new(&v))
    }
}

/// Cumulative sufficient statistics of a (possibly two-arm) sample.
///
/// * one-arm models: `n[0]` observations with total `sum[0]`;
/// * two-arm Bernoulli: `n = [n_x, n_y]`, `sum = [s_x, s_y]`;
/// * two-sample normal: `n = [n_x, n_y]`, `sum = [Σx, Σy, Σx², Σy²]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "StatDoc", into = "StatDoc")]
pub struct SufficientStat {
    pub n: [u64; 2],
    pub sum: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct StatDoc {
    n: Vec<u64>,
    sum: Vec<f64>,
}

impl From<StatDoc> for SufficientStat {
    fn from(d: StatDoc) -> Self {
        let mut s = SufficientStat::default();
        for (dst, src) in s.n.iter_mut().zip(d.n) {
            *dst = src;
        }
        for (dst, src) in s.sum.iter_mut().zip(d.sum) {
            *dst = src;
        }
        s
    }
}

impl From<SufficientStat> for StatDoc {
    fn from(s: SufficientStat) -> Self {
        let arms = if s.n[1] > 0 { 2 } else { 1 };
        let sums = if s.sum[2] != 0.0 || s.sum[3] != 0.0 {
            4
        } else if arms == 2 || s.sum[1] != 0.0 {
            2
        } else {
            1
        };
        StatDoc {
            n: s.n[..arms].to_vec(),
            sum: s.sum[..sums].to_vec(),
        }
    }
}

impl SufficientStat {
    pub fn one_arm(n: u64, sum: f64) -> Self {
        SufficientStat {
            n: [n, 0],
            sum: [sum, 0.0, 0.0, 0.0],
        }
    }

    pub fn two_arm(nx: u64, sx: f64, ny: u64, sy: f64) -> Self {
        SufficientStat {
            n: [nx, ny],
            sum: [sx, sy, 0.0, 0.0],
        }
    }

    /// Two-sample normal statistic from sums and sums of squares.
    pub fn two_sample(nx: u64, sx: f64, sxx: f64, ny: u64, sy: f64, syy: f64) -> Self {
        SufficientStat {
            n: [nx, ny],
            sum: [sx, sy, sxx, syy],
        }
    }

    /// Accumulates an increment.
    pub fn add(&self, inc: &SufficientStat) -> Self {
        let mut out = *self;
        for i in 0..2 {
            out.n[i] += inc.n[i];
        }
        for i in 0..4 {
            out.sum[i] += inc.sum[i];
        }
        out
    }

    /// Per-arm sample size used as the design's `n` (first arm).
    pub fn size(&self) -> u64 {
        self.n[0]
    }
}

/// Maximum likelihood estimate together with a boundary flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mle {
    pub param: Param,
    /// True when the statistic lies on the boundary of the mean space
    /// (e.g. 0 or n successes) so that θ̂ is not in the natural space.
    pub boundary: bool,
}

/// GLR statistic for one hypothesis value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Glr {
    /// u(θ̂) evaluated at the (boundary-clamped) estimate.
    pub u_hat: f64,
    /// Hypothesised value u_j.
    pub target: f64,
    /// Λ = inf over {u(λ) = u_j} of the log-likelihood ratio, i.e. n·I.
    pub lambda: f64,
    /// Signed root ℓ = sign(u(θ̂) − u_j)·(2nΛ)^{1/2}; on the partial-sum
    /// scale, with variance ≈ n under the hypothesis.
    pub ell: f64,
    /// Standardised signed root ℓ/√n = sign·(2Λ)^{1/2}.
    pub z: f64,
    /// Sample size n (per arm).
    pub n: u64,
}

impl Glr {
    fn from_lambda(u_hat: f64, target: f64, lambda: f64, n: u64) -> Self {
        let lambda = lambda.max(0.0);
        let sign = if u_hat > target {
            1.0
        } else if u_hat < target {
            -1.0
        } else {
            0.0
        };
        let ell = sign * (2.0 * n as f64 * lambda).sqrt();
        let z = sign * (2.0 * lambda).sqrt();
        Glr {
            u_hat,
            target,
            lambda,
            ell,
            z,
            n,
        }
    }
}

/// Interface shared by all exponential-family instances.
pub trait ExponentialFamily {
    /// Dimension d of the natural parameter.
    fn dim(&self) -> usize;
    /// Number of arms (independent populations) sampled per observation.
    fn arms(&self) -> usize;
    /// Natural parameter of a mean-parametrised point.
    fn natural(&self, p: &Param) -> Result<Vec<f64>>;
    /// Membership of the natural parameter space Θ = {η : ψ(η) < ∞}.
    fn in_natural_space(&self, eta: &[f64]) -> bool;
    /// Log-partition function ψ(η) per observation.
    fn psi(&self, eta: &[f64]) -> f64;
    /// Mean-value map ∇ψ(η).
    fn grad_psi(&self, eta: &[f64]) -> Vec<f64>;
    /// Closed-form Kullback–Leibler information I(θ, λ).
    fn kl(&self, theta: &Param, lambda: &Param) -> Result<f64>;
    /// Hypothesis function u(θ).
    fn u(&self, p: &Param) -> f64;
    /// Maximum likelihood estimate from cumulative statistics.
    fn mle(&self, stat: &SufficientStat) -> Result<Mle>;
    /// Estimate used inside the GLR: the MLE with boundary clamping.
    fn glr_estimate(&self, stat: &SufficientStat) -> Result<Param>;
    /// inf over {λ : u(λ) = target} of I(θ, λ).
    fn constrained_info(&self, theta: &Param, target: f64) -> Result<f64>;
    /// Minimiser of I(θ, ·) over {u(λ) = target}.
    fn constrained_point(&self, theta: &Param, target: f64) -> Result<Param>;
    /// GLR statistic Λ and its signed root for cumulative statistics.
    fn glr(&self, stat: &SufficientStat, target: f64) -> Result<Glr>;
    /// Planning point on {u = value}: nuisance components are taken from
    /// the model's reference values.
    fn hypothesis_point(&self, value: f64) -> Result<Param>;
    /// Draws the sufficient statistic of `k` further observations per arm.
    fn sample_increment<R: Rng + ?Sized>(&self, p: &Param, k: u64, rng: &mut R) -> SufficientStat;

    /// Kullback–Leibler information computed from ψ:
    /// I(θ, λ) = (θ − λ)'∇ψ(θ) − {ψ(θ) − ψ(λ)} in natural coordinates.
    fn kl_from_psi(&self, theta: &Param, lambda: &Param) -> Result<f64> {
        let a = self.natural(theta)?;
        let b = self.natural(lambda)?;
        if !self.in_natural_space(&a) || !self.in_natural_space(&b) {
            return Err(Error::Domain("parameter outside the natural space".into()));
        }
        let g = self.grad_psi(&a);
        let lin: f64 = a.iter().zip(&b).zip(&g).map(|((x, y), m)| (x - y) * m).sum();
        Ok(lin - (self.psi(&a) - self.psi(&b)))
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} = {p} must lie strictly inside (0, 1)")))
    }
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Bernoulli KL information in the mean parametrisation.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    xlogy_ratio(p, q) + xlogy_ratio(1.0 - p, 1.0 - q)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

fn require_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::Usage("sufficient statistic has no observations".into()))
    } else {
        Ok(())
    }
}

fn clamp_rate(s: f64, n: u64) -> f64 {
    let n = n as f64;
    (s / n).clamp(0.5 / n, 1.0 - 0.5 / n)
}

// ---------------------------------------------------------------------------
// Normal mean, known variance
// ---------------------------------------------------------------------------

/// N(μ, σ²) with known σ²; u(θ) = μ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalKnownVar {
    pub sigma2: f64,
}

impl ExponentialFamily for NormalKnownVar {
    fn dim(&self) -> usize {
        1
    }
    fn arms(&self) -> usize {
        1
    }
    fn natural(&self, p: &Param) -> Result<Vec<f64>> {
        Ok(vec![p[0] / self.sigma2])
    }
    fn in_natural_space(&self, eta: &[f64]) -> bool {
        eta[0].is_finite()
    }
    fn psi(&self, eta: &[f64]) -> f64 {
        0.5 * self.sigma2 * eta[0] * eta[0]
    }
    fn grad_psi(&self, eta: &[f64]) -> Vec<f64> {
        vec![self.sigma2 * eta[0]]
    }
    fn kl(&self, theta: &Param, lambda: &Param) -> Result<f64> {
        let d = theta[0] - lambda[0];
        Ok(d * d / (2.0 * self.sigma2))
    }
    fn u(&self, p: &Param) -> f64 {
        p[0]
    }
    fn mle(&self, stat: &SufficientStat) -> Result<Mle> {
        require_n(stat.n[0])?;
        Ok(Mle {
            param: Param::scalar(stat.sum[0] / stat.n[0] as f64),
            boundary: false,
        })
    }
    fn glr_estimate(&self, stat: &SufficientStat) -> Result<Param> {
        Ok(self.mle(stat)?.param)
    }
    fn constrained_info(&self, theta: &Param, target: f64) -> Result<f64> {
        let d = theta[0] - target;
        Ok(d * d / (2.0 * self.sigma2))
    }
    fn constrained_point(&self, _theta: &Param, target: f64) -> Result<Param> {
        Ok(Param::scalar(target))
    }
    fn glr(&self, stat: &SufficientStat, target: f64) -> Result<Glr> {
        let est = self.glr_estimate(stat)?;
        let n = stat.n[0];
        let lambda = n as f64 * self.constrained_info(&est, target)?;
        Ok(Glr::from_lambda(est[0], target, lambda, n))
    }
    fn hypothesis_point(&self, value: f64) -> Result<Param> {
        Ok(Param::scalar(value))
    }
    fn sample_increment<R: Rng + ?Sized>(&self, p: &Param, k: u64, rng: &mut R) -> SufficientStat {
        if k == 0 {
            return SufficientStat::one_arm(0, 0.0);
        }
        let kf = k as f64;
        let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
        SufficientStat::one_arm(k, kf * p[0] + (kf * self.sigma2).sqrt() * z)
    }
}

// ---------------------------------------------------------------------------
// Bernoulli
// ---------------------------------------------------------------------------

/// Bernoulli(p); u(θ) = p.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bernoulli {}

impl ExponentialFamily for Bernoulli {
    fn dim(&self) -> usize {
        1
    }
    fn arms(&self) -> usize {
        1
    }
    fn natural(&self, p: &Param) -> Result<Vec<f64>> {
        check_prob(p[0], "p")?;
        Ok(vec![logit(p[0])])
    }
    fn in_natural_space(&self, eta: &[f64]) -> bool {
        eta[0].is_finite()
    }
    fn psi(&self, eta: &[f64]) -> f64 {
        softplus(eta[0])
    }
    fn grad_psi(&self, eta: &[f64]) -> Vec<f64> {
        vec![sigmoid(eta[0])]
    }
    fn kl(&self, theta: &Param, lambda: &Param) -> Result<f64> {
        check_prob(theta[0], "p")?;
        check_prob(lambda[0], "p")?;
        Ok(bernoulli_kl(theta[0], lambda[0]))
    }
    fn u(&self, p: &Param) -> f64 {
        p[0]
    }
    fn mle(&self, stat: &SufficientStat) -> Result<Mle> {
        require_n(stat.n[0])?;
        let (s, n) = (stat.sum[0], stat.n[0] as f64);
        if s < 0.0 || s > n {
            return Err(Error::Domain(format!("{s} successes out of {n} observations")));
        }
        Ok(Mle {
            param: Param::scalar(s / n),
            boundary: s == 0.0 || s == n,
        })
    }
    fn glr_estimate(&self, stat: &SufficientStat) -> Result<Param> {
        self.mle(stat)?;
        Ok(Param::scalar(clamp_rate(stat.sum[0], stat.n[0])))
    }
    fn constrained_info(&self, theta: &Param, target: f64) -> Result<f64> {
        check_prob(target, "hypothesised p")?;
        if !(0.0..=1.0).contains(&theta[0]) {
            return Err(Error::Domain(format!("p = {} outside [0, 1]", theta[0])));
        }
        Ok(bernoulli_kl(theta[0], target))
    }
    fn constrained_point(&self, _theta: &Param, target: f64) -> Result<Param> {
        check_prob(target, "hypothesised p")?;
        Ok(Param::scalar(target))
    }
    fn glr(&self, stat: &SufficientStat, target: f64) -> Result<Glr> {
        let est = self.glr_estimate(stat)?;
        let n = stat.n[0];
        let lambda = n as f64 * self.constrained_info(&est, target)?;
        Ok(Glr::from_lambda(est[0], target, lambda, n))
    }
    fn hypothesis_point(&self, value: f64) -> Result<Param> {
        check_prob(value, "p")?;
        Ok(Param::scalar(value))
    }
    fn sample_increment<R: Rng + ?Sized>(&self, p: &Param, k: u64, rng: &mut R) -> SufficientStat {
        let s = if k == 0 {
            0
        } else {
            Binomial::new(k, p[0].clamp(0.0, 1.0)).unwrap().sample(rng)
        };
        SufficientStat::one_arm(k, s as f64)
    }
}

// ---------------------------------------------------------------------------
// Two-arm Bernoulli
// ---------------------------------------------------------------------------

/// Treatment/control response rates (p, q); u(θ) = p − q.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoArmBernoulli {
    /// Reference control rate used for planning (implied alternatives and
    /// design-time Monte Carlo calibration).
    #[serde(default = "default_control_rate")]
    pub control_rate: f64,
}

fn default_control_rate() -> f64 {
    0.5
}

impl Default for TwoArmBernoulli {
    fn default() -> Self {
        TwoArmBernoulli {
            control_rate: default_control_rate(),
        }
    }
}

/// Minimises `wx·I(p, a) + wy·I(q, a − δ)` over the common-rate parameter
/// `a` on {p − q = δ}; golden-section search followed by a Newton polish.
/// Returns `(a, minimum)`.
pub fn two_arm_constrained(p: f64, q: f64, wx: f64, wy: f64, delta: f64) -> Result<(f64, f64)> {
    if !(delta > -1.0 && delta < 1.0) {
        return Err(Error::Domain(format!("difference {delta} is not attainable by two rates")));
    }
    let lo = delta.max(0.0);
    let hi = (1.0 + delta).min(1.0);
    let obj = |a: f64| wx * bernoulli_kl(p, a) + wy * bernoulli_kl(q, a - delta);
    let width = hi - lo;
    let eps = 1e-12 * width.max(1e-300);
    let (mut a, _) = golden_min(obj, lo + eps, hi - eps, 1e-6 * width, 200);
    // Newton on the (increasing) derivative, kept inside the feasible range.
    for _ in 0..50 {
        let b = a - delta;
        let g = wx * (-p / a + (1.0 - p) / (1.0 - a)) + wy * (-q / b + (1.0 - q) / (1.0 - b));
        let h = wx * (p / (a * a) + (1.0 - p) / ((1.0 - a) * (1.0 - a)))
            + wy * (q / (b * b) + (1.0 - q) / ((1.0 - b) * (1.0 - b)));
        if !(h.is_finite() && h > 0.0) {
            break;
        }
        let mut next = a - g / h;
        if next <= lo || next >= hi {
            next = if next <= lo { 0.5 * (a + lo) } else { 0.5 * (a + hi) };
        }
        let step = (next - a).abs();
        a = next;
        if step < 1e-14 {
            break;
        }
    }
    let v = obj(a);
    if !v.is_finite() {
        return Err(Error::Numeric(format!(
            "constrained two-arm minimisation failed (p = {p}, q = {q}, δ = {delta})"
        )));
    }
    Ok((a, v.max(0.0)))
}

impl ExponentialFamily for TwoArmBernoulli {
    fn dim(&self) -> usize {
        2
    }
    fn arms(&self) -> usize {
        2
    }
    fn natural(&self, p: &Param) -> Result<Vec<f64>> {
        check_prob(p[0], "p")?;
        check_prob(p[1], "q")?;
        Ok(vec![logit(p[0]), logit(p[1])])
    }
    fn in_natural_space(&self, eta: &[f64]) -> bool {
        eta[0].is_finite() && eta[1].is_finite()
    }
    fn psi(&self, eta: &[f64]) -> f64 {
        softplus(eta[0]) + softplus(eta[1])
    }
    fn grad_psi(&self, eta: &[f64]) -> Vec<f64> {
        vec![sigmoid(eta[0]), sigmoid(eta[1])]
    }
    fn kl(&self, theta: &Param, lambda: &Param) -> Result<f64> {
        for v in [theta[0], theta[1], lambda[0], lambda[1]] {
            check_prob(v, "rate")?;
        }
        Ok(bernoulli_kl(theta[0], lambda[0]) + bernoulli_kl(theta[1], lambda[1]))
    }
    fn u(&self, p: &Param) -> f64 {
        p[0] - p[1]
    }
    fn mle(&self, stat: &SufficientStat) -> Result<Mle> {
        require_n(stat.n[0])?;
        require_n(stat.n[1])?;
        let (nx, ny) = (stat.n[0] as f64, stat.n[1] as f64);
        let (sx, sy) = (stat.sum[0], stat.sum[1]);
        if sx < 0.0 || sx > nx || sy < 0.0 || sy > ny {
            return Err(Error::Domain("success count outside [0, n]".into()));
        }
        Ok(Mle {
            param: Param::new(&[sx / nx, sy / ny]),
            boundary: sx == 0.0 || sx == nx || sy == 0.0 || sy == ny,
        })
    }
    fn glr_estimate(&self, stat: &SufficientStat) -> Result<Param> {
        self.mle(stat)?;
        Ok(Param::new(&[
            clamp_rate(stat.sum[0], stat.n[0]),
            clamp_rate(stat.sum[1], stat.n[1]),
        ]))
    }
    fn constrained_info(&self, theta: &Param, target: f64) -> Result<f64> {
        Ok(two_arm_constrained(theta[0], theta[1], 1.0, 1.0, target)?.1)
    }
    fn constrained_point(&self, theta: &Param, target: f64) -> Result<Param> {
        let (a, _) = two_arm_constrained(theta[0], theta[1], 1.0, 1.0, target)?;
        Ok(Param::new(&[a, a - target]))
    }
    fn glr(&self, stat: &SufficientStat, target: f64) -> Result<Glr> {
        let est = self.glr_estimate(stat)?;
        let (nx, ny) = (stat.n[0] as f64, stat.n[1] as f64);
        let (_, lambda) = two_arm_constrained(est[0], est[1], nx, ny, target)?;
        Ok(Glr::from_lambda(est[0] - est[1], target, lambda, stat.n[0]))
    }
    fn hypothesis_point(&self, value: f64) -> Result<Param> {
        let q = self.control_rate;
        check_prob(q, "control rate")?;
        check_prob(q + value, "treatment rate implied by the control rate")?;
        Ok(Param::new(&[q + value, q]))
    }
    fn sample_increment<R: Rng + ?Sized>(&self, p: &Param, k: u64, rng: &mut R) -> SufficientStat {
        if k == 0 {
            return SufficientStat::two_arm(0, 0.0, 0, 0.0);
        }
        let sx = Binomial::new(k, p[0].clamp(0.0, 1.0)).unwrap().sample(rng);
        let sy = Binomial::new(k, p[1].clamp(0.0, 1.0)).unwrap().sample(rng);
        SufficientStat::two_arm(k, sx as f64, k, sy as f64)
    }
}

// ---------------------------------------------------------------------------
// Two-sample normal, common unknown variance
// ---------------------------------------------------------------------------

/// Two independent normal samples N(μ_X, σ²), N(μ_Y, σ²) with common
/// unknown variance; u(θ) = μ_X − μ_Y. Parameters are (μ_X, μ_Y, σ²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleNormal {
    /// Reference standard deviation σ₀ used for planning.
    pub sigma0: f64,
}

impl TwoSampleNormal {
    fn check(p: &Param) -> Result<()> {
        if p.len() != 3 || !(p[2] > 0.0) || !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::Domain(format!(
                "two-sample normal parameter must be (μ_X, μ_Y, σ² > 0), got {p:?}"
            )));
        }
        Ok(())
    }

    /// Pooled variance MLE and its boundary flag.
    fn pooled_variance(stat: &SufficientStat) -> (f64, bool) {
        let (nx, ny) = (stat.n[0] as f64, stat.n[1] as f64);
        let ssx = stat.sum[2] - stat.sum[0] * stat.sum[0] / nx;
        let ssy = stat.sum[3] - stat.sum[1] * stat.sum[1] / ny;
        let v = (ssx + ssy) / (nx + ny);
        if v > 0.0 {
            (v, false)
        } else {
            (0.0, true)
        }
    }
}

const VARIANCE_FLOOR: f64 = 1e-12;

impl ExponentialFamily for TwoSampleNormal {
    fn dim(&self) -> usize {
        3
    }
    fn arms(&self) -> usize {
        2
    }
    fn natural(&self, p: &Param) -> Result<Vec<f64>> {
        Self::check(p)?;
        Ok(vec![p[0] / p[2], p[1] / p[2], -0.5 / p[2]])
    }
    fn in_natural_space(&self, eta: &[f64]) -> bool {
        eta[2] < 0.0 && eta.iter().all(|x| x.is_finite())
    }
    fn psi(&self, eta: &[f64]) -> f64 {
        -(eta[0] * eta[0] + eta[1] * eta[1]) / (4.0 * eta[2]) - (-2.0 * eta[2]).ln()
    }
    fn grad_psi(&self, eta: &[f64]) -> Vec<f64> {
        let s2 = -0.5 / eta[2];
        let (mx, my) = (eta[0] * s2, eta[1] * s2);
        vec![mx, my, mx * mx + my * my + 2.0 * s2]
    }
    fn kl(&self, theta: &Param, lambda: &Param) -> Result<f64> {
        Self::check(theta)?;
        Self::check(lambda)?;
        let (s, t) = (theta[2], lambda[2]);
        let d2 = (theta[0] - lambda[0]).powi(2) + (theta[1] - lambda[1]).powi(2);
        Ok((t / s).ln() + (2.0 * s + d2) / (2.0 * t) - 1.0)
    }
    fn u(&self, p: &Param) -> f64 {
        p[0] - p[1]
    }
    fn mle(&self, stat: &SufficientStat) -> Result<Mle> {
        require_n(stat.n[0])?;
        require_n(stat.n[1])?;
        let (v, boundary) = Self::pooled_variance(stat);
        Ok(Mle {
            param: Param::new(&[stat.sum[0] / stat.n[0] as f64, stat.sum[1] / stat.n[1] as f64, v]),
            boundary,
        })
    }
    fn glr_estimate(&self, stat: &SufficientStat) -> Result<Param> {
        let m = self.mle(stat)?;
        let mut p = m.param;
        let floor = VARIANCE_FLOOR * (1.0 + p[0] * p[0] + p[1] * p[1]);
        if p[2] < floor {
            p = Param::new(&[p[0], p[1], floor]);
        }
        Ok(p)
    }
    fn constrained_info(&self, theta: &Param, target: f64) -> Result<f64> {
        Self::check(theta)?;
        // The variance profiles out in closed form and the optimal split of
        // the mean difference is symmetric for one subject per arm.
        let e = theta[0] - theta[1] - target;
        Ok((e * e / (4.0 * theta[2])).ln_1p())
    }
    fn constrained_point(&self, theta: &Param, target: f64) -> Result<Param> {
        Self::check(theta)?;
        let e = theta[0] - theta[1] - target;
        Ok(Param::new(&[theta[0] - e / 2.0, theta[1] + e / 2.0, theta[2] + e * e / 4.0]))
    }
    fn glr(&self, stat: &SufficientStat, target: f64) -> Result<Glr> {
        let est = self.glr_estimate(stat)?;
        let (nx, ny) = (stat.n[0] as f64, stat.n[1] as f64);
        let total = nx + ny;
        let h = nx * ny / total;
        let e = est[0] - est[1] - target;
        let lambda = 0.5 * total * (e * e * h / (total * est[2])).ln_1p();
        Ok(Glr::from_lambda(est[0] - est[1], target, lambda, stat.n[0]))
    }
    fn hypothesis_point(&self, value: f64) -> Result<Param> {
        Ok(Param::new(&[value, 0.0, self.sigma0 * self.sigma0]))
    }
    fn sample_increment<R: Rng + ?Sized>(&self, p: &Param, k: u64, rng: &mut R) -> SufficientStat {
        if k == 0 {
            return SufficientStat::two_sample(0, 0.0, 0.0, 0, 0.0, 0.0);
        }
        let kf = k as f64;
        let sd = p[2].sqrt();
        let std = Normal::new(0.0, 1.0).unwrap();
        let mut arm = |mu: f64| {
            let s = kf * mu + sd * kf.sqrt() * std.sample(rng);
            let ss = if k >= 2 {
                p[2] * ChiSquared::new(kf - 1.0).unwrap().sample(rng)
            } else {
                0.0
            };
            (s, ss + s * s / kf)
        };
        let (sx, sxx) = arm(p[0]);
        let (sy, syy) = arm(p[1]);
        SufficientStat::two_sample(k, sx, sxx, k, sy, syy)
    }
}

// ---------------------------------------------------------------------------
// Closed set of model instances
// ---------------------------------------------------------------------------

/// The supported model instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    NormalKnownVar(NormalKnownVar),
    TwoSampleNormalUnknownVar(TwoSampleNormal),
    Bernoulli(Bernoulli),
    TwoArmBernoulli(TwoArmBernoulli),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::NormalKnownVar($m) => $e,
            Model::TwoSampleNormalUnknownVar($m) => $e,
            Model::Bernoulli($m) => $e,
            Model::TwoArmBernoulli($m) => $e,
        }
    };
}

impl Model {
    pub fn normal(sigma2: f64) -> Self {
        Model::NormalKnownVar(NormalKnownVar { sigma2 })
    }
    pub fn bernoulli() -> Self {
        Model::Bernoulli(Bernoulli {})
    }
    pub fn two_arm_bernoulli(control_rate: f64) -> Self {
        Model::TwoArmBernoulli(TwoArmBernoulli { control_rate })
    }
    pub fn two_sample_normal(sigma0: f64) -> Self {
        Model::TwoSampleNormalUnknownVar(TwoSampleNormal { sigma0 })
    }

    /// Short family name as used in documents.
    pub fn family(&self) -> &'static str {
        match self {
            Model::NormalKnownVar(_) => "normal_known_var",
            Model::TwoSampleNormalUnknownVar(_) => "two_sample_normal_unknown_var",
            Model::Bernoulli(_) => "bernoulli",
            Model::TwoArmBernoulli(_) => "two_arm_bernoulli",
        }
    }

    /// Whether sufficient statistics are integer counts (exact OC possible).
    pub fn is_discrete(&self) -> bool {
        matches!(self, Model::Bernoulli(_) | Model::TwoArmBernoulli(_))
    }

    /// Validates model constants.
    pub fn validate(&self) -> Result<()> {
        match self {
            Model::NormalKnownVar(m) if !(m.sigma2 > 0.0 && m.sigma2.is_finite()) => {
                Err(Error::spec("model.sigma2", "variance must be positive"))
            }
            Model::TwoSampleNormalUnknownVar(m) if !(m.sigma0 > 0.0 && m.sigma0.is_finite()) => {
                Err(Error::spec("model.sigma0", "reference standard deviation must be positive"))
            }
            Model::TwoArmBernoulli(m) if !(m.control_rate > 0.0 && m.control_rate < 1.0) => {
                Err(Error::spec("model.control_rate", "control rate must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }

    /// Names of the parameter coordinates, used for grids and CSV headers.
    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self {
            Model::NormalKnownVar(_) => &["theta"],
            Model::TwoSampleNormalUnknownVar(_) => &["mu_x", "mu_y", "sigma2"],
            Model::Bernoulli(_) => &["p"],
            Model::TwoArmBernoulli(_) => &["p", "q"],
        }
    }

    /// Information between the planning points of two hypothesis values:
    /// inf over {u = to} of I(hypothesis_point(from), ·).
    pub fn hypothesis_separation(&self, from: f64, to: f64) -> Result<f64> {
        let p = self.hypothesis_point(from)?;
        self.constrained_info(&p, to)
    }
}

impl ExponentialFamily for Model {
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }
    fn arms(&self) -> usize {
        dispatch!(self, m => m.arms())
    }
    fn natural(&self, p: &Param) -> Result<Vec<f64>> {
        dispatch!(self, m => m.natural(p))
    }
    fn in_natural_space(&self, eta: &[f64]) -> bool {
        dispatch!(self, m => m.in_natural_space(eta))
    }
    fn psi(&self, eta: &[f64]) -> f64 {
        dispatch!(self, m => m.psi(eta))
    }
    fn grad_psi(&self, eta: &[f64]) -> Vec<f64> {
        dispatch!(self, m => m.grad_psi(eta))
    }
    fn kl(&self, theta: &Param, lambda: &Param) -> Result<f64> {
        dispatch!(self, m => m.kl(theta, lambda))
    }
    fn u(&self, p: &Param) -> f64 {
        dispatch!(self, m => m.u(p))
    }
    fn mle(&self, stat: &SufficientStat) -> Result<Mle> {
        dispatch!(self, m => m.mle(stat))
    }
    fn glr_estimate(&self, stat: &SufficientStat) -> Result<Param> {
        dispatch!(self, m => m.glr_estimate(stat))
    }
    fn constrained_info(&self, theta: &Param, target: f64) -> Result<f64> {
        dispatch!(self, m => m.constrained_info(theta, target))
    }
    fn constrained_point(&self, theta: &Param, target: f64) -> Result<Param> {
        dispatch!(self, m => m.constrained_point(theta, target))
    }
    fn glr(&self, stat: &SufficientStat, target: f64) -> Result<Glr> {
        dispatch!(self, m => m.glr(stat, target))
    }
    fn hypothesis_point(&self, value: f64) -> Result<Param> {
        dispatch!(self, m => m.hypothesis_point(value))
    }
    fn sample_increment<R: Rng + ?Sized>(&self, p: &Param, k: u64, rng: &mut R) -> SufficientStat {
        dispatch!(self, m => m.sample_increment(p, k, rng))
    }
}
