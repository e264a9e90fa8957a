//! Crossing probabilities under the normal approximation of the signed
//! roots, by recursive numerical integration.
//!
//! The design is mapped onto a canonical problem: observations N(θ, 1)
//! with θ₀ = 0, and each hypothesis value u placed at the drift
//! θ(u) = {2·inf I(h(u), ·)}^{1/2} it has relative to u₀. For the normal
//! mean model this is exact; otherwise it is the usual signed-root
//! approximation, ℓ_{i,j} ≈ S_{n_i} − n_i θ(u_j).
//!
//! On this scale an interim analysis at n rejects when S_n ≥ (2bn)^{1/2},
//! stops for futility when S_n ≤ nθ_f − (2b̃n)^{1/2}, and the final
//! analysis rejects when S_cap ≥ (2c·cap)^{1/2}.
//!
//! Conditioning on S_m determines the second-stage size k(S_m), a step
//! function of S_m that is monotone on either side of one breakpoint.
//! The S_m axis is cut at every jump of k, and each piece is integrated
//! with Gauss–Legendre; conditional stage-2/final probabilities are
//! closed-form (univariate or bivariate normal). The four-stage test
//! integrates over S_{n₂} instead, for each value K of n₂, using the
//! sub-density φ_K(s − Kθ)·P(S_m ∈ A_K | S_K = s) where A_K is the set of
//! continuing first-stage values that lead to n₂ = K (a Brownian bridge
//! probability); the third-stage size is a step function of S_{n₂} and is
//! handled in the same way.

use crate::design::{conditional_power_rule, inflated_size, Design, FourStageN2, SampleSizeRule};
use crate::error::Result;
use crate::numerics::{bvn_upper, norm_cdf, norm_pdf, norm_sf, GaussLegendre};
use crate::rng::map_indices;

/// Half-width of the integration window in standard deviations.
const WINDOW_SD: f64 = 8.0;

/// The design on the canonical unit-variance normal scale.
#[derive(Clone, Debug)]
pub struct CanonicalDesign {
    pub m: u64,
    pub max_n: u64,
    /// Third-stage cap (four-stage only).
    pub max_n_prime: u64,
    /// Final sample size.
    pub cap: u64,
    pub four_stage: bool,
    /// Drift of u₁.
    pub theta1: f64,
    /// Drift of the futility alternative (u₁ or u₂).
    pub theta_fut: f64,
    /// Drift used in the Type II term of the second-stage rule.
    pub theta_n2: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub rho: f64,
    pub rule: SampleSizeRule,
}

impl CanonicalDesign {
    pub fn from_design(design: &Design) -> Result<Self> {
        let spec = design.spec();
        let model = design.model();
        let drift = |u: f64| crate::design::canonical_drift(model, u, spec.u0);
        let theta1 = drift(design.u1())?;
        let theta_fut = drift(design.u_fut())?;
        let theta_n2 = if design.is_four_stage() && spec.four_stage_n2 == FourStageN2::Tilde {
            theta_fut
        } else {
            theta1
        };
        Ok(CanonicalDesign {
            m: spec.m,
            max_n: spec.max_n,
            max_n_prime: design.max_n_prime().unwrap_or(spec.max_n),
            cap: design.cap(),
            four_stage: design.is_four_stage(),
            theta1,
            theta_fut,
            theta_n2,
            alpha: spec.alpha,
            alpha_tilde: spec.alpha_tilde,
            rho: spec.rho_m,
            rule: spec.sample_size_rule,
        })
    }

    fn hoeffding(&self, x: f64, theta_alt: f64) -> f64 {
        let i0 = 0.5 * x * x;
        let i1 = 0.5 * (x - theta_alt) * (x - theta_alt);
        let t0 = if i0 > 0.0 { self.alpha.ln().abs() / i0 } else { f64::INFINITY };
        let t1 = if i1 > 0.0 { self.alpha_tilde.ln().abs() / i1 } else { f64::INFINITY };
        t0.min(t1)
    }

    /// Point where the two Hoeffding terms are equal: the maximum of n(x),
    /// on either side of which the stage-size rule is monotone.
    fn peak(&self, theta_alt: f64) -> f64 {
        let q = (self.alpha.ln() / self.alpha_tilde.ln()).sqrt();
        q * theta_alt / (1.0 + q)
    }

    /// Cumulative size after the second stage given S_m = s1 (before
    /// skipping a stage that adds nothing).
    pub fn n2(&self, s1: f64) -> u64 {
        let x = s1 / self.m as f64;
        match self.rule {
            SampleSizeRule::Glr => inflated_size(self.hoeffding(x, self.theta_n2), self.rho, self.m, self.max_n),
            SampleSizeRule::ConditionalPower => conditional_power_rule(
                x,
                s1,
                self.m,
                self.max_n,
                0.0,
                self.theta1,
                1.0,
                self.alpha,
                self.alpha_tilde,
            )
            .expect("conditional-power rule is infallible"),
        }
    }

    /// Cumulative size after the third stage given S_k = s2.
    pub fn n3(&self, s2: f64, k: u64) -> u64 {
        let x = s2 / k as f64;
        inflated_size(self.hoeffding(x, self.theta_fut), self.rho, k, self.max_n_prime)
    }

    fn n2_breakpoints(&self) -> f64 {
        match self.rule {
            SampleSizeRule::Glr => self.peak(self.theta_n2) * self.m as f64,
            SampleSizeRule::ConditionalPower => 0.0,
        }
    }

    fn reject_bound(n: u64, b: f64) -> f64 {
        (2.0 * b * n as f64).sqrt()
    }

    fn futility_bound(&self, n: u64, b_tilde: f64) -> f64 {
        n as f64 * self.theta_fut - (2.0 * b_tilde * n as f64).sqrt()
    }
}

/// Locates the jumps of a step function that is monotone on `[a, b]`.
fn monotone_jumps<F: Fn(f64) -> u64>(f: &F, a: f64, fa: u64, b: f64, fb: u64, tol: f64, out: &mut Vec<f64>) {
    if fa == fb {
        return;
    }
    if b - a <= tol {
        out.push(0.5 * (a + b));
        return;
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    monotone_jumps(f, a, fa, mid, fm, tol, out);
    monotone_jumps(f, mid, fm, b, fb, tol, out);
}

/// Splits `[lo, hi]` into pieces on which the step function `f` is
/// constant; `f` must be monotone between consecutive `forced` points.
fn step_pieces<F: Fn(f64) -> u64>(f: &F, lo: f64, hi: f64, forced: &[f64]) -> Vec<(f64, f64, u64)> {
    if !(hi > lo) {
        return Vec::new();
    }
    let mut cuts = vec![lo];
    cuts.extend(forced.iter().copied().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    let tol = 1e-11 * (1.0 + lo.abs().max(hi.abs()));
    let mut points = vec![lo];
    for w in cuts.windows(2) {
        let mut js = Vec::new();
        monotone_jumps(f, w[0], f(w[0]), w[1], f(w[1]), tol, &mut js);
        points.extend(js);
        points.push(w[1]);
    }
    points.dedup();
    points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], f(0.5 * (w[0] + w[1]))))
        .collect()
}

/// Probabilities of the calibration events at one drift.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventProbabilities {
    /// Futility stop at any interim analysis, rejections ignored.
    pub futility: f64,
    /// First-crossing early rejection, split by rule set (1-based index − 1).
    pub early_rejection_by_stage: Vec<f64>,
    /// Rejection at the final analysis.
    pub final_rejection: f64,
}

impl EventProbabilities {
    pub fn early_rejection(&self) -> f64 {
        self.early_rejection_by_stage.iter().sum()
    }

    pub fn rejection(&self) -> f64 {
        self.early_rejection() + self.final_rejection
    }
}

/// Which events to evaluate (the final-rejection term is the costly one).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Events {
    Futility,
    /// Early rejections only.
    Rejection,
    /// Early and final rejections.
    Final,
    All,
}

impl Events {
    fn futility(self) -> bool {
        matches!(self, Events::Futility | Events::All)
    }

    fn final_rejection(self) -> bool {
        matches!(self, Events::Final | Events::All)
    }
}

/// Recursive-integration engine for one canonical design.
///
/// Pieces narrower than one standard deviation of the integration variable
/// get proportionally fewer nodes (never fewer than [`MIN_NODES`]); the
/// four-stage integrals have hundreds of such pieces.
pub struct NormalApprox {
    pub design: CanonicalDesign,
    gl: GaussLegendre,
    /// Smaller rules, doubling from `MIN_NODES`, for narrow pieces.
    ladder: Vec<GaussLegendre>,
}

/// Fewest nodes used on any piece.
pub const MIN_NODES: usize = 8;

impl NormalApprox {
    pub fn new(design: &Design, nodes_per_piece: usize) -> Result<Self> {
        Ok(Self::from_canonical(CanonicalDesign::from_design(design)?, nodes_per_piece))
    }

    pub fn from_canonical(design: CanonicalDesign, nodes_per_piece: usize) -> Self {
        let mut ladder = Vec::new();
        let mut n = MIN_NODES;
        while n < nodes_per_piece {
            ladder.push(GaussLegendre::new(n));
            n *= 2;
        }
        NormalApprox {
            design,
            gl: GaussLegendre::new(nodes_per_piece),
            ladder,
        }
    }

    /// Rule for a piece of the given width, `scale` being the standard
    /// deviation of the integration variable.
    fn rule(&self, width: f64, scale: f64) -> &GaussLegendre {
        let want = self.gl.nodes.len() as f64 * width / scale;
        self.ladder
            .iter()
            .find(|g| g.nodes.len() as f64 >= want)
            .unwrap_or(&self.gl)
    }

    fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, scale: f64, f: F) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        self.rule(b - a, scale).integrate(a, b, f)
    }

    /// Event probabilities at drift `theta` for candidate thresholds.
    pub fn probabilities(&self, theta: f64, b: f64, b_tilde: f64, c: f64, events: Events) -> EventProbabilities {
        if self.design.four_stage {
            self.four_stage(theta, b, b_tilde, c, events)
        } else {
            self.three_stage(theta, b, b_tilde, c, events)
        }
    }

    /// Pieces of constant second-stage size on `[lo, hi]` of the S_m axis.
    /// A size equal to m (stage skipped) is reported as such.
    fn n2_pieces(&self, lo: f64, hi: f64) -> Vec<(f64, f64, u64)> {
        let d = &self.design;
        step_pieces(&|s| d.n2(s), lo, hi, &[d.n2_breakpoints()])
    }

    fn three_stage(&self, theta: f64, b: f64, bt: f64, c: f64, events: Events) -> EventProbabilities {
        let d = &self.design;
        let (m, cap) = (d.m, d.cap);
        let mf = m as f64;
        let (mean, sd) = (mf * theta, mf.sqrt());
        let dens = |s: f64| norm_pdf((s - mean) / sd) / sd;
        let (win_lo, win_hi) = (mean - WINDOW_SD * sd, mean + WINDOW_SD * sd);
        let fm = d.futility_bound(m, bt);
        let rm = CanonicalDesign::reject_bound(m, b);
        let c_cap = CanonicalDesign::reject_bound(cap, c);
        let mut out = EventProbabilities {
            early_rejection_by_stage: vec![0.0; 2],
            ..Default::default()
        };

        if events.futility() {
            out.futility = norm_cdf((fm - mean) / sd);
            for (a, bb, k) in self.n2_pieces(fm.max(win_lo), win_hi) {
                if k == m || k >= cap {
                    continue;
                }
                let kf = (k - m) as f64;
                let fk = d.futility_bound(k, bt);
                out.futility += self
                    .gl
                    .integrate(a, bb, |s| dens(s) * norm_cdf((fk - s - kf * theta) / kf.sqrt()));
            }
        }
        if events == Events::Futility {
            return out;
        }

        out.early_rejection_by_stage[0] = norm_sf((rm - mean) / sd);
        let (lo, hi) = (fm.max(win_lo), rm.min(win_hi));
        let rest = (cap - m) as f64;
        for (a, bb, k) in self.n2_pieces(lo, hi) {
            if k == m || k >= cap {
                if events.final_rejection() {
                    out.final_rejection += self
                        .gl
                        .integrate(a, bb, |s| dens(s) * norm_sf((c_cap - s - rest * theta) / rest.sqrt()));
                }
                continue;
            }
            let kf = (k - m) as f64;
            let (fk, rk) = (d.futility_bound(k, bt), CanonicalDesign::reject_bound(k, b));
            out.early_rejection_by_stage[1] += self
                .gl
                .integrate(a, bb, |s| dens(s) * norm_sf((rk - s - kf * theta) / kf.sqrt()));
            if events.final_rejection() && fk < rk {
                let r = (kf / rest).sqrt();
                out.final_rejection += self.gl.integrate(a, bb, |s| {
                    let h2 = (c_cap - s - rest * theta) / rest.sqrt();
                    let lo1 = (fk - s - kf * theta) / kf.sqrt();
                    let hi1 = (rk - s - kf * theta) / kf.sqrt();
                    dens(s) * (bvn_upper(lo1, h2, r) - bvn_upper(hi1, h2, r)).max(0.0)
                });
            }
        }
        out
    }

    /// Gauss–Legendre integral of a vector-valued integrand.
    fn integrate3<F: Fn(f64) -> (f64, f64, f64)>(&self, a: f64, b: f64, scale: f64, f: F) -> (f64, f64, f64) {
        if !(b > a) {
            return (0.0, 0.0, 0.0);
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let gl = self.rule(b - a, scale);
        let mut acc = (0.0, 0.0, 0.0);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let (p, q, r) = f(mid + half * x);
            acc.0 += w * p;
            acc.1 += w * q;
            acc.2 += w * r;
        }
        (acc.0 * half, acc.1 * half, acc.2 * half)
    }

    /// Contribution of the analyses after the second stage, given S_k = s
    /// on a path still running after the second analysis at k.
    /// Returns (futility, early rejection at stage 3, final rejection).
    fn after_stage_two(&self, theta: f64, s: f64, k: u64, b: f64, bt: f64, c: f64, events: Events) -> (f64, f64, f64) {
        let d = &self.design;
        let cap = d.cap;
        let mut n3 = d.n3(s, k);
        if n3 == k {
            n3 = cap;
        }
        let c_cap = CanonicalDesign::reject_bound(cap, c);
        let rest = (cap - k) as f64;
        if n3 >= cap {
            let fin = if events.final_rejection() {
                norm_sf((c_cap - s - rest * theta) / rest.sqrt())
            } else {
                0.0
            };
            return (0.0, 0.0, fin);
        }
        let kf = (n3 - k) as f64;
        let (f3, r3) = (d.futility_bound(n3, bt), CanonicalDesign::reject_bound(n3, b));
        let fut = norm_cdf((f3 - s - kf * theta) / kf.sqrt());
        let early = norm_sf((r3 - s - kf * theta) / kf.sqrt());
        let fin = if events.final_rejection() && f3 < r3 {
            let r = (kf / rest).sqrt();
            let h2 = (c_cap - s - rest * theta) / rest.sqrt();
            let lo1 = (f3 - s - kf * theta) / kf.sqrt();
            let hi1 = (r3 - s - kf * theta) / kf.sqrt();
            (bvn_upper(lo1, h2, r) - bvn_upper(hi1, h2, r)).max(0.0)
        } else {
            0.0
        };
        (fut, early, fin)
    }

    fn four_stage(&self, theta: f64, b: f64, bt: f64, c: f64, events: Events) -> EventProbabilities {
        let d = &self.design;
        let m = d.m;
        let mf = m as f64;
        let (mean, sd) = (mf * theta, mf.sqrt());
        let (win_lo, win_hi) = (mean - WINDOW_SD * sd, mean + WINDOW_SD * sd);
        let fm = d.futility_bound(m, bt);
        let rm = CanonicalDesign::reject_bound(m, b);
        let mut out = EventProbabilities {
            early_rejection_by_stage: vec![0.0; 3],
            ..Default::default()
        };

        // Stage-1 sets A_K, for the futility event (rejections ignored) and
        // for the rejection events (continuation region only).
        let group = |lo: f64, hi: f64| -> Vec<(u64, Vec<(f64, f64)>)> {
            let mut groups: Vec<(u64, Vec<(f64, f64)>)> = Vec::new();
            for (a, bb, k) in self.n2_pieces(lo, hi) {
                match groups.iter_mut().find(|(kk, _)| *kk == k) {
                    Some((_, v)) => v.push((a, bb)),
                    None => groups.push((k, vec![(a, bb)])),
                }
            }
            groups
        };

        if events.futility() {
            out.futility = norm_cdf((fm - mean) / sd);
            let groups = group(fm.max(win_lo), win_hi);
            let parts = map_indices(groups.len() as u64, |g| {
                let (k, ref set) = groups[g as usize];
                self.group_contribution(theta, k, set, b, bt, c, Events::Futility)
            });
            for p in parts {
                out.futility += p.futility;
            }
        }
        if events == Events::Futility {
            return out;
        }

        out.early_rejection_by_stage[0] = norm_sf((rm - mean) / sd);
        let groups = group(fm.max(win_lo), rm.min(win_hi));
        let parts = map_indices(groups.len() as u64, |g| {
            let (k, ref set) = groups[g as usize];
            self.group_contribution(theta, k, set, b, bt, c, events)
        });
        for p in parts {
            out.early_rejection_by_stage[1] += p.early_rejection_by_stage[1];
            out.early_rejection_by_stage[2] += p.early_rejection_by_stage[2];
            out.final_rejection += p.final_rejection;
        }
        out
    }

    /// Integrates the paths whose first stage lies in `set` (all leading to
    /// second-stage size `k`). For the futility event the set is the
    /// non-futile first-stage region and rejections are ignored; otherwise
    /// it is the continuation region.
    #[allow(clippy::too_many_arguments)]
    fn group_contribution(&self, theta: f64, k: u64, set: &[(f64, f64)], b: f64, bt: f64, c: f64, events: Events) -> EventProbabilities {
        let d = &self.design;
        let (m, mf) = (d.m, d.m as f64);
        let fut_event = events == Events::Futility;
        let mut out = EventProbabilities {
            early_rejection_by_stage: vec![0.0; 3],
            ..Default::default()
        };
        let peak3 = |n: u64| d.peak(d.theta_fut) * n as f64;

        if k == m {
            // Second stage skipped: the third-stage size is set from S_m.
            let dens = |s: f64| norm_pdf((s - mf * theta) / mf.sqrt()) / mf.sqrt();
            for &(a, bb) in set {
                for (pa, pb, _) in step_pieces(&|s| d.n3(s, m), a, bb, &[peak3(m)]) {
                    let (f, e, fin) = self.integrate3(pa, pb, mf.sqrt(), |s| {
                        let g = dens(s);
                        let (f, e, fin) = self.after_stage_two(theta, s, m, b, bt, c, events);
                        (g * f, g * e, g * fin)
                    });
                    if fut_event {
                        out.futility += f;
                    } else {
                        out.early_rejection_by_stage[2] += e;
                        out.final_rejection += fin;
                    }
                }
            }
            return out;
        }

        let kf = k as f64;
        let (mean, sd) = (kf * theta, kf.sqrt());
        let bridge_sd = (mf * (kf - mf) / kf).sqrt();
        let sub_density = |s: f64| -> f64 {
            let mu = mf / kf * s;
            let p: f64 = set
                .iter()
                .map(|&(a, bb)| norm_cdf((bb - mu) / bridge_sd) - norm_cdf((a - mu) / bridge_sd))
                .sum();
            norm_pdf((s - mean) / sd) / sd * p.max(0.0)
        };
        let fk = d.futility_bound(k, bt);
        let rk = CanonicalDesign::reject_bound(k, b);
        let (win_lo, win_hi) = (mean - WINDOW_SD * sd, mean + WINDOW_SD * sd);

        if fut_event {
            // Stage-2 futility region, then the third analysis beyond it.
            out.futility += self.integrate(win_lo, fk.min(win_hi), sd, sub_density);
            for (pa, pb, n3) in step_pieces(&|s| d.n3(s, k), fk.max(win_lo), win_hi, &[peak3(k)]) {
                if n3 == k || n3 >= d.cap {
                    continue;
                }
                out.futility += self.integrate(pa, pb, sd, |s| {
                    sub_density(s) * self.after_stage_two(theta, s, k, b, bt, c, events).0
                });
            }
            return out;
        }

        out.early_rejection_by_stage[1] += self.integrate(rk.max(win_lo), win_hi, sd, sub_density);
        for (pa, pb, _) in step_pieces(&|s| d.n3(s, k), fk.max(win_lo), rk.min(win_hi), &[peak3(k)]) {
            let (_, e, fin) = self.integrate3(pa, pb, sd, |s| {
                let g = sub_density(s);
                if g == 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let (_, e, fin) = self.after_stage_two(theta, s, k, b, bt, c, events);
                (0.0, g * e, g * fin)
            });
            out.early_rejection_by_stage[2] += e;
            out.final_rejection += fin;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon(four: bool) -> CanonicalDesign {
        CanonicalDesign {
            m: 20,
            max_n: 121,
            max_n_prime: if four { 200 } else { 121 },
            cap: if four { 300 } else { 121 },
            four_stage: four,
            theta1: 0.2,
            theta_fut: if four { 0.15 } else { 0.2 },
            theta_n2: 0.2,
            alpha: 0.05,
            alpha_tilde: 0.2,
            rho: 0.1,
            rule: SampleSizeRule::Glr,
        }
    }

    #[test]
    fn pieces_cover_interval_with_constant_values() {
        let d = canon(false);
        let pieces = step_pieces(&|s| d.n2(s), -20.0, 30.0, &[d.peak(0.2) * 20.0]);
        assert!((pieces[0].0 + 20.0).abs() < 1e-12);
        assert!((pieces.last().unwrap().1 - 30.0).abs() < 1e-12);
        for (a, b, k) in &pieces {
            for t in [0.01, 0.5, 0.99] {
                assert_eq!(d.n2(a + t * (b - a)), *k);
            }
        }
    }

    #[test]
    fn disabled_boundaries_give_zero() {
        let na = NormalApprox::from_canonical(canon(false), 32);
        let p = na.probabilities(0.0, 1e6, 1e6, 1e6, Events::All);
        assert!(p.futility < 1e-12);
        assert!(p.rejection() < 1e-12);
        let na4 = NormalApprox::from_canonical(canon(true), 16);
        let p = na4.probabilities(0.0, 1e6, 1e6, 1e6, Events::All);
        assert!(p.futility < 1e-12 && p.rejection() < 1e-12);
    }

    #[test]
    fn first_stage_rejection_is_a_normal_tail() {
        let na = NormalApprox::from_canonical(canon(false), 32);
        let d = CanonicalDesign { m: 25, ..canon(false) };
        let na25 = NormalApprox::from_canonical(d, 32);
        let p = na25.probabilities(0.0, 1.92, 1e6, 1e6, Events::Rejection);
        assert!((p.early_rejection_by_stage[0] - norm_sf(3.84f64.sqrt())).abs() < 1e-14);
        assert!((p.early_rejection_by_stage[0] - 0.025).abs() < 5e-4);
        drop(na);
    }

    #[test]
    fn total_probability_is_conserved() {
        // With c = 0 every path reaching the end rejects unless S ≤ 0;
        // at a large positive drift every path rejects somewhere.
        let na = NormalApprox::from_canonical(canon(false), 64);
        let p = na.probabilities(2.0, 2.0, 1.0, 1e-9, Events::All);
        assert!((p.rejection() - 1.0).abs() < 1e-9, "{p:?}");
        let na4 = NormalApprox::from_canonical(canon(true), 32);
        let p = na4.probabilities(2.0, 2.0, 1.0, 1e-9, Events::All);
        assert!((p.rejection() - 1.0).abs() < 1e-8, "{p:?}");
    }

    #[test]
    fn three_stage_matches_simulation() {
        use crate::rng::replicate_rng;
        use rand_distr::{Distribution, StandardNormal};
        let d = canon(false);
        let na = NormalApprox::from_canonical(d.clone(), 64);
        let (b, bt, c) = (2.5, 1.2, 1.6);
        let theta = 0.1;
        let p = na.probabilities(theta, b, bt, c, Events::All);
        let reps = 200_000u64;
        let (mut fut, mut early, mut fin) = (0u64, 0u64, 0u64);
        for r in 0..reps {
            let mut rng = replicate_rng(11, 0, r);
            let mut draw = |k: u64| {
                let z: f64 = StandardNormal.sample(&mut rng);
                k as f64 * theta + (k as f64).sqrt() * z
            };
            let s1 = draw(d.m);
            let mut k = d.n2(s1);
            if k == d.m {
                k = d.cap;
            }
            let s2 = s1 + draw(k - d.m);
            let s3 = s2 + draw(d.cap - k);
            let r_ = |n: u64, s: f64| s >= (2.0 * b * n as f64).sqrt();
            let f_ = |n: u64, s: f64| s <= d.futility_bound(n, bt);
            let interim2 = k < d.cap;
            if f_(d.m, s1) || (interim2 && f_(k, s2)) {
                fut += 1;
            }
            if r_(d.m, s1) {
                early += 1;
            } else if f_(d.m, s1) {
            } else if interim2 {
                if r_(k, s2) {
                    early += 1;
                } else if !f_(k, s2) && s3 >= (2.0 * c * d.cap as f64).sqrt() {
                    fin += 1;
                }
            } else if s2 >= (2.0 * c * d.cap as f64).sqrt() {
                fin += 1;
            }
        }
        let check = |name: &str, est: u64, want: f64| {
            let pe = est as f64 / reps as f64;
            let se = (want * (1.0 - want) / reps as f64).sqrt();
            assert!((pe - want).abs() < 4.0 * se + 1e-4, "{name}: sim {pe} vs integral {want}");
        };
        check("futility", fut, p.futility);
        check("early", early, p.early_rejection());
        check("final", fin, p.final_rejection);
    }
}
