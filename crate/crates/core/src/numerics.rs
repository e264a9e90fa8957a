//! Scalar numerical building blocks: normal and bivariate-normal
//! probabilities, Gauss–Legendre quadrature, bracketed root finding,
//! one-dimensional minimisation and binomial probabilities.
//!
//! Univariate normal and Student-t distribution functions delegate to
//! `statrs`; the bivariate normal orthant probability follows Genz's
//! refinement of the Drezner–Wesolowsky algorithm.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Standard normal distribution function Φ(x).
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function 1 − Φ(x), accurate in the upper tail.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density φ(x).
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile Φ⁻¹(p).
pub fn norm_quantile(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Upper standard normal quantile z_p, i.e. 1 − Φ(z_p) = p.
pub fn z_upper(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Upper quantile of Student's t with `df` degrees of freedom.
pub fn t_upper(p: f64, df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    t.inverse_cdf(1.0 - p)
}

/// Student's t survival function.
pub fn t_sf(x: f64, df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    t.sf(x)
}

/// Half-sets of Gauss–Legendre abscissae/weights used by the bivariate
/// normal routine (positive nodes only; the rule is symmetric).
struct BvnRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

fn bvn_rule(points: usize) -> &'static BvnRule {
    use std::sync::OnceLock;
    static R6: OnceLock<BvnRule> = OnceLock::new();
    static R12: OnceLock<BvnRule> = OnceLock::new();
    static R20: OnceLock<BvnRule> = OnceLock::new();
    let cell = match points {
        6 => &R6,
        12 => &R12,
        _ => &R20,
    };
    cell.get_or_init(|| {
        let gl = GaussLegendre::new(points);
        let (x, w): (Vec<f64>, Vec<f64>) = gl
            .nodes
            .iter()
            .zip(&gl.weights)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, w)| (*x, *w))
            .unzip();
        BvnRule { x, w }
    })
}

/// Upper orthant probability P(X > h, Y > k) for a standard bivariate
/// normal pair with correlation `r`.
///
/// Accuracy is about 1e-15 absolute (Genz, 2004).
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return norm_sf(k);
    }
    if k == f64::NEG_INFINITY {
        return norm_sf(h);
    }
    let rule = if r.abs() < 0.3 {
        bvn_rule(6)
    } else if r.abs() < 0.75 {
        bvn_rule(12)
    } else {
        bvn_rule(20)
    };
    let tp = 2.0 * PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in rule.x.iter().zip(&rule.w) {
            for s in [-1.0, 1.0] {
                let sn = (asr * (1.0 + s * x) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (2.0 * tp) + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * tp.sqrt()
                    * norm_cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (x, w) in rule.x.iter().zip(&rule.w) {
                for s in [-1.0, 1.0] {
                    let xs = (a * (s * x + 1.0)).powi(2);
                    let rs = (1.0 - xs).sqrt();
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        bvn += a
                            * w
                            * asr.exp()
                            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn = -bvn / tp;
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Gauss–Legendre rule on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on Pₙ.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// ∫ₐᵇ f(x) dx with the rule mapped onto [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integrates over consecutive pieces delimited by sorted `breaks`.
    pub fn integrate_pieces<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        breaks
            .windows(2)
            .map(|w| self.integrate(w[0], w[1], &mut f))
            .sum()
    }
}

/// Brent's bracketed root finder for `f(x) = 0` on `[a, b]`.
///
/// Fails with [`Error::Infeasible`] when the bracket does not straddle a
/// sign change, reporting the endpoint values.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Infeasible(format!(
            "root not bracketed on [{a}, {b}]: f(a) = {fa:.6e}, f(b) = {fb:.6e}"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
    }
    Err(Error::Numeric(format!(
        "Brent iteration did not converge within {max_iter} steps (last x = {b})"
    )))
}

/// Bisection on a predicate that is `false` at `lo` and `true` at `hi`;
/// returns the transition point to within `tol`.
pub fn bisect_transition<P: FnMut(f64) -> bool>(mut pred: P, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimises a unimodal function on `[a, b]` by golden-section search.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Binomial probability mass function over `0..=n`.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[n as usize] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=n)
        .map(|k| (ln_binomial(n, k) + k as f64 * lp + (n - k) as f64 * lq).exp())
        .collect()
}

/// Binomial upper tail P(S ≥ r) for S ~ Bin(n, p).
pub fn binomial_sf(n: u64, p: f64, r: i64) -> f64 {
    if r <= 0 {
        return 1.0;
    }
    if r as u64 > n {
        return 0.0;
    }
    binomial_pmf(n, p)[r as usize..].iter().sum::<f64>().min(1.0)
}

/// Binomial distribution function P(S ≤ r).
pub fn binomial_cdf(n: u64, p: f64, r: i64) -> f64 {
    (1.0 - binomial_sf(n, p, r + 1)).clamp(0.0, 1.0)
}

/// Ceiling with a relative guard against floating-point noise, so that
/// products such as 1.1 × 10 round up to 11 rather than 12.
pub fn guarded_ceil(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail_values() {
        assert!((norm_sf(1.959963984540054) - 0.025).abs() < 1e-10);
        assert!((z_upper(0.025) - 1.959963984540054).abs() < 1e-10);
        assert!((norm_quantile(0.975) - 1.959963984540054).abs() < 1e-10);
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bvn_matches_orthant_identity() {
        // P(X > 0, Y > 0) = 1/4 + asin(r) / (2π)
        for r in [-0.99, -0.8, -0.5, -0.1, 0.0, 0.2, 0.6, 0.93, 0.999] {
            let want = 0.25 + f64::asin(r) / (2.0 * PI);
            assert!((bvn_upper(0.0, 0.0, r) - want).abs() < 1e-12, "r = {r}");
        }
    }

    #[test]
    fn bvn_independent_and_limits() {
        let p = bvn_upper(0.7, -0.3, 0.0);
        assert!((p - norm_sf(0.7) * norm_sf(-0.3)).abs() < 1e-14);
        assert_eq!(bvn_upper(f64::INFINITY, 0.0, 0.5), 0.0);
        assert!((bvn_upper(f64::NEG_INFINITY, 1.0, 0.5) - norm_sf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn bvn_agrees_with_quadrature() {
        // P(X > h, Y > k) = ∫_h^∞ φ(x) Φ̄((k − r x)/√(1−r²)) dx
        let gl = GaussLegendre::new(200);
        for &(h, k, r) in &[(0.3, -0.4, 0.5), (1.2, 0.8, 0.95), (-0.5, 0.2, -0.7), (2.0, 2.5, 0.85)] {
            let s: f64 = 1.0 - r * r;
            let q = gl.integrate(h, h + 12.0, |x| norm_pdf(x) * norm_sf((k - r * x) / s.sqrt()));
            assert!((bvn_upper(h, k, r) - q).abs() < 1e-10, "({h},{k},{r})");
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15) + 3.0 * x * x);
        assert!((v - (2f64.powi(16) / 16.0 + 8.0)).abs() < 1e-9);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn brent_finds_cubic_root_and_reports_bracket_failure() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 3.0, 1e-12, 200).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-10);
        let err = brent(|x| x * x + 1.0, -1.0, 1.0, 1e-8, 100).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn binomial_tail_sums() {
        let pmf = binomial_pmf(29, 0.1);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((binomial_sf(10, 0.5, 5) - 638.0 / 1024.0).abs() < 1e-12);
        assert!((binomial_cdf(10, 0.5, 4) - 386.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn guarded_ceiling() {
        assert_eq!(guarded_ceil(1.1 * 10.0), 11.0);
        assert_eq!(guarded_ceil(96.47), 97.0);
        assert_eq!(guarded_ceil(3.0), 3.0);
    }
}
