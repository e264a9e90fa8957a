//! Simon's two-stage single-arm binomial design: stop for futility when
//! S_m ≤ r₁, otherwise continue to M and reject H₀ when S_M > r₂.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::binomial_pmf;
use crate::rng::map_indices;

/// Exact characteristics of a Simon design at one success rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimonOc {
    pub power: f64,
    pub ess: f64,
    pub e_stages: f64,
    /// Probability of early termination.
    pub pet: f64,
}

/// Upper tails P(X ≥ j), j = 0..=n+1, of Bin(n, p).
fn upper_tails(n: u64, p: f64) -> Vec<f64> {
    let pmf = binomial_pmf(n, p);
    let mut tail = vec![0.0; n as usize + 2];
    for j in (0..=n as usize).rev() {
        tail[j] = (tail[j + 1] + pmf[j]).min(1.0);
    }
    tail
}

fn tail_at(tail: &[f64], j: i64) -> f64 {
    if j <= 0 {
        1.0
    } else if j as usize >= tail.len() {
        0.0
    } else {
        tail[j as usize]
    }
}

/// Rejection probability Σ_{k>r₁} P(S_m = k)·P(X_{M−m} > r₂ − k).
fn reject_prob(pmf_m: &[f64], tail_rest: &[f64], r1: u64, r2: u64) -> f64 {
    pmf_m
        .iter()
        .enumerate()
        .skip(r1 as usize + 1)
        .map(|(k, w)| w * tail_at(tail_rest, r2 as i64 - k as i64 + 1))
        .sum::<f64>()
        .min(1.0)
}

/// Exact power, expected sample size and expected number of stages.
pub fn simon_oc(m: u64, max_n: u64, r1: u64, r2: u64, p: f64) -> SimonOc {
    let pmf = binomial_pmf(m, p);
    let pet: f64 = pmf[..=(r1.min(m) as usize)].iter().sum::<f64>().min(1.0);
    let tail = upper_tails(max_n - m, p);
    SimonOc {
        power: reject_prob(&pmf, &tail, r1, r2),
        ess: m as f64 + (max_n - m) as f64 * (1.0 - pet),
        e_stages: 1.0 + (1.0 - pet),
        pet,
    }
}

/// Result of [`simon_search`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimonDesign {
    pub m: u64,
    #[serde(rename = "M")]
    pub max_n: u64,
    pub r1: u64,
    pub r2: u64,
    /// Expected sample size under p₀.
    pub ess0: f64,
    /// Exact Type I error at p₀.
    pub alpha: f64,
    /// Exact power at p₁.
    pub power: f64,
}

/// Smallest single-stage size with an exact level-α binomial test of
/// power ≥ 1 − β at p₁.
pub fn fixed_sample_size(p0: f64, p1: f64, alpha: f64, beta: f64, limit: u64) -> Option<u64> {
    (1..=limit).find(|&n| {
        let t0 = upper_tails(n, p0);
        // Smallest critical count with P₀(S ≥ r) ≤ α.
        let r = (0..=n as usize + 1).find(|&r| t0[r] <= alpha).unwrap_or(n as usize + 1);
        tail_at(&upper_tails(n, p1), r as i64) >= 1.0 - beta
    })
}

/// Upper limit on the fixed sample size searched before declaring the
/// problem infeasible.
const FSS_LIMIT: u64 = 5000;

/// Simon's optimal design: among all (m, M, r₁, r₂) with exact Type I
/// error ≤ α at p₀ and power ≥ 1 − β at p₁, the one minimising E_{p₀}N.
/// M is searched up to twice the fixed sample size; ties go to the smaller
/// M, then the smaller m.
pub fn simon_search(p0: f64, p1: f64, alpha: f64, beta: f64) -> Result<SimonDesign> {
    if !(0.0 < p0 && p0 < p1 && p1 < 1.0) {
        return Err(Error::Infeasible(format!(
            "no design can separate p0 = {p0} from p1 = {p1}; need 0 < p0 < p1 < 1"
        )));
    }
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::spec(name, "must lie in (0, 1)"));
        }
    }
    let fss = fixed_sample_size(p0, p1, alpha, beta, FSS_LIMIT)
        .ok_or_else(|| Error::Infeasible(format!("no fixed-sample test up to n = {FSS_LIMIT} meets the error targets")))?;
    let bound = 2 * fss;
    let per_m: Vec<Option<SimonDesign>> = map_indices(bound - 1, |i| best_for_max(p0, p1, alpha, beta, i + 2));
    let mut best: Option<SimonDesign> = None;
    for cand in per_m.into_iter().flatten() {
        if best.is_none_or(|b| cand.ess0 < b.ess0 - 1e-12) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::Infeasible(format!("no two-stage design with M ≤ {bound} meets the error targets")))
}

fn best_for_max(p0: f64, p1: f64, alpha: f64, beta: f64, max_n: u64) -> Option<SimonDesign> {
    let mut best: Option<SimonDesign> = None;
    for m in 1..max_n {
        let (b0, b1) = (binomial_pmf(m, p0), binomial_pmf(m, p1));
        let (t0, t1) = (upper_tails(max_n - m, p0), upper_tails(max_n - m, p1));
        let mut pet = 0.0;
        for r1 in 0..m {
            pet += b0[r1 as usize];
            let ess0 = m as f64 + (max_n - m) as f64 * (1.0 - pet);
            if best.is_some_and(|b| ess0 >= b.ess0 - 1e-12) {
                continue;
            }
            // Smallest r₂ with exact level ≤ α (the level falls as r₂ grows).
            let (mut lo, mut hi) = (r1, max_n);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if reject_prob(&b0, &t0, r1, mid) <= alpha {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let r2 = lo;
            if r2 >= max_n {
                continue;
            }
            let power = reject_prob(&b1, &t1, r1, r2);
            if power >= 1.0 - beta {
                best = Some(SimonDesign {
                    m,
                    max_n,
                    r1,
                    r2,
                    ess0,
                    alpha: reject_prob(&b0, &t0, r1, r2),
                    power,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oc_limits() {
        let oc = simon_oc(10, 29, 1, 5, 1e-12);
        assert!(oc.power < 1e-9);
        assert!((oc.ess - 10.0).abs() < 1e-6);
        let oc = simon_oc(10, 29, 1, 5, 1.0 - 1e-12);
        assert!((oc.power - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oc_matches_direct_enumeration() {
        let (m, mm, r1, r2, p) = (10u64, 29u64, 1u64, 5u64, 0.3);
        let a = binomial_pmf(m, p);
        let b = binomial_pmf(mm - m, p);
        let mut power = 0.0;
        for (k, wa) in a.iter().enumerate().skip(r1 as usize + 1) {
            for (j, wb) in b.iter().enumerate() {
                if (k + j) as u64 > r2 {
                    power += wa * wb;
                }
            }
        }
        let oc = simon_oc(m, mm, r1, r2, p);
        assert!((oc.power - power).abs() < 1e-14);
    }

    #[test]
    fn zero_effect_is_infeasible() {
        assert_eq!(simon_search(0.1, 0.1, 0.05, 0.2).unwrap_err().code(), "infeasible");
    }
}
