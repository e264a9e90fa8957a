//! Boundary-crossing probabilities of group sequential tests.
//!
//! On the Brownian scale B(t) = Z_k·√t_k (t the information fraction), a
//! one-sided group sequential test rejects at analysis k when
//! B(t_k) ≥ b_k. The continuation density between analyses is propagated
//! by Gauss–Legendre quadrature (Armitage–McPherson–Rowe recursion).

use crate::error::{Error, Result};
use crate::numerics::{brent, norm_pdf, norm_sf, GaussLegendre};

const WINDOW_SD: f64 = 8.0;
const PIECES: usize = 24;
const NODES: usize = 32;

/// Probability that B(t_k) ≥ bounds[k] for some k, where B is Brownian
/// motion with the given drift per unit information.
pub fn upper_crossing(t: &[f64], bounds: &[f64], drift: f64) -> f64 {
    assert_eq!(t.len(), bounds.len());
    let gl = GaussLegendre::new(NODES);
    // Continuation sub-density as (node, weight·density).
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    let mut prev_t = 0.0;
    for (k, (&tk, &bk)) in t.iter().zip(bounds).enumerate() {
        let dt = tk - prev_t;
        let sd = dt.sqrt();
        if k == 0 {
            total += norm_sf((bk - drift * tk) / sd);
        } else {
            total += nodes
                .iter()
                .map(|&(x, w)| w * norm_sf((bk - x - drift * dt) / sd))
                .sum::<f64>();
        }
        if k + 1 == t.len() {
            break;
        }
        // New continuation nodes on (mean − 8 sd, b_k).
        let mean = drift * tk;
        let full_sd = tk.sqrt();
        let lo = mean - WINDOW_SD * full_sd;
        let hi = bk.min(mean + WINDOW_SD * full_sd);
        let mut next = Vec::with_capacity(PIECES * NODES);
        if hi > lo {
            let width = (hi - lo) / PIECES as f64;
            for p in 0..PIECES {
                let a = lo + p as f64 * width;
                let half = 0.5 * width;
                let mid = a + half;
                for (z, w) in gl.nodes.iter().zip(&gl.weights) {
                    let y = mid + half * z;
                    let dens = if k == 0 {
                        norm_pdf((y - drift * tk) / sd) / sd
                    } else {
                        nodes
                            .iter()
                            .map(|&(x, wx)| wx * norm_pdf((y - x - drift * dt) / sd) / sd)
                            .sum()
                    };
                    next.push((y, w * half * dens));
                }
            }
        }
        nodes = next;
        prev_t = tk;
    }
    total.clamp(0.0, 1.0)
}

/// O'Brien–Fleming constant c: rejecting when Z_k ≥ c/√t_k gives
/// one-sided level `alpha` under the null.
pub fn obf_constant(t: &[f64], alpha: f64) -> Result<f64> {
    if t.is_empty() || t.windows(2).any(|w| w[1] <= w[0]) || t[0] <= 0.0 || (t[t.len() - 1] - 1.0).abs() > 1e-12 {
        return Err(Error::spec("groups", "information fractions must increase to 1"));
    }
    brent(
        |c| upper_crossing(t, &vec![c; t.len()], 0.0) - alpha,
        0.1,
        20.0,
        1e-9,
        200,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::z_upper;

    #[test]
    fn single_look_is_a_normal_tail() {
        let c = obf_constant(&[1.0], 0.025).unwrap();
        assert!((c - z_upper(0.025)).abs() < 1e-7);
    }

    #[test]
    fn five_equal_groups_match_published_constant() {
        // Jennison & Turnbull, Table 4.1 (one-sided 0.025, K = 5): 2.040.
        let t: Vec<f64> = (1..=5).map(|k| k as f64 / 5.0).collect();
        let c = obf_constant(&t, 0.025).unwrap();
        assert!((c - 2.040).abs() < 2e-3, "{c}");
    }

    #[test]
    fn two_looks_match_bivariate_normal() {
        // P(Z1 ≥ h or Z2 ≥ h) with corr √(1/2), both bounds on the Z scale.
        let t = [0.5, 1.0];
        let h = 2.0;
        let bounds = [h * 0.5f64.sqrt(), h];
        let p = upper_crossing(&t, &bounds, 0.0);
        let both = crate::numerics::bvn_upper(h, h, 0.5f64.sqrt());
        let expect = 2.0 * norm_sf(h) - both;
        assert!((p - expect).abs() < 1e-8, "{p} vs {expect}");
    }
}
