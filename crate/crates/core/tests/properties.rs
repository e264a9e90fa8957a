use std::collections::HashMap;
use std::path::PathBuf;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use glr_adapt_core::calibration::normal_approx::{Events, NormalApprox};
use glr_adapt_core::numerics::golden_min;
use glr_adapt_core::{Action, Design, DesignSpec, ExponentialFamily, Model, Param, SufficientStat};

fn fixture(name: &str) -> DesignSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Each instance with a few interior parameter points.
fn instances() -> Vec<(Model, Vec<Param>)> {
    vec![
        (
            Model::normal(1.0),
            [-1.0, 0.0, 0.3, 2.0].iter().map(|&t| Param::scalar(t)).collect(),
        ),
        (
            Model::normal(0.49),
            [-0.4, 0.1, 0.9].iter().map(|&t| Param::scalar(t)).collect(),
        ),
        (
            Model::bernoulli(),
            [0.02, 0.1, 0.3, 0.5, 0.9].iter().map(|&p| Param::scalar(p)).collect(),
        ),
        (
            Model::two_arm_bernoulli(0.5),
            [(0.5, 0.5), (0.7, 0.5), (0.2, 0.6), (0.95, 0.05)]
                .iter()
                .map(|&(p, q)| Param::new(&[p, q]))
                .collect(),
        ),
        (
            Model::two_sample_normal(1.0),
            [(0.0, 0.0, 1.0), (1.2, 0.0, 0.49), (-0.5, 0.3, 4.0)]
                .iter()
                .map(|&(a, b, v)| Param::new(&[a, b, v]))
                .collect(),
        ),
    ]
}

/// Range of attainable u values around u(θ) for the grid.
fn u_range(model: &Model) -> (f64, f64) {
    match model {
        Model::Bernoulli(_) => (0.005, 0.995),
        Model::TwoArmBernoulli(_) => (-0.99, 0.99),
        _ => (-3.0, 3.0),
    }
}

#[test]
fn constrained_info_is_monotone_away_from_the_estimate() {
    for (model, points) in instances() {
        let (lo, hi) = u_range(&model);
        let grid: Vec<f64> = (0..=80).map(|i| lo + (hi - lo) * i as f64 / 80.0).collect();
        for theta in &points {
            let u = model.u(theta);
            let info: Vec<(f64, f64)> = grid
                .iter()
                .map(|&v| (v, model.constrained_info(theta, v).unwrap()))
                .collect();
            for w in info.windows(2) {
                let ((v0, i0), (v1, i1)) = (w[0], w[1]);
                if v0 >= u {
                    assert!(i1 >= i0 - 1e-9, "{model:?} θ={theta:?}: I({v1})={i1} < I({v0})={i0}");
                }
                if v1 <= u {
                    assert!(i0 >= i1 - 1e-9, "{model:?} θ={theta:?}: I({v0})={i0} < I({v1})={i1}");
                }
            }
        }
    }
}

#[test]
fn kl_is_positive_except_on_the_diagonal() {
    for (model, points) in instances() {
        for a in &points {
            assert!(model.kl(a, a).unwrap().abs() < 1e-12, "{model:?} {a:?}");
            for b in &points {
                if a != b {
                    assert!(model.kl(a, b).unwrap() > 0.0, "{model:?} {a:?} {b:?}");
                }
            }
        }
    }
}

/// Brute-force inf of I(θ, λ) over {u(λ) = v} by nested golden sections on
/// a bracketing grid.
fn brute_constrained_info(model: &Model, theta: &Param, v: f64) -> f64 {
    let refine = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| -> f64 {
        let n = 400;
        let h = (hi - lo) / n as f64;
        let (mut best, mut at) = (f64::INFINITY, lo);
        for i in 0..=n {
            let x = lo + h * i as f64;
            let y = f(x);
            if y < best {
                best = y;
                at = x;
            }
        }
        golden_min(f, (at - h).max(lo), (at + h).min(hi), 1e-12, 200).1.min(best)
    };
    match model {
        Model::NormalKnownVar(_) => model.kl(theta, &Param::scalar(v)).unwrap(),
        Model::Bernoulli(_) => model.kl(theta, &Param::scalar(v)).unwrap(),
        Model::TwoArmBernoulli(_) => {
            let (lo, hi) = ((-v).max(0.0) + 1e-9, (1.0 - v).min(1.0) - 1e-9);
            refine(&|q: f64| model.kl(theta, &Param::new(&[q + v, q])).unwrap(), lo, hi)
        }
        Model::TwoSampleNormalUnknownVar(_) => {
            let c = 0.5 * (theta[0] + theta[1]);
            let span = 4.0 * (theta[0] - theta[1]).abs().max(v.abs()).max(1.0);
            let inner = |a: f64| {
                refine(
                    &|ls: f64| model.kl(theta, &Param::new(&[a + v, a, ls.exp()])).unwrap(),
                    theta[2].ln() - 6.0,
                    theta[2].ln() + 6.0,
                )
            };
            refine(&inner, c - span, c + span)
        }
    }
}

#[test]
fn constrained_info_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for (model, _) in instances() {
        let per_instance = if matches!(model, Model::TwoSampleNormalUnknownVar(_)) { 25 } else { 100 };
        for _ in 0..per_instance {
            let (theta, v) = match model {
                Model::NormalKnownVar(_) => (Param::scalar(rng.random_range(-2.0..2.0)), rng.random_range(-2.0..2.0)),
                Model::Bernoulli(_) => (Param::scalar(rng.random_range(0.02..0.98)), rng.random_range(0.02..0.98)),
                Model::TwoArmBernoulli(_) => (
                    Param::new(&[rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)]),
                    rng.random_range(-0.8..0.8),
                ),
                Model::TwoSampleNormalUnknownVar(_) => (
                    Param::new(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..3.0)]),
                    rng.random_range(-1.5..1.5),
                ),
            };
            let fast = model.constrained_info(&theta, v).unwrap();
            let slow = brute_constrained_info(&model, &theta, v);
            assert!((fast - slow).abs() <= 1e-6, "{model:?} θ={theta:?} v={v}: {fast} vs {slow}");
        }
    }
}

fn arb_stat_and_model() -> impl Strategy<Value = (Model, SufficientStat, f64)> {
    prop_oneof![
        (1u64..500, -3.0f64..3.0, -2.0f64..2.0).prop_map(|(n, xbar, u)| {
            (Model::normal(1.0), SufficientStat::one_arm(n, xbar * n as f64), u)
        }),
        (1u64..300, 0.0f64..=1.0, 0.01f64..0.99).prop_map(|(n, f, u)| {
            (Model::bernoulli(), SufficientStat::one_arm(n, (f * n as f64).round()), u)
        }),
        (1u64..200, 0.0f64..=1.0, 0.0f64..=1.0, -0.9f64..0.9).prop_map(|(n, f, g, u)| {
            let nf = n as f64;
            (Model::two_arm_bernoulli(0.5), SufficientStat::two_arm(n, (f * nf).round(), n, (g * nf).round()), u)
        }),
        (2u64..100, -2.0f64..2.0, -2.0f64..2.0, 0.1f64..4.0, -2.0f64..2.0).prop_map(|(n, mx, my, v, u)| {
            let nf = n as f64;
            let (sx, sy) = (mx * nf, my * nf);
            (
                Model::two_sample_normal(1.0),
                SufficientStat::two_sample(n, sx, sx * mx + v * nf, n, sy, sy * my + v * nf),
                u,
            )
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn signed_root_squares_to_twice_n_lambda((model, stat, target) in arb_stat_and_model()) {
        let g = model.glr(&stat, target).unwrap();
        let n = stat.size() as f64;
        prop_assert!(g.lambda >= 0.0);
        let lhs = g.ell * g.ell;
        let rhs = 2.0 * n * g.lambda;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300), "{} vs {}", lhs, rhs);
        prop_assert!((g.z * g.z - 2.0 * g.lambda).abs() <= 1e-10 * g.lambda.max(1e-300));
        if g.lambda > 0.0 {
            prop_assert_eq!(g.ell.signum(), (g.u_hat - target).signum());
        }
    }

    #[test]
    fn stage_sizes_stay_within_caps(s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0) {
        let d3 = Design::new(fixture("table5_adapt.json")).unwrap();
        let m = d3.m();
        let x1 = (s1 - 0.5) * 2.0 * m as f64;
        let n2 = d3.second_stage_size(&SufficientStat::one_arm(m, x1)).unwrap();
        prop_assert!(n2 >= m && n2 <= d3.cap());

        let d4 = Design::new(fixture("four_stage_adapt.json")).unwrap();
        let m = d4.m();
        let stat1 = SufficientStat::one_arm(m, (s1 - 0.3) * m as f64);
        let n2 = d4.second_stage_size(&stat1).unwrap();
        prop_assert!(n2 >= m && n2 <= d4.spec().max_n);
        let stat2 = SufficientStat::one_arm(n2, (s2 - 0.3) * n2 as f64);
        let n3 = d4.third_stage_size(&stat2, n2).unwrap();
        prop_assert!(n3 >= n2 && n3 <= d4.max_n_prime().unwrap());
    }
}

/// Outcome of a single-arm path given per-analysis increments: the sizes
/// used and whether H₀ was rejected.
fn run_path(design: &Design, th: &glr_adapt_core::Thresholds, counts: &[u64]) -> Option<(Vec<u64>, bool)> {
    let mut state = design.initial_state();
    let mut sizes = Vec::new();
    let mut prev = 0u64;
    for &c in counts {
        let k = state.pending_increment()?;
        let inc = SufficientStat::one_arm(k, c.checked_sub(prev)? as f64);
        if c - prev > k {
            return None;
        }
        let (next, d) = design.step(th, &state, &inc).ok()?;
        sizes.push(d.n);
        prev = c;
        match d.action {
            Action::RejectH0 => return Some((sizes, true)),
            Action::AcceptH0 => return Some((sizes, false)),
            Action::Continue { .. } => state = next,
        }
    }
    None
}

#[test]
fn larger_success_paths_also_reject() {
    // Exhaustive over the Table 1(a) design: group complete paths by their
    // stage sizes and compare every pair ordered pointwise in cumulative
    // successes.
    let d = Design::new(fixture("table1a_adapt.json")).unwrap();
    let th = d.thresholds(2.5, 1.0, 1.0);
    let (m, cap) = (d.m(), d.cap());
    let mut groups: HashMap<Vec<u64>, Vec<(Vec<u64>, bool)>> = HashMap::new();
    for c1 in 0..=m {
        for c2 in c1..=cap {
            for c3 in c2..=cap {
                let counts = [c1, c2, c3];
                // Keep only the prefix the design actually used.
                for len in 1..=3 {
                    if let Some((sizes, reject)) = run_path(&d, &th, &counts[..len]) {
                        if sizes.len() == len {
                            groups.entry(sizes).or_default().push((counts[..len].to_vec(), reject));
                        }
                    }
                }
            }
        }
    }
    let mut checked = 0usize;
    for paths in groups.values() {
        for (a, ra) in paths {
            if !ra {
                continue;
            }
            for (b, rb) in paths {
                if b.iter().zip(a).all(|(x, y)| x >= y) {
                    assert!(rb, "{a:?} rejects but larger {b:?} does not");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn crossing_probabilities_are_monotone_in_their_thresholds() {
    let d = Design::new(fixture("table5_adapt.json")).unwrap();
    let na = NormalApprox::new(&d, 32).unwrap();
    let theta_f = na.design.theta_fut;
    let grid: Vec<f64> = (0..12).map(|i| 0.5 + 0.35 * i as f64).collect();
    let (b, bt, c) = (2.34, 1.09, 1.62);
    let fut: Vec<f64> = grid.iter().map(|&x| na.probabilities(theta_f, b, x, c, Events::Futility).futility).collect();
    let early: Vec<f64> = grid.iter().map(|&x| na.probabilities(0.0, x, bt, c, Events::Rejection).early_rejection()).collect();
    let fin: Vec<f64> = grid.iter().map(|&x| na.probabilities(0.0, b, bt, x, Events::Final).final_rejection).collect();
    for series in [&fut, &early, &fin] {
        for w in series.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{series:?}");
        }
    }
}
