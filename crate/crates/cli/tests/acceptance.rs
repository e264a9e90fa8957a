//! Acceptance suite: one PASS/FAIL line per published or structural
//! target. Run with `cargo test -p glr-adapt --test acceptance`.
//!
//! Every check evaluates the target as stated; a target the engine does
//! not reach is reported as FAIL with the measured values, and the binary
//! exits non-zero.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use glr_adapt_core::calibration::calibrate;
use glr_adapt_core::comparators::{chw_new_maximum, simon_oc, simon_search, Comparator, ComparatorSpec};
use glr_adapt_core::design::Calibration;
use glr_adapt_core::evaluation::diagnostics::{efficiency_diagnostic, DiagnosedProcedure, DiagnosticPlan};
use glr_adapt_core::evaluation::{exact_oc, simulate_oc, Adaptive};
use glr_adapt_core::{schema, Action, Design, DesignSpec, Thresholds, ExponentialFamily, Model, Param, SufficientStat};
use glr_adapt_service::session::AuditEntry;
use glr_adapt_service::store::FailPoint;
use glr_adapt_service::{replay, Store, TrialSession};

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn design_spec(name: &str) -> DesignSpec {
    serde_json::from_str(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

fn comparator_spec(name: &str) -> ComparatorSpec {
    serde_json::from_str(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

/// Outcome of one criterion: pass flag plus the measurements behind it.
struct Verdict {
    pass: bool,
    detail: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { pass: true, detail: Vec::new() }
    }

    /// Records a check; `what` is printed either way.
    fn check(&mut self, ok: bool, what: String) {
        if !ok {
            self.pass = false;
        }
        self.detail.push(if ok { what } else { format!("MISS {what}") });
    }

    fn note(&mut self, what: String) {
        self.detail.push(format!("info {what}"));
    }

    fn runtime(&mut self, t: Instant, limit: Duration) {
        let e = t.elapsed();
        self.check(e < limit, format!("runtime {:.2?} < {:?}", e, limit));
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol + 1e-12
}

// ---------------------------------------------------------------------------

fn table2a() -> Verdict {
    let mut v = Verdict::new();
    let t = Instant::now();
    let d = Design::new(design_spec("table1a_adapt.json")).unwrap();
    let th = d.thresholds(2.5, 1.0, 1.0);
    // The row labelled p₁ = .3 sits at the design's implied alternative.
    let p1 = d.u1();
    // (p, ADAPT ess, power, stages, Sim2 ess, power, stages)
    let rows = [
        (0.05, 11.6, 0.003, 1.1, 11.6, 0.002, 1.1),
        (0.1, 14.5, 0.05, 1.3, 15.0, 0.047, 1.3),
        (0.2, 18.8, 0.433, 1.6, 21.9, 0.431, 1.6),
        (p1, 18.1, 0.794, 1.6, 26.1, 0.796, 1.8),
        (0.4, 14.8, 0.949, 1.4, 28.1, 0.950, 2.0),
        (0.5, 12.1, 0.989, 1.2, 28.8, 0.989, 2.0),
        (0.6, 10.1, 0.999, 1.0, 29.0, 0.999, 2.0),
    ];
    let grid: Vec<Param> = rows.iter().map(|r| Param::scalar(r.0)).collect();
    let oc = exact_oc(&d, &th, &grid).unwrap();
    for (r, pt) in rows.iter().zip(&oc.points) {
        let sim = simon_oc(10, 29, 1, 5, r.0);
        for (name, ess, power, stages, want) in [
            ("ADAPT", pt.ess, pt.power, pt.e_stages, (r.1, r.2, r.3)),
            ("Sim2", sim.ess, sim.power, sim.e_stages, (r.4, r.5, r.6)),
        ] {
            let ok = within(ess, want.0, 0.1) && within(power, want.1, 0.003) && within(stages, want.2, 0.05);
            v.check(
                ok,
                format!(
                    "{name} p={:.5}: {ess:.2} ({:.2}%) [{stages:.3}] vs {:.1} ({:.1}%) [{:.1}]",
                    r.0,
                    100.0 * power,
                    want.0,
                    100.0 * want.1,
                    want.2
                ),
            );
        }
    }
    v.runtime(t, Duration::from_secs(5));
    if !v.pass {
        // How the p = .6 row moves with the error-spending fractions when
        // the thresholds are recalibrated exactly.
        for eps in [0.25, 0.5, 0.75] {
            let mut spec = design_spec("table1a_adapt.json");
            spec.eps = eps;
            spec.eps_tilde = eps;
            let d = Design::new(spec).unwrap();
            match calibrate(&d) {
                Ok(r) => {
                    let th = r.thresholds;
                    let pt = &exact_oc(&d, &th, &[Param::scalar(0.6)]).unwrap().points[0];
                    v.note(format!(
                        "eps=eps~={eps}: thresholds ({:.3}, {:.3}, {:.3}); p=.6 → {:.2} ({:.2}%) [{:.3}]",
                        th.b,
                        th.b_tilde,
                        th.c,
                        pt.ess,
                        100.0 * pt.power,
                        pt.e_stages
                    ));
                }
                Err(e) => v.note(format!("eps=eps~={eps}: calibration failed: {e}")),
            }
        }
    }
    v
}

fn table1_structure() -> Verdict {
    let mut v = Verdict::new();
    let d = Design::new(design_spec("table1a_adapt.json")).unwrap();
    let table = d.decision_table(&d.thresholds(2.5, 1.0, 1.0)).unwrap();
    for row in &table.rows {
        let (want, region) = match row.s1 {
            0 | 1 => (Action::AcceptH0, None),
            2 => (Action::Continue { next_n: 29 }, None),
            3 => (Action::Continue { next_n: 20 }, Some((Some(3), Some(6)))),
            _ => (Action::RejectH0, None),
        };
        let got_region = row.stage2.as_ref().map(|r| (r.accept_max, r.reject_min));
        v.check(
            row.action == want && got_region == region,
            format!("S1={}: {:?} {:?}", row.s1, row.action, got_region),
        );
    }
    v.check(
        table.final_reject_min == Some(6),
        format!("final rejection from S29 >= {:?}", table.final_reject_min),
    );
    let s = simon_search(0.1, 0.3, 0.05, 0.2).unwrap();
    v.check(
        (s.m, s.max_n, s.r1, s.r2) == (10, 29, 1, 5),
        format!("Sim2 search ({}, {}, {}, {})", s.m, s.max_n, s.r1, s.r2),
    );
    v
}

fn simon_table2b() -> Verdict {
    let mut v = Verdict::new();
    let t = Instant::now();
    let s = simon_search(0.3, 0.44, 0.1, 0.1).unwrap();
    v.check(within(s.ess0, 51.4, 0.1), format!("E_p0 N {:.2} vs 51.4 ± 0.1", s.ess0));
    v.check(within(s.alpha, 0.100, 0.002), format!("null power {:.2}% vs 10.0 ± 0.2", 100.0 * s.alpha));
    v.note(format!(
        "search returned ({}, {}, {}, {}) with power {:.3} at .44",
        s.m, s.max_n, s.r1, s.r2, s.power
    ));
    v.runtime(t, Duration::from_secs(60));
    if !v.pass {
        let paper = simon_oc(30, 82, 9, 29, 0.44);
        v.note(format!(
            "(30, 82, 9, 29) has power {:.3} < .9 at .44, so it is not admissible for these targets",
            paper.power
        ));
    }
    v
}

fn table3() -> Verdict {
    let mut v = Verdict::new();
    let t = Instant::now();
    let grid = [Param::new(&[0.5, 0.5]), Param::new(&[0.7, 0.5])];
    let d = Design::new(design_spec("table3_adapt.json")).unwrap();
    let th = d.thresholds(2.12, 1.03, 1.56);
    let mut oc = simulate_oc(&Adaptive::new(d, th), &grid, 100_000, 3).unwrap();
    let avss = oc.set_avss(&[0.5, 0.5], &[0.7, 0.5]).unwrap();
    let alt = &oc.points[1];
    v.check(within(alt.ess, 55.1, 1.0), format!("ADAPT ESS {:.2} vs 55.1 ± 1.0", alt.ess));
    v.check(within(alt.power, 0.778, 0.007), format!("ADAPT power {:.2}% vs 77.8 ± 0.7", 100.0 * alt.power));
    v.check(within(avss, 51.2, 1.0), format!("ADAPT AvSS {avss:.2} vs 51.2 ± 1.0"));

    let c = Comparator::new(comparator_spec("table3_opt2.json")).unwrap();
    let mut oc = simulate_oc(&c, &grid, 100_000, 3).unwrap();
    let avss = oc.set_avss(&[0.5, 0.5], &[0.7, 0.5]).unwrap();
    let alt = &oc.points[1];
    v.check(within(alt.power, 0.804, 0.007), format!("Opt2 power {:.2}% vs 80.4 ± 0.7", 100.0 * alt.power));
    v.check(within(avss, 61.4, 1.0), format!("Opt2 AvSS {avss:.2} vs 61.4 ± 1.0"));
    v.runtime(t, Duration::from_secs(120));
    v
}

fn calibration_consistency() -> Verdict {
    let mut v = Verdict::new();
    let reps = 100_000;

    let d = Design::new(design_spec("table5_adapt.json")).unwrap();
    let th = calibrate(&d).unwrap().thresholds;
    for (name, got, want) in [("b", th.b, 2.68), ("b~", th.b_tilde, 1.75), ("c", th.c, 1.75)] {
        v.check(within(got, want, 0.05), format!("three-stage {name} = {got:.4} vs {want} ± 0.05"));
    }
    let alpha = d.spec().alpha;
    let pt = &simulate_oc(&Adaptive::new(d, th), &[Param::scalar(0.0)], reps, 5).unwrap().points[0];
    let se = pt.power_se.unwrap();
    v.check(
        (pt.power - alpha).abs() <= 3.0 * se,
        format!("three-stage Type I {:.4} vs {alpha} ± 3·{se:.4}", pt.power),
    );

    let d = Design::new(design_spec("four_stage_adapt.json")).unwrap();
    let th = calibrate(&d).unwrap().thresholds;
    for (name, got, want) in [("b", th.b, 3.48), ("b~", th.b_tilde, 2.1), ("c", th.c, 2.31)] {
        v.check(within(got, want, 0.08), format!("four-stage {name} = {got:.4} vs {want} ± 0.08"));
    }
    let pt = &simulate_oc(&Adaptive::new(d, th), &[Param::scalar(0.0)], reps, 6).unwrap().points[0];
    let se = pt.power_se.unwrap();
    v.check(
        pt.power <= 0.025 + 3.0 * se,
        format!("four-stage Type I {:.4} <= .025 + 3·{se:.4}", pt.power),
    );
    v
}

fn stein_table4() -> Verdict {
    let mut v = Verdict::new();
    let c = Comparator::new(comparator_spec("table4_stein.json")).unwrap();
    let s0: f64 = 0.7;
    let grid: Vec<Param> = [0.5, 1.0, 2.0, 10.0]
        .iter()
        .map(|k| Param::new(&[0.0, 0.0, (k * s0).powi(2)]))
        .collect();
    let oc = simulate_oc(&c, &grid, 100_000, 11).unwrap();
    for (k, pt) in [0.5, 1.0, 2.0, 10.0].iter().zip(&oc.points) {
        v.check(
            within(pt.power, 0.05, 0.002),
            format!("Type I at sigma={k}·s0: {:.2}% vs 5.0 ± 0.2", 100.0 * pt.power),
        );
    }
    for (i, want, tol) in [(1, 10.1, 0.2), (2, 38.2, 0.5), (3, 942.0, 15.0)] {
        let ess = oc.points[i].ess;
        v.check(within(ess, want, tol), format!("ESS {ess:.2} vs {want} ± {tol}"));
    }
    let alt = simulate_oc(&c, &[Param::new(&[1.2, 0.0, s0 * s0])], 100_000, 12).unwrap();
    let p = alt.points[0].power;
    v.check(within(p, 0.966, 0.004), format!("power at (delta, s0) {:.2}% vs 96.6 ± 0.4", 100.0 * p));
    v
}

// --- properties -------------------------------------------------------------

fn instances() -> Vec<(Model, Vec<Param>, (f64, f64))> {
    let scalars = |v: &[f64]| v.iter().map(|&t| Param::scalar(t)).collect::<Vec<_>>();
    vec![
        (Model::normal(1.0), scalars(&[-1.0, 0.0, 0.3, 2.0]), (-3.0, 3.0)),
        (Model::normal(0.49), scalars(&[-0.4, 0.1, 0.9]), (-3.0, 3.0)),
        (Model::bernoulli(), scalars(&[0.02, 0.1, 0.3, 0.5, 0.9]), (0.005, 0.995)),
        (
            Model::two_arm_bernoulli(0.5),
            [(0.5, 0.5), (0.7, 0.5), (0.2, 0.6), (0.95, 0.05)].iter().map(|&(p, q)| Param::new(&[p, q])).collect(),
            (-0.99, 0.99),
        ),
        (
            Model::two_sample_normal(1.0),
            [(0.0, 0.0, 1.0), (1.2, 0.0, 0.49), (-0.5, 0.3, 4.0)]
                .iter()
                .map(|&(a, b, s)| Param::new(&[a, b, s]))
                .collect(),
            (-3.0, 3.0),
        ),
    ]
}

/// Constrained information is nonincreasing towards u(θ) and
/// nondecreasing away from it.
fn monotonicity_suite() -> Result<usize, String> {
    let mut checked = 0;
    for (model, points, (lo, hi)) in instances() {
        let grid: Vec<f64> = (0..=80).map(|i| lo + (hi - lo) * i as f64 / 80.0).collect();
        for theta in &points {
            let u = model.u(theta);
            let info: Vec<f64> = grid.iter().map(|&x| model.constrained_info(theta, x).unwrap()).collect();
            for i in 1..grid.len() {
                let bad = (grid[i - 1] >= u && info[i] < info[i - 1] - 1e-9) || (grid[i] <= u && info[i - 1] < info[i] - 1e-9);
                if bad {
                    return Err(format!("{model:?} at {theta:?} between {} and {}", grid[i - 1], grid[i]));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn random_stat(model: &Model, rng: &mut ChaCha8Rng) -> (SufficientStat, f64) {
    match model {
        Model::NormalKnownVar(_) => {
            let n = rng.random_range(1..500u64);
            (SufficientStat::one_arm(n, rng.random_range(-3.0..3.0) * n as f64), rng.random_range(-2.0..2.0))
        }
        Model::Bernoulli(_) => {
            let n = rng.random_range(1..300u64);
            (SufficientStat::one_arm(n, rng.random_range(0..=n) as f64), rng.random_range(0.01..0.99))
        }
        Model::TwoArmBernoulli(_) => {
            let n = rng.random_range(1..200u64);
            let (a, b) = (rng.random_range(0..=n), rng.random_range(0..=n));
            (SufficientStat::two_arm(n, a as f64, n, b as f64), rng.random_range(-0.9..0.9))
        }
        Model::TwoSampleNormalUnknownVar(_) => {
            let n = rng.random_range(2..100u64);
            let nf = n as f64;
            let (mx, my, var) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.1..4.0));
            let (sx, sy) = (mx * nf, my * nf);
            (
                SufficientStat::two_sample(n, sx, sx * mx + var * nf, n, sy, sy * my + var * nf),
                rng.random_range(-2.0..2.0),
            )
        }
    }
}

/// ℓ² = 2nΛ on random statistics, and KL(θ, λ) > 0 off the diagonal.
fn root_and_kl_suite() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for (model, points, _) in instances() {
        for _ in 0..2000 {
            let (stat, target) = random_stat(&model, &mut rng);
            let g = model.glr(&stat, target).map_err(|e| e.to_string())?;
            let rhs = 2.0 * stat.size() as f64 * g.lambda;
            if g.lambda < 0.0 || (g.ell * g.ell - rhs).abs() > 1e-10 * rhs.max(1e-300) {
                return Err(format!("{model:?} {stat:?} target {target}: ell {} lambda {}", g.ell, g.lambda));
            }
            checked += 1;
        }
        for a in &points {
            for b in &points {
                let kl = model.kl(a, b).map_err(|e| e.to_string())?;
                let ok = if a == b { kl.abs() < 1e-12 } else { kl > 0.0 };
                if !ok {
                    return Err(format!("{model:?} KL({a:?}, {b:?}) = {kl}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn properties() -> Verdict {
    let mut v = Verdict::new();
    let reps = 20_000;

    match monotonicity_suite() {
        Ok(n) => v.check(true, format!("(i) constrained-information monotonicity: {n} grid steps")),
        Err(e) => v.check(false, format!("(i) monotonicity broken: {e}")),
    }
    match root_and_kl_suite() {
        Ok(n) => v.check(true, format!("(ii) signed root and KL positivity: {n} cases")),
        Err(e) => v.check(false, format!("(ii) {e}")),
    }

    // (iii) Efficiency against the Hoeffding-type bound along the scaled
    // design sequence of the three-stage normal design.
    let base = design_spec("table5_adapt.json");
    let plan = DiagnosticPlan {
        alphas: vec![0.05, 0.01, 0.001],
        thetas: vec![Param::scalar(0.15), Param::scalar(0.3)],
        reps,
        seed: 13,
        cond_power3: false,
    };
    let rows = efficiency_diagnostic(&base, &plan).unwrap();
    let mut above = true;
    let mut nonincreasing = true;
    for theta in &plan.thetas {
        let series: Vec<_> = rows.iter().filter(|r| r.theta == *theta).collect();
        for r in &series {
            above &= r.ratio >= 1.0 - 2.0 * r.ratio_se;
        }
        nonincreasing &= series.windows(2).all(|w| w[1].ratio <= w[0].ratio + 2.0 * (w[0].ratio_se + w[1].ratio_se));
        let text: Vec<String> = series.iter().map(|r| format!("a={}: {:.3}±{:.3}", r.alpha, r.ratio, r.ratio_se)).collect();
        v.note(format!("(iii) theta={}: ESS/bound {}", theta[0], text.join(", ")));
    }
    v.check(above, "(iii) ratio >= 1 - 2 s.e. at every point".into());
    v.check(nonincreasing, "(iii) ratio nonincreasing as alpha falls".into());

    // (iv) Conditional-power three-stage test against ADAPT at α = α̃ = 10⁻³.
    let mut spec = base.clone();
    spec.alpha = 0.001;
    spec.alpha_tilde = 0.001;
    spec.m = 46;
    spec.max_n = 279;
    let theta1 = Design::new(spec.clone()).unwrap().u1();
    let rows = efficiency_diagnostic(
        &spec,
        &DiagnosticPlan {
            alphas: vec![0.001],
            thetas: vec![Param::scalar(theta1)],
            reps,
            seed: 14,
            cond_power3: true,
        },
    )
    .unwrap();
    let ess = |p: DiagnosedProcedure| rows.iter().find(|r| r.procedure == p).unwrap();
    let (a, cp) = (ess(DiagnosedProcedure::Adaptive), ess(DiagnosedProcedure::CondPower3));
    let ratio = cp.ess / a.ess;
    v.check(
        ratio > 2.0,
        format!("(iv) CondPower3/ADAPT ESS at theta1={theta1:.4}: {:.1}/{:.1} = {ratio:.3} > 2", cp.ess, a.ess),
    );
    v.note(format!("(iv) asymptotic ratio at this alpha: {:.3}", cp.asymptotic / a.asymptotic));

    // (v) Four-stage power and level.
    let d = Design::new(design_spec("four_stage_adapt.json")).unwrap();
    let th = calibrate(&d).unwrap().thresholds;
    let theta2 = th.u2.unwrap();
    let oc = simulate_oc(
        &Adaptive::new(d, th),
        &[Param::scalar(0.0), Param::scalar(theta2), Param::scalar(0.15)],
        100_000,
        4,
    )
    .unwrap();
    let (null, alt) = (&oc.points[0], &oc.points[1]);
    v.check(alt.power >= 0.85, format!("(v) power at theta2={theta2:.5}: {:.4} >= .85", alt.power));
    v.check(
        null.power <= 0.025 + 3.0 * null.power_se.unwrap(),
        format!("(v) Type I {:.4} <= .025 + 3·{:.4}", null.power, null.power_se.unwrap()),
    );
    v.note(format!("(v) power at theta=.15: {:.4}", oc.points[2].power));

    // (vi) The CHW enlargement ignores the sign of the interim estimate.
    let symmetric = [0.05, 0.1, 0.2, 0.4]
        .iter()
        .all(|&t| chw_new_maximum(t, 0.29, 125, 500) == chw_new_maximum(-t, 0.29, 125, 500));
    let c = Comparator::new(comparator_spec("chw.json")).unwrap();
    let step = |s: f64| c.step(&c.initial_state(), &SufficientStat::one_arm(25, s)).unwrap();
    let ((up, _), (down, d)) = (step(2.5), step(-2.5));
    let pathology = symmetric
        && matches!(d.action, Action::Continue { .. })
        && up.plan.last() == down.plan.last()
        && down.plan.last() == Some(&500);
    v.check(
        pathology,
        format!("(vi) CHW new maximum after theta^=±0.1: {:?} / {:?}", up.plan.last(), down.plan.last()),
    );
    v
}

// --- event sourcing ----------------------------------------------------------

/// Runs a trial of `spec` to termination with random stage results.
fn random_session(design: &Design, thresholds: Thresholds, id: &str, rng: &mut ChaCha8Rng) -> TrialSession {
    let mut s = TrialSession {
        id: id.into(),
        created_at_ms: 0,
        spec: design.spec().clone(),
        thresholds,
        calibration: None,
        state: design.initial_state(),
        audit_log: Vec::new(),
    };
    let mut t = 1;
    while let Some(k) = s.state.pending_increment() {
        let inc = match design.model() {
            Model::Bernoulli(_) => SufficientStat::one_arm(k, rng.random_range(0..=k) as f64),
            Model::TwoArmBernoulli(_) => {
                SufficientStat::two_arm(k, rng.random_range(0..=k) as f64, k, rng.random_range(0..=k) as f64)
            }
            _ => SufficientStat::one_arm(k, rng.random_range(-1.0..1.0) * (k as f64).sqrt() * 3.0 + 0.2 * k as f64),
        };
        let (next, decision) = design.step(&s.thresholds, &s.state, &inc).unwrap();
        s.state = next;
        s.audit_log.push(AuditEntry {
            timestamp_ms: t,
            increment: inc,
            decision,
        });
        t += 1;
    }
    s
}

fn event_sourcing() -> Verdict {
    let mut v = Verdict::new();
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let mut table1a = design_spec("table1a_adapt.json");
    table1a.calibration = Calibration::Exact;
    let mut two_arm = design_spec("table3_adapt.json");
    two_arm.calibration = Calibration::MonteCarlo { reps: 20_000, seed: 1 };
    let designs: Vec<(Design, Thresholds)> = [table1a, design_spec("table5_adapt.json"), design_spec("four_stage_adapt.json"), two_arm]
        .into_iter()
        .map(|spec| {
            let d = Design::new(spec).unwrap();
            let th = calibrate(&d).unwrap().thresholds;
            (d, th)
        })
        .collect();

    // Replay: every persisted log re-derives its decisions and state exactly.
    let mut replayed = 0;
    let mut failures = Vec::new();
    for (i, (design, th)) in designs.iter().enumerate() {
        for j in 0..25 {
            let s = random_session(design, *th, &format!("t{i}-{j}"), &mut rng);
            store.save(&s).unwrap();
            let loaded = store.load(&s.id).unwrap();
            if loaded != s {
                failures.push(format!("{}: stored document differs", s.id));
            }
            match replay(&loaded) {
                Ok(state) if state == loaded.state => replayed += loaded.audit_log.len(),
                Ok(_) => failures.push(format!("{}: replayed state differs", s.id)),
                Err(e) => failures.push(format!("{}: {e}", s.id)),
            }
        }
    }
    v.check(
        failures.is_empty(),
        format!("replayed {replayed} decisions from 100 stored sessions; {} mismatches {:?}", failures.len(), failures),
    );

    // A doctored decision must be caught.
    let mut s = store.load("t0-0").unwrap();
    let last = s.audit_log.last_mut().unwrap();
    last.decision.n += 1;
    v.check(replay(&s).is_err(), "tampered audit log is rejected".into());

    // Crash injection: a failed write leaves the old document or the new
    // one, never a mixture.
    let new = loop {
        let s = random_session(&designs[0].0, designs[0].1, "crash", &mut rng);
        if s.audit_log.len() >= 2 {
            break s;
        }
    };
    let mut s = new.clone();
    s.audit_log.truncate(1);
    let design = Design::new(s.spec.clone()).unwrap();
    s.state = design.step(&s.thresholds, &design.initial_state(), &s.audit_log[0].increment).unwrap().0;
    replay(&s).unwrap();
    store.save(&s).unwrap();
    let path = dir.path().join("crash.json");
    let old = std::fs::read(&path).unwrap();

    store.inject_failure(FailPoint::BeforeRename);
    let before_rename = store.save(&new).is_err() && std::fs::read(&path).unwrap() == old;
    store.inject_failure(FailPoint::AfterRename);
    let after_rename = store.save(&new).is_err() && store.load("crash").unwrap() == new;
    let listed = store.list().unwrap().len() == 101;
    v.check(
        before_rename && after_rename && listed,
        format!("crash before rename keeps old: {before_rename}; after rename has new: {after_rename}; leftovers ignored: {listed}"),
    );
    let bytes = schema::to_string_pretty(&store.load("crash").unwrap());
    v.check(replay(&schema::from_str::<TrialSession>(&bytes).unwrap()).is_ok(), "recovered document replays".into());
    v.note("suite runs without building the UI".into());
    v
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("Table 2(a) exact binomial OC", table2a),
        ("Table 1 decision structure and Sim2 design", table1_structure),
        ("Simon search, Table 2(b) Sim2 row", simon_table2b),
        ("Table 3 two-arm Monte Carlo", table3),
        ("calibration self-consistency", calibration_consistency),
        ("Stein comparator, Table 4", stein_table4),
        ("property suite (i)-(vi)", properties),
        ("event sourcing and crash atomicity", event_sourcing),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        println!(
            "{} [{}] {name} ({:.1?})",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed()
        );
        for line in &v.detail {
            println!("    {line}");
        }
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
