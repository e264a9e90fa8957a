//! Exact operating characteristics of binomial designs.
//!
//! The sample sizes of an adaptive design are deterministic functions of
//! the success counts, so the reachable states at each analysis are
//! finite: (rule set, cumulative n, successes per arm). The recursion
//! keeps one dense probability table per (rule set, n) and moves the
//! continuing mass forward by convolving with the binomial increment
//! distribution, arm by arm.

use std::collections::BTreeMap;

use crate::design::{Action, Design, Thresholds};
use crate::error::{Error, Result};
use crate::evaluation::{OcMethod, OcPoint, OperatingChars};
use crate::expfam::{Model, Param, SufficientStat};
use crate::numerics::binomial_pmf;

/// Largest number of simultaneously tracked states.
pub const STATE_LIMIT: usize = 10_000_000;

/// Dense table of P(S_x = i, S_y = j) over 0..=n for each arm.
#[derive(Clone, Debug)]
struct Table {
    n: u64,
    cols: usize,
    probs: Vec<f64>,
}

impl Table {
    fn zeros(n: u64, two_arm: bool) -> Self {
        let rows = n as usize + 1;
        let cols = if two_arm { rows } else { 1 };
        Table {
            n,
            cols,
            probs: vec![0.0; rows * cols],
        }
    }

    fn stat(&self, idx: usize) -> SufficientStat {
        let (i, j) = (idx / self.cols, idx % self.cols);
        if self.cols == 1 {
            SufficientStat::one_arm(self.n, i as f64)
        } else {
            SufficientStat::two_arm(self.n, i as f64, self.n, j as f64)
        }
    }

    /// Adds `k` observations per arm with success rates `px`, `py`.
    fn advance(&self, k: u64, px: &[f64], py: &[f64]) -> Table {
        let two_arm = self.cols > 1;
        let rows = self.n as usize + 1;
        let new_rows = rows + k as usize;
        // Along the first arm.
        let mut tmp = vec![0.0; new_rows * self.cols];
        for i in 0..rows {
            for j in 0..self.cols {
                let p = self.probs[i * self.cols + j];
                if p == 0.0 {
                    continue;
                }
                for (x, w) in px.iter().enumerate() {
                    tmp[(i + x) * self.cols + j] += p * w;
                }
            }
        }
        let mut out = Table::zeros(self.n + k, two_arm);
        if !two_arm {
            out.probs = tmp;
            return out;
        }
        for i in 0..new_rows {
            for j in 0..self.cols {
                let p = tmp[i * self.cols + j];
                if p == 0.0 {
                    continue;
                }
                for (y, w) in py.iter().enumerate() {
                    out.probs[i * out.cols + j + y] += p * w;
                }
            }
        }
        out
    }

    fn add_into(&self, other: &mut Table) {
        for (a, b) in other.probs.iter_mut().zip(&self.probs) {
            *a += b;
        }
    }
}

/// Exact power, expected sample size and expected number of analyses of a
/// binomial (single- or two-arm) adaptive design at each grid point.
/// Two-arm grid points are (p, q): treatment and control success rates.
pub fn exact_oc(design: &Design, th: &Thresholds, grid: &[Param]) -> Result<OperatingChars> {
    let two_arm = match design.model() {
        Model::Bernoulli(_) => false,
        Model::TwoArmBernoulli(_) => true,
        _ => {
            return Err(Error::Usage(
                "exact operating characteristics need a binomial model; use simulation".into(),
            ))
        }
    };
    let points = grid
        .iter()
        .map(|theta| point(design, th, theta, two_arm))
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatingChars {
        coordinates: design.model().coordinate_names().iter().map(|s| s.to_string()).collect(),
        method: OcMethod::Exact,
        points,
        avss: None,
    })
}

fn point(design: &Design, th: &Thresholds, theta: &Param, two_arm: bool) -> Result<OcPoint> {
    let (px, py) = if two_arm { (theta[0], theta[1]) } else { (theta[0], 0.0) };
    for (name, v) in [("p", px), ("q", py)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} = {v} is not a probability")));
        }
    }
    let pmf = |k: u64| (binomial_pmf(k, px), if two_arm { binomial_pmf(k, py) } else { vec![1.0] });

    let m = design.m();
    let mut start = Table::zeros(0, two_arm);
    start.probs[0] = 1.0;
    let (ax, ay) = pmf(m);
    let mut frontier: BTreeMap<(usize, u64), Table> = BTreeMap::new();
    frontier.insert((1, m), start.advance(m, &ax, &ay));

    let (mut power, mut ess, mut stages) = (0.0, 0.0, 0.0);
    let mut epoch = 0.0;
    while !frontier.is_empty() {
        epoch += 1.0;
        let tracked: usize = frontier.values().map(|t| t.probs.len()).sum();
        if tracked > STATE_LIMIT {
            return Err(Error::Usage(format!(
                "exact enumeration would track {tracked} states (limit {STATE_LIMIT}); use simulation instead"
            )));
        }
        let mut next: BTreeMap<(usize, u64), Table> = BTreeMap::new();
        for (&(stage, n), table) in &frontier {
            // Continuing mass, split by destination.
            let mut moving: BTreeMap<(usize, u64), Table> = BTreeMap::new();
            for (idx, &p) in table.probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let stat = table.stat(idx);
                let d = design.evaluate(th, stage, &stat)?;
                match d.action {
                    Action::RejectH0 | Action::AcceptH0 => {
                        if d.action == Action::RejectH0 {
                            power += p;
                        }
                        ess += p * n as f64;
                        stages += p * epoch;
                    }
                    Action::Continue { next_n } => {
                        let (next_stage, _) = design.next_stage(stage, &stat)?;
                        moving
                            .entry((next_stage, next_n))
                            .or_insert_with(|| Table::zeros(n, two_arm))
                            .probs[idx] += p;
                    }
                }
            }
            for ((next_stage, next_n), src) in moving {
                let (ix, iy) = pmf(next_n - n);
                let moved = src.advance(next_n - n, &ix, &iy);
                match next.get_mut(&(next_stage, next_n)) {
                    Some(t) => moved.add_into(t),
                    None => {
                        next.insert((next_stage, next_n), moved);
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(OcPoint {
        param: *theta,
        power: power.clamp(0.0, 1.0),
        power_se: None,
        ess,
        ess_se: None,
        e_stages: stages,
    })
}

/// Exact Type I error of a single-arm binomial design maximised over a
/// grid of null success rates p ≤ p₀.
pub fn exact_null_supremum(design: &Design, th: &Thresholds, points: usize) -> Result<(f64, f64)> {
    if !matches!(design.model(), Model::Bernoulli(_)) {
        return Err(Error::Usage("null supremum is computed for single-arm binomial designs".into()));
    }
    let p0 = design.u0();
    let grid: Vec<Param> = (1..=points)
        .map(|i| Param::scalar(p0 * i as f64 / points as f64))
        .collect();
    let oc = exact_oc(design, th, &grid)?;
    Ok(oc
        .points
        .iter()
        .map(|p| (p.param[0], p.power))
        .fold((p0, 0.0), |best, x| if x.1 > best.1 { x } else { best }))
}
