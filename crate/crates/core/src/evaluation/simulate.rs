//! Monte Carlo operating characteristics.

use crate::error::{Error, Result};
use crate::evaluation::{OcMethod, OcPoint, OperatingChars, Procedure};
use crate::expfam::Param;
use crate::rng::{fold_indices, replicate_rng, streams};

/// Fewest replicates accepted for an OC run.
pub const MIN_REPS: u64 = 1000;

#[derive(Default)]
struct Tally {
    rejects: u64,
    n: u128,
    n2: u128,
    stages: u64,
    error: Option<Error>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        self.rejects += other.rejects;
        self.n += other.n;
        self.n2 += other.n2;
        self.stages += other.stages;
        if self.error.is_none() {
            self.error = other.error;
        }
    }
}

/// Estimates power, expected sample size and expected number of stages at
/// each grid point from `reps` simulated trials. Replicate `r` at grid
/// index `g` uses stream `(seed, OC_BASE + g, r)`, and sums are integer,
/// so results do not depend on thread count or scheduling.
pub fn simulate_oc<P: Procedure + ?Sized>(proc: &P, grid: &[Param], reps: u64, seed: u64) -> Result<OperatingChars> {
    if reps < MIN_REPS {
        return Err(Error::spec("reps", format!("at least {MIN_REPS} replicates are required, got {reps}")));
    }
    let mut points = Vec::with_capacity(grid.len());
    for (g, theta) in grid.iter().enumerate() {
        let stream = streams::OC_BASE + g as u64;
        let tally = fold_indices(
            reps,
            Tally::default,
            |acc, r| {
                if acc.error.is_some() {
                    return;
                }
                let mut rng = replicate_rng(seed, stream, r);
                match proc.run(theta, &mut rng) {
                    Ok(o) => {
                        acc.rejects += o.reject as u64;
                        acc.n += o.n as u128;
                        acc.n2 += (o.n as u128) * (o.n as u128);
                        acc.stages += o.stages as u64;
                    }
                    Err(e) => acc.error = Some(e),
                }
            },
            Tally::merge,
        );
        if let Some(e) = tally.error {
            return Err(e);
        }
        let r = reps as f64;
        let power = tally.rejects as f64 / r;
        let ess = tally.n as f64 / r;
        let var = (tally.n2 as f64 / r - ess * ess).max(0.0) * r / (r - 1.0);
        points.push(OcPoint {
            param: *theta,
            power,
            power_se: Some((power * (1.0 - power) / r).sqrt()),
            ess,
            ess_se: Some((var / r).sqrt()),
            e_stages: tally.stages as f64 / r,
        });
    }
    Ok(OperatingChars {
        coordinates: proc.coordinates(),
        method: OcMethod::MonteCarlo { reps, seed },
        points,
        avss: None,
    })
}
