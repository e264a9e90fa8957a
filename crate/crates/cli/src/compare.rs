//! `compare`: several procedures over one grid, merged into one table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use glr_adapt_core::comparators::{simon_oc, ComparatorSpec};
use glr_adapt_core::evaluation::{exact_oc, simulate_oc, Adaptive, OcMethod, OcPoint, OperatingChars};
use glr_adapt_core::{Error, Param};

use crate::input::{self, build_grid, classify, relative_to, DesignDoc, Input, Procedure, ThresholdInput};
use crate::CliError;

/// One entry of a comparison document: exactly one of `design`,
/// `comparator` or `file`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    #[serde(default)]
    design: Option<Value>,
    #[serde(default)]
    thresholds: Option<ThresholdInput>,
    #[serde(default)]
    comparator: Option<ComparatorSpec>,
    /// Path of a design or comparator document, relative to this file.
    #[serde(default)]
    file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AvssPoints {
    null: Vec<f64>,
    alt: Vec<f64>,
}

/// A comparison document.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    procedures: Vec<Entry>,
    #[serde(default)]
    grid: Vec<String>,
    #[serde(default)]
    avss: Option<AvssPoints>,
    #[serde(default)]
    exact: bool,
    #[serde(default)]
    reps: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct Named {
    pub name: String,
    pub oc: OperatingChars,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub coordinates: Vec<String>,
    pub procedures: Vec<Named>,
}

pub struct Overrides {
    pub grid: Vec<String>,
    pub exact: bool,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
}

pub fn run(path: &Path, ov: Overrides) -> Result<Comparison, CliError> {
    let doc: CompareSpec = glr_adapt_core::schema::from_str(&input::read_text(path)?)?;
    if doc.procedures.is_empty() {
        return Err(Error::spec("procedures", "at least one procedure is required").into());
    }
    let grid_exprs = if ov.grid.is_empty() { doc.grid } else { ov.grid };
    let exact = ov.exact || doc.exact;
    let reps = ov.reps.or(doc.reps).unwrap_or(crate::DEFAULT_REPS);
    let seed = ov.seed.or(doc.seed).unwrap_or(crate::DEFAULT_SEED);

    let mut procs = Vec::new();
    for (i, e) in doc.procedures.into_iter().enumerate() {
        let field = |f: &str| format!("procedures[{i}].{f}");
        let input = match (e.design, e.comparator, e.file) {
            (Some(v), None, None) => match classify(v)? {
                Input::Design(d) => Input::Design(DesignDoc {
                    spec: d.spec,
                    thresholds: e.thresholds.or(d.thresholds),
                }),
                Input::Comparator(_) => return Err(Error::spec(field("design"), "is a comparator").into()),
            },
            (None, Some(c), None) => Input::Comparator(c),
            (None, None, Some(f)) => match input::load(&relative_to(path, &f))? {
                Input::Design(d) => Input::Design(DesignDoc {
                    spec: d.spec,
                    thresholds: e.thresholds.or(d.thresholds),
                }),
                c => c,
            },
            _ => {
                return Err(Error::spec(field("name"), "give exactly one of `design`, `comparator` or `file`").into())
            }
        };
        procs.push((e.name, input::resolve(input, None)?));
    }

    let (_, first) = &procs[0];
    let coordinates: Vec<String> = first.model().coordinate_names().iter().map(|s| s.to_string()).collect();
    let grid = if grid_exprs.is_empty() {
        first.planning_points()?
    } else {
        build_grid(first.model(), first.reference_u(), &grid_exprs)?
    };

    let mut out = Vec::new();
    for (name, proc) in &procs {
        if proc.model().coordinate_names() != first.model().coordinate_names() {
            return Err(Error::spec("procedures", format!("{name} uses a different parameter space")).into());
        }
        let mut oc = evaluate(proc, &grid, exact, reps, seed)?;
        if let Some(a) = &doc.avss {
            oc.set_avss(&a.null, &a.alt)?;
        }
        out.push(Named { name: name.clone(), oc });
    }
    Ok(Comparison {
        coordinates,
        procedures: out,
    })
}

/// Exact characteristics where the procedure allows them, simulation
/// otherwise.
pub fn evaluate(proc: &Procedure, grid: &[Param], exact: bool, reps: u64, seed: u64) -> Result<OperatingChars, Error> {
    match proc {
        Procedure::Adaptive { design, thresholds } => {
            if exact && design.model().is_discrete() {
                exact_oc(design, thresholds, grid)
            } else {
                simulate_oc(&Adaptive::new(design.clone(), *thresholds), grid, reps, seed)
            }
        }
        Procedure::Comparator(c) => match &c.spec {
            ComparatorSpec::Simon2 { m, max_n, r1, r2, .. } if exact => {
                let points = grid
                    .iter()
                    .map(|p| {
                        let s = simon_oc(*m, *max_n, *r1, *r2, p[0]);
                        OcPoint {
                            param: *p,
                            power: s.power,
                            power_se: None,
                            ess: s.ess,
                            ess_se: None,
                            e_stages: s.e_stages,
                        }
                    })
                    .collect();
                Ok(OperatingChars {
                    coordinates: vec!["p".into()],
                    method: OcMethod::Exact,
                    points,
                    avss: None,
                })
            }
            _ => simulate_oc(c.as_ref(), grid, reps, seed),
        },
    }
}

impl Comparison {
    /// Wide CSV: the grid coordinates, then `ess, power, stages` (and
    /// standard errors for simulated procedures) per procedure.
    pub fn to_csv(&self) -> String {
        let mut out = self.coordinates.join(",");
        for p in &self.procedures {
            let n = &p.name;
            let _ = write!(out, ",{n}_ess,{n}_power,{n}_stages");
            if simulated(&p.oc) {
                let _ = write!(out, ",{n}_ess_se,{n}_power_se");
            }
            if p.oc.avss.is_some() {
                let _ = write!(out, ",{n}_avss");
            }
        }
        out.push('\n');
        let rows = self.procedures[0].oc.points.len();
        for i in 0..rows {
            let pts: Vec<&OcPoint> = self.procedures.iter().map(|p| &p.oc.points[i]).collect();
            let coords: Vec<String> = pts[0].param.iter().map(|v| v.to_string()).collect();
            out.push_str(&coords.join(","));
            for (p, pt) in self.procedures.iter().zip(&pts) {
                let _ = write!(out, ",{:.4},{:.6},{:.4}", pt.ess, pt.power, pt.e_stages);
                if simulated(&p.oc) {
                    let _ = write!(
                        out,
                        ",{},{}",
                        pt.ess_se.map(|v| format!("{v:.4}")).unwrap_or_default(),
                        pt.power_se.map(|v| format!("{v:.6}")).unwrap_or_default()
                    );
                }
                if let Some(a) = p.oc.avss {
                    let _ = write!(out, ",{a:.4}");
                }
            }
            out.push('\n');
        }
        out
    }
}

fn simulated(oc: &OperatingChars) -> bool {
    matches!(oc.method, OcMethod::MonteCarlo { .. })
}
