//! Input documents and parameter grids.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use glr_adapt_core::calibration::{calibrate, CalibrationReport};
use glr_adapt_core::comparators::{Comparator, ComparatorSpec};
use glr_adapt_core::evaluation::parse_grid;
use glr_adapt_core::{schema, Design, DesignSpec, Error, ExponentialFamily, Model, Param, Thresholds};

use crate::CliError;

/// Fixed (b, b̃, c), as given in a document or with `--thresholds`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdInput {
    pub b: f64,
    pub b_tilde: f64,
    pub c: f64,
}

impl ThresholdInput {
    /// Parses `b,b_tilde,c`.
    pub fn parse(s: &str) -> Result<Self, Error> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Error::spec("thresholds", format!("{s:?} is not a list of three numbers")))?;
        match v[..] {
            [b, b_tilde, c] => Ok(ThresholdInput { b, b_tilde, c }),
            _ => Err(Error::spec("thresholds", "expected b,b_tilde,c")),
        }
    }

    fn check(&self) -> Result<(), Error> {
        for (name, v) in [("thresholds.b", self.b), ("thresholds.b_tilde", self.b_tilde), ("thresholds.c", self.c)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::spec(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// A design together with optional fixed thresholds.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDoc {
    pub spec: DesignSpec,
    #[serde(default)]
    pub thresholds: Option<ThresholdInput>,
}

/// Any document accepted by `--spec`.
#[derive(Clone, Debug)]
pub enum Input {
    Design(DesignDoc),
    Comparator(ComparatorSpec),
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_value(path: &Path) -> Result<Value, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Spec { field: None, message: format!("{}: {e}", path.display()) }.into())
}

/// Reads a bare `DesignSpec`, a `{spec, thresholds?}` wrapper or a
/// comparator specification.
pub fn load(path: &Path) -> Result<Input, CliError> {
    classify(read_value(path)?)
}

pub fn classify(value: Value) -> Result<Input, CliError> {
    let obj = value.as_object();
    let has = |k: &str| obj.is_some_and(|o| o.contains_key(k));
    if has("comparator") {
        Ok(Input::Comparator(schema::from_value(value)?))
    } else if has("spec") {
        Ok(Input::Design(schema::from_value(value)?))
    } else {
        Ok(Input::Design(DesignDoc {
            spec: schema::from_value(value)?,
            thresholds: None,
        }))
    }
}

pub fn load_design(path: &Path) -> Result<DesignDoc, CliError> {
    match load(path)? {
        Input::Design(d) => Ok(d),
        Input::Comparator(_) => Err(Error::spec("comparator", "this command needs an adaptive design, not a comparator").into()),
    }
}

/// Thresholds from the override, the document, or calibration.
pub fn resolve_thresholds(
    design: &Design,
    doc: Option<ThresholdInput>,
    flag: Option<ThresholdInput>,
) -> Result<(Thresholds, Option<CalibrationReport>), Error> {
    match flag.or(doc) {
        Some(t) => {
            t.check()?;
            Ok((design.thresholds(t.b, t.b_tilde, t.c), None))
        }
        None => {
            let report = calibrate(design)?;
            Ok((report.thresholds, Some(report)))
        }
    }
}

/// Resolved procedure with its display name.
pub enum Procedure {
    Adaptive { design: Design, thresholds: Thresholds },
    Comparator(Box<Comparator>),
}

impl Procedure {
    pub fn model(&self) -> &Model {
        match self {
            Procedure::Adaptive { design, .. } => design.model(),
            Procedure::Comparator(c) => c.model(),
        }
    }

    /// Reference value of u used to fill grid coordinates that are not
    /// varied.
    pub fn reference_u(&self) -> f64 {
        match self {
            Procedure::Adaptive { design, .. } => design.u0(),
            Procedure::Comparator(_) => 0.0,
        }
    }

    /// Null and alternative points of an adaptive design.
    pub fn planning_points(&self) -> Result<Vec<Param>, Error> {
        match self {
            Procedure::Adaptive { design, .. } => {
                let m = design.model();
                let mut pts = vec![m.hypothesis_point(design.u0())?, m.hypothesis_point(design.u1())?];
                if let Some(u2) = design.u2() {
                    pts.push(m.hypothesis_point(u2)?);
                }
                Ok(pts)
            }
            Procedure::Comparator(_) => Err(Error::spec("grid", "comparators need an explicit --grid")),
        }
    }
}

pub fn resolve(input: Input, flag: Option<ThresholdInput>) -> Result<Procedure, Error> {
    match input {
        Input::Design(doc) => {
            let design = Design::new(doc.spec)?;
            let (thresholds, _) = resolve_thresholds(&design, doc.thresholds, flag)?;
            Ok(Procedure::Adaptive { design, thresholds })
        }
        Input::Comparator(spec) => Ok(Procedure::Comparator(Box::new(Comparator::new(spec)?))),
    }
}

/// Builds the Cartesian product of the `--grid` expressions over the
/// model's coordinates. Coordinates that are not named keep the value of
/// the model's planning point at `reference_u`.
pub fn build_grid(model: &Model, reference_u: f64, exprs: &[String]) -> Result<Vec<Param>, Error> {
    let names = model.coordinate_names();
    let mut axes: Vec<(usize, Vec<f64>)> = Vec::new();
    for e in exprs {
        let (name, values) = parse_grid(e)?;
        let idx = names.iter().position(|n| *n == name).ok_or_else(|| {
            Error::spec("grid", format!("unknown coordinate {name:?}; this model has {names:?}"))
        })?;
        if axes.iter().any(|(i, _)| *i == idx) {
            return Err(Error::spec("grid", format!("coordinate {name:?} given twice")));
        }
        axes.push((idx, values));
    }
    let base: Vec<f64> = if axes.len() == names.len() {
        vec![0.0; names.len()]
    } else {
        model.hypothesis_point(reference_u)?.as_slice().to_vec()
    };
    let mut points = vec![base];
    for (idx, values) in &axes {
        points = points
            .iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q[*idx] = *v;
                    q
                })
            })
            .collect();
    }
    Ok(points.iter().map(|p| Param::new(p)).collect())
}

/// Resolves `path` relative to the directory of `base`.
pub fn relative_to(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}
