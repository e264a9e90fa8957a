//! Trial sessions: the persisted document, its audit log and replay.

use serde::{Deserialize, Serialize};

use glr_adapt_core::calibration::CalibrationReport;
use glr_adapt_core::design::DecisionTable;
use glr_adapt_core::{
    Action, Decision, Design, DesignSpec, Error, ExponentialFamily, Model, SufficientStat, Thresholds, TrialState,
};

/// One submitted stage and the decision it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    /// New observations of the stage (not cumulative).
    pub increment: SufficientStat,
    pub decision: Decision,
}

/// A running or finished trial as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSession {
    pub id: String,
    pub created_at_ms: u64,
    pub spec: DesignSpec,
    pub thresholds: Thresholds,
    /// Present when the thresholds were calibrated by the service.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationReport>,
    pub state: TrialState,
    pub audit_log: Vec<AuditEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Rejected,
    Accepted,
}

/// What the trialist has to do next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    /// Number of the analysis to be performed (1-based).
    pub analysis: usize,
    /// New observations required, per arm.
    pub increment: u64,
    /// Cumulative sample size per arm at that analysis.
    pub cumulative_n: u64,
    pub arms: usize,
}

/// Design summary shown before and during a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preview {
    pub family: String,
    pub stages: usize,
    pub m: u64,
    #[serde(rename = "M")]
    pub max_n: u64,
    #[serde(rename = "M_prime", skip_serializing_if = "Option::is_none")]
    pub max_n_prime: Option<u64>,
    #[serde(rename = "M_tilde", skip_serializing_if = "Option::is_none")]
    pub max_n_tilde: Option<u64>,
    pub u0: f64,
    pub u1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u2: Option<f64>,
    pub alpha: f64,
    pub alpha_tilde: f64,
    /// Per-S_m actions, for single-arm binomial three-stage designs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision_table: Option<DecisionTable>,
}

/// Session document as returned by the API.
#[derive(Clone, Debug, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: TrialSession,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending: Option<Pending>,
    pub design: Preview,
}

/// Row of the session listing.
#[derive(Clone, Debug, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub created_at_ms: u64,
    pub family: String,
    pub status: Status,
    pub analyses: usize,
    pub n: u64,
}

impl TrialSession {
    pub fn design(&self) -> Result<Design, Error> {
        Design::new(self.spec.clone())
    }

    pub fn status(&self) -> Status {
        match self.state.terminal.map(|d| d.action) {
            Some(Action::RejectH0) => Status::Rejected,
            Some(_) => Status::Accepted,
            None => Status::Running,
        }
    }

    pub fn pending(&self) -> Option<Pending> {
        let increment = self.state.pending_increment()?;
        Some(Pending {
            analysis: self.state.analyses + 1,
            increment,
            cumulative_n: *self.state.planned_n.last()?,
            arms: self.spec.model.arms(),
        })
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            created_at_ms: self.created_at_ms,
            family: self.spec.model.family().to_string(),
            status: self.status(),
            analyses: self.state.analyses,
            n: self.state.stat.size(),
        }
    }

    pub fn view(self, design: &Design) -> SessionView {
        let preview = preview(design, &self.thresholds);
        SessionView {
            status: self.status(),
            pending: self.pending(),
            design: preview,
            session: self,
        }
    }
}

pub fn preview(design: &Design, th: &Thresholds) -> Preview {
    let spec = design.spec();
    Preview {
        family: spec.model.family().to_string(),
        stages: design.stages(),
        m: spec.m,
        max_n: spec.max_n,
        max_n_prime: design.max_n_prime(),
        max_n_tilde: spec.max_n_tilde,
        u0: spec.u0,
        u1: th.u1,
        u2: th.u2,
        alpha: spec.alpha,
        alpha_tilde: spec.alpha_tilde,
        decision_table: design.decision_table(th).ok(),
    }
}

/// Converts a cumulative statistic into the increment over `state`.
pub fn increment_from_cumulative(model: &Model, state: &TrialState, cum: &SufficientStat) -> Result<SufficientStat, Error> {
    let prev = &state.stat;
    let arms = model.arms();
    let mut inc = SufficientStat::default();
    for a in 0..arms {
        inc.n[a] = cum.n[a].checked_sub(prev.n[a]).ok_or_else(|| {
            Error::Usage(format!(
                "cumulative size {} is below the {} observations already analysed",
                cum.n[a], prev.n[a]
            ))
        })?;
    }
    for (i, (c, p)) in cum.sum.iter().zip(&prev.sum).enumerate() {
        inc.sum[i] = c - p;
    }
    Ok(inc)
}

/// A recorded decision that replay does not reproduce.
#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("session spec no longer builds a design: {0}")]
    Design(Error),
    #[error("audit entry {index} no longer applies: {source}")]
    Step { index: usize, source: Error },
    #[error("audit entry {index}: recorded {recorded:?}, replay gives {replayed:?}")]
    Mismatch {
        index: usize,
        recorded: Box<Decision>,
        replayed: Box<Decision>,
    },
    #[error("final state differs from the stored state")]
    State,
}

/// Re-runs the audit log through the design and checks that every decision
/// and the final state are reproduced exactly.
pub fn replay(session: &TrialSession) -> Result<TrialState, ReplayError> {
    let design = session.design().map_err(ReplayError::Design)?;
    let mut state = design.initial_state();
    for (index, entry) in session.audit_log.iter().enumerate() {
        let (next, decision) = design
            .step(&session.thresholds, &state, &entry.increment)
            .map_err(|source| ReplayError::Step { index, source })?;
        if decision != entry.decision {
            return Err(ReplayError::Mismatch {
                index,
                recorded: Box::new(entry.decision),
                replayed: Box::new(decision),
            });
        }
        state = next;
    }
    if state != session.state {
        return Err(ReplayError::State);
    }
    Ok(state)
}
