use std::fmt;

use crate::anomaly::Detection;
use crate::arx::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Warmup,
    Normal,
    Anomaly { feature: usize },
    /// Strategy runs without a detector.
    Unchecked,
}

impl From<Detection> for Verdict {
    fn from(d: Detection) -> Self {
        match d {
            Detection::Warmup => Verdict::Warmup,
            Detection::Normal => Verdict::Normal,
            Detection::Anomaly { feature } => Verdict::Anomaly { feature },
        }
    }
}

impl Verdict {
    pub fn is_anomaly(&self) -> bool {
        matches!(self, Verdict::Anomaly { .. })
    }

    pub fn violating_feature(&self) -> Option<usize> {
        match self {
            Verdict::Anomaly { feature } => Some(*feature),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Warmup => "warmup",
            Verdict::Normal => "normal",
            Verdict::Anomaly { .. } => "anomaly",
            Verdict::Unchecked => "unchecked",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Own gradient step.
    LocalUpdate,
    /// `|error| <= delta`; nothing learned.
    SkipDelta,
    /// Model advanced by the mean of eligible peer results (plus its own
    /// result under S-FL).
    SharedUpdate { donors: Vec<usize>, similarities: Vec<f64> },
    /// Anomalous with nothing eligible; parameters untouched.
    Frozen,
    /// Gradient sent to the global model.
    Contributed,
    /// Anomalous sample withheld from the global model.
    Dropped,
    /// Model updated by the raw-data server.
    ServerUpdate,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::LocalUpdate => f.write_str("local"),
            Action::SkipDelta => f.write_str("skip-delta"),
            Action::SharedUpdate { donors, .. } => {
                let ids: Vec<String> = donors.iter().map(|d| d.to_string()).collect();
                write!(f, "shared[{}]", ids.join(";"))
            }
            Action::Frozen => f.write_str("frozen"),
            Action::Contributed => f.write_str("contributed"),
            Action::Dropped => f.write_str("dropped"),
            Action::ServerUpdate => f.write_str("server"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberRound {
    pub member_id: usize,
    pub verdict: Verdict,
    /// Prediction error `w . phi - y` with the pre-round model.
    pub error: f64,
    pub action: Action,
    /// Running sqrt MSE including this round.
    pub sqrt_mse: f64,
    /// Member's (effective) parameters after the round.
    pub params: Vec<f64>,
}

/// One entry per member for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub iteration: usize,
    pub members: Vec<MemberRound>,
}

/// A receiver consulting the sharing policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SharingEvent {
    pub iteration: usize,
    pub receiver: usize,
    pub donors: Vec<usize>,
    pub similarities: Vec<f64>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn metrics_csv(rounds: &[RoundLog]) -> String {
    let mut out = String::from("iteration,member,epsilon,sqrt_mse,verdict,action\n");
    for r in rounds {
        for m in &r.members {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration, m.member_id, m.error, m.sqrt_mse, m.verdict, m.action
            ));
        }
    }
    out
}

pub fn detection_csv(rounds: &[RoundLog]) -> String {
    let mut out = String::from("member_id,iteration,verdict,violating_feature\n");
    for r in rounds {
        for m in &r.members {
            if m.verdict == Verdict::Unchecked {
                continue;
            }
            let feature = m.verdict.violating_feature().map(|f| f.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", m.member_id, r.iteration, m.verdict, feature));
        }
    }
    out
}

pub fn sharing_csv(events: &[SharingEvent]) -> String {
    let mut out = String::from("iteration,receiver_id,donor_ids,rho\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.iteration,
            e.receiver,
            join(&e.donors),
            join(&e.similarities)
        ));
    }
    out
}

pub fn models_csv(trip_ids: &[String], models: &[LinearModel]) -> String {
    let dim = models.first().map(LinearModel::dim).unwrap_or(0);
    let mut out = String::from("member");
    for j in 0..dim {
        out.push_str(&format!(",w{j}"));
    }
    out.push('\n');
    for (id, m) in trip_ids.iter().zip(models) {
        out.push_str(id);
        for w in &m.params {
            out.push_str(&format!(",{w}"));
        }
        out.push('\n');
    }
    out
}
