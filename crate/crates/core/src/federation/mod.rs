//! Round-by-round orchestration of a fleet under one of six strategies.
//!
//! Each iteration hands every member exactly one fresh sample, in recorded
//! order. Members never see each other's data: everything that crosses a
//! member boundary goes through [`Channel`] as a learned result or a model,
//! except under AS-FL, which ships raw records to a central server on
//! purpose.
//!
//! | strategy | models      | detector | what is shared                                  |
//! |----------|-------------|----------|-------------------------------------------------|
//! | E-FL     | per member  | yes      | anomalous members average similar peer results  |
//! | U-FL     | one global  | no       | mean of all gradients                           |
//! | R-FL     | one global  | no       | mean of proximal-penalized local results        |
//! | AS-FL    | per member  | no       | raw records; server couples models to the mean  |
//! | AD-FL    | one global  | yes      | mean of gradients from normal samples           |
//! | S-FL     | per member  | no       | own result averaged with similar peer results   |

mod channel;
mod evaluate;
mod log;

pub use channel::{Channel, ChannelAudit, Message};
pub use evaluate::{evaluate, EvaluationTable};
pub use log::{
    detection_csv, metrics_csv, models_csv, sharing_csv, Action, MemberRound, RoundLog, SharingEvent,
    Verdict,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anomaly::{AnomalyDetector, DetectorConfig};
use crate::arx::{build_regressor, predict, sgd_step, ArxOrder, LearnedResult, LinearModel, Regressor};
use crate::data::{TripDataset, TripRecord};
use crate::error::{Error, Result};
use crate::metrics::MetricsSeries;
use crate::sharing::{aggregate_shared, eligible_gradients, GradientRecord, SharingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "EFL", alias = "E-FL")]
    Efl,
    #[serde(rename = "UFL", alias = "U-FL")]
    Ufl,
    #[serde(rename = "ASFL", alias = "AS-FL")]
    Asfl,
    #[serde(rename = "RFL", alias = "R-FL")]
    Rfl,
    #[serde(rename = "ADFL", alias = "AD-FL")]
    Adfl,
    #[serde(rename = "SFL", alias = "S-FL")]
    Sfl,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Efl,
        Strategy::Ufl,
        Strategy::Asfl,
        Strategy::Rfl,
        Strategy::Adfl,
        Strategy::Sfl,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Efl => "E-FL",
            Strategy::Ufl => "U-FL",
            Strategy::Asfl => "AS-FL",
            Strategy::Rfl => "R-FL",
            Strategy::Adfl => "AD-FL",
            Strategy::Sfl => "S-FL",
        }
    }

    /// Whether raw trip records leave the members.
    pub fn shares_raw_data(&self) -> bool {
        matches!(self, Strategy::Asfl)
    }

    pub fn uses_detector(&self) -> bool {
        matches!(self, Strategy::Efl | Strategy::Adfl)
    }

    pub fn has_global_model(&self) -> bool {
        matches!(self, Strategy::Ufl | Strategy::Rfl | Strategy::Adfl)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_uppercase();
        match key.as_str() {
            "EFL" => Ok(Strategy::Efl),
            "UFL" => Ok(Strategy::Ufl),
            "ASFL" => Ok(Strategy::Asfl),
            "RFL" => Ok(Strategy::Rfl),
            "ADFL" => Ok(Strategy::Adfl),
            "SFL" => Ok(Strategy::Sfl),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    /// Use only the first `members` trips of the fleet; all of them if unset.
    #[serde(default)]
    pub members: Option<usize>,
    pub strategy: Strategy,
    /// Update threshold on `|error|`.
    #[serde(default)]
    pub delta: f64,
    /// Learning step.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub sharing: SharingConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub order: ArxOrder,
    /// Iterations to run.
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// R-FL: weight of the proximal penalty `(w/2) |w - w_global|^2`.
    #[serde(default = "default_prox_weight")]
    pub prox_weight: f64,
    /// R-FL: local gradient steps per round on the penalized objective.
    #[serde(default = "default_prox_local_steps")]
    pub prox_local_steps: usize,
    /// AS-FL: pull `kappa (mean_w - w_i)` towards the fleet mean.
    #[serde(default = "default_coupling")]
    pub coupling: f64,
}

fn default_lambda() -> f64 {
    0.01
}
fn default_prox_weight() -> f64 {
    0.1
}
fn default_prox_local_steps() -> usize {
    5
}
fn default_coupling() -> f64 {
    0.01
}

impl FederationConfig {
    pub fn new(strategy: Strategy, budget: usize) -> Self {
        FederationConfig {
            members: None,
            strategy,
            delta: 0.0,
            lambda: default_lambda(),
            sharing: SharingConfig::default(),
            detector: DetectorConfig::default(),
            order: ArxOrder::default(),
            budget,
            seed: 0,
            prox_weight: default_prox_weight(),
            prox_local_steps: default_prox_local_steps(),
            coupling: default_coupling(),
        }
    }

    pub fn with_strategy(&self, strategy: Strategy) -> Self {
        FederationConfig {
            strategy,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.members == Some(0) {
            return bad("member count must be at least 1".into());
        }
        if self.budget == 0 {
            return bad("iteration budget must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive and finite, got {}", self.lambda));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.prox_weight >= 0.0 && self.prox_weight.is_finite()) {
            return bad(format!("prox_weight must be finite and >= 0, got {}", self.prox_weight));
        }
        if self.prox_local_steps == 0 {
            return bad("prox_local_steps must be at least 1".into());
        }
        if !((0.0..=1.0).contains(&self.coupling)) {
            return bad(format!("coupling must lie in [0, 1], got {}", self.coupling));
        }
        self.sharing.validate()?;
        self.detector.validate()?;
        self.order.validate()
    }
}

/// What one member carries between rounds. Its trip data is held separately
/// and never placed on the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberState {
    pub member_id: usize,
    pub model: LinearModel,
    pub detector: Option<AnomalyDetector>,
    /// Most recent vector that moved this member's model.
    pub last_result: Option<LearnedResult>,
    /// Index of the next record to consume.
    pub cursor: usize,
}

impl MemberState {
    pub fn new(member_id: usize, dim: usize, detector: Option<DetectorConfig>) -> Result<Self> {
        Ok(MemberState {
            member_id,
            model: LinearModel::zeros(dim),
            detector: detector.map(AnomalyDetector::new).transpose()?,
            last_result: None,
            cursor: 0,
        })
    }
}

/// A member's local sample for one iteration: detector input, regressor and
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSample {
    pub x: Vec<f64>,
    pub phi: Regressor,
    pub y: f64,
}

impl RoundSample {
    pub fn from_trip(trip: &TripDataset, order: ArxOrder, t: usize) -> Result<Self> {
        let phi = build_regressor(&trip.records, order, t)?;
        let rec = &trip.records[t];
        Ok(RoundSample {
            x: rec.x.clone(),
            phi,
            y: rec.y,
        })
    }
}

/// Mutable per-run bookkeeping shared by the round functions.
#[derive(Debug, Default)]
pub struct RoundContext {
    pub channel: Channel,
    pub metrics: MetricsSeries,
    pub sharing: Vec<SharingEvent>,
}

impl RoundContext {
    pub fn new(n_members: usize) -> Self {
        RoundContext {
            channel: Channel::new(),
            metrics: MetricsSeries::new(n_members),
            sharing: Vec::new(),
        }
    }
}

/// Error and (unapplied) gradient step of `model` on `s`; `None` when within
/// `delta`.
fn local_gradient(
    model: &LinearModel,
    s: &RoundSample,
    lambda: f64,
    delta: f64,
    iteration: usize,
) -> Result<(f64, Option<Vec<f64>>)> {
    let mut scratch = model.clone();
    let out = sgd_step(&mut scratch, &s.phi, s.y, lambda, delta, iteration)?;
    Ok((out.error, out.result.map(|r| r.step)))
}

fn check_samples(members: usize, samples: &[RoundSample], dim: usize) -> Result<()> {
    if samples.len() != members {
        return Err(Error::shape("samples for iteration", members, samples.len()));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.phi.len() != dim {
            return Err(Error::shape(format!("regressor of member {i}"), dim, s.phi.len()));
        }
    }
    Ok(())
}

fn finish_round(
    iteration: usize,
    members: &[MemberState],
    partial: Vec<(Verdict, f64, Action)>,
    metrics: &mut MetricsSeries,
) -> RoundLog {
    let entries = members
        .iter()
        .zip(partial)
        .enumerate()
        .map(|(i, (m, (verdict, error, action)))| MemberRound {
            member_id: m.member_id,
            verdict,
            error,
            action,
            sqrt_mse: metrics.push(i, error),
            params: m.model.params.clone(),
        })
        .collect();
    RoundLog {
        iteration,
        members: entries,
    }
}

/// One E-FL iteration.
///
/// Phase 1, every member: detect; normal members either skip (`|e| <= delta`)
/// or take a local gradient step and publish the step. Phase 2, after all of
/// phase 1: each anomalous member compares its last learned result with this
/// iteration's published steps, averages the eligible ones and adds the mean
/// to its model. No last result or nothing eligible leaves the model frozen.
pub fn run_iteration_efl(
    members: &mut [MemberState],
    samples: &[RoundSample],
    cfg: &FederationConfig,
    iteration: usize,
    ctx: &mut RoundContext,
) -> Result<RoundLog> {
    let dim = members.first().map(|m| m.model.dim()).unwrap_or(0);
    check_samples(members.len(), samples, dim)?;
    let mut partial = Vec::with_capacity(members.len());
    let mut published: Vec<GradientRecord> = Vec::new();

    for (m, s) in members.iter_mut().zip(samples) {
        let verdict: Verdict = match m.detector.as_mut() {
            Some(d) => d.observe(&s.x)?.into(),
            None => Verdict::Unchecked,
        };
        if verdict.is_anomaly() {
            let error = predict(&m.model, &s.phi)? - s.y;
            partial.push((verdict, error, Action::Frozen));
            continue;
        }
        let out = sgd_step(&mut m.model, &s.phi, s.y, cfg.lambda, cfg.delta, iteration)?;
        let action = match out.result {
            Some(result) => {
                published.push(ctx.channel.send_learned(GradientRecord {
                    member_id: m.member_id,
                    iteration,
                    step: result.step.clone(),
                }));
                m.last_result = Some(result);
                Action::LocalUpdate
            }
            None => Action::SkipDelta,
        };
        partial.push((verdict, out.error, action));
    }

    // barrier: phase 2 only reads this iteration's published steps
    for (m, entry) in members.iter_mut().zip(partial.iter_mut()) {
        if !entry.0.is_anomaly() {
            continue;
        }
        let Some(last) = m.last_result.as_ref() else {
            ctx.sharing.push(SharingEvent {
                iteration,
                receiver: m.member_id,
                donors: vec![],
                similarities: vec![],
            });
            continue;
        };
        let reference = GradientRecord {
            member_id: m.member_id,
            iteration: last.iteration,
            step: last.step.clone(),
        };
        let eligible = eligible_gradients(&reference, &published, &cfg.sharing)?;
        let donors: Vec<usize> = eligible.iter().map(|e| e.record.member_id).collect();
        let similarities: Vec<f64> = eligible.iter().map(|e| e.similarity).collect();
        let shared = aggregate_shared(eligible.iter().map(|e| e.record.step.as_slice()))?;
        ctx.sharing.push(SharingEvent {
            iteration,
            receiver: m.member_id,
            donors: donors.clone(),
            similarities: similarities.clone(),
        });
        if let Some(step) = shared {
            let step = ctx
                .channel
                .send_learned(GradientRecord {
                    member_id: m.member_id,
                    iteration,
                    step,
                })
                .step;
            m.model.apply_step(&step)?;
            m.last_result = Some(LearnedResult { step, iteration });
            entry.2 = Action::SharedUpdate { donors, similarities };
        }
    }

    Ok(finish_round(iteration, members, partial, &mut ctx.metrics))
}

/// Per-iteration audit trail and final state of one strategy run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub strategy: Strategy,
    pub trip_ids: Vec<String>,
    pub models: Vec<LinearModel>,
    pub metrics: MetricsSeries,
    pub rounds: Vec<RoundLog>,
    pub sharing: Vec<SharingEvent>,
    pub channel: ChannelAudit,
}

/// A fleet being trained under one strategy.
pub struct Federation {
    cfg: FederationConfig,
    trips: Vec<TripDataset>,
    members: Vec<MemberState>,
    global: Option<LinearModel>,
    /// AS-FL server's copy of every member's raw records.
    server_history: Vec<Vec<TripRecord>>,
    ctx: RoundContext,
    iteration: usize,
    rounds: Vec<RoundLog>,
}

impl Federation {
    pub fn new(fleet: &[TripDataset], cfg: &FederationConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.members.unwrap_or(fleet.len());
        if n == 0 {
            return Err(Error::Config("fleet has no members".into()));
        }
        if n > fleet.len() {
            return Err(Error::Config(format!(
                "{n} members requested but the fleet has {}",
                fleet.len()
            )));
        }
        let trips: Vec<TripDataset> = fleet[..n].to_vec();
        let m = trips[0].n_features();
        let dim = cfg.order.regressor_dim(m);
        let needed = cfg.order.first_usable() + cfg.budget;
        for t in &trips {
            if t.n_features() != m {
                return Err(Error::shape(format!("input features of trip `{}`", t.trip_id), m, t.n_features()));
            }
            if t.len() < needed {
                return Err(Error::Length {
                    available: t.len(),
                    requested: needed,
                });
            }
        }
        let detector = cfg.strategy.uses_detector().then_some(cfg.detector);
        let members = (0..n)
            .map(|i| {
                let mut s = MemberState::new(i, dim, detector)?;
                s.cursor = cfg.order.first_usable();
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Federation {
            global: cfg.strategy.has_global_model().then(|| LinearModel::zeros(dim)),
            server_history: vec![Vec::new(); n],
            ctx: RoundContext::new(n),
            cfg: cfg.clone(),
            trips,
            members,
            iteration: 0,
            rounds: Vec::new(),
        })
    }

    pub fn members(&self) -> &[MemberState] {
        &self.members
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.cfg.budget
    }

    /// Each member reads its next local sample.
    fn local_samples(&mut self) -> Result<Vec<RoundSample>> {
        let order = self.cfg.order;
        self.members
            .iter_mut()
            .zip(&self.trips)
            .map(|(m, trip)| {
                if m.cursor >= trip.len() {
                    return Err(Error::Length {
                        available: trip.len(),
                        requested: m.cursor + 1,
                    });
                }
                let s = RoundSample::from_trip(trip, order, m.cursor)?;
                m.cursor += 1;
                Ok(s)
            })
            .collect()
    }

    /// Runs one iteration and returns its log.
    pub fn step(&mut self) -> Result<&RoundLog> {
        if self.is_done() {
            return Err(Error::Length {
                available: self.cfg.budget,
                requested: self.iteration + 1,
            });
        }
        let k = self.iteration;
        let log = match self.cfg.strategy {
            Strategy::Efl => {
                let samples = self.local_samples()?;
                run_iteration_efl(&mut self.members, &samples, &self.cfg, k, &mut self.ctx)?
            }
            Strategy::Ufl | Strategy::Adfl | Strategy::Rfl => self.global_round(k)?,
            Strategy::Sfl => self.sfl_round(k)?,
            Strategy::Asfl => self.asfl_round(k)?,
        };
        self.rounds.push(log);
        self.iteration += 1;
        Ok(self.rounds.last().expect("just pushed"))
    }

    /// U-FL, AD-FL and R-FL: one global model updated by the mean of the
    /// members' learned results, re-broadcast every round.
    fn global_round(&mut self, k: usize) -> Result<RoundLog> {
        let samples = self.local_samples()?;
        let cfg = &self.cfg;
        let global = self.global.as_ref().expect("global strategy").clone();
        let mut partial = Vec::with_capacity(self.members.len());
        let mut received: Vec<GradientRecord> = Vec::new();

        for (m, s) in self.members.iter_mut().zip(&samples) {
            let verdict: Verdict = match m.detector.as_mut() {
                Some(d) => d.observe(&s.x)?.into(),
                None => Verdict::Unchecked,
            };
            let error = predict(&global, &s.phi)? - s.y;
            if verdict.is_anomaly() {
                partial.push((verdict, error, Action::Dropped));
                continue;
            }
            let step = match cfg.strategy {
                Strategy::Rfl => proximal_result(&global, s, cfg)?,
                _ => local_gradient(&global, s, cfg.lambda, cfg.delta, k)?.1,
            };
            let action = match step {
                Some(step) => {
                    received.push(ctx_send(&mut self.ctx, m.member_id, k, step));
                    Action::Contributed
                }
                None => Action::SkipDelta,
            };
            partial.push((verdict, error, action));
        }

        let global = self.global.as_mut().expect("global strategy");
        if let Some(mean) = aggregate_shared(received.iter().map(|r| r.step.as_slice()))? {
            global.apply_step(&mean)?;
        }
        for m in &mut self.members {
            m.model.params = self.ctx.channel.send_model(m.member_id, global.params.clone());
        }
        Ok(finish_round(k, &self.members, partial, &mut self.ctx.metrics))
    }

    /// S-FL: no detector; every member averages its own step with every peer
    /// step at least `mu`-similar to it.
    fn sfl_round(&mut self, k: usize) -> Result<RoundLog> {
        let samples = self.local_samples()?;
        let cfg = &self.cfg;
        let mut partial = Vec::with_capacity(self.members.len());
        let mut own: Vec<Option<GradientRecord>> = Vec::with_capacity(self.members.len());
        let mut published: Vec<GradientRecord> = Vec::new();
        for (m, s) in self.members.iter().zip(&samples) {
            let (error, step) = local_gradient(&m.model, s, cfg.lambda, cfg.delta, k)?;
            partial.push((Verdict::Unchecked, error, Action::SkipDelta));
            let rec = step.map(|step| GradientRecord {
                member_id: m.member_id,
                iteration: k,
                step,
            });
            if let Some(r) = &rec {
                published.push(self.ctx.channel.send_learned(r.clone()));
            }
            own.push(rec);
        }

        for ((m, entry), mine) in self.members.iter_mut().zip(partial.iter_mut()).zip(&own) {
            let Some(mine) = mine else { continue };
            let eligible = eligible_gradients(mine, &published, &cfg.sharing)?;
            let donors: Vec<usize> = eligible.iter().map(|e| e.record.member_id).collect();
            let similarities: Vec<f64> = eligible.iter().map(|e| e.similarity).collect();
            let steps = std::iter::once(mine.step.as_slice()).chain(eligible.iter().map(|e| e.record.step.as_slice()));
            let step = aggregate_shared(steps)?.expect("own step present");
            m.model.apply_step(&step)?;
            m.last_result = Some(LearnedResult { step, iteration: k });
            entry.2 = if donors.is_empty() {
                Action::LocalUpdate
            } else {
                self.ctx.sharing.push(SharingEvent {
                    iteration: k,
                    receiver: m.member_id,
                    donors: donors.clone(),
                    similarities: similarities.clone(),
                });
                Action::SharedUpdate { donors, similarities }
            };
        }
        Ok(finish_round(k, &self.members, partial, &mut self.ctx.metrics))
    }

    /// AS-FL: members ship raw records to a server, which keeps one model per
    /// member, takes each member's gradient step on its own sample and pulls
    /// every model towards the fleet mean.
    fn asfl_round(&mut self, k: usize) -> Result<RoundLog> {
        let order = self.cfg.order;
        // raw records cross the channel; the server rebuilds regressors itself
        for (i, (m, trip)) in self.members.iter_mut().zip(&self.trips).enumerate() {
            let history = &mut self.server_history[i];
            while history.len() <= m.cursor {
                let rec = trip.records[history.len()].clone();
                history.push(self.ctx.channel.send_raw(m.member_id, rec));
            }
            m.cursor += 1;
        }
        let n = self.members.len() as f64;
        let dim = self.members[0].model.dim();
        let mut fleet_mean = vec![0.0; dim];
        for m in &self.members {
            for (acc, w) in fleet_mean.iter_mut().zip(&m.model.params) {
                *acc += w / n;
            }
        }
        let cfg = &self.cfg;
        let mut partial = Vec::with_capacity(self.members.len());
        for (i, m) in self.members.iter_mut().enumerate() {
            let history = &self.server_history[i];
            let t = history.len() - 1;
            let phi = build_regressor(history, order, t)?;
            let s = RoundSample {
                x: history[t].x.clone(),
                phi,
                y: history[t].y,
            };
            let (error, step) = local_gradient(&m.model, &s, cfg.lambda, cfg.delta, k)?;
            let mut update: Vec<f64> = m
                .model
                .params
                .iter()
                .zip(&fleet_mean)
                .map(|(w, mean)| cfg.coupling * (mean - w))
                .collect();
            let action = match &step {
                Some(g) => {
                    update.iter_mut().zip(g).for_each(|(u, g)| *u += g);
                    Action::ServerUpdate
                }
                None => Action::SkipDelta,
            };
            m.model.apply_step(&update)?;
            m.last_result = Some(LearnedResult { step: update, iteration: k });
            partial.push((Verdict::Unchecked, error, action));
        }
        for m in &mut self.members {
            let params = std::mem::take(&mut m.model.params);
            m.model.params = self.ctx.channel.send_model(m.member_id, params);
        }
        Ok(finish_round(k, &self.members, partial, &mut self.ctx.metrics))
    }

    pub fn finish(self) -> RunOutput {
        RunOutput {
            strategy: self.cfg.strategy,
            trip_ids: self.trips.iter().map(|t| t.trip_id.clone()).collect(),
            models: self.members.iter().map(|m| m.model.clone()).collect(),
            metrics: self.ctx.metrics,
            rounds: self.rounds,
            sharing: self.ctx.sharing,
            channel: self.ctx.channel.audit(),
        }
    }
}

fn ctx_send(ctx: &mut RoundContext, member_id: usize, iteration: usize, step: Vec<f64>) -> GradientRecord {
    ctx.channel.send_learned(GradientRecord {
        member_id,
        iteration,
        step,
    })
}

/// R-FL learned result: `prox_local_steps` gradient steps from the global
/// model on `(y - w.phi)^2 + (p/2)|w - w_global|^2`, returned as
/// `w - w_global`. `None` when the global model is already within `delta`.
fn proximal_result(global: &LinearModel, s: &RoundSample, cfg: &FederationConfig) -> Result<Option<Vec<f64>>> {
    let phi = s.phi.as_slice();
    let error = predict(global, &s.phi)? - s.y;
    if error.abs() <= cfg.delta {
        return Ok(None);
    }
    let mut w = global.params.clone();
    for _ in 0..cfg.prox_local_steps {
        let e = crate::arx::dot(&w, phi) - s.y;
        for ((wj, pj), gj) in w.iter_mut().zip(phi).zip(&global.params) {
            let grad = 2.0 * e * pj + cfg.prox_weight * (*wj - gj);
            *wj -= cfg.lambda * grad;
        }
    }
    let step: Vec<f64> = w.iter().zip(&global.params).map(|(a, b)| a - b).collect();
    crate::arx::ensure_finite(&step, "proximal learned result")?;
    Ok(Some(step))
}

/// Trains the fleet under `cfg.strategy` for `cfg.budget` iterations.
pub fn run_strategy(fleet: &[TripDataset], cfg: &FederationConfig) -> Result<RunOutput> {
    let mut fed = Federation::new(fleet, cfg)?;
    while !fed.is_done() {
        fed.step()?;
    }
    Ok(fed.finish())
}
