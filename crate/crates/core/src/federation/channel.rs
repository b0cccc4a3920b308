//! The only path by which anything leaves a member.
//!
//! Every inter-member or member-to-server transfer is a [`Message`] passed
//! through a [`Channel`], which counts what crossed. Only
//! [`Message::RawRecord`] carries a [`TripRecord`]; it is constructed solely
//! by the raw-data-pooling baseline.

use crate::data::TripRecord;
use crate::sharing::GradientRecord;

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    LearnedResult(GradientRecord),
    Model { member_id: usize, params: Vec<f64> },
    RawRecord { member_id: usize, record: TripRecord },
}

/// Counts of messages that crossed the channel, by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelAudit {
    pub learned_results: usize,
    pub model_transfers: usize,
    pub raw_records: usize,
}

#[derive(Debug, Default)]
pub struct Channel {
    audit: ChannelAudit,
}

impl Channel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Hands `msg` to the receiver, by value.
    pub fn deliver(&mut self, msg: Message) -> Message {
        match &msg {
            Message::LearnedResult(_) => self.audit.learned_results += 1,
            Message::Model { .. } => self.audit.model_transfers += 1,
            Message::RawRecord { .. } => self.audit.raw_records += 1,
        }
        msg
    }

    pub fn send_learned(&mut self, rec: GradientRecord) -> GradientRecord {
        match self.deliver(Message::LearnedResult(rec)) {
            Message::LearnedResult(r) => r,
            _ => unreachable!(),
        }
    }

    pub fn send_model(&mut self, member_id: usize, params: Vec<f64>) -> Vec<f64> {
        match self.deliver(Message::Model { member_id, params }) {
            Message::Model { params, .. } => params,
            _ => unreachable!(),
        }
    }

    pub fn send_raw(&mut self, member_id: usize, record: TripRecord) -> TripRecord {
        match self.deliver(Message::RawRecord { member_id, record }) {
            Message::RawRecord { record, .. } => record,
            _ => unreachable!(),
        }
    }

    pub fn audit(&self) -> ChannelAudit {
        self.audit
    }
}
