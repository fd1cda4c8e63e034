//! Credit-point balances and the hash-chained log of settled stages.
//!
//! Every settled stage becomes a [`StageRecord`] whose hash covers the previous
//! record's hash followed by the canonical encoding of the stage body
//! (stage index, actions, outcomes, burned fees and floor events). The first
//! record links to [`Digest::ZERO`].

use std::collections::BTreeMap;
use std::fmt;

use log::debug;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::canonical::CanonicalWriter;
use crate::types::{Action, AgentId, StageIndex, StageOutcome};

/// SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A balance that would have gone negative and was clamped to zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorEvent {
    pub agent: AgentId,
    /// Amount of loss that could not be covered (positive).
    pub shortfall: f64,
}

/// Everything settled in one stage, before it is chained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageBody {
    pub stage: StageIndex,
    pub actions: Vec<Action>,
    pub outcomes: BTreeMap<AgentId, StageOutcome>,
    pub fees: BTreeMap<AgentId, f64>,
    pub floors: Vec<FloorEvent>,
}

impl StageBody {
    /// Canonical encoding hashed into the chain.
    pub fn canonical(&self) -> String {
        let mut actions: Vec<&Action> = self.actions.iter().collect();
        actions.sort_by_key(|a| a.id);
        let mut w = CanonicalWriter::new();
        w.ordered_object(|o| {
            o.field("actions", |w| {
                w.array(actions, |w, a| {
                    w.ordered_object(|o| {
                        o.uint("actor", a.actor.0)
                            .string("direction", a.direction.as_str())
                            .uint("id", a.id.0)
                            .uint("stage", a.stage.0)
                            .real("stake", a.stake)
                            .uint("treatment", a.treatment.0);
                    });
                });
            });
            o.field("fees", |w| {
                w.ordered_object(|o| {
                    for (key, agent) in keys_by_decimal(self.fees.keys()) {
                        o.real(&key, self.fees[&agent]);
                    }
                });
            });
            o.field("floors", |w| {
                w.array(&self.floors, |w, f| {
                    w.ordered_object(|o| {
                        o.uint("agent", f.agent.0).real("shortfall", f.shortfall);
                    });
                });
            });
            o.field("outcomes", |w| {
                w.ordered_object(|o| {
                    for (key, agent) in keys_by_decimal(self.outcomes.keys()) {
                        let out = &self.outcomes[&agent];
                        o.field(&key, |w| {
                            w.ordered_object(|o| {
                                o.real("coeff_action", out.coeff_action)
                                    .real("coeff_rating", out.coeff_rating)
                                    .real("delta_action", out.delta_action)
                                    .real("delta_rating", out.delta_rating)
                                    .real("delta_total", out.delta_total);
                            });
                        });
                    }
                });
            });
            o.uint("stage", self.stage.0);
        });
        w.into_string()
    }

    pub fn digest(&self, prev: &Digest) -> Digest {
        let mut h = Sha256::new();
        h.update(prev.0);
        h.update(self.canonical().as_bytes());
        Digest(h.finalize().into())
    }
}

/// Agent ids paired with their decimal form, in byte order of that form.
fn keys_by_decimal<'a>(ids: impl Iterator<Item = &'a AgentId>) -> Vec<(String, AgentId)> {
    let mut keys: Vec<(String, AgentId)> = ids.map(|id| (id.to_string(), *id)).collect();
    keys.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    keys
}

/// Input to [`CreditLedger::apply`]: the settled outcomes of one stage plus
/// optional burned fees and the actions submitted.
#[derive(Clone, Debug, Default)]
pub struct StageInput {
    pub stage: StageIndex,
    pub outcomes: BTreeMap<AgentId, StageOutcome>,
    pub fees: BTreeMap<AgentId, f64>,
    pub actions: Vec<Action>,
}

impl StageInput {
    pub fn new(stage: StageIndex, outcomes: BTreeMap<AgentId, StageOutcome>) -> Self {
        Self {
            stage,
            outcomes,
            ..Self::default()
        }
    }

    pub fn with_fees(mut self, fees: BTreeMap<AgentId, f64>) -> Self {
        self.fees = fees;
        self
    }

    pub fn with_actions(mut self, actions: Vec<Action>) -> Self {
        self.actions = actions;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    #[serde(flatten)]
    pub body: StageBody,
    pub prev_hash: Digest,
    pub hash: Digest,
}

impl StageRecord {
    pub fn stage(&self) -> StageIndex {
        self.body.stage
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("out-of-order settlement: expected stage {expected}, got {got}")]
    StageMismatch { expected: StageIndex, got: StageIndex },
    #[error("stage {stage} references unknown agent {agent}")]
    UnknownAgent { stage: StageIndex, agent: AgentId },
    #[error("stage {stage}: non-finite or negative value for agent {agent}")]
    BadValue { stage: StageIndex, agent: AgentId },
    #[error("duplicate agent {0} in genesis balances")]
    DuplicateAgent(AgentId),
    #[error("genesis balance of agent {0} must be finite and non-negative")]
    BadGenesis(AgentId),
}

/// Result of [`CreditLedger::verify_chain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainStatus {
    Valid,
    Invalid { first_bad_stage: StageIndex },
}

impl ChainStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainStatus::Valid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreditLedger {
    genesis: BTreeMap<AgentId, f64>,
    balances: BTreeMap<AgentId, f64>,
    total_supply: f64,
    stage_log: Vec<StageRecord>,
}

fn supply_of(balances: &BTreeMap<AgentId, f64>) -> f64 {
    balances.values().sum()
}

impl CreditLedger {
    pub fn new<I>(balances: I) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = (AgentId, f64)>,
    {
        let mut map = BTreeMap::new();
        for (agent, balance) in balances {
            if !(balance.is_finite() && balance >= 0.0) {
                return Err(LedgerError::BadGenesis(agent));
            }
            if map.insert(agent, balance).is_some() {
                return Err(LedgerError::DuplicateAgent(agent));
            }
        }
        Ok(Self {
            total_supply: supply_of(&map),
            genesis: map.clone(),
            balances: map,
            stage_log: Vec::new(),
        })
    }

    pub fn balances(&self) -> &BTreeMap<AgentId, f64> {
        &self.balances
    }

    pub fn balance(&self, agent: AgentId) -> Option<f64> {
        self.balances.get(&agent).copied()
    }

    pub fn genesis(&self) -> &BTreeMap<AgentId, f64> {
        &self.genesis
    }

    pub fn total_supply(&self) -> f64 {
        self.total_supply
    }

    pub fn stage_log(&self) -> &[StageRecord] {
        &self.stage_log
    }

    pub fn next_stage(&self) -> StageIndex {
        StageIndex(self.stage_log.len() as u64)
    }

    pub fn head(&self) -> Digest {
        self.stage_log.last().map_or(Digest::ZERO, |r| r.hash)
    }

    /// Applies one stage: burns fees, adds each agent's `delta_total`, floors
    /// negative balances at zero and appends a chained record.
    pub fn apply(&mut self, input: StageInput) -> Result<&StageRecord, LedgerError> {
        let expected = self.next_stage();
        if input.stage != expected {
            return Err(LedgerError::StageMismatch {
                expected,
                got: input.stage,
            });
        }
        let stage = input.stage;
        for (agent, out) in &input.outcomes {
            if !self.balances.contains_key(agent) {
                return Err(LedgerError::UnknownAgent { stage, agent: *agent });
            }
            if !out.delta_total.is_finite() {
                return Err(LedgerError::BadValue { stage, agent: *agent });
            }
        }
        for (agent, fee) in &input.fees {
            if !self.balances.contains_key(agent) {
                return Err(LedgerError::UnknownAgent { stage, agent: *agent });
            }
            if !(fee.is_finite() && *fee >= 0.0) {
                return Err(LedgerError::BadValue { stage, agent: *agent });
            }
        }

        let mut floors = Vec::new();
        for (agent, balance) in self.balances.iter_mut() {
            let fee = input.fees.get(agent).copied().unwrap_or(0.0);
            let delta = input.outcomes.get(agent).map_or(0.0, |o| o.delta_total);
            if fee == 0.0 && delta == 0.0 {
                continue;
            }
            let next = *balance - fee + delta;
            if next < 0.0 {
                debug!("stage {stage}: agent {agent} floored, shortfall {}", -next);
                floors.push(FloorEvent {
                    agent: *agent,
                    shortfall: -next,
                });
                *balance = 0.0;
            } else {
                *balance = next;
            }
        }
        self.total_supply = supply_of(&self.balances);

        let body = StageBody {
            stage,
            actions: input.actions,
            outcomes: input.outcomes,
            fees: input.fees,
            floors,
        };
        let prev_hash = self.head();
        let hash = body.digest(&prev_hash);
        self.stage_log.push(StageRecord { body, prev_hash, hash });
        Ok(self.stage_log.last().expect("just pushed"))
    }

    /// Recomputes every record hash and link. Corruption is reported, not raised.
    pub fn verify_chain(&self) -> ChainStatus {
        verify_records(&self.stage_log)
    }

    /// Replays the stage log from genesis and checks the stored balances.
    /// Returns the first stage whose replay disagrees, if any.
    pub fn verify_balances(&self) -> Result<(), StageIndex> {
        let mut balances = self.genesis.clone();
        for rec in &self.stage_log {
            for (agent, balance) in balances.iter_mut() {
                let fee = rec.body.fees.get(agent).copied().unwrap_or(0.0);
                let delta = rec.body.outcomes.get(agent).map_or(0.0, |o| o.delta_total);
                if fee == 0.0 && delta == 0.0 {
                    continue;
                }
                let next = *balance - fee + delta;
                let floored = rec.body.floors.iter().any(|f| f.agent == *agent);
                if (next < 0.0) != floored {
                    return Err(rec.stage());
                }
                *balance = next.max(0.0);
            }
        }
        if balances != self.balances || supply_of(&balances) != self.total_supply {
            return Err(self.stage_log.last().map_or(StageIndex(0), |r| r.stage()));
        }
        Ok(())
    }

    /// Mutable access to the log for audit tests that tamper with history.
    #[doc(hidden)]
    pub fn stage_log_mut(&mut self) -> &mut Vec<StageRecord> {
        &mut self.stage_log
    }
}

/// Verifies stage numbering, hash links and stored hashes of a record sequence.
pub fn verify_records(records: &[StageRecord]) -> ChainStatus {
    let mut prev = Digest::ZERO;
    for (i, rec) in records.iter().enumerate() {
        let ok = rec.stage() == StageIndex(i as u64) && rec.prev_hash == prev && rec.body.digest(&prev) == rec.hash;
        if !ok {
            return ChainStatus::Invalid {
                first_bad_stage: StageIndex(i as u64),
            };
        }
        prev = rec.hash;
    }
    ChainStatus::Valid
}
