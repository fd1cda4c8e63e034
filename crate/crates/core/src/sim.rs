//! The staged Monte Carlo loop: per stage, agents decide whether to take part,
//! vote, rate each other's votes; the stage is settled, written to the ledger
//! and staking policies are updated. Replicates run independently on
//! seed-derived substreams and may execute in parallel.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue;
use crate::config::{BalanceDistribution, ConfigError, SimConfig};
use crate::ledger::{CreditLedger, LedgerError, StageInput, StageRecord};
use crate::policy::{self, PolicyError};
use crate::rng::{substream, SubRng, INIT_STAGE};
use crate::settlement::{settle_stage_with, SettlementError, SettlementRules, StageSubmissions};
use crate::types::{ActionId, Agent, AgentId, Roles, StageIndex, StageOutcome, TreatmentId};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Settlement(#[from] SettlementError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Draws the initial population of one replicate. Investors take the highest ids.
pub fn initial_agents(config: &SimConfig, replicate: u64) -> Vec<Agent> {
    let n_doctors = config.n_agents - config.n_investors();
    let bounds = config.policy.staking_rate_bounds;
    let spread = config.policy.perception_spread;
    (0..config.n_agents)
        .map(|i| {
            let mut rng = substream(config.seed, replicate, i as u64, INIT_STAGE);
            let balance = match config.initial_balance {
                BalanceDistribution::Constant { value } => value,
                BalanceDistribution::Uniform { min, max } => min + (max - min) * rng.gen::<f64>(),
            };
            let draw_rate = |rng: &mut SubRng| bounds.min + (bounds.max - bounds.min) * rng.gen::<f64>();
            let staking_rate_action = draw_rate(&mut rng);
            let staking_rate_rating = draw_rate(&mut rng);
            let perception_bias = spread * (2.0 * rng.gen::<f64>() - 1.0);
            Agent {
                id: AgentId(i as u64),
                roles: if i < n_doctors { Roles::DOCTOR } else { Roles::INVESTOR },
                balance,
                staking_rate_action,
                staking_rate_rating,
                skip_probability: config.policy.skip_probability,
                perception_bias,
            }
        })
        .collect()
}

/// Mutable state of one replicate between stages.
#[derive(Clone, Debug)]
pub struct ReplicateState {
    pub replicate: u64,
    pub agents: Vec<Agent>,
    pub ledger: CreditLedger,
    next_action: u64,
}

impl ReplicateState {
    pub fn new(replicate: u64, agents: Vec<Agent>) -> Result<Self, SimError> {
        let ledger = CreditLedger::new(agents.iter().map(|a| (a.id, a.balance)))?;
        Ok(Self {
            replicate,
            agents,
            ledger,
            next_action: 0,
        })
    }

    pub fn stage(&self) -> StageIndex {
        self.ledger.next_stage()
    }
}

/// What one stage produced, beyond the chained record.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub submissions: StageSubmissions,
    pub outcomes: BTreeMap<AgentId, StageOutcome>,
}

/// Runs one stage of one replicate and returns the appended record.
pub fn run_stage(state: &mut ReplicateState, config: &SimConfig) -> Result<(StageRecord, StageReport), SimError> {
    let stage = state.stage();
    let treatments: Vec<TreatmentId> = (0..config.n_treatments as u64).map(TreatmentId).collect();
    let policy_cfg = &config.policy;
    let fee = config.fee;

    let mut rngs: Vec<Option<SubRng>> = state
        .agents
        .iter()
        .map(|a| {
            if a.roles.is_inert() {
                return None;
            }
            let mut rng = substream(config.seed, state.replicate, a.id.0, stage.0);
            policy::decide_participation(a, &mut rng).then_some(rng)
        })
        .collect();

    let mut subs = StageSubmissions::new(stage);
    let mut committed: BTreeMap<AgentId, f64> = BTreeMap::new();
    for (agent, rng) in state.agents.iter().zip(rngs.iter_mut()) {
        let (true, Some(rng)) = (agent.roles.actor, rng.as_mut()) else {
            continue;
        };
        let id = ActionId(state.next_action);
        state.next_action += 1;
        let action = policy::choose_action(agent, &treatments, policy_cfg, fee, id, stage, rng)?;
        committed.insert(agent.id, action.stake + fee);
        subs.actions.push(action);
    }
    for (agent, rng) in state.agents.iter().zip(rngs.iter_mut()) {
        let (true, Some(rng)) = (agent.roles.rater, rng.as_mut()) else {
            continue;
        };
        let already = committed.get(&agent.id).copied().unwrap_or(0.0);
        let ratings = policy::choose_ratings(
            agent,
            &subs.actions,
            policy_cfg.ratings_per_rater,
            policy_cfg,
            fee,
            already,
            stage,
            rng,
        )?;
        subs.ratings.extend(ratings);
    }

    let rules = SettlementRules {
        scope: config.coefficient_scope,
        ..SettlementRules::default()
    };
    let outcomes = settle_stage_with(&subs, &rules)?;

    let mut fees = BTreeMap::new();
    if fee > 0.0 {
        for a in &subs.actions {
            *fees.entry(a.actor).or_insert(0.0) += fee;
        }
        for r in &subs.ratings {
            *fees.entry(r.rater).or_insert(0.0) += fee;
        }
    }
    let record = state
        .ledger
        .apply(
            StageInput::new(stage, outcomes.clone())
                .with_fees(fees)
                .with_actions(subs.actions.clone()),
        )?
        .clone();

    for agent in state.agents.iter_mut() {
        agent.balance = state.ledger.balance(agent.id).expect("agent is in ledger");
        if let Some(outcome) = outcomes.get(&agent.id) {
            *agent = policy::update_staking_policy(agent, outcome, policy_cfg);
        }
    }
    Ok((
        record,
        StageReport {
            submissions: subs,
            outcomes,
        },
    ))
}

/// One row of the per-agent trace table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub replicate: u64,
    pub stage: u64,
    pub agent: u64,
    /// Balance after the stage settled.
    pub balance: f64,
    pub delta_action: f64,
    pub delta_rating: f64,
    pub delta_total: f64,
    /// Action staking rate in force after the stage's policy update.
    pub staking_rate_action: f64,
}

#[derive(Clone, Debug)]
pub struct ReplicateTrace {
    pub replicate: u64,
    pub initial_agents: Vec<Agent>,
    pub final_agents: Vec<Agent>,
    /// `n_rounds * n_agents` rows, stage-major, agents ascending.
    pub rows: Vec<AgentRow>,
    /// Cumulative catalogue score per treatment after each stage.
    pub treatment_scores: Vec<Vec<f64>>,
    pub ledger: CreditLedger,
}

impl ReplicateTrace {
    pub fn agent_rows(&self, agent: AgentId) -> impl Iterator<Item = &AgentRow> {
        self.rows.iter().filter(move |r| r.agent == agent.0)
    }

    /// Sum of `delta_total` over the run for every agent, indexed by agent id.
    pub fn cumulative_delta(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.initial_agents.len()];
        for r in &self.rows {
            sums[r.agent as usize] += r.delta_total;
        }
        sums
    }

    pub fn cumulative_action_delta(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.initial_agents.len()];
        for r in &self.rows {
            sums[r.agent as usize] += r.delta_action;
        }
        sums
    }
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub config: SimConfig,
    pub replicates: Vec<ReplicateTrace>,
}

/// Runs `config.n_rounds` stages starting from the given population.
pub fn run_replicate_from(config: &SimConfig, replicate: u64, agents: Vec<Agent>) -> Result<ReplicateTrace, SimError> {
    let initial_agents = agents.clone();
    let mut state = ReplicateState::new(replicate, agents)?;
    let n = state.agents.len();
    let mut rows = Vec::with_capacity(config.n_rounds * n);
    let mut scores = vec![0.0; config.n_treatments];
    let mut treatment_scores = Vec::with_capacity(config.n_rounds);
    for _ in 0..config.n_rounds {
        let (record, report) = run_stage(&mut state, config)?;
        for agent in &state.agents {
            let out = report.outcomes.get(&agent.id).copied().unwrap_or_default();
            rows.push(AgentRow {
                replicate,
                stage: record.stage().0,
                agent: agent.id.0,
                balance: agent.balance,
                delta_action: out.delta_action,
                delta_rating: out.delta_rating,
                delta_total: out.delta_total,
                staking_rate_action: agent.staking_rate_action,
            });
        }
        catalogue::accumulate_stage(&mut scores, &record.body);
        treatment_scores.push(scores.clone());
    }
    Ok(ReplicateTrace {
        replicate,
        initial_agents,
        final_agents: state.agents,
        rows,
        treatment_scores,
        ledger: state.ledger,
    })
}

pub fn run_replicate(config: &SimConfig, replicate: u64) -> Result<ReplicateTrace, SimError> {
    run_replicate_from(config, replicate, initial_agents(config, replicate))
}

/// Runs every replicate (in parallel) and returns them in replicate order.
pub fn run_simulation(config: &SimConfig) -> Result<RunTrace, SimError> {
    config.validate()?;
    let replicates = (0..config.n_replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunTrace {
        config: config.clone(),
        replicates,
    })
}
