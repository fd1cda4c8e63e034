//! Per-stage agent behaviour: participation, voting, choosing what to rate and
//! adapting staking rates between stages.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Action, ActionId, Agent, Direction, Rating, StageIndex, StageOutcome, TreatmentId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    /// Staking rates stay at their initial values for the whole run.
    #[default]
    NonLearning,
    /// Staking rates follow the sign of realized credit changes.
    Learning,
}

/// How an agent turns a treatment's quality into an endorse/oppose judgement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignModel {
    /// Endorse iff perceived quality >= 0.5.
    TruthfulQuality,
    /// As `TruthfulQuality`, then the judgement is flipped with probability `epsilon`.
    NoisyQuality { epsilon: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub min: f64,
    pub max: f64,
}

impl RateBounds {
    pub fn clamp(&self, rate: f64) -> f64 {
        rate.clamp(self.min, self.max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    pub consumer_selection: bool,
    pub learning_rate: f64,
    pub staking_rate_bounds: RateBounds,
    pub skip_probability: f64,
    pub rating_sign_model: SignModel,
    /// Ground-truth quality in `[0, 1]`, indexed by treatment id.
    pub treatment_quality: Vec<f64>,
    /// Half-width of the uniform per-agent perception bias.
    pub perception_spread: f64,
    /// Ratings each rater submits per stage (k).
    pub ratings_per_rater: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            mode: PolicyMode::NonLearning,
            consumer_selection: false,
            learning_rate: 0.1,
            staking_rate_bounds: RateBounds { min: 0.05, max: 0.5 },
            skip_probability: 0.1,
            rating_sign_model: SignModel::NoisyQuality { epsilon: 0.1 },
            treatment_quality: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            perception_spread: 0.25,
            ratings_per_rater: 3,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("no treatments to vote on")]
    NoTreatments,
    #[error("no quality configured for treatment {0}")]
    UnknownTreatment(TreatmentId),
}

/// Returns `true` when the agent takes part in the stage.
pub fn decide_participation<R: Rng + ?Sized>(agent: &Agent, rng: &mut R) -> bool {
    rng.gen::<f64>() >= agent.skip_probability
}

/// The agent's endorse/oppose judgement of a treatment of the given quality.
pub fn assess<R: Rng + ?Sized>(agent: &Agent, quality: f64, model: SignModel, rng: &mut R) -> Direction {
    let perceived = quality + agent.perception_bias;
    let direction = if perceived >= 0.5 {
        Direction::Endorse
    } else {
        Direction::Oppose
    };
    match model {
        SignModel::TruthfulQuality => direction,
        SignModel::NoisyQuality { epsilon } => {
            if rng.gen::<f64>() < epsilon {
                direction.flipped()
            } else {
                direction
            }
        }
    }
}

fn quality_of(policy: &PolicyConfig, treatment: TreatmentId) -> Result<f64, PolicyError> {
    policy
        .treatment_quality
        .get(treatment.0 as usize)
        .copied()
        .ok_or(PolicyError::UnknownTreatment(treatment))
}

/// Largest stake an agent can commit after paying `fees`.
pub fn max_stake(balance: f64, fees: f64) -> f64 {
    (balance - fees).max(0.0)
}

/// Picks a treatment uniformly, judges it and stakes
/// `staking_rate_action * balance`, capped at `balance - fee`.
pub fn choose_action<R: Rng + ?Sized>(
    agent: &Agent,
    treatments: &[TreatmentId],
    policy: &PolicyConfig,
    fee: f64,
    id: ActionId,
    stage: StageIndex,
    rng: &mut R,
) -> Result<Action, PolicyError> {
    if treatments.is_empty() {
        return Err(PolicyError::NoTreatments);
    }
    let treatment = treatments[rng.gen_range(0..treatments.len())];
    let quality = quality_of(policy, treatment)?;
    let direction = assess(agent, quality, policy.rating_sign_model, rng);
    let stake = (agent.staking_rate_action * agent.balance).clamp(0.0, max_stake(agent.balance, fee));
    Ok(Action {
        id,
        actor: agent.id,
        stage,
        treatment,
        direction,
        stake,
    })
}

/// Draws `count` distinct indices from `weights`, each draw proportional to
/// the remaining weights (uniform when they are all zero).
fn sample_without_replacement<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut picked = Vec::with_capacity(count.min(weights.len()));
    while picked.len() < count && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let pos = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = remaining.len() - 1;
            for (pos, &i) in remaining.iter().enumerate() {
                if weights[i] <= 0.0 {
                    continue;
                }
                if target < weights[i] {
                    chosen = pos;
                    break;
                }
                target -= weights[i];
                chosen = pos;
            }
            chosen
        } else {
            rng.gen_range(0..remaining.len())
        };
        picked.push(remaining.swap_remove(pos));
    }
    picked
}

/// Chooses up to `k` visible actions (never the agent's own) and rates them.
///
/// Targets are drawn without replacement, proportionally to the action stake
/// under consumer selection and uniformly otherwise. Each rating stakes
/// `staking_rate_rating * balance / k`, scaled down if the agent's remaining
/// budget (`balance` minus rating fees and `committed`, the stake and fees
/// already spent this stage) cannot cover it. The sign is positive when the
/// rater's own judgement of the treatment matches the action's direction.
#[allow(clippy::too_many_arguments)]
pub fn choose_ratings<R: Rng + ?Sized>(
    agent: &Agent,
    visible: &[Action],
    k: usize,
    policy: &PolicyConfig,
    fee: f64,
    committed: f64,
    stage: StageIndex,
    rng: &mut R,
) -> Result<Vec<Rating>, PolicyError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<&Action> = visible.iter().filter(|a| a.actor != agent.id).collect();
    if eligible.is_empty() {
        return Ok(Vec::new());
    }
    let weights: Vec<f64> = if policy.consumer_selection {
        eligible.iter().map(|a| a.stake).collect()
    } else {
        vec![1.0; eligible.len()]
    };
    // each rating costs a fee, so only as many as the remaining balance pays for
    let affordable = if fee > 0.0 {
        ((agent.balance - committed) / fee).floor().max(0.0) as usize
    } else {
        k
    };
    if affordable == 0 {
        return Ok(Vec::new());
    }
    let picks = sample_without_replacement(&weights, k.min(affordable), rng);

    let n = picks.len() as f64;
    let budget = max_stake(agent.balance, committed + fee * n);
    let magnitude = (agent.staking_rate_rating * agent.balance / k as f64)
        .min(budget / n)
        .max(0.0);

    picks
        .into_iter()
        .map(|i| {
            let target = eligible[i];
            let own = assess(
                agent,
                quality_of(policy, target.treatment)?,
                policy.rating_sign_model,
                rng,
            );
            let sign = if own == target.direction { 1.0 } else { -1.0 };
            Ok(Rating {
                rater: agent.id,
                target_action: target.id,
                stage,
                signed_stake: sign * magnitude,
            })
        })
        .collect()
}

fn adapt(rate: f64, delta: f64, eta: f64, bounds: RateBounds) -> f64 {
    if delta > 0.0 {
        (rate * (1.0 + eta)).min(bounds.max)
    } else if delta < 0.0 {
        (rate * (1.0 - eta)).max(bounds.min)
    } else {
        rate
    }
}

/// Multiplicative sign-following update of both staking rates (learning mode only).
pub fn update_staking_policy(agent: &Agent, outcome: &StageOutcome, config: &PolicyConfig) -> Agent {
    let mut next = agent.clone();
    if config.mode == PolicyMode::Learning {
        let eta = config.learning_rate;
        let bounds = config.staking_rate_bounds;
        next.staking_rate_action = adapt(agent.staking_rate_action, outcome.delta_action, eta, bounds);
        next.staking_rate_rating = adapt(agent.staking_rate_rating, outcome.delta_rating, eta, bounds);
    }
    next
}
