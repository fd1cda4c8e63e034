//! Per-stage credit-point settlement.
//!
//! For agent `i` in one stage:
//!
//! ```text
//! delta_action(i) = C_A(i) * sum_{m in actions(i)} sum_{j rates m} S_A(m) * S_R(j, m)
//! delta_rating(i) = C_R(i) * sum_{(k,l) rated by i} sum_{j != i rates l} S_R(i, l) * S_R(j, l)
//! C_A(i) = 1 / sum |S_A(m) * S_R(j, m)|      (0 when the sum is 0)
//! C_R(i) = 1 / sum |S_R(i, l) * S_R(j, l)|   (0 when the sum is 0)
//! ```
//!
//! Action stakes are unsigned and rating stakes signed, so each component lies
//! in `[-1, 1]`. Sums run in ascending `(ActionId, AgentId)` order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Action, ActionId, AgentId, Rating, StageIndex, StageOutcome};

/// Actions and ratings submitted during one stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSubmissions {
    pub stage: StageIndex,
    pub actions: Vec<Action>,
    pub ratings: Vec<Rating>,
}

/// Whether normalization coefficients are computed per agent or once per stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientScope {
    #[default]
    PerAgent,
    /// One shared denominator per component across all agents of the stage.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementRules {
    pub scope: CoefficientScope,
    pub max_actions_per_agent: usize,
}

impl Default for SettlementRules {
    fn default() -> Self {
        Self {
            scope: CoefficientScope::PerAgent,
            max_actions_per_agent: 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SettlementError {
    #[error("rating by agent {rater} targets unknown action {target}")]
    DanglingRating { rater: AgentId, target: ActionId },
    #[error("agent {rater} rated its own action {target}")]
    SelfRating { rater: AgentId, target: ActionId },
    #[error("agent {rater} rated action {target} more than once")]
    DuplicateRating { rater: AgentId, target: ActionId },
    #[error("duplicate action id {0}")]
    DuplicateAction(ActionId),
    #[error("agent {agent} submitted {count} actions, limit is {limit}")]
    TooManyActions { agent: AgentId, count: usize, limit: usize },
    #[error("submission for stage {got} in stage {expected}")]
    WrongStage { expected: StageIndex, got: StageIndex },
    #[error("action {0} has a negative or non-finite stake")]
    BadActionStake(ActionId),
    #[error("rating by agent {rater} on action {target} has a non-finite stake")]
    BadRatingStake { rater: AgentId, target: ActionId },
}

impl StageSubmissions {
    pub fn new(stage: StageIndex) -> Self {
        Self {
            stage,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty() && self.ratings.is_empty()
    }

    pub fn validate(&self, rules: &SettlementRules) -> Result<(), SettlementError> {
        let mut actors: BTreeMap<ActionId, AgentId> = BTreeMap::new();
        let mut per_agent: BTreeMap<AgentId, usize> = BTreeMap::new();
        for a in &self.actions {
            if a.stage != self.stage {
                return Err(SettlementError::WrongStage {
                    expected: self.stage,
                    got: a.stage,
                });
            }
            if !(a.stake.is_finite() && a.stake >= 0.0) {
                return Err(SettlementError::BadActionStake(a.id));
            }
            if actors.insert(a.id, a.actor).is_some() {
                return Err(SettlementError::DuplicateAction(a.id));
            }
            let count = per_agent.entry(a.actor).or_default();
            *count += 1;
            if *count > rules.max_actions_per_agent {
                return Err(SettlementError::TooManyActions {
                    agent: a.actor,
                    count: *count,
                    limit: rules.max_actions_per_agent,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for r in &self.ratings {
            if r.stage != self.stage {
                return Err(SettlementError::WrongStage {
                    expected: self.stage,
                    got: r.stage,
                });
            }
            let Some(&actor) = actors.get(&r.target_action) else {
                return Err(SettlementError::DanglingRating {
                    rater: r.rater,
                    target: r.target_action,
                });
            };
            if actor == r.rater {
                return Err(SettlementError::SelfRating {
                    rater: r.rater,
                    target: r.target_action,
                });
            }
            if !r.signed_stake.is_finite() {
                return Err(SettlementError::BadRatingStake {
                    rater: r.rater,
                    target: r.target_action,
                });
            }
            if !seen.insert((r.rater, r.target_action)) {
                return Err(SettlementError::DuplicateRating {
                    rater: r.rater,
                    target: r.target_action,
                });
            }
        }
        Ok(())
    }
}

/// Signed numerator and absolute denominator of one settlement component.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Sums {
    signed: f64,
    absolute: f64,
}

impl Sums {
    fn add(&mut self, term: f64) {
        self.signed += term;
        self.absolute += term.abs();
    }

    fn ratio(self, denominator: f64) -> f64 {
        if denominator > 0.0 {
            self.signed / denominator
        } else {
            0.0
        }
    }
}

fn coefficient(denominator: f64) -> f64 {
    if denominator > 0.0 {
        1.0 / denominator
    } else {
        0.0
    }
}

/// Stage submissions indexed for settlement: ratings grouped by target action
/// and ordered by rater.
struct StageIndexView<'a> {
    actions: BTreeMap<ActionId, &'a Action>,
    ratings_on: BTreeMap<ActionId, Vec<(AgentId, f64)>>,
}

impl<'a> StageIndexView<'a> {
    fn new(subs: &'a StageSubmissions) -> Self {
        let actions: BTreeMap<ActionId, &Action> = subs.actions.iter().map(|a| (a.id, a)).collect();
        let mut ratings_on: BTreeMap<ActionId, Vec<(AgentId, f64)>> = BTreeMap::new();
        for r in &subs.ratings {
            ratings_on
                .entry(r.target_action)
                .or_default()
                .push((r.rater, r.signed_stake));
        }
        for list in ratings_on.values_mut() {
            list.sort_by_key(|&(rater, _)| rater);
        }
        Self { actions, ratings_on }
    }

    fn action_sums(&self, agent: AgentId) -> Sums {
        let mut sums = Sums::default();
        for (id, action) in &self.actions {
            if action.actor != agent {
                continue;
            }
            for &(_, s_r) in self.ratings_on.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                sums.add(action.stake * s_r);
            }
        }
        sums
    }

    fn rating_sums(&self, agent: AgentId) -> Sums {
        let mut sums = Sums::default();
        for list in self.ratings_on.values() {
            let Some(&(_, own)) = list.iter().find(|&&(rater, _)| rater == agent) else {
                continue;
            };
            for &(other, s_r) in list {
                if other != agent {
                    sums.add(own * s_r);
                }
            }
        }
        sums
    }

    fn participants(&self) -> BTreeSet<AgentId> {
        let mut set: BTreeSet<AgentId> = self.actions.values().map(|a| a.actor).collect();
        for list in self.ratings_on.values() {
            set.extend(list.iter().map(|&(r, _)| r));
        }
        set
    }
}

/// Action coefficient for `agent`: inverse of the summed absolute action-rating stake products.
pub fn coeff_action(agent: AgentId, subs: &StageSubmissions) -> f64 {
    coefficient(StageIndexView::new(subs).action_sums(agent).absolute)
}

/// Rating coefficient for `agent`: inverse of the summed absolute co-rating stake products.
pub fn coeff_rating(agent: AgentId, subs: &StageSubmissions) -> f64 {
    coefficient(StageIndexView::new(subs).rating_sums(agent).absolute)
}

/// Net credit change from ratings received on the agent's own actions.
pub fn action_component(agent: AgentId, subs: &StageSubmissions) -> f64 {
    let sums = StageIndexView::new(subs).action_sums(agent);
    sums.ratio(sums.absolute)
}

/// Net credit change from agreement with co-raters on the actions the agent rated.
pub fn rating_component(agent: AgentId, subs: &StageSubmissions) -> f64 {
    let sums = StageIndexView::new(subs).rating_sums(agent);
    sums.ratio(sums.absolute)
}

/// Settles a stage under the default rules (per-agent coefficients, one action
/// per agent).
pub fn settle_stage(subs: &StageSubmissions) -> Result<BTreeMap<AgentId, StageOutcome>, SettlementError> {
    settle_stage_with(subs, &SettlementRules::default())
}

pub fn settle_stage_with(
    subs: &StageSubmissions,
    rules: &SettlementRules,
) -> Result<BTreeMap<AgentId, StageOutcome>, SettlementError> {
    subs.validate(rules)?;
    let view = StageIndexView::new(subs);
    let sums: Vec<(AgentId, Sums, Sums)> = view
        .participants()
        .into_iter()
        .map(|agent| (agent, view.action_sums(agent), view.rating_sums(agent)))
        .collect();

    let outcomes = match rules.scope {
        CoefficientScope::PerAgent => sums
            .into_iter()
            .map(|(agent, a, r)| {
                let outcome = StageOutcome::new(
                    a.ratio(a.absolute),
                    r.ratio(r.absolute),
                    coefficient(a.absolute),
                    coefficient(r.absolute),
                );
                (agent, outcome)
            })
            .collect(),
        CoefficientScope::Global => {
            let den_a: f64 = sums.iter().map(|(_, a, _)| a.absolute).sum();
            let den_r: f64 = sums.iter().map(|(_, _, r)| r.absolute).sum();
            sums.into_iter()
                .map(|(agent, a, r)| {
                    let outcome =
                        StageOutcome::new(a.ratio(den_a), r.ratio(den_r), coefficient(den_a), coefficient(den_r));
                    (agent, outcome)
                })
                .collect()
        }
    };
    Ok(outcomes)
}
