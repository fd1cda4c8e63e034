//! Turns recorded votes into catalogue include/exclude decisions.
//!
//! A treatment's replicate score is the sum over its actions of
//! `direction_sign * stake * (1 + clamp(delta_action, -1, 1)) / 2`, where
//! `delta_action` is the actor's settled action component in the same stage.
//! Well-received votes count fully, votes the raters rejected count for
//! nothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ledger::{StageBody, StageRecord};
use crate::sim::RunTrace;
use crate::stats::{mean, sample_sd};
use crate::types::TreatmentId;

/// Rating-derived weight in `[0, 1]` applied to an action's stake.
pub fn reception_weight(delta_action: f64) -> f64 {
    (1.0 + delta_action.clamp(-1.0, 1.0)) / 2.0
}

/// Adds one stage's contributions to per-treatment scores (indexed by treatment id).
pub fn accumulate_stage(scores: &mut [f64], body: &StageBody) {
    for action in &body.actions {
        let delta = body.outcomes.get(&action.actor).map_or(0.0, |o| o.delta_action);
        if let Some(slot) = scores.get_mut(action.treatment.0 as usize) {
            *slot += action.direction.sign() * action.stake * reception_weight(delta);
        }
    }
}

/// Per-treatment scores of one replicate's stage log.
pub fn score_records(n_treatments: usize, records: &[StageRecord]) -> Vec<f64> {
    let mut scores = vec![0.0; n_treatments];
    for rec in records {
        accumulate_stage(&mut scores, &rec.body);
    }
    scores
}

/// Scores from several replicates' stage logs, keyed by treatment, one entry per replicate.
pub fn aggregate_records<'a, I>(n_treatments: usize, replicates: I) -> BTreeMap<TreatmentId, Vec<f64>>
where
    I: IntoIterator<Item = &'a [StageRecord]>,
{
    let mut out: BTreeMap<TreatmentId, Vec<f64>> =
        (0..n_treatments as u64).map(|t| (TreatmentId(t), Vec::new())).collect();
    for records in replicates {
        for (t, score) in score_records(n_treatments, records).into_iter().enumerate() {
            out.get_mut(&TreatmentId(t as u64)).expect("treatment slot").push(score);
        }
    }
    out
}

pub fn aggregate_scores(trace: &RunTrace) -> BTreeMap<TreatmentId, Vec<f64>> {
    aggregate_records(
        trace.config.n_treatments,
        trace.replicates.iter().map(|r| r.ledger.stage_log()),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogueDecision {
    pub treatment: TreatmentId,
    /// Mean replicate score.
    pub score: f64,
    pub included: bool,
    pub acceptance_rate: f64,
    /// Cross-replicate standard deviation of the score.
    pub dispersion: f64,
}

pub fn decide_catalogue(scores: &BTreeMap<TreatmentId, Vec<f64>>, threshold: f64) -> Vec<CatalogueDecision> {
    scores
        .iter()
        .map(|(&treatment, per_rep)| {
            let score = mean(per_rep);
            let accepted = per_rep.iter().filter(|&&s| s >= threshold).count();
            let acceptance_rate = if per_rep.is_empty() {
                0.0
            } else {
                accepted as f64 / per_rep.len() as f64
            };
            CatalogueDecision {
                treatment,
                score,
                included: score >= threshold,
                acceptance_rate,
                dispersion: sample_sd(per_rep),
            }
        })
        .collect()
}
