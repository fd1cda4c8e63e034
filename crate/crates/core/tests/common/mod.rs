//! Test-only reference implementation of stage settlement and stage generators.
//!
//! The oracle evaluates the credit-change sums term by term: every
//! (action, rating) product for the action part and every (own rating,
//! co-rating) product for the rating part, scaled by the reciprocal of the
//! summed absolute products. It shares no code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use catcon::{Action, ActionId, AgentId, Direction, Rating, StageIndex, StageOutcome, StageSubmissions, TreatmentId};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOutcome {
    pub c_action: f64,
    pub c_rating: f64,
    pub delta_action: f64,
    pub delta_rating: f64,
}

pub fn oracle(subs: &StageSubmissions) -> BTreeMap<u64, OracleOutcome> {
    let mut agents: Vec<u64> = subs.actions.iter().map(|a| a.actor.0).collect();
    agents.extend(subs.ratings.iter().map(|r| r.rater.0));
    agents.sort_unstable();
    agents.dedup();

    let mut out = BTreeMap::new();
    for &i in &agents {
        // ratings received on i's actions
        let mut a_terms = Vec::new();
        for act in subs.actions.iter().filter(|a| a.actor.0 == i) {
            for r in subs.ratings.iter().filter(|r| r.target_action == act.id) {
                a_terms.push(act.stake * r.signed_stake);
            }
        }
        // i's ratings against co-ratings on the same action
        let mut r_terms = Vec::new();
        for own in subs.ratings.iter().filter(|r| r.rater.0 == i) {
            for other in subs.ratings.iter() {
                if other.target_action == own.target_action && other.rater.0 != i {
                    r_terms.push(own.signed_stake * other.signed_stake);
                }
            }
        }
        let c = |terms: &[f64]| {
            let den: f64 = terms.iter().map(|t| t.abs()).sum();
            if den == 0.0 {
                0.0
            } else {
                1.0 / den
            }
        };
        let c_action = c(&a_terms);
        let c_rating = c(&r_terms);
        out.insert(
            i,
            OracleOutcome {
                c_action,
                c_rating,
                delta_action: a_terms.iter().map(|t| c_action * t).sum(),
                delta_rating: r_terms.iter().map(|t| c_rating * t).sum(),
            },
        );
    }
    out
}

/// Largest absolute field difference, or `None` when the agent sets differ.
pub fn max_diff(lib: &BTreeMap<AgentId, StageOutcome>, ora: &BTreeMap<u64, OracleOutcome>) -> Option<f64> {
    if lib.len() != ora.len() {
        return None;
    }
    let mut worst: f64 = 0.0;
    for (id, o) in lib {
        let e = ora.get(&id.0)?;
        for (a, b) in [
            (o.coeff_action, e.c_action),
            (o.coeff_rating, e.c_rating),
            (o.delta_action, e.delta_action),
            (o.delta_rating, e.delta_rating),
            (o.delta_total, e.delta_action + e.delta_rating),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    Some(worst)
}

pub fn action(id: u64, actor: u64, stake: f64) -> Action {
    Action {
        id: ActionId(id),
        actor: AgentId(actor),
        stage: StageIndex(0),
        treatment: TreatmentId(0),
        direction: Direction::Endorse,
        stake,
    }
}

pub fn rating(rater: u64, target: u64, signed_stake: f64) -> Rating {
    Rating {
        rater: AgentId(rater),
        target_action: ActionId(target),
        stage: StageIndex(0),
        signed_stake,
    }
}

pub const GRID: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Calls `f` for every stage of the two exhaustive families:
///
/// * 3 agents, each acting with stake in {0,1,2} and rating both other
///   agents' actions with signed stakes from the grid (27 * 5^6 stages);
/// * 4 agents, agents 0 and 1 acting with stakes in {1,2}, the other three
///   agents each rating each action with a grid stake or not at all
///   (4 * 6^6 stages).
///
/// Returns the number of stages visited.
pub fn enumerate_stages(mut f: impl FnMut(&StageSubmissions)) -> usize {
    let mut count = 0;
    let action_stakes = [0.0, 1.0, 2.0];
    let pairs: Vec<(u64, u64)> = (0..3u64)
        .flat_map(|j| (0..3u64).filter(move |&i| i != j).map(move |i| (j, i)))
        .collect();
    for code_a in 0..27usize {
        let stakes = [code_a % 3, (code_a / 3) % 3, code_a / 9].map(|k| action_stakes[k]);
        for code_r in 0..5usize.pow(6) {
            let mut subs = StageSubmissions::new(StageIndex(0));
            subs.actions = (0..3u64).map(|i| action(i, i, stakes[i as usize])).collect();
            let mut c = code_r;
            for &(j, i) in &pairs {
                subs.ratings.push(rating(j, i, GRID[c % 5]));
                c /= 5;
            }
            f(&subs);
            count += 1;
        }
    }

    // (rater, action) slots; action ids equal their actor ids
    let slots: Vec<(u64, u64)> = vec![(1, 0), (2, 0), (3, 0), (0, 1), (2, 1), (3, 1)];
    for code_a in 0..4usize {
        let s0 = 1.0 + (code_a % 2) as f64;
        let s1 = 1.0 + (code_a / 2) as f64;
        for code_r in 0..6usize.pow(6) {
            let mut subs = StageSubmissions::new(StageIndex(0));
            subs.actions = vec![action(0, 0, s0), action(1, 1, s1)];
            let mut c = code_r;
            for &(j, i) in &slots {
                let pick = c % 6;
                c /= 6;
                if pick < 5 {
                    subs.ratings.push(rating(j, i, GRID[pick]));
                }
            }
            f(&subs);
            count += 1;
        }
    }
    count
}

/// Random well-formed stage: up to `n_agents` agents, each acting with some
/// probability, and raters rating a random subset of other agents' actions.
pub fn random_stage<R: Rng>(rng: &mut R, n_agents: u64, max_stake: f64) -> StageSubmissions {
    let mut subs = StageSubmissions::new(StageIndex(0));
    for i in 0..n_agents {
        if rng.gen_bool(0.6) {
            subs.actions.push(action(i, i, rng.gen_range(0.0..max_stake)));
        }
    }
    let actors: Vec<u64> = subs.actions.iter().map(|a| a.actor.0).collect();
    for j in 0..n_agents {
        for &i in &actors {
            if i != j && rng.gen_bool(0.5) {
                subs.ratings.push(rating(j, i, rng.gen_range(-max_stake..max_stake)));
            }
        }
    }
    subs
}
