//! Settles one hand-built stage and prints each agent's credit change.
//!
//! Agent 0 endorses a treatment with 10 CP. Agent 1 backs the vote with 5 CP,
//! agent 2 disputes it with 3 CP, and agent 3 endorses a second treatment
//! that agent 1 also backs.

use catcon::{
    settle_stage, settle_stage_with, Action, ActionId, AgentId, CoefficientScope, Direction, Rating, SettlementRules,
    StageIndex, StageSubmissions, TreatmentId,
};

fn action(id: u64, actor: u64, treatment: u64, stake: f64) -> Action {
    Action {
        id: ActionId(id),
        actor: AgentId(actor),
        stage: StageIndex(0),
        treatment: TreatmentId(treatment),
        direction: Direction::Endorse,
        stake,
    }
}

fn rating(rater: u64, target: u64, signed_stake: f64) -> Rating {
    Rating {
        rater: AgentId(rater),
        target_action: ActionId(target),
        stage: StageIndex(0),
        signed_stake,
    }
}

fn main() {
    let mut subs = StageSubmissions::new(StageIndex(0));
    subs.actions = vec![action(0, 0, 0, 10.0), action(1, 3, 1, 4.0)];
    subs.ratings = vec![rating(1, 0, 5.0), rating(2, 0, -3.0), rating(1, 1, 2.0)];

    let outcomes = settle_stage(&subs).expect("stage is well formed");
    println!("per-agent coefficients");
    println!("agent  coeff_action  coeff_rating  delta_action  delta_rating  delta_total");
    for (agent, o) in &outcomes {
        println!(
            "{agent:>5}  {:>12.6}  {:>12.6}  {:>12.6}  {:>12.6}  {:>11.6}",
            o.coeff_action, o.coeff_rating, o.delta_action, o.delta_rating, o.delta_total
        );
    }

    let rules = SettlementRules {
        scope: CoefficientScope::Global,
        ..SettlementRules::default()
    };
    let global = settle_stage_with(&subs, &rules).expect("stage is well formed");
    println!("\nstage-wide coefficients");
    for (agent, o) in &global {
        println!("agent {agent}: delta_total {:+.6}", o.delta_total);
    }

    // Scaling every stake leaves the outcome unchanged.
    let mut scaled = subs.clone();
    scaled.actions.iter_mut().for_each(|a| a.stake *= 7.0);
    scaled.ratings.iter_mut().for_each(|r| r.signed_stake *= 7.0);
    let again = settle_stage(&scaled).expect("stage is well formed");
    let max_diff = outcomes
        .iter()
        .map(|(a, o)| (o.delta_total - again[a].delta_total).abs())
        .fold(0.0, f64::max);
    println!("\nmax |delta| change after scaling stakes by 7: {max_diff:.2e}");
}
