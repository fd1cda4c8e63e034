mod common;

use std::collections::BTreeMap;

use catcon::canonical;
use catcon::policy::{choose_action, choose_ratings, update_staking_policy};
use catcon::rng::substream;
use catcon::{
    decide_catalogue, settle_stage, settle_stage_with, Agent, AgentId, ChainStatus, CoefficientScope, CreditLedger,
    PolicyConfig, PolicyMode, SettlementRules, StageIndex, StageInput, StageOutcome, StageSubmissions, TreatmentId,
};
use common::{action, rating};
use proptest::prelude::*;
use proptest::sample::subsequence;

/// Agents `0..n`, optional action per agent, optional rating per ordered pair.
fn stage() -> impl Strategy<Value = StageSubmissions> {
    (2usize..7)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(prop::option::of(0.0..100.0f64), n),
                prop::collection::vec(prop::option::of(-100.0..100.0f64), n * n),
            )
        })
        .prop_map(|(n, acts, rates)| {
            let mut subs = StageSubmissions::new(StageIndex(0));
            for (i, s) in acts.iter().enumerate() {
                if let Some(s) = s {
                    subs.actions.push(action(i as u64, i as u64, *s));
                }
            }
            for (k, r) in rates.iter().enumerate() {
                let (j, i) = (k / n, k % n);
                if let (Some(r), Some(_)) = (r, acts[i]) {
                    if i != j {
                        subs.ratings.push(rating(j as u64, i as u64, *r));
                    }
                }
            }
            subs
        })
}

fn scaled(subs: &StageSubmissions, lambda: f64) -> StageSubmissions {
    let mut s = subs.clone();
    s.actions.iter_mut().for_each(|a| a.stake *= lambda);
    s.ratings.iter_mut().for_each(|r| r.signed_stake *= lambda);
    s
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn components_bounded(subs in stage()) {
        for o in settle_stage(&subs).unwrap().values() {
            prop_assert!(o.delta_action.abs() <= 1.0);
            prop_assert!(o.delta_rating.abs() <= 1.0);
            prop_assert_eq!(o.delta_total, o.delta_action + o.delta_rating);
        }
    }

    #[test]
    fn global_scope_components_bounded(subs in stage()) {
        let rules = SettlementRules { scope: CoefficientScope::Global, ..SettlementRules::default() };
        for o in settle_stage_with(&subs, &rules).unwrap().values() {
            prop_assert!(o.delta_action.abs() <= 1.0);
            prop_assert!(o.delta_rating.abs() <= 1.0);
        }
    }

    #[test]
    fn uniform_rescaling_keeps_deltas(subs in stage(), lambda in 0.01..100.0f64) {
        let a = settle_stage(&subs).unwrap();
        let b = settle_stage(&scaled(&subs, lambda)).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (id, x) in &a {
            let y = &b[id];
            prop_assert!((x.delta_action - y.delta_action).abs() <= 1e-9);
            prop_assert!((x.delta_rating - y.delta_rating).abs() <= 1e-9);
            prop_assert!(close(x.coeff_action, y.coeff_action * lambda * lambda, 1e-9));
            prop_assert!(close(x.coeff_rating, y.coeff_rating * lambda * lambda, 1e-9));
        }
    }

    #[test]
    fn action_credit_ignores_own_stake(subs in stage(), pick in any::<prop::sample::Index>(), factor in 0.01..100.0f64) {
        prop_assume!(!subs.actions.is_empty());
        let k = pick.index(subs.actions.len());
        let mut changed = subs.clone();
        changed.actions[k].stake *= factor;
        prop_assume!(subs.actions[k].stake > 0.0);
        let actor = subs.actions[k].actor;
        let a = settle_stage(&subs).unwrap()[&actor];
        let b = settle_stage(&changed).unwrap()[&actor];
        prop_assert!((a.delta_action - b.delta_action).abs() <= 1e-12);
        prop_assert_eq!(a.delta_rating, b.delta_rating);
    }

    #[test]
    fn zero_stake_agents_are_neutral(subs in stage(), who in 0u64..7) {
        let mut s = subs;
        s.actions.iter_mut().filter(|a| a.actor.0 == who).for_each(|a| a.stake = 0.0);
        s.ratings.iter_mut().filter(|r| r.rater.0 == who).for_each(|r| r.signed_stake = 0.0);
        if let Some(o) = settle_stage(&s).unwrap().get(&AgentId(who)) {
            prop_assert_eq!(o.delta_total, 0.0);
        }
    }

    #[test]
    fn submission_order_is_irrelevant(subs in stage(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = substream(seed, 0, 0, 0);
        let mut shuffled = subs.clone();
        shuffled.actions.shuffle(&mut rng);
        shuffled.ratings.shuffle(&mut rng);
        prop_assert_eq!(settle_stage(&subs).unwrap(), settle_stage(&shuffled).unwrap());
    }

    #[test]
    fn two_rater_agreement_sign(a in 0.01..50.0f64, r1 in 0.01..50.0f64, r2 in 0.01..50.0f64, s1 in any::<bool>(), s2 in any::<bool>()) {
        let sign = |b: bool| if b { 1.0 } else { -1.0 };
        let mut subs = StageSubmissions::new(StageIndex(0));
        subs.actions = vec![action(0, 0, a)];
        subs.ratings = vec![rating(1, 0, sign(s1) * r1), rating(2, 0, sign(s2) * r2)];
        let out = settle_stage(&subs).unwrap();
        let expected = if s1 == s2 { 1.0 } else { -1.0 };
        prop_assert_eq!(out[&AgentId(1)].delta_rating, expected);
        prop_assert_eq!(out[&AgentId(2)].delta_rating, expected);
    }
}

/// Per agent: optional `(delta_action, delta_rating)` and a fee.
type LedgerStage = Vec<(Option<(f64, f64)>, f64)>;

/// Stage inputs over agents `0..4`.
fn ledger_stages() -> impl Strategy<Value = Vec<LedgerStage>> {
    prop::collection::vec(
        prop::collection::vec((prop::option::of((-1.0..1.0f64, -1.0..1.0f64)), 0.0..0.3f64), 4),
        1..25,
    )
}

fn build_ledger(genesis: &[f64], stages: &[LedgerStage]) -> CreditLedger {
    let mut ledger = CreditLedger::new(genesis.iter().enumerate().map(|(i, &b)| (AgentId(i as u64), b))).unwrap();
    for (t, stage) in stages.iter().enumerate() {
        let mut outcomes = BTreeMap::new();
        let mut fees = BTreeMap::new();
        for (i, (delta, fee)) in stage.iter().enumerate() {
            if let Some((da, dr)) = delta {
                outcomes.insert(AgentId(i as u64), StageOutcome::new(*da, *dr, 1.0, 1.0));
            }
            if *fee > 0.0 {
                fees.insert(AgentId(i as u64), *fee);
            }
        }
        ledger
            .apply(StageInput::new(StageIndex(t as u64), outcomes).with_fees(fees))
            .unwrap();
    }
    ledger
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ledger_supply_floor_and_chain(genesis in prop::collection::vec(0.0..3.0f64, 4), stages in ledger_stages()) {
        let ledger = build_ledger(&genesis, &stages);
        let sum: f64 = ledger.balances().values().sum();
        prop_assert!((sum - ledger.total_supply()).abs() <= 1e-9);
        prop_assert!(ledger.balances().values().all(|&b| b >= 0.0));
        prop_assert_eq!(ledger.verify_chain(), ChainStatus::Valid);
        for (t, rec) in ledger.stage_log().iter().enumerate() {
            prop_assert_eq!(rec.stage(), StageIndex(t as u64));
        }
        prop_assert!(ledger.verify_balances().is_ok());
    }

    #[test]
    fn ledger_tampering_located(genesis in prop::collection::vec(0.0..3.0f64, 4), stages in ledger_stages(), pick in any::<prop::sample::Index>()) {
        let mut ledger = build_ledger(&genesis, &stages);
        let t = pick.index(stages.len());
        let rec = &mut ledger.stage_log_mut()[t];
        match rec.body.outcomes.values_mut().next() {
            Some(o) => o.delta_rating += 1e-9,
            None => rec.body.fees.insert(AgentId(0), 1.0).map_or((), |_| ()),
        }
        prop_assert_eq!(ledger.verify_chain(), ChainStatus::Invalid { first_bad_stage: StageIndex(t as u64) });
    }

    #[test]
    fn learning_rates_stay_in_bounds(
        start in 0.0..1.0f64,
        deltas in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..200),
        eta in 0.01..0.99f64,
        lo in 0.0..0.5f64,
        width in 0.0..0.5f64,
    ) {
        let mut config = PolicyConfig { mode: PolicyMode::Learning, learning_rate: eta, ..PolicyConfig::default() };
        config.staking_rate_bounds.min = lo;
        config.staking_rate_bounds.max = lo + width;
        let b = config.staking_rate_bounds;
        let mut agent = Agent::doctor(0u64, 10.0).with_rates(b.clamp(start), b.clamp(start));
        let frozen = PolicyConfig { mode: PolicyMode::NonLearning, ..config.clone() };
        for (da, dr) in deltas {
            let out = StageOutcome::new(da, dr, 1.0, 1.0);
            prop_assert_eq!(&update_staking_policy(&agent, &out, &frozen), &agent);
            agent = update_staking_policy(&agent, &out, &config);
            prop_assert!(agent.staking_rate_action >= b.min && agent.staking_rate_action <= b.max);
            prop_assert!(agent.staking_rate_rating >= b.min && agent.staking_rate_rating <= b.max);
        }
    }

    #[test]
    fn stakes_never_exceed_balance_minus_fees(
        balance in 0.0..200.0f64,
        ra in 0.0..1.0f64,
        rr in 0.0..1.0f64,
        fee in 0.0..5.0f64,
        k in 0usize..6,
        n_visible in 0usize..8,
        seed in any::<u64>(),
    ) {
        let policy = PolicyConfig::default();
        let agent = Agent::doctor(0u64, balance).with_rates(ra, rr);
        let mut rng = substream(seed, 0, 0, 0);
        let treatments: Vec<TreatmentId> = (0..5).map(TreatmentId).collect();
        let act = choose_action(&agent, &treatments, &policy, fee, catcon::ActionId(100), StageIndex(0), &mut rng).unwrap();
        let visible: Vec<_> = (0..n_visible as u64).map(|i| action(i, i + 1, 1.0 + i as f64)).collect();
        let ratings = choose_ratings(&agent, &visible, k, &policy, fee, act.stake + fee, StageIndex(0), &mut rng).unwrap();
        let fees = fee * (1 + ratings.len()) as f64;
        let total = act.stake + ratings.iter().map(|r| r.signed_stake.abs()).sum::<f64>();
        prop_assert!(total <= (balance - fees).max(0.0) + 1e-9, "total {} balance {} fees {}", total, balance, fees);
    }

    #[test]
    fn raising_threshold_never_adds(
        scores in prop::collection::vec(prop::collection::vec(-100.0..100.0f64, 1..6), 1..6),
        t1 in -100.0..100.0f64,
        dt in 0.0..100.0f64,
    ) {
        let map: BTreeMap<TreatmentId, Vec<f64>> =
            scores.into_iter().enumerate().map(|(i, v)| (TreatmentId(i as u64), v)).collect();
        let low = decide_catalogue(&map, t1);
        let high = decide_catalogue(&map, t1 + dt);
        for (l, h) in low.iter().zip(&high) {
            prop_assert!(!h.included || l.included);
            prop_assert!(h.acceptance_rate <= l.acceptance_rate);
            prop_assert!((0.0..=1.0).contains(&l.acceptance_rate));
            prop_assert_eq!(l.included, l.score >= t1);
        }
    }

    #[test]
    fn relabeling_treatments_permutes_decisions(
        scores in prop::collection::vec(prop::collection::vec(-100.0..100.0f64, 1..6), 1..6),
        theta in -100.0..100.0f64,
        perm_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let n = scores.len();
        let mut perm: Vec<u64> = (0..n as u64).collect();
        perm.shuffle(&mut substream(perm_seed, 0, 0, 0));
        let base: BTreeMap<TreatmentId, Vec<f64>> =
            scores.iter().cloned().enumerate().map(|(i, v)| (TreatmentId(i as u64), v)).collect();
        let relabeled: BTreeMap<TreatmentId, Vec<f64>> =
            scores.into_iter().enumerate().map(|(i, v)| (TreatmentId(perm[i]), v)).collect();
        let a = decide_catalogue(&base, theta);
        let b = decide_catalogue(&relabeled, theta);
        for d in &a {
            let mut moved = d.clone();
            moved.treatment = TreatmentId(perm[d.treatment.0 as usize]);
            prop_assert_eq!(&b[moved.treatment.0 as usize], &moved);
        }
    }

    #[test]
    fn canonical_reals_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let parsed: f64 = canonical::real(x).parse().unwrap();
        prop_assert_eq!(parsed, x);
    }

    #[test]
    fn zero_rating_subsets_do_not_disturb_others(subs in stage(), keep in subsequence((0u64..7).collect::<Vec<_>>(), 0..7)) {
        // Adding zero-stake ratings leaves every other agent's outcome unchanged.
        let base = settle_stage(&subs).unwrap();
        let mut extra = subs.clone();
        let acted: Vec<u64> = subs.actions.iter().map(|a| a.actor.0).collect();
        let raters_used: std::collections::BTreeSet<(u64, u64)> =
            subs.ratings.iter().map(|r| (r.rater.0, r.target_action.0)).collect();
        for &j in &keep {
            let j = j + 100;
            for &i in &acted {
                if !raters_used.contains(&(j, i)) {
                    extra.ratings.push(rating(j, i, 0.0));
                }
            }
        }
        let with_zero = settle_stage(&extra).unwrap();
        for (id, o) in &base {
            prop_assert_eq!(&with_zero[id], o);
        }
    }
}
