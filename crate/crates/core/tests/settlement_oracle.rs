mod common;

use catcon::{settle_stage, AgentId};
use common::{action, enumerate_stages, max_diff, oracle, random_stage, rating};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn oracle_reproduces_hand_values() {
    let mut subs = catcon::StageSubmissions::new(catcon::StageIndex(0));
    subs.actions = vec![action(0, 0, 10.0)];
    subs.ratings = vec![rating(1, 0, 5.0), rating(2, 0, -3.0)];
    let o = oracle(&subs);
    assert_eq!(o[&0].c_action, 1.0 / 80.0);
    assert!((o[&0].delta_action - 0.25).abs() < 1e-15);
    assert_eq!(o[&1].delta_rating, -1.0);
    assert_eq!(o[&2].delta_rating, -1.0);
    assert_eq!(o[&1].c_rating, 1.0 / 15.0);
}

#[test]
fn exhaustive_small_stages_match_oracle() {
    let mut worst: f64 = 0.0;
    let n = enumerate_stages(|subs| {
        let lib = settle_stage(subs).expect("enumerated stages are well formed");
        let d = max_diff(&lib, &oracle(subs)).expect("same participants");
        worst = worst.max(d);
    });
    assert_eq!(n, 27 * 5usize.pow(6) + 4 * 6usize.pow(6));
    assert!(worst <= 1e-12, "max difference {worst:e}");
}

#[test]
fn random_larger_stages_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..2_000 {
        let subs = random_stage(&mut rng, 9, 50.0);
        let lib = settle_stage(&subs).unwrap();
        let d = max_diff(&lib, &oracle(&subs)).expect("same participants");
        assert!(d <= 1e-12, "difference {d:e} on {subs:?}");
    }
}

#[test]
fn zero_stakes_are_neutral() {
    let mut subs = catcon::StageSubmissions::new(catcon::StageIndex(0));
    subs.actions = vec![action(0, 0, 0.0), action(1, 1, 4.0)];
    subs.ratings = vec![rating(2, 0, 3.0), rating(3, 1, 0.0), rating(2, 1, 1.0)];
    let out = settle_stage(&subs).unwrap();
    assert_eq!(out[&AgentId(0)].delta_total, 0.0);
    assert_eq!(out[&AgentId(3)].delta_total, 0.0);
}
