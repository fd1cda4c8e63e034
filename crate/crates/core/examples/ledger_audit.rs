//! Builds a short hash-chained ledger, then tampers with it.

use std::collections::BTreeMap;

use catcon::{AgentId, CreditLedger, StageIndex, StageInput, StageOutcome};

fn main() {
    let mut ledger = CreditLedger::new([(AgentId(0), 2.0), (AgentId(1), 0.5), (AgentId(2), 3.0)]).unwrap();

    for stage in 0..5u64 {
        let mut outcomes = BTreeMap::new();
        outcomes.insert(AgentId(0), StageOutcome::new(0.5, -0.25, 0.1, 0.2));
        outcomes.insert(AgentId(1), StageOutcome::new(-1.0, 0.0, 0.5, 0.0));
        let fees = BTreeMap::from([(AgentId(2), 0.05)]);
        let rec = ledger
            .apply(StageInput::new(StageIndex(stage), outcomes).with_fees(fees))
            .unwrap();
        println!(
            "stage {stage}: hash {} floors {:?}",
            &rec.hash.to_hex()[..16],
            rec.body.floors
        );
    }

    println!("balances: {:?}", ledger.balances());
    println!("supply {:.4}", ledger.total_supply());
    println!("chain: {:?}", ledger.verify_chain());

    // Nudge one recorded outcome by one ulp.
    let o = ledger.stage_log_mut()[2].body.outcomes.get_mut(&AgentId(0)).unwrap();
    o.delta_action = f64::from_bits(o.delta_action.to_bits() + 1);
    println!("after tampering: {:?}", ledger.verify_chain());
}
