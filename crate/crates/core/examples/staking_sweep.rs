//! Cumulative credit change against the action staking rate, with fixed and
//! with adaptive staking.

use catcon::stats::median;
use catcon::sweep::default_grid;
use catcon::{sweep_staking_rate, PolicyMode, SimConfig};

fn main() {
    let mut config = SimConfig {
        n_agents: 60,
        n_rounds: 300,
        n_replicates: 4,
        ..SimConfig::default()
    };
    let grid = default_grid(&config, 10);

    for mode in [PolicyMode::NonLearning, PolicyMode::Learning] {
        config.policy.mode = mode;
        let table = sweep_staking_rate(&config, &grid).expect("valid sweep");
        println!("{mode:?}");
        println!("  assigned rate   n   mean cumulative delta");
        for s in &table.summary {
            println!("  {:>13.3} {:>3}   {:>+21.2}", s.rate, s.n, s.mean_delta);
        }
        println!("  spearman per replicate: {:.3?}", table.spearman);
        println!("  median spearman {:.3}\n", median(&table.spearman));
    }
}
