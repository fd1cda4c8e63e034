//! Runs a small Monte Carlo experiment, writes the run directory and audits it.
//!
//! Usage: `cargo run --release --example monte_carlo_run [OUT_DIR]`

use std::path::PathBuf;

use catcon::io::{verify_dir, write_run};
use catcon::{run_simulation, SimConfig};

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("catcon-monte-carlo"));
    let config = SimConfig {
        n_agents: 40,
        n_rounds: 150,
        n_replicates: 4,
        seed: 7,
        ..SimConfig::default()
    };

    let trace = run_simulation(&config).expect("valid config");
    for rep in &trace.replicates {
        let supply: f64 = rep.final_agents.iter().map(|a| a.balance).sum();
        let genesis: f64 = rep.initial_agents.iter().map(|a| a.balance).sum();
        println!(
            "replicate {}: supply {genesis:.1} -> {supply:.1}, head {}",
            rep.replicate,
            &rep.ledger.head().to_hex()[..16]
        );
    }

    let decisions = write_run(&out, &trace, 0.0).expect("writable output dir");
    for d in &decisions {
        println!(
            "treatment {}: mean score {:.1}, included in {:.0}% of replicates",
            d.treatment,
            d.score,
            100.0 * d.acceptance_rate
        );
    }
    verify_dir(&out).expect("fresh output verifies");
    println!("wrote and verified {}", out.display());
}
