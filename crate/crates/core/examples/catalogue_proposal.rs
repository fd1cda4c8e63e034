//! Turns aggregated treatment scores into catalogue decisions at a few
//! inclusion thresholds.

use catcon::{aggregate_scores, decide_catalogue, run_simulation, SimConfig};

fn main() {
    let config = SimConfig {
        n_agents: 50,
        n_rounds: 200,
        n_replicates: 6,
        ..SimConfig::default()
    };
    let trace = run_simulation(&config).expect("valid config");
    let scores = aggregate_scores(&trace);

    for (t, q) in config.policy.treatment_quality.iter().enumerate() {
        println!("treatment {t}: quality {q}");
    }
    for threshold in [-10_000.0, 0.0, 10_000.0] {
        println!("\nthreshold {threshold}");
        for d in decide_catalogue(&scores, threshold) {
            println!(
                "  treatment {}: score {:>+10.1} sd {:>8.1} acceptance {:.2} {}",
                d.treatment,
                d.score,
                d.dispersion,
                d.acceptance_rate,
                if d.included { "in" } else { "out" }
            );
        }
    }
}
