//! Credit change versus action staking rate.
//!
//! Doctors are assigned initial action staking rates from the grid in
//! round-robin order of agent id. Under the non-learning policy those rates
//! stay fixed. Under the learning policy a point's `rate` is the doctor's
//! mean realized rate over the run, and the final rate is kept alongside.
//! Every doctor contributes one point `(rate, cumulative delta_total)` per
//! replicate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::policy::PolicyMode;
use crate::sim::{initial_agents, run_replicate_from, SimError};
use crate::stats::{mean, sample_sd, spearman};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("staking-rate grid is empty")]
    EmptyGrid,
    #[error("grid value {0} is outside [0,1]")]
    OutOfRange(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub replicate: u64,
    pub agent: u64,
    /// Grid rate assigned at the start of the run.
    pub assigned_rate: f64,
    /// Fixed rate (non-learning) or mean realized rate (learning).
    pub rate: f64,
    /// Rate after the last stage.
    pub final_rate: f64,
    pub cumulative_delta: f64,
    pub cumulative_action_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub rate: f64,
    pub n: usize,
    pub mean_delta: f64,
    pub sd_delta: f64,
    pub mean_action_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub mode: PolicyMode,
    pub points: Vec<SweepPoint>,
    /// Spearman correlation of rate and cumulative delta, per replicate.
    pub spearman: Vec<f64>,
    /// Grouped by assigned grid rate.
    pub summary: Vec<GridSummary>,
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let grid: Vec<f64> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse grid value `{}`", s.trim()))
        })
        .collect::<Result<_, _>>()?;
    if let Some(bad) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(format!("grid value {bad} is outside [0,1]"));
    }
    Ok(grid)
}

/// Evenly spaced grid from the configured staking-rate bounds.
pub fn default_grid(config: &SimConfig, points: usize) -> Vec<f64> {
    let b = config.policy.staking_rate_bounds;
    if points <= 1 {
        return vec![b.min];
    }
    (0..points)
        .map(|i| b.min + (b.max - b.min) * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn sweep_staking_rate(config: &SimConfig, grid: &[f64]) -> Result<SweepTable, SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(SweepError::OutOfRange(bad));
    }
    config.validate().map_err(SimError::from)?;
    let learning = config.policy.mode == PolicyMode::Learning;

    let per_replicate = (0..config.n_replicates as u64)
        .into_par_iter()
        .map(|replicate| {
            let mut agents = initial_agents(config, replicate);
            let mut assigned = Vec::new();
            for (slot, agent) in agents.iter_mut().filter(|a| a.roles.actor).enumerate() {
                let rate = grid[slot % grid.len()];
                agent.staking_rate_action = if learning {
                    config.policy.staking_rate_bounds.clamp(rate)
                } else {
                    rate
                };
                assigned.push((agent.id, rate));
            }
            let trace = run_replicate_from(config, replicate, agents)?;
            let totals = trace.cumulative_delta();
            let actions = trace.cumulative_action_delta();
            let mut rate_sums = vec![0.0; totals.len()];
            for r in &trace.rows {
                rate_sums[r.agent as usize] += r.staking_rate_action;
            }
            let points: Vec<SweepPoint> = assigned
                .into_iter()
                .map(|(id, assigned_rate)| {
                    let i = id.0 as usize;
                    SweepPoint {
                        replicate,
                        agent: id.0,
                        assigned_rate,
                        rate: if learning {
                            rate_sums[i] / config.n_rounds as f64
                        } else {
                            assigned_rate
                        },
                        final_rate: trace.final_agents[i].staking_rate_action,
                        cumulative_delta: totals[i],
                        cumulative_action_delta: actions[i],
                    }
                })
                .collect();
            Ok::<_, SweepError>(points)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let spearman = per_replicate
        .iter()
        .map(|pts| {
            let x: Vec<f64> = pts.iter().map(|p| p.rate).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.cumulative_delta).collect();
            spearman(&x, &y)
        })
        .collect();
    let points: Vec<SweepPoint> = per_replicate.into_iter().flatten().collect();

    let summary = grid
        .iter()
        .map(|&rate| {
            let group: Vec<&SweepPoint> = points.iter().filter(|p| p.assigned_rate == rate).collect();
            let deltas: Vec<f64> = group.iter().map(|p| p.cumulative_delta).collect();
            let action: Vec<f64> = group.iter().map(|p| p.cumulative_action_delta).collect();
            GridSummary {
                rate,
                n: group.len(),
                mean_delta: mean(&deltas),
                sd_delta: sample_sd(&deltas),
                mean_action_delta: mean(&action),
            }
        })
        .collect();

    Ok(SweepTable {
        mode: config.policy.mode,
        points,
        spearman,
        summary,
    })
}
