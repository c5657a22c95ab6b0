//! Runs configured experiments and summarizes them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cisp::Ledger;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{poa_bound, sorted_descending, MetricsRecord};
use crate::sim::{run_policy, Policy, Trajectory};

/// All replications of one policy at one player count.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub policy: Policy,
    pub n_players: usize,
    pub trajectories: Vec<Trajectory>,
    pub summary: RunSummary,
}

impl PolicyRun {
    /// Output directory name, e.g. `cisp_n8`.
    pub fn dir_name(&self) -> String {
        format!("{}_n{}", self.policy, self.n_players)
    }

    /// `metrics.csv` rows for every replication and round.
    pub fn metrics_records(&self, rho: f64) -> Vec<MetricsRecord> {
        let mut rows = Vec::new();
        for (rep, traj) in self.trajectories.iter().enumerate() {
            let mut cumulative = 0.0;
            let mut weight = 1.0;
            for (i, (&error, &reward)) in traj.learning_errors.iter().zip(&traj.social_rewards).enumerate() {
                let t = i + 1;
                cumulative += weight * reward;
                weight *= rho;
                rows.push(MetricsRecord {
                    replication: rep,
                    t,
                    learning_error: error,
                    social_reward: reward,
                    discounted_cumulative: cumulative,
                    converged: traj.convergence_round.is_some_and(|c| t >= c),
                });
            }
        }
        rows
    }

    /// Ledgers of the replications, for CISP runs.
    pub fn ledgers(&self) -> Vec<&Ledger> {
        self.trajectories.iter().filter_map(|t| t.ledger.as_ref()).collect()
    }
}

/// Mean and sample standard deviation of a per-round series across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl SeriesStats {
    pub fn from_series(series: &[&[f64]]) -> Self {
        let len = series.first().map_or(0, |s| s.len());
        let r = series.len() as f64;
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for t in 0..len {
            let m = series.iter().map(|s| s[t]).sum::<f64>() / r;
            mean[t] = m;
            if series.len() > 1 {
                let var = series.iter().map(|s| (s[t] - m).powi(2)).sum::<f64>() / (r - 1.0);
                std[t] = var.sqrt();
            }
        }
        Self { mean, std }
    }
}

/// Optimal-over-test ratio of discounted social reward on paired seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InefficiencySummary {
    /// Per replication; `None` when the test run earned nothing.
    pub per_replication: Vec<Option<f64>>,
    /// Mean of the finite per-replication ratios.
    pub mean: Option<f64>,
    /// Mean optimal reward over mean test reward.
    pub pooled: Option<f64>,
}

/// Player-averaged empirical mean of the tracked arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefTrajectories {
    pub arm: usize,
    /// `mean[n][t]`: average over replications of player `n`'s belief after round `t + 1`.
    pub mean: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: Policy,
    pub n_players: usize,
    pub dir: String,
    pub replications: usize,
    pub seeds: Vec<u64>,
    pub learning_error: SeriesStats,
    pub social_reward: SeriesStats,
    pub discounted_social_reward: Vec<f64>,
    pub convergence_rounds: Vec<Option<usize>>,
    pub median_convergence_round: Option<f64>,
    pub inefficiency_ratio: InefficiencySummary,
    pub poa_bound: f64,
    pub max_occupancy: usize,
    /// Final planner balance per replication (CISP only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_balance: Option<Vec<f64>>,
    /// Lowest end-of-round balance seen in any replication (CISP only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_balance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_trajectories: Option<BeliefTrajectories>,
}

/// Top-level `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub min_gap_satisfied: bool,
    /// Bound `ρ^T / (1 − ρ)` on the per-player reward cut off by the horizon.
    pub truncation_tail_bound: f64,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    /// Parses and checks a summary, including its embedded config.
    pub fn from_json(text: &str) -> Result<Self> {
        let summary: Self = serde_json::from_str(text)?;
        summary.config.validate()?;
        for run in &summary.runs {
            let t = run.learning_error.mean.len();
            let consistent = run.learning_error.std.len() == t
                && run.social_reward.mean.len() == t
                && run.social_reward.std.len() == t
                && run.convergence_rounds.len() == run.replications
                && run.discounted_social_reward.len() == run.replications
                && run.seeds.len() == run.replications;
            if !consistent {
                return Err(Error::Parse(format!("run {} has inconsistent lengths", run.dir)));
            }
        }
        Ok(summary)
    }
}

/// Every run of an experiment.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub runs: Vec<PolicyRun>,
    pub summary: ExperimentSummary,
}

/// Runs all replications of one policy at one player count.
pub fn run_replications(config: &ExperimentConfig, policy: Policy, n_players: usize) -> Result<Vec<Trajectory>> {
    (0..config.replications)
        .into_par_iter()
        .map(|rep| run_policy(policy, &config.setup(n_players, rep)?))
        .collect()
}

/// Runs every policy at every player count. The social policy is always run
/// on the same seeds so inefficiency ratios are paired.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultBundle> {
    config.validate()?;
    let means = config.means()?;
    let sorted = sorted_descending(&means);
    let mut runs = Vec::new();
    for n in config.player_counts() {
        let mut by_policy: BTreeMap<Policy, Vec<Trajectory>> = BTreeMap::new();
        for &policy in &config.policy {
            if let std::collections::btree_map::Entry::Vacant(slot) = by_policy.entry(policy) {
                slot.insert(run_replications(config, policy, n)?);
            }
        }
        let reference: Vec<f64> = match by_policy.get(&Policy::Social) {
            Some(t) => t.iter().map(|t| t.discounted_social(config.rho)).collect(),
            None => run_replications(config, Policy::Social, n)?
                .iter()
                .map(|t| t.discounted_social(config.rho))
                .collect(),
        };
        let bound = poa_bound(&sorted, n)?;
        let mut emitted = Vec::new();
        for &policy in &config.policy {
            if emitted.contains(&policy) {
                continue;
            }
            emitted.push(policy);
            let trajectories = by_policy.remove(&policy).unwrap_or_default();
            let summary = summarize(config, policy, n, &trajectories, &reference, bound)?;
            runs.push(PolicyRun {
                policy,
                n_players: n,
                trajectories,
                summary,
            });
        }
    }
    let summary = ExperimentSummary {
        config: config.clone(),
        warnings: config.warnings(),
        min_gap_satisfied: gap_satisfied(&means, config.min_gap),
        truncation_tail_bound: config.rho.powi(config.horizon as i32) / (1.0 - config.rho),
        runs: runs.iter().map(|r| r.summary.clone()).collect(),
    };
    Ok(ResultBundle {
        config: config.clone(),
        runs,
        summary,
    })
}

fn gap_satisfied(means: &[f64], gap: f64) -> bool {
    means
        .iter()
        .enumerate()
        .all(|(i, a)| means[i + 1..].iter().all(|b| (a - b).abs() > gap))
}

fn summarize(
    config: &ExperimentConfig,
    policy: Policy,
    n: usize,
    trajectories: &[Trajectory],
    optimal: &[f64],
    bound: f64,
) -> Result<RunSummary> {
    let rho = config.rho;
    let errors: Vec<&[f64]> = trajectories.iter().map(|t| t.learning_errors.as_slice()).collect();
    let rewards: Vec<&[f64]> = trajectories.iter().map(|t| t.social_rewards.as_slice()).collect();
    let discounted: Vec<f64> = trajectories.iter().map(|t| t.discounted_social(rho)).collect();

    let per_replication: Vec<Option<f64>> = optimal
        .iter()
        .zip(&discounted)
        .map(|(o, d)| (*d > 0.0).then(|| o / d))
        .collect();
    let finite: Vec<f64> = per_replication.iter().flatten().copied().collect();
    let mean_ratio = (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64);
    let total_test: f64 = discounted.iter().sum();
    let pooled = (total_test > 0.0).then(|| optimal.iter().sum::<f64>() / total_test);

    let convergence_rounds: Vec<Option<usize>> = trajectories.iter().map(|t| t.convergence_round).collect();
    let ledgers: Vec<&Ledger> = trajectories.iter().filter_map(|t| t.ledger.as_ref()).collect();
    let (final_balance, min_balance) = if ledgers.is_empty() {
        (None, None)
    } else {
        let finals = ledgers.iter().map(|l| l.balance()).collect();
        let min = ledgers
            .iter()
            .flat_map(|l| l.end_of_round_balances())
            .map(|(_, b)| b)
            .fold(0.0, f64::min);
        (Some(finals), Some(min))
    };
    let belief_trajectories = config.track_arm.map(|arm| BeliefTrajectories {
        arm,
        mean: mean_tracked(trajectories, n),
    });

    let dir = format!("{policy}_n{n}");
    Ok(RunSummary {
        policy,
        n_players: n,
        dir,
        replications: trajectories.len(),
        seeds: trajectories.iter().map(|t| t.seed).collect(),
        learning_error: SeriesStats::from_series(&errors),
        social_reward: SeriesStats::from_series(&rewards),
        discounted_social_reward: discounted,
        median_convergence_round: median_round(&convergence_rounds, config.horizon),
        convergence_rounds,
        inefficiency_ratio: InefficiencySummary {
            per_replication,
            mean: mean_ratio,
            pooled,
        },
        poa_bound: bound,
        max_occupancy: trajectories.iter().map(|t| t.max_occupancy).max().unwrap_or(0),
        final_balance,
        min_balance,
        belief_trajectories,
    })
}

/// Median convergence round, counting runs that never converged as `horizon + 1`.
pub fn median_round(rounds: &[Option<usize>], horizon: usize) -> Option<f64> {
    if rounds.is_empty() {
        return None;
    }
    let mut values: Vec<usize> = rounds.iter().map(|r| r.unwrap_or(horizon + 1)).collect();
    values.sort_unstable();
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) as f64 / 2.0
    } else {
        values[mid] as f64
    })
}

fn mean_tracked(trajectories: &[Trajectory], n: usize) -> Vec<Vec<f64>> {
    let horizon = trajectories.first().map_or(0, |t| t.social_rewards.len());
    let r = trajectories.len() as f64;
    let mut mean = vec![vec![0.0; horizon]; n];
    for traj in trajectories {
        if let Some(tracked) = &traj.tracked {
            for (t, row) in tracked.iter().enumerate() {
                for (player, v) in row.iter().enumerate() {
                    mean[player][t] += v / r;
                }
            }
        }
    }
    mean
}
