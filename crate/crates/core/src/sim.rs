//! Runs one replication of a game under a given policy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beliefs::{aggregate_planner_belief, BeliefState};
use crate::cisp::{net_transfers, run_cisp_round, Adversary, AdversaryConfig, Ledger, PlayerState};
use crate::env::ArmEnvironment;
use crate::error::{Error, Result};
use crate::metrics::{certify_round, detect_convergence, learning_error};
use crate::rng::{stream_rng, Stream};
use crate::social::select_arm_set;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Selfish,
    Social,
    /// Selfish play with the planner's aggregation switched off.
    Hiding,
    Cisp,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Selfish, Policy::Social, Policy::Hiding, Policy::Cisp];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Selfish => "selfish",
            Policy::Social => "social",
            Policy::Hiding => "hiding",
            Policy::Cisp => "cisp",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("policy", format!("unknown policy `{s}`")))
    }
}

/// Fully resolved inputs of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSetup {
    pub true_means: Vec<f64>,
    pub min_gap: f64,
    pub enforce_min_gap: bool,
    /// One prior vector per player.
    pub priors: Vec<Vec<f64>>,
    pub rho: f64,
    pub horizon: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub window: usize,
    pub penalty: f64,
    pub adversary: Option<AdversaryConfig>,
    pub track_arm: Option<usize>,
}

impl GameSetup {
    pub fn n_players(&self) -> usize {
        self.priors.len()
    }

    fn environment(&self, collision: Stream) -> Result<ArmEnvironment> {
        let env = ArmEnvironment::with_streams(
            self.true_means.clone(),
            self.min_gap,
            stream_rng(self.seed, Stream::Environment),
            stream_rng(self.seed, collision),
        )?;
        if self.enforce_min_gap && !env.gap_satisfied() {
            return Err(Error::config(
                "true_means",
                format!("two arms are within the minimum gap {}", self.min_gap),
            ));
        }
        env.check_players(self.n_players())?;
        Ok(env)
    }

    fn players(&self) -> Result<Vec<PlayerState>> {
        self.priors
            .iter()
            .enumerate()
            .map(|(n, p)| PlayerState::new(n, p.clone()))
            .collect()
    }
}

/// Everything recorded about one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub policy: Policy,
    pub seed: u64,
    /// Sum of realized rewards per round.
    pub social_rewards: Vec<f64>,
    pub learning_errors: Vec<f64>,
    pub convergence_round: Option<usize>,
    /// Discounted sum of each player's realized reward plus the money it
    /// received (negative when it paid).
    pub player_utilities: Vec<f64>,
    pub ledger: Option<Ledger>,
    /// `tracked[t][n]`: empirical mean of the tracked arm held by player `n`
    /// after round `t`.
    pub tracked: Option<Vec<Vec<f64>>>,
    /// Largest number of players seen on one arm in any round.
    pub max_occupancy: usize,
}

impl Trajectory {
    fn new(policy: Policy, setup: &GameSetup) -> Self {
        let t = setup.horizon;
        Self {
            policy,
            seed: setup.seed,
            social_rewards: Vec::with_capacity(t),
            learning_errors: Vec::with_capacity(t),
            convergence_round: None,
            player_utilities: vec![0.0; setup.n_players()],
            ledger: None,
            tracked: setup.track_arm.map(|_| Vec::with_capacity(t)),
            max_occupancy: 0,
        }
    }

    /// Discounted sum of the social reward.
    pub fn discounted_social(&self, rho: f64) -> f64 {
        crate::metrics::discounted_total(&self.social_rewards, rho)
    }
}

/// Runs one replication of `policy`.
pub fn run_policy(policy: Policy, setup: &GameSetup) -> Result<Trajectory> {
    let n = setup.n_players();
    if let Some(track) = setup.track_arm {
        if track >= setup.true_means.len() {
            return Err(Error::config("track_arm", format!("arm {track} does not exist")));
        }
    }
    if let Some(adv) = &setup.adversary {
        adv.validate(n)?;
    }
    let collision = match policy {
        Policy::Hiding => Stream::HidingCollision,
        _ => Stream::Collision,
    };
    let mut env = setup.environment(collision)?;
    let mut players = setup.players()?;
    let mut traj = Trajectory::new(policy, setup);
    let mut ledger = Ledger::new();
    let mut adversary = setup.adversary.map(|a| Adversary::new(a, setup.seed));
    let mut assignment: Option<Vec<usize>> = None;
    let mut choices = Vec::with_capacity(setup.horizon);
    let mut certified = Vec::with_capacity(setup.horizon);
    let mut weight = 1.0;

    for round in 1..=setup.horizon {
        let mut transfers = vec![0.0; n];
        let (outcome, decision_means, planner_after) = match policy {
            Policy::Selfish | Policy::Hiding => {
                let choices: Vec<usize> = players.iter().map(|p| p.selfish_choice(n, setup.rho)).collect();
                let means: Vec<Vec<f64>> = players.iter().map(|p| p.belief.means()).collect();
                let outcome = env.resolve_round(&choices)?;
                (outcome, means, false)
            }
            Policy::Social => {
                let planner = pooled(&players)?;
                let set = select_arm_set(&planner, n, setup.rho, assignment.as_deref())?;
                let outcome = env.resolve_round(&set.assignment)?;
                assignment = Some(set.assignment);
                (outcome, vec![planner.means(); n], true)
            }
            Policy::Cisp => {
                let start = ledger.entries().len();
                let step = run_cisp_round(
                    round,
                    &mut players,
                    &mut env,
                    &mut ledger,
                    adversary.as_mut(),
                    setup.rho,
                    setup.penalty,
                )?;
                transfers = net_transfers(&ledger.entries()[start..], n);
                (step.outcome, vec![step.planner.means(); n], true)
            }
        };
        if policy != Policy::Cisp {
            for (i, p) in players.iter_mut().enumerate() {
                p.observe(i, &outcome);
            }
        }

        let error = if planner_after {
            let planner = pooled(&players)?;
            learning_error(&[planner.means()], &setup.true_means)?
        } else {
            let beliefs: Vec<Vec<f64>> = players.iter().map(|p| p.belief.means()).collect();
            learning_error(&beliefs, &setup.true_means)?
        };
        traj.learning_errors.push(error);
        traj.social_rewards.push(outcome.social_reward());
        for (i, utility) in traj.player_utilities.iter_mut().enumerate() {
            *utility += weight * (f64::from(outcome.realized_rewards[i]) + transfers[i]);
        }
        weight *= setup.rho;
        certified.push(certify_round(&outcome.choices, &decision_means, setup.epsilon));
        traj.max_occupancy = traj.max_occupancy.max(*outcome.occupancy.iter().max().unwrap_or(&0));
        if let (Some(arm), Some(tracked)) = (setup.track_arm, traj.tracked.as_mut()) {
            tracked.push(players.iter().map(|p| p.belief.empirical_mean(arm)).collect());
        }
        choices.push(outcome.choices);
    }
    traj.convergence_round = detect_convergence(&choices, &certified, setup.window)?;
    if policy == Policy::Cisp {
        traj.ledger = Some(ledger);
    }
    Ok(traj)
}

/// Planner belief pooled from the players' own beliefs.
fn pooled(players: &[PlayerState]) -> Result<BeliefState> {
    let beliefs: Vec<BeliefState> = players.iter().map(|p| p.belief.clone()).collect();
    aggregate_planner_belief(&beliefs)
}
