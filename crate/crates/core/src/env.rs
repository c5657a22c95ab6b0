//! Ground-truth arm environment and collision resolution.
//!
//! Each round every arm `k` has a Bernoulli condition `r_k(t)` drawn from its
//! true mean. Conditions for all `K` arms are drawn every round from the
//! environment stream, whatever the players chose, so two policies run on the
//! same seed face the same arm luck. When `m` players pick the same arm, one of
//! them is selected uniformly from the collision stream; it receives `r_k(t)`
//! and the other `m - 1` receive 0 and only learn the collider count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// True arm means plus the random streams that realize them.
#[derive(Debug, Clone)]
pub struct ArmEnvironment {
    true_means: Vec<f64>,
    min_gap: f64,
    gap_satisfied: bool,
    reward_rng: ChaCha8Rng,
    collision_rng: ChaCha8Rng,
}

impl ArmEnvironment {
    /// Builds an environment, rejecting means that violate the minimum gap.
    pub fn new(true_means: Vec<f64>, min_gap: f64, seed: u64) -> Result<Self> {
        let env = Self::relaxed(true_means, min_gap, seed)?;
        if !env.gap_satisfied {
            return Err(Error::config(
                "true_means",
                format!("two arms are within the minimum gap {}", env.min_gap),
            ));
        }
        Ok(env)
    }

    /// Builds an environment that records, instead of rejecting, a minimum-gap
    /// violation. Preset mean vectors repeat values, so the harness
    /// needs this form.
    pub fn relaxed(true_means: Vec<f64>, min_gap: f64, seed: u64) -> Result<Self> {
        Self::with_streams(
            true_means,
            min_gap,
            stream_rng(seed, Stream::Environment),
            stream_rng(seed, Stream::Collision),
        )
    }

    /// Builds an environment from explicit generators.
    pub fn with_streams(
        true_means: Vec<f64>,
        min_gap: f64,
        reward_rng: ChaCha8Rng,
        collision_rng: ChaCha8Rng,
    ) -> Result<Self> {
        if true_means.is_empty() {
            return Err(Error::config("true_means", "at least one arm is required"));
        }
        if let Some((k, mu)) = true_means
            .iter()
            .enumerate()
            .find(|(_, mu)| !(**mu > 0.0 && **mu < 1.0))
        {
            return Err(Error::config(
                "true_means",
                format!("arm {k} has mean {mu}, outside (0, 1)"),
            ));
        }
        if !(min_gap > 0.0) || !min_gap.is_finite() {
            return Err(Error::config("min_gap", "must be a positive finite number"));
        }
        let gap_satisfied = min_gap_holds(&true_means, min_gap);
        Ok(Self {
            true_means,
            min_gap,
            gap_satisfied,
            reward_rng,
            collision_rng,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.true_means.len()
    }

    pub fn true_means(&self) -> &[f64] {
        &self.true_means
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// Whether every pair of arms differs by more than `min_gap`.
    pub fn gap_satisfied(&self) -> bool {
        self.gap_satisfied
    }

    /// Games need strictly more arms than players.
    pub fn check_players(&self, n_players: usize) -> Result<()> {
        if n_players == 0 {
            return Err(Error::config("n_players", "at least one player is required"));
        }
        if n_players >= self.n_arms() {
            return Err(Error::config(
                "n_players",
                format!(
                    "{} players need more than {} arms",
                    n_players,
                    self.n_arms()
                ),
            ));
        }
        Ok(())
    }

    /// Draws this round's conditions `r_k(t)` for every arm.
    pub fn draw_conditions(&mut self) -> Vec<bool> {
        let rng = &mut self.reward_rng;
        self.true_means
            .iter()
            .map(|&mu| rng.random::<f64>() < mu)
            .collect()
    }

    /// Plays one round for the given joint choice.
    pub fn resolve_round(&mut self, choices: &[usize]) -> Result<RoundOutcome> {
        validate_choices(choices, self.n_arms())?;
        let conditions = self.draw_conditions();
        let rng = &mut self.collision_rng;
        resolve_with_conditions(choices, &conditions, |m| rng.random_range(0..m as u32) as usize)
    }
}

fn min_gap_holds(means: &[f64], gap: f64) -> bool {
    means
        .iter()
        .enumerate()
        .all(|(i, a)| means[i + 1..].iter().all(|b| (a - b).abs() > gap))
}

fn validate_choices(choices: &[usize], n_arms: usize) -> Result<()> {
    if choices.is_empty() {
        return Err(Error::config("choices", "no players in the round"));
    }
    if let Some((n, k)) = choices.iter().enumerate().find(|(_, k)| **k >= n_arms) {
        return Err(Error::config(
            "choices",
            format!("player {n} chose arm {k}, but there are only {n_arms} arms"),
        ));
    }
    Ok(())
}

/// What one player learns from a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// The player pulled the arm and saw the reward.
    Pulled { success: bool },
    /// The player lost the collision draw; nothing was observed.
    Collided,
    /// The player did not choose this arm.
    NotChosen,
}

/// Joint record of one resolved round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub choices: Vec<usize>,
    pub collision_flags: Vec<bool>,
    pub realized_rewards: Vec<u8>,
    pub occupancy: Vec<usize>,
    /// Collided players see how many players shared their arm.
    pub observed_occupancy: Vec<Option<usize>>,
    /// Ground-truth conditions `r_k(t)` for every arm (log only).
    pub arm_conditions: Vec<bool>,
}

impl RoundOutcome {
    pub fn n_players(&self) -> usize {
        self.choices.len()
    }

    /// Observation of `player` about the arm it chose.
    pub fn observation(&self, player: usize) -> Observation {
        if self.collision_flags[player] {
            Observation::Collided
        } else {
            Observation::Pulled {
                success: self.realized_rewards[player] == 1,
            }
        }
    }

    /// Sum of the realized rewards this round.
    pub fn social_reward(&self) -> f64 {
        self.realized_rewards.iter().map(|&r| f64::from(r)).sum()
    }
}

/// Resolves collisions against pre-drawn arm conditions.
///
/// `select(m)` must return an index in `0..m`; it picks which of the `m`
/// players on a contested arm (in ascending player order) gets to pull.
pub fn resolve_with_conditions(
    choices: &[usize],
    conditions: &[bool],
    mut select: impl FnMut(usize) -> usize,
) -> Result<RoundOutcome> {
    let n_arms = conditions.len();
    validate_choices(choices, n_arms)?;
    let n = choices.len();

    let mut choosers: Vec<Vec<usize>> = vec![Vec::new(); n_arms];
    for (player, &arm) in choices.iter().enumerate() {
        choosers[arm].push(player);
    }

    let mut collision_flags = vec![true; n];
    let mut realized_rewards = vec![0u8; n];
    let mut observed_occupancy = vec![None; n];
    for (arm, players) in choosers.iter().enumerate() {
        let m = players.len();
        if m == 0 {
            continue;
        }
        let winner = if m == 1 { 0 } else { select(m) };
        assert!(winner < m, "selector returned {winner} for {m} choosers");
        for (i, &player) in players.iter().enumerate() {
            if i == winner {
                collision_flags[player] = false;
                realized_rewards[player] = u8::from(conditions[arm]);
            } else {
                observed_occupancy[player] = Some(m);
            }
        }
    }

    Ok(RoundOutcome {
        choices: choices.to_vec(),
        collision_flags,
        realized_rewards,
        occupancy: choosers.iter().map(Vec::len).collect(),
        observed_occupancy,
        arm_conditions: conditions.to_vec(),
    })
}

/// Runs `trials` collisions among `m` identical choosers and returns how often
/// each of them was selected.
pub fn selection_frequency_check(m: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::Precondition(format!("need at least 2 choosers, got {m}")));
    }
    if trials == 0 {
        return Err(Error::Precondition("trials must be positive".into()));
    }
    let mut env = ArmEnvironment::relaxed(vec![0.5; 1], 1e-9, seed)?;
    let choices = vec![0usize; m];
    let mut wins = vec![0usize; m];
    for _ in 0..trials {
        let outcome = env.resolve_round(&choices)?;
        let winner = outcome
            .collision_flags
            .iter()
            .position(|&collided| !collided)
            .expect("one chooser always pulls");
        wins[winner] += 1;
    }
    Ok(wins.into_iter().map(|w| w as f64 / trials as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_player_pulls_its_arm() {
        let out = resolve_with_conditions(&[3], &[false, false, false, true], |_| unreachable!()).unwrap();
        assert_eq!(out.occupancy, vec![0, 0, 0, 1]);
        assert_eq!(out.collision_flags, vec![false]);
        assert_eq!(out.realized_rewards, vec![1]);
        assert_eq!(out.observation(0), Observation::Pulled { success: true });
    }

    #[test]
    fn three_way_collision_has_one_winner() {
        let out = resolve_with_conditions(&[1, 1, 1], &[false, true], |m| {
            assert_eq!(m, 3);
            1
        })
        .unwrap();
        assert_eq!(out.collision_flags, vec![true, false, true]);
        assert_eq!(out.realized_rewards, vec![0, 1, 0]);
        assert_eq!(out.observed_occupancy, vec![Some(3), None, Some(3)]);
        assert_eq!(out.occupancy, vec![0, 3]);
    }

    #[test]
    fn distinct_arms_never_collide() {
        let mut env = ArmEnvironment::relaxed(vec![0.3, 0.6], 0.01, 4).unwrap();
        for _ in 0..50 {
            let out = env.resolve_round(&[0, 1]).unwrap();
            assert_eq!(out.collision_flags, vec![false, false]);
            assert_eq!(out.realized_rewards[0], u8::from(out.arm_conditions[0]));
            assert_eq!(out.realized_rewards[1], u8::from(out.arm_conditions[1]));
        }
    }

    #[test]
    fn invalid_rounds_are_rejected() {
        let mut env = ArmEnvironment::relaxed(vec![0.3, 0.6], 0.01, 4).unwrap();
        assert!(matches!(env.resolve_round(&[]), Err(Error::Config { .. })));
        assert!(matches!(env.resolve_round(&[0, 2]), Err(Error::Config { .. })));
    }

    #[test]
    fn environment_invariants() {
        assert!(ArmEnvironment::new(vec![0.2, 0.0], 0.01, 0).is_err());
        assert!(ArmEnvironment::new(vec![0.2, 1.0], 0.01, 0).is_err());
        assert!(ArmEnvironment::new(vec![0.2, 0.205], 0.01, 0).is_err());
        let relaxed = ArmEnvironment::relaxed(vec![0.2, 0.205], 0.01, 0).unwrap();
        assert!(!relaxed.gap_satisfied());
        let env = ArmEnvironment::new(vec![0.2, 0.5, 0.8], 0.01, 0).unwrap();
        assert!(env.check_players(2).is_ok());
        assert!(env.check_players(3).is_err());
        assert!(env.check_players(0).is_err());
    }

    #[test]
    fn selection_frequency_rejects_degenerate_input() {
        assert!(selection_frequency_check(2, 0, 1).is_err());
        assert!(selection_frequency_check(1, 10, 1).is_err());
    }
}
