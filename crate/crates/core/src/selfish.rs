//! Selfish per-player decisions through exploration thresholds.
//!
//! A player on arm `k` moves to `j` when the expected one-shot reward of `j`
//! beats `𝒯_{j,k} = r̃_k − ρ·Δμ_{j,k}`. The exploration benefit `Δμ` grows when
//! `j` has been pulled less than `k`, and is clamped to `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::beliefs::BeliefState;
use crate::equilibrium::{equilibrium_occupancy, OccupancyProfile};

/// Everything the switch threshold from `current_arm` to `candidate_arm` needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInputs {
    pub current_arm: usize,
    pub candidate_arm: usize,
    /// Expected one-shot reward of staying.
    pub r_tilde_k: f64,
    pub c_k: u64,
    pub c_j: u64,
    /// Predicted number of other players on the candidate arm.
    pub expected_occupancy_j: f64,
    pub rho: f64,
}

/// Clamps a benefit ratio; `c_j = 0` with `c_k > 0` is an unbounded benefit.
pub(crate) fn clamped_benefit(c_k: u64, c_j: u64, numerator_factor: f64, denominator_factor: f64) -> f64 {
    match (c_k, c_j) {
        (0, 0) => 0.0,
        (_, 0) => 1.0,
        _ => {
            // One rounding on the count ratio keeps the result monotone in c_j.
            let ratio = (c_k as f64 - c_j as f64) / (c_j as f64 * (c_k as f64 + 1.0));
            (ratio * (numerator_factor / denominator_factor)).clamp(-1.0, 1.0)
        }
    }
}

/// `Δμ_{j,k} = (c_k − c_j)(1 − r̃_k) / ((E[N_j] + 1)(c_k c_j + c_j))`, clamped.
pub fn exploration_benefit(inputs: &ThresholdInputs) -> f64 {
    clamped_benefit(
        inputs.c_k,
        inputs.c_j,
        1.0 - inputs.r_tilde_k,
        inputs.expected_occupancy_j + 1.0,
    )
}

/// `𝒯_{j,k} = r̃_k − ρ·Δμ_{j,k}`.
pub fn switch_threshold(inputs: &ThresholdInputs) -> f64 {
    inputs.r_tilde_k - inputs.rho * exploration_benefit(inputs)
}

/// Expected reward of staying on `arm` when `occupancy` players are predicted there.
pub fn stay_reward(means: &[f64], occupancy: &[usize], arm: usize) -> f64 {
    means[arm] / occupancy[arm].max(1) as f64
}

/// Expected reward of joining `arm` on top of the predicted occupancy.
pub fn join_reward(means: &[f64], occupancy: &[usize], arm: usize) -> f64 {
    means[arm] / (occupancy[arm] + 1) as f64
}

/// Threshold for moving from `from` to `to` given means, pull counts and the
/// predicted occupancy.
pub fn threshold_between(
    means: &[f64],
    pull_counts: &[u64],
    occupancy: &[usize],
    from: usize,
    to: usize,
    rho: f64,
) -> f64 {
    switch_threshold(&ThresholdInputs {
        current_arm: from,
        candidate_arm: to,
        r_tilde_k: stay_reward(means, occupancy, from),
        c_k: pull_counts[from],
        c_j: pull_counts[to],
        expected_occupancy_j: occupancy[to] as f64,
        rho,
    })
}

/// Best switch from `current` under the given means, counts and occupancy:
/// the arm with the largest positive margin `r̃_j − 𝒯_{j,k}`, or `current`.
pub fn best_move(
    means: &[f64],
    pull_counts: &[u64],
    occupancy: &[usize],
    current: usize,
    rho: f64,
) -> usize {
    let mut choice = current;
    let mut best_margin = 0.0;
    for j in (0..means.len()).filter(|&j| j != current) {
        let margin = join_reward(means, occupancy, j)
            - threshold_between(means, pull_counts, occupancy, current, j, rho);
        if margin > best_margin {
            best_margin = margin;
            choice = j;
        }
    }
    choice
}

/// Occupancy a player predicts when everyone shares its means.
pub fn predicted_occupancy(belief: &BeliefState, n_players: usize) -> OccupancyProfile {
    equilibrium_occupancy(&belief.means(), n_players)
}

/// Arm for the next round, given the arm played last round.
pub fn decide(belief: &BeliefState, previous_arm: usize, n_players: usize, rho: f64) -> usize {
    let means = belief.means();
    let profile = equilibrium_occupancy(&means, n_players);
    best_move(&means, &belief.pull_counts, &profile.counts, previous_arm, rho)
}

/// First-round arm: the best response to the equilibrium over priors.
pub fn init_decide(belief: &BeliefState, n_players: usize) -> usize {
    let means = belief.means();
    let profile = equilibrium_occupancy(&means, n_players);
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for arm in 0..means.len() {
        let value = stay_reward(&means, &profile.counts, arm);
        if value > best_value {
            best = arm;
            best_value = value;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::Owner;

    fn inputs(c_k: u64, c_j: u64, r: f64, occ: f64, rho: f64) -> ThresholdInputs {
        ThresholdInputs {
            current_arm: 0,
            candidate_arm: 1,
            r_tilde_k: r,
            c_k,
            c_j,
            expected_occupancy_j: occ,
            rho,
        }
    }

    #[test]
    fn benefit_examples() {
        assert!((exploration_benefit(&inputs(4, 2, 0.5, 0.0, 1.0)) - 0.1).abs() < 1e-15);
        assert_eq!(exploration_benefit(&inputs(7, 7, 0.3, 2.0, 1.0)), 0.0);
        assert_eq!(exploration_benefit(&inputs(3, 0, 0.5, 0.0, 1.0)), 1.0);
        assert_eq!(exploration_benefit(&inputs(0, 0, 0.5, 0.0, 1.0)), 0.0);
        assert!(exploration_benefit(&inputs(0, 3, 0.5, 0.0, 1.0)) < 0.0);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(switch_threshold(&inputs(4, 2, 0.5, 0.0, 0.0)), 0.5);
        assert!((switch_threshold(&inputs(4, 2, 0.5, 0.0, 1.0)) - 0.4).abs() < 1e-15);
        let mid = switch_threshold(&inputs(4, 2, 0.5, 0.0, 0.5));
        assert!((mid - 0.45).abs() < 1e-15);
        assert!(mid > 0.4 && mid < 0.5);
    }

    #[test]
    fn myopic_player_stays_on_better_arm() {
        let belief =
            BeliefState::from_counts(Owner::Player(0), vec![0.5, 0.5], vec![9, 2], vec![10, 10]).unwrap();
        assert_eq!(decide(&belief, 0, 1, 0.0), 0);
        assert_eq!(decide(&belief, 1, 1, 0.0), 0);
    }

    #[test]
    fn patient_player_explores_unpulled_arm() {
        let belief =
            BeliefState::from_counts(Owner::Player(0), vec![0.45, 0.45], vec![10, 0], vec![20, 0]).unwrap();
        assert_eq!(decide(&belief, 0, 1, 0.9), 1);
        assert_eq!(decide(&belief, 0, 1, 0.0), 0);
    }

    #[test]
    fn init_decide_examples() {
        let mut priors = vec![0.05; 12];
        priors[0] = 0.99;
        let worst = BeliefState::new(Owner::Player(0), priors).unwrap();
        for n in 1..=10 {
            assert_eq!(init_decide(&worst, n), 0);
        }
        let flat = BeliefState::uniform(Owner::Player(0), 5, 0.5).unwrap();
        assert_eq!(init_decide(&flat, 3), 0);
        let single = BeliefState::new(Owner::Player(0), vec![0.1, 0.7, 0.3]).unwrap();
        assert_eq!(init_decide(&single, 1), 1);
    }

    #[test]
    fn crowded_arm_loses_to_free_one() {
        // Stacked on arm 0 under the equilibrium prediction, arm 1 is worth joining.
        let means = [0.9, 0.8, 0.1];
        let counts = [10, 10, 10];
        assert_eq!(best_move(&means, &counts, &[2, 0, 0], 0, 0.0), 1);
        assert_eq!(best_move(&means, &counts, &[1, 1, 0], 0, 0.0), 0);
    }
}
