//! One-shot congestion equilibrium and ε-NE certification.
//!
//! With `m` players sharing arm `a`, each expects `μ̃_a / m`. Players are placed
//! one at a time on the arm with the largest marginal share `μ̃_a / (count_a + 1)`,
//! which reaches a pure equilibrium of this game class.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyProfile {
    pub counts: Vec<usize>,
    /// `μ̃_k / max(counts[k], 1)`.
    pub per_arm_value: Vec<f64>,
}

impl OccupancyProfile {
    pub fn n_players(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Equilibrium occupancy predicted for `n_players` who all hold `means`.
///
/// Ties go to the lowest arm index.
pub fn equilibrium_occupancy(means: &[f64], n_players: usize) -> OccupancyProfile {
    let mut counts = vec![0usize; means.len()];
    for _ in 0..n_players {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (arm, &mu) in means.iter().enumerate() {
            let value = mu / (counts[arm] + 1) as f64;
            if value > best_value {
                best = arm;
                best_value = value;
            }
        }
        counts[best] += 1;
    }
    let per_arm_value = means
        .iter()
        .zip(&counts)
        .map(|(&mu, &c)| mu / c.max(1) as f64)
        .collect();
    OccupancyProfile {
        counts,
        per_arm_value,
    }
}

/// Verdict of [`certify_epsilon_ne`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeCertificate {
    pub is_equilibrium: bool,
    /// Largest gain any single player could get by moving alone. Negative when
    /// every player is strictly better off where it is, and `-inf` with one arm.
    pub worst_gain: f64,
}

/// Checks whether no player can gain more than `epsilon` by moving alone.
pub fn certify_epsilon_ne(choices: &[usize], means: &[f64], epsilon: f64) -> NeCertificate {
    let occupancy = occupancy_of(choices, means.len());
    let worst_gain = (0..choices.len())
        .map(|player| deviation_gain(choices, &occupancy, means, player))
        .fold(f64::NEG_INFINITY, f64::max);
    NeCertificate {
        is_equilibrium: worst_gain <= epsilon,
        worst_gain,
    }
}

/// Number of players on each of `n_arms` arms.
pub fn occupancy_of(choices: &[usize], n_arms: usize) -> Vec<usize> {
    let mut occupancy = vec![0usize; n_arms];
    for &arm in choices {
        occupancy[arm] += 1;
    }
    occupancy
}

/// Best gain `player` could get by moving alone, judged with `means`.
pub fn deviation_gain(choices: &[usize], occupancy: &[usize], means: &[f64], player: usize) -> f64 {
    let arm = choices[player];
    let current = means[arm] / occupancy[arm] as f64;
    means
        .iter()
        .enumerate()
        .filter(|(other, _)| *other != arm)
        .map(|(other, &mu)| mu / (occupancy[other] + 1) as f64 - current)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assignments(n: usize, k: usize) -> Vec<Vec<usize>> {
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut code| {
                (0..n)
                    .map(|_| {
                        let arm = code % k;
                        code /= k;
                        arm
                    })
                    .collect()
            })
            .collect()
    }

    fn counts_of(choices: &[usize], k: usize) -> Vec<usize> {
        occupancy_of(choices, k)
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(equilibrium_occupancy(&[0.9, 0.3], 3).counts, vec![3, 0]);
        assert_eq!(equilibrium_occupancy(&[0.5, 0.5], 2).counts, vec![1, 1]);
        assert_eq!(equilibrium_occupancy(&[0.8], 4).counts, vec![4]);
        let p = equilibrium_occupancy(&[0.9, 0.3], 3);
        assert!((p.per_arm_value[0] - 0.3).abs() < 1e-15);
        assert_eq!(p.per_arm_value[1], 0.3);
    }

    #[test]
    fn brute_force_agrees_on_two_arm_example() {
        let means = [0.9, 0.3];
        let ne: Vec<Vec<usize>> = assignments(3, 2)
            .into_iter()
            .filter(|c| certify_epsilon_ne(c, &means, 0.0).is_equilibrium)
            .map(|c| counts_of(&c, 2))
            .collect();
        assert!(ne.contains(&vec![3, 0]));
        assert!(ne.iter().all(|c| *c == vec![3, 0] || *c == vec![2, 1]));
    }

    #[test]
    fn certificate_examples() {
        let split = certify_epsilon_ne(&[0, 1], &[0.9, 0.8], 0.0);
        assert!(split.is_equilibrium);
        let stacked = certify_epsilon_ne(&[0, 0], &[0.9, 0.8], 0.0);
        assert!(!stacked.is_equilibrium);
        assert!((stacked.worst_gain - 0.35).abs() < 1e-12);
        assert!(certify_epsilon_ne(&[2], &[0.1, 0.4, 0.7], 0.0).is_equilibrium);
        assert!(!certify_epsilon_ne(&[1], &[0.1, 0.4, 0.7], 0.0).is_equilibrium);
    }

    #[test]
    fn single_arm_has_no_deviation() {
        let cert = certify_epsilon_ne(&[0, 0, 0], &[0.8], 0.0);
        assert!(cert.is_equilibrium);
        assert_eq!(cert.worst_gain, f64::NEG_INFINITY);
    }

    #[test]
    fn epsilon_loosens_certificate() {
        assert!(certify_epsilon_ne(&[0, 0], &[0.9, 0.8], 0.35 + 1e-9).is_equilibrium);
    }
}
