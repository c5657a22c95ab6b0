//! Centralized planner: a collision-free set of `N` arms, refined by pairwise
//! exploration swaps, and a minimal-churn assignment of players to it.

use serde::{Deserialize, Serialize};

use crate::beliefs::BeliefState;
use crate::error::{Error, Result};
use crate::selfish::clamped_benefit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalArmSet {
    /// Chosen arms in ascending order.
    pub arms: Vec<usize>,
    /// `assignment[n]` is the arm of player `n`.
    pub assignment: Vec<usize>,
}

/// `Δμ*_{j,k} = (c_k − c_j)(1 − μ̃_k) / (c_k c_j + c_j)`, clamped to `[-1, 1]`.
pub fn social_benefit(c_k: u64, c_j: u64, mu_k: f64) -> f64 {
    clamped_benefit(c_k, c_j, 1.0 - mu_k, 1.0)
}

/// Margin by which outside arm `j` beats inside arm `k`: `μ̃_j − (μ̃_k − ρ·Δμ*_{j,k})`.
pub fn swap_margin(belief: &BeliefState, inside: usize, outside: usize, rho: f64) -> f64 {
    let mu_k = belief.empirical_mean(inside);
    let threshold = mu_k - rho * social_benefit(belief.pulls(inside), belief.pulls(outside), mu_k);
    belief.empirical_mean(outside) - threshold
}

/// Selects the planner's `n_players` arms, in ascending order.
///
/// Starts from the top arms by empirical mean (lowest index first on ties) and
/// applies the single best improving swap per pass until none is left, for at
/// most `N·K` passes.
pub fn select_arms(belief: &BeliefState, n_players: usize, rho: f64) -> Result<Vec<usize>> {
    let k = belief.n_arms();
    if n_players == 0 {
        return Err(Error::config("n_players", "at least one player is required"));
    }
    if n_players >= k {
        return Err(Error::config(
            "n_players",
            format!("{n_players} players need more than {k} arms"),
        ));
    }
    let means = belief.means();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    let mut inside = vec![false; k];
    for &arm in &order[..n_players] {
        inside[arm] = true;
    }

    for _ in 0..n_players * k {
        let mut best: Option<(usize, usize)> = None;
        let mut best_margin = 0.0;
        for kin in (0..k).filter(|&a| inside[a]) {
            for jout in (0..k).filter(|&a| !inside[a]) {
                let margin = swap_margin(belief, kin, jout, rho);
                if margin > best_margin {
                    best_margin = margin;
                    best = Some((kin, jout));
                }
            }
        }
        match best {
            Some((kin, jout)) => {
                inside[kin] = false;
                inside[jout] = true;
            }
            None => break,
        }
    }
    Ok((0..k).filter(|&a| inside[a]).collect())
}

/// Maps players to `arms`, keeping each player on its previous arm when that arm
/// is still in the set. Vacancies go to the remaining players in ascending order.
pub fn assign_players(arms: &[usize], previous: Option<&[usize]>) -> Result<Vec<usize>> {
    let n = arms.len();
    let mut sorted = arms.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != n {
        return Err(Error::Precondition("arm set contains duplicates".into()));
    }
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut taken = vec![false; n];
    if let Some(prev) = previous {
        if prev.len() != n {
            return Err(Error::DimensionMismatch {
                what: "previous assignment",
                expected: n,
                got: prev.len(),
            });
        }
        for (player, arm) in prev.iter().enumerate() {
            if let Ok(slot) = sorted.binary_search(arm) {
                if !taken[slot] {
                    taken[slot] = true;
                    assignment[player] = Some(*arm);
                }
            }
        }
    }
    let mut free = (0..n).filter(|&s| !taken[s]).map(|s| sorted[s]);
    Ok(assignment
        .into_iter()
        .map(|a| a.or_else(|| free.next()).expect("as many arms as players"))
        .collect())
}

/// Arm set plus assignment in one call.
pub fn select_arm_set(
    belief: &BeliefState,
    n_players: usize,
    rho: f64,
    previous: Option<&[usize]>,
) -> Result<OptimalArmSet> {
    let arms = select_arms(belief, n_players, rho)?;
    let assignment = assign_players(&arms, previous)?;
    Ok(OptimalArmSet { arms, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::Owner;

    fn planner(means: &[f64], pulls: &[u64]) -> BeliefState {
        let successes = means
            .iter()
            .zip(pulls)
            .map(|(m, &c)| (m * c as f64).round() as u64)
            .collect();
        BeliefState::from_counts(Owner::Planner, means.to_vec(), successes, pulls.to_vec()).unwrap()
    }

    #[test]
    fn benefit_examples() {
        assert!((social_benefit(4, 2, 0.5) - 0.1).abs() < 1e-15);
        assert_eq!(social_benefit(6, 6, 0.5), 0.0);
        assert_eq!(social_benefit(5, 0, 0.5), 1.0);
        assert_eq!(social_benefit(0, 0, 0.5), 0.0);
    }

    #[test]
    fn large_counts_pick_top_arms() {
        let b = planner(&[0.9, 0.8, 0.1], &[1000, 1000, 1000]);
        assert_eq!(select_arms(&b, 2, 0.95).unwrap(), vec![0, 1]);
    }

    #[test]
    fn unexplored_arm_enters() {
        let b = planner(&[0.9, 0.8, 0.5], &[50, 50, 0]);
        assert_eq!(select_arms(&b, 2, 0.9).unwrap(), vec![0, 2]);
        assert_eq!(select_arms(&b, 2, 0.0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn equal_beliefs_break_ties_by_index() {
        let b = BeliefState::uniform(Owner::Planner, 5, 0.5).unwrap();
        assert_eq!(select_arms(&b, 4, 0.95).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_many_players_is_an_error() {
        let b = BeliefState::uniform(Owner::Planner, 3, 0.5).unwrap();
        assert!(matches!(select_arms(&b, 3, 0.5), Err(Error::Config { .. })));
    }

    #[test]
    fn assignment_examples() {
        assert_eq!(assign_players(&[1, 2], Some(&[1, 2])).unwrap(), vec![1, 2]);
        assert_eq!(assign_players(&[1, 3], Some(&[1, 2])).unwrap(), vec![1, 3]);
        assert_eq!(assign_players(&[2, 1], Some(&[2, 1])).unwrap(), vec![2, 1]);
        assert_eq!(assign_players(&[1, 2], None).unwrap(), vec![1, 2]);
        assert_eq!(assign_players(&[0, 4, 5], Some(&[5, 2, 3])).unwrap(), vec![5, 0, 4]);
        assert!(assign_players(&[1, 1], None).is_err());
    }
}
