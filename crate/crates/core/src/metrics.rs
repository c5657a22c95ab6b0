//! Learning error, inefficiency ratio, price-of-anarchy bound and convergence
//! detection.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{deviation_gain, occupancy_of};
use crate::error::{Error, Result};

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub replication: usize,
    pub t: usize,
    pub learning_error: f64,
    pub social_reward: f64,
    pub discounted_cumulative: f64,
    pub converged: bool,
}

pub const METRICS_HEADER: [&str; 6] = [
    "replication",
    "t",
    "learning_error",
    "social_reward",
    "discounted_cumulative",
    "converged",
];

pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    if records.is_empty() {
        csv.write_record(METRICS_HEADER)?;
    }
    for r in records {
        csv.serialize(r)?;
    }
    csv.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Reads `metrics.csv`, rejecting rows with a wrong header or non-finite or
/// negative values where they cannot occur.
pub fn read_metrics_csv<R: Read>(reader: R) -> Result<Vec<MetricsRecord>> {
    let mut csv = csv::Reader::from_reader(reader);
    if csv.headers()? != METRICS_HEADER.as_slice() {
        return Err(Error::Parse("unexpected metrics header".into()));
    }
    let mut records = Vec::new();
    for row in csv.deserialize() {
        let r: MetricsRecord = row?;
        if r.t == 0 {
            return Err(Error::Parse("rounds start at 1".into()));
        }
        for (name, v) in [
            ("learning_error", r.learning_error),
            ("social_reward", r.social_reward),
            ("discounted_cumulative", r.discounted_cumulative),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parse(format!("{name} is {v} in round {}", r.t)));
            }
        }
        records.push(r);
    }
    Ok(records)
}

/// Average distance between the true means and each belief:
/// `(1 / (N·K)) Σ_n ‖μ − μ̃^n‖₂`.
pub fn learning_error<B: AsRef<[f64]>>(beliefs: &[B], true_means: &[f64]) -> Result<f64> {
    if beliefs.is_empty() {
        return Err(Error::Precondition("no beliefs to score".into()));
    }
    let k = true_means.len();
    let mut total = 0.0;
    for b in beliefs {
        let b = b.as_ref();
        if b.len() != k {
            return Err(Error::DimensionMismatch {
                what: "belief arms",
                expected: k,
                got: b.len(),
            });
        }
        total += true_means
            .iter()
            .zip(b)
            .map(|(m, e)| (m - e) * (m - e))
            .sum::<f64>()
            .sqrt();
    }
    Ok(total / (beliefs.len() * k) as f64)
}

/// Price-of-anarchy bound `1 + (μ_2 + … + μ_N) / μ_1` for means sorted in
/// descending order.
pub fn poa_bound(sorted_means: &[f64], n_players: usize) -> Result<f64> {
    if n_players == 0 || n_players > sorted_means.len() {
        return Err(Error::Precondition(format!(
            "{n_players} players for {} arms",
            sorted_means.len()
        )));
    }
    if sorted_means.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Precondition("means must be sorted in descending order".into()));
    }
    if !(sorted_means[0] > 0.0) {
        return Err(Error::Precondition("the best arm must have a positive mean".into()));
    }
    Ok(1.0 + sorted_means[1..n_players].iter().sum::<f64>() / sorted_means[0])
}

/// Means sorted in descending order, ready for [`poa_bound`].
pub fn sorted_descending(means: &[f64]) -> Vec<f64> {
    let mut sorted = means.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
}

/// `Σ_t ρ^{t−1} x_t`.
pub fn discounted_total(per_round: &[f64], rho: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for x in per_round {
        total += weight * x;
        weight *= rho;
    }
    total
}

/// Ratio of discounted social rewards, optimal over test. A test trajectory
/// with no reward gives `+inf`.
pub fn inefficiency_ratio(optimal: &[f64], test: &[f64], rho: f64) -> Result<f64> {
    if optimal.len() != test.len() {
        return Err(Error::DimensionMismatch {
            what: "trajectory horizon",
            expected: optimal.len(),
            got: test.len(),
        });
    }
    let denominator = discounted_total(test, rho);
    if denominator == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(discounted_total(optimal, rho) / denominator)
}

/// Whether each player, judging with its own means, gains at most `epsilon`
/// by moving alone. `means[n]` is the belief used for player `n`.
pub fn certify_round<B: AsRef<[f64]>>(choices: &[usize], means: &[B], epsilon: f64) -> bool {
    let Some(first) = means.first() else {
        return true;
    };
    let occupancy = occupancy_of(choices, first.as_ref().len());
    (0..choices.len()).all(|n| deviation_gain(choices, &occupancy, means[n].as_ref(), n) <= epsilon)
}

/// First round (1-based) from which the joint choice stays fixed and
/// certified for `window` consecutive rounds. The whole window must fit in
/// the trajectory.
pub fn detect_convergence(choices: &[Vec<usize>], certified: &[bool], window: usize) -> Result<Option<usize>> {
    if window == 0 {
        return Err(Error::Precondition("window must be at least 1".into()));
    }
    if choices.len() != certified.len() {
        return Err(Error::DimensionMismatch {
            what: "certified flags",
            expected: choices.len(),
            got: certified.len(),
        });
    }
    let mut start = None;
    let mut length = 0usize;
    for t in 0..choices.len() {
        if !certified[t] {
            start = None;
            length = 0;
            continue;
        }
        match start {
            Some(s) if choices[t] == choices[s] => length += 1,
            _ => {
                start = Some(t);
                length = 1;
            }
        }
        if length == window {
            return Ok(start.map(|s| s + 1));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_error_examples() {
        assert_eq!(learning_error(&[[0.5, 0.5]], &[0.5, 0.5]).unwrap(), 0.0);
        assert!((learning_error(&[[0.9]], &[0.5]).unwrap() - 0.4).abs() < 1e-15);
        let err = learning_error(&[[0.5, 0.7], [0.2, 0.3]], &[0.2, 0.3]).unwrap();
        assert!((err - 0.125).abs() < 1e-15);
        assert!(learning_error(&[[0.5]], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn poa_examples() {
        assert_eq!(poa_bound(&[0.99, 0.5], 1).unwrap(), 1.0);
        let b = poa_bound(&[0.99, 0.98, 0.97, 0.5], 3).unwrap();
        assert!((b - (1.0 + 1.95 / 0.99)).abs() < 1e-12);
        assert!(poa_bound(&[0.5, 0.9], 2).is_err());
        assert!(poa_bound(&[0.9, 0.5], 3).is_err());
    }

    #[test]
    fn inefficiency_examples() {
        let traj = [1.0, 2.0, 0.0, 1.0];
        assert_eq!(inefficiency_ratio(&traj, &traj, 0.9).unwrap(), 1.0);
        assert_eq!(inefficiency_ratio(&traj, &[0.0; 4], 0.9).unwrap(), f64::INFINITY);
        assert!(inefficiency_ratio(&traj, &[1.0], 0.9).is_err());
        assert!((discounted_total(&[1.0, 1.0, 1.0], 0.5) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn convergence_needs_a_full_stable_window() {
        let a = vec![0, 1];
        let b = vec![1, 0];
        let choices = vec![a.clone(), b.clone(), b.clone(), b.clone(), a.clone()];
        assert_eq!(detect_convergence(&choices, &[true; 5], 3).unwrap(), Some(2));
        assert_eq!(detect_convergence(&choices, &[true; 5], 4).unwrap(), None);
        let gaps = [true, true, false, true, true];
        assert_eq!(detect_convergence(&choices, &gaps, 2).unwrap(), None);
        let still = vec![a.clone(); 4];
        assert_eq!(detect_convergence(&still, &[true; 4], 1).unwrap(), Some(1));
        assert!(detect_convergence(&still, &[true; 4], 0).is_err());
    }

    #[test]
    fn round_certificate_uses_each_players_means() {
        let choices = [0, 1];
        let agree = [[0.9, 0.8, 0.1], [0.9, 0.8, 0.1]];
        assert!(certify_round(&choices, &agree, 0.0));
        let tempted = [[0.9, 0.8, 0.1], [0.9, 0.3, 0.7]];
        assert!(!certify_round(&choices, &tempted, 0.0));
    }

    #[test]
    fn metrics_csv_round_trip() {
        let rows = vec![MetricsRecord {
            replication: 0,
            t: 1,
            learning_error: 0.25,
            social_reward: 3.0,
            discounted_cumulative: 3.0,
            converged: false,
        }];
        let mut bytes = Vec::new();
        write_metrics_csv(&rows, &mut bytes).unwrap();
        assert!(String::from_utf8_lossy(&bytes)
            .starts_with("replication,t,learning_error,social_reward,discounted_cumulative,converged\n"));
        assert_eq!(read_metrics_csv(bytes.as_slice()).unwrap(), rows);
        assert!(read_metrics_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
