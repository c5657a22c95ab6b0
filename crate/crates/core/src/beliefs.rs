//! Empirical-mean bookkeeping for players and for the planner.
//!
//! Beliefs keep integer success and pull counts, so every update is exact and
//! a replay reproduces the same means bit for bit. Until an arm has been pulled
//! its empirical mean is the owner's prior.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};

/// Largest accepted pull count; larger counts are not exact in `f64`.
pub const MAX_PULLS: u64 = 1 << 53;

/// Whose belief this is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Player(usize),
    Planner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub owner: Owner,
    pub priors: Vec<f64>,
    pub success_counts: Vec<u64>,
    pub pull_counts: Vec<u64>,
}

impl BeliefState {
    /// Fresh belief with the given priors and no pulls.
    pub fn new(owner: Owner, priors: Vec<f64>) -> Result<Self> {
        let k = priors.len();
        let belief = Self {
            owner,
            priors,
            success_counts: vec![0; k],
            pull_counts: vec![0; k],
        };
        belief.validate()?;
        Ok(belief)
    }

    /// Fresh belief with the same prior on every arm.
    pub fn uniform(owner: Owner, n_arms: usize, prior: f64) -> Result<Self> {
        Self::new(owner, vec![prior; n_arms])
    }

    /// Builds a belief from explicit counts.
    pub fn from_counts(
        owner: Owner,
        priors: Vec<f64>,
        success_counts: Vec<u64>,
        pull_counts: Vec<u64>,
    ) -> Result<Self> {
        let belief = Self {
            owner,
            priors,
            success_counts,
            pull_counts,
        };
        belief.validate()?;
        Ok(belief)
    }

    /// Parses a belief from JSON and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let belief: Self = serde_json::from_str(text)?;
        belief.validate()?;
        Ok(belief)
    }

    /// Checks the structural invariants; used on anything read from outside.
    pub fn validate(&self) -> Result<()> {
        let k = self.priors.len();
        if k == 0 {
            return Err(Error::Parse("belief has no arms".into()));
        }
        if self.success_counts.len() != k {
            return Err(Error::DimensionMismatch {
                what: "success_counts",
                expected: k,
                got: self.success_counts.len(),
            });
        }
        if self.pull_counts.len() != k {
            return Err(Error::DimensionMismatch {
                what: "pull_counts",
                expected: k,
                got: self.pull_counts.len(),
            });
        }
        for (arm, prior) in self.priors.iter().enumerate() {
            if !(0.0..=1.0).contains(prior) {
                return Err(Error::Parse(format!("prior of arm {arm} is {prior}, outside [0, 1]")));
            }
        }
        for arm in 0..k {
            if self.pull_counts[arm] > MAX_PULLS {
                return Err(Error::Parse(format!(
                    "arm {arm} has {} pulls, more than {MAX_PULLS}",
                    self.pull_counts[arm]
                )));
            }
            if self.success_counts[arm] > self.pull_counts[arm] {
                return Err(Error::Parse(format!(
                    "arm {arm} has {} successes in {} pulls",
                    self.success_counts[arm], self.pull_counts[arm]
                )));
            }
        }
        Ok(())
    }

    pub fn n_arms(&self) -> usize {
        self.priors.len()
    }

    pub fn pulls(&self, arm: usize) -> u64 {
        self.pull_counts[arm]
    }

    pub fn successes(&self, arm: usize) -> u64 {
        self.success_counts[arm]
    }

    pub fn empirical_mean(&self, arm: usize) -> f64 {
        match self.pull_counts[arm] {
            0 => self.priors[arm],
            c => self.success_counts[arm] as f64 / c as f64,
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.n_arms()).map(|k| self.empirical_mean(k)).collect()
    }

    /// Applies what the owner observed about `arm`. Only a successful pull
    /// changes the belief.
    pub fn update(&mut self, arm: usize, observation: Observation) {
        if let Observation::Pulled { success } = observation {
            self.pull_counts[arm] += 1;
            self.success_counts[arm] += u64::from(success);
        }
    }

    /// Expected empirical mean of `arm` after one more pull, taking the current
    /// empirical mean as the success probability. Evaluated exactly and
    /// rounded once.
    pub fn one_step_expectation(&self, arm: usize) -> Result<f64> {
        let exact = self.one_step_expectation_exact(arm)?;
        Ok(*exact.numer() as f64 / *exact.denom() as f64)
    }

    /// `μ̃·(s+1)/(c+1) + (1−μ̃)·s/(c+1)` in exact rational arithmetic.
    pub fn one_step_expectation_exact(&self, arm: usize) -> Result<Ratio<u128>> {
        let (s, c) = self.counted(arm)?;
        let (s, c) = (u128::from(s), u128::from(c));
        let mean = Ratio::new(s, c);
        let up = Ratio::new(s + 1, c + 1);
        let down = Ratio::new(s, c + 1);
        Ok(mean * up + (Ratio::from_integer(1) - mean) * down)
    }

    /// Exact empirical mean `s / c` of a pulled arm.
    pub fn empirical_mean_exact(&self, arm: usize) -> Result<Ratio<u128>> {
        let (s, c) = self.counted(arm)?;
        Ok(Ratio::new(u128::from(s), u128::from(c)))
    }

    fn counted(&self, arm: usize) -> Result<(u64, u64)> {
        match self.pull_counts[arm] {
            0 => Err(Error::Precondition(format!(
                "arm {arm} has never been pulled; the prior is not covered"
            ))),
            c => Ok((self.success_counts[arm], c)),
        }
    }
}

/// Pools per-player beliefs into the planner's belief.
///
/// Counts are summed. Arms nobody has pulled fall back to the arithmetic mean of
/// the players' priors.
pub fn aggregate_planner_belief(reports: &[BeliefState]) -> Result<BeliefState> {
    let first = reports
        .first()
        .ok_or_else(|| Error::config("reports", "no beliefs to aggregate"))?;
    let k = first.n_arms();
    let mut priors = vec![0.0; k];
    let mut success_counts = vec![0u64; k];
    let mut pull_counts = vec![0u64; k];
    for report in reports {
        if report.n_arms() != k {
            return Err(Error::DimensionMismatch {
                what: "report arms",
                expected: k,
                got: report.n_arms(),
            });
        }
        for arm in 0..k {
            priors[arm] += report.priors[arm];
            success_counts[arm] += report.success_counts[arm];
            pull_counts[arm] += report.pull_counts[arm];
        }
    }
    let n = reports.len() as f64;
    for p in &mut priors {
        *p /= n;
    }
    Ok(BeliefState {
        owner: Owner::Planner,
        priors,
        success_counts,
        pull_counts,
    })
}
