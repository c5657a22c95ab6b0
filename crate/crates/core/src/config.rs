//! Declarative experiment description and the built-in presets.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::cisp::AdversaryConfig;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::sim::{GameSetup, Policy};

/// True arm means, listed or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanSpec {
    Explicit(Vec<f64>),
    Generated(MeanGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanGenerator {
    /// `n_arms` evenly spaced means from `high` (arm 0) down to `low`.
    Linear { high: f64, low: f64 },
}

/// How each player's priors are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Same prior on every arm for every player.
    Uniform(f64),
    /// Independent uniform draws in `[0, 1]`. Without a seed, each replication
    /// draws from its own seed.
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
    /// One row of priors per player.
    Explicit(Vec<Vec<f64>>),
    /// `value` on `arm`, `rest` everywhere else.
    Favored { arm: usize, value: f64, rest: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_players: usize,
    pub n_arms: usize,
    pub horizon: usize,
    pub rho: f64,
    #[serde(default = "default_min_gap")]
    pub min_gap: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub true_means: MeanSpec,
    pub priors: PriorSpec,
    #[serde(deserialize_with = "one_or_many")]
    pub policy: Vec<Policy>,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    /// Player counts to sweep; `n_players` is used when absent.
    #[serde(default)]
    pub n_sweep: Option<Vec<usize>>,
    /// Arm whose per-player empirical means are recorded every round.
    #[serde(default)]
    pub track_arm: Option<usize>,
    /// Reject means closer than `min_gap`.
    #[serde(default = "default_true")]
    pub enforce_min_gap: bool,
}

fn default_min_gap() -> f64 {
    0.01
}
fn default_delta() -> f64 {
    0.1
}
fn default_replications() -> usize {
    1
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_window() -> usize {
    50
}
fn default_penalty() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}

fn one_or_many<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Vec<Policy>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Policy),
        Many(Vec<Policy>),
    }
    Ok(match OneOrMany::deserialize(deserializer)? {
        OneOrMany::One(p) => vec![p],
        OneOrMany::Many(v) => v,
    })
}

pub const MAX_ARMS: usize = 4096;
pub const MAX_HORIZON: usize = 10_000_000;
pub const MAX_REPLICATIONS: usize = 1_000_000;

pub const PRESETS: [&str; 5] = ["fig2", "fig3", "fig4a", "fig4b", "worst_case_poa"];

const FIG2_MEANS: [f64; 8] = [0.22, 0.12, 0.98, 0.11, 0.09, 0.08, 0.14, 0.11];
const FIG3_MEANS: [f64; 12] = [0.22, 0.12, 0.98, 0.11, 0.09, 0.08, 0.14, 0.11, 0.09, 0.08, 0.14, 0.11];
const CROWDED_TOP: [f64; 12] = [0.99, 0.95, 0.94, 0.97, 0.98, 0.98, 0.94, 0.93, 0.92, 0.94, 0.95, 0.94];
const LONE_TOP: [f64; 12] = [0.99, 0.24, 0.24, 0.24, 0.24, 0.08, 0.24, 0.23, 0.22, 0.24, 0.15, 0.24];

/// Built-in experiment by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig {
        n_players: 2,
        n_arms: 12,
        horizon: 2000,
        rho: 0.05,
        min_gap: default_min_gap(),
        delta: default_delta(),
        true_means: MeanSpec::Explicit(CROWDED_TOP.to_vec()),
        priors: PriorSpec::Favored {
            arm: 0,
            value: 0.99,
            rest: 0.05,
        },
        policy: vec![Policy::Selfish, Policy::Hiding, Policy::Cisp, Policy::Social],
        adversary: None,
        replications: 50,
        base_seed: 0,
        epsilon: default_epsilon(),
        window: default_window(),
        penalty: default_penalty(),
        n_sweep: Some(vec![2, 4, 6, 8, 10]),
        track_arm: None,
        enforce_min_gap: false,
    };
    let config = match name {
        "fig2" => ExperimentConfig {
            n_players: 5,
            n_arms: 8,
            horizon: 1000,
            rho: 0.95,
            true_means: MeanSpec::Explicit(FIG2_MEANS.to_vec()),
            priors: PriorSpec::Random { seed: None },
            policy: vec![Policy::Selfish],
            replications: 100,
            n_sweep: None,
            track_arm: Some(0),
            ..base
        },
        "fig3" => ExperimentConfig {
            n_players: 8,
            n_arms: 12,
            horizon: 500,
            rho: 0.95,
            true_means: MeanSpec::Explicit(FIG3_MEANS.to_vec()),
            priors: PriorSpec::Uniform(0.5),
            n_sweep: None,
            ..base
        },
        "fig4a" => base,
        "fig4b" => ExperimentConfig {
            rho: 0.95,
            true_means: MeanSpec::Explicit(LONE_TOP.to_vec()),
            ..base
        },
        "worst_case_poa" => ExperimentConfig {
            n_sweep: Some((2..=10).collect()),
            ..base
        },
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                available: PRESETS.join(", "),
            })
        }
    };
    Ok(config)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Player counts this experiment runs.
    pub fn player_counts(&self) -> Vec<usize> {
        self.n_sweep.clone().unwrap_or_else(|| vec![self.n_players])
    }

    pub fn means(&self) -> Result<Vec<f64>> {
        match &self.true_means {
            MeanSpec::Explicit(v) => Ok(v.clone()),
            MeanSpec::Generated(MeanGenerator::Linear { high, low }) => {
                let k = self.n_arms;
                if k < 2 {
                    return Ok(vec![*high; k]);
                }
                Ok((0..k)
                    .map(|i| high - (high - low) * i as f64 / (k - 1) as f64)
                    .collect())
            }
        }
    }

    /// Checks every field, naming the first bad one.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_arms;
        if !(2..=MAX_ARMS).contains(&k) {
            return Err(Error::config("n_arms", format!("must lie in [2, {MAX_ARMS}]")));
        }
        for n in self.player_counts() {
            let field = if self.n_sweep.is_some() { "n_sweep" } else { "n_players" };
            if n == 0 {
                return Err(Error::config(field, "at least one player is required"));
            }
            if n >= k {
                return Err(Error::config(field, format!("{n} players need more than {k} arms")));
            }
        }
        if self.n_sweep.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::config("n_sweep", "empty sweep"));
        }
        if !(1..=MAX_HORIZON).contains(&self.horizon) {
            return Err(Error::config("horizon", format!("must lie in [1, {MAX_HORIZON}]")));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config("rho", "must lie in [0, 1)"));
        }
        if !(self.min_gap > 0.0 && self.min_gap.is_finite()) {
            return Err(Error::config("min_gap", "must be a positive number"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", "must lie in (0, 1)"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.replications > MAX_REPLICATIONS {
            return Err(Error::config("replications", format!("at most {MAX_REPLICATIONS} are supported")));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon", "must be a non-negative number"));
        }
        if self.window == 0 {
            return Err(Error::config("window", "must be at least 1"));
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(Error::config("penalty", "must be a non-negative number"));
        }
        if self.policy.is_empty() {
            return Err(Error::config("policy", "at least one policy is required"));
        }
        if let MeanSpec::Generated(MeanGenerator::Linear { high, low }) = &self.true_means {
            if !(*high > 0.0 && *high < 1.0 && *low > 0.0 && *low < 1.0) {
                return Err(Error::config("true_means", "generator bounds must lie in (0, 1)"));
            }
        }
        let means = self.means()?;
        if means.len() != k {
            return Err(Error::config(
                "true_means",
                format!("{} means for {k} arms", means.len()),
            ));
        }
        if let Some((arm, mu)) = means.iter().enumerate().find(|(_, m)| !(**m > 0.0 && **m < 1.0)) {
            return Err(Error::config("true_means", format!("arm {arm} has mean {mu}, outside (0, 1)")));
        }
        if self.enforce_min_gap && !gap_holds(&means, self.min_gap) {
            return Err(Error::config(
                "true_means",
                format!("two arms are within the minimum gap {}", self.min_gap),
            ));
        }
        let max_n = self.player_counts().into_iter().max().unwrap_or(0);
        match &self.priors {
            PriorSpec::Uniform(v) => check_prior(*v)?,
            PriorSpec::Random { .. } => {}
            PriorSpec::Explicit(rows) => {
                if rows.len() < max_n {
                    return Err(Error::config(
                        "priors",
                        format!("{} prior rows for {max_n} players", rows.len()),
                    ));
                }
                for row in rows {
                    if row.len() != k {
                        return Err(Error::config("priors", format!("a prior row has {} entries, not {k}", row.len())));
                    }
                    row.iter().try_for_each(|v| check_prior(*v))?;
                }
            }
            PriorSpec::Favored { arm, value, rest } => {
                if *arm >= k {
                    return Err(Error::config("priors", format!("favored arm {arm} does not exist")));
                }
                check_prior(*value)?;
                check_prior(*rest)?;
            }
        }
        if let Some(adv) = &self.adversary {
            for n in self.player_counts() {
                adv.validate(n)?;
            }
        }
        if let Some(arm) = self.track_arm {
            if arm >= k {
                return Err(Error::config("track_arm", format!("arm {arm} does not exist")));
            }
        }
        Ok(())
    }

    /// Settings that are valid but weaken what the results can show.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.policy.contains(&Policy::Cisp) && self.penalty <= 1.0 {
            out.push(format!(
                "penalty {} does not exceed the largest per-round reward; deviations may pay off",
                self.penalty
            ));
        }
        if let Ok(means) = self.means() {
            if !self.enforce_min_gap && !gap_holds(&means, self.min_gap) {
                out.push(format!("true means contain arms closer than min_gap {}", self.min_gap));
            }
        }
        out
    }

    /// Priors for `n_players` in the replication seeded with `seed`.
    pub fn priors_for(&self, n_players: usize, seed: u64) -> Vec<Vec<f64>> {
        let k = self.n_arms;
        match &self.priors {
            PriorSpec::Uniform(v) => vec![vec![*v; k]; n_players],
            PriorSpec::Random { seed: fixed } => {
                let mut rng = stream_rng(fixed.unwrap_or(seed), Stream::Policy);
                (0..n_players)
                    .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
                    .collect()
            }
            PriorSpec::Explicit(rows) => rows[..n_players].to_vec(),
            PriorSpec::Favored { arm, value, rest } => {
                let mut row = vec![*rest; k];
                row[*arm] = *value;
                vec![row; n_players]
            }
        }
    }

    /// Seed of replication `index`.
    pub fn seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }

    /// Inputs of one replication.
    pub fn setup(&self, n_players: usize, replication: usize) -> Result<GameSetup> {
        let seed = self.seed(replication);
        Ok(GameSetup {
            true_means: self.means()?,
            min_gap: self.min_gap,
            enforce_min_gap: self.enforce_min_gap,
            priors: self.priors_for(n_players, seed),
            rho: self.rho,
            horizon: self.horizon,
            seed,
            epsilon: self.epsilon,
            window: self.window,
            penalty: self.penalty,
            adversary: self.adversary,
            track_arm: self.track_arm,
        })
    }
}

fn check_prior(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config("priors", format!("prior {v} is outside [0, 1]")))
    }
}

fn gap_holds(means: &[f64], gap: f64) -> bool {
    means
        .iter()
        .enumerate()
        .all(|(i, a)| means[i + 1..].iter().all(|b| (a - b).abs() > gap))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_reference_settings() {
        assert_eq!(preset("fig4a").unwrap().rho, 0.05);
        assert_eq!(preset("fig4b").unwrap().rho, 0.95);
        assert_eq!(preset("fig3").unwrap().means().unwrap().len(), 12);
        assert_eq!(preset("fig2").unwrap().replications, 100);
        assert_eq!(preset("worst_case_poa").unwrap().player_counts(), (2..=10).collect::<Vec<_>>());
        for name in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            assert!(!c.warnings().is_empty(), "{name} repeats means");
        }
    }

    #[test]
    fn oversized_configs_are_rejected_before_allocating() {
        let mut c = preset("fig3").unwrap();
        c.true_means = MeanSpec::Generated(MeanGenerator::Linear { high: 0.9, low: 0.1 });
        c.n_arms = usize::MAX / 2;
        assert!(c.validate().unwrap_err().to_string().contains("n_arms"));
        let mut c = preset("fig3").unwrap();
        c.horizon = MAX_HORIZON + 1;
        assert!(c.validate().unwrap_err().to_string().contains("horizon"));
    }

    #[test]
    fn long_decimals_parse_like_std() {
        let long = "0.918446744073709551615";
        let text = format!(
            r#"{{"n_players": 2, "n_arms": 3, "horizon": 5, "rho": 0.5, "true_means": [{long}, 0.5, 0.2],
                "priors": {{"uniform": 0.5}}, "policy": "selfish"}}"#
        );
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.means().unwrap()[0], long.parse::<f64>().unwrap());
        assert_eq!(ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = preset("fig9").unwrap_err().to_string();
        assert!(err.contains("fig2") && err.contains("worst_case_poa"));
    }

    #[test]
    fn json_accepts_single_policy_and_defaults() {
        let text = r#"{
            "n_players": 2, "n_arms": 3, "horizon": 10, "rho": 0.9,
            "true_means": [0.8, 0.5, 0.2], "priors": {"uniform": 0.5},
            "policy": "social"
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.policy, vec![Policy::Social]);
        assert_eq!((c.window, c.epsilon, c.penalty), (50, 1e-3, 10.0));
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_fields_are_named() {
        let cases = [
            (r#""n_players": 3, "n_arms": 3"#, "n_players"),
            (r#""n_players": 2, "n_arms": 3, "rho": 1.0"#, "rho"),
            (r#""n_players": 2, "n_arms": 4"#, "true_means"),
        ];
        for (fields, expected) in cases {
            let rho = if fields.contains("rho") { "" } else { r#", "rho": 0.5"# };
            let text = format!(
                r#"{{ {fields}{rho}, "horizon": 5, "true_means": [0.8, 0.5, 0.2],
                   "priors": {{"uniform": 0.5}}, "policy": "selfish" }}"#
            );
            match ExperimentConfig::from_json(&text) {
                Err(Error::Config { field, .. }) => assert_eq!(field, expected),
                other => panic!("expected a config error for {expected}, got {other:?}"),
            }
        }
    }

    #[test]
    fn gap_is_enforced_for_user_configs() {
        let text = r#"{ "n_players": 1, "n_arms": 2, "horizon": 5, "rho": 0.5,
            "true_means": [0.5, 0.505], "priors": {"uniform": 0.5}, "policy": "selfish" }"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        let relaxed = text.replace("\"policy\"", "\"enforce_min_gap\": false, \"policy\"");
        assert!(ExperimentConfig::from_json(&relaxed).is_ok());
    }

    #[test]
    fn prior_specs() {
        let mut c = preset("fig4a").unwrap();
        let rows = c.priors_for(3, 0);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0][0], 0.99);
        assert_eq!(rows[2][5], 0.05);
        c.priors = PriorSpec::Random { seed: None };
        assert_ne!(c.priors_for(2, 1), c.priors_for(2, 2));
        c.priors = PriorSpec::Random { seed: Some(4) };
        assert_eq!(c.priors_for(2, 1), c.priors_for(2, 2));
    }

    #[test]
    fn linear_generator() {
        let mut c = preset("fig3").unwrap();
        c.n_arms = 5;
        c.n_players = 2;
        c.true_means = MeanSpec::Generated(MeanGenerator::Linear { high: 0.9, low: 0.1 });
        let m = c.means().unwrap();
        assert_eq!(m.len(), 5);
        assert!((m[2] - 0.5).abs() < 1e-12);
    }
}
