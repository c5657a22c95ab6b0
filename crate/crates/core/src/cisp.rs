//! Combined informational and side-payment mechanism.
//!
//! Each round the planner pools the players' reported beliefs, picks the
//! collision-free arm set, then steers every player onto a distinct arm of that
//! set: outsiders by recommendation alone, crowded players by charging the one
//! who stays and paying the ones who move. Anyone who ignores its
//! recommendation pays a penalty, part of which compensates the player it
//! collided with.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beliefs::{aggregate_planner_belief, BeliefState, Owner};
use crate::env::{ArmEnvironment, RoundOutcome};
use crate::equilibrium::equilibrium_occupancy;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::selfish::threshold_between;
use crate::social::select_arms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    Charge,
    Reward,
    Penalty,
    Compensation,
}

impl LedgerKind {
    /// Whether the planner receives this amount.
    pub fn is_income(self) -> bool {
        matches!(self, LedgerKind::Charge | LedgerKind::Penalty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub round: usize,
    pub player: usize,
    pub kind: LedgerKind,
    pub amount: f64,
    pub running_balance: f64,
}

/// Every payment the planner made or received, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    balance: f64,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn balance(&self) -> f64 {
        self.balance
    }

    pub fn record(&mut self, round: usize, player: usize, kind: LedgerKind, amount: f64) {
        if kind.is_income() {
            self.balance += amount;
        } else {
            self.balance -= amount;
        }
        self.entries.push(LedgerEntry {
            round,
            player,
            kind,
            amount,
            running_balance: self.balance,
        });
    }

    /// Balance recomputed from the entries alone.
    pub fn recomputed_balance(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, e| {
            if e.kind.is_income() {
                acc + e.amount
            } else {
                acc - e.amount
            }
        })
    }

    /// Balance at the end of each round that has entries, in round order.
    pub fn end_of_round_balances(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for e in &self.entries {
            match out.last_mut() {
                Some((round, balance)) if *round == e.round => *balance = e.running_balance,
                _ => out.push((e.round, e.running_balance)),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        if self.entries.is_empty() {
            csv.write_record(["round", "player", "kind", "amount", "running_balance"])?;
        }
        for e in &self.entries {
            csv.serialize(e)?;
        }
        csv.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Reads a ledger back, checking that amounts are non-negative and that
    /// each running balance follows from the entries before it.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers = csv.headers()?.clone();
        if headers != vec!["round", "player", "kind", "amount", "running_balance"] {
            return Err(Error::Parse(format!("unexpected ledger header {headers:?}")));
        }
        let mut ledger = Ledger::new();
        let mut last_round = 0;
        for row in csv.deserialize() {
            let entry: LedgerEntry = row?;
            if !(entry.amount.is_finite() && entry.amount >= 0.0) {
                return Err(Error::Parse(format!("invalid amount {}", entry.amount)));
            }
            if entry.round < last_round {
                return Err(Error::Parse(format!("round {} after round {last_round}", entry.round)));
            }
            last_round = entry.round;
            ledger.record(entry.round, entry.player, entry.kind, entry.amount);
            let expected = ledger.balance;
            let tolerance = 1e-9 * (1.0 + expected.abs());
            if !((entry.running_balance - expected).abs() <= tolerance) {
                return Err(Error::Parse(format!(
                    "running balance {} does not match {expected} in round {}",
                    entry.running_balance, entry.round
                )));
            }
        }
        Ok(ledger)
    }
}

/// Misbehaviour of one player, used to probe incentive compatibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub player: usize,
    /// Multiplier on reported success counts and priors.
    #[serde(default = "one")]
    pub report_bias: f64,
    /// Probability of playing the selfish choice instead of the recommendation.
    #[serde(default)]
    pub deviation_prob: f64,
}

fn one() -> f64 {
    1.0
}

impl AdversaryConfig {
    pub fn validate(&self, n_players: usize) -> Result<()> {
        if self.player >= n_players {
            return Err(Error::config(
                "adversary.player",
                format!("player {} does not exist among {n_players}", self.player),
            ));
        }
        if !(self.report_bias.is_finite() && self.report_bias >= 0.0) {
            return Err(Error::config("adversary.report_bias", "must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.deviation_prob) {
            return Err(Error::config("adversary.deviation_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// What the adversary reports in place of its true belief.
    pub fn distort(&self, belief: &BeliefState) -> BeliefState {
        let mut report = belief.clone();
        for arm in 0..report.n_arms() {
            let c = report.pull_counts[arm];
            let s = report.success_counts[arm] as f64 * self.report_bias;
            report.success_counts[arm] = (s.round() as u64).min(c);
            report.priors[arm] = (report.priors[arm] * self.report_bias).min(1.0);
        }
        report
    }
}

/// Adversary configuration plus its private random stream.
#[derive(Debug, Clone)]
pub struct Adversary {
    pub config: AdversaryConfig,
    rng: ChaCha8Rng,
}

impl Adversary {
    pub fn new(config: AdversaryConfig, seed: u64) -> Self {
        Self {
            config,
            rng: stream_rng(seed, Stream::Adversary),
        }
    }

    fn deviates(&mut self) -> bool {
        self.rng.random::<f64>() < self.config.deviation_prob
    }
}

/// Result of pooling the reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub planner: BeliefState,
    /// Number of players whose selfish choice is each arm.
    pub intent_occupancy: Vec<usize>,
    /// Players whose report could not be used.
    pub flagged: Vec<bool>,
}

/// Step 1: pools well-formed reports and counts the selfish intents.
pub fn step1_aggregate(reports: &[BeliefState], intents: &[usize], n_arms: usize) -> Result<Aggregation> {
    if reports.len() != intents.len() {
        return Err(Error::DimensionMismatch {
            what: "intents",
            expected: reports.len(),
            got: intents.len(),
        });
    }
    let flagged: Vec<bool> = reports
        .iter()
        .map(|r| r.n_arms() != n_arms || r.validate().is_err())
        .collect();
    let usable: Vec<BeliefState> = reports
        .iter()
        .zip(&flagged)
        .filter(|(_, f)| !**f)
        .map(|(r, _)| r.clone())
        .collect();
    if usable.is_empty() {
        return Err(Error::Precondition("no well-formed reports to aggregate".into()));
    }
    let planner = aggregate_planner_belief(&usable)?;
    let mut intent_occupancy = vec![0usize; n_arms];
    for (player, &arm) in intents.iter().enumerate() {
        if arm >= n_arms {
            return Err(Error::config(
                "intents",
                format!("player {player} intends arm {arm} of {n_arms}"),
            ));
        }
        intent_occupancy[arm] += 1;
    }
    Ok(Aggregation {
        planner,
        intent_occupancy,
        flagged,
    })
}

/// Recommendations from step 2.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InformationalPlan {
    pub recommendations: Vec<Option<usize>>,
    /// Outsiders for whom no qualifying arm was free, ascending.
    pub deferred: Vec<usize>,
}

fn reported_mean(reports: &[BeliefState], agg: &Aggregation, player: usize, arm: usize) -> f64 {
    if agg.flagged[player] {
        agg.planner.empirical_mean(arm)
    } else {
        reports[player].empirical_mean(arm)
    }
}

/// Step 2: sends each player whose selfish choice lies outside the optimal set
/// to a distinct empty optimal arm that beats its switch threshold under the
/// planner's belief.
pub fn step2_informational(
    intents: &[usize],
    optimal_set: &[usize],
    agg: &Aggregation,
    reports: &[BeliefState],
    rho: f64,
) -> InformationalPlan {
    let n = intents.len();
    let means = agg.planner.means();
    let predicted = equilibrium_occupancy(&means, n).counts;
    let mut used = vec![false; means.len()];
    let mut plan = InformationalPlan {
        recommendations: vec![None; n],
        deferred: Vec::new(),
    };
    for (player, &from) in intents.iter().enumerate() {
        if optimal_set.contains(&from) {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &arm in optimal_set {
            if used[arm] || agg.intent_occupancy[arm] != 0 {
                continue;
            }
            let threshold =
                threshold_between(&means, &agg.planner.pull_counts, &predicted, from, arm, rho);
            if means[arm] <= threshold {
                continue;
            }
            let preference = reported_mean(reports, agg, player, arm);
            if best.is_none_or(|(_, p)| preference > p) {
                best = Some((arm, preference));
            }
        }
        match best {
            Some((arm, _)) => {
                used[arm] = true;
                plan.recommendations[player] = Some(arm);
            }
            None => plan.deferred.push(player),
        }
    }
    plan
}

/// A side payment promised in step 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payment {
    pub player: usize,
    pub arm: usize,
    pub amount: f64,
}

/// Full plan for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPlan {
    pub optimal_set: Vec<usize>,
    pub recommendations: Vec<usize>,
    /// Charges on the players kept on a crowded optimal arm.
    pub charges: Vec<Payment>,
    /// Rewards for players moved to an empty optimal arm.
    pub rewards: Vec<Payment>,
    /// Toll a moved player pays if it sticks with its selfish arm, keyed by that arm.
    pub announced_tolls: BTreeMap<usize, f64>,
    /// Players sent to leftover arms without payment.
    pub deferred: Vec<usize>,
}

/// Charge on the player kept on an arm chosen by `m` players.
pub fn crowding_charge(mean: f64, m: usize) -> f64 {
    (m - 1) as f64 / m as f64 * mean
}

/// Reward for moving off a crowded arm: `μ̃^n_i / m − μ̃^l_j`, floored at 0.
pub fn mover_reward(keeper_mean: f64, m: usize, mover_target_mean: f64) -> f64 {
    (keeper_mean / m as f64 - mover_target_mean).max(0.0)
}

/// Step 3: keeps the most optimistic player on each crowded optimal arm,
/// charges it, and pays others to fill the empty optimal arms.
pub fn step3_payments(
    intents: &[usize],
    optimal_set: &[usize],
    agg: &Aggregation,
    reports: &[BeliefState],
    informational: &InformationalPlan,
) -> Result<RoundPlan> {
    let n = intents.len();
    if optimal_set.len() != n {
        return Err(Error::DimensionMismatch {
            what: "optimal set",
            expected: n,
            got: optimal_set.len(),
        });
    }
    let occupancy = &agg.intent_occupancy;
    let mut recommendations = informational.recommendations.clone();
    let mut filled: Vec<bool> = vec![false; occupancy.len()];
    for arm in recommendations.iter().flatten() {
        filled[*arm] = true;
    }
    let mut keeper_of: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    let mut charges = Vec::new();

    for &arm in optimal_set {
        let choosers: Vec<usize> = (0..n).filter(|&p| intents[p] == arm).collect();
        let Some(&first) = choosers.first() else {
            continue;
        };
        let mut keeper = first;
        let mut keeper_mean = reported_mean(reports, agg, first, arm);
        for &p in &choosers[1..] {
            let mean = reported_mean(reports, agg, p, arm);
            if mean > keeper_mean {
                keeper = p;
                keeper_mean = mean;
            }
        }
        recommendations[keeper] = Some(arm);
        filled[arm] = true;
        if choosers.len() > 1 {
            keeper_of.insert(arm, (keeper, keeper_mean));
            charges.push(Payment {
                player: keeper,
                arm,
                amount: crowding_charge(keeper_mean, choosers.len()),
            });
        }
    }

    let mut rewards = Vec::new();
    let mut announced_tolls = BTreeMap::new();
    let mut paid_from: BTreeMap<usize, f64> = BTreeMap::new();
    let mut deferred_queue = informational.deferred.iter().copied();
    let mut deferred = Vec::new();
    for &target in optimal_set {
        if filled[target] {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for h in 0..n {
            if recommendations[h].is_some() || informational.deferred.contains(&h) {
                continue;
            }
            let own = intents[h];
            if occupancy[own] <= 1 {
                continue;
            }
            let score = reported_mean(reports, agg, h, own) / occupancy[own] as f64
                - reported_mean(reports, agg, h, target);
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((h, score));
            }
        }
        let mover = match best {
            Some((mover, _)) => {
                let own = intents[mover];
                let (_, keeper_mean) = keeper_of[&own];
                let m = occupancy[own];
                let charge = crowding_charge(keeper_mean, m);
                let spent = paid_from.entry(own).or_insert(0.0);
                let amount = mover_reward(keeper_mean, m, reported_mean(reports, agg, mover, target))
                    .min((charge - *spent).max(0.0));
                *spent += amount;
                rewards.push(Payment {
                    player: mover,
                    arm: target,
                    amount,
                });
                announced_tolls.insert(own, charge);
                mover
            }
            None => {
                let player = deferred_queue.next().ok_or_else(|| {
                    Error::Precondition(format!("no player left for optimal arm {target}"))
                })?;
                deferred.push(player);
                player
            }
        };
        recommendations[mover] = Some(target);
        filled[target] = true;
    }

    let recommendations = recommendations
        .into_iter()
        .enumerate()
        .map(|(p, r)| r.ok_or_else(|| Error::Precondition(format!("player {p} left without a recommendation"))))
        .collect::<Result<Vec<usize>>>()?;
    Ok(RoundPlan {
        optimal_set: optimal_set.to_vec(),
        recommendations,
        charges,
        rewards,
        announced_tolls,
        deferred,
    })
}

/// Step 4: settles the round's payments against what players actually did.
///
/// Charges are collected and rewards paid only from players that followed
/// their recommendation. A moved player that sticks with its selfish arm pays
/// the announced toll on top of the penalty. Each deviator pays `penalty`; the
/// compliant player recommended to the deviator's arm is compensated up to its
/// reported mean of that arm, once per round.
#[allow(clippy::too_many_arguments)]
pub fn step4_verify(
    round: usize,
    final_actions: &[usize],
    plan: &RoundPlan,
    intents: &[usize],
    agg: &Aggregation,
    reports: &[BeliefState],
    penalty: f64,
    ledger: &mut Ledger,
) {
    let n = final_actions.len();
    let complies = |p: usize| final_actions[p] == plan.recommendations[p] && !agg.flagged[p];
    for c in &plan.charges {
        if complies(c.player) {
            ledger.record(round, c.player, LedgerKind::Charge, c.amount);
        }
    }
    for r in &plan.rewards {
        let own = intents[r.player];
        if final_actions[r.player] == own {
            if let Some(&toll) = plan.announced_tolls.get(&own) {
                ledger.record(round, r.player, LedgerKind::Charge, toll);
            }
        }
    }
    let deviators: Vec<usize> = (0..n).filter(|&p| !complies(p)).collect();
    for &p in &deviators {
        ledger.record(round, p, LedgerKind::Penalty, penalty);
    }
    for r in &plan.rewards {
        if complies(r.player) {
            ledger.record(round, r.player, LedgerKind::Reward, r.amount);
        }
    }
    let mut compensated = vec![false; n];
    for &d in &deviators {
        let arm = final_actions[d];
        let victim = (0..n).find(|&l| l != d && plan.recommendations[l] == arm && complies(l));
        if let Some(l) = victim {
            if !compensated[l] {
                compensated[l] = true;
                let amount = penalty.min(reported_mean(reports, agg, l, arm));
                ledger.record(round, l, LedgerKind::Compensation, amount);
            }
        }
    }
}

/// Per-player state a simulation carries between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerState {
    pub belief: BeliefState,
    pub previous_arm: Option<usize>,
}

impl PlayerState {
    pub fn new(player: usize, priors: Vec<f64>) -> Result<Self> {
        Ok(Self {
            belief: BeliefState::new(Owner::Player(player), priors)?,
            previous_arm: None,
        })
    }

    /// The arm this player would pick on its own.
    pub fn selfish_choice(&self, n_players: usize, rho: f64) -> usize {
        match self.previous_arm {
            None => crate::selfish::init_decide(&self.belief, n_players),
            Some(prev) => crate::selfish::decide(&self.belief, prev, n_players, rho),
        }
    }

    /// Updates the belief with this player's part of a resolved round.
    pub fn observe(&mut self, player: usize, outcome: &RoundOutcome) {
        let arm = outcome.choices[player];
        self.belief.update(arm, outcome.observation(player));
        self.previous_arm = Some(arm);
    }
}

/// Everything one CISP round produced.
#[derive(Debug, Clone)]
pub struct CispRound {
    pub outcome: RoundOutcome,
    pub plan: RoundPlan,
    pub intents: Vec<usize>,
    pub planner: BeliefState,
}

/// Runs steps 1 to 4, resolves the round with the final actions and updates
/// every player's belief.
#[allow(clippy::too_many_arguments)]
pub fn run_cisp_round(
    round: usize,
    players: &mut [PlayerState],
    env: &mut ArmEnvironment,
    ledger: &mut Ledger,
    adversary: Option<&mut Adversary>,
    rho: f64,
    penalty: f64,
) -> Result<CispRound> {
    let n = players.len();
    let k = env.n_arms();
    let intents: Vec<usize> = players.iter().map(|p| p.selfish_choice(n, rho)).collect();
    let adversary_player = adversary.as_ref().map(|a| a.config.player);
    let reports: Vec<BeliefState> = players
        .iter()
        .enumerate()
        .map(|(i, p)| match (&adversary, adversary_player) {
            (Some(a), Some(ap)) if ap == i => a.config.distort(&p.belief),
            _ => p.belief.clone(),
        })
        .collect();

    let agg = step1_aggregate(&reports, &intents, k)?;
    let optimal_set = select_arms(&agg.planner, n, rho)?;
    let informational = step2_informational(&intents, &optimal_set, &agg, &reports, rho);
    let plan = step3_payments(&intents, &optimal_set, &agg, &reports, &informational)?;

    let mut final_actions = plan.recommendations.clone();
    if let Some(adv) = adversary {
        let p = adv.config.player;
        if adv.deviates() {
            final_actions[p] = intents[p];
        }
    }
    step4_verify(round, &final_actions, &plan, &intents, &agg, &reports, penalty, ledger);

    let outcome = env.resolve_round(&final_actions)?;
    for (i, player) in players.iter_mut().enumerate() {
        player.observe(i, &outcome);
    }
    Ok(CispRound {
        outcome,
        plan,
        intents,
        planner: agg.planner,
    })
}

/// Net payment flow for each player from the ledger entries of one round:
/// positive when the player received money.
pub fn net_transfers(entries: &[LedgerEntry], n_players: usize) -> Vec<f64> {
    let mut net = vec![0.0; n_players];
    for e in entries {
        if e.player < n_players {
            if e.kind.is_income() {
                net[e.player] -= e.amount;
            } else {
                net[e.player] += e.amount;
            }
        }
    }
    net
}
