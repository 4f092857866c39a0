//! Player-level quantities: expected utility by any of the three inference
//! routes, single-decision best response, iterated best response, and regret.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::inference::{csi_expected_payoff, expected_real_value, variable_elimination};
use crate::model::{BehaviorProfile, ConfigValue, Configuration, DecisionStrategy, NodeKind, TaggGame};
use crate::net::{InducedNet, VarId};
use crate::transform::{causal_decomposition, markov_copies};

/// Which inference route computes an expectation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Variable elimination on the induced network as built.
    InducedVe,
    /// Variable elimination after the counting and one-step rewrites.
    TransformedVe,
    /// Forward interface filtering with per-action payoff decomposition.
    Interface,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::InducedVe, Method::TransformedVe, Method::Interface];

    pub fn name(self) -> &'static str {
        match self {
            Method::InducedVe => "induced",
            Method::TransformedVe => "transformed",
            Method::Interface => "interface",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Method> {
        match s {
            "induced" => Ok(Method::InducedVe),
            "transformed" => Ok(Method::TransformedVe),
            "interface" => Ok(Method::Interface),
            other => Err(Error::Internal(format!("unknown method `{other}`"))),
        }
    }
}

/// One per-(decision, payoff time) expectation.
#[derive(Clone, Debug, PartialEq)]
pub struct EuTerm {
    pub decision: String,
    pub time: usize,
    pub value: f64,
}

/// A player's expected utility, broken down by decision and payoff time;
/// the total sums the terms in (decision id, time) order.
#[derive(Clone, Debug, PartialEq)]
pub struct EuBreakdown {
    pub player: usize,
    pub terms: Vec<EuTerm>,
    pub total: f64,
}

fn transformed(net: InducedNet) -> Result<InducedNet> {
    Ok(markov_copies(&causal_decomposition(&net)?))
}

/// Expected payoff of one decision at one payoff time, with cell accounting.
pub fn expected_decision_payoff_with_stats(
    game: &TaggGame,
    profile: &BehaviorProfile,
    decision: &str,
    time: usize,
    method: Method,
    budget_cells: Option<u64>,
) -> Result<(f64, u64)> {
    let d = game
        .decision(decision)
        .ok_or_else(|| Error::UnknownId(decision.to_string()))?;
    if !d.payoff_times.contains(&time) {
        return Err(Error::NotAPayoffTime {
            decision: decision.to_string(),
            time,
        });
    }
    let net = InducedNet::build(game, profile)?;
    match method {
        Method::InducedVe => {
            let target = net.payoff_var(decision, time).unwrap();
            let query: BTreeSet<VarId> = [target].into_iter().collect();
            let out = variable_elimination(&net, &query, &BTreeMap::new(), None, budget_cells)?;
            Ok((expected_real_value(&net, &out.factor)?, out.peak_cells))
        }
        Method::TransformedVe => {
            let net = transformed(net)?;
            let target = net.payoff_var(decision, time).unwrap();
            let query: BTreeSet<VarId> = [target].into_iter().collect();
            let out = variable_elimination(&net, &query, &BTreeMap::new(), None, budget_cells)?;
            Ok((expected_real_value(&net, &out.factor)?, out.peak_cells))
        }
        Method::Interface => {
            let net = transformed(net)?;
            let target = net.payoff_var(decision, time).unwrap();
            let out = csi_expected_payoff(&net, target)?;
            if let Some(b) = budget_cells {
                if out.peak_cells > b {
                    return Err(Error::BudgetExceeded {
                        needed: out.peak_cells as u128,
                        budget: b,
                    });
                }
            }
            Ok((out.expected, out.peak_cells))
        }
    }
}

/// Expected payoff of one decision at one payoff time.
pub fn expected_decision_payoff(
    game: &TaggGame,
    profile: &BehaviorProfile,
    decision: &str,
    time: usize,
    method: Method,
) -> Result<f64> {
    expected_decision_payoff_with_stats(game, profile, decision, time, method, None).map(|(e, _)| e)
}

/// A player's expected utility: the sum over the player's decisions and their
/// payoff times.
pub fn expected_utility(
    game: &TaggGame,
    profile: &BehaviorProfile,
    player: usize,
    method: Method,
) -> Result<EuBreakdown> {
    expected_utility_with_budget(game, profile, player, method, None)
}

/// As [`expected_utility`], aborting early when any single computation would
/// hold more than `budget_cells` factor cells live.
pub fn expected_utility_with_budget(
    game: &TaggGame,
    profile: &BehaviorProfile,
    player: usize,
    method: Method,
    budget_cells: Option<u64>,
) -> Result<EuBreakdown> {
    if player == 0 || player > game.num_players {
        return Err(Error::UnknownPlayer(player));
    }
    let mut decisions = game.decisions_of(player);
    decisions.sort_by(|a, b| a.id.cmp(&b.id));
    let mut terms = Vec::new();
    for d in decisions {
        let mut times = d.payoff_times.clone();
        times.sort_unstable();
        times.dedup();
        for t in times {
            let (value, _) =
                expected_decision_payoff_with_stats(game, profile, &d.id, t, method, budget_cells)?;
            terms.push(EuTerm {
                decision: d.id.clone(),
                time: t,
                value,
            });
        }
    }
    let total = terms.iter().map(|t| t.value).sum();
    Ok(EuBreakdown { player, terms, total })
}

/// Options for best-response computation.
#[derive(Clone, Copy, Debug)]
pub struct BestResponseOptions {
    /// Upper bound on the number of observation contexts enumerated.
    pub context_budget: usize,
}

impl Default for BestResponseOptions {
    fn default() -> Self {
        BestResponseOptions { context_budget: 4096 }
    }
}

/// Network coordinates of one observation context on the rewritten network:
/// counts for observed actions, value indices for decisions and chance.
/// Observations at time zero are the constant zero and carry no coordinate.
fn context_coordinates(
    game: &TaggGame,
    net: &InducedNet,
    decision: &str,
    ctx: &Configuration,
) -> Result<Vec<(VarId, usize)>> {
    let d = game.decision(decision).unwrap();
    let mut out = Vec::new();
    for (node, val) in &ctx.values {
        match (game.node_kind(node), val) {
            (Some(NodeKind::Action), ConfigValue::Count(c)) => {
                if d.time >= 2 {
                    let v = net
                        .count_var(node, d.time - 1)
                        .ok_or_else(|| Error::UnknownId(node.clone()))?;
                    out.push((v, *c));
                }
            }
            (Some(NodeKind::Decision), ConfigValue::Symbol(a)) => {
                let od = game.decision(node).unwrap();
                let idx = od
                    .action_set
                    .iter()
                    .position(|x| x == a)
                    .ok_or_else(|| Error::UnknownId(a.clone()))?;
                out.push((net.lookup(node).unwrap(), idx));
            }
            (Some(NodeKind::Chance), ConfigValue::Symbol(s)) => {
                let x = game.chance(node).unwrap();
                let idx = x
                    .domain
                    .iter()
                    .position(|y| y == s)
                    .ok_or_else(|| Error::UnknownId(s.clone()))?;
                out.push((net.lookup(node).unwrap(), idx));
            }
            _ => return Err(Error::Internal(format!("malformed context entry for `{node}`"))),
        }
    }
    Ok(out)
}

/// Best response for a single-decision player: for every reachable
/// observation context, a point mass on the action maximizing the summed
/// conditional payoff expectations, ties broken by action id; unreachable
/// contexts fall back to a uniform default. No deterministic rule table for
/// the decision improves on the result against the fixed opponents.
pub fn best_response_single_decision(
    game: &TaggGame,
    profile: &BehaviorProfile,
    player: usize,
    opts: BestResponseOptions,
) -> Result<BehaviorProfile> {
    if player == 0 || player > game.num_players {
        return Err(Error::UnknownPlayer(player));
    }
    let mine = game.decisions_of(player);
    if mine.len() != 1 {
        return Err(Error::MultiDecisionPlayer {
            player,
            decisions: mine.len(),
        });
    }
    let d = mine[0].clone();
    let n_contexts = game.observation_context_count(&d.id)?;
    if n_contexts > opts.context_budget as u128 {
        return Err(Error::ContextBudget {
            decision: d.id.clone(),
            contexts: n_contexts,
            budget: opts.context_budget,
        });
    }
    let contexts = game.observation_contexts(&d.id)?;
    let k = d.action_set.len();
    let mut times = d.payoff_times.clone();
    times.sort_unstable();
    times.dedup();

    // one rewritten network per candidate action, with the decision forced
    let mut nets = Vec::with_capacity(k);
    for a in 0..k {
        let mut forced = vec![0.0; k];
        forced[a] = 1.0;
        let forced_profile = profile.with_strategy(
            &d.id,
            DecisionStrategy { default: forced, rules: Vec::new() },
        );
        nets.push(transformed(InducedNet::build(game, &forced_profile)?)?);
    }

    // per candidate action, one elimination whose query keeps the whole
    // observation set: slicing the joint at each context gives every
    // conditional expectation at once
    let mut score_tables: Vec<BTreeMap<Vec<(VarId, usize)>, f64>> = Vec::with_capacity(k);
    let mut mass_tables: Vec<BTreeMap<Vec<(VarId, usize)>, f64>> = Vec::with_capacity(k);
    for net in &nets {
        let mut scores: BTreeMap<Vec<(VarId, usize)>, f64> = BTreeMap::new();
        let mut masses: BTreeMap<Vec<(VarId, usize)>, f64> = BTreeMap::new();
        for ctx in &contexts {
            let key = context_coordinates(game, net, &d.id, ctx)?;
            scores.insert(key.clone(), 0.0);
            masses.insert(key, 0.0);
        }
        for &t in &times {
            let target = net.payoff_var(&d.id, t).unwrap();
            let mut query: BTreeSet<VarId> = [target].into_iter().collect();
            if let Some(first) = contexts.first() {
                for (v, _) in context_coordinates(game, net, &d.id, first)? {
                    query.insert(v);
                }
            }
            let joint = variable_elimination(net, &query, &BTreeMap::new(), None, None)?.factor;
            let udom = net.var(target).domain.clone();
            for ctx in &contexts {
                let key = context_coordinates(game, net, &d.id, ctx)?;
                let slice = joint.reduce(&key)?;
                let mass = slice.sum();
                *masses.get_mut(&key).unwrap() = mass;
                if mass > 0.0 {
                    let mut e = 0.0;
                    for (i, &p) in slice.table().iter().enumerate() {
                        e += udom.real(i).unwrap_or(0.0) * p;
                    }
                    *scores.get_mut(&key).unwrap() += e / mass;
                }
            }
        }
        score_tables.push(scores);
        mass_tables.push(masses);
    }

    let uniform = vec![1.0 / k as f64; k];
    let mut rules = Vec::new();
    for ctx in &contexts {
        let key = context_coordinates(game, &nets[0], &d.id, ctx)?;
        if mass_tables.iter().any(|m| m[&key] == 0.0) {
            continue; // the uniform default covers zero-probability contexts
        }
        let mut best: Option<(usize, f64)> = None;
        for a in 0..k {
            let score = score_tables[a][&key];
            let better = match best {
                None => true,
                Some((ba, bs)) => {
                    score > bs + 1e-12
                        || ((score - bs).abs() <= 1e-12 && d.action_set[a] < d.action_set[ba])
                }
            };
            if better {
                best = Some((a, score));
            }
        }
        let (a_star, _) = best.unwrap();
        let mut dist = vec![0.0; k];
        dist[a_star] = 1.0;
        rules.push(crate::model::StrategyRule {
            context: ctx.values.clone(),
            dist,
        });
    }
    Ok(profile.with_strategy(
        &d.id,
        DecisionStrategy {
            default: uniform,
            rules,
        },
    ))
}

#[derive(Clone, Debug)]
pub struct IbrOutcome {
    pub profile: BehaviorProfile,
    pub converged: bool,
    pub rounds: usize,
}

/// Iterated best response over single-decision players in id order. A
/// player's response is adopted only when it improves that player's expected
/// utility by more than `tol`; a full round without adoption is convergence.
/// Not guaranteed to converge, but a fixed point has per-player regret at
/// most `tol`.
pub fn iterated_best_response(
    game: &TaggGame,
    initial: &BehaviorProfile,
    max_rounds: usize,
    tol: f64,
) -> Result<IbrOutcome> {
    for player in 1..=game.num_players {
        let n = game.decisions_of(player).len();
        if n != 1 {
            return Err(Error::MultiDecisionPlayer {
                player,
                decisions: n,
            });
        }
    }
    let mut profile = initial.clone();
    for round in 1..=max_rounds {
        let mut any_adopted = false;
        for player in 1..=game.num_players {
            let current = expected_utility(game, &profile, player, Method::TransformedVe)?.total;
            let candidate =
                best_response_single_decision(game, &profile, player, BestResponseOptions::default())?;
            let improved = expected_utility(game, &candidate, player, Method::TransformedVe)?.total;
            if improved > current + tol {
                profile = candidate;
                any_adopted = true;
            }
        }
        if !any_adopted {
            return Ok(IbrOutcome {
                profile,
                converged: true,
                rounds: round,
            });
        }
    }
    Ok(IbrOutcome {
        profile,
        converged: false,
        rounds: max_rounds,
    })
}

/// Gain available to a player from unilaterally best-responding; nonnegative
/// up to tolerance, zero at a best response.
pub fn regret(game: &TaggGame, profile: &BehaviorProfile, player: usize) -> Result<f64> {
    let current = expected_utility(game, profile, player, Method::TransformedVe)?.total;
    let br = best_response_single_decision(game, profile, player, BestResponseOptions::default())?;
    let best = expected_utility(game, &br, player, Method::TransformedVe)?.total;
    Ok(best - current)
}
