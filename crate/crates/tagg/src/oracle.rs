//! Brute-force reference computations.
//!
//! These enumerate outcomes directly from the game rules (or from a network's
//! conditionals) without factors or elimination, and exist to cross-check the
//! inference engines. They are exponential and only suitable for small
//! inputs.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::generators::AggInput;
use crate::model::{BehaviorProfile, ConfigValue, NodeKind, TaggGame};
use crate::net::{Assignment, InducedNet, VarId};

/// Expected payoff per (decision, payoff time), by enumerating every play of
/// the game: chance draws and decision choices step by step, counts tallied
/// as the rules state.
pub fn playout_expected_payoffs(
    game: &TaggGame,
    profile: &BehaviorProfile,
) -> Result<BTreeMap<(String, usize), f64>> {
    game.ensure_valid()?;
    profile.ensure_valid(game)?;

    let mut acc: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for d in &game.decisions {
        for &t in &d.payoff_times {
            acc.insert((d.id.clone(), t), 0.0);
        }
    }

    struct State<'g> {
        profile: &'g BehaviorProfile,
        counts: Vec<usize>,
        chance: HashMap<String, usize>,
        chosen: HashMap<String, usize>,
    }

    // chance variables in dependency order within each time step
    let mut chance_order: Vec<usize> = (0..game.chance_vars.len()).collect();
    chance_order.sort_by_key(|&i| game.chance_vars[i].time);
    let mut placed: Vec<usize> = Vec::new();
    while placed.len() < chance_order.len() {
        let before = placed.len();
        for &i in &chance_order {
            if placed.contains(&i) {
                continue;
            }
            let ready = game.chance_vars[i].parents.iter().all(|p| {
                match game.node_kind(p) {
                    Some(NodeKind::Chance) => placed
                        .iter()
                        .any(|&j| game.chance_vars[j].id == *p),
                    _ => true,
                }
            });
            if ready {
                placed.push(i);
            }
        }
        if placed.len() == before {
            return Err(Error::Cyclic);
        }
    }
    // stable in (time, dependency) order
    placed.sort_by_key(|&i| game.chance_vars[i].time);
    let chance_at = |t: usize| -> Vec<usize> {
        placed
            .iter()
            .copied()
            .filter(|&i| game.chance_vars[i].time == t)
            .collect()
    };

    fn chance_row_index(game: &TaggGame, st: &State, xi: usize) -> usize {
        let x = &game.chance_vars[xi];
        let mut idx = 0usize;
        for p in &x.parents {
            let range = game.config_range(p, x.time).unwrap_or(1);
            let val = match game.node_kind(p) {
                Some(NodeKind::Action) => st.counts[game.action_index(p).unwrap()],
                Some(NodeKind::Chance) => st.chance[p],
                _ => 0,
            };
            idx = idx * range + val;
        }
        idx
    }

    #[allow(clippy::too_many_arguments)]
    fn run_chance(
        game: &TaggGame,
        st: &mut State,
        list: &[usize],
        pos: usize,
        p: f64,
        t: usize,
        chance_at: &dyn Fn(usize) -> Vec<usize>,
        acc: &mut BTreeMap<(String, usize), f64>,
    ) {
        if pos == list.len() {
            after_chance(game, st, p, t, chance_at, acc);
            return;
        }
        let xi = list[pos];
        let x = &game.chance_vars[xi];
        let row = chance_row_index(game, st, xi);
        let dist = x.cpt[row].clone();
        for (vi, &pr) in dist.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            st.chance.insert(x.id.clone(), vi);
            run_chance(game, st, list, pos + 1, p * pr, t, chance_at, acc);
        }
        st.chance.remove(&x.id);
    }

    fn after_chance(
        game: &TaggGame,
        st: &mut State,
        p: f64,
        t: usize,
        chance_at: &dyn Fn(usize) -> Vec<usize>,
        acc: &mut BTreeMap<(String, usize), f64>,
    ) {
        // utilities paid at t accrue to each decision made at or before t
        // whose payoff times include t
        for d in &game.decisions {
            if d.time <= t && d.payoff_times.contains(&t) {
                let a = &d.action_set[st.chosen[&d.id]];
                let val = match game.utility(a, t) {
                    Some(u) => {
                        let parent_values: Vec<usize> = u
                            .parents
                            .iter()
                            .map(|pn| match game.node_kind(pn) {
                                Some(NodeKind::Action) => st.counts[game.action_index(pn).unwrap()],
                                Some(NodeKind::Chance) => st.chance[pn],
                                _ => 0,
                            })
                            .collect();
                        game.utility_value(u, &parent_values)
                    }
                    None => 0.0,
                };
                *acc.get_mut(&(d.id.clone(), t)).unwrap() += p * val;
            }
        }
        if t < game.duration {
            run_step(game, st, p, t + 1, chance_at, acc);
        }
    }

    fn run_step(
        game: &TaggGame,
        st: &mut State,
        p: f64,
        t: usize,
        chance_at: &dyn Fn(usize) -> Vec<usize>,
        acc: &mut BTreeMap<(String, usize), f64>,
    ) {
        let movers: Vec<usize> = game
            .decisions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.time == t)
            .map(|(i, _)| i)
            .collect();
        branch_decisions(game, st, &movers, 0, p, t, chance_at, acc);
    }

    #[allow(clippy::too_many_arguments)]
    fn branch_decisions(
        game: &TaggGame,
        st: &mut State,
        movers: &[usize],
        pos: usize,
        p: f64,
        t: usize,
        chance_at: &dyn Fn(usize) -> Vec<usize>,
        acc: &mut BTreeMap<(String, usize), f64>,
    ) {
        if pos == movers.len() {
            // tally this step's choices into the standing counts
            let mut new_counts = st.counts.clone();
            for &i in movers {
                let d = &game.decisions[i];
                let a = &d.action_set[st.chosen[&d.id]];
                new_counts[game.action_index(a).unwrap()] += 1;
            }
            let saved = std::mem::replace(&mut st.counts, new_counts);
            let list = chance_at(t);
            run_chance(game, st, &list, 0, p, t, chance_at, acc);
            st.counts = saved;
            return;
        }
        let d = &game.decisions[movers[pos]];
        // observed configuration at t-1, from the running state
        let mut ctx = BTreeMap::new();
        for o in &d.observations {
            let val = match game.node_kind(o) {
                Some(NodeKind::Action) => ConfigValue::Count(st.counts[game.action_index(o).unwrap()]),
                Some(NodeKind::Chance) => {
                    ConfigValue::Symbol(game.chance(o).unwrap().domain[st.chance[o]].clone())
                }
                Some(NodeKind::Decision) => {
                    let od = game.decision(o).unwrap();
                    ConfigValue::Symbol(od.action_set[st.chosen[o]].clone())
                }
                None => ConfigValue::Count(0),
            };
            ctx.insert(o.clone(), val);
        }
        let dist = st
            .profile
            .distribution_in(&d.id, &ctx)
            .expect("validated profile")
            .to_vec();
        for (ai, &pr) in dist.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            st.chosen.insert(d.id.clone(), ai);
            branch_decisions(game, st, movers, pos + 1, p * pr, t, chance_at, acc);
        }
        st.chosen.remove(&d.id);
    }

    let mut st = State {
        profile,
        counts: vec![0; game.actions.len()],
        chance: HashMap::new(),
        chosen: HashMap::new(),
    };
    let list0 = chance_at(0);
    // time 0: counts are zero, chance variables with time 0 are drawn, then
    // play proceeds step by step
    fn run_t0(
        game: &TaggGame,
        st: &mut State,
        list: &[usize],
        pos: usize,
        p: f64,
        chance_at: &dyn Fn(usize) -> Vec<usize>,
        acc: &mut BTreeMap<(String, usize), f64>,
    ) {
        if pos == list.len() {
            if game.duration >= 1 {
                run_step(game, st, p, 1, chance_at, acc);
            }
            return;
        }
        let xi = list[pos];
        let x = &game.chance_vars[xi];
        let row = chance_row_index(game, st, xi);
        for (vi, &pr) in x.cpt[row].clone().iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            st.chance.insert(x.id.clone(), vi);
            run_t0(game, st, list, pos + 1, p * pr, chance_at, acc);
        }
        st.chance.remove(&x.id);
    }
    run_t0(game, &mut st, &list0, 0, 1.0, &chance_at, &mut acc);
    Ok(acc)
}

/// Expected value of one decision payoff by playout enumeration.
pub fn playout_expected_payoff(
    game: &TaggGame,
    profile: &BehaviorProfile,
    decision: &str,
    time: usize,
) -> Result<f64> {
    let all = playout_expected_payoffs(game, profile)?;
    all.get(&(decision.to_string(), time))
        .copied()
        .ok_or_else(|| Error::NotAPayoffTime {
            decision: decision.to_string(),
            time,
        })
}

/// Joint distribution over a subset of network variables by enumerating the
/// product of conditionals along a topological order.
pub fn net_joint(net: &InducedNet, over: &[VarId]) -> Result<HashMap<Vec<usize>, f64>> {
    let order = net.topo_order().ok_or(Error::Cyclic)?;
    let mut out: HashMap<Vec<usize>, f64> = HashMap::new();

    fn recurse(
        net: &InducedNet,
        order: &[VarId],
        pos: usize,
        assign: &mut Assignment,
        p: f64,
        over: &[VarId],
        out: &mut HashMap<Vec<usize>, f64>,
    ) -> Result<()> {
        if pos == order.len() {
            let key: Vec<usize> = over.iter().map(|v| assign[v]).collect();
            *out.entry(key).or_insert(0.0) += p;
            return Ok(());
        }
        let v = order[pos];
        let dist = net.cpd_distribution(v, assign)?;
        for (i, &pr) in dist.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            assign.insert(v, i);
            recurse(net, order, pos + 1, assign, p * pr, over, out)?;
        }
        assign.remove(&v);
        Ok(())
    }

    let mut assign = Assignment::new();
    recurse(net, &order, 0, &mut assign, 1.0, over, &mut out)?;
    Ok(out)
}

/// Expected payoff of one player in a simultaneous-move action-graph game by
/// full enumeration of joint action profiles under per-player mixed
/// strategies (indexed like `agg.action_sets`).
pub fn agg_expected_payoff(agg: &AggInput, mixed: &[Vec<f64>], player: usize) -> Result<f64> {
    let n = agg.action_sets.len();
    if player == 0 || player > n {
        return Err(Error::UnknownPlayer(player));
    }
    if mixed.len() != n {
        return Err(Error::Internal("one mixed strategy per player required".into()));
    }
    let mut total = 0.0;
    let mut choice = vec![0usize; n];
    loop {
        let mut p = 1.0;
        for (i, &c) in choice.iter().enumerate() {
            p *= mixed[i][c];
        }
        if p > 0.0 {
            // counts over all action nodes
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for (i, &c) in choice.iter().enumerate() {
                *counts.entry(agg.action_sets[i][c].as_str()).or_insert(0) += 1;
            }
            let mine = agg.action_sets[player - 1][choice[player - 1]].as_str();
            let neigh = agg.neighbors.get(mine).cloned().unwrap_or_default();
            let eligible = |a: &str| {
                agg.action_sets
                    .iter()
                    .filter(|set| set.iter().any(|x| x == a))
                    .count()
            };
            let mut idx = 0usize;
            for nb in &neigh {
                let range = eligible(nb) + 1;
                idx = idx * range + counts.get(nb.as_str()).copied().unwrap_or(0);
            }
            let table = &agg.utilities[mine];
            total += p * table[idx];
        }
        // odometer over joint pure profiles
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(total);
            }
            d -= 1;
            choice[d] += 1;
            if choice[d] < agg.action_sets[d].len() {
                break;
            }
            choice[d] = 0;
        }
    }
}
