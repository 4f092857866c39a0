#![allow(dead_code)]

//! Shared fixtures for the integration suites: seeded random games small
//! enough for exhaustive playout enumeration.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tagg::generators::AggInput;
use tagg::model::{ChanceVariable, Decision, TaggGame, UtilityFunction};

fn eligible(decisions: &[Decision], action: &str, time: usize) -> usize {
    decisions
        .iter()
        .filter(|d| d.time <= time && d.action_set.iter().any(|a| a == action))
        .count()
}

/// A seeded random game with at most 6 decisions, 3 actions, 2 chance
/// variables and duration 3; always valid, with a joint outcome space small
/// enough to enumerate.
pub fn random_small_game(seed: u64) -> TaggGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = rng.gen_range(1..=3usize);
    let n_actions = rng.gen_range(1..=3usize);
    let actions: Vec<String> = (0..n_actions).map(|i| format!("a{}", i + 1)).collect();
    let n_decisions = rng.gen_range(1..=6usize);

    let mut decisions = Vec::new();
    for i in 0..n_decisions {
        let time = rng.gen_range(1..=duration);
        let mut action_set: Vec<String> = actions
            .iter()
            .filter(|_| rng.gen_bool(0.6))
            .cloned()
            .collect();
        if action_set.is_empty() {
            action_set.push(actions[rng.gen_range(0..n_actions)].clone());
        }
        let mut payoff_times: Vec<usize> =
            (time..=duration).filter(|_| rng.gen_bool(0.5)).collect();
        if payoff_times.is_empty() {
            payoff_times.push(rng.gen_range(time..=duration));
        }
        decisions.push(Decision {
            id: format!("d{}", i + 1),
            player: i + 1,
            time,
            action_set,
            payoff_times,
            observations: Vec::new(),
        });
    }

    let n_chance = rng.gen_range(0..=2usize);
    let mut chance_vars: Vec<ChanceVariable> = Vec::new();
    for i in 0..n_chance {
        let time = rng.gen_range(0..=duration);
        let dom_size = rng.gen_range(2..=3usize);
        let domain: Vec<String> = (0..dom_size).map(|k| format!("x{}v{k}", i + 1)).collect();
        let mut parents: Vec<String> = Vec::new();
        if rng.gen_bool(0.5) {
            parents.push(actions[rng.gen_range(0..n_actions)].clone());
        }
        if let Some(prev) = chance_vars.last() {
            if prev.time <= time && rng.gen_bool(0.4) {
                parents.push(prev.id.clone());
            }
        }
        let rows: usize = parents
            .iter()
            .map(|p| match chance_vars.iter().find(|c| &c.id == p) {
                Some(x) => x.domain.len(),
                None => eligible(&decisions, p, time) + 1,
            })
            .product();
        let cpt = (0..rows)
            .map(|_| {
                let mut row: Vec<f64> = (0..dom_size).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = row.iter().sum();
                for x in row.iter_mut() {
                    *x /= s;
                }
                row
            })
            .collect();
        chance_vars.push(ChanceVariable {
            id: format!("x{}", i + 1),
            domain,
            parents,
            time,
            cpt,
        });
    }

    let skeletons = decisions.clone();
    for d in decisions.iter_mut() {
        let mut observations = Vec::new();
        for a in &actions {
            if rng.gen_bool(0.3) {
                observations.push(a.clone());
            }
        }
        for o in &skeletons {
            if o.time < d.time && rng.gen_bool(0.3) {
                observations.push(o.id.clone());
            }
        }
        for x in &chance_vars {
            if x.time < d.time && rng.gen_bool(0.4) {
                observations.push(x.id.clone());
            }
        }
        observations.truncate(3);
        d.observations = observations;
    }

    let mut referenced: Vec<(String, usize)> = Vec::new();
    for d in &decisions {
        for &t in &d.payoff_times {
            for a in &d.action_set {
                if !referenced.contains(&(a.clone(), t)) {
                    referenced.push((a.clone(), t));
                }
            }
        }
    }
    let mut utilities = Vec::new();
    for (a, t) in referenced {
        // some payoff-referenced utilities stay unspecified and default to 0
        if !rng.gen_bool(0.85) {
            continue;
        }
        let mut parents: Vec<String> = Vec::new();
        if rng.gen_bool(0.8) {
            parents.push(a.clone());
        }
        if rng.gen_bool(0.4) {
            let other = actions[rng.gen_range(0..n_actions)].clone();
            if !parents.contains(&other) {
                parents.push(other);
            }
        }
        for x in &chance_vars {
            if x.time <= t && parents.len() < 3 && rng.gen_bool(0.35) {
                parents.push(x.id.clone());
            }
        }
        let cells: usize = parents
            .iter()
            .map(|p| match chance_vars.iter().find(|c| &c.id == p) {
                Some(x) => x.domain.len(),
                None => eligible(&decisions, p, t) + 1,
            })
            .product();
        // quarter-integer values give occasional collisions in value domains
        let table = (0..cells)
            .map(|_| f64::from(rng.gen_range(-20..=20i32)) * 0.25)
            .collect();
        utilities.push(UtilityFunction { action: a, time: t, parents, table });
    }

    TaggGame {
        num_players: n_decisions,
        duration,
        actions,
        chance_vars,
        decisions,
        utilities,
    }
}

/// A seeded random game of duration 3..=5 whose observations deliberately
/// reach far back in time, forcing multi-step relay chains; still small
/// enough for exhaustive playout enumeration.
pub fn random_long_game(seed: u64) -> TaggGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = rng.gen_range(3..=5usize);
    let n_actions = rng.gen_range(1..=2usize);
    let actions: Vec<String> = (0..n_actions).map(|i| format!("a{}", i + 1)).collect();
    let n_decisions = rng.gen_range(2..=5usize);

    let mut decisions = Vec::new();
    for i in 0..n_decisions {
        // spread decisions toward the ends so observation spans stretch
        let time = if i == 0 { 1 } else { rng.gen_range(1..=duration) };
        let mut action_set: Vec<String> =
            actions.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
        if action_set.is_empty() {
            action_set.push(actions[0].clone());
        }
        let payoff_time = rng.gen_range(time..=duration);
        decisions.push(Decision {
            id: format!("d{}", i + 1),
            player: i + 1,
            time,
            action_set,
            payoff_times: vec![payoff_time, duration],
            observations: Vec::new(),
        });
    }
    for d in decisions.iter_mut() {
        d.payoff_times.sort_unstable();
        d.payoff_times.dedup();
    }

    let n_chance = rng.gen_range(1..=2usize);
    let mut chance_vars: Vec<ChanceVariable> = Vec::new();
    for i in 0..n_chance {
        let time = rng.gen_range(0..=1usize); // early, so consumers sit far away
        let domain: Vec<String> = (0..2).map(|k| format!("x{}v{k}", i + 1)).collect();
        let parents: Vec<String> = if rng.gen_bool(0.4) {
            vec![actions[rng.gen_range(0..n_actions)].clone()]
        } else {
            Vec::new()
        };
        let rows: usize = parents
            .iter()
            .map(|p| eligible(&decisions, p, time) + 1)
            .product();
        let cpt = (0..rows)
            .map(|_| {
                let a = rng.gen_range(0.1..0.9);
                vec![a, 1.0 - a]
            })
            .collect();
        chance_vars.push(ChanceVariable {
            id: format!("x{}", i + 1),
            domain,
            parents,
            time,
            cpt,
        });
    }

    let skeletons = decisions.clone();
    for d in decisions.iter_mut() {
        let mut observations = Vec::new();
        for o in &skeletons {
            if o.time < d.time && rng.gen_bool(0.6) {
                observations.push(o.id.clone());
            }
        }
        for x in &chance_vars {
            if x.time < d.time && rng.gen_bool(0.6) {
                observations.push(x.id.clone());
            }
        }
        if rng.gen_bool(0.4) {
            observations.push(actions[rng.gen_range(0..n_actions)].clone());
        }
        observations.truncate(3);
        d.observations = observations;
    }

    let mut referenced: Vec<(String, usize)> = Vec::new();
    for d in &decisions {
        for &t in &d.payoff_times {
            for a in &d.action_set {
                if !referenced.contains(&(a.clone(), t)) {
                    referenced.push((a.clone(), t));
                }
            }
        }
    }
    let mut utilities = Vec::new();
    for (a, t) in referenced {
        let mut parents = vec![a.clone()];
        // early chance parents force relays into the payoff step
        for x in &chance_vars {
            if x.time <= t && rng.gen_bool(0.5) {
                parents.push(x.id.clone());
            }
        }
        let cells: usize = parents
            .iter()
            .map(|p| match chance_vars.iter().find(|c| &c.id == p) {
                Some(x) => x.domain.len(),
                None => eligible(&decisions, p, t) + 1,
            })
            .product();
        let table = (0..cells)
            .map(|_| f64::from(rng.gen_range(-20..=20i32)) * 0.25)
            .collect();
        utilities.push(UtilityFunction { action: a, time: t, parents, table });
    }

    TaggGame {
        num_players: n_decisions,
        duration,
        actions,
        chance_vars,
        decisions,
        utilities,
    }
}

/// A seeded random profile that, unlike [`BehaviorProfile::random`], also
/// attaches listed rules to a random subset of each decision's observation
/// contexts.
pub fn random_profile_with_rules(game: &TaggGame, seed: u64) -> tagg::model::BehaviorProfile {
    use tagg::model::StrategyRule;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profile = tagg::model::BehaviorProfile::random(game, seed);
    for d in &game.decisions {
        if game.observation_context_count(&d.id).unwrap_or(u128::MAX) > 32 {
            continue;
        }
        let contexts = game.observation_contexts(&d.id).unwrap();
        let k = d.action_set.len();
        let strategy = profile.strategies.get_mut(&d.id).unwrap();
        for ctx in contexts {
            if !rng.gen_bool(0.5) {
                continue;
            }
            let mut dist: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = dist.iter().sum();
            for x in dist.iter_mut() {
                *x /= s;
            }
            strategy.rules.push(StrategyRule {
                context: ctx.values,
                dist,
            });
        }
    }
    profile
}

/// A seeded random simultaneous-move action-graph game with at most 4 players
/// and 3 actions, plus per-player mixed strategies.
pub fn random_agg(seed: u64) -> (AggInput, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_players = rng.gen_range(1..=4usize);
    let n_actions = rng.gen_range(2..=3usize);
    let actions: Vec<String> = (0..n_actions).map(|i| format!("a{}", i + 1)).collect();
    let mut action_sets = Vec::new();
    for _ in 0..n_players {
        let mut set: Vec<String> = actions
            .iter()
            .filter(|_| rng.gen_bool(0.7))
            .cloned()
            .collect();
        if set.is_empty() {
            set.push(actions[rng.gen_range(0..n_actions)].clone());
        }
        action_sets.push(set);
    }
    let eligible = |a: &str| {
        action_sets
            .iter()
            .filter(|set| set.iter().any(|x| x == a))
            .count()
    };
    let mut neighbors = BTreeMap::new();
    let mut utilities = BTreeMap::new();
    for a in &actions {
        let mut neigh: Vec<String> = Vec::new();
        if rng.gen_bool(0.8) {
            neigh.push(a.clone()); // self edge: own congestion matters
        }
        for b in &actions {
            if b != a && rng.gen_bool(0.4) {
                neigh.push(b.clone());
            }
        }
        let cells: usize = neigh.iter().map(|n| eligible(n) + 1).product();
        let table: Vec<f64> = (0..cells)
            .map(|_| f64::from(rng.gen_range(-20..=20i32)) * 0.25)
            .collect();
        neighbors.insert(a.clone(), neigh);
        utilities.insert(a.clone(), table);
    }
    let mixed = action_sets
        .iter()
        .map(|set| {
            let mut w: Vec<f64> = (0..set.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            for x in w.iter_mut() {
                *x /= s;
            }
            w
        })
        .collect();
    (
        AggInput {
            actions,
            action_sets,
            neighbors,
            utilities,
        },
        mixed,
    )
}
