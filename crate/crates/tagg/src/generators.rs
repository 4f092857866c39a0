//! Constructors for the two example game families and the one-step embedding
//! of simultaneous-move action-graph games.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Decision, TaggGame, UtilityFunction};

/// Utility shape for tollbooth lanes, as a function of the same-lane count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TollboothShape {
    /// `-count` (default): strictly decreasing in congestion.
    NegCount,
    /// `-count^2`: congestion hurts superlinearly.
    NegCountSquared,
}

impl TollboothShape {
    fn value(self, count: usize) -> f64 {
        match self {
            TollboothShape::NegCount => -(count as f64),
            TollboothShape::NegCountSquared => -((count * count) as f64),
        }
    }
}

/// Cars arriving at a tollbooth in waves, each picking a lane after seeing
/// the standing per-lane counts.
#[derive(Clone, Debug, PartialEq)]
pub struct TollboothSpec {
    pub lanes: usize,
    pub waves: usize,
    pub cars_per_wave: usize,
    pub shape: TollboothShape,
}

impl TollboothSpec {
    pub fn new(lanes: usize, waves: usize, cars_per_wave: usize) -> Self {
        TollboothSpec {
            lanes,
            waves,
            cars_per_wave,
            shape: TollboothShape::NegCount,
        }
    }
}

/// Vendors picking spots along a linear beach, two per day; each vendor sees
/// prior counts only around its home location and is paid at the final day.
#[derive(Clone, Debug, PartialEq)]
pub struct IceCreamSpec {
    pub locations: usize,
    pub days: usize,
    /// Home location (1-based) per vendor; length `2 * days`.
    pub homes: Vec<usize>,
}

impl IceCreamSpec {
    pub fn with_homes(locations: usize, days: usize, homes: Vec<usize>) -> Self {
        IceCreamSpec { locations, days, homes }
    }

    /// Homes drawn uniformly with a named seed.
    pub fn random(locations: usize, days: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let homes = (0..2 * days).map(|_| rng.gen_range(1..=locations)).collect();
        IceCreamSpec { locations, days, homes }
    }
}

fn lane_id(i: usize) -> String {
    format!("L{}", i + 1)
}

fn loc_id(i: usize) -> String {
    format!("loc{}", i + 1)
}

/// Builds the tollbooth family: one action per lane, `cars_per_wave`
/// single-decision players per wave, full observation of standing counts,
/// payoff at the decision's own time, and per-lane utilities that depend only
/// on the same lane's count.
pub fn make_tollbooth(spec: &TollboothSpec) -> Result<TaggGame> {
    if spec.lanes == 0 || spec.waves == 0 || spec.cars_per_wave == 0 {
        return Err(Error::Internal(
            "tollbooth spec requires lanes, waves and cars_per_wave >= 1".into(),
        ));
    }
    let actions: Vec<String> = (0..spec.lanes).map(lane_id).collect();
    let mut decisions = Vec::new();
    for w in 1..=spec.waves {
        for c in 1..=spec.cars_per_wave {
            let player = (w - 1) * spec.cars_per_wave + c;
            decisions.push(Decision {
                id: format!("w{w}c{c}"),
                player,
                time: w,
                action_set: actions.clone(),
                payoff_times: vec![w],
                observations: actions.clone(),
            });
        }
    }
    let mut utilities = Vec::new();
    for a in &actions {
        for t in 1..=spec.waves {
            let max = spec.cars_per_wave * t;
            utilities.push(UtilityFunction {
                action: a.clone(),
                time: t,
                parents: vec![a.clone()],
                table: (0..=max).map(|c| spec.shape.value(c)).collect(),
            });
        }
    }
    Ok(TaggGame {
        num_players: spec.waves * spec.cars_per_wave,
        duration: spec.waves,
        actions,
        chance_vars: Vec::new(),
        decisions,
        utilities,
    })
}

/// Beach neighborhood: the location itself plus its path-graph neighbors,
/// ordered own-first.
fn neighborhood(loc: usize, locations: usize) -> Vec<usize> {
    let mut out = vec![loc];
    if loc > 1 {
        out.push(loc - 1);
    }
    if loc < locations {
        out.push(loc + 1);
    }
    out
}

/// Builds the ice-cream family: one action per beach location, two vendors
/// per day, observations limited to each vendor's home neighborhood, payoff
/// at the final day, and utilities that sum congestion over a location's
/// neighborhood.
pub fn make_icecream(spec: &IceCreamSpec) -> Result<TaggGame> {
    if spec.locations == 0 || spec.days == 0 {
        return Err(Error::Internal("ice-cream spec requires locations and days >= 1".into()));
    }
    if spec.homes.len() != 2 * spec.days {
        return Err(Error::Internal(format!(
            "expected {} homes, got {}",
            2 * spec.days,
            spec.homes.len()
        )));
    }
    if spec.homes.iter().any(|&h| h == 0 || h > spec.locations) {
        return Err(Error::Internal("homes must lie within 1..=locations".into()));
    }
    let actions: Vec<String> = (0..spec.locations).map(loc_id).collect();
    let t_final = spec.days;
    let mut decisions = Vec::new();
    for (i, &home) in spec.homes.iter().enumerate() {
        let player = i + 1;
        let day = i / 2 + 1;
        decisions.push(Decision {
            id: format!("v{player}"),
            player,
            time: day,
            action_set: actions.clone(),
            payoff_times: vec![t_final],
            observations: neighborhood(home, spec.locations)
                .into_iter()
                .map(|l| loc_id(l - 1))
                .collect(),
        });
    }
    let vendors = 2 * spec.days;
    let mut utilities = Vec::new();
    for loc in 1..=spec.locations {
        let parents: Vec<String> = neighborhood(loc, spec.locations)
            .into_iter()
            .map(|l| loc_id(l - 1))
            .collect();
        // every vendor can choose every location, so each parent count ranges
        // over 0..=vendors
        let ranges: Vec<usize> = parents.iter().map(|_| vendors + 1).collect();
        let cells: usize = ranges.iter().product();
        let mut table = Vec::with_capacity(cells);
        let mut digits = vec![0usize; ranges.len()];
        for _ in 0..cells {
            let total: usize = digits.iter().sum();
            table.push(-(total as f64));
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                if digits[d] < ranges[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        utilities.push(UtilityFunction {
            action: loc_id(loc - 1),
            time: t_final,
            parents,
            table,
        });
    }
    Ok(TaggGame {
        num_players: vendors,
        duration: spec.days,
        actions,
        chance_vars: Vec::new(),
        decisions,
        utilities,
    })
}

/// A simultaneous-move action-graph game: action nodes, per-player action
/// sets, a directed action graph, and per-action utility tables over the
/// counts on the action's graph neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct AggInput {
    pub actions: Vec<String>,
    pub action_sets: Vec<Vec<String>>,
    /// Graph neighbors per action, in table order. Include the action itself
    /// when its own count matters.
    pub neighbors: BTreeMap<String, Vec<String>>,
    /// Flat table per action over its neighbor count configurations (last
    /// neighbor fastest).
    pub utilities: BTreeMap<String, Vec<f64>>,
}

/// Embeds a simultaneous-move game as a single-step game: one unobserved
/// decision per player at time 1, payoff at time 1, utility parents given by
/// the action graph.
pub fn embed_agg(agg: &AggInput) -> Result<TaggGame> {
    let players = agg.action_sets.len();
    if players == 0 {
        return Err(Error::Internal("embedding requires at least one player".into()));
    }
    let eligible = |a: &str| {
        agg.action_sets
            .iter()
            .filter(|set| set.iter().any(|x| x == a))
            .count()
    };
    let mut utilities = Vec::new();
    for a in &agg.actions {
        let parents = agg.neighbors.get(a).cloned().unwrap_or_default();
        let table = agg
            .utilities
            .get(a)
            .cloned()
            .ok_or_else(|| Error::Internal(format!("no utility table for action `{a}`")))?;
        let cells: usize = parents.iter().map(|p| eligible(p) + 1).product();
        if table.len() != cells {
            return Err(Error::Internal(format!(
                "utility table for `{a}` has {} cells; its neighbor configuration space has {cells}",
                table.len()
            )));
        }
        utilities.push(UtilityFunction {
            action: a.clone(),
            time: 1,
            parents,
            table,
        });
    }
    let decisions = agg
        .action_sets
        .iter()
        .enumerate()
        .map(|(i, set)| Decision {
            id: format!("p{}", i + 1),
            player: i + 1,
            time: 1,
            action_set: set.clone(),
            payoff_times: vec![1],
            observations: Vec::new(),
        })
        .collect();
    let game = TaggGame {
        num_players: players,
        duration: 1,
        actions: agg.actions.clone(),
        chance_vars: Vec::new(),
        decisions,
        utilities,
    };
    game.ensure_valid()?;
    Ok(game)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tollbooth_example_counts() {
        let g = make_tollbooth(&TollboothSpec::new(3, 4, 5)).unwrap();
        assert_eq!(g.num_players, 20);
        assert_eq!(g.decisions.len(), 20);
        assert_eq!(g.utilities.len(), 12);
        for u in &g.utilities {
            assert_eq!(u.parents.len(), 1);
        }
        assert!(g.validate().is_valid());
    }

    #[test]
    fn tollbooth_degenerate_single_car() {
        let g = make_tollbooth(&TollboothSpec::new(1, 1, 1)).unwrap();
        assert!(g.validate().is_valid());
        assert_eq!(g.decisions.len(), 1);
    }

    #[test]
    fn tollbooth_table_cells_follow_the_closed_form() {
        // for fixed lanes and cars per wave, total utility cells over T waves
        // are sum_{t<=T} lanes * (cars*t + 1): bounded by lanes * T * players
        let lanes = 3;
        let cars = 5;
        for waves in 1..=6 {
            let g = make_tollbooth(&TollboothSpec::new(lanes, waves, cars)).unwrap();
            let cells = g.validate().stats.total_table_cells;
            let want: u64 = (1..=waves).map(|t| (lanes * (cars * t + 1)) as u64).sum();
            assert_eq!(cells, want);
            let players = (lanes * waves * cars) as u64; // lanes >= 1 factor keeps the bound loose
            assert!(cells <= 2 * (lanes as u64) * (waves as u64) * players.max(1));
        }
    }

    #[test]
    fn icecream_edge_locations_have_two_parents() {
        let g = make_icecream(&IceCreamSpec::with_homes(4, 1, vec![1, 4])).unwrap();
        for u in &g.utilities {
            let loc: usize = u.action.trim_start_matches("loc").parse().unwrap();
            let want = if loc == 1 || loc == 4 { 2 } else { 3 };
            assert_eq!(u.parents.len(), want, "location {loc}");
        }
        assert!(g.validate().is_valid());
    }

    #[test]
    fn icecream_day_one_game_is_simultaneous() {
        let g = make_icecream(&IceCreamSpec::with_homes(3, 1, vec![1, 2])).unwrap();
        for d in &g.decisions {
            assert_eq!(d.time, 1);
            let ctx = g.observation_contexts(&d.id).unwrap();
            assert_eq!(ctx.len(), 1, "nothing earlier to observe");
        }
    }

    #[test]
    fn icecream_random_homes_validate() {
        let g = make_icecream(&IceCreamSpec::random(4, 3, 42)).unwrap();
        let rep = g.validate();
        assert!(rep.is_valid(), "violations: {:?}", rep.violations);
        assert_eq!(g.decisions.len(), 6);
    }

    #[test]
    fn embed_rejects_incomplete_tables() {
        let mut neighbors = BTreeMap::new();
        neighbors.insert("a".to_string(), vec!["a".to_string()]);
        let mut utilities = BTreeMap::new();
        utilities.insert("a".to_string(), vec![0.0]); // needs 2 cells for 1 player
        let agg = AggInput {
            actions: vec!["a".into()],
            action_sets: vec![vec!["a".into()]],
            neighbors,
            utilities,
        };
        assert!(embed_agg(&agg).is_err());
    }

    #[test]
    fn embedded_congestion_game_matches_the_wave_generator() {
        // self-edge-only graph over two lanes, three players, negated counts:
        // the same game as a single tollbooth wave
        let actions = vec!["L1".to_string(), "L2".to_string()];
        let mut neighbors = BTreeMap::new();
        let mut utilities = BTreeMap::new();
        for a in &actions {
            neighbors.insert(a.clone(), vec![a.clone()]);
            utilities.insert(a.clone(), vec![0.0, -1.0, -2.0, -3.0]);
        }
        let agg = AggInput {
            actions: actions.clone(),
            action_sets: vec![actions.clone(), actions.clone(), actions.clone()],
            neighbors,
            utilities,
        };
        let embedded = embed_agg(&agg).unwrap();
        let reference = make_tollbooth(&TollboothSpec::new(2, 1, 3)).unwrap();
        let pe = crate::model::BehaviorProfile::uniform(&embedded);
        let pr = crate::model::BehaviorProfile::uniform(&reference);
        for player in 1..=3 {
            let a = crate::ops::expected_utility(&embedded, &pe, player, crate::ops::Method::Interface)
                .unwrap()
                .total;
            let b = crate::ops::expected_utility(&reference, &pr, player, crate::ops::Method::Interface)
                .unwrap()
                .total;
            assert!((a - b).abs() < 1e-9, "player {player}: {a} vs {b}");
        }
    }

    #[test]
    fn single_player_embedding_is_deterministic() {
        let mut neighbors = BTreeMap::new();
        neighbors.insert("a".to_string(), vec!["a".to_string()]);
        neighbors.insert("b".to_string(), vec!["b".to_string()]);
        let mut utilities = BTreeMap::new();
        utilities.insert("a".to_string(), vec![0.0, 2.5]);
        utilities.insert("b".to_string(), vec![0.0, -4.0]);
        let agg = AggInput {
            actions: vec!["a".into(), "b".into()],
            action_sets: vec![vec!["a".into(), "b".into()]],
            neighbors,
            utilities,
        };
        let g = embed_agg(&agg).unwrap();
        let mut p = crate::model::BehaviorProfile::uniform(&g);
        p.strategies.get_mut("p1").unwrap().default = vec![1.0, 0.0];
        let e = crate::ops::expected_utility(&g, &p, 1, crate::ops::Method::Interface)
            .unwrap()
            .total;
        assert!((e - 2.5).abs() < 1e-12);
    }

    #[test]
    fn embedded_game_is_single_step_and_unobserved() {
        let mut neighbors = BTreeMap::new();
        neighbors.insert("a".to_string(), vec!["a".to_string()]);
        neighbors.insert("b".to_string(), vec!["b".to_string()]);
        let mut utilities = BTreeMap::new();
        utilities.insert("a".to_string(), vec![0.0, -1.0, -2.0]);
        utilities.insert("b".to_string(), vec![0.0, -1.0, -2.0]);
        let agg = AggInput {
            actions: vec!["a".into(), "b".into()],
            action_sets: vec![vec!["a".into(), "b".into()], vec!["a".into(), "b".into()]],
            neighbors,
            utilities,
        };
        let g = embed_agg(&agg).unwrap();
        assert_eq!(g.duration, 1);
        for d in &g.decisions {
            assert!(d.observations.is_empty());
            assert_eq!(d.payoff_times, vec![1]);
        }
        assert!(g.validate().is_valid());
    }
}
