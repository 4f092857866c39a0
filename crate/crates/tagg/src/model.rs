//! Game model: actions, chance variables, decisions, utility functions and
//! behavior strategy profiles, together with their validity checks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability rows must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// A chance variable: a finite random quantity instantiated once at a fixed
/// time, conditioned on earlier chance variables and on action counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChanceVariable {
    pub id: String,
    pub domain: Vec<String>,
    pub parents: Vec<String>,
    pub time: usize,
    /// One row per parent configuration, in lexicographic order of the parent
    /// list with the last parent varying fastest; each row is a distribution
    /// over `domain`.
    pub cpt: Vec<Vec<f64>>,
}

/// A decision: one player's simultaneous choice of an action node at a fixed
/// time, informed by the configuration of its observation set one step prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub player: usize,
    pub time: usize,
    pub action_set: Vec<String>,
    pub payoff_times: Vec<usize>,
    pub observations: Vec<String>,
}

/// The utility paid at `time` to each decision that picked `action`, as a
/// function of the configuration over `parents` at that time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityFunction {
    pub action: String,
    pub time: usize,
    pub parents: Vec<String>,
    /// Flat table over parent configurations, last parent varying fastest.
    pub table: Vec<f64>,
}

/// A temporal action-graph game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggGame {
    #[serde(rename = "players")]
    pub num_players: usize,
    pub duration: usize,
    pub actions: Vec<String>,
    #[serde(default)]
    pub chance_vars: Vec<ChanceVariable>,
    pub decisions: Vec<Decision>,
    #[serde(default)]
    pub utilities: Vec<UtilityFunction>,
}

/// A value assigned to one node inside a [`Configuration`]: an integer count
/// for action nodes, a symbolic value for decisions and chance variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigValue {
    Count(usize),
    Symbol(String),
}

/// A joint value assignment at a time point to a set of nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub time: usize,
    pub values: BTreeMap<String, ConfigValue>,
}

/// One listed rule of a behavior strategy: a full observation configuration
/// and the distribution played there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRule {
    pub context: BTreeMap<String, ConfigValue>,
    pub dist: Vec<f64>,
}

/// A behavior strategy at one decision: sparse rules plus a mandatory default
/// distribution used for configurations with no listed rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionStrategy {
    pub default: Vec<f64>,
    #[serde(default)]
    pub rules: Vec<StrategyRule>,
}

/// A behavior strategy profile: one strategy per decision.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub strategies: BTreeMap<String, DecisionStrategy>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Action,
    Chance,
    Decision,
}

/// One violated invariant, attributed to the offending element.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Size accounting alongside validation results: the quantities whose bounds
/// keep the representation polynomial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SizeStats {
    pub max_chance_parents: usize,
    pub max_utility_parents: usize,
    pub total_table_cells: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub stats: SizeStats,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, subject: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            subject: subject.to_string(),
            message: message.into(),
        });
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl TaggGame {
    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == id)
    }

    pub fn decision(&self, id: &str) -> Option<&Decision> {
        self.decisions.iter().find(|d| d.id == id)
    }

    pub fn chance(&self, id: &str) -> Option<&ChanceVariable> {
        self.chance_vars.iter().find(|x| x.id == id)
    }

    pub fn utility(&self, action: &str, time: usize) -> Option<&UtilityFunction> {
        self.utilities
            .iter()
            .find(|u| u.action == action && u.time == time)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        if self.actions.iter().any(|a| a == id) {
            Some(NodeKind::Action)
        } else if self.chance_vars.iter().any(|x| x.id == id) {
            Some(NodeKind::Chance)
        } else if self.decisions.iter().any(|d| d.id == id) {
            Some(NodeKind::Decision)
        } else {
            None
        }
    }

    /// Decisions belonging to a player, in declaration order.
    pub fn decisions_of(&self, player: usize) -> Vec<&Decision> {
        self.decisions.iter().filter(|d| d.player == player).collect()
    }

    /// Number of decisions at or before `time` that can choose `action`; the
    /// count on `action` at `time` can never exceed this.
    pub fn eligible(&self, action: &str, time: usize) -> usize {
        self.decisions
            .iter()
            .filter(|d| d.time <= time && d.action_set.iter().any(|a| a == action))
            .count()
    }

    /// Domain size of node `id` inside a configuration at `time`: a tightened
    /// count range for actions, the value-set size otherwise.
    pub fn config_range(&self, id: &str, time: usize) -> Option<usize> {
        match self.node_kind(id)? {
            NodeKind::Action => Some(self.eligible(id, time) + 1),
            NodeKind::Chance => self.chance(id).map(|x| x.domain.len()),
            NodeKind::Decision => self.decision(id).map(|d| d.action_set.len()),
        }
    }

    /// Every configuration at time `t(D)-1` over the observation set of `d`,
    /// in lexicographic order with the last observed node varying fastest.
    pub fn observation_contexts(&self, d: &str) -> Result<Vec<Configuration>> {
        let dec = self.decision(d).ok_or_else(|| Error::UnknownId(d.to_string()))?;
        let time = dec.time - 1;
        let ranges: Vec<usize> = dec
            .observations
            .iter()
            .map(|o| self.config_range(o, time).unwrap_or(1))
            .collect();
        let total: u128 = ranges.iter().fold(1u128, |n, &r| n.saturating_mul(r as u128));
        if total > 1_000_000_000 {
            return Err(Error::ContextBudget {
                decision: d.to_string(),
                contexts: total,
                budget: 1_000_000_000,
            });
        }
        let mut out = Vec::with_capacity(total as usize);
        let mut digits = vec![0usize; ranges.len()];
        loop {
            let mut values = BTreeMap::new();
            for (i, o) in dec.observations.iter().enumerate() {
                let val = match self.node_kind(o) {
                    Some(NodeKind::Action) => ConfigValue::Count(digits[i]),
                    Some(NodeKind::Chance) => {
                        ConfigValue::Symbol(self.chance(o).unwrap().domain[digits[i]].clone())
                    }
                    Some(NodeKind::Decision) => {
                        ConfigValue::Symbol(self.decision(o).unwrap().action_set[digits[i]].clone())
                    }
                    None => ConfigValue::Count(0),
                };
                values.insert(o.clone(), val);
            }
            out.push(Configuration { time, values });
            let mut d = ranges.len();
            loop {
                if d == 0 {
                    return Ok(out);
                }
                d -= 1;
                digits[d] += 1;
                if digits[d] < ranges[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
    }

    /// The number of observation configurations of `d` without enumerating
    /// them.
    pub fn observation_context_count(&self, d: &str) -> Result<u128> {
        let dec = self.decision(d).ok_or_else(|| Error::UnknownId(d.to_string()))?;
        let time = dec.time - 1;
        Ok(dec
            .observations
            .iter()
            .map(|o| self.config_range(o, time).unwrap_or(1) as u128)
            .fold(1u128, |n, r| n.saturating_mul(r)))
    }

    /// Looks up a utility value given index-coded parent values (aligned with
    /// the utility's parent list; action parents coded by count).
    pub fn utility_value(&self, u: &UtilityFunction, parent_values: &[usize]) -> f64 {
        let mut idx = 0usize;
        for (i, p) in u.parents.iter().enumerate() {
            let range = self.config_range(p, u.time).unwrap_or(1);
            idx = idx * range + parent_values[i];
        }
        u.table.get(idx).copied().unwrap_or(0.0)
    }

    /// Checks every model invariant and reports violations with the offending
    /// element ids; also accounts for representation size.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();

        if self.num_players == 0 {
            rep.push("game", "players must be at least 1");
        }
        if self.duration == 0 {
            rep.push("game", "duration must be at least 1");
        }

        // id uniqueness across all node namespaces
        let mut seen: HashSet<&str> = HashSet::new();
        let all_ids = self
            .actions
            .iter()
            .map(String::as_str)
            .chain(self.chance_vars.iter().map(|x| x.id.as_str()))
            .chain(self.decisions.iter().map(|d| d.id.as_str()));
        for id in all_ids {
            if !valid_id(id) {
                rep.push(id, "ids must be nonempty and use only [A-Za-z0-9_.-]");
            }
            if !seen.insert(id) {
                rep.push(id, "duplicate id");
            }
        }

        // chance variables
        let chance_index: HashMap<&str, usize> = self
            .chance_vars
            .iter()
            .enumerate()
            .map(|(i, x)| (x.id.as_str(), i))
            .collect();
        for x in &self.chance_vars {
            if x.domain.is_empty() {
                rep.push(&x.id, "chance domain must be nonempty");
            }
            let mut dom_seen = HashSet::new();
            for v in &x.domain {
                if !dom_seen.insert(v.as_str()) {
                    rep.push(&x.id, format!("duplicate domain value `{v}`"));
                }
            }
            if x.time > self.duration {
                rep.push(&x.id, "instantiation time past the game duration");
            }
            let mut parent_seen = HashSet::new();
            for p in &x.parents {
                if !parent_seen.insert(p.as_str()) {
                    rep.push(&x.id, format!("duplicate parent `{p}`"));
                }
                match self.node_kind(p) {
                    Some(NodeKind::Action) => {}
                    Some(NodeKind::Chance) => {
                        let px = self.chance(p).unwrap();
                        if px.time > x.time {
                            rep.push(&x.id, format!("parent `{p}` instantiated after child"));
                        }
                    }
                    Some(NodeKind::Decision) => {
                        rep.push(&x.id, format!("parent `{p}` is a decision; chance parents must be actions or chance variables"));
                    }
                    None => rep.push(&x.id, format!("unknown parent `{p}`")),
                }
            }
            // CPT shape: total over the tightened configuration space
            let rows: usize = x
                .parents
                .iter()
                .map(|p| self.config_range(p, x.time).unwrap_or(1))
                .product();
            if x.cpt.len() != rows {
                rep.push(
                    &x.id,
                    format!("cpt has {} rows, configuration space has {rows}", x.cpt.len()),
                );
            }
            for (r, row) in x.cpt.iter().enumerate() {
                if row.len() != x.domain.len() {
                    rep.push(&x.id, format!("cpt row {r} has wrong length"));
                    continue;
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    rep.push(&x.id, format!("cpt row {r} has a negative or non-finite entry"));
                    continue;
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > PROB_TOL {
                    rep.push(&x.id, format!("cpt row {r} sums to {s}, not 1"));
                }
            }
        }

        // acyclicity of the chance graph
        if !chance_index.is_empty() {
            let n = self.chance_vars.len();
            let mut indeg = vec![0usize; n];
            let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (i, x) in self.chance_vars.iter().enumerate() {
                for p in &x.parents {
                    if let Some(&j) = chance_index.get(p.as_str()) {
                        children[j].push(i);
                        indeg[i] += 1;
                    }
                }
            }
            let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
            let mut done = 0;
            while let Some(i) = queue.pop() {
                done += 1;
                for &c in &children[i] {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        queue.push(c);
                    }
                }
            }
            if done != n {
                rep.push("game", "chance-variable graph has a cycle");
            }
        }

        // decisions
        let mut player_times: HashSet<(usize, usize)> = HashSet::new();
        for d in &self.decisions {
            if d.player == 0 || d.player > self.num_players {
                rep.push(&d.id, format!("player {} out of range 1..{}", d.player, self.num_players));
            }
            if d.time == 0 || d.time > self.duration {
                rep.push(&d.id, "decision time out of range");
            }
            if !player_times.insert((d.player, d.time)) {
                rep.push(&d.id, format!("player {} already has a decision at time {}", d.player, d.time));
            }
            if d.action_set.is_empty() {
                rep.push(&d.id, "action set must be nonempty");
            }
            let mut aset = HashSet::new();
            for a in &d.action_set {
                if self.action_index(a).is_none() {
                    rep.push(&d.id, format!("unknown action `{a}` in action set"));
                }
                if !aset.insert(a.as_str()) {
                    rep.push(&d.id, format!("duplicate action `{a}` in action set"));
                }
            }
            if d.payoff_times.is_empty() {
                rep.push(&d.id, "payoff times must be nonempty");
            }
            for &t in &d.payoff_times {
                if t < d.time {
                    rep.push(&d.id, format!("payoff time {t} before the decision time"));
                }
                if t > self.duration {
                    rep.push(&d.id, format!("payoff time {t} past the game duration"));
                }
            }
            let mut oseen = HashSet::new();
            for o in &d.observations {
                if !oseen.insert(o.as_str()) {
                    rep.push(&d.id, format!("duplicate observation `{o}`"));
                }
                match self.node_kind(o) {
                    Some(NodeKind::Action) => {}
                    Some(NodeKind::Chance) => {
                        if self.chance(o).unwrap().time >= d.time {
                            rep.push(&d.id, format!("observed chance variable `{o}` not earlier"));
                        }
                    }
                    Some(NodeKind::Decision) => {
                        if self.decision(o).unwrap().time >= d.time {
                            rep.push(&d.id, format!("observed decision `{o}` not earlier"));
                        }
                    }
                    None => rep.push(&d.id, format!("unknown observation `{o}`")),
                }
            }
        }

        // utility functions
        let mut known: HashSet<(&str, usize)> = HashSet::new();
        for u in &self.utilities {
            let subject = format!("U[{}]@{}", u.action, u.time);
            if self.action_index(&u.action).is_none() {
                rep.push(&subject, format!("unknown action `{}`", u.action));
            }
            if u.time == 0 || u.time > self.duration {
                rep.push(&subject, "utility time out of range");
            }
            if !known.insert((u.action.as_str(), u.time)) {
                rep.push(&subject, "duplicate utility function");
            }
            let mut pseen = HashSet::new();
            for p in &u.parents {
                if !pseen.insert(p.as_str()) {
                    rep.push(&subject, format!("duplicate parent `{p}`"));
                }
                match self.node_kind(p) {
                    Some(NodeKind::Action) => {}
                    Some(NodeKind::Chance) => {
                        if self.chance(p).unwrap().time > u.time {
                            rep.push(&subject, format!("chance parent `{p}` instantiated after the utility time"));
                        }
                    }
                    Some(NodeKind::Decision) => {
                        rep.push(&subject, format!("parent `{p}` is a decision; utility parents must be actions or chance variables"));
                    }
                    None => rep.push(&subject, format!("unknown parent `{p}`")),
                }
            }
            let cells: usize = u
                .parents
                .iter()
                .map(|p| self.config_range(p, u.time).unwrap_or(1))
                .product();
            if u.table.len() != cells {
                rep.push(
                    &subject,
                    format!("table has {} cells, configuration space has {cells}", u.table.len()),
                );
            }
            if u.table.iter().any(|v| !v.is_finite()) {
                rep.push(&subject, "table has a non-finite entry");
            }
        }

        rep.stats = SizeStats {
            max_chance_parents: self.chance_vars.iter().map(|x| x.parents.len()).max().unwrap_or(0),
            max_utility_parents: self.utilities.iter().map(|u| u.parents.len()).max().unwrap_or(0),
            total_table_cells: self
                .chance_vars
                .iter()
                .map(|x| x.cpt.iter().map(|r| r.len() as u64).sum::<u64>())
                .sum::<u64>()
                + self.utilities.iter().map(|u| u.table.len() as u64).sum::<u64>(),
        };
        rep
    }

    /// Validates and converts the report into an error when invalid.
    pub fn ensure_valid(&self) -> Result<()> {
        let rep = self.validate();
        if rep.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidGame {
                count: rep.violations.len(),
                first: rep.violations[0].to_string(),
            })
        }
    }
}

impl BehaviorProfile {
    /// The profile whose every default distribution is uniform over the
    /// decision's action set, with no listed rules.
    pub fn uniform(game: &TaggGame) -> Self {
        let strategies = game
            .decisions
            .iter()
            .map(|d| {
                let k = d.action_set.len().max(1);
                (
                    d.id.clone(),
                    DecisionStrategy {
                        default: vec![1.0 / k as f64; k],
                        rules: Vec::new(),
                    },
                )
            })
            .collect();
        BehaviorProfile { strategies }
    }

    /// A seeded random profile: each default distribution is drawn from a
    /// flat Dirichlet over the decision's action set; no listed rules.
    pub fn random(game: &TaggGame, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strategies = game
            .decisions
            .iter()
            .map(|d| {
                let k = d.action_set.len().max(1);
                // flat Dirichlet via normalized unit exponentials
                let mut w: Vec<f64> = (0..k)
                    .map(|_| {
                        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                        -u.ln()
                    })
                    .collect();
                let s: f64 = w.iter().sum();
                for x in w.iter_mut() {
                    *x /= s;
                }
                (d.id.clone(), DecisionStrategy { default: w, rules: Vec::new() })
            })
            .collect();
        BehaviorProfile { strategies }
    }

    pub fn strategy(&self, decision: &str) -> Option<&DecisionStrategy> {
        self.strategies.get(decision)
    }

    /// Replaces the strategy for one decision, returning the new profile.
    pub fn with_strategy(&self, decision: &str, strategy: DecisionStrategy) -> Self {
        let mut out = self.clone();
        out.strategies.insert(decision.to_string(), strategy);
        out
    }

    /// The distribution played at `decision` under the observed context
    /// values (a full configuration over its observation set).
    pub fn distribution_in(
        &self,
        decision: &str,
        context: &BTreeMap<String, ConfigValue>,
    ) -> Option<&[f64]> {
        let s = self.strategies.get(decision)?;
        for rule in &s.rules {
            if &rule.context == context {
                return Some(&rule.dist);
            }
        }
        Some(&s.default)
    }

    /// Checks distributions for normalization and support, and rule contexts
    /// against the observation context space.
    pub fn validate(&self, game: &TaggGame) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let mut rule_cells = 0u64;

        for d in &game.decisions {
            match self.strategies.get(&d.id) {
                None => rep.push(&d.id, "no strategy for this decision"),
                Some(s) => {
                    check_dist(&mut rep, &d.id, "default", &s.default, d.action_set.len());
                    rule_cells += s.default.len() as u64;
                    let mut seen_ctx: Vec<&BTreeMap<String, ConfigValue>> = Vec::new();
                    for (i, rule) in s.rules.iter().enumerate() {
                        rule_cells += rule.dist.len() as u64;
                        check_dist(&mut rep, &d.id, &format!("rule {i}"), &rule.dist, d.action_set.len());
                        if seen_ctx.iter().any(|c| **c == rule.context) {
                            rep.push(&d.id, format!("rule {i} repeats an earlier context"));
                        }
                        seen_ctx.push(&rule.context);
                        let obs: BTreeSet<&str> = d.observations.iter().map(String::as_str).collect();
                        let keys: BTreeSet<&str> = rule.context.keys().map(String::as_str).collect();
                        if keys != obs {
                            rep.push(
                                &d.id,
                                format!("rule {i} context is keyed outside the observation set"),
                            );
                            continue;
                        }
                        for (node, val) in &rule.context {
                            let ok = match (game.node_kind(node), val) {
                                (Some(NodeKind::Action), ConfigValue::Count(c)) => {
                                    *c < game.config_range(node, d.time - 1).unwrap_or(1)
                                }
                                (Some(NodeKind::Chance), ConfigValue::Symbol(s)) => {
                                    game.chance(node).is_some_and(|x| x.domain.contains(s))
                                }
                                (Some(NodeKind::Decision), ConfigValue::Symbol(s)) => game
                                    .decision(node)
                                    .is_some_and(|o| o.action_set.contains(s)),
                                _ => false,
                            };
                            if !ok {
                                rep.push(
                                    &d.id,
                                    format!("rule {i} assigns `{node}` a value outside its context range"),
                                );
                            }
                        }
                    }
                }
            }
        }
        for id in self.strategies.keys() {
            if game.decision(id).is_none() {
                rep.push(id, "strategy for an unknown decision");
            }
        }
        rep.stats.total_table_cells = rule_cells;
        rep
    }

    pub fn ensure_valid(&self, game: &TaggGame) -> Result<()> {
        let rep = self.validate(game);
        if rep.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidProfile(rep.violations[0].to_string()))
        }
    }
}

fn check_dist(rep: &mut ValidationReport, subject: &str, what: &str, dist: &[f64], want_len: usize) {
    if dist.len() != want_len {
        rep.push(subject, format!("{what} distribution has length {}, expected {want_len}", dist.len()));
        return;
    }
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        rep.push(subject, format!("{what} distribution has a negative or non-finite entry"));
        return;
    }
    let s: f64 = dist.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        rep.push(subject, format!("{what} distribution sums to {s}, not 1"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_tollbooth, TollboothSpec};

    fn tiny_game() -> TaggGame {
        // two lanes, one decision per wave over two waves
        TaggGame {
            num_players: 2,
            duration: 2,
            actions: vec!["L1".into(), "L2".into()],
            chance_vars: vec![],
            decisions: vec![
                Decision {
                    id: "d1".into(),
                    player: 1,
                    time: 1,
                    action_set: vec!["L1".into(), "L2".into()],
                    payoff_times: vec![1],
                    observations: vec![],
                },
                Decision {
                    id: "d2".into(),
                    player: 2,
                    time: 2,
                    action_set: vec!["L1".into(), "L2".into()],
                    payoff_times: vec![2],
                    observations: vec!["L1".into(), "L2".into()],
                },
            ],
            utilities: vec![
                UtilityFunction {
                    action: "L1".into(),
                    time: 1,
                    parents: vec!["L1".into()],
                    table: vec![0.0, -1.0],
                },
                UtilityFunction {
                    action: "L2".into(),
                    time: 1,
                    parents: vec!["L2".into()],
                    table: vec![0.0, -1.0],
                },
                UtilityFunction {
                    action: "L1".into(),
                    time: 2,
                    parents: vec!["L1".into()],
                    table: vec![0.0, -1.0, -2.0],
                },
                UtilityFunction {
                    action: "L2".into(),
                    time: 2,
                    parents: vec!["L2".into()],
                    table: vec![0.0, -1.0, -2.0],
                },
            ],
        }
    }

    #[test]
    fn tollbooth_is_valid_with_unit_utility_parents() {
        let g = make_tollbooth(&TollboothSpec::new(3, 4, 5)).unwrap();
        let rep = g.validate();
        assert!(rep.is_valid(), "violations: {:?}", rep.violations);
        assert_eq!(rep.stats.max_utility_parents, 1);
    }

    #[test]
    fn observed_decision_not_earlier_is_reported() {
        let mut g = tiny_game();
        g.decisions.push(Decision {
            id: "d3".into(),
            player: 1,
            time: 2,
            action_set: vec!["L1".into()],
            payoff_times: vec![2],
            observations: vec![],
        });
        // d2 observing d3 at the same time step violates the ordering rule
        g.decisions[1].observations.push("d3".into());
        let rep = g.validate();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.subject == "d2" && v.message.contains("observed decision `d3` not earlier")));
    }

    #[test]
    fn chance_parent_after_child_is_reported() {
        let mut g = tiny_game();
        g.chance_vars = vec![
            ChanceVariable {
                id: "X".into(),
                domain: vec!["a".into(), "b".into()],
                parents: vec!["Y".into()],
                time: 0,
                cpt: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            },
            ChanceVariable {
                id: "Y".into(),
                domain: vec!["a".into(), "b".into()],
                parents: vec![],
                time: 1,
                cpt: vec![vec![0.5, 0.5]],
            },
        ];
        let rep = g.validate();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.subject == "X" && v.message.contains("instantiated after child")));
    }

    #[test]
    fn validation_is_pure_and_repeatable() {
        let g = tiny_game();
        assert_eq!(g.validate(), g.validate());
    }

    #[test]
    fn each_decision_belongs_to_one_player_slot() {
        let g = make_tollbooth(&TollboothSpec::new(2, 2, 2)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for d in &g.decisions {
            assert!(seen.insert((d.player, d.time)));
        }
        // every decision appears in exactly one player's list
        let total: usize = (1..=g.num_players).map(|p| g.decisions_of(p).len()).sum();
        assert_eq!(total, g.decisions.len());
    }

    #[test]
    fn contexts_empty_observation_set() {
        let g = tiny_game();
        let ctx = g.observation_contexts("d1").unwrap();
        assert_eq!(ctx.len(), 1);
        assert!(ctx[0].values.is_empty());
        assert_eq!(ctx[0].time, 0);
    }

    #[test]
    fn contexts_use_tightened_count_ranges() {
        // three wave-1 cars able to choose each lane; a wave-2 observer of one
        // lane sees counts 0..=3
        let g = make_tollbooth(&TollboothSpec::new(1, 2, 3)).unwrap();
        let d = &g.decisions.iter().find(|d| d.time == 2).unwrap().id;
        let ctx = g.observation_contexts(d).unwrap();
        assert_eq!(ctx.len(), 4);
        let counts: Vec<usize> = ctx
            .iter()
            .map(|c| match c.values.get("L1") {
                Some(ConfigValue::Count(n)) => *n,
                _ => panic!("expected count"),
            })
            .collect();
        assert_eq!(counts, vec![0, 1, 2, 3]);
    }

    #[test]
    fn contexts_are_a_full_product() {
        let mut g = tiny_game();
        g.chance_vars = vec![ChanceVariable {
            id: "X".into(),
            domain: vec!["lo".into(), "hi".into()],
            parents: vec![],
            time: 0,
            cpt: vec![vec![0.5, 0.5]],
        }];
        g.decisions[1].observations = vec!["X".into(), "d1".into()];
        let ctx = g.observation_contexts("d2").unwrap();
        assert_eq!(ctx.len(), 4);
        let n = g.observation_context_count("d2").unwrap();
        assert_eq!(n, 4);
    }

    #[test]
    fn uniform_profile_shapes() {
        let g = make_tollbooth(&TollboothSpec::new(2, 4, 5)).unwrap();
        let p = BehaviorProfile::uniform(&g);
        assert_eq!(p.strategies.len(), 20);
        for s in p.strategies.values() {
            assert_eq!(s.default, vec![0.5, 0.5]);
            assert!(s.rules.is_empty());
        }
        let g3 = make_tollbooth(&TollboothSpec::new(3, 1, 1)).unwrap();
        let p3 = BehaviorProfile::uniform(&g3);
        let s = p3.strategies.values().next().unwrap();
        for x in &s.default {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(p.validate(&g).is_valid());
    }

    #[test]
    fn profile_normalization_violation_reported() {
        let g = tiny_game();
        let mut p = BehaviorProfile::uniform(&g);
        p.strategies.get_mut("d1").unwrap().default = vec![0.6, 0.6];
        let rep = p.validate(&g);
        assert!(rep.violations.iter().any(|v| v.message.contains("sums to")));
    }

    #[test]
    fn profile_rule_outside_observation_set_reported() {
        let g = tiny_game();
        let mut p = BehaviorProfile::uniform(&g);
        let mut ctx = BTreeMap::new();
        ctx.insert("L1".into(), ConfigValue::Count(0));
        p.strategies.get_mut("d1").unwrap().rules.push(StrategyRule {
            context: ctx,
            dist: vec![1.0, 0.0],
        });
        let rep = p.validate(&g);
        assert!(rep
            .violations
            .iter()
            .any(|v| v.message.contains("outside the observation set")));
    }

    #[test]
    fn unknown_decision_id_is_an_error() {
        let g = tiny_game();
        assert!(matches!(
            g.observation_contexts("nope"),
            Err(crate::error::Error::UnknownId(_))
        ));
    }

    #[test]
    fn model_types_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<TaggGame>();
        assert_send_sync::<BehaviorProfile>();
        assert_send_sync::<crate::net::InducedNet>();
        assert_send_sync::<crate::factor::Factor>();
    }

    #[test]
    fn random_profile_is_seeded_and_normalized() {
        let g = make_tollbooth(&TollboothSpec::new(3, 2, 2)).unwrap();
        let a = BehaviorProfile::random(&g, 7);
        let b = BehaviorProfile::random(&g, 7);
        let c = BehaviorProfile::random(&g, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.validate(&g).is_valid());
    }
}
