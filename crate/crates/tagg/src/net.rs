//! The induced network: how a game plays out under a fixed behavior profile,
//! expressed as variables with actual parents and conditional distributions.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::factor::{cell_count, Factor};
use crate::model::{BehaviorProfile, ConfigValue, NodeKind, TaggGame};

/// Index of a variable inside an [`InducedNet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

pub type Assignment = HashMap<VarId, usize>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Decision,
    Chance,
    ActionCount,
    Utility,
    DecisionPayoff,
    IntermediateCount,
    Copy,
}

/// The value set of one network variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Decision variables: the ordered action set.
    Actions(Vec<String>),
    /// Chance variables: the ordered symbolic domain.
    Values(Vec<String>),
    /// Count-valued variables: integers `0..=max`.
    Counts(usize),
    /// Utility-valued variables: the ascending list of attainable reals.
    Reals(Vec<f64>),
}

impl Domain {
    pub fn size(&self) -> usize {
        match self {
            Domain::Actions(v) => v.len(),
            Domain::Values(v) => v.len(),
            Domain::Counts(max) => max + 1,
            Domain::Reals(v) => v.len(),
        }
    }

    /// The real value behind index `i` for utility-valued domains.
    pub fn real(&self, i: usize) -> Option<f64> {
        match self {
            Domain::Reals(v) => v.get(i).copied(),
            Domain::Counts(_) => Some(i as f64),
            _ => None,
        }
    }

    /// Index of an exact real value in a utility-valued domain.
    pub fn index_of_real(&self, x: f64) -> Option<usize> {
        match self {
            Domain::Reals(v) => v.iter().position(|y| *y == x),
            _ => None,
        }
    }

    pub fn label(&self, i: usize) -> String {
        match self {
            Domain::Actions(v) | Domain::Values(v) => v[i].clone(),
            Domain::Counts(_) => i.to_string(),
            Domain::Reals(v) => format!("{}", v[i]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NetVariable {
    pub id: String,
    pub kind: VarKind,
    /// Time-step label; chance variables may sit at time 0.
    pub time: usize,
    pub domain: Domain,
    pub parents: Vec<VarId>,
}

/// Conditional distribution of one variable given its actual parents.
#[derive(Clone, Debug)]
pub enum Cpd {
    /// Explicit table; the factor scope is `parents ++ [self]`.
    Table(Factor),
    /// Deterministic sum of count-valued parents plus indicators of decision
    /// parents choosing the designated action.
    Counter {
        summands: Vec<VarId>,
        /// `(decision variable, index of the counted action in its domain)`
        indicators: Vec<(VarId, usize)>,
    },
    /// Deterministic selection: the value of `sources[k]` when the selector
    /// decision takes its `k`-th action.
    Multiplexer { selector: VarId, sources: Vec<VarId> },
    /// Per-action slice of a multiplexer: the source's value when the
    /// selector takes the matching action, zero otherwise.
    Mask {
        selector: VarId,
        match_index: usize,
        source: VarId,
    },
    /// Deterministic function of the parents given by a flat value table in
    /// parent-configuration order (last parent fastest).
    UtilityTable { values: Vec<f64> },
    /// Identity of a single parent.
    Identity { source: VarId },
    /// Behavior strategy: sparse rules keyed by parent value indices in
    /// parent order, plus a default distribution.
    Strategy {
        rules: HashMap<Vec<usize>, Vec<f64>>,
        default: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct InducedNet {
    vars: Vec<NetVariable>,
    cpds: Vec<Cpd>,
    by_id: HashMap<String, VarId>,
    children: Vec<Vec<VarId>>,
    /// Decision-payoff variables, one per (decision, payoff time).
    pub targets: Vec<VarId>,
    pub passes: Vec<TransformPass>,
    pub max_time: usize,
}

/// Record of one rewriting pass applied to a network, mapping every variable
/// the pass added back to the variable it was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformPass {
    pub name: PassName,
    pub provenance: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassName {
    CausalDecomposition,
    MarkovCopies,
}

impl std::fmt::Display for PassName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PassName::CausalDecomposition => write!(f, "causal_decomposition"),
            PassName::MarkovCopies => write!(f, "markov_copies"),
        }
    }
}

pub fn count_var_id(action: &str, time: usize) -> String {
    format!("{action}^{time}")
}

pub fn utility_var_id(action: &str, time: usize) -> String {
    format!("U[{action}]^{time}")
}

pub fn payoff_var_id(decision: &str, time: usize) -> String {
    format!("u[{decision}]^{time}")
}

impl InducedNet {
    /// Compiles a valid game and profile into the induced network: one
    /// variable per decision, chance variable, (action, time) count pair,
    /// utility function in scope, and decision payoff.
    pub fn build(game: &TaggGame, profile: &BehaviorProfile) -> Result<InducedNet> {
        game.ensure_valid()?;
        profile.ensure_valid(game)?;

        let mut net = InducedNet {
            vars: Vec::new(),
            cpds: Vec::new(),
            by_id: HashMap::new(),
            children: Vec::new(),
            targets: Vec::new(),
            passes: Vec::new(),
            max_time: game.duration,
        };

        // chance variables, in declaration order
        for x in &game.chance_vars {
            net.push(
                NetVariable {
                    id: x.id.clone(),
                    kind: VarKind::Chance,
                    time: x.time,
                    domain: Domain::Values(x.domain.clone()),
                    parents: Vec::new(),
                },
                Cpd::UtilityTable { values: Vec::new() }, // placeholder, wired below
            );
        }
        // decisions
        for d in &game.decisions {
            net.push(
                NetVariable {
                    id: d.id.clone(),
                    kind: VarKind::Decision,
                    time: d.time,
                    domain: Domain::Actions(d.action_set.clone()),
                    parents: Vec::new(),
                },
                Cpd::UtilityTable { values: Vec::new() },
            );
        }
        // action counts for every action and time step
        for a in &game.actions {
            for t in 1..=game.duration {
                net.push(
                    NetVariable {
                        id: count_var_id(a, t),
                        kind: VarKind::ActionCount,
                        time: t,
                        domain: Domain::Counts(game.eligible(a, t)),
                        parents: Vec::new(),
                    },
                    Cpd::UtilityTable { values: Vec::new() },
                );
            }
        }
        // utility variables: those defined by the game plus any referenced by
        // a payoff structure (the latter default to the constant zero)
        let mut needed: Vec<(usize, usize)> = Vec::new(); // (action index, time)
        let mut seen_u = HashSet::new();
        for u in &game.utilities {
            let ai = game.action_index(&u.action).unwrap();
            if seen_u.insert((ai, u.time)) {
                needed.push((ai, u.time));
            }
        }
        for d in &game.decisions {
            for &t in &d.payoff_times {
                for a in &d.action_set {
                    let ai = game.action_index(a).unwrap();
                    if seen_u.insert((ai, t)) {
                        needed.push((ai, t));
                    }
                }
            }
        }
        needed.sort_unstable();
        for &(ai, t) in &needed {
            let action = &game.actions[ai];
            let values = match game.utility(action, t) {
                Some(u) => {
                    let mut v: Vec<f64> = u.table.clone();
                    v.sort_by(f64::total_cmp);
                    v.dedup();
                    if v.is_empty() {
                        v.push(0.0);
                    }
                    v
                }
                None => vec![0.0],
            };
            net.push(
                NetVariable {
                    id: utility_var_id(action, t),
                    kind: VarKind::Utility,
                    time: t,
                    domain: Domain::Reals(values),
                    parents: Vec::new(),
                },
                Cpd::UtilityTable { values: Vec::new() },
            );
        }
        // decision payoffs
        for d in &game.decisions {
            let mut times = d.payoff_times.clone();
            times.sort_unstable();
            times.dedup();
            for t in times {
                let mut values: Vec<f64> = Vec::new();
                for a in &d.action_set {
                    let uv = net.lookup(&utility_var_id(a, t)).unwrap();
                    if let Domain::Reals(v) = &net.vars[uv.0].domain {
                        values.extend_from_slice(v);
                    }
                }
                values.sort_by(f64::total_cmp);
                values.dedup();
                let id = payoff_var_id(&d.id, t);
                let v = net.push(
                    NetVariable {
                        id,
                        kind: VarKind::DecisionPayoff,
                        time: t,
                        domain: Domain::Reals(values),
                        parents: Vec::new(),
                    },
                    Cpd::UtilityTable { values: Vec::new() },
                );
                net.targets.push(v);
            }
        }

        // wire parents and conditional distributions
        for x in &game.chance_vars {
            let v = net.lookup(&x.id).unwrap();
            let mut parents = Vec::new();
            for p in &x.parents {
                match game.node_kind(p) {
                    Some(NodeKind::Action) => {
                        // count at the instantiation time; time 0 means the
                        // constant zero, which is not materialized
                        if x.time >= 1 {
                            parents.push(net.lookup(&count_var_id(p, x.time)).unwrap());
                        }
                    }
                    Some(NodeKind::Chance) => parents.push(net.lookup(p).unwrap()),
                    _ => unreachable!("validated"),
                }
            }
            // flat CPT rows become a factor over parents ++ [self]; dropped
            // time-0 count parents had singleton ranges, so the layout is
            // unchanged
            let mut cards: Vec<usize> = parents.iter().map(|&p| net.vars[p.0].domain.size()).collect();
            cards.push(x.domain.len());
            let mut table = Vec::with_capacity(x.cpt.len() * x.domain.len());
            for row in &x.cpt {
                table.extend_from_slice(row);
            }
            let mut scope = parents.clone();
            scope.push(v);
            let f = Factor::new(scope, cards, table)?;
            net.vars[v.0].parents = parents;
            net.cpds[v.0] = Cpd::Table(f);
        }

        for d in &game.decisions {
            let v = net.lookup(&d.id).unwrap();
            let mut parents = Vec::new();
            // kept in observation order; time-0 count observations are the
            // constant zero and are dropped
            let mut kept: Vec<&str> = Vec::new();
            for o in &d.observations {
                match game.node_kind(o) {
                    Some(NodeKind::Action) => {
                        if d.time >= 2 {
                            parents.push(net.lookup(&count_var_id(o, d.time - 1)).unwrap());
                            kept.push(o);
                        }
                    }
                    Some(NodeKind::Decision) | Some(NodeKind::Chance) => {
                        parents.push(net.lookup(o).unwrap());
                        kept.push(o);
                    }
                    None => unreachable!("validated"),
                }
            }
            let strategy = profile
                .strategy(&d.id)
                .ok_or_else(|| Error::InvalidProfile(format!("no strategy for `{}`", d.id)))?;
            let mut rules = HashMap::new();
            for rule in &strategy.rules {
                let mut key = Vec::with_capacity(kept.len());
                let mut ok = true;
                for (&node, &p) in kept.iter().zip(parents.iter()) {
                    let val = rule.context.get(node);
                    let idx = match (game.node_kind(node), val) {
                        (Some(NodeKind::Action), Some(ConfigValue::Count(c))) => Some(*c),
                        (Some(NodeKind::Decision), Some(ConfigValue::Symbol(s))) => {
                            match &net.vars[p.0].domain {
                                Domain::Actions(set) => set.iter().position(|a| a == s),
                                _ => None,
                            }
                        }
                        (Some(NodeKind::Chance), Some(ConfigValue::Symbol(s))) => {
                            match &net.vars[p.0].domain {
                                Domain::Values(dom) => dom.iter().position(|x| x == s),
                                _ => None,
                            }
                        }
                        _ => None,
                    };
                    match idx {
                        Some(i) if i < net.vars[p.0].domain.size() => key.push(i),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    return Err(Error::InvalidProfile(format!(
                        "rule context for `{}` does not match its observation space",
                        d.id
                    )));
                }
                rules.insert(key, rule.dist.clone());
            }
            net.vars[v.0].parents = parents;
            net.cpds[v.0] = Cpd::Strategy {
                rules,
                default: strategy.default.clone(),
            };
        }

        for a in &game.actions {
            for t in 1..=game.duration {
                let v = net.lookup(&count_var_id(a, t)).unwrap();
                let mut parents = Vec::new();
                let mut indicators = Vec::new();
                for d in &game.decisions {
                    if d.time <= t {
                        if let Some(k) = d.action_set.iter().position(|x| x == a) {
                            let dv = net.lookup(&d.id).unwrap();
                            parents.push(dv);
                            indicators.push((dv, k));
                        }
                    }
                }
                net.vars[v.0].parents = parents;
                net.cpds[v.0] = Cpd::Counter {
                    summands: Vec::new(),
                    indicators,
                };
            }
        }

        for &(ai, t) in &needed {
            let action = &game.actions[ai];
            let v = net.lookup(&utility_var_id(action, t)).unwrap();
            let (parents, values) = match game.utility(action, t) {
                Some(u) => {
                    let mut parents = Vec::new();
                    for p in &u.parents {
                        match game.node_kind(p) {
                            Some(NodeKind::Action) => {
                                parents.push(net.lookup(&count_var_id(p, t)).unwrap())
                            }
                            Some(NodeKind::Chance) => parents.push(net.lookup(p).unwrap()),
                            _ => unreachable!("validated"),
                        }
                    }
                    (parents, u.table.clone())
                }
                None => (Vec::new(), vec![0.0]),
            };
            net.vars[v.0].parents = parents;
            net.cpds[v.0] = Cpd::UtilityTable { values };
        }

        for d in &game.decisions {
            let dv = net.lookup(&d.id).unwrap();
            let mut times = d.payoff_times.clone();
            times.sort_unstable();
            times.dedup();
            for t in times {
                let v = net.lookup(&payoff_var_id(&d.id, t)).unwrap();
                let mut parents = vec![dv];
                let mut sources = Vec::new();
                for a in &d.action_set {
                    let uv = net.lookup(&utility_var_id(a, t)).unwrap();
                    parents.push(uv);
                    sources.push(uv);
                }
                net.vars[v.0].parents = parents;
                net.cpds[v.0] = Cpd::Multiplexer { selector: dv, sources };
            }
        }

        net.finalize();
        if !net.is_acyclic() {
            return Err(Error::Cyclic);
        }
        Ok(net)
    }

    /// Raw constructor for hand-built networks (primarily for tests and
    /// pass-internal rewiring).
    pub fn from_parts(vars: Vec<NetVariable>, cpds: Vec<Cpd>, targets: Vec<VarId>) -> InducedNet {
        let max_time = vars.iter().map(|v| v.time).max().unwrap_or(0);
        let mut net = InducedNet {
            vars,
            cpds,
            by_id: HashMap::new(),
            children: Vec::new(),
            targets,
            passes: Vec::new(),
            max_time,
        };
        net.finalize();
        net
    }

    fn push(&mut self, var: NetVariable, cpd: Cpd) -> VarId {
        let id = VarId(self.vars.len());
        self.by_id.insert(var.id.clone(), id);
        self.vars.push(var);
        self.cpds.push(cpd);
        id
    }

    /// Appends a variable and re-derives the child lists. Used by transform
    /// passes.
    pub fn add_variable(&mut self, var: NetVariable, cpd: Cpd) -> VarId {
        let id = self.push(var, cpd);
        self.max_time = self.max_time.max(self.vars[id.0].time);
        id
    }

    /// Replaces the parents and CPD of one variable. Used by transform passes.
    pub fn rewire(&mut self, v: VarId, parents: Vec<VarId>, cpd: Cpd) {
        self.vars[v.0].parents = parents;
        self.cpds[v.0] = cpd;
    }

    /// Recomputes derived indices after structural edits.
    pub fn finalize(&mut self) {
        self.by_id = self
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), VarId(i)))
            .collect();
        self.children = vec![Vec::new(); self.vars.len()];
        for (i, v) in self.vars.iter().enumerate() {
            for &p in &v.parents {
                self.children[p.0].push(VarId(i));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }

    pub fn var(&self, v: VarId) -> &NetVariable {
        &self.vars[v.0]
    }

    pub fn cpd(&self, v: VarId) -> &Cpd {
        &self.cpds[v.0]
    }

    pub fn children(&self, v: VarId) -> &[VarId] {
        &self.children[v.0]
    }

    pub fn lookup(&self, id: &str) -> Option<VarId> {
        self.by_id.get(id).copied()
    }

    pub fn count_var(&self, action: &str, time: usize) -> Option<VarId> {
        self.lookup(&count_var_id(action, time))
    }

    pub fn utility_var(&self, action: &str, time: usize) -> Option<VarId> {
        self.lookup(&utility_var_id(action, time))
    }

    pub fn payoff_var(&self, decision: &str, time: usize) -> Option<VarId> {
        self.lookup(&payoff_var_id(decision, time))
    }

    pub fn has_pass(&self, name: PassName) -> bool {
        self.passes.iter().any(|p| p.name == name)
    }

    /// A topological order over the actual-parent graph, or `None` on a cycle.
    pub fn topo_order(&self) -> Option<Vec<VarId>> {
        let n = self.vars.len();
        let mut indeg: Vec<usize> = self.vars.iter().map(|v| v.parents.len()).collect();
        let mut queue: std::collections::VecDeque<usize> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(VarId(i));
            for &c in &self.children[i] {
                indeg[c.0] -= 1;
                if indeg[c.0] == 0 {
                    queue.push_back(c.0);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_some()
    }

    /// All strict ancestors of `v`.
    pub fn ancestors(&self, v: VarId) -> HashSet<VarId> {
        let mut seen = HashSet::new();
        let mut stack: Vec<VarId> = self.vars[v.0].parents.clone();
        while let Some(p) = stack.pop() {
            if seen.insert(p) {
                stack.extend(self.vars[p.0].parents.iter().copied());
            }
        }
        seen
    }

    /// The exact conditional distribution of `v` given a full assignment of
    /// its actual parents; deterministic kinds return a point mass.
    pub fn cpd_distribution(&self, v: VarId, assign: &Assignment) -> Result<Vec<f64>> {
        for &p in &self.vars[v.0].parents {
            if !assign.contains_key(&p) {
                return Err(Error::IncompleteAssignment(self.vars[p.0].id.clone()));
            }
        }
        let size = self.vars[v.0].domain.size();
        let dist = match &self.cpds[v.0] {
            Cpd::Table(f) => {
                // self is the last, fastest-varying dimension
                let mut offset = 0usize;
                let scope = f.scope();
                let cards = f.cards();
                for i in 0..scope.len() - 1 {
                    offset = offset * cards[i] + assign[&scope[i]];
                }
                f.table()[offset * size..(offset + 1) * size].to_vec()
            }
            Cpd::Counter { summands, indicators } => {
                let mut total = 0usize;
                for s in summands {
                    total += assign[s];
                }
                for (d, k) in indicators {
                    if assign[d] == *k {
                        total += 1;
                    }
                }
                delta(size, total)
            }
            Cpd::Multiplexer { selector, sources } => {
                let k = assign[selector];
                let src = sources[k];
                let val = self.vars[src.0]
                    .domain
                    .real(assign[&src])
                    .ok_or_else(|| Error::Internal("multiplexer source is not real-valued".into()))?;
                let idx = self.vars[v.0]
                    .domain
                    .index_of_real(val)
                    .ok_or_else(|| Error::Internal("multiplexer value missing from domain".into()))?;
                delta(size, idx)
            }
            Cpd::Mask { selector, match_index, source } => {
                let val = if assign[selector] == *match_index {
                    self.vars[source.0]
                        .domain
                        .real(assign[source])
                        .ok_or_else(|| Error::Internal("mask source is not real-valued".into()))?
                } else {
                    0.0
                };
                let idx = self.vars[v.0]
                    .domain
                    .index_of_real(val)
                    .ok_or_else(|| Error::Internal("mask value missing from domain".into()))?;
                delta(size, idx)
            }
            Cpd::UtilityTable { values } => {
                let mut idx = 0usize;
                for &p in &self.vars[v.0].parents {
                    idx = idx * self.vars[p.0].domain.size() + assign[&p];
                }
                let val = values.get(idx).copied().unwrap_or(0.0);
                let di = self.vars[v.0]
                    .domain
                    .index_of_real(val)
                    .ok_or_else(|| Error::Internal("utility value missing from domain".into()))?;
                delta(size, di)
            }
            Cpd::Identity { source } => delta(size, assign[source]),
            Cpd::Strategy { rules, default } => {
                let key: Vec<usize> = self.vars[v.0].parents.iter().map(|p| assign[p]).collect();
                rules.get(&key).cloned().unwrap_or_else(|| default.clone())
            }
        };
        debug_assert_eq!(dist.len(), size);
        Ok(dist)
    }

    /// Cells of the dense factor for `v`'s CPD, without building it.
    pub fn cpd_factor_cells(&self, v: VarId) -> u128 {
        let mut cards: Vec<usize> = self.vars[v.0]
            .parents
            .iter()
            .map(|p| self.vars[p.0].domain.size())
            .collect();
        cards.push(self.vars[v.0].domain.size());
        cell_count(&cards)
    }

    /// Materializes the CPD of `v` as a dense factor over `parents ++ [v]`.
    pub fn cpd_factor(&self, v: VarId) -> Result<Factor> {
        if let Cpd::Table(f) = &self.cpds[v.0] {
            return Ok(f.clone());
        }
        let parents = self.vars[v.0].parents.clone();
        let cards: Vec<usize> = parents.iter().map(|p| self.vars[p.0].domain.size()).collect();
        let size = self.vars[v.0].domain.size();
        let mut scope = parents.clone();
        scope.push(v);
        let mut all_cards = cards.clone();
        all_cards.push(size);
        let n = crate::factor::checked_len(&all_cards)?;
        let mut table = Vec::with_capacity(n);
        let mut digits = vec![0usize; parents.len()];
        let mut assign: Assignment = HashMap::with_capacity(parents.len());
        loop {
            assign.clear();
            for (i, &p) in parents.iter().enumerate() {
                assign.insert(p, digits[i]);
            }
            let dist = self.cpd_distribution(v, &assign)?;
            table.extend_from_slice(&dist);
            let mut d = parents.len();
            loop {
                if d == 0 {
                    let f = Factor::new(scope, all_cards, table)?;
                    return Ok(f);
                }
                d -= 1;
                digits[d] += 1;
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
    }

    /// Clone with the CPD of one decision variable replaced (used to evaluate
    /// candidate strategies without rebuilding the whole network).
    pub fn with_cpd(&self, v: VarId, cpd: Cpd) -> InducedNet {
        let mut net = self.clone();
        net.cpds[v.0] = cpd;
        net
    }
}

fn delta(size: usize, idx: usize) -> Vec<f64> {
    debug_assert!(idx < size);
    let mut d = vec![0.0; size];
    d[idx] = 1.0;
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_icecream, make_tollbooth, IceCreamSpec, TollboothSpec};
    use crate::model::BehaviorProfile;

    fn count_kind(net: &InducedNet, kind: VarKind) -> usize {
        net.vars().filter(|&v| net.var(v).kind == kind).count()
    }

    #[test]
    fn tollbooth_net_matches_expected_topology() {
        let g = make_tollbooth(&TollboothSpec::new(3, 2, 3)).unwrap();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        assert_eq!(count_kind(&net, VarKind::Decision), 6);
        assert_eq!(count_kind(&net, VarKind::ActionCount), 6);
        assert_eq!(count_kind(&net, VarKind::Utility), 6);
        // three utility variables sit at the final step
        let at_final = net
            .vars()
            .filter(|&v| net.var(v).kind == VarKind::Utility && net.var(v).time == 2)
            .count();
        assert_eq!(at_final, 3);
        assert_eq!(count_kind(&net, VarKind::DecisionPayoff), 6);
        // wave-2 decisions observe all three first-wave counts
        let d = net.lookup("w2c1").unwrap();
        let parents = &net.var(d).parents;
        assert_eq!(parents.len(), 3);
        for &p in parents {
            assert_eq!(net.var(p).kind, VarKind::ActionCount);
            assert_eq!(net.var(p).time, 1);
        }
        // second-step counts have all six decisions as parents
        let c = net.count_var("L1", 2).unwrap();
        assert_eq!(net.var(c).parents.len(), 6);
        assert!(net.is_acyclic());
    }

    #[test]
    fn single_decision_count_domain() {
        let g = make_tollbooth(&TollboothSpec::new(1, 1, 1)).unwrap();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        let c = net.count_var("L1", 1).unwrap();
        assert_eq!(net.var(c).parents.len(), 1);
        assert_eq!(net.var(c).domain.size(), 2); // {0, 1}
    }

    #[test]
    fn icecream_decisions_observe_neighborhood_counts() {
        let g = make_icecream(&IceCreamSpec::with_homes(4, 2, vec![2, 1, 3, 4])).unwrap();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        // a day-2 vendor living at location 3 observes counts of 2,3,4 at day 1
        let d = net.lookup("v3").unwrap();
        let parents = &net.var(d).parents;
        assert_eq!(parents.len(), 3);
        for &pv in parents {
            assert_eq!(net.var(pv).kind, VarKind::ActionCount);
            assert_eq!(net.var(pv).time, 1);
        }
        let ids: Vec<&str> = parents.iter().map(|&pv| net.var(pv).id.as_str()).collect();
        assert!(ids.contains(&"loc2^1") && ids.contains(&"loc3^1") && ids.contains(&"loc4^1"));
    }

    #[test]
    fn counter_cpd_counts_matching_decisions() {
        let g = make_tollbooth(&TollboothSpec::new(2, 1, 3)).unwrap();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        let c = net.count_var("L1", 1).unwrap();
        let d1 = net.lookup("w1c1").unwrap();
        let d2 = net.lookup("w1c2").unwrap();
        let d3 = net.lookup("w1c3").unwrap();
        // assignments are indices into each decision's action set: L1 = 0, L2 = 1
        let mut a = Assignment::new();
        a.insert(d1, 0);
        a.insert(d2, 1);
        a.insert(d3, 0);
        let dist = net.cpd_distribution(c, &a).unwrap();
        assert_eq!(dist, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn multiplexer_selects_by_decision() {
        let g = make_tollbooth(&TollboothSpec::new(2, 1, 2)).unwrap();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        let u = net.payoff_var("w1c1", 1).unwrap();
        let d = net.lookup("w1c1").unwrap();
        let u1 = net.utility_var("L1", 1).unwrap();
        let u2 = net.utility_var("L2", 1).unwrap();
        let mut a = Assignment::new();
        a.insert(d, 1); // L2
        // utility domains are ascending value lists; find the index of -1
        let i1 = net.var(u1).domain.index_of_real(-2.0).unwrap();
        let i2 = net.var(u2).domain.index_of_real(-1.0).unwrap();
        a.insert(u1, i1);
        a.insert(u2, i2);
        let dist = net.cpd_distribution(u, &a).unwrap();
        let want = net.var(u).domain.index_of_real(-1.0).unwrap();
        for (i, &x) in dist.iter().enumerate() {
            assert_eq!(x, if i == want { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn strategy_cpd_defaults_to_uniform() {
        let g = make_tollbooth(&TollboothSpec::new(3, 2, 1)).unwrap();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        let d = net.lookup("w2c1").unwrap();
        let mut a = Assignment::new();
        for &pv in &net.var(d).parents {
            a.insert(pv, 0);
        }
        let dist = net.cpd_distribution(d, &a).unwrap();
        for x in dist {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn incomplete_assignment_is_an_error() {
        let g = make_tollbooth(&TollboothSpec::new(2, 1, 2)).unwrap();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        let c = net.count_var("L1", 1).unwrap();
        let a = Assignment::new();
        assert!(matches!(
            net.cpd_distribution(c, &a),
            Err(Error::IncompleteAssignment(_))
        ));
    }

    #[test]
    fn hand_built_cycle_is_detected() {
        let vars = vec![
            NetVariable {
                id: "V1".into(),
                kind: VarKind::Chance,
                time: 1,
                domain: Domain::Values(vec!["a".into(), "b".into()]),
                parents: vec![VarId(1)],
            },
            NetVariable {
                id: "V2".into(),
                kind: VarKind::Chance,
                time: 1,
                domain: Domain::Values(vec!["a".into(), "b".into()]),
                parents: vec![VarId(0)],
            },
        ];
        let cpds = vec![
            Cpd::Identity { source: VarId(1) },
            Cpd::Identity { source: VarId(0) },
        ];
        let net = InducedNet::from_parts(vars, cpds, vec![]);
        assert!(!net.is_acyclic());
    }

    #[test]
    fn empty_net_is_acyclic() {
        let net = InducedNet::from_parts(vec![], vec![], vec![]);
        assert!(net.is_acyclic());
    }

    #[test]
    fn build_outputs_are_always_acyclic() {
        for (lanes, waves, cars) in [(1, 1, 1), (2, 2, 2), (3, 2, 3)] {
            let g = make_tollbooth(&TollboothSpec::new(lanes, waves, cars)).unwrap();
            let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
            assert!(net.is_acyclic());
        }
    }

    #[test]
    fn unreferenced_utilities_are_built_and_left_to_pruning() {
        // an extra utility function no payoff selects still becomes a
        // variable; dropping it changes nothing downstream
        let mut g = make_tollbooth(&TollboothSpec::new(2, 2, 1)).unwrap();
        g.decisions[1].action_set = vec!["L1".into()]; // wave 2 cannot pick L2
        // the tightened count range for L2 at time 2 shrank with it
        for u in g.utilities.iter_mut() {
            if u.action == "L2" && u.time == 2 {
                u.table = vec![0.0, -1.0];
            }
        }
        let extra = g.utilities.len();
        let p = BehaviorProfile::uniform(&g);
        let net = InducedNet::build(&g, &p).unwrap();
        assert!(net.utility_var("L2", 2).is_some());
        assert_eq!(
            net.vars().filter(|&v| net.var(v).kind == VarKind::Utility).count(),
            extra
        );
        let target = net.payoff_var("w2c1", 2).unwrap();
        assert!(!net.ancestors(target).contains(&net.utility_var("L2", 2).unwrap()));
    }

    #[test]
    fn counts_conserve_and_grow_along_positive_assignments() {
        let g = make_tollbooth(&TollboothSpec::new(2, 2, 2)).unwrap();
        let p = BehaviorProfile::random(&g, 2);
        let net = InducedNet::build(&g, &p).unwrap();
        let mut counts: Vec<VarId> = Vec::new();
        for t in 1..=2 {
            for a in ["L1", "L2"] {
                counts.push(net.count_var(a, t).unwrap());
            }
        }
        let joint = crate::oracle::net_joint(&net, &counts).unwrap();
        for (key, prob) in joint {
            if prob <= 0.0 {
                continue;
            }
            // key order: L1^1, L2^1, L1^2, L2^2
            let decided_by = |t: usize| g.decisions.iter().filter(|d| d.time <= t).count();
            assert_eq!(key[0] + key[1], decided_by(1));
            assert_eq!(key[2] + key[3], decided_by(2));
            assert!(key[2] >= key[0] && key[3] >= key[1]);
        }
    }

    #[test]
    fn cpd_factor_matches_distribution() {
        let g = make_tollbooth(&TollboothSpec::new(2, 2, 1)).unwrap();
        let p = BehaviorProfile::random(&g, 3);
        let net = InducedNet::build(&g, &p).unwrap();
        for v in net.vars() {
            if net.cpd_factor_cells(v) > 10_000 {
                continue;
            }
            let f = net.cpd_factor(v).unwrap();
            let parents = &net.var(v).parents;
            // spot-check the all-zero parent configuration
            let mut a = Assignment::new();
            for &pv in parents {
                a.insert(pv, 0);
            }
            let dist = net.cpd_distribution(v, &a).unwrap();
            for (i, &want) in dist.iter().enumerate() {
                let mut idx = vec![0usize; parents.len()];
                idx.push(i);
                assert_eq!(f.value_at(&idx), want);
            }
        }
    }
}
