//! Variable elimination with barren-variable pruning, a greedy
//! fill-minimizing ordering, and live-cell accounting against an optional
//! budget.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::factor::{cell_count, Factor};
use crate::net::{Domain, InducedNet, VarId};

/// Tracks the total cells of simultaneously live factor tables. `alloc` is
/// called with the size of a table about to be built, so a budget overrun is
/// caught before any allocation happens.
#[derive(Clone, Debug)]
pub struct CellTracker {
    live: u128,
    peak: u128,
    budget: Option<u64>,
}

impl CellTracker {
    pub fn new(budget: Option<u64>) -> Self {
        CellTracker { live: 0, peak: 0, budget }
    }

    pub fn alloc(&mut self, cells: u128) -> Result<()> {
        let next = self.live.saturating_add(cells);
        if next > self.peak {
            self.peak = next;
        }
        if let Some(b) = self.budget {
            if next > b as u128 {
                return Err(Error::BudgetExceeded { needed: next, budget: b });
            }
        }
        self.live = next;
        Ok(())
    }

    pub fn free(&mut self, cells: u128) {
        self.live = self.live.saturating_sub(cells);
    }

    pub fn peak(&self) -> u64 {
        self.peak.min(u64::MAX as u128) as u64
    }
}

#[derive(Clone, Debug)]
pub struct VeOutcome {
    /// Unnormalized joint over the query consistent with the evidence.
    pub factor: Factor,
    pub peak_cells: u64,
    /// Set when the evidence has probability zero (the factor is all zeros).
    pub inconsistent_evidence: bool,
}

/// Ancestors of the roots, roots included: the variables whose conditionals
/// can influence a query on the roots. Everything else is barren.
fn relevant_vars(net: &InducedNet, roots: &BTreeSet<VarId>) -> BTreeSet<VarId> {
    let mut out: BTreeSet<VarId> = roots.clone();
    let mut stack: Vec<VarId> = roots.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &p in &net.var(v).parents {
            if out.insert(p) {
                stack.push(p);
            }
        }
    }
    out
}

/// Greedy fill-minimizing elimination order over the non-query, non-evidence
/// variables, ties broken by variable id. Variables irrelevant to the query
/// carry no factors and come out first.
pub fn min_fill_ordering(
    net: &InducedNet,
    query: &BTreeSet<VarId>,
    evidence: &BTreeSet<VarId>,
) -> Vec<VarId> {
    let mut roots = query.clone();
    roots.extend(evidence.iter().copied());
    let relevant = relevant_vars(net, &roots);

    // moral graph over evidence-reduced factor scopes
    let mut adj: HashMap<VarId, HashSet<VarId>> = HashMap::new();
    for v in net.vars() {
        adj.entry(v).or_default();
    }
    for &v in &relevant {
        let mut scope: Vec<VarId> = net
            .var(v)
            .parents
            .iter()
            .copied()
            .chain(std::iter::once(v))
            .filter(|x| !evidence.contains(x))
            .collect();
        scope.sort_unstable();
        scope.dedup();
        for i in 0..scope.len() {
            for j in (i + 1)..scope.len() {
                adj.get_mut(&scope[i]).unwrap().insert(scope[j]);
                adj.get_mut(&scope[j]).unwrap().insert(scope[i]);
            }
        }
    }

    let mut remaining: Vec<VarId> = net
        .vars()
        .filter(|v| !query.contains(v) && !evidence.contains(v))
        .collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None; // (fill, index into remaining)
        for (i, &v) in remaining.iter().enumerate() {
            let neigh: Vec<VarId> = adj[&v]
                .iter()
                .copied()
                .filter(|n| remaining.contains(n) || query.contains(n))
                .collect();
            let mut fill = 0usize;
            for a in 0..neigh.len() {
                for b in (a + 1)..neigh.len() {
                    if !adj[&neigh[a]].contains(&neigh[b]) {
                        fill += 1;
                    }
                }
            }
            let better = match best {
                None => true,
                Some((bf, bi)) => {
                    fill < bf
                        || (fill == bf && net.var(v).id < net.var(remaining[bi]).id)
                }
            };
            if better {
                best = Some((fill, i));
            }
        }
        let (_, idx) = best.unwrap();
        let v = remaining.swap_remove(idx);
        let neigh: Vec<VarId> = adj[&v]
            .iter()
            .copied()
            .filter(|n| remaining.contains(n) || query.contains(n))
            .collect();
        for a in 0..neigh.len() {
            for b in (a + 1)..neigh.len() {
                adj.get_mut(&neigh[a]).unwrap().insert(neigh[b]);
                adj.get_mut(&neigh[b]).unwrap().insert(neigh[a]);
            }
        }
        order.push(v);
    }
    order
}

/// The largest factor scope formed when eliminating `order` against the
/// given starting scopes (query retained). A direct measure for comparing
/// orderings.
pub fn elimination_width(scopes: &[Vec<VarId>], order: &[VarId]) -> usize {
    let mut live: Vec<BTreeSet<VarId>> = scopes
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    let mut width = live.iter().map(|s| s.len()).max().unwrap_or(0);
    for &v in order {
        let (merged, rest): (Vec<_>, Vec<_>) = live.into_iter().partition(|s| s.contains(&v));
        live = rest;
        if merged.is_empty() {
            continue;
        }
        let mut union: BTreeSet<VarId> = BTreeSet::new();
        for s in merged {
            union.extend(s);
        }
        width = width.max(union.len());
        union.remove(&v);
        live.push(union);
    }
    width
}

/// Shared elimination engine: repeatedly multiplies the factors mentioning a
/// variable and sums it out, with cell accounting.
pub(crate) fn eliminate_in_order(
    mut factors: Vec<Factor>,
    order: &[VarId],
    tracker: &mut CellTracker,
) -> Result<Vec<Factor>> {
    for &v in order {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(v));
        factors = rest;
        if bucket.is_empty() {
            continue;
        }
        let mut product: Option<Factor> = None;
        for f in bucket {
            product = Some(match product {
                None => f,
                Some(acc) => {
                    let cells = product_cells(&acc, &f);
                    tracker.alloc(cells)?;
                    let out = acc.product(&f)?;
                    tracker.free(acc.len() as u128);
                    tracker.free(f.len() as u128);
                    out
                }
            });
        }
        let acc = product.unwrap();
        let out = acc.marginalize(&[v])?;
        tracker.alloc(out.len() as u128)?;
        tracker.free(acc.len() as u128);
        factors.push(out);
    }
    Ok(factors)
}

pub(crate) fn product_cells(a: &Factor, b: &Factor) -> u128 {
    let mut cards: Vec<usize> = a.cards().to_vec();
    for (i, &v) in b.scope().iter().enumerate() {
        if !a.contains(v) {
            cards.push(b.cards()[i]);
        }
    }
    cell_count(&cards)
}

/// Unnormalized joint over the query consistent with the evidence, by
/// eliminating along `ordering` (computed greedily when `None`). Variables
/// with no path to the query or evidence are pruned before any table is
/// built. Inconsistent evidence yields the zero factor, flagged in the
/// outcome.
pub fn variable_elimination(
    net: &InducedNet,
    query: &BTreeSet<VarId>,
    evidence: &BTreeMap<VarId, usize>,
    ordering: Option<&[VarId]>,
    budget_cells: Option<u64>,
) -> Result<VeOutcome> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if !net.is_acyclic() {
        return Err(Error::Cyclic);
    }
    let mut tracker = CellTracker::new(budget_cells);
    let evidence_vars: BTreeSet<VarId> = evidence.keys().copied().collect();
    let mut roots = query.clone();
    roots.extend(evidence_vars.iter().copied());
    let relevant = relevant_vars(net, &roots);

    let ev: Vec<(VarId, usize)> = evidence.iter().map(|(&v, &x)| (v, x)).collect();
    let mut factors = Vec::new();
    for &v in &relevant {
        tracker.alloc(net.cpd_factor_cells(v))?;
        let f = net.cpd_factor(v)?;
        let reduced = f.reduce(&ev)?;
        if reduced.len() != f.len() {
            tracker.alloc(reduced.len() as u128)?;
            tracker.free(f.len() as u128);
        }
        factors.push(reduced);
    }

    let order_storage;
    let order: &[VarId] = match ordering {
        Some(o) => o,
        None => {
            order_storage = min_fill_ordering(net, query, &evidence_vars);
            &order_storage
        }
    };
    let order: Vec<VarId> = order
        .iter()
        .copied()
        .filter(|v| !query.contains(v) && !evidence_vars.contains(v))
        .collect();

    let remaining = eliminate_in_order(factors, &order, &mut tracker)?;
    let mut result = Factor::scalar(1.0);
    for f in remaining {
        let cells = product_cells(&result, &f);
        tracker.alloc(cells)?;
        result = result.product(&f)?;
    }
    let inconsistent = result.sum() == 0.0;
    Ok(VeOutcome {
        factor: result,
        peak_cells: tracker.peak(),
        inconsistent_evidence: inconsistent,
    })
}

/// Normalized marginal over the query given the evidence.
pub fn posterior(
    net: &InducedNet,
    query: &BTreeSet<VarId>,
    evidence: &BTreeMap<VarId, usize>,
    budget_cells: Option<u64>,
) -> Result<VeOutcome> {
    let out = variable_elimination(net, query, evidence, None, budget_cells)?;
    Ok(VeOutcome {
        factor: out.factor.normalize(),
        ..out
    })
}

/// Expectation of a single real-valued variable under a (possibly
/// unnormalized) factor over exactly that variable.
pub fn expected_real_value(net: &InducedNet, factor: &Factor) -> Result<f64> {
    if factor.scope().len() != 1 {
        return Err(Error::Internal("expected a single-variable factor".into()));
    }
    let v = factor.scope()[0];
    let dom = &net.var(v).domain;
    if !matches!(dom, Domain::Reals(_) | Domain::Counts(_)) {
        return Err(Error::Internal("variable is not real-valued".into()));
    }
    let total = factor.sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut e = 0.0;
    for (i, &p) in factor.table().iter().enumerate() {
        e += dom.real(i).unwrap_or(0.0) * p;
    }
    Ok(e / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_tollbooth, TollboothSpec};
    use crate::model::{BehaviorProfile, ChanceVariable, Decision, TaggGame, UtilityFunction};
    use crate::net::InducedNet;
    use crate::transform::{causal_decomposition, markov_copies};

    fn chain_game() -> TaggGame {
        // A -> B -> C over chance variables
        let row = |p: f64| vec![vec![p, 1.0 - p], vec![1.0 - p, p]];
        TaggGame {
            num_players: 1,
            duration: 1,
            actions: vec!["a".into()],
            chance_vars: vec![
                ChanceVariable {
                    id: "A".into(),
                    domain: vec!["0".into(), "1".into()],
                    parents: vec![],
                    time: 0,
                    cpt: vec![vec![0.3, 0.7]],
                },
                ChanceVariable {
                    id: "B".into(),
                    domain: vec!["0".into(), "1".into()],
                    parents: vec!["A".into()],
                    time: 0,
                    cpt: row(0.9),
                },
                ChanceVariable {
                    id: "C".into(),
                    domain: vec!["0".into(), "1".into()],
                    parents: vec!["B".into()],
                    time: 0,
                    cpt: row(0.8),
                },
            ],
            decisions: vec![Decision {
                id: "d".into(),
                player: 1,
                time: 1,
                action_set: vec!["a".into()],
                payoff_times: vec![1],
                observations: vec![],
            }],
            utilities: vec![UtilityFunction {
                action: "a".into(),
                time: 1,
                parents: vec![],
                table: vec![0.0],
            }],
        }
    }

    #[test]
    fn min_fill_eliminates_the_chain_tail_first() {
        let g = chain_game();
        let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
        let query: BTreeSet<VarId> = [net.lookup("C").unwrap()].into_iter().collect();
        let order = min_fill_ordering(&net, &query, &BTreeSet::new());
        let pos = |id: &str| order.iter().position(|&v| v == net.lookup(id).unwrap()).unwrap();
        assert!(pos("A") < pos("B"));
    }

    #[test]
    fn empty_net_empty_ordering() {
        let net = InducedNet::from_parts(vec![], vec![], vec![]);
        assert!(min_fill_ordering(&net, &BTreeSet::new(), &BTreeSet::new()).is_empty());
    }

    #[test]
    fn uniform_root_decision_marginal() {
        let g = make_tollbooth(&TollboothSpec::new(3, 1, 1)).unwrap();
        let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
        let d = net.lookup("w1c1").unwrap();
        let query: BTreeSet<VarId> = [d].into_iter().collect();
        let out = variable_elimination(&net, &query, &BTreeMap::new(), None, None).unwrap();
        for &p in out.factor.table() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn payoff_distribution_two_car_tollbooth() {
        let g = make_tollbooth(&TollboothSpec::new(2, 1, 2)).unwrap();
        let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
        let u = net.payoff_var("w1c1", 1).unwrap();
        let query: BTreeSet<VarId> = [u].into_iter().collect();
        let out = variable_elimination(&net, &query, &BTreeMap::new(), None, None)
            .unwrap()
            .factor
            .normalize();
        // four equiprobable joint choices: same lane costs 2, different costs 1
        let dom = &net.var(u).domain;
        let at = |x: f64| out.table()[dom.index_of_real(x).unwrap()];
        assert!((at(-2.0) - 0.5).abs() < 1e-12);
        assert!((at(-1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn count_marginal_is_binomial() {
        let g = make_tollbooth(&TollboothSpec::new(3, 1, 3)).unwrap();
        let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
        let c = net.count_var("L1", 1).unwrap();
        let query: BTreeSet<VarId> = [c].into_iter().collect();
        let out = variable_elimination(&net, &query, &BTreeMap::new(), None, None)
            .unwrap()
            .factor
            .normalize();
        let want = [8.0 / 27.0, 12.0 / 27.0, 6.0 / 27.0, 1.0 / 27.0];
        for (i, &p) in out.table().iter().enumerate() {
            assert!((p - want[i]).abs() < 1e-12, "count {i}");
        }
    }

    #[test]
    fn inconsistent_evidence_yields_flagged_zero() {
        let g = make_tollbooth(&TollboothSpec::new(2, 1, 2)).unwrap();
        let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
        let c = net.count_var("L1", 1).unwrap();
        let d1 = net.lookup("w1c1").unwrap();
        let d2 = net.lookup("w1c2").unwrap();
        let query: BTreeSet<VarId> = [c].into_iter().collect();
        // both cars on L2 contradicts a full L1 count
        let mut ev = BTreeMap::new();
        ev.insert(d1, 1);
        ev.insert(d2, 1);
        // condition the count on being 2 via reduction of the query factor
        let out = variable_elimination(&net, &query, &ev, None, None).unwrap();
        assert!(!out.inconsistent_evidence);
        let p2 = out.factor.table()[2];
        assert_eq!(p2, 0.0);
        let mut ev2 = BTreeMap::new();
        ev2.insert(c, 2);
        ev2.insert(d1, 1);
        let out2 = variable_elimination(&net, &query_set(&net, "w1c2"), &ev2, None, None).unwrap();
        assert!(out2.inconsistent_evidence);
        assert!(out2.factor.table().iter().all(|&x| x == 0.0));
    }

    fn query_set(net: &InducedNet, id: &str) -> BTreeSet<VarId> {
        [net.lookup(id).unwrap()].into_iter().collect()
    }

    #[test]
    fn empty_query_is_an_error() {
        let g = make_tollbooth(&TollboothSpec::new(2, 1, 1)).unwrap();
        let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
        assert!(matches!(
            variable_elimination(&net, &BTreeSet::new(), &BTreeMap::new(), None, None),
            Err(Error::EmptyQuery)
        ));
    }

    #[test]
    fn budget_aborts_before_allocation() {
        let g = make_tollbooth(&TollboothSpec::new(3, 4, 5)).unwrap();
        let net = InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap();
        let u = net.payoff_var("w4c1", 4).unwrap();
        let query: BTreeSet<VarId> = [u].into_iter().collect();
        let err = variable_elimination(&net, &query, &BTreeMap::new(), None, Some(50_000_000));
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn min_fill_width_no_worse_than_reverse_topological() {
        let g = make_tollbooth(&TollboothSpec::new(3, 2, 3)).unwrap();
        let net = markov_copies(
            &causal_decomposition(&InducedNet::build(&g, &BehaviorProfile::uniform(&g)).unwrap())
                .unwrap(),
        );
        let u = net.payoff_var("w2c1", 2).unwrap();
        let query: BTreeSet<VarId> = [u].into_iter().collect();
        let scopes: Vec<Vec<VarId>> = net
            .vars()
            .map(|v| {
                let mut s = net.var(v).parents.clone();
                s.push(v);
                s
            })
            .collect();
        let mf = min_fill_ordering(&net, &query, &BTreeSet::new());
        let mut rt: Vec<VarId> = net.topo_order().unwrap();
        rt.reverse();
        let rt: Vec<VarId> = rt.into_iter().filter(|v| !query.contains(v)).collect();
        assert!(elimination_width(&scopes, &mf) <= elimination_width(&scopes, &rt));
    }
}
