//! Network rewriting passes: exposing the counting structure of action-count
//! variables and restoring the one-step property with relay copies, plus the
//! per-step interface and effective-variable computations built on them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::net::{Cpd, Domain, InducedNet, NetVariable, PassName, TransformPass, VarId, VarKind};

fn chain_id(action_count: &str, position: usize) -> String {
    format!("M[{action_count}]:{position}")
}

fn summary_id(action_count: &str) -> String {
    format!("M[{action_count}]")
}

fn copy_id(source: &str, time: usize) -> String {
    format!("{source}@{time}")
}

/// Rewrites every action-count variable so its in-degree is at most two: the
/// previous count (when any earlier decision could contribute) and the
/// current step's contribution, with a chain of pairwise intermediate counts
/// when two or more same-step decisions can choose the action. The joint
/// distribution over the original variables is unchanged.
pub fn causal_decomposition(net: &InducedNet) -> Result<InducedNet> {
    if net.has_pass(PassName::CausalDecomposition) {
        return Err(Error::PassAlreadyApplied(
            PassName::CausalDecomposition.to_string(),
        ));
    }
    let mut out = net.clone();
    let mut provenance = BTreeMap::new();

    let counts: Vec<VarId> = net
        .vars()
        .filter(|&v| net.var(v).kind == VarKind::ActionCount)
        .collect();
    for c in counts {
        let (indicators, time, count_id) = {
            let var = net.var(c);
            let inds = match net.cpd(c) {
                Cpd::Counter { summands, indicators } if summands.is_empty() => indicators.clone(),
                // counts already rewritten or hand-built differently are left alone
                _ => continue,
            };
            (inds, var.time, var.id.clone())
        };
        // same-step contributors in decision-id order; earlier contributors
        // are summarized by the previous count
        let mut here: Vec<(VarId, usize)> = indicators
            .iter()
            .copied()
            .filter(|&(d, _)| net.var(d).time == time)
            .collect();
        here.sort_by(|a, b| net.var(a.0).id.cmp(&net.var(b.0).id));

        let prev = if time >= 2 {
            let action = count_id.split('^').next().unwrap_or("");
            out.count_var(action, time - 1)
                .filter(|&p| out.var(p).domain.size() > 1)
        } else {
            None
        };

        let m = here.len();
        match (prev, m) {
            (None, 0) => {
                out.rewire(c, Vec::new(), Cpd::Counter { summands: vec![], indicators: vec![] });
            }
            (Some(p), 0) => {
                out.rewire(c, vec![p], Cpd::Counter { summands: vec![p], indicators: vec![] });
            }
            (None, 1) | (Some(_), 1) => {
                let (d, k) = here[0];
                let mut parents = Vec::new();
                let mut summands = Vec::new();
                if let Some(p) = prev {
                    parents.push(p);
                    summands.push(p);
                }
                parents.push(d);
                out.rewire(c, parents, Cpd::Counter { summands, indicators: vec![(d, k)] });
            }
            (None, _) => {
                // pairwise chain over the first m-1 contributors; the count
                // itself absorbs the last one
                let mut prev_link: Option<VarId> = None;
                for (i, &(d, k)) in here.iter().take(m - 1).enumerate() {
                    let id = chain_id(&count_id, i + 1);
                    let mut parents = Vec::new();
                    let mut summands = Vec::new();
                    if let Some(pl) = prev_link {
                        parents.push(pl);
                        summands.push(pl);
                    }
                    parents.push(d);
                    let link = out.add_variable(
                        NetVariable {
                            id: id.clone(),
                            kind: VarKind::IntermediateCount,
                            time,
                            domain: Domain::Counts(i + 1),
                            parents,
                        },
                        Cpd::Counter { summands, indicators: vec![(d, k)] },
                    );
                    provenance.insert(id, count_id.clone());
                    prev_link = Some(link);
                }
                let (d_last, k_last) = here[m - 1];
                let pl = prev_link.expect("m >= 2");
                out.rewire(
                    c,
                    vec![pl, d_last],
                    Cpd::Counter { summands: vec![pl], indicators: vec![(d_last, k_last)] },
                );
            }
            (Some(p), _) => {
                // full chain feeding a summary node; the count adds it to the
                // previous count
                let mut prev_link: Option<VarId> = None;
                for (i, &(d, k)) in here.iter().take(m - 1).enumerate() {
                    let id = chain_id(&count_id, i + 1);
                    let mut parents = Vec::new();
                    let mut summands = Vec::new();
                    if let Some(pl) = prev_link {
                        parents.push(pl);
                        summands.push(pl);
                    }
                    parents.push(d);
                    let link = out.add_variable(
                        NetVariable {
                            id: id.clone(),
                            kind: VarKind::IntermediateCount,
                            time,
                            domain: Domain::Counts(i + 1),
                            parents,
                        },
                        Cpd::Counter { summands, indicators: vec![(d, k)] },
                    );
                    provenance.insert(id, count_id.clone());
                    prev_link = Some(link);
                }
                let (d_last, k_last) = here[m - 1];
                let sid = summary_id(&count_id);
                let mut sparents = Vec::new();
                let mut ssummands = Vec::new();
                if let Some(pl) = prev_link {
                    sparents.push(pl);
                    ssummands.push(pl);
                }
                sparents.push(d_last);
                let summary = out.add_variable(
                    NetVariable {
                        id: sid.clone(),
                        kind: VarKind::IntermediateCount,
                        time,
                        domain: Domain::Counts(m),
                        parents: sparents,
                    },
                    Cpd::Counter { summands: ssummands, indicators: vec![(d_last, k_last)] },
                );
                provenance.insert(sid, count_id.clone());
                out.rewire(
                    c,
                    vec![p, summary],
                    Cpd::Counter { summands: vec![p, summary], indicators: vec![] },
                );
            }
        }
    }

    out.finalize();
    out.passes.push(TransformPass {
        name: PassName::CausalDecomposition,
        provenance,
    });
    debug_assert!(out.is_acyclic());
    Ok(out)
}

/// Inserts relay copies so that every actual parent of a time-τ variable sits
/// at τ or τ-1. Edges into decision-payoff variables are exempt: a payoff's
/// decision parent is carried through interfaces instead of being copied.
pub fn markov_copies(net: &InducedNet) -> InducedNet {
    let mut out = net.clone();
    let mut provenance = BTreeMap::new();
    // (source, time) -> relay variable at that time
    let mut relays: HashMap<(VarId, usize), VarId> = HashMap::new();

    let vars: Vec<VarId> = net.vars().collect();
    for v in vars {
        if net.var(v).kind == VarKind::DecisionPayoff {
            continue;
        }
        let child_time = net.var(v).time;
        let parents = net.var(v).parents.clone();
        let mut new_parents = parents.clone();
        let mut changed = false;
        for (i, &p) in parents.iter().enumerate() {
            let parent_time = net.var(p).time;
            if child_time > parent_time + 1 {
                // relay the value forward one step at a time
                let mut link = p;
                for t in (parent_time + 1)..child_time {
                    link = match relays.get(&(p, t)) {
                        Some(&existing) => existing,
                        None => {
                            let src_id = net.var(p).id.clone();
                            let id = copy_id(&src_id, t);
                            let prev = if t == parent_time + 1 {
                                p
                            } else {
                                relays[&(p, t - 1)]
                            };
                            let nv = out.add_variable(
                                NetVariable {
                                    id: id.clone(),
                                    kind: VarKind::Copy,
                                    time: t,
                                    domain: out.var(p).domain.clone(),
                                    parents: vec![prev],
                                },
                                Cpd::Identity { source: prev },
                            );
                            provenance.insert(id, src_id);
                            relays.insert((p, t), nv);
                            nv
                        }
                    };
                }
                new_parents[i] = link;
                changed = true;
            }
        }
        if changed {
            let cpd = retarget_cpd(out.cpd(v).clone(), &parents, &new_parents);
            out.rewire(v, new_parents, cpd);
        }
    }

    out.finalize();
    out.passes.push(TransformPass {
        name: PassName::MarkovCopies,
        provenance,
    });
    debug_assert!(out.is_acyclic());
    out
}

/// Rewrites variable references inside a CPD after its parent list changed.
fn retarget_cpd(cpd: Cpd, old: &[VarId], new: &[VarId]) -> Cpd {
    let map = |v: VarId| -> VarId {
        old.iter()
            .position(|&o| o == v)
            .map_or(v, |i| new[i])
    };
    match cpd {
        Cpd::Table(f) => {
            let scope: Vec<VarId> = f.scope().iter().map(|&v| map(v)).collect();
            let cards = f.cards().to_vec();
            let table = f.table().to_vec();
            Cpd::Table(crate::factor::Factor::new(scope, cards, table).expect("same shape"))
        }
        Cpd::Counter { summands, indicators } => Cpd::Counter {
            summands: summands.into_iter().map(map).collect(),
            indicators: indicators.into_iter().map(|(d, k)| (map(d), k)).collect(),
        },
        Cpd::Multiplexer { selector, sources } => Cpd::Multiplexer {
            selector: map(selector),
            sources: sources.into_iter().map(map).collect(),
        },
        Cpd::Mask { selector, match_index, source } => Cpd::Mask {
            selector: map(selector),
            match_index,
            source: map(source),
        },
        Cpd::Identity { source } => Cpd::Identity { source: map(source) },
        other @ (Cpd::UtilityTable { .. } | Cpd::Strategy { .. }) => other,
    }
}

/// First edge that spans more than one time step, ignoring edges into
/// decision-payoff variables. `None` means the network has the one-step
/// property.
pub fn first_long_edge(net: &InducedNet) -> Option<(VarId, VarId)> {
    for v in net.vars() {
        if net.var(v).kind == VarKind::DecisionPayoff {
            continue;
        }
        let t = net.var(v).time;
        for &p in &net.var(v).parents {
            if t > net.var(p).time + 1 {
                return Some((p, v));
            }
        }
    }
    None
}

pub fn is_one_step(net: &InducedNet) -> bool {
    first_long_edge(net).is_none()
}

fn ensure_one_step(net: &InducedNet) -> Result<()> {
    match first_long_edge(net) {
        None => Ok(()),
        Some((p, c)) => Err(Error::NotOneStep {
            parent: net.var(p).id.clone(),
            child: net.var(c).id.clone(),
        }),
    }
}

/// The interface at time τ: variables at τ with a child at τ+1, plus every
/// decision whose payoff at a later time keeps it alive through τ.
pub fn interface_at(net: &InducedNet, time: usize) -> Result<BTreeSet<VarId>> {
    ensure_one_step(net)?;
    let mut out = BTreeSet::new();
    for v in net.vars() {
        let var = net.var(v);
        if var.time == time
            && net
                .children(v)
                .iter()
                .any(|&c| net.var(c).time == time + 1)
        {
            out.insert(v);
        }
        if var.kind == VarKind::Decision && var.time <= time {
            let persists = net.children(v).iter().any(|&c| {
                net.var(c).kind == VarKind::DecisionPayoff && net.var(c).time > time
            });
            if persists {
                out.insert(v);
            }
        }
    }
    Ok(out)
}

/// Effective variables per time for one payoff target: at each τ before the
/// target's time, the interface members that are ancestors of the target
/// (the target's own decision persisting from its decision time onward); at
/// the target's time, the target itself.
pub fn effective_variables(
    net: &InducedNet,
    target: VarId,
) -> Result<BTreeMap<usize, BTreeSet<VarId>>> {
    ensure_one_step(net)?;
    let tvar = net.var(target);
    if tvar.kind != VarKind::DecisionPayoff {
        return Err(Error::NotAPayoffVariable(tvar.id.clone()));
    }
    let t_final = tvar.time;
    let anc = net.ancestors(target);
    let selector = payoff_selector(net, target);

    let mut out: BTreeMap<usize, BTreeSet<VarId>> = BTreeMap::new();
    for t in 0..t_final {
        out.insert(t, BTreeSet::new());
    }
    for &v in &anc {
        let var = net.var(v);
        if var.time >= t_final {
            // same-step ancestors are handled inside the final step
            continue;
        }
        if net
            .children(v)
            .iter()
            .any(|&c| net.var(c).time == var.time + 1 && (anc.contains(&c) || c == target))
        {
            out.get_mut(&var.time).unwrap().insert(v);
        }
    }
    if let Some(d) = selector {
        let dt = net.var(d).time;
        for t in dt..t_final {
            out.get_mut(&t).unwrap().insert(d);
        }
    }
    let mut last = BTreeSet::new();
    last.insert(target);
    out.insert(t_final, last);
    Ok(out)
}

/// The decision that selects which utility the payoff receives.
pub fn payoff_selector(net: &InducedNet, target: VarId) -> Option<VarId> {
    match net.cpd(target) {
        Cpd::Multiplexer { selector, .. } => Some(*selector),
        Cpd::Mask { selector, .. } => Some(*selector),
        _ => net
            .var(target)
            .parents
            .iter()
            .copied()
            .find(|&p| net.var(p).kind == VarKind::Decision),
    }
}
