//! Forward filtering over per-step interfaces.
//!
//! For a payoff target at time `t'`, the filter keeps only the joint
//! distribution over the effective variables at each step, advancing it with
//! `P(V^τ) = Σ_v P(V^τ | V^{τ-1}=v) P(V^{τ-1}=v)`. Within a step, same-step
//! decisions are conditionally independent given the previous interface, so
//! they and the intermediate count links are eliminated along the chain
//! before anything else; remaining same-step variables go through a greedy
//! fill-minimizing order. Count values are never tabulated against their full
//! ranges inside a step: only the step's contribution is kept, and the
//! previous count enters as a per-instantiation offset.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::inference::ve::{eliminate_in_order, product_cells, CellTracker};
use crate::net::{Cpd, Domain, InducedNet, NetVariable, VarId, VarKind};
use crate::transform::effective_variables;

/// The running joint over the effective variables at one time step.
#[derive(Clone, Debug)]
pub struct FilterState {
    pub time: usize,
    pub vars: Vec<VarId>,
    pub joint: Factor,
}

impl FilterState {
    fn initial() -> Self {
        FilterState {
            time: 0,
            vars: Vec::new(),
            joint: Factor::scalar(1.0),
        }
    }

    /// Invokes `f` for every positive-probability instantiation.
    fn for_each_support<F: FnMut(&HashMap<VarId, usize>, f64) -> Result<()>>(
        &self,
        mut f: F,
    ) -> Result<()> {
        let cards = self.joint.cards();
        let mut digits = vec![0usize; self.vars.len()];
        let mut assign: HashMap<VarId, usize> = HashMap::with_capacity(self.vars.len());
        for &p in self.joint.table().iter() {
            if p > 0.0 {
                assign.clear();
                for (d, &v) in self.vars.iter().enumerate() {
                    assign.insert(v, digits[d]);
                }
                f(&assign, p)?;
            }
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    /// `P(target)`.
    pub distribution: Factor,
    pub peak_cells: u64,
    pub steps: usize,
}

/// How each output variable of a step obtains its value.
#[derive(Clone, Debug)]
enum OutSource {
    /// A decision carried forward: its value is already in the previous
    /// interface.
    Carry,
    /// A relay copy: the value of its source in the previous interface.
    CopyOf(VarId),
    /// An action count: offset from the previous interface plus this step's
    /// contribution.
    Count {
        prev_summands: Vec<VarId>,
        fixed_hits: Vec<(VarId, usize)>,
        delta: Option<VarId>,
    },
    /// Read from the kernel result.
    Kernel,
}

/// Fixing rule for a same-step variable fully determined by the previous
/// interface instantiation.
#[derive(Clone, Debug)]
enum ReduceDim {
    FromPrev(VarId),
    FixedCopy { dim: VarId, source: VarId },
    FixedCount {
        dim: VarId,
        prev_summands: Vec<VarId>,
        fixed_hits: Vec<(VarId, usize)>,
    },
}

/// Count dimension replaced by this step's contribution, shifted per
/// instantiation by the previous count.
#[derive(Clone, Debug)]
struct SubDim {
    dim: VarId,
    delta: VarId,
    delta_card: usize,
    prev_summands: Vec<VarId>,
    fixed_hits: Vec<(VarId, usize)>,
}

#[derive(Clone, Debug)]
enum KernelSpec {
    /// Behavior strategy of a same-step decision, sliced at the previous
    /// interface instantiation.
    Strategy { var: VarId },
    /// A pre-materialized conditional, reduced and count-substituted per
    /// instantiation.
    Prepared {
        base: Factor,
        reduce_at: Vec<ReduceDim>,
        subs: Vec<SubDim>,
    },
}

impl KernelSpec {
    fn is_constant(&self) -> bool {
        match self {
            KernelSpec::Strategy { .. } => false,
            KernelSpec::Prepared { reduce_at, subs, .. } => reduce_at.is_empty() && subs.is_empty(),
        }
    }
}

struct StepPlan {
    time: usize,
    prev_vars: Vec<VarId>,
    out_vars: Vec<VarId>,
    out_cards: Vec<usize>,
    out_sources: Vec<OutSource>,
    /// Instantiation-independent conditionals, built once.
    constant_factors: Vec<Factor>,
    /// Conditionals rebuilt per instantiation; their contents key the kernel
    /// cache.
    variable_specs: Vec<KernelSpec>,
    elim_order: Vec<VarId>,
    retained: BTreeSet<VarId>,
}

struct CacheEntry {
    factor: Factor,
    /// Per output variable, the position of its kernel dimension in the
    /// cached factor's scope (for `Kernel` and delta-bearing `Count`
    /// sources).
    dim_of_out: Vec<Option<usize>>,
}

fn offset_of(v: &HashMap<VarId, usize>, summands: &[VarId], hits: &[(VarId, usize)]) -> usize {
    let mut off = 0usize;
    for s in summands {
        off += v[s];
    }
    for (d, k) in hits {
        if v[d] == *k {
            off += 1;
        }
    }
    off
}

/// Replaces a count dimension with a contribution dimension of `delta_card`
/// values read at `offset + δ`.
fn substitute_dim(
    f: &Factor,
    dim: VarId,
    delta: VarId,
    delta_card: usize,
    offset: usize,
) -> Result<Factor> {
    let pos = f
        .scope()
        .iter()
        .position(|&x| x == dim)
        .ok_or(Error::NotInScope)?;
    let mut scope = f.scope().to_vec();
    let mut cards = f.cards().to_vec();
    let dim_card = cards[pos];
    if offset + delta_card > dim_card {
        return Err(Error::Internal(format!(
            "contribution range {}..{} escapes a count domain of {}",
            offset,
            offset + delta_card - 1,
            dim_card
        )));
    }
    scope[pos] = delta;
    cards[pos] = delta_card;
    let n: usize = cards.iter().product();
    let mut table = Vec::with_capacity(n);
    let src_strides = f.strides();
    let mut digits = vec![0usize; cards.len()];
    for _ in 0..n {
        let mut idx = 0usize;
        for (i, &d) in digits.iter().enumerate() {
            let val = if i == pos { offset + d } else { d };
            idx += val * src_strides[i];
        }
        table.push(f.table()[idx]);
        for d in (0..digits.len()).rev() {
            digits[d] += 1;
            if digits[d] < cards[d] {
                break;
            }
            digits[d] = 0;
        }
    }
    Factor::new(scope, cards, table)
}

/// Same-step closure: the out-set members at this time plus all their
/// same-step ancestors.
fn same_step_closure(net: &InducedNet, out: &BTreeSet<VarId>, time: usize) -> Vec<VarId> {
    let mut seen: BTreeSet<VarId> = out
        .iter()
        .copied()
        .filter(|&v| net.var(v).time == time)
        .collect();
    let mut stack: Vec<VarId> = seen.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &p in &net.var(v).parents {
            if net.var(p).time == time && seen.insert(p) {
                stack.push(p);
            }
        }
    }
    seen.into_iter().collect()
}

fn greedy_fill_order(
    scopes: &[Vec<VarId>],
    eliminate: &BTreeSet<VarId>,
    names: &HashMap<VarId, String>,
) -> Vec<VarId> {
    let mut adj: HashMap<VarId, HashSet<VarId>> = HashMap::new();
    for s in scopes {
        for &a in s {
            adj.entry(a).or_default();
        }
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                adj.get_mut(&s[i]).unwrap().insert(s[j]);
                adj.get_mut(&s[j]).unwrap().insert(s[i]);
            }
        }
    }
    let name = |v: VarId| names.get(&v).cloned().unwrap_or_else(|| format!("#{}", v.0));
    let mut remaining: Vec<VarId> = eliminate.iter().copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, &v) in remaining.iter().enumerate() {
            let neigh: Vec<VarId> = adj
                .get(&v)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default();
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
                Some((bf, bi)) => fill < bf || (fill == bf && name(v) < name(remaining[bi])),
            };
            if better {
                best = Some((fill, i));
            }
        }
        let (_, i) = best.unwrap();
        let v = remaining.swap_remove(i);
        let neigh: Vec<VarId> = adj
            .get(&v)
            .map(|s| s.iter().copied().filter(|n| remaining.contains(n)).collect())
            .unwrap_or_default();
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

fn plan_step(
    net: &InducedNet,
    prev: &[VarId],
    out: &BTreeSet<VarId>,
    time: usize,
) -> Result<StepPlan> {
    let prev_set: BTreeSet<VarId> = prev.iter().copied().collect();
    let in_prev = |v: VarId| prev_set.contains(&v);
    let mut names: HashMap<VarId, String> = HashMap::new();

    let s_vars = same_step_closure(net, out, time);
    for &v in s_vars.iter().chain(prev.iter()) {
        names.insert(v, net.var(v).id.clone());
    }

    let mut next_synthetic = net.len();
    let mut synth_cards: HashMap<VarId, usize> = HashMap::new();
    let mut specs: Vec<KernelSpec> = Vec::new();

    // count handling decided first so consumers can reference deltas
    struct CountInfo {
        prev_summands: Vec<VarId>,
        fixed_hits: Vec<(VarId, usize)>,
        delta: Option<VarId>,
        delta_card: usize,
    }
    let mut count_info: HashMap<VarId, CountInfo> = HashMap::new();
    let mut synth_specs: Vec<KernelSpec> = Vec::new();

    let card = |net: &InducedNet, synth: &HashMap<VarId, usize>, v: VarId| -> usize {
        synth
            .get(&v)
            .copied()
            .unwrap_or_else(|| net.var(v).domain.size())
    };

    for &v in &s_vars {
        let var = net.var(v);
        if !matches!(var.kind, VarKind::ActionCount) {
            continue;
        }
        let (summands, indicators) = match net.cpd(v) {
            Cpd::Counter { summands, indicators } => (summands.clone(), indicators.clone()),
            other => {
                return Err(Error::Internal(format!(
                    "count `{}` has a non-counting conditional: {:?}",
                    var.id, other
                )))
            }
        };
        let mut prev_summands = Vec::new();
        let mut here_summands = Vec::new();
        for s in summands {
            if net.var(s).time == time {
                here_summands.push(s);
            } else if in_prev(s) {
                prev_summands.push(s);
            } else {
                return Err(Error::Internal(format!(
                    "count `{}` depends on `{}` outside the previous interface",
                    var.id,
                    net.var(s).id
                )));
            }
        }
        let mut fixed_hits = Vec::new();
        let mut here_hits = Vec::new();
        for (d, k) in indicators {
            if net.var(d).time == time {
                here_hits.push((d, k));
            } else if in_prev(d) {
                fixed_hits.push((d, k));
            } else {
                return Err(Error::Internal(format!(
                    "count `{}` depends on `{}` outside the previous interface",
                    var.id,
                    net.var(d).id
                )));
            }
        }
        let info = match (here_summands.len(), here_hits.len()) {
            (0, 0) => CountInfo { prev_summands, fixed_hits, delta: None, delta_card: 1 },
            (1, 0) => {
                let m = here_summands[0];
                CountInfo {
                    prev_summands,
                    fixed_hits,
                    delta: Some(m),
                    delta_card: card(net, &synth_cards, m),
                }
            }
            _ => {
                // synthesize the step contribution as its own variable
                let delta = VarId(next_synthetic);
                next_synthetic += 1;
                let max: usize = here_summands
                    .iter()
                    .map(|&s| card(net, &synth_cards, s) - 1)
                    .sum::<usize>()
                    + here_hits.len();
                let delta_card = max + 1;
                synth_cards.insert(delta, delta_card);
                names.insert(delta, format!("delta[{}]", var.id));
                let mut scope: Vec<VarId> = here_summands.clone();
                scope.extend(here_hits.iter().map(|&(d, _)| d));
                let cards: Vec<usize> = scope.iter().map(|&x| card(net, &synth_cards, x)).collect();
                let mut full_scope = scope.clone();
                full_scope.push(delta);
                let mut full_cards = cards.clone();
                full_cards.push(delta_card);
                let n: usize = full_cards.iter().product::<usize>() / delta_card;
                let mut table = vec![0.0; n * delta_card];
                let mut digits = vec![0usize; scope.len()];
                for row in 0..n {
                    let mut total = 0usize;
                    for i in 0..scope.len() {
                        if i < here_summands.len() {
                            total += digits[i];
                        } else {
                            let (_, k) = here_hits[i - here_summands.len()];
                            if digits[i] == k {
                                total += 1;
                            }
                        }
                    }
                    table[row * delta_card + total] = 1.0;
                    for d in (0..digits.len()).rev() {
                        digits[d] += 1;
                        if digits[d] < cards[d] {
                            break;
                        }
                        digits[d] = 0;
                    }
                }
                synth_specs.push(KernelSpec::Prepared {
                    base: Factor::new(full_scope, full_cards, table)?,
                    reduce_at: Vec::new(),
                    subs: Vec::new(),
                });
                CountInfo { prev_summands, fixed_hits, delta: Some(delta), delta_card }
            }
        };
        count_info.insert(v, info);
    }

    // conditional specs for the remaining same-step variables
    let dim_rules = |v: VarId,
                     scope: &[VarId],
                     count_info: &HashMap<VarId, CountInfo>|
     -> Result<(Vec<ReduceDim>, Vec<SubDim>)> {
        let mut reduce_at = Vec::new();
        let mut subs = Vec::new();
        for &d in scope {
            if d == v {
                continue;
            }
            let dvar = net.var(d);
            if dvar.time == time {
                match dvar.kind {
                    VarKind::Copy => {
                        let src = dvar.parents[0];
                        if !in_prev(src) {
                            return Err(Error::Internal(format!(
                                "copy `{}` relays from outside the previous interface",
                                dvar.id
                            )));
                        }
                        reduce_at.push(ReduceDim::FixedCopy { dim: d, source: src });
                    }
                    VarKind::ActionCount => {
                        let info = count_info.get(&d).ok_or_else(|| {
                            Error::Internal(format!("count `{}` missing from the step plan", dvar.id))
                        })?;
                        match info.delta {
                            None => reduce_at.push(ReduceDim::FixedCount {
                                dim: d,
                                prev_summands: info.prev_summands.clone(),
                                fixed_hits: info.fixed_hits.clone(),
                            }),
                            Some(delta) => subs.push(SubDim {
                                dim: d,
                                delta,
                                delta_card: info.delta_card,
                                prev_summands: info.prev_summands.clone(),
                                fixed_hits: info.fixed_hits.clone(),
                            }),
                        }
                    }
                    _ => {} // stays a kernel dimension
                }
            } else if in_prev(d) {
                reduce_at.push(ReduceDim::FromPrev(d));
            } else {
                return Err(Error::Internal(format!(
                    "`{}` conditions on `{}` outside the previous interface",
                    net.var(v).id,
                    dvar.id
                )));
            }
        }
        Ok((reduce_at, subs))
    };

    let mut decisions_here: Vec<VarId> = Vec::new();
    // scopes of non-counting conditionals; decisions they mention must not be
    // eliminated inside the chain phase, or their tables ride along every
    // chain product
    let mut other_scopes: Vec<Vec<VarId>> = Vec::new();
    for &v in &s_vars {
        let var = net.var(v);
        match var.kind {
            VarKind::ActionCount | VarKind::Copy => {} // handled via rules
            VarKind::Decision => {
                for &p in &var.parents {
                    if !in_prev(p) {
                        return Err(Error::Internal(format!(
                            "decision `{}` observes `{}` outside the previous interface",
                            var.id,
                            net.var(p).id
                        )));
                    }
                }
                specs.push(KernelSpec::Strategy { var: v });
                decisions_here.push(v);
            }
            VarKind::Chance
            | VarKind::Utility
            | VarKind::DecisionPayoff
            | VarKind::IntermediateCount => {
                let base = net.cpd_factor(v)?;
                let (reduce_at, subs) = dim_rules(v, base.scope(), &count_info)?;
                let spec = KernelSpec::Prepared { base, reduce_at, subs };
                if var.kind != VarKind::IntermediateCount {
                    other_scopes.push(match &spec {
                        KernelSpec::Prepared { base, .. } => base.scope().to_vec(),
                        _ => unreachable!(),
                    });
                }
                specs.push(spec);
            }
        }
    }
    specs.extend(synth_specs);

    // output classification
    let mut out_vars: Vec<VarId> = out.iter().copied().collect();
    out_vars.sort_unstable();
    let mut out_cards = Vec::with_capacity(out_vars.len());
    let mut out_sources = Vec::with_capacity(out_vars.len());
    for &v in &out_vars {
        let var = net.var(v);
        out_cards.push(var.domain.size());
        let src = if var.time < time {
            if !in_prev(v) {
                return Err(Error::Internal(format!(
                    "carried variable `{}` missing from the previous interface",
                    var.id
                )));
            }
            OutSource::Carry
        } else {
            match var.kind {
                VarKind::Copy => OutSource::CopyOf(var.parents[0]),
                VarKind::ActionCount => {
                    let info = &count_info[&v];
                    OutSource::Count {
                        prev_summands: info.prev_summands.clone(),
                        fixed_hits: info.fixed_hits.clone(),
                        delta: info.delta,
                    }
                }
                _ => OutSource::Kernel,
            }
        };
        out_sources.push(src);
    }

    // retained kernel dimensions
    let mut retained: BTreeSet<VarId> = BTreeSet::new();
    for (i, &v) in out_vars.iter().enumerate() {
        match &out_sources[i] {
            OutSource::Kernel => {
                retained.insert(v);
            }
            OutSource::Count { delta: Some(d), .. } => {
                retained.insert(*d);
            }
            _ => {}
        }
    }

    // planned kernel scopes after reductions and substitutions
    let planned_scope = |spec: &KernelSpec| -> Vec<VarId> {
        match spec {
            KernelSpec::Strategy { var } => vec![*var],
            KernelSpec::Prepared { base, reduce_at, subs } => base
                .scope()
                .iter()
                .copied()
                .filter(|d| {
                    !reduce_at.iter().any(|r| match r {
                        ReduceDim::FromPrev(x) => x == d,
                        ReduceDim::FixedCopy { dim, .. } => dim == d,
                        ReduceDim::FixedCount { dim, .. } => dim == d,
                    })
                })
                .map(|d| subs.iter().find(|s| s.dim == d).map_or(d, |s| s.delta))
                .collect(),
        }
    };
    let scopes: Vec<Vec<VarId>> = specs.iter().map(planned_scope).collect();
    let mut kernel_dims: BTreeSet<VarId> = BTreeSet::new();
    for s in &scopes {
        kernel_dims.extend(s.iter().copied());
    }
    let (constant_specs, variable_specs): (Vec<KernelSpec>, Vec<KernelSpec>) =
        specs.into_iter().partition(|s| s.is_constant());
    let constant_factors: Vec<Factor> = constant_specs
        .into_iter()
        .map(|s| match s {
            KernelSpec::Prepared { base, .. } => base,
            KernelSpec::Strategy { .. } => unreachable!("strategies are never constant"),
        })
        .collect();
    let eliminable: BTreeSet<VarId> = kernel_dims
        .iter()
        .copied()
        .filter(|d| !retained.contains(d))
        .collect();

    // chain phase: same-step decisions in id order, interleaved with the
    // intermediate links that die right after them; decisions mentioned by a
    // non-counting conditional wait for the fill-minimizing phase
    decisions_here.sort_by(|&a, &b| net.var(a).id.cmp(&net.var(b).id));
    let elim_decisions: Vec<VarId> = decisions_here
        .iter()
        .copied()
        .filter(|d| eliminable.contains(d) && !other_scopes.iter().any(|s| s.contains(d)))
        .collect();
    let position: HashMap<VarId, usize> = elim_decisions
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, i))
        .collect();
    let mut deadline: HashMap<VarId, usize> = HashMap::new();
    for &v in &s_vars {
        if net.var(v).kind != VarKind::IntermediateCount || !eliminable.contains(&v) {
            continue;
        }
        let mut dl = usize::MAX;
        for &c in &s_vars {
            if let Cpd::Counter { summands, indicators } = net.cpd(c) {
                if summands.contains(&v) {
                    if let [(d, _)] = indicators.as_slice() {
                        if let Some(&p) = position.get(d) {
                            dl = p;
                        }
                    }
                }
            }
        }
        deadline.insert(v, dl);
    }
    let mut chain_order: Vec<VarId> = Vec::new();
    for (k, &d) in elim_decisions.iter().enumerate() {
        chain_order.push(d);
        let mut due: Vec<VarId> = deadline
            .iter()
            .filter(|&(_, &dl)| dl == k)
            .map(|(&m, _)| m)
            .collect();
        due.sort_by(|&a, &b| names[&a].cmp(&names[&b]));
        chain_order.extend(due);
    }
    let chain_set: BTreeSet<VarId> = chain_order.iter().copied().collect();
    let rest: BTreeSet<VarId> = eliminable
        .iter()
        .copied()
        .filter(|d| !chain_set.contains(d))
        .collect();
    let mut elim_order = chain_order;
    elim_order.extend(greedy_fill_order(&scopes, &rest, &names));

    Ok(StepPlan {
        time,
        prev_vars: prev.to_vec(),
        out_vars,
        out_cards,
        out_sources,
        constant_factors,
        variable_specs,
        elim_order,
        retained,
    })
}

/// Builds the instantiation-dependent kernel factors and the cache key (the
/// concatenated table contents, which identify the kernel exactly).
fn variable_kernel_factors(
    net: &InducedNet,
    plan: &StepPlan,
    v: &HashMap<VarId, usize>,
) -> Result<(Vec<Factor>, Vec<u64>)> {
    let mut factors = Vec::with_capacity(plan.variable_specs.len());
    let mut key: Vec<u64> = Vec::with_capacity(16);
    for spec in &plan.variable_specs {
        let f = match spec {
            KernelSpec::Strategy { var } => {
                let dist = match net.cpd(*var) {
                    Cpd::Strategy { rules, default } => {
                        let k: Vec<usize> =
                            net.var(*var).parents.iter().map(|p| v[p]).collect();
                        rules.get(&k).unwrap_or(default).clone()
                    }
                    other => {
                        return Err(Error::Internal(format!(
                            "decision `{}` carries a non-strategy conditional: {:?}",
                            net.var(*var).id,
                            other
                        )))
                    }
                };
                let n = dist.len();
                Factor::new(vec![*var], vec![n], dist)?
            }
            KernelSpec::Prepared { base, reduce_at, subs } => {
                let mut f = if reduce_at.is_empty() {
                    base.clone()
                } else {
                    let ev: Vec<(VarId, usize)> = reduce_at
                        .iter()
                        .map(|r| match r {
                            ReduceDim::FromPrev(d) => (*d, v[d]),
                            ReduceDim::FixedCopy { dim, source } => (*dim, v[source]),
                            ReduceDim::FixedCount { dim, prev_summands, fixed_hits } => {
                                (*dim, offset_of(v, prev_summands, fixed_hits))
                            }
                        })
                        .collect();
                    base.reduce(&ev)?
                };
                for s in subs {
                    let off = offset_of(v, &s.prev_summands, &s.fixed_hits);
                    f = substitute_dim(&f, s.dim, s.delta, s.delta_card, off)?;
                }
                f
            }
        };
        key.push(f.len() as u64);
        key.extend(f.table().iter().map(|x| x.to_bits()));
        factors.push(f);
    }
    Ok((factors, key))
}

fn run_step(
    net: &InducedNet,
    plan: &StepPlan,
    state: &FilterState,
    tracker: &mut CellTracker,
) -> Result<FilterState> {
    debug_assert_eq!(plan.prev_vars, state.vars);
    let mut out = Factor::zeros(plan.out_vars.clone(), plan.out_cards.clone())?;
    tracker.alloc(out.len() as u128)?;
    let out_strides = out.strides();

    let mut cache: HashMap<Vec<u64>, CacheEntry> = HashMap::new();
    let mut cache_cells: u128 = 0;

    state.for_each_support(|v, p| {
        let (var_factors, key) = variable_kernel_factors(net, plan, v)?;
        if !cache.contains_key(&key) {
            let mut factors = plan.constant_factors.clone();
            factors.extend(var_factors);
            let mut tr = CellTracker::new(None);
            let remaining = eliminate_in_order(factors, &plan.elim_order, &mut tr)?;
            tracker.alloc(tr.peak() as u128)?;
            tracker.free(tr.peak() as u128);
            let mut product = Factor::scalar(1.0);
            for f in remaining {
                let cells = product_cells(&product, &f);
                tracker.alloc(cells)?;
                tracker.free(cells);
                product = product.product(&f)?;
            }
            let got: BTreeSet<VarId> = product.scope().iter().copied().collect();
            if !got.is_subset(&plan.retained) {
                return Err(Error::Internal(format!(
                    "kernel left unexpected dimensions at step {}",
                    plan.time
                )));
            }
            let dim_of_out: Vec<Option<usize>> = plan
                .out_vars
                .iter()
                .zip(plan.out_sources.iter())
                .map(|(&ov, src)| {
                    let want = match src {
                        OutSource::Kernel => Some(ov),
                        OutSource::Count { delta, .. } => *delta,
                        _ => None,
                    };
                    want.and_then(|w| product.scope().iter().position(|&x| x == w))
                })
                .collect();
            // a retained dimension must surface unless it is a delta that no
            // factor mentions (an impossible plan); surface check happens at
            // accumulation below
            cache_cells += product.len() as u128;
            tracker.alloc(product.len() as u128)?;
            cache.insert(key.clone(), CacheEntry { factor: product, dim_of_out });
        }
        let entry = &cache[&key];
        let kf = &entry.factor;
        let cards = kf.cards();
        let mut digits = vec![0usize; cards.len()];
        for &val in kf.table().iter() {
            if val != 0.0 {
                let mut idx = 0usize;
                for (o, src) in plan.out_sources.iter().enumerate() {
                    let value = match src {
                        OutSource::Carry => v[&plan.out_vars[o]],
                        OutSource::CopyOf(s) => v[s],
                        OutSource::Count { prev_summands, fixed_hits, delta } => {
                            let base = offset_of(v, prev_summands, fixed_hits);
                            match delta {
                                None => base,
                                Some(_) => {
                                    let d = entry.dim_of_out[o].ok_or_else(|| {
                                        Error::Internal(
                                            "step contribution missing from the kernel result".into(),
                                        )
                                    })?;
                                    base + digits[d]
                                }
                            }
                        }
                        OutSource::Kernel => {
                            let d = entry.dim_of_out[o].ok_or_else(|| {
                                Error::Internal("output missing from the kernel result".into())
                            })?;
                            digits[d]
                        }
                    };
                    idx += value * out_strides[o];
                }
                out.table_mut()[idx] += p * val;
            }
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                if digits[d] < cards[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        Ok(())
    })?;

    tracker.free(cache_cells);
    tracker.free(state.joint.len() as u128);

    let total = out.sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Internal(format!(
            "step {} left probability mass {total}",
            plan.time
        )));
    }
    Ok(FilterState {
        time: plan.time,
        vars: plan.out_vars.clone(),
        joint: out,
    })
}

fn run_forward(
    net: &InducedNet,
    eff: &BTreeMap<usize, BTreeSet<VarId>>,
    upto: usize,
    tracker: &mut CellTracker,
) -> Result<FilterState> {
    let empty = BTreeSet::new();
    let mut state = FilterState::initial();
    for t in 0..=upto {
        let prev: Vec<VarId> = if t == 0 {
            Vec::new()
        } else {
            eff.get(&(t - 1)).unwrap_or(&empty).iter().copied().collect()
        };
        let out = eff.get(&t).cloned().unwrap_or_default();
        let plan = plan_step(net, &prev, &out, t)?;
        state = run_step(net, &plan, &state, tracker)?;
    }
    Ok(state)
}

/// `P(target)` by forward filtering over the effective interfaces. The
/// network must satisfy the one-step property; it does not need the counting
/// rewrite, though the filter is only fast when counts have been decomposed.
pub fn interface_filter(net: &InducedNet, target: VarId) -> Result<Factor> {
    Ok(interface_filter_with_stats(net, target)?.distribution)
}

pub fn interface_filter_with_stats(net: &InducedNet, target: VarId) -> Result<FilterOutcome> {
    let eff = effective_variables(net, target)?;
    let t_final = net.var(target).time;
    let mut tracker = CellTracker::new(None);
    let state = run_forward(net, &eff, t_final, &mut tracker)?;
    Ok(FilterOutcome {
        distribution: state.joint,
        peak_cells: tracker.peak(),
        steps: t_final + 1,
    })
}

/// The conditional over this step's interface decisions and counts given the
/// previous interface: non-interface decisions and the intermediate links are
/// eliminated per previous-interface instantiation, decisions first in id
/// order with each link removed as soon as its chain no longer needs it.
pub fn step_decisions_counts(
    state: &FilterState,
    net: &InducedNet,
    time: usize,
) -> Result<Factor> {
    let iface = crate::transform::interface_at(net, time)?;
    // interface decisions stay; every count at this step is an output, since
    // counts are what the following step conditions on
    let mut out: BTreeSet<VarId> = iface
        .iter()
        .copied()
        .filter(|&v| net.var(v).kind == VarKind::Decision && net.var(v).time == time)
        .collect();
    out.extend(
        net.vars()
            .filter(|&v| net.var(v).kind == VarKind::ActionCount && net.var(v).time == time),
    );
    conditional_over(net, state, time, &out)
}

/// The conditional over this step's interface chance variables given the
/// step's counts and the previous interface, eliminating the non-interface
/// chance variables by a greedy fill-minimizing order.
pub fn step_chance(state: &FilterState, net: &InducedNet, time: usize) -> Result<Factor> {
    let iface = crate::transform::interface_at(net, time)?;
    let _ = state;
    let retained: BTreeSet<VarId> = iface
        .iter()
        .copied()
        .filter(|&v| net.var(v).kind == VarKind::Chance && net.var(v).time == time)
        .collect();
    // the same-step chance subgraph
    let mut chance: BTreeSet<VarId> = retained.clone();
    let mut stack: Vec<VarId> = chance.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &p in &net.var(v).parents {
            if net.var(p).kind == VarKind::Chance && net.var(p).time == time && chance.insert(p) {
                stack.push(p);
            }
        }
    }
    if chance.is_empty() {
        return Ok(Factor::scalar(1.0));
    }
    let mut factors = Vec::new();
    let mut names = HashMap::new();
    for &v in &chance {
        factors.push(net.cpd_factor(v)?);
        names.insert(v, net.var(v).id.clone());
    }
    let eliminate: BTreeSet<VarId> = chance
        .iter()
        .copied()
        .filter(|v| !retained.contains(v))
        .collect();
    let scopes: Vec<Vec<VarId>> = factors.iter().map(|f| f.scope().to_vec()).collect();
    let order = greedy_fill_order(&scopes, &eliminate, &names);
    let mut tracker = CellTracker::new(None);
    let remaining = eliminate_in_order(factors, &order, &mut tracker)?;
    let mut product = Factor::scalar(1.0);
    for f in remaining {
        product = product.product(&f)?;
    }
    Ok(product)
}

/// Dense conditional `P(out | state.vars)` computed row by row with the step
/// kernel; rows are produced for every previous-interface configuration.
fn conditional_over(
    net: &InducedNet,
    state: &FilterState,
    time: usize,
    out: &BTreeSet<VarId>,
) -> Result<Factor> {
    let plan = plan_step(net, &state.vars, out, time)?;
    let prev_cards: Vec<usize> = state
        .vars
        .iter()
        .map(|&v| net.var(v).domain.size())
        .collect();
    let mut scope = state.vars.clone();
    scope.extend(plan.out_vars.iter().copied());
    let mut cards = prev_cards.clone();
    cards.extend(plan.out_cards.iter().copied());
    let mut cond = Factor::zeros(scope, cards)?;
    let strides = cond.strides();
    let out_strides = &strides[state.vars.len()..];
    let prev_strides = &strides[..state.vars.len()];

    let mut cache: HashMap<Vec<u64>, CacheEntry> = HashMap::new();
    let rows: usize = prev_cards.iter().product();
    let mut digits = vec![0usize; state.vars.len()];
    for _ in 0..rows.max(1) {
        let mut v: HashMap<VarId, usize> = HashMap::with_capacity(state.vars.len());
        let mut row_base = 0usize;
        for (i, &pv) in state.vars.iter().enumerate() {
            v.insert(pv, digits[i]);
            row_base += digits[i] * prev_strides[i];
        }
        let (var_factors, key) = variable_kernel_factors(net, &plan, &v)?;
        if !cache.contains_key(&key) {
            let mut factors = plan.constant_factors.clone();
            factors.extend(var_factors);
            let mut tr = CellTracker::new(None);
            let remaining = eliminate_in_order(factors, &plan.elim_order, &mut tr)?;
            let mut product = Factor::scalar(1.0);
            for f in remaining {
                product = product.product(&f)?;
            }
            let dim_of_out: Vec<Option<usize>> = plan
                .out_vars
                .iter()
                .zip(plan.out_sources.iter())
                .map(|(&ov, src)| {
                    let want = match src {
                        OutSource::Kernel => Some(ov),
                        OutSource::Count { delta, .. } => *delta,
                        _ => None,
                    };
                    want.and_then(|w| product.scope().iter().position(|&x| x == w))
                })
                .collect();
            cache.insert(key.clone(), CacheEntry { factor: product, dim_of_out });
        }
        let entry = &cache[&key];
        let kf = &entry.factor;
        let kcards = kf.cards();
        let mut kdigits = vec![0usize; kcards.len()];
        for &val in kf.table().iter() {
            if val != 0.0 {
                let mut idx = row_base;
                for (o, src) in plan.out_sources.iter().enumerate() {
                    let value = match src {
                        OutSource::Carry => v[&plan.out_vars[o]],
                        OutSource::CopyOf(s) => v[s],
                        OutSource::Count { prev_summands, fixed_hits, delta } => {
                            let base = offset_of(&v, prev_summands, fixed_hits);
                            match delta {
                                None => base,
                                Some(_) => base + kdigits[entry.dim_of_out[o].unwrap()],
                            }
                        }
                        OutSource::Kernel => kdigits[entry.dim_of_out[o].unwrap()],
                    };
                    idx += value * out_strides[o];
                }
                cond.table_mut()[idx] += val;
            }
            for d in (0..kdigits.len()).rev() {
                kdigits[d] += 1;
                if kdigits[d] < kcards[d] {
                    break;
                }
                kdigits[d] = 0;
            }
        }
        for d in (0..digits.len()).rev() {
            digits[d] += 1;
            if digits[d] < prev_cards[d] {
                break;
            }
            digits[d] = 0;
        }
    }
    Ok(cond)
}

/// One per-action component of a payoff: the sub-payoff equal to the selected
/// utility when the decision matches, zero otherwise.
#[derive(Clone, Debug)]
pub struct CsiComponent {
    pub target: VarId,
    pub action: String,
    pub action_index: usize,
}

/// Splits a multiplexer payoff into per-action sub-payoffs whose expectations
/// sum to the payoff's expectation.
pub fn csi_decompose(net: &InducedNet, target: VarId) -> Result<(InducedNet, Vec<CsiComponent>)> {
    let (selector, sources) = match net.cpd(target) {
        Cpd::Multiplexer { selector, sources } => (*selector, sources.clone()),
        _ => return Err(Error::NotAPayoffVariable(net.var(target).id.clone())),
    };
    let actions = match &net.var(selector).domain {
        Domain::Actions(a) => a.clone(),
        _ => return Err(Error::Internal("selector is not a decision".into())),
    };
    let time = net.var(target).time;
    let mut out = net.clone();
    let mut comps = Vec::with_capacity(sources.len());
    for (k, &src) in sources.iter().enumerate() {
        let mut values = match &net.var(src).domain {
            Domain::Reals(v) => v.clone(),
            _ => return Err(Error::Internal("utility source is not real-valued".into())),
        };
        values.push(0.0);
        values.sort_by(f64::total_cmp);
        values.dedup();
        let id = format!("{}|{}", net.var(target).id, actions[k]);
        let v = out.add_variable(
            NetVariable {
                id,
                kind: VarKind::DecisionPayoff,
                time,
                domain: Domain::Reals(values),
                parents: vec![selector, src],
            },
            Cpd::Mask {
                selector,
                match_index: k,
                source: src,
            },
        );
        comps.push(CsiComponent {
            target: v,
            action: actions[k].clone(),
            action_index: k,
        });
    }
    out.finalize();
    Ok((out, comps))
}

#[derive(Clone, Debug)]
pub struct CsiOutcome {
    pub expected: f64,
    pub per_action: Vec<(String, f64)>,
    /// Forward passes actually run; sub-payoffs with identical effective
    /// interfaces share one.
    pub forward_passes: usize,
    pub peak_cells: u64,
}

/// Expected value of a payoff by per-action decomposition: each sub-payoff is
/// filtered over its own (smaller) effective interfaces, and sub-payoffs with
/// identical interfaces share a single forward pass.
pub fn csi_expected_payoff(net: &InducedNet, target: VarId) -> Result<CsiOutcome> {
    let (net2, comps) = csi_decompose(net, target)?;
    let t_final = net2.var(target).time;
    let mut tracker = CellTracker::new(None);

    let mut effs = Vec::with_capacity(comps.len());
    for c in &comps {
        effs.push(effective_variables(&net2, c.target)?);
    }
    let mut groups: BTreeMap<Vec<Vec<VarId>>, Vec<usize>> = BTreeMap::new();
    for (i, eff) in effs.iter().enumerate() {
        let key: Vec<Vec<VarId>> = (0..t_final)
            .map(|t| eff.get(&t).map(|s| s.iter().copied().collect()).unwrap_or_default())
            .collect();
        groups.entry(key).or_default().push(i);
    }

    let mut per_action: Vec<(String, f64)> = vec![(String::new(), 0.0); comps.len()];
    let forward_passes = groups.len();
    for idxs in groups.values() {
        let shared = &effs[idxs[0]];
        let state = if t_final == 0 {
            FilterState::initial()
        } else {
            run_forward(&net2, shared, t_final - 1, &mut tracker)?
        };
        for &i in idxs {
            let comp = &comps[i];
            let prev: Vec<VarId> = state.vars.clone();
            let out: BTreeSet<VarId> = [comp.target].into_iter().collect();
            let plan = plan_step(&net2, &prev, &out, t_final)?;
            let final_state = run_step(&net2, &plan, &state, &mut tracker)?;
            let dom = &net2.var(comp.target).domain;
            let mut e = 0.0;
            for (j, &p) in final_state.joint.table().iter().enumerate() {
                e += dom.real(j).unwrap_or(0.0) * p;
            }
            per_action[i] = (comp.action.clone(), e);
        }
    }
    let expected = per_action.iter().map(|(_, e)| e).sum();
    Ok(CsiOutcome {
        expected,
        per_action,
        forward_passes,
        peak_cells: tracker.peak(),
    })
}
