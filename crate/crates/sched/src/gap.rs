//! Assignment with outliers: jobs may be left out as long as the scheduled
//! profit reaches the target. Reduction to plain assignment via a virtual
//! zero-cost machine whose "processing times" are profits, LP relaxation,
//! slot-based rounding with a min-cost perfect matching, one-job profit
//! repair, and enumeration of expensive assignments.

use crate::lp::{self, LpModel, LpStatus, Rel};
use crate::model::{
    rat_int, ticks_of_units, GapInstance, ModelError, Rat, Segment, SegmentSchedule,
};

/// Job -> machine map over a (sub)instance; `machines` is the virtual id.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// One entry per kept job: machine id, or the virtual machine id.
    pub assign: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct VirtualInstance {
    /// Original ids of the kept jobs, in order.
    pub kept: Vec<usize>,
    /// Jobs discarded up front (no machine can run them within the bound).
    pub forced_outliers: Vec<usize>,
    /// Makespan bound of the virtual profit machine.
    pub t_vpm: u64,
}

/// Discard jobs no machine can run within the makespan bound and size the
/// virtual machine: its bound is the total profit of the kept jobs minus the
/// target, so profit parked on it never exceeds what the target can spare.
pub fn build_virtual_instance(inst: &GapInstance) -> Result<VirtualInstance, ModelError> {
    let mut kept = vec![];
    let mut forced_outliers = vec![];
    for (j, job) in inst.jobs.iter().enumerate() {
        if job.proc.iter().min().copied().unwrap_or(u64::MAX) > inst.makespan_bound {
            forced_outliers.push(j);
        } else {
            kept.push(j);
        }
    }
    let kept_profit: u64 = kept.iter().map(|&j| inst.jobs[j].profit).sum();
    if kept_profit < inst.profit_target {
        return Err(ModelError::Infeasible(
            "reachable jobs cannot meet the profit target".into(),
        ));
    }
    Ok(VirtualInstance {
        kept,
        forced_outliers,
        t_vpm: kept_profit - inst.profit_target,
    })
}

/// One branch of the guessing loop: residual bounds plus per-job eligible
/// machine sets.
struct Branch<'a> {
    inst: &'a GapInstance,
    /// (job, machine) pairs fixed by guessing.
    fixed: Vec<(usize, usize)>,
    /// Kept free jobs (have at least one eligible machine).
    kept: Vec<usize>,
    /// Eligible machines per kept job (indices parallel to `kept`).
    eligible: Vec<Vec<usize>>,
    t_res: Vec<u64>,
    c_res: u64,
    pi_res: u64,
    t_vpm: u64,
}

/// Fractional assignment: x[jk][mi] over kept-job index jk and its eligible
/// machine list position mi, plus the virtual machine at the end.
fn solve_assignment_lp(b: &Branch) -> Option<Vec<Vec<f64>>> {
    let n = b.kept.len();
    if n == 0 {
        return if b.pi_res == 0 { Some(vec![]) } else { None };
    }
    // variable layout: per kept job, its eligible machines then the virtual
    let mut var_of: Vec<Vec<usize>> = vec![];
    let mut num_vars = 0;
    for elig in &b.eligible {
        let mut vs = vec![];
        for _ in 0..elig.len() + 1 {
            vs.push(num_vars);
            num_vars += 1;
        }
        var_of.push(vs);
    }
    let mut model = LpModel::new(num_vars);
    for v in 0..num_vars {
        model.hi[v] = 1.0;
    }
    // each job assigned exactly once
    for jk in 0..n {
        let entries: Vec<(usize, f64)> = var_of[jk].iter().map(|&v| (v, 1.0)).collect();
        model.add_row_sparse(&entries, Rel::Eq, 1.0);
    }
    // real machine loads
    for i in 0..b.inst.machines {
        let mut entries = vec![];
        for (jk, elig) in b.eligible.iter().enumerate() {
            for (mi, &mach) in elig.iter().enumerate() {
                if mach == i {
                    entries.push((var_of[jk][mi], b.inst.jobs[b.kept[jk]].proc[i] as f64));
                }
            }
        }
        if !entries.is_empty() {
            model.add_row_sparse(&entries, Rel::Le, b.t_res[i] as f64);
        }
    }
    // virtual machine load (profits)
    let entries: Vec<(usize, f64)> = (0..n)
        .map(|jk| {
            (
                var_of[jk][b.eligible[jk].len()],
                b.inst.jobs[b.kept[jk]].profit as f64,
            )
        })
        .collect();
    model.add_row_sparse(&entries, Rel::Le, b.t_vpm as f64);
    // cost budget
    let mut entries = vec![];
    for (jk, elig) in b.eligible.iter().enumerate() {
        for (mi, &mach) in elig.iter().enumerate() {
            let c = b.inst.jobs[b.kept[jk]].cost[mach] as f64;
            if c != 0.0 {
                entries.push((var_of[jk][mi], c));
                model.objective[var_of[jk][mi]] = c;
            }
        }
    }
    if !entries.is_empty() {
        model.add_row_sparse(&entries, Rel::Le, b.c_res as f64);
    }

    let sol = lp::solve(&model);
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let mut x = vec![];
    for jk in 0..n {
        x.push(var_of[jk].iter().map(|&v| sol.values[v]).collect());
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Slot rounding

/// Min-cost perfect matching of `n_left` items into slots, as successive
/// shortest augmenting paths on the flow network (Bellman-Ford handles the
/// negative residual arcs). `edges[l]` lists (slot, cost).
fn min_cost_matching(n_left: usize, n_right: usize, edges: &[Vec<(usize, f64)>]) -> Vec<usize> {
    struct Arc {
        to: usize,
        cap: i32,
        cost: f64,
    }
    let nodes = 2 + n_left + n_right;
    let (src, snk) = (0, nodes - 1);
    let job = |l: usize| 1 + l;
    let slot = |s: usize| 1 + n_left + s;
    let mut arcs: Vec<Arc> = vec![];
    let mut adj: Vec<Vec<usize>> = vec![vec![]; nodes];
    let add = |arcs: &mut Vec<Arc>, adj: &mut Vec<Vec<usize>>, u: usize, v: usize, cost: f64| {
        adj[u].push(arcs.len());
        arcs.push(Arc { to: v, cap: 1, cost });
        adj[v].push(arcs.len());
        arcs.push(Arc { to: u, cap: 0, cost: -cost });
    };
    for l in 0..n_left {
        add(&mut arcs, &mut adj, src, job(l), 0.0);
        for &(s, c) in &edges[l] {
            add(&mut arcs, &mut adj, job(l), slot(s), c);
        }
    }
    for s in 0..n_right {
        add(&mut arcs, &mut adj, slot(s), snk, 0.0);
    }
    for _ in 0..n_left {
        // Bellman-Ford shortest path in the residual graph
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pre = vec![usize::MAX; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &ai in &adj[u] {
                    let a = &arcs[ai];
                    if a.cap > 0 && dist[u] + a.cost < dist[a.to] - 1e-12 {
                        dist[a.to] = dist[u] + a.cost;
                        pre[a.to] = ai;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        assert!(dist[snk].is_finite(), "slot matching must be perfect");
        let mut v = snk;
        while v != src {
            let ai = pre[v];
            arcs[ai].cap -= 1;
            arcs[ai ^ 1].cap += 1;
            v = arcs[ai ^ 1].to;
        }
    }
    (0..n_left)
        .map(|l| {
            adj[job(l)]
                .iter()
                .find_map(|&ai| {
                    let a = &arcs[ai];
                    // forward arc fully used
                    if ai % 2 == 0 && a.to != src && a.cap == 0 && arcs[ai ^ 1].cap == 1 {
                        Some(a.to - 1 - n_left)
                    } else {
                        None
                    }
                })
                .expect("every job matched")
        })
        .collect()
}

/// Shmoys–Tardos style rounding: each machine gets ceil(sum x) slots, jobs
/// are poured into the slots in non-increasing processing-time order, and an
/// integral min-cost perfect matching on the job/slot graph picks the final
/// assignment. Integral inputs pass through unchanged.
fn shmoys_tardos_round(b: &Branch, x: &[Vec<f64>]) -> Assignment {
    let n = b.kept.len();
    if n == 0 {
        return Assignment { assign: vec![] };
    }
    let m = b.inst.machines;
    let virt = m;
    // collect fractions per machine: (proc-for-slot-order, job index, frac, cost)
    let mut per_machine: Vec<Vec<(u64, usize, f64)>> = vec![vec![]; m + 1];
    for jk in 0..n {
        for (mi, &mach) in b.eligible[jk].iter().enumerate() {
            if x[jk][mi] > 1e-9 {
                per_machine[mach].push((b.inst.jobs[b.kept[jk]].proc[mach], jk, x[jk][mi]));
            }
        }
        let xv = x[jk][b.eligible[jk].len()];
        if xv > 1e-9 {
            per_machine[virt].push((b.inst.jobs[b.kept[jk]].profit, jk, xv));
        }
    }
    // build slots and pour
    let mut slots: Vec<(usize, usize)> = vec![]; // (machine, slot index)
    let mut edges: Vec<Vec<(usize, f64)>> = vec![vec![]; n];
    for (mach, fracs) in per_machine.iter_mut().enumerate() {
        if fracs.is_empty() {
            continue;
        }
        // non-increasing size, ties by smaller job id
        fracs.sort_by(|a, b2| b2.0.cmp(&a.0).then(a.1.cmp(&b2.1)));
        let total: f64 = fracs.iter().map(|f| f.2).sum();
        let nslots = total.ceil().max(1.0) as usize + 1; // +1 absorbs float dust
        let base = slots.len();
        for s in 0..nslots {
            slots.push((mach, s));
        }
        let mut slot = 0usize;
        let mut room = 1.0f64;
        for &(_, jk, mut frac) in fracs.iter() {
            let cost = if mach == virt {
                0.0
            } else {
                b.inst.jobs[b.kept[jk]].cost[mach] as f64
            };
            let mut touched = false;
            while frac > 1e-12 && slot < nslots {
                let take = frac.min(room);
                if take > 1e-12 || !touched {
                    edges[jk].push((base + slot, cost));
                    touched = true;
                }
                frac -= take;
                room -= take;
                if room <= 1e-12 {
                    slot += 1;
                    room = 1.0;
                }
            }
        }
    }
    let matched = min_cost_matching(n, slots.len(), &edges);
    let assign = matched.iter().map(|&s| slots[s].0).collect();
    Assignment { assign }
}

/// Move virtual-machine jobs onto their fastest eligible machine until the
/// scheduled profit reaches the residual target. One move always suffices by
/// the slot-rounding guarantee; the loop is defensive.
fn repair_profit(b: &Branch, a: &mut Assignment) -> Result<(), ModelError> {
    let virt = b.inst.machines;
    loop {
        let profit: u64 = a
            .assign
            .iter()
            .zip(&b.kept)
            .filter(|(&mach, _)| mach != virt)
            .map(|(_, &j)| b.inst.jobs[j].profit)
            .sum();
        if profit >= b.pi_res {
            return Ok(());
        }
        // largest-profit virtual job, ties by smallest id
        let jk = (0..b.kept.len())
            .filter(|&jk| a.assign[jk] == virt)
            .max_by(|&a2, &b2| {
                b.inst.jobs[b.kept[a2]]
                    .profit
                    .cmp(&b.inst.jobs[b.kept[b2]].profit)
                    .then(b.kept[b2].cmp(&b.kept[a2]))
            })
            .ok_or_else(|| {
                ModelError::Internal("profit short but no virtual job to repair".into())
            })?;
        // fastest eligible machine, ties by smallest machine id
        let j = b.kept[jk];
        let &mach = b.eligible[jk]
            .iter()
            .min_by_key(|&&i| (b.inst.jobs[j].proc[i], i))
            .expect("kept jobs have an eligible machine");
        a.assign[jk] = mach;
    }
}

#[derive(Debug, Clone)]
pub struct GapOutcome {
    pub schedule: SegmentSchedule,
    pub cost: Rat,
    pub makespan: Rat,
    pub profit: u64,
    /// max_j min-eligible p_ij, for the makespan bound T + 2 min(max p, T).
    pub makespan_bound_proved: Rat,
}

fn run_branch(b: &Branch) -> Option<(Vec<(usize, usize)>, u64, u64)> {
    let x = solve_assignment_lp(b)?;
    let mut a = shmoys_tardos_round(b, &x);
    repair_profit(b, &mut a).ok()?;
    // final (job, machine) pairs: fixed plus real-machine kept jobs
    let mut pairs = b.fixed.clone();
    for (jk, &mach) in a.assign.iter().enumerate() {
        if mach != b.inst.machines {
            pairs.push((b.kept[jk], mach));
        }
    }
    pairs.sort_unstable();
    let cost: u64 = pairs.iter().map(|&(j, i)| b.inst.jobs[j].cost[i]).sum();
    let mut load = vec![0u64; b.inst.machines];
    for &(j, i) in &pairs {
        load[i] += b.inst.jobs[j].proc[i];
    }
    let makespan = load.into_iter().max().unwrap_or(0);
    Some((pairs, cost, makespan))
}

/// Build the final schedule (jobs back to back per machine, id order).
pub fn pairs_to_schedule(inst: &GapInstance, pairs: &[(usize, usize)]) -> SegmentSchedule {
    let mut end = vec![0u64; inst.machines];
    let mut segments = vec![];
    let mut selected = vec![];
    for &(j, i) in pairs {
        let start = end[i];
        end[i] += inst.jobs[j].proc[i];
        segments.push(Segment {
            job: j,
            machine: i,
            start_ticks: ticks_of_units(start),
            end_ticks: ticks_of_units(end[i]),
        });
        selected.push(j);
    }
    let makespan = end.into_iter().max().unwrap_or(0);
    let mut sched = SegmentSchedule {
        segments,
        selected,
        objective: rat_int(makespan),
    };
    sched.sort();
    sched
}

/// Full pipeline. `g` is 1/epsilon (cost bound becomes (1 + 1/g) C).
pub fn solve_gap_outliers(inst: &GapInstance, g: u64) -> Result<GapOutcome, ModelError> {
    inst.validate()?;
    assert!(g >= 1, "need 1/eps >= 1");
    let vi = build_virtual_instance(inst)?;
    let c = inst.cost_bound;
    let t = inst.makespan_bound;

    // expensive (job, machine) pairs: cost above eps*C, still runnable
    let mut expensive: Vec<(usize, usize)> = vec![];
    for &j in &vi.kept {
        for i in 0..inst.machines {
            if inst.jobs[j].cost[i] * g > c && inst.jobs[j].proc[i] <= t {
                expensive.push((j, i));
            }
        }
    }

    // enumerate subsets of <= g expensive pairs with distinct jobs
    let mut best: Option<(u64, u64, Vec<(usize, usize)>)> = None;
    let mut queue: Vec<(usize, Vec<(usize, usize)>)> = vec![(0, vec![])];
    while let Some((from, fixed)) = queue.pop() {
        if (fixed.len() as u64) < g {
            for (idx, &(j, i)) in expensive.iter().enumerate().skip(from) {
                if fixed.iter().all(|&(j2, _)| j2 != j) {
                    let mut f2 = fixed.clone();
                    f2.push((j, i));
                    queue.push((idx + 1, f2));
                }
            }
        }
        if let Some(branch) = make_branch(inst, &vi, &fixed, g) {
            if let Some((pairs, cost, makespan)) = run_branch(&branch) {
                let better = match &best {
                    None => true,
                    Some((bc, bm, _)) => (cost, makespan) < (*bc, *bm),
                };
                if better {
                    best = Some((cost, makespan, pairs));
                }
            }
        }
    }

    let (cost, makespan, pairs) = best.ok_or_else(|| {
        ModelError::Infeasible("no branch admits a feasible fractional assignment".into())
    })?;
    let schedule = pairs_to_schedule(inst, &pairs);
    let profit: u64 = pairs.iter().map(|&(j, _)| inst.jobs[j].profit).sum();
    let max_elig_p = pairs
        .iter()
        .map(|&(j, i)| inst.jobs[j].proc[i])
        .max()
        .unwrap_or(0);
    Ok(GapOutcome {
        schedule,
        cost: rat_int(cost),
        makespan: rat_int(makespan),
        profit,
        makespan_bound_proved: rat_int(t) + rat_int(2) * rat_int(max_elig_p.min(t)),
    })
}

fn make_branch<'a>(
    inst: &'a GapInstance,
    vi: &VirtualInstance,
    fixed: &[(usize, usize)],
    g: u64,
) -> Option<Branch<'a>> {
    let c = inst.cost_bound;
    let t = inst.makespan_bound;
    let mut t_res = vec![t; inst.machines];
    let mut c_used = 0u64;
    let mut pi_fixed = 0u64;
    for &(j, i) in fixed {
        let job = &inst.jobs[j];
        t_res[i] = t_res[i].checked_sub(job.proc[i])?;
        c_used += job.cost[i];
        pi_fixed += job.profit;
    }
    if c_used > c {
        return None;
    }
    let c_res = c - c_used;
    let pi_res = inst.profit_target.saturating_sub(pi_fixed);

    let mut kept = vec![];
    let mut eligible = vec![];
    let mut kept_profit = 0u64;
    for &j in &vi.kept {
        if fixed.iter().any(|&(j2, _)| j2 == j) {
            continue;
        }
        let elig: Vec<usize> = (0..inst.machines)
            .filter(|&i| inst.jobs[j].cost[i] * g <= c && inst.jobs[j].proc[i] <= t_res[i])
            .collect();
        if elig.is_empty() {
            continue; // forced outlier in this branch
        }
        kept_profit += inst.jobs[j].profit;
        kept.push(j);
        eligible.push(elig);
    }
    if kept_profit < pi_res {
        return None;
    }
    Some(Branch {
        inst,
        fixed: fixed.to_vec(),
        kept,
        eligible,
        t_res,
        c_res,
        pi_res,
        t_vpm: kept_profit - pi_res,
    })
}
