//! Independent exact solvers used to verify the approximation pipelines at
//! desk scale. Brute-force search spaces are capped; exceeding a cap is a
//! hard error, never silent truncation.

use crate::model::{
    rat_int, ticks_of_units, FlowInstance, GapInstance, Instance, ModelError, Rat, Segment,
    SegmentSchedule, ValidationReport, WctInstance,
};
use num::Zero;

pub const SEARCH_CAP: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: Rat,
    pub selected: Vec<usize>,
    pub schedule: SegmentSchedule,
    pub explored: u64,
}

impl OracleResult {
    pub fn validate(&self, inst: &Instance) -> Result<ValidationReport, ModelError> {
        crate::model::validate_schedule(inst, &self.schedule)
    }
}

// ---------------------------------------------------------------------------
// Preemptive single-machine flow time: SRPT

/// Optimal preemptive total flow time for a fixed subset of jobs, by the
/// shortest-remaining-processing-time rule on the unit grid. Ties go to the
/// smallest job id.
pub fn srpt(inst: &FlowInstance, subset: &[usize]) -> OracleResult {
    let mut remaining: Vec<u64> = subset.iter().map(|&j| inst.jobs[j].proc).collect();
    let mut flow = Rat::zero();
    // (job id at t, for unit slot [t, t+1))
    let mut slots: Vec<Option<usize>> = vec![];
    let mut done = 0usize;
    let mut t = subset
        .iter()
        .map(|&j| inst.jobs[j].release)
        .min()
        .unwrap_or(0);
    slots.resize(t as usize, None);
    while done < subset.len() {
        let mut pick: Option<usize> = None; // index into subset
        for (i, &j) in subset.iter().enumerate() {
            if remaining[i] > 0 && inst.jobs[j].release <= t {
                let better = match pick {
                    None => true,
                    Some(b) => {
                        (remaining[i], subset[i]) < (remaining[b], subset[b])
                    }
                };
                if better {
                    pick = Some(i);
                }
            }
        }
        match pick {
            Some(i) => {
                remaining[i] -= 1;
                slots.push(Some(subset[i]));
                if remaining[i] == 0 {
                    done += 1;
                    flow += rat_int(t + 1) - rat_int(inst.jobs[subset[i]].release);
                }
            }
            None => slots.push(None),
        }
        t += 1;
    }
    // merge unit slots into segments
    let mut segments: Vec<Segment> = vec![];
    for (t, slot) in slots.iter().enumerate() {
        if let Some(j) = *slot {
            match segments.last_mut() {
                Some(s) if s.job == j && s.end_ticks == ticks_of_units(t as u64) => {
                    s.end_ticks = ticks_of_units(t as u64 + 1);
                }
                _ => segments.push(Segment {
                    job: j,
                    machine: 0,
                    start_ticks: ticks_of_units(t as u64),
                    end_ticks: ticks_of_units(t as u64 + 1),
                }),
            }
        }
    }
    let mut selected: Vec<usize> = subset.to_vec();
    selected.sort_unstable();
    OracleResult {
        objective: flow,
        selected: selected.clone(),
        schedule: SegmentSchedule { segments, selected, objective: flow },
        explored: 1,
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
        if r > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    r as u64
}

fn for_each_combination(pool: &[usize], k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > pool.len() {
        return;
    }
    loop {
        let combo: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
        f(&combo);
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < pool.len() - (k - i) {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Exact minimum total flow time over all subsets of exactly `profit_target`
/// jobs, each scheduled preemptively by SRPT. Supersets cannot beat a subset,
/// so exact-size enumeration is exhaustive for the >= target constraint.
pub fn brute_flow(inst: &FlowInstance) -> Result<OracleResult, ModelError> {
    let n = inst.jobs.len() as u64;
    let pi = inst.profit_target;
    let space = binomial(n, pi);
    if space > SEARCH_CAP {
        return Err(ModelError::Size(format!(
            "brute_flow: C({n},{pi}) = {space} exceeds cap {SEARCH_CAP}"
        )));
    }
    let pool: Vec<usize> = (0..inst.jobs.len()).collect();
    brute_flow_over(inst, &[], &pool, pi as usize)
}

/// Restricted enumeration: `forced` jobs always selected, plus every choice
/// of `choose` jobs from `pool`.
pub fn brute_flow_over(
    inst: &FlowInstance,
    forced: &[usize],
    pool: &[usize],
    choose: usize,
) -> Result<OracleResult, ModelError> {
    let space = binomial(pool.len() as u64, choose as u64);
    if space > SEARCH_CAP {
        return Err(ModelError::Size(format!(
            "brute_flow: C({},{choose}) = {space} exceeds cap {SEARCH_CAP}",
            pool.len()
        )));
    }
    let mut best: Option<OracleResult> = None;
    let mut explored = 0u64;
    for_each_combination(pool, choose, |combo| {
        let mut subset: Vec<usize> = forced.to_vec();
        subset.extend_from_slice(combo);
        subset.sort_unstable();
        let r = srpt(inst, &subset);
        explored += 1;
        let better = match &best {
            None => true,
            Some(b) => (&r.objective, &r.selected) < (&b.objective, &b.selected),
        };
        if better {
            best = Some(r);
        }
    });
    let mut best = best.ok_or_else(|| ModelError::Infeasible("no subset".into()))?;
    best.explored = explored;
    Ok(best)
}

// ---------------------------------------------------------------------------
// Weighted completion time

/// Min sum of w_j C_j for a fixed (machine -> job list) assignment, searching
/// all non-preemptive orders per machine, respecting release dates.
fn best_order_cost(inst: &WctInstance, machine: usize, jobs: &[usize]) -> (Rat, Vec<usize>) {
    fn rec(
        inst: &WctInstance,
        machine: usize,
        left: &mut Vec<usize>,
        end: u64,
        cost: Rat,
        order: &mut Vec<usize>,
        best: &mut (Rat, Vec<usize>),
    ) {
        if left.is_empty() {
            if cost < best.0 {
                *best = (cost, order.clone());
            }
            return;
        }
        if cost >= best.0 {
            return;
        }
        for i in 0..left.len() {
            let j = left.remove(i);
            let job = &inst.jobs[j];
            let start = end.max(job.release);
            let c = start + job.proc[machine];
            order.push(j);
            rec(
                inst,
                machine,
                left,
                c,
                cost + rat_int(job.weight) * rat_int(c),
                order,
                best,
            );
            order.pop();
            left.insert(i, j);
        }
    }
    let mut best = (Rat::from_integer(i64::MAX as i128), vec![]);
    let mut left = jobs.to_vec();
    let mut order = vec![];
    rec(inst, machine, &mut left, 0, Rat::zero(), &mut order, &mut best);
    best
}

fn meets_targets(inst: &WctInstance, subset_mask: u32) -> bool {
    inst.profit_targets.iter().all(|pt| {
        let got: u64 = (0..inst.jobs.len())
            .filter(|&j| subset_mask >> j & 1 == 1)
            .map(|j| pt.profits[j])
            .sum();
        got >= pt.target
    })
}

/// Exact min weighted completion time over subsets meeting every profit
/// target, machine assignments, and non-preemptive orders.
pub fn brute_wct(inst: &WctInstance) -> Result<OracleResult, ModelError> {
    let n = inst.jobs.len();
    let m = inst.machines;
    if n > 10 || m > 3 {
        return Err(ModelError::Size(format!(
            "brute_wct: n = {n}, m = {m} beyond cap (n <= 10, m <= 3)"
        )));
    }
    let mut best: Option<(Rat, Vec<usize>, Vec<Vec<usize>>)> = None;
    let mut explored = 0u64;
    for mask in 0u32..1 << n {
        if !meets_targets(inst, mask) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| mask >> j & 1 == 1).collect();
        // machine assignment per member
        let combos = (m as u64).pow(members.len() as u32);
        for a in 0..combos {
            let mut per_machine: Vec<Vec<usize>> = vec![vec![]; m];
            let mut code = a;
            for &j in &members {
                per_machine[(code % m as u64) as usize].push(j);
                code /= m as u64;
            }
            explored += 1;
            if explored > SEARCH_CAP {
                return Err(ModelError::Size("brute_wct: search cap exceeded".into()));
            }
            let mut total = Rat::zero();
            let mut orders = vec![];
            for (mi, js) in per_machine.iter().enumerate() {
                let (c, order) = best_order_cost(inst, mi, js);
                total += c;
                orders.push(order);
            }
            let better = match &best {
                None => true,
                Some((b, sel, _)) => (&total, &members) < (b, sel),
            };
            if better {
                best = Some((total, members.clone(), orders));
            }
        }
    }
    let (objective, selected, orders) =
        best.ok_or_else(|| ModelError::Infeasible("no subset meets the profit targets".into()))?;
    // rebuild the witness schedule
    let mut segments = vec![];
    for (mi, order) in orders.iter().enumerate() {
        let mut end = 0u64;
        for &j in order {
            let start = end.max(inst.jobs[j].release);
            end = start + inst.jobs[j].proc[mi];
            segments.push(Segment {
                job: j,
                machine: mi,
                start_ticks: ticks_of_units(start),
                end_ticks: ticks_of_units(end),
            });
        }
    }
    let schedule = SegmentSchedule { segments, selected: selected.clone(), objective };
    Ok(OracleResult { objective, selected, schedule, explored })
}

// ---------------------------------------------------------------------------
// GAP

/// Min makespan over all assignments (each job to a machine or left out) with
/// profit >= target and cost <= cost_bound. The makespan_bound field is not a
/// constraint here; callers compare the returned makespan against it.
pub fn brute_gap(inst: &GapInstance) -> Result<OracleResult, ModelError> {
    let n = inst.jobs.len();
    let m = inst.machines;
    let space = ((m + 1) as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if space > SEARCH_CAP {
        return Err(ModelError::Size(format!(
            "brute_gap: (m+1)^n = {space} exceeds cap {SEARCH_CAP}"
        )));
    }
    let mut best: Option<(Rat, Vec<usize>, Vec<Option<usize>>)> = None;
    let mut explored = 0u64;
    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut code = vec![0usize; n];
    loop {
        for j in 0..n {
            assign[j] = if code[j] == m { None } else { Some(code[j]) };
        }
        explored += 1;
        let mut profit = 0u64;
        let mut cost = 0u64;
        let mut load = vec![0u64; m];
        for j in 0..n {
            if let Some(i) = assign[j] {
                profit += inst.jobs[j].profit;
                cost += inst.jobs[j].cost[i];
                load[i] += inst.jobs[j].proc[i];
            }
        }
        if profit >= inst.profit_target && cost <= inst.cost_bound {
            let makespan = rat_int(load.iter().copied().max().unwrap_or(0));
            let selected: Vec<usize> = (0..n).filter(|&j| assign[j].is_some()).collect();
            let better = match &best {
                None => true,
                Some((b, sel, _)) => (&makespan, &selected) < (b, sel),
            };
            if better {
                best = Some((makespan, selected, assign.clone()));
            }
        }
        // increment mixed-radix counter
        let mut j = 0;
        loop {
            if j == n {
                let (objective, selected, assign) = best.ok_or_else(|| {
                    ModelError::Infeasible("no assignment meets (profit, cost)".into())
                })?;
                let schedule = gap_schedule(inst, &assign, objective);
                return Ok(OracleResult { objective, selected, schedule, explored });
            }
            code[j] += 1;
            if code[j] <= m {
                break;
            }
            code[j] = 0;
            j += 1;
        }
    }
}

/// Lay out an assignment as back-to-back segments per machine.
pub fn gap_schedule(
    inst: &GapInstance,
    assign: &[Option<usize>],
    objective: Rat,
) -> SegmentSchedule {
    let mut segments = vec![];
    let mut selected = vec![];
    let mut end = vec![0u64; inst.machines];
    for (j, a) in assign.iter().enumerate() {
        if let Some(i) = *a {
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
    }
    let mut sched = SegmentSchedule { segments, selected, objective };
    sched.sort();
    sched
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FlowJob, GapJob, ProfitTarget, WctJob};
    use std::collections::HashMap;

    fn flow(jobs: &[(u64, u64)], target: u64) -> FlowInstance {
        FlowInstance {
            jobs: jobs.iter().map(|&(p, r)| FlowJob { proc: p, release: r }).collect(),
            profit_target: target,
        }
    }

    #[test]
    fn srpt_single_job() {
        let inst = flow(&[(4, 2)], 1);
        let r = srpt(&inst, &[0]);
        assert_eq!(r.objective, rat_int(4));
    }

    #[test]
    fn srpt_preempts_for_shorter_job() {
        // job 0: p=5 at t=0; job 1: p=1 at t=2. SRPT preempts job 0.
        // job 1 done at 3 (flow 1); job 0 done at 6 (flow 6). total 7.
        let inst = flow(&[(5, 0), (1, 2)], 2);
        let r = srpt(&inst, &[0, 1]);
        assert_eq!(r.objective, rat_int(7));
        let rep = r.validate(&Instance::Flow(inst)).unwrap();
        assert!(rep.feasible(), "{:?}", rep.violations);
        assert_eq!(rep.objective, r.objective);
    }

    /// Exhaustive optimal preemptive flow time over unit-grid decisions,
    /// memoized on (t, remaining). Independent of the SRPT rule.
    fn exhaustive_flow(inst: &FlowInstance, subset: &[usize]) -> Rat {
        type Key = (u64, Vec<u64>);
        fn rec(
            inst: &FlowInstance,
            subset: &[usize],
            t: u64,
            rem: &mut Vec<u64>,
            memo: &mut HashMap<Key, Rat>,
        ) -> Rat {
            if rem.iter().all(|&r| r == 0) {
                return Rat::zero();
            }
            let key = (t, rem.clone());
            if let Some(v) = memo.get(&key) {
                return *v;
            }
            let mut best: Option<Rat> = None;
            let mut any_available = false;
            for i in 0..subset.len() {
                if rem[i] > 0 && inst.jobs[subset[i]].release <= t {
                    any_available = true;
                    rem[i] -= 1;
                    let extra = if rem[i] == 0 {
                        rat_int(t + 1) - rat_int(inst.jobs[subset[i]].release)
                    } else {
                        Rat::zero()
                    };
                    let v = extra + rec(inst, subset, t + 1, rem, memo);
                    rem[i] += 1;
                    if best.map_or(true, |b| v < b) {
                        best = Some(v);
                    }
                }
            }
            if !any_available {
                // idle straight to the next release
                let next = subset
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| rem[i] > 0)
                    .map(|(_, &j)| inst.jobs[j].release)
                    .min()
                    .unwrap();
                let v = rec(inst, subset, next.max(t + 1), rem, memo);
                if best.map_or(true, |b| v < b) {
                    best = Some(v);
                }
            }
            let v = best.unwrap();
            memo.insert(key, v);
            v
        }
        let mut rem: Vec<u64> = subset.iter().map(|&j| inst.jobs[j].proc).collect();
        rec(inst, subset, 0, &mut rem, &mut HashMap::new())
    }

    #[test]
    fn srpt_matches_exhaustive_search() {
        let cases = [
            flow(&[(3, 0), (2, 1), (1, 1)], 3),
            flow(&[(4, 0), (4, 2), (2, 3)], 3),
            flow(&[(2, 5), (3, 0), (1, 4), (2, 2)], 4),
            flow(&[(5, 0), (1, 1), (1, 2), (1, 3)], 4),
        ];
        for inst in cases {
            let subset: Vec<usize> = (0..inst.jobs.len()).collect();
            let got = srpt(&inst, &subset);
            let want = exhaustive_flow(&inst, &subset);
            assert_eq!(got.objective, want, "instance {inst:?}");
        }
    }

    #[test]
    fn brute_flow_full_target_equals_srpt() {
        let inst = flow(&[(3, 0), (2, 1), (4, 2)], 3);
        let all: Vec<usize> = (0..3).collect();
        let b = brute_flow(&inst).unwrap();
        let s = srpt(&inst, &all);
        assert_eq!(b.objective, s.objective);
    }

    #[test]
    fn brute_flow_picks_better_subset() {
        // dropping the long job is clearly better
        let inst = flow(&[(8, 0), (1, 0), (1, 0)], 2);
        let b = brute_flow(&inst).unwrap();
        assert_eq!(b.selected, vec![1, 2]);
        // 1 and 2: flows 1 and 2
        assert_eq!(b.objective, rat_int(3));
    }

    #[test]
    fn brute_flow_cap() {
        let inst = flow(&vec![(1, 0); 40], 20);
        assert!(matches!(brute_flow(&inst), Err(ModelError::Size(_))));
    }

    fn wct1(jobs: &[(u64, u64, u64, u64)], target: u64) -> WctInstance {
        // (p, w, pi, r) single machine
        WctInstance {
            machines: 1,
            jobs: jobs
                .iter()
                .map(|&(p, w, _, r)| WctJob { proc: vec![p], weight: w, release: r })
                .collect(),
            profit_targets: vec![ProfitTarget {
                profits: jobs.iter().map(|&(_, _, pi, _)| pi).collect(),
                target,
            }],
        }
    }

    #[test]
    fn brute_wct_trivial() {
        let inst = wct1(&[(3, 2, 1, 4)], 1);
        let r = brute_wct(&inst).unwrap();
        assert_eq!(r.objective, rat_int(2 * (4 + 3)));
        let rep = r.validate(&Instance::Wct(inst)).unwrap();
        assert!(rep.feasible());
        assert_eq!(rep.objective, r.objective);
    }

    #[test]
    fn brute_wct_zero_target() {
        let inst = wct1(&[(3, 2, 1, 4)], 0);
        let r = brute_wct(&inst).unwrap();
        assert_eq!(r.objective, Rat::zero());
        assert!(r.selected.is_empty());
    }

    #[test]
    fn brute_wct_prefers_spt_order() {
        // both jobs required; weighted SPT: job 1 (p=1) first
        let inst = wct1(&[(4, 1, 1, 0), (1, 1, 1, 0)], 2);
        let r = brute_wct(&inst).unwrap();
        assert_eq!(r.objective, rat_int(1 + 5));
    }

    #[test]
    fn brute_wct_two_machines() {
        let inst = WctInstance {
            machines: 2,
            jobs: vec![
                WctJob { proc: vec![4, 1], weight: 1, release: 0 },
                WctJob { proc: vec![1, 4], weight: 1, release: 0 },
            ],
            profit_targets: vec![ProfitTarget { profits: vec![1, 1], target: 2 }],
        };
        let r = brute_wct(&inst).unwrap();
        assert_eq!(r.objective, rat_int(2)); // each job on its fast machine
    }

    #[test]
    fn brute_gap_single() {
        let inst = GapInstance {
            machines: 1,
            jobs: vec![GapJob { proc: vec![3], cost: vec![2], profit: 1 }],
            profit_target: 1,
            cost_bound: 2,
            makespan_bound: 3,
        };
        let r = brute_gap(&inst).unwrap();
        assert_eq!(r.objective, rat_int(3));
        let rep = r.validate(&Instance::Gap(inst)).unwrap();
        assert!(rep.feasible());
    }

    #[test]
    fn brute_gap_infeasible_cost() {
        let inst = GapInstance {
            machines: 1,
            jobs: vec![GapJob { proc: vec![3], cost: vec![5], profit: 1 }],
            profit_target: 1,
            cost_bound: 2,
            makespan_bound: 3,
        };
        assert!(matches!(brute_gap(&inst), Err(ModelError::Infeasible(_))));
    }

    #[test]
    fn brute_gap_balances_load() {
        let inst = GapInstance {
            machines: 2,
            jobs: vec![
                GapJob { proc: vec![2, 2], cost: vec![0, 0], profit: 1 },
                GapJob { proc: vec![2, 2], cost: vec![0, 0], profit: 1 },
            ],
            profit_target: 2,
            cost_bound: 0,
            makespan_bound: 2,
        };
        let r = brute_gap(&inst).unwrap();
        assert_eq!(r.objective, rat_int(2));
    }
}
