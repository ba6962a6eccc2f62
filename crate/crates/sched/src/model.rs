//! Problem instances, schedules, validation and JSON (de)serialization.
//!
//! All schedule endpoints live on a global grid of resolution 2^-20 of one
//! time unit and are stored as i64 tick counts, so every downstream
//! manipulation is exact integer arithmetic. Exact rationals (`Rat`) are used
//! for objectives and fractional masses.

use num::rational::Ratio;
use num::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub type Rat = Ratio<i128>;

/// Grid resolution: one time unit = 2^20 ticks.
pub const TICKS_PER_UNIT: i64 = 1 << 20;

pub fn ticks_of_units(u: u64) -> i64 {
    (u as i64) * TICKS_PER_UNIT
}

pub fn rat_of_ticks(t: i64) -> Rat {
    Rat::new(t as i128, TICKS_PER_UNIT as i128)
}

pub fn rat_int(v: u64) -> Rat {
    Rat::from_integer(v as i128)
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown job id {0}")]
    UnknownJob(usize),
    #[error("unknown machine id {0}")]
    UnknownMachine(usize),
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error("problem size exceeds cap: {0}")]
    Size(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("internal invariant breached: {0}")]
    Internal(String),
}

// ---------------------------------------------------------------------------
// Instances

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapJob {
    /// Per-machine processing time p_ij.
    pub proc: Vec<u64>,
    /// Per-machine cost c_ij.
    pub cost: Vec<u64>,
    pub profit: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapInstance {
    pub machines: usize,
    pub jobs: Vec<GapJob>,
    pub profit_target: u64,
    pub cost_bound: u64,
    pub makespan_bound: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WctJob {
    pub proc: Vec<u64>,
    pub weight: u64,
    pub release: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfitTarget {
    /// One profit value per job.
    pub profits: Vec<u64>,
    pub target: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WctInstance {
    pub machines: usize,
    pub jobs: Vec<WctJob>,
    /// K >= 1 profit constraints.
    pub profit_targets: Vec<ProfitTarget>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowJob {
    pub proc: u64,
    pub release: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowInstance {
    pub jobs: Vec<FlowJob>,
    /// Unit profits: at least this many jobs must be fully scheduled.
    pub profit_target: u64,
}

/// Size class of a processing time: smallest k with p <= 2^k.
pub fn class_of(p: u64) -> u32 {
    debug_assert!(p >= 1);
    if p <= 1 {
        0
    } else {
        64 - (p - 1).leading_zeros()
    }
}

/// Processing time rounded up to the next power of two.
pub fn rounded_proc(p: u64) -> u64 {
    1u64 << class_of(p)
}

impl FlowInstance {
    pub fn class(&self, j: usize) -> u32 {
        class_of(self.jobs[j].proc)
    }
    pub fn rounded(&self, j: usize) -> u64 {
        rounded_proc(self.jobs[j].proc)
    }
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.profit_target as usize > self.jobs.len() {
            return Err(ModelError::BadInstance(
                "profit_target exceeds job count".into(),
            ));
        }
        if self.jobs.iter().any(|j| j.proc == 0) {
            return Err(ModelError::BadInstance("zero processing time".into()));
        }
        Ok(())
    }
}

impl GapInstance {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.machines == 0 {
            return Err(ModelError::BadInstance("no machines".into()));
        }
        for (j, job) in self.jobs.iter().enumerate() {
            if job.proc.len() != self.machines || job.cost.len() != self.machines {
                return Err(ModelError::BadInstance(format!(
                    "job {j}: proc/cost vectors must have one entry per machine"
                )));
            }
            if job.proc.iter().any(|&p| p == 0) {
                return Err(ModelError::BadInstance(format!(
                    "job {j}: zero processing time"
                )));
            }
        }
        let total: u64 = self.jobs.iter().map(|j| j.profit).sum();
        if self.profit_target > total {
            return Err(ModelError::BadInstance(
                "profit_target exceeds total profit".into(),
            ));
        }
        Ok(())
    }
}

impl WctInstance {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.machines == 0 {
            return Err(ModelError::BadInstance("no machines".into()));
        }
        if self.profit_targets.is_empty() {
            return Err(ModelError::BadInstance("need at least one profit target".into()));
        }
        for (j, job) in self.jobs.iter().enumerate() {
            if job.proc.len() != self.machines {
                return Err(ModelError::BadInstance(format!(
                    "job {j}: proc vector must have one entry per machine"
                )));
            }
            if job.proc.iter().any(|&p| p == 0) {
                return Err(ModelError::BadInstance(format!(
                    "job {j}: zero processing time"
                )));
            }
        }
        for (k, pt) in self.profit_targets.iter().enumerate() {
            if pt.profits.len() != self.jobs.len() {
                return Err(ModelError::BadInstance(format!(
                    "profit target {k}: needs one profit per job"
                )));
            }
            let total: u64 = pt.profits.iter().sum();
            if pt.target > total {
                return Err(ModelError::BadInstance(format!(
                    "profit target {k}: target exceeds total profit"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instance {
    Gap(GapInstance),
    Wct(WctInstance),
    Flow(FlowInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Gap(_) => "gap",
            Instance::Wct(_) => "wct",
            Instance::Flow(_) => "flow",
        }
    }
    pub fn job_count(&self) -> usize {
        match self {
            Instance::Gap(i) => i.jobs.len(),
            Instance::Wct(i) => i.jobs.len(),
            Instance::Flow(i) => i.jobs.len(),
        }
    }
}

// ---------------------------------------------------------------------------
// Schedules

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub job: usize,
    pub machine: usize,
    pub start_ticks: i64,
    pub end_ticks: i64,
}

impl Segment {
    pub fn len_ticks(&self) -> i64 {
        self.end_ticks - self.start_ticks
    }
}

/// Ordered disjoint (job, machine, start, end) segments plus the set of
/// fully scheduled jobs. Carries both fractional LP schedules and final
/// integral schedules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSchedule {
    pub segments: Vec<Segment>,
    pub selected: Vec<usize>,
    pub objective: Rat,
}

impl SegmentSchedule {
    pub fn empty() -> Self {
        SegmentSchedule {
            segments: vec![],
            selected: vec![],
            objective: Rat::zero(),
        }
    }

    pub fn sort(&mut self) {
        self.segments
            .sort_by_key(|s| (s.machine, s.start_ticks, s.job));
        self.selected.sort_unstable();
        self.selected.dedup();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Overlap { machine: usize, at_ticks: i64 },
    ReleaseDate { job: usize },
    Processing { job: usize, got_ticks: i64, want_ticks: i64 },
    Migration { job: usize },
    ProfitShortfall { target: usize, got: u64, want: u64 },
    EmptySegment { job: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Overlap { machine, at_ticks } => {
                write!(f, "overlap on machine {machine} at tick {at_ticks}")
            }
            Violation::ReleaseDate { job } => write!(f, "job {job} starts before release"),
            Violation::Processing { job, got_ticks, want_ticks } => write!(
                f,
                "job {job} processed {got_ticks} ticks, needs {want_ticks}"
            ),
            Violation::Migration { job } => write!(f, "job {job} split across machines"),
            Violation::ProfitShortfall { target, got, want } => {
                write!(f, "profit target {target}: got {got}, need {want}")
            }
            Violation::EmptySegment { job } => write!(f, "job {job} has an empty segment"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Objective per instance kind: gap -> makespan, wct -> sum w_j C_j,
    /// flow -> sum F_j over selected jobs.
    pub objective: Rat,
    /// Total cost (gap instances only; zero otherwise).
    pub cost: Rat,
}

impl ValidationReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check overlap per machine; returns violations found.
fn check_overlaps(segments: &[Segment]) -> Vec<Violation> {
    let mut by_machine: BTreeMap<usize, Vec<&Segment>> = BTreeMap::new();
    for s in segments {
        by_machine.entry(s.machine).or_default().push(s);
    }
    let mut out = vec![];
    for (m, mut segs) in by_machine {
        segs.sort_by_key(|s| s.start_ticks);
        for w in segs.windows(2) {
            if w[1].start_ticks < w[0].end_ticks {
                out.push(Violation::Overlap {
                    machine: m,
                    at_ticks: w[1].start_ticks,
                });
            }
        }
    }
    out
}

pub fn validate_schedule(
    inst: &Instance,
    sched: &SegmentSchedule,
) -> Result<ValidationReport, ModelError> {
    let n = inst.job_count();
    for s in &sched.segments {
        if s.job >= n {
            return Err(ModelError::UnknownJob(s.job));
        }
        let m = match inst {
            Instance::Gap(i) => i.machines,
            Instance::Wct(i) => i.machines,
            Instance::Flow(_) => 1,
        };
        if s.machine >= m {
            return Err(ModelError::UnknownMachine(s.machine));
        }
    }
    for &j in &sched.selected {
        if j >= n {
            return Err(ModelError::UnknownJob(j));
        }
    }

    let mut violations = vec![];
    for s in &sched.segments {
        if s.end_ticks <= s.start_ticks {
            violations.push(Violation::EmptySegment { job: s.job });
        }
    }
    violations.extend(check_overlaps(&sched.segments));

    // Per selected job: single machine, full processing, release respected,
    // completion time.
    let mut job_segments: Vec<Vec<&Segment>> = vec![vec![]; n];
    for s in &sched.segments {
        job_segments[s.job].push(s);
    }

    let mut objective = Rat::zero();
    let mut cost = Rat::zero();

    match inst {
        Instance::Gap(gi) => {
            let mut makespan_ticks: i64 = 0;
            let mut profit: u64 = 0;
            for &j in &sched.selected {
                let segs = &job_segments[j];
                if segs.is_empty() {
                    violations.push(Violation::Processing {
                        job: j,
                        got_ticks: 0,
                        want_ticks: ticks_of_units(*gi.jobs[j].proc.iter().min().unwrap()),
                    });
                    continue;
                }
                let machine = segs[0].machine;
                if segs.iter().any(|s| s.machine != machine) {
                    violations.push(Violation::Migration { job: j });
                    continue;
                }
                let got: i64 = segs.iter().map(|s| s.len_ticks()).sum();
                let want = ticks_of_units(gi.jobs[j].proc[machine]);
                if got != want {
                    violations.push(Violation::Processing {
                        job: j,
                        got_ticks: got,
                        want_ticks: want,
                    });
                }
                profit += gi.jobs[j].profit;
                cost += rat_int(gi.jobs[j].cost[machine]);
            }
            for s in &sched.segments {
                makespan_ticks = makespan_ticks.max(s.end_ticks);
            }
            if profit < gi.profit_target {
                violations.push(Violation::ProfitShortfall {
                    target: 0,
                    got: profit,
                    want: gi.profit_target,
                });
            }
            objective = rat_of_ticks(makespan_ticks);
        }
        Instance::Wct(wi) => {
            for s in &sched.segments {
                if s.start_ticks < ticks_of_units(wi.jobs[s.job].release) {
                    violations.push(Violation::ReleaseDate { job: s.job });
                }
            }
            for (k, pt) in wi.profit_targets.iter().enumerate() {
                let got: u64 = sched.selected.iter().map(|&j| pt.profits[j]).sum();
                if got < pt.target {
                    violations.push(Violation::ProfitShortfall {
                        target: k,
                        got,
                        want: pt.target,
                    });
                }
            }
            for &j in &sched.selected {
                let segs = &job_segments[j];
                if segs.is_empty() {
                    violations.push(Violation::Processing {
                        job: j,
                        got_ticks: 0,
                        want_ticks: ticks_of_units(*wi.jobs[j].proc.iter().min().unwrap()),
                    });
                    continue;
                }
                let machine = segs[0].machine;
                if segs.iter().any(|s| s.machine != machine) {
                    violations.push(Violation::Migration { job: j });
                    continue;
                }
                let got: i64 = segs.iter().map(|s| s.len_ticks()).sum();
                let want = ticks_of_units(wi.jobs[j].proc[machine]);
                if got != want {
                    violations.push(Violation::Processing {
                        job: j,
                        got_ticks: got,
                        want_ticks: want,
                    });
                }
                let completion = segs.iter().map(|s| s.end_ticks).max().unwrap();
                objective += rat_int(wi.jobs[j].weight) * rat_of_ticks(completion);
            }
        }
        Instance::Flow(fi) => {
            for s in &sched.segments {
                if s.start_ticks < ticks_of_units(fi.jobs[s.job].release) {
                    violations.push(Violation::ReleaseDate { job: s.job });
                }
            }
            if (sched.selected.len() as u64) < fi.profit_target {
                violations.push(Violation::ProfitShortfall {
                    target: 0,
                    got: sched.selected.len() as u64,
                    want: fi.profit_target,
                });
            }
            for &j in &sched.selected {
                let segs = &job_segments[j];
                if segs.is_empty() {
                    violations.push(Violation::Processing {
                        job: j,
                        got_ticks: 0,
                        want_ticks: ticks_of_units(fi.jobs[j].proc),
                    });
                    continue;
                }
                let got: i64 = segs.iter().map(|s| s.len_ticks()).sum();
                let want = ticks_of_units(fi.jobs[j].proc);
                if got != want {
                    violations.push(Violation::Processing {
                        job: j,
                        got_ticks: got,
                        want_ticks: want,
                    });
                }
                let completion = segs.iter().map(|s| s.end_ticks).max().unwrap();
                objective +=
                    rat_of_ticks(completion - ticks_of_units(fi.jobs[j].release));
            }
        }
    }

    Ok(ValidationReport {
        violations,
        objective,
        cost,
    })
}

// ---------------------------------------------------------------------------
// JSON wire format

#[derive(Serialize, Deserialize)]
struct JobWire {
    #[serde(skip_serializing_if = "Option::is_none")]
    proc: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profit: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    release: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct ProfitTargetWire {
    profits: Vec<u64>,
    target: u64,
}

#[derive(Serialize, Deserialize)]
struct InstanceWire {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    machines: Option<usize>,
    jobs: Vec<JobWire>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profit_target: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profit_targets: Option<Vec<ProfitTargetWire>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_bound: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    makespan_bound: Option<u64>,
}

fn proc_vec(v: &serde_json::Value, field: &str) -> Result<Vec<u64>, ModelError> {
    serde_json::from_value(v.clone())
        .map_err(|_| ModelError::Parse(format!("field \"{field}\" must be an array of integers")))
}

fn proc_scalar(v: &serde_json::Value, field: &str) -> Result<u64, ModelError> {
    serde_json::from_value(v.clone())
        .map_err(|_| ModelError::Parse(format!("field \"{field}\" must be a non-negative integer")))
}

pub fn read_instance(bytes: &[u8]) -> Result<Instance, ModelError> {
    let wire: InstanceWire = serde_json::from_slice(bytes)
        .map_err(|e| ModelError::Parse(e.to_string()))?;
    let missing = |f: &str| ModelError::Parse(format!("missing field \"{f}\""));
    let inst = match wire.kind.as_str() {
        "gap" => {
            let machines = wire.machines.ok_or_else(|| missing("machines"))?;
            let mut jobs = vec![];
            for (j, jw) in wire.jobs.iter().enumerate() {
                jobs.push(GapJob {
                    proc: proc_vec(
                        jw.proc.as_ref().ok_or_else(|| missing("proc"))?,
                        &format!("jobs[{j}].proc"),
                    )?,
                    cost: jw.cost.clone().ok_or_else(|| missing("cost"))?,
                    profit: jw.profit.ok_or_else(|| missing("profit"))?,
                });
            }
            let inst = GapInstance {
                machines,
                jobs,
                profit_target: wire.profit_target.ok_or_else(|| missing("profit_target"))?,
                cost_bound: wire.cost_bound.ok_or_else(|| missing("cost_bound"))?,
                makespan_bound: wire.makespan_bound.ok_or_else(|| missing("makespan_bound"))?,
            };
            inst.validate()?;
            Instance::Gap(inst)
        }
        "wct" => {
            let machines = wire.machines.ok_or_else(|| missing("machines"))?;
            let mut jobs = vec![];
            let mut job_profits = vec![];
            for (j, jw) in wire.jobs.iter().enumerate() {
                jobs.push(WctJob {
                    proc: proc_vec(
                        jw.proc.as_ref().ok_or_else(|| missing("proc"))?,
                        &format!("jobs[{j}].proc"),
                    )?,
                    weight: jw.weight.ok_or_else(|| missing("weight"))?,
                    release: jw.release.unwrap_or(0),
                });
                job_profits.push(jw.profit);
            }
            let profit_targets = match (wire.profit_targets, wire.profit_target) {
                (Some(pts), _) => pts
                    .into_iter()
                    .map(|p| ProfitTarget { profits: p.profits, target: p.target })
                    .collect(),
                (None, Some(t)) => {
                    let profits: Option<Vec<u64>> = job_profits.into_iter().collect();
                    vec![ProfitTarget {
                        profits: profits.ok_or_else(|| missing("profit"))?,
                        target: t,
                    }]
                }
                (None, None) => return Err(missing("profit_targets")),
            };
            let inst = WctInstance { machines, jobs, profit_targets };
            inst.validate()?;
            Instance::Wct(inst)
        }
        "flow" => {
            let mut jobs = vec![];
            for (j, jw) in wire.jobs.iter().enumerate() {
                jobs.push(FlowJob {
                    proc: proc_scalar(
                        jw.proc.as_ref().ok_or_else(|| missing("proc"))?,
                        &format!("jobs[{j}].proc"),
                    )?,
                    release: jw.release.ok_or_else(|| missing("release"))?,
                });
            }
            let inst = FlowInstance {
                jobs,
                profit_target: wire.profit_target.ok_or_else(|| missing("profit_target"))?,
            };
            inst.validate()?;
            Instance::Flow(inst)
        }
        other => return Err(ModelError::Parse(format!("unknown kind \"{other}\""))),
    };
    Ok(inst)
}

pub fn write_instance(inst: &Instance) -> Vec<u8> {
    let wire = match inst {
        Instance::Gap(i) => InstanceWire {
            kind: "gap".into(),
            machines: Some(i.machines),
            jobs: i
                .jobs
                .iter()
                .map(|j| JobWire {
                    proc: Some(serde_json::json!(j.proc)),
                    cost: Some(j.cost.clone()),
                    profit: Some(j.profit),
                    weight: None,
                    release: None,
                })
                .collect(),
            profit_target: Some(i.profit_target),
            profit_targets: None,
            cost_bound: Some(i.cost_bound),
            makespan_bound: Some(i.makespan_bound),
        },
        Instance::Wct(i) => InstanceWire {
            kind: "wct".into(),
            machines: Some(i.machines),
            jobs: i
                .jobs
                .iter()
                .map(|j| JobWire {
                    proc: Some(serde_json::json!(j.proc)),
                    cost: None,
                    profit: None,
                    weight: Some(j.weight),
                    release: Some(j.release),
                })
                .collect(),
            profit_target: None,
            profit_targets: Some(
                i.profit_targets
                    .iter()
                    .map(|p| ProfitTargetWire { profits: p.profits.clone(), target: p.target })
                    .collect(),
            ),
            cost_bound: None,
            makespan_bound: None,
        },
        Instance::Flow(i) => InstanceWire {
            kind: "flow".into(),
            machines: None,
            jobs: i
                .jobs
                .iter()
                .map(|j| JobWire {
                    proc: Some(serde_json::json!(j.proc)),
                    cost: None,
                    profit: None,
                    weight: None,
                    release: Some(j.release),
                })
                .collect(),
            profit_target: Some(i.profit_target),
            profit_targets: None,
            cost_bound: None,
            makespan_bound: None,
        },
    };
    let mut out = serde_json::to_vec_pretty(&wire).expect("serialize instance");
    out.push(b'\n');
    out
}

#[derive(Serialize, Deserialize)]
struct ScheduleWire {
    segments: Vec<Segment>,
    selected: Vec<usize>,
    objective: String,
}

pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rat_from_string(s: &str) -> Result<Rat, ModelError> {
    let bad = || ModelError::Parse(format!("bad rational \"{s}\""));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i128 = n.parse().map_err(|_| bad())?;
            let d: i128 = d.parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rat::new(n, d))
        }
        None => {
            let n: i128 = s.parse().map_err(|_| bad())?;
            Ok(Rat::from_integer(n))
        }
    }
}

pub fn read_schedule(bytes: &[u8]) -> Result<SegmentSchedule, ModelError> {
    let wire: ScheduleWire =
        serde_json::from_slice(bytes).map_err(|e| ModelError::Parse(e.to_string()))?;
    Ok(SegmentSchedule {
        segments: wire.segments,
        selected: wire.selected,
        objective: rat_from_string(&wire.objective)?,
    })
}

pub fn write_schedule(sched: &SegmentSchedule) -> Vec<u8> {
    let wire = ScheduleWire {
        segments: sched.segments.clone(),
        selected: sched.selected.clone(),
        objective: rat_to_string(&sched.objective),
    };
    let mut out = serde_json::to_vec_pretty(&wire).expect("serialize schedule");
    out.push(b'\n');
    out
}

pub fn rat_one() -> Rat {
    Rat::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow_inst(jobs: &[(u64, u64)], target: u64) -> Instance {
        Instance::Flow(FlowInstance {
            jobs: jobs.iter().map(|&(p, r)| FlowJob { proc: p, release: r }).collect(),
            profit_target: target,
        })
    }

    #[test]
    fn empty_schedule_zero_target_feasible() {
        let inst = flow_inst(&[(3, 0)], 0);
        let rep = validate_schedule(&inst, &SegmentSchedule::empty()).unwrap();
        assert!(rep.feasible());
        assert_eq!(rep.objective, Rat::zero());
    }

    #[test]
    fn single_job_flow_three() {
        let inst = flow_inst(&[(3, 0)], 1);
        let sched = SegmentSchedule {
            segments: vec![Segment {
                job: 0,
                machine: 0,
                start_ticks: 0,
                end_ticks: ticks_of_units(3),
            }],
            selected: vec![0],
            objective: Rat::zero(),
        };
        let rep = validate_schedule(&inst, &sched).unwrap();
        assert!(rep.feasible(), "{:?}", rep.violations);
        assert_eq!(rep.objective, rat_int(3));
    }

    #[test]
    fn overlap_flagged() {
        let inst = flow_inst(&[(2, 0), (2, 0)], 0);
        let sched = SegmentSchedule {
            segments: vec![
                Segment { job: 0, machine: 0, start_ticks: 0, end_ticks: ticks_of_units(2) },
                Segment { job: 1, machine: 0, start_ticks: ticks_of_units(1), end_ticks: ticks_of_units(3) },
            ],
            selected: vec![],
            objective: Rat::zero(),
        };
        let rep = validate_schedule(&inst, &sched).unwrap();
        assert!(rep
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Overlap { .. })));
    }

    #[test]
    fn unknown_job_is_structural_error() {
        let inst = flow_inst(&[(2, 0)], 0);
        let sched = SegmentSchedule {
            segments: vec![Segment { job: 7, machine: 0, start_ticks: 0, end_ticks: 1 }],
            selected: vec![],
            objective: Rat::zero(),
        };
        assert!(matches!(
            validate_schedule(&inst, &sched),
            Err(ModelError::UnknownJob(7))
        ));
    }

    #[test]
    fn gap_round_trip() {
        let inst = Instance::Gap(GapInstance {
            machines: 2,
            jobs: vec![GapJob { proc: vec![1, 2], cost: vec![3, 4], profit: 5 }],
            profit_target: 5,
            cost_bound: 10,
            makespan_bound: 4,
        });
        let bytes = write_instance(&inst);
        let back = read_instance(&bytes).unwrap();
        assert_eq!(inst, back);
        assert_eq!(bytes, write_instance(&back));
    }

    #[test]
    fn wct_scalar_target_expands() {
        let json = br#"{"kind":"wct","machines":1,
            "jobs":[{"proc":[2],"weight":1,"profit":3,"release":0}],
            "profit_target":3}"#;
        let inst = read_instance(json).unwrap();
        match &inst {
            Instance::Wct(w) => {
                assert_eq!(w.profit_targets.len(), 1);
                assert_eq!(w.profit_targets[0].profits, vec![3]);
                assert_eq!(w.profit_targets[0].target, 3);
            }
            _ => panic!("expected wct"),
        }
        // canonical form survives a second round trip
        let bytes = write_instance(&inst);
        let back = read_instance(&bytes).unwrap();
        assert_eq!(inst, back);
        assert_eq!(bytes, write_instance(&back));
    }

    #[test]
    fn missing_profit_target_is_parse_error() {
        let json = br#"{"kind":"flow","jobs":[{"proc":1,"release":0}]}"#;
        match read_instance(json) {
            Err(ModelError::Parse(msg)) => assert!(msg.contains("profit_target")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_integer_release_is_parse_error() {
        let json = br#"{"kind":"flow","jobs":[{"proc":1,"release":0.5}],"profit_target":1}"#;
        assert!(matches!(read_instance(json), Err(ModelError::Parse(_))));
    }

    #[test]
    fn classes() {
        assert_eq!(class_of(1), 0);
        assert_eq!(class_of(2), 1);
        assert_eq!(class_of(3), 2);
        assert_eq!(class_of(4), 2);
        assert_eq!(class_of(5), 3);
        assert_eq!(rounded_proc(3), 4);
        assert_eq!(rounded_proc(8), 8);
    }

    #[test]
    fn schedule_round_trip() {
        let sched = SegmentSchedule {
            segments: vec![Segment { job: 0, machine: 1, start_ticks: 17, end_ticks: 42 }],
            selected: vec![0],
            objective: Rat::new(7, 3),
        };
        let bytes = write_schedule(&sched);
        let back = read_schedule(&bytes).unwrap();
        assert_eq!(sched, back);
    }
}
