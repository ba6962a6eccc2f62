use clap::{Parser, Subcommand};
use sched::model::{
    self, rat_int, rat_to_string, Instance, ModelError, Rat, SegmentSchedule,
};
use sched::report::{BoundCheck, RunReport};
use num::Zero;
use sched::{flow, gap, oracle, wct};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "sched", version, about = "Scheduling with outliers: solvers, oracles, verifiers")]
struct Cli {
    /// Seed for all randomness; a random one is drawn and printed if absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the run report (or generated instance) to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the run report as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generalized assignment with outliers under a cost budget.
    Gap {
        instance: PathBuf,
        /// Cost-relaxation parameter; the run enumerates up to 1/eps guesses.
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// On infeasibility, double the cost and makespan bounds until feasible.
        #[arg(long)]
        sweep: bool,
    },
    /// Weighted completion time with profit targets (LP + randomized rounding).
    Wct {
        instance: PathBuf,
        #[arg(long, default_value_t = 64)]
        trials: u64,
        /// Use the multi-target scaling even for a single target.
        #[arg(long)]
        multi: bool,
    },
    /// Exact DP / FPTAS for unweighted completion time with a profit target.
    WctDp {
        instance: PathBuf,
        /// Approximation parameter for the FPTAS; exact DP if absent.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1)]
        machines: usize,
    },
    /// Single-machine average flow time with outliers (swap/shift rounding).
    Flow { instance: PathBuf },
    /// Instance generators.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
    /// Exact small-instance optimum for any instance kind.
    Oracle { instance: PathBuf },
    /// Validate a schedule against an instance.
    Verify {
        instance: PathBuf,
        schedule: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// Flow-time integrality-gap construction for an even k >= 2.
    FlowGap {
        #[arg(short)]
        k: u32,
    },
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    let seed = cli.seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    });
    let t0 = std::time::Instant::now();
    let result = dispatch(&cli, seed);
    eprintln!("wall time: {:.3}s", t0.elapsed().as_secs_f64());
    match result {
        Ok(Output::Report(report)) => {
            let json = report.to_json();
            if let Some(out) = &cli.out {
                if let Err(e) = std::fs::write(out, &json) {
                    eprintln!("error: cannot write {}: {e}", out.display());
                    return 1;
                }
            }
            if cli.json || cli.out.is_none() {
                println!("{json}");
            } else {
                for c in &report.checks {
                    println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
                }
                if let Some(obj) = &report.objective {
                    println!("objective: {obj}");
                }
            }
            if report.all_pass() {
                0
            } else {
                1
            }
        }
        Ok(Output::Bytes(bytes)) => {
            if let Some(out) = &cli.out {
                if let Err(e) = std::fs::write(out, &bytes) {
                    eprintln!("error: cannot write {}: {e}", out.display());
                    return 1;
                }
            } else {
                print!("{}", String::from_utf8_lossy(&bytes));
            }
            0
        }
        Ok(Output::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            2
        }
        Err(e) => {
            match &e {
                ModelError::Infeasible(msg) => {
                    eprintln!("infeasible: {msg}");
                    return 2;
                }
                _ => eprintln!("error: {e}"),
            }
            1
        }
    }
}

enum Output {
    Report(RunReport),
    Bytes(Vec<u8>),
    Infeasible(String),
}

fn read_file(path: &Path) -> Result<Vec<u8>, ModelError> {
    std::fs::read(path).map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))
}

fn schedule_json(s: &SegmentSchedule) -> serde_json::Value {
    serde_json::from_slice(&model::write_schedule(s)).expect("schedule roundtrip")
}

fn dispatch(cli: &Cli, seed: u64) -> Result<Output, ModelError> {
    match &cli.cmd {
        Cmd::Gap { instance, eps, sweep } => cmd_gap(instance, *eps, *sweep, seed),
        Cmd::Wct { instance, trials, multi } => cmd_wct(instance, *trials, *multi, seed),
        Cmd::WctDp { instance, eps, machines } => cmd_wct_dp(instance, *eps, *machines, seed),
        Cmd::Flow { instance } => cmd_flow(instance, seed),
        Cmd::Gen { what } => match what {
            GenCmd::FlowGap { k } => {
                let inst = flow::gen_gap_instance(*k)?;
                Ok(Output::Bytes(model::write_instance(&Instance::Flow(inst))))
            }
        },
        Cmd::Oracle { instance } => cmd_oracle(instance, seed),
        Cmd::Verify { instance, schedule } => cmd_verify(instance, schedule, seed),
    }
}

fn cmd_gap(path: &Path, eps: f64, sweep: bool, seed: u64) -> Result<Output, ModelError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(ModelError::Parse("--eps must be in (0, 1]".into()));
    }
    let bytes = read_file(path)?;
    let Instance::Gap(base) = model::read_instance(&bytes)? else {
        return Err(ModelError::Parse("gap command needs a gap instance".into()));
    };
    let g = (1.0 / eps).ceil() as u64;
    let mut report = RunReport::new("gap", &bytes, seed);
    let mut attempts = vec![];
    let mut factor = 1u64;
    let outcome = loop {
        let mut inst = base.clone();
        inst.cost_bound = base.cost_bound.saturating_mul(factor);
        inst.makespan_bound = base.makespan_bound.saturating_mul(factor);
        match gap::solve_gap_outliers(&inst, g) {
            Ok(out) => {
                attempts.push(serde_json::json!({"factor": factor, "feasible": true}));
                break Some((inst, out));
            }
            Err(ModelError::Infeasible(msg)) => {
                attempts.push(serde_json::json!({"factor": factor, "feasible": false}));
                if !sweep || factor >= 1 << 16 {
                    if !sweep {
                        return Ok(Output::Infeasible(msg));
                    }
                    break None;
                }
                factor *= 2;
            }
            Err(e) => return Err(e),
        }
    };
    report.details.insert("sweep_attempts".into(), attempts.into());
    let Some((inst, out)) = outcome else {
        return Ok(Output::Infeasible("sweep exhausted".into()));
    };
    let cost_cap = rat_int(inst.cost_bound) + Rat::new(inst.cost_bound as i128, g as i128);
    report.checks.push(BoundCheck::new(
        "profit >= target",
        out.profit >= inst.profit_target,
        out.profit,
        inst.profit_target,
    ));
    report.checks.push(BoundCheck::new(
        "cost <= (1 + eps) C",
        out.cost <= cost_cap,
        rat_to_string(&out.cost),
        rat_to_string(&cost_cap),
    ));
    report.checks.push(BoundCheck::new(
        "makespan <= proved bound <= 3T",
        out.makespan <= out.makespan_bound_proved
            && out.makespan_bound_proved <= rat_int(3 * inst.makespan_bound),
        rat_to_string(&out.makespan),
        rat_to_string(&out.makespan_bound_proved),
    ));
    report.objective = Some(rat_to_string(&out.cost));
    report.details.insert("makespan".into(), rat_to_string(&out.makespan).into());
    report.details.insert("profit".into(), out.profit.into());
    report.details.insert("guess_budget".into(), g.into());
    report.details.insert("bound_factor".into(), factor.into());
    report.schedule = Some(schedule_json(&out.schedule));
    Ok(Output::Report(report))
}

fn cmd_wct(path: &Path, trials: u64, multi: bool, seed: u64) -> Result<Output, ModelError> {
    if trials == 0 {
        return Err(ModelError::Parse("--trials must be at least 1".into()));
    }
    let bytes = read_file(path)?;
    let Instance::Wct(inst) = model::read_instance(&bytes)? else {
        return Err(ModelError::Parse("wct command needs a wct instance".into()));
    };
    let mut report = RunReport::new("wct", &bytes, seed);
    let (sched, sol, stats) = if multi {
        let k = inst.profit_targets.len() as u64;
        let scale = wct::beta_k_rat(k.max(1));
        let threshold = *scale.denom() as f64 / *scale.numer() as f64;
        let sol = wct::solve_relaxation(&inst, threshold)?;
        match wct::multi_profit_round(&inst, &sol, seed, trials) {
            Ok((sched, stats)) => (sched, sol, stats),
            Err(stats) => {
                return Ok(Output::Infeasible(format!(
                    "rounding failed to meet the profit targets in {} trials",
                    stats.trials
                )))
            }
        }
    } else {
        wct::solve_wct_outliers(&inst, seed, trials)?
    };
    let rep = model::validate_schedule(&Instance::Wct(inst.clone()), &sched)?;
    report.checks.push(BoundCheck::new(
        "schedule feasible and profit targets met",
        rep.feasible(),
        rep.violations.len(),
        0,
    ));
    report.objective = Some(rat_to_string(&sched.objective));
    report.details.insert("lp_value".into(), sol.lp_objective.into());
    report.details.insert("opt_guess".into(), sol.opt_guess.into());
    report.details.insert("trials_used".into(), stats.trials.into());
    report.details.insert("successes".into(), stats.successes.into());
    report.schedule = Some(schedule_json(&sched));
    Ok(Output::Report(report))
}

fn cmd_wct_dp(
    path: &Path,
    eps: Option<f64>,
    machines: usize,
    seed: u64,
) -> Result<Output, ModelError> {
    let bytes = read_file(path)?;
    let Instance::Wct(inst) = model::read_instance(&bytes)? else {
        return Err(ModelError::Parse("wct-dp command needs a wct instance".into()));
    };
    if inst.jobs.iter().any(|j| j.release != 0) {
        return Err(ModelError::BadInstance(
            "the completion-time DP needs all releases at 0".into(),
        ));
    }
    if inst.profit_targets.len() != 1 {
        return Err(ModelError::BadInstance(
            "the completion-time DP needs exactly one profit target".into(),
        ));
    }
    if inst
        .jobs
        .iter()
        .any(|j| j.proc.iter().any(|&p| p != j.proc[0]))
    {
        return Err(ModelError::BadInstance(
            "the completion-time DP needs machine-independent processing times".into(),
        ));
    }
    let p: Vec<u64> = inst.jobs.iter().map(|j| j.proc[0]).collect();
    let profits = &inst.profit_targets[0].profits;
    let target = inst.profit_targets[0].target;
    let mut report = RunReport::new("wct-dp", &bytes, seed);
    let (value, selected): (u64, Vec<usize>) = if machines > 1 {
        if eps.is_some() {
            return Err(ModelError::Parse(
                "--eps applies to the single-machine FPTAS only".into(),
            ));
        }
        let res = wct::dp_multi_machine(&p, profits, target, machines)?;
        report.details.insert(
            "per_machine".into(),
            serde_json::to_value(&res.per_machine).unwrap(),
        );
        (res.value, res.per_machine.concat())
    } else if let Some(e) = eps {
        if !(e > 0.0 && e <= 1.0) {
            return Err(ModelError::Parse("--eps must be in (0, 1]".into()));
        }
        let den = 1_000_000u64;
        let num = ((e * den as f64).round() as u64).clamp(1, den);
        let res = wct::fptas(&p, profits, target, num, den)?;
        (res.value, res.selected)
    } else {
        let res = wct::dp_exact(&p, profits, target)?;
        (res.value, res.selected)
    };
    let got: u64 = selected.iter().map(|&j| profits[j]).sum();
    report.checks.push(BoundCheck::new("profit >= target", got >= target, got, target));
    report.objective = Some(rat_to_string(&rat_int(value)));
    report
        .details
        .insert("selected".into(), serde_json::to_value(&selected).unwrap());
    Ok(Output::Report(report))
}

fn cmd_flow(path: &Path, seed: u64) -> Result<Output, ModelError> {
    let bytes = read_file(path)?;
    let Instance::Flow(inst) = model::read_instance(&bytes)? else {
        return Err(ModelError::Parse("flow command needs a flow instance".into()));
    };
    let out = flow::solve_flow_outliers(&inst)?;
    let mut report = RunReport::new("flow", &bytes, seed);
    let cert = &out.certificate;
    for (name, pass) in &cert.checks {
        report.checks.push(BoundCheck::new(name, *pass, "", ""));
    }
    let rep = model::validate_schedule(&Instance::Flow(inst.clone()), &out.schedule)?;
    report.checks.push(BoundCheck::new(
        "schedule feasible and count target met",
        rep.feasible(),
        rep.violations.len(),
        0,
    ));
    report.objective = Some(rat_to_string(&cert.total_flow));
    report.details.insert("kstar".into(), cert.kstar.into());
    report.details.insert("nu".into(), cert.nu.into());
    report
        .details
        .insert("flow_star".into(), rat_to_string(&cert.flow_star).into());
    report.details.insert("p_star".into(), rat_to_string(&cert.p_star).into());
    report
        .details
        .insert("flow_prime".into(), rat_to_string(&cert.flow_prime).into());
    report
        .details
        .insert("p_prime".into(), rat_to_string(&cert.p_prime).into());
    report
        .details
        .insert("charge_total".into(), rat_to_string(&out.ledger.total()).into());
    report.schedule = Some(schedule_json(&out.schedule));
    Ok(Output::Report(report))
}

fn cmd_oracle(path: &Path, seed: u64) -> Result<Output, ModelError> {
    let bytes = read_file(path)?;
    let inst = model::read_instance(&bytes)?;
    let res = match &inst {
        Instance::Gap(i) => oracle::brute_gap(i)?,
        Instance::Wct(i) => oracle::brute_wct(i)?,
        Instance::Flow(i) => oracle::brute_flow(i)?,
    };
    let mut report = RunReport::new("oracle", &bytes, seed);
    let rep = model::validate_schedule(&inst, &res.schedule)?;
    report.checks.push(BoundCheck::new(
        "witness schedule feasible",
        rep.feasible(),
        rep.violations.len(),
        0,
    ));
    report.objective = Some(rat_to_string(&res.objective));
    report
        .details
        .insert("selected".into(), serde_json::to_value(&res.selected).unwrap());
    report.details.insert("explored".into(), res.explored.into());
    report.schedule = Some(schedule_json(&res.schedule));
    Ok(Output::Report(report))
}

fn cmd_verify(inst_path: &Path, sched_path: &Path, seed: u64) -> Result<Output, ModelError> {
    let bytes = read_file(inst_path)?;
    let inst = model::read_instance(&bytes)?;
    let sched = model::read_schedule(&read_file(sched_path)?)?;
    let rep = model::validate_schedule(&inst, &sched)?;
    if !rep.feasible() {
        return Ok(Output::Infeasible(format!(
            "{} violation(s), first: {:?}",
            rep.violations.len(),
            rep.violations[0]
        )));
    }
    let mut report = RunReport::new("verify", &bytes, seed);
    report.checks.push(BoundCheck::new("schedule feasible", true, 0, 0));
    report.objective = Some(rat_to_string(&rep.objective));
    if !rep.cost.is_zero() {
        report.details.insert("cost".into(), rat_to_string(&rep.cost).into());
    }
    Ok(Output::Report(report))
}
