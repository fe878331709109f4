//! `run-sim`.

use std::io::Write;

use at2_net::prob::ProbParams;
use at2_net::runs::{run_at2d, run_at2p, At2Report, Attack, Workload};
use at2_net::{Scenario, SimError, StopReason};
use rayon::prelude::*;

use crate::args::RunSimArgs;
use crate::{ok_str, usage, CliError, Outcome};

fn config_error(e: SimError) -> CliError {
    match e {
        SimError::Config(msg) => CliError::Usage(msg),
        SimError::UnknownProcess(p) => CliError::Usage(format!("unknown process {p}")),
        other => CliError::Runtime(other.to_string()),
    }
}

/// The config file, if any, with the flags laid over it.
pub fn scenario(args: &RunSimArgs) -> Result<Scenario, CliError> {
    let mut s = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            Scenario::parse(&text).map_err(config_error)?
        }
        None => Scenario::default(),
    };
    let flags: [(&str, Option<String>); 19] = [
        ("protocol", args.protocol.clone()),
        ("n", args.n.map(|v| v.to_string())),
        ("f", args.f.map(|v| v.to_string())),
        ("byzantine", args.byzantine.clone()),
        ("adversary", args.adversary.clone()),
        ("seed", args.seed.map(|v| v.to_string())),
        ("runs", args.runs.map(|v| v.to_string())),
        ("max_delay", args.max_delay.map(|v| v.to_string())),
        ("fifo", args.fifo.then(|| "true".into())),
        ("expose_endpoints", args.expose_endpoints.then(|| "true".into())),
        ("G", args.g.map(|v| v.to_string())),
        ("E", args.e.map(|v| v.to_string())),
        ("E_hat", args.e_hat.map(|v| v.to_string())),
        ("R", args.r.map(|v| v.to_string())),
        ("R_hat", args.r_hat.map(|v| v.to_string())),
        ("D", args.d.map(|v| v.to_string())),
        ("D_hat", args.d_hat.map(|v| v.to_string())),
        ("transfers", args.transfers.map(|v| v.to_string())),
        ("initial_max", args.initial_max.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, v);
        }
    }
    if let Some(v) = args.amount_max {
        s.set("amount_max", v);
    }
    if s.raw("f").is_some() && s.raw("byzantine").is_none() {
        s.set("byzantine", "auto");
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Protocol {
    Det,
    Prob(ProbParams),
}

fn protocol(s: &Scenario) -> Result<Protocol, CliError> {
    match s.raw("protocol").unwrap_or("at2d") {
        "at2d" => Ok(Protocol::Det),
        "at2p" => {
            let need = |key: &str| s.require::<usize>(key).map_err(config_error);
            let e = need("E")?;
            let e_hat = need("E_hat")?;
            let get = |key: &str, default: usize| s.get_or(key, default).map_err(config_error);
            let params = ProbParams {
                g: s.require("G").map_err(config_error)?,
                e,
                e_hat,
                r: get("R", e)?,
                r_hat: get("R_hat", e_hat)?,
                d: get("D", e)?,
                d_hat: get("D_hat", e_hat)?,
            };
            params.validate().map_err(config_error)?;
            Ok(Protocol::Prob(params))
        }
        other => Err(usage(format!("unknown protocol {other:?}; expected at2d or at2p"))),
    }
}

fn write_report(out: &mut dyn Write, seed: u64, r: &At2Report) -> std::io::Result<()> {
    writeln!(out, "seed={seed}")?;
    let stop = match r.stop {
        StopReason::Quiescent => "quiescent",
        StopReason::TimeLimit => "time-limit",
        StopReason::EventLimit => "event-limit",
    };
    writeln!(out, "stop={stop}")?;
    writeln!(out, "events={}", r.events)?;
    writeln!(out, "messages={}", r.messages)?;
    writeln!(out, "trace_hash={}", r.hash)?;
    for (p, balances) in &r.balances {
        let row: Vec<String> = balances.iter().map(|(a, v)| format!("{a}:{v}")).collect();
        writeln!(out, "balances.{p}={}", row.join(","))?;
    }
    for (p, applied) in &r.applied {
        writeln!(out, "delivered.{p}={applied}")?;
    }
    for (p, (ok, failed)) in &r.resolutions {
        writeln!(out, "resolved.{p}={ok} ok,{failed} failed")?;
    }
    writeln!(out, "conflicts={}", r.conflicts)?;
    writeln!(out, "negative_balance={}", r.negative_balance)?;
    writeln!(out, "issue_order={}", ok_str(r.issue_order))?;
    writeln!(out, "agreement={}", ok_str(r.hist_agree))?;
    writeln!(out, "liveness={}", ok_str(r.all_resolved && r.stop == StopReason::Quiescent))?;
    let safety = if r.conflicts == 0 {
        "no conflicting transfers applied"
    } else {
        "conflicting transfers applied"
    };
    writeln!(out, "safety={safety}")?;
    writeln!(out, "verdict={}", if r.ok() { "ok" } else { "violation" })
}

pub fn run_sim(args: &RunSimArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let s = scenario(args)?;
    let cfg = s.sim_config().map_err(config_error)?;
    let protocol = protocol(&s)?;
    let attack: Attack = s.get_or("adversary", Attack::Crash).map_err(config_error)?;
    let defaults = Workload::default();
    let workload = Workload {
        initial_max: s.get_or("initial_max", defaults.initial_max).map_err(config_error)?,
        transfers: s.get_or("transfers", defaults.transfers).map_err(config_error)?,
        amount_max: s.get_or("amount_max", defaults.amount_max).map_err(config_error)?,
    };
    let runs: u64 = s.get_or("runs", 1).map_err(config_error)?;
    if runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }

    writeln!(out, "protocol={}", s.raw("protocol").unwrap_or("at2d"))?;
    writeln!(out, "n={}", cfg.n)?;
    let byz: Vec<String> = cfg.byzantine.iter().map(|p| p.to_string()).collect();
    writeln!(out, "byzantine={}", byz.join(","))?;
    writeln!(out, "adversary={}", if attack == Attack::Equivocate { "equivocate" } else { "crash" })?;
    if let Protocol::Prob(p) = protocol {
        writeln!(
            out,
            "params=G:{},E:{},E_hat:{},R:{},R_hat:{},D:{},D_hat:{}",
            p.g, p.e, p.e_hat, p.r, p.r_hat, p.d, p.d_hat
        )?;
    }
    writeln!(err, "running {runs} simulation(s) of {} processes", cfg.n)?;

    let reports: Vec<Result<At2Report, SimError>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(i);
            match protocol {
                Protocol::Det => run_at2d(c, attack, workload),
                Protocol::Prob(p) => run_at2p(c, p, attack, workload),
            }
        })
        .collect();
    let mut violations = 0;
    for (i, r) in reports.into_iter().enumerate() {
        let r = r.map_err(config_error)?;
        write_report(out, cfg.seed.wrapping_add(i as u64), &r)?;
        if !r.ok() {
            violations += 1;
        }
    }
    if runs > 1 {
        writeln!(out, "runs={runs}")?;
        writeln!(out, "violations={violations}")?;
    }
    if violations > 0 {
        writeln!(err, "{violations} run(s) violated an invariant")?;
    }
    Ok(violations == 0)
}
