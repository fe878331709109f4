//! `sm-check` and `consensus-demo`.

use std::io::Write;

use at2_core::Verdict;
use at2_shm::consensus::{check_consensus, consensus_system, Backend};
use at2_shm::explore;
use at2_shm::workload::{run_consensus, run_helping, run_kshared, run_sm};
use rayon::prelude::*;

use crate::args::{ConsensusArgs, SmCheckArgs};
use crate::{ok_str, usage, CliError, Outcome};

pub const MAX_PROCESSES: usize = 4;
pub const MAX_OPS: usize = 6;
/// Largest `k` for which `--exhaustive` is accepted.
pub const MAX_EXHAUSTIVE_K: usize = 3;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Default)]
struct SmTally {
    linearizable: u64,
    non_linearizable: u64,
    inconclusive: u64,
    negative: u64,
}

pub fn sm_check(args: &SmCheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let k = args.k;
    if !(1..=MAX_PROCESSES).contains(&args.processes) {
        return Err(usage(format!("--processes must be in 1..={MAX_PROCESSES}")));
    }
    if !(1..=MAX_OPS).contains(&args.ops) {
        return Err(usage(format!("--ops must be in 1..={MAX_OPS}")));
    }
    if let Some(k) = k {
        if !(1..=MAX_PROCESSES).contains(&k) || args.processes > k {
            return Err(usage(format!("--k must be in {}..={MAX_PROCESSES}", args.processes)));
        }
    }
    writeln!(err, "checking {} schedules", args.schedules)?;
    let results: Vec<Result<(Verdict, u32), CliError>> = (0..args.schedules)
        .into_par_iter()
        .map(|i| {
            let seed = args.seed.wrapping_add(i);
            match k {
                None => run_sm(seed, args.processes, args.ops)
                    .map(|r| (r.verdict, r.negative_observations))
                    .map_err(runtime),
                Some(k) => run_kshared(seed, k, args.processes, args.ops)
                    .map(|v| (v, 0))
                    .map_err(runtime),
            }
        })
        .collect();
    let mut t = SmTally::default();
    for r in results {
        let (verdict, negative) = r?;
        match verdict {
            Verdict::Linearizable => t.linearizable += 1,
            Verdict::NotLinearizable => t.non_linearizable += 1,
            Verdict::Inconclusive => t.inconclusive += 1,
        }
        t.negative += u64::from(negative > 0);
    }
    let violations = t.non_linearizable + t.negative;
    writeln!(out, "object={}", k.map_or("single-owner".to_string(), |k| format!("{k}-shared")))?;
    writeln!(out, "processes={}", args.processes)?;
    writeln!(out, "ops={}", args.ops)?;
    writeln!(out, "schedules={}", args.schedules)?;
    writeln!(out, "linearizable={}", t.linearizable)?;
    writeln!(out, "non_linearizable={}", t.non_linearizable)?;
    writeln!(out, "inconclusive={}", t.inconclusive)?;
    writeln!(out, "negative_balance_runs={}", t.negative)?;
    writeln!(out, "violations={violations}")?;
    writeln!(out, "summary={violations} violations")?;
    if t.inconclusive > 0 {
        writeln!(err, "{} histories exhausted the search budget", t.inconclusive)?;
    }
    Ok(violations == 0 && t.inconclusive == 0)
}

fn backend(name: &str) -> Result<Backend, CliError> {
    match name {
        "implemented" => Ok(Backend::Implemented),
        "atomic" => Ok(Backend::Atomic),
        other => Err(usage(format!("unknown backend {other:?}; expected implemented or atomic"))),
    }
}

#[derive(Default)]
struct ConsensusTally {
    runs: u64,
    agreement: u64,
    validity: u64,
    undecided: u64,
}

pub fn consensus_demo(args: &ConsensusArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    if !(1..=MAX_PROCESSES).contains(&args.k) {
        return Err(usage(format!("--k must be in 1..={MAX_PROCESSES}")));
    }
    let backend = backend(&args.backend)?;
    let mut t = ConsensusTally::default();
    let mut tally = |decisions: &[Option<u64>], agreement: bool, validity: bool| {
        t.runs += 1;
        t.agreement += u64::from(!agreement);
        t.validity += u64::from(!validity);
        t.undecided += u64::from(decisions.iter().any(Option::is_none));
    };
    if args.exhaustive {
        if args.k > MAX_EXHAUSTIVE_K {
            return Err(usage(format!("--exhaustive needs --k at most {MAX_EXHAUSTIVE_K}")));
        }
        let values: Vec<u64> = (0..args.k as u64).map(|i| args.seed.wrapping_add(i)).collect();
        let sys = consensus_system(args.k, values, backend).map_err(runtime)?;
        writeln!(err, "exploring every schedule for k={}", args.k)?;
        let stats = explore(sys, |s| {
            let o = check_consensus(s);
            tally(&o.decisions, o.agreement, o.validity);
        });
        writeln!(out, "mode=exhaustive")?;
        writeln!(out, "states={}", stats.states)?;
    } else {
        let outcomes: Vec<_> = (0..args.schedules)
            .into_par_iter()
            .map(|i| run_consensus(args.seed.wrapping_add(i), args.k, backend))
            .collect();
        for o in outcomes {
            let o = o.map_err(runtime)?;
            tally(&o.decisions, o.agreement, o.validity);
        }
        writeln!(out, "mode=random")?;
    }
    writeln!(out, "k={}", args.k)?;
    writeln!(out, "backend={}", args.backend)?;
    writeln!(out, "runs={}", t.runs)?;
    writeln!(out, "agreement_violations={}", t.agreement)?;
    writeln!(out, "validity_violations={}", t.validity)?;
    writeln!(out, "undecided={}", t.undecided)?;
    let mut helping_ok = true;
    if args.k >= 2 && !args.exhaustive {
        let runs: Vec<_> = (0..args.schedules)
            .into_par_iter()
            .map(|i| run_helping(args.seed.wrapping_add(i), args.k))
            .collect();
        let mut helped = 0;
        for r in runs {
            let r = r.map_err(runtime)?;
            helped += u64::from(r.helped && r.active_transfers <= r.bound);
        }
        helping_ok = helped == args.schedules;
        writeln!(out, "helping_runs={}", args.schedules)?;
        writeln!(out, "helped={helped}")?;
    }
    let agreement = t.agreement == 0 && t.undecided == 0;
    let validity = t.validity == 0;
    writeln!(out, "summary=agreement: {}, validity: {}", ok_str(agreement), ok_str(validity))?;
    Ok(agreement && validity && helping_ok)
}
