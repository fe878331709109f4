//! `cross-validate`: a bound against the violation frequency of simulated
//! runs. The check passes when the frequency is at most `epsilon + 3 sigma`,
//! with `sigma = sqrt(epsilon (1 - epsilon) / runs)`, the spread of the
//! frequency if the true probability were exactly `epsilon`.

use std::io::Write;

use at2_analysis::{binomial_sigma, Estimate, Property};
use at2_net::prob::ProbParams;
use at2_net::runs::{run_gossip, run_pcb, PcbAttack};
use rayon::prelude::*;

use crate::args::CrossArgs;
use crate::curve::{bound_at, property, Point};
use crate::{usage, CliError, Outcome};

pub const DEFAULT_N: usize = 50;
pub const SIGMAS: f64 = 3.0;

pub fn prob_params(point: &Point) -> ProbParams {
    let s = point.sizes;
    ProbParams {
        g: point.g,
        e: s.e,
        e_hat: s.e_hat,
        r: s.r,
        r_hat: s.r_hat,
        d: s.d,
        d_hat: s.d_hat,
    }
}

/// Whether the run with `seed` violates `property`. Validity counts a run
/// as failed when any correct process misses the correct sender's message.
pub fn violated(property: Property, point: &Point, seed: u64) -> Result<bool, CliError> {
    let sim = |e: at2_net::SimError| CliError::Runtime(e.to_string());
    let params = prob_params(point);
    Ok(match property {
        Property::GossipTotality => run_gossip(point.n, point.f, point.g, seed).map_err(sim)?.totality_violated(),
        Property::Validity => {
            let r = run_pcb(point.n, point.f, params, seed, PcbAttack::None).map_err(sim)?;
            r.delivering() < r.correct
        }
        Property::Totality => run_pcb(point.n, point.f, params, seed, PcbAttack::EReady)
            .map_err(sim)?
            .totality_violated(),
        Property::Consistency => run_pcb(point.n, point.f, params, seed, PcbAttack::Equivocate)
            .map_err(sim)?
            .consistency_violated(),
    })
}

pub fn cross_validate(args: &CrossArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let property = property(&args.property)?;
    if args.seeds == 0 {
        return Err(usage("--seeds must be positive"));
    }
    let point = Point::from_args(&args.point, DEFAULT_N);
    let bound = bound_at(property, &point, None)?;
    if property != Property::GossipTotality {
        prob_params(&point).validate().map_err(|e| usage(e.to_string()))?;
        if property != Property::Validity && at2_analysis::byzantine_count(point.n, point.f) == 0 {
            return Err(usage(format!("{property} needs a Byzantine sender, so f*N must be at least 1")));
        }
    }
    writeln!(err, "simulating {} seeds", args.seeds)?;
    let hits = (0..args.seeds)
        .into_par_iter()
        .map(|i| violated(property, &point, args.seed.wrapping_add(i)).map(u64::from))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    let est = Estimate {
        hits,
        samples: args.seeds,
    };
    let sigma = binomial_sigma(bound.epsilon, est.samples);
    let limit = bound.epsilon + SIGMAS * sigma;
    let ok = est.mean() <= limit;
    writeln!(out, "property={property}")?;
    writeln!(out, "n={}", point.n)?;
    writeln!(out, "f={}", point.f)?;
    writeln!(out, "G={}", point.g)?;
    if property != Property::GossipTotality {
        let s = point.sizes;
        writeln!(out, "sizes=E:{},E_hat:{},R:{},R_hat:{},D:{},D_hat:{}", s.e, s.e_hat, s.r, s.r_hat, s.d, s.d_hat)?;
    }
    writeln!(out, "seeds={}", args.seeds)?;
    writeln!(out, "violations={hits}")?;
    writeln!(out, "frequency={:e}", est.mean())?;
    writeln!(out, "sigma={sigma:e}")?;
    writeln!(out, "epsilon={:e}", bound.epsilon)?;
    for (name, v) in &bound.terms {
        writeln!(out, "term.{name}={v:e}")?;
    }
    writeln!(out, "limit={limit:e}")?;
    writeln!(out, "verdict={}", if ok { "ok" } else { "violation" })?;
    Ok(ok)
}
