//! `epsilon-curve`.

use std::io::Write;

use at2_analysis::export::write_csv;
use at2_analysis::{gossip_totality_bound, gossip_totality_mc, pde_bounds, EpsilonBound, Method, PdeParams, Property, SampleSizes};

use crate::args::{CurveArgs, PointArgs};
use crate::{usage, CliError, Outcome};

pub const DEFAULT_N: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    N,
    F,
    G,
    E,
    EHat,
    R,
    RHat,
    D,
    DHat,
}

impl Param {
    fn parse(s: &str) -> Option<Param> {
        Some(match s {
            "N" | "n" => Param::N,
            "f" => Param::F,
            "G" => Param::G,
            "E" => Param::E,
            "E-hat" | "E_hat" => Param::EHat,
            "R" => Param::R,
            "R-hat" | "R_hat" => Param::RHat,
            "D" => Param::D,
            "D-hat" | "D_hat" => Param::DHat,
            _ => return None,
        })
    }

    fn integral(self) -> bool {
        !matches!(self, Param::F | Param::G)
    }
}

/// A parsed `<param>=<lo>:<hi>:<step>` sweep; `hi` is inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: Param,
    pub values: Vec<f64>,
}

pub fn parse_sweep(s: &str) -> Result<Sweep, CliError> {
    let (name, range) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("sweep {s:?} is not <param>=<lo>:<hi>:<step>")))?;
    let param = Param::parse(name.trim()).ok_or_else(|| usage(format!("unknown sweep parameter {name:?}")))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, step] = parts[..] else {
        return Err(usage(format!("range {range:?} is not <lo>:<hi>:<step>")));
    };
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| usage(format!("bad number {v:?} in sweep")))
    };
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if step <= 0.0 {
        return Err(usage("sweep step must be positive"));
    }
    let count = if hi < lo { 0 } else { ((hi - lo) / step + 1e-9).floor() as usize + 1 };
    let values: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
    if param.integral() {
        if let Some(v) = values.iter().find(|v| (*v - v.round()).abs() > 1e-9 || **v < 0.0) {
            return Err(usage(format!("{name} takes non-negative integers, got {v}")));
        }
    }
    Ok(Sweep {
        param,
        values: if param.integral() { values.iter().map(|v| v.round()).collect() } else { values },
    })
}

/// Base point with one parameter replaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub n: usize,
    pub f: f64,
    pub g: f64,
    pub sizes: SampleSizes,
}

impl Point {
    pub fn from_args(a: &PointArgs, default_n: usize) -> Point {
        Point {
            n: a.n.unwrap_or(default_n),
            f: a.f,
            g: a.g,
            sizes: SampleSizes {
                e: a.e,
                e_hat: a.e_hat,
                r: a.r,
                r_hat: a.r_hat,
                d: a.d,
                d_hat: a.d_hat,
            },
        }
    }

    fn with(mut self, p: Param, v: f64) -> Point {
        let u = v as usize;
        match p {
            Param::N => self.n = u,
            Param::F => self.f = v,
            Param::G => self.g = v,
            Param::E => self.sizes.e = u,
            Param::EHat => self.sizes.e_hat = u,
            Param::R => self.sizes.r = u,
            Param::RHat => self.sizes.r_hat = u,
            Param::D => self.sizes.d = u,
            Param::DHat => self.sizes.d_hat = u,
        }
        self
    }

    pub fn pde(&self) -> PdeParams {
        PdeParams {
            n: self.n,
            f: self.f,
            g: self.g,
            sizes: self.sizes,
        }
    }
}

pub(crate) fn property(name: &str) -> Result<Property, CliError> {
    name.parse().map_err(usage)
}

/// The bound for `property` at `point`; errors are usage errors since they
/// come from the parameters.
pub fn bound_at(property: Property, point: &Point, mc: Option<(u64, u64)>) -> Result<EpsilonBound, CliError> {
    let at = |e: at2_analysis::AnalysisError| usage(format!("at {point:?}: {e}"));
    match property {
        Property::GossipTotality => {
            let mut b = gossip_totality_bound(point.g, point.f, point.n).map_err(at)?;
            if let Some((samples, seed)) = mc {
                let est = gossip_totality_mc(point.g, point.f, point.n, samples, seed).map_err(at)?;
                b.epsilon = est.mean();
                b.method = Method::MonteCarlo { samples };
                b.terms.push(("sigma", est.sigma()));
            }
            Ok(b)
        }
        p => {
            let bounds = pde_bounds(&point.pde()).map_err(at)?;
            Ok(bounds.get(p).expect("double-echo property").clone())
        }
    }
}

pub fn epsilon_curve(args: &CurveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let property = property(&args.property)?;
    let sweep = parse_sweep(&args.sweep)?;
    if property == Property::GossipTotality && !matches!(sweep.param, Param::N | Param::F | Param::G) {
        return Err(usage("gossip-totality depends only on N, f and G"));
    }
    if args.samples.is_some() && property != Property::GossipTotality {
        return Err(usage("--samples applies to gossip-totality only"));
    }
    if args.samples == Some(0) {
        return Err(usage("--samples must be positive"));
    }
    let base = Point::from_args(&args.point, DEFAULT_N);
    writeln!(err, "computing {} point(s)", sweep.values.len())?;
    let rows = sweep
        .values
        .iter()
        .map(|&v| bound_at(property, &base.with(sweep.param, v), args.samples.map(|s| (s, args.seed))))
        .collect::<Result<Vec<_>, _>>()?;
    write_csv(&mut *out, &rows).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(true)
}
