//! Erdős-Rényi connectivity and the gossip totality bound built on it.

use petgraph::unionfind::UnionFind;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use statrs::function::factorial::ln_binomial;

use crate::bound::{BoundParams, EpsilonBound, Method, Property};
use crate::{check_probability, correct_count, stream_rng, stream_split, AnalysisError, Estimate, Result};

/// Largest `n` accepted by the exact recursion.
pub const EXACT_CAP: usize = 1024;

/// `P(k)` for `k = 1..=n`, index `k - 1`, alongside the disconnection
/// probabilities `1 - P(k)` summed directly.
fn connectivity_table(n: usize, p: f64) -> (Vec<f64>, Vec<f64>) {
    let ln_q = (1.0 - p).ln();
    let mut conn: Vec<f64> = vec![1.0];
    let mut disc: Vec<f64> = vec![0.0];
    for m in 2..=n {
        let mut d = 0.0;
        for k in 1..m {
            let pk = conn[k - 1];
            if pk <= 0.0 {
                continue;
            }
            let cut = (k * (m - k)) as f64;
            let w = if p >= 1.0 { 0.0 } else { (ln_binomial(m as u64 - 1, k as u64 - 1) + pk.ln() + cut * ln_q).exp() };
            d += w;
        }
        let d = d.min(1.0);
        disc.push(d);
        conn.push(1.0 - d);
    }
    (conn, disc)
}

fn check(n: usize, p: f64) -> Result<()> {
    check_probability("p", p)?;
    if n == 0 {
        return Err(AnalysisError::Params("a graph needs at least one node".into()));
    }
    if n > EXACT_CAP {
        return Err(AnalysisError::AboveCap {
            what: "graph size",
            n,
            cap: EXACT_CAP,
        });
    }
    Ok(())
}

/// Probability that `G(n, p)` is connected.
pub fn er_connectivity(n: usize, p: f64) -> Result<f64> {
    check(n, p)?;
    Ok(connectivity_table(n, p).0[n - 1])
}

/// Probability that `G(n, p)` is disconnected, without the cancellation of
/// `1 - er_connectivity`.
pub fn er_disconnection(n: usize, p: f64) -> Result<f64> {
    check(n, p)?;
    Ok(connectivity_table(n, p).1[n - 1])
}

fn connected(uf: &mut UnionFind<usize>, n: usize) -> bool {
    (1..n).all(|v| uf.equiv(0, v))
}

/// Fraction of sampled `G(n, p)` graphs that are connected.
pub fn er_connectivity_mc(n: usize, p: f64, samples: u64, seed: u64) -> Result<Estimate> {
    check_probability("p", p)?;
    if n == 0 {
        return Err(AnalysisError::Params("a graph needs at least one node".into()));
    }
    let hits = stream_split(samples)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = stream_rng(seed, stream);
            let mut hits = 0;
            for _ in 0..count {
                let mut uf = UnionFind::new(n);
                for u in 0..n {
                    for v in u + 1..n {
                        if rng.random_bool(p) {
                            uf.union(u, v);
                        }
                    }
                }
                hits += u64::from(connected(&mut uf, n));
            }
            hits
        })
        .sum();
    Ok(Estimate { hits, samples })
}

/// Probability that a correct process picks a given other process in its
/// gossip sample, in either direction: `1 - (1 - G/N)^2`.
pub fn gossip_edge_probability(g: f64, n: usize) -> f64 {
    let one_way = (g / n as f64).clamp(0.0, 1.0);
    1.0 - (1.0 - one_way) * (1.0 - one_way)
}

fn check_gossip(g: f64, f: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(AnalysisError::Params("N must be positive".into()));
    }
    if !(0.0..1.0).contains(&f) {
        return Err(AnalysisError::Params(format!("f={f} must be in [0, 1)")));
    }
    if !(g >= 0.0 && g <= n as f64) {
        return Err(AnalysisError::Params(format!("G={g} must be in [0, N={n}]")));
    }
    Ok(())
}

/// Upper bound on the probability that gossip fails totality: the correct
/// subgraph is modeled as `G(C, p_edge)`.
pub fn gossip_totality_bound(g: f64, f: f64, n: usize) -> Result<EpsilonBound> {
    check_gossip(g, f, n)?;
    let c = correct_count(n, f);
    let p_edge = gossip_edge_probability(g, n);
    let epsilon = er_disconnection(c, p_edge)?;
    Ok(EpsilonBound {
        property: Property::GossipTotality,
        params: BoundParams {
            n,
            f,
            g: Some(g),
            sizes: None,
        },
        epsilon,
        method: Method::Exact,
        terms: vec![("p_edge", p_edge), ("correct", c as f64)],
    })
}

/// Monte Carlo estimate of the same failure with the actual sampling
/// process: every correct process draws `Poisson(G)` distinct members out
/// of all `N`, and links are reciprocated.
pub fn gossip_totality_mc(g: f64, f: f64, n: usize, samples: u64, seed: u64) -> Result<Estimate> {
    check_gossip(g, f, n)?;
    let c = correct_count(n, f);
    let poisson = (g > 0.0).then(|| Poisson::new(g).expect("positive mean"));
    let hits = stream_split(samples)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = stream_rng(seed, stream);
            let mut hits = 0;
            for _ in 0..count {
                let mut uf = UnionFind::new(c);
                for u in 0..c {
                    let k = poisson.map_or(0, |d| (d.sample(&mut rng) as usize).min(n));
                    for v in index::sample(&mut rng, n, k) {
                        if v < c {
                            uf.union(u, v);
                        }
                    }
                }
                hits += u64::from(!connected(&mut uf, c));
            }
            hits
        })
        .sum();
    Ok(Estimate { hits, samples })
}
