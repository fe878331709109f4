//! Threshold Contagion on the random ready multigraph.
//!
//! `c` correct nodes each hold a ready sample of `r` slots drawn uniformly,
//! with replacement, from a pool of `pool` processes. The first `c` pool
//! members are the correct nodes, the next `initially_infected` are
//! Byzantine processes that count as infected from the start, and the rest
//! never infect anyone. A healthy node becomes infected once at least
//! `r_hat` of its slots point at infected processes.
//!
//! Each round the player infects `per_round` healthy nodes chosen uniformly
//! at random, then the infection spreads until it stops.

use std::collections::HashMap;

use rand::seq::index;
use rayon::prelude::*;

use crate::binomial::{pmf_vec, tail};
use crate::{stream_rng, stream_split, AnalysisError, Result};

/// Largest `c` accepted by the Markov chain.
pub const MARKOV_CAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ContagionParams {
    pub c: usize,
    pub pool: usize,
    pub r: usize,
    pub r_hat: usize,
    pub rounds: usize,
    pub per_round: usize,
    pub initially_infected: usize,
}

impl ContagionParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(AnalysisError::Params(m));
        if self.r_hat > self.r {
            return fail(format!("threshold {} above sample size {}", self.r_hat, self.r));
        }
        if self.rounds == 0 {
            return fail("at least one round".into());
        }
        if self.pool == 0 || self.c + self.initially_infected > self.pool {
            return fail(format!(
                "pool of {} cannot hold {} nodes and {} infected outsiders",
                self.pool, self.c, self.initially_infected
            ));
        }
        Ok(())
    }
}

/// The infected-count Markov chain.
///
/// Healthy nodes are exchangeable, so the state is the infected count `i`
/// plus the count `l` every healthy node has already been checked against.
/// With nested infected sets, a node that resisted `l` infected processes
/// falls to `i` with probability `(h(i) - h(l)) / (1 - h(l))`, independently
/// of the other healthy nodes.
#[derive(Debug, Clone)]
pub struct Contagion {
    params: ContagionParams,
    h: Vec<f64>,
    memo: HashMap<(usize, usize), Vec<f64>>,
}

impl Contagion {
    pub fn new(params: ContagionParams) -> Result<Self> {
        params.validate()?;
        if params.c > MARKOV_CAP {
            return Err(AnalysisError::AboveCap {
                what: "contagion node count",
                n: params.c,
                cap: MARKOV_CAP,
            });
        }
        let h = (0..=params.c)
            .map(|i| {
                let p = (i + params.initially_infected) as f64 / params.pool as f64;
                tail(params.r as u64, p.min(1.0), params.r_hat as u64)
            })
            .collect();
        Ok(Contagion {
            params,
            h,
            memo: HashMap::new(),
        })
    }

    pub fn params(&self) -> &ContagionParams {
        &self.params
    }

    /// Probability that a healthy node with no history has at least
    /// `r_hat` infected slots when `i` correct nodes are infected.
    pub fn h(&self, i: usize) -> f64 {
        self.h[i]
    }

    fn delta(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.params.c + 1];
        v[i] = 1.0;
        v
    }

    /// Final infected-count distribution once spreading stops, starting
    /// from `i` infected nodes with healthy nodes last checked against
    /// `tested` (`None`: never checked).
    pub fn settle(&mut self, i: usize, tested: Option<usize>) -> Vec<f64> {
        let c = self.params.c;
        if i >= c {
            return self.delta(c);
        }
        if let Some(l) = tested {
            if let Some(v) = self.memo.get(&(i, l)) {
                return v.clone();
            }
        }
        let t = tested.map_or(0.0, |l| self.h[l]);
        let q = if t >= 1.0 { 0.0 } else { ((self.h[i] - t) / (1.0 - t)).clamp(0.0, 1.0) };
        let out = if q == 0.0 {
            self.delta(i)
        } else {
            let mut out = vec![0.0; c + 1];
            for (new, w) in pmf_vec((c - i) as u64, q).into_iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                if new == 0 {
                    out[i] += w;
                } else {
                    let next = self.settle(i + new, Some(i));
                    for (o, x) in out.iter_mut().zip(next) {
                        *o += w * x;
                    }
                }
            }
            out
        };
        if let Some(l) = tested {
            self.memo.insert((i, l), out.clone());
        }
        out
    }

    /// End-of-round distribution after a round that starts from `j`
    /// infected nodes at rest, `j > 0` or not the first round.
    pub fn next_round(&mut self, j: usize) -> Vec<f64> {
        let c = self.params.c;
        if j >= c {
            return self.delta(c);
        }
        self.settle((j + self.params.per_round).min(c), Some(j))
    }

    /// End-of-round distributions for every round.
    pub fn rounds(&mut self) -> Vec<Vec<f64>> {
        let c = self.params.c;
        let first = self.settle(self.params.per_round.min(c), None);
        let mut out = vec![first];
        for _ in 1..self.params.rounds {
            let prev = out.last().expect("one round").clone();
            let mut next = vec![0.0; c + 1];
            for (j, &w) in prev.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, x) in next.iter_mut().zip(self.next_round(j)) {
                    *o += w * x;
                }
            }
            out.push(next);
        }
        out
    }
}

/// Per-round distribution of the infected count, from the Markov chain.
pub fn threshold_contagion(params: ContagionParams) -> Result<Vec<Vec<f64>>> {
    Ok(Contagion::new(params)?.rounds())
}

/// One game on a sampled multigraph. Returns the infected count at the end
/// of every round.
fn play(params: &ContagionParams, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    use rand::Rng;
    let c = params.c;
    let byz_end = c + params.initially_infected;
    // succ[u]: nodes holding u in their sample, with multiplicity.
    let mut succ = vec![Vec::new(); c];
    let mut count = vec![0usize; c];
    for (v, cnt) in count.iter_mut().enumerate() {
        for _ in 0..params.r {
            let u = rng.random_range(0..params.pool);
            if u < c {
                succ[u].push(v);
            } else if u < byz_end {
                *cnt += 1;
            }
        }
    }
    let mut infected = vec![false; c];
    let mut total = 0;
    let mut stack = Vec::new();
    let mut out = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        let healthy: Vec<usize> = (0..c).filter(|&v| !infected[v]).collect();
        let k = params.per_round.min(healthy.len());
        for i in index::sample(rng, healthy.len(), k) {
            let v = healthy[i];
            infected[v] = true;
            stack.push(v);
        }
        for v in 0..c {
            if !infected[v] && count[v] >= params.r_hat {
                infected[v] = true;
                stack.push(v);
            }
        }
        while let Some(u) = stack.pop() {
            total += 1;
            for &v in &succ[u] {
                count[v] += 1;
                if !infected[v] && count[v] >= params.r_hat {
                    infected[v] = true;
                    stack.push(v);
                }
            }
        }
        out.push(total);
    }
    out
}

/// Per-round empirical distribution of the infected count over `samples`
/// games on independently sampled multigraphs.
pub fn threshold_contagion_mc(params: ContagionParams, samples: u64, seed: u64) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let c = params.c;
    let counts = stream_split(samples)
        .into_par_iter()
        .map(|(stream, games)| {
            let mut rng = stream_rng(seed, stream);
            let mut counts = vec![vec![0u64; c + 1]; params.rounds];
            for _ in 0..games {
                for (round, k) in play(&params, &mut rng).into_iter().enumerate() {
                    counts[round][k] += 1;
                }
            }
            counts
        })
        .reduce(
            || vec![vec![0u64; c + 1]; params.rounds],
            |mut a, b| {
                for (ra, rb) in a.iter_mut().zip(b) {
                    for (x, y) in ra.iter_mut().zip(rb) {
                        *x += y;
                    }
                }
                a
            },
        );
    let total = samples.max(1) as f64;
    Ok(counts
        .into_iter()
        .map(|r| r.into_iter().map(|k| k as f64 / total).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: usize, r: usize, r_hat: usize) -> ContagionParams {
        ContagionParams {
            c,
            pool: c,
            r,
            r_hat,
            rounds: 1,
            per_round: 1,
            initially_infected: 0,
        }
    }

    #[test]
    fn zero_threshold_infects_everything() {
        let d = threshold_contagion(ContagionParams { r_hat: 0, ..params(5, 3, 1) }).unwrap();
        assert_eq!(d[0][5], 1.0);
    }

    #[test]
    fn player_infecting_everyone() {
        let d = threshold_contagion(ContagionParams { per_round: 5, ..params(5, 3, 2) }).unwrap();
        assert_eq!(d[0][5], 1.0);
    }

    #[test]
    fn distributions_sum_to_one() {
        let p = ContagionParams {
            rounds: 4,
            initially_infected: 2,
            pool: 12,
            ..params(9, 4, 2)
        };
        for round in threshold_contagion(p).unwrap() {
            assert!((round.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
