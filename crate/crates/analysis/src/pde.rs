//! Bounds for probabilistic double echo: E-ready and delivery probabilities,
//! and the composed validity, totality and consistency bounds.

use crate::binomial::{ln_multinomial, ln_pow, one_minus_pow, pmf_vec, tail};
use crate::bound::{BoundParams, EpsilonBound, Method, Property, SampleSizes};
use crate::contagion::{Contagion, ContagionParams};
use crate::er::gossip_totality_bound;
use crate::{check_probability, correct_count, AnalysisError, Result};

/// A probability known to lie in `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbBounds {
    pub lower: f64,
    pub upper: f64,
    /// The adversarial success probability `n/N + f` exceeded 1 and was
    /// clamped.
    pub clamped: bool,
}

fn threshold_bounds(size: usize, hat: usize, n_correct: usize, c: usize, n: usize, f: f64) -> Result<ProbBounds> {
    check_probability("f", f)?;
    if hat > size {
        return Err(AnalysisError::Params(format!("threshold {hat} above sample size {size}")));
    }
    if n_correct > c || c > n || n == 0 {
        return Err(AnalysisError::Params(format!("need {n_correct} <= C={c} <= N={n}, N > 0")));
    }
    let p = n_correct as f64 / n as f64;
    let hi = p + f;
    Ok(ProbBounds {
        lower: tail(size as u64, p, hat as u64),
        upper: tail(size as u64, hi.min(1.0), hat as u64),
        clamped: hi > 1.0,
    })
}

/// Probability that a correct process becomes E-ready when `n_echo` correct
/// processes echo: lower bound with silent Byzantine processes, upper bound
/// with every Byzantine process echoing too.
pub fn e_ready_prob_bounds(e: usize, e_hat: usize, n_echo: usize, c: usize, n: usize, f: f64) -> Result<ProbBounds> {
    threshold_bounds(e, e_hat, n_echo, c, n, f)
}

/// Probability that a correct process delivers when `n_ready` correct
/// processes are ready, with the same two Byzantine scenarios.
pub fn delivery_prob_bounds(d: usize, d_hat: usize, n_ready: usize, c: usize, n: usize, f: f64) -> Result<ProbBounds> {
    threshold_bounds(d, d_hat, n_ready, c, n, f)
}

/// Failure bound for `n` messages when each fails with probability at most
/// `eps`: `1 - (1 - eps)^n`.
pub fn multi_bound(eps: f64, n: u32) -> Result<f64> {
    check_probability("eps", eps)?;
    Ok(if eps >= 1.0 {
        if n == 0 { 0.0 } else { 1.0 }
    } else {
        -(n as f64 * (-eps).ln_1p()).exp_m1()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeParams {
    pub n: usize,
    pub f: f64,
    /// Expected gossip sample size, used when the pb totality term is
    /// derived rather than passed in.
    pub g: f64,
    pub sizes: SampleSizes,
}

impl PdeParams {
    pub fn correct(&self) -> usize {
        correct_count(self.n, self.f)
    }

    pub fn byzantine(&self) -> usize {
        self.n - self.correct()
    }

    fn bound_params(&self) -> BoundParams {
        BoundParams {
            n: self.n,
            f: self.f,
            g: Some(self.g),
            sizes: Some(self.sizes),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sizes;
        if self.n == 0 {
            return Err(AnalysisError::Params("N must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.f) {
            return Err(AnalysisError::Params(format!("f={} must be in [0, 1)", self.f)));
        }
        for (name, size, hat) in [("E", s.e, s.e_hat), ("R", s.r, s.r_hat), ("D", s.d, s.d_hat)] {
            if hat == 0 || hat > size {
                return Err(AnalysisError::Params(format!("{name} threshold {hat} must be in 1..={size}")));
            }
        }
        if 2 * s.e_hat <= s.e {
            return Err(AnalysisError::Regime(format!(
                "echo threshold {} is not above half the echo sample {}",
                s.e_hat, s.e
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeBounds {
    pub validity: EpsilonBound,
    pub totality: EpsilonBound,
    pub consistency: EpsilonBound,
}

impl PdeBounds {
    pub fn get(&self, p: Property) -> Option<&EpsilonBound> {
        match p {
            Property::Validity => Some(&self.validity),
            Property::Totality => Some(&self.totality),
            Property::Consistency => Some(&self.consistency),
            Property::GossipTotality => None,
        }
    }
}

struct Model {
    p: PdeParams,
    c: usize,
    b: usize,
}

impl Model {
    fn frac(&self, k: usize) -> f64 {
        (k as f64 / self.p.n as f64).min(1.0)
    }

    fn deliver_lo(&self, j: usize) -> f64 {
        let s = &self.p.sizes;
        tail(s.d as u64, self.frac(j), s.d_hat as u64)
    }

    fn deliver_hi(&self, j: usize) -> f64 {
        let s = &self.p.sizes;
        tail(s.d as u64, self.frac(j + self.b), s.d_hat as u64)
    }

    fn contagion(&self, per_round: usize, infected: usize) -> Result<Contagion> {
        let s = &self.p.sizes;
        Contagion::new(ContagionParams {
            c: self.c,
            pool: self.p.n,
            r: s.r,
            r_hat: s.r_hat,
            rounds: 1,
            per_round,
            initially_infected: infected,
        })
    }

    /// Probability that some correct process fails to deliver a correct
    /// sender's message, given every correct process echoes it.
    fn delivery_failure(&self) -> Result<f64> {
        let s = &self.p.sizes;
        let p_e = tail(s.e as u64, self.frac(self.c), s.e_hat as u64);
        let mut chain = self.contagion(0, 0)?;
        let mut fail = 0.0;
        for (k, wk) in pmf_vec(self.c as u64, p_e).into_iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            for (j, wj) in chain.settle(k, None).into_iter().enumerate() {
                if wj > 0.0 {
                    fail += wk * wj * one_minus_pow(self.deliver_lo(j), self.c);
                }
            }
        }
        Ok(fail.min(1.0))
    }

    /// `P[#m + #b >= Ê | #a + #b < Ê]` for one echo sample whose slots hit
    /// an m1 echoer with probability `a`, an m2 echoer with `m` and a
    /// Byzantine process with `b`.
    fn m2_ready_given_not_m1(&self, a: f64, m: f64, b: f64) -> f64 {
        let s = &self.p.sizes;
        let (e, hat) = (s.e as u64, s.e_hat as u64);
        let o = (1.0 - a - m - b).max(0.0);
        let (mut joint, mut cond) = (0.0, 0.0);
        for nb in 0..=e {
            for na in 0..=e - nb {
                if na + nb >= hat {
                    continue;
                }
                for nm in 0..=e - nb - na {
                    let no = e - nb - na - nm;
                    let lp = ln_multinomial(&[na, nm, nb, no]) + ln_pow(a, na) + ln_pow(m, nm) + ln_pow(b, nb) + ln_pow(o, no);
                    let w = lp.exp();
                    cond += w;
                    if nm + nb >= hat {
                        joint += w;
                    }
                }
            }
        }
        if cond <= 0.0 {
            0.0
        } else {
            (joint / cond).min(1.0)
        }
    }

    /// Early consistency: the adversary has correct processes echo m1 one at
    /// a time until one is E-ready, then has all others echo m2. Byzantine
    /// processes echo both.
    fn early_consistency(&self) -> f64 {
        let s = &self.p.sizes;
        let c = self.c;
        let e1 = |k: usize| tail(s.e as u64, self.frac(k + self.b), s.e_hat as u64);
        // none[k]: no correct process is E-ready for m1 after k m1 echoes.
        let none: Vec<f64> = (0..=c).map(|k| 1.0 - one_minus_pow(1.0 - e1(k), c)).collect();
        let n = self.p.n as f64;
        let b = self.b as f64 / n;
        let mut eps = 0.0;
        for k in 0..=c {
            let first = if k == 0 { 1.0 - none[0] } else { none[k - 1] - none[k] };
            if first <= 0.0 {
                continue;
            }
            let q2 = if k == 0 {
                tail(s.e as u64, self.frac(c + self.b), s.e_hat as u64)
            } else {
                self.m2_ready_given_not_m1((k - 1) as f64 / n, (c - k) as f64 / n, b)
            };
            eps += first * one_minus_pow(1.0 - q2, c);
        }
        eps.min(1.0)
    }

    /// Multi-round game: one more E-ready correct process per round until
    /// someone delivers. Totality fails if the first round with a delivery
    /// does not end with everyone delivering.
    ///
    /// Given the ready counts `j` before and `j2` after a round, delivery
    /// samples are independent across processes and a process that had not
    /// delivered at `j` delivers at `j2` with probability at least
    /// `lo(j2) - hi(j)`. The round's contribution is
    /// `P[none at j] - P[none at j2] - P[none at j, all at j2]`, each term
    /// bounded in the direction that makes the difference larger.
    fn totality_game(&self) -> Result<f64> {
        let c = self.c;
        let mut chain = self.contagion(1, 0)?;
        let lo: Vec<f64> = (0..=c).map(|j| self.deliver_lo(j)).collect();
        let hi: Vec<f64> = (0..=c).map(|j| self.deliver_hi(j)).collect();
        let none = |d: f64| 1.0 - one_minus_pow(1.0 - d, c);
        let mut dist = vec![0.0; c + 1];
        dist[0] = 1.0;
        let mut eps = 0.0;
        for round in 0..c {
            let mut next = vec![0.0; c + 1];
            for (j, &w) in dist.iter().enumerate() {
                if w == 0.0 || j == c {
                    continue;
                }
                let t = if round == 0 { chain.settle(1, None) } else { chain.next_round(j) };
                // Before the first round nobody is ready, so nobody has
                // delivered unless Byzantine readies alone suffice.
                let none_before = none(lo[j]);
                for (j2, x) in t.into_iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let fresh = (lo[j2] - hi[j]).max(0.0);
                    let all_fresh = if fresh >= 1.0 { 1.0 } else { 1.0 - one_minus_pow(fresh, c) };
                    let v = (none_before - none(hi[j2]) - all_fresh).max(0.0);
                    eps += w * x * v;
                    next[j2] += w * x;
                }
            }
            dist = next;
        }
        Ok(eps.min(1.0))
    }

    /// Probability that some correct process delivers m while no correct
    /// process is E-ready for it, with every Byzantine process sending
    /// Ready for m.
    fn feedback_creation(&self) -> Result<f64> {
        let mut chain = self.contagion(0, self.b)?;
        let mut eps = 0.0;
        for (j, w) in chain.settle(0, None).into_iter().enumerate() {
            if w > 0.0 {
                eps += w * one_minus_pow(1.0 - self.deliver_hi(j), self.c);
            }
        }
        Ok(eps.min(1.0))
    }
}

/// Validity, totality and consistency bounds, given the gossip totality
/// failure bound `pb_totality_eps`.
pub fn pde_property_bounds(params: &PdeParams, pb_totality_eps: f64) -> Result<PdeBounds> {
    params.validate()?;
    check_probability("pb_totality_eps", pb_totality_eps)?;
    let m = Model {
        p: *params,
        c: params.correct(),
        b: params.byzantine(),
    };
    let bound = |property, terms: Vec<(&'static str, f64)>| {
        let epsilon = terms.iter().map(|t| t.1).sum::<f64>().min(1.0);
        EpsilonBound {
            property,
            params: params.bound_params(),
            epsilon,
            method: Method::Markov,
            terms,
        }
    };
    let early = m.early_consistency();
    let validity = bound(
        Property::Validity,
        vec![("pb_totality", pb_totality_eps), ("delivery_failure", m.delivery_failure()?)],
    );
    let totality = bound(
        Property::Totality,
        vec![("early_consistency", early), ("contagion_game", m.totality_game()?)],
    );
    // Either of the two conflicting messages may be the one delivered
    // through feedback alone.
    let consistency = bound(
        Property::Consistency,
        vec![("early_consistency", early), ("feedback_creation", 2.0 * m.feedback_creation()?)],
    );
    Ok(PdeBounds {
        validity,
        totality,
        consistency,
    })
}

/// Same as [`pde_property_bounds`] with the gossip term taken from
/// [`gossip_totality_bound`] at `params.g`.
pub fn pde_bounds(params: &PdeParams) -> Result<PdeBounds> {
    let pb = gossip_totality_bound(params.g, params.f, params.n)?;
    pde_property_bounds(params, pb.epsilon)
}
