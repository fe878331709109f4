use at2_analysis::binomial::tail;
use at2_analysis::{
    delivery_prob_bounds, e_ready_prob_bounds, multi_bound, pde_bounds, pde_property_bounds, PdeParams, SampleSizes,
};
use proptest::prelude::*;

/// `P[Bin(n, p) >= k]` with exact integer binomial coefficients.
fn tail_oracle(n: u64, p: f64, k: u64) -> f64 {
    let choose = |n: u64, k: u64| (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as f64;
    (k..=n).map(|i| choose(n, i) * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32)).sum()
}

fn sizes(e: usize, e_hat: usize, r: usize, r_hat: usize, d: usize, d_hat: usize) -> SampleSizes {
    SampleSizes {
        e,
        e_hat,
        r,
        r_hat,
        d,
        d_hat,
    }
}

#[test]
fn binomial_tails_match_oracle() {
    for n in [1u64, 4, 10, 30] {
        for k in 0..=n {
            for p in [0.0, 0.1, 0.5, 0.9, 1.0] {
                assert!((tail(n, p, k) - tail_oracle(n, p, k)).abs() < 1e-12, "n={n} k={k} p={p}");
            }
        }
    }
    let b = delivery_prob_bounds(10, 8, 9, 9, 10, 0.0).unwrap();
    assert!((b.lower - tail_oracle(10, 0.9, 8)).abs() < 1e-14);
    assert!((b.lower - 0.9298).abs() < 1e-4);
}

#[test]
fn adversary_free_validity_is_the_gossip_term() {
    // With f = 0 and all correct processes echoing, every slot is an echo,
    // so only the gossip term remains.
    let p = PdeParams {
        n: 20,
        f: 0.0,
        g: 8.0,
        sizes: sizes(10, 7, 10, 4, 10, 7),
    };
    let b = pde_property_bounds(&p, 0.0125).unwrap();
    assert_eq!(b.validity.term("delivery_failure"), Some(0.0));
    assert!((b.validity.epsilon - 0.0125).abs() < 1e-15);
}

#[test]
fn consistency_does_not_grow_with_delivery_threshold() {
    let mut last = f64::INFINITY;
    for d_hat in 10..=40 {
        let p = PdeParams {
            n: 50,
            f: 0.1,
            g: 10.0,
            sizes: sizes(40, 32, 40, 13, 40, d_hat),
        };
        let eps = pde_bounds(&p).unwrap().consistency.epsilon;
        assert!(eps <= last + 1e-15, "D_hat={d_hat}: {eps} > {last}");
        last = eps;
    }
}

#[test]
fn gossip_term_only_raises_validity() {
    let p = PdeParams {
        n: 30,
        f: 0.1,
        g: 6.0,
        sizes: sizes(20, 15, 20, 6, 20, 12),
    };
    let a = pde_property_bounds(&p, 0.0).unwrap();
    let b = pde_property_bounds(&p, 0.01).unwrap();
    assert!(b.validity.epsilon >= a.validity.epsilon);
    assert_eq!(a.consistency, b.consistency);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_are_ordered(e in 1usize..40, hat_frac in 0.0f64..=1.0, n in 1usize..60, frac in 0.0f64..=1.0, f in 0.0f64..0.5) {
        let hat = (e as f64 * hat_frac) as usize;
        let c = n - ((f * n as f64) as usize).min(n - 1);
        let k = (c as f64 * frac) as usize;
        for b in [e_ready_prob_bounds(e, hat, k, c, n, f).unwrap(), delivery_prob_bounds(e, hat, k, c, n, f).unwrap()] {
            prop_assert!(0.0 <= b.lower && b.lower <= b.upper + 1e-15 && b.upper <= 1.0);
        }
    }

    #[test]
    fn epsilons_are_probabilities(
        n in 5usize..40,
        f in 0.0f64..0.3,
        e in 4usize..20,
        r_frac in 0.1f64..0.9,
        d_frac in 0.5f64..1.0,
    ) {
        let e_hat = e / 2 + 1;
        let r_hat = ((e as f64 * r_frac) as usize).max(1);
        let d_hat = ((e as f64 * d_frac) as usize).max(1);
        let p = PdeParams { n, f, g: 4.0, sizes: sizes(e, e_hat, e, r_hat, e, d_hat) };
        let b = pde_bounds(&p).unwrap();
        for x in [&b.validity, &b.totality, &b.consistency] {
            prop_assert!((0.0..=1.0).contains(&x.epsilon), "{:?}", x);
        }
    }

    #[test]
    fn multi_bound_grows_with_messages(eps in 0.0f64..=1.0, n in 0u32..50) {
        let a = multi_bound(eps, n).unwrap();
        let b = multi_bound(eps, n + 1).unwrap();
        prop_assert!((0.0..=1.0).contains(&a) && a <= b + 1e-15);
        prop_assert!((a - (1.0 - (1.0 - eps).powi(n as i32))).abs() < 1e-12);
    }
}
