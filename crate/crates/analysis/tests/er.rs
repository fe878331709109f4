use at2_analysis::{er_connectivity, er_connectivity_mc, er_disconnection, gossip_totality_bound, gossip_totality_mc};
use proptest::prelude::*;

/// Sums the probability of every labeled graph on `n` nodes that is
/// connected, checking connectivity by depth-first search.
fn brute_force(n: usize, p: f64) -> f64 {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut total = 0.0;
    for mask in 0u64..(1 << pairs.len()) {
        let mut adj = vec![Vec::new(); n];
        let mut prob = 1.0;
        for (bit, &(u, v)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                adj[u].push(v);
                adj[v].push(u);
                prob *= p;
            } else {
                prob *= 1.0 - p;
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            total += prob;
        }
    }
    total
}

#[test]
fn exact_matches_enumeration() {
    for n in 1..=6 {
        for p in [0.0, 0.05, 0.2, 0.3, 0.5, 0.77, 0.95, 1.0] {
            let exact = er_connectivity(n, p).unwrap();
            let brute = brute_force(n, p);
            assert!((exact - brute).abs() <= 1e-12, "n={n} p={p}: {exact} vs {brute}");
        }
    }
}

#[test]
fn three_nodes_closed_form() {
    let p: f64 = 0.5;
    let expected = 3.0 * p * p * (1.0 - p) + p.powi(3);
    assert!((er_connectivity(3, p).unwrap() - expected).abs() < 1e-15);
}

#[test]
fn exact_matches_monte_carlo() {
    for (n, p) in [(8, 0.3), (12, 0.25), (20, 0.2), (20, 0.3)] {
        let exact = er_connectivity(n, p).unwrap();
        let mc = er_connectivity_mc(n, p, 100_000, 5).unwrap();
        let sigma = at2_analysis::binomial_sigma(exact, mc.samples);
        assert!((mc.mean() - exact).abs() <= 3.0 * sigma, "n={n} p={p}: {} vs {exact}", mc.mean());
    }
}

#[test]
fn gossip_bound_decreases_in_g_and_grows_in_f() {
    let eps = |g: f64, f: f64| gossip_totality_bound(g, f, 100).unwrap().epsilon;
    let e: Vec<f64> = [5.0, 10.0, 15.0].iter().map(|&g| eps(g, 0.1)).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    for g in 1..30 {
        assert!(eps(g as f64 + 1.0, 0.1) <= eps(g as f64, 0.1));
    }
    for f in 0..9 {
        let (a, b) = (f as f64 / 20.0, (f + 1) as f64 / 20.0);
        assert!(eps(8.0, a) <= eps(8.0, b), "f={a}");
    }
}

#[test]
fn gossip_bound_tracks_the_sampling_process() {
    let bound = gossip_totality_bound(5.0, 0.1, 100).unwrap().epsilon;
    let mc = gossip_totality_mc(5.0, 0.1, 100, 20_000, 8).unwrap();
    assert!(mc.mean() <= bound + 3.0 * at2_analysis::binomial_sigma(bound, mc.samples), "{} vs {bound}", mc.mean());
}

proptest! {
    #[test]
    fn connectivity_is_a_monotone_probability(n in 1usize..80, p in 0.0f64..=1.0, dp in 0.0f64..0.2) {
        let a = er_connectivity(n, p).unwrap();
        let b = er_connectivity(n, (p + dp).min(1.0)).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b + 1e-12 >= a);
        prop_assert!((a + er_disconnection(n, p).unwrap() - 1.0).abs() < 1e-12);
    }
}
