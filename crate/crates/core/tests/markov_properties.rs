use abps_core::markov::{build_generator, reachable_states, steady_state, GeneratorMatrix, MarkovError, Transition};
use proptest::prelude::*;

/// Log-uniform rate in `[10^lo, 10^hi]`.
fn rate(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi).prop_map(|e| 10f64.powf(e))
}

/// Irreducible chain with rates in `[1e-2, 1e2]`: a Hamiltonian cycle plus
/// random extra edges.
fn irreducible() -> impl Strategy<Value = GeneratorMatrix> {
    irreducible_in(-2.0, 2.0)
}

fn irreducible_in(lo: f64, hi: f64) -> impl Strategy<Value = GeneratorMatrix> {
    (2usize..=20)
        .prop_flat_map(move |n| {
            (
                Just(n),
                proptest::collection::vec(rate(lo, hi), n),
                proptest::collection::vec((0..n, 0..n, rate(lo, hi)), 0..3 * n),
            )
        })
        .prop_map(|(n, cycle, extra)| {
            let mut t: Vec<Transition> = (0..n).map(|i| Transition::new(i, (i + 1) % n, cycle[i])).collect();
            t.extend(
                extra
                    .into_iter()
                    .filter(|(a, b, _)| a != b)
                    .map(|(a, b, r)| Transition::new(a, b, r)),
            );
            build_generator(n, t).unwrap()
        })
}

fn residual_inf(q: &GeneratorMatrix, pi: &[f64]) -> f64 {
    let n = q.n_states();
    let mut r = vec![0.0; n];
    for i in 0..n {
        r[i] -= pi[i] * q.exit_rate(i);
        for &(j, rate) in q.row(i) {
            r[j] += pi[i] * rate;
        }
    }
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn stationary_vector_balances(q in irreducible()) {
        let pi = steady_state(&q, 0).unwrap();
        let p = pi.probabilities();
        prop_assert!(residual_inf(&q, p) < 1e-10);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn two_state_closed_form(a in 1e-4f64..1e4, b in 1e-4f64..1e4) {
        let q = build_generator(2, [(0, 1, a), (1, 0, b)]).unwrap();
        let pi = steady_state(&q, 0).unwrap();
        prop_assert!((pi.get(0) - b / (a + b)).abs() < 1e-12);
        prop_assert!((pi.get(1) - a / (a + b)).abs() < 1e-12);
    }

    #[test]
    fn extreme_rates_solve_or_report_residual(q in irreducible_in(-4.0, 5.0)) {
        // an absolute 1e-10 residual is below rounding once rates reach ~1e6
        match steady_state(&q, 0) {
            Ok(pi) => {
                prop_assert!(residual_inf(&q, pi.probabilities()) < 1e-10);
                prop_assert!((pi.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            Err(MarkovError::Residual { residual, .. }) => {
                prop_assert!(residual / q.max_row_sum() < 1e-12);
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn rescaling_rates_leaves_pi_unchanged(q in irreducible(), c in rate(-1.0, 1.0)) {
        let p1 = steady_state(&q, 0).unwrap();
        let p2 = steady_state(&q.scaled(c).unwrap(), 0).unwrap();
        for (x, y) in p1.probabilities().iter().zip(p2.probabilities()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn adding_edges_never_shrinks_reachability(
        n in 2usize..15,
        edges in proptest::collection::vec((0usize..15, 0usize..15), 0..30),
        more in proptest::collection::vec((0usize..15, 0usize..15), 0..10),
    ) {
        let keep = |v: &[(usize, usize)]| -> Vec<(usize, usize, f64)> {
            v.iter().filter(|(a, b)| a < &n && b < &n && a != b).map(|&(a, b)| (a, b, 1.0)).collect()
        };
        let base = keep(&edges);
        let mut all = base.clone();
        all.extend(keep(&more));
        let r1 = reachable_states(&build_generator(n, base).unwrap(), 0).unwrap();
        let r2 = reachable_states(&build_generator(n, all).unwrap(), 0).unwrap();
        prop_assert!(r1.is_subset(&r2));
        prop_assert!(r1.contains(&0));
    }

    #[test]
    fn transient_states_get_no_mass(q in irreducible(), feeders in 1usize..4) {
        // extra states that only lead into the irreducible part
        let n = q.n_states();
        let mut t: Vec<Transition> = q.transitions().collect();
        for k in 0..feeders {
            t.push(Transition::new(n + k, (k * 7) % n, 1.0 + k as f64));
            if k > 0 {
                t.push(Transition::new(n + k, n + k - 1, 0.5));
            }
        }
        let g = build_generator(n + feeders, t).unwrap();
        let pi = steady_state(&g, n + feeders - 1).unwrap();
        for k in 0..feeders {
            prop_assert_eq!(pi.get(n + k), 0.0);
        }
        let reference = steady_state(&q, 0).unwrap();
        for i in 0..n {
            prop_assert!((pi.get(i) - reference.get(i)).abs() < 1e-10);
        }
    }
}
