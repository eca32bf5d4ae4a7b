use proptest::prelude::*;
use quasimode_lab::exponents::{breakpoints, delta, sigma};
use quasimode_lab::index::{exact, LebesgueIndex};
use quasimode_lab::scale_predictor::tube_exponent;

fn index() -> impl Strategy<Value = LebesgueIndex> {
    prop_oneof![
        (2i64..200, 1i64..40)
            .prop_filter("p >= 2", |(a, b)| a >= &(2 * b))
            .prop_map(|(a, b)| LebesgueIndex::ratio(a, b)),
        Just(LebesgueIndex::Infinite),
    ]
}

proptest! {
    #[test]
    fn whole_manifold_delta_is_monotone(n in 2u32..9, p in index(), q in index()) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(delta(n, n, lo).unwrap().exact <= delta(n, n, hi).unwrap().exact);
    }

    #[test]
    fn sigma_is_nonincreasing_in_beta(
        n in 2u32..9,
        k_off in 1u32..8,
        p in index(),
        b1 in 0.5f64..1.0,
        b2 in 0.5f64..1.0,
    ) {
        prop_assume!(k_off < n && !p.is_infinite());
        let k = n - k_off;
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let s_lo = sigma(n, k, p, lo).unwrap().exponent;
        let s_hi = sigma(n, k, p, hi).unwrap().exponent;
        prop_assert!(s_hi <= s_lo + 1e-12, "sigma({n},{k},{p},{hi}) = {s_hi} > {s_lo}");
    }

    #[test]
    fn neighbourhood_never_beats_the_whole_manifold(
        n in 2u32..9,
        k_off in 1u32..8,
        p in index(),
        beta in 0.5f64..1.0,
    ) {
        prop_assume!(k_off < n);
        let k = n - k_off;
        prop_assert!(sigma(n, k, p, beta).unwrap().exponent <= delta(n, n, p).unwrap().exponent + 1e-12);
    }

    #[test]
    fn every_scale_stays_below_sigma(
        n in 2u32..6,
        k_off in 1u32..5,
        p in index(),
        beta in 0.5f64..=1.0,
        alpha in 0.0f64..=0.5,
    ) {
        prop_assume!(k_off < n);
        let k = n - k_off;
        let e = tube_exponent(n, k, p, beta, alpha).unwrap();
        prop_assert!(e <= sigma(n, k, p, beta).unwrap().exponent + 1e-12);
    }

    #[test]
    fn index_text_round_trips(p in index()) {
        let back: LebesgueIndex = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn hypersurface_at_beta_one_loses_one_over_p() {
    for n in 2..=8u32 {
        let p_hyp = breakpoints(n).unwrap().p_hyp;
        let LebesgueIndex::Finite(top) = p_hyp else {
            unreachable!()
        };
        for q in [LebesgueIndex::integer(2), LebesgueIndex::ratio(9, 4), p_hyp] {
            let LebesgueIndex::Finite(r) = q else {
                unreachable!()
            };
            if r > top {
                continue;
            }
            let want = delta(n, n - 1, q).unwrap().exact - q.reciprocal();
            assert_eq!(sigma(n, n - 1, q, 1.0).unwrap().exact, want, "n={n} p={q}");
        }
    }
}

#[test]
fn exact_values_for_a_few_queries() {
    assert_eq!(
        delta(3, 3, LebesgueIndex::integer(4)).unwrap().exact,
        exact(1, 4)
    );
    assert_eq!(
        sigma(3, 2, LebesgueIndex::integer(2), 0.75).unwrap().exact,
        exact(-1, 8)
    );
}
