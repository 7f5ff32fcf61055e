use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use proptest::prelude::*;

use tdual_core::abelian::{cokernel, FgAbGroup, IntMatrix};
use tdual_core::ktheory::{
    ahss, apply_move, family_moves, normal_form, orbits_in_box, Move, TwistPair, TwistedCohDatum,
};
use tdual_core::lsss::Family;

fn families() -> [Family; 3] {
    [Family::UnipotentTorus { m: 2, n: 3 }, Family::UnipotentTorus { m: 1, n: 1 }, Family::AntipodalMappingTorus]
}

fn group(free: usize, orders: &[u64]) -> FgAbGroup {
    FgAbGroup::from_orders(free, &orders.iter().map(|&o| BigInt::from(o)).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// Euclid with recorded moves lands on `(gcd, 0)` and replays exactly.
    #[test]
    fn normal_form_is_euclid(j in -1_000_000i64..=1_000_000, k in -1_000_000i64..=1_000_000) {
        let nf = normal_form(TwistPair::new(j, k));
        prop_assert_eq!(nf.pair, TwistPair::new(j.gcd(&k), 0));
        prop_assert_eq!(nf.replay().unwrap(), nf.pair);
        prop_assert!(normal_form(nf.pair).moves.is_empty());
        let mut cur = nf.start;
        for mv in &nf.moves {
            let next = apply_move(cur, *mv).unwrap();
            prop_assert_eq!(next.gcd(), cur.gcd());
            cur = next;
        }
    }

    /// Every family move keeps the gcd and can be undone by another move.
    #[test]
    fn family_moves_are_reversible(j in -40i64..=40, k in -40i64..=40, f in 0usize..3) {
        let family = &families()[f];
        let start = TwistPair::new(j, k);
        for (mv, next) in family_moves(family, start) {
            prop_assert_eq!(apply_move(start, mv).unwrap(), next);
            prop_assert_eq!(next.gcd(), start.gcd());
            prop_assert!(family_moves(family, next).iter().any(|(_, back)| *back == start), "{mv:?} from {start}");
        }
    }

    /// Without a twist the spectral sequence collapses.
    #[test]
    fn untwisted_collapses(free in proptest::collection::vec(0usize..3, 2..7), tors in proptest::collection::vec(0u64..5, 2..7)) {
        let groups: Vec<FgAbGroup> = free.iter().zip(tors.iter().cycle()).map(|(&f, &t)| group(f, &[t])).collect();
        let r = ahss(&TwistedCohDatum::untwisted(groups.clone()).unwrap()).unwrap();
        prop_assert_eq!(&r.e4, &groups);
        let even: usize = groups.iter().step_by(2).map(|g| g.free_rank).sum();
        let odd: usize = groups.iter().skip(1).step_by(2).map(|g| g.free_rank).sum();
        prop_assert_eq!(r.k0.assembled.free_rank, even);
        prop_assert_eq!(r.k1.assembled.free_rank, odd);
    }

    /// `Z^a → Z^b` in degrees 0 and 3: `E₄⁰ = ker`, `E₄³ = coker` and the
    /// rational Euler characteristic is kept.
    #[test]
    fn free_d3_is_kernel_and_cokernel(
        (a, b, m) in (1usize..=3, 1usize..=3).prop_flat_map(|(a, b)| {
            (Just(a), Just(b), proptest::collection::vec(proptest::collection::vec(-4i64..=4, a), b))
        })
    ) {
        let mat = IntMatrix::from_rows(&m);
        let groups = vec![FgAbGroup::free(a), FgAbGroup::free(0), FgAbGroup::free(0), FgAbGroup::free(b)];
        let r = ahss(&TwistedCohDatum::hand_entered(groups, vec![mat.clone()]).unwrap()).unwrap();
        let coker = cokernel(&mat);
        let rank = b - coker.free_rank;
        prop_assert_eq!(&r.e4[0], &FgAbGroup::free(a - rank));
        prop_assert_eq!(&r.e4[3], &coker);
        let ranks = &r.d3_ranks[0];
        prop_assert_eq!(ranks.kernel_rank + ranks.image_rank, ranks.domain_rank);
        prop_assert_eq!(r.e4[0].free_rank as i64 - r.e4[3].free_rank as i64, a as i64 - b as i64);
    }
}

/// The orbits partition the box and are closed under in-box moves.
#[test]
fn orbits_partition_the_box() {
    for family in families() {
        let orbits = orbits_in_box(&family, -6, 9);
        let mut seen = BTreeSet::new();
        for orbit in &orbits {
            let d = orbit[0].gcd();
            for p in orbit {
                assert!(seen.insert(*p), "{p} in two orbits");
                assert_eq!(p.gcd(), d);
                for (_, next) in family_moves(&family, *p) {
                    if (-6..=9).contains(&next.j) && (-6..=9).contains(&next.k) {
                        assert!(orbit.contains(&next));
                    }
                }
            }
        }
        assert_eq!(seen.len(), 16 * 16);
    }
}

#[test]
fn shift_is_undefined_at_zero() {
    assert!(apply_move(TwistPair::new(0, 5), Move::Shift { times: 1 }).is_err());
    assert_eq!(apply_move(TwistPair::new(0, 5), Move::Swap).unwrap(), TwistPair::new(5, 0));
}

#[test]
fn unipotent_orbit_count() {
    let orbits = orbits_in_box(&Family::UnipotentTorus { m: 2, n: 3 }, 0, 12);
    assert_eq!(orbits.len(), 13);
    let gcds: BTreeSet<i64> = orbits.iter().map(|o| o[0].gcd()).collect();
    assert_eq!(gcds, (0..=12).collect());
}
