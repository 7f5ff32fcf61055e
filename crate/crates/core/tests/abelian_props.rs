use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use tdual_core::abelian::{
    cokernel, induced_map, smith_normal_form, subquotient, FgAbGroup, IntMatrix, PresentedSubquotient,
};

fn matrix(rows: usize, cols: usize, bound: i64) -> impl Strategy<Value = IntMatrix> {
    proptest::collection::vec(proptest::collection::vec(-bound..=bound, cols), rows)
        .prop_map(move |r| if rows == 0 { IntMatrix::zeros(0, cols) } else { IntMatrix::from_rows(&r) })
}

fn sized_matrix(max: usize, bound: i64) -> impl Strategy<Value = IntMatrix> {
    (1..=max, 1..=max).prop_flat_map(move |(r, c)| matrix(r, c, bound))
}

fn to_vecs(m: &IntMatrix) -> Vec<Vec<BigInt>> {
    (0..m.rows()).map(|r| m.row(r)).collect()
}

/// Determinant by cofactor expansion.
fn det(m: &[Vec<BigInt>]) -> BigInt {
    match m.len() {
        0 => BigInt::one(),
        1 => m[0][0].clone(),
        n => (0..n)
            .map(|c| {
                let minor: Vec<Vec<BigInt>> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| x.clone()).collect()).collect();
                let s = if c % 2 == 0 { BigInt::one() } else { -BigInt::one() };
                s * &m[0][c] * det(&minor)
            })
            .sum(),
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Invariant factors from determinantal divisors: `d_k` is the gcd of all
/// `k × k` minors and `s_k = d_k / d_{k−1}`.
fn oracle_cokernel(m: &IntMatrix) -> FgAbGroup {
    let a = to_vecs(m);
    let (rows, cols) = (m.rows(), m.cols());
    let mut prev = BigInt::one();
    let mut orders = Vec::new();
    for k in 1..=rows.min(cols) {
        let mut g = BigInt::zero();
        for rs in subsets(rows, k) {
            for cs in subsets(cols, k) {
                let minor: Vec<Vec<BigInt>> = rs.iter().map(|&r| cs.iter().map(|&c| a[r][c].clone()).collect()).collect();
                g = g.gcd(&det(&minor));
            }
        }
        if g.is_zero() {
            break;
        }
        orders.push(&g / &prev);
        prev = g;
    }
    let rank = orders.len();
    FgAbGroup { free_rank: rows - rank, invariant_factors: orders.into_iter().filter(|d| !d.is_one()).collect() }
}

fn is_identity(m: &IntMatrix) -> bool {
    *m == IntMatrix::identity(m.rows())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn smith_decomposition_is_valid(a in sized_matrix(5, 9)) {
        let s = smith_normal_form(&a);
        prop_assert_eq!(s.u.mul(&a).mul(&s.v), s.d.clone());
        prop_assert!(is_identity(&s.u.mul(&s.u_inv)));
        prop_assert!(is_identity(&s.v.mul(&s.v_inv)));
        prop_assert!(s.u.determinant().abs().is_one() && s.v.determinant().abs().is_one());
        let diag = s.diagonal();
        for i in 0..diag.len() {
            for j in 0..s.d.cols() {
                if i != j && i < s.d.rows() {
                    prop_assert!(s.d[(i, j)].is_zero());
                }
            }
            prop_assert_eq!(i < s.rank, !diag[i].is_zero());
            prop_assert!(!diag[i].is_negative());
            if i + 1 < s.rank {
                prop_assert!(diag[i + 1].is_multiple_of(&diag[i]));
            }
        }
    }

    #[test]
    fn cokernel_matches_determinantal_divisors(a in sized_matrix(4, 7)) {
        prop_assert_eq!(cokernel(&a), oracle_cokernel(&a));
    }

    #[test]
    fn square_cokernel_order_is_determinant(a in matrix(3, 3, 6)) {
        let d = a.determinant();
        let g = cokernel(&a);
        if d.is_zero() {
            prop_assert!(g.free_rank > 0);
        } else {
            prop_assert_eq!(g.free_rank, 0);
            prop_assert_eq!(g.torsion_order(), d.abs());
        }
    }

    /// For an injective `P`, `P(Z^k) / P(M(Z^l)) ≅ coker M`.
    #[test]
    fn subquotient_of_embedded_lattice(
        (p, m) in (1usize..=3, 1usize..=3).prop_flat_map(|(k, l)| (matrix(k + 1, k, 5), matrix(k, l, 6)))
    ) {
        // P must have full column rank
        prop_assume!(oracle_cokernel(&p).free_rank == p.rows() - p.cols());
        let sq = subquotient(&p, &p.mul(&m)).unwrap();
        prop_assert_eq!(sq.group().clone(), oracle_cokernel(&m));
    }

    #[test]
    fn coordinates_lift_round_trip(m in matrix(3, 2, 6), x in proptest::collection::vec(-20i64..=20, 3)) {
        let sq = subquotient(&IntMatrix::identity(3), &m).unwrap();
        let v: Vec<BigInt> = x.iter().map(|&a| BigInt::from(a)).collect();
        let c = sq.coordinates(&v).unwrap();
        prop_assert_eq!(sq.group().normalize(&c), c.clone());
        let back = sq.coordinates(&sq.lift(&c)).unwrap();
        prop_assert_eq!(back, c);
        let diff: Vec<BigInt> = sq.lift(&sq.coordinates(&v).unwrap()).iter().zip(&v).map(|(a, b)| a - b).collect();
        prop_assert!(sq.is_zero_class(&diff).unwrap());
    }

    /// Induced maps respect composition.
    #[test]
    fn induced_maps_compose(
        rel in matrix(3, 2, 5),
        f in matrix(3, 3, 3),
        g in matrix(2, 3, 3),
    ) {
        let a = subquotient(&IntMatrix::identity(3), &rel).unwrap();
        let b = subquotient(&IntMatrix::identity(3), &f.mul(&rel)).unwrap();
        let c = subquotient(&IntMatrix::identity(2), &g.mul(&f).mul(&rel)).unwrap();
        let hf = induced_map(&f, &a, &b).unwrap();
        let hg = induced_map(&g, &b, &c).unwrap();
        let hgf = induced_map(&g.mul(&f), &a, &c).unwrap();
        prop_assert_eq!(hg.compose(&hf).unwrap(), hgf);
    }

    #[test]
    fn group_strings_round_trip(free in 0usize..4, orders in proptest::collection::vec(0u64..30, 0..4)) {
        let orders: Vec<BigInt> = orders.into_iter().map(BigInt::from).collect();
        let g = FgAbGroup::from_orders(free, &orders);
        let s = g.to_string();
        prop_assert_eq!(s.parse::<FgAbGroup>().unwrap(), g.clone());
        let json = serde_json::to_string(&g).unwrap();
        prop_assert_eq!(serde_json::from_str::<FgAbGroup>(&json).unwrap(), g);
    }

    #[test]
    fn chinese_remainder(a in 1u64..40, b in 1u64..40) {
        let g = FgAbGroup::cyclic(a).direct_sum(&FgAbGroup::cyclic(b));
        if a.gcd(&b) == 1 {
            prop_assert_eq!(g, FgAbGroup::cyclic(a * b));
        } else {
            prop_assert_eq!(g.invariant_factors.len(), 2);
        }
    }
}

#[test]
fn worked_cokernels() {
    let m = IntMatrix::from_rows(&[vec![2i64, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]);
    assert_eq!(cokernel(&m).to_string(), "Z/2 + Z/6 + Z/12");
    let m = IntMatrix::from_rows(&[vec![4i64]]);
    assert_eq!(cokernel(&m).to_string(), "Z/4");
    assert_eq!(PresentedSubquotient::free_ambient(3).group().to_string(), "Z^3");
}
