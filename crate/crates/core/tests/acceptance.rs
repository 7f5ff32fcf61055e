//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criterion 2 compares against a printed table that the pipeline does not
//! reproduce; it is expected to print FAIL. The binary exits nonzero when
//! the set of failing criteria differs from `EXPECTED_FAILURES`, in either
//! direction.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdual_core::abelian::FgAbGroup;
use tdual_core::hori::{
    self, basis, dual_hori_transform, hori_transform, mukai_pairing, random_model, random_multivector,
    GeneratorSet, Multivector, SelfTestConfig, Side,
};
use tdual_core::ktheory::{self, normal_form, TwistPair};
use tdual_core::localsys::{antipodal_system, cohomology, BaseSpace, LocalSystem};
use tdual_core::lsss::{self, AffineBundle, ExtensionPolicy, Family};
use tdual_core::reference::{self, CellStatus, ReferenceTables};
use tdual_core::tdual::{self, FluxDatum};

const EXPECTED_FAILURES: &[u32] = &[2];

// time limits, seconds
const LIMIT_1: f64 = 1.0;
const LIMIT_2_PER_J: f64 = 5.0;
const LIMIT_3: f64 = 10.0;
const LIMIT_4: f64 = 1.0;
const LIMIT_5: f64 = 60.0;
const LIMIT_6: f64 = 120.0;
const LIMIT_7: f64 = 120.0;

// exact arithmetic throughout: every comparison below is equality, so the
// tolerance is zero
const TOLERANCE: i64 = 0;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn strs(gs: &[FgAbGroup]) -> Vec<String> {
    gs.iter().map(ToString::to_string).collect()
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let twisted = cohomology(&antipodal_system()).unwrap().groups();
    let trivial = cohomology(&LocalSystem::trivial(BaseSpace::antipodal_s2_mapping_torus(), 1)).unwrap().groups();
    let t = start.elapsed();
    let ok = strs(&trivial) == ["Z", "Z", "0", "Z/2"] && strs(&twisted) == ["0", "Z/4", "Z", "Z"];
    outcome(
        ok && within(t, LIMIT_1),
        format!("H*(M;Z) = {:?}, H*(M;Λ) = {:?}, {:.3}s < {LIMIT_1}s", strs(&trivial), strs(&twisted), t.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let family = Family::AntipodalMappingTorus;
    let mut ok = true;
    let mut details = Vec::new();
    for j in [1i64, 3, 5] {
        let start = Instant::now();
        let run = lsss::run(&family.bundle(j).unwrap()).unwrap();
        let total = lsss::total_cohomology(&run.einf, ExtensionPolicy::PdAssisted).unwrap();
        let t = start.elapsed();
        let zj = if j == 1 { "0".to_string() } else { format!("Z/{j}") };
        let printed = vec!["Z".to_string(), "Z".into(), "0".into(), zj.clone(), zj, "Z/2".into()];
        let derived = strs(&total.groups());
        let same = derived == printed;
        ok &= same && within(t, LIMIT_2_PER_J);
        details.push(format!("j={j}: derived {derived:?} vs printed {printed:?} ({:.2}s)", t.as_secs_f64()));
    }
    outcome(ok, details.join("; "))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let family = Family::UnipotentTorus { m: 2, n: 3 };
    let mut bad = Vec::new();
    for j in 0..=12i64 {
        let bundle = family.bundle(j).unwrap();
        let h3_len = FluxDatum::zero(&bundle).unwrap().h3.coordinates.len();
        for k in 0..=12i64 {
            let flux = FluxDatum::from_coordinates(
                &bundle,
                vec![false, false],
                &[BigInt::from(k)],
                &vec![BigInt::zero(); h3_len],
            )
            .unwrap();
            let pair = tdual::dualize(&bundle, &flux, true).unwrap();
            let swapped = pair.dual_bundle.chern.coordinates == [BigInt::from(k)]
                && pair.dual_flux.k.coordinates == [BigInt::from(j)]
                && pair.dual_bundle.lambda == bundle.lambda.dual();
            let inv = tdual::involution_check(&bundle, &flux).unwrap();
            if !(swapped && inv && pair.report.all_pass()) {
                bad.push(format!("({j},{k})"));
            }
        }
    }
    let t = start.elapsed();
    outcome(
        bad.is_empty() && within(t, LIMIT_3),
        format!("169 pairs, {} failures {:?}, {:.2}s < {LIMIT_3}s", bad.len(), bad, t.as_secs_f64()),
    )
}

fn euclid(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut bad = 0usize;
    let mut cases = 0usize;
    for j in -200..=200i64 {
        for k in -200..=200i64 {
            let nf = normal_form(TwistPair::new(j, k));
            cases += 1;
            if nf.pair != TwistPair::new(euclid(j, k), 0) {
                bad += 1;
            }
        }
    }
    let t = start.elapsed();
    // replaying the recorded moves is checked on a sparser grid to keep the
    // timing about the reduction itself
    let mut replay_bad = 0usize;
    for j in (-200..=200i64).step_by(7) {
        for k in (-200..=200i64).step_by(5) {
            let nf = normal_form(TwistPair::new(j, k));
            if nf.replay().ok() != Some(nf.pair) {
                replay_bad += 1;
            }
        }
    }
    outcome(
        bad == 0 && replay_bad == 0 && within(t, LIMIT_4),
        format!("{cases} pairs, {bad} wrong, {replay_bad} replay failures, {:.3}s < {LIMIT_4}s", t.as_secs_f64()),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let family = Family::UnipotentTorus { m: 2, n: 3 };
    let report = ktheory::move_invariance_check(&family, 0, 12, None).unwrap();
    let t = start.elapsed();
    // every orbit: each parity's settled group has torsion Z/gcd
    let mut torsion_bad = 0usize;
    let mut settled = 0usize;
    for orbit in &report.orbits {
        for p in &orbit.parities {
            if let Some(s) = &p.settled {
                settled += 1;
                let expected = if orbit.gcd.abs() <= 1 { FgAbGroup::trivial() } else { FgAbGroup::cyclic(orbit.gcd.unsigned_abs()) };
                if s.torsion() != expected {
                    torsion_bad += 1;
                }
            } else {
                torsion_bad += 1;
            }
        }
    }
    // negative control: a corrupted datum must be caught
    let corrupted = ktheory::move_invariance_check(&family, 0, 6, Some(TwistPair::new(4, 6))).unwrap();
    let ok = report.passed() && torsion_bad == 0 && !corrupted.passed() && within(t, LIMIT_5);
    outcome(
        ok,
        format!(
            "{} orbits, {} violations, {settled} settled parities, {torsion_bad} with wrong torsion, corruption detected: {}, {:.2}s < {LIMIT_5}s",
            report.orbits.len(),
            report.violations().len(),
            !corrupted.passed(),
            t.as_secs_f64()
        ),
    )
}

/// Monomial as a word of generator bits, in the order written.
fn word_sign(word: &[u32]) -> i64 {
    // parity of the permutation that sorts the word
    let mut inv = 0usize;
    for a in 0..word.len() {
        for b in a + 1..word.len() {
            if word[a] > word[b] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

fn bits(mask: u32) -> Vec<u32> {
    (0..32).filter(|b| mask >> b & 1 == 1).collect()
}

/// Closed form of `T` on `f_A ∧ e_I`, computed by brute force on words:
/// only `J = I^c` contributes, with coefficient `(−1)^{|J|(|J|+1)/2}` from
/// `e^{−B}`, and `∫ α ∧ e¹…eⁿ = α` fixes the sign of the rest.
fn oracle_transform(g: GeneratorSet, mask: u32) -> (u32, i64) {
    let base = mask & g.base_mask();
    let fiber_idx: Vec<usize> = (0..g.n).filter(|i| mask & g.fiber_bit(*i) != 0).collect();
    let j_idx: Vec<usize> = (0..g.n).filter(|i| !fiber_idx.contains(i)).collect();
    let k = j_idx.len();
    let exp_sign = if (k * (k + 1) / 2) % 2 == 0 { 1 } else { -1 };
    // e^J ∧ ê^J ∧ f_A ∧ e_I, rewritten as (f_A ∧ ê^J) ∧ (e¹ ∧ … ∧ eⁿ)
    let mut word: Vec<u32> = j_idx.iter().map(|&i| g.fiber_bit(i)).collect();
    word.extend(j_idx.iter().map(|&i| g.dual_bit(i)));
    word.extend(bits(base).into_iter().map(|b| 1 << b));
    word.extend(fiber_idx.iter().map(|&i| g.fiber_bit(i)));
    // rank of each generator in the target order: base, dual, fiber
    let rank = |bit: u32| -> u32 {
        if bit & g.base_mask() != 0 {
            bit.trailing_zeros()
        } else if bit & g.dual_mask() != 0 {
            100 + bit.trailing_zeros()
        } else {
            200 + bit.trailing_zeros()
        }
    };
    let ranked: Vec<u32> = word.iter().map(|&b| rank(b)).collect();
    let dual_part: u32 = j_idx.iter().map(|&i| g.dual_bit(i)).fold(0, |a, b| a | b);
    (base | dual_part, exp_sign * word_sign(&ranked))
}

fn one() -> BigRational {
    BigRational::one()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut closed_cases = 0usize;
    let mut closed_bad = 0usize;
    let mut bij_bad = 0usize;
    let mut parity_bad = 0usize;
    for n in 0..=4usize {
        for m in 0..=3usize {
            let g = GeneratorSet::new(m, n);
            let mut images = BTreeSet::new();
            for mono in basis(g, Side::Primal.top(g)) {
                let (mask, _) = mono.terms().next().map(|(mk, c)| (mk, c.clone())).unwrap();
                let lib = hori_transform(&mono).unwrap();
                let (omask, sign) = oracle_transform(g, mask);
                let expected = Multivector::monomial(g, omask, BigRational::from_integer(BigInt::from(sign)));
                closed_cases += 1;
                if lib != expected {
                    closed_bad += 1;
                }
                if lib.len() != 1 || !images.insert(lib.terms().next().unwrap().0) {
                    bij_bad += 1;
                }
                let (din, dout) = (mask.count_ones() as usize, omask.count_ones() as usize);
                if (din + n) % 2 != dout % 2 {
                    parity_bad += 1;
                }
            }
            // a bijection of monomials up to sign onto the dual basis
            if images.len() != 1 << (m + n) {
                bij_bad += 1;
            }
        }
    }

    // chain map over random admissible flat models
    let mut chain_models = 0usize;
    let mut chain_bad = 0usize;
    for n in 1..=3usize {
        for m in 2..=3usize {
            let g = GeneratorSet::new(m, n);
            for _ in 0..40 {
                let model = random_model(&mut rng, g);
                chain_models += 1;
                let omega = random_multivector(&mut rng, g, Side::Primal.top(g), 0.5);
                let lhs = hori_transform(&model.twisted_differential(&omega, Side::Primal).unwrap()).unwrap();
                let rhs = model.twisted_differential(&hori_transform(&omega).unwrap(), Side::Dual).unwrap();
                if lhs != rhs {
                    chain_bad += 1;
                }
            }
        }
    }

    // Mukai sign
    let mut mukai_cases = 0usize;
    let mut mukai_bad = 0usize;
    for n in 0..=3usize {
        for m in 0..=3usize {
            let g = GeneratorSet::new(m, n);
            let expected = if (n * m) % 2 == 0 { one() } else { -one() };
            for _ in 0..1000 {
                let a = random_multivector(&mut rng, g, Side::Primal.top(g), 0.4);
                let b = random_multivector(&mut rng, g, Side::Primal.top(g), 0.4);
                let lhs = mukai_pairing(&hori_transform(&a).unwrap(), &hori_transform(&b).unwrap(), Side::Dual).unwrap();
                let rhs = mukai_pairing(&a, &b, Side::Primal).unwrap();
                mukai_cases += 1;
                if lhs != &expected * &rhs {
                    mukai_bad += 1;
                }
            }
        }
    }

    // the inverse transform undoes T up to the global sign
    let mut inverse_bad = 0usize;
    for n in 0..=4usize {
        let g = GeneratorSet::new(1, n);
        let eps = if (n * n.saturating_sub(1) / 2) % 2 == 0 { one() } else { -one() };
        for mono in basis(g, Side::Primal.top(g)) {
            if dual_hori_transform(&hori_transform(&mono).unwrap()).unwrap() != mono.scale(&eps) {
                inverse_bad += 1;
            }
        }
    }

    let lib = hori::self_test(&SelfTestConfig { seed: SEED, ..Default::default() }).unwrap();
    let t = start.elapsed();
    let ok = closed_bad == 0
        && bij_bad == 0
        && parity_bad == 0
        && chain_models >= 200
        && chain_bad == 0
        && mukai_cases >= 16_000
        && mukai_bad == 0
        && inverse_bad == 0
        && lib.passed()
        && within(t, LIMIT_6);
    outcome(
        ok,
        format!(
            "closed form {closed_cases} monomials/{closed_bad} bad, bijectivity {bij_bad} bad, parity {parity_bad} bad, \
             chain map {chain_models} models/{chain_bad} bad, Mukai {mukai_cases} pairs/{mukai_bad} bad, \
             inverse {inverse_bad} bad, library self-test {}, {:.1}s < {LIMIT_6}s",
            if lib.passed() { "pass" } else { "FAIL" },
            t.as_secs_f64()
        ),
    )
}

fn det2(m: &[[i64; 2]; 2]) -> i64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn mul2(a: &[[i64; 2]; 2], b: &[[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let mut c = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// All of GL(2, Z) with entries bounded by 3.
fn small_gl2() -> Vec<[[i64; 2]; 2]> {
    let r = -3..=3i64;
    let mut out = Vec::new();
    for a in r.clone() {
        for b in r.clone() {
            for c in r.clone() {
                for d in r.clone() {
                    let m = [[a, b], [c, d]];
                    if det2(&m).abs() == 1 {
                        out.push(m);
                    }
                }
            }
        }
    }
    out
}

struct RandomSample {
    bundle: AffineBundle,
    flux: FluxDatum,
}

fn random_samples(count: usize) -> Vec<RandomSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let gl = small_gl2();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = gl[rng.gen_range(0..gl.len())];
        let commuting: Vec<_> = gl.iter().filter(|b| mul2(&a, b) == mul2(b, &a)).collect();
        let b = *commuting[rng.gen_range(0..commuting.len())];
        let rows = |m: [[i64; 2]; 2]| vec![m[0].to_vec(), m[1].to_vec()];
        let lambda = LocalSystem::from_rows(BaseSpace::torus(2), &[rows(a), rows(b)]).unwrap();
        let h2 = cohomology(&lambda).unwrap().group(2).num_generators();
        let c: Vec<BigInt> = (0..h2).map(|_| BigInt::from(rng.gen_range(-6..=6))).collect();
        let bundle = AffineBundle::from_chern_coordinates(lambda, &c).unwrap();
        let k2 = cohomology(&bundle.lambda.dual()).unwrap().group(2).num_generators();
        let k: Vec<BigInt> = (0..k2).map(|_| BigInt::from(rng.gen_range(-6..=6))).collect();
        let xi = vec![rng.gen_bool(0.5), rng.gen_bool(0.5)];
        let flux = FluxDatum::from_coordinates(&bundle, xi, &k, &[]).unwrap();
        out.push(RandomSample { bundle, flux });
    }
    out
}

fn criterion_7(samples: &[RandomSample]) -> Outcome {
    let start = Instant::now();
    let mut euler_bad = 0usize;
    let mut betti_bad = 0usize;
    let mut orientable = 0usize;
    let mut twisted = 0usize;
    for s in samples {
        let run = lsss::run(&s.bundle).unwrap();
        let total = lsss::total_cohomology(&run.einf, ExtensionPolicy::PdAssisted).unwrap();
        let b = total.betti_numbers();
        let chi: i64 = b.iter().enumerate().map(|(i, &x)| if i % 2 == 0 { x as i64 } else { -(x as i64) }).sum();
        if chi != 0 {
            euler_bad += 1;
        }
        if !s.bundle.lambda.is_trivial() {
            twisted += 1;
        }
        if total.orientable {
            orientable += 1;
            let d = b.len() - 1;
            if (0..=d).any(|i| b[i] != b[d - i]) {
                betti_bad += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        euler_bad == 0 && betti_bad == 0 && orientable > 0 && within(t, LIMIT_7),
        format!(
            "{} bundles ({twisted} with nontrivial monodromy), chi violations {euler_bad}, \
             Betti symmetry violations {betti_bad} over {orientable} orientable total spaces, {:.1}s < {LIMIT_7}s",
            samples.len(),
            t.as_secs_f64()
        ),
    )
}

fn criterion_8(samples: &[RandomSample]) -> Outcome {
    let mut dualizable = 0usize;
    let mut bad = 0usize;
    let mut w3_skipped = 0usize;
    for s in samples {
        if !tdual::is_dualizable(&s.bundle, &s.flux).unwrap().is_dualizable() {
            continue;
        }
        dualizable += 1;
        let pair = tdual::dualize(&s.bundle, &s.flux, false).unwrap();
        let r = &pair.report;
        if !(r.flux_matches_dual_chern && r.dual_flux_matches_chern && r.xi_transport && r.chern_product_vanishes) {
            bad += 1;
        }
        w3_skipped += usize::from(r.w3_skipped);
    }
    outcome(
        dualizable > 0 && bad == 0,
        format!("{dualizable} dualizable configurations, {bad} relation failures ({w3_skipped} with the W3 term not evaluated)"),
    )
}

fn criterion_9() -> Outcome {
    let tables = ReferenceTables::builtin().unwrap();
    let audit = reference::audit(&tables, &reference::default_samples()).unwrap();
    let documented: BTreeMap<&str, usize> = audit
        .rows
        .iter()
        .filter(|r| r.status == CellStatus::Documented)
        .fold(BTreeMap::new(), |mut acc, r| {
            *acc.entry(r.id.as_str()).or_default() += 1;
            acc
        });
    let required = ["unipotent-base-twisted", "unipotent-total-j0", "unipotent-total-jnonzero", "antipodal-k0-odd", "antipodal-k1-odd"];
    let missing: Vec<&str> = required.iter().copied().filter(|id| !documented.contains_key(id)).collect();
    let justified = audit
        .rows
        .iter()
        .filter(|r| r.status == CellStatus::Documented)
        .all(|r| r.justification.as_deref().is_some_and(|j| !j.trim().is_empty()));

    // controls: an empty ledger and a new unexplained cell must both fail
    let mut empty = tables.clone();
    for e in &mut empty.entries {
        e.deviation = None;
    }
    let empty_fails = !reference::audit(&empty, &reference::default_samples()).unwrap().passed();
    let mut tampered = tables.clone();
    let e = tampered.entries.iter_mut().find(|e| e.id == "antipodal-base-untwisted").unwrap();
    e.printed[3] = "Z/3".into();
    let tampered_fails = !reference::audit(&tampered, &reference::default_samples()).unwrap().passed();

    outcome(
        audit.passed() && missing.is_empty() && justified && empty_fails && tampered_fails,
        format!(
            "{} cells, {} documented deviations, {} unexplained, {} stale, missing flags {missing:?}, \
             empty ledger rejected: {empty_fails}, new deviation rejected: {tampered_fails}",
            audit.rows.len(),
            audit.count(CellStatus::Documented),
            audit.count(CellStatus::Unexplained),
            audit.count(CellStatus::Stale)
        ),
    )
}

fn main() {
    assert_eq!(TOLERANCE, 0);
    let samples = random_samples(500);
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "antipodal base tables", Box::new(criterion_1)),
        (2, "antipodal total-space table", Box::new(criterion_2)),
        (3, "swap law on [0,12]^2", Box::new(criterion_3)),
        (4, "Euclidean reduction, |j|,|k| <= 200", Box::new(criterion_4)),
        (5, "move invariance of twisted K-theory", Box::new(criterion_5)),
        (6, "Hori suite", Box::new(criterion_6)),
        (7, "Euler characteristic and Betti symmetry", Box::new(|| criterion_7(&samples))),
        (8, "exchange relations", Box::new(|| criterion_8(&samples))),
        (9, "deviation ledger audit", Box::new(criterion_9)),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in &criteria {
        let o = run();
        println!("{} [{id}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*id);
        }
    }
    if failed != EXPECTED_FAILURES {
        println!("failing criteria {failed:?} differ from the expected {EXPECTED_FAILURES:?}");
        std::process::exit(1);
    }
    println!("failing criteria match the expected set {EXPECTED_FAILURES:?}");
}
