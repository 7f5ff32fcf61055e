//! Exterior algebra over base generators `f¹..f^m`, fiber generators
//! `e¹..eⁿ` and dual fiber generators `ê¹..êⁿ`, with exact rational
//! coefficients, and the Hori transform `Tω = ∫_e e^{−B} ∧ ω` on a flat
//! constant-coefficient model.
//!
//! Monomials are bitmasks in the generator order `f, e, ê`; a monomial is
//! the wedge of its generators in increasing bit order.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HoriError {
    #[error("generator sets differ: {0:?} vs {1:?}")]
    GeneratorMismatch(GeneratorSet, GeneratorSet),
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("model inconsistent: {0}")]
    ModelInconsistent(String),
    #[error("index {index} out of range for {kind} generators")]
    IndexOutOfRange { kind: &'static str, index: usize },
}

/// `m` base, `n` fiber and `n` dual fiber generators, all odd.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorSet {
    pub m: usize,
    pub n: usize,
}

impl GeneratorSet {
    pub const MAX_GENERATORS: usize = 24;

    pub fn new(m: usize, n: usize) -> Self {
        assert!(m + 2 * n <= Self::MAX_GENERATORS, "too many generators");
        GeneratorSet { m, n }
    }

    pub fn count(&self) -> usize {
        self.m + 2 * self.n
    }

    pub fn base_bit(&self, a: usize) -> u32 {
        assert!(a < self.m, "base index out of range");
        1 << a
    }

    pub fn fiber_bit(&self, i: usize) -> u32 {
        assert!(i < self.n, "fiber index out of range");
        1 << (self.m + i)
    }

    pub fn dual_bit(&self, i: usize) -> u32 {
        assert!(i < self.n, "dual fiber index out of range");
        1 << (self.m + self.n + i)
    }

    pub fn base_mask(&self) -> u32 {
        (1 << self.m) - 1
    }

    pub fn fiber_mask(&self) -> u32 {
        ((1 << self.n) - 1) << self.m
    }

    pub fn dual_mask(&self) -> u32 {
        ((1 << self.n) - 1) << (self.m + self.n)
    }

    fn name(&self, bit: usize) -> String {
        if bit < self.m {
            format!("f{}", bit + 1)
        } else if bit < self.m + self.n {
            format!("e{}", bit - self.m + 1)
        } else {
            format!("ê{}", bit - self.m - self.n + 1)
        }
    }
}

/// Sign of `x_a ∧ x_b` relative to the sorted monomial `a | b`, or `None`
/// when they share a generator.
pub fn wedge_sign(a: u32, b: u32) -> Option<i32> {
    if a & b != 0 {
        return None;
    }
    let mut inv = 0u32;
    let mut rest = b;
    while rest != 0 {
        let i = rest.trailing_zeros();
        inv += (a >> i).count_ones();
        rest &= rest - 1;
    }
    Some(if inv % 2 == 0 { 1 } else { -1 })
}

fn degree(mask: u32) -> usize {
    mask.count_ones() as usize
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Element of the exterior algebra with rational coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct Multivector {
    gens: GeneratorSet,
    terms: BTreeMap<u32, BigRational>,
}

impl fmt::Debug for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&mask, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let names: Vec<String> = (0..self.gens.count()).filter(|b| mask >> b & 1 == 1).map(|b| self.gens.name(b)).collect();
            if names.is_empty() {
                write!(f, "{c}")?;
            } else if c.is_one() {
                write!(f, "{}", names.join("∧"))?;
            } else {
                write!(f, "({c}){}", names.join("∧"))?;
            }
        }
        Ok(())
    }
}

impl Multivector {
    pub fn zero(gens: GeneratorSet) -> Self {
        Multivector { gens, terms: BTreeMap::new() }
    }

    pub fn one(gens: GeneratorSet) -> Self {
        Self::monomial(gens, 0, rat(1))
    }

    pub fn monomial(gens: GeneratorSet, mask: u32, coeff: BigRational) -> Self {
        let mut mv = Self::zero(gens);
        mv.add_term(mask, coeff);
        mv
    }

    pub fn base(gens: GeneratorSet, a: usize) -> Self {
        Self::monomial(gens, gens.base_bit(a), rat(1))
    }

    pub fn fiber(gens: GeneratorSet, i: usize) -> Self {
        Self::monomial(gens, gens.fiber_bit(i), rat(1))
    }

    pub fn dual(gens: GeneratorSet, i: usize) -> Self {
        Self::monomial(gens, gens.dual_bit(i), rat(1))
    }

    pub fn gens(&self) -> GeneratorSet {
        self.gens
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &BigRational)> {
        self.terms.iter().map(|(&m, c)| (m, c))
    }

    pub fn coefficient(&self, mask: u32) -> BigRational {
        self.terms.get(&mask).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, mask: u32, coeff: BigRational) {
        assert!(mask >> self.gens.count() == 0, "monomial outside the generator set");
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(mask).or_insert_with(BigRational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&mask);
        }
    }

    fn check(&self, other: &Multivector) -> Result<(), HoriError> {
        if self.gens != other.gens {
            return Err(HoriError::GeneratorMismatch(self.gens, other.gens));
        }
        Ok(())
    }

    pub fn add(&self, other: &Multivector) -> Result<Multivector, HoriError> {
        self.check(other)?;
        let mut out = self.clone();
        for (&m, c) in &other.terms {
            out.add_term(m, c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Multivector) -> Result<Multivector, HoriError> {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn scale(&self, s: &BigRational) -> Multivector {
        let mut out = Self::zero(self.gens);
        for (&m, c) in &self.terms {
            out.add_term(m, c * s);
        }
        out
    }

    pub fn wedge(&self, other: &Multivector) -> Result<Multivector, HoriError> {
        self.check(other)?;
        let mut out = Self::zero(self.gens);
        for (&a, x) in &self.terms {
            for (&b, y) in &other.terms {
                if let Some(s) = wedge_sign(a, b) {
                    out.add_term(a | b, x * y * rat(s as i64));
                }
            }
        }
        Ok(out)
    }

    /// Whether every term has degree `k`.
    pub fn is_homogeneous(&self, k: usize) -> bool {
        self.terms.keys().all(|&m| degree(m) == k)
    }

    /// Terms supported on the generators in `mask` only.
    pub fn uses_only(&self, mask: u32) -> bool {
        self.terms.keys().all(|&m| m & !mask == 0)
    }

    fn map_terms(&self, mut f: impl FnMut(u32, &BigRational) -> Option<(u32, BigRational)>) -> Multivector {
        let mut out = Self::zero(self.gens);
        for (&m, c) in &self.terms {
            if let Some((m2, c2)) = f(m, c) {
                out.add_term(m2, c2);
            }
        }
        out
    }
}

/// Interior product with the dual of generator bit `bit`, as a graded
/// derivation: `i(x_{b}) = 1` and `i(x_a ∧ ω) = (−1)^{|x_a|} x_a ∧ i(ω)`.
pub fn contract_bit(bit: u32, mv: &Multivector) -> Multivector {
    mv.map_terms(|m, c| {
        if m & bit == 0 {
            return None;
        }
        let before = (m & (bit - 1)).count_ones();
        let s = if before % 2 == 0 { 1 } else { -1 };
        Some((m & !bit, c * rat(s)))
    })
}

/// `i_{ê_i}` with `i_{ê_i}(ê^j) = δ_i^j` (0-based index).
pub fn contract(i: usize, mv: &Multivector) -> Result<Multivector, HoriError> {
    if i >= mv.gens.n {
        return Err(HoriError::IndexOutOfRange { kind: "dual fiber", index: i });
    }
    Ok(contract_bit(mv.gens.dual_bit(i), mv))
}

/// `B = Σ e^i ∧ ê^i`.
pub fn b_field(gens: GeneratorSet) -> Multivector {
    let mut out = Multivector::zero(gens);
    for i in 0..gens.n {
        out.add_term(gens.fiber_bit(i) | gens.dual_bit(i), rat(1));
    }
    out
}

/// `e^{−B} = Σ_k (−1)^{k(k+1)/2} Σ_{|I|=k} e^I ∧ ê^I`.
pub fn poincare_exponential(gens: GeneratorSet) -> Multivector {
    let mut out = Multivector::zero(gens);
    for subset in 0u32..(1 << gens.n) {
        let k = subset.count_ones() as usize;
        let e_part = subset << gens.m;
        let d_part = subset << (gens.m + gens.n);
        // e^I ∧ ê^I is already in sorted order
        let sign = if (k * (k + 1) / 2) % 2 == 0 { 1 } else { -1 };
        out.add_term(e_part | d_part, rat(sign));
    }
    out
}

/// Fiber integration over the `e` block: `∫ α ∧ e¹∧…∧eⁿ = α`; terms without
/// the full `e` block vanish.
pub fn fiber_integrate(mv: &Multivector) -> Multivector {
    integrate_block(mv, mv.gens.fiber_mask())
}

/// Fiber integration over the `ê` block: `∫ α ∧ ê¹∧…∧êⁿ = α`.
pub fn dual_fiber_integrate(mv: &Multivector) -> Multivector {
    integrate_block(mv, mv.gens.dual_mask())
}

fn integrate_block(mv: &Multivector, block: u32) -> Multivector {
    mv.map_terms(|m, c| {
        if m & block != block {
            return None;
        }
        let rest = m & !block;
        // m = ± rest ∧ block
        let s = wedge_sign(rest, block).expect("disjoint");
        Some((rest, c * rat(s as i64)))
    })
}

/// `Tω = ∫_e e^{−B} ∧ ω` for `ω` free of `ê` generators.
pub fn hori_transform(mv: &Multivector) -> Result<Multivector, HoriError> {
    if !mv.uses_only(!mv.gens.dual_mask()) {
        return Err(HoriError::DomainViolation("input contains dual fiber generators".into()));
    }
    Ok(fiber_integrate(&poincare_exponential(mv.gens).wedge(mv)?))
}

/// The dual transform `T̂η = ∫_ê e^{−B̂} ∧ η`, `B̂ = Σ ê^i ∧ e^i`, for `η`
/// free of `e` generators.
pub fn dual_hori_transform(mv: &Multivector) -> Result<Multivector, HoriError> {
    if !mv.uses_only(!mv.gens.fiber_mask()) {
        return Err(HoriError::DomainViolation("input contains fiber generators".into()));
    }
    let exp = poincare_exponential(mv.gens).scale(&rat(1));
    // B̂ = −B, so e^{−B̂} = e^{B}: flip the sign of odd-k terms of e^{−B}
    let exp_b = exp.map_terms(|m, c| {
        let k = (m & mv.gens.fiber_mask()).count_ones();
        Some((m, if k % 2 == 1 { -c.clone() } else { c.clone() }))
    });
    Ok(dual_fiber_integrate(&exp_b.wedge(mv)?))
}

/// `σ(ω) = (−1)^{k(k−1)/2} ω` on degree `k`.
pub fn sigma(mv: &Multivector) -> Multivector {
    mv.map_terms(|m, c| {
        let k = degree(m);
        Some((m, if (k * (k.saturating_sub(1)) / 2) % 2 == 0 { c.clone() } else { -c.clone() }))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `X`, oriented by `f¹…f^m e¹…eⁿ`.
    Primal,
    /// `X̂`, oriented by `f¹…f^m ê¹…êⁿ`.
    Dual,
}

impl Side {
    pub fn top(&self, gens: GeneratorSet) -> u32 {
        match self {
            Side::Primal => gens.base_mask() | gens.fiber_mask(),
            Side::Dual => gens.base_mask() | gens.dual_mask(),
        }
    }

    /// Generators allowed on this side.
    pub fn domain(&self, gens: GeneratorSet) -> u32 {
        self.top(gens)
    }
}

/// `⟨a, b⟩ = ∫ σ(a) ∧ b`.
pub fn mukai_pairing(a: &Multivector, b: &Multivector, side: Side) -> Result<BigRational, HoriError> {
    let top = side.top(a.gens);
    Ok(sigma(a).wedge(b)?.coefficient(top))
}

/// Constant-coefficient flat model: `d e^i = F^i`, `d ê^i = F̂^i`, base
/// generators closed, with base 3-form `H₃`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatTDualityModel {
    pub gens: GeneratorSet,
    pub f: Vec<Multivector>,
    pub fhat: Vec<Multivector>,
    pub h3: Multivector,
}

impl FlatTDualityModel {
    pub fn new(
        gens: GeneratorSet,
        f: Vec<Multivector>,
        fhat: Vec<Multivector>,
        h3: Multivector,
    ) -> Result<Self, HoriError> {
        if f.len() != gens.n || fhat.len() != gens.n {
            return Err(HoriError::ModelInconsistent(format!("need {} curvature forms on each side", gens.n)));
        }
        let base = gens.base_mask();
        for form in f.iter().chain(&fhat) {
            if form.gens != gens || !form.uses_only(base) || !form.is_homogeneous(2) {
                return Err(HoriError::ModelInconsistent("curvatures must be constant base 2-forms".into()));
            }
        }
        if h3.gens != gens || !h3.uses_only(base) || !h3.is_homogeneous(3) {
            return Err(HoriError::ModelInconsistent("H3 must be a constant base 3-form".into()));
        }
        let model = FlatTDualityModel { gens, f, fhat, h3 };
        let pairing = model.curvature_pairing();
        if !pairing.is_zero() {
            return Err(HoriError::ModelInconsistent(format!("(F ∧, F̂) = {pairing} is not zero")));
        }
        Ok(model)
    }

    /// Zero curvature and zero flux.
    pub fn flat(gens: GeneratorSet) -> Self {
        let z = Multivector::zero(gens);
        FlatTDualityModel { gens, f: vec![z.clone(); gens.n], fhat: vec![z.clone(); gens.n], h3: z }
    }

    /// `Σ F^i ∧ F̂^i`
    pub fn curvature_pairing(&self) -> Multivector {
        let mut out = Multivector::zero(self.gens);
        for (a, b) in self.f.iter().zip(&self.fhat) {
            out = out.add(&a.wedge(b).expect("same generators")).expect("same generators");
        }
        out
    }

    /// `H = H₃ + Σ e^i ∧ F̂^i` on `X`, `Ĥ = H₃ + Σ ê^i ∧ F^i` on `X̂`.
    pub fn flux(&self, side: Side) -> Multivector {
        let mut out = self.h3.clone();
        for i in 0..self.gens.n {
            let (gen, curv) = match side {
                Side::Primal => (Multivector::fiber(self.gens, i), &self.fhat[i]),
                Side::Dual => (Multivector::dual(self.gens, i), &self.f[i]),
            };
            out = out.add(&gen.wedge(curv).expect("same generators")).expect("same generators");
        }
        out
    }

    /// The untwisted derivation `d`.
    pub fn d(&self, mv: &Multivector) -> Multivector {
        let gens = self.gens;
        let mut out = Multivector::zero(gens);
        for (m, c) in mv.terms() {
            let mut bits = m;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let image = if b < gens.m {
                    continue;
                } else if b < gens.m + gens.n {
                    &self.f[b - gens.m]
                } else {
                    &self.fhat[b - gens.m - gens.n]
                };
                if image.is_zero() {
                    continue;
                }
                // x_before ∧ d(x_b) ∧ x_after; d(x_b) is even so it moves to the front freely
                let before = (m & ((1u32 << b) - 1)).count_ones();
                let sign = if before % 2 == 0 { 1 } else { -1 };
                let rest = Multivector::monomial(gens, m & !(1u32 << b), c.clone() * rat(sign));
                out = out.add(&image.wedge(&rest).expect("same generators")).expect("same generators");
            }
        }
        out
    }

    /// `d_H ω = dω + H ∧ ω` (primal) or `d_Ĥ` (dual).
    pub fn twisted_differential(&self, mv: &Multivector, side: Side) -> Result<Multivector, HoriError> {
        if mv.gens != self.gens {
            return Err(HoriError::GeneratorMismatch(mv.gens, self.gens));
        }
        if !mv.uses_only(side.domain(self.gens)) {
            return Err(HoriError::DomainViolation(format!("form uses generators outside the {side:?} side")));
        }
        let out = self.d(mv).add(&self.flux(side).wedge(mv)?)?;
        Ok(out)
    }
}

/// Element `(Y, a, α, η)` of `TM ⊕ V ⊕ V* ⊕ T*M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CourantElement {
    pub y: Vec<BigRational>,
    pub a: Vec<BigRational>,
    pub alpha: Vec<BigRational>,
    pub eta: Vec<BigRational>,
}

impl CourantElement {
    pub fn anchor(&self) -> &[BigRational] {
        &self.y
    }
}

fn dot(x: &[BigRational], y: &[BigRational]) -> BigRational {
    x.iter().zip(y).fold(BigRational::zero(), |acc, (a, b)| acc + a * b)
}

/// `φ(Y, a, α, η) = (Y, α, a, η)`.
pub fn courant_swap(x: &CourantElement) -> CourantElement {
    CourantElement { y: x.y.clone(), a: x.alpha.clone(), alpha: x.a.clone(), eta: x.eta.clone() }
}

/// `⟨η, Y'⟩ + ⟨η', Y⟩ + ⟨α, a'⟩ + ⟨α', a⟩`
pub fn split_pairing(x: &CourantElement, y: &CourantElement) -> BigRational {
    dot(&x.eta, &y.y) + dot(&y.eta, &x.y) + dot(&x.alpha, &y.a) + dot(&y.alpha, &x.a)
}

/// Rank over `Q` by Gaussian elimination; rows are vectors.
pub fn rational_rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else { continue };
        rows.swap(rank, p);
        let pivot = rows[rank][c].clone();
        for r in 0..rows.len() {
            if r != rank && !rows[r][c].is_zero() {
                let factor = &rows[r][c] / &pivot;
                for k in c..cols {
                    let v = &rows[rank][k] * &factor;
                    rows[r][k] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Every monomial supported on `mask`.
pub fn basis(gens: GeneratorSet, mask: u32) -> Vec<Multivector> {
    let mut out = Vec::new();
    let mut sub = mask;
    loop {
        out.push(Multivector::monomial(gens, sub, rat(1)));
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
    out.reverse();
    out
}

/// Sign `s` with `T̂(T(f_A ∧ e_I)) = s · f_A ∧ e_I`, grouped by base degree
/// `|A|` and fiber degree `|I|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoubleTransformSign {
    pub m: usize,
    pub n: usize,
    pub base_degree: usize,
    pub fiber_degree: usize,
    pub sign: i32,
}

/// Measures `T̂ ∘ T` on every primal monomial. With the conventions here it
/// comes out as `(−1)^{n(n−1)/2}` throughout. Fails if some monomial is
/// not sent to `±` itself or if the sign is not constant within a group.
pub fn measure_double_transform(gens: GeneratorSet) -> Result<Vec<DoubleTransformSign>, HoriError> {
    let mut signs: BTreeMap<(usize, usize), i32> = BTreeMap::new();
    for mono in basis(gens, Side::Primal.top(gens)) {
        let (mask, _) = mono.terms().next().expect("monomial");
        let back = dual_hori_transform(&hori_transform(&mono)?)?;
        let s = if back == mono {
            1
        } else if back == mono.scale(&rat(-1)) {
            -1
        } else {
            return Err(HoriError::ModelInconsistent(format!("T̂T({mono}) = {back} is not ±{mono}")));
        };
        let key = (degree(mask & gens.base_mask()), degree(mask & gens.fiber_mask()));
        if let Some(prev) = signs.insert(key, s) {
            if prev != s {
                return Err(HoriError::ModelInconsistent(format!("sign of T̂T not constant for degrees {key:?}")));
            }
        }
    }
    Ok(signs
        .into_iter()
        .map(|((b, f), sign)| DoubleTransformSign { m: gens.m, n: gens.n, base_degree: b, fiber_degree: f, sign })
        .collect())
}

/// Random multivector with small rational coefficients supported on `mask`.
pub fn random_multivector(rng: &mut impl Rng, gens: GeneratorSet, mask: u32, density: f64) -> Multivector {
    let mut out = Multivector::zero(gens);
    for mono in basis(gens, mask) {
        if rng.gen_bool(density) {
            let num = rng.gen_range(-6i64..=6);
            let den = rng.gen_range(1i64..=4);
            let (m, _) = mono.terms().next().expect("monomial");
            out.add_term(m, BigRational::new(BigInt::from(num), BigInt::from(den)));
        }
    }
    out
}

/// Random admissible model with integer curvature entries in `[−2, 2]` and
/// `H₃` either zero or a basis 3-form.
pub fn random_model(rng: &mut impl Rng, gens: GeneratorSet) -> FlatTDualityModel {
    let two_forms: Vec<u32> = (0u32..(1 << gens.m)).filter(|x| x.count_ones() == 2).collect();
    let three_forms: Vec<u32> = (0u32..(1 << gens.m)).filter(|x| x.count_ones() == 3).collect();
    let rand_form = |rng: &mut dyn rand::RngCore| {
        let mut mv = Multivector::zero(gens);
        for &t in &two_forms {
            mv.add_term(t, rat(rng.gen_range(-2i64..=2)));
        }
        mv
    };
    let h3 = if three_forms.is_empty() || rng.gen_bool(0.3) {
        Multivector::zero(gens)
    } else {
        Multivector::monomial(gens, three_forms[rng.gen_range(0..three_forms.len())], rat(1))
    };
    for _ in 0..64 {
        let f: Vec<Multivector> = (0..gens.n).map(|_| rand_form(rng)).collect();
        let fhat: Vec<Multivector> = (0..gens.n).map(|_| rand_form(rng)).collect();
        if let Ok(m) = FlatTDualityModel::new(gens, f.clone(), fhat, h3.clone()) {
            return m;
        }
        // fall back to a one-sided curvature, always admissible
        if let Ok(m) = FlatTDualityModel::new(gens, f, vec![Multivector::zero(gens); gens.n], h3.clone()) {
            if rng.gen_bool(0.1) {
                return m;
            }
        }
    }
    FlatTDualityModel::new(gens, vec![Multivector::zero(gens); gens.n], (0..gens.n).map(|_| rand_form(rng)).collect(), h3)
        .expect("one-sided curvature is admissible")
}

/// Configuration of the seeded self-test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfTestConfig {
    pub seed: u64,
    pub max_n: usize,
    pub max_m: usize,
    pub chain_models: usize,
    pub mukai_pairs: usize,
}

impl Default for SelfTestConfig {
    fn default() -> Self {
        SelfTestConfig { seed: 0, max_n: 4, max_m: 3, chain_models: 200, mukai_pairs: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfTestCheck {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SelfTestCheck {
    fn new(name: &str) -> Self {
        SelfTestCheck { name: name.into(), cases: 0, failures: 0, first_failure: None }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub config: SelfTestConfig,
    pub checks: Vec<SelfTestCheck>,
    pub double_transform_signs: Vec<DoubleTransformSign>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(SelfTestCheck::passed)
    }
}

/// `T(ω ∧ e^I) = (−1)^{n(n−1)/2} ω ∧ i_{ê_{i₁}} ⋯ i_{ê_{i_k}}(ê¹ ∧ … ∧ êⁿ)`.
pub fn hori_closed_form(mv: &Multivector) -> Result<Multivector, HoriError> {
    let gens = mv.gens;
    if !mv.uses_only(!gens.dual_mask()) {
        return Err(HoriError::DomainViolation("input contains dual fiber generators".into()));
    }
    let n = gens.n;
    let eps = if (n * n.saturating_sub(1) / 2) % 2 == 0 { 1 } else { -1 };
    let mut out = Multivector::zero(gens);
    for (m, c) in mv.terms() {
        let omega = m & gens.base_mask();
        let fiber = (m & gens.fiber_mask()) >> gens.m;
        let mut vol = Multivector::monomial(gens, gens.dual_mask(), rat(eps));
        for i in (0..n).rev() {
            if fiber >> i & 1 == 1 {
                vol = contract_bit(gens.dual_bit(i), &vol);
            }
        }
        let term = Multivector::monomial(gens, omega, c.clone()).wedge(&vol)?;
        out = out.add(&term)?;
    }
    Ok(out)
}

/// Runs the property suite behind the transform with a fixed seed.
pub fn self_test(config: &SelfTestConfig) -> Result<SelfTestReport, HoriError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut closed = SelfTestCheck::new("closed form equals integral formula");
    let mut bij = SelfTestCheck::new("transform is bijective");
    let mut parity = SelfTestCheck::new("degree parity shifts by n");
    let mut expo = SelfTestCheck::new("e^-B equals truncated exponential series");
    let mut sig = SelfTestCheck::new("sigma is an involution");
    let mut chain = SelfTestCheck::new("chain map T d_H = d_Ĥ T");
    let mut mukai = SelfTestCheck::new("Mukai pairing sign (-1)^(nm)");
    let mut courant = SelfTestCheck::new("Courant swap preserves anchor and pairing");
    let mut double = Vec::new();

    for n in 0..=config.max_n {
        for m in 0..=config.max_m {
            let gens = GeneratorSet::new(m, n);
            let primal = basis(gens, Side::Primal.top(gens));
            let mut rows = Vec::with_capacity(primal.len());
            let dual_basis: Vec<u32> =
                basis(gens, Side::Dual.top(gens)).iter().map(|b| b.terms().next().expect("monomial").0).collect();
            for mono in &primal {
                let t = hori_transform(mono)?;
                let cf = hori_closed_form(mono)?;
                closed.record(t == cf, || format!("n={n} m={m}: T({mono}) = {t}, closed form {cf}"));
                let (mask, _) = mono.terms().next().expect("monomial");
                let want = (degree(mask) + n) % 2;
                parity.record(t.terms().all(|(tm, _)| degree(tm) % 2 == want), || format!("n={n} m={m}: {mono}"));
                rows.push(dual_basis.iter().map(|&b| t.coefficient(b)).collect());
            }
            bij.record(rational_rank(rows) == primal.len(), || format!("n={n} m={m}"));
            double.extend(measure_double_transform(gens)?);
        }
        let gens = GeneratorSet::new(0, n);
        let minus_b = b_field(gens).scale(&rat(-1));
        let mut series = Multivector::one(gens);
        let mut power = Multivector::one(gens);
        for k in 1..=n {
            power = power.wedge(&minus_b)?.scale(&BigRational::new(BigInt::one(), BigInt::from(k)));
            series = series.add(&power)?;
        }
        expo.record(series == poincare_exponential(gens), || format!("n={n}"));
    }

    for _ in 0..64 {
        let gens = GeneratorSet::new(rng.gen_range(0..=3), rng.gen_range(0..=3));
        let x = random_multivector(&mut rng, gens, (1 << gens.count()) - 1, 0.3);
        sig.record(sigma(&sigma(&x)) == x, || format!("{x}"));
    }

    for idx in 0..config.chain_models {
        let gens = GeneratorSet::new(2 + idx % 3, 1 + (idx / 3) % 3);
        let model = random_model(&mut rng, gens);
        for mono in basis(gens, Side::Primal.top(gens)) {
            let lhs = hori_transform(&model.twisted_differential(&mono, Side::Primal)?)?;
            let rhs = model.twisted_differential(&hori_transform(&mono)?, Side::Dual)?;
            chain.record(lhs == rhs, || format!("model {idx}: {mono}"));
        }
    }

    for n in 0..=3usize.min(config.max_n) {
        for m in 0..=3usize.min(config.max_m) {
            let gens = GeneratorSet::new(m, n);
            let sign = if (n * m) % 2 == 0 { rat(1) } else { rat(-1) };
            let top = Side::Primal.top(gens);
            for _ in 0..config.mukai_pairs {
                let a = random_multivector(&mut rng, gens, top, 0.4);
                let b = random_multivector(&mut rng, gens, top, 0.4);
                let lhs = mukai_pairing(&hori_transform(&a)?, &hori_transform(&b)?, Side::Dual)?;
                let rhs = mukai_pairing(&a, &b, Side::Primal)? * &sign;
                mukai.record(lhs == rhs, || format!("n={n} m={m}: a={a}, b={b}"));
            }
        }
    }

    for _ in 0..200 {
        let mut vec = |len: usize| -> Vec<BigRational> { (0..len).map(|_| rat(rng.gen_range(-9i64..=9))).collect() };
        let (k, n) = (3, 2);
        let x = CourantElement { y: vec(k), a: vec(n), alpha: vec(n), eta: vec(k) };
        let y = CourantElement { y: vec(k), a: vec(n), alpha: vec(n), eta: vec(k) };
        let (px, py) = (courant_swap(&x), courant_swap(&y));
        let ok = courant_swap(&px) == x && px.anchor() == x.anchor() && split_pairing(&px, &py) == split_pairing(&x, &y);
        courant.record(ok, || format!("{x:?}"));
    }

    Ok(SelfTestReport {
        config: config.clone(),
        checks: vec![closed, bij, parity, expo, sig, chain, mukai, courant],
        double_transform_signs: double,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(m: usize, n: usize) -> GeneratorSet {
        GeneratorSet::new(m, n)
    }

    #[test]
    fn wedge_examples() {
        let gs = g(1, 1);
        let e = Multivector::fiber(gs, 0);
        let eh = Multivector::dual(gs, 0);
        assert_eq!(Multivector::one(gs).wedge(&e).unwrap(), e);
        assert!(e.wedge(&e).unwrap().is_zero());
        assert_eq!(e.wedge(&eh).unwrap(), eh.wedge(&e).unwrap().scale(&rat(-1)));
        assert!(matches!(e.wedge(&Multivector::one(g(2, 1))), Err(HoriError::GeneratorMismatch(..))));
    }

    #[test]
    fn contract_examples() {
        let gs = g(0, 2);
        let e1 = Multivector::dual(gs, 0);
        let e2 = Multivector::dual(gs, 1);
        assert_eq!(contract(0, &e1).unwrap(), Multivector::one(gs));
        assert_eq!(contract(1, &e1.wedge(&e2).unwrap()).unwrap(), e1.scale(&rat(-1)));
        assert!(contract(0, &Multivector::one(gs)).unwrap().is_zero());
    }

    #[test]
    fn exponential_examples() {
        assert_eq!(poincare_exponential(g(0, 0)), Multivector::one(g(0, 0)));
        let gs = g(0, 1);
        let b = b_field(gs);
        assert_eq!(poincare_exponential(gs), Multivector::one(gs).sub(&b).unwrap());
        let gs = g(0, 2);
        let top = gs.fiber_mask() | gs.dual_mask();
        assert_eq!(poincare_exponential(gs).coefficient(top), rat(-1));
    }

    #[test]
    fn fiber_integration_examples() {
        let gs = g(1, 2);
        let top = Multivector::monomial(gs, gs.fiber_mask(), rat(1));
        assert_eq!(fiber_integrate(&top), Multivector::one(gs));
        assert!(fiber_integrate(&Multivector::one(gs)).is_zero());
        let gs = g(1, 1);
        let fe = Multivector::base(gs, 0).wedge(&Multivector::fiber(gs, 0)).unwrap();
        assert_eq!(fiber_integrate(&fe), Multivector::base(gs, 0));
    }

    #[test]
    fn transform_examples() {
        let gs = g(0, 1);
        assert_eq!(hori_transform(&Multivector::one(gs)).unwrap(), Multivector::dual(gs, 0));
        assert_eq!(hori_transform(&Multivector::fiber(gs, 0)).unwrap(), Multivector::one(gs));
        let gs = g(0, 2);
        let d12 = Multivector::monomial(gs, gs.dual_mask(), rat(1));
        assert_eq!(hori_transform(&Multivector::one(gs)).unwrap(), d12.scale(&rat(-1)));
        let e12 = Multivector::monomial(gs, gs.fiber_mask(), rat(1));
        assert_eq!(hori_transform(&e12).unwrap(), Multivector::one(gs));
        assert!(matches!(hori_transform(&Multivector::dual(gs, 0)), Err(HoriError::DomainViolation(_))));
    }

    #[test]
    fn sigma_examples() {
        let gs = g(4, 0);
        for (k, sign) in [(0, 1), (1, 1), (2, -1), (3, -1), (4, 1)] {
            let mono = Multivector::monomial(gs, (1 << k) - 1, rat(1));
            assert_eq!(sigma(&mono), mono.scale(&rat(sign)));
        }
    }

    #[test]
    fn mukai_examples() {
        let gs = g(1, 1);
        let top = Multivector::monomial(gs, Side::Primal.top(gs), rat(1));
        assert_eq!(mukai_pairing(&Multivector::one(gs), &top, Side::Primal).unwrap(), rat(1));
        let gs = g(0, 1);
        let e = Multivector::fiber(gs, 0);
        let v = mukai_pairing(&e, &Multivector::one(gs), Side::Primal).unwrap();
        assert_eq!(v, rat(1));
    }

    #[test]
    fn differential_examples() {
        let gs = g(2, 1);
        let model = FlatTDualityModel::flat(gs);
        assert!(model.twisted_differential(&Multivector::fiber(gs, 0), Side::Primal).unwrap().is_zero());
        let f12 = Multivector::monomial(gs, 0b11, rat(1));
        let model = FlatTDualityModel::new(gs, vec![f12.clone()], vec![f12.scale(&rat(2))], Multivector::zero(gs)).unwrap();
        let de = model.twisted_differential(&Multivector::fiber(gs, 0), Side::Primal).unwrap();
        // d e = F, and H ∧ e = 2 e∧f1f2∧e = 0
        assert_eq!(de, f12);
        let h = model.twisted_differential(&Multivector::one(gs), Side::Primal).unwrap();
        assert_eq!(h, model.flux(Side::Primal));
        let dd = model.twisted_differential(&de, Side::Primal).unwrap();
        assert!(dd.is_zero());
    }

    #[test]
    fn inconsistent_model_is_rejected() {
        let gs = g(4, 1);
        let f12 = Multivector::monomial(gs, 0b0011, rat(1));
        let f34 = Multivector::monomial(gs, 0b1100, rat(1));
        let r = FlatTDualityModel::new(gs, vec![f12], vec![f34], Multivector::zero(gs));
        assert!(matches!(r, Err(HoriError::ModelInconsistent(_))));
    }

    #[test]
    fn courant_examples() {
        let x = CourantElement { y: vec![rat(1)], a: vec![rat(2)], alpha: vec![rat(3)], eta: vec![rat(4)] };
        let px = courant_swap(&x);
        assert_eq!(px.a, vec![rat(3)]);
        assert_eq!(courant_swap(&px), x);
        assert_eq!(px.anchor(), x.anchor());
        assert_eq!(split_pairing(&px, &px), split_pairing(&x, &x));
    }

    #[test]
    fn small_self_test_passes() {
        let cfg = SelfTestConfig { seed: 7, max_n: 2, max_m: 2, chain_models: 12, mukai_pairs: 20 };
        let report = self_test(&cfg).unwrap();
        for c in &report.checks {
            assert!(c.passed(), "{}: {:?}", c.name, c.first_failure);
        }
    }
}
