//! Twisted K-theory through the Atiyah-Hirzebruch spectral sequence with
//! `d₃ = Sq³ − h⌣`, and the flux moves (swap, shift) on the worked
//! families of torus bundles.
//!
//! The cohomology of the total space enters through its associated graded
//! pieces `E∞^{p,q}`; `h⌣` is computed piece by piece from the cochain
//! representatives of the flux, so corrections landing in strictly higher
//! filtration are not seen (the datum records when this can matter).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abelian::{self, induced_map, preimage_lattice, subquotient, AbelianError, FgAbGroup, IntMatrix};
use crate::localsys::{LocalSystemError, Pairing};
use crate::lsss::{self, assemble_filtered, is_consistent_extension, AffineBundle, EntryStatus, Family, SpectralError};
use crate::tdual::{self, FluxDatum, TDualError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KTheoryError {
    #[error("shift is undefined for {0} (j = 0)")]
    ShiftUndefined(TwistPair),
    #[error("dimension {dimension} needs an explicit Sq3 justification")]
    Sq3Unjustified { dimension: usize },
    #[error("graded twists (xi != 0) are not supported by the spectral sequence engine")]
    GradedTwistUnsupported,
    #[error("invalid datum: {0}")]
    InvalidDatum(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    TDual(#[from] TDualError),
    #[error(transparent)]
    LocalSystem(#[from] LocalSystemError),
    #[error(transparent)]
    Abelian(#[from] AbelianError),
}

/// Chern coordinate `j` and flux coordinate `k` of a bundle in one of the
/// catalog families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TwistPair {
    pub j: i64,
    pub k: i64,
}

impl TwistPair {
    pub fn new(j: i64, k: i64) -> Self {
        TwistPair { j, k }
    }

    pub fn gcd(&self) -> i64 {
        self.j.gcd(&self.k)
    }
}

impl std::fmt::Display for TwistPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.j, self.k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "move")]
pub enum Move {
    /// `(j, k) ↦ (k, j)`
    Swap,
    /// `(j, k) ↦ (j, k + times·j)`
    Shift { times: i64 },
    /// `(j, k) ↦ (−j, −k)`, induced by the fiber involution `x ↦ −x`.
    Negate,
}

pub fn swap(pair: TwistPair) -> TwistPair {
    TwistPair::new(pair.k, pair.j)
}

pub fn shift(pair: TwistPair) -> Result<TwistPair, KTheoryError> {
    shift_by(pair, 1)
}

pub fn shift_by(pair: TwistPair, times: i64) -> Result<TwistPair, KTheoryError> {
    if pair.j == 0 {
        return Err(KTheoryError::ShiftUndefined(pair));
    }
    Ok(TwistPair::new(pair.j, pair.k + times * pair.j))
}

pub fn apply_move(pair: TwistPair, mv: Move) -> Result<TwistPair, KTheoryError> {
    match mv {
        Move::Swap => Ok(swap(pair)),
        Move::Shift { times } => shift_by(pair, times),
        Move::Negate => Ok(TwistPair::new(-pair.j, -pair.k)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalForm {
    pub start: TwistPair,
    pub pair: TwistPair,
    pub moves: Vec<Move>,
}

impl NormalForm {
    /// Replays the recorded moves from the start.
    pub fn replay(&self) -> Result<TwistPair, KTheoryError> {
        self.moves.iter().try_fold(self.start, |p, &m| apply_move(p, m))
    }
}

/// Euclidean reduction to `(gcd(j, k), 0)` by swaps and shifts.
pub fn normal_form(pair: TwistPair) -> NormalForm {
    let mut cur = pair;
    let mut moves = Vec::new();
    loop {
        if cur.k == 0 {
            if cur.j < 0 {
                moves.push(Move::Negate);
                cur = TwistPair::new(-cur.j, 0);
            }
            break;
        }
        if cur.j != 0 {
            let r = cur.k.rem_euclid(cur.j.abs());
            let times = (r - cur.k) / cur.j;
            if times != 0 {
                moves.push(Move::Shift { times });
                cur = TwistPair::new(cur.j, r);
            }
            if r == 0 {
                continue;
            }
        }
        moves.push(Move::Swap);
        cur = swap(cur);
    }
    NormalForm { start: pair, pair: cur, moves }
}

/// One graded piece `E∞^{p,q}` of `H^{p+q}(X)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedPiece {
    pub p: usize,
    pub q: usize,
    pub group: FgAbGroup,
}

/// `H^i(X)` as the direct sum of its graded pieces, listed subgroup
/// first. Coordinates concatenate the pieces' canonical coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohDegree {
    pub degree: usize,
    pub pieces: Vec<GradedPiece>,
    /// Some piece depends on a differential the cohomology engine could not
    /// compute.
    pub undetermined: bool,
}

impl CohDegree {
    pub fn from_groups(degree: usize, groups: Vec<FgAbGroup>) -> Self {
        let pieces = groups.into_iter().map(|g| GradedPiece { p: degree, q: 0, group: g }).collect();
        CohDegree { degree, pieces, undetermined: false }
    }

    /// Orders of the coordinate generators, `0` for free ones.
    pub fn generator_orders(&self) -> Vec<BigInt> {
        let mut out = Vec::new();
        for piece in &self.pieces {
            out.extend(piece.group.invariant_factors.iter().cloned());
            out.extend(std::iter::repeat_n(BigInt::zero(), piece.group.free_rank));
        }
        out
    }

    pub fn num_generators(&self) -> usize {
        self.pieces.iter().map(|p| p.group.num_generators()).sum()
    }

    pub fn group(&self) -> FgAbGroup {
        self.pieces.iter().fold(FgAbGroup::trivial(), |acc, p| acc.direct_sum(&p.group))
    }

    fn relation_matrix(&self) -> IntMatrix {
        diagonal_relations(&self.generator_orders())
    }
}

fn diagonal_relations(orders: &[BigInt]) -> IntMatrix {
    let cols: Vec<Vec<BigInt>> = orders
        .iter()
        .enumerate()
        .filter(|(_, d)| !d.is_zero())
        .map(|(i, d)| {
            let mut c = vec![BigInt::zero(); orders.len()];
            c[i] = d.clone();
            c
        })
        .collect();
    IntMatrix::from_columns(orders.len(), &cols)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "reason")]
pub enum Sq3Justification {
    /// `Sq³_Z` is not considered in dimension at most five.
    LowDimension,
    Supplied(String),
}

/// Input of the spectral sequence: `H*(X)` by degree and `d₃` in
/// coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwistedCohDatum {
    pub dimension: usize,
    pub degrees: Vec<CohDegree>,
    /// `d3[i] : H^i → H^{i+3}` for `i + 3 ≤ dimension`.
    pub d3: Vec<IntMatrix>,
    pub sq3: Option<Sq3Justification>,
    /// `h⌣` was computed on graded pieces while some target piece of
    /// higher filtration is nonzero.
    pub filtration_corrections_ignored: bool,
    /// `d₃` entered by hand rather than derived from a flux.
    pub hand_entered: bool,
}

impl TwistedCohDatum {
    /// Datum with hand-entered `d₃` matrices. Degrees carry one piece each.
    pub fn hand_entered(groups: Vec<FgAbGroup>, d3: Vec<IntMatrix>) -> Result<Self, KTheoryError> {
        let dimension = groups.len().checked_sub(1).ok_or_else(|| KTheoryError::InvalidDatum("no degrees".into()))?;
        let degrees = groups.into_iter().enumerate().map(|(i, g)| CohDegree::from_groups(i, vec![g])).collect();
        let sq3 = (dimension <= 5).then_some(Sq3Justification::LowDimension);
        let datum = TwistedCohDatum {
            dimension,
            degrees,
            d3,
            sq3,
            filtration_corrections_ignored: false,
            hand_entered: true,
        };
        datum.validate()?;
        Ok(datum)
    }

    /// Zero twist.
    pub fn untwisted(groups: Vec<FgAbGroup>) -> Result<Self, KTheoryError> {
        let d = groups.len().saturating_sub(1);
        let d3 = (0..=d)
            .filter(|i| i + 3 <= d)
            .map(|i| IntMatrix::zeros(groups[i + 3].num_generators(), groups[i].num_generators()))
            .collect();
        let mut datum = Self::hand_entered(groups, d3)?;
        datum.hand_entered = false;
        Ok(datum)
    }

    /// Builds the datum from the spectral sequence of `bundle` and the
    /// cochain representatives of `flux`.
    pub fn from_pipeline(bundle: &AffineBundle, flux: &FluxDatum) -> Result<Self, KTheoryError> {
        if !flux.xi.is_zero() {
            return Err(KTheoryError::GradedTwistUnsupported);
        }
        let run = lsss::run(bundle)?;
        let page = &run.einf;
        let (bd, n) = (page.base_dim, page.fiber_rank);
        let dimension = bd + n;
        let rm = &page.row_models;

        let mut degrees = Vec::with_capacity(dimension + 1);
        // (p, q) -> coordinate offset inside its degree
        let mut offsets: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for i in 0..=dimension {
            let mut pieces = Vec::new();
            let mut undetermined = false;
            let mut off = 0;
            for p in (0..=bd.min(i)).rev() {
                let q = i - p;
                let Some(e) = page.entry(p, q) else { continue };
                undetermined |= e.status == EntryStatus::Undetermined;
                if e.group().is_trivial() {
                    continue;
                }
                offsets.insert((p, q), off);
                off += e.group().num_generators();
                pieces.push(GradedPiece { p, q, group: e.group().clone() });
            }
            degrees.push(CohDegree { degree: i, pieces, undetermined });
        }

        let k_rep = &flux.k.representative;
        if k_rep.len() != rm[1].dim(2) {
            return Err(KTheoryError::InvalidDatum("flux k does not live over this bundle".into()));
        }
        let h3_rep = &flux.h3.representative;
        let use_h3 = bd >= 3 && h3_rep.iter().any(|x| !x.is_zero());
        let minus_one = -BigInt::one();

        let mut d3 = Vec::new();
        let mut ignored = false;
        for i in 0..=dimension {
            if i + 3 > dimension {
                break;
            }
            let (src, tgt) = (&degrees[i], &degrees[i + 3]);
            let mut mat = IntMatrix::zeros(tgt.num_generators(), src.num_generators());
            for piece in &src.pieces {
                let (p, q) = (piece.p, piece.q);
                let src_off = offsets[&(p, q)];
                let src_sq = &page.entry(p, q).expect("piece").subquotient;
                let mut blocks = Vec::new();
                if p + 2 <= bd && q < n {
                    let f = rm[1].left_cup_matrix(&rm[q], &rm[q + 1], &Pairing::wedge(n, 1, q), k_rep, 2, p);
                    blocks.push(((p + 2, q + 1), f));
                }
                if use_h3 && p + 3 <= bd {
                    let f = rm[0].left_cup_matrix(&rm[q], &rm[q], &Pairing::wedge(n, 0, q), h3_rep, 3, p);
                    blocks.push(((p + 3, q), f));
                }
                let reach = if use_h3 { p + 3 } else { p + 2 };
                if tgt.pieces.iter().any(|t| t.p > reach) {
                    ignored = true;
                }
                for ((tp, tq), f) in blocks {
                    let Some(&tgt_off) = offsets.get(&(tp, tq)) else { continue };
                    let tgt_sq = &page.entry(tp, tq).expect("piece").subquotient;
                    let hom = induced_map(&f, src_sq, tgt_sq)?;
                    for r in 0..hom.matrix.rows() {
                        for c in 0..hom.matrix.cols() {
                            mat[(tgt_off + r, src_off + c)] = &hom.matrix[(r, c)] * &minus_one;
                        }
                    }
                }
            }
            d3.push(mat);
        }
        let sq3 = (dimension <= 5).then_some(Sq3Justification::LowDimension);
        let datum =
            TwistedCohDatum { dimension, degrees, d3, sq3, filtration_corrections_ignored: ignored, hand_entered: false };
        datum.validate()?;
        Ok(datum)
    }

    /// Datum for the pair `(j, k)` of a catalog family, with `ξ = 0` and
    /// `h₃ = 0`.
    pub fn for_family(family: &Family, pair: TwistPair) -> Result<Self, KTheoryError> {
        let (bundle, flux) = family_flux(family, pair)?;
        Self::from_pipeline(&bundle, &flux)
    }

    pub fn groups(&self) -> Vec<FgAbGroup> {
        self.degrees.iter().map(CohDegree::group).collect()
    }

    /// Checks shapes, well-definedness of each `d₃` and `d₃ ∘ d₃ = 0`.
    pub fn validate(&self) -> Result<(), KTheoryError> {
        if self.degrees.len() != self.dimension + 1 {
            return Err(KTheoryError::InvalidDatum(format!(
                "{} degrees for dimension {}",
                self.degrees.len(),
                self.dimension
            )));
        }
        let expected = (self.dimension + 1).saturating_sub(3);
        if self.d3.len() != expected {
            return Err(KTheoryError::InvalidDatum(format!("expected {expected} d3 matrices, got {}", self.d3.len())));
        }
        for (i, m) in self.d3.iter().enumerate() {
            let (src, tgt) = (&self.degrees[i], &self.degrees[i + 3]);
            if m.rows() != tgt.num_generators() || m.cols() != src.num_generators() {
                return Err(KTheoryError::InvalidDatum(format!("d3 out of degree {i} has the wrong shape")));
            }
            let tgt_rel = tgt.relation_matrix();
            for (c, d) in src.generator_orders().iter().enumerate() {
                if d.is_zero() {
                    continue;
                }
                let img: Vec<BigInt> = m.column(c).iter().map(|x| x * d).collect();
                if abelian::solve_integer(&tgt_rel, &img).is_none() {
                    return Err(KTheoryError::InvalidDatum(format!(
                        "d3 out of degree {i} does not respect the order of generator {c}"
                    )));
                }
            }
            if i + 3 < self.d3.len() {
                let comp = self.d3[i + 3].mul(m);
                let rel = self.degrees[i + 6].relation_matrix();
                for c in 0..comp.cols() {
                    if abelian::solve_integer(&rel, &comp.column(c)).is_none() {
                        return Err(KTheoryError::InvalidDatum(format!("d3 ∘ d3 ≠ 0 out of degree {i}")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn family_flux(family: &Family, pair: TwistPair) -> Result<(AffineBundle, FluxDatum), KTheoryError> {
    let bundle = family.bundle(pair.j)?;
    let xi = vec![false; bundle.base().num_generators()];
    let h3_len = tdual::FluxDatum::zero(&bundle)?.h3.coordinates.len();
    let flux = FluxDatum::from_coordinates(&bundle, xi, &[BigInt::from(pair.k)], &vec![BigInt::zero(); h3_len])?;
    Ok((bundle, flux))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KPiece {
    /// Total degree `i` of `E₄^i`.
    pub degree: usize,
    pub group: FgAbGroup,
    pub undetermined: bool,
}

/// `K⁰` or `K¹`: surviving pieces of one parity, subgroup first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KParity {
    pub pieces: Vec<KPiece>,
    /// Direct sum of the pieces.
    pub assembled: FgAbGroup,
    pub extension_ambiguous: bool,
    pub undetermined: bool,
}

impl KParity {
    pub fn is_settled(&self) -> bool {
        !self.extension_ambiguous && !self.undetermined
    }

    pub fn piece_groups(&self) -> Vec<FgAbGroup> {
        self.pieces.iter().map(|p| p.group.clone()).collect()
    }
}

/// Rank bookkeeping of one `d₃`: `rank ker + rank im = rank H^i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct D3Ranks {
    pub degree: usize,
    pub domain_rank: usize,
    pub kernel_rank: usize,
    pub image_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KResult {
    /// `E₄^i` for every degree.
    pub e4: Vec<FgAbGroup>,
    pub k0: KParity,
    pub k1: KParity,
    pub d3_ranks: Vec<D3Ranks>,
    /// `(from, to)` degrees of higher differentials `d_r`, `r ≥ 5`, that may
    /// be nonzero.
    pub possible_higher_differentials: Vec<(usize, usize)>,
    pub filtration_corrections_ignored: bool,
    pub hand_entered: bool,
}

impl KResult {
    pub fn parity(&self, i: usize) -> &KParity {
        if i % 2 == 0 {
            &self.k0
        } else {
            &self.k1
        }
    }
}

/// Runs the spectral sequence through `E₄` and flags what lies beyond.
pub fn ahss(datum: &TwistedCohDatum) -> Result<KResult, KTheoryError> {
    datum.validate()?;
    let d = datum.dimension;
    if d >= 6 && datum.sq3.is_none() {
        return Err(KTheoryError::Sq3Unjustified { dimension: d });
    }
    let mut e4 = Vec::with_capacity(d + 1);
    let mut d3_ranks = Vec::new();
    for i in 0..=d {
        let deg = &datum.degrees[i];
        let ng = deg.num_generators();
        let rel = deg.relation_matrix();
        let cycles = if i + 3 <= d {
            let out = &datum.d3[i];
            let tgt_rel = datum.degrees[i + 3].relation_matrix();
            let cycles = preimage_lattice(out, &IntMatrix::identity(ng), &tgt_rel);
            let kernel = subquotient(&cycles, &rel)?;
            let image = subquotient(&tgt_rel.hstack(out), &tgt_rel)?;
            let ranks = D3Ranks {
                degree: i,
                domain_rank: deg.group().free_rank,
                kernel_rank: kernel.group().free_rank,
                image_rank: image.group().free_rank,
            };
            if ranks.kernel_rank + ranks.image_rank != ranks.domain_rank {
                return Err(KTheoryError::Internal(format!("rank bookkeeping fails for d3 out of degree {i}")));
            }
            d3_ranks.push(ranks);
            cycles
        } else {
            IntMatrix::identity(ng)
        };
        let boundaries = if i >= 3 { rel.hstack(&datum.d3[i - 3]) } else { rel };
        e4.push(subquotient(&cycles, &boundaries)?.group().clone());
    }

    let mut undetermined: Vec<bool> = datum.degrees.iter().map(|g| g.undetermined).collect();
    let mut higher = Vec::new();
    for r in (5..=d).step_by(2) {
        for i in 0..=d - r {
            if !e4[i].is_trivial() && !e4[i + r].is_trivial() {
                higher.push((i, i + r));
                undetermined[i] = true;
                undetermined[i + r] = true;
            }
        }
    }

    let parity = |par: usize| -> KParity {
        let pieces: Vec<KPiece> = (0..=d)
            .rev()
            .filter(|i| i % 2 == par && !e4[*i].is_trivial())
            .map(|i| KPiece { degree: i, group: e4[i].clone(), undetermined: undetermined[i] })
            .collect();
        let groups: Vec<FgAbGroup> = pieces.iter().map(|p| p.group.clone()).collect();
        let (assembled, extension_ambiguous) = assemble_filtered(&groups);
        let undetermined = pieces.iter().any(|p| p.undetermined);
        KParity { pieces, assembled, extension_ambiguous, undetermined }
    };
    let (k0, k1) = (parity(0), parity(1));
    Ok(KResult {
        e4,
        k0,
        k1,
        d3_ranks,
        possible_higher_differentials: higher,
        filtration_corrections_ignored: datum.filtration_corrections_ignored,
        hand_entered: datum.hand_entered,
    })
}

/// The moves that are valid at a pair for a family, together with the
/// resulting pairs.
pub fn family_moves(family: &Family, pair: TwistPair) -> Vec<(Move, TwistPair)> {
    let mut out = Vec::new();
    let swap_ok = match family {
        Family::UnipotentTorus { .. } => true,
        // the exchange is only established when both coordinates are odd
        Family::AntipodalMappingTorus => pair.j % 2 != 0 && pair.k % 2 != 0,
    };
    let shift_ok = match family {
        Family::UnipotentTorus { .. } => pair.j != 0,
        Family::AntipodalMappingTorus => pair.j % 2 != 0,
    };
    if swap_ok && pair.j != pair.k {
        out.push((Move::Swap, swap(pair)));
    }
    if shift_ok {
        for times in [1, -1] {
            out.push((Move::Shift { times }, TwistPair::new(pair.j, pair.k + times * pair.j)));
        }
    }
    out
}

/// Connected components of the move graph restricted to `[lo, hi]²`.
pub fn orbits_in_box(family: &Family, lo: i64, hi: i64) -> Vec<Vec<TwistPair>> {
    let inside = |p: &TwistPair| (lo..=hi).contains(&p.j) && (lo..=hi).contains(&p.k);
    let mut seen = BTreeSet::new();
    let mut orbits = Vec::new();
    for j in lo..=hi {
        for k in lo..=hi {
            let start = TwistPair::new(j, k);
            if !seen.insert(start) {
                continue;
            }
            let mut orbit = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(p) = queue.pop_front() {
                for (_, next) in family_moves(family, p) {
                    if inside(&next) && seen.insert(next) {
                        orbit.push(next);
                        queue.push_back(next);
                    }
                }
            }
            orbit.sort();
            orbits.push(orbit);
        }
    }
    orbits
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KCell {
    pub pair: TwistPair,
    pub result: KResult,
}

/// `K*` for every pair in the given ranges.
pub fn ktable(
    family: &Family,
    j_range: std::ops::RangeInclusive<i64>,
    k_range: std::ops::RangeInclusive<i64>,
) -> Result<Vec<KCell>, KTheoryError> {
    let mut out = Vec::new();
    for j in j_range {
        for k in k_range.clone() {
            let pair = TwistPair::new(j, k);
            let result = ahss(&TwistedCohDatum::for_family(family, pair)?)?;
            out.push(KCell { pair, result });
        }
    }
    Ok(out)
}

/// What an orbit pins down in one parity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityResolution {
    pub parity: usize,
    pub free_rank: Option<usize>,
    pub pieces_constant: bool,
    /// The common settled assembly, if some member has one.
    pub settled: Option<FgAbGroup>,
    /// Group every member must be compatible with, when the family
    /// predicts one.
    pub expected: Option<FgAbGroup>,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub members: Vec<TwistPair>,
    pub gcd: i64,
    pub parities: Vec<ParityResolution>,
}

impl OrbitReport {
    pub fn passed(&self) -> bool {
        self.parities.iter().all(|p| p.violations.is_empty())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub family: String,
    pub orbits: Vec<OrbitReport>,
    pub corrupted: Option<TwistPair>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.orbits.iter().all(OrbitReport::passed)
    }

    pub fn violations(&self) -> Vec<String> {
        self.orbits.iter().flat_map(|o| o.parities.iter().flat_map(|p| p.violations.clone())).collect()
    }
}

/// `Z_d`, trivial for `d ∈ {0, 1}`.
pub fn gcd_torsion(d: i64) -> FgAbGroup {
    let d = d.unsigned_abs();
    if d <= 1 {
        FgAbGroup::trivial()
    } else {
        FgAbGroup::cyclic(d)
    }
}

/// Torsion of `K*` predicted from the gcd alone. Only the torus family has
/// such a prediction; for the other family the graded pieces themselves
/// must be constant along orbits.
pub fn predicted_torsion(family: &Family, gcd: i64) -> Option<FgAbGroup> {
    match family {
        Family::UnipotentTorus { .. } => Some(gcd_torsion(gcd)),
        Family::AntipodalMappingTorus => None,
    }
}

/// Checks one orbit in each parity. Members must agree on free rank and
/// on every settled assembly. With a predicted torsion `T`, settled
/// assemblies must equal `Z^r ⊕ T` and the remaining determined members
/// must admit it as an extension of their pieces; without one, the graded
/// pieces must be the same for every member.
pub fn check_orbit(members: &[(TwistPair, KResult)], predicted: Option<FgAbGroup>) -> OrbitReport {
    let gcd = members.first().map_or(0, |(p, _)| p.gcd());
    let mut parities = Vec::new();
    for parity in 0..2 {
        let mut violations = Vec::new();
        let ranks: BTreeSet<usize> = members.iter().map(|(_, r)| r.parity(parity).assembled.free_rank).collect();
        if ranks.len() > 1 {
            violations.push(format!("K{parity}: free ranks {ranks:?} differ along the orbit"));
        }
        let free_rank = ranks.iter().next().copied();
        let piece_lists: BTreeSet<Vec<(usize, String)>> = members
            .iter()
            .map(|(_, r)| r.parity(parity).pieces.iter().map(|p| (p.degree, p.group.to_string())).collect())
            .collect();
        let pieces_constant = piece_lists.len() <= 1;
        let expected = predicted.as_ref().map(|t| FgAbGroup::free(free_rank.unwrap_or(0)).direct_sum(t));
        let mut settled: Option<FgAbGroup> = None;
        for (pair, r) in members {
            if pair.gcd() != gcd {
                violations.push(format!("{pair}: gcd differs from the orbit's {gcd}"));
            }
            let kp = r.parity(parity);
            if kp.is_settled() {
                match &settled {
                    None => settled = Some(kp.assembled.clone()),
                    Some(s) if s != &kp.assembled => violations.push(format!(
                        "K{parity}: {pair} settles to {} but another member settles to {s}",
                        kp.assembled
                    )),
                    _ => {}
                }
            }
            let Some(exp) = &expected else { continue };
            if kp.is_settled() {
                if &kp.assembled != exp {
                    violations.push(format!("K{parity}: {pair} settles to {}, expected {exp}", kp.assembled));
                }
            } else if !kp.undetermined && !is_consistent_extension(exp, &kp.piece_groups()) {
                violations.push(format!(
                    "K{parity}: {exp} is not an extension of the pieces of {pair}: {:?}",
                    kp.piece_groups().iter().map(ToString::to_string).collect::<Vec<_>>()
                ));
            }
        }
        if expected.is_none() && !pieces_constant {
            violations.push(format!("K{parity}: graded pieces vary along the orbit of {}", members[0].0));
        }
        parities.push(ParityResolution { parity, free_rank, pieces_constant, settled, expected, violations });
    }
    OrbitReport { members: members.iter().map(|(p, _)| *p).collect(), gcd, parities }
}

/// Runs `check_orbit` over every orbit in `[lo, hi]²`. With `corrupt`, the
/// datum of that pair is built from the flux `2k` instead of `k`.
pub fn move_invariance_check(
    family: &Family,
    lo: i64,
    hi: i64,
    corrupt: Option<TwistPair>,
) -> Result<InvarianceReport, KTheoryError> {
    let mut cache: BTreeMap<TwistPair, KResult> = BTreeMap::new();
    let mut orbits = Vec::new();
    for orbit in orbits_in_box(family, lo, hi) {
        let mut members = Vec::with_capacity(orbit.len());
        for pair in orbit {
            let result = if let Some(r) = cache.get(&pair) {
                r.clone()
            } else {
                let used = if corrupt == Some(pair) { TwistPair::new(pair.j, 2 * pair.k) } else { pair };
                let r = ahss(&TwistedCohDatum::for_family(family, used)?)?;
                cache.insert(pair, r.clone());
                r
            };
            members.push((pair, result));
        }
        let gcd = members[0].0.gcd();
        orbits.push(check_orbit(&members, predicted_torsion(family, gcd)));
    }
    Ok(InvarianceReport { family: family.id().into(), orbits, corrupted: corrupt })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KResolution {
    /// The pair's own pieces force the group.
    Settled,
    /// Some other member of the pair's move orbit settles it.
    Orbit(TwistPair),
    /// Nothing settles it; the direct sum is reported.
    SplitAssumed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedK {
    pub group: FgAbGroup,
    pub resolution: KResolution,
    /// A higher differential might still change the group.
    pub undetermined: bool,
}

/// `K⁰` and `K¹` of a catalog pair, using the move orbit inside
/// `[0, max(j, k)]²` to settle extension problems the pair cannot settle
/// on its own.
pub fn resolve_k(family: &Family, pair: TwistPair) -> Result<[ResolvedK; 2], KTheoryError> {
    let own = ahss(&TwistedCohDatum::for_family(family, pair)?)?;
    let hi = pair.j.max(pair.k).max(0);
    let orbit = if pair.j >= 0 && pair.k >= 0 {
        orbits_in_box(family, 0, hi).into_iter().find(|o| o.contains(&pair)).unwrap_or_else(|| vec![pair])
    } else {
        vec![pair]
    };
    let mut others = Vec::new();
    for member in orbit {
        if member != pair {
            others.push((member, ahss(&TwistedCohDatum::for_family(family, member)?)?));
        }
    }
    let resolve = |parity: usize| -> ResolvedK {
        let kp = own.parity(parity);
        if kp.is_settled() {
            return ResolvedK { group: kp.assembled.clone(), resolution: KResolution::Settled, undetermined: false };
        }
        for (member, r) in &others {
            let other = r.parity(parity);
            if other.is_settled() && !kp.undetermined && is_consistent_extension(&other.assembled, &kp.piece_groups()) {
                return ResolvedK {
                    group: other.assembled.clone(),
                    resolution: KResolution::Orbit(*member),
                    undetermined: false,
                };
            }
        }
        ResolvedK { group: kp.assembled.clone(), resolution: KResolution::SplitAssumed, undetermined: kp.undetermined }
    };
    Ok([resolve(0), resolve(1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> FgAbGroup {
        s.parse().unwrap()
    }

    #[test]
    fn moves() {
        assert_eq!(swap(TwistPair::new(4, 6)), TwistPair::new(6, 4));
        assert_eq!(swap(swap(TwistPair::new(4, 6))), TwistPair::new(4, 6));
        assert_eq!(shift(TwistPair::new(4, 6)).unwrap(), TwistPair::new(4, 10));
        assert_eq!(shift(TwistPair::new(3, -3)).unwrap(), TwistPair::new(3, 0));
        assert!(matches!(shift(TwistPair::new(0, 5)), Err(KTheoryError::ShiftUndefined(_))));
    }

    #[test]
    fn normal_forms() {
        for (j, k, d) in [(4, 6, 2), (0, 0, 0), (1, 99, 1), (0, 5, 5), (-4, 6, 2), (7, -21, 7), (-3, 0, 3)] {
            let nf = normal_form(TwistPair::new(j, k));
            assert_eq!(nf.pair, TwistPair::new(d, 0), "({j},{k})");
            assert_eq!(nf.replay().unwrap(), nf.pair);
        }
    }

    #[test]
    fn untwisted_torus() {
        let datum = TwistedCohDatum::untwisted(vec![g("Z"), g("Z^2"), g("Z")]).unwrap();
        let r = ahss(&datum).unwrap();
        assert_eq!(r.k0.assembled, g("Z^2"));
        assert_eq!(r.k1.assembled, g("Z^2"));
    }

    #[test]
    fn hand_entered_s3() {
        // S³ with h = 5: K⁰ = 0, K¹ = Z/5
        let d3 = vec![IntMatrix::from_rows(&[vec![5]])];
        let datum = TwistedCohDatum::hand_entered(vec![g("Z"), g("0"), g("0"), g("Z")], d3).unwrap();
        let r = ahss(&datum).unwrap();
        assert!(r.k0.assembled.is_trivial());
        assert_eq!(r.k1.assembled, g("Z/5"));
        assert_eq!(r.d3_ranks[0], D3Ranks { degree: 0, domain_rank: 1, kernel_rank: 0, image_rank: 1 });
    }

    #[test]
    fn malformed_datum_is_rejected() {
        let d3 = vec![IntMatrix::from_rows(&[vec![1]])];
        // Z/2 generator cannot map to an element of infinite order
        let r = TwistedCohDatum::hand_entered(vec![g("Z/2"), g("0"), g("0"), g("Z")], d3);
        assert!(matches!(r, Err(KTheoryError::InvalidDatum(_))));
    }

    #[test]
    fn sq3_guard() {
        let groups = vec![g("Z"); 7];
        let d3 = (0..4).map(|_| IntMatrix::zeros(1, 1)).collect();
        let mut datum = TwistedCohDatum::hand_entered(groups, d3).unwrap();
        assert!(matches!(ahss(&datum), Err(KTheoryError::Sq3Unjustified { dimension: 6 })));
        datum.sq3 = Some(Sq3Justification::Supplied("torsion-free".into()));
        assert!(ahss(&datum).is_ok());
    }

    #[test]
    fn torus_family_zero_pair_is_untwisted() {
        let f = Family::UnipotentTorus { m: 2, n: 3 };
        let r = ahss(&TwistedCohDatum::for_family(&f, TwistPair::new(0, 0)).unwrap()).unwrap();
        assert_eq!(r.k0.assembled, g("Z^6"));
        assert_eq!(r.k1.assembled, g("Z^6"));
    }

    #[test]
    fn torus_family_flux_only() {
        let f = Family::UnipotentTorus { m: 2, n: 3 };
        let r = ahss(&TwistedCohDatum::for_family(&f, TwistPair::new(0, 5)).unwrap()).unwrap();
        assert_eq!(r.k1.assembled, g("Z^4 + Z/5"));
    }

    #[test]
    fn orbit_of_four_six() {
        let f = Family::UnipotentTorus { m: 2, n: 3 };
        let orbits = orbits_in_box(&f, 0, 12);
        let orbit = orbits.iter().find(|o| o.contains(&TwistPair::new(4, 6))).unwrap();
        assert!(orbit.contains(&TwistPair::new(6, 4)));
        assert!(orbit.contains(&TwistPair::new(2, 0)));
        assert!(orbit.iter().all(|p| p.gcd() == 2));
        assert!(orbits.iter().any(|o| o == &vec![TwistPair::new(0, 0)]));
    }

    #[test]
    fn orbit_settles_k0() {
        let f = Family::UnipotentTorus { m: 2, n: 3 };
        let [k0, k1] = resolve_k(&f, TwistPair::new(4, 6)).unwrap();
        assert_eq!(k0.group, g("Z^4 + Z/2"));
        assert!(matches!(k0.resolution, KResolution::Orbit(_)));
        assert_eq!(k1.group, g("Z^4 + Z/2"));
        assert_eq!(k1.resolution, KResolution::Settled);
    }
}
