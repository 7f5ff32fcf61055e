//! Leray–Serre spectral sequence of an affine torus bundle `T^n → X → M`.
//!
//! Page entries are kept as subquotients of the cochain groups
//! `C^p(M, ∧^q Λ*)`, so every class on every page has an ambient
//! representative. `d₂` is contraction with the twisted Chern class.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abelian::{self, induced_map, subquotient, AbelianError, FgAbGroup, Homomorphism, IntMatrix, PresentedSubquotient};
use crate::localsys::{
    self, antipodal_system, cohomology, unipotent_torus_system, BaseSpace, CochainModel, CohClass, LocalSystem,
    LocalSystemError, Pairing, Z2Class,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpectralError {
    #[error(transparent)]
    LocalSystem(#[from] LocalSystemError),
    #[error(transparent)]
    Abelian(#[from] AbelianError),
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("page is at stage {0}, expected {1}")]
    WrongStage(Stage, &'static str),
}

/// The two worked families of bundles.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Family {
    /// `T²`-bundles over `T²` with unipotent monodromy
    /// `[[1,m],[0,1]]`, `[[1,n],[0,1]]`.
    UnipotentTorus { m: i64, n: i64 },
    /// `T²`-bundles over the antipodal `S²`-mapping torus with monodromy
    /// `[[-1,-1],[0,-1]]`.
    AntipodalMappingTorus,
}

impl Family {
    pub fn id(&self) -> &'static str {
        match self {
            Family::UnipotentTorus { .. } => "unipotent-torus",
            Family::AntipodalMappingTorus => "antipodal-mapping-torus",
        }
    }

    /// Looks a family up by id with default parameters (`m = 2, n = 3` for
    /// the torus family).
    pub fn from_id(id: &str) -> Option<Family> {
        match id {
            "unipotent-torus" => Some(Family::UnipotentTorus { m: 2, n: 3 }),
            "antipodal-mapping-torus" => Some(Family::AntipodalMappingTorus),
            _ => None,
        }
    }

    pub fn system(&self) -> LocalSystem {
        match self {
            Family::UnipotentTorus { m, n } => unipotent_torus_system(*m, *n),
            Family::AntipodalMappingTorus => antipodal_system(),
        }
    }

    /// The bundle with Chern class `j` times the canonical generator of
    /// `H²(M, Λ) ≅ Z`.
    pub fn bundle(&self, j: i64) -> Result<AffineBundle, SpectralError> {
        AffineBundle::from_chern_coordinates(self.system(), &[BigInt::from(j)])
    }
}

/// Classification data `(Λ, c)` of an affine torus bundle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineBundle {
    pub lambda: LocalSystem,
    pub chern: CohClass,
}

impl AffineBundle {
    pub fn new(lambda: LocalSystem, chern: CohClass) -> Result<Self, SpectralError> {
        lambda.validate()?;
        if chern.degree != 2 {
            return Err(SpectralError::InvalidBundle(format!("Chern class in degree {}", chern.degree)));
        }
        if chern.system != lambda {
            return Err(SpectralError::InvalidBundle("Chern class has coefficients other than Λ".into()));
        }
        Ok(AffineBundle { lambda, chern })
    }

    pub fn from_chern_coordinates(lambda: LocalSystem, coords: &[BigInt]) -> Result<Self, SpectralError> {
        let h = cohomology(&lambda)?;
        let chern = h.class_from_coordinates(2, coords)?;
        Ok(AffineBundle { lambda, chern })
    }

    /// Product bundle `M × T^n`.
    pub fn trivial(base: BaseSpace, n: usize) -> Result<Self, SpectralError> {
        let lambda = LocalSystem::trivial(base, n);
        let zeros = vec![BigInt::zero(); cohomology(&lambda)?.group(2).num_generators()];
        Self::from_chern_coordinates(lambda, &zeros)
    }

    pub fn fiber_rank(&self) -> usize {
        self.lambda.rank
    }

    pub fn base(&self) -> &BaseSpace {
        &self.lambda.base
    }

    pub fn total_dimension(&self) -> usize {
        self.base().dimension() + self.fiber_rank()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    E(usize),
    Infinity,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::E(r) => write!(f, "E{r}"),
            Stage::Infinity => write!(f, "E∞"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryStatus {
    Final,
    /// A higher differential touching this entry could not be computed.
    Undetermined,
}

#[derive(Clone, Debug)]
pub struct PageEntry {
    pub p: usize,
    pub q: usize,
    pub subquotient: PresentedSubquotient,
    pub status: EntryStatus,
}

impl PageEntry {
    pub fn group(&self) -> &FgAbGroup {
        self.subquotient.group()
    }
}

#[derive(Clone, Debug)]
pub struct PageDifferential {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub map: Homomorphism,
}

/// A page `E_r^{p,q}`, `0 ≤ p ≤ dim M`, `0 ≤ q ≤ n`.
#[derive(Clone, Debug)]
pub struct SpectralPage {
    pub stage: Stage,
    pub base_dim: usize,
    pub fiber_rank: usize,
    entries: Vec<Vec<PageEntry>>,
    /// Differentials leaving this page (filled in when the next page is built).
    pub differentials: Vec<PageDifferential>,
    /// Cochain models of `C*(M, ∧^q Λ*)`, indexed by `q`.
    pub row_models: Vec<CochainModel>,
    pub total_orientable: bool,
}

impl SpectralPage {
    pub fn entry(&self, p: usize, q: usize) -> Option<&PageEntry> {
        self.entries.get(p).and_then(|col| col.get(q))
    }

    /// The group at `(p, q)`; zero outside the rectangle.
    pub fn group(&self, p: usize, q: usize) -> FgAbGroup {
        self.entry(p, q).map_or_else(FgAbGroup::trivial, |e| e.group().clone())
    }

    pub fn entries(&self) -> impl Iterator<Item = &PageEntry> {
        self.entries.iter().flatten()
    }

    pub fn is_final(&self) -> bool {
        self.stage == Stage::Infinity && self.entries().all(|e| e.status == EntryStatus::Final)
    }

    /// Row `q` as a list of groups over `p`.
    pub fn row(&self, q: usize) -> Vec<FgAbGroup> {
        (0..=self.base_dim).map(|p| self.group(p, q)).collect()
    }

    pub fn differential(&self, from: (usize, usize)) -> Option<&PageDifferential> {
        self.differentials.iter().find(|d| d.from == from)
    }

    /// Checks `d ∘ d = 0` for every composable pair of recorded
    /// differentials.
    pub fn differentials_square_to_zero(&self) -> Result<bool, AbelianError> {
        for d in &self.differentials {
            if let Some(next) = self.differential(d.to) {
                if !next.map.compose(&d.map)?.is_zero() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// `E₂^{p,q} = H^p(M, ∧^q Λ*)`.
pub fn e2_page(bundle: &AffineBundle) -> Result<SpectralPage, SpectralError> {
    let n = bundle.fiber_rank();
    let dual = bundle.lambda.dual();
    let dim = bundle.base().dimension();
    let mut row_models = Vec::with_capacity(n + 1);
    let mut rows = Vec::with_capacity(n + 1);
    for q in 0..=n {
        let h = cohomology(&dual.exterior_power(q))?;
        rows.push(h.groups);
        row_models.push(h.model);
    }
    let entries = (0..=dim)
        .map(|p| {
            (0..=n)
                .map(|q| PageEntry { p, q, subquotient: rows[q][p].clone(), status: EntryStatus::Final })
                .collect()
        })
        .collect();
    Ok(SpectralPage {
        stage: Stage::E(2),
        base_dim: dim,
        fiber_rank: n,
        entries,
        differentials: Vec::new(),
        row_models,
        total_orientable: orientation_data(bundle).total_orientable,
    })
}

/// Cochain-level `d₂: C^p(∧^q Λ*) → C^{p+2}(∧^{q−1} Λ*)`, `a ↦ (−1)^p c ⌣ a`
/// with `Λ` contracted into `∧^q Λ*`.
pub fn d2_cochain_map(bundle: &AffineBundle, page: &SpectralPage, p: usize, q: usize) -> Result<IntMatrix, SpectralError> {
    let lambda_model = CochainModel::new(&bundle.lambda)?;
    let pairing = Pairing::contraction(bundle.fiber_rank(), q);
    let m = lambda_model.left_cup_matrix(
        &page.row_models[q],
        &page.row_models[q - 1],
        &pairing,
        &bundle.chern.representative,
        2,
        p,
    );
    Ok(if p % 2 == 1 { m.scale(&-BigInt::one()) } else { m })
}

/// Runs `d₂` and returns `E₃`. The differentials of the input page are
/// recorded on the returned copy of `page` (second return value).
pub fn apply_d2(bundle: &AffineBundle, page: &SpectralPage) -> Result<(SpectralPage, SpectralPage), SpectralError> {
    if page.stage != Stage::E(2) {
        return Err(SpectralError::WrongStage(page.stage, "E2"));
    }
    let (dim, n) = (page.base_dim, page.fiber_rank);
    let mut maps: Vec<Vec<Option<IntMatrix>>> = vec![vec![None; n + 1]; dim + 1];
    let mut recorded = page.clone();
    for p in 0..=dim {
        for q in 1..=n {
            if p + 2 > dim {
                continue;
            }
            let f = d2_cochain_map(bundle, page, p, q)?;
            let src = &page.entries[p][q].subquotient;
            let tgt = &page.entries[p + 2][q - 1].subquotient;
            let map = induced_map(&f, src, tgt)?;
            recorded.differentials.push(PageDifferential { from: (p, q), to: (p + 2, q - 1), map });
            maps[p][q] = Some(f);
        }
    }
    let mut entries = Vec::with_capacity(dim + 1);
    for p in 0..=dim {
        let mut col = Vec::with_capacity(n + 1);
        for q in 0..=n {
            let e = &page.entries[p][q].subquotient;
            let cycles = match &maps[p][q] {
                Some(f) => {
                    let tgt = &page.entries[p + 2][q - 1].subquotient;
                    abelian::preimage_lattice(f, e.cycle_basis(), tgt.boundary_basis())
                }
                None => e.cycle_basis().clone(),
            };
            let mut boundaries = e.boundary_basis().clone();
            if p >= 2 && q < n {
                if let Some(f) = &maps[p - 2][q + 1] {
                    let src = &page.entries[p - 2][q + 1].subquotient;
                    boundaries = boundaries.hstack(&f.mul(src.cycle_basis()));
                }
            }
            col.push(PageEntry { p, q, subquotient: subquotient(&cycles, &boundaries)?, status: EntryStatus::Final });
        }
        entries.push(col);
    }
    let e3 = SpectralPage {
        stage: Stage::E(3),
        base_dim: dim,
        fiber_rank: n,
        entries,
        differentials: Vec::new(),
        row_models: page.row_models.clone(),
        total_orientable: page.total_orientable,
    };
    Ok((e3, recorded))
}

/// Declares `E₃` final where no higher differential can act, and flags the
/// endpoints of every possibly nonzero `d_r`, `r ≥ 3`, otherwise.
pub fn e_infinity(page: &SpectralPage) -> Result<SpectralPage, SpectralError> {
    if page.stage != Stage::E(3) {
        return Err(SpectralError::WrongStage(page.stage, "E3"));
    }
    let mut out = page.clone();
    out.stage = Stage::Infinity;
    let (dim, n) = (page.base_dim, page.fiber_rank);
    for r in 3..=dim {
        for p in 0..=dim - r {
            for q in r - 1..=n {
                let (tp, tq) = (p + r, q + 1 - r);
                if !page.group(p, q).is_trivial() && !page.group(tp, tq).is_trivial() {
                    out.entries[p][q].status = EntryStatus::Undetermined;
                    out.entries[tp][tq].status = EntryStatus::Undetermined;
                }
            }
        }
    }
    Ok(out)
}

/// `e2_page → apply_d2 → e_infinity`.
pub fn run(bundle: &AffineBundle) -> Result<SpectralRun, SpectralError> {
    let e2 = e2_page(bundle)?;
    let (e3, e2) = apply_d2(bundle, &e2)?;
    let einf = e_infinity(&e3)?;
    Ok(SpectralRun { e2, e3, einf })
}

#[derive(Clone, Debug)]
pub struct SpectralRun {
    /// `E₂` with its `d₂` maps recorded.
    pub e2: SpectralPage,
    pub e3: SpectralPage,
    pub einf: SpectralPage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionPolicy {
    /// Direct sum of the graded pieces.
    Split,
    /// Use the torsion symmetry `tors H^i ≅ tors H^{d−i+1}` of closed
    /// orientable manifolds to settle ambiguous degrees when possible.
    PdAssisted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    /// Every extension in this degree is forced to split.
    Unique,
    /// Ambiguous; the direct sum is reported.
    SplitAssumed,
    /// Settled by Poincaré duality.
    PoincareDuality,
}

/// One total degree of `H*(X)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeCohomology {
    pub degree: usize,
    /// `(p, q, E∞^{p,q})`, highest filtration (subgroup) first.
    pub pieces: Vec<(usize, usize, FgAbGroup)>,
    pub assembled: FgAbGroup,
    pub resolution: Resolution,
    /// Some piece depends on a differential that was not computed.
    pub undetermined: bool,
}

impl DegreeCohomology {
    pub fn extension_ambiguous(&self) -> bool {
        self.resolution == Resolution::SplitAssumed
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotalCohomology {
    pub dimension: usize,
    pub orientable: bool,
    pub degrees: Vec<DegreeCohomology>,
}

impl TotalCohomology {
    pub fn groups(&self) -> Vec<FgAbGroup> {
        self.degrees.iter().map(|d| d.assembled.clone()).collect()
    }

    pub fn betti_numbers(&self) -> Vec<usize> {
        self.degrees.iter().map(|d| d.assembled.free_rank).collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        localsys::euler_characteristic(&self.groups())
    }

    pub fn is_determined(&self) -> bool {
        self.degrees.iter().all(|d| !d.undetermined)
    }
}

/// Assembles a filtered group from its graded pieces listed subgroup first.
/// Returns the direct sum and whether some extension step could be
/// non-split.
pub fn assemble_filtered(pieces_sub_first: &[FgAbGroup]) -> (FgAbGroup, bool) {
    let mut acc = FgAbGroup::trivial();
    let mut ambiguous = false;
    for g in pieces_sub_first {
        if !g.ext_vanishes_into(&acc) {
            ambiguous = true;
        }
        acc = acc.direct_sum(g);
    }
    (acc, ambiguous)
}

/// Whether `candidate` can be an extension of the given pieces: equal free
/// rank and torsion order dividing the product of the pieces' torsion
/// orders.
pub fn is_consistent_extension(candidate: &FgAbGroup, pieces: &[FgAbGroup]) -> bool {
    use num_integer::Integer;
    let rank: usize = pieces.iter().map(|g| g.free_rank).sum();
    let tors = pieces.iter().fold(BigInt::one(), |acc, g| acc * g.torsion_order());
    candidate.free_rank == rank && tors.is_multiple_of(&candidate.torsion_order())
}

/// Assembles `H^i(X)` from a final (or flagged) `E∞` page.
pub fn total_cohomology(page: &SpectralPage, policy: ExtensionPolicy) -> Result<TotalCohomology, SpectralError> {
    if page.stage != Stage::Infinity {
        return Err(SpectralError::WrongStage(page.stage, "E∞"));
    }
    let d = page.base_dim + page.fiber_rank;
    let mut degrees = Vec::with_capacity(d + 1);
    for i in 0..=d {
        let mut pieces = Vec::new();
        let mut undetermined = false;
        for p in (0..=page.base_dim.min(i)).rev() {
            let q = i - p;
            if let Some(e) = page.entry(p, q) {
                undetermined |= e.status == EntryStatus::Undetermined;
                if !e.group().is_trivial() {
                    pieces.push((p, q, e.group().clone()));
                }
            }
        }
        let groups: Vec<FgAbGroup> = pieces.iter().map(|x| x.2.clone()).collect();
        let (assembled, ambiguous) = assemble_filtered(&groups);
        let resolution = if ambiguous { Resolution::SplitAssumed } else { Resolution::Unique };
        degrees.push(DegreeCohomology { degree: i, pieces, assembled, resolution, undetermined });
    }
    if policy == ExtensionPolicy::PdAssisted && page.total_orientable {
        for i in 1..=d {
            if !degrees[i].extension_ambiguous() || degrees[i].undetermined {
                continue;
            }
            let partner = d + 1 - i;
            if partner == 0 || partner > d {
                continue;
            }
            let other = &degrees[partner];
            if other.extension_ambiguous() || other.undetermined {
                continue;
            }
            let candidate = FgAbGroup::free(degrees[i].assembled.free_rank).direct_sum(&other.assembled.torsion());
            let groups: Vec<FgAbGroup> = degrees[i].pieces.iter().map(|x| x.2.clone()).collect();
            if is_consistent_extension(&candidate, &groups) {
                degrees[i].assembled = candidate;
                degrees[i].resolution = Resolution::PoincareDuality;
            }
        }
    }
    Ok(TotalCohomology { dimension: d, orientable: page.total_orientable, degrees })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationData {
    pub w1_vertical: Z2Class,
    pub w1_base: Z2Class,
    pub total_orientable: bool,
}

/// `w₁(X) = π*(w₁(M) + w₁(V))`, and `π*` is injective on `H¹(M, Z₂)` for
/// connected fibers.
pub fn orientation_data(bundle: &AffineBundle) -> OrientationData {
    let w1_vertical = bundle.lambda.w1();
    let w1_base = bundle.base().w1();
    let total_orientable = w1_vertical.add(&w1_base).is_zero();
    OrientationData { w1_vertical, w1_base, total_orientable }
}
