//! Local systems over a small catalog of base spaces and their cohomology
//! with local coefficients.
//!
//! Two cochain models are used. Over a torus `T^k` the Koszul complex
//! `C^p = Z^n ⊗ ∧^p (Z^k)*` with `d(m ⊗ ω) = Σ_l (ρ(x_l) − 1)m ⊗ x_l* ∧ ω`.
//! Over a mapping torus of a formal fiber `F` the algebraic mapping cone
//! `C^i = C^i(F)⊗Z^n ⊕ C^{i−1}(F)⊗Z^n` with `d(a, s) = (0, (φ*⊗ρ(x) − 1)a)`.
//! Both carry cup products twisted by a coefficient pairing, which is how
//! contraction with a twisted Chern class and products on spectral pages are
//! realized.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abelian::{self, subquotient, AbelianError, FgAbGroup, IntMatrix, PresentedSubquotient};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocalSystemError {
    #[error("monodromy for generator {generator} is not in GL(n,Z) (det = {det})")]
    NonUnimodular { generator: usize, det: BigInt },
    #[error("monodromies for generators {a} and {b} do not commute")]
    NonCommuting { a: usize, b: usize },
    #[error("invalid base space: {0}")]
    InvalidBase(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degree {degree} out of range for a base of dimension {dim}")]
    DegreeOutOfRange { degree: usize, dim: usize },
    #[error("coefficient mismatch: {0}")]
    CoefficientMismatch(String),
    #[error(transparent)]
    Abelian(#[from] AbelianError),
}

/// A graded free cochain model with zero differential and a strictly
/// associative unital product. Basis element 0 is the unit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberModel {
    pub name: String,
    degrees: Vec<usize>,
    /// `mult[a][b]` is the product of basis elements `a` and `b` as a
    /// coefficient vector over the whole basis.
    mult: Vec<Vec<Vec<i64>>>,
}

impl FiberModel {
    pub fn point() -> Self {
        FiberModel { name: "pt".into(), degrees: vec![0], mult: vec![vec![vec![1]]] }
    }

    /// Cohomology model of `S^d`: `Z` in degrees 0 and `d`, with `u·u = 0`.
    pub fn sphere(d: usize) -> Self {
        assert!(d >= 1, "sphere dimension must be positive");
        FiberModel {
            name: format!("S{d}"),
            degrees: vec![0, d],
            mult: vec![vec![vec![1, 0], vec![0, 1]], vec![vec![0, 1], vec![0, 0]]],
        }
    }

    pub fn top_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn basis_len(&self) -> usize {
        self.degrees.len()
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.degrees[i]
    }

    fn basis_in_degree(&self, d: usize) -> Vec<usize> {
        (0..self.degrees.len()).filter(|&i| self.degrees[i] == d).collect()
    }

    pub fn product(&self, a: usize, b: usize) -> &[i64] {
        &self.mult[a][b]
    }

    /// Checks unit, degree additivity, associativity and graded commutativity
    /// on generators.
    pub fn validate(&self) -> Result<(), LocalSystemError> {
        let n = self.degrees.len();
        let bad = |msg: String| Err(LocalSystemError::InvalidBase(format!("fiber {}: {msg}", self.name)));
        if n == 0 || self.degrees[0] != 0 {
            return bad("basis element 0 must be the degree-0 unit".into());
        }
        if self.mult.len() != n || self.mult.iter().any(|r| r.len() != n || r.iter().any(|v| v.len() != n)) {
            return bad("multiplication table has the wrong shape".into());
        }
        for x in 0..n {
            let e: Vec<i64> = (0..n).map(|i| i64::from(i == x)).collect();
            if self.mult[0][x] != e || self.mult[x][0] != e {
                return bad(format!("element 0 is not a unit for {x}"));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for (k, &c) in self.mult[a][b].iter().enumerate() {
                    if c != 0 && self.degrees[k] != self.degrees[a] + self.degrees[b] {
                        return bad(format!("product {a}*{b} is not homogeneous"));
                    }
                }
                let sign = if self.degrees[a] * self.degrees[b] % 2 == 1 { -1 } else { 1 };
                let swapped: Vec<i64> = self.mult[b][a].iter().map(|c| sign * c).collect();
                if self.mult[a][b] != swapped {
                    return bad(format!("product {a}*{b} is not graded commutative"));
                }
                for c in 0..n {
                    let left = self.mul_vec(&self.mult[a][b], &basis_vec(n, c));
                    let right = self.mul_vec(&basis_vec(n, a), &self.mult[b][c]);
                    if left != right {
                        return bad(format!("product is not associative on ({a},{b},{c})"));
                    }
                }
            }
        }
        Ok(())
    }

    fn mul_vec(&self, x: &[i64], y: &[i64]) -> Vec<i64> {
        let n = self.degrees.len();
        let mut out = vec![0; n];
        for (a, &xa) in x.iter().enumerate() {
            for (b, &yb) in y.iter().enumerate() {
                if xa != 0 && yb != 0 {
                    for k in 0..n {
                        out[k] += xa * yb * self.mult[a][b][k];
                    }
                }
            }
        }
        out
    }
}

fn basis_vec(n: usize, i: usize) -> Vec<i64> {
    (0..n).map(|k| i64::from(k == i)).collect()
}

/// Catalog base spaces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseSpace {
    /// `T^k`, with `π₁ = Z^k` generated by the coordinate circles.
    Torus { dim: usize },
    /// Mapping torus of a formal, simply connected fiber under a ring
    /// endomorphism `phi` (a matrix on the fiber basis). `π₁ = Z`.
    MappingTorus { fiber: FiberModel, phi: Vec<Vec<i64>> },
}

impl BaseSpace {
    pub fn torus(dim: usize) -> Self {
        BaseSpace::Torus { dim }
    }

    /// The non-orientable `S²`-bundle over `S¹` glued by the antipodal map.
    pub fn antipodal_s2_mapping_torus() -> Self {
        BaseSpace::MappingTorus { fiber: FiberModel::sphere(2), phi: vec![vec![1, 0], vec![0, -1]] }
    }

    pub fn dimension(&self) -> usize {
        match self {
            BaseSpace::Torus { dim } => *dim,
            BaseSpace::MappingTorus { fiber, .. } => fiber.top_degree() + 1,
        }
    }

    /// Number of `π₁` generators carrying monodromy.
    pub fn num_generators(&self) -> usize {
        match self {
            BaseSpace::Torus { dim } => *dim,
            BaseSpace::MappingTorus { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<(), LocalSystemError> {
        match self {
            BaseSpace::Torus { dim } if *dim == 0 => {
                Err(LocalSystemError::InvalidBase("torus dimension must be at least 1".into()))
            }
            BaseSpace::Torus { dim } if *dim > 16 => {
                Err(LocalSystemError::InvalidBase("torus dimension above 16 is not supported".into()))
            }
            BaseSpace::Torus { .. } => Ok(()),
            BaseSpace::MappingTorus { fiber, phi } => {
                fiber.validate()?;
                let n = fiber.basis_len();
                if fiber.degrees.iter().any(|&d| d == 1) {
                    return Err(LocalSystemError::InvalidBase(
                        "mapping-torus fibers must be simply connected (no degree-1 classes)".into(),
                    ));
                }
                if phi.len() != n || phi.iter().any(|r| r.len() != n) {
                    return Err(LocalSystemError::InvalidBase(format!("phi must be {n}x{n}")));
                }
                let col = |j: usize| -> Vec<i64> { (0..n).map(|i| phi[i][j]).collect() };
                for j in 0..n {
                    for i in 0..n {
                        if phi[i][j] != 0 && fiber.degrees[i] != fiber.degrees[j] {
                            return Err(LocalSystemError::InvalidBase("phi does not preserve degree".into()));
                        }
                    }
                }
                if col(0) != basis_vec(n, 0) {
                    return Err(LocalSystemError::InvalidBase("phi is not unital".into()));
                }
                for a in 0..n {
                    for b in 0..n {
                        let lhs: Vec<i64> = (0..n)
                            .map(|i| (0..n).map(|k| phi[i][k] * fiber.mult[a][b][k]).sum())
                            .collect();
                        let rhs = fiber.mul_vec(&col(a), &col(b));
                        if lhs != rhs {
                            return Err(LocalSystemError::InvalidBase(format!(
                                "phi is not multiplicative on ({a},{b})"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Orientation character of the base, one bit per `π₁` generator
    /// (`true` = orientation reversing).
    pub fn w1(&self) -> Z2Class {
        match self {
            BaseSpace::Torus { dim } => Z2Class { bits: vec![false; *dim] },
            BaseSpace::MappingTorus { fiber, phi } => {
                let top = fiber.top_degree();
                let idx = fiber.basis_in_degree(top);
                let sub = IntMatrix::from_fn(idx.len(), idx.len(), |i, j| BigInt::from(phi[idx[i]][idx[j]]));
                Z2Class { bits: vec![sub.determinant().is_negative()] }
            }
        }
    }
}

/// A class in `H¹(M, Z₂) = Hom(π₁, Z₂)`, one bit per `π₁` generator. In both
/// cochain models these bits are the degree-1 cochain coordinates of the
/// trivial-coefficient model reduced mod 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Z2Class {
    pub bits: Vec<bool>,
}

impl Z2Class {
    pub fn zero(n: usize) -> Self {
        Z2Class { bits: vec![false; n] }
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|b| !b)
    }

    pub fn add(&self, other: &Z2Class) -> Z2Class {
        assert_eq!(self.bits.len(), other.bits.len(), "Z2 classes over different bases");
        Z2Class { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect() }
    }
}

/// A `Z^n` local system: one invertible integer matrix per `π₁` generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalSystem {
    pub rank: usize,
    pub base: BaseSpace,
    pub monodromies: Vec<IntMatrix>,
}

impl LocalSystem {
    pub fn new(base: BaseSpace, monodromies: Vec<IntMatrix>) -> Result<Self, LocalSystemError> {
        let rank = monodromies.first().map_or(0, IntMatrix::rows);
        let sys = LocalSystem { rank, base, monodromies };
        sys.validate()?;
        Ok(sys)
    }

    /// Constant system `Z^n`.
    pub fn trivial(base: BaseSpace, rank: usize) -> Self {
        let monodromies = vec![IntMatrix::identity(rank); base.num_generators()];
        LocalSystem { rank, base, monodromies }
    }

    pub fn from_rows(base: BaseSpace, mats: &[Vec<Vec<i64>>]) -> Result<Self, LocalSystemError> {
        Self::new(base, mats.iter().map(|m| IntMatrix::from_rows(m)).collect())
    }

    pub fn validate(&self) -> Result<(), LocalSystemError> {
        self.base.validate()?;
        if self.monodromies.len() != self.base.num_generators() {
            return Err(LocalSystemError::Shape(format!(
                "{} monodromies for a base with {} generators",
                self.monodromies.len(),
                self.base.num_generators()
            )));
        }
        for (g, m) in self.monodromies.iter().enumerate() {
            if m.rows() != self.rank || m.cols() != self.rank {
                return Err(LocalSystemError::Shape(format!("monodromy {g} is not {0}x{0}", self.rank)));
            }
            let det = m.determinant();
            if !det.abs().is_one() {
                return Err(LocalSystemError::NonUnimodular { generator: g, det });
            }
        }
        if matches!(self.base, BaseSpace::Torus { .. }) {
            for a in 0..self.monodromies.len() {
                for b in a + 1..self.monodromies.len() {
                    let (x, y) = (&self.monodromies[a], &self.monodromies[b]);
                    if x.mul(y) != y.mul(x) {
                        return Err(LocalSystemError::NonCommuting { a, b });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_trivial(&self) -> bool {
        self.monodromies.iter().all(|m| *m == IntMatrix::identity(self.rank))
    }

    /// Dual system: inverse-transpose monodromies.
    pub fn dual(&self) -> LocalSystem {
        let monodromies = self.monodromies.iter().map(|m| unimodular_inverse(m).transpose()).collect();
        LocalSystem { rank: self.rank, base: self.base.clone(), monodromies }
    }

    /// `∧^q` of the system on the lexicographic wedge basis.
    pub fn exterior_power(&self, q: usize) -> LocalSystem {
        assert!(q <= self.rank, "exterior power above the rank");
        let subsets = subsets_of_size(self.rank, q);
        let monodromies = self
            .monodromies
            .iter()
            .map(|m| {
                IntMatrix::from_fn(subsets.len(), subsets.len(), |i, j| {
                    let (rs, cs) = (mask_indices(subsets[i]), mask_indices(subsets[j]));
                    IntMatrix::from_fn(q, q, |a, b| m[(rs[a], cs[b])].clone()).determinant()
                })
            })
            .collect();
        LocalSystem { rank: subsets.len(), base: self.base.clone(), monodromies }
    }

    /// First Stiefel–Whitney class of the flat vertical bundle: the sign of
    /// `det ρ(g)` per generator.
    pub fn w1(&self) -> Z2Class {
        Z2Class { bits: self.monodromies.iter().map(|m| m.determinant().is_negative()).collect() }
    }
}

/// Inverse of a matrix in `GL(n, Z)`.
pub fn unimodular_inverse(m: &IntMatrix) -> IntMatrix {
    let snf = abelian::smith_normal_form(m);
    assert_eq!(snf.rank, m.rows(), "matrix is singular");
    assert!(snf.diagonal().iter().all(One::is_one), "matrix is not unimodular");
    // U M V = I  =>  M^{-1} = V U
    snf.v.mul(&snf.u)
}

pub(crate) fn subsets_of_size(n: usize, q: usize) -> Vec<u32> {
    let mut out: Vec<u32> = (0u32..(1u32 << n)).filter(|m| m.count_ones() as usize == q).collect();
    // lexicographic order on sorted index lists
    out.sort_by_key(|&m| mask_indices(m));
    out
}

pub(crate) fn mask_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

/// Sign of `ω_A ∧ ω_B` relative to `ω_{A∪B}` for disjoint index sets.
pub(crate) fn shuffle_sign(a: u32, b: u32) -> i64 {
    let mut inversions = 0;
    for i in mask_indices(b) {
        inversions += (a >> (i + 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// A bilinear coefficient map `Z^{n1} × Z^{n2} → Z^{n3}` given by its
/// nonzero structure constants `(i, j, k, c)`: `e_i · e_j = Σ c e_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing {
    pub dims: (usize, usize, usize),
    pub entries: Vec<(usize, usize, usize, i64)>,
}

impl Pairing {
    /// `Z × Z → Z`, ordinary multiplication.
    pub fn scalar() -> Self {
        Pairing { dims: (1, 1, 1), entries: vec![(0, 0, 0, 1)] }
    }

    /// Interior product `Λ ⊗ ∧^q Λ* → ∧^{q−1} Λ*`, `i_x(α)` as a graded
    /// derivation.
    pub fn contraction(n: usize, q: usize) -> Self {
        assert!(q >= 1 && q <= n);
        let src = subsets_of_size(n, q);
        let dst = subsets_of_size(n, q - 1);
        let mut entries = Vec::new();
        for (j, &s) in src.iter().enumerate() {
            for (pos, i) in mask_indices(s).into_iter().enumerate() {
                let rest = s & !(1 << i);
                let k = dst.iter().position(|&d| d == rest).expect("subset present");
                let sign = if pos % 2 == 0 { 1 } else { -1 };
                entries.push((i, j, k, sign));
            }
        }
        Pairing { dims: (n, src.len(), dst.len()), entries }
    }

    /// Wedge product `∧^a ⊗ ∧^b → ∧^{a+b}` on lexicographic bases.
    pub fn wedge(n: usize, a: usize, b: usize) -> Self {
        let (sa, sb) = (subsets_of_size(n, a), subsets_of_size(n, b));
        let sc = if a + b <= n { subsets_of_size(n, a + b) } else { Vec::new() };
        let mut entries = Vec::new();
        for (i, &x) in sa.iter().enumerate() {
            for (j, &y) in sb.iter().enumerate() {
                if x & y != 0 {
                    continue;
                }
                let k = sc.iter().position(|&z| z == x | y).expect("subset present");
                entries.push((i, j, k, shuffle_sign(x, y)));
            }
        }
        Pairing { dims: (sa.len(), sb.len(), sc.len()), entries }
    }

    /// Evaluation `Λ ⊗ Λ* → Z`.
    pub fn duality(n: usize) -> Self {
        Pairing { dims: (n, n, 1), entries: (0..n).map(|i| (i, i, 0, 1)).collect() }
    }

    pub fn apply(&self, x: &[BigInt], y: &[BigInt]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); self.dims.2];
        for &(i, j, k, c) in &self.entries {
            if !x[i].is_zero() && !y[j].is_zero() {
                out[k] += &x[i] * &y[j] * c;
            }
        }
        out
    }

    /// Whether `P(ρ₁v, ρ₂w) = ρ₃P(v, w)` for every generator.
    pub fn is_equivariant(&self, s1: &LocalSystem, s2: &LocalSystem, s3: &LocalSystem) -> bool {
        (0..s1.monodromies.len()).all(|g| {
            (0..self.dims.0).all(|i| {
                (0..self.dims.1).all(|j| {
                    let lhs = self.apply(&s1.monodromies[g].column(i), &s2.monodromies[g].column(j));
                    let ei = unit(self.dims.0, i);
                    let ej = unit(self.dims.1, j);
                    let rhs = s3.monodromies[g].apply(&self.apply(&ei, &ej));
                    lhs == rhs
                })
            })
        })
    }
}

fn unit(n: usize, i: usize) -> Vec<BigInt> {
    (0..n).map(|k| if k == i { BigInt::one() } else { BigInt::zero() }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ConePart {
    /// `C^i(F) ⊗ V`
    Fiber,
    /// `C^{i−1}(F) ⊗ V`
    Suspended,
}

/// Cochain model of `C*(M; sys)`.
#[derive(Clone, Debug)]
pub struct CochainModel {
    pub system: LocalSystem,
    dims: Vec<usize>,
    differentials: Vec<IntMatrix>,
    shape: ModelShape,
}

#[derive(Clone, Debug)]
enum ModelShape {
    Torus { subsets: Vec<Vec<u32>> },
    Cone { fiber: FiberModel, phi: IntMatrix, layout: Vec<Vec<(ConePart, usize)>> },
}

impl CochainModel {
    pub fn new(system: &LocalSystem) -> Result<Self, LocalSystemError> {
        system.validate()?;
        let n = system.rank;
        match &system.base {
            BaseSpace::Torus { dim } => {
                let k = *dim;
                let subsets: Vec<Vec<u32>> = (0..=k).map(|p| subsets_of_size(k, p)).collect();
                let dims: Vec<usize> = subsets.iter().map(|s| s.len() * n).collect();
                let id = IntMatrix::identity(n);
                let shifted: Vec<IntMatrix> = system.monodromies.iter().map(|m| m.sub(&id)).collect();
                let mut differentials = Vec::new();
                for p in 0..=k {
                    let rows = if p < k { dims[p + 1] } else { 0 };
                    let mut d = IntMatrix::zeros(rows, dims[p]);
                    if p < k {
                        for (si, &s) in subsets[p].iter().enumerate() {
                            for l in 0..k {
                                if s >> l & 1 == 1 {
                                    continue;
                                }
                                let t = s | 1 << l;
                                let ti = subsets[p + 1].iter().position(|&x| x == t).expect("subset");
                                let sign = shuffle_sign(1 << l, s);
                                for i in 0..n {
                                    for r in 0..n {
                                        let v = &shifted[l][(r, i)];
                                        if !v.is_zero() {
                                            d[(ti * n + r, si * n + i)] += v * sign;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    differentials.push(d);
                }
                Ok(CochainModel { system: system.clone(), dims, differentials, shape: ModelShape::Torus { subsets } })
            }
            BaseSpace::MappingTorus { fiber, phi } => {
                let top = fiber.top_degree() + 1;
                let phi_m = IntMatrix::from_rows(phi);
                let mut layout = Vec::new();
                for i in 0..=top {
                    let mut l = Vec::new();
                    for f in fiber.basis_in_degree(i) {
                        l.push((ConePart::Fiber, f));
                    }
                    if i >= 1 {
                        for f in fiber.basis_in_degree(i - 1) {
                            l.push((ConePart::Suspended, f));
                        }
                    }
                    layout.push(l);
                }
                let dims: Vec<usize> = layout.iter().map(|l| l.len() * n).collect();
                let rho = &system.monodromies[0];
                let mut differentials = Vec::new();
                for i in 0..=top {
                    let rows = if i < top { dims[i + 1] } else { 0 };
                    let mut d = IntMatrix::zeros(rows, dims[i]);
                    if i < top {
                        for (ci, &(part, f)) in layout[i].iter().enumerate() {
                            if part != ConePart::Fiber {
                                continue;
                            }
                            // (T − 1)(e_f ⊗ e_c), landing in the suspended block of C^{i+1}
                            for (ti, &(tpart, g)) in layout[i + 1].iter().enumerate() {
                                if tpart != ConePart::Suspended {
                                    continue;
                                }
                                let phi_gf = &phi_m[(g, f)];
                                for c in 0..n {
                                    for r in 0..n {
                                        let mut v = phi_gf * &rho[(r, c)];
                                        if g == f && r == c {
                                            v -= 1;
                                        }
                                        if !v.is_zero() {
                                            d[(ti * n + r, ci * n + c)] += v;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    differentials.push(d);
                }
                Ok(CochainModel {
                    system: system.clone(),
                    dims,
                    differentials,
                    shape: ModelShape::Cone { fiber: fiber.clone(), phi: phi_m, layout },
                })
            }
        }
    }

    pub fn top_degree(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn dim(&self, p: usize) -> usize {
        self.dims.get(p).copied().unwrap_or(0)
    }

    /// `d: C^p → C^{p+1}` (a `0 × dim` matrix at the top).
    pub fn differential(&self, p: usize) -> IntMatrix {
        match self.differentials.get(p) {
            Some(d) => d.clone(),
            None => IntMatrix::zeros(self.dim(p + 1), self.dim(p)),
        }
    }

    /// Verifies `d ∘ d = 0` in every degree.
    pub fn check_square_zero(&self) -> bool {
        (0..self.top_degree()).all(|p| self.differential(p + 1).mul(&self.differential(p)).is_zero())
    }

    /// Cohomology in degree `p` as a presented subquotient of `C^p`.
    pub fn cohomology_in_degree(&self, p: usize) -> Result<PresentedSubquotient, AbelianError> {
        let cycles = abelian::kernel_lattice(&self.differential(p));
        let boundaries = if p == 0 { IntMatrix::zeros(self.dim(0), 0) } else { self.differential(p - 1) };
        subquotient(&cycles, &boundaries)
    }

    /// Twisted cup product `a ⌣ b` of cochains `a ∈ C^p(self)`,
    /// `b ∈ C^q(right)`, landing in `C^{p+q}(out)` through `pairing`.
    pub fn cup(
        &self,
        right: &CochainModel,
        out: &CochainModel,
        pairing: &Pairing,
        a: &[BigInt],
        p: usize,
        b: &[BigInt],
        q: usize,
    ) -> Vec<BigInt> {
        let (n1, n2, n3) = (self.system.rank, right.system.rank, out.system.rank);
        assert_eq!(pairing.dims, (n1, n2, n3), "pairing does not match the coefficient ranks");
        assert_eq!(a.len(), self.dim(p));
        assert_eq!(b.len(), right.dim(q));
        let r = p + q;
        let mut result = vec![BigInt::zero(); out.dim(r)];
        if r > out.top_degree() {
            return result;
        }
        let mut by_left: BTreeMap<usize, Vec<(usize, usize, i64)>> = BTreeMap::new();
        for &(i, j, k, c) in &pairing.entries {
            by_left.entry(i).or_default().push((j, k, c));
        }
        match (&self.shape, &out.shape) {
            (ModelShape::Torus { subsets }, ModelShape::Torus { subsets: out_subsets }) => {
                let k = subsets.len() - 1;
                let mut rho_cache: BTreeMap<u32, IntMatrix> = BTreeMap::new();
                for (ai, av) in a.iter().enumerate() {
                    if av.is_zero() {
                        continue;
                    }
                    let (sa, ci) = (subsets[p][ai / n1], ai % n1);
                    let rho_a = rho_cache.entry(sa).or_insert_with(|| {
                        mask_indices(sa)
                            .into_iter()
                            .fold(IntMatrix::identity(n2), |acc, l| acc.mul(&right.system.monodromies[l]))
                    });
                    for (bi, bv) in b.iter().enumerate() {
                        if bv.is_zero() {
                            continue;
                        }
                        let (sb, cj) = (subsets[q][bi / n2], bi % n2);
                        if sa & sb != 0 {
                            continue;
                        }
                        let sign = shuffle_sign(sa, sb);
                        let union = sa | sb;
                        let ui = out_subsets[r].iter().position(|&x| x == union).expect("subset");
                        debug_assert!(union.count_ones() as usize <= k);
                        let Some(terms) = by_left.get(&ci) else { continue };
                        for &(j, kk, c) in terms {
                            let w = &rho_a[(j, cj)];
                            if w.is_zero() {
                                continue;
                            }
                            result[ui * n3 + kk] += av * bv * w * (sign * c);
                        }
                    }
                }
            }
            (ModelShape::Cone { fiber, phi, layout }, ModelShape::Cone { layout: out_layout, .. }) => {
                let rho1 = &self.system.monodromies[0];
                let nf = fiber.basis_len();
                let find = |part: ConePart, f: usize| -> usize {
                    out_layout[r].iter().position(|&x| x == (part, f)).expect("cone basis element")
                };
                for (ai, av) in a.iter().enumerate() {
                    if av.is_zero() {
                        continue;
                    }
                    let (apart, fa) = layout[p][ai / n1];
                    let ci = ai % n1;
                    for (bi, bv) in b.iter().enumerate() {
                        if bv.is_zero() {
                            continue;
                        }
                        let (bpart, fb) = right_layout(right)[q][bi / n2];
                        let cj = bi % n2;
                        let coeff = av * bv;
                        match (apart, bpart) {
                            (ConePart::Suspended, ConePart::Suspended) => {}
                            (ConePart::Fiber, ConePart::Fiber) | (ConePart::Suspended, ConePart::Fiber) => {
                                let prod = fiber.product(fa, fb);
                                let Some(terms) = by_left.get(&ci) else { continue };
                                for (g, &pc) in prod.iter().enumerate() {
                                    if pc == 0 {
                                        continue;
                                    }
                                    let oi = find(apart, g);
                                    for &(j, kk, c) in terms {
                                        if j == cj {
                                            result[oi * n3 + kk] += &coeff * (pc * c);
                                        }
                                    }
                                }
                            }
                            (ConePart::Fiber, ConePart::Suspended) => {
                                // (−1)^{|a|} T(a) ⌣ t with T = φ* ⊗ ρ
                                let sign: i64 = if p % 2 == 0 { 1 } else { -1 };
                                for h in 0..nf {
                                    let ph = &phi[(h, fa)];
                                    if ph.is_zero() {
                                        continue;
                                    }
                                    let prod = fiber.product(h, fb);
                                    for ci2 in 0..n1 {
                                        let rv = &rho1[(ci2, ci)];
                                        if rv.is_zero() {
                                            continue;
                                        }
                                        let Some(terms) = by_left.get(&ci2) else { continue };
                                        for (g, &pc) in prod.iter().enumerate() {
                                            if pc == 0 {
                                                continue;
                                            }
                                            let oi = find(ConePart::Suspended, g);
                                            for &(j, kk, c) in terms {
                                                if j == cj {
                                                    result[oi * n3 + kk] += &coeff * ph * rv * (sign * pc * c);
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => panic!("cup product between cochain models over different bases"),
        }
        result
    }

    /// Matrix of `x ↦ a ⌣ x` from `C^q(right)` to `C^{p+q}(out)`.
    pub fn left_cup_matrix(
        &self,
        right: &CochainModel,
        out: &CochainModel,
        pairing: &Pairing,
        a: &[BigInt],
        p: usize,
        q: usize,
    ) -> IntMatrix {
        let cols: Vec<Vec<BigInt>> = (0..right.dim(q))
            .map(|j| self.cup(right, out, pairing, a, p, &unit(right.dim(q), j), q))
            .collect();
        IntMatrix::from_columns(out.dim(p + q), &cols)
    }
}

fn right_layout(m: &CochainModel) -> &Vec<Vec<(ConePart, usize)>> {
    match &m.shape {
        ModelShape::Cone { layout, .. } => layout,
        ModelShape::Torus { .. } => panic!("cup product between cochain models over different bases"),
    }
}

/// Cohomology of a local system, degree by degree, with the cochain model
/// retained for class arithmetic.
#[derive(Clone, Debug)]
pub struct Cohomology {
    pub model: CochainModel,
    pub groups: Vec<PresentedSubquotient>,
}

impl Cohomology {
    pub fn group(&self, p: usize) -> FgAbGroup {
        self.groups.get(p).map_or_else(FgAbGroup::trivial, |g| g.group().clone())
    }

    pub fn groups(&self) -> Vec<FgAbGroup> {
        self.groups.iter().map(|g| g.group().clone()).collect()
    }

    pub fn class_from_coordinates(&self, p: usize, coords: &[BigInt]) -> Result<CohClass, LocalSystemError> {
        if p > self.model.top_degree() && coords.is_empty() {
            // no cochains above the top degree
            return Ok(CohClass { degree: p, system: self.model.system.clone(), representative: Vec::new(), coordinates: Vec::new() });
        }
        let sq = self.groups.get(p).ok_or(LocalSystemError::DegreeOutOfRange { degree: p, dim: self.model.top_degree() })?;
        if coords.len() != sq.group().num_generators() {
            return Err(LocalSystemError::Shape(format!(
                "{} coordinates for H^{p} = {}",
                coords.len(),
                sq.group()
            )));
        }
        let coords = sq.group().normalize(coords);
        Ok(CohClass { degree: p, system: self.model.system.clone(), representative: sq.lift(&coords), coordinates: coords })
    }

    pub fn class_of(&self, p: usize, representative: Vec<BigInt>) -> Result<CohClass, LocalSystemError> {
        let sq = self.groups.get(p).ok_or(LocalSystemError::DegreeOutOfRange { degree: p, dim: self.model.top_degree() })?;
        let coordinates = sq.coordinates(&representative)?;
        Ok(CohClass { degree: p, system: self.model.system.clone(), representative, coordinates })
    }

    pub fn zero_class(&self, p: usize) -> Result<CohClass, LocalSystemError> {
        let n = self.group(p).num_generators();
        self.class_from_coordinates(p, &vec![BigInt::zero(); n])
    }
}

/// `H^i(M, sys)` for `0 ≤ i ≤ dim M`.
pub fn cohomology(sys: &LocalSystem) -> Result<Cohomology, LocalSystemError> {
    let model = CochainModel::new(sys)?;
    if !model.check_square_zero() {
        return Err(LocalSystemError::Shape("constructed cochain model has d∘d ≠ 0".into()));
    }
    let groups = (0..=model.top_degree()).map(|p| model.cohomology_in_degree(p)).collect::<Result<_, _>>()?;
    Ok(Cohomology { model, groups })
}

/// A cohomology class with local coefficients, kept as a cocycle
/// representative together with its canonical coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CohClass {
    pub degree: usize,
    pub system: LocalSystem,
    pub representative: Vec<BigInt>,
    pub coordinates: Vec<BigInt>,
}

impl CohClass {
    pub fn is_zero(&self) -> bool {
        self.coordinates.iter().all(Zero::is_zero)
    }
}

/// Contraction `c ⌣ a ∈ H^{p+2}(M, ∧^{q−1}Λ*)` of the twisted Chern class
/// `c ∈ H²(M, Λ)` with `a ∈ H^p(M, ∧^qΛ*)`, using
/// `(φ⊗x) ⌣ (ψ⊗α) = (−1)^{|ψ|} (φ⌣ψ) ⊗ i_x α`.
pub fn contract_with_chern(c: &CohClass, a: &CohClass, q: usize) -> Result<CohClass, LocalSystemError> {
    let lambda = &c.system;
    let dim = lambda.base.dimension();
    if c.degree != 2 {
        return Err(LocalSystemError::DegreeOutOfRange { degree: c.degree, dim });
    }
    if q == 0 || q > lambda.rank {
        return Err(LocalSystemError::DegreeOutOfRange { degree: q, dim: lambda.rank });
    }
    let expected = lambda.dual().exterior_power(q);
    if a.system != expected {
        return Err(LocalSystemError::CoefficientMismatch(format!(
            "class is not in H^*(M, ∧^{q}Λ*) for the Chern class's Λ"
        )));
    }
    let target_sys = lambda.dual().exterior_power(q - 1);
    let target = cohomology(&target_sys)?;
    let p = a.degree;
    if p + 2 > dim {
        return target.zero_class(p + 2);
    }
    let lm = CochainModel::new(lambda)?;
    let am = CochainModel::new(&a.system)?;
    let pairing = Pairing::contraction(lambda.rank, q);
    let mut rep = lm.cup(&am, &target.model, &pairing, &c.representative, 2, &a.representative, p);
    if p % 2 == 1 {
        rep.iter_mut().for_each(|x| *x = -&*x);
    }
    target.class_of(p + 2, rep)
}

/// Alternating sum of free ranks.
pub fn euler_characteristic(groups: &[FgAbGroup]) -> i64 {
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| if i % 2 == 0 { g.free_rank as i64 } else { -(g.free_rank as i64) })
        .sum()
}

/// Local system `[[1, m], [0, 1]]`, `[[1, n], [0, 1]]` over `T²`.
pub fn unipotent_torus_system(m: i64, n: i64) -> LocalSystem {
    LocalSystem::from_rows(BaseSpace::torus(2), &[vec![vec![1, m], vec![0, 1]], vec![vec![1, n], vec![0, 1]]])
        .expect("unipotent matrices are valid")
}

/// Local system `[[-1, -1], [0, -1]]` over the antipodal `S²` mapping torus.
pub fn antipodal_system() -> LocalSystem {
    LocalSystem::from_rows(BaseSpace::antipodal_s2_mapping_torus(), &[vec![vec![-1, -1], vec![0, -1]]])
        .expect("valid monodromy")
}
