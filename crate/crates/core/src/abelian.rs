//! Exact integer linear algebra: Smith normal form, finitely generated
//! abelian groups, lattice bases and homomorphisms between subquotients.
//!
//! Everything here works over arbitrary-precision integers. Group
//! coordinates are always laid out torsion-first: one residue per invariant
//! factor (in divisibility order), followed by the free coordinates.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbelianError {
    #[error("boundary column {column} is not in the cycle lattice")]
    BoundaryNotInCycles { column: usize },
    #[error("induced map is not well defined: {0}")]
    NotWellDefined(String),
    #[error("vector is not in the cycle lattice")]
    NotACycle,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense integer matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix{}x{}[", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(r, c)])?;
            }
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (r, c): (usize, usize)) -> &BigInt {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut BigInt {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> BigInt) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        IntMatrix { rows, cols, data }
    }

    /// Builds a matrix from small-integer rows. Panics on ragged input.
    pub fn from_rows<T: Into<BigInt> + Copy>(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j].into())
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<BigInt>]) -> Self {
        assert!(columns.iter().all(|c| c.len() == rows), "column length mismatch");
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i].clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn column(&self, c: usize) -> Vec<BigInt> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<BigInt>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn row(&self, r: usize) -> Vec<BigInt> {
        self.data[r * self.cols..(r + 1) * self.cols].to_vec()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = BigInt::zero();
                for (j, x) in v.iter().enumerate() {
                    if !x.is_zero() {
                        acc += &self[(i, j)] * x;
                    }
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        IntMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        IntMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &BigInt) -> IntMatrix {
        IntMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    pub fn select_rows(&self, range: std::ops::Range<usize>) -> IntMatrix {
        Self::from_fn(range.len(), self.cols, |i, j| self[(range.start + i, j)].clone())
    }

    pub fn select_cols(&self, range: std::ops::Range<usize>) -> IntMatrix {
        Self::from_fn(self.rows, range.len(), |i, j| self[(i, range.start + j)].clone())
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for c in 0..self.cols {
                self.data.swap(a * self.cols + c, b * self.cols + c);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for r in 0..self.rows {
                self.data.swap(r * self.cols + a, r * self.cols + b);
            }
        }
    }

    /// row[target] += factor * row[source]
    fn add_row_multiple(&mut self, target: usize, source: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        for c in 0..self.cols {
            let v = &self[(source, c)] * factor;
            self[(target, c)] += v;
        }
    }

    /// col[target] += factor * col[source]
    fn add_col_multiple(&mut self, target: usize, source: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        for r in 0..self.rows {
            let v = &self[(r, source)] * factor;
            self[(r, target)] += v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for c in 0..self.cols {
            let v = -&self[(r, c)];
            self[(r, c)] = v;
        }
    }

    /// Exact determinant via fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if a[(k, k)].is_zero() {
                match (k + 1..n).find(|&r| !a[(r, k)].is_zero()) {
                    Some(r) => {
                        a.swap_rows(k, r);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
                    a[(i, j)] = v;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * &a[(n - 1, n - 1)]
    }
}

/// `U · A · V = D` with `U`, `V` unimodular and `D` diagonal in divisibility order.
#[derive(Clone, Debug)]
pub struct SmithDecomposition {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
    /// Inverse of `u`, maintained alongside it.
    pub u_inv: IntMatrix,
    /// Inverse of `v`, maintained alongside it.
    pub v_inv: IntMatrix,
    pub rank: usize,
}

impl SmithDecomposition {
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.d.rows.min(self.d.cols)).map(|i| self.d[(i, i)].clone()).collect()
    }
}

/// Smith normal form with the pivot rule "smallest nonzero absolute value,
/// ties broken by lowest (row, col)", so transformation matrices are
/// reproducible.
pub fn smith_normal_form(mat: &IntMatrix) -> SmithDecomposition {
    let (m, n) = (mat.rows, mat.cols);
    let mut a = mat.clone();
    let mut u = IntMatrix::identity(m);
    let mut u_inv = IntMatrix::identity(m);
    let mut v = IntMatrix::identity(n);
    let mut v_inv = IntMatrix::identity(n);
    let mut t = 0;
    while t < m.min(n) {
        // pick pivot in the trailing block
        let mut best: Option<(usize, usize)> = None;
        for i in t..m {
            for j in t..n {
                let x = &a[(i, j)];
                if x.is_zero() {
                    continue;
                }
                match best {
                    Some((bi, bj)) if a[(bi, bj)].abs() <= x.abs() => {}
                    _ => best = Some((i, j)),
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap_rows(t, pi);
        u.swap_rows(t, pi);
        u_inv.swap_cols(t, pi);
        a.swap_cols(t, pj);
        v.swap_cols(t, pj);
        v_inv.swap_rows(t, pj);

        let mut dirty = false;
        for i in t + 1..m {
            if a[(i, t)].is_zero() {
                continue;
            }
            let q = a[(i, t)].div_floor(&a[(t, t)]);
            let neg = -&q;
            a.add_row_multiple(i, t, &neg);
            u.add_row_multiple(i, t, &neg);
            u_inv.add_col_multiple(t, i, &q);
            if !a[(i, t)].is_zero() {
                dirty = true;
            }
        }
        for j in t + 1..n {
            if a[(t, j)].is_zero() {
                continue;
            }
            let q = a[(t, j)].div_floor(&a[(t, t)]);
            let neg = -&q;
            a.add_col_multiple(j, t, &neg);
            v.add_col_multiple(j, t, &neg);
            v_inv.add_row_multiple(t, j, &q);
            if !a[(t, j)].is_zero() {
                dirty = true;
            }
        }
        if dirty {
            continue;
        }
        // divisibility: fold an offending row into the pivot row
        let p = a[(t, t)].clone();
        let offending = (t + 1..m).find(|&i| (t + 1..n).any(|j| !a[(i, j)].is_multiple_of(&p)));
        if let Some(i) = offending {
            let one = BigInt::one();
            a.add_row_multiple(t, i, &one);
            u.add_row_multiple(t, i, &one);
            u_inv.add_col_multiple(i, t, &-one);
            continue;
        }
        if a[(t, t)].is_negative() {
            a.negate_row(t);
            u.negate_row(t);
            // inverse of a row negation is a column negation
            for r in 0..m {
                let x = -&u_inv[(r, t)];
                u_inv[(r, t)] = x;
            }
        }
        t += 1;
    }
    SmithDecomposition { u, d: a, v, u_inv, v_inv, rank: t }
}

/// A finitely generated abelian group `Z^free_rank ⊕ Z/d_1 ⊕ … ⊕ Z/d_t`
/// with `d_i ≥ 2` and `d_i | d_{i+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FgAbGroup {
    pub free_rank: usize,
    pub invariant_factors: Vec<BigInt>,
}

impl FgAbGroup {
    pub fn trivial() -> Self {
        FgAbGroup { free_rank: 0, invariant_factors: Vec::new() }
    }

    pub fn free(rank: usize) -> Self {
        FgAbGroup { free_rank: rank, invariant_factors: Vec::new() }
    }

    pub fn cyclic(order: u64) -> Self {
        Self::from_orders(0, &[BigInt::from(order)])
    }

    /// Canonicalizes an arbitrary list of cyclic orders (zeros are free
    /// summands, units are dropped) into invariant-factor form.
    pub fn from_orders(free_rank: usize, orders: &[BigInt]) -> Self {
        let n = orders.len();
        let diag = IntMatrix::from_fn(n, n, |i, j| if i == j { orders[i].clone() } else { BigInt::zero() });
        let mut g = cokernel(&diag);
        g.free_rank += free_rank;
        g
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.invariant_factors.is_empty()
    }

    pub fn is_free(&self) -> bool {
        self.invariant_factors.is_empty()
    }

    /// Number of canonical coordinates (torsion generators then free ones).
    pub fn num_generators(&self) -> usize {
        self.invariant_factors.len() + self.free_rank
    }

    pub fn torsion_order(&self) -> BigInt {
        self.invariant_factors.iter().fold(BigInt::one(), |acc, d| acc * d)
    }

    pub fn torsion(&self) -> FgAbGroup {
        FgAbGroup { free_rank: 0, invariant_factors: self.invariant_factors.clone() }
    }

    /// Order of the `i`-th generator (zero for free generators).
    pub fn generator_order(&self, i: usize) -> BigInt {
        self.invariant_factors.get(i).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn direct_sum(&self, other: &FgAbGroup) -> FgAbGroup {
        let orders: Vec<BigInt> =
            self.invariant_factors.iter().chain(&other.invariant_factors).cloned().collect();
        Self::from_orders(self.free_rank + other.free_rank, &orders)
    }

    /// Reduces a coordinate vector into canonical residues.
    pub fn normalize(&self, coords: &[BigInt]) -> Vec<BigInt> {
        coords
            .iter()
            .enumerate()
            .map(|(i, x)| match self.invariant_factors.get(i) {
                Some(d) => x.mod_floor(d),
                None => x.clone(),
            })
            .collect()
    }

    /// Diagonal relation matrix presenting the group on its canonical
    /// generators: `Z^g / columns`.
    pub fn relation_matrix(&self) -> IntMatrix {
        let g = self.num_generators();
        let t = self.invariant_factors.len();
        IntMatrix::from_fn(g, t, |i, j| if i == j { self.invariant_factors[i].clone() } else { BigInt::zero() })
    }

    /// Whether `Ext(self, other)` vanishes, i.e. every extension
    /// `0 → other → E → self → 0` splits.
    pub fn ext_vanishes_into(&self, other: &FgAbGroup) -> bool {
        self.invariant_factors.iter().all(|d| {
            other.free_rank == 0 && other.invariant_factors.iter().all(|e| d.gcd(e).is_one())
        })
    }
}

impl fmt::Display for FgAbGroup {
    /// Canonical strings like `Z^2 + Z/4`; the trivial group is `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for d in &self.invariant_factors {
            parts.push(format!("Z/{d}"));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

impl std::str::FromStr for FgAbGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "0" {
            return Ok(FgAbGroup::trivial());
        }
        let mut free = 0usize;
        let mut orders = Vec::new();
        for part in s.split('+') {
            let part = part.trim();
            if part == "Z" {
                free += 1;
            } else if let Some(r) = part.strip_prefix("Z^") {
                free += r.parse::<usize>().map_err(|e| format!("bad rank in {part:?}: {e}"))?;
            } else if let Some(d) = part.strip_prefix("Z/") {
                orders.push(d.parse::<BigInt>().map_err(|e| format!("bad order in {part:?}: {e}"))?);
            } else {
                return Err(format!("cannot parse group summand {part:?}"));
            }
        }
        Ok(FgAbGroup::from_orders(free, &orders))
    }
}

// Serialized as the canonical string, e.g. "Z^2 + Z/4".
impl Serialize for FgAbGroup {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FgAbGroup {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct IntMatrixRepr {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<String>>,
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries = (0..self.rows).map(|r| self.row(r).iter().map(ToString::to_string).collect()).collect();
        IntMatrixRepr { rows: self.rows, cols: self.cols, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = IntMatrixRepr::deserialize(d)?;
        if repr.entries.len() != repr.rows || repr.entries.iter().any(|r| r.len() != repr.cols) {
            return Err(D::Error::custom("matrix entries do not match the declared shape"));
        }
        let mut data = Vec::with_capacity(repr.rows * repr.cols);
        for x in repr.entries.iter().flatten() {
            data.push(x.parse::<BigInt>().map_err(D::Error::custom)?);
        }
        Ok(IntMatrix { rows: repr.rows, cols: repr.cols, data })
    }
}

/// Serde adapter writing integer vectors as decimal strings.
pub mod bigints_as_strings {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(ToString::to_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|x| x.parse().map_err(serde::de::Error::custom)).collect()
    }
}

/// `Z^rows / columnspan(mat)` in canonical form.
pub fn cokernel(mat: &IntMatrix) -> FgAbGroup {
    let snf = smith_normal_form(mat);
    let diag = snf.diagonal();
    let invariant_factors: Vec<BigInt> = diag[..snf.rank].iter().filter(|d| !d.is_one()).cloned().collect();
    FgAbGroup { free_rank: mat.rows - snf.rank, invariant_factors }
}

/// Canonical basis (column Hermite normal form) of the lattice spanned by the
/// columns of `gens`. The result has full column rank and is unique per
/// lattice, so lattice equality is matrix equality.
pub fn lattice_basis(gens: &IntMatrix) -> IntMatrix {
    // row-style HNF on the transpose
    let mut a = gens.transpose();
    let (m, n) = (a.rows, a.cols);
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row >= m {
            break;
        }
        // Euclid on the column below pivot_row
        loop {
            let mut best: Option<usize> = None;
            for r in pivot_row..m {
                if !a[(r, col)].is_zero() {
                    match best {
                        Some(b) if a[(b, col)].abs() <= a[(r, col)].abs() => {}
                        _ => best = Some(r),
                    }
                }
            }
            let Some(b) = best else { break };
            a.swap_rows(pivot_row, b);
            let mut done = true;
            for r in pivot_row + 1..m {
                if a[(r, col)].is_zero() {
                    continue;
                }
                let q = a[(r, col)].div_floor(&a[(pivot_row, col)]);
                a.add_row_multiple(r, pivot_row, &-q);
                if !a[(r, col)].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if a[(pivot_row, col)].is_zero() {
            continue;
        }
        if a[(pivot_row, col)].is_negative() {
            a.negate_row(pivot_row);
        }
        let p = a[(pivot_row, col)].clone();
        for r in 0..pivot_row {
            let q = a[(r, col)].div_floor(&p);
            a.add_row_multiple(r, pivot_row, &-q);
        }
        pivot_row += 1;
    }
    a.select_rows(0..pivot_row).transpose()
}

/// Basis of `{x : mat·x = 0}` in canonical lattice form.
pub fn kernel_lattice(mat: &IntMatrix) -> IntMatrix {
    let snf = smith_normal_form(mat);
    let basis = snf.v.select_cols(snf.rank..mat.cols);
    lattice_basis(&basis)
}

/// One integer solution of `mat·x = b`, if any.
pub fn solve_integer(mat: &IntMatrix, b: &[BigInt]) -> Option<Vec<BigInt>> {
    let snf = smith_normal_form(mat);
    solve_with_snf(&snf, b)
}

fn solve_with_snf(snf: &SmithDecomposition, b: &[BigInt]) -> Option<Vec<BigInt>> {
    let ub = snf.u.apply(b);
    let n = snf.v.rows;
    let mut y = vec![BigInt::zero(); n];
    for (i, val) in ub.iter().enumerate() {
        if i < snf.rank {
            let d = &snf.d[(i, i)];
            if !val.is_multiple_of(d) {
                return None;
            }
            y[i] = val / d;
        } else if !val.is_zero() {
            return None;
        }
    }
    Some(snf.v.apply(&y))
}

/// Lattice `{x ∈ span(domain) : f·x ∈ span(target)}` as a canonical basis in
/// ambient coordinates. `domain` and `target` are column bases.
pub fn preimage_lattice(f: &IntMatrix, domain: &IntMatrix, target: &IntMatrix) -> IntMatrix {
    let fz = f.mul(domain);
    let system = fz.hstack(&target.scale(&-BigInt::one()));
    let ker = kernel_lattice(&system);
    let coeffs = ker.select_rows(0..domain.cols);
    lattice_basis(&domain.mul(&coeffs))
}

/// The quotient of a cycle lattice by a boundary sublattice, with the
/// bookkeeping needed to move between ambient vectors and canonical group
/// coordinates.
#[derive(Clone, Debug)]
pub struct PresentedSubquotient {
    ambient_rank: usize,
    cycle_basis: IntMatrix,
    boundary_basis: IntMatrix,
    group: FgAbGroup,
    cycle_snf: SmithDecomposition,
    relation_snf: SmithDecomposition,
}

/// Builds `cycles / boundaries`. Columns of both matrices are generators
/// (not necessarily independent) in the same ambient space.
pub fn subquotient(cycles: &IntMatrix, boundaries: &IntMatrix) -> Result<PresentedSubquotient, AbelianError> {
    if cycles.rows != boundaries.rows {
        return Err(AbelianError::DimensionMismatch(format!(
            "cycles live in Z^{}, boundaries in Z^{}",
            cycles.rows, boundaries.rows
        )));
    }
    let ambient_rank = cycles.rows;
    let cycle_basis = lattice_basis(cycles);
    let boundary_basis = lattice_basis(boundaries);
    let cycle_snf = smith_normal_form(&cycle_basis);
    let mut rel_cols = Vec::with_capacity(boundary_basis.cols);
    for c in 0..boundary_basis.cols {
        let col = boundary_basis.column(c);
        let y = solve_with_snf(&cycle_snf, &col).ok_or(AbelianError::BoundaryNotInCycles { column: c })?;
        rel_cols.push(y);
    }
    let relations = IntMatrix::from_columns(cycle_basis.cols, &rel_cols);
    let relation_snf = smith_normal_form(&relations);
    let diag = relation_snf.diagonal();
    let group = FgAbGroup {
        free_rank: cycle_basis.cols - relation_snf.rank,
        invariant_factors: diag[..relation_snf.rank].iter().filter(|d| !d.is_one()).cloned().collect(),
    };
    Ok(PresentedSubquotient { ambient_rank, cycle_basis, boundary_basis, group, cycle_snf, relation_snf })
}

impl PresentedSubquotient {
    /// The whole space `Z^n` modulo nothing.
    pub fn free_ambient(n: usize) -> Self {
        subquotient(&IntMatrix::identity(n), &IntMatrix::zeros(n, 0)).expect("trivial boundaries")
    }

    pub fn ambient_rank(&self) -> usize {
        self.ambient_rank
    }

    pub fn cycle_basis(&self) -> &IntMatrix {
        &self.cycle_basis
    }

    pub fn boundary_basis(&self) -> &IntMatrix {
        &self.boundary_basis
    }

    pub fn group(&self) -> &FgAbGroup {
        &self.group
    }

    /// Positions in relation-SNF coordinates of the torsion and free generators.
    fn generator_positions(&self) -> Vec<usize> {
        let diag = self.relation_snf.diagonal();
        let r = self.relation_snf.rank;
        let mut pos: Vec<usize> = (0..r).filter(|&i| !diag[i].is_one()).collect();
        pos.extend(r..self.cycle_basis.cols);
        pos
    }

    pub fn contains_cycle(&self, v: &[BigInt]) -> bool {
        v.len() == self.ambient_rank && solve_with_snf(&self.cycle_snf, v).is_some()
    }

    /// Canonical coordinates of an ambient cycle.
    pub fn coordinates(&self, v: &[BigInt]) -> Result<Vec<BigInt>, AbelianError> {
        if v.len() != self.ambient_rank {
            return Err(AbelianError::DimensionMismatch(format!(
                "vector of length {} in ambient Z^{}",
                v.len(),
                self.ambient_rank
            )));
        }
        let y = solve_with_snf(&self.cycle_snf, v).ok_or(AbelianError::NotACycle)?;
        let w = self.relation_snf.u.apply(&y);
        let coords: Vec<BigInt> = self.generator_positions().into_iter().map(|p| w[p].clone()).collect();
        Ok(self.group.normalize(&coords))
    }

    /// Whether an ambient cycle represents zero.
    pub fn is_zero_class(&self, v: &[BigInt]) -> Result<bool, AbelianError> {
        Ok(self.coordinates(v)?.iter().all(Zero::is_zero))
    }

    /// An ambient representative of the class with the given coordinates.
    pub fn lift(&self, coords: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(coords.len(), self.group.num_generators(), "coordinate length mismatch");
        let mut w = vec![BigInt::zero(); self.cycle_basis.cols];
        for (p, c) in self.generator_positions().into_iter().zip(coords) {
            w[p] = c.clone();
        }
        let y = self.relation_snf.u_inv.apply(&w);
        self.cycle_basis.apply(&y)
    }

    /// Representative of the `i`-th canonical generator.
    pub fn generator(&self, i: usize) -> Vec<BigInt> {
        let mut coords = vec![BigInt::zero(); self.group.num_generators()];
        coords[i] = BigInt::one();
        self.lift(&coords)
    }
}

/// A homomorphism between canonical groups, stored as the matrix whose
/// `j`-th column is the (normalized) image of the `j`-th source generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Homomorphism {
    pub source: FgAbGroup,
    pub target: FgAbGroup,
    pub matrix: IntMatrix,
}

impl Homomorphism {
    pub fn new(source: FgAbGroup, target: FgAbGroup, matrix: IntMatrix) -> Result<Self, AbelianError> {
        if matrix.rows != target.num_generators() || matrix.cols != source.num_generators() {
            return Err(AbelianError::DimensionMismatch(format!(
                "{}x{} matrix for a map {} -> {}",
                matrix.rows, matrix.cols, source, target
            )));
        }
        let mut matrix = matrix;
        normalize_columns(&mut matrix, &target);
        let hom = Homomorphism { source, target, matrix };
        // torsion generators must land in elements of compatible order
        for (j, d) in hom.source.invariant_factors.iter().enumerate() {
            let img: Vec<BigInt> = hom.matrix.column(j).iter().map(|x| x * d).collect();
            if hom.target.normalize(&img).iter().any(|x| !x.is_zero()) {
                return Err(AbelianError::NotWellDefined(format!(
                    "generator {j} of order {d} maps to an element of larger order"
                )));
            }
        }
        Ok(hom)
    }

    pub fn zero(source: FgAbGroup, target: FgAbGroup) -> Self {
        let matrix = IntMatrix::zeros(target.num_generators(), source.num_generators());
        Homomorphism { source, target, matrix }
    }

    pub fn identity(group: FgAbGroup) -> Self {
        let matrix = IntMatrix::identity(group.num_generators());
        Homomorphism { source: group.clone(), target: group, matrix }
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.is_zero()
    }

    pub fn apply(&self, coords: &[BigInt]) -> Vec<BigInt> {
        self.target.normalize(&self.matrix.apply(coords))
    }

    /// `self ∘ inner`
    pub fn compose(&self, inner: &Homomorphism) -> Result<Homomorphism, AbelianError> {
        if inner.target != self.source {
            return Err(AbelianError::DimensionMismatch(format!(
                "cannot compose {} -> {} after {} -> {}",
                self.source, self.target, inner.source, inner.target
            )));
        }
        Homomorphism::new(inner.source.clone(), self.target.clone(), self.matrix.mul(&inner.matrix))
    }

    pub fn negate(&self) -> Homomorphism {
        let mut matrix = self.matrix.scale(&-BigInt::one());
        normalize_columns(&mut matrix, &self.target);
        Homomorphism { source: self.source.clone(), target: self.target.clone(), matrix }
    }

    /// Kernel as a subquotient of the source's generator lattice.
    pub fn kernel(&self) -> PresentedSubquotient {
        let src_rel = self.source.relation_matrix();
        let tgt_rel = self.target.relation_matrix();
        let cycles = preimage_lattice(&self.matrix, &IntMatrix::identity(self.source.num_generators()), &tgt_rel);
        subquotient(&cycles, &src_rel).expect("source relations lie in the kernel")
    }

    /// Cokernel as a subquotient of the target's generator lattice.
    pub fn cokernel(&self) -> PresentedSubquotient {
        let n = self.target.num_generators();
        let boundaries = self.target.relation_matrix().hstack(&self.matrix);
        subquotient(&IntMatrix::identity(n), &boundaries).expect("everything is a cycle")
    }

    /// Image as a subgroup of the target.
    pub fn image(&self) -> PresentedSubquotient {
        let tgt_rel = self.target.relation_matrix();
        let cycles = tgt_rel.hstack(&self.matrix);
        subquotient(&cycles, &tgt_rel).expect("relations lie in the span")
    }
}

fn normalize_columns(matrix: &mut IntMatrix, target: &FgAbGroup) {
    for (i, d) in target.invariant_factors.iter().enumerate() {
        for j in 0..matrix.cols {
            let v = matrix[(i, j)].mod_floor(d);
            matrix[(i, j)] = v;
        }
    }
}

/// Homomorphism of canonical groups induced by an ambient map `f` from
/// `source` to `target`. Fails when `f` does not carry cycles to cycles or
/// boundaries to boundaries.
pub fn induced_map(
    f: &IntMatrix,
    source: &PresentedSubquotient,
    target: &PresentedSubquotient,
) -> Result<Homomorphism, AbelianError> {
    if f.cols != source.ambient_rank || f.rows != target.ambient_rank {
        return Err(AbelianError::DimensionMismatch(format!(
            "{}x{} map between ambient ranks {} and {}",
            f.rows, f.cols, source.ambient_rank, target.ambient_rank
        )));
    }
    for c in 0..source.cycle_basis.cols {
        let img = f.apply(&source.cycle_basis.column(c));
        if !target.contains_cycle(&img) {
            return Err(AbelianError::NotWellDefined(format!("cycle basis vector {c} leaves the target cycles")));
        }
    }
    for c in 0..source.boundary_basis.cols {
        let img = f.apply(&source.boundary_basis.column(c));
        if !target.is_zero_class(&img)? {
            return Err(AbelianError::NotWellDefined(format!("boundary basis vector {c} maps to a nonzero class")));
        }
    }
    let mut cols = Vec::with_capacity(source.group.num_generators());
    for i in 0..source.group.num_generators() {
        let img = f.apply(&source.generator(i));
        cols.push(target.coordinates(&img)?);
    }
    let matrix = IntMatrix::from_columns(target.group.num_generators(), &cols);
    Homomorphism::new(source.group.clone(), target.group.clone(), matrix)
}

#[cfg(test)]
pub(crate) fn big(x: i64) -> BigInt {
    BigInt::from(x)
}

#[cfg(test)]
pub(crate) fn bigvec(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}
