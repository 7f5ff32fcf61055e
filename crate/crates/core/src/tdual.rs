//! Topological T-duality at the level of classification data.
//!
//! A flux is given by the datum `(ξ, k, h₃)` with `ξ ∈ H¹(M, Z₂)`,
//! `k ∈ H²(M, Λ*)` and `h₃ ∈ H³(M, Z)`. The dual of `(Λ, c)` with flux
//! `(ξ, k, h₃)` is `(Λ*, ĉ = k)` with flux `(ξ + w₁(Λ), k̂ = c, h₃)`.

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abelian::{AbelianError, FgAbGroup, IntMatrix, PresentedSubquotient};
use crate::localsys::{cohomology, CochainModel, CohClass, LocalSystem, LocalSystemError, Pairing, Z2Class};
use crate::lsss::{self, d2_cochain_map, e2_page, AffineBundle, SpectralError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TDualError {
    #[error("coefficient mismatch: {0}")]
    CoefficientMismatch(String),
    #[error("flux is not T-dualizable: d2(k) = {0:?} is nonzero in H^4(M, Z)")]
    NotDualizable(Vec<BigInt>),
    #[error("vertical bundle is not orientable (w1 = {0:?}); the W3 correction is not modeled")]
    UnsupportedNonOrientableVertical(Vec<bool>),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    LocalSystem(#[from] LocalSystemError),
    #[error(transparent)]
    Abelian(#[from] AbelianError),
}

/// Flux datum over the base of a bundle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluxDatum {
    pub xi: Z2Class,
    /// Class in `H²(M, Λ*)`.
    pub k: CohClass,
    /// Class in `H³(M, Z)`.
    pub h3: CohClass,
}

impl FluxDatum {
    pub fn from_coordinates(
        bundle: &AffineBundle,
        xi: Vec<bool>,
        k: &[BigInt],
        h3: &[BigInt],
    ) -> Result<Self, TDualError> {
        let kc = cohomology(&bundle.lambda.dual())?.class_from_coordinates(2, k)?;
        let trivial = LocalSystem::trivial(bundle.base().clone(), 1);
        let hc = cohomology(&trivial)?.class_from_coordinates(3, h3)?;
        let flux = FluxDatum { xi: Z2Class { bits: xi }, k: kc, h3: hc };
        flux.check_over(bundle)?;
        Ok(flux)
    }

    pub fn zero(bundle: &AffineBundle) -> Result<Self, TDualError> {
        let dual = cohomology(&bundle.lambda.dual())?;
        let trivial = cohomology(&LocalSystem::trivial(bundle.base().clone(), 1))?;
        let k = vec![BigInt::zero(); dual.group(2).num_generators()];
        let h3 = vec![BigInt::zero(); trivial.group(3).num_generators()];
        Self::from_coordinates(bundle, vec![false; bundle.base().num_generators()], &k, &h3)
    }

    fn check_over(&self, bundle: &AffineBundle) -> Result<(), TDualError> {
        if self.xi.bits.len() != bundle.base().num_generators() {
            return Err(TDualError::CoefficientMismatch(format!(
                "xi has {} bits for a base with {} generators",
                self.xi.bits.len(),
                bundle.base().num_generators()
            )));
        }
        if self.k.degree != 2 || self.k.system != bundle.lambda.dual() {
            return Err(TDualError::CoefficientMismatch("k must be a class in H^2(M, Λ*)".into()));
        }
        let trivial = LocalSystem::trivial(bundle.base().clone(), 1);
        if self.h3.degree != 3 || self.h3.system != trivial {
            return Err(TDualError::CoefficientMismatch("h3 must be a class in H^3(M, Z)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    /// `E∞^{2,1}`, the quotient of `H²(M, Λ*)` by the image of `d₂`.
    pub einf21: FgAbGroup,
    /// Coordinates of `k` in `E∞^{2,1}`.
    #[serde(with = "crate::abelian::bigints_as_strings")]
    pub k_class: Vec<BigInt>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dualizability {
    Dualizable(Certificate),
    /// `d₂(k) ≠ 0` in `H⁴(M, Z)`; coordinates of the obstruction.
    Obstructed(#[serde(with = "crate::abelian::bigints_as_strings")] Vec<BigInt>),
}

impl Dualizability {
    pub fn is_dualizable(&self) -> bool {
        matches!(self, Dualizability::Dualizable(_))
    }
}

/// The `E₃^{2,1} = E∞^{2,1}` entry of a bundle together with the
/// cochain-level `d₂` out of `E₂^{2,1}` (if the base has room for it).
struct Einf21 {
    entry: PresentedSubquotient,
    d2_out: Option<(IntMatrix, PresentedSubquotient)>,
}

fn einf21(bundle: &AffineBundle) -> Result<Einf21, TDualError> {
    let page = e2_page(bundle)?;
    let (e3, _) = lsss::apply_d2(bundle, &page)?;
    let entry = e3.entry(2, 1).map(|e| e.subquotient.clone());
    let entry = match entry {
        Some(e) => e,
        None => return Err(TDualError::CoefficientMismatch("base has no degree-2 cohomology".into())),
    };
    let d2_out = if page.base_dim >= 4 {
        let f = d2_cochain_map(bundle, &page, 2, 1)?;
        Some((f, page.entry(4, 0).expect("in range").subquotient.clone()))
    } else {
        None
    };
    Ok(Einf21 { entry, d2_out })
}

/// The flux is dualizable iff `d₂(k) = 0`; the certificate is the class of
/// `k` in `E∞^{2,1}`.
pub fn is_dualizable(bundle: &AffineBundle, flux: &FluxDatum) -> Result<Dualizability, TDualError> {
    flux.check_over(bundle)?;
    let e = einf21(bundle)?;
    if let Some((f, target)) = &e.d2_out {
        let img = target.coordinates(&f.apply(&flux.k.representative))?;
        if img.iter().any(|x| !x.is_zero()) {
            return Ok(Dualizability::Obstructed(img));
        }
    }
    let k_class = e.entry.coordinates(&flux.k.representative)?;
    Ok(Dualizability::Dualizable(Certificate { einf21: e.entry.group().clone(), k_class }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationReport {
    pub monodromy_dual: bool,
    /// `ξ̂ = ξ + w₁(Λ)`
    pub xi_transport: bool,
    /// `c ⌣ ĉ = 0` in `H⁴(M, Z)`
    pub chern_product_vanishes: bool,
    /// `[h] = [ĉ]` in `E∞^{2,1}(X)`
    pub flux_matches_dual_chern: bool,
    /// `[ĥ] = [c]` in `E∞^{2,1}(X̂)`
    pub dual_flux_matches_chern: bool,
    /// The W₃ term of the grading relation was not evaluated.
    pub w3_skipped: bool,
}

impl RelationReport {
    pub fn all_pass(&self) -> bool {
        self.monodromy_dual
            && self.xi_transport
            && self.chern_product_vanishes
            && self.flux_matches_dual_chern
            && self.dual_flux_matches_chern
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualPair {
    pub bundle: AffineBundle,
    pub flux: FluxDatum,
    pub dual_bundle: AffineBundle,
    pub dual_flux: FluxDatum,
    pub report: RelationReport,
    pub notes: Vec<String>,
}

/// Constructs the T-dual. In strict mode a non-orientable vertical bundle is
/// an error; otherwise it is recorded in `notes`.
pub fn dualize(bundle: &AffineBundle, flux: &FluxDatum, strict: bool) -> Result<DualPair, TDualError> {
    match is_dualizable(bundle, flux)? {
        Dualizability::Obstructed(o) => return Err(TDualError::NotDualizable(o)),
        Dualizability::Dualizable(_) => {}
    }
    let w1 = bundle.lambda.w1();
    let mut notes = Vec::new();
    if !w1.is_zero() {
        if strict {
            return Err(TDualError::UnsupportedNonOrientableVertical(w1.bits));
        }
        notes.push("vertical bundle is non-orientable: the W3 term in the grading relation was not evaluated".into());
    }
    let dual_lambda = bundle.lambda.dual();
    let chat = CohClass { system: dual_lambda.clone(), ..flux.k.clone() };
    let dual_bundle = AffineBundle::new(dual_lambda, chat)?;
    let khat = CohClass { system: dual_bundle.lambda.dual(), ..bundle.chern.clone() };
    let dual_flux = FluxDatum { xi: flux.xi.add(&w1), k: khat, h3: flux.h3.clone() };
    let mut pair = DualPair {
        bundle: bundle.clone(),
        flux: flux.clone(),
        dual_bundle,
        dual_flux,
        report: RelationReport {
            monodromy_dual: false,
            xi_transport: false,
            chern_product_vanishes: false,
            flux_matches_dual_chern: false,
            dual_flux_matches_chern: false,
            w3_skipped: !w1.is_zero(),
        },
        notes,
    };
    pair.report = check_relations(&pair)?;
    Ok(pair)
}

fn same_class(entry: &PresentedSubquotient, a: &[BigInt], b: &[BigInt]) -> Result<bool, TDualError> {
    Ok(entry.coordinates(a)? == entry.coordinates(b)?)
}

/// Evaluates the exchange relations on a constructed pair.
pub fn check_relations(pair: &DualPair) -> Result<RelationReport, TDualError> {
    let lambda = &pair.bundle.lambda;
    let monodromy_dual = pair.dual_bundle.lambda == lambda.dual();
    let xi_transport = pair.dual_flux.xi == pair.flux.xi.add(&lambda.w1());

    // c ⌣ ĉ through the evaluation pairing Λ ⊗ Λ* → Z
    let chern_product_vanishes = if monodromy_dual {
        let base_dim = lambda.base.dimension();
        if base_dim < 4 {
            true
        } else {
            let lm = CochainModel::new(lambda)?;
            let dm = CochainModel::new(&pair.dual_bundle.lambda)?;
            let trivial = cohomology(&LocalSystem::trivial(lambda.base.clone(), 1))?;
            let rep = lm.cup(
                &dm,
                &trivial.model,
                &Pairing::duality(lambda.rank),
                &pair.bundle.chern.representative,
                2,
                &pair.dual_bundle.chern.representative,
                2,
            );
            trivial.groups[4].is_zero_class(&rep)?
        }
    } else {
        false
    };

    let flux_matches_dual_chern = pair.dual_bundle.chern.system == pair.flux.k.system
        && same_class(
            &einf21(&pair.bundle)?.entry,
            &pair.flux.k.representative,
            &pair.dual_bundle.chern.representative,
        )?;
    let dual_flux_matches_chern = pair.dual_flux.k.system == pair.bundle.chern.system
        && same_class(
            &einf21(&pair.dual_bundle)?.entry,
            &pair.dual_flux.k.representative,
            &pair.bundle.chern.representative,
        )?;

    Ok(RelationReport {
        monodromy_dual,
        xi_transport,
        chern_product_vanishes,
        flux_matches_dual_chern,
        dual_flux_matches_chern,
        w3_skipped: !lambda.w1().is_zero(),
    })
}

/// `dualize ∘ dualize` returns the input data.
pub fn involution_check(bundle: &AffineBundle, flux: &FluxDatum) -> Result<bool, TDualError> {
    let once = dualize(bundle, flux, false)?;
    let twice = dualize(&once.dual_bundle, &once.dual_flux, false)?;
    Ok(twice.dual_bundle.lambda == bundle.lambda
        && twice.dual_bundle.chern.coordinates == bundle.chern.coordinates
        && twice.dual_flux.xi == flux.xi
        && twice.dual_flux.k.system == flux.k.system
        && twice.dual_flux.k.coordinates == flux.k.coordinates
        && twice.dual_flux.h3.coordinates == flux.h3.coordinates)
}

/// JSON view of a pair: coordinates only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSummary {
    pub chern: Vec<BigIntString>,
    pub flux_k: Vec<BigIntString>,
    pub flux_h3: Vec<BigIntString>,
    pub xi: Vec<bool>,
    pub dual_monodromy: Vec<Vec<Vec<BigIntString>>>,
    pub dual_chern: Vec<BigIntString>,
    pub dual_flux_k: Vec<BigIntString>,
    pub dual_flux_h3: Vec<BigIntString>,
    pub dual_xi: Vec<bool>,
    pub report: RelationReport,
    pub notes: Vec<String>,
}

/// Integer carried as its decimal string in JSON.
pub type BigIntString = String;

fn strs(v: &[BigInt]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

impl DualPair {
    pub fn summary(&self) -> PairSummary {
        PairSummary {
            chern: strs(&self.bundle.chern.coordinates),
            flux_k: strs(&self.flux.k.coordinates),
            flux_h3: strs(&self.flux.h3.coordinates),
            xi: self.flux.xi.bits.clone(),
            dual_monodromy: self
                .dual_bundle
                .lambda
                .monodromies
                .iter()
                .map(|m| (0..m.rows()).map(|r| strs(&m.row(r))).collect())
                .collect(),
            dual_chern: strs(&self.dual_bundle.chern.coordinates),
            dual_flux_k: strs(&self.dual_flux.k.coordinates),
            dual_flux_h3: strs(&self.dual_flux.h3.coordinates),
            dual_xi: self.dual_flux.xi.bits.clone(),
            report: self.report.clone(),
            notes: self.notes.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian::bigvec;
    use crate::localsys::BaseSpace;
    use crate::lsss::Family;

    fn family_pair(f: &Family, j: i64, k: i64) -> (AffineBundle, FluxDatum) {
        let b = f.bundle(j).unwrap();
        let h3 = vec![BigInt::zero(); cohomology(&LocalSystem::trivial(b.base().clone(), 1)).unwrap().group(3).num_generators()];
        let flux = FluxDatum::from_coordinates(&b, vec![false; b.base().num_generators()], &bigvec(&[k]), &h3).unwrap();
        (b, flux)
    }

    #[test]
    fn swap_on_torus_family() {
        let f = Family::UnipotentTorus { m: 2, n: 3 };
        let (b, flux) = family_pair(&f, 4, 6);
        let pair = dualize(&b, &flux, true).unwrap();
        assert_eq!(pair.dual_bundle.chern.coordinates, bigvec(&[6]));
        assert_eq!(pair.dual_flux.k.coordinates, bigvec(&[4]));
        assert!(pair.report.all_pass(), "{:?}", pair.report);
        assert!(involution_check(&b, &flux).unwrap());
    }

    #[test]
    fn certificate_reduces_mod_j() {
        let f = Family::UnipotentTorus { m: 2, n: 3 };
        let (b, flux) = family_pair(&f, 4, 6);
        let Dualizability::Dualizable(cert) = is_dualizable(&b, &flux).unwrap() else { panic!() };
        assert_eq!(cert.einf21.to_string(), "Z/4");
        let (_, shifted) = family_pair(&f, 4, 10);
        let Dualizability::Dualizable(cert2) = is_dualizable(&b, &shifted).unwrap() else { panic!() };
        assert_eq!(cert.k_class, cert2.k_class);
        let (b0, f0) = family_pair(&f, 0, 7);
        let Dualizability::Dualizable(c0) = is_dualizable(&b0, &f0).unwrap() else { panic!() };
        assert_eq!(c0.einf21.to_string(), "Z");
    }

    #[test]
    fn trivial_data_is_self_dual() {
        let b = AffineBundle::trivial(BaseSpace::torus(2), 2).unwrap();
        let flux = FluxDatum::zero(&b).unwrap();
        let Dualizability::Dualizable(cert) = is_dualizable(&b, &flux).unwrap() else { panic!() };
        assert!(cert.k_class.iter().all(Zero::is_zero));
        let pair = dualize(&b, &flux, true).unwrap();
        assert_eq!(pair.dual_bundle, b);
        assert_eq!(pair.dual_flux, flux);
        assert!(pair.report.all_pass());
        assert!(involution_check(&b, &flux).unwrap());
    }

    #[test]
    fn corrupted_pair_fails_flux_relation() {
        let f = Family::UnipotentTorus { m: 2, n: 3 };
        let (b, flux) = family_pair(&f, 4, 6);
        let mut pair = dualize(&b, &flux, true).unwrap();
        let h = cohomology(&pair.dual_bundle.lambda).unwrap();
        pair.dual_bundle.chern = h.class_from_coordinates(2, &bigvec(&[7])).unwrap();
        let r = check_relations(&pair).unwrap();
        assert!(!r.flux_matches_dual_chern);
        assert!(!r.all_pass());
    }

    #[test]
    fn antipodal_family_swap() {
        let (b, flux) = family_pair(&Family::AntipodalMappingTorus, 3, 5);
        let pair = dualize(&b, &flux, true).unwrap();
        assert_eq!(pair.dual_bundle.chern.coordinates, bigvec(&[5]));
        assert_eq!(pair.dual_flux.k.coordinates, bigvec(&[3]));
        assert!(pair.report.all_pass());
        assert!(involution_check(&b, &flux).unwrap());
    }

    #[test]
    fn non_orientable_vertical_bundle() {
        let lam = LocalSystem::from_rows(BaseSpace::torus(2), &[vec![vec![-1]], vec![vec![1]]]).unwrap();
        let b = AffineBundle::from_chern_coordinates(lam, &bigvec(&[1])).unwrap();
        let zero = FluxDatum::zero(&b).unwrap();
        let flux = FluxDatum { xi: Z2Class { bits: vec![false, true] }, ..zero };
        assert!(matches!(dualize(&b, &flux, true), Err(TDualError::UnsupportedNonOrientableVertical(_))));
        let pair = dualize(&b, &flux, false).unwrap();
        assert_eq!(pair.dual_flux.xi.bits, vec![true, true]);
        assert!(pair.report.w3_skipped);
        assert!(!pair.notes.is_empty());
    }

    #[test]
    fn flux_over_wrong_system_is_rejected() {
        let b = Family::UnipotentTorus { m: 2, n: 3 }.bundle(1).unwrap();
        let mut flux = FluxDatum::zero(&b).unwrap();
        flux.k = b.chern.clone();
        assert!(matches!(is_dualizable(&b, &flux), Err(TDualError::CoefficientMismatch(_))));
    }
}
