//! The workbench configuration: a single JSON document. See
//! `docs/config.md` for the schema.

use std::path::Path;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use tdual_core::hori::SelfTestConfig;
use tdual_core::localsys::{BaseSpace, FiberModel, LocalSystem, LocalSystemError};
use tdual_core::lsss::{AffineBundle, Family};
use tdual_core::tdual::FluxDatum;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

impl ConfigError {
    pub fn field(field: &str, message: impl ToString) -> Self {
        ConfigError::Field { field: field.into(), message: message.to_string() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkbenchConfig {
    /// A catalog family, as an alternative to `base` + `monodromies`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseConfig>,
    /// One integer matrix per generator of the base's fundamental group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monodromies: Option<Vec<Vec<Vec<i64>>>>,
    /// Coordinates of the Chern class in `H²(M, Λ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chern: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<FluxConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ktheory: Option<KTheoryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelfTestConfig>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseConfig {
    Torus { dim: usize },
    MappingTorus { fiber: FiberConfig, phi: Vec<Vec<i64>> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FiberConfig {
    Point,
    Sphere(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<bool>>,
    #[serde(default)]
    pub k: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h3: Option<Vec<i64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KTheoryConfig {
    /// Pairs `[j, k]` to tabulate.
    #[serde(default)]
    pub pairs: Vec<[i64; 2]>,
    /// Box `[lo, hi]` for orbit enumeration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_box: Option<[i64; 2]>,
}

fn big(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}

fn local_system_field(e: LocalSystemError) -> ConfigError {
    match e {
        LocalSystemError::NonUnimodular { generator, .. } => {
            ConfigError::field(&format!("monodromies[{generator}]"), e)
        }
        LocalSystemError::NonCommuting { a, b } => {
            ConfigError::field(&format!("monodromies[{a}], monodromies[{b}]"), e)
        }
        LocalSystemError::InvalidBase(_) => ConfigError::field("base", e),
        _ => ConfigError::field("monodromies", e),
    }
}

impl WorkbenchConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.display().to_string(), source },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: "<config>".into(), source })
    }

    pub fn catalog_family(&self) -> Result<Option<Family>, ConfigError> {
        let Some(f) = &self.family else { return Ok(None) };
        let family = match f.id.as_str() {
            "unipotent-torus" => Family::UnipotentTorus { m: f.m.unwrap_or(2), n: f.n.unwrap_or(3) },
            "antipodal-mapping-torus" => {
                if f.m.is_some() || f.n.is_some() {
                    return Err(ConfigError::field("family", "antipodal-mapping-torus takes no parameters"));
                }
                Family::AntipodalMappingTorus
            }
            other => {
                return Err(ConfigError::field(
                    "family.id",
                    format!("unknown family {other:?}; expected unipotent-torus or antipodal-mapping-torus"),
                ))
            }
        };
        Ok(Some(family))
    }

    pub fn base_space(&self) -> Result<BaseSpace, ConfigError> {
        match &self.base {
            None => Err(ConfigError::field("base", "missing (or give `family`)")),
            Some(BaseConfig::Torus { dim }) => Ok(BaseSpace::torus(*dim)),
            Some(BaseConfig::MappingTorus { fiber, phi }) => {
                let fiber = match fiber {
                    FiberConfig::Point => FiberModel::point(),
                    FiberConfig::Sphere(0) => {
                        return Err(ConfigError::field("base.mapping-torus.fiber.sphere", "dimension must be positive"))
                    }
                    FiberConfig::Sphere(d) => FiberModel::sphere(*d),
                };
                let base = BaseSpace::MappingTorus { fiber, phi: phi.clone() };
                base.validate().map_err(|e| ConfigError::field("base.mapping-torus.phi", e))?;
                Ok(base)
            }
        }
    }

    /// The local system `Λ`.
    pub fn local_system(&self) -> Result<LocalSystem, ConfigError> {
        if let Some(f) = self.catalog_family()? {
            if self.base.is_some() || self.monodromies.is_some() {
                return Err(ConfigError::field("family", "give either `family` or `base` + `monodromies`, not both"));
            }
            return Ok(f.system());
        }
        let base = self.base_space()?;
        let mats = self.monodromies.as_ref().ok_or_else(|| ConfigError::field("monodromies", "missing"))?;
        LocalSystem::from_rows(base, mats).map_err(local_system_field)
    }

    pub fn bundle(&self) -> Result<AffineBundle, ConfigError> {
        let lambda = self.local_system()?;
        let chern = self.chern.as_ref().ok_or_else(|| ConfigError::field("chern", "missing"))?;
        AffineBundle::from_chern_coordinates(lambda, &big(chern)).map_err(|e| ConfigError::field("chern", e))
    }

    pub fn flux_datum(&self, bundle: &AffineBundle) -> Result<FluxDatum, ConfigError> {
        let flux = self.flux.as_ref().ok_or_else(|| ConfigError::field("flux", "missing"))?;
        let gens = bundle.base().num_generators();
        let xi = flux.xi.clone().unwrap_or_else(|| vec![false; gens]);
        let zero = FluxDatum::zero(bundle).map_err(|e| ConfigError::field("flux", e))?;
        let h3 = flux.h3.as_ref().map(|h| big(h)).unwrap_or_else(|| zero.h3.coordinates.clone());
        FluxDatum::from_coordinates(bundle, xi, &big(&flux.k), &h3).map_err(|e| ConfigError::field("flux", e))
    }
}
