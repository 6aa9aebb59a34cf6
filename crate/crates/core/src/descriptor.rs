//! JSON system descriptors and the serialized system artifact.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::charfun::{instantiate_example, rational_param, OmegaChain, OmegaExample};
use crate::error::{Error, Result};
use crate::filters::{FilterDoc, PeriodicFilter, DEFAULT_SEED};
use crate::frame::{Family, FrameSystem, GenId, SystemLevel};
use crate::group::{GroupSpec, Space};
use crate::lattice::{ChainDoc, Domain, LatticeChain};
use crate::numeric::{is_power_of_two, parse_rational, Rational};

pub const ARTIFACT_FORMAT: &str = "tightframe-system/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharMode {
    Proper,
    Shannon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Box,
    Ball,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDescriptor {
    Bspline {
        order: u32,
    },
    Charfun {
        mode: CharMode,
        #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
        l: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape: Option<Shape>,
    },
}

/// A seed given as a JSON number or as a hex string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedValue {
    Number(u64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDescriptor {
    pub group: GroupSpec,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(rename = "M_seq", default, skip_serializing_if = "Option::is_none")]
    pub m_seq: Option<Vec<i64>>,
    #[serde(rename = "M_table", default, skip_serializing_if = "Option::is_none")]
    pub m_table: Option<Vec<Vec<i64>>>,
    pub family: FamilyDescriptor,
    #[serde(default)]
    pub k0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedValue>,
    /// Default path of the system artifact written by `construct`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// Parses "0x5EED", "5eed" or a decimal JSON number.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    let digits = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    u64::from_str_radix(digits, 16).map_err(|_| Error::Input(format!("seed: {text:?} is not a hexadecimal integer")))
}

pub fn format_seed(seed: u64) -> String {
    format!("0x{seed:X}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn from_json_with_path<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Input(format!("{path}: {}", e.into_inner()))
    })
}

pub fn parse_descriptor(text: &str) -> Result<SystemDescriptor> {
    from_json_with_path(text)
}

fn forbid(name: &str, present: bool, group: &GroupSpec) -> Result<()> {
    if present {
        return Err(Error::Input(format!("{name}: not a parameter of the {} chain", group.variant_name())));
    }
    Ok(())
}

fn int_list(v: &Value, field: &str) -> Result<Vec<i64>> {
    serde_json::from_value(v.clone()).map_err(|_| Error::Input(format!("{field}: expected a list of integers")))
}

fn rational_value(v: &Value, field: &str) -> Result<Rational> {
    match v {
        Value::Number(n) => rational_param(n.as_f64().ok_or_else(|| Error::Input(format!("{field}: not a number")))?)
            .map_err(|e| Error::Input(format!("{field}: {e}"))),
        Value::String(s) => parse_rational(s).ok_or_else(|| Error::Input(format!("{field}: {s:?} is not a rational p/q"))),
        _ => Err(Error::Input(format!("{field}: expected a number or a \"p/q\" string"))),
    }
}

impl SystemDescriptor {
    pub fn seed_value(&self) -> Result<u64> {
        match &self.seed {
            None => Ok(DEFAULT_SEED),
            Some(SeedValue::Number(n)) => Ok(*n),
            Some(SeedValue::Text(t)) => parse_seed(t),
        }
    }

    pub fn chain(&self) -> Result<LatticeChain> {
        let g = self.group;
        match g {
            GroupSpec::Integers => {
                forbid("M_seq", self.m_seq.is_some(), &g)?;
                forbid("M_table", self.m_table.is_some(), &g)?;
                let m = self.m.ok_or_else(|| Error::Input("M: required for the integers".into()))?;
                LatticeChain::dyadic_integers(m)
            }
            GroupSpec::FiniteCyclic { modulus } => {
                forbid("M_seq", self.m_seq.is_some(), &g)?;
                forbid("M_table", self.m_table.is_some(), &g)?;
                if !is_power_of_two(modulus) {
                    return Err(Error::Lattice(format!("cyclic chains need a power-of-two order, got {modulus}")));
                }
                let m = modulus.trailing_zeros();
                if let Some(given) = self.m {
                    if given != m {
                        return Err(Error::Input(format!("M: {given} disagrees with the modulus 2^{m}")));
                    }
                }
                LatticeChain::dyadic_cyclic(m)
            }
            GroupSpec::Torus => {
                forbid("M", self.m.is_some(), &g)?;
                forbid("M_table", self.m_table.is_some(), &g)?;
                let seq = self.m_seq.as_ref().ok_or_else(|| Error::Input("M_seq: required for the torus".into()))?;
                LatticeChain::torus_sequence(seq)
            }
            GroupSpec::Euclidean { dim } => {
                forbid("M", self.m.is_some(), &g)?;
                forbid("M_seq", self.m_seq.is_some(), &g)?;
                let table =
                    self.m_table.as_ref().ok_or_else(|| Error::Input("M_table: required for Euclidean space".into()))?;
                if table.len() != dim {
                    return Err(Error::Input(format!("M_table: {} rows for dimension {dim}", table.len())));
                }
                LatticeChain::euclidean_diagonal(table)
            }
        }
    }

    pub fn family(&self, chain: &LatticeChain) -> Result<Family> {
        match &self.family {
            FamilyDescriptor::Bspline { order } => Ok(Family::BSpline { order: *order }),
            FamilyDescriptor::Charfun { mode: CharMode::Shannon, l, .. } => {
                if l.is_some() {
                    return Err(Error::Input("family.charfun.L: not used in shannon mode".into()));
                }
                Ok(Family::CharFun { omega: OmegaChain::shannon(chain)?, example: None })
            }
            FamilyDescriptor::Charfun { mode: CharMode::Proper, l, shape } => {
                let l = l.as_ref().ok_or_else(|| Error::Input("family.charfun.L: required in proper mode".into()))?;
                let example = match (chain.group, shape) {
                    (GroupSpec::FiniteCyclic { .. }, None) => OmegaExample::Cyclic(int_list(l, "family.charfun.L")?),
                    (GroupSpec::Torus, None) => OmegaExample::Torus(int_list(l, "family.charfun.L")?),
                    (GroupSpec::Euclidean { .. }, None | Some(Shape::Box)) => {
                        let rows = l
                            .as_array()
                            .ok_or_else(|| Error::Input("family.charfun.L: expected one row per axis".into()))?;
                        let mut table = Vec::new();
                        for (r, row) in rows.iter().enumerate() {
                            let row = row
                                .as_array()
                                .ok_or_else(|| Error::Input(format!("family.charfun.L[{r}]: expected a list")))?;
                            table.push(
                                row.iter()
                                    .enumerate()
                                    .map(|(k, v)| rational_value(v, &format!("family.charfun.L[{r}][{k}]")))
                                    .collect::<Result<Vec<_>>>()?,
                            );
                        }
                        OmegaExample::Boxes(table)
                    }
                    (GroupSpec::Euclidean { .. }, Some(Shape::Ball)) => {
                        let row =
                            l.as_array().ok_or_else(|| Error::Input("family.charfun.L: expected a list".into()))?;
                        OmegaExample::Balls(
                            row.iter()
                                .enumerate()
                                .map(|(k, v)| rational_value(v, &format!("family.charfun.L[{k}]")))
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    (g, Some(_)) => {
                        return Err(Error::Input(format!(
                            "family.charfun.shape: only Euclidean systems take a shape, not {}",
                            g.variant_name()
                        )))
                    }
                    (GroupSpec::Integers, None) => {
                        return Err(Error::Unsupported(
                            "characteristic-function generators are defined on Z_N, the torus and R^s".into(),
                        ))
                    }
                };
                let omega = instantiate_example(chain, &example)?;
                Ok(Family::CharFun { omega, example: Some(example) })
            }
        }
    }

    pub fn build(&self) -> Result<FrameSystem> {
        let chain = self.chain()?;
        let family = self.family(&chain)?;
        let k1 = self.k1.unwrap_or(chain.k_max());
        FrameSystem::build(chain, family, self.k0, k1)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDoc {
    Bspline { order: u32 },
    Charfun { mode: CharMode, omega: Vec<Domain> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelArtifact {
    pub k: usize,
    pub d: usize,
    pub rho: usize,
    pub h: FilterDoc,
    pub g: Vec<FilterDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSummary {
    pub name: String,
    pub k: usize,
    pub m: usize,
    /// First and last index of the time-domain support, where the generator has one.
    #[serde(default)]
    pub support: Option<[i64; 2]>,
}

/// Serialized system. The filters stored here are authoritative when the artifact is loaded.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemArtifact {
    pub format: String,
    pub descriptor_sha256: String,
    pub seed: String,
    pub descriptor: Value,
    pub chain: ChainDoc,
    pub family: FamilyDoc,
    pub family_label: String,
    pub k0: usize,
    pub k1: usize,
    pub levels: Vec<LevelArtifact>,
    pub generators: Vec<GeneratorSummary>,
}

/// Time-domain support of a generator on Z or Z_N.
pub fn generator_support(system: &FrameSystem, id: GenId) -> Option<[i64; 2]> {
    let seq = system.time_generator(id).ok()?;
    let mut seq = (*seq).clone();
    for v in seq.values.iter_mut() {
        if v.norm() < 1e-14 {
            *v = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    seq.support().map(|(a, b)| [a, b])
}

impl SystemArtifact {
    pub fn from_system(system: &FrameSystem, descriptor: &SystemDescriptor, descriptor_sha256: &str) -> Result<Self> {
        let family = match &system.family {
            Family::BSpline { order } => FamilyDoc::Bspline { order: *order },
            Family::CharFun { omega, .. } => FamilyDoc::Charfun {
                mode: if omega.shannon { CharMode::Shannon } else { CharMode::Proper },
                omega: omega.domains.clone(),
            },
        };
        let levels = system
            .levels
            .iter()
            .map(|lv| {
                Ok(LevelArtifact {
                    k: lv.k,
                    d: system.chain.d(lv.k)?,
                    rho: lv.g.len(),
                    h: lv.h.to_doc(),
                    g: lv.g.iter().map(|g| g.to_doc()).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let generators = system
            .generator_ids()
            .into_iter()
            .map(|id| GeneratorSummary { name: id.to_string(), k: id.k, m: id.m, support: generator_support(system, id) })
            .collect();
        Ok(SystemArtifact {
            format: ARTIFACT_FORMAT.into(),
            descriptor_sha256: descriptor_sha256.into(),
            seed: format_seed(descriptor.seed_value()?),
            descriptor: serde_json::to_value(descriptor).map_err(|e| Error::Input(e.to_string()))?,
            chain: system.chain.to_doc(),
            family,
            family_label: system.family.label(),
            k0: system.k0,
            k1: system.k1,
            levels,
            generators,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes") + "\n"
    }

    pub fn parse(text: &str) -> Result<Self> {
        let a: SystemArtifact = from_json_with_path(text)?;
        if a.format != ARTIFACT_FORMAT {
            return Err(Error::Input(format!("format: expected {ARTIFACT_FORMAT:?}, got {:?}", a.format)));
        }
        Ok(a)
    }

    pub fn seed_value(&self) -> Result<u64> {
        parse_seed(&self.seed)
    }

    pub fn to_system(&self) -> Result<FrameSystem> {
        let chain = LatticeChain::from_doc(&self.chain)?;
        let family = match &self.family {
            FamilyDoc::Bspline { order } => Family::BSpline { order: *order },
            FamilyDoc::Charfun { mode, omega } => {
                if omega.len() != chain.levels.len() {
                    return Err(Error::Input("family.omega: one set per chain level is required".into()));
                }
                let space: Space = chain.dual();
                let oc = OmegaChain {
                    space,
                    exhaustion: omega.last().cloned().expect("non-empty"),
                    domains: omega.clone(),
                    shannon: *mode == CharMode::Shannon,
                };
                Family::CharFun { omega: oc, example: None }
            }
        };
        let mut levels = Vec::new();
        for (i, lv) in self.levels.iter().enumerate() {
            let h = PeriodicFilter::from_doc(&chain, &lv.h)?;
            let g = lv.g.iter().map(|d| PeriodicFilter::from_doc(&chain, d)).collect::<Result<Vec<_>>>()?;
            if lv.rho != g.len() {
                return Err(Error::Input(format!("levels[{i}].rho: {} but {} filters are listed", lv.rho, g.len())));
            }
            levels.push(SystemLevel { k: lv.k, h, g });
        }
        FrameSystem::with_levels(chain, family, self.k0, self.k1, levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str) -> Result<FrameSystem> {
        parse_descriptor(text)?.build()
    }

    #[test]
    fn family_counts() {
        let sys = build(r#"{"group":{"variant":"integers"},"M":10,"family":{"bspline":{"order":2}},"k0":0}"#).unwrap();
        assert_eq!(sys.generator_ids().len(), 21);
        let sys = build(r#"{"group":{"variant":"cyclic","params":{"modulus":8}},"family":{"charfun":{"mode":"shannon"}}}"#)
            .unwrap();
        assert_eq!(sys.generator_ids().len(), 4);
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let e = parse_descriptor(r#"{"group":{"variant":"integers"},"M":"ten","family":{"bspline":{"order":2}}}"#)
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("M"), "{e}");
        let e = parse_descriptor(r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"ordr":2}}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("family"), "{e}");
        assert_eq!(parse_descriptor("{not json").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn precondition_errors_exit_three() {
        let e = build(r#"{"group":{"variant":"torus"},"M_seq":[2,3,2],"family":{"bspline":{"order":2}}}"#).unwrap_err();
        assert!(matches!(e, Error::Precondition { .. }));
        assert_eq!(e.exit_code(), 3);
        let e = build(r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"order":3}}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seed("0x5EED").unwrap(), 0x5EED);
        assert_eq!(parse_seed("ff").unwrap(), 255);
        assert!(parse_seed("xyz").is_err());
        let d = parse_descriptor(r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"order":1}},"seed":"0x10"}"#)
            .unwrap();
        assert_eq!(d.seed_value().unwrap(), 16);
    }

    #[test]
    fn artifact_round_trip() {
        for text in [
            r#"{"group":{"variant":"integers"},"M":3,"family":{"bspline":{"order":2}}}"#,
            r#"{"group":{"variant":"cyclic","params":{"modulus":8}},"family":{"charfun":{"mode":"proper","L":[0,1,2,7]}},"k0":0}"#,
            r#"{"group":{"variant":"torus"},"M_seq":[2,3,2],"family":{"charfun":{"mode":"proper","L":[0,2,5]}}}"#,
            r#"{"group":{"variant":"euclidean","params":{"dimension":2}},"M_table":[[2,2],[2,2]],"family":{"charfun":{"mode":"proper","L":[["1/4","1/2"],["1/4",1]],"shape":"box"}}}"#,
        ] {
            let d = parse_descriptor(text).unwrap();
            let sys = d.build().unwrap();
            let art = SystemArtifact::from_system(&sys, &d, &sha256_hex(text.as_bytes())).unwrap();
            let json = art.to_json();
            let back = SystemArtifact::parse(&json).unwrap();
            assert_eq!(back.to_json(), json);
            let sys2 = back.to_system().unwrap();
            assert_eq!(sys2.generator_ids(), sys.generator_ids());
            for k in sys.k0..sys.k1 {
                assert!(sys2.uep_residual(k).unwrap() <= 1e-12);
            }
        }
    }
}
