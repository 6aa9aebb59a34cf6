//! Elementary LCA groups, their duals, Haar normalizations and the pairing.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{
    cis_turns, cis_turns_exact, int, parse_rational, rat, rational_to_string, to_f64, Rational, C64,
};
use num_traits::Zero;

/// A point of a group or of its dual. Exact coordinates stay exact under
/// addition; mixing with floats degrades to floats.
#[derive(Clone, Debug, PartialEq)]
pub enum Elem {
    Exact(Vec<Rational>),
    Float(Vec<f64>),
}

impl Elem {
    pub fn int(n: i64) -> Self {
        Elem::Exact(vec![int(n)])
    }

    pub fn rat(p: i64, q: i64) -> Self {
        Elem::Exact(vec![rat(p, q)])
    }

    pub fn float(x: f64) -> Self {
        Elem::Float(vec![x])
    }

    pub fn ints(v: &[i64]) -> Self {
        Elem::Exact(v.iter().map(|&n| int(n)).collect())
    }

    pub fn zero(dim: usize) -> Self {
        Elem::Exact(vec![Rational::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            Elem::Exact(v) => v.len(),
            Elem::Float(v) => v.len(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Elem::Exact(_))
    }

    pub fn exact(&self) -> Option<&[Rational]> {
        match self {
            Elem::Exact(v) => Some(v),
            Elem::Float(_) => None,
        }
    }

    /// The single integer coordinate, when this is an exact integer point of dimension one.
    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Elem::Exact(v) if v.len() == 1 && v[0].is_integer() => Some(*v[0].numer()),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Elem::Exact(v) => v.iter().map(to_f64).collect(),
            Elem::Float(v) => v.clone(),
        }
    }

    fn zip_with(
        &self,
        other: &Elem,
        fe: impl Fn(&Rational, &Rational) -> Rational,
        ff: impl Fn(f64, f64) -> f64,
    ) -> Elem {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in group arithmetic");
        match (self, other) {
            (Elem::Exact(a), Elem::Exact(b)) => {
                Elem::Exact(a.iter().zip(b).map(|(x, y)| fe(x, y)).collect())
            }
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                Elem::Float(a.iter().zip(&b).map(|(x, y)| ff(*x, *y)).collect())
            }
        }
    }

    pub fn add(&self, other: &Elem) -> Elem {
        self.zip_with(other, |x, y| x + y, |x, y| x + y)
    }

    pub fn sub(&self, other: &Elem) -> Elem {
        self.zip_with(other, |x, y| x - y, |x, y| x - y)
    }

    pub fn neg(&self) -> Elem {
        match self {
            Elem::Exact(v) => Elem::Exact(v.iter().map(|x| -x).collect()),
            Elem::Float(v) => Elem::Float(v.iter().map(|x| -x).collect()),
        }
    }

    pub fn scale(&self, n: i64) -> Elem {
        match self {
            Elem::Exact(v) => Elem::Exact(v.iter().map(|x| x * n).collect()),
            Elem::Float(v) => Elem::Float(v.iter().map(|x| x * n as f64).collect()),
        }
    }

    pub fn norm_sq_f64(&self) -> f64 {
        self.to_f64().iter().map(|x| x * x).sum()
    }
}

impl std::fmt::Display for Elem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = match self {
            Elem::Exact(v) => v.iter().map(rational_to_string).collect(),
            Elem::Float(v) => v.iter().map(|x| format!("{x}")).collect(),
        };
        if parts.len() == 1 {
            write!(f, "{}", parts[0])
        } else {
            write!(f, "({})", parts.join(", "))
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoordDoc {
    Text(String),
    Num(f64),
}

impl Serialize for Elem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc: Vec<CoordDoc> = match self {
            Elem::Exact(v) => v.iter().map(|r| CoordDoc::Text(rational_to_string(r))).collect(),
            Elem::Float(v) => v.iter().map(|x| CoordDoc::Num(*x)).collect(),
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Elem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = Vec::<CoordDoc>::deserialize(d)?;
        if doc.iter().all(|c| matches!(c, CoordDoc::Text(_))) {
            let mut out = Vec::with_capacity(doc.len());
            for c in &doc {
                if let CoordDoc::Text(t) = c {
                    out.push(
                        parse_rational(t)
                            .ok_or_else(|| D::Error::custom(format!("bad rational {t:?}")))?,
                    );
                }
            }
            Ok(Elem::Exact(out))
        } else if doc.iter().all(|c| matches!(c, CoordDoc::Num(_))) {
            Ok(Elem::Float(
                doc.iter().map(|c| if let CoordDoc::Num(x) = c { *x } else { 0.0 }).collect(),
            ))
        } else {
            Err(D::Error::custom("a point mixes exact and floating coordinates"))
        }
    }
}

/// A concrete group carrying its Haar normalization. A cyclic group appears
/// once as the primal side (counting measure) and once as the dual side
/// (counting measure divided by the order).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Integers,
    Cyclic { modulus: i64, dual: bool },
    Circle,
    Real { dim: usize },
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Real { dim } => *dim,
            _ => 1,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Space::Integers | Space::Cyclic { .. })
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, Space::Circle | Space::Cyclic { .. })
    }

    /// Haar mass of a single point on discrete spaces.
    pub fn point_weight(&self) -> Rational {
        match self {
            Space::Cyclic { modulus, dual: true } => rat(1, *modulus),
            _ => int(1),
        }
    }

    pub fn total_measure(&self) -> Option<Rational> {
        match self {
            Space::Cyclic { modulus, dual } => Some(if *dual { int(1) } else { int(*modulus) }),
            Space::Circle => Some(int(1)),
            _ => None,
        }
    }

    /// Checks that a point belongs to this space (dimension and integrality).
    pub fn validate(&self, x: &Elem) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::VariantMismatch(format!(
                "point {x} has dimension {}, space {self:?} has dimension {}",
                x.dim(),
                self.dim()
            )));
        }
        if self.is_discrete() {
            let ok = match x {
                Elem::Exact(v) => v.iter().all(|r| r.is_integer()),
                Elem::Float(v) => v.iter().all(|f| f.fract() == 0.0),
            };
            if !ok {
                return Err(Error::VariantMismatch(format!(
                    "point {x} is not an element of the discrete space {self:?}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical representative: residues in [0, N) on cyclic groups, [0, 1) on the circle.
    pub fn reduce(&self, x: &Elem) -> Elem {
        let period = match self {
            Space::Cyclic { modulus, .. } => *modulus,
            Space::Circle => 1,
            _ => return x.clone(),
        };
        match x {
            Elem::Exact(v) => Elem::Exact(
                v.iter()
                    .map(|r| {
                        let p = int(period);
                        r - (r / p).floor() * p
                    })
                    .collect(),
            ),
            Elem::Float(v) => {
                Elem::Float(v.iter().map(|f| f.rem_euclid(period as f64)).collect())
            }
        }
    }

    pub fn same_point(&self, a: &Elem, b: &Elem) -> bool {
        match (self.reduce(a), self.reduce(b)) {
            (Elem::Exact(x), Elem::Exact(y)) => x == y,
            (p, q) => {
                let (p, q) = (p.to_f64(), q.to_f64());
                p.iter().zip(&q).all(|(u, v)| {
                    let d = (u - v).abs();
                    match self {
                        Space::Circle => d.min(1.0 - d) < 1e-12,
                        _ => d < 1e-12,
                    }
                })
            }
        }
    }
}

/// The four elementary groups a lattice chain can live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    FiniteCyclic { modulus: i64 },
    Integers,
    Torus,
    Euclidean { dim: usize },
}

impl GroupSpec {
    pub fn finite_cyclic(modulus: i64) -> Result<Self> {
        if modulus < 1 {
            return Err(Error::Lattice(format!("cyclic group order must be positive, got {modulus}")));
        }
        Ok(GroupSpec::FiniteCyclic { modulus })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Lattice("Euclidean dimension must be at least 1".into()));
        }
        Ok(GroupSpec::Euclidean { dim })
    }

    pub fn primal(&self) -> Space {
        match *self {
            GroupSpec::FiniteCyclic { modulus } => Space::Cyclic { modulus, dual: false },
            GroupSpec::Integers => Space::Integers,
            GroupSpec::Torus => Space::Circle,
            GroupSpec::Euclidean { dim } => Space::Real { dim },
        }
    }

    pub fn dual(&self) -> Space {
        match *self {
            GroupSpec::FiniteCyclic { modulus } => Space::Cyclic { modulus, dual: true },
            GroupSpec::Integers => Space::Circle,
            GroupSpec::Torus => Space::Integers,
            GroupSpec::Euclidean { dim } => Space::Real { dim },
        }
    }

    pub fn dim(&self) -> usize {
        self.primal().dim()
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            GroupSpec::FiniteCyclic { .. } => "finite_cyclic",
            GroupSpec::Integers => "integers",
            GroupSpec::Torus => "torus",
            GroupSpec::Euclidean { .. } => "euclidean",
        }
    }

    /// The character value (x, gamma) for x in the group and gamma in its dual.
    pub fn pairing(&self, x: &Elem, gamma: &Elem) -> Result<C64> {
        self.primal().validate(x)?;
        self.dual().validate(gamma)?;
        Ok(self.pairing_unchecked(x, gamma))
    }

    /// Pairing without validation, for hot loops over points already known to be valid.
    pub fn pairing_unchecked(&self, x: &Elem, gamma: &Elem) -> C64 {
        let scale = match self {
            GroupSpec::FiniteCyclic { modulus } => *modulus,
            _ => 1,
        };
        match (x, gamma) {
            (Elem::Exact(a), Elem::Exact(b)) => {
                let mut t = Rational::zero();
                for (u, v) in a.iter().zip(b) {
                    t += u * v;
                }
                cis_turns_exact(&(t / scale))
            }
            _ => {
                let (a, b) = (x.to_f64(), gamma.to_f64());
                // reduce each product separately to keep the phase small
                let t: f64 = a.iter().zip(&b).map(|(u, v)| (u * v).rem_euclid(scale as f64)).sum();
                cis_turns(t / scale as f64)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GroupDoc {
    variant: String,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
}

impl Serialize for GroupSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut params = serde_json::Map::new();
        match self {
            GroupSpec::FiniteCyclic { modulus } => {
                params.insert("modulus".into(), (*modulus).into());
            }
            GroupSpec::Euclidean { dim } => {
                params.insert("dimension".into(), (*dim).into());
            }
            _ => {}
        }
        GroupDoc { variant: self.variant_name().into(), params }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = GroupDoc::deserialize(d)?;
        let get = |key: &str| -> std::result::Result<i64, D::Error> {
            doc.params
                .get(key)
                .and_then(|v| v.as_i64())
                .ok_or_else(|| D::Error::custom(format!("params.{key}: expected an integer")))
        };
        match doc.variant.as_str() {
            "finite_cyclic" | "cyclic" => {
                GroupSpec::finite_cyclic(get("modulus")?).map_err(D::Error::custom)
            }
            "integers" => Ok(GroupSpec::Integers),
            "torus" => Ok(GroupSpec::Torus),
            "euclidean" => {
                let s = get("dimension")?;
                if s < 1 {
                    return Err(D::Error::custom("params.dimension: must be at least 1"));
                }
                Ok(GroupSpec::Euclidean { dim: s as usize })
            }
            other => Err(D::Error::custom(format!(
                "variant: unknown group {other:?} (expected finite_cyclic, integers, torus or euclidean)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn pairing_values() {
        let z = GroupSpec::Integers;
        assert_eq!(z.pairing(&Elem::int(16), &Elem::rat(1, 32)).unwrap(), C64::new(-1.0, 0.0));
        let c8 = GroupSpec::FiniteCyclic { modulus: 8 };
        assert_eq!(c8.pairing(&Elem::int(2), &Elem::int(1)).unwrap(), C64::new(0.0, 1.0));
        let t = GroupSpec::Torus;
        assert_eq!(t.pairing(&Elem::rat(1, 4), &Elem::int(3)).unwrap(), C64::new(0.0, -1.0));
        let r2 = GroupSpec::Euclidean { dim: 2 };
        let v = r2.pairing(&Elem::Float(vec![0.5, 0.25]), &Elem::Float(vec![1.0, 2.0])).unwrap();
        assert!(close(v, C64::new(1.0, 0.0)));
    }

    #[test]
    fn pairing_rejects_wrong_variant() {
        let z = GroupSpec::Integers;
        assert!(matches!(z.pairing(&Elem::rat(1, 2), &Elem::rat(1, 4)), Err(Error::VariantMismatch(_))));
        let r2 = GroupSpec::Euclidean { dim: 2 };
        assert!(r2.pairing(&Elem::float(0.5), &Elem::float(0.5)).is_err());
    }

    #[test]
    fn haar_normalizations() {
        let c = GroupSpec::FiniteCyclic { modulus: 8 };
        assert_eq!(c.primal().point_weight(), int(1));
        assert_eq!(c.dual().point_weight(), rat(1, 8));
        assert_eq!(c.dual().total_measure(), Some(int(1)));
        assert_eq!(GroupSpec::Torus.primal().total_measure(), Some(int(1)));
        assert_eq!(GroupSpec::Integers.primal().total_measure(), None);
    }

    #[test]
    fn reduce_and_serde() {
        let s = Space::Cyclic { modulus: 8, dual: true };
        assert_eq!(s.reduce(&Elem::int(-3)), Elem::int(5));
        assert_eq!(Space::Circle.reduce(&Elem::rat(5, 4)), Elem::rat(1, 4));
        let e = Elem::Exact(vec![rat(1, 32), int(-2)]);
        let j = serde_json::to_string(&e).unwrap();
        assert_eq!(j, r#"["1/32","-2"]"#);
        assert_eq!(serde_json::from_str::<Elem>(&j).unwrap(), e);
        let g: GroupSpec =
            serde_json::from_str(r#"{"variant":"finite_cyclic","params":{"modulus":8}}"#).unwrap();
        assert_eq!(g, GroupSpec::FiniteCyclic { modulus: 8 });
        let back: GroupSpec = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
