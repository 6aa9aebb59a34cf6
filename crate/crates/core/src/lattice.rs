//! Diagonal lattices, domains with Haar measures, and nested lattice chains.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Elem, GroupSpec, Space};
use crate::numeric::{int, rat, to_f64, Rational};

/// Upper bound on points produced by a single enumeration.
pub const MAX_ENUMERATION: usize = 1 << 22;

pub(crate) mod rat_serde {
    use crate::numeric::{parse_rational, rational_to_string, Rational};
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let t = String::deserialize(d)?;
        parse_rational(&t).ok_or_else(|| D::Error::custom(format!("bad rational {t:?}")))
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for r in v {
                seq.serialize_element(&rational_to_string(r))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|t| parse_rational(t).ok_or_else(|| D::Error::custom(format!("bad rational {t:?}"))))
                .collect()
        }
    }
}

/// A subset of a group or dual group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Integers lo..=hi.
    IntegerInterval { lo: i64, hi: i64 },
    /// Product of half-open intervals [lo, hi).
    HalfOpenBox {
        #[serde(with = "rat_serde::vec")]
        lo: Vec<Rational>,
        #[serde(with = "rat_serde::vec")]
        hi: Vec<Rational>,
    },
    /// Closed Euclidean ball centred at the origin.
    Ball {
        #[serde(with = "rat_serde")]
        radius: Rational,
        dim: usize,
    },
    FiniteSubset { points: Vec<Elem> },
    /// Union of shifted copies of a base domain.
    CosetUnion { base: Box<Domain>, shifts: Vec<Elem> },
    /// The whole space; bounded only on compact spaces.
    Whole,
}

fn cmp_le(a: &Elem, b: &[Rational], strict: bool, lower: bool) -> bool {
    // per-coordinate comparison helper for boxes
    match a {
        Elem::Exact(v) => v.iter().zip(b).all(|(x, y)| match (lower, strict) {
            (true, _) => x >= y,
            (false, true) => x < y,
            (false, false) => x <= y,
        }),
        Elem::Float(v) => v.iter().zip(b).all(|(x, y)| {
            let y = to_f64(y);
            match (lower, strict) {
                (true, _) => *x >= y,
                (false, true) => *x < y,
                (false, false) => *x <= y,
            }
        }),
    }
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    // V_s = V_{s-2} * 2 pi / s
    let mut v = if dim % 2 == 0 { 1.0 } else { 2.0 };
    let mut s = if dim % 2 == 0 { 2 } else { 3 };
    while s <= dim {
        v *= 2.0 * std::f64::consts::PI / s as f64;
        s += 2;
    }
    v * r.powi(dim as i32)
}

impl Domain {
    pub fn interval(lo: i64, hi: i64) -> Self {
        Domain::IntegerInterval { lo, hi }
    }

    pub fn half_open(lo: Vec<Rational>, hi: Vec<Rational>) -> Self {
        Domain::HalfOpenBox { lo, hi }
    }

    pub fn contains(&self, space: &Space, x: &Elem) -> bool {
        if x.dim() != space.dim() {
            return false;
        }
        let x = space.reduce(x);
        match self {
            Domain::IntegerInterval { lo, hi } => {
                let v = x.to_f64()[0];
                v.fract() == 0.0 && v >= *lo as f64 && v <= *hi as f64
            }
            Domain::HalfOpenBox { lo, hi } => {
                cmp_le(&x, lo, false, true) && cmp_le(&x, hi, true, false)
            }
            Domain::Ball { radius, .. } => match &x {
                Elem::Exact(v) => {
                    let mut s = Rational::zero();
                    for c in v {
                        s += c * c;
                    }
                    s <= radius * radius
                }
                Elem::Float(_) => x.norm_sq_f64() <= to_f64(radius).powi(2),
            },
            Domain::FiniteSubset { points } => points.iter().any(|p| space.same_point(p, &x)),
            Domain::CosetUnion { base, shifts } => {
                shifts.iter().any(|s| base.contains(space, &x.sub(s)))
            }
            Domain::Whole => true,
        }
    }

    /// Exact Haar measure where it is rational.
    pub fn exact_measure(&self, space: &Space) -> Option<Rational> {
        match self {
            Domain::IntegerInterval { lo, hi } => {
                Some(int((hi - lo + 1).max(0)) * space.point_weight())
            }
            Domain::HalfOpenBox { lo, hi } => {
                if space.is_discrete() {
                    return None;
                }
                let mut m = Rational::one();
                for (a, b) in lo.iter().zip(hi) {
                    m *= (b - a).max(Rational::zero());
                }
                Some(m)
            }
            Domain::Ball { .. } => None,
            Domain::FiniteSubset { points } => {
                let distinct = dedup_points(space, points.clone()).len();
                Some(int(distinct as i64) * space.point_weight())
            }
            Domain::CosetUnion { base, shifts } => {
                base.exact_measure(space).map(|m| m * int(shifts.len() as i64))
            }
            Domain::Whole => space.total_measure(),
        }
    }

    pub fn measure(&self, space: &Space) -> Result<f64> {
        if let Some(m) = self.exact_measure(space) {
            return Ok(to_f64(&m));
        }
        match self {
            Domain::Ball { radius, dim } => Ok(ball_volume(*dim, to_f64(radius))),
            Domain::CosetUnion { base, shifts } => Ok(base.measure(space)? * shifts.len() as f64),
            _ => Err(Error::Domain(format!("domain {self:?} has no finite measure in {space:?}"))),
        }
    }

    /// Closed per-axis bounds, when bounded.
    pub fn bounding_box(&self, space: &Space) -> Option<Vec<(Rational, Rational)>> {
        match self {
            Domain::IntegerInterval { lo, hi } => Some(vec![(int(*lo), int(*hi))]),
            Domain::HalfOpenBox { lo, hi } => {
                Some(lo.iter().cloned().zip(hi.iter().cloned()).collect())
            }
            Domain::Ball { radius, dim } => Some(vec![(-radius, *radius); *dim]),
            Domain::FiniteSubset { points } => {
                let ex: Vec<&[Rational]> = points.iter().map(|p| p.exact()).collect::<Option<_>>()?;
                let first = ex.first()?;
                let mut bb: Vec<(Rational, Rational)> = first.iter().map(|c| (*c, *c)).collect();
                for p in &ex {
                    for (b, c) in bb.iter_mut().zip(p.iter()) {
                        b.0 = b.0.min(*c);
                        b.1 = b.1.max(*c);
                    }
                }
                Some(bb)
            }
            Domain::CosetUnion { base, shifts } => {
                let base_bb = base.bounding_box(space)?;
                let mut out: Option<Vec<(Rational, Rational)>> = None;
                for s in shifts {
                    let s = s.exact()?;
                    let shifted: Vec<(Rational, Rational)> =
                        base_bb.iter().zip(s).map(|((a, b), c)| (a + c, b + c)).collect();
                    out = Some(match out {
                        None => shifted,
                        Some(o) => o
                            .iter()
                            .zip(&shifted)
                            .map(|((a, b), (c, d))| ((*a).min(*c), (*b).max(*d)))
                            .collect(),
                    });
                }
                out
            }
            Domain::Whole => match space {
                Space::Cyclic { modulus, .. } => Some(vec![(int(0), int(modulus - 1))]),
                Space::Circle => Some(vec![(int(0), int(1))]),
                _ => None,
            },
        }
    }

    /// All points of a finite domain in a discrete space, sorted.
    pub fn enumerate(&self, space: &Space) -> Result<Vec<Elem>> {
        if !space.is_discrete() {
            return Err(Error::Domain(format!("cannot enumerate a domain of the continuous space {space:?}")));
        }
        let unit = DiagLattice { space: *space, steps: vec![int(1); space.dim()] };
        unit.points_in(self)
    }

    /// Whether `self` is contained in `other`, decided exactly where possible.
    pub fn is_subset_of(&self, space: &Space, other: &Domain) -> Option<bool> {
        if space.is_discrete() {
            let pts = self.enumerate(space).ok()?;
            return Some(pts.iter().all(|p| other.contains(space, p)));
        }
        match (self, other) {
            (_, Domain::Whole) => Some(true),
            (Domain::HalfOpenBox { lo: a, hi: b }, Domain::HalfOpenBox { lo: c, hi: d }) => Some(
                a.iter().zip(b).zip(c.iter().zip(d)).all(|((a, b), (c, d))| a >= b || (a >= c && b <= d)),
            ),
            (Domain::Ball { radius, .. }, Domain::HalfOpenBox { lo, hi }) => {
                Some(lo.iter().zip(hi).all(|(l, h)| *l <= -radius && radius < h))
            }
            (Domain::Ball { radius: r1, .. }, Domain::Ball { radius: r2, .. }) => Some(r1 <= r2),
            _ => None,
        }
    }

    pub fn is_bounded(&self, space: &Space) -> bool {
        self.bounding_box(space).is_some()
    }
}

fn exact_key(x: &Elem) -> Vec<Rational> {
    match x {
        Elem::Exact(v) => v.clone(),
        Elem::Float(v) => v.iter().map(|f| crate::numeric::rational_from_f64(*f).unwrap_or_default()).collect(),
    }
}

fn dedup_points(space: &Space, points: Vec<Elem>) -> Vec<Elem> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in points {
        let r = space.reduce(&p);
        if seen.insert(exact_key(&r)) {
            out.push(r);
        }
    }
    out
}

/// Sort points by their exact coordinates.
pub fn sort_points(points: &mut [Elem]) {
    points.sort_by_key(exact_key);
}

/// A lattice spanned by step_r e_r, living in `space` (reduced on compact spaces).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagLattice {
    pub space: Space,
    pub steps: Vec<Rational>,
}

impl DiagLattice {
    pub fn new(space: Space, steps: Vec<Rational>) -> Result<Self> {
        if steps.len() != space.dim() {
            return Err(Error::Lattice(format!("{} steps for a space of dimension {}", steps.len(), space.dim())));
        }
        for s in &steps {
            if !s.is_positive() {
                return Err(Error::Lattice(format!("lattice step {s} must be positive")));
            }
            let ok = match space {
                Space::Integers => s.is_integer(),
                Space::Cyclic { modulus, .. } => s.is_integer() && modulus % s.numer() == 0,
                Space::Circle => *s.numer() == 1,
                Space::Real { .. } => true,
            };
            if !ok {
                return Err(Error::Lattice(format!("step {s} does not generate a lattice in {space:?}")));
            }
        }
        Ok(DiagLattice { space, steps })
    }

    pub fn contains(&self, x: &Elem) -> bool {
        if x.dim() != self.steps.len() {
            return false;
        }
        match self.space.reduce(x) {
            Elem::Exact(v) => v.iter().zip(&self.steps).all(|(c, s)| (c / s).is_integer()),
            Elem::Float(v) => v.iter().zip(&self.steps).all(|(c, s)| {
                let t = c / to_f64(s);
                (t - t.round()).abs() < 1e-9
            }),
        }
    }

    /// Haar measure of a fundamental domain.
    pub fn density(&self) -> Rational {
        let mut d = self.space.point_weight();
        for s in &self.steps {
            d *= s;
        }
        d
    }

    pub fn annihilator(&self, dual: Space) -> Result<DiagLattice> {
        let steps = self
            .steps
            .iter()
            .map(|s| match self.space {
                Space::Cyclic { modulus, .. } => int(modulus) / s,
                _ => s.recip(),
            })
            .collect();
        DiagLattice::new(dual, steps)
    }

    /// Lattice points inside a bounded window, sorted and reduced.
    pub fn points_in(&self, window: &Domain) -> Result<Vec<Elem>> {
        let bb = window
            .bounding_box(&self.space)
            .ok_or_else(|| Error::Domain(format!("unbounded window {window:?} in {:?}", self.space)))?;
        let mut axes: Vec<Vec<Rational>> = Vec::new();
        let mut total: usize = 1;
        for ((lo, hi), s) in bb.iter().zip(&self.steps) {
            let a = (lo / s).ceil().to_integer();
            let b = (hi / s).floor().to_integer();
            let n = if b >= a { (b - a + 1) as usize } else { 0 };
            total = total.saturating_mul(n);
            if total > MAX_ENUMERATION {
                return Err(Error::Resource(format!("window holds more than {MAX_ENUMERATION} lattice points")));
            }
            axes.push((a..=b).map(|j| s * j).collect());
        }
        let mut pts = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        if total > 0 {
            loop {
                let p = Elem::Exact(idx.iter().zip(&axes).map(|(i, ax)| ax[*i]).collect());
                if window.contains(&self.space, &p) {
                    pts.push(p);
                }
                // first axis varies fastest
                let mut r = 0;
                while r < idx.len() {
                    idx[r] += 1;
                    if idx[r] < axes[r].len() {
                        break;
                    }
                    idx[r] = 0;
                    r += 1;
                }
                if r == idx.len() {
                    break;
                }
            }
        }
        let mut pts = dedup_points(&self.space, pts);
        sort_points(&mut pts);
        Ok(pts)
    }
}

/// Which one-parameter family a chain belongs to, with its defining parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ChainKind {
    DyadicIntegers { m: u32 },
    DyadicCyclic { m: u32 },
    TorusSequence { m_seq: Vec<i64> },
    EuclideanDiagonal { m_table: Vec<Vec<i64>> },
}

impl ChainKind {
    pub fn variant_name(&self) -> &'static str {
        match self {
            ChainKind::DyadicIntegers { .. } => "dyadic_integers",
            ChainKind::DyadicCyclic { .. } => "dyadic_cyclic",
            ChainKind::TorusSequence { .. } => "torus_sequence",
            ChainKind::EuclideanDiagonal { .. } => "euclidean_diagonal",
        }
    }

    pub fn params_json(&self) -> serde_json::Value {
        match self {
            ChainKind::DyadicIntegers { m } | ChainKind::DyadicCyclic { m } => serde_json::json!({ "M": m }),
            ChainKind::TorusSequence { m_seq } => serde_json::json!({ "M_seq": m_seq }),
            ChainKind::EuclideanDiagonal { m_table } => serde_json::json!({ "M_table": m_table }),
        }
    }
}

/// One level k of a chain: the lattice, a fundamental domain Q_k, the
/// annihilator in the dual and its fundamental domain V_k.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub k: usize,
    pub lattice: DiagLattice,
    pub q: Domain,
    pub annihilator: DiagLattice,
    pub v: Domain,
    pub mu_q: Rational,
    pub mu_v: Rational,
}

/// Passage from level k to level k+1.
#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub k: usize,
    pub d: usize,
    /// Representatives of the annihilator at k modulo the annihilator at k+1; the first is 0.
    pub nu: Vec<Elem>,
    /// Representatives of the lattice at k+1 modulo the lattice at k; the first is 0.
    pub eta: Vec<Elem>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeChain {
    pub group: GroupSpec,
    pub kind: ChainKind,
    pub levels: Vec<Level>,
    pub refinements: Vec<Refinement>,
}

const MAX_DYADIC: u32 = 30;

fn pow2(e: u32) -> i64 {
    1i64 << e
}

impl LatticeChain {
    /// The dyadic chain on the integers: lattices 2^{M-k} Z, k = 0..=M.
    pub fn dyadic_integers(m: u32) -> Result<Self> {
        if m == 0 || m > MAX_DYADIC {
            return Err(Error::Lattice(format!("M must lie in 1..={MAX_DYADIC}, got {m}")));
        }
        let g = GroupSpec::Integers;
        let mut levels = Vec::new();
        let mut refinements = Vec::new();
        for k in 0..=m {
            let n = pow2(m - k);
            levels.push(Level {
                k: k as usize,
                lattice: DiagLattice::new(g.primal(), vec![int(n)])?,
                q: Domain::interval(0, n - 1),
                annihilator: DiagLattice::new(g.dual(), vec![rat(1, n)])?,
                v: Domain::half_open(vec![int(0)], vec![rat(1, n)]),
                mu_q: int(n),
                mu_v: rat(1, n),
            });
            if k < m {
                refinements.push(Refinement {
                    k: k as usize,
                    d: 2,
                    nu: vec![Elem::int(0), Elem::rat(1, n)],
                    eta: vec![Elem::int(0), Elem::int(n / 2)],
                });
            }
        }
        Ok(LatticeChain { group: g, kind: ChainKind::DyadicIntegers { m }, levels, refinements })
    }

    /// The dyadic chain on Z_{2^M}: lattices 2^{M-k} Z_{2^k}, k = 0..=M.
    pub fn dyadic_cyclic(m: u32) -> Result<Self> {
        if m == 0 || m > 24 {
            return Err(Error::Lattice(format!("M must lie in 1..=24, got {m}")));
        }
        let big = pow2(m);
        let g = GroupSpec::FiniteCyclic { modulus: big };
        let mut levels = Vec::new();
        let mut refinements = Vec::new();
        for k in 0..=m {
            let step = pow2(m - k);
            let vk = pow2(k);
            levels.push(Level {
                k: k as usize,
                lattice: DiagLattice::new(g.primal(), vec![int(step)])?,
                q: Domain::interval(0, step - 1),
                annihilator: DiagLattice::new(g.dual(), vec![int(vk)])?,
                v: Domain::interval(0, vk - 1),
                mu_q: int(step),
                mu_v: rat(vk, big),
            });
            if k < m {
                refinements.push(Refinement {
                    k: k as usize,
                    d: 2,
                    nu: vec![Elem::int(0), Elem::int(vk)],
                    eta: vec![Elem::int(0), Elem::int(step / 2)],
                });
            }
        }
        Ok(LatticeChain { group: g, kind: ChainKind::DyadicCyclic { m }, levels, refinements })
    }

    /// The chain on the torus with lattices (1/N_k) Z_{N_k}, N_k = M_0 ... M_k.
    pub fn torus_sequence(m_seq: &[i64]) -> Result<Self> {
        if m_seq.is_empty() {
            return Err(Error::Lattice("M_seq must be non-empty".into()));
        }
        if let Some(bad) = m_seq.iter().find(|&&x| x < 2) {
            return Err(Error::Lattice(format!("M_seq entries must be at least 2, got {bad}")));
        }
        if m_seq[0] % 2 != 0 {
            return Err(Error::Lattice(format!("M_seq[0] must be even, got {}", m_seq[0])));
        }
        let g = GroupSpec::Torus;
        let mut levels = Vec::new();
        let mut refinements = Vec::new();
        let mut n: i64 = 1;
        for (k, mk) in m_seq.iter().enumerate() {
            n = n
                .checked_mul(*mk)
                .filter(|v| *v <= 1 << 40)
                .ok_or_else(|| Error::Lattice("product of M_seq exceeds 2^40".into()))?;
            levels.push(Level {
                k,
                lattice: DiagLattice::new(g.primal(), vec![rat(1, n)])?,
                q: Domain::half_open(vec![int(0)], vec![rat(1, n)]),
                annihilator: DiagLattice::new(g.dual(), vec![int(n)])?,
                v: Domain::interval(-n / 2, n / 2 - 1),
                mu_q: rat(1, n),
                mu_v: int(n),
            });
            if k + 1 < m_seq.len() {
                let d = m_seq[k + 1];
                refinements.push(Refinement {
                    k,
                    d: d as usize,
                    nu: (0..d).map(|l| Elem::int(l * n)).collect(),
                    eta: (0..d).map(|l| Elem::rat(l, n * d)).collect(),
                });
            }
        }
        Ok(LatticeChain {
            group: g,
            kind: ChainKind::TorusSequence { m_seq: m_seq.to_vec() },
            levels,
            refinements,
        })
    }

    /// Diagonal chain on R^s; `m_table[r]` lists the factors M_{k,r} for axis r.
    pub fn euclidean_diagonal(m_table: &[Vec<i64>]) -> Result<Self> {
        let s = m_table.len();
        if s == 0 {
            return Err(Error::Lattice("M_table must have at least one row".into()));
        }
        let len = m_table[0].len();
        if len == 0 || m_table.iter().any(|row| row.len() != len) {
            return Err(Error::Lattice("M_table rows must be non-empty and of equal length".into()));
        }
        if let Some(bad) = m_table.iter().flatten().find(|&&x| x < 2) {
            return Err(Error::Lattice(format!("M_table entries must be at least 2, got {bad}")));
        }
        let g = GroupSpec::Euclidean { dim: s };
        let mut n = vec![1i64; s];
        let mut levels = Vec::new();
        let mut refinements = Vec::new();
        for k in 0..len {
            for r in 0..s {
                n[r] = n[r]
                    .checked_mul(m_table[r][k])
                    .filter(|v| *v <= 1 << 40)
                    .ok_or_else(|| Error::Lattice("products of M_table exceed 2^40".into()))?;
            }
            let mut mu_v = Rational::one();
            for nr in &n {
                mu_v *= int(*nr);
            }
            levels.push(Level {
                k,
                lattice: DiagLattice::new(g.primal(), n.iter().map(|x| rat(1, *x)).collect())?,
                q: Domain::half_open(vec![int(0); s], n.iter().map(|x| rat(1, *x)).collect()),
                annihilator: DiagLattice::new(g.dual(), n.iter().map(|x| int(*x)).collect())?,
                v: Domain::half_open(n.iter().map(|x| rat(-x, 2)).collect(), n.iter().map(|x| rat(*x, 2)).collect()),
                mu_q: mu_v.recip(),
                mu_v,
            });
            if k + 1 < len {
                let factors: Vec<i64> = (0..s).map(|r| m_table[r][k + 1]).collect();
                let digits = digit_product(&factors);
                refinements.push(Refinement {
                    k,
                    d: digits.len(),
                    nu: digits
                        .iter()
                        .map(|j| Elem::Exact(j.iter().zip(&n).map(|(a, b)| int(a * b)).collect()))
                        .collect(),
                    eta: digits
                        .iter()
                        .map(|j| {
                            Elem::Exact(j.iter().zip(&n).zip(&factors).map(|((a, b), f)| rat(*a, b * f)).collect())
                        })
                        .collect(),
                });
            }
        }
        Ok(LatticeChain {
            group: g,
            kind: ChainKind::EuclideanDiagonal { m_table: m_table.to_vec() },
            levels,
            refinements,
        })
    }

    pub fn from_kind(kind: &ChainKind) -> Result<Self> {
        match kind {
            ChainKind::DyadicIntegers { m } => Self::dyadic_integers(*m),
            ChainKind::DyadicCyclic { m } => Self::dyadic_cyclic(*m),
            ChainKind::TorusSequence { m_seq } => Self::torus_sequence(m_seq),
            ChainKind::EuclideanDiagonal { m_table } => Self::euclidean_diagonal(m_table),
        }
    }

    pub fn k_min(&self) -> usize {
        0
    }

    pub fn k_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> Result<&Level> {
        self.levels.get(k).ok_or(Error::Index { k, lo: 0, hi: self.k_max() })
    }

    /// Data for the step k -> k+1; requires k+1 in the index set.
    pub fn refinement(&self, k: usize) -> Result<&Refinement> {
        self.refinements.get(k).ok_or(Error::Index { k: k + 1, lo: 0, hi: self.k_max() })
    }

    pub fn d(&self, k: usize) -> Result<usize> {
        Ok(self.refinement(k)?.d)
    }

    /// The single nontrivial shift when the refinement has index 2.
    pub fn eta(&self, k: usize) -> Result<&Elem> {
        let r = self.refinement(k)?;
        if r.d != 2 {
            return Err(Error::precondition(
                "index-2 lattice refinement",
                format!("d_{k} = {} but a single shift needs d_k = 2", r.d),
            ));
        }
        Ok(&r.eta[1])
    }

    pub fn primal(&self) -> Space {
        self.group.primal()
    }

    pub fn dual(&self) -> Space {
        self.group.dual()
    }

    /// Checks the structural identities of the chain; returns a description of the first failure.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Lattice(m));
        for lv in &self.levels {
            if lv.mu_q * lv.mu_v != Rational::one() {
                return fail(format!("level {}: mu(Q) mu(V) = {}", lv.k, lv.mu_q * lv.mu_v));
            }
            if lv.lattice.density() * lv.annihilator.density() != Rational::one() {
                return fail(format!("level {}: lattice densities are not reciprocal", lv.k));
            }
            if lv.q.exact_measure(&self.primal()) != Some(lv.mu_q)
                || lv.v.exact_measure(&self.dual()) != Some(lv.mu_v)
            {
                return fail(format!("level {}: fundamental-domain measures disagree", lv.k));
            }
            if lv.lattice.annihilator(self.dual())? != lv.annihilator {
                return fail(format!("level {}: stored annihilator is wrong", lv.k));
            }
        }
        for rf in &self.refinements {
            let (a, b) = (&self.levels[rf.k], &self.levels[rf.k + 1]);
            for (s, t) in a.lattice.steps.iter().zip(&b.lattice.steps) {
                if !(s / t).is_integer() {
                    return fail(format!("level {}: lattice is not contained in the next one", rf.k));
                }
            }
            if a.mu_q / b.mu_q != int(rf.d as i64) {
                return fail(format!("level {}: measure ratio differs from d = {}", rf.k, rf.d));
            }
            let count = b.lattice.points_in(&a.q)?.len();
            if count != rf.d {
                return fail(format!("level {}: {} cosets enumerated, d = {}", rf.k, count, rf.d));
            }
            if rf.nu.len() != rf.d || rf.eta.len() != rf.d {
                return fail(format!("level {}: wrong number of coset representatives", rf.k));
            }
            for (i, x) in rf.nu.iter().enumerate() {
                if !a.annihilator.contains(x) {
                    return fail(format!("level {}: nu_{} is not in the annihilator", rf.k, i + 1));
                }
                for y in &rf.nu[..i] {
                    if b.annihilator.contains(&x.sub(y)) {
                        return fail(format!("level {}: repeated nu coset", rf.k));
                    }
                }
            }
            for (i, x) in rf.eta.iter().enumerate() {
                if !b.lattice.contains(x) {
                    return fail(format!("level {}: eta_{} is not in the finer lattice", rf.k, i + 1));
                }
                for y in &rf.eta[..i] {
                    if a.lattice.contains(&x.sub(y)) {
                        return fail(format!("level {}: repeated eta coset", rf.k));
                    }
                }
            }
            if rf.d == 2 {
                let p = self.group.pairing(&rf.eta[1], &rf.nu[1])?;
                if (p + 1.0).norm() > 1e-15 {
                    return fail(format!("level {}: (eta, nu) = {p}, expected -1", rf.k));
                }
            }
        }
        Ok(())
    }
}

/// All digit vectors j with 0 <= j_r < factors[r], first axis fastest.
fn digit_product(factors: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for f in factors.iter().rev() {
        let mut next = Vec::new();
        for j in 0..*f {
            for tail in &out {
                let mut v = vec![j];
                v.extend_from_slice(tail);
                next.push(v);
            }
        }
        out = next;
    }
    // reorder so the first coordinate varies fastest
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

/// Lattice points of level k inside a bounded window of the group.
pub fn lattice_points_near(chain: &LatticeChain, k: usize, window: &Domain) -> Result<Vec<Elem>> {
    chain.level(k)?.lattice.points_in(window)
}

/// The union of shifts of V_k by the coset representatives nu_{k,l}; a fundamental domain at level k+1.
pub fn refine_domain(chain: &LatticeChain, k: usize) -> Result<Domain> {
    let rf = chain.refinement(k)?;
    Ok(Domain::CosetUnion { base: Box::new(chain.levels[k].v.clone()), shifts: rf.nu.clone() })
}

/// Reduces gamma modulo the annihilator at level k into V_k; returns (representative, shift).
pub fn reduce_to_fundamental(chain: &LatticeChain, k: usize, gamma: &Elem) -> Result<(Elem, Elem)> {
    let lv = chain.level(k)?;
    reduce_into_box(&chain.dual(), &lv.v, &lv.annihilator, gamma)
}

pub(crate) fn reduce_into_box(space: &Space, v: &Domain, lattice: &DiagLattice, gamma: &Elem) -> Result<(Elem, Elem)> {
    let lo: Vec<Rational> = match v {
        Domain::IntegerInterval { lo, .. } => vec![int(*lo)],
        Domain::HalfOpenBox { lo, .. } => lo.clone(),
        _ => return Err(Error::Domain(format!("fundamental domain {v:?} is not a box"))),
    };
    let g = space.reduce(gamma);
    let shift = match &g {
        Elem::Exact(x) => Elem::Exact(
            x.iter().zip(&lo).zip(&lattice.steps).map(|((c, l), s)| ((c - l) / s).floor() * s).collect(),
        ),
        Elem::Float(x) => Elem::Float(
            x.iter()
                .zip(&lo)
                .zip(&lattice.steps)
                .map(|((c, l), s)| {
                    let s = to_f64(s);
                    ((c - to_f64(l)) / s).floor() * s
                })
                .collect(),
        ),
    };
    let rep = g.sub(&shift);
    Ok((rep, space.reduce(&shift)))
}

#[derive(Serialize, Deserialize)]
struct LevelDoc {
    k: usize,
    lattice_steps: Vec<String>,
    q: Domain,
    annihilator_steps: Vec<String>,
    v: Domain,
    mu_q: String,
    mu_v: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    nu: Option<Vec<Elem>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    eta: Option<Vec<Elem>>,
}

/// JSON form of a chain: the group, the chain variant with its parameters, and the level data.
#[derive(Serialize, Deserialize)]
pub struct ChainDoc {
    pub group: GroupSpec,
    pub variant: String,
    pub params: serde_json::Value,
    #[serde(default)]
    levels: Vec<LevelDoc>,
}

impl LatticeChain {
    pub fn to_doc(&self) -> ChainDoc {
        use crate::numeric::rational_to_string as rs;
        let levels = self
            .levels
            .iter()
            .map(|lv| {
                let rf = self.refinements.get(lv.k);
                LevelDoc {
                    k: lv.k,
                    lattice_steps: lv.lattice.steps.iter().map(rs).collect(),
                    q: lv.q.clone(),
                    annihilator_steps: lv.annihilator.steps.iter().map(rs).collect(),
                    v: lv.v.clone(),
                    mu_q: rs(&lv.mu_q),
                    mu_v: rs(&lv.mu_v),
                    d: rf.map(|r| r.d),
                    nu: rf.map(|r| r.nu.clone()),
                    eta: rf.map(|r| r.eta.clone()),
                }
            })
            .collect();
        ChainDoc {
            group: self.group,
            variant: self.kind.variant_name().into(),
            params: self.kind.params_json(),
            levels,
        }
    }

    /// Rebuilds a chain from its JSON form; stored level data must match the rebuilt chain.
    pub fn from_doc(doc: &ChainDoc) -> Result<Self> {
        let kind = kind_from_params(&doc.group, &doc.variant, &doc.params)?;
        let chain = LatticeChain::from_kind(&kind)?;
        if chain.group != doc.group {
            return Err(Error::VariantMismatch(format!(
                "chain variant {} does not live on group {:?}",
                doc.variant, doc.group
            )));
        }
        if !doc.levels.is_empty() {
            let fresh = chain.to_doc();
            let a = serde_json::to_value(&fresh.levels).map_err(|e| Error::Input(e.to_string()))?;
            let b = serde_json::to_value(&doc.levels).map_err(|e| Error::Input(e.to_string()))?;
            if a != b {
                return Err(Error::Input("levels: stored level data disagree with the chain parameters".into()));
            }
        }
        Ok(chain)
    }
}

fn kind_from_params(group: &GroupSpec, variant: &str, params: &serde_json::Value) -> Result<ChainKind> {
    let bad = |f: &str| Error::Input(format!("params.{f}: missing or malformed"));
    let m = || -> Result<u32> {
        params.get("M").and_then(|v| v.as_u64()).map(|v| v as u32).ok_or_else(|| bad("M"))
    };
    let kind = match variant {
        "dyadic_integers" => ChainKind::DyadicIntegers { m: m()? },
        "dyadic_cyclic" => ChainKind::DyadicCyclic { m: m()? },
        "torus_sequence" => ChainKind::TorusSequence {
            m_seq: serde_json::from_value(params.get("M_seq").cloned().ok_or_else(|| bad("M_seq"))?)
                .map_err(|_| bad("M_seq"))?,
        },
        "euclidean_diagonal" => ChainKind::EuclideanDiagonal {
            m_table: serde_json::from_value(params.get("M_table").cloned().ok_or_else(|| bad("M_table"))?)
                .map_err(|_| bad("M_table"))?,
        },
        other => return Err(Error::Input(format!("variant: unknown chain variant {other:?}"))),
    };
    let _ = group;
    Ok(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_chain_level_two() {
        let c = LatticeChain::dyadic_integers(3).unwrap();
        let lv = c.level(2).unwrap();
        assert_eq!(lv.lattice.steps, vec![int(2)]);
        assert_eq!(lv.q, Domain::interval(0, 1));
        assert_eq!(lv.v, Domain::half_open(vec![int(0)], vec![rat(1, 2)]));
        assert_eq!(c.refinement(2).unwrap().nu, vec![Elem::int(0), Elem::rat(1, 2)]);
        assert_eq!(c.eta(2).unwrap(), &Elem::int(1));
        assert_eq!(lv.mu_q * lv.mu_v, int(1));
        c.check_invariants().unwrap();
    }

    #[test]
    fn cyclic_chain_extremes() {
        let c = LatticeChain::dyadic_cyclic(3).unwrap();
        assert_eq!(c.level(0).unwrap().lattice.points_in(&Domain::Whole).unwrap(), vec![Elem::int(0)]);
        assert_eq!(c.level(3).unwrap().lattice.points_in(&Domain::Whole).unwrap().len(), 8);
        let lv = c.level(1).unwrap();
        assert_eq!(lv.lattice.points_in(&Domain::Whole).unwrap(), vec![Elem::int(0), Elem::int(4)]);
        assert_eq!(lv.v, Domain::interval(0, 1));
        assert_eq!(lv.mu_v, rat(1, 4));
        assert_eq!(c.refinement(1).unwrap().nu, vec![Elem::int(0), Elem::int(2)]);
        c.check_invariants().unwrap();
    }

    #[test]
    fn torus_chain() {
        let c = LatticeChain::torus_sequence(&[2, 3]).unwrap();
        assert_eq!(c.level(1).unwrap().v, Domain::interval(-3, 2));
        assert_eq!(c.d(0).unwrap(), 3);
        assert_eq!(c.refinement(0).unwrap().nu, vec![Elem::int(0), Elem::int(2), Elem::int(4)]);
        c.check_invariants().unwrap();
        assert!(LatticeChain::torus_sequence(&[3, 2]).is_err());
        assert!(LatticeChain::torus_sequence(&[2, 1]).is_err());
    }

    #[test]
    fn euclidean_chain() {
        let c = LatticeChain::euclidean_diagonal(&[vec![2, 2], vec![2, 2]]).unwrap();
        assert_eq!(c.d(0).unwrap(), 4);
        let nu = &c.refinement(0).unwrap().nu;
        assert_eq!(nu, &vec![Elem::ints(&[0, 0]), Elem::ints(&[2, 0]), Elem::ints(&[0, 2]), Elem::ints(&[2, 2])]);
        c.check_invariants().unwrap();
        let c = LatticeChain::euclidean_diagonal(&[vec![2], vec![4]]).unwrap();
        assert_eq!(
            c.level(0).unwrap().v,
            Domain::half_open(vec![int(-1), int(-2)], vec![int(1), int(2)])
        );
        let c = LatticeChain::euclidean_diagonal(&[vec![2, 2]]).unwrap();
        assert_eq!(c.level(1).unwrap().v, Domain::half_open(vec![int(-2)], vec![int(2)]));
    }

    #[test]
    fn out_of_range_level() {
        let c = LatticeChain::dyadic_integers(3).unwrap();
        assert!(matches!(c.level(5), Err(Error::Index { .. })));
        assert!(matches!(c.refinement(3), Err(Error::Index { .. })));
        assert!(LatticeChain::dyadic_integers(0).is_err());
    }

    #[test]
    fn lattice_points_in_window() {
        let c = LatticeChain::dyadic_integers(3).unwrap();
        let pts = lattice_points_near(&c, 1, &Domain::interval(0, 9)).unwrap();
        assert_eq!(pts, vec![Elem::int(0), Elem::int(4), Elem::int(8)]);
        let t = LatticeChain::torus_sequence(&[2, 3]).unwrap();
        assert_eq!(lattice_points_near(&t, 1, &Domain::Whole).unwrap().len(), 6);
        assert!(lattice_points_near(&c, 1, &Domain::Whole).is_err());
    }

    #[test]
    fn refined_domain_matches_next_level_measure() {
        let c = LatticeChain::dyadic_integers(2).unwrap();
        let d = refine_domain(&c, 0).unwrap();
        let space = c.dual();
        assert_eq!(d.exact_measure(&space), Some(rat(1, 2)));
        let half = Domain::half_open(vec![int(0)], vec![rat(1, 2)]);
        for j in 0..64 {
            let g = Elem::rat(j, 64);
            assert_eq!(d.contains(&space, &g), half.contains(&space, &g));
        }
    }

    #[test]
    fn reduction_into_fundamental_domain() {
        let c = LatticeChain::dyadic_cyclic(3).unwrap();
        let (rep, shift) = reduce_to_fundamental(&c, 1, &Elem::int(7)).unwrap();
        assert_eq!(rep, Elem::int(1));
        assert_eq!(shift, Elem::int(6));
        let t = LatticeChain::torus_sequence(&[2, 3]).unwrap();
        let (rep, shift) = reduce_to_fundamental(&t, 0, &Elem::int(5)).unwrap();
        assert_eq!((rep, shift), (Elem::int(-1), Elem::int(6)));
    }

    #[test]
    fn chain_json_round_trip() {
        for c in [
            LatticeChain::dyadic_integers(4).unwrap(),
            LatticeChain::dyadic_cyclic(3).unwrap(),
            LatticeChain::torus_sequence(&[2, 3, 2]).unwrap(),
            LatticeChain::euclidean_diagonal(&[vec![2, 3], vec![4, 2]]).unwrap(),
        ] {
            let text = serde_json::to_string(&c.to_doc()).unwrap();
            let doc: ChainDoc = serde_json::from_str(&text).unwrap();
            assert_eq!(LatticeChain::from_doc(&doc).unwrap(), c);
        }
    }

    #[test]
    fn ball_measure_and_membership() {
        let b = Domain::Ball { radius: rat(1, 2), dim: 2 };
        let s = Space::Real { dim: 2 };
        assert!((b.measure(&s).unwrap() - std::f64::consts::PI / 4.0).abs() < 1e-15);
        assert!(b.contains(&s, &Elem::Exact(vec![rat(3, 10), rat(4, 10)])));
        assert!(!b.contains(&s, &Elem::Exact(vec![rat(3, 10), rat(41, 100)])));
    }
}
