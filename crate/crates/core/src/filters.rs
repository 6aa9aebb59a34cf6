//! Periodic filters, the polyphase-style matrix P_k(gamma) and its unitarity check.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Elem, GroupSpec, Space};
use crate::lattice::{reduce_into_box, DiagLattice, Domain, LatticeChain};
use crate::numeric::{to_f64, Rational, C64};

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5EED;
/// Default number of regular grid points on continuous duals.
pub const DEFAULT_GRID: usize = 1 << 12;
/// Default number of extra random points on continuous duals.
pub const DEFAULT_RANDOM: usize = 1 << 10;

/// Sum_j c_j (-(start + j) eta, gamma).
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    pub eta: Elem,
    pub start: i64,
    pub coeffs: Vec<C64>,
}

/// The coset structure a piecewise filter is written against: V_k, the
/// annihilator at level k and the representatives nu_{k,l}.
#[derive(Clone, Debug, PartialEq)]
pub struct CosetCells {
    pub space: Space,
    pub base: Domain,
    pub base_lattice: DiagLattice,
    pub nu: Vec<Elem>,
}

/// `values[l]` is the filter value on `region + nu_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub region: Domain,
    pub values: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FilterKind {
    Trig(TrigPolynomial),
    Piecewise { cells: CosetCells, pieces: Vec<Piece> },
    Tabulated { points: Vec<Elem>, values: Vec<C64> },
}

/// A function on the dual group, periodic with respect to the annihilator at level k+1.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicFilter {
    pub group: GroupSpec,
    /// The filter belongs to the refinement step k -> k+1.
    pub k: usize,
    pub period: DiagLattice,
    pub kind: FilterKind,
}

impl PeriodicFilter {
    /// A trigonometric polynomial in (-eta, gamma); eta must lie in the lattice at level k+1.
    pub fn trig(chain: &LatticeChain, k: usize, eta: Elem, start: i64, coeffs: Vec<C64>) -> Result<Self> {
        let next = chain.level(k + 1)?;
        chain.primal().validate(&eta)?;
        if !next.lattice.contains(&eta) {
            return Err(Error::Construction(format!(
                "shift {eta} is not in the lattice at level {}; the filter would not have the required period",
                k + 1
            )));
        }
        Ok(PeriodicFilter {
            group: chain.group,
            k,
            period: next.annihilator.clone(),
            kind: FilterKind::Trig(TrigPolynomial { eta, start, coeffs }),
        })
    }

    /// Constant on each region + nu_l; regions are tried in order.
    pub fn piecewise(chain: &LatticeChain, k: usize, pieces: Vec<Piece>) -> Result<Self> {
        let rf = chain.refinement(k)?;
        let lv = chain.level(k)?;
        if let Some(p) = pieces.iter().find(|p| p.values.len() != rf.d) {
            return Err(Error::Construction(format!(
                "piece {:?} carries {} coset values, d_{k} = {}",
                p.region,
                p.values.len(),
                rf.d
            )));
        }
        Ok(PeriodicFilter {
            group: chain.group,
            k,
            period: chain.level(k + 1)?.annihilator.clone(),
            kind: FilterKind::Piecewise {
                cells: CosetCells {
                    space: chain.dual(),
                    base: lv.v.clone(),
                    base_lattice: lv.annihilator.clone(),
                    nu: rf.nu.clone(),
                },
                pieces,
            },
        })
    }

    /// Values known only at listed points (and their periodic copies).
    pub fn tabulated(chain: &LatticeChain, k: usize, points: Vec<Elem>, values: Vec<C64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Construction("tabulated filter needs one value per point".into()));
        }
        Ok(PeriodicFilter {
            group: chain.group,
            k,
            period: chain.level(k + 1)?.annihilator.clone(),
            kind: FilterKind::Tabulated { points, values },
        })
    }

    pub fn dual(&self) -> Space {
        self.group.dual()
    }

    pub fn eval(&self, gamma: &Elem) -> Result<C64> {
        self.dual().validate(gamma)?;
        self.eval_unchecked(gamma)
    }

    pub fn eval_unchecked(&self, gamma: &Elem) -> Result<C64> {
        match &self.kind {
            FilterKind::Trig(t) => {
                let mut acc = C64::new(0.0, 0.0);
                for (j, c) in t.coeffs.iter().enumerate() {
                    if *c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let x = t.eta.scale(-(t.start + j as i64));
                    acc += c * self.group.pairing_unchecked(&x, gamma);
                }
                Ok(acc)
            }
            FilterKind::Piecewise { cells, pieces } => {
                let (rep, shift) = reduce_into_box(&cells.space, &cells.base, &cells.base_lattice, gamma)?;
                let l = cells
                    .nu
                    .iter()
                    .position(|n| self.period.contains(&shift.sub(n)))
                    .ok_or_else(|| Error::Domain(format!("no coset representative matches {shift}")))?;
                for p in pieces {
                    if p.region.contains(&cells.space, &rep) {
                        return Ok(p.values[l]);
                    }
                }
                Err(Error::Domain(format!("point {gamma} is not covered by any piece")))
            }
            FilterKind::Tabulated { points, values } => {
                for (p, v) in points.iter().zip(values) {
                    let diff = gamma.sub(p);
                    if self.period.contains(&diff) {
                        return Ok(*v);
                    }
                }
                Err(Error::InterpolationUnsupported)
            }
        }
    }

    /// A copy with every value set to zero, used for negative controls.
    pub fn zeroed(&self) -> Self {
        let mut f = self.clone();
        let z = C64::new(0.0, 0.0);
        match &mut f.kind {
            FilterKind::Trig(t) => t.coeffs.iter_mut().for_each(|c| *c = z),
            FilterKind::Piecewise { pieces, .. } => {
                pieces.iter_mut().for_each(|p| p.values.iter_mut().for_each(|v| *v = z))
            }
            FilterKind::Tabulated { values, .. } => values.iter_mut().for_each(|v| *v = z),
        }
        f
    }
}

/// The shift eta, the first shift index and the coefficient list of a trigonometric filter.
pub fn mask_coefficients(filter: &PeriodicFilter) -> Result<(Elem, i64, Vec<C64>)> {
    match &filter.kind {
        FilterKind::Trig(t) => Ok((t.eta.clone(), t.start, t.coeffs.clone())),
        _ => Err(Error::Unsupported("only trigonometric filters have mask coefficients".into())),
    }
}

/// Rows are the filters (low-pass first); column l is evaluated at gamma + nu_{k,l}.
#[derive(Clone, Debug)]
pub struct UepMatrix {
    pub group: GroupSpec,
    pub k: usize,
    pub d: usize,
    pub nu: Vec<Elem>,
    pub v: Domain,
    pub filters: Vec<PeriodicFilter>,
}

pub fn assemble_p(chain: &LatticeChain, k: usize, h: &PeriodicFilter, gs: &[PeriodicFilter]) -> Result<UepMatrix> {
    let rf = chain.refinement(k)?;
    let period = &chain.level(k + 1)?.annihilator;
    let mut filters = vec![h.clone()];
    filters.extend(gs.iter().cloned());
    for (i, f) in filters.iter().enumerate() {
        if f.group != chain.group || &f.period != period {
            return Err(Error::Construction(format!(
                "filter row {i} is periodic with respect to {:?}, expected the annihilator at level {}",
                f.period.steps,
                k + 1
            )));
        }
    }
    Ok(UepMatrix { group: chain.group, k, d: rf.d, nu: rf.nu.clone(), v: chain.level(k)?.v.clone(), filters })
}

impl UepMatrix {
    pub fn rows(&self) -> usize {
        self.filters.len()
    }

    pub fn eval(&self, gamma: &Elem) -> Result<DMatrix<C64>> {
        let mut p = DMatrix::from_element(self.rows(), self.d, C64::new(0.0, 0.0));
        for (l, nu) in self.nu.iter().enumerate() {
            let g = gamma.add(nu);
            for (m, f) in self.filters.iter().enumerate() {
                p[(m, l)] = f.eval_unchecked(&g)?;
            }
        }
        Ok(p)
    }

    /// max |P* P - d I| at one point.
    pub fn residual_at(&self, gamma: &Elem) -> Result<f64> {
        let p = self.eval(gamma)?;
        let mut g = p.adjoint() * &p;
        for i in 0..self.d {
            g[(i, i)] -= C64::new(self.d as f64, 0.0);
        }
        Ok(g.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Same quantity, written out entry by entry as sums over the filters.
    pub fn residual_entrywise_at(&self, gamma: &Elem) -> Result<f64> {
        let shifted: Vec<Elem> = self.nu.iter().map(|n| gamma.add(n)).collect();
        let vals: Vec<Vec<C64>> = self
            .filters
            .iter()
            .map(|f| shifted.iter().map(|g| f.eval_unchecked(g)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for l in 0..self.d {
            for lp in 0..self.d {
                let mut s = C64::new(0.0, 0.0);
                for row in &vals {
                    s += row[l].conj() * row[lp];
                }
                if l == lp {
                    s -= self.d as f64;
                }
                worst = worst.max(s.norm());
            }
        }
        Ok(worst)
    }
}

/// Where and how densely a condition is checked.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplingPlan {
    /// Exhaustive on finite regions of discrete spaces; otherwise a regular
    /// grid with at least `grid` points plus `random` seeded uniform points.
    Standard { grid: usize, random: usize, seed: u64 },
    Points(Vec<Elem>),
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan::Standard { grid: DEFAULT_GRID, random: DEFAULT_RANDOM, seed: DEFAULT_SEED }
    }
}

impl SamplingPlan {
    pub fn with_seed(seed: u64) -> Self {
        SamplingPlan::Standard { grid: DEFAULT_GRID, random: DEFAULT_RANDOM, seed }
    }

    /// Sample points of `region`; the flag says whether the region was enumerated completely.
    pub fn points_for(&self, space: &Space, region: &Domain) -> Result<(Vec<Elem>, bool)> {
        match self {
            SamplingPlan::Points(p) => {
                if p.is_empty() {
                    return Err(Error::Domain("empty sampling plan".into()));
                }
                for x in p {
                    space.validate(x)?;
                }
                Ok((p.clone(), false))
            }
            SamplingPlan::Standard { grid, random, seed } => {
                if space.is_discrete() {
                    let pts = region.enumerate(space)?;
                    if pts.is_empty() {
                        return Err(Error::Domain("sampling region is empty".into()));
                    }
                    return Ok((pts, true));
                }
                if *grid == 0 && *random == 0 {
                    return Err(Error::Domain("empty sampling plan".into()));
                }
                let bb = region
                    .bounding_box(space)
                    .ok_or_else(|| Error::Domain(format!("cannot sample the unbounded region {region:?}")))?;
                let s = bb.len();
                let per_axis = if *grid == 0 { 0 } else { ((*grid as f64).powf(1.0 / s as f64)).ceil() as i64 };
                let mut out = Vec::new();
                if per_axis > 0 {
                    let total = (per_axis as usize).pow(s as u32);
                    for idx in 0..total {
                        let mut rem = idx as i64;
                        let mut c = Vec::with_capacity(s);
                        for (lo, hi) in &bb {
                            let i = rem % per_axis;
                            rem /= per_axis;
                            c.push(lo + (hi - lo) * Rational::new(i, per_axis));
                        }
                        let p = Elem::Exact(c);
                        if region.contains(space, &p) {
                            out.push(p);
                        }
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut drawn = 0;
                let mut attempts = 0;
                while drawn < *random && attempts < 100 * random {
                    attempts += 1;
                    let c: Vec<f64> = bb
                        .iter()
                        .map(|(lo, hi)| {
                            let (a, b) = (to_f64(lo), to_f64(hi));
                            a + (b - a) * rng.gen::<f64>()
                        })
                        .collect();
                    let p = Elem::Float(c);
                    if region.contains(space, &p) {
                        out.push(p);
                        drawn += 1;
                    }
                }
                Ok((out, false))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub residual: f64,
    pub samples: usize,
    pub worst_point: Option<Elem>,
    pub exhaustive: bool,
}

impl VerificationReport {
    pub fn certification(&self) -> &'static str {
        if self.exhaustive {
            "exact on the whole finite domain"
        } else {
            "certified on the sampled set"
        }
    }

    pub(crate) fn collect(points: &[Elem], exhaustive: bool, mut f: impl FnMut(&Elem) -> Result<f64>) -> Result<Self> {
        let mut worst = 0.0;
        let mut at: Option<Elem> = None;
        for p in points {
            let r = f(p)?;
            if at.is_none() || r > worst || (r.is_nan() && !worst.is_nan()) {
                worst = r;
                at = Some(p.clone());
            }
        }
        Ok(VerificationReport { residual: worst, samples: points.len(), worst_point: at, exhaustive })
    }
}

/// Maximum of |P*(gamma) P(gamma) - d I| over the sampled points of V_k.
pub fn verify_uep_matrix(p: &UepMatrix, plan: &SamplingPlan) -> Result<VerificationReport> {
    let space = p.group.dual();
    let (points, exhaustive) = plan.points_for(&space, &p.v)?;
    VerificationReport::collect(&points, exhaustive, |g| p.residual_at(g))
}

/// Checks that the residual is unchanged under the given annihilator shifts.
pub fn verify_periodic_extension(
    p: &UepMatrix,
    chain: &LatticeChain,
    shifts: &[Elem],
    plan: &SamplingPlan,
) -> Result<bool> {
    let lattice = &chain.level(p.k)?.annihilator;
    for s in shifts {
        if !lattice.contains(s) {
            return Err(Error::Domain(format!("shift {s} is not in the annihilator at level {}", p.k)));
        }
    }
    let space = p.group.dual();
    let (points, _) = plan.points_for(&space, &p.v)?;
    for g in &points {
        let base = p.residual_at(g)?;
        for s in shifts {
            if (p.residual_at(&g.add(s))? - base).abs() > 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn c_doc(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

fn c_from(v: &[f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceDoc {
    pub region: Domain,
    pub coset: usize,
    pub value: [f64; 2],
}

/// JSON form of a filter. `level` is k for a filter of the step k -> k+1.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterDoc {
    Trig { level: usize, eta: Elem, coeffs: Vec<[f64; 2]>, shifts: Vec<i64> },
    Piecewise { level: usize, pieces: Vec<PieceDoc> },
    Tabulated { level: usize, points: Vec<Elem>, values: Vec<[f64; 2]> },
}

impl PeriodicFilter {
    pub fn to_doc(&self) -> FilterDoc {
        match &self.kind {
            FilterKind::Trig(t) => FilterDoc::Trig {
                level: self.k,
                eta: t.eta.clone(),
                coeffs: t.coeffs.iter().map(c_doc).collect(),
                shifts: (0..t.coeffs.len() as i64).map(|j| t.start + j).collect(),
            },
            FilterKind::Piecewise { pieces, .. } => FilterDoc::Piecewise {
                level: self.k,
                pieces: pieces
                    .iter()
                    .flat_map(|p| {
                        p.values.iter().enumerate().map(|(l, v)| PieceDoc {
                            region: p.region.clone(),
                            coset: l + 1,
                            value: c_doc(v),
                        })
                    })
                    .collect(),
            },
            FilterKind::Tabulated { points, values } => FilterDoc::Tabulated {
                level: self.k,
                points: points.clone(),
                values: values.iter().map(c_doc).collect(),
            },
        }
    }

    pub fn from_doc(chain: &LatticeChain, doc: &FilterDoc) -> Result<Self> {
        match doc {
            FilterDoc::Trig { level, eta, coeffs, shifts } => {
                if coeffs.len() != shifts.len() || coeffs.is_empty() {
                    return Err(Error::Input("coeffs and shifts must be non-empty and of equal length".into()));
                }
                let start = *shifts.iter().min().unwrap_or(&0);
                let end = *shifts.iter().max().unwrap_or(&0);
                if end - start > 1 << 20 {
                    return Err(Error::Input("shifts span too wide".into()));
                }
                let mut dense = vec![C64::new(0.0, 0.0); (end - start + 1) as usize];
                for (c, s) in coeffs.iter().zip(shifts) {
                    dense[(s - start) as usize] += c_from(c);
                }
                PeriodicFilter::trig(chain, *level, eta.clone(), start, dense)
            }
            FilterDoc::Piecewise { level, pieces } => {
                let d = chain.d(*level)?;
                let mut out: Vec<Piece> = Vec::new();
                for p in pieces {
                    if p.coset == 0 || p.coset > d {
                        return Err(Error::Input(format!("pieces.coset: {} outside 1..={d}", p.coset)));
                    }
                    let idx = match out.iter().position(|q| q.region == p.region) {
                        Some(i) => i,
                        None => {
                            out.push(Piece { region: p.region.clone(), values: vec![C64::new(0.0, 0.0); d] });
                            out.len() - 1
                        }
                    };
                    out[idx].values[p.coset - 1] = c_from(&p.value);
                }
                PeriodicFilter::piecewise(chain, *level, out)
            }
            FilterDoc::Tabulated { level, points, values } => {
                PeriodicFilter::tabulated(chain, *level, points.clone(), values.iter().map(c_from).collect())
            }
        }
    }
}

/// Convenience for tests and examples: the scalar sqrt(d) as a complex number.
pub fn sqrt_c(d: usize) -> C64 {
    C64::new((d as f64).sqrt(), 0.0)
}
