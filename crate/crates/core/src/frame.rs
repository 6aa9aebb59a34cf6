//! Frame systems built from a lattice chain and a generator family, with
//! analysis on the translation side (integers, Z_N) or the modulation side
//! (Z_N, torus), brute-force frame operators and identity checks.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bspline::{bspline_hat, bspline_time, g_filters, h_filter, refinement_region, wavelet_time};
use crate::charfun::{char_generator, g_char_proper, g_char_shannon, h_char, OmegaChain, OmegaExample};
use crate::error::{Error, Result};
use crate::filters::{assemble_p, verify_uep_matrix, PeriodicFilter, SamplingPlan, UepMatrix, VerificationReport};
use crate::group::{Elem, GroupSpec};
use crate::lattice::{reduce_into_box, DiagLattice, Domain, LatticeChain};
use crate::numeric::{cis_turns_exact, rat, to_f64, C64};
use crate::sequence::{dft_cyclic, idft_cyclic, Sequence};

/// Residual below which a UEP matrix counts as certified.
pub const UEP_TOLERANCE: f64 = 1e-10;

/// Default support window of random test functions on the integers.
pub const DEFAULT_WINDOW: (i64, i64) = (0, 20);

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    BSpline { order: u32 },
    /// Indicator generators of the sets in `omega`; `example` records the parameters they came from.
    CharFun { omega: OmegaChain, example: Option<OmegaExample> },
}

impl Family {
    pub fn label(&self) -> String {
        match self {
            Family::BSpline { order } => format!("bspline({order})"),
            Family::CharFun { omega, .. } if omega.shannon => "charfun-shannon".into(),
            Family::CharFun { .. } => "charfun-proper".into(),
        }
    }
}

/// Phi_k is `m = 0`; Psi_k^(m) is `m >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GenId {
    pub k: usize,
    pub m: usize,
}

impl std::fmt::Display for GenId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.m == 0 {
            write!(f, "phi_{}", self.k)
        } else {
            write!(f, "psi_{}^({})", self.k, self.m)
        }
    }
}

#[derive(Clone, Debug)]
pub struct SystemLevel {
    pub k: usize,
    pub h: PeriodicFilter,
    pub g: Vec<PeriodicFilter>,
}

#[derive(Debug)]
pub struct FrameSystem {
    pub chain: LatticeChain,
    pub family: Family,
    pub k0: usize,
    pub k1: usize,
    /// Filters for k0 <= k < k1.
    pub levels: Vec<SystemLevel>,
    time_cache: Mutex<BTreeMap<GenId, Arc<Sequence>>>,
    uep_cache: Mutex<BTreeMap<usize, f64>>,
}

impl Clone for FrameSystem {
    fn clone(&self) -> Self {
        FrameSystem::assemble(self.chain.clone(), self.family.clone(), self.k0, self.k1, self.levels.clone())
    }
}

fn level_filters(chain: &LatticeChain, family: &Family, k: usize) -> Result<SystemLevel> {
    let (h, g) = match family {
        Family::BSpline { order } => (h_filter(chain, k, *order)?, g_filters(chain, k, *order)?),
        Family::CharFun { omega, .. } => {
            let h = h_char(chain, omega, k)?;
            // levels where Omega_k fills V_k take the full-domain filters even in proper mode
            let g = if omega.is_proper(chain, k)? {
                g_char_proper(chain, omega, k)?
            } else {
                g_char_shannon(chain, omega, k)?
            };
            (h, g)
        }
    };
    Ok(SystemLevel { k, h, g })
}

impl FrameSystem {
    pub fn build(chain: LatticeChain, family: Family, k0: usize, k1: usize) -> Result<Self> {
        check_range(&chain, k0, k1)?;
        if let Family::CharFun { omega, .. } = &family {
            if omega.domains.len() != chain.levels.len() {
                return Err(Error::Construction("frequency sets do not match the chain levels".into()));
            }
        }
        let levels = (k0..k1).map(|k| level_filters(&chain, &family, k)).collect::<Result<Vec<_>>>()?;
        Ok(FrameSystem::assemble(chain, family, k0, k1, levels))
    }

    /// A system with filters supplied by the caller, e.g. loaded from an artifact.
    pub fn with_levels(chain: LatticeChain, family: Family, k0: usize, k1: usize, levels: Vec<SystemLevel>) -> Result<Self> {
        check_range(&chain, k0, k1)?;
        if levels.len() != k1 - k0 {
            return Err(Error::Construction(format!("expected {} filter levels, got {}", k1 - k0, levels.len())));
        }
        for (i, lv) in levels.iter().enumerate() {
            let k = k0 + i;
            if lv.k != k || lv.h.k != k || lv.g.iter().any(|g| g.k != k) {
                return Err(Error::Construction(format!("filters listed at position {i} do not belong to level {k}")));
            }
            if lv.g.is_empty() {
                return Err(Error::Construction(format!("level {k} has no high-pass filters")));
            }
        }
        Ok(FrameSystem::assemble(chain, family, k0, k1, levels))
    }

    fn assemble(chain: LatticeChain, family: Family, k0: usize, k1: usize, levels: Vec<SystemLevel>) -> Self {
        FrameSystem {
            chain,
            family,
            k0,
            k1,
            levels,
            time_cache: Mutex::new(BTreeMap::new()),
            uep_cache: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn group(&self) -> GroupSpec {
        self.chain.group
    }

    pub fn level(&self, k: usize) -> Result<&SystemLevel> {
        if k < self.k0 || k >= self.k1 {
            return Err(Error::Index { k, lo: self.k0, hi: self.k1.saturating_sub(1) });
        }
        Ok(&self.levels[k - self.k0])
    }

    /// Number of wavelets at level k.
    pub fn rho(&self, k: usize) -> Result<usize> {
        Ok(self.level(k)?.g.len())
    }

    /// Phi_{k0} followed by every Psi_k^(m), in level order.
    pub fn generator_ids(&self) -> Vec<GenId> {
        let mut ids = vec![GenId { k: self.k0, m: 0 }];
        for lv in &self.levels {
            ids.extend((1..=lv.g.len()).map(|m| GenId { k: lv.k, m }));
        }
        ids
    }

    /// Replaces one wavelet filter by zero.
    pub fn zero_wavelet(&mut self, k: usize, m: usize) -> Result<()> {
        let idx = k.checked_sub(self.k0).filter(|i| *i < self.levels.len()).ok_or(Error::Index {
            k,
            lo: self.k0,
            hi: self.k1.saturating_sub(1),
        })?;
        let g = self.levels[idx]
            .g
            .get_mut(m.wrapping_sub(1))
            .ok_or_else(|| Error::Domain(format!("level {k} has no wavelet {m}")))?;
        *g = g.zeroed();
        self.time_cache.lock().expect("cache").clear();
        self.uep_cache.lock().expect("cache").clear();
        Ok(())
    }

    pub fn lattice(&self, k: usize) -> Result<&DiagLattice> {
        Ok(&self.chain.level(k)?.lattice)
    }

    pub fn phi_hat(&self, k: usize, gamma: &Elem) -> Result<C64> {
        if k < self.k0 || k > self.k1 {
            return Err(Error::Index { k, lo: self.k0, hi: self.k1 });
        }
        match &self.family {
            Family::BSpline { order } => bspline_hat(&self.chain, k, *order, gamma),
            Family::CharFun { omega, .. } => char_generator(&self.chain, omega, k, gamma),
        }
    }

    /// G_{k+1}^(m) Phi_{k+1}.
    pub fn psi_hat(&self, k: usize, m: usize, gamma: &Elem) -> Result<C64> {
        let g = self.filter(k, m)?;
        Ok(g.eval(gamma)? * self.phi_hat(k + 1, gamma)?)
    }

    pub fn gen_hat(&self, id: GenId, gamma: &Elem) -> Result<C64> {
        if id.m == 0 {
            self.phi_hat(id.k, gamma)
        } else {
            self.psi_hat(id.k, id.m, gamma)
        }
    }

    fn filter(&self, k: usize, m: usize) -> Result<&PeriodicFilter> {
        self.level(k)?.g.get(m.wrapping_sub(1)).ok_or_else(|| Error::Domain(format!("level {k} has no wavelet {m}")))
    }

    /// Time-domain generator on Z or Z_N.
    pub fn time_generator(&self, id: GenId) -> Result<Arc<Sequence>> {
        if let Some(s) = self.time_cache.lock().expect("cache").get(&id) {
            return Ok(s.clone());
        }
        let seq = match (&self.family, self.chain.group) {
            (Family::BSpline { order }, GroupSpec::Integers | GroupSpec::FiniteCyclic { .. }) => {
                if id.m == 0 {
                    if id.k < self.k0 || id.k > self.k1 {
                        return Err(Error::Index { k: id.k, lo: self.k0, hi: self.k1 });
                    }
                    bspline_time(&self.chain, id.k, *order)?
                } else {
                    wavelet_time(&self.chain, id.k, self.filter(id.k, id.m)?, *order)?
                }
            }
            (_, GroupSpec::FiniteCyclic { modulus }) => {
                let vals = (0..modulus).map(|g| self.gen_hat(id, &Elem::int(g))).collect::<Result<Vec<_>>>()?;
                idft_cyclic(&Sequence::on_cyclic(modulus, vals))
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "no finitely supported time-domain generators for {} on {}",
                    self.family.label(),
                    self.chain.group.variant_name()
                )))
            }
        };
        let seq = Arc::new(seq);
        self.time_cache.lock().expect("cache").insert(id, seq.clone());
        Ok(seq)
    }

    pub fn uep_matrix(&self, k: usize) -> Result<UepMatrix> {
        let lv = self.level(k)?;
        assemble_p(&self.chain, k, &lv.h, &lv.g)
    }

    /// UEP residual at level k under the default sampling plan, cached.
    pub fn uep_residual(&self, k: usize) -> Result<f64> {
        if let Some(r) = self.uep_cache.lock().expect("cache").get(&k) {
            return Ok(*r);
        }
        let r = verify_uep_matrix(&self.uep_matrix(k)?, &SamplingPlan::default())?.residual;
        self.uep_cache.lock().expect("cache").insert(k, r);
        Ok(r)
    }

    /// max |Phi_k - H Phi_{k+1}| over the sampled refinement region.
    pub fn refinement_report(&self, k: usize, plan: &SamplingPlan) -> Result<VerificationReport> {
        let h = &self.level(k)?.h;
        let region = refinement_region(&self.chain, k)?;
        let (points, exhaustive) = plan.points_for(&self.chain.dual(), &region)?;
        VerificationReport::collect(&points, exhaustive, |g| {
            Ok((self.phi_hat(k, g)? - h.eval_unchecked(g)? * self.phi_hat(k + 1, g)?).norm())
        })
    }

    /// The set of frequencies on which the finite system reproduces every function, if any.
    pub fn reproduction_set(&self) -> Option<Domain> {
        match &self.family {
            Family::BSpline { .. } => match self.chain.levels[self.k1].q {
                Domain::IntegerInterval { lo: 0, hi: 0 } => Some(Domain::Whole),
                _ => None,
            },
            Family::CharFun { omega, .. } => Some(omega.domains[self.k1].clone()),
        }
    }

    fn require_reproduction(&self) -> Result<Domain> {
        self.reproduction_set().ok_or_else(|| {
            Error::precondition(
                "top-level normalization",
                format!("the top level {} does not reproduce every frequency; Parseval is not implied", self.k1),
            )
        })
    }

    /// max over the reproduction set of |mu(V_k1) |Phi_k1|^2 - 1|.
    pub fn limit_normalization(&self, plan: &SamplingPlan) -> Result<VerificationReport> {
        let s = self.require_reproduction()?;
        let mu = to_f64(&self.chain.levels[self.k1].mu_v);
        let (points, exhaustive) = plan.points_for(&self.chain.dual(), &self.sampling_region(&s))?;
        VerificationReport::collect(&points, exhaustive, |g| Ok((mu * self.phi_hat(self.k1, g)?.norm_sqr() - 1.0).abs()))
    }

    /// max over the reproduction set of |Phi_k1(gamma + omega)| for nonzero annihilator points omega.
    pub fn translate_disjointness(&self, plan: &SamplingPlan) -> Result<VerificationReport> {
        let s = self.require_reproduction()?;
        let top = &self.chain.levels[self.k1];
        let dual = self.chain.dual();
        let window = match &top.v {
            Domain::IntegerInterval { lo, hi } => {
                let w = hi - lo + 1;
                Domain::interval(lo - 2 * w, hi + 2 * w)
            }
            Domain::HalfOpenBox { lo, hi } => {
                let w: Vec<_> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
                Domain::half_open(
                    lo.iter().zip(&w).map(|(a, w)| a - w * 2).collect(),
                    hi.iter().zip(&w).map(|(b, w)| b + w * 2).collect(),
                )
            }
            other => other.clone(),
        };
        let shifts: Vec<Elem> = top
            .annihilator
            .points_in(&window)?
            .into_iter()
            .filter(|w| !dual.same_point(w, &Elem::zero(dual.dim())))
            .collect();
        let (points, exhaustive) = plan.points_for(&dual, &self.sampling_region(&s))?;
        VerificationReport::collect(&points, exhaustive, |g| {
            let mut worst: f64 = 0.0;
            for w in &shifts {
                worst = worst.max(self.phi_hat(self.k1, &g.add(w))?.norm());
            }
            Ok(worst)
        })
    }

    fn sampling_region(&self, s: &Domain) -> Domain {
        match (s, self.chain.dual().is_compact()) {
            (Domain::Whole, false) => self.chain.levels[self.k1].v.clone(),
            _ => s.clone(),
        }
    }
}

fn check_range(chain: &LatticeChain, k0: usize, k1: usize) -> Result<()> {
    let hi = chain.k_max();
    if k1 > hi {
        return Err(Error::Index { k: k1, lo: 0, hi });
    }
    if k0 >= k1 {
        return Err(Error::Construction(format!("base level k0 = {k0} must lie below the top level k1 = {k1}")));
    }
    Ok(())
}

/// A finitely supported function on the group (time side) or on the dual (frequency side).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "side", content = "sequence", rename_all = "snake_case")]
pub enum TestFunction {
    Time(Sequence),
    Frequency(Sequence),
}

impl TestFunction {
    pub fn sequence(&self) -> &Sequence {
        match self {
            TestFunction::Time(s) | TestFunction::Frequency(s) => s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sequence().values.iter().all(|v| v.norm() == 0.0)
    }

    /// Squared L2 norm under the Haar measure of the side it lives on.
    pub fn norm_sq(&self, group: &GroupSpec) -> f64 {
        match self {
            TestFunction::Time(s) => s.norm_sq(),
            TestFunction::Frequency(s) => s.norm_sq() * to_f64(&group.dual().point_weight()),
        }
    }

    /// Uniform entries in the unit square on `lo..=hi`.
    pub fn random_on_integers(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Self {
        TestFunction::Time(Sequence::on_integers(lo, random_values(rng, (hi - lo + 1) as usize)))
    }
}

fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen::<f64>(), rng.gen::<f64>())).collect()
}

/// A random test function of the kind each group is analyzed with: time side on the
/// integers (support `window`), frequency side on Z_N and on the torus. Frequency-side
/// functions are supported in the reproduction set when the system has one.
pub fn random_test_function(system: &FrameSystem, rng: &mut ChaCha8Rng, window: (i64, i64)) -> Result<TestFunction> {
    match system.group() {
        GroupSpec::Integers => Ok(TestFunction::random_on_integers(rng, window.0, window.1)),
        GroupSpec::FiniteCyclic { modulus } => {
            let dual = system.chain.dual();
            let s = system.reproduction_set().unwrap_or(Domain::Whole);
            let mut vals = random_values(rng, modulus as usize);
            for (g, v) in vals.iter_mut().enumerate() {
                if !s.contains(&dual, &Elem::int(g as i64)) {
                    *v = C64::new(0.0, 0.0);
                }
            }
            Ok(TestFunction::Frequency(Sequence::on_cyclic(modulus, vals)))
        }
        GroupSpec::Torus => {
            let (lo, hi) = match system.reproduction_set() {
                Some(Domain::IntegerInterval { lo, hi }) => (lo, hi),
                _ => window,
            };
            Ok(TestFunction::Frequency(Sequence::on_integers(lo, random_values(rng, (hi - lo + 1) as usize))))
        }
        GroupSpec::Euclidean { .. } => Err(unsupported_euclidean()),
    }
}

fn unsupported_euclidean() -> Error {
    Error::Unsupported("direct analysis on R^s is not run; only matrix conditions are verified".into())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficient {
    pub generator: GenId,
    pub shift: Elem,
    pub value: C64,
}

/// <f, T_lambda g> (time side) or <F, M_lambda G> (frequency side) for every lambda in
/// the generator's lattice that can give a nonzero value.
pub fn generator_coefficients(system: &FrameSystem, id: GenId, f: &TestFunction) -> Result<Vec<(Elem, C64)>> {
    let group = system.group();
    let lattice = system.lattice(id.k)?;
    match (f, group) {
        (_, GroupSpec::Euclidean { .. }) => Err(unsupported_euclidean()),
        (TestFunction::Time(s), GroupSpec::Integers) => {
            if s.modulus.is_some() {
                return Err(Error::VariantMismatch("a cyclic sequence cannot be analyzed on the integers".into()));
            }
            let g = system.time_generator(id)?;
            let step = lattice.steps[0].to_integer();
            let lo = s.start - g.end() + 1;
            let hi = s.end() - g.start - 1;
            let a = num_integer::Integer::div_ceil(&lo, &step);
            let b = num_integer::Integer::div_floor(&hi, &step);
            Ok((a..=b).map(|j| (Elem::int(j * step), s.inner_shifted(&g, j * step))).collect())
        }
        (TestFunction::Time(s), GroupSpec::FiniteCyclic { modulus }) => {
            if s.modulus != Some(modulus) {
                return Err(Error::VariantMismatch(format!("test function is not a sequence on Z_{modulus}")));
            }
            let g = system.time_generator(id)?;
            Ok(lattice
                .points_in(&Domain::Whole)?
                .into_iter()
                .map(|l| {
                    let shift = l.as_integer().expect("integer lattice");
                    let c = s.inner_shifted(&g, shift);
                    (l, c)
                })
                .collect())
        }
        (TestFunction::Frequency(s), GroupSpec::FiniteCyclic { .. } | GroupSpec::Torus) => {
            match (group, s.modulus) {
                (GroupSpec::FiniteCyclic { modulus }, Some(n)) if n == modulus => {}
                (GroupSpec::Torus, None) => {}
                _ => return Err(Error::VariantMismatch("test function does not live on the dual group".into())),
            }
            let w = to_f64(&group.dual().point_weight());
            let mut terms = Vec::new();
            for (i, v) in s.values.iter().enumerate() {
                if v.norm() == 0.0 {
                    continue;
                }
                let gamma = Elem::int(s.start + i as i64);
                terms.push((gamma.clone(), *v * system.gen_hat(id, &gamma)?.conj() * w));
            }
            Ok(lattice
                .points_in(&Domain::Whole)?
                .into_iter()
                .map(|l| {
                    let c = terms.iter().map(|(g, t)| t * group.pairing_unchecked(&l, g).conj()).sum();
                    (l, c)
                })
                .collect())
        }
        (TestFunction::Frequency(_), GroupSpec::Integers) => Err(Error::Unsupported(
            "the dual of the integers is continuous; analyze on the translation side".into(),
        )),
        (TestFunction::Time(_), GroupSpec::Torus) => Err(Error::Unsupported(
            "generators on the torus are analyzed on the modulation side".into(),
        )),
    }
}

/// sum over lambda of |<f, g_lambda>|^2 for one generator.
pub fn generator_energy(system: &FrameSystem, id: GenId, f: &TestFunction) -> Result<f64> {
    Ok(generator_coefficients(system, id, f)?.iter().map(|(_, c)| c.norm_sqr()).sum())
}

/// Every nonzero coefficient of the system, ordered by generator and then by shift.
pub fn analysis(system: &FrameSystem, f: &TestFunction) -> Result<Vec<Coefficient>> {
    let mut out = Vec::new();
    for id in system.generator_ids() {
        for (shift, value) in generator_coefficients(system, id, f)? {
            if value.norm() != 0.0 {
                out.push(Coefficient { generator: id, shift, value });
            }
        }
    }
    Ok(out)
}

fn check_in_reproduction_set(system: &FrameSystem, f: &TestFunction) -> Result<()> {
    let s = system.require_reproduction()?;
    if s == Domain::Whole {
        return Ok(());
    }
    let freq = match f {
        TestFunction::Frequency(s) => s.clone(),
        TestFunction::Time(t) if t.modulus.is_some() => dft_cyclic(t),
        TestFunction::Time(_) => return Ok(()),
    };
    let dual = system.chain.dual();
    for (i, v) in freq.values.iter().enumerate() {
        let g = Elem::int(freq.start + i as i64);
        if v.norm() > 1e-12 && !s.contains(&dual, &g) {
            return Err(Error::precondition(
                "support in the reproduction set",
                format!("test function is nonzero at frequency {g}, outside the top-level set"),
            ));
        }
    }
    Ok(())
}

/// |sum |coef|^2 - ||f||^2| / ||f||^2.
pub fn parseval_residual(system: &FrameSystem, f: &TestFunction) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::Domain("Parseval residual is relative; the test function is zero".into()));
    }
    check_in_reproduction_set(system, f)?;
    let mut energy = 0.0;
    for id in system.generator_ids() {
        energy += generator_energy(system, id, f)?;
    }
    let norm = f.norm_sq(&system.group());
    Ok((energy - norm).abs() / norm)
}

/// Coordinates of every system element in the orthonormal basis sqrt(N) delta_gamma of L2(Z_N dual).
pub fn system_vectors(system: &FrameSystem) -> Result<Vec<(GenId, Elem, Vec<C64>)>> {
    let GroupSpec::FiniteCyclic { modulus } = system.group() else {
        return Err(Error::Unsupported("frame operators are formed on finite cyclic groups only".into()));
    };
    let group = system.group();
    let scale = 1.0 / (modulus as f64).sqrt();
    let mut out = Vec::new();
    for id in system.generator_ids() {
        let hat: Vec<C64> = (0..modulus).map(|g| system.gen_hat(id, &Elem::int(g))).collect::<Result<_>>()?;
        for l in system.lattice(id.k)?.points_in(&Domain::Whole)? {
            let v = (0..modulus)
                .map(|g| group.pairing_unchecked(&l, &Elem::int(g)) * hat[g as usize] * scale)
                .collect();
            out.push((id, l, v));
        }
    }
    Ok(out)
}

/// S = sum g g* over every system element.
pub fn frame_operator(system: &FrameSystem) -> Result<DMatrix<C64>> {
    let vectors = system_vectors(system)?;
    let n = match system.group() {
        GroupSpec::FiniteCyclic { modulus } => modulus as usize,
        _ => unreachable!("checked by system_vectors"),
    };
    let mut s = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (_, _, v) in &vectors {
        for i in 0..n {
            if v[i].norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                s[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    Ok(s)
}

/// max entry of |S - I|.
pub fn identity_defect(s: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s[(i, j)] - target).norm());
        }
    }
    worst
}

/// Both sides of the fiberization identity for data on a discrete dual:
/// lhs = sum_lambda |<F, M_lambda Phi>|^2 and
/// rhs = mu(V) sum_{gamma in V} w |sum_{omega in annihilator} F conj(Phi) (omega + gamma)|^2.
pub fn fiberization_both_sides(
    group: &GroupSpec,
    lattice: &DiagLattice,
    v: &Domain,
    f: &Sequence,
    phi: &Sequence,
) -> Result<(f64, f64)> {
    let dual = group.dual();
    if !dual.is_discrete() || !group.primal().is_compact() {
        return Err(Error::Unsupported("both sides are finite sums only on Z_N and on the torus".into()));
    }
    if lattice.space != group.primal() {
        return Err(Error::VariantMismatch("lattice does not live on the group".into()));
    }
    let ann = lattice.annihilator(dual)?;
    let mu_v = v
        .exact_measure(&dual)
        .ok_or_else(|| Error::Domain(format!("cannot measure {v:?}")))?;
    if mu_v != ann.density() {
        return Err(Error::Domain("V is not a fundamental domain of the annihilator".into()));
    }
    let w = to_f64(&dual.point_weight());
    let mut products = Vec::new();
    for (i, fv) in f.values.iter().enumerate() {
        let g = f.start + i as i64;
        let p = fv * phi.get(g).conj();
        if p.norm() != 0.0 {
            products.push((Elem::int(g), p));
        }
    }
    let mut lhs = 0.0;
    for l in lattice.points_in(&Domain::Whole)? {
        let c: C64 = products.iter().map(|(g, p)| p * group.pairing_unchecked(&l, g).conj()).sum::<C64>() * w;
        lhs += c.norm_sqr();
    }
    let mut fibers: BTreeMap<i64, C64> = BTreeMap::new();
    for (g, p) in &products {
        let (rep, _) = reduce_into_box(&dual, v, &ann, g)?;
        *fibers.entry(rep.as_integer().expect("integer point")).or_default() += p;
    }
    let rhs = to_f64(&mu_v) * fibers.values().map(|a| w * a.norm_sqr()).sum::<f64>();
    Ok((lhs, rhs))
}

/// Fiberization for a generator of a system on the integers. The left side is the
/// translation-side energy; the right side integrates the periodized product over
/// V_k with an equispaced rule that is exact for its trigonometric degree.
pub fn fiberization_on_integers(system: &FrameSystem, id: GenId, f: &Sequence) -> Result<(f64, f64)> {
    if system.group() != GroupSpec::Integers || f.modulus.is_some() {
        return Err(Error::Unsupported("quadrature fiberization applies to systems on the integers".into()));
    }
    let g = system.time_generator(id)?;
    let lhs = generator_energy(system, id, &TestFunction::Time(f.clone()))?;
    let n = system.lattice(id.k)?.steps[0].to_integer();
    let span = (f.values.len() + g.values.len()) as i64;
    let nodes = span / n + 2;
    let transform = |gamma: &crate::numeric::Rational| -> C64 {
        f.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * cis_turns_exact(&(-gamma * (f.start + i as i64))))
            .sum()
    };
    let mut mean = 0.0;
    for j in 0..nodes {
        let base = rat(j, n * nodes);
        let mut alpha = C64::new(0.0, 0.0);
        for s in 0..n {
            let gamma = base + rat(s, n);
            alpha += transform(&gamma) * system.gen_hat(id, &Elem::Exact(vec![gamma]))?.conj();
        }
        mean += alpha.norm_sqr();
    }
    mean /= nodes as f64;
    let mu_v = 1.0 / n as f64;
    Ok((lhs, mu_v * mu_v * mean))
}

/// |E_{k+1}(Phi) - E_k(Phi) - sum_m E_k(Psi^(m))| where E is the lattice-sum energy.
pub fn telescoping_residual(system: &FrameSystem, k: usize, f: &TestFunction) -> Result<f64> {
    system.level(k)?;
    let r = system.uep_residual(k)?;
    if !(r <= UEP_TOLERANCE) {
        return Err(Error::precondition(
            "unitary extension condition",
            format!("level {k} is not certified (residual {r:.3e})"),
        ));
    }
    let upper = generator_energy(system, GenId { k: k + 1, m: 0 }, f)?;
    let mut lower = generator_energy(system, GenId { k, m: 0 }, f)?;
    for m in 1..=system.rho(k)? {
        lower += generator_energy(system, GenId { k, m }, f)?;
    }
    Ok((upper - lower).abs())
}

/// Whether (1 - eps)||f||^2 <= E_K(Phi) <= (1 + eps)||f||^2 at level K and at the top level.
pub fn sandwich_bounds_check(system: &FrameSystem, f: &TestFunction, eps: f64, big_k: usize) -> Result<bool> {
    if big_k < system.k0 || big_k > system.k1 {
        return Err(Error::Index { k: big_k, lo: system.k0, hi: system.k1 });
    }
    let norm = f.norm_sq(&system.group());
    let tol = 1e-12 * (1.0 + norm);
    let mut levels = vec![big_k];
    if big_k != system.k1 {
        levels.push(system.k1);
    }
    for k in levels {
        let e = generator_energy(system, GenId { k, m: 0 }, f)?;
        if e < (1.0 - eps) * norm - tol || e > (1.0 + eps) * norm + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Gram matrix of the time-domain elements whose support lies in `lo..=hi` on the integers.
pub fn windowed_gram(system: &FrameSystem, lo: i64, hi: i64) -> Result<(Vec<(GenId, i64)>, DMatrix<f64>)> {
    if system.group() != GroupSpec::Integers {
        return Err(Error::Unsupported("windowed Gram matrices are formed on the integers".into()));
    }
    let mut elems = Vec::new();
    for id in system.generator_ids() {
        let g = system.time_generator(id)?;
        let step = system.lattice(id.k)?.steps[0].to_integer();
        let a = num_integer::Integer::div_ceil(&(lo - g.start), &step);
        let b = num_integer::Integer::div_floor(&(hi + 1 - g.end()), &step);
        for j in a..=b {
            elems.push((id, j * step, g.translate(j * step)));
        }
    }
    let n = elems.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = elems[i].2.inner_shifted(&elems[j].2, 0).norm();
        }
    }
    Ok((elems.into_iter().map(|(id, s, _)| (id, s)).collect(), gram))
}

/// Gram matrix of all elements of a system on Z_N.
pub fn cyclic_gram(system: &FrameSystem) -> Result<DMatrix<C64>> {
    let v = system_vectors(system)?;
    let n = v.len();
    let mut gram = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = v[i].2.iter().zip(&v[j].2).map(|(a, b)| a * b.conj()).sum();
        }
    }
    Ok(gram)
}
