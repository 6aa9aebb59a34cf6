//! B-spline generators, their refinement masks and the associated wavelet filters.

use crate::error::{Error, Result};
use crate::filters::{PeriodicFilter, SamplingPlan, VerificationReport};
use crate::group::{Elem, GroupSpec, Space};
use crate::lattice::{Domain, LatticeChain};
use crate::numeric::{binomial, binomial_product, cis_turns, cis_turns_exact, to_f64, Rational, C64};
use crate::sequence::Sequence;

/// Below this many points the indicator transform is summed term by term.
const DIRECT_SUM_LIMIT: i64 = 64;

/// Largest supported spline order.
pub const MAX_ORDER: u32 = 16;

/// Rejects orders the filter construction does not cover.
pub fn check_order(order: u32) -> Result<()> {
    if order == 0 {
        return Err(Error::Construction("B-spline order must be at least 1".into()));
    }
    if order > 1 && order % 2 == 1 {
        return Err(Error::Unsupported(format!(
            "B-spline order {order}: wavelet filters are available for order 1 and even orders only"
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::Unsupported(format!("B-spline order {order} exceeds {MAX_ORDER}")));
    }
    Ok(())
}

enum Axis {
    /// {0, ..., n-1} with pairing phase x * gamma / scale.
    Discrete { n: i64, scale: i64 },
    /// [0, a).
    Continuous { a: Rational },
}

fn axes(chain: &LatticeChain, k: usize) -> Result<Vec<Axis>> {
    let lv = chain.level(k)?;
    Ok(match (&chain.group, &lv.q) {
        (GroupSpec::Integers, Domain::IntegerInterval { lo: 0, hi }) => vec![Axis::Discrete { n: hi + 1, scale: 1 }],
        (GroupSpec::FiniteCyclic { modulus }, Domain::IntegerInterval { lo: 0, hi }) => {
            vec![Axis::Discrete { n: hi + 1, scale: *modulus }]
        }
        (_, Domain::HalfOpenBox { hi, .. }) => hi.iter().map(|a| Axis::Continuous { a: *a }).collect(),
        _ => return Err(Error::Unsupported("fundamental domain is not an anchored box".into())),
    })
}

/// sin(pi u), reduced to |u| <= 1/2 first so values near the zeros keep their relative accuracy.
fn sin_pi(u: &Coord) -> f64 {
    let r = match u {
        Coord::Exact(r) => {
            let two = Rational::from_integer(2);
            let mut r = r - two * (r / two).round();
            let half = Rational::new(1, 2);
            if r > half {
                r = Rational::from_integer(1) - r;
            } else if r < -half {
                r = Rational::from_integer(-1) - r;
            }
            to_f64(&r)
        }
        Coord::Float(f) => {
            let mut r = f - 2.0 * (f / 2.0).round();
            if r > 0.5 {
                r = 1.0 - r;
            } else if r < -0.5 {
                r = -1.0 - r;
            }
            r
        }
    };
    (std::f64::consts::PI * r).sin()
}

enum Coord {
    Exact(Rational),
    Float(f64),
}

impl Coord {
    fn mul_int(&self, n: i64) -> Coord {
        match self {
            Coord::Exact(r) => Coord::Exact(r * n),
            Coord::Float(f) => Coord::Float(f * n as f64),
        }
    }
    fn f(&self) -> f64 {
        match self {
            Coord::Exact(r) => to_f64(r),
            Coord::Float(f) => *f,
        }
    }
    fn is_zero_mod_one(&self) -> bool {
        match self {
            Coord::Exact(r) => r.is_integer(),
            Coord::Float(f) => f.fract() == 0.0,
        }
    }
    fn cis(&self) -> C64 {
        match self {
            Coord::Exact(r) => cis_turns_exact(r),
            Coord::Float(f) => cis_turns(*f),
        }
    }
    fn neg_half_times(&self, n: i64) -> Coord {
        match self {
            Coord::Exact(r) => Coord::Exact(-r * n / 2),
            Coord::Float(f) => Coord::Float(-f * n as f64 / 2.0),
        }
    }
}

fn coords(gamma: &Elem) -> Vec<Coord> {
    match gamma {
        Elem::Exact(v) => v.iter().map(|r| Coord::Exact(*r)).collect(),
        Elem::Float(v) => v.iter().map(|f| Coord::Float(*f)).collect(),
    }
}

/// Integral of (-x, gamma) over Q_k.
pub fn indicator_hat(chain: &LatticeChain, k: usize, gamma: &Elem) -> Result<C64> {
    chain.dual().validate(gamma)?;
    let mut acc = C64::new(1.0, 0.0);
    for (ax, c) in axes(chain, k)?.iter().zip(coords(gamma)) {
        acc *= match ax {
            Axis::Discrete { n, scale } => {
                let t = match c {
                    Coord::Exact(r) => Coord::Exact(r / *scale),
                    Coord::Float(f) => Coord::Float(f / *scale as f64),
                };
                if t.is_zero_mod_one() {
                    C64::new(*n as f64, 0.0)
                } else if *n <= DIRECT_SUM_LIMIT {
                    (0..*n).map(|x| t.mul_int(-x).cis()).sum()
                } else {
                    // Dirichlet kernel: e^{-pi i (n-1) t} sin(pi n t) / sin(pi t)
                    t.neg_half_times(n - 1).cis() * (sin_pi(&t.mul_int(*n)) / sin_pi(&t))
                }
            }
            Axis::Continuous { a } => {
                let at = match &c {
                    Coord::Exact(r) => Coord::Exact(r * a),
                    Coord::Float(f) => Coord::Float(f * to_f64(a)),
                };
                if c.f() == 0.0 {
                    C64::new(to_f64(a), 0.0)
                } else {
                    at.neg_half_times(1).cis() * (sin_pi(&at) / (std::f64::consts::PI * c.f()))
                }
            }
        };
    }
    Ok(acc)
}

/// Fourier transform of the normalized B-spline generator at level k.
pub fn bspline_hat(chain: &LatticeChain, k: usize, order: u32, gamma: &Elem) -> Result<C64> {
    if order == 0 {
        return Err(Error::Construction("B-spline order must be at least 1".into()));
    }
    let mu = to_f64(&chain.level(k)?.mu_q);
    let chi = indicator_hat(chain, k, gamma)?;
    Ok(chi.powu(order) * mu.powf(0.5 - order as f64))
}

/// Time-domain generator on Z or Z_N: the N-fold self-convolution of the indicator of Q_k, normalized.
pub fn bspline_time(chain: &LatticeChain, k: usize, order: u32) -> Result<Sequence> {
    if order == 0 {
        return Err(Error::Construction("B-spline order must be at least 1".into()));
    }
    let lv = chain.level(k)?;
    let n = match lv.q {
        Domain::IntegerInterval { lo: 0, hi } => hi + 1,
        _ => {
            return Err(Error::Unsupported(
                "explicit time-domain sequences exist only on the integers and on Z_N".into(),
            ))
        }
    };
    let ones = vec![C64::new(1.0, 0.0); n as usize];
    let base = match chain.group {
        GroupSpec::FiniteCyclic { modulus } => {
            let mut v = vec![C64::new(0.0, 0.0); modulus as usize];
            v[..n as usize].copy_from_slice(&ones);
            Sequence::on_cyclic(modulus, v)
        }
        _ => Sequence::on_integers(0, ones),
    };
    let mut out = base.clone();
    for _ in 1..order {
        out = out.convolve(&base);
    }
    let scale = (n as f64).powf(0.5 - order as f64);
    out.values.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Cardinal B-spline of order n supported on [0, n).
fn cardinal(n: u32, t: f64) -> f64 {
    if t < 0.0 || t >= n as f64 {
        return 0.0;
    }
    if n == 1 {
        return 1.0;
    }
    let mut fact = 1.0;
    for i in 1..n {
        fact *= i as f64;
    }
    let mut s = 0.0;
    for j in 0..=n {
        let u = t - j as f64;
        if u > 0.0 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binomial(n, j) as f64 * u.powi(n as i32 - 1);
        }
    }
    s / fact
}

/// Point value of the generator on the torus or the real line.
pub fn bspline_time_at(chain: &LatticeChain, k: usize, order: u32, x: f64) -> Result<f64> {
    if order == 0 {
        return Err(Error::Construction("B-spline order must be at least 1".into()));
    }
    let a = match (&chain.group, &chain.level(k)?.q) {
        (GroupSpec::Torus | GroupSpec::Euclidean { dim: 1 }, Domain::HalfOpenBox { hi, .. }) => to_f64(&hi[0]),
        _ => return Err(Error::Unsupported("point evaluation is provided on the torus and the real line".into())),
    };
    let scale = a.powf(0.5 - order as f64) * a.powi(order as i32 - 1);
    let value = |y: f64| cardinal(order, y / a);
    Ok(scale
        * match chain.group {
            GroupSpec::Torus => {
                let base = x.rem_euclid(1.0);
                let reps = (order as f64 * a).ceil() as i64 + 1;
                (0..=reps).map(|j| value(base + j as f64)).sum::<f64>()
            }
            _ => value(x),
        })
}

fn mask_filter(chain: &LatticeChain, k: usize, ints: &[i64], scale: f64) -> Result<PeriodicFilter> {
    let eta = chain.eta(k)?.clone();
    let coeffs = ints.iter().map(|c| C64::new(*c as f64 * scale, 0.0)).collect();
    PeriodicFilter::trig(chain, k, eta, 0, coeffs)
}

/// sqrt(c / 2^{2N-1}), exact whenever the ratio is a perfect square.
fn normalization(order: u32, c: i64) -> f64 {
    (c as f64 / 2f64.powi(2 * order as i32 - 1)).sqrt()
}

/// Low-pass filter 2^{-(N-1/2)} (1+z)^N with z = (-eta_k, gamma).
pub fn h_filter(chain: &LatticeChain, k: usize, order: u32) -> Result<PeriodicFilter> {
    check_order(order)?;
    mask_filter(chain, k, &binomial_product(order, 0), normalization(order, 1))
}

/// Integer mask of the m-th wavelet filter, before normalization: (1+z)^{N-m} (1-z)^m.
pub fn g_mask_integers(order: u32, m: u32) -> Vec<i64> {
    binomial_product(order - m, m)
}

/// The N high-pass filters 2^{-(N-1/2)} sqrt(C(N,m)) (1+z)^{N-m} (1-z)^m, m = 1..N.
pub fn g_filters(chain: &LatticeChain, k: usize, order: u32) -> Result<Vec<PeriodicFilter>> {
    check_order(order)?;
    (1..=order)
        .map(|m| {
            let scale = normalization(order, binomial(order, m));
            mask_filter(chain, k, &g_mask_integers(order, m), scale)
        })
        .collect()
}

/// psi(x) = sum_j c_j phi_{k+1}(x - j eta_k) on Z or Z_N.
pub fn wavelet_time(chain: &LatticeChain, k: usize, filter: &PeriodicFilter, order: u32) -> Result<Sequence> {
    let (eta, start, coeffs) = crate::filters::mask_coefficients(filter)?;
    let step = eta
        .as_integer()
        .ok_or_else(|| Error::Unsupported("time-domain wavelets need an integer shift".into()))?;
    let phi = bspline_time(chain, k + 1, order)?;
    let mask = match chain.group {
        GroupSpec::FiniteCyclic { modulus } => {
            let mut v = vec![C64::new(0.0, 0.0); modulus as usize];
            for (j, c) in coeffs.iter().enumerate() {
                v[((start + j as i64) * step).rem_euclid(modulus) as usize] += c;
            }
            Sequence::on_cyclic(modulus, v)
        }
        _ => {
            let len = (coeffs.len() as i64 - 1) * step + 1;
            let mut v = vec![C64::new(0.0, 0.0); len as usize];
            for (j, c) in coeffs.iter().enumerate() {
                v[j * step as usize] += c;
            }
            Sequence::on_integers(start * step, v)
        }
    };
    Ok(phi.convolve(&mask))
}

/// Point value of a wavelet on the torus or the real line.
pub fn wavelet_time_at(chain: &LatticeChain, k: usize, filter: &PeriodicFilter, order: u32, x: f64) -> Result<C64> {
    let (eta, start, coeffs) = crate::filters::mask_coefficients(filter)?;
    let e = eta.to_f64()[0];
    let mut acc = C64::new(0.0, 0.0);
    for (j, c) in coeffs.iter().enumerate() {
        acc += c * bspline_time_at(chain, k + 1, order, x - (start + j as i64) as f64 * e)?;
    }
    Ok(acc)
}

/// Region of the dual on which refinement identities are sampled.
pub fn refinement_region(chain: &LatticeChain, k: usize) -> Result<Domain> {
    let next = chain.level(k + 1)?;
    Ok(match chain.dual() {
        Space::Circle | Space::Cyclic { .. } => Domain::Whole,
        Space::Integers => match next.v {
            Domain::IntegerInterval { lo, hi } => Domain::interval(2 * lo, 2 * hi + 1),
            _ => unreachable!("integer duals carry integer intervals"),
        },
        Space::Real { .. } => match &next.v {
            Domain::HalfOpenBox { lo, hi } => {
                Domain::half_open(lo.iter().map(|x| x * 2).collect(), hi.iter().map(|x| x * 2).collect())
            }
            _ => unreachable!("Euclidean duals carry boxes"),
        },
    })
}

/// max |Phi_k(gamma) - H(gamma) Phi_{k+1}(gamma)| over the sampled points.
pub fn refinement_residual(chain: &LatticeChain, k: usize, order: u32, plan: &SamplingPlan) -> Result<VerificationReport> {
    let h = h_filter(chain, k, order)?;
    let region = refinement_region(chain, k)?;
    let (points, exhaustive) = plan.points_for(&chain.dual(), &region)?;
    VerificationReport::collect(&points, exhaustive, |g| {
        let lhs = bspline_hat(chain, k, order, g)?;
        let rhs = h.eval_unchecked(g)? * bspline_hat(chain, k + 1, order, g)?;
        Ok((lhs - rhs).norm())
    })
}

/// sup over x in Q_k of |(-x, gamma) - 1|.
pub fn character_deviation(chain: &LatticeChain, k: usize, gamma: &Elem) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (ax, c) in axes(chain, k)?.iter().zip(coords(gamma)) {
        let dev = match ax {
            Axis::Discrete { n, scale } => {
                let mut m: f64 = 0.0;
                for x in 0..*n {
                    let z = match &c {
                        Coord::Exact(r) => cis_turns_exact(&(-r * x / *scale)),
                        Coord::Float(f) => cis_turns(-f * x as f64 / *scale as f64),
                    };
                    m = m.max((z - 1.0).norm());
                }
                m
            }
            Axis::Continuous { a } => {
                let t = (c.f() * to_f64(a)).abs();
                if t >= 0.5 {
                    2.0
                } else {
                    2.0 * (std::f64::consts::PI * t).sin()
                }
            }
        };
        // |prod z_r - 1| <= sum |z_r - 1| for unit z_r
        worst += dev;
    }
    Ok(worst.min(2.0))
}

/// Points where the character stays within delta of 1 on Q_k, and whether the
/// normalized generator obeys |mu(V_k)|Phi|^2 - 1| <= 1 - (1 - delta)^{2N} there.
pub fn decay_bound_check(
    chain: &LatticeChain,
    k: usize,
    order: u32,
    delta: f64,
    points: &[Elem],
) -> Result<(bool, Vec<Elem>)> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("delta = {delta} must lie in [0, 1]")));
    }
    let mu_v = to_f64(&chain.level(k)?.mu_v);
    let bound = 1.0 - (1.0 - delta).powi(2 * order as i32);
    let mut ok = true;
    let mut hyp = Vec::new();
    for g in points {
        if character_deviation(chain, k, g)? <= delta {
            let v = mu_v * bspline_hat(chain, k, order, g)?.norm_sqr();
            if (v - 1.0).abs() > bound + 1e-14 {
                ok = false;
            }
            hyp.push(g.clone());
        }
    }
    Ok((ok, hyp))
}

/// Exact support of the time-domain wavelet predicted from the mask:
/// N (|Q_{k+1}| - 1) + N eta_k + 1 points.
pub fn predicted_wavelet_support(chain: &LatticeChain, k: usize, order: u32) -> Result<i64> {
    let q = chain.level(k + 1)?.mu_q;
    let eta = chain.eta(k)?.as_integer().ok_or_else(|| Error::Unsupported("non-integer shift".into()))?;
    let n = order as i64;
    Ok(n * (q.to_integer() - 1) + n * eta + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::assemble_p;
    use crate::filters::verify_uep_matrix;

    /// Direct summation of the discrete Fourier transform of a sequence on Z.
    fn dft_z(s: &Sequence, gamma: f64) -> C64 {
        s.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * cis_turns(-((s.start + i as i64) as f64) * gamma))
            .sum()
    }

    #[test]
    fn time_generator_small_case() {
        let c = LatticeChain::dyadic_integers(2).unwrap();
        let phi = bspline_time(&c, 0, 2).unwrap();
        let expect: Vec<f64> = [1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0].iter().map(|v| v * 4f64.powf(-1.5)).collect();
        assert_eq!(phi.start, 0);
        for (a, b) in phi.values.iter().zip(&expect) {
            assert!((a.re - b).abs() < 1e-16);
        }
    }

    #[test]
    fn hat_matches_transform_of_time_sequence() {
        let c = LatticeChain::dyadic_integers(4).unwrap();
        for order in [1, 2, 4] {
            for k in 0..4 {
                let phi = bspline_time(&c, k, order).unwrap();
                for j in 0..97 {
                    let g = Elem::rat(j, 97);
                    let a = bspline_hat(&c, k, order, &g).unwrap();
                    let b = dft_z(&phi, j as f64 / 97.0);
                    assert!((a - b).norm() < 1e-12, "order {order} k {k} j {j}: {a} vs {b}");
                }
            }
        }
        let c = LatticeChain::dyadic_cyclic(4).unwrap();
        for k in 0..4 {
            let phi = bspline_time(&c, k, 2).unwrap();
            for g in 0..16 {
                let a = bspline_hat(&c, k, 2, &Elem::int(g)).unwrap();
                let b: C64 = (0..16)
                    .map(|x| phi.get(x) * cis_turns(-(x * g) as f64 / 16.0))
                    .sum();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn continuous_generator_integrates_to_its_transform_at_zero() {
        let c = LatticeChain::euclidean_diagonal(&[vec![4, 2]]).unwrap();
        for order in [1u32, 2, 4] {
            let phi0 = bspline_hat(&c, 0, order, &Elem::int(0)).unwrap();
            let n = 20000;
            let a = 0.25;
            let h = order as f64 * a / n as f64;
            let integral: f64 = (0..n).map(|i| bspline_time_at(&c, 0, order, (i as f64 + 0.5) * h).unwrap() * h).sum();
            assert!((integral - phi0.re).abs() < 1e-6, "order {order}: {integral} vs {}", phi0.re);
        }
    }

    #[test]
    fn haar_and_linear_masks() {
        let c = LatticeChain::dyadic_integers(1).unwrap();
        let h = h_filter(&c, 0, 1).unwrap();
        let (_, start, coeffs) = crate::filters::mask_coefficients(&h).unwrap();
        assert_eq!(start, 0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((coeffs[0].re - s).abs() < 1e-16 && (coeffs[1].re - s).abs() < 1e-16);
        let c = LatticeChain::dyadic_integers(3).unwrap();
        let g = g_filters(&c, 0, 2).unwrap();
        let (_, _, coeffs) = crate::filters::mask_coefficients(&g[0]).unwrap();
        let got: Vec<f64> = coeffs.iter().map(|z| z.re).collect();
        assert!((got[0] - 0.5).abs() < 1e-16 && got[1] == 0.0 && (got[2] + 0.5).abs() < 1e-16);
    }

    #[test]
    fn odd_orders_are_rejected() {
        let c = LatticeChain::dyadic_integers(3).unwrap();
        assert!(matches!(g_filters(&c, 0, 3), Err(Error::Unsupported(_))));
        assert!(matches!(h_filter(&c, 0, 0), Err(Error::Construction(_))));
        let t = LatticeChain::torus_sequence(&[2, 3]).unwrap();
        assert!(matches!(h_filter(&t, 0, 2), Err(Error::Precondition { .. })));
    }

    #[test]
    fn uep_holds_for_spline_filters() {
        let c = LatticeChain::dyadic_integers(3).unwrap();
        for order in [1, 2, 4, 6] {
            for k in 0..3 {
                let p = assemble_p(&c, k, &h_filter(&c, k, order).unwrap(), &g_filters(&c, k, order).unwrap()).unwrap();
                let r = verify_uep_matrix(&p, &SamplingPlan::Standard { grid: 257, random: 64, seed: 3 }).unwrap();
                assert!(r.residual < 1e-13, "order {order} k {k}: {}", r.residual);
                let g = Elem::rat(3, 17);
                assert!((p.residual_at(&g).unwrap() - p.residual_entrywise_at(&g).unwrap()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn refinement_on_small_exact_grid() {
        let c = LatticeChain::dyadic_integers(2).unwrap();
        let pts: Vec<Elem> = (0..16).map(|j| Elem::rat(j, 16)).collect();
        let r = refinement_residual(&c, 1, 1, &SamplingPlan::Points(pts)).unwrap();
        assert!(r.residual <= 1e-15, "{}", r.residual);
    }

    #[test]
    fn wavelet_support_and_moments() {
        let c = LatticeChain::dyadic_integers(10).unwrap();
        let g = g_filters(&c, 5, 2).unwrap();
        for (m, f) in g.iter().enumerate() {
            let psi = wavelet_time(&c, 5, f, 2).unwrap();
            let (a, b) = psi.support().unwrap();
            assert_eq!((a, b - a + 1), (0, predicted_wavelet_support(&c, 5, 2).unwrap()));
            assert!(psi.moment(0).norm() < 1e-12);
            if m == 1 {
                assert!(psi.moment(1).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn discrete_moments_of_integer_masks() {
        for order in [2u32, 4, 6] {
            for m in 1..=order {
                let mask = g_mask_integers(order, m);
                for p in 0..m {
                    let s: i64 = mask.iter().enumerate().map(|(j, c)| c * (j as i64).pow(p)).sum();
                    assert_eq!(s, 0, "order {order} m {m} p {p}");
                }
            }
        }
    }

    #[test]
    fn decay_bound_on_small_frequencies() {
        let c = LatticeChain::dyadic_integers(3).unwrap();
        let pts: Vec<Elem> = (0..256).map(|j| Elem::rat(j, 256 * 20)).collect();
        let (ok, hyp) = decay_bound_check(&c, 2, 2, 0.5, &pts).unwrap();
        assert!(ok);
        assert_eq!(hyp.len(), 256);
    }
}
