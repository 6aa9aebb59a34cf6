//! Self-similar tiles of 2x2 integer dilations with |det| = 2, approximated by
//! digit expansions with exact dyadic coordinates.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported iteration count.
pub const MAX_ITERATIONS: u32 = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct TileSpec {
    pub a: [[i64; 2]; 2],
    pub eta: [i64; 2],
}

fn det(a: &[[i64; 2]; 2]) -> i64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

fn apply(m: &[[i64; 2]; 2], v: [i64; 2]) -> [i64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

impl TileSpec {
    pub fn new(a: [[i64; 2]; 2], eta: [i64; 2]) -> Result<Self> {
        let d = det(&a);
        if d.abs() != 2 {
            return Err(Error::Construction(format!("|det A| must be 2, got {}", d.abs())));
        }
        // eta in A Z^2 iff adj(A) eta is divisible by det A
        let adj = [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]];
        let w = apply(&adj, eta);
        if w[0] % d == 0 && w[1] % d == 0 {
            return Err(Error::Construction(format!("eta = {eta:?} lies in A Z^2; it does not represent the other coset")));
        }
        let spec = TileSpec { a, eta };
        let rho = spec.contraction_radius();
        if !(rho < 1.0) {
            return Err(Error::Construction(format!("A has an eigenvalue inside the closed unit disc (radius of the inverse {rho})")));
        }
        Ok(spec)
    }

    /// The twin dragon.
    pub fn twin_dragon() -> Self {
        TileSpec::new([[1, -1], [1, 1]], [1, 0]).expect("valid")
    }

    /// sign(det) adj(A^T): the numerator of the contraction (A^T)^{-1} over |det| = 2.
    fn contraction_numerator(&self) -> [[i64; 2]; 2] {
        let a = &self.a;
        let s = det(a).signum();
        // adj(A^T) = adj(A)^T
        [[s * a[1][1], -s * a[1][0]], [-s * a[0][1], s * a[0][0]]]
    }

    /// (A^T)^{-1} in floating point.
    pub fn contraction(&self) -> [[f64; 2]; 2] {
        let n = self.contraction_numerator();
        [[n[0][0] as f64 / 2.0, n[0][1] as f64 / 2.0], [n[1][0] as f64 / 2.0, n[1][1] as f64 / 2.0]]
    }

    /// Spectral radius of the contraction.
    pub fn contraction_radius(&self) -> f64 {
        let m = self.contraction();
        let tr = m[0][0] + m[1][1];
        let dt = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = Complex64::new(tr * tr - 4.0 * dt, 0.0).sqrt();
        let l1 = (Complex64::new(tr, 0.0) + disc) / 2.0;
        let l2 = (Complex64::new(tr, 0.0) - disc) / 2.0;
        l1.norm().max(l2.norm())
    }

    /// ||eta|| sum_{j>=1} ||C^j||_2 where C is the contraction.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.contraction();
        let mut p = c;
        let mut total = 0.0;
        for _ in 0..10_000 {
            let n = spectral_norm(&p);
            total += n;
            if n < 1e-18 * total.max(1.0) {
                break;
            }
            p = matmul(&p, &c);
        }
        let e = ((self.eta[0] * self.eta[0] + self.eta[1] * self.eta[1]) as f64).sqrt();
        e * total
    }
}

fn matmul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn spectral_norm(m: &[[f64; 2]; 2]) -> f64 {
    // largest eigenvalue of M^T M
    let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let d = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    ((tr + disc) / 2.0).sqrt()
}

/// Points with coordinates numerator / 2^r, sorted by x then y and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileCloud {
    pub r: u32,
    pub numerators: Vec<[i64; 2]>,
}

impl TileCloud {
    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        let s = (1u64 << self.r) as f64;
        self.numerators.iter().map(|p| [p[0] as f64 / s, p[1] as f64 / s]).collect()
    }

    fn normalize(r: u32, mut pts: Vec<[i64; 2]>) -> Self {
        pts.sort_unstable();
        pts.dedup();
        TileCloud { r, numerators: pts }
    }
}

fn check_iterations(r: u32) -> Result<()> {
    if r > MAX_ITERATIONS {
        return Err(Error::Resource(format!("at most {MAX_ITERATIONS} iterations are supported, asked for {r}")));
    }
    Ok(())
}

/// One step Q -> C Q u C (eta + Q).
pub fn tile_step(spec: &TileSpec, q: &TileCloud) -> TileCloud {
    let c = spec.contraction_numerator();
    let scale = 1i64 << q.r;
    let shift = [spec.eta[0] * scale, spec.eta[1] * scale];
    let mut out = Vec::with_capacity(2 * q.len());
    for p in &q.numerators {
        out.push(apply(&c, *p));
        out.push(apply(&c, [p[0] + shift[0], p[1] + shift[1]]));
    }
    TileCloud::normalize(q.r + 1, out)
}

/// Q^(r), starting from {0}.
pub fn tile_iterate(spec: &TileSpec, r: u32) -> Result<TileCloud> {
    check_iterations(r)?;
    let mut q = TileCloud { r: 0, numerators: vec![[0, 0]] };
    for _ in 0..r {
        q = tile_step(spec, &q);
    }
    Ok(q)
}

/// All sums sum_{j=1}^r C^j eps_j eta, enumerated digit by digit.
pub fn digit_expansion(spec: &TileSpec, r: u32) -> Result<TileCloud> {
    check_iterations(r)?;
    let c = spec.contraction_numerator();
    // terms[j-1] = C^j eta as a numerator over 2^r
    let mut terms = Vec::with_capacity(r as usize);
    let mut v = spec.eta;
    for j in 1..=r {
        v = apply(&c, v);
        let up = 1i64 << (r - j);
        terms.push([v[0] * up, v[1] * up]);
    }
    let mut out = Vec::with_capacity(1 << r);
    for eps in 0u64..(1u64 << r) {
        let mut p = [0i64, 0i64];
        for (j, t) in terms.iter().enumerate() {
            if eps >> j & 1 == 1 {
                p[0] += t[0];
                p[1] += t[1];
            }
        }
        out.push(p);
    }
    Ok(TileCloud::normalize(r, out))
}

/// Whether `next` equals C prev u C (eta + prev) as point sets.
pub fn recursion_holds(spec: &TileSpec, prev: &TileCloud, next: &TileCloud) -> bool {
    next.r == prev.r + 1 && tile_step(spec, prev) == *next
}

/// Compares the digit expansion at depth r against one recursion step from depth r - 1.
pub fn tile_selfsimilarity_check(spec: &TileSpec, r: u32) -> Result<bool> {
    if r == 0 {
        return Err(Error::Domain("self-similarity needs at least one iteration".into()));
    }
    let prev = digit_expansion(spec, r - 1)?;
    let next = digit_expansion(spec, r)?;
    Ok(recursion_holds(spec, &prev, &next))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureEstimate {
    /// Distinct cells of the unit torus hit, times h^2.
    pub estimate: f64,
    /// Share of hit torus cells reached from more than one integer translate.
    pub violation_fraction: f64,
    pub cells_hit: usize,
}

/// Box-counting estimate of the tile measure on an h-grid of the unit torus; 1/h must be an integer.
pub fn tile_measure_estimate(cloud: &TileCloud, h: f64) -> Result<MeasureEstimate> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Domain(format!("grid resolution {h} must lie in (0, 1]")));
    }
    let n = (1.0 / h).round();
    if (n * h - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("1/h = {} is not an integer", 1.0 / h)));
    }
    let n = n as i128;
    let den = 1i128 << cloud.r;
    let mut cells: BTreeMap<(i128, i128), BTreeSet<(i128, i128)>> = BTreeMap::new();
    for p in &cloud.numerators {
        let (x, y) = (p[0] as i128, p[1] as i128);
        let (ix, iy) = (x.div_euclid(den), y.div_euclid(den));
        let (fx, fy) = (x.rem_euclid(den), y.rem_euclid(den));
        let cell = (fx * n / den, fy * n / den);
        cells.entry(cell).or_default().insert((ix, iy));
    }
    let hit = cells.len();
    let multi = cells.values().filter(|s| s.len() > 1).count();
    Ok(MeasureEstimate {
        estimate: hit as f64 * h * h,
        violation_fraction: if hit == 0 { 0.0 } else { multi as f64 / hit as f64 },
        cells_hit: hit,
    })
}
