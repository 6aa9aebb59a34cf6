//! Generators given by normalized indicators of nested frequency sets, with
//! their piecewise-constant low-pass and high-pass filters.

use crate::error::{Error, Result};
use crate::filters::{Piece, PeriodicFilter};
use crate::group::{Elem, Space};
use crate::lattice::{ChainKind, Domain, LatticeChain};
use crate::numeric::{int, to_f64, Rational, C64};

/// Parameters of the nested frequency sets, one variant per supported chain family.
#[derive(Clone, Debug, PartialEq)]
pub enum OmegaExample {
    /// On Z_{2^M}: {0, ..., L_k}.
    Cyclic(Vec<i64>),
    /// On the dual of the torus: {-L_k, ..., L_k}.
    Torus(Vec<i64>),
    /// On R^s: the box prod_r [-L_{k,r}, L_{k,r}); indexed [axis][level].
    Boxes(Vec<Vec<Rational>>),
    /// On R^s: the closed ball of radius L_k.
    Balls(Vec<Rational>),
}

/// The sets Omega_k for every level of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaChain {
    pub space: Space,
    pub domains: Vec<Domain>,
    /// Omega at the top level: the set on which the finite system reproduces every function.
    pub exhaustion: Domain,
    /// True when Omega_k = V_k at every level.
    pub shannon: bool,
}

fn bad(msg: String) -> Error {
    Error::Construction(msg)
}

pub fn instantiate_example(chain: &LatticeChain, example: &OmegaExample) -> Result<OmegaChain> {
    let levels = chain.levels.len();
    let domains: Vec<Domain> = match (&chain.kind, example) {
        (ChainKind::DyadicCyclic { m }, OmegaExample::Cyclic(l)) => {
            if l.len() != levels {
                return Err(bad(format!("L has {} entries, the chain has {levels} levels", l.len())));
            }
            if l[*m as usize] != (1 << m) - 1 {
                return Err(bad(format!("L_top must equal 2^M - 1 = {}", (1i64 << m) - 1)));
            }
            for (k, lk) in l.iter().enumerate() {
                if *lk < 0 || *lk > (1i64 << k) - 1 {
                    return Err(bad(format!("L_{k} = {lk} must lie in 0..={}", (1i64 << k) - 1)));
                }
                if k > 0 && *lk < l[k - 1] {
                    return Err(bad(format!("L must be non-decreasing; L_{k} < L_{}", k - 1)));
                }
            }
            l.iter().map(|lk| Domain::interval(0, *lk)).collect()
        }
        (ChainKind::TorusSequence { .. }, OmegaExample::Torus(l)) => {
            if l.len() != levels {
                return Err(bad(format!("L has {} entries, the chain has {levels} levels", l.len())));
            }
            for (k, lk) in l.iter().enumerate() {
                let n = chain.levels[k].mu_v.to_integer();
                if *lk < 0 || *lk > n / 2 - 1 {
                    return Err(bad(format!("L_{k} = {lk} must lie in 0..={}", n / 2 - 1)));
                }
                if k > 0 && *lk <= l[k - 1] {
                    return Err(bad(format!("L must be strictly increasing; L_{k} <= L_{}", k - 1)));
                }
            }
            l.iter().map(|lk| Domain::interval(-lk, *lk)).collect()
        }
        (ChainKind::EuclideanDiagonal { m_table }, OmegaExample::Boxes(lt)) => {
            if lt.len() != m_table.len() || lt.iter().any(|row| row.len() != levels) {
                return Err(bad("L table must have one row per axis and one entry per level".into()));
            }
            let mut out = Vec::new();
            for k in 0..levels {
                let (lo, hi): (Vec<Rational>, Vec<Rational>) = match &chain.levels[k].v {
                    Domain::HalfOpenBox { hi, .. } => {
                        let mut lo = Vec::new();
                        let mut h = Vec::new();
                        for (r, half) in hi.iter().enumerate() {
                            let l = lt[r][k];
                            if l <= int(0) || l > *half {
                                return Err(bad(format!("L[{r}][{k}] = {l} must lie in (0, {half}]")));
                            }
                            if k > 0 && l < lt[r][k - 1] {
                                return Err(bad(format!("L[{r}] must be non-decreasing")));
                            }
                            lo.push(-l);
                            h.push(l);
                        }
                        (lo, h)
                    }
                    _ => unreachable!("Euclidean levels carry boxes"),
                };
                out.push(Domain::half_open(lo, hi));
            }
            out
        }
        (ChainKind::EuclideanDiagonal { m_table }, OmegaExample::Balls(l)) => {
            if l.len() != levels {
                return Err(bad(format!("L has {} entries, the chain has {levels} levels", l.len())));
            }
            let s = m_table.len();
            let mut out = Vec::new();
            for k in 0..levels {
                let min_half = match &chain.levels[k].v {
                    Domain::HalfOpenBox { hi, .. } => *hi.iter().min().expect("non-empty"),
                    _ => unreachable!("Euclidean levels carry boxes"),
                };
                if l[k] <= int(0) || l[k] >= min_half {
                    return Err(bad(format!("L_{k} = {} must lie in (0, {min_half})", l[k])));
                }
                if k > 0 && l[k] < l[k - 1] {
                    return Err(bad("L must be non-decreasing".into()));
                }
                out.push(Domain::Ball { radius: l[k], dim: s });
            }
            out
        }
        _ => {
            return Err(Error::VariantMismatch(format!(
                "frequency-set parameters {example:?} do not fit a {} chain",
                chain.kind.variant_name()
            )))
        }
    };
    let omega = OmegaChain {
        space: chain.dual(),
        exhaustion: domains.last().cloned().expect("chains have at least one level"),
        domains,
        shannon: false,
    };
    omega.check_nesting(chain)?;
    Ok(omega)
}

impl OmegaChain {
    /// Omega_k = V_k at every level; needs the V_k to be nested.
    pub fn shannon(chain: &LatticeChain) -> Result<Self> {
        let domains: Vec<Domain> = chain.levels.iter().map(|l| l.v.clone()).collect();
        let omega = OmegaChain {
            space: chain.dual(),
            exhaustion: domains.last().cloned().expect("chains have at least one level"),
            domains,
            shannon: true,
        };
        omega.check_nesting(chain)?;
        Ok(omega)
    }

    fn check_nesting(&self, chain: &LatticeChain) -> Result<()> {
        for (k, d) in self.domains.iter().enumerate() {
            if d.is_subset_of(&self.space, &chain.levels[k].v) != Some(true) {
                return Err(bad(format!("Omega_{k} is not contained in V_{k}")));
            }
            if k + 1 < self.domains.len() && d.is_subset_of(&self.space, &self.domains[k + 1]) != Some(true) {
                return Err(bad(format!("Omega_{k} is not contained in Omega_{}", k + 1)));
            }
        }
        Ok(())
    }

    pub fn omega(&self, k: usize) -> Result<&Domain> {
        self.domains.get(k).ok_or(Error::Index { k, lo: 0, hi: self.domains.len() - 1 })
    }

    /// Whether Omega_k is a proper subset of V_k (strictly smaller measure).
    pub fn is_proper(&self, chain: &LatticeChain, k: usize) -> Result<bool> {
        let om = self.omega(k)?.measure(&self.space)?;
        let v = to_f64(&chain.level(k)?.mu_v);
        Ok(om < v)
    }
}

/// mu(V_k)^{-1/2} times the indicator of Omega_k.
pub fn char_generator(chain: &LatticeChain, omega: &OmegaChain, k: usize, gamma: &Elem) -> Result<C64> {
    let mu = to_f64(&chain.level(k)?.mu_v);
    Ok(if omega.omega(k)?.contains(&omega.space, gamma) {
        C64::new(mu.powf(-0.5), 0.0)
    } else {
        C64::new(0.0, 0.0)
    })
}

fn unit_at(d: usize, l: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); d];
    v[l] = C64::new((d as f64).sqrt(), 0.0);
    v
}

/// sqrt(d_k) on Omega_k and 0 on the rest of the refined fundamental domain.
pub fn h_char(chain: &LatticeChain, omega: &OmegaChain, k: usize) -> Result<PeriodicFilter> {
    let d = chain.d(k)?;
    PeriodicFilter::piecewise(
        chain,
        k,
        vec![
            Piece { region: omega.omega(k)?.clone(), values: unit_at(d, 0) },
            Piece { region: Domain::Whole, values: vec![C64::new(0.0, 0.0); d] },
        ],
    )
}

/// The d_k high-pass filters for a proper subset Omega_k of V_k.
pub fn g_char_proper(chain: &LatticeChain, omega: &OmegaChain, k: usize) -> Result<Vec<PeriodicFilter>> {
    let d = chain.d(k)?;
    if !omega.is_proper(chain, k)? {
        return Err(Error::Construction(format!(
            "Omega_{k} equals V_{k}; use the filters for the full fundamental domain instead"
        )));
    }
    let om = omega.omega(k)?.clone();
    let mut out = Vec::with_capacity(d);
    for m in 1..d {
        out.push(PeriodicFilter::piecewise(
            chain,
            k,
            vec![
                Piece { region: om.clone(), values: unit_at(d, m) },
                Piece { region: Domain::Whole, values: unit_at(d, m - 1) },
            ],
        )?);
    }
    out.push(PeriodicFilter::piecewise(
        chain,
        k,
        vec![
            Piece { region: om, values: vec![C64::new(0.0, 0.0); d] },
            Piece { region: Domain::Whole, values: unit_at(d, d - 1) },
        ],
    )?);
    Ok(out)
}

/// The d_k - 1 high-pass filters when Omega_k = V_k.
pub fn g_char_shannon(chain: &LatticeChain, omega: &OmegaChain, k: usize) -> Result<Vec<PeriodicFilter>> {
    let d = chain.d(k)?;
    if omega.is_proper(chain, k)? {
        return Err(Error::Construction(format!("Omega_{k} is a proper subset of V_{k}")));
    }
    (1..d)
        .map(|m| PeriodicFilter::piecewise(chain, k, vec![Piece { region: Domain::Whole, values: unit_at(d, m) }]))
        .collect()
}

/// Parses a real L value into an exact rational.
pub fn rational_param(x: f64) -> Result<Rational> {
    crate::numeric::rational_from_f64(x)
        .ok_or_else(|| Error::Input(format!("L value {x} is not representable as a dyadic rational")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{assemble_p, verify_uep_matrix, SamplingPlan};
    use crate::numeric::rat;

    #[test]
    fn proper_example_on_z8() {
        let c = LatticeChain::dyadic_cyclic(3).unwrap();
        let om = instantiate_example(&c, &OmegaExample::Cyclic(vec![0, 1, 2, 7])).unwrap();
        assert!(!om.is_proper(&c, 1).unwrap());
        assert!(om.is_proper(&c, 2).unwrap());
        assert!(g_char_proper(&c, &om, 1).is_err());
        let p = assemble_p(&c, 2, &h_char(&c, &om, 2).unwrap(), &g_char_proper(&c, &om, 2).unwrap()).unwrap();
        let r = verify_uep_matrix(&p, &SamplingPlan::default()).unwrap();
        assert!(r.exhaustive);
        assert_eq!(r.samples, 4);
        assert!(r.residual < 1e-15);
    }

    #[test]
    fn shannon_on_z8() {
        let c = LatticeChain::dyadic_cyclic(3).unwrap();
        let om = OmegaChain::shannon(&c).unwrap();
        for k in 0..3 {
            let g = g_char_shannon(&c, &om, k).unwrap();
            assert_eq!(g.len(), 1);
            let p = assemble_p(&c, k, &h_char(&c, &om, k).unwrap(), &g).unwrap();
            assert!(verify_uep_matrix(&p, &SamplingPlan::default()).unwrap().residual < 1e-15);
        }
    }

    #[test]
    fn torus_example_filters() {
        let c = LatticeChain::torus_sequence(&[2, 3, 2]).unwrap();
        let om = instantiate_example(&c, &OmegaExample::Torus(vec![0, 2, 5])).unwrap();
        for k in 0..2 {
            let g = g_char_proper(&c, &om, k).unwrap();
            assert_eq!(g.len(), c.d(k).unwrap());
            let p = assemble_p(&c, k, &h_char(&c, &om, k).unwrap(), &g).unwrap();
            let r = verify_uep_matrix(&p, &SamplingPlan::default()).unwrap();
            assert!(r.exhaustive && r.residual < 1e-15);
        }
        assert!(instantiate_example(&c, &OmegaExample::Torus(vec![0, 2, 2])).is_err());
        assert!(instantiate_example(&c, &OmegaExample::Torus(vec![0, 3, 5])).is_err());
    }

    #[test]
    fn monotonicity_rules_per_example() {
        let c = LatticeChain::dyadic_cyclic(3).unwrap();
        assert!(instantiate_example(&c, &OmegaExample::Cyclic(vec![0, 1, 1, 7])).is_ok());
        assert!(instantiate_example(&c, &OmegaExample::Cyclic(vec![0, 1, 0, 7])).is_err());
        assert!(instantiate_example(&c, &OmegaExample::Cyclic(vec![0, 1, 2, 6])).is_err());
        assert!(matches!(
            instantiate_example(&c, &OmegaExample::Torus(vec![0, 1, 2, 3])),
            Err(Error::VariantMismatch(_))
        ));
    }

    #[test]
    fn euclidean_boxes_and_balls() {
        let c = LatticeChain::euclidean_diagonal(&[vec![2, 2], vec![2, 2]]).unwrap();
        let l = vec![vec![rat(1, 2), int(1)], vec![rat(1, 2), int(1)]];
        let om = instantiate_example(&c, &OmegaExample::Boxes(l)).unwrap();
        let plan = SamplingPlan::Standard { grid: 1024, random: 256, seed: 9 };
        let p = assemble_p(&c, 0, &h_char(&c, &om, 0).unwrap(), &g_char_proper(&c, &om, 0).unwrap()).unwrap();
        assert!(verify_uep_matrix(&p, &plan).unwrap().residual < 1e-15);
        let om = instantiate_example(&c, &OmegaExample::Balls(vec![rat(1, 2), rat(3, 2)])).unwrap();
        let p = assemble_p(&c, 0, &h_char(&c, &om, 0).unwrap(), &g_char_proper(&c, &om, 0).unwrap()).unwrap();
        assert!(verify_uep_matrix(&p, &plan).unwrap().residual < 1e-15);
        assert!(instantiate_example(&c, &OmegaExample::Balls(vec![int(1), int(3)])).is_err());
    }

    #[test]
    fn generator_refines_exactly() {
        let c = LatticeChain::dyadic_cyclic(3).unwrap();
        let om = instantiate_example(&c, &OmegaExample::Cyclic(vec![0, 1, 2, 7])).unwrap();
        for k in 0..3 {
            let h = h_char(&c, &om, k).unwrap();
            for g in 0..8 {
                let g = Elem::int(g);
                let lhs = char_generator(&c, &om, k, &g).unwrap();
                let rhs = h.eval(&g).unwrap() * char_generator(&c, &om, k + 1, &g).unwrap();
                assert!((lhs - rhs).norm() < 1e-15);
            }
        }
    }
}
