//! Small numeric helpers shared by the other modules.

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

pub type Rational = Ratio<i64>;
pub type C64 = Complex64;

pub fn rat(p: i64, q: i64) -> Rational {
    Ratio::new(p, q)
}

pub fn int(n: i64) -> Rational {
    Ratio::from_integer(n)
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Fractional part in [0, 1).
pub fn frac(r: &Rational) -> Rational {
    r - r.floor()
}

/// e^{2 pi i t} for an exact number of turns; quarter turns come out exact.
pub fn cis_turns_exact(t: &Rational) -> C64 {
    let f = frac(t);
    if f.is_zero() {
        return C64::new(1.0, 0.0);
    }
    if 4 % f.denom() == 0 {
        return match f.numer() * (4 / f.denom()) {
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
    }
    cis_turns(to_f64(&f))
}

/// e^{2 pi i t} for a floating number of turns.
pub fn cis_turns(t: f64) -> C64 {
    let mut f = t - t.floor();
    if f >= 0.5 {
        f -= 1.0;
    }
    let (s, c) = (2.0 * std::f64::consts::PI * f).sin_cos();
    C64::new(c, s)
}

pub fn binomial(n: u32, k: u32) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

/// Coefficients of (1+z)^a (1-z)^b in increasing powers of z.
pub fn binomial_product(a: u32, b: u32) -> Vec<i64> {
    let mut out = vec![1i64];
    for _ in 0..a {
        out = poly_mul(&out, &[1, 1]);
    }
    for _ in 0..b {
        out = poly_mul(&out, &[1, -1]);
    }
    out
}

pub fn poly_mul(a: &[i64], b: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn is_power_of_two(n: i64) -> bool {
    n > 0 && (n & (n - 1)) == 0
}

/// Nearest rational with a power-of-two denominator up to 2^52, exact for dyadic floats.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let mut den: i64 = 1;
    let mut v = x;
    while v.fract() != 0.0 {
        if den >= 1 << 52 {
            return None;
        }
        den *= 2;
        v = x * den as f64;
    }
    if v.abs() > 9.0e15 {
        return None;
    }
    Some(Ratio::new(v as i64, den))
}

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Text form used in JSON: "p/q" or "p".
pub fn rational_to_string(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let q: i64 = q.trim().parse().ok()?;
            if q == 0 {
                return None;
            }
            Some(Ratio::new(p.trim().parse().ok()?, q))
        }
        None => Some(Ratio::from_integer(s.parse().ok()?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turns_are_exact() {
        assert_eq!(cis_turns_exact(&rat(1, 2)), C64::new(-1.0, 0.0));
        assert_eq!(cis_turns_exact(&rat(3, 4)), C64::new(0.0, -1.0));
        assert_eq!(cis_turns_exact(&rat(-7, 4)), C64::new(0.0, 1.0));
        assert_eq!(cis_turns_exact(&int(5)), C64::new(1.0, 0.0));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial_product(1, 1), vec![1, 0, -1]);
        assert_eq!(binomial_product(2, 0), vec![1, 2, 1]);
    }

    #[test]
    fn rational_text_round_trip() {
        for r in [rat(1, 32), int(-16), rat(-3, 8)] {
            assert_eq!(parse_rational(&rational_to_string(&r)), Some(r));
        }
        assert_eq!(rational_from_f64(0.375), Some(rat(3, 8)));
        assert_eq!(rational_from_f64(0.1), None);
    }
}
