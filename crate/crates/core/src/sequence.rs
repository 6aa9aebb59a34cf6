//! Finitely supported sequences on the integers and full-length sequences on Z_N.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numeric::{cis_turns_exact, rat, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    /// Index of `values[0]`.
    pub start: i64,
    pub values: Vec<C64>,
    /// Set for sequences on Z_N; indices are then taken modulo N.
    pub modulus: Option<i64>,
}

impl Sequence {
    pub fn on_integers(start: i64, values: Vec<C64>) -> Self {
        Sequence { start, values, modulus: None }
    }

    pub fn on_cyclic(modulus: i64, values: Vec<C64>) -> Self {
        assert_eq!(values.len() as i64, modulus, "a cyclic sequence stores every residue");
        Sequence { start: 0, values, modulus: Some(modulus) }
    }

    pub fn real(start: i64, values: &[f64]) -> Self {
        Sequence::on_integers(start, values.iter().map(|v| C64::new(*v, 0.0)).collect())
    }

    pub fn get(&self, x: i64) -> C64 {
        let i = match self.modulus {
            Some(n) => (x - self.start).rem_euclid(n),
            None => x - self.start,
        };
        if i < 0 || i as usize >= self.values.len() {
            C64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    /// First and last index carrying a nonzero value.
    pub fn support(&self) -> Option<(i64, i64)> {
        let first = self.values.iter().position(|v| v.norm() != 0.0)?;
        let last = self.values.iter().rposition(|v| v.norm() != 0.0)?;
        Some((self.start + first as i64, self.start + last as i64))
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// sum_x self(x) conj(other(x - shift)).
    pub fn inner_shifted(&self, other: &Sequence, shift: i64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        match self.modulus {
            Some(_) => {
                for (i, v) in self.values.iter().enumerate() {
                    let x = self.start + i as i64;
                    acc += v * other.get(x - shift).conj();
                }
            }
            None => {
                let lo = self.start.max(other.start + shift);
                let hi = self.end().min(other.end() + shift);
                for x in lo..hi {
                    acc += self.get(x) * other.get(x - shift).conj();
                }
            }
        }
        acc
    }

    pub fn translate(&self, by: i64) -> Sequence {
        match self.modulus {
            Some(n) => {
                let vals = (0..n).map(|x| self.get(x - by)).collect();
                Sequence::on_cyclic(n, vals)
            }
            None => Sequence { start: self.start + by, ..self.clone() },
        }
    }

    pub fn convolve(&self, other: &Sequence) -> Sequence {
        match self.modulus {
            Some(n) => {
                let mut out = vec![C64::new(0.0, 0.0); n as usize];
                for (i, a) in self.values.iter().enumerate() {
                    for (j, b) in other.values.iter().enumerate() {
                        let x = (self.start + other.start + (i + j) as i64).rem_euclid(n);
                        out[x as usize] += a * b;
                    }
                }
                Sequence::on_cyclic(n, out)
            }
            None => {
                let mut out = vec![C64::new(0.0, 0.0); self.values.len() + other.values.len() - 1];
                for (i, a) in self.values.iter().enumerate() {
                    for (j, b) in other.values.iter().enumerate() {
                        out[i + j] += a * b;
                    }
                }
                Sequence::on_integers(self.start + other.start, out)
            }
        }
    }

    /// sum_x x^p self(x), over the stored window.
    pub fn moment(&self, p: u32) -> C64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * ((self.start + i as i64) as f64).powi(p as i32))
            .sum()
    }
}

/// F(gamma) = sum_x f(x) e^{-2 pi i x gamma / N} for a sequence on Z_N.
pub fn dft_cyclic(f: &Sequence) -> Sequence {
    let n = f.modulus.expect("cyclic sequence");
    let vals = (0..n)
        .map(|g| (0..n).map(|x| f.get(x) * cis_turns_exact(&rat(-(x * g) % n, n))).sum())
        .collect();
    Sequence::on_cyclic(n, vals)
}

/// f(x) = (1/N) sum_gamma F(gamma) e^{2 pi i x gamma / N}.
pub fn idft_cyclic(f: &Sequence) -> Sequence {
    let n = f.modulus.expect("cyclic sequence");
    let vals = (0..n)
        .map(|x| (0..n).map(|g| f.get(g) * cis_turns_exact(&rat((x * g) % n, n))).sum::<C64>() / n as f64)
        .collect();
    Sequence::on_cyclic(n, vals)
}

#[derive(Serialize, Deserialize)]
struct SequenceDoc {
    support_start: i64,
    values: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modulus: Option<i64>,
}

impl Serialize for Sequence {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SequenceDoc {
            support_start: self.start,
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
            modulus: self.modulus,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = SequenceDoc::deserialize(d)?;
        if let Some(n) = doc.modulus {
            if doc.values.len() as i64 != n {
                return Err(D::Error::custom("values: a cyclic sequence must list every residue"));
            }
        }
        Ok(Sequence {
            start: doc.support_start,
            values: doc.values.iter().map(|v| C64::new(v[0], v[1])).collect(),
            modulus: doc.modulus,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_and_support() {
        let a = Sequence::real(0, &[1.0, 1.0]);
        let b = a.convolve(&a);
        assert_eq!(b, Sequence::real(0, &[1.0, 2.0, 1.0]));
        assert_eq!(Sequence::real(3, &[0.0, 2.0, 0.0]).support(), Some((4, 4)));
        let c = Sequence::on_cyclic(4, vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let cc = c.convolve(&c);
        assert_eq!(cc.values.iter().map(|v| v.re).collect::<Vec<_>>(), vec![3.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn shifted_inner_products() {
        let a = Sequence::real(0, &[1.0, 2.0, 3.0]);
        assert_eq!(a.inner_shifted(&a, 0).re, 14.0);
        assert_eq!(a.inner_shifted(&a, 1).re, 8.0);
        assert_eq!(a.inner_shifted(&a, -5).re, 0.0);
        let t = a.translate(2);
        assert_eq!(t.get(2).re, 1.0);
    }

    #[test]
    fn dft_round_trip() {
        let f = Sequence::on_cyclic(8, (0..8).map(|i| C64::new(i as f64, (i * i) as f64 * 0.1)).collect());
        let back = idft_cyclic(&dft_cyclic(&f));
        for (a, b) in f.values.iter().zip(&back.values) {
            assert!((a - b).norm() < 1e-13);
        }
        let delta = Sequence::on_cyclic(4, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(dft_cyclic(&delta).values.iter().all(|v| *v == C64::new(1.0, 0.0)));
    }

    #[test]
    fn json_shape() {
        let a = Sequence::real(-1, &[0.5]);
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"support_start":-1,"values":[[0.5,0.0]]}"#);
    }
}
