//! Sampling boxes, quasi-random point sets and named RNG sub-streams.

use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

/// Deterministic RNG for one named purpose (construction, shuffling, ...) derived from a master seed.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

/// Axis-aligned box with non-degenerate intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl SampleBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::invalid("sampling box has no coordinates"));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lo.len(),
                found: hi.len(),
            });
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::invalid(format!(
                    "degenerate interval [{l}, {h}] on coordinate {i}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    /// Smallest box containing `points`, widened by `pad` on each side
    /// (and by at least `pad` where the points are flat).
    pub fn bounding(points: &[DVector<f64>], pad: f64) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::invalid("no points to bound"))?;
        let mut lo: Vec<f64> = first.iter().copied().collect();
        let mut hi = lo.clone();
        for p in points {
            for (i, v) in p.iter().enumerate() {
                lo[i] = lo[i].min(*v);
                hi[i] = hi[i].max(*v);
            }
        }
        for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
            *l -= pad;
            *h += pad;
        }
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Halton points in the box, randomly shifted modulo 1 per coordinate
    /// (Cranley–Patterson rotation) so different seeds give different sets.
    pub fn halton(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = substream(seed, "halton-shift");
        let shift: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        (0..count)
            .map(|k| {
                DVector::from_fn(self.dim(), |i, _| {
                    let u = if i < PRIMES.len() {
                        radical_inverse(k as u64 + 1, PRIMES[i])
                    } else {
                        rng.random::<f64>()
                    };
                    let u = (u + shift[i]).fract();
                    self.lo[i] + u * (self.hi[i] - self.lo[i])
                })
            })
            .collect()
    }
}

impl FromStr for SampleBox {
    type Err = Error;

    /// `LO:HI` applied to every coordinate (dimension fixed later with
    /// [`SampleBox::broadcast`]) or `LO:HI,LO:HI,...` per coordinate.
    fn from_str(s: &str) -> Result<Self> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (l, h) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("interval `{part}` is not LO:HI")))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number `{t}`")))
            };
            lo.push(parse(l)?);
            hi.push(parse(h)?);
        }
        Self::new(lo, hi)
    }
}

impl SampleBox {
    /// Repeat a one-interval box to `n` coordinates; other boxes must already match.
    pub fn broadcast(self, n: usize) -> Result<Self> {
        if self.dim() == n {
            Ok(self)
        } else if self.dim() == 1 {
            Self::new(vec![self.lo[0]; n], vec![self.hi[0]; n])
        } else {
            Err(Error::DimensionMismatch {
                context: "sampling box",
                expected: n,
                found: self.dim(),
            })
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    r
}
