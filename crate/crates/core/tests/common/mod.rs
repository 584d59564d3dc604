//! High-precision re-derivation of the type constants, shared by the
//! integration targets.

#![allow(dead_code)]

use astro_float::{BigFloat, Consts, RoundingMode};

/// Working precision in bits, a little over 50 decimal digits.
pub const BITS: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Big {
    cc: Consts,
}

#[derive(Debug, Clone, Copy)]
pub struct BigProfile {
    pub mu2: f64,
    pub xi: f64,
    pub p_prime: f64,
    pub p: f64,
    pub q: f64,
    pub c_q: f64,
}

impl Big {
    pub fn new() -> Self {
        Self { cc: Consts::new().expect("constants cache") }
    }

    pub fn num(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, BITS)
    }

    pub fn decimal(&mut self, x: &BigFloat) -> f64 {
        let s = x.format(astro_float::Radix::Dec, RM, &mut self.cc).expect("decimal form");
        s.parse().expect("float text")
    }

    fn pow2(&mut self, e: &BigFloat) -> BigFloat {
        let ln2 = self.num(2.0).ln(BITS, RM, &mut self.cc);
        e.mul(&ln2, BITS, RM).exp(BITS, RM, &mut self.cc)
    }

    /// `1 - sqrt(3)/2`.
    pub fn hilbert_delta(&self) -> BigFloat {
        let r3 = self.num(3.0).sqrt(BITS, RM);
        self.num(1.0).sub(&r3.div(&self.num(2.0), BITS, RM), BITS, RM)
    }

    fn constraint(&self, xi: &BigFloat) -> BigFloat {
        let one = self.num(1.0);
        let root = self.num(2.0).mul(xi, BITS, RM).sqrt(BITS, RM);
        let den = one.add(&self.num(2.0).mul(&root, BITS, RM), BITS, RM);
        one.sub(xi, BITS, RM).div(&den, BITS, RM)
    }

    /// The whole chain from `delta` to `C_q`, every step at [`BITS`] bits.
    pub fn profile(&mut self, delta: &BigFloat, theta: f64) -> BigProfile {
        let one = self.num(1.0);
        let two = self.num(2.0);
        let lambda = one.sub(delta, BITS, RM);
        let inner = two.mul(&lambda, BITS, RM).mul(&lambda, BITS, RM).add(&two, BITS, RM);
        let mu2 = inner.sqrt(BITS, RM).div(&two, BITS, RM);

        let (mut lo, mut hi) = (self.num(0.0), one.clone());
        for _ in 0..BITS + 8 {
            let mid = lo.add(&hi, BITS, RM).div(&two, BITS, RM);
            if self.constraint(&mid).cmp(&mu2).expect("ordered") >= 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let xi = lo;

        let l2 = one.sub(&xi, BITS, RM).log2(BITS, RM, &mut self.cc);
        let mut p_prime = one.div(&l2, BITS, RM).neg();
        if p_prime.cmp(&two).expect("ordered") < 0 {
            p_prime = two.clone();
        }
        let p = p_prime.div(&p_prime.sub(&one, BITS, RM), BITS, RM);
        let q = one.add(&self.num(theta).mul(&p.sub(&one, BITS, RM), BITS, RM), BITS, RM);
        let inv_q = one.div(&q, BITS, RM);
        let gap = inv_q.sub(&one.div(&p, BITS, RM), BITS, RM);
        let num = self.num(3.0).mul(&self.pow2(&inv_q), BITS, RM);
        let c_q = num.div(&self.pow2(&gap).sub(&one, BITS, RM), BITS, RM);

        BigProfile {
            mu2: self.decimal(&mu2),
            xi: self.decimal(&xi),
            p_prime: self.decimal(&p_prime),
            p: self.decimal(&p),
            q: self.decimal(&q),
            c_q: self.decimal(&c_q),
        }
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
