//! Moduli of uniform convexity and the functions derived from them.
//!
//! A modulus `eta: (0, 2] -> (0, 1]` witnesses that for `|x|, |y| <= 1` with
//! `|x - y| >= eps` the midpoint satisfies `|(x + y) / 2| <= 1 - eta(eps)`.
//! From it we build
//!
//! ```text
//! eta1(e)      = sup { eta(e') : 0 < e' <= min(2, e) },   eta1(0) = 0
//! eta_tilde(e) = 1/2 * integral_0^e eta1(t) dt             (convex)
//! gamma(e)     = b/2 * eta_tilde(4 e / b)
//! q_tilde(e)   = gamma^-1(3 e) + e
//! q_n(e)       = gamma^-1(2 e + b / n) + e
//! sigma        = q_tilde^-1
//! ```

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModulusError {
    #[error("power modulus needs c > 0 and s > 0, got c={c}, s={s}")]
    BadPower { c: f64, s: f64 },
    #[error("table modulus must start at eps = 0")]
    TableStart,
    #[error("table knots must be strictly increasing in eps and nondecreasing in eta")]
    TableOrder,
    #[error("modulus value {value} at eps={eps} is outside (0, 1]")]
    OutOfRange { eps: f64, value: f64 },
    #[error("L^p preset needs p > 1, got {0}")]
    BadExponent(f64),
    #[error("norm bound b must be positive and finite, got {0}")]
    BadBound(f64),
}

/// Points on which a new modulus is checked to map `(0, 2]` into `(0, 1]`.
const VALIDATION_GRID: usize = 1000;

/// A modulus of uniform convexity.
#[derive(Debug, Clone, PartialEq)]
pub enum ModulusSpec {
    /// `eta(e) = min(1, c * e^s)`.
    Power { c: f64, s: f64 },
    /// `eta(e) = 1 - sqrt(1 - e^2 / 4)`, exact for Hilbert spaces.
    Hilbert,
    /// Left-constant steps through `(eps, eta)` knots, first knot at 0.
    Table(StepTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTable {
    knots: Vec<(f64, f64)>,
}

impl StepTable {
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn value(&self, eps: f64) -> f64 {
        let i = self.knots.partition_point(|&(e, _)| e <= eps);
        self.knots[i.saturating_sub(1)].1
    }

    /// `integral_0^min(e, 2) eta(t) dt`, exact for a step function.
    fn integral(&self, e: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(start, value)) in self.knots.iter().enumerate() {
            if start >= e {
                break;
            }
            let end = self.knots.get(i + 1).map_or(e, |k| k.0.min(e));
            total += value * (end - start);
        }
        total
    }
}

/// A power law `c * eps^s` that `eta` follows on `0 < eps < threshold`.
///
/// Exact for power and table moduli. For the Hilbert modulus the law is the
/// lower bound `eps^2 / 8`, which differs from `eta` by a relative
/// `eps^2 / 16 < 1e-16` below the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBranch {
    pub c: f64,
    pub s: f64,
    pub threshold: f64,
}

fn hilbert(eps: f64) -> f64 {
    // 1 - sqrt(1 - x) without cancellation
    let x = eps * eps / 4.0;
    x / (1.0 + libm::sqrt(1.0 - x))
}

/// `integral_0^e (1 - sqrt(1 - t^2/4)) dt` for `0 <= e <= 2`.
fn hilbert_integral(e: f64) -> f64 {
    if e < 0.05 {
        // series of the integrand: t^2/8 + t^4/128 + t^6/1024 + 5 t^8/32768
        let e2 = e * e;
        let e3 = e2 * e;
        e3 * (1.0 / 24.0 + e2 * (1.0 / 640.0 + e2 * (1.0 / 7168.0 + e2 * (5.0 / 294912.0))))
    } else {
        e - 0.5 * e * libm::sqrt((1.0 - e * e / 4.0).max(0.0)) - libm::asin((e / 2.0).min(1.0))
    }
}

impl ModulusSpec {
    pub fn power(c: f64, s: f64) -> Result<Self, ModulusError> {
        if !(c.is_finite() && c > 0.0 && s.is_finite() && s > 0.0) {
            return Err(ModulusError::BadPower { c, s });
        }
        Self::Power { c, s }.validated()
    }

    pub fn hilbert() -> Self {
        Self::Hilbert
    }

    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self, ModulusError> {
        match knots.first() {
            Some(&(0.0, _)) => {}
            _ => return Err(ModulusError::TableStart),
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 >= w[0].1) {
                return Err(ModulusError::TableOrder);
            }
        }
        for &(eps, value) in &knots {
            if !(value > 0.0 && value <= 1.0) || !eps.is_finite() {
                return Err(ModulusError::OutOfRange { eps, value });
            }
        }
        Self::Table(StepTable { knots }).validated()
    }

    /// The constant modulus `eta = 1/2`.
    pub fn constant_half() -> Self {
        Self::Table(StepTable { knots: alloc::vec![(0.0, 0.5)] })
    }

    /// Catalogue modulus for `L^p`: `(p-1)/8 * e^2` for `1 < p < 2`,
    /// `(1/p) * (e/2)^p` for `p >= 2`, and the exact modulus at `p = 2`.
    pub fn lp_preset(p: f64) -> Result<Self, ModulusError> {
        if !(p.is_finite() && p > 1.0) {
            return Err(ModulusError::BadExponent(p));
        }
        if p == 2.0 {
            Ok(Self::Hilbert)
        } else if p < 2.0 {
            Self::power((p - 1.0) / 8.0, 2.0)
        } else {
            Self::power(libm::pow(0.5, p) / p, p)
        }
    }

    /// Named moduli used by the sampled suites.
    pub fn catalogue() -> Vec<(&'static str, Self)> {
        let ok = |r: Result<Self, ModulusError>| r.expect("catalogue entry");
        alloc::vec![
            ("hilbert", Self::Hilbert),
            ("lp:1.5", ok(Self::lp_preset(1.5))),
            ("lp:3", ok(Self::lp_preset(3.0))),
            ("lp:4", ok(Self::lp_preset(4.0))),
            ("power:0.3,1", ok(Self::power(0.3, 1.0))),
            ("table:const_half", Self::constant_half()),
            ("table:steps", ok(Self::table(alloc::vec![(0.0, 0.01), (0.5, 0.1), (1.0, 0.3), (1.8, 0.6)]))),
        ]
    }

    fn validated(self) -> Result<Self, ModulusError> {
        for i in 1..=VALIDATION_GRID {
            let eps = 2.0 * i as f64 / VALIDATION_GRID as f64;
            let value = self.eval(eps);
            if !(value > 0.0 && value <= 1.0) {
                return Err(ModulusError::OutOfRange { eps, value });
            }
        }
        Ok(self)
    }

    /// `eta(eps)`; arguments are clamped to `[0, 2]` and `eta(0)` reads 0.
    pub fn eval(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return 0.0;
        }
        let eps = eps.min(2.0);
        match self {
            Self::Power { c, s } => (c * libm::pow(eps, *s)).min(1.0),
            Self::Hilbert => hilbert(eps),
            Self::Table(t) => t.value(eps),
        }
    }

    /// `ln eta(e^u)`, accurate far below the float range of `eps` itself.
    pub fn ln_eval(&self, u: f64) -> f64 {
        let u = u.min(core::f64::consts::LN_2);
        match self {
            Self::Power { c, s } => (libm::log(*c) + s * u).min(0.0),
            Self::Hilbert => {
                let x = libm::exp(2.0 * u) / 4.0;
                2.0 * u - libm::log(4.0) - libm::log1p(libm::sqrt(1.0 - x))
            }
            Self::Table(t) => libm::log(t.value(libm::exp(u))),
        }
    }

    pub fn small_branch(&self) -> PowerBranch {
        match self {
            Self::Power { c, s } => {
                PowerBranch { c: *c, s: *s, threshold: libm::pow(1.0 / c, 1.0 / s).min(2.0) }
            }
            Self::Hilbert => PowerBranch { c: 0.125, s: 2.0, threshold: 1e-8 },
            Self::Table(t) => PowerBranch {
                c: t.knots[0].1,
                s: 0.0,
                threshold: t.knots.get(1).map_or(2.0, |k| k.0.min(2.0)),
            },
        }
    }

    /// `integral_0^min(e, 2) eta(t) dt`.
    fn integral_to(&self, e: f64) -> f64 {
        let e = e.min(2.0);
        match self {
            Self::Power { c, s } => {
                let knee = libm::pow(1.0 / c, 1.0 / s);
                let head = e.min(knee);
                c * libm::pow(head, s + 1.0) / (s + 1.0) + (e - knee).max(0.0)
            }
            Self::Hilbert => hilbert_integral(e),
            Self::Table(t) => t.integral(e),
        }
    }
}

/// `eta1`, `eta_tilde`, `gamma` and their companions for a norm bound `b`
/// (the domain lies in the ball of radius `b / 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedModuli {
    modulus: ModulusSpec,
    b: f64,
}

/// Inverse of an increasing `f` at `y` by bisection to float resolution,
/// given `f(lo) <= y <= f(hi)`. Returns the lower end, so `f(x) <= y`.
pub(crate) fn invert_increasing(f: impl Fn(f64) -> f64, y: f64, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = if lo > 0.0 && hi > 4.0 * lo {
            libm::sqrt(lo) * libm::sqrt(hi)
        } else {
            lo + (hi - lo) / 2.0
        };
        if mid <= lo || mid >= hi {
            return lo;
        }
        if f(mid) <= y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

impl DerivedModuli {
    pub fn new(modulus: ModulusSpec, b: f64) -> Result<Self, ModulusError> {
        if !(b.is_finite() && b > 0.0) {
            return Err(ModulusError::BadBound(b));
        }
        Ok(Self { modulus, b })
    }

    pub fn modulus(&self) -> &ModulusSpec {
        &self.modulus
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Monotone envelope; every catalogue form is already nondecreasing, so
    /// this is `eta(min(2, eps))`.
    pub fn eta1(&self, eps: f64) -> f64 {
        self.modulus.eval(eps)
    }

    pub fn eta_tilde(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return 0.0;
        }
        let tail = (eps - 2.0).max(0.0) * self.modulus.eval(2.0);
        0.5 * (self.modulus.integral_to(eps) + tail)
    }

    pub fn gamma(&self, eps: f64) -> f64 {
        self.b / 2.0 * self.eta_tilde(4.0 * eps / self.b)
    }

    pub fn gamma_inv(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        // gamma(e) <= e, so the root is at least y
        let (mut lo, mut hi, mut k) = (y, 2.0 * y, 1.0);
        while self.gamma(hi) < y {
            lo = hi;
            k *= 2.0;
            hi = (y * libm::exp2(k)).min(f64::MAX);
        }
        invert_increasing(|e| self.gamma(e), y, lo, hi)
    }

    pub fn q_tilde(&self, eps: f64) -> f64 {
        self.gamma_inv(3.0 * eps) + eps
    }

    pub fn q_n(&self, eps: f64, n: u64) -> f64 {
        self.gamma_inv(2.0 * eps + self.b / n as f64) + eps
    }

    pub fn sigma(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        // q~(e) >= e puts the root below t; bracket it from below by
        // t 2^(-2^k) so a tiny root costs O(log log) evaluations
        let (mut lo, mut hi, mut k) = (0.5 * t, t, 1.0);
        while lo > 0.0 && self.q_tilde(lo) > t {
            hi = lo;
            k *= 2.0;
            lo = t * libm::exp2(-k);
        }
        invert_increasing(|e| self.q_tilde(e), t, lo, hi)
    }
}
