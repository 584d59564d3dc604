//! Positive reals with stacked base-10 exponents.
//!
//! A [`LeveledMagnitude`] at level 0 is a plain `f64` inside the window
//! `[1e-15, 1e15]` (or zero). At level `k >= 1` it stands for `10^(+E)` or
//! `10^(-E)` where the exponent `E > 15` is itself stored as a level `k - 1`
//! magnitude. Only the innermost float is kept, so a level-`k` value holds
//! one `f64` mantissa `m` in `(15, 1e15]`:
//!
//! ```text
//! level 1:  10^(±m)
//! level 2:  10^(±10^m)
//! level 3:  10^(±10^(10^m))
//! ```
//!
//! Precision is tracked on that top-level mantissa. Multiplication, powers
//! and logarithms are exact up to float rounding of `m`; addition is exact at
//! level 0 and otherwise works by dominant absorption.

use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Largest base-10 exponent kept at level 0.
pub const WINDOW_EXPONENT: f64 = 15.0;

const LN_10: f64 = core::f64::consts::LN_10;

/// Relative precision promised on the top-level mantissa of every result.
pub const MANTISSA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MagnitudeError {
    #[error("magnitude requires a positive finite input, got {0}")]
    NotPositive(f64),
    #[error("exponent must be finite and nonzero, got {0}")]
    BadExponent(f64),
    #[error("logarithm of zero")]
    LogOfZero,
    #[error("subtraction of nearly equal magnitudes above level 0 cannot be resolved")]
    Cancellation,
    #[error("malformed magnitude text")]
    Parse,
}

/// Which side of the level-0 window a stacked value lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Unit,
    Huge,
    Tiny,
}

/// A nonnegative real of arbitrary magnitude. See the module docs.
#[derive(Debug, Clone, Copy)]
pub struct LeveledMagnitude {
    level: u32,
    branch: Branch,
    mantissa: f64,
}

/// A real number with sign, used for logarithms of magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedMagnitude {
    pub negative: bool,
    pub magnitude: LeveledMagnitude,
}

fn in_window(log10: f64) -> bool {
    log10.abs() <= WINDOW_EXPONENT
}

impl LeveledMagnitude {
    pub const ZERO: Self = Self { level: 0, branch: Branch::Unit, mantissa: 0.0 };
    pub const ONE: Self = Self { level: 0, branch: Branch::Unit, mantissa: 1.0 };

    pub fn from_f64(x: f64) -> Result<Self, MagnitudeError> {
        if !(x.is_finite() && x > 0.0) {
            return Err(MagnitudeError::NotPositive(x));
        }
        let e = libm::log10(x);
        if in_window(e) {
            Ok(Self { level: 0, branch: Branch::Unit, mantissa: x })
        } else {
            Ok(Self::stacked(1, e > 0.0, e.abs()))
        }
    }

    /// Like [`from_f64`](Self::from_f64) but maps `0.0` to [`ZERO`](Self::ZERO).
    pub fn from_nonneg(x: f64) -> Result<Self, MagnitudeError> {
        if x == 0.0 {
            Ok(Self::ZERO)
        } else {
            Self::from_f64(x)
        }
    }

    fn stacked(level: u32, huge: bool, mantissa: f64) -> Self {
        debug_assert!(level >= 1 && mantissa > WINDOW_EXPONENT);
        Self { level, branch: if huge { Branch::Huge } else { Branch::Tiny }, mantissa }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// The innermost stored float.
    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn is_zero(&self) -> bool {
        self.level == 0 && self.mantissa == 0.0
    }

    /// Nearest `f64`; saturates to `inf` or `0.0` outside the float range.
    pub fn to_f64(&self) -> f64 {
        match (self.level, self.branch) {
            (0, _) => self.mantissa,
            (1, Branch::Huge) => libm::pow(10.0, self.mantissa),
            (1, _) => libm::pow(10.0, -self.mantissa),
            (_, Branch::Huge) => f64::INFINITY,
            _ => 0.0,
        }
    }

    /// Base-10 logarithm as a float, available for levels 0 and 1.
    pub fn log10_f64(&self) -> Option<f64> {
        match (self.level, self.branch) {
            _ if self.is_zero() => None,
            (0, _) => Some(libm::log10(self.mantissa)),
            (1, Branch::Huge) => Some(self.mantissa),
            (1, _) => Some(-self.mantissa),
            _ => None,
        }
    }

    pub fn log10(&self) -> Result<SignedMagnitude, MagnitudeError> {
        if self.is_zero() {
            return Err(MagnitudeError::LogOfZero);
        }
        match self.level {
            0 => Ok(SignedMagnitude::from_f64(libm::log10(self.mantissa))),
            k => {
                let magnitude = if k == 1 {
                    Self { level: 0, branch: Branch::Unit, mantissa: self.mantissa }
                } else {
                    Self::stacked(k - 1, true, self.mantissa)
                };
                Ok(SignedMagnitude { negative: self.branch == Branch::Tiny, magnitude })
            }
        }
    }

    /// Natural logarithm.
    pub fn ln(&self) -> Result<SignedMagnitude, MagnitudeError> {
        if self.level == 0 && !self.is_zero() {
            return Ok(SignedMagnitude::from_f64(libm::log(self.mantissa)));
        }
        self.log10()?.scale(LN_10)
    }

    /// `10^e`.
    pub fn exp10(e: SignedMagnitude) -> Self {
        let m = e.magnitude;
        match (m.level, m.branch) {
            (0, _) => {
                let v = if e.negative { -m.mantissa } else { m.mantissa };
                if in_window(v) {
                    let x = libm::pow(10.0, v);
                    Self { level: 0, branch: Branch::Unit, mantissa: x }
                } else {
                    Self::stacked(1, !e.negative, m.mantissa)
                }
            }
            (k, Branch::Huge) => Self::stacked(k + 1, !e.negative, m.mantissa),
            // |e| < 1e-15: the result rounds to 1 within one ulp
            _ => {
                let v = m.to_f64();
                let v = if e.negative { -v } else { v };
                Self { level: 0, branch: Branch::Unit, mantissa: libm::pow(10.0, v) }
            }
        }
    }

    /// `e^x` for a signed natural-log argument.
    pub fn exp(x: SignedMagnitude) -> Result<Self, MagnitudeError> {
        Ok(Self::exp10(x.scale(1.0 / LN_10)?))
    }

    pub fn recip(&self) -> Result<Self, MagnitudeError> {
        match self.branch {
            _ if self.is_zero() => Err(MagnitudeError::NotPositive(0.0)),
            Branch::Unit => Self::from_f64(1.0 / self.mantissa),
            Branch::Huge => Ok(Self::stacked(self.level, false, self.mantissa)),
            Branch::Tiny => Ok(Self::stacked(self.level, true, self.mantissa)),
        }
    }

    /// Product. Fails only when a huge and a tiny operand above level 1
    /// nearly cancel, so the exponent of the product is not resolvable.
    pub fn mul(&self, rhs: &Self) -> Result<Self, MagnitudeError> {
        if self.is_zero() || rhs.is_zero() {
            return Ok(Self::ZERO);
        }
        if self.level == 0 && rhs.level == 0 {
            return Self::from_f64(self.mantissa * rhs.mantissa);
        }
        Ok(Self::exp10(self.log10()?.add(rhs.log10()?)?))
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, MagnitudeError> {
        self.mul(&rhs.recip()?)
    }

    /// `self^e` for a finite nonzero float exponent.
    pub fn pow(&self, e: f64) -> Result<Self, MagnitudeError> {
        if !e.is_finite() || e == 0.0 {
            return Err(MagnitudeError::BadExponent(e));
        }
        if self.is_zero() {
            return if e > 0.0 { Ok(Self::ZERO) } else { Err(MagnitudeError::NotPositive(0.0)) };
        }
        if self.level == 0 {
            let x = libm::pow(self.mantissa, e);
            if x.is_finite() && x > 0.0 {
                return Self::from_f64(x);
            }
        }
        Ok(Self::exp10(self.log10()?.scale(e)?))
    }

    /// `self^e` for a magnitude exponent `e > 0`.
    pub fn pow_lm(&self, e: &Self) -> Result<Self, MagnitudeError> {
        if e.level == 0 {
            return self.pow(e.mantissa);
        }
        if self.is_zero() {
            return Ok(Self::ZERO);
        }
        let l = self.log10()?;
        Ok(Self::exp10(SignedMagnitude { negative: l.negative, magnitude: l.magnitude.mul(e)? }))
    }

    /// Sum of two magnitudes: exact at level 0, dominant absorption above.
    pub fn add_dominant(&self, rhs: &Self) -> Result<Self, MagnitudeError> {
        Ok(SignedMagnitude::positive(*self).add(SignedMagnitude::positive(*rhs))?.magnitude)
    }

    /// Least integer `>= self`. Values above the float integer range are
    /// already integers by convention.
    pub fn ceil(&self) -> Self {
        match self.branch {
            Branch::Unit => Self::from_nonneg(libm::ceil(self.mantissa)).expect("finite"),
            Branch::Huge => *self,
            Branch::Tiny => Self::ONE,
        }
    }

    /// `self - 1`, saturating at zero and absorbed above level 0.
    pub fn pred(&self) -> Self {
        match self.branch {
            Branch::Unit => Self::from_nonneg((self.mantissa - 1.0).max(0.0)).expect("finite"),
            Branch::Huge => *self,
            Branch::Tiny => Self::ZERO,
        }
    }

    /// Exact integer value, when it fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.level == 0 && self.mantissa.fract() == 0.0 {
            Some(self.mantissa as u64)
        } else {
            None
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Relative distance of the top-level mantissas, `inf` when the two
    /// values are stored at different levels or branches.
    pub fn mantissa_rel_diff(&self, other: &Self) -> f64 {
        if self.level != other.level || (self.level > 0 && self.branch != other.branch) {
            return f64::INFINITY;
        }
        if self.mantissa == other.mantissa {
            return 0.0;
        }
        (self.mantissa - other.mantissa).abs() / self.mantissa.abs().max(other.mantissa.abs())
    }

    fn order_key(&self) -> (i64, f64) {
        if self.is_zero() {
            return (i64::MIN, 0.0);
        }
        match self.branch {
            Branch::Unit => (0, self.mantissa),
            Branch::Huge => (self.level as i64, self.mantissa),
            Branch::Tiny => (-(self.level as i64), -self.mantissa),
        }
    }
}

impl PartialEq for LeveledMagnitude {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for LeveledMagnitude {}

impl PartialOrd for LeveledMagnitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LeveledMagnitude {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ca, ma) = self.order_key();
        let (cb, mb) = other.order_key();
        ca.cmp(&cb).then_with(|| ma.total_cmp(&mb))
    }
}

impl SignedMagnitude {
    pub const ZERO: Self = Self { negative: false, magnitude: LeveledMagnitude::ZERO };

    pub fn positive(magnitude: LeveledMagnitude) -> Self {
        Self { negative: false, magnitude }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            return Self::ZERO;
        }
        Self {
            negative: x < 0.0,
            magnitude: LeveledMagnitude::from_f64(x.abs()).expect("finite nonzero float"),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude.is_zero()
    }

    pub fn neg(self) -> Self {
        if self.is_zero() {
            self
        } else {
            Self { negative: !self.negative, magnitude: self.magnitude }
        }
    }

    pub fn to_f64(&self) -> f64 {
        let v = self.magnitude.to_f64();
        if self.negative {
            -v
        } else {
            v
        }
    }

    /// Multiply by a finite float.
    pub fn scale(self, factor: f64) -> Result<Self, MagnitudeError> {
        if factor == 0.0 || self.is_zero() {
            return Ok(Self::ZERO);
        }
        let f = LeveledMagnitude::from_f64(factor.abs())?;
        Ok(Self { negative: self.negative ^ (factor < 0.0), magnitude: self.magnitude.mul(&f)? })
    }

    pub fn mul(self, rhs: Self) -> Result<Self, MagnitudeError> {
        let magnitude = self.magnitude.mul(&rhs.magnitude)?;
        if magnitude.is_zero() {
            return Ok(Self::ZERO);
        }
        Ok(Self { negative: self.negative ^ rhs.negative, magnitude })
    }

    /// Signed sum.
    ///
    /// Exact float addition when both operands are level-0; log-sum
    /// arithmetic when both sit at level 1 or below; dominant absorption
    /// otherwise. Opposite-sign operands too close to resolve at the stored
    /// precision yield [`MagnitudeError::Cancellation`].
    pub fn add(self, rhs: Self) -> Result<Self, MagnitudeError> {
        if self.is_zero() {
            return Ok(rhs);
        }
        if rhs.is_zero() {
            return Ok(self);
        }
        let (a, b) = if self.magnitude >= rhs.magnitude { (self, rhs) } else { (rhs, self) };
        let same_sign = a.negative == b.negative;
        let (am, bm) = (a.magnitude, b.magnitude);

        if am.level == 0 && bm.level == 0 {
            return Ok(Self::from_f64(a.to_f64() + b.to_f64()));
        }
        if am.level <= 1 && bm.level <= 1 {
            let la = am.log10_f64().expect("level <= 1");
            let lb = bm.log10_f64().expect("level <= 1");
            let d = la - lb;
            if d > WINDOW_EXPONENT {
                return Ok(a);
            }
            let ratio = libm::pow(10.0, -d);
            let l = if same_sign {
                la + libm::log1p(ratio) / LN_10
            } else {
                if d == 0.0 {
                    return Ok(Self::ZERO);
                }
                let shift = libm::log1p(-ratio) / LN_10;
                // rounding of la, lb is amplified by 1/(d ln 10) in the shift
                let err = 2.3e-16 * (la.abs() + lb.abs() + 1.0) * (1.0 + 1.0 / (d * LN_10));
                let l = la + shift;
                let rel = if in_window(l) { err * LN_10 } else { err / l.abs() };
                if rel > MANTISSA_TOLERANCE {
                    return Err(MagnitudeError::Cancellation);
                }
                l
            };
            let magnitude = LeveledMagnitude::exp10(Self::from_f64(l));
            return Ok(Self { negative: a.negative, magnitude });
        }
        if am.level <= 1 || same_sign {
            // either |b| < 10^-1e15 <= |a| / 1e15, or |log10 a| >= 1e15 so the
            // shift log10(1 + b/a) <= 0.31 is below the mantissa precision
            return Ok(a);
        }
        if am == bm {
            return Ok(Self::ZERO);
        }
        let gap = am.log10()?.add(bm.log10()?.neg())?;
        if gap.magnitude >= LeveledMagnitude::ONE {
            Ok(a)
        } else {
            Err(MagnitudeError::Cancellation)
        }
    }
}

fn write_sig6(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if f.alternate() {
        return write!(f, "{}", x);
    }
    let digits = libm::floor(libm::log10(x)) as i32 + 1;
    if digits >= 6 {
        let scale = libm::pow(10.0, (digits - 6) as f64);
        write!(f, "{}", libm::round(x / scale) * scale)
    } else {
        let decimals = (6 - digits) as usize;
        let mut buf = [0u8; 64];
        let len = {
            let mut w = SliceWriter { buf: &mut buf, len: 0 };
            fmt::write(&mut w, format_args!("{:.*}", decimals, x))?;
            w.len
        };
        let s = core::str::from_utf8(&buf[..len]).map_err(|_| fmt::Error)?;
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { s };
        f.write_str(s)
    }
}

struct SliceWriter<'a> {
    buf: &'a mut [u8],
    len: usize,
}

impl fmt::Write for SliceWriter<'_> {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        let end = self.len + s.len();
        if end > self.buf.len() {
            return Err(fmt::Error);
        }
        self.buf[self.len..end].copy_from_slice(s.as_bytes());
        self.len = end;
        Ok(())
    }
}

/// Level 0 renders as a decimal, level 1 as `10^±E`, level `k >= 2` as
/// `10^±(10^(...))`. The innermost float is printed to 6 significant digits,
/// or with full round-trip precision under `{:#}`.
impl fmt::Display for LeveledMagnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let sign = if self.branch == Branch::Huge { '+' } else { '-' };
        write!(f, "10^{}", sign)?;
        for _ in 1..self.level {
            f.write_str("(10^")?;
        }
        write_sig6(f, self.mantissa)?;
        for _ in 1..self.level {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for SignedMagnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            f.write_str("-")?;
        }
        fmt::Display::fmt(&self.magnitude, f)
    }
}

impl FromStr for LeveledMagnitude {
    type Err = MagnitudeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("10^") {
            let (negative, body) = match rest.as_bytes().first() {
                Some(b'+') => (false, &rest[1..]),
                Some(b'-') => (true, &rest[1..]),
                _ => (false, rest),
            };
            let exponent = match body.strip_prefix('(').and_then(|b| b.strip_suffix(')')) {
                Some(inner) => inner.parse::<LeveledMagnitude>()?,
                None => body.parse::<LeveledMagnitude>()?,
            };
            return Ok(Self::exp10(SignedMagnitude { negative, magnitude: exponent }));
        }
        let x: f64 = s.parse().map_err(|_| MagnitudeError::Parse)?;
        if x.is_nan() || x < 0.0 {
            return Err(MagnitudeError::Parse);
        }
        Self::from_nonneg(x).map_err(|_| MagnitudeError::Parse)
    }
}

impl FromStr for SignedMagnitude {
    type Err = MagnitudeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.strip_prefix('-') {
            Some(rest) => Ok(Self::positive(rest.parse()?).neg()),
            None => Ok(Self::positive(s.parse()?)),
        }
    }
}
