//! Rademacher type from uniform nonsquareness.
//!
//! Given `delta` with `min(|x-y|, |x+y|)/2 <= (1 - delta) max(|x|, |y|)`,
//! put `lambda = 1 - delta` and pick `xi`, `p'` with
//!
//! ```text
//! (1 - xi) / (1 + 2 sqrt(2 xi)) >= 1/2 sqrt(2 lambda^2 + 2)
//! 2^(-1/p') >= 1 - xi,   p' >= 2
//! ```
//!
//! Then with `1/p + 1/p' = 1` every `q in (1, p)` is a Rademacher type with
//! constant `C_q = 3 * 2^(1/q) / (2^(1/q - 1/p) - 1)`.

use thiserror::Error;

use crate::moduli::ModulusSpec;

/// `K_2`, the Kahane-Khintchine constant for second moments.
pub const K2: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PisierError {
    #[error("nonsquareness witness must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("modulus value eta(1) = {0} is outside (0, 1/2]")]
    BadModulus(f64),
    #[error("lambda must lie in [0, 1), got {0}")]
    BadLambda(f64),
    #[error("mu2 bound must lie in (0, 1), got {0}")]
    BadMu2(f64),
    #[error("xi must lie in (0, 1), got {0}")]
    BadXi(f64),
    #[error("theta must lie in (0, 1), got {0}")]
    BadTheta(f64),
    #[error("type exponent q must exceed 1, got {0}")]
    BadQ(f64),
    #[error("type exponent q = {0} must not exceed 2")]
    TypeAboveTwo(f64),
}

/// All constants produced from one nonsquareness witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RademacherProfile {
    pub delta: f64,
    pub lambda: f64,
    pub mu2_bound: f64,
    pub xi_prob: f64,
    pub p_prime: f64,
    /// Conjugate exponent of `p_prime`.
    pub p_conj: f64,
    pub theta: f64,
    pub q: f64,
    /// Constant for the `q`-th moment form of the type inequality.
    pub c_q: f64,
    /// Kahane-Khintchine constant at `q`.
    pub k_q: f64,
    /// Constant for the second moment form, `K_2 * c_q`.
    pub c_q_second_moment: f64,
    /// Constant for sums of independent mean-zero variables, `2 * c_q`.
    pub sum_constant: f64,
}

/// `delta = eta(1)`; a modulus of a nontrivial space has `eta(1) <= 1/2`.
pub fn delta_from_modulus(m: &ModulusSpec) -> Result<f64, PisierError> {
    let d = m.eval(1.0);
    if d > 0.0 && d <= 0.5 {
        Ok(d)
    } else {
        Err(PisierError::BadModulus(d))
    }
}

pub fn mu2_bound(lambda: f64) -> Result<f64, PisierError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(PisierError::BadLambda(lambda));
    }
    Ok(0.5 * libm::sqrt(2.0 * lambda * lambda + 2.0))
}

/// Left side of the `xi` constraint; strictly decreasing on `[0, 1]`.
pub fn xi_constraint(xi: f64) -> f64 {
    (1.0 - xi) / (1.0 + 2.0 * libm::sqrt(2.0 * xi))
}

/// Largest `xi` with `xi_constraint(xi) >= mu2`, found by bisection; the
/// returned value satisfies the constraint exactly in floating point.
pub fn solve_xi(mu2: f64) -> Result<f64, PisierError> {
    if !(mu2 > 0.0 && mu2 < 1.0) {
        return Err(PisierError::BadMu2(mu2));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if xi_constraint(mid) >= mu2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Least admissible `p' = max(2, -1 / log2(1 - xi))`, nudged upward until
/// `2^(-1/p') >= 1 - xi` holds in floating point.
pub fn min_p_prime(xi: f64) -> Result<f64, PisierError> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(PisierError::BadXi(xi));
    }
    let mut p = (-1.0 / libm::log2(1.0 - xi)).max(2.0);
    while libm::pow(2.0, -1.0 / p) < 1.0 - xi {
        p = libm::nextafter(p, f64::INFINITY);
    }
    Ok(p)
}

/// `K_q = ((2q - 1) / (q - 1))^(q - 1)`.
pub fn kahane_constant(q: f64) -> Result<f64, PisierError> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(PisierError::BadQ(q));
    }
    if q == 2.0 {
        return Ok(K2);
    }
    Ok(libm::pow((2.0 * q - 1.0) / (q - 1.0), q - 1.0))
}

/// `C_q = 3 * 2^(1/q) / (2^(1/q - 1/p) - 1)` for `1 < q < p`.
pub fn type_constant(q: f64, p: f64) -> f64 {
    K2 * libm::pow(2.0, 1.0 / q) / libm::expm1((1.0 / q - 1.0 / p) * core::f64::consts::LN_2)
}

/// Which way to convert between the two forms of the type inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    /// `q`-th moment constant to second moment constant: multiply by `K_2`.
    QthToSecond,
    /// Second moment constant to `q`-th moment constant: keep it.
    SecondToQth,
}

pub fn convert_constant(value: f64, direction: Conversion) -> f64 {
    match direction {
        Conversion::QthToSecond => K2 * value,
        Conversion::SecondToQth => value,
    }
}

/// Chain of the constant extraction with `q = 1 + theta (p - 1)`.
pub fn rademacher_profile(delta: f64, theta: f64) -> Result<RademacherProfile, PisierError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PisierError::BadDelta(delta));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(PisierError::BadTheta(theta));
    }
    let lambda = 1.0 - delta;
    let mu2 = mu2_bound(lambda)?;
    let xi = solve_xi(mu2)?;
    let p_prime = min_p_prime(xi)?;
    let p = p_prime / (p_prime - 1.0);
    let q = 1.0 + theta * (p - 1.0);
    if q > 2.0 {
        return Err(PisierError::TypeAboveTwo(q));
    }
    if q <= 1.0 {
        return Err(PisierError::BadQ(q));
    }
    let c_q = type_constant(q, p);
    Ok(RademacherProfile {
        delta,
        lambda,
        mu2_bound: mu2,
        xi_prob: xi,
        p_prime,
        p_conj: p,
        theta,
        q,
        c_q,
        k_q: kahane_constant(q)?,
        c_q_second_moment: convert_constant(c_q, Conversion::QthToSecond),
        sum_constant: 2.0 * c_q,
    })
}
