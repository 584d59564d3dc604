//! Rate of asymptotic regularity for Cesaro means of nonexpansive maps.
//!
//! For a domain inside the ball of radius `b / 2` and a modulus `eta` the
//! pipeline is
//!
//! ```text
//! xi(t)   = t/12 * eta(min(2, t/b))
//! p~      = least integer with 2 C_q p~^((1-q)/q) <= eps/(9b)
//! delta   = xi^(p~)(eps/9)
//! p       = ceil(2b / delta^2)
//! alpha   = min(xi^(p-1)(delta^2/2), eps/3) * (1 - 2^-20)
//! N       = ceil(b / alpha)
//! ```
//!
//! All of these leave the float range quickly, so they are carried as
//! [`LeveledMagnitude`] values. Iterates of `xi` are computed in log space:
//! on the small-argument branch `eta(e) = c e^s` a step is the affine map
//! `L -> ln A + (1 + s) L` with `A = c / (12 b^s)`, whose `k`-th iterate has
//! the closed form used by [`iterate_xi`].

use thiserror::Error;

use crate::magnitude::{Branch, LeveledMagnitude, MagnitudeError, SignedMagnitude};
use crate::moduli::ModulusSpec;
use crate::pisier::RademacherProfile;

type Lm = LeveledMagnitude;
type Sm = SignedMagnitude;

/// Margin applied to `alpha` to make both of its upper bounds strict.
pub const ALPHA_MARGIN: f64 = 1.0 - 1.0 / 1_048_576.0;

/// Results within this relative distance of an integer are taken to be
/// that integer before a ceiling.
pub const INTEGER_SNAP: f64 = 1e-12;

const LN_12: f64 = 2.484_906_649_788_000_3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RateError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("type exponent q must lie in (1, 2], got {0}")]
    BadQ(f64),
    #[error("type constant C_q must be at least 1, got {0}")]
    BadConstant(f64),
    #[error("starting point {0} is too large to iterate")]
    StartTooLarge(LeveledMagnitude),
    #[error("iteration count must be a nonnegative integer, got {0}")]
    BadCount(LeveledMagnitude),
    #[error("plan invariant violated: {0}")]
    Invariant(&'static str),
    #[error(transparent)]
    Magnitude(#[from] MagnitudeError),
}

/// Type exponent and constant fed into the rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeConstants {
    pub q: f64,
    pub c_q: f64,
}

impl From<&RademacherProfile> for TypeConstants {
    fn from(p: &RademacherProfile) -> Self {
        Self { q: p.q, c_q: p.c_q }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePlan {
    pub eps: f64,
    pub b: f64,
    pub q: f64,
    pub c_q: f64,
    pub p_tilde: LeveledMagnitude,
    pub delta: LeveledMagnitude,
    pub p: LeveledMagnitude,
    /// `min(xi^(p-1)(delta^2/2), eps/3)` before the margin.
    pub alpha_cap: LeveledMagnitude,
    pub alpha: LeveledMagnitude,
    pub n: LeveledMagnitude,
}

fn positive(name: &'static str, value: f64) -> Result<f64, RateError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(RateError::NotPositive { name, value })
    }
}

fn lm(x: f64) -> Result<Lm, RateError> {
    Ok(Lm::from_f64(x)?)
}

/// Least integer `>= x` for a level-0 value, after snapping to a nearby
/// integer; symbolic values above the float range are returned as they are.
fn snapped_ceil(x: Lm) -> Lm {
    if x.level() > 0 {
        return x.ceil();
    }
    let v = x.to_f64();
    let r = libm::round(v);
    if r > 0.0 && (v - r).abs() <= INTEGER_SNAP * v {
        Lm::from_f64(r).expect("positive")
    } else {
        x.ceil()
    }
}

/// `xi(t)` for a float argument.
pub fn shrink_xi(m: &ModulusSpec, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t / 12.0 * m.eval((t / b).min(2.0))
}

/// `xi(t)` for any magnitude, evaluated in log space.
pub fn shrink_xi_lm(m: &ModulusSpec, b: f64, t: Lm) -> Result<Lm, RateError> {
    if t.is_zero() {
        return Ok(Lm::ZERO);
    }
    if t.level() == 0 {
        return Ok(Lm::from_nonneg(shrink_xi(m, b, t.to_f64()))?);
    }
    Ok(Lm::exp(step_log(m, b, t.ln()?)?)?)
}

/// One step of `xi` on `L = ln t`.
fn step_log(m: &ModulusSpec, b: f64, l: Sm) -> Result<Sm, RateError> {
    let ln_b = libm::log(b);
    let u = l.add(Sm::from_f64(-ln_b))?;
    let ln_eta = if u.magnitude.level() == 0 {
        Sm::from_f64(m.ln_eval(u.to_f64()))
    } else if u.negative {
        let br = m.small_branch();
        let head = Sm::from_f64(libm::log(br.c));
        if br.s == 0.0 {
            head
        } else {
            u.scale(br.s)?.add(head)?
        }
    } else {
        Sm::from_f64(m.ln_eval(core::f64::consts::LN_2))
    };
    Ok(l.add(ln_eta.add(Sm::from_f64(-LN_12))?)?)
}

fn check_count(k: &Lm) -> Result<(), RateError> {
    let integral = match k.branch() {
        Branch::Unit => k.is_zero() || k.to_f64().fract() == 0.0,
        Branch::Huge => true,
        Branch::Tiny => false,
    };
    if integral {
        Ok(())
    } else {
        Err(RateError::BadCount(*k))
    }
}

fn start_log(t0: Lm) -> Result<Sm, RateError> {
    if t0.is_zero() {
        return Err(RateError::NotPositive { name: "t0", value: 0.0 });
    }
    let l = t0.ln()?;
    if !l.negative && l.magnitude.level() > 0 {
        return Err(RateError::StartTooLarge(t0));
    }
    Ok(l)
}

/// `xi^k(t0)` by explicit steps in log space. Reference implementation for
/// [`iterate_xi`]; cost is linear in `k`.
pub fn iterate_xi_explicit(m: &ModulusSpec, b: f64, t0: Lm, k: u64) -> Result<Lm, RateError> {
    positive("b", b)?;
    let mut l = start_log(t0)?;
    for _ in 0..k {
        l = step_log(m, b, l)?;
    }
    Ok(Lm::exp(l)?)
}

/// `xi^k(t0)` for an integer magnitude `k`.
///
/// Above `2b` the map is linear and is skipped in one jump; between `2b`
/// and the small-argument branch of the modulus explicit steps are taken
/// (each shrinks `t` by at least a factor 12); on the branch the affine log
/// recurrence is solved in closed form:
///
/// ```text
/// s = 0:  L_k = L_0 + k ln A
/// s > 0:  L_k = -(1+s)^k (-L_0 - ln A / s) - ln A / s
/// ```
pub fn iterate_xi(m: &ModulusSpec, b: f64, t0: Lm, k: Lm) -> Result<Lm, RateError> {
    positive("b", b)?;
    check_count(&k)?;
    if k.is_zero() {
        return Ok(t0);
    }
    let ln_b = libm::log(b);
    let mut l = start_log(t0)?;
    let mut k = k;

    // linear zone t > 2b: ln t drops by ln(12 / eta(2)) per step
    if !l.negative || l.magnitude.level() == 0 {
        let lf = l.to_f64();
        let top = core::f64::consts::LN_2 + ln_b;
        if lf > top {
            let drop = LN_12 - m.ln_eval(core::f64::consts::LN_2);
            let n1 = libm::floor((lf - top) / drop) - 1.0;
            if n1 >= 1.0 {
                let jump = Lm::from_f64(n1)?.min(k);
                l = l.add(Sm::positive(jump).scale(-drop)?)?;
                k = sub_count(k, jump);
                if k.is_zero() {
                    return Ok(Lm::exp(l)?);
                }
            }
        }
    }

    let br = m.small_branch();
    let ln_thr = Sm::from_f64(libm::log(br.threshold) + ln_b);
    while !k.is_zero() && !below(&l, &ln_thr) {
        l = step_log(m, b, l)?;
        k = k.pred();
    }
    if k.is_zero() {
        return Ok(Lm::exp(l)?);
    }

    let ln_a = libm::log(br.c) - LN_12 - br.s * ln_b;
    let lk = if br.s == 0.0 {
        l.add(Sm::positive(k).scale(ln_a)?)?
    } else {
        let shift = Sm::from_f64(-ln_a / br.s);
        let d = l.neg().add(shift)?;
        if d.negative || d.is_zero() {
            return Err(RateError::Invariant("iterate left the contracting branch"));
        }
        let rk = Lm::exp(Sm::positive(k).scale(libm::log1p(br.s))?)?;
        Sm { negative: true, magnitude: rk.mul(&d.magnitude)? }.add(shift)?
    };
    Ok(Lm::exp(lk)?)
}

// exact for the level-0 counts this is used with; `jump <= k`
fn sub_count(k: Lm, jump: Lm) -> Lm {
    if k.level() > 0 {
        return k;
    }
    Lm::from_nonneg(k.to_f64() - jump.to_f64()).expect("nonnegative")
}

fn below(l: &Sm, thr: &Sm) -> bool {
    match (l.negative, thr.negative) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => l.magnitude < thr.magnitude,
        (true, true) => l.magnitude > thr.magnitude,
    }
}

/// Relative gap of `ln a` and `ln b`; `inf` where it cannot be resolved.
pub fn log_relative_gap(a: &Lm, b: &Lm) -> f64 {
    let (Ok(la), Ok(lb)) = (a.ln(), b.ln()) else {
        return f64::INFINITY;
    };
    if la.negative != lb.negative {
        return if la.is_zero() && lb.is_zero() { 0.0 } else { f64::INFINITY };
    }
    match (la.magnitude.level(), lb.magnitude.level()) {
        (0, 0) => {
            let (x, y) = (la.to_f64(), lb.to_f64());
            if x == y {
                0.0
            } else {
                (x - y).abs() / x.abs().max(y.abs())
            }
        }
        // |ln| = 10^m on both sides: ratio 10^(dm)
        (1, 1) => {
            let dm = (la.magnitude.mantissa() - lb.magnitude.mantissa()).abs();
            libm::expm1(dm * core::f64::consts::LN_10)
        }
        _ => f64::INFINITY,
    }
}

fn check_type(t: TypeConstants) -> Result<(), RateError> {
    if !(t.q > 1.0 && t.q <= 2.0) {
        return Err(RateError::BadQ(t.q));
    }
    if !(t.c_q >= 1.0 && t.c_q.is_finite()) {
        return Err(RateError::BadConstant(t.c_q));
    }
    Ok(())
}

/// Least integer `p~ >= (18 b C_q / eps)^(q/(q-1))`.
pub fn p_tilde(eps: f64, b: f64, t: TypeConstants) -> Result<Lm, RateError> {
    positive("eps", eps)?;
    positive("b", b)?;
    check_type(t)?;
    let base = lm(18.0 * b * t.c_q / eps)?;
    let v = base.pow(t.q / (t.q - 1.0))?;
    Ok(snapped_ceil(v).max(Lm::ONE))
}

/// `2 C_q p~^((1-q)/q) <= eps / (9b)`, up to the integer snap.
pub fn p_tilde_suffices(eps: f64, b: f64, t: TypeConstants, p_tilde: &Lm) -> Result<bool, RateError> {
    let lhs = lm(2.0 * t.c_q)?.mul(&p_tilde.pow((1.0 - t.q) / t.q)?)?;
    let rhs = lm(eps / (9.0 * b) * (1.0 + 4.0 * INTEGER_SNAP))?;
    Ok(lhs <= rhs)
}

/// The full pipeline; every invariant of the plan is re-checked before it
/// is returned.
pub fn rate_plan(eps: f64, b: f64, m: &ModulusSpec, t: TypeConstants) -> Result<RatePlan, RateError> {
    let p_tilde = p_tilde(eps, b, t)?;
    let delta = iterate_xi(m, b, lm(eps / 9.0)?, p_tilde)?;
    let two_b = lm(2.0 * b)?;
    let delta_sq = delta.pow(2.0)?;
    let p = snapped_ceil(two_b.div(&delta_sq)?);
    let start = delta_sq.div(&lm(2.0)?)?;
    let orbit = iterate_xi(m, b, start, p.pred())?;
    let third = lm(eps / 3.0)?;
    let alpha_cap = orbit.min(third);
    let alpha = alpha_cap.mul(&lm(ALPHA_MARGIN)?)?;
    let n = lm(b)?.div(&alpha)?.ceil();
    let plan = RatePlan { eps, b, q: t.q, c_q: t.c_q, p_tilde, delta, p, alpha_cap, alpha, n };
    check_plan(&plan, m)?;
    Ok(plan)
}

/// Re-substitutes every defining inequality of a plan.
pub fn check_plan(plan: &RatePlan, m: &ModulusSpec) -> Result<(), RateError> {
    let t = TypeConstants { q: plan.q, c_q: plan.c_q };
    if !p_tilde_suffices(plan.eps, plan.b, t, &plan.p_tilde)? {
        return Err(RateError::Invariant("2 C_q p~^((1-q)/q) <= eps/(9b)"));
    }
    let two_b = lm(2.0 * plan.b)?;
    if plan.p < two_b.div(&plan.delta.pow(2.0)?)? {
        return Err(RateError::Invariant("p >= 2b/delta^2"));
    }
    let start = plan.delta.pow(2.0)?.div(&lm(2.0)?)?;
    let orbit = iterate_xi(m, plan.b, start, plan.p.pred())?;
    let third = lm(plan.eps / 3.0)?;
    if plan.alpha.is_zero() || plan.alpha > orbit || plan.alpha > third {
        return Err(RateError::Invariant("0 < alpha <= min(xi^(p-1)(delta^2/2), eps/3)"));
    }
    // strictness is resolvable only while alpha is a float or a float power of ten
    if plan.alpha.level() <= 1 && (plan.alpha >= orbit || plan.alpha >= third) {
        return Err(RateError::Invariant("alpha < min(xi^(p-1)(delta^2/2), eps/3)"));
    }
    if plan.n < lm(plan.b)?.div(&plan.alpha)? {
        return Err(RateError::Invariant("N >= b/alpha"));
    }
    Ok(())
}

/// Least `n` with `diam / sqrt(n) <= eps` in a Hilbert space.
pub fn hilbert_rate(eps: f64, diam: f64) -> Result<Lm, RateError> {
    positive("eps", eps)?;
    positive("diam", diam)?;
    let v = lm(diam / eps)?.pow(2.0)?;
    Ok(snapped_ceil(v).max(Lm::ONE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> ModulusSpec {
        ModulusSpec::constant_half()
    }

    fn lm(x: f64) -> Lm {
        Lm::from_f64(x).unwrap()
    }

    const T23: TypeConstants = TypeConstants { q: 2.0, c_q: 3.0 };

    #[test]
    fn shrink_examples() {
        let h = shrink_xi(&ModulusSpec::Hilbert, 1.0, 1.0);
        assert!((h - 0.011165).abs() < 1e-6, "{h}");
        for &(b, t) in &[(1.0, 0.3), (5.0, 7.0), (0.1, 1e-9)] {
            assert!((shrink_xi(&half(), b, t) - t / 24.0).abs() <= 1e-16 * t);
        }
        let tiny: Lm = "10^-(10^(40))".parse().unwrap();
        let got = shrink_xi_lm(&half(), 1.0, tiny).unwrap();
        assert!(got <= tiny);
        assert!(got.mantissa_rel_diff(&tiny) < 1e-12);
    }

    #[test]
    fn zero_iterations() {
        let t = lm(0.37);
        assert_eq!(iterate_xi(&ModulusSpec::Hilbert, 1.0, t, Lm::ZERO).unwrap(), t);
    }

    #[test]
    fn geometric_closed_form() {
        let d = iterate_xi(&half(), 1.0, lm(0.1), lm(3600.0)).unwrap();
        let want = -1.0 - 3600.0 * libm::log10(24.0);
        let got = d.log10_f64().unwrap();
        assert!(((got - want) / want).abs() < 1e-12, "{got} {want}");
        assert!((got + 4969.7).abs() < 0.1);
    }

    #[test]
    fn closed_form_matches_explicit() {
        let cases: &[(ModulusSpec, f64, f64, u64)] = &[
            (ModulusSpec::Hilbert, 1.0, 1e-3, 5),
            (ModulusSpec::Hilbert, 3.0, 2.5, 7),
            (ModulusSpec::power(0.5, 1.5).unwrap(), 1.0, 0.4, 200),
            (ModulusSpec::power(0.9, 0.5).unwrap(), 2.0, 50.0, 10_000),
            (ModulusSpec::lp_preset(1.5).unwrap(), 1.0, 0.1, 1000),
            (ModulusSpec::lp_preset(4.0).unwrap(), 1.0, 0.1, 10_000),
            (half(), 1.0, 0.1, 10_000),
            (ModulusSpec::table(vec![(0.0, 0.01), (0.5, 0.1), (1.0, 0.3)]).unwrap(), 1.0, 500.0, 3000),
        ];
        for (m, b, t0, k) in cases {
            let closed = iterate_xi(m, *b, lm(*t0), lm(*k as f64)).unwrap();
            let explicit = iterate_xi_explicit(m, *b, lm(*t0), *k).unwrap();
            let gap = log_relative_gap(&closed, &explicit);
            assert!(gap < 1e-6, "{m:?} k={k}: {closed} vs {explicit} gap {gap}");
        }
    }

    #[test]
    fn float_iteration_agrees_early() {
        let m = ModulusSpec::Hilbert;
        let mut t = 0.8;
        for k in 1..4u64 {
            t = shrink_xi(&m, 1.0, t);
            let got = iterate_xi(&m, 1.0, lm(0.8), lm(k as f64)).unwrap().to_f64();
            assert!(((got - t) / t).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn rejects_fractional_count() {
        assert!(matches!(iterate_xi(&half(), 1.0, lm(0.1), lm(2.5)), Err(RateError::BadCount(_))));
    }

    #[test]
    fn p_tilde_examples() {
        assert_eq!(p_tilde(0.9, 1.0, T23).unwrap().to_u64(), Some(3600));
        let one = TypeConstants { q: 2.0, c_q: 1.0 };
        assert_eq!(p_tilde(18.0, 1.0, one).unwrap().to_u64(), Some(1));
        assert!(matches!(p_tilde(0.9, 1.0, TypeConstants { q: 1.0, c_q: 3.0 }), Err(RateError::BadQ(_))));
        let mut prev = Lm::ONE;
        for &q in &[1.5, 1.1, 1.01, 1.001, 1.0001] {
            let pt = p_tilde(0.9, 1.0, TypeConstants { q, c_q: 3.0 }).unwrap();
            assert!(pt > prev);
            assert!(p_tilde_suffices(0.9, 1.0, TypeConstants { q, c_q: 3.0 }, &pt).unwrap());
            prev = pt;
        }
    }

    #[test]
    fn p_tilde_is_least() {
        for &(eps, b, q, c) in &[(0.9, 1.0, 2.0, 3.0), (0.5, 2.0, 1.7, 1.3), (0.05, 1.0, 1.9, 2.0)] {
            let t = TypeConstants { q, c_q: c };
            let pt = p_tilde(eps, b, t).unwrap();
            assert!(p_tilde_suffices(eps, b, t, &pt).unwrap());
            let below = pt.pred();
            let lhs = 2.0 * c * libm::pow(below.to_f64(), (1.0 - q) / q);
            assert!(lhs > eps / (9.0 * b) * (1.0 + 1e-9) || below.is_zero());
        }
    }

    #[test]
    fn constant_half_plan() {
        let plan = rate_plan(0.9, 1.0, &half(), T23).unwrap();
        assert_eq!(plan.p_tilde.to_u64(), Some(3600));
        let want = -1.0 - 3600.0 * libm::log10(24.0);
        assert!((plan.delta.log10_f64().unwrap() / want - 1.0).abs() < 1e-6);
        assert!((plan.p.log10_f64().unwrap() - 9939.7).abs() < 0.5);
        let neg_log_alpha = plan.alpha.recip().unwrap().log10().unwrap();
        assert!((neg_log_alpha.magnitude.log10_f64().unwrap() - 9939.8).abs() < 0.5);
        let log_n = plan.n.log10().unwrap();
        assert!((log_n.magnitude.log10_f64().unwrap() - 9939.8).abs() < 0.5);
    }

    #[test]
    fn plan_survives_pisier_constants() {
        let prof = crate::pisier::rademacher_profile(1.0 - libm::sqrt(3.0) / 2.0, 0.5).unwrap();
        let plan = rate_plan(0.5, 1.0, &ModulusSpec::Hilbert, (&prof).into()).unwrap();
        assert!(plan.p_tilde.level() == 1 && plan.n.level() >= 3);
        assert!(plan.alpha < lm(0.5 / 3.0));
    }

    #[test]
    fn level_one_plan_is_strict() {
        // a generous modulus keeps alpha at a float power of ten
        let m = ModulusSpec::power(1.0, 0.1).unwrap();
        let t = TypeConstants { q: 2.0, c_q: 1.0 };
        let plan = rate_plan(18.0, 1.0, &m, t).unwrap();
        assert_eq!(plan.p_tilde.to_u64(), Some(1));
        assert!((plan.delta.to_f64() - 2.0 / 12.0).abs() < 1e-15);
        assert_eq!(plan.p.to_u64(), Some(72));
        assert!(plan.alpha.level() == 1 && plan.alpha < plan.alpha_cap);
        assert!(plan.n >= Lm::ONE.div(&plan.alpha).unwrap());
    }

    #[test]
    fn hilbert_rate_examples() {
        assert_eq!(hilbert_rate(0.01, 1.0).unwrap().to_u64(), Some(10_000));
        assert_eq!(hilbert_rate(3.0, 1.0).unwrap().to_u64(), Some(1));
        assert_eq!(hilbert_rate(1.0, 2.0).unwrap().to_u64(), Some(4));
        assert_eq!(hilbert_rate(0.1, 1.0).unwrap().to_u64(), Some(100));
        assert!(hilbert_rate(0.0, 1.0).is_err());
    }
}
