//! Exhaustive and sampled checks of the inequalities behind the constants.
//!
//! Every check reduces to a list of `lhs <= rhs` comparisons. The slack of
//! one comparison is `(rhs - lhs) / scale` with `scale` the larger of the
//! two sides (or a problem-specific magnitude), and a [`Verdict`] keeps the
//! least slack and the input that produced it. A verdict passes when the
//! least slack is at least `-TOLERANCE`.
//!
//! Randomness comes from [`trial_rng`]: one ChaCha stream per trial index,
//! so a trial can be replayed on its own and runs are bit-reproducible.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::moduli::{DerivedModuli, ModulusSpec};
use crate::pisier::{kahane_constant, PisierError};
use crate::rates::shrink_xi;
use crate::spaces::{sample_simplex, LpSpace, MapDescriptor, SpaceError};

pub const TOLERANCE: f64 = 1e-9;

/// Largest batch enumerated over all sign patterns.
pub const MAX_EXHAUSTIVE: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("exhaustive mode takes at most {MAX_EXHAUSTIVE} points, got {0}")]
    TooManyPoints(usize),
    #[error("need at least one point")]
    Empty,
    #[error("weights must be nonnegative, one per point, and sum to 1")]
    BadWeights,
    #[error("{name} out of range: {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("could not sample approximate fixed points: {0}")]
    NoApproxFixedPoints(&'static str),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Pisier(#[from] PisierError),
}

/// The input of one trial, enough to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub trial: u64,
    pub points: Vec<Vec<f64>>,
    pub params: Vec<(&'static str, f64)>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub check: &'static str,
    pub passed: bool,
    pub trials: u64,
    /// Least relative `rhs - lhs` over all trials; `inf` with no trials.
    pub worst_slack: f64,
    pub witness: Option<Witness>,
    /// Standard error of the estimate, for sampled checks.
    pub std_error: Option<f64>,
}

impl Verdict {
    pub fn new(check: &'static str) -> Self {
        Self { check, passed: true, trials: 0, worst_slack: f64::INFINITY, witness: None, std_error: None }
    }

    /// Adds one comparison; `witness` is built only when it becomes the worst.
    pub fn record(&mut self, lhs: f64, rhs: f64, scale: f64, witness: impl FnOnce() -> Witness) {
        self.trials += 1;
        let s = slack(lhs, rhs, scale);
        if s < self.worst_slack || (s.is_nan() && !self.worst_slack.is_nan()) {
            self.worst_slack = s;
            self.witness = Some(witness());
        }
        self.passed = self.worst_slack >= -TOLERANCE;
    }

    /// Combines two verdicts; trial counts add.
    pub fn merge(mut self, other: Verdict) -> Self {
        self.trials += other.trials;
        if other.worst_slack < self.worst_slack || (other.worst_slack.is_nan() && !self.worst_slack.is_nan()) {
            self.worst_slack = other.worst_slack;
            self.witness = other.witness;
        }
        self.std_error = match (self.std_error, other.std_error) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.passed = self.worst_slack >= -TOLERANCE;
        self
    }
}

/// `(rhs - lhs) / max(|lhs|, |rhs|, scale)`, and 0 when all of these vanish.
pub fn slack(lhs: f64, rhs: f64, scale: f64) -> f64 {
    let s = lhs.abs().max(rhs.abs()).max(scale);
    if s == 0.0 {
        0.0
    } else {
        (rhs - lhs) / s
    }
}

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn check_points(s: &LpSpace, points: &[Vec<f64>]) -> Result<(), VerifyError> {
    if points.is_empty() {
        return Err(VerifyError::Empty);
    }
    if points.len() > MAX_EXHAUSTIVE {
        return Err(VerifyError::TooManyPoints(points.len()));
    }
    points.iter().try_for_each(|x| s.check(x))?;
    Ok(())
}

fn check_q(q: f64) -> Result<(), VerifyError> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(VerifyError::BadParameter { name: "q", value: q })
    }
}

/// Exact `E|sum eps_i x_i|` and `E|sum eps_i x_i|^q` over all sign patterns.
///
/// Patterns come in pairs `+-eps` of equal norm, so the first sign is fixed
/// and the rest are walked in Gray-code order, one coordinate update per
/// pattern. The running sum is rebuilt every 1024 patterns.
pub fn sign_moments(s: &LpSpace, points: &[Vec<f64>], q: f64) -> Result<(f64, f64), VerifyError> {
    check_points(s, points)?;
    let n = points.len();
    let d = s.dim();
    let mut signs = vec![1.0f64; n];
    let mut sum = vec![0.0; d];
    let rebuild = |signs: &[f64], sum: &mut [f64]| {
        sum.iter_mut().for_each(|v| *v = 0.0);
        for (x, e) in points.iter().zip(signs) {
            for (v, xi) in sum.iter_mut().zip(x) {
                *v += e * xi;
            }
        }
    };
    rebuild(&signs, &mut sum);
    let total = 1u64 << (n - 1);
    let (mut m1, mut mq) = (0.0, 0.0);
    for g in 0..total {
        if g > 0 {
            let j = 1 + g.trailing_zeros() as usize;
            signs[j] = -signs[j];
            if g % 1024 == 0 {
                rebuild(&signs, &mut sum);
            } else {
                let e = 2.0 * signs[j];
                for (v, xi) in sum.iter_mut().zip(&points[j]) {
                    *v += e * xi;
                }
            }
        }
        let r = s.norm_of(&sum);
        m1 += r;
        mq += libm::pow(r, q);
    }
    Ok((m1 / total as f64, mq / total as f64))
}

/// Monte Carlo `E|sum eps_i x_i|^q` with its standard error.
pub fn sign_moment_sampled(
    s: &LpSpace,
    points: &[Vec<f64>],
    q: f64,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64), VerifyError> {
    if points.is_empty() {
        return Err(VerifyError::Empty);
    }
    points.iter().try_for_each(|x| s.check(x))?;
    let mut rng = trial_rng(seed, 0);
    let mut sum = vec![0.0; s.dim()];
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..samples {
        sum.iter_mut().for_each(|v| *v = 0.0);
        for x in points {
            let e = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for (v, xi) in sum.iter_mut().zip(x) {
                *v += e * xi;
            }
        }
        let r = libm::pow(s.norm_of(&sum), q);
        let delta = r - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (r - mean);
    }
    let var = if samples > 1 { m2 / (samples - 1) as f64 } else { 0.0 };
    Ok((mean, libm::sqrt(var / samples as f64)))
}

fn norms_q(s: &LpSpace, points: &[Vec<f64>], q: f64) -> f64 {
    libm::pow(points.iter().map(|x| libm::pow(s.norm_of(x), q)).sum::<f64>(), 1.0 / q)
}

/// `(E|sum eps_i x_i|^q)^(1/q) <= C_q (sum |x_i|^q)^(1/q)`, exactly.
pub fn rademacher_check(s: &LpSpace, points: &[Vec<f64>], q: f64, c_q: f64) -> Result<Verdict, VerifyError> {
    check_q(q)?;
    let (_, mq) = sign_moments(s, points, q)?;
    let lhs = libm::pow(mq, 1.0 / q);
    let rhs = c_q * norms_q(s, points, q);
    let mut v = Verdict::new("rademacher");
    v.record(lhs, rhs, 0.0, || Witness { trial: 0, points: points.to_vec(), params: vec![("q", q), ("C_q", c_q)], lhs, rhs });
    Ok(v)
}

/// Sampled variant for batches too large to enumerate; passes when the
/// estimate is within three standard errors of the bound.
pub fn rademacher_check_sampled(
    s: &LpSpace,
    points: &[Vec<f64>],
    q: f64,
    c_q: f64,
    samples: u64,
    seed: u64,
) -> Result<Verdict, VerifyError> {
    check_q(q)?;
    let (mq, se) = sign_moment_sampled(s, points, q, samples, seed)?;
    let lhs = libm::pow((mq - 3.0 * se).max(0.0), 1.0 / q);
    let rhs = c_q * norms_q(s, points, q);
    let mut v = Verdict::new("rademacher");
    v.record(lhs, rhs, 0.0, || Witness { trial: 0, points: points.to_vec(), params: vec![("q", q), ("C_q", c_q)], lhs, rhs });
    v.std_error = Some(se);
    Ok(v)
}

/// Random batch of `1..=n_max` points with norms spread over four decades.
/// Trial 0 is the first `min(n_max, dim)` unit vectors.
pub fn random_batch(s: &LpSpace, n_max: usize, seed: u64, trial: u64) -> Vec<Vec<f64>> {
    if trial == 0 {
        return (0..n_max.min(s.dim())).map(|i| s.basis(i)).collect();
    }
    let mut rng = trial_rng(seed, trial);
    let n = rng.random_range(1..=n_max);
    (0..n)
        .map(|_| {
            let scale = libm::pow(10.0, rng.random_range(-2.0..2.0));
            s.sample_ball(1.0, &mut rng).into_iter().map(|v| v * scale).collect()
        })
        .collect()
}

pub fn rademacher_suite(
    s: &LpSpace,
    n_max: usize,
    q: f64,
    c_q: f64,
    batches: u64,
    seed: u64,
) -> Result<Verdict, VerifyError> {
    let mut v = Verdict::new("rademacher");
    for t in 0..batches {
        let mut one = rademacher_check(s, &random_batch(s, n_max, seed, t), q, c_q)?;
        if let Some(w) = one.witness.as_mut() {
            w.trial = t;
        }
        v = v.merge(one);
    }
    Ok(v)
}

/// `E|S| <= (E|S|^q)^(1/q) <= K_q E|S|` for `S = sum eps_i x_i`.
pub fn kahane_check(s: &LpSpace, points: &[Vec<f64>], q: f64) -> Result<Verdict, VerifyError> {
    kahane_check_with(s, points, q, kahane_constant(q)?)
}

/// [`kahane_check`] with the constant `k` in place of `K_q`.
pub fn kahane_check_with(s: &LpSpace, points: &[Vec<f64>], q: f64, k: f64) -> Result<Verdict, VerifyError> {
    check_q(q)?;
    let (m1, mq) = sign_moments(s, points, q)?;
    let root = libm::pow(mq, 1.0 / q);
    let mut v = Verdict::new("kahane");
    let w = |lhs, rhs| Witness { trial: 0, points: points.to_vec(), params: vec![("q", q), ("K_q", k)], lhs, rhs };
    v.record(m1, root, 0.0, || w(m1, root));
    v.record(root, k * m1, 0.0, || w(root, k * m1));
    v.trials = 1;
    Ok(v)
}

pub fn kahane_suite(s: &LpSpace, n_max: usize, q: f64, batches: u64, seed: u64) -> Result<Verdict, VerifyError> {
    let mut v = Verdict::new("kahane");
    for t in 0..batches {
        let mut one = kahane_check(s, &random_batch(s, n_max, seed, t), q)?;
        if let Some(w) = one.witness.as_mut() {
            w.trial = t;
        }
        v = v.merge(one);
    }
    Ok(v)
}

// pairs in the unit ball; odd trials draw from the sphere, where the
// inequalities of uniform convexity are tight
fn sample_pair(s: &LpSpace, seed: u64, trial: u64) -> (Vec<f64>, Vec<f64>) {
    if trial == 0 && s.dim() >= 2 {
        return (s.basis(0), s.basis(1));
    }
    let mut rng = trial_rng(seed, trial);
    if trial % 2 == 1 {
        (s.sample_sphere(1.0, &mut rng), s.sample_sphere(1.0, &mut rng))
    } else {
        (s.sample_ball(1.0, &mut rng), s.sample_ball(1.0, &mut rng))
    }
}

/// `min(|x - y|, |x + y|) / 2 <= (1 - delta) max(|x|, |y|)` on sampled
/// pairs; trial 0 is `(e_1, e_2)`.
pub fn nonsquare_check(s: &LpSpace, delta: f64, trials: u64, seed: u64) -> Result<Verdict, VerifyError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(VerifyError::BadParameter { name: "delta", value: delta });
    }
    let mut v = Verdict::new("nonsquare");
    for t in 0..trials {
        let (x, y) = sample_pair(s, seed, t);
        let lhs = nonsquare_lhs(s, &x, &y);
        let rhs = (1.0 - delta) * s.norm_of(&x).max(s.norm_of(&y));
        v.record(lhs, rhs, 0.0, || Witness { trial: t, points: vec![x, y], params: vec![("delta", delta)], lhs, rhs });
    }
    Ok(v)
}

pub fn nonsquare_lhs(s: &LpSpace, x: &[f64], y: &[f64]) -> f64 {
    let plus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    s.dist(x, y).min(s.norm_of(&plus)) / 2.0
}

/// `|x|, |y| <= 1` and `|x - y| = eps > 0` imply `|(x + y)/2| <= 1 - eta(eps)`.
pub fn modulus_check(s: &LpSpace, m: &ModulusSpec, trials: u64, seed: u64) -> Result<Verdict, VerifyError> {
    let mut v = Verdict::new("modulus");
    for t in 0..trials {
        let (x, y) = sample_pair(s, seed, t);
        let eps = s.dist(&x, &y);
        if eps == 0.0 {
            continue;
        }
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a + b) / 2.0).collect();
        let lhs = s.norm_of(&mid);
        let rhs = 1.0 - m.eval(eps);
        v.record(lhs, rhs, 1.0, || Witness { trial: t, points: vec![x, y], params: vec![("eps", eps)], lhs, rhs });
    }
    Ok(v)
}

/// `1/2 sqrt((|x + y|^2 + |x - y|^2) / 2) / max(|x|, |y|)`, the quantity
/// bounded by `mu_2`.
pub fn mu2_ratio(s: &LpSpace, x: &[f64], y: &[f64]) -> Option<f64> {
    let m = s.norm_of(x).max(s.norm_of(y));
    if m == 0.0 {
        return None;
    }
    let plus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let (a, b) = (s.norm_of(&plus), s.dist(x, y));
    Some(0.5 * libm::sqrt((a * a + b * b) / 2.0) / m)
}

/// Sampled estimate of `mu_2` against `1/2 sqrt(2 lambda^2 + 2)`.
pub fn mu2_estimate_check(s: &LpSpace, lambda: f64, trials: u64, seed: u64) -> Result<Verdict, VerifyError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(VerifyError::BadParameter { name: "lambda", value: lambda });
    }
    let bound = 0.5 * libm::sqrt(2.0 * lambda * lambda + 2.0);
    let mut v = Verdict::new("mu2");
    for t in 0..trials {
        let (x, y) = sample_pair(s, seed, t);
        let Some(r) = mu2_ratio(s, &x, &y) else { continue };
        v.record(r, bound, 0.0, || Witness { trial: t, points: vec![x, y], params: vec![("lambda", lambda)], lhs: r, rhs: bound });
    }
    Ok(v)
}

/// Independent mean-zero sums. With `x = sum_j w_j x_j`, each of `n_vars`
/// independent copies takes the value `(x_j - x) / n_vars` with probability
/// `w_j`; checks `(E|sum X_i|^q)^(1/q) <= 2 C_q (sum E|X_i|^q)^(1/q)`.
///
/// Exact over all `m^n_vars` outcomes up to `exhaustive_limit`, seeded
/// Monte Carlo with `exhaustive_limit` draws beyond it. The common divisor
/// `n_vars` cancels from both sides.
#[allow(clippy::too_many_arguments)]
pub fn mean_zero_sum_check(
    s: &LpSpace,
    weights: &[f64],
    points: &[Vec<f64>],
    q: f64,
    c_q: f64,
    n_vars: u32,
    exhaustive_limit: u64,
    seed: u64,
) -> Result<Verdict, VerifyError> {
    check_q(q)?;
    if points.is_empty() {
        return Err(VerifyError::Empty);
    }
    points.iter().try_for_each(|x| s.check(x))?;
    let total: f64 = weights.iter().sum();
    if weights.len() != points.len() || weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(VerifyError::BadWeights);
    }
    if n_vars == 0 {
        return Err(VerifyError::BadParameter { name: "n_vars", value: 0.0 });
    }
    let d = s.dim();
    let mut mean = vec![0.0; d];
    for (w, x) in weights.iter().zip(points) {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += w * xi;
        }
    }
    let values: Vec<Vec<f64>> =
        points.iter().map(|x| x.iter().zip(&mean).map(|(a, m)| (a - m) / n_vars as f64).collect()).collect();
    let single: f64 = weights.iter().zip(&values).map(|(w, v)| w * libm::pow(s.norm_of(v), q)).sum();
    let rhs = 2.0 * c_q * libm::pow(n_vars as f64 * single, 1.0 / q);

    let m = values.len() as u64;
    let outcomes = m.checked_pow(n_vars);
    let mut sum = vec![0.0; d];
    let (lhs, se) = if outcomes.is_some_and(|o| o <= exhaustive_limit) {
        let mut idx = vec![0usize; n_vars as usize];
        let mut acc = 0.0;
        loop {
            sum.iter_mut().for_each(|v| *v = 0.0);
            let mut prob = 1.0;
            for &j in &idx {
                prob *= weights[j];
                for (v, x) in sum.iter_mut().zip(&values[j]) {
                    *v += x;
                }
            }
            acc += prob * libm::pow(s.norm_of(&sum), q);
            // odometer over outcome tuples
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < values.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
        (libm::pow(acc, 1.0 / q), None)
    } else {
        let mut rng = trial_rng(seed, 0);
        let cumulative: Vec<f64> = weights.iter().scan(0.0, |c, w| { *c += w; Some(*c) }).collect();
        let (mut mu, mut m2) = (0.0, 0.0);
        for k in 0..exhaustive_limit.max(2) {
            sum.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..n_vars {
                let u: f64 = rng.random::<f64>() * total;
                let j = cumulative.iter().position(|c| u < *c).unwrap_or(values.len() - 1);
                for (v, x) in sum.iter_mut().zip(&values[j]) {
                    *v += x;
                }
            }
            let r = libm::pow(s.norm_of(&sum), q);
            let delta = r - mu;
            mu += delta / (k + 1) as f64;
            m2 += delta * (r - mu);
        }
        let n = exhaustive_limit.max(2) as f64;
        let se = libm::sqrt(m2 / (n - 1.0) / n);
        (libm::pow((mu - 3.0 * se).max(0.0), 1.0 / q), Some(se))
    };
    let mut v = Verdict::new("mean_zero");
    v.record(lhs, rhs, 0.0, || Witness {
        trial: 0,
        points: points.to_vec(),
        params: vec![("q", q), ("C_q", c_q), ("n_vars", n_vars as f64)],
        lhs,
        rhs,
    });
    v.std_error = se;
    Ok(v)
}

/// Random mean-zero configurations: 1 to 4 points with uniform simplex
/// weights and 1 to 4 variables, each enumerated exactly.
pub fn mean_zero_suite(s: &LpSpace, q: f64, c_q: f64, trials: u64, seed: u64) -> Result<Verdict, VerifyError> {
    let mut v = Verdict::new("mean_zero");
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let m = rng.random_range(1..=4usize);
        let n_vars = rng.random_range(1..=4u32);
        let points: Vec<Vec<f64>> = (0..m).map(|_| s.sample_ball(1.0, &mut rng)).collect();
        let weights = sample_simplex(m, &mut rng);
        let mut one = mean_zero_sum_check(s, &weights, &points, q, c_q, n_vars, 1 << 20, seed)?;
        if let Some(w) = one.witness.as_mut() {
            w.trial = t;
        }
        v = v.merge(one);
    }
    Ok(v)
}

/// Empirical Maurey bound: the average of `p_tilde` independent draws from
/// the weights lies, in mean over `trials`, within
/// `2 C_q p_tilde^((1-q)/q) b` of the convex combination, allowing three
/// standard errors.
#[allow(clippy::too_many_arguments)]
pub fn maurey_check(
    s: &LpSpace,
    weights: &[f64],
    points: &[Vec<f64>],
    p_tilde: u64,
    q: f64,
    c_q: f64,
    b: f64,
    trials: u64,
    seed: u64,
) -> Result<Verdict, VerifyError> {
    check_q(q)?;
    if points.is_empty() {
        return Err(VerifyError::Empty);
    }
    points.iter().try_for_each(|x| s.check(x))?;
    let total: f64 = weights.iter().sum();
    if weights.len() != points.len() || weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(VerifyError::BadWeights);
    }
    if p_tilde == 0 || trials < 2 {
        return Err(VerifyError::BadParameter { name: "p_tilde and trials", value: p_tilde.min(trials) as f64 });
    }
    let d = s.dim();
    let mut mean = vec![0.0; d];
    for (w, x) in weights.iter().zip(points) {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += w * xi;
        }
    }
    let cumulative: Vec<f64> = weights.iter().scan(0.0, |c, w| { *c += w; Some(*c) }).collect();
    let mut v = Verdict::new("maurey");
    let (mut mu, mut m2) = (0.0, 0.0);
    let mut avg = vec![0.0; d];
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        avg.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..p_tilde {
            let u: f64 = rng.random::<f64>() * total;
            let j = cumulative.iter().position(|c| u < *c).unwrap_or(points.len() - 1);
            for (a, x) in avg.iter_mut().zip(&points[j]) {
                *a += x;
            }
        }
        avg.iter_mut().for_each(|a| *a /= p_tilde as f64);
        let dist = s.dist(&avg, &mean);
        // every draw average stays in the ball of radius b/2
        v.record(dist, b, 0.0, || Witness { trial: t, points: vec![avg.clone()], params: vec![("b", b)], lhs: dist, rhs: b });
        let delta = dist - mu;
        mu += delta / (t + 1) as f64;
        m2 += delta * (dist - mu);
    }
    let se = libm::sqrt(m2 / (trials - 1) as f64 / trials as f64);
    let bound = 2.0 * c_q * libm::pow(p_tilde as f64, (1.0 - q) / q) * b;
    let lhs = mu - 3.0 * se;
    v.record(lhs, bound, 0.0, || Witness {
        trial: trials,
        points: points.to_vec(),
        params: vec![("p_tilde", p_tilde as f64), ("q", q), ("C_q", c_q), ("b", b), ("mean_distance", mu)],
        lhs,
        rhs: bound,
    });
    v.trials = trials;
    v.std_error = Some(se);
    Ok(v)
}

/// Sampler for `F_delta(T) = {x in C : |x - Tx| <= delta}` around the known
/// fixed point of a catalogue map.
#[derive(Debug, Clone)]
pub struct ApproxFixedPointSet<'a> {
    map: &'a MapDescriptor,
    delta: f64,
    center: Vec<f64>,
}

impl<'a> ApproxFixedPointSet<'a> {
    pub fn new(map: &'a MapDescriptor, delta: f64) -> Result<Self, VerifyError> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(VerifyError::BadParameter { name: "delta", value: delta });
        }
        let center = map.fixed_point_hint().ok_or(VerifyError::NoApproxFixedPoints("map has no known fixed point"))?;
        Ok(Self { map, delta, center })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// A point of `F_delta(T)`. Half the draws come from the ball of radius
    /// `delta / 2` around the fixed point, which lies inside the set by
    /// nonexpansiveness; the rest from radius `2 delta`, kept only if they
    /// pass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, VerifyError> {
        let s = self.map.space();
        for _ in 0..64 {
            let wide = rng.random::<bool>();
            let r = if wide { 2.0 * self.delta } else { 0.5 * self.delta };
            let u = s.sample_ball(r, rng);
            let mut x: Vec<f64> = self.center.iter().zip(&u).map(|(c, v)| c + v).collect();
            let mut shrink = 0;
            while !self.map.contains(&x) && shrink < 60 {
                for (xi, c) in x.iter_mut().zip(&self.center) {
                    *xi = c + 0.5 * (*xi - c);
                }
                shrink += 1;
            }
            if self.map.contains(&x) && self.map.residual(&x) <= self.delta * (1.0 + TOLERANCE) {
                return Ok(x);
            }
        }
        Err(VerifyError::NoApproxFixedPoints("rejection sampling did not produce a point"))
    }
}

/// Convex combinations of up to 20 points of `F_delta(T)` lie in
/// `F_{eps/3}(T)`.
pub fn convex_hull_afp_check(
    map: &MapDescriptor,
    delta: f64,
    eps: f64,
    samples: u64,
    seed: u64,
) -> Result<Verdict, VerifyError> {
    let set = ApproxFixedPointSet::new(map, delta)?;
    let mut v = Verdict::new("convex_hull_afp");
    for t in 0..samples {
        let mut rng = trial_rng(seed, t);
        let k = rng.random_range(1..=20usize);
        let pts = (0..k).map(|_| set.sample(&mut rng)).collect::<Result<Vec<_>, _>>()?;
        let w = sample_simplex(k, &mut rng);
        let mut x = vec![0.0; map.space().dim()];
        for (wi, p) in w.iter().zip(&pts) {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi += wi * pi;
            }
        }
        let lhs = map.residual(&x);
        let rhs = eps / 3.0;
        v.record(lhs, rhs, 0.0, || Witness { trial: t, points: pts, params: vec![("delta", delta), ("eps", eps)], lhs, rhs });
    }
    Ok(v)
}

/// `gamma(|T(l x1 + (1-l) x2) - (l T x1 + (1-l) T x2)|) <= |x1 - x2| - |T x1 - T x2|`.
pub fn type_gamma_check(map: &MapDescriptor, d: &DerivedModuli, trials: u64, seed: u64) -> Result<Verdict, VerifyError> {
    let s = map.space();
    let mut v = Verdict::new("type_gamma");
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let x1 = map.sample_domain(&mut rng);
        let x2 = map.sample_domain(&mut rng);
        let l: f64 = rng.random();
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| l * a + (1.0 - l) * b).collect();
        let (t1, t2, tm) = (map.apply(&x1), map.apply(&x2), map.apply(&mix));
        let image_mix: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| l * a + (1.0 - l) * b).collect();
        let lhs = d.gamma(s.dist(&tm, &image_mix));
        let gap = s.dist(&x1, &x2);
        let rhs = gap - s.dist(&t1, &t2);
        v.record(lhs, rhs, gap, || Witness { trial: t, points: vec![x1, x2], params: vec![("lambda", l)], lhs, rhs });
    }
    Ok(v)
}

/// `|Tx - Ty| <= |x - y|` on sampled pairs of the domain.
pub fn nonexpansive_check(map: &MapDescriptor, trials: u64, seed: u64) -> Verdict {
    let s = map.space();
    let mut v = Verdict::new("nonexpansive");
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let x = map.sample_domain(&mut rng);
        let y = map.sample_domain(&mut rng);
        let lhs = s.dist(&map.apply(&x), &map.apply(&y));
        let rhs = s.dist(&x, &y);
        v.record(lhs, rhs, 0.0, || Witness { trial: t, points: vec![x, y], params: vec![], lhs, rhs });
    }
    v
}

fn iterate(f: impl Fn(f64) -> f64, x: f64, k: u32) -> f64 {
    (0..k).fold(x, |acc, _| f(acc))
}

// eps log-uniform in [b/20, 2b]
fn sample_eps<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    b * libm::exp(rng.random_range(libm::log(0.05)..=libm::log(2.0)))
}

/// `t < xi^p(eps)` implies `q~^p(t) < eps`, for `p <= 5`.
pub fn q_tilde_lemma_check(d: &DerivedModuli, trials: u64, seed: u64) -> Verdict {
    let (m, b) = (d.modulus(), d.b());
    let mut v = Verdict::new("q_tilde_lemma");
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let eps = sample_eps(b, &mut rng);
        let p = rng.random_range(1..=5u32);
        let top = iterate(|x| shrink_xi(m, b, x), eps, p);
        let arg = top * rng.random::<f64>();
        let lhs = iterate(|x| d.q_tilde(x), arg, p);
        v.record(lhs, eps, 0.0, || Witness { trial: t, points: vec![], params: vec![("eps", eps), ("p", p as f64), ("t", arg)], lhs, rhs: eps });
    }
    v
}

/// `n >= b / eps` implies `q_n^p(eps) <= q~^p(eps)`, for `p <= 5`.
pub fn q_n_lemma_check(d: &DerivedModuli, trials: u64, seed: u64) -> Verdict {
    let b = d.b();
    let mut v = Verdict::new("q_n_lemma");
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let eps = sample_eps(b, &mut rng);
        let p = rng.random_range(1..=5u32);
        let n = libm::ceil(b / eps) as u64 * rng.random_range(1..=100u64);
        let lhs = iterate(|x| d.q_n(x, n), eps, p);
        let rhs = iterate(|x| d.q_tilde(x), eps, p);
        v.record(lhs, rhs, 0.0, || Witness { trial: t, points: vec![], params: vec![("eps", eps), ("p", p as f64), ("n", n as f64)], lhs, rhs });
    }
    v
}

/// `xi(eps) <= gamma(eps / 2) / 3`.
pub fn xi_gamma_check(d: &DerivedModuli, trials: u64, seed: u64) -> Verdict {
    let (m, b) = (d.modulus(), d.b());
    let mut v = Verdict::new("xi_gamma");
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let eps = sample_eps(b, &mut rng);
        let lhs = shrink_xi(m, b, eps);
        let rhs = d.gamma(eps / 2.0) / 3.0;
        v.record(lhs, rhs, 0.0, || Witness { trial: t, points: vec![], params: vec![("eps", eps)], lhs, rhs });
    }
    v
}

/// `xi^i(t) <= sigma^i(t)` for `i <= 5`, with `sigma` the inverse of `q~`.
pub fn xi_sigma_check(d: &DerivedModuli, trials: u64, seed: u64) -> Verdict {
    let (m, b) = (d.modulus(), d.b());
    let mut v = Verdict::new("xi_sigma");
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let x = sample_eps(b, &mut rng);
        let i = rng.random_range(1..=5u32);
        let lhs = iterate(|y| shrink_xi(m, b, y), x, i);
        let rhs = iterate(|y| d.sigma(y), x, i);
        v.record(lhs, rhs, 0.0, || Witness { trial: t, points: vec![], params: vec![("t", x), ("i", i as f64)], lhs, rhs });
    }
    v
}

/// All four lemma checks for one modulus.
pub fn lemma_suite(d: &DerivedModuli, trials: u64, seed: u64) -> [Verdict; 4] {
    [
        q_tilde_lemma_check(d, trials, seed),
        q_n_lemma_check(d, trials, seed),
        xi_gamma_check(d, trials, seed),
        xi_sigma_check(d, trials, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pisier::rademacher_profile;
    use crate::spaces::MapKind;

    const HILBERT_DELTA: f64 = 0.133_974_596_215_561_35;

    fn l2(d: usize) -> LpSpace {
        LpSpace::euclidean(d).unwrap()
    }

    fn l1(d: usize) -> LpSpace {
        LpSpace::new(d, 1.0).unwrap()
    }

    #[test]
    fn verdict_bookkeeping() {
        let mut v = Verdict::new("x");
        assert!(v.passed && v.worst_slack == f64::INFINITY);
        let w = |lhs, rhs| Witness { trial: 0, points: vec![], params: vec![], lhs, rhs };
        v.record(1.0, 2.0, 0.0, || w(1.0, 2.0));
        v.record(2.0, 1.0, 0.0, || w(2.0, 1.0));
        v.record(1.0, 1.0, 0.0, || w(1.0, 1.0));
        assert!(!v.passed && v.trials == 3 && v.worst_slack == -0.5);
        assert_eq!(v.witness.as_ref().unwrap().lhs, 2.0);
        assert_eq!(slack(0.0, 0.0, 0.0), 0.0);
        assert!(slack(1.0 + 1e-12, 1.0, 0.0) > -TOLERANCE);
    }

    #[test]
    fn rademacher_single_point_is_tight() {
        let s = LpSpace::new(3, 1.7).unwrap();
        let v = rademacher_check(&s, &[vec![0.3, -2.0, 1.0]], 1.3, 1.0).unwrap();
        assert!(v.passed && v.worst_slack.abs() < 1e-15);
    }

    #[test]
    fn rademacher_reals_exact_equality() {
        let s = l2(1);
        let pts = vec![vec![0.3], vec![-1.2], vec![2.5], vec![0.01]];
        let v = rademacher_check(&s, &pts, 2.0, 1.0).unwrap();
        assert!(v.passed && v.worst_slack.abs() < 1e-14, "{}", v.worst_slack);
    }

    #[test]
    fn rademacher_l1_counterexample() {
        let s = l1(2);
        let v = rademacher_check(&s, &[s.basis(0), s.basis(1)], 2.0, 1.0).unwrap();
        assert!(!v.passed);
        let w = v.witness.unwrap();
        assert!((w.lhs * w.lhs - 4.0).abs() < 1e-12 && (w.rhs * w.rhs - 2.0).abs() < 1e-12);
        let replay = rademacher_check(&s, &w.points, 2.0, 1.0).unwrap();
        assert!(!replay.passed);
    }

    #[test]
    fn gray_code_matches_direct_sum() {
        let s = LpSpace::new(4, 3.0).unwrap();
        let pts = random_batch(&s, 11, 5, 3);
        let (m1, mq) = sign_moments(&s, &pts, 1.5).unwrap();
        let n = pts.len();
        let (mut a1, mut aq) = (0.0, 0.0);
        for mask in 0..(1u64 << n) {
            let mut sum = vec![0.0; 4];
            for (i, x) in pts.iter().enumerate() {
                let e = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
                for (v, xi) in sum.iter_mut().zip(x) {
                    *v += e * xi;
                }
            }
            let r = s.norm_of(&sum);
            a1 += r;
            aq += libm::pow(r, 1.5);
        }
        let total = (1u64 << n) as f64;
        assert!((m1 - a1 / total).abs() < 1e-12 * m1);
        assert!((mq - aq / total).abs() < 1e-12 * mq);
    }

    #[test]
    fn sampled_moment_agrees_with_exhaustive() {
        let s = l2(3);
        for trial in 1..4 {
            let pts = random_batch(&s, 12, 8, trial);
            let (_, exact) = sign_moments(&s, &pts, 2.0).unwrap();
            let (est, se) = sign_moment_sampled(&s, &pts, 2.0, 200_000, trial).unwrap();
            assert!((est - exact).abs() <= 4.0 * se + 1e-12, "{est} {exact} {se}");
        }
    }

    #[test]
    fn rademacher_rejects_large_batches() {
        let s = l2(1);
        let pts = vec![vec![1.0]; 21];
        assert_eq!(rademacher_check(&s, &pts, 2.0, 1.0), Err(VerifyError::TooManyPoints(21)));
        assert!(rademacher_check_sampled(&s, &pts, 2.0, 1.0, 10_000, 1).unwrap().passed);
    }

    #[test]
    fn rademacher_with_hilbert_profile() {
        let p = rademacher_profile(HILBERT_DELTA, 0.5).unwrap();
        let v = rademacher_suite(&l2(6), 10, p.q, p.c_q, 200, 1).unwrap();
        assert!(v.passed && v.trials == 200);
    }

    #[test]
    fn kahane_examples() {
        let r = l2(1);
        let (m1, m2) = sign_moments(&r, &[vec![1.0], vec![1.0]], 2.0).unwrap();
        assert!((m1 - 1.0).abs() < 1e-15 && (m2 - 2.0).abs() < 1e-15);
        assert!(kahane_check(&r, &[vec![1.0], vec![1.0]], 2.0).unwrap().passed);
        let one = kahane_check(&l2(2), &[vec![0.6, 0.8]], 1.7).unwrap();
        assert!(one.passed && one.worst_slack.abs() < 1e-15);
        let v = kahane_suite(&LpSpace::new(5, 3.0).unwrap(), 10, 1.5, 200, 2).unwrap();
        assert!(v.passed);
        // sqrt 2 > 1 * 1
        let bad = kahane_check_with(&r, &[vec![1.0], vec![1.0]], 2.0, 1.0).unwrap();
        assert!(!bad.passed && (bad.witness.unwrap().lhs - libm::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn nonsquare_examples() {
        assert!(nonsquare_check(&l2(4), HILBERT_DELTA, 20_000, 3).unwrap().passed);
        let v = nonsquare_check(&l1(2), 0.5, 10, 3).unwrap();
        assert!(!v.passed);
        let w = v.witness.unwrap();
        assert_eq!((w.lhs, w.rhs), (1.0, 0.5));
        assert_eq!(nonsquare_lhs(&l2(2), &[0.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn modulus_examples() {
        assert!(modulus_check(&l2(3), &ModulusSpec::Hilbert, 20_000, 4).unwrap().passed);
        let v = modulus_check(&l1(2), &ModulusSpec::Hilbert, 10, 4).unwrap();
        assert!(!v.passed);
        let w = v.witness.unwrap();
        assert_eq!(w.points, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((w.lhs - 1.0).abs() < 1e-15);
        for &p in &[1.5, 3.0, 4.0] {
            let s = LpSpace::new(3, p).unwrap();
            assert!(modulus_check(&s, &ModulusSpec::lp_preset(p).unwrap(), 20_000, 4).unwrap().passed, "{p}");
        }
    }

    #[test]
    fn mu2_examples() {
        let s = l2(2);
        let e1 = s.basis(0);
        assert!((mu2_ratio(&s, &e1, &e1).unwrap() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // a zero partner gives 1/2 sqrt((|x|^2 + |x|^2) / 2) / |x| = 1/2
        assert!((mu2_ratio(&s, &[0.3, 0.4], &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(mu2_ratio(&s, &[0.0, 0.0], &[0.0, 0.0]), None);
        let lambda = 1.0 - HILBERT_DELTA;
        let v = mu2_estimate_check(&l2(3), lambda, 20_000, 5).unwrap();
        assert!(v.passed && v.worst_slack > 0.2);
        assert!(!mu2_estimate_check(&l1(2), lambda, 10, 5).unwrap().passed);
    }

    #[test]
    fn mean_zero_examples() {
        let s = l2(1);
        assert!(mean_zero_sum_check(&s, &[1.0], &[vec![0.7]], 2.0, 1.0, 3, 1000, 0).unwrap().passed);
        let e = vec![vec![1.0], vec![-1.0]];
        let v = mean_zero_sum_check(&s, &[0.5, 0.5], &e, 2.0, 1.0, 2, 1000, 0).unwrap();
        // E|X1 + X2|^2 = sum E|X_i|^2, so lhs = rhs / 2
        let w = v.witness.as_ref().unwrap();
        assert!(v.passed && (w.rhs - 2.0 * w.lhs).abs() < 1e-15);
        assert!(!mean_zero_sum_check(&s, &[0.5, 0.5], &e, 2.0, 0.4, 2, 1000, 0).unwrap().passed);
        let mc = mean_zero_sum_check(&s, &[0.5, 0.5], &e, 2.0, 1.0, 30, 100_000, 9).unwrap();
        assert!(mc.passed && mc.std_error.is_some());
        let p = rademacher_profile(HILBERT_DELTA, 0.5).unwrap();
        assert!(mean_zero_suite(&l2(3), p.q, p.c_q, 300, 6).unwrap().passed);
    }

    #[test]
    fn maurey_examples() {
        let s = l2(2);
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let v = maurey_check(&s, &[0.5, 0.5], &pts, 100, 2.0, 1.0, 2.0, 2000, 1).unwrap();
        assert!(v.passed);
        let w = v.witness.as_ref();
        assert!(w.is_some());
        let mean = v.witness.unwrap().params.iter().find(|p| p.0 == "mean_distance").map(|p| p.1);
        // E|2 B/100 - 1| for B ~ Bin(100, 1/2) is 0.0796
        if let Some(m) = mean {
            assert!((m - 0.0796).abs() < 0.01, "{m}");
        }
        assert!(!maurey_check(&s, &[0.5, 0.5], &pts, 100, 2.0, 0.01, 2.0, 2000, 1).unwrap().passed);
        let single = maurey_check(&s, &[1.0], &pts[..1], 10, 2.0, 1.0, 2.0, 100, 1).unwrap();
        assert!(single.passed);
    }

    fn quarter_turn() -> MapDescriptor {
        MapDescriptor::new(l2(2), MapKind::Rotation { angles: vec![core::f64::consts::FRAC_PI_2] }, 1.0).unwrap()
    }

    #[test]
    fn afp_examples() {
        let m = quarter_turn();
        let set = ApproxFixedPointSet::new(&m, 0.01).unwrap();
        let mut rng = trial_rng(1, 0);
        for _ in 0..1000 {
            let x = set.sample(&mut rng).unwrap();
            assert!(m.residual(&x) <= 0.01 * (1.0 + TOLERANCE));
        }
        assert!(convex_hull_afp_check(&m, 0.01, 0.9, 2000, 2).unwrap().passed);
        assert!(!convex_hull_afp_check(&m, 0.9, 0.9, 2000, 2).unwrap().passed);
    }

    #[test]
    fn type_gamma_examples() {
        let s = l2(3);
        let d = DerivedModuli::new(ModulusSpec::Hilbert, 2.0).unwrap();
        let id = MapDescriptor::new(s, MapKind::Identity, 1.0).unwrap();
        assert!(type_gamma_check(&id, &d, 100, 1).unwrap().passed);
        let rot = MapDescriptor::new(s, MapKind::Rotation { angles: vec![0.4] }, 1.0).unwrap();
        assert!(type_gamma_check(&rot, &d, 1000, 1).unwrap().passed);
        let proj = MapDescriptor::new(s, MapKind::Projection { center: vec![0.1, 0.0, 0.0], radius: 0.3 }, 1.0).unwrap();
        assert!(type_gamma_check(&proj, &d, 20_000, 1).unwrap().passed);
    }

    #[test]
    fn nonexpansive_catalogue() {
        assert!(nonexpansive_check(&quarter_turn(), 1000, 1).passed);
    }

    #[test]
    fn lemma_suites_pass() {
        for (name, m) in ModulusSpec::catalogue() {
            for &b in &[1.0, 2.5] {
                let d = DerivedModuli::new(m.clone(), b).unwrap();
                for v in lemma_suite(&d, 200, 3) {
                    assert!(v.passed, "{name} b={b} {v:?}");
                }
            }
        }
    }

    #[test]
    fn reruns_are_identical() {
        let a = nonsquare_check(&l2(3), HILBERT_DELTA, 500, 42).unwrap();
        let b = nonsquare_check(&l2(3), HILBERT_DELTA, 500, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.worst_slack.to_bits(), b.worst_slack.to_bits());
    }
}
