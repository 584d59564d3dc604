//! Finite-dimensional `l^p` spaces, nonexpansive self-maps of balls and the
//! Cesaro-mean iteration.
//!
//! Every map in the catalogue acts on the closed ball of radius `b / 2`
//! around the origin. Rotations and ball projections are isometries or
//! nonexpansive only for the Euclidean norm and are rejected elsewhere.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use thiserror::Error;

/// Slack allowed on domain membership after float rounding.
pub const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("norm exponent must lie in [1, inf], got {0}")]
    BadExponent(f64),
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("{0} maps are nonexpansive only in l^2")]
    NeedsEuclidean(&'static str),
    #[error("invalid map: {0}")]
    BadMap(&'static str),
    #[error("starting point has norm {norm}, outside the domain radius {radius}")]
    StartOutside { norm: f64, radius: f64 },
    #[error("orbit left the domain at step {n}: norm {norm} > radius {radius}")]
    Escaped { n: u64, norm: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpace {
    dim: usize,
    p: f64,
}

impl LpSpace {
    /// `p = f64::INFINITY` gives the max norm.
    pub fn new(dim: usize, p: f64) -> Result<Self, SpaceError> {
        if dim == 0 {
            return Err(SpaceError::ZeroDimension);
        }
        if !(p >= 1.0) {
            return Err(SpaceError::BadExponent(p));
        }
        Ok(Self { dim, p })
    }

    pub fn euclidean(dim: usize) -> Result<Self, SpaceError> {
        Self::new(dim, 2.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_euclidean(&self) -> bool {
        self.p == 2.0
    }

    pub fn check(&self, x: &[f64]) -> Result<(), SpaceError> {
        if x.len() != self.dim {
            return Err(SpaceError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SpaceError::NonFinite);
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64, SpaceError> {
        self.check(x)?;
        Ok(self.norm_of(x))
    }

    /// Norm without the dimension check.
    pub fn norm_of(&self, x: &[f64]) -> f64 {
        let top = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if top == 0.0 || self.p == f64::INFINITY {
            return top;
        }
        if self.p == 1.0 {
            return x.iter().map(|v| v.abs()).sum();
        }
        // scaled to avoid overflow in |x_i|^p
        let sum: f64 = if self.p == 2.0 {
            x.iter().map(|v| (v / top) * (v / top)).sum()
        } else {
            x.iter().map(|v| libm::pow(v.abs() / top, self.p)).sum()
        };
        top * libm::pow(sum, 1.0 / self.p)
    }

    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut d = vec![0.0; x.len()];
        for (di, (a, b)) in d.iter_mut().zip(x.iter().zip(y)) {
            *di = a - b;
        }
        self.norm_of(&d)
    }

    pub fn zero(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    pub fn basis(&self, i: usize) -> Vec<f64> {
        let mut e = self.zero();
        e[i] = 1.0;
        e
    }

    /// Point on the sphere of the given radius: cone measure for general
    /// `p`, the uniform surface measure for `p = 2`.
    pub fn sample_sphere<R: Rng + ?Sized>(&self, radius: f64, rng: &mut R) -> Vec<f64> {
        loop {
            let g = self.generalized_gaussian(rng);
            let n = self.norm_of(&g);
            if n > 0.0 {
                return g.into_iter().map(|v| radius * v / n).collect();
            }
        }
    }

    /// Point uniform in the ball of the given radius.
    pub fn sample_ball<R: Rng + ?Sized>(&self, radius: f64, rng: &mut R) -> Vec<f64> {
        if self.p == f64::INFINITY {
            return (0..self.dim).map(|_| radius * rng.random_range(-1.0..=1.0)).collect();
        }
        // g / (|g|_p^p + W)^(1/p) with W standard exponential
        let g = self.generalized_gaussian(rng);
        let w: f64 = Exp1.sample(rng);
        let s: f64 = g.iter().map(|v| libm::pow(v.abs(), self.p)).sum::<f64>() + w;
        let scale = radius / libm::pow(s, 1.0 / self.p);
        g.into_iter().map(|v| v * scale).collect()
    }

    // density proportional to exp(-|t|^p) in each coordinate
    fn generalized_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.p == 2.0 {
            return (0..self.dim).map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * core::f64::consts::FRAC_1_SQRT_2
            }).collect();
        }
        if self.p == f64::INFINITY {
            return (0..self.dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        }
        let gamma = Gamma::new(1.0 / self.p, 1.0).expect("positive shape");
        (0..self.dim)
            .map(|_| {
                let r = libm::pow(gamma.sample(rng), 1.0 / self.p);
                if rng.random::<bool>() { r } else { -r }
            })
            .collect()
    }
}

/// Uniform point of the probability simplex with `n` vertices.
pub fn sample_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// A point with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LpPoint {
    coords: Vec<f64>,
}

impl LpPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(SpaceError::NonFinite);
        }
        Ok(Self { coords })
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }
}

impl Deref for LpPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.coords
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Identity,
    /// Angle `angles[k]` in the coordinate plane `(2k, 2k + 1)`.
    Rotation { angles: Vec<f64> },
    /// `x -> x + step (target - x)`.
    TranslationToward { target: Vec<f64>, step: f64 },
    /// Metric projection onto a ball; Euclidean only.
    Projection { center: Vec<f64>, radius: f64 },
    /// Applied left to right.
    Compose(Vec<MapKind>),
    ConvexCombination { weights: Vec<f64>, maps: Vec<MapKind> },
}

impl MapKind {
    fn apply_into(&self, s: &LpSpace, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            Self::Identity => out.extend_from_slice(x),
            Self::Rotation { angles } => {
                out.extend_from_slice(x);
                for (k, &a) in angles.iter().enumerate() {
                    let (i, j) = (2 * k, 2 * k + 1);
                    if j >= x.len() {
                        break;
                    }
                    let (sn, cs) = libm::sincos(a);
                    out[i] = cs * x[i] - sn * x[j];
                    out[j] = sn * x[i] + cs * x[j];
                }
            }
            Self::TranslationToward { target, step } => {
                out.extend(x.iter().zip(target).map(|(a, t)| a + step * (t - a)));
            }
            Self::Projection { center, radius } => {
                let d = s.dist(x, center);
                let f = if d > *radius { radius / d } else { 1.0 };
                out.extend(x.iter().zip(center).map(|(a, c)| c + f * (a - c)));
            }
            Self::Compose(maps) => {
                out.extend_from_slice(x);
                let mut tmp = Vec::with_capacity(x.len());
                for m in maps {
                    m.apply_into(s, out, &mut tmp);
                    core::mem::swap(out, &mut tmp);
                }
            }
            Self::ConvexCombination { weights, maps } => {
                out.resize(x.len(), 0.0);
                let mut tmp = Vec::with_capacity(x.len());
                for (w, m) in weights.iter().zip(maps) {
                    m.apply_into(s, x, &mut tmp);
                    for (o, v) in out.iter_mut().zip(&tmp) {
                        *o += w * v;
                    }
                }
            }
        }
    }

    fn validate(&self, s: &LpSpace, radius: f64) -> Result<(), SpaceError> {
        match self {
            Self::Identity => Ok(()),
            Self::Rotation { angles } => {
                if !s.is_euclidean() {
                    return Err(SpaceError::NeedsEuclidean("rotation"));
                }
                if angles.is_empty() || angles.iter().any(|a| !a.is_finite()) {
                    return Err(SpaceError::BadMap("rotation needs finite angles"));
                }
                if 2 * angles.len() > s.dim() {
                    return Err(SpaceError::BadMap("more rotation planes than the dimension allows"));
                }
                Ok(())
            }
            Self::TranslationToward { target, step } => {
                s.check(target)?;
                if !(0.0..=1.0).contains(step) {
                    return Err(SpaceError::BadMap("translation step must lie in [0, 1]"));
                }
                if s.norm_of(target) > radius * (1.0 + DOMAIN_SLACK) {
                    return Err(SpaceError::BadMap("translation target lies outside the domain"));
                }
                Ok(())
            }
            Self::Projection { center, radius: r } => {
                if !s.is_euclidean() {
                    return Err(SpaceError::NeedsEuclidean("projection"));
                }
                s.check(center)?;
                if !(*r >= 0.0 && r.is_finite()) {
                    return Err(SpaceError::BadMap("projection radius must be nonnegative"));
                }
                if s.norm_of(center) + r > radius * (1.0 + DOMAIN_SLACK) {
                    return Err(SpaceError::BadMap("projection ball must lie inside the domain"));
                }
                Ok(())
            }
            Self::Compose(maps) => {
                if maps.is_empty() {
                    return Err(SpaceError::BadMap("empty composition"));
                }
                maps.iter().try_for_each(|m| m.validate(s, radius))
            }
            Self::ConvexCombination { weights, maps } => {
                if maps.is_empty() || weights.len() != maps.len() {
                    return Err(SpaceError::BadMap("need one weight per map"));
                }
                let total: f64 = weights.iter().sum();
                if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                    return Err(SpaceError::BadMap("weights must be nonnegative and sum to 1"));
                }
                maps.iter().try_for_each(|m| m.validate(s, radius))
            }
        }
    }

    fn hints(&self, s: &LpSpace, out: &mut Vec<Vec<f64>>) {
        match self {
            Self::Identity | Self::Rotation { .. } => out.push(s.zero()),
            Self::TranslationToward { target, .. } => out.push(target.clone()),
            Self::Projection { center, .. } => out.push(center.clone()),
            Self::Compose(maps) | Self::ConvexCombination { maps, .. } => {
                maps.iter().for_each(|m| m.hints(s, out));
            }
        }
    }
}

/// A catalogue map together with its domain, the ball of radius
/// `domain_radius` around the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDescriptor {
    space: LpSpace,
    kind: MapKind,
    domain_radius: f64,
}

impl MapDescriptor {
    pub fn new(space: LpSpace, kind: MapKind, domain_radius: f64) -> Result<Self, SpaceError> {
        if !(domain_radius > 0.0 && domain_radius.is_finite()) {
            return Err(SpaceError::BadMap("domain radius must be positive"));
        }
        kind.validate(&space, domain_radius)?;
        Ok(Self { space, kind, domain_radius })
    }

    pub fn space(&self) -> &LpSpace {
        &self.space
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.domain_radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.space.norm_of(x) <= self.domain_radius * (1.0 + DOMAIN_SLACK)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.kind.apply_into(&self.space, x, &mut out);
        out
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.space.dist(x, &self.apply(x))
    }

    /// A fixed point, when one is known and survives re-substitution.
    pub fn fixed_point_hint(&self) -> Option<Vec<f64>> {
        let mut candidates = Vec::new();
        self.kind.hints(&self.space, &mut candidates);
        candidates.into_iter().find(|h| self.residual(h) <= 1e-12 * (1.0 + self.space.norm_of(h)))
    }

    pub fn sample_domain<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.space.sample_ball(self.domain_radius, rng)
    }

    pub fn run(&self, x: &[f64], n_max: u64, noise: f64, seed: u64) -> Result<CesaroRun<'_>, SpaceError> {
        CesaroRun::new(self, x, n_max, noise, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: u64,
    pub residual: f64,
}

/// Streaming Cesaro means `m_n = (1/n) sum_{i<n} o_i` of an orbit with
/// `o_0 = x` and `o_{i+1}` within `noise` of `T o_i`; yields
/// `|m_n - T m_n|` for `n = 1..=n_max`.
pub struct CesaroRun<'a> {
    map: &'a MapDescriptor,
    orbit: Vec<f64>,
    mean: Vec<f64>,
    n: u64,
    n_max: u64,
    noise: f64,
    rng: ChaCha8Rng,
    failed: bool,
}

impl<'a> CesaroRun<'a> {
    pub fn new(map: &'a MapDescriptor, x: &[f64], n_max: u64, noise: f64, seed: u64) -> Result<Self, SpaceError> {
        map.space.check(x)?;
        if !map.contains(x) {
            return Err(SpaceError::StartOutside { norm: map.space.norm_of(x), radius: map.domain_radius });
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(SpaceError::BadMap("noise must be nonnegative"));
        }
        Ok(Self {
            map,
            orbit: x.to_vec(),
            mean: x.to_vec(),
            n: 0,
            n_max,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            failed: false,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn orbit_point(&self) -> &[f64] {
        &self.orbit
    }

    fn advance(&mut self) -> Result<(), SpaceError> {
        let mut next = self.map.apply(&self.orbit);
        if self.noise > 0.0 {
            let v = self.map.space.sample_sphere(self.noise, &mut self.rng);
            self.perturb(&mut next, &v);
        }
        let norm = self.map.space.norm_of(&next);
        if norm > self.map.domain_radius * (1.0 + DOMAIN_SLACK) {
            return Err(SpaceError::Escaped { n: self.n, norm, radius: self.map.domain_radius });
        }
        self.orbit = next;
        let w = 1.0 / (self.n + 1) as f64;
        for (m, o) in self.mean.iter_mut().zip(&self.orbit) {
            *m += (o - *m) * w;
        }
        Ok(())
    }

    // largest step along v that stays in the domain
    fn perturb(&self, base: &mut [f64], v: &[f64]) {
        let s = &self.map.space;
        let at = |t: f64| -> Vec<f64> { base.iter().zip(v).map(|(b, d)| b + t * d).collect() };
        let r = self.map.domain_radius;
        let t = if s.norm_of(&at(1.0)) <= r {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if s.norm_of(&at(mid)) <= r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        for (b, d) in base.iter_mut().zip(v) {
            *b += t * d;
        }
    }
}

impl Iterator for CesaroRun<'_> {
    type Item = Result<TraceRow, SpaceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.n >= self.n_max {
            return None;
        }
        if self.n > 0 {
            if let Err(e) = self.advance() {
                self.failed = true;
                return Some(Err(e));
            }
        }
        self.n += 1;
        Some(Ok(TraceRow { n: self.n, residual: self.map.residual(&self.mean) }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub checked: u64,
    /// `(n, residual, envelope)` for every violation.
    pub violations: Vec<(u64, f64, f64)>,
    /// Least `envelope - residual` seen.
    pub worst_slack: f64,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Rows with `residual > envelope(n) + 1e-9`.
pub fn residual_envelope_check<I, F>(trace: I, envelope: F) -> EnvelopeReport
where
    I: IntoIterator<Item = TraceRow>,
    F: Fn(u64) -> f64,
{
    let mut report = EnvelopeReport { checked: 0, violations: Vec::new(), worst_slack: f64::INFINITY };
    for row in trace {
        let env = envelope(row.n);
        report.checked += 1;
        report.worst_slack = report.worst_slack.min(env - row.residual);
        if row.residual > env + 1e-9 {
            report.violations.push((row.n, row.residual, env));
        }
    }
    report
}

/// `diam / sqrt(n)`.
pub fn hilbert_envelope(diam: f64) -> impl Fn(u64) -> f64 {
    move |n| diam / libm::sqrt(n as f64)
}

/// Boxed envelope, for callers that pick one at runtime.
pub type Envelope = Box<dyn Fn(u64) -> f64>;
