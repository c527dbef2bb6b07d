//! Invariant log-densities, exact momentum-marginal samplers and one-dimensional
//! distance statistics.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::SVec;
use crate::potentials::{ForceField, PotentialSpec};
use crate::state::{check_domain, PhaseState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    GibbsBoltzmann { mass: f64 },
    MaxwellJuttner { epsilon: f64 },
}

impl DensityKind {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DensityKind::GibbsBoltzmann { mass } => mass > 0.0 && mass.is_finite(),
            DensityKind::MaxwellJuttner { epsilon } => epsilon > 0.0 && epsilon.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid density parameters {self:?}")))
        }
    }

    /// Unnormalized log-density of one particle's momentum (velocity) marginal.
    pub fn momentum_log_density(&self, p: &SVec<f64>) -> f64 {
        match *self {
            DensityKind::GibbsBoltzmann { mass } => -0.5 * mass * p.norm_sq(),
            DensityKind::MaxwellJuttner { epsilon } => -(1.0 + epsilon * p.norm_sq()).sqrt() / epsilon,
        }
    }
}

/// Unnormalized log-density. Gibbs–Boltzmann: `−Σ(½m|v|² + U) − Σ_{i<j}G`; Maxwell–Jüttner:
/// `−Σ(√(1+ε|p|²)/ε + U) − Σ_{i<j}G`, with G about the origin for a single particle.
pub fn log_density(kind: &DensityKind, state: &PhaseState<f64>, potentials: &PotentialSpec<f64>) -> Result<f64> {
    kind.validate()?;
    check_domain(state, 0.0)?;
    let anchored = matches!(kind, DensityKind::MaxwellJuttner { .. }) && state.particles() == 1;
    let pot = ForceField::new(potentials, anchored).energy(state)?;
    let kin: f64 = (0..state.particles()).map(|i| kind.momentum_log_density(&state.p(i))).sum();
    Ok(kin - pot)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalSamples {
    pub samples: Vec<SVec<f64>>,
    pub proposals: u64,
    pub acceptance: f64,
}

/// Rate of the Laplace envelope tangent to `−√(1+εr²)/ε` at the radius that maximizes the
/// acceptance bound in dimension `d`, and the tangent point.
fn laplace_envelope(epsilon: f64, d: usize) -> (f64, f64) {
    let objective = |r0: f64| {
        let s = (1.0 + epsilon * r0 * r0).sqrt();
        let lam = r0 / s;
        d as f64 * lam.ln() + s / epsilon - lam * r0
    };
    let (mut lo, mut hi) = ((1e-6f64).ln(), (1e6 / epsilon.sqrt()).ln());
    // The objective is unimodal in log r₀; golden-section search.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if objective(a.exp()) > objective(b.exp()) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let r0 = (0.5 * (lo + hi)).exp();
    (r0 / (1.0 + epsilon * r0 * r0).sqrt(), r0)
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> SVec<f64> {
    loop {
        let mut v = SVec::zeros(d);
        for k in 0..d {
            v[k] = rng.sample(StandardNormal);
        }
        let n = v.norm();
        if n > 1e-12 {
            return v.scale(1.0 / n);
        }
    }
}

/// Exact i.i.d. draws from one particle's momentum marginal.
pub fn sample_momentum_marginal(kind: &DensityKind, d: usize, count: usize, seed: u64) -> Result<MarginalSamples> {
    kind.validate()?;
    if count == 0 || d == 0 || d > crate::linalg::MAX_DIM {
        return Err(Error::InvalidArgument("count >= 1 and 1 <= d <= 3 required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *kind {
        DensityKind::GibbsBoltzmann { mass } => {
            let sd = 1.0 / mass.sqrt();
            let samples = (0..count)
                .map(|_| {
                    let mut v = SVec::zeros(d);
                    for k in 0..d {
                        v[k] = sd * rng.sample::<f64, _>(StandardNormal);
                    }
                    v
                })
                .collect();
            Ok(MarginalSamples { samples, proposals: count as u64, acceptance: 1.0 })
        }
        DensityKind::MaxwellJuttner { epsilon } => {
            let (lam, r0) = laplace_envelope(epsilon, d);
            let radius = Gamma::new(d as f64, 1.0 / lam).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let h = |r: f64| -(1.0 + epsilon * r * r).sqrt() / epsilon;
            let h0 = h(r0);
            let mut samples = Vec::with_capacity(count);
            let mut proposals = 0u64;
            while samples.len() < count {
                proposals += 1;
                let r = radius.sample(&mut rng);
                let log_ratio = h(r) - h0 + lam * (r - r0);
                if rng.random::<f64>().ln() < log_ratio {
                    samples.push(random_direction(&mut rng, d).scale(r));
                }
                if proposals >= 1000 && (samples.len() as f64) < 1e-3 * proposals as f64 {
                    return Err(Error::EnvelopeFailure { acceptance: samples.len() as f64 / proposals as f64 });
                }
            }
            Ok(MarginalSamples { samples, proposals, acceptance: count as f64 / proposals as f64 })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    KolmogorovSmirnov,
    MomentGap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub statistic: Statistic,
    pub value: f64,
    pub sample_count: usize,
    pub reference: String,
}

pub const MIN_KS_SAMPLES: usize = 100;

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::InvalidArgument(format!("KS needs at least {MIN_KS_SAMPLES} samples")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS statistic `sup|F_n − F|`.
pub fn ks_distance_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64, reference: &str) -> Result<DistanceReport> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        // Left limit of F at the jump of F_n, so step reference CDFs are handled exactly.
        let below = cdf(v[i].next_down());
        d = d.max((below - i as f64 / n).abs()).max(((j + 1) as f64 / n - cdf(v[i])).abs());
        i = j + 1;
    }
    Ok(DistanceReport { statistic: Statistic::KolmogorovSmirnov, value: d, sample_count: v.len(), reference: reference.into() })
}

/// Two-sample KS statistic.
pub fn ks_distance_samples(a: &[f64], b: &[f64], reference: &str) -> Result<DistanceReport> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(DistanceReport { statistic: Statistic::KolmogorovSmirnov, value: d, sample_count: a.len(), reference: reference.into() })
}

/// Difference of the first two sample moments.
pub fn moment_gap(samples: &[f64], mean: f64, second_moment: f64, reference: &str) -> DistanceReport {
    let n = samples.len().max(1) as f64;
    let m1 = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    DistanceReport {
        statistic: Statistic::MomentGap,
        value: (m1 - mean).abs().max((m2 - second_moment).abs()),
        sample_count: samples.len(),
        reference: reference.into(),
    }
}

pub fn normal_cdf(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    let n = Normal::new(mean, sd).expect("valid normal");
    move |x| n.cdf(x)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// CDF of an unnormalized one-dimensional density, by adaptive quadrature on panels
/// over a window outside which the mass is negligible.
pub struct QuadratureCdf {
    density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: f64,
    width: f64,
    cumulative: Vec<f64>,
    total: f64,
}

impl QuadratureCdf {
    pub fn new(density: impl Fn(f64) -> f64 + Send + Sync + 'static, lo: f64, hi: f64, panels: usize) -> Self {
        let width = (hi - lo) / panels as f64;
        let mut cumulative = vec![0.0; panels + 1];
        for k in 0..panels {
            let a = lo + k as f64 * width;
            cumulative[k + 1] = cumulative[k] + adaptive_simpson(&density, a, a + width, 1e-14);
        }
        let total = cumulative[panels];
        Self { density: Box::new(density), lo, width, cumulative, total }
    }

    /// Maxwell–Jüttner momentum density `exp(−(√(1+εp²) − 1)/ε)` in one dimension.
    pub fn maxwell_juttner(epsilon: f64) -> Self {
        // Tails decay at least like exp(−p²/(2(1+√ε p))); 60 standard units is ample.
        let half = 60.0 * (1.0 + 60.0 * epsilon.sqrt()).sqrt();
        Self::new(move |p| (-((1.0 + epsilon * p * p).sqrt() - 1.0) / epsilon).exp(), -half, half, 4096)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        let k = ((x - self.lo) / self.width).floor() as usize;
        if k >= self.cumulative.len() - 1 {
            return 1.0;
        }
        let a = self.lo + k as f64 * self.width;
        let partial = if x > a { adaptive_simpson(&*self.density, a, x, 1e-14) } else { 0.0 };
        ((self.cumulative[k] + partial) / self.total).clamp(0.0, 1.0)
    }
}

/// Effective sample size by Geyer's initial positive sequence estimator.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / (n as f64 * c0);
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = acf(2 * m) + acf(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    (n as f64 / tau.max(1.0)).min(n as f64)
}

/// `Γ₃ = ½ε(U+G)² + (U+G)√(1+ε|p|²) + ½|p|²` for one particle, G about the origin.
pub fn gamma3(state: &PhaseState<f64>, potentials: &PotentialSpec<f64>, epsilon: f64) -> Result<f64> {
    if state.particles() != 1 {
        return Err(Error::Shape("gamma3 needs N = 1".into()));
    }
    let w = ForceField::new(potentials, true).energy(state)?;
    let p2 = state.p(0).norm_sq();
    Ok(0.5 * epsilon * w * w + w * (1.0 + epsilon * p2).sqrt() + 0.5 * p2)
}

/// Rate of quadratic variation of the martingale part of Γ₃ along the relativistic
/// dynamics: `2⟨∇_pΓ₃, D ∇_pΓ₃⟩`.
pub fn gamma3_qv_rate(state: &PhaseState<f64>, potentials: &PotentialSpec<f64>, epsilon: f64) -> Result<f64> {
    if state.particles() != 1 {
        return Err(Error::Shape("gamma3 needs N = 1".into()));
    }
    let w = ForceField::new(potentials, true).energy(state)?;
    let p = state.p(0);
    let s = (1.0 + epsilon * p.norm_sq()).sqrt();
    let g = p.scale(epsilon * w / s + 1.0);
    let d = crate::diffusion::DiffusionSpec::Relativistic { epsilon }.d_matrix(&p);
    Ok(2.0 * g.dot(&d.mul_vec(&g)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

/// Counts over `bins` equal bins on `[lo, hi)`; samples outside are dropped.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<HistogramRow>> {
    if !(hi > lo) || bins == 0 {
        return Err(Error::InvalidArgument("histogram needs hi > lo and bins >= 1".into()));
    }
    let w = (hi - lo) / bins as f64;
    let mut rows: Vec<HistogramRow> = (0..bins)
        .map(|k| HistogramRow { bin_left: lo + k as f64 * w, bin_right: lo + (k + 1) as f64 * w, count: 0 })
        .collect();
    for &x in samples {
        if x >= lo && x < hi {
            let k = (((x - lo) / w) as usize).min(bins - 1);
            rows[k].count += 1;
        }
    }
    Ok(rows)
}

pub fn write_histogram<W: Write>(out: &mut W, rows: &[HistogramRow]) -> Result<()> {
    writeln!(out, "bin_left,bin_right,count")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.bin_left, r.bin_right, r.count)?;
    }
    Ok(())
}
