//! Increment samplers for the catalog models.
//!
//! Stable kinds are sampled exactly. Tempered and discrete kinds use compound
//! Poisson jumps above a cutoff, the matching compensator drift and an optional
//! Gaussian surrogate for the remaining small jumps.

use crate::error::{ensure_finite, Error, Result};
use crate::levy_models::{GaussianPolicy, LevyModel, OneSidedComponent, PointMass};
use crate::numerics;
use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

/// Small-jump variance per unit time above which the `Auto` policy turns the
/// Gaussian surrogate on.
pub const GAUSSIAN_AUTO_THRESHOLD: f64 = 1e-8;

/// A reproducible random stream: ChaCha8 keyed by `seed` on stream `stream_id`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        RngStream { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Splits `total` replicas into batches of `batch` and maps each batch on its own
/// stream (`stream_id` = batch index). Results come back in batch order, so the
/// output does not depend on how many worker threads run.
pub fn map_batches<T, F>(seed: u64, total: usize, batch: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> T + Sync,
{
    let batch = batch.max(1);
    let n_batches = total.div_ceil(batch);
    (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b as u64);
            let len = batch.min(total - b * batch);
            f(len, &mut rng)
        })
        .collect()
}

fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One standard symmetric α-stable draw, characteristic function `exp(−|ξ|^α)`.
fn std_sym_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (uniform_open(rng) - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One positive α-stable draw with Laplace transform `exp(−λ^α)`, `α ∈ (0,1)`.
fn std_one_sided_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * uniform_open(rng);
    let w: f64 = Exp1.sample(rng);
    (alpha * v).sin() / v.sin().powf(1.0 / alpha) * (((1.0 - alpha) * v).sin() / w).powf((1.0 - alpha) / alpha)
}

fn check_sym_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::input("alpha", format!("{alpha} outside (0,2)")))
    }
}

/// i.i.d. symmetric α-stable draws whose characteristic function is `exp(−scale·|ξ|^α)`.
pub fn sample_sym_stable(alpha: f64, scale: f64, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_sym_alpha(alpha)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::input("scale", "must be positive"));
    }
    let s = scale.powf(1.0 / alpha);
    Ok((0..n).map(|_| s * std_sym_stable(alpha, rng)).collect())
}

/// i.i.d. positive α-stable draws with Laplace transform `exp(−λ^α)`.
pub fn sample_one_sided_stable(alpha: f64, n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input("alpha", format!("{alpha} outside (0,1)")));
    }
    Ok((0..n).map(|_| std_one_sided_stable(alpha, rng)).collect())
}

/// Small-jump data of a measure at a given cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct Compensation {
    /// `∫_{cutoff<|z|≤1} z ν(dz)` per component.
    pub drift: Vec<f64>,
    /// `∫_{|z|≤cutoff} |z|² ν(dz)` per component.
    pub variance: Vec<f64>,
}

fn side_big_mean(c: f64, a: f64, eps: f64) -> f64 {
    // ∫_eps^1 r·c r^{−1−a} dr
    if (a - 1.0).abs() < 1e-14 {
        -c * eps.ln()
    } else {
        c * (1.0 - eps.powf(1.0 - a)) / (1.0 - a)
    }
}

fn side_small_variance(c: f64, a: f64, eps: f64) -> f64 {
    c * eps.powf(2.0 - a) / (2.0 - a)
}

/// Compensator drift and small-jump variance of a tempered or discrete model.
///
/// Atoms of a tempered model are treated as large jumps; those inside `[−1,1]`
/// contribute `mass·location` to the drift.
pub fn small_jump_compensation(model: &LevyModel, cutoff: f64) -> Result<Compensation> {
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(Error::input("cutoff", "must lie in (0,1]"));
    }
    model.validate()?;
    match model {
        LevyModel::TemperedOneSided { components, extra, .. } => {
            Ok(tempered_compensation(components, extra, cutoff))
        }
        LevyModel::DiscreteMeasure { alphas, .. } => {
            // atoms at 1/n; 1/n > cutoff ⇔ n < 1/cutoff
            let n_big = discrete_terms_above(cutoff);
            Ok(discrete_compensation(alphas, n_big))
        }
        _ => Err(Error::Unsupported(
            "small-jump compensation applies to tempered and discrete kinds".into(),
        )),
    }
}

fn discrete_terms_above(cutoff: f64) -> usize {
    let m = (1.0 / cutoff).ceil() as usize;
    if (1.0 / m as f64) > cutoff {
        m
    } else {
        m - 1
    }
}

fn tempered_compensation(components: &[OneSidedComponent], extra: &[PointMass], eps: f64) -> Compensation {
    let mut drift = Vec::with_capacity(components.len());
    let mut variance = Vec::with_capacity(components.len());
    for (k, c) in components.iter().enumerate() {
        let mut m = 0.0;
        let mut v = 0.0;
        for (coef, a, sign) in c.sides() {
            m += sign * side_big_mean(coef, a, eps);
            v += side_small_variance(coef, a, eps);
        }
        for p in extra.iter().filter(|p| p.component == k && p.location.abs() <= 1.0) {
            m += p.mass * p.location;
        }
        drift.push(m);
        variance.push(v);
    }
    Compensation { drift, variance }
}

fn discrete_compensation(alphas: &[f64], n_big: usize) -> Compensation {
    let head = |a: f64, p: f64| -> f64 { (1..=n_big).map(|n| (n as f64).powf(a - p)).sum() };
    let tail = |a: f64, p: f64| -> f64 {
        // Σ_{n>N} n^{a−p}, direct up to a modest bound then Euler–Maclaurin
        let start = n_big.max(1);
        let direct_to = start.max(64);
        let mut s: f64 = ((n_big + 1)..=direct_to).map(|n| (n as f64).powf(a - p)).sum();
        s += numerics::power_tail_sum(direct_to as f64, p - a);
        s
    };
    Compensation {
        drift: alphas.iter().map(|&a| head(a, 2.0)).collect(),
        variance: alphas.iter().map(|&a| tail(a, 3.0)).collect(),
    }
}

/// Approximation data of an [`IncrementPlan`].
#[derive(Clone, Debug, PartialEq)]
pub struct Approximation {
    pub jump_cutoff: f64,
    /// Drift added per unit time, i.e. `−∫_{cutoff<|z|≤1} z ν(dz)`.
    pub compensator_drift: Vec<f64>,
    /// Per-unit-time variance of the Gaussian surrogate, if enabled.
    pub gaussian_variance: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
struct JumpSide {
    component: usize,
    rate: f64,
    kind: JumpLaw,
}

#[derive(Clone, Debug)]
enum JumpLaw {
    /// Power law `r^{−1−α}` on `(eps,1]` with the given sign.
    Power { alpha: f64, eps: f64, sign: f64 },
    Atom { location: f64 },
    /// Atoms at `1/n`, `n = 1..=N`, with masses `n^{α−1}`; `cumulative` for inversion.
    Discrete { cumulative: Vec<f64>, masses: Vec<f64> },
}

#[derive(Clone, Debug)]
enum Exact {
    Component(Vec<f64>),
    /// (block coordinates, α) sampled by Gaussian subordination.
    Blocks(Vec<(Vec<usize>, f64)>),
}

/// Precomputed sampler for one model.
#[derive(Clone, Debug)]
pub struct IncrementPlan {
    pub model: LevyModel,
    pub exact: Vec<bool>,
    pub approximation: Option<Approximation>,
    exact_law: Option<Exact>,
    jumps: Vec<JumpSide>,
}

impl IncrementPlan {
    pub fn new(model: &LevyModel) -> Result<Self> {
        model.validate()?;
        let d = model.dim();
        let mut plan = IncrementPlan {
            model: model.clone(),
            exact: vec![true; d],
            approximation: None,
            exact_law: None,
            jumps: Vec::new(),
        };
        match model {
            LevyModel::ComponentStable { alphas } => plan.exact_law = Some(Exact::Component(alphas.clone())),
            LevyModel::IsotropicStable { dim, alpha } => {
                plan.exact_law = Some(if *dim == 1 {
                    Exact::Component(vec![*alpha])
                } else {
                    Exact::Blocks(vec![((0..*dim).collect(), *alpha)])
                })
            }
            LevyModel::BlockStable { blocks, alphas } => {
                plan.exact_law = Some(Exact::Blocks(blocks.iter().cloned().zip(alphas.iter().copied()).collect()))
            }
            LevyModel::TemperedOneSided {
                components,
                extra,
                truncation,
            } => {
                let eps = truncation.cutoff;
                let comp = tempered_compensation(components, extra, eps);
                for (k, c) in components.iter().enumerate() {
                    for (coef, a, sign) in c.sides() {
                        let rate = coef * (eps.powf(-a) - 1.0) / a;
                        if rate > 0.0 {
                            plan.jumps.push(JumpSide {
                                component: k,
                                rate,
                                kind: JumpLaw::Power { alpha: a, eps, sign },
                            });
                        }
                    }
                }
                for p in extra.iter().filter(|p| p.mass > 0.0) {
                    plan.jumps.push(JumpSide {
                        component: p.component,
                        rate: p.mass,
                        kind: JumpLaw::Atom { location: p.location },
                    });
                }
                plan.set_approximation(eps, comp, truncation.gaussian);
            }
            LevyModel::DiscreteMeasure { alphas, terms } => {
                let n = *terms;
                let comp = discrete_compensation(alphas, n);
                for (k, &a) in alphas.iter().enumerate() {
                    let masses: Vec<f64> = (1..=n).map(|j| (j as f64).powf(a - 1.0)).collect();
                    let mut acc = 0.0;
                    let cumulative: Vec<f64> = masses
                        .iter()
                        .map(|m| {
                            acc += m;
                            acc
                        })
                        .collect();
                    plan.jumps.push(JumpSide {
                        component: k,
                        rate: acc,
                        kind: JumpLaw::Discrete { cumulative, masses },
                    });
                }
                plan.set_approximation(1.0 / n as f64, comp, GaussianPolicy::Auto);
            }
            LevyModel::SubordinateBm { .. } => {
                return Err(Error::Unsupported(
                    "subordinate Brownian motion is analysis-only and cannot be sampled".into(),
                ))
            }
        }
        Ok(plan)
    }

    fn set_approximation(&mut self, cutoff: f64, comp: Compensation, policy: GaussianPolicy) {
        self.exact = vec![false; self.model.dim()];
        let on = match policy {
            GaussianPolicy::On => true,
            GaussianPolicy::Off => false,
            GaussianPolicy::Auto => comp.variance.iter().any(|v| *v > GAUSSIAN_AUTO_THRESHOLD),
        };
        self.approximation = Some(Approximation {
            jump_cutoff: cutoff,
            compensator_drift: comp.drift.iter().map(|m| -m).collect(),
            gaussian_variance: on.then_some(comp.variance),
        });
    }

    pub fn dim(&self) -> usize {
        self.exact.len()
    }

    /// Adds one increment over a window of length `dt` to `out`.
    pub fn add_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut [f64]) {
        match &self.exact_law {
            Some(Exact::Component(alphas)) => {
                for (o, &a) in out.iter_mut().zip(alphas) {
                    *o += dt.powf(1.0 / a) * std_sym_stable(a, rng);
                }
            }
            Some(Exact::Blocks(blocks)) => {
                for (idx, a) in blocks {
                    let s = if *a == 2.0 { 1.0 } else { std_one_sided_stable(a / 2.0, rng) };
                    let scale = dt.powf(1.0 / a) * (2.0 * s).sqrt();
                    for &i in idx {
                        let g: f64 = StandardNormal.sample(rng);
                        out[i] += scale * g;
                    }
                }
            }
            None => {}
        }
        if let Some(ap) = &self.approximation {
            for (k, o) in out.iter_mut().enumerate() {
                *o += ap.compensator_drift[k] * dt;
            }
            if let Some(var) = &ap.gaussian_variance {
                for (k, o) in out.iter_mut().enumerate() {
                    if var[k] > 0.0 {
                        let g: f64 = StandardNormal.sample(rng);
                        *o += (var[k] * dt).sqrt() * g;
                    }
                }
            }
            for side in &self.jumps {
                add_jumps(side, dt, false, rng, &mut out[side.component]);
            }
        }
    }

    /// Adds `Σ |ΔZ_k(u)|` over the simulated jumps in a window of length `dt`; zero for
    /// exact stable laws, which carry no recorded jumps.
    pub fn add_jump_variation<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut [f64]) {
        for side in &self.jumps {
            add_jumps(side, dt, true, rng, &mut out[side.component]);
        }
    }

    pub fn has_recorded_jumps(&self) -> bool {
        !self.jumps.is_empty()
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.add_increment(dt, rng, &mut out);
        out
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

fn add_jumps<R: Rng + ?Sized>(side: &JumpSide, dt: f64, abs: bool, rng: &mut R, out: &mut f64) {
    let mean = side.rate * dt;
    match &side.kind {
        JumpLaw::Power { alpha, eps, sign } => {
            let top = eps.powf(-alpha) - 1.0;
            let sign = if abs { &1.0 } else { sign };
            for _ in 0..poisson(mean, rng) {
                let u: f64 = rng.random();
                *out += sign * (1.0 + u * top).powf(-1.0 / alpha);
            }
        }
        JumpLaw::Atom { location } => {
            let loc = if abs { location.abs() } else { *location };
            *out += poisson(mean, rng) as f64 * loc
        }
        JumpLaw::Discrete { cumulative, masses } => {
            let n = masses.len();
            if mean > n as f64 {
                // dense regime: one Poisson count per atom
                for (j, m) in masses.iter().enumerate() {
                    *out += poisson(m * dt, rng) as f64 / (j + 1) as f64;
                }
            } else {
                let total = side.rate;
                for _ in 0..poisson(mean, rng) {
                    let u: f64 = rng.random::<f64>() * total;
                    let j = cumulative.partition_point(|c| *c <= u).min(n - 1);
                    *out += 1.0 / (j + 1) as f64;
                }
            }
        }
    }
}

/// One increment of `Z` over a window of length `dt`.
pub fn sample_increment(model: &LevyModel, dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::input("dt", "must be positive"));
    }
    Ok(IncrementPlan::new(model)?.sample_increment(dt, rng))
}

/// Independent increments over consecutive intervals of `time_grid`, one row per interval.
pub fn sample_path_increments(plan: &IncrementPlan, time_grid: &[f64], rng: &mut RngStream) -> Result<DMatrix<f64>> {
    ensure_finite("time_grid", time_grid)?;
    if time_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("time_grid", "must be strictly increasing"));
    }
    let steps = time_grid.len().saturating_sub(1);
    let d = plan.dim();
    let mut m = DMatrix::zeros(steps, d);
    let mut row = vec![0.0; d];
    for j in 0..steps {
        row.iter_mut().for_each(|v| *v = 0.0);
        plan.add_increment(time_grid[j + 1] - time_grid[j], rng, &mut row);
        for k in 0..d {
            m[(j, k)] = row[k];
        }
    }
    Ok(m)
}

const MAGIC: &[u8; 4] = b"ALVS";

/// Writes `n × d` samples (row-major) with a 16-byte header, atomically.
pub fn write_samples(path: &Path, d: usize, data: &[f64]) -> Result<()> {
    if d == 0 || data.len() % d != 0 {
        return Err(Error::input("data", "length must be a multiple of d"));
    }
    let n = (data.len() / d) as u64;
    let mut buf = Vec::with_capacity(16 + 8 * data.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(d as u32).to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &buf)
}

/// Writes a file through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::input("path", "no file name"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a sample file, returning `(d, row-major data)`.
pub fn read_samples(path: &Path) -> Result<(usize, Vec<f64>)> {
    let mut f = std::fs::File::open(path)?;
    let mut head = [0u8; 16];
    f.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(Error::Io("not a sample file (bad magic)".into()));
    }
    let d = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    f.read_to_end(&mut body)?;
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Io("header overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Io(format!("expected {expected} data bytes, found {}", body.len())));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((d, data))
}

/// Two-sided Kolmogorov–Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut best) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        best = best.max((i as f64 / n - j as f64 / m).abs());
    }
    best
}

/// Asymptotic critical value of the one-sample KS statistic (`level` ∈ {0.01, 0.05}).
pub fn ks_critical(level: f64, n: usize) -> f64 {
    let c = if level <= 0.01 { 1.628 } else { 1.358 };
    c / (n as f64).sqrt()
}

/// Critical value of the two-sample KS statistic.
pub fn ks_critical_two_sample(level: f64, n: usize, m: usize) -> f64 {
    let c = if level <= 0.01 { 1.628 } else { 1.358 };
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
