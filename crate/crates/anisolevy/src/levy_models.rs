//! Catalog of driving Lévy processes.
//!
//! Every stable-type kind is normalized so that a unit-time increment has
//! characteristic function `exp(−|ξ|^α)` per component (or per block). The symbol
//! convention is `Ψ(ξ) = ∫ (1 + 1_{|z|≤1} iξ·z − e^{iξ·z}) ν(dz)`.

use crate::error::{ensure_finite, Error, Result};
use crate::numerics;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One axis of a [`LevyModel::TemperedOneSided`] model: power-law jumps on `(0,1]`
/// with intensity `c_plus·r^{−1−α⁺}` and on `[−1,0)` with `c_minus·|r|^{−1−α⁻}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneSidedComponent {
    pub c_plus: f64,
    pub alpha_plus: f64,
    #[serde(default)]
    pub c_minus: f64,
    #[serde(default)]
    pub alpha_minus: Option<f64>,
}

impl OneSidedComponent {
    pub fn alpha_minus(&self) -> f64 {
        self.alpha_minus.unwrap_or(self.alpha_plus)
    }

    /// Active `(coefficient, index, sign)` sides.
    pub(crate) fn sides(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        [
            (self.c_plus, self.alpha_plus, 1.0),
            (self.c_minus, self.alpha_minus(), -1.0),
        ]
        .into_iter()
        .filter(|s| s.0 > 0.0)
    }
}

/// An atom of the optional finite part of a tempered model, placed on one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMass {
    pub component: usize,
    pub location: f64,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaussianPolicy {
    /// Gaussian small-jump surrogate when its variance exceeds `1e-8` per unit time.
    #[default]
    Auto,
    On,
    Off,
}

/// How the approximate kinds are simulated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub gaussian: GaussianPolicy,
}

fn default_cutoff() -> f64 {
    1e-4
}

fn default_terms() -> usize {
    10_000
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            cutoff: default_cutoff(),
            gaussian: GaussianPolicy::Auto,
        }
    }
}

/// A driving-noise specification. Serialized with a `kind` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevyModel {
    /// Rotationally symmetric α-stable process on `R^dim`.
    IsotropicStable { dim: usize, alpha: f64 },
    /// Independent one-dimensional symmetric stable components.
    ComponentStable { alphas: Vec<f64> },
    /// Independent rotationally symmetric blocks; `blocks` holds zero-based indices.
    BlockStable { blocks: Vec<Vec<usize>>, alphas: Vec<f64> },
    /// Power-law jumps truncated to `[−1,1]` on each axis plus optional atoms.
    TemperedOneSided {
        components: Vec<OneSidedComponent>,
        #[serde(default)]
        extra: Vec<PointMass>,
        #[serde(default)]
        truncation: Truncation,
    },
    /// `ν_k = Σ_n n^{α_k−1} δ_{1/n}` on each axis; `terms` jumps are simulated exactly.
    DiscreteMeasure {
        alphas: Vec<f64>,
        #[serde(default = "default_terms")]
        terms: usize,
    },
    /// Brownian motion time-changed by subordinators with Laplace exponent
    /// `λ^{α/2} log(1+λ)^{β/2}`. Analysis only.
    SubordinateBm { alphas: Vec<f64>, betas: Vec<f64> },
}

fn check_index(field: &str, a: f64) -> Result<()> {
    if a > 0.0 && a < 2.0 {
        Ok(())
    } else {
        Err(Error::input(field, format!("stability index {a} outside (0,2)")))
    }
}

impl LevyModel {
    pub fn dim(&self) -> usize {
        match self {
            LevyModel::IsotropicStable { dim, .. } => *dim,
            LevyModel::ComponentStable { alphas } => alphas.len(),
            LevyModel::BlockStable { blocks, .. } => blocks.iter().map(Vec::len).sum(),
            LevyModel::TemperedOneSided { components, .. } => components.len(),
            LevyModel::DiscreteMeasure { alphas, .. } => alphas.len(),
            LevyModel::SubordinateBm { alphas, .. } => alphas.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::input("model", "dimension must be positive"));
        }
        match self {
            LevyModel::IsotropicStable { alpha, .. } => check_index("alpha", *alpha),
            LevyModel::ComponentStable { alphas } | LevyModel::DiscreteMeasure { alphas, .. } => {
                alphas.iter().try_for_each(|a| check_index("alphas", *a))?;
                if let LevyModel::DiscreteMeasure { terms, .. } = self {
                    if *terms == 0 {
                        return Err(Error::input("terms", "must be positive"));
                    }
                }
                Ok(())
            }
            LevyModel::BlockStable { blocks, alphas } => {
                if blocks.len() != alphas.len() {
                    return Err(Error::input("alphas", "one index per block required"));
                }
                alphas.iter().try_for_each(|a| check_index("alphas", *a))?;
                let d = self.dim();
                let mut seen = vec![false; d];
                for b in blocks {
                    if b.is_empty() {
                        return Err(Error::input("blocks", "empty block"));
                    }
                    for &i in b {
                        if i >= d || seen[i] {
                            return Err(Error::input("blocks", "blocks must partition 0..d"));
                        }
                        seen[i] = true;
                    }
                }
                Ok(())
            }
            LevyModel::TemperedOneSided {
                components,
                extra,
                truncation,
            } => {
                for c in components {
                    ensure_finite("components", &[c.c_plus, c.c_minus])?;
                    if c.c_plus < 0.0 || c.c_minus < 0.0 {
                        return Err(Error::input("components", "negative intensity"));
                    }
                    check_index("alpha_plus", c.alpha_plus)?;
                    check_index("alpha_minus", c.alpha_minus())?;
                }
                for p in extra {
                    if p.component >= components.len() || !(p.mass >= 0.0) || !p.location.is_finite() {
                        return Err(Error::input("extra", "invalid point mass"));
                    }
                }
                if !(truncation.cutoff > 0.0 && truncation.cutoff <= 1.0) {
                    return Err(Error::input("truncation.cutoff", "must lie in (0,1]"));
                }
                Ok(())
            }
            LevyModel::SubordinateBm { alphas, betas } => {
                if alphas.len() != betas.len() {
                    return Err(Error::input("betas", "one per component"));
                }
                for (a, b) in alphas.iter().zip(betas) {
                    check_index("alphas", *a)?;
                    if !(*b > -a && *b < 2.0 - a) {
                        return Err(Error::input("betas", "β_k must lie in (−α_k, 2−α_k)"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Ensures every component carries jumps, as the (A1)-dependent experiments need.
    pub fn validate_for_density(&self) -> Result<()> {
        self.validate()?;
        if let LevyModel::TemperedOneSided { components, .. } = self {
            if components.iter().any(|c| c.c_plus + c.c_minus <= 0.0) {
                return Err(Error::input("components", "c⁺ + c⁻ must be positive on every axis"));
            }
        }
        Ok(())
    }

    /// Per-component stability index used for anisotropy and (A1) scaling.
    /// For a two-sided tempered axis the more singular side wins.
    pub fn stability_indices(&self) -> Vec<f64> {
        match self {
            LevyModel::IsotropicStable { dim, alpha } => vec![*alpha; *dim],
            LevyModel::ComponentStable { alphas }
            | LevyModel::DiscreteMeasure { alphas, .. }
            | LevyModel::SubordinateBm { alphas, .. } => alphas.clone(),
            LevyModel::BlockStable { blocks, alphas } => {
                let mut out = vec![0.0; self.dim()];
                for (b, a) in blocks.iter().zip(alphas) {
                    for &i in b {
                        out[i] = *a;
                    }
                }
                out
            }
            LevyModel::TemperedOneSided { components, .. } => components
                .iter()
                .map(|c| c.sides().map(|s| s.1).fold(0.0, f64::max))
                .collect(),
        }
    }

    /// Groups of coordinates whose contributions to `Re Ψ` are radial functions.
    pub fn radial_blocks(&self) -> Vec<Vec<usize>> {
        match self {
            LevyModel::IsotropicStable { dim, .. } => vec![(0..*dim).collect()],
            LevyModel::BlockStable { blocks, .. } => blocks.clone(),
            _ => (0..self.dim()).map(|i| vec![i]).collect(),
        }
    }

    /// Whether ν is invariant under `z ↦ −z`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            LevyModel::TemperedOneSided { components, extra, .. } => {
                extra.is_empty()
                    && components
                        .iter()
                        .all(|c| c.c_plus == c.c_minus && c.alpha_plus == c.alpha_minus())
            }
            LevyModel::DiscreteMeasure { .. } => false,
            _ => true,
        }
    }

    /// `∫_{|z|≤1} z_k ν(dz)` per component, `None` where the first moment diverges.
    pub fn small_jump_mean(&self) -> Vec<Option<f64>> {
        match self {
            LevyModel::TemperedOneSided { components, extra, .. } => components
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let mut m = 0.0;
                    for (coef, a, sign) in c.sides() {
                        if a >= 1.0 {
                            return None;
                        }
                        m += sign * coef / (1.0 - a);
                    }
                    for p in extra.iter().filter(|p| p.component == k && p.location.abs() <= 1.0) {
                        m += p.mass * p.location;
                    }
                    Some(m)
                })
                .collect(),
            LevyModel::DiscreteMeasure { alphas, .. } => alphas
                .iter()
                .map(|&a| (a < 1.0).then(|| numerics::zeta(2.0 - a)))
                .collect(),
            _ => self
                .stability_indices()
                .iter()
                .map(|&a| (a < 1.0).then_some(0.0))
                .collect(),
        }
    }
}

/// Evaluates the symbol `Ψ_ν(ξ)`.
pub fn symbol_eval(model: &LevyModel, xi: &[f64]) -> Result<Complex64> {
    ensure_finite("xi", xi)?;
    if xi.len() != model.dim() {
        return Err(Error::input("xi", "length must equal the model dimension"));
    }
    match model {
        LevyModel::IsotropicStable { alpha, .. } => {
            let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(Complex64::new(r.powf(*alpha), 0.0))
        }
        LevyModel::ComponentStable { alphas } => Ok(Complex64::new(
            xi.iter().zip(alphas).map(|(x, a)| x.abs().powf(*a)).sum(),
            0.0,
        )),
        LevyModel::BlockStable { blocks, alphas } => Ok(Complex64::new(
            blocks
                .iter()
                .zip(alphas)
                .map(|(b, a)| b.iter().map(|&i| xi[i] * xi[i]).sum::<f64>().sqrt().powf(*a))
                .sum(),
            0.0,
        )),
        LevyModel::TemperedOneSided { components, extra, .. } => {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, c) in components.iter().enumerate() {
                let y = xi[k];
                if y == 0.0 {
                    continue;
                }
                let ay = y.abs();
                for (coef, a, sign) in c.sides() {
                    let scale = coef * ay.powf(a);
                    let re = scale * numerics::one_minus_cos_partial(a, ay)?;
                    let im = sign * y.signum() * scale * numerics::u_minus_sin_partial(a, ay)?;
                    acc += Complex64::new(re, im);
                }
            }
            for p in extra {
                let y = xi[p.component] * p.location;
                let comp = if p.location.abs() <= 1.0 { y } else { 0.0 };
                acc += p.mass * Complex64::new(1.0 - y.cos(), comp - y.sin());
            }
            Ok(acc)
        }
        LevyModel::DiscreteMeasure { alphas, .. } => {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &a) in alphas.iter().enumerate() {
                acc += discrete_symbol(a, xi[k])?;
            }
            Ok(acc)
        }
        LevyModel::SubordinateBm { alphas, betas } => Ok(Complex64::new(
            xi.iter()
                .zip(alphas.iter().zip(betas))
                .map(|(x, (a, b))| subordinator_exponent(*a, *b, x * x / 2.0))
                .sum(),
            0.0,
        )),
    }
}

/// Laplace exponent `λ^{α/2} log(1+λ)^{β/2}`.
pub fn subordinator_exponent(alpha: f64, beta: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda.powf(alpha / 2.0) * lambda.ln_1p().powf(beta / 2.0)
    }
}

const DISCRETE_MAX_TERMS: usize = 50_000_000;

fn discrete_symbol(alpha: f64, y: f64) -> Result<Complex64> {
    if y == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let ay = y.abs();
    let m = (20.0 * ay).ceil().max(1000.0);
    let (mut re, mut im) = (0.0, 0.0);
    let terms = m as usize;
    if terms > DISCRETE_MAX_TERMS {
        return Err(Error::Numeric {
            reason: format!("series for |ξ|={ay} needs more than {DISCRETE_MAX_TERMS} terms"),
            partial: f64::NAN,
        });
    }
    for n in 1..=terms {
        let nf = n as f64;
        let u = y / nf;
        let w = nf.powf(alpha - 1.0);
        re += w * (1.0 - u.cos());
        im += w * (u - u.sin());
    }
    // Taylor expansion of the remaining terms; |y|/n ≤ 1/20 there.
    let t = |p: f64| numerics::power_tail_sum(m, p);
    re += y.powi(2) / 2.0 * t(3.0 - alpha) - y.powi(4) / 24.0 * t(5.0 - alpha)
        + y.powi(6) / 720.0 * t(7.0 - alpha);
    im += y.powi(3) / 6.0 * t(4.0 - alpha) - y.powi(5) / 120.0 * t(6.0 - alpha)
        + y.powi(7) / 5040.0 * t(8.0 - alpha);
    Ok(Complex64::new(re, im))
}

/// Result of a Lévy-measure moment computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub small_jump_exponent: f64,
    pub big_jump_exponent: f64,
    pub small_part: f64,
    pub big_part: f64,
    pub finite: bool,
    pub value: f64,
}

impl MomentReport {
    fn new(gamma: f64, delta: f64, small: f64, big: f64) -> Self {
        let value = small + big;
        MomentReport {
            small_jump_exponent: gamma,
            big_jump_exponent: delta,
            small_part: small,
            big_part: big,
            finite: value.is_finite(),
            value,
        }
    }
}

fn check_exponents(gamma: f64, delta: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::input("gamma", "must lie in (0,2]"));
    }
    if !(delta > 0.0 && delta <= gamma) {
        return Err(Error::input("delta", "must lie in (0,γ]"));
    }
    Ok(())
}

/// `c/(γ−α)` if convergent, `+∞` otherwise.
fn small_power(coef: f64, gamma: f64, alpha: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else if gamma > alpha {
        coef / (gamma - alpha)
    } else {
        f64::INFINITY
    }
}

fn big_power(coef: f64, delta: f64, alpha: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else if delta < alpha {
        coef / (alpha - delta)
    } else {
        f64::INFINITY
    }
}

/// Per-block `(dimension, α)` for the stable kinds.
fn stable_blocks(model: &LevyModel) -> Option<Vec<(Vec<usize>, f64)>> {
    match model {
        LevyModel::IsotropicStable { dim, alpha } => Some(vec![((0..*dim).collect(), *alpha)]),
        LevyModel::ComponentStable { alphas } => {
            Some(alphas.iter().enumerate().map(|(i, a)| (vec![i], *a)).collect())
        }
        LevyModel::BlockStable { blocks, alphas } => {
            Some(blocks.iter().cloned().zip(alphas.iter().copied()).collect())
        }
        _ => None,
    }
}

/// `∫ (1_{|z|≤1}|z|^γ + 1_{|z|>1}|z|^δ) ν(dz)`.
pub fn moment_integrals(model: &LevyModel, gamma: f64, delta: f64) -> Result<MomentReport> {
    model.validate()?;
    check_exponents(gamma, delta)?;
    if let Some(blocks) = stable_blocks(model) {
        let (mut small, mut big) = (0.0, 0.0);
        for (b, a) in blocks {
            let m = b.len();
            let c = numerics::stable_levy_constant(m, a) * numerics::sphere_area(m);
            small += small_power(c, gamma, a);
            big += big_power(c, delta, a);
        }
        return Ok(MomentReport::new(gamma, delta, small, big));
    }
    let per: Vec<MomentReport> = (0..model.dim())
        .map(|k| component_moment(model, k, gamma, delta))
        .collect::<Result<_>>()?;
    let small = per.iter().map(|r| r.small_part).sum();
    let big = per.iter().map(|r| r.big_part).sum();
    Ok(MomentReport::new(gamma, delta, small, big))
}

/// Componentwise `∫ (1_{|z|≤1}|z_k|^{γ_k} + 1_{|z|>1}|z_k|^{δ_k}) ν(dz)`.
pub fn moment_integrals_diagonal(
    model: &LevyModel,
    gammas: &[f64],
    deltas: &[f64],
) -> Result<Vec<MomentReport>> {
    model.validate()?;
    let d = model.dim();
    if gammas.len() != d || deltas.len() != d {
        return Err(Error::input("gammas", "one exponent pair per component"));
    }
    for (g, dl) in gammas.iter().zip(deltas) {
        check_exponents(*g, *dl)?;
    }
    if let Some(blocks) = stable_blocks(model) {
        let mut out = Vec::with_capacity(d);
        for k in 0..d {
            let (b, a) = blocks.iter().find(|(b, _)| b.contains(&k)).expect("partition");
            let m = b.len();
            let c = numerics::stable_levy_constant(m, *a);
            let small = small_power(c * numerics::sphere_coordinate_moment(m, gammas[k]), gammas[k], *a);
            let big = big_power(c * numerics::sphere_coordinate_moment(m, deltas[k]), deltas[k], *a);
            out.push(MomentReport::new(gammas[k], deltas[k], small, big));
        }
        return Ok(out);
    }
    (0..d)
        .map(|k| component_moment(model, k, gammas[k], deltas[k]))
        .collect()
}

/// Moment of the part of ν living on axis `k` (tempered and discrete kinds).
fn component_moment(model: &LevyModel, k: usize, gamma: f64, delta: f64) -> Result<MomentReport> {
    match model {
        LevyModel::TemperedOneSided { components, extra, .. } => {
            let c = &components[k];
            let mut small: f64 = c.sides().map(|(coef, a, _)| small_power(coef, gamma, a)).sum();
            let mut big = 0.0;
            for p in extra.iter().filter(|p| p.component == k) {
                let r = p.location.abs();
                if r == 0.0 {
                    continue;
                }
                if r <= 1.0 {
                    small += p.mass * r.powf(gamma);
                } else {
                    big += p.mass * r.powf(delta);
                }
            }
            Ok(MomentReport::new(gamma, delta, small, big))
        }
        LevyModel::DiscreteMeasure { alphas, .. } => {
            let a = alphas[k];
            // Σ n^{α−1} n^{−γ}
            let small = if gamma > a {
                numerics::zeta(1.0 + gamma - a)
            } else {
                f64::INFINITY
            };
            Ok(MomentReport::new(gamma, delta, small, 0.0))
        }
        LevyModel::SubordinateBm { .. } => Err(Error::Unsupported(
            "moment integrals of the subordinate Brownian motion have no closed form".into(),
        )),
        _ => unreachable!("stable kinds handled by block formulas"),
    }
}

/// Anisotropy weights derived from stability indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anisotropy {
    pub mean_alpha: f64,
    pub weights: Vec<f64>,
}

impl Anisotropy {
    /// Wraps arbitrary weights, checking positivity and `Σa_i = d`.
    pub fn from_weights(mean_alpha: f64, weights: Vec<f64>) -> Result<Self> {
        let d = weights.len() as f64;
        if weights.is_empty() || weights.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::input("weights", "must be positive and finite"));
        }
        if (weights.iter().sum::<f64>() - d).abs() > 1e-12 * d.max(1.0) {
            return Err(Error::input("weights", "must sum to the dimension"));
        }
        Ok(Anisotropy { mean_alpha, weights })
    }

    /// Isotropic weights `(1,…,1)`.
    pub fn isotropic(d: usize) -> Self {
        Anisotropy {
            mean_alpha: 1.0,
            weights: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// `1/ᾱ = mean(1/α_i)` and `a_i = ᾱ/α_i`.
pub fn compute_anisotropy(alphas: &[f64]) -> Result<Anisotropy> {
    if alphas.is_empty() {
        return Err(Error::input("alphas", "empty"));
    }
    alphas.iter().try_for_each(|a| check_index("alphas", *a))?;
    let d = alphas.len() as f64;
    let mean_alpha = d / alphas.iter().map(|a| 1.0 / a).sum::<f64>();
    let weights = alphas.iter().map(|a| mean_alpha / a).collect();
    Ok(Anisotropy { mean_alpha, weights })
}

/// `δ(η) = sup_{|ξ|≤η} Re Ψ(ξ)`.
pub fn sup_real_symbol(model: &LevyModel, eta: f64) -> Result<f64> {
    if matches!(model, LevyModel::DiscreteMeasure { .. }) {
        // Re Ψ need not be monotone along rays here; scan smaller radii too.
        let mut best: f64 = 0.0;
        for j in 0..=64 {
            best = best.max(sup_on_sphere(model, eta * 2f64.powf(-j as f64 / 8.0))?);
        }
        return Ok(best);
    }
    sup_on_sphere(model, eta)
}

fn sup_on_sphere(model: &LevyModel, eta: f64) -> Result<f64> {
    let blocks = model.radial_blocks();
    let d = model.dim();
    let g = |j: usize, r: f64| -> Result<f64> {
        let mut xi = vec![0.0; d];
        xi[blocks[j][0]] = r;
        Ok(symbol_eval(model, &xi)?.re)
    };
    let total = |w: &[f64]| -> Result<f64> {
        let mut s = 0.0;
        for (j, wj) in w.iter().enumerate() {
            if *wj > 0.0 {
                s += g(j, eta * wj.sqrt())?;
            }
        }
        Ok(s)
    };
    let m = blocks.len();
    if m == 1 {
        return g(0, eta);
    }
    // Start from the best vertex or the centroid, then improve with pairwise transfers.
    let mut w = vec![0.0; m];
    let mut best = f64::NEG_INFINITY;
    let mut cand = vec![1.0 / m as f64; m];
    let centroid = total(&cand)?;
    if centroid > best {
        best = centroid;
        w.clone_from(&cand);
    }
    for j in 0..m {
        cand.iter_mut().for_each(|c| *c = 0.0);
        cand[j] = 1.0;
        let v = total(&cand)?;
        if v > best {
            best = v;
            w.clone_from(&cand);
        }
    }
    for _round in 0..6 {
        let before = best;
        for i in 0..m {
            for j in (i + 1)..m {
                let pool = w[i] + w[j];
                if pool <= 0.0 {
                    continue;
                }
                let split = |s: f64| -> Result<f64> {
                    let mut c = w.clone();
                    c[i] = pool * s;
                    c[j] = pool * (1.0 - s);
                    total(&c)
                };
                // coarse scan then golden refinement
                let n = 128;
                let mut arg = 0usize;
                let mut val = f64::NEG_INFINITY;
                for q in 0..=n {
                    let s = (q as f64 / n as f64).powi(2);
                    let v = split(s)?;
                    if v > val {
                        val = v;
                        arg = q;
                    }
                }
                let lo_q = arg.saturating_sub(1) as f64 / n as f64;
                let hi_q = ((arg + 1).min(n)) as f64 / n as f64;
                let (mut lo, mut hi) = (lo_q * lo_q, hi_q * hi_q);
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..60 {
                    let x1 = hi - phi * (hi - lo);
                    let x2 = lo + phi * (hi - lo);
                    if split(x1)? < split(x2)? {
                        lo = x1;
                    } else {
                        hi = x2;
                    }
                }
                let s = 0.5 * (lo + hi);
                let v = split(s)?.max(val);
                if v > best {
                    let s = if split(s)? >= val { s } else { (arg as f64 / n as f64).powi(2) };
                    w[i] = pool * s;
                    w[j] = pool * (1.0 - s);
                    best = v;
                }
            }
        }
        if best - before <= 1e-15 * best.abs() {
            break;
        }
    }
    Ok(best)
}

/// `Ξ(t) = δ^{−1}(1/t)` with relative tolerance `1e-6`.
pub fn smoothing_scale(model: &LevyModel, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::input("t", "must be positive"));
    }
    model.validate()?;
    let target = 1.0 / t;
    let delta = |eta: f64| sup_real_symbol(model, eta);
    let (mut lo, mut hi) = (1.0, 1.0);
    if delta(1.0)? >= target {
        while delta(lo)? >= target {
            lo /= 2.0;
            if lo < 1e-300 {
                return Err(Error::Numeric {
                    reason: "δ does not vanish at the origin".into(),
                    partial: lo,
                });
            }
        }
        hi = lo * 2.0;
    } else {
        while delta(hi)? < target {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::Unbounded(format!(
                    "δ(η) stays below 1/t = {target} for η ≤ 1e15"
                )));
            }
        }
        lo = hi / 2.0;
    }
    while hi / lo - 1.0 > 1e-9 {
        let mid = (lo * hi).sqrt();
        if delta(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn isotropic_symbol() {
        let m = LevyModel::IsotropicStable { dim: 2, alpha: 1.5 };
        let v = symbol_eval(&m, &[3.0, 4.0]).unwrap();
        assert!(close(v.re, 5f64.powf(1.5), 1e-14));
        assert!((v.re - 11.1803).abs() < 1e-4);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn component_symbol() {
        let m = LevyModel::ComponentStable { alphas: vec![1.0, 1.5] };
        assert!(close(symbol_eval(&m, &[2.0, 1.0]).unwrap().re, 3.0, 1e-15));
    }

    fn catalog() -> Vec<LevyModel> {
        vec![
            LevyModel::IsotropicStable { dim: 2, alpha: 0.8 },
            LevyModel::ComponentStable { alphas: vec![1.0, 1.5] },
            LevyModel::BlockStable {
                blocks: vec![vec![0, 2], vec![1]],
                alphas: vec![1.1, 0.9],
            },
            LevyModel::TemperedOneSided {
                components: vec![
                    OneSidedComponent { c_plus: 1.0, alpha_plus: 0.5, c_minus: 0.0, alpha_minus: None },
                    OneSidedComponent { c_plus: 0.5, alpha_plus: 1.3, c_minus: 2.0, alpha_minus: Some(0.7) },
                ],
                extra: vec![PointMass { component: 1, location: 2.5, mass: 0.3 }],
                truncation: Truncation::default(),
            },
            LevyModel::DiscreteMeasure { alphas: vec![0.6, 1.2], terms: 100 },
            LevyModel::SubordinateBm { alphas: vec![1.2, 0.8], betas: vec![0.3, -0.2] },
        ]
    }

    #[test]
    fn symbol_vanishes_at_origin() {
        for m in catalog() {
            let z = vec![0.0; m.dim()];
            assert_eq!(symbol_eval(&m, &z).unwrap(), Complex64::new(0.0, 0.0), "{m:?}");
        }
    }

    #[test]
    fn rejects_non_finite_frequency() {
        let m = LevyModel::ComponentStable { alphas: vec![1.0] };
        assert!(matches!(symbol_eval(&m, &[f64::NAN]), Err(Error::Input { .. })));
    }

    /// Independent oracle: one-sided truncated symbol by substitution r = v² and
    /// composite Gauss–Legendre panels.
    fn tempered_oracle(c: f64, alpha: f64, y: f64) -> Complex64 {
        let panels = 4000;
        let nodes = [-0.861_136_311_594_053, -0.339_981_043_584_856, 0.339_981_043_584_856, 0.861_136_311_594_053];
        let weights = [0.347_854_845_137_454, 0.652_145_154_862_546, 0.652_145_154_862_546, 0.347_854_845_137_454];
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let b = (p + 1) as f64 / panels as f64;
            for (x, w) in nodes.iter().zip(weights) {
                let v = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let r = v * v;
                let jac = 2.0 * v;
                let z = y * r;
                let dens = c * r.powf(-1.0 - alpha) * jac;
                acc += 0.5 * (b - a) * w * dens * Complex64::new(1.0 - z.cos(), z - z.sin());
            }
        }
        acc
    }

    #[test]
    fn tempered_symbol_matches_quadrature_oracle() {
        let m = LevyModel::TemperedOneSided {
            components: vec![OneSidedComponent { c_plus: 1.0, alpha_plus: 0.5, c_minus: 0.0, alpha_minus: None }],
            extra: vec![],
            truncation: Truncation::default(),
        };
        for &y in &[0.3, 2.0, -7.5, 40.0] {
            let v = symbol_eval(&m, &[y]).unwrap();
            let o = tempered_oracle(1.0, 0.5, y);
            assert!((v - o).norm() < 1e-7 * o.norm().max(1.0), "y={y}: {v} vs {o}");
        }
    }

    #[test]
    fn tempered_symbol_large_frequency_approaches_stable() {
        // Truncating to |z|≤1 removes O(1) mass, so Re Ψ ≈ c·K(α)|ξ|^α − c/α.
        let a = 0.8;
        let m = LevyModel::TemperedOneSided {
            components: vec![OneSidedComponent { c_plus: 1.0, alpha_plus: a, c_minus: 1.0, alpha_minus: None }],
            extra: vec![],
            truncation: Truncation::default(),
        };
        let y = 1e5;
        let v = symbol_eval(&m, &[y]).unwrap();
        let approx = 2.0 * (numerics::one_minus_cos_full(a) * y.powf(a) - 1.0 / a);
        assert!((v.re - approx).abs() < 1e-3, "{} vs {approx}", v.re);
        assert!(v.im.abs() < 1e-9);
    }

    #[test]
    fn discrete_symbol_matches_direct_sum() {
        let a = 0.7;
        let y = 3.0;
        let direct: f64 = (1..4_000_000u64)
            .map(|n| {
                let nf = n as f64;
                nf.powf(a - 1.0) * (1.0 - (y / nf).cos())
            })
            .sum();
        let m = LevyModel::DiscreteMeasure { alphas: vec![a], terms: 10 };
        let v = symbol_eval(&m, &[y]).unwrap();
        // the direct sum misses a tail of order y²/2·N^{α−2}/(2−α)
        assert!((v.re - direct).abs() < 1e-6, "{} vs {direct}", v.re);
    }

    #[test]
    fn discrete_symbol_reports_non_convergence() {
        let m = LevyModel::DiscreteMeasure { alphas: vec![0.5], terms: 10 };
        assert!(matches!(symbol_eval(&m, &[1e8]), Err(Error::Numeric { .. })));
    }

    proptest! {
        #[test]
        fn symbol_conjugate_symmetry(x in -30.0f64..30.0, y in -30.0f64..30.0, z in -30.0f64..30.0) {
            for m in catalog() {
                let xi: Vec<f64> = [x, y, z][..m.dim()].to_vec();
                let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
                let p = symbol_eval(&m, &xi).unwrap();
                let q = symbol_eval(&m, &neg).unwrap();
                prop_assert!((p - q.conj()).norm() <= 1e-9 * p.norm().max(1.0));
                prop_assert!(p.re >= -1e-12);
                if m.is_symmetric() {
                    prop_assert!(p.im.abs() <= 1e-9 * p.norm().max(1.0));
                }
            }
        }

        #[test]
        fn moment_finiteness_matches_power_criterion(alpha in 0.05f64..1.95, g in 0.01f64..2.0, frac in 0.01f64..1.0) {
            let delta = g * frac;
            let m = LevyModel::IsotropicStable { dim: 2, alpha };
            let r = moment_integrals(&m, g, delta).unwrap();
            prop_assert_eq!(r.finite, g > alpha && delta < alpha);
            prop_assert!(r.value >= 0.0);
            prop_assert_eq!(r.finite, r.value < f64::INFINITY);
        }
    }

    #[test]
    fn one_sided_small_moment() {
        let m = LevyModel::TemperedOneSided {
            components: vec![OneSidedComponent { c_plus: 1.0, alpha_plus: 0.5, c_minus: 0.0, alpha_minus: None }],
            extra: vec![],
            truncation: Truncation::default(),
        };
        let r = moment_integrals(&m, 1.5, 0.3).unwrap();
        assert!(close(r.small_part, 1.0, 1e-15));
        assert_eq!(r.big_part, 0.0);
        assert!(r.finite);
    }

    #[test]
    fn isotropic_divergent_small_moment() {
        let m = LevyModel::IsotropicStable { dim: 3, alpha: 1.2 };
        assert!(!moment_integrals(&m, 1.2, 0.5).unwrap().finite);
        assert!(!moment_integrals(&m, 1.0, 0.5).unwrap().finite);
    }

    #[test]
    fn moment_domain_errors() {
        let m = LevyModel::ComponentStable { alphas: vec![1.0] };
        assert!(moment_integrals(&m, 2.5, 1.0).is_err());
        assert!(moment_integrals(&m, 1.0, 1.5).is_err());
        assert!(moment_integrals(&m, 1.0, 0.0).is_err());
    }

    #[test]
    fn diagonal_component_moments() {
        let m = LevyModel::ComponentStable { alphas: vec![1.0, 1.5] };
        let r = moment_integrals_diagonal(&m, &[1.2, 1.8], &[0.5, 0.5]).unwrap();
        assert!(r.iter().all(|x| x.finite));
        let r = moment_integrals_diagonal(&m, &[0.9, 1.8], &[0.5, 0.5]).unwrap();
        assert!(!r[0].finite && r[1].finite);
    }

    #[test]
    fn block_diagonal_moments_match_polar_quadrature() {
        let m = LevyModel::BlockStable {
            blocks: vec![vec![0, 1], vec![2]],
            alphas: vec![1.1, 0.9],
        };
        let gammas = [1.2, 1.2, 1.0];
        let deltas = [0.5, 0.5, 0.5];
        let r = moment_integrals_diagonal(&m, &gammas, &deltas).unwrap();
        assert!(r.iter().all(|x| x.finite));
        // oracle for component 0: c·∫_0^{2π}|cos θ|^γ dθ·∫_0^1 r^{γ−α−1} dr
        let c = numerics::stable_levy_constant(2, 1.1);
        let n = 200_000;
        let ang: f64 = (0..n)
            .map(|i| {
                let th = (i as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64;
                th.cos().abs().powf(1.2)
            })
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI
            / n as f64;
        let small = c * ang / (1.2 - 1.1);
        assert!((r[0].small_part - small).abs() < 1e-6 * small);
        let big = c * {
            let a: f64 = (0..n)
                .map(|i| {
                    let th = (i as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64;
                    th.cos().abs().powf(0.5)
                })
                .sum::<f64>()
                * 2.0
                * std::f64::consts::PI
                / n as f64;
            a
        } / (1.1 - 0.5);
        assert!((r[0].big_part - big).abs() < 1e-6 * big);
        // component 2 is a one-dimensional block
        let c1 = numerics::stable_levy_constant(1, 0.9);
        assert!((r[2].small_part - 2.0 * c1 / 0.1).abs() < 1e-9);
    }

    #[test]
    fn truncated_measure_has_no_big_jumps() {
        let m = LevyModel::DiscreteMeasure { alphas: vec![0.5, 1.5], terms: 100 };
        let r = moment_integrals(&m, 1.8, 1.8).unwrap();
        assert_eq!(r.big_part, 0.0);
    }

    #[test]
    fn subordinate_moments_unsupported() {
        let m = LevyModel::SubordinateBm { alphas: vec![1.0], betas: vec![0.0] };
        assert!(matches!(moment_integrals(&m, 1.5, 0.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn anisotropy_examples() {
        let a = compute_anisotropy(&[1.3, 1.3, 1.3]).unwrap();
        assert!(close(a.mean_alpha, 1.3, 1e-15));
        assert!(a.weights.iter().all(|w| close(*w, 1.0, 1e-15)));
        let a = compute_anisotropy(&[0.5, 1.5]).unwrap();
        assert!((a.mean_alpha - 0.75).abs() < 1e-12);
        assert!((a.weights[0] - 1.5).abs() < 1e-12 && (a.weights[1] - 0.5).abs() < 1e-12);
        let a = compute_anisotropy(&[1.0, 1.0, 2.0 - 1e-9]).unwrap();
        assert!((a.weights.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(compute_anisotropy(&[2.0]).is_err());
    }

    proptest! {
        #[test]
        fn anisotropy_normalization(alphas in proptest::collection::vec(0.01f64..1.99, 1..8)) {
            let a = compute_anisotropy(&alphas).unwrap();
            let d = alphas.len() as f64;
            prop_assert!((a.weights.iter().sum::<f64>() - d).abs() < 1e-12 * d);
            for (w, al) in a.weights.iter().zip(&alphas) {
                prop_assert!((w * al - a.mean_alpha).abs() < 1e-12 * a.mean_alpha);
            }
        }
    }

    #[test]
    fn isotropic_smoothing_scale() {
        let m = LevyModel::IsotropicStable { dim: 1, alpha: 1.0 };
        assert!(close(smoothing_scale(&m, 0.01).unwrap(), 100.0, 1e-6));
        let m = LevyModel::IsotropicStable { dim: 3, alpha: 0.7 };
        let t = 0.3;
        assert!(close(smoothing_scale(&m, t).unwrap(), t.powf(-1.0 / 0.7), 1e-6));
        // inverse relation Ξ(1/δ(η)) = η
        let eta = 17.0;
        let d = sup_real_symbol(&m, eta).unwrap();
        assert!(close(smoothing_scale(&m, 1.0 / d).unwrap(), eta, 1e-6));
    }

    #[test]
    fn component_smoothing_scale_against_brute_force() {
        let m = LevyModel::ComponentStable { alphas: vec![1.0, 1.5] };
        let t = 1e-3;
        let xi = smoothing_scale(&m, t).unwrap();
        // δ lies between max_k η^{α_k} and Σ_k η^{α_k}, which brackets Ξ.
        let upper = t.powf(-1.0 / 1.5);
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 1000.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + mid.powf(1.5) >= 1.0 / t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(xi <= upper * (1.0 + 1e-6) && xi >= lo * (1.0 - 1e-6), "{xi}");
        // brute-force oracle on the circle
        let brute = |eta: f64| {
            (0..=200_000)
                .map(|i| {
                    let th = i as f64 / 200_000.0 * std::f64::consts::FRAC_PI_2;
                    (eta * th.cos()) + (eta * th.sin()).powf(1.5)
                })
                .fold(0.0, f64::max)
        };
        let (mut lo, mut hi): (f64, f64) = (1.0, 1000.0);
        for _ in 0..100 {
            let mid = (lo * hi).sqrt();
            if brute(mid) >= 1.0 / t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(close(xi, hi, 1e-6), "{xi} vs {hi}");
    }

    #[test]
    fn smoothing_scale_monotone_in_t() {
        let m = LevyModel::BlockStable {
            blocks: vec![vec![0], vec![1, 2]],
            alphas: vec![0.6, 1.7],
        };
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let t = 2f64.powi(-12 + k * 2);
            let v = smoothing_scale(&m, t).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn subordinate_smoothing_exponent() {
        for &alpha in &[0.8, 1.5] {
            let m = LevyModel::SubordinateBm { alphas: vec![alpha], betas: vec![0.0] };
            let ts: Vec<f64> = (8..16).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect();
            let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
            let ys: Vec<f64> = ts.iter().map(|t| smoothing_scale(&m, *t).unwrap().ln()).collect();
            let (slope, _, _) = numerics::linear_fit(&xs, &ys);
            assert!((slope + 1.0 / alpha).abs() < 0.02 / alpha, "{slope}");
        }
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        for m in catalog() {
            let s = serde_json::to_string(&m).unwrap();
            let back: LevyModel = serde_json::from_str(&s).unwrap();
            assert_eq!(back, m);
        }
        let bad = r#"{"kind":"component_stable","alphas":[1.0],"bogus":1}"#;
        assert!(serde_json::from_str::<LevyModel>(bad).is_err());
    }

    #[test]
    fn validation() {
        assert!(LevyModel::BlockStable { blocks: vec![vec![0], vec![0]], alphas: vec![1.0, 1.0] }
            .validate()
            .is_err());
        assert!(LevyModel::SubordinateBm { alphas: vec![1.0], betas: vec![-1.0] }.validate().is_err());
        assert!(LevyModel::ComponentStable { alphas: vec![0.0] }.validate().is_err());
        let zero = LevyModel::TemperedOneSided {
            components: vec![OneSidedComponent { c_plus: 0.0, alpha_plus: 0.5, c_minus: 0.0, alpha_minus: None }],
            extra: vec![],
            truncation: Truncation::default(),
        };
        assert!(zero.validate().is_ok());
        assert!(zero.validate_for_density().is_err());
    }

    #[test]
    fn small_jump_means() {
        let m = LevyModel::TemperedOneSided {
            components: vec![OneSidedComponent { c_plus: 1.0, alpha_plus: 0.5, c_minus: 0.0, alpha_minus: None }],
            extra: vec![],
            truncation: Truncation::default(),
        };
        assert!(close(m.small_jump_mean()[0].unwrap(), 2.0, 1e-15));
        let s = LevyModel::ComponentStable { alphas: vec![0.5, 1.5] };
        assert_eq!(s.small_jump_mean(), vec![Some(0.0), None]);
    }
}
