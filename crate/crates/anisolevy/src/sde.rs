//! Euler simulation of `dX = b(X)dt + σ(X−)dZ` and the one-step approximations `X^ε`.

use crate::error::{ensure_finite, Error, Result};
use crate::levy_models::LevyModel;
use crate::sampling::IncrementPlan;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Parametric scalar coefficient families with known Hölder exponents and bounds.
/// Non-constant families depend on the single coordinate `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientFamily {
    Constant {
        value: f64,
    },
    /// `clamp(c0 + c1·x, −clamp, clamp)`; Lipschitz.
    AffineClamped {
        c0: f64,
        c1: f64,
        clamp: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `base + amplitude·min(|x − center|^exponent, cap)`; Hölder of order `exponent`.
    HolderBump {
        center: f64,
        amplitude: f64,
        exponent: f64,
        cap: f64,
        #[serde(default)]
        base: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `c0 + c1/(1 + (x − center)²)`; smooth.
    SmoothBounded {
        c0: f64,
        c1: f64,
        center: f64,
        #[serde(default)]
        axis: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub family: CoefficientFamily,
    /// Hölder exponent used by the hypotheses, at most the analytic one.
    pub declared_exponent: f64,
}

impl CoefficientSpec {
    pub fn constant(value: f64, declared_exponent: f64) -> Self {
        CoefficientSpec {
            family: CoefficientFamily::Constant { value },
            declared_exponent,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.family {
            CoefficientFamily::Constant { value } => *value,
            CoefficientFamily::AffineClamped { c0, c1, clamp, axis } => (c0 + c1 * x[*axis]).clamp(-clamp, *clamp),
            CoefficientFamily::HolderBump {
                center,
                amplitude,
                exponent,
                cap,
                base,
                axis,
            } => base + amplitude * (x[*axis] - center).abs().powf(*exponent).min(*cap),
            CoefficientFamily::SmoothBounded { c0, c1, center, axis } => {
                let u = x[*axis] - center;
                c0 + c1 / (1.0 + u * u)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, CoefficientFamily::Constant { .. })
    }

    /// Global bound `sup |f|`.
    pub fn bound(&self) -> f64 {
        match &self.family {
            CoefficientFamily::Constant { value } => value.abs(),
            CoefficientFamily::AffineClamped { clamp, .. } => *clamp,
            CoefficientFamily::HolderBump { amplitude, cap, base, .. } => {
                base.abs().max((base + amplitude * cap).abs())
            }
            CoefficientFamily::SmoothBounded { c0, c1, .. } => c0.abs().max((c0 + c1).abs()),
        }
    }

    /// Hölder exponent the family actually has.
    pub fn analytic_exponent(&self) -> f64 {
        match &self.family {
            CoefficientFamily::HolderBump { exponent, .. } => *exponent,
            _ => 1.0,
        }
    }

    /// A constant `C` with `|f(x) − f(y)| ≤ C|x − y|^{analytic exponent}`.
    pub fn holder_constant(&self) -> f64 {
        match &self.family {
            CoefficientFamily::Constant { .. } => 0.0,
            CoefficientFamily::AffineClamped { c1, .. } => c1.abs(),
            CoefficientFamily::HolderBump { amplitude, .. } => amplitude.abs(),
            // max |d/du 1/(1+u²)| = 3√3/8
            CoefficientFamily::SmoothBounded { c1, .. } => c1.abs() * 3f64.sqrt() * 3.0 / 8.0,
        }
    }

    fn axis(&self) -> Option<usize> {
        match &self.family {
            CoefficientFamily::Constant { .. } => None,
            CoefficientFamily::AffineClamped { axis, .. }
            | CoefficientFamily::HolderBump { axis, .. }
            | CoefficientFamily::SmoothBounded { axis, .. } => Some(*axis),
        }
    }

    fn validate(&self, field: &str, d: usize, diffusion: bool) -> Result<()> {
        let nums: Vec<f64> = match &self.family {
            CoefficientFamily::Constant { value } => vec![*value],
            CoefficientFamily::AffineClamped { c0, c1, clamp, .. } => {
                if !(*clamp > 0.0) {
                    return Err(Error::input(field, "clamp must be positive"));
                }
                vec![*c0, *c1, *clamp]
            }
            CoefficientFamily::HolderBump {
                center,
                amplitude,
                exponent,
                cap,
                base,
                ..
            } => {
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::input(field, "bump exponent must lie in (0,1]"));
                }
                if !(*cap > 0.0) {
                    return Err(Error::input(field, "cap must be positive"));
                }
                vec![*center, *amplitude, *exponent, *cap, *base]
            }
            CoefficientFamily::SmoothBounded { c0, c1, center, .. } => vec![*c0, *c1, *center],
        };
        ensure_finite(field, &nums)?;
        if let Some(a) = self.axis() {
            if a >= d {
                return Err(Error::input(field, format!("axis {a} out of range")));
            }
        }
        let e = self.declared_exponent;
        let ok = if diffusion { e > 0.0 && e < 1.0 } else { (0.0..=1.0).contains(&e) };
        if !ok {
            return Err(Error::input(field, format!("declared exponent {e} outside its domain")));
        }
        if e > self.analytic_exponent() + 1e-15 {
            return Err(Error::input(field, "declared exponent exceeds the family's Hölder exponent"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diffusion {
    /// Row-major `d × d` matrix of coefficients.
    Full(Vec<Vec<CoefficientSpec>>),
    Diagonal(Vec<CoefficientSpec>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    General,
    Diagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeProblem {
    pub drift: Vec<CoefficientSpec>,
    pub diffusion: Diffusion,
    pub model: LevyModel,
    pub x0: Vec<f64>,
}

impl SdeProblem {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn structure(&self) -> Structure {
        match self.diffusion {
            Diffusion::Full(_) => Structure::General,
            Diffusion::Diagonal(_) => Structure::Diagonal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::input("x0", "empty"));
        }
        ensure_finite("x0", &self.x0)?;
        self.model.validate()?;
        if self.model.dim() != d {
            return Err(Error::input("model", "dimension differs from x0"));
        }
        if self.drift.len() != d {
            return Err(Error::input("drift", "one coefficient per component required"));
        }
        for c in &self.drift {
            c.validate("drift", d, false)?;
        }
        match &self.diffusion {
            Diffusion::Full(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::input("diffusion", "full diffusion must be d × d"));
                }
                for c in rows.iter().flatten() {
                    c.validate("diffusion", d, true)?;
                }
            }
            Diffusion::Diagonal(v) => {
                if v.len() != d {
                    return Err(Error::input("diffusion", "diagonal diffusion needs d entries"));
                }
                for c in v {
                    c.validate("diffusion", d, true)?;
                }
            }
        }
        Ok(())
    }

    pub fn drift_at(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.drift) {
            *o = c.eval(x);
        }
    }

    /// Full `σ(x)` as a row-major `d × d` matrix.
    pub fn sigma_at(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d * d];
        match &self.diffusion {
            Diffusion::Full(rows) => {
                for (i, r) in rows.iter().enumerate() {
                    for (j, c) in r.iter().enumerate() {
                        m[i * d + j] = c.eval(x);
                    }
                }
            }
            Diffusion::Diagonal(v) => {
                for (i, c) in v.iter().enumerate() {
                    m[i * d + i] = c.eval(x);
                }
            }
        }
        m
    }

    /// `out += σ(x)·v`.
    pub fn add_sigma_times(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match &self.diffusion {
            Diffusion::Full(rows) => {
                for (o, r) in out.iter_mut().zip(rows) {
                    *o += r.iter().zip(v).map(|(c, vj)| c.eval(x) * vj).sum::<f64>();
                }
            }
            Diffusion::Diagonal(cs) => {
                for ((o, c), vj) in out.iter_mut().zip(cs).zip(v) {
                    *o += c.eval(x) * vj;
                }
            }
        }
    }

    /// `min` of the declared drift exponents.
    pub fn beta(&self) -> f64 {
        self.drift.iter().map(|c| c.declared_exponent).fold(f64::INFINITY, f64::min)
    }

    /// `min` of the declared diffusion exponents.
    pub fn chi(&self) -> f64 {
        self.diffusion_specs().map(|c| c.declared_exponent).fold(f64::INFINITY, f64::min)
    }

    pub fn betas(&self) -> Vec<f64> {
        self.drift.iter().map(|c| c.declared_exponent).collect()
    }

    /// Per-component diffusion exponents (row minima for a full matrix).
    pub fn chis(&self) -> Vec<f64> {
        match &self.diffusion {
            Diffusion::Full(rows) => rows
                .iter()
                .map(|r| r.iter().map(|c| c.declared_exponent).fold(f64::INFINITY, f64::min))
                .collect(),
            Diffusion::Diagonal(v) => v.iter().map(|c| c.declared_exponent).collect(),
        }
    }

    fn diffusion_specs(&self) -> Box<dyn Iterator<Item = &CoefficientSpec> + '_> {
        match &self.diffusion {
            Diffusion::Full(rows) => Box::new(rows.iter().flatten()),
            Diffusion::Diagonal(v) => Box::new(v.iter()),
        }
    }

    fn euler_step(&self, x: &mut [f64], dt: f64, dz: &[f64], scratch: &mut [f64]) {
        self.drift_at(x, scratch);
        scratch.iter_mut().for_each(|s| *s *= dt);
        self.add_sigma_times(x, dz, scratch);
        for (xi, s) in x.iter_mut().zip(scratch.iter()) {
            *xi += *s;
        }
    }
}

/// The corrected drift `b̃(x) = b(x) − σ(x)m` with `m` the masked small-jump mean.
#[derive(Clone, Debug)]
pub struct DriftCorrection {
    /// `∫_{|z|≤1} z_j ν(dz)` on corrected components, zero elsewhere.
    pub mean: Vec<f64>,
    pub corrected: Vec<bool>,
}

impl DriftCorrection {
    pub fn eval(&self, problem: &SdeProblem, x: &[f64], out: &mut [f64]) {
        problem.drift_at(x, out);
        let d = out.len();
        let mut shift = vec![0.0; d];
        problem.add_sigma_times(x, &self.mean, &mut shift);
        for i in 0..d {
            if self.corrected[i] {
                out[i] -= shift[i];
            }
        }
    }

    /// `σ(x)m`, restricted to corrected rows.
    pub fn sigma_mean(&self, problem: &SdeProblem, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; x.len()];
        problem.add_sigma_times(x, &self.mean, &mut s);
        for (v, c) in s.iter_mut().zip(&self.corrected) {
            if !c {
                *v = 0.0;
            }
        }
        s
    }
}

/// Builds `b̃` for the small-moment regime.
///
/// `gammas` holds one exponent (general structure: every component is corrected when
/// it is below 1) or one per component (diagonal structure: only components with
/// `γ_j < 1` are corrected).
pub fn drift_correction(problem: &SdeProblem, gammas: &[f64]) -> Result<DriftCorrection> {
    let d = problem.dim();
    let corrected: Vec<bool> = match (problem.structure(), gammas.len()) {
        (_, 1) => vec![gammas[0] < 1.0; d],
        (Structure::Diagonal, n) if n == d => gammas.iter().map(|g| *g < 1.0).collect(),
        _ => return Err(Error::input("gammas", "expected one exponent or one per component")),
    };
    let means = problem.model.small_jump_mean();
    let mut mean = vec![0.0; d];
    for j in 0..d {
        // a general σ mixes every component of m into each corrected row
        let needed = match problem.structure() {
            Structure::Diagonal => corrected[j],
            Structure::General => corrected.iter().any(|c| *c),
        };
        if needed {
            mean[j] = means[j].ok_or_else(|| {
                Error::Regime(format!("∫_{{|z|≤1}} |z_{j}| ν(dz) diverges; no drift correction"))
            })?;
        }
    }
    Ok(DriftCorrection { mean, corrected })
}

/// Explicit Euler endpoint over a uniform grid of `steps` steps.
pub fn simulate_endpoint<R: Rng + ?Sized>(problem: &SdeProblem, t: f64, steps: usize, rng: &mut R) -> Result<Vec<f64>> {
    problem.validate()?;
    if steps == 0 || !(t > 0.0) {
        return Err(Error::input("steps", "need t > 0 and at least one step"));
    }
    let plan = IncrementPlan::new(&problem.model)?;
    Ok(simulate_endpoint_with(problem, &plan, t, steps, rng))
}

/// [`simulate_endpoint`] with a prebuilt plan and no validation.
pub fn simulate_endpoint_with<R: Rng + ?Sized>(
    problem: &SdeProblem,
    plan: &IncrementPlan,
    t: f64,
    steps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let d = problem.dim();
    let dt = t / steps as f64;
    let mut x = problem.x0.clone();
    let mut dz = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for _ in 0..steps {
        dz.iter_mut().for_each(|v| *v = 0.0);
        plan.add_increment(dt, rng, &mut dz);
        problem.euler_step(&mut x, dt, &dz, &mut scratch);
    }
    x
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneStepResult {
    /// Fine-grid endpoint sharing the window noise, when produced by a coupled run.
    pub x_exact_surrogate: Option<Vec<f64>>,
    pub x_eps: Vec<f64>,
    pub u_eps: Vec<f64>,
    pub epsilon: f64,
}

fn check_window(t: f64, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < t.min(1.0) {
        Ok(())
    } else {
        Err(Error::input("epsilon", format!("ε = {eps} outside (0, min(1,t))")))
    }
}

fn check_len(field: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() == d {
        Ok(())
    } else {
        Err(Error::input(field, "length must equal the dimension"))
    }
}

/// `U^ε = X(t−ε) + b(X(t−ε))ε`, `X^ε = U^ε + σ(X(t−ε))·ΔZ`.
pub fn one_step_ge1(problem: &SdeProblem, t: f64, eps: f64, state: &[f64], increment: &[f64]) -> Result<OneStepResult> {
    check_window(t, eps)?;
    check_len("state", state, problem.dim())?;
    check_len("increment", increment, problem.dim())?;
    let mut u = vec![0.0; state.len()];
    problem.drift_at(state, &mut u);
    for (ui, s) in u.iter_mut().zip(state) {
        *ui = s + *ui * eps;
    }
    let mut x = u.clone();
    problem.add_sigma_times(state, increment, &mut x);
    Ok(OneStepResult {
        x_exact_surrogate: None,
        x_eps: x,
        u_eps: u,
        epsilon: eps,
    })
}

/// Piecewise-frozen solve of `W(u) = x + ∫ b̃(W(s_τ)) ds` over a window of length `eps`.
pub fn solve_w(problem: &SdeProblem, corr: &DriftCorrection, state: &[f64], eps: f64, tau: f64) -> Vec<f64> {
    let mut w = state.to_vec();
    let mut b = vec![0.0; w.len()];
    let full = (eps / tau).floor();
    let n_full = full as usize;
    let rest = eps - full * tau;
    for _ in 0..n_full {
        corr.eval(problem, &w, &mut b);
        for (wi, bi) in w.iter_mut().zip(&b) {
            *wi += bi * tau;
        }
    }
    if rest > 0.0 {
        corr.eval(problem, &w, &mut b);
        for (wi, bi) in w.iter_mut().zip(&b) {
            *wi += bi * rest;
        }
    }
    w
}

fn tau_for(eps: f64, rho: f64) -> Result<f64> {
    if !(rho < 1.0) {
        return Err(Error::Regime("β∧χ = 1 leaves τ undefined".into()));
    }
    let tau = eps.powf(1.0 / (1.0 - rho));
    if !(eps / tau <= MAX_W_STEPS) {
        return Err(Error::Numeric {
            reason: format!("τ = {tau:e} needs more than {MAX_W_STEPS:e} ODE steps"),
            partial: tau,
        });
    }
    Ok(tau)
}

/// Cap on the number of frozen ODE steps in one `W^ε` solve.
pub const MAX_W_STEPS: f64 = 1e7;

/// Small-moment scheme: `U^ε = W^ε(t) + εσ(X(t−ε))m`, `X^ε = U^ε + σ(X(t−ε))·ΔZ`.
pub fn one_step_lt1(
    problem: &SdeProblem,
    t: f64,
    eps: f64,
    gamma: f64,
    state: &[f64],
    increment: &[f64],
) -> Result<OneStepResult> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Regime(format!("γ = {gamma} is not in (0,1)")));
    }
    check_window(t, eps)?;
    check_len("state", state, problem.dim())?;
    check_len("increment", increment, problem.dim())?;
    let corr = drift_correction(problem, &[gamma])?;
    let tau = tau_for(eps, problem.beta().min(problem.chi()))?;
    Ok(lt1_update(problem, &corr, eps, tau, state, increment))
}

fn lt1_update(
    problem: &SdeProblem,
    corr: &DriftCorrection,
    eps: f64,
    tau: f64,
    state: &[f64],
    increment: &[f64],
) -> OneStepResult {
    let w = solve_w(problem, corr, state, eps, tau);
    let sm = corr.sigma_mean(problem, state);
    let u: Vec<f64> = w.iter().zip(&sm).map(|(wi, s)| wi + eps * s).collect();
    let mut x = u.clone();
    problem.add_sigma_times(state, increment, &mut x);
    OneStepResult {
        x_exact_surrogate: None,
        x_eps: x,
        u_eps: u,
        epsilon: eps,
    }
}

/// Diagonal scheme: components with `γ_k ≥ 1` take the frozen Euler step, the rest
/// take the `W^ε` update with `τ = ε^{1/(1−ρ)}`, `ρ = min_j β_j∧χ_j`.
pub fn one_step_diagonal(
    problem: &SdeProblem,
    t: f64,
    eps: f64,
    gammas: &[f64],
    state: &[f64],
    increment: &[f64],
) -> Result<OneStepResult> {
    if problem.structure() != Structure::Diagonal {
        return Err(Error::input("problem", "diagonal scheme needs a diagonal diffusion"));
    }
    check_window(t, eps)?;
    let d = problem.dim();
    check_len("gammas", gammas, d)?;
    check_len("state", state, d)?;
    check_len("increment", increment, d)?;
    if gammas.iter().any(|g| !(*g > 0.0 && *g <= 2.0)) {
        return Err(Error::input("gammas", "each γ_k must lie in (0,2]"));
    }
    let ge1 = one_step_ge1(problem, t, eps, state, increment)?;
    if gammas.iter().all(|g| *g >= 1.0) {
        return Ok(ge1);
    }
    let corr = drift_correction(problem, gammas)?;
    let rho = problem
        .betas()
        .iter()
        .zip(problem.chis())
        .map(|(b, c)| b.min(c))
        .fold(f64::INFINITY, f64::min);
    let tau = tau_for(eps, rho)?;
    let lt1 = lt1_update(problem, &corr, eps, tau, state, increment);
    let pick = |a: &[f64], b: &[f64]| -> Vec<f64> {
        (0..d).map(|k| if gammas[k] >= 1.0 { a[k] } else { b[k] }).collect()
    };
    Ok(OneStepResult {
        x_exact_surrogate: None,
        x_eps: pick(&ge1.x_eps, &lt1.x_eps),
        u_eps: pick(&ge1.u_eps, &lt1.u_eps),
        epsilon: eps,
    })
}

/// Which one-step approximation a coupled run evaluates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    Ge1,
    Lt1 { gamma: f64 },
    Diagonal { gammas: Vec<f64> },
}

/// Fine reference grid of a coupled run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineGrid {
    /// Step used before the largest window opens.
    pub coarse_step: f64,
    /// Minimum number of sub-steps in each band between consecutive window openings.
    pub sub_steps: usize,
}

impl Default for FineGrid {
    fn default() -> Self {
        FineGrid {
            coarse_step: 1.0 / 4096.0,
            sub_steps: 64,
        }
    }
}

/// Simulation time grid of a coupled run. Every `t − ε_i` is a node.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledGrid {
    pub nodes: Vec<f64>,
    /// Node index of `t − ε_i`, in the caller's ε order.
    pub window_start: Vec<usize>,
}

/// Builds a graded grid on `[0, t]`: coarse steps before `t − max ε`, then in each band
/// `(t − ε_{(i+1)}, t − ε_{(i)}]` a step of at most `min(coarse, ε_{(i)}/sub_steps)`.
pub fn coupled_grid(t: f64, eps: &[f64], grid: FineGrid) -> Result<CoupledGrid> {
    if eps.is_empty() {
        return Err(Error::input("epsilon", "empty"));
    }
    for e in eps {
        check_window(t, *e)?;
    }
    if !(grid.coarse_step > 0.0) || grid.sub_steps == 0 {
        return Err(Error::input("grid", "invalid fine grid"));
    }
    let mut sorted: Vec<f64> = eps.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let mut nodes = vec![0.0];
    let push_segment = |nodes: &mut Vec<f64>, from: f64, to: f64, step: f64| {
        let n = ((to - from) / step - 1e-9).ceil().max(1.0) as usize;
        for j in 1..n {
            nodes.push(from + (to - from) * j as f64 / n as f64);
        }
        nodes.push(to);
    };
    let first = t - sorted[0];
    push_segment(&mut nodes, 0.0, first, grid.coarse_step);
    let mut starts = vec![first];
    for i in 0..sorted.len() {
        let from = t - sorted[i];
        let inner = sorted.get(i + 1).copied().unwrap_or(0.0);
        let band_eps = if i + 1 < sorted.len() { sorted[i + 1] } else { sorted[i] };
        let to = t - inner;
        let step = grid.coarse_step.min(band_eps / grid.sub_steps as f64);
        push_segment(&mut nodes, from, to, step);
        if i + 1 < sorted.len() {
            starts.push(to);
        }
    }
    let idx_of = |v: f64| nodes.iter().position(|n| *n == v).expect("window start is a node");
    let window_start = eps
        .iter()
        .map(|e| {
            let k = sorted.iter().position(|s| s == e).unwrap();
            idx_of(starts[k])
        })
        .collect();
    Ok(CoupledGrid { nodes, window_start })
}

/// One replica of a coupled run: the fine Euler path and, for every ε, the scheme
/// evaluated from `X(t−ε)` with the same window noise.
pub fn simulate_coupled<R: Rng + ?Sized>(
    problem: &SdeProblem,
    plan: &IncrementPlan,
    grid: &CoupledGrid,
    eps: &[f64],
    scheme: &Scheme,
    rng: &mut R,
) -> Result<Vec<OneStepResult>> {
    let d = problem.dim();
    let nodes = &grid.nodes;
    let steps = nodes.len() - 1;
    let mut starts: Vec<(usize, usize)> = grid.window_start.iter().copied().enumerate().collect();
    starts.sort_by_key(|s| s.1);
    let mut states = vec![Vec::new(); eps.len()];
    let mut x = problem.x0.clone();
    let mut scratch = vec![0.0; d];
    // increments after the first window opens, kept to form the window sums
    let first = starts[0].1;
    let mut tail = vec![0.0; (steps - first) * d];
    let mut k = 0;
    for j in 0..steps {
        while k < starts.len() && starts[k].1 == j {
            states[starts[k].0] = x.clone();
            k += 1;
        }
        let row = if j >= first {
            let r = &mut tail[(j - first) * d..(j - first + 1) * d];
            plan.add_increment(nodes[j + 1] - nodes[j], rng, r);
            r.to_vec()
        } else {
            let mut r = vec![0.0; d];
            plan.add_increment(nodes[j + 1] - nodes[j], rng, &mut r);
            r
        };
        problem.euler_step(&mut x, nodes[j + 1] - nodes[j], &row, &mut scratch);
    }
    let t = nodes[steps];
    let mut out = Vec::with_capacity(eps.len());
    for (i, &e) in eps.iter().enumerate() {
        let s = grid.window_start[i];
        let mut inc = vec![0.0; d];
        for j in s..steps {
            for c in 0..d {
                inc[c] += tail[(j - first) * d + c];
            }
        }
        let mut r = match scheme {
            Scheme::Ge1 => one_step_ge1(problem, t, e, &states[i], &inc)?,
            Scheme::Lt1 { gamma } => one_step_lt1(problem, t, e, *gamma, &states[i], &inc)?,
            Scheme::Diagonal { gammas } => one_step_diagonal(problem, t, e, gammas, &states[i], &inc)?,
        };
        r.x_exact_surrogate = Some(x.clone());
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::{OneSidedComponent, Truncation};
    use crate::sampling::{ks_critical_two_sample, ks_two_sample, RngStream};
    use proptest::prelude::*;

    fn bump(center: f64, amplitude: f64, exponent: f64, axis: usize) -> CoefficientSpec {
        CoefficientSpec {
            family: CoefficientFamily::HolderBump {
                center,
                amplitude,
                exponent,
                cap: 1.0,
                base: 1.0,
                axis,
            },
            declared_exponent: exponent.min(0.99),
        }
    }

    fn additive(model: LevyModel) -> SdeProblem {
        let d = model.dim();
        SdeProblem {
            drift: vec![CoefficientSpec::constant(0.0, 1.0); d],
            diffusion: Diffusion::Diagonal(vec![CoefficientSpec::constant(1.0, 0.5); d]),
            model,
            x0: vec![0.25; d],
        }
    }

    fn one_sided(c_plus: f64, alpha: f64) -> OneSidedComponent {
        OneSidedComponent { c_plus, alpha_plus: alpha, c_minus: 0.0, alpha_minus: None }
    }

    #[test]
    fn additive_endpoint_is_x0_plus_noise() {
        let model = LevyModel::ComponentStable { alphas: vec![1.3, 0.8] };
        let p = additive(model.clone());
        let plan = IncrementPlan::new(&model).unwrap();
        for steps in [1usize, 7] {
            let mut a = RngStream::new(3, 1);
            let mut b = RngStream::new(3, 1);
            let x = simulate_endpoint(&p, 0.5, steps, &mut a).unwrap();
            let mut z = vec![0.0; 2];
            for _ in 0..steps {
                plan.add_increment(0.5 / steps as f64, &mut b, &mut z);
            }
            for k in 0..2 {
                assert!((x[k] - 0.25 - z[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ode_endpoint() {
        let mut p = additive(LevyModel::ComponentStable { alphas: vec![1.5] });
        p.drift = vec![CoefficientSpec::constant(-0.7, 1.0)];
        p.diffusion = Diffusion::Diagonal(vec![CoefficientSpec::constant(0.0, 0.5)]);
        let mut rng = RngStream::new(0, 0);
        let x = simulate_endpoint(&p, 2.0, 10, &mut rng).unwrap();
        assert!((x[0] - (0.25 - 1.4)).abs() < 1e-13);
    }

    #[test]
    fn grid_refinement_self_consistency() {
        let model = LevyModel::ComponentStable { alphas: vec![1.5] };
        let p = SdeProblem {
            drift: vec![CoefficientSpec {
                family: CoefficientFamily::AffineClamped { c0: 0.0, c1: -1.0, clamp: 2.0, axis: 0 },
                declared_exponent: 1.0,
            }],
            diffusion: Diffusion::Diagonal(vec![CoefficientSpec {
                family: CoefficientFamily::SmoothBounded { c0: 0.5, c1: 0.5, center: 0.0, axis: 0 },
                declared_exponent: 0.9,
            }]),
            model: model.clone(),
            x0: vec![0.0],
        };
        let plan = IncrementPlan::new(&model).unwrap();
        let n = 100_000;
        let mut r1 = RngStream::new(21, 0);
        let mut r2 = RngStream::new(21, 1);
        let a: Vec<f64> = (0..n).map(|_| simulate_endpoint_with(&p, &plan, 0.5, 16, &mut r1)[0]).collect();
        let b: Vec<f64> = (0..n).map(|_| simulate_endpoint_with(&p, &plan, 0.5, 32, &mut r2)[0]).collect();
        assert!(ks_two_sample(&a, &b) < ks_critical_two_sample(0.05, n, n));
    }

    #[test]
    fn drift_correction_examples() {
        let sym = additive(LevyModel::ComponentStable { alphas: vec![0.6] });
        let c = drift_correction(&sym, &[0.7]).unwrap();
        let mut out = [0.0];
        c.eval(&sym, &[0.3], &mut out);
        assert_eq!(out[0], 0.0);

        let os = additive(LevyModel::TemperedOneSided {
            components: vec![one_sided(1.0, 0.5)],
            extra: vec![],
            truncation: Truncation::default(),
        });
        let c = drift_correction(&os, &[0.7]).unwrap();
        c.eval(&os, &[0.3], &mut out);
        assert!((out[0] + 2.0).abs() < 1e-14);

        let mixed = additive(LevyModel::TemperedOneSided {
            components: vec![one_sided(1.0, 0.3), one_sided(1.0, 0.3)],
            extra: vec![],
            truncation: Truncation::default(),
        });
        let c = drift_correction(&mixed, &[0.5, 1.5]).unwrap();
        assert_eq!(c.corrected, vec![true, false]);
        let mut out = [0.0; 2];
        c.eval(&mixed, &[0.0, 0.0], &mut out);
        assert!((out[0] + 1.0 / 0.7).abs() < 1e-14);
        assert_eq!(out[1], 0.0);

        let heavy = additive(LevyModel::TemperedOneSided {
            components: vec![one_sided(1.0, 1.2)],
            extra: vec![],
            truncation: Truncation::default(),
        });
        assert!(matches!(drift_correction(&heavy, &[0.5]), Err(Error::Regime(_))));
    }

    #[test]
    fn ge1_examples() {
        let p = additive(LevyModel::ComponentStable { alphas: vec![1.5, 1.5] });
        let r = one_step_ge1(&p, 1.0, 0.1, &[0.5, -0.5], &[0.0, 0.0]).unwrap();
        assert_eq!(r.x_eps, vec![0.5, -0.5]);
        assert!(one_step_ge1(&p, 0.05, 0.1, &[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(one_step_ge1(&p, 2.0, 1.0, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn constant_coefficients_give_zero_coupling_error() {
        let mut p = additive(LevyModel::ComponentStable { alphas: vec![1.5, 1.2] });
        p.drift = vec![CoefficientSpec::constant(0.3, 1.0), CoefficientSpec::constant(-0.2, 1.0)];
        p.diffusion = Diffusion::Full(vec![
            vec![CoefficientSpec::constant(1.0, 0.5), CoefficientSpec::constant(0.2, 0.5)],
            vec![CoefficientSpec::constant(-0.1, 0.5), CoefficientSpec::constant(0.8, 0.5)],
        ]);
        let plan = IncrementPlan::new(&p.model).unwrap();
        let eps = [1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0];
        let g = coupled_grid(0.25, &eps, FineGrid::default()).unwrap();
        let mut rng = RngStream::new(5, 0);
        for r in simulate_coupled(&p, &plan, &g, &eps, &Scheme::Ge1, &mut rng).unwrap() {
            let x = r.x_exact_surrogate.unwrap();
            for k in 0..2 {
                assert!((x[k] - r.x_eps[k]).abs() <= 1e-12 * (1.0 + x[k].abs()));
            }
        }
    }

    #[test]
    fn lt1_constant_drift_and_single_step() {
        let mut p = additive(LevyModel::TemperedOneSided {
            components: vec![one_sided(1.0, 0.4)],
            extra: vec![],
            truncation: Truncation::default(),
        });
        p.drift = vec![CoefficientSpec::constant(0.5, 0.5)];
        let corr = drift_correction(&p, &[0.5]).unwrap();
        let m = 1.0 / 0.6;
        for tau in [0.01, 0.003, 0.1] {
            let w = solve_w(&p, &corr, &[1.0], 0.1, tau);
            assert!((w[0] - (1.0 + (0.5 - m) * 0.1)).abs() < 1e-12);
        }
        let r = one_step_lt1(&p, 1.0, 0.1, 0.5, &[1.0], &[0.0]).unwrap();
        assert!((r.u_eps[0] - (1.0 + 0.05)).abs() < 1e-12);
        // ε = τ collapses to one explicit step
        p.drift = vec![bump(0.0, 1.0, 0.5, 0)];
        let corr = drift_correction(&p, &[0.5]).unwrap();
        let w = solve_w(&p, &corr, &[0.3], 0.2, 0.2);
        let mut b = [0.0];
        corr.eval(&p, &[0.3], &mut b);
        assert!((w[0] - (0.3 + 0.2 * b[0])).abs() < 1e-15);
        assert!(one_step_lt1(&p, 1.0, 0.1, 1.0, &[0.3], &[0.0]).is_err());
    }

    #[test]
    fn lt1_rejects_unit_rho() {
        let mut p = additive(LevyModel::ComponentStable { alphas: vec![0.5] });
        p.drift = vec![CoefficientSpec::constant(0.0, 1.0)];
        p.diffusion = Diffusion::Diagonal(vec![CoefficientSpec::constant(1.0, 0.75)]);
        assert!(one_step_lt1(&p, 1.0, 0.1, 0.6, &[0.0], &[0.0]).is_ok());
        assert!(matches!(tau_for(0.1, 1.0), Err(Error::Regime(_))));
        assert!(matches!(tau_for(0.1, 0.999_999), Err(Error::Numeric { .. })));
    }

    #[test]
    fn w_is_deterministic() {
        let mut p = additive(LevyModel::ComponentStable { alphas: vec![0.7, 0.7] });
        p.drift = vec![bump(0.1, 0.5, 0.5, 1), bump(-0.2, 1.0, 0.7, 0)];
        let corr = drift_correction(&p, &[0.8]).unwrap();
        let a = solve_w(&p, &corr, &[0.4, -0.3], 0.05, 0.05f64.powi(2));
        let _ = RngStream::new(1, 2);
        let b = solve_w(&p, &corr, &[0.4, -0.3], 0.05, 0.05f64.powi(2));
        assert_eq!(a, b);
    }

    #[test]
    fn diagonal_collapse_and_dispatch() {
        let model = LevyModel::TemperedOneSided {
            components: vec![one_sided(1.0, 0.3), one_sided(1.0, 1.2)],
            extra: vec![],
            truncation: Truncation::default(),
        };
        let mut p = additive(model);
        p.drift = vec![bump(0.0, 0.3, 0.5, 1), bump(0.0, 0.3, 0.5, 0)];
        p.diffusion = Diffusion::Diagonal(vec![bump(0.0, 0.2, 0.5, 1), bump(0.0, 0.2, 0.5, 0)]);
        let s = [0.2, -0.1];
        let z = [0.05, 0.3];
        let all_ge = one_step_diagonal(&p, 1.0, 0.1, &[1.5, 1.5], &s, &z).unwrap();
        let ge = one_step_ge1(&p, 1.0, 0.1, &s, &z).unwrap();
        assert_eq!(all_ge.x_eps, ge.x_eps);
        let mixed = one_step_diagonal(&p, 1.0, 0.1, &[0.5, 1.5], &s, &z).unwrap();
        assert_eq!(mixed.x_eps[1], ge.x_eps[1]);
        assert_ne!(mixed.x_eps[0], ge.x_eps[0]);
        let corr = drift_correction(&p, &[0.5, 1.5]).unwrap();
        let tau = 0.1f64.powf(1.0 / (1.0 - 0.5));
        let lt = lt1_update(&p, &corr, 0.1, tau, &s, &z);
        assert_eq!(mixed.x_eps[0], lt.x_eps[0]);
    }

    #[test]
    fn coupled_grid_structure() {
        let eps = [1.0 / 16.0, 1.0 / 1024.0, 1.0 / 128.0];
        let g = coupled_grid(0.25, &eps, FineGrid::default()).unwrap();
        assert_eq!(*g.nodes.last().unwrap(), 0.25);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        for (i, e) in eps.iter().enumerate() {
            let s = g.window_start[i];
            assert!((g.nodes[s] - (0.25 - e)).abs() < 1e-15);
            assert!(g.nodes.len() - 1 - s >= 64);
        }
        let max_step = g.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(max_step <= 1.0 / 4096.0 + 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let p = SdeProblem {
            drift: vec![bump(0.0, 1.0, 0.5, 0)],
            diffusion: Diffusion::Full(vec![vec![CoefficientSpec {
                family: CoefficientFamily::SmoothBounded { c0: 1.0, c1: 0.5, center: 0.0, axis: 0 },
                declared_exponent: 0.9,
            }]]),
            model: LevyModel::ComponentStable { alphas: vec![1.5] },
            x0: vec![0.0],
        };
        let s = serde_json::to_string(&p).unwrap();
        let back: SdeProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        back.validate().unwrap();
    }

    #[test]
    fn declared_exponent_validation() {
        let mut p = additive(LevyModel::ComponentStable { alphas: vec![1.5] });
        p.drift = vec![CoefficientSpec { declared_exponent: 0.8, ..bump(0.0, 1.0, 0.5, 0) }];
        assert!(p.validate().is_err());
        p.drift = vec![bump(0.0, 1.0, 0.5, 0)];
        p.diffusion = Diffusion::Diagonal(vec![CoefficientSpec::constant(1.0, 1.0)]);
        assert!(p.validate().is_err());
    }

    fn arb_spec() -> impl Strategy<Value = CoefficientSpec> {
        prop_oneof![
            (-2.0f64..2.0).prop_map(|v| CoefficientSpec::constant(v, 1.0)),
            (-1.0f64..1.0, -3.0f64..3.0, 0.1f64..3.0).prop_map(|(c0, c1, m)| CoefficientSpec {
                family: CoefficientFamily::AffineClamped { c0, c1, clamp: m, axis: 0 },
                declared_exponent: 1.0,
            }),
            (-1.0f64..1.0, -2.0f64..2.0, 0.05f64..1.0, 0.1f64..2.0).prop_map(|(x0, a, e, cap)| CoefficientSpec {
                family: CoefficientFamily::HolderBump { center: x0, amplitude: a, exponent: e, cap, base: 0.5, axis: 0 },
                declared_exponent: e,
            }),
            (-1.0f64..1.0, -2.0f64..2.0, -1.0f64..1.0).prop_map(|(c0, c1, x0)| CoefficientSpec {
                family: CoefficientFamily::SmoothBounded { c0, c1, center: x0, axis: 0 },
                declared_exponent: 1.0,
            }),
        ]
    }

    proptest! {
        #[test]
        fn coefficients_bounded_and_holder(spec in arb_spec(), x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let fx = spec.eval(&[x]);
            let fy = spec.eval(&[y]);
            prop_assert!(fx.abs() <= spec.bound() + 1e-12);
            let e = spec.declared_exponent;
            let dist = (x - y).abs();
            // on |x − y| ≤ 1 the analytic bound implies the declared one
            if dist <= 1.0 {
                prop_assert!((fx - fy).abs() <= spec.holder_constant() * dist.powf(e) + 1e-12);
            }
        }
    }
}
