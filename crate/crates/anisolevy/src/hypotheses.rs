//! Parameter conditions of the density theorems and the rate exponents κ.
//!
//! All conditions are strict inequalities; a margin at or below [`STRICT_MARGIN`]
//! counts as a failure.

use crate::error::{Error, Result};
use crate::levy_models::Anisotropy;
use serde::{Deserialize, Serialize};

pub const STRICT_MARGIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    GeneralGe1,
    GeneralLt1,
    DiagonalGe1,
    DiagonalLt1,
    CorollaryNoDelta,
    Z1Remark,
    Z2RemarkA,
    Z2RemarkB,
    EllipticCorollary,
    EllipticDiagonalCorollary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

impl Inequality {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = lhs - rhs;
        Inequality {
            name: name.into(),
            lhs,
            rhs,
            margin,
            satisfied: margin > STRICT_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem: Theorem,
    pub inequalities: Vec<Inequality>,
    pub overall: bool,
    pub zero_drift: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ConditionReport {
    fn new(theorem: Theorem, inequalities: Vec<Inequality>, zero_drift: bool) -> Self {
        let overall = inequalities.iter().all(|i| i.satisfied);
        ConditionReport {
            theorem,
            inequalities,
            overall,
            zero_drift,
            notes: Vec::new(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn in_open(field: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(Error::input(field, format!("{v} outside ({lo},{hi})")))
    }
}

fn check_beta(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::input("beta", format!("{v} outside [0,1]")))
    }
}

fn check_gamma_delta(gamma: f64, delta: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::input("gamma", format!("{gamma} outside (0,2]")));
    }
    if !(delta > 0.0 && delta <= gamma) {
        return Err(Error::input("delta", format!("{delta} outside (0,γ]")));
    }
    Ok(())
}

fn check_alphas(alphas: &[f64]) -> Result<(f64, f64)> {
    if alphas.is_empty() {
        return Err(Error::input("alphas", "empty"));
    }
    for a in alphas {
        in_open("alphas", *a, 0.0, 2.0)?;
    }
    Ok((
        alphas.iter().copied().fold(f64::INFINITY, f64::min),
        alphas.iter().copied().fold(0.0, f64::max),
    ))
}

/// `min{1 + (β∧δ)/γ, 1/γ + (χ∧(δ/γ))/γ}` for `γ ∈ [1,2]`.
pub fn kappa_ge1(gamma: f64, delta: f64, beta: f64, chi: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&gamma) {
        return Err(Error::input("gamma", "kappa_ge1 needs γ ∈ [1,2]"));
    }
    check_gamma_delta(gamma, delta)?;
    check_beta(beta)?;
    in_open("chi", chi, 0.0, 1.0)?;
    Ok((1.0 + beta.min(delta) / gamma).min(1.0 / gamma + chi.min(delta / gamma) / gamma))
}

/// `min{1 + (β∧χ)/γ, 1/γ + χ, 1/(1 − β∧χ)}` for `γ ∈ (0,1)`.
pub fn kappa_lt1(gamma: f64, beta: f64, chi: f64) -> Result<f64> {
    in_open("gamma", gamma, 0.0, 1.0)?;
    check_beta(beta)?;
    in_open("chi", chi, 0.0, 1.0)?;
    let bc = beta.min(chi);
    Ok((1.0 + bc / gamma).min(1.0 / gamma + chi).min(1.0 / (1.0 - bc)))
}

/// Per-component exponent `κ_k` of the diagonal scheme.
///
/// `gamma` is `max γ_j`, `delta` is `min δ_j` and `rho` is `min_j β_j∧χ_j`.
pub fn kappa_diag(
    k: usize,
    gammas: &[f64],
    delta: f64,
    gamma: f64,
    beta_k: f64,
    chi_k: f64,
    rho: f64,
) -> Result<f64> {
    let gk = *gammas
        .get(k)
        .ok_or_else(|| Error::input("k", "component index out of range"))?;
    if !(gk > 0.0 && gk <= 2.0) {
        return Err(Error::input("gammas", "γ_k outside (0,2]"));
    }
    check_beta(beta_k)?;
    in_open("chi", chi_k, 0.0, 1.0)?;
    if !(delta > 0.0) || gamma <= 0.0 {
        return Err(Error::input("delta", "must be positive"));
    }
    if gk >= 1.0 {
        Ok((1.0 + beta_k.min(delta) / gamma).min(1.0 / gk + chi_k.min(delta / gk) / gamma))
    } else {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Regime("ρ must lie in [0,1)".into()));
        }
        Ok((1.0 + beta_k.min(chi_k) / gamma)
            .min(1.0 / gk + chi_k / gamma.max(1.0))
            .min(1.0 / (1.0 - rho)))
    }
}

/// All κ_k of a diagonal problem.
pub fn kappa_diag_all(gammas: &[f64], deltas: &[f64], betas: &[f64], chis: &[f64]) -> Result<Vec<f64>> {
    let gamma = gammas.iter().copied().fold(0.0, f64::max);
    let delta = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let rho = betas
        .iter()
        .zip(chis)
        .map(|(b, c)| b.min(*c))
        .fold(f64::INFINITY, f64::min);
    (0..gammas.len())
        .map(|k| kappa_diag(k, gammas, delta, gamma, betas[k], chis[k], rho))
        .collect()
}

/// Conditions of the general theorem; regime chosen by `γ`.
pub fn check_general(
    alphas: &[f64],
    gamma: f64,
    delta: f64,
    beta: f64,
    chi: f64,
    zero_drift: bool,
) -> Result<ConditionReport> {
    let (amin, _) = check_alphas(alphas)?;
    check_gamma_delta(gamma, delta)?;
    check_beta(beta)?;
    in_open("chi", chi, 0.0, 1.0)?;
    let mut ineq = Vec::new();
    if gamma >= 1.0 {
        if !zero_drift {
            ineq.push(Inequality::new(
                "alpha_min*(1+(beta^delta)/gamma)",
                amin * (1.0 + beta.min(delta) / gamma),
                1.0,
            ));
        }
        ineq.push(Inequality::new(
            "(alpha_min/gamma)*(1+chi^(delta/gamma))",
            amin / gamma * (1.0 + chi.min(delta / gamma)),
            1.0,
        ));
        Ok(ConditionReport::new(Theorem::GeneralGe1, ineq, zero_drift))
    } else {
        let bc = beta.min(chi);
        if zero_drift {
            ineq.push(Inequality::new("alpha_min*(1/gamma+chi)", amin * (1.0 / gamma + chi), 1.0));
            ineq.push(Inequality::new("alpha_min+chi", amin + chi, 1.0));
        } else {
            ineq.push(Inequality::new(
                "alpha_min*(1+(beta^chi)/gamma)",
                amin * (1.0 + bc / gamma),
                1.0,
            ));
            ineq.push(Inequality::new("alpha_min*(1/gamma+chi)", amin * (1.0 / gamma + chi), 1.0));
            ineq.push(Inequality::new("alpha_min+beta^chi", amin + bc, 1.0));
        }
        Ok(ConditionReport::new(Theorem::GeneralLt1, ineq, zero_drift))
    }
}

/// Variant without a big-jump moment: the `γ ≥ 1` set is evaluated with `δ = γ`.
pub fn check_no_delta(alphas: &[f64], gamma: f64, beta: f64, chi: f64, zero_drift: bool) -> Result<ConditionReport> {
    let mut r = check_general(alphas, gamma, gamma, beta, chi, zero_drift)?;
    r.theorem = Theorem::CorollaryNoDelta;
    Ok(r)
}

fn check_lengths(d: usize, lists: &[(&str, usize)]) -> Result<()> {
    for (name, len) in lists {
        if *len != d {
            return Err(Error::input(*name, "length must equal the number of components"));
        }
    }
    Ok(())
}

struct DiagonalInputs<'a> {
    alphas: &'a [f64],
    gammas: &'a [f64],
    betas: &'a [f64],
    chis: &'a [f64],
    amin: f64,
    gamma: f64,
}

impl<'a> DiagonalInputs<'a> {
    fn new(alphas: &'a [f64], gammas: &'a [f64], betas: &'a [f64], chis: &'a [f64]) -> Result<Self> {
        let (amin, _) = check_alphas(alphas)?;
        check_lengths(alphas.len(), &[("gammas", gammas.len()), ("betas", betas.len()), ("chis", chis.len())])?;
        for ((g, b), c) in gammas.iter().zip(betas).zip(chis) {
            if !(*g > 0.0 && *g <= 2.0) {
                return Err(Error::input("gammas", format!("{g} outside (0,2]")));
            }
            check_beta(*b)?;
            in_open("chis", *c, 0.0, 1.0)?;
        }
        let gamma = gammas.iter().copied().fold(0.0, f64::max);
        Ok(DiagonalInputs { alphas, gammas, betas, chis, amin, gamma })
    }

    fn lt1_entries(&self, k: usize, zero_drift: bool, out: &mut Vec<Inequality>) {
        let (ak, gk, bk, ck) = (self.alphas[k], self.gammas[k], self.betas[k], self.chis[k]);
        let g = self.gamma;
        if zero_drift {
            let min_chi = self.chis.iter().copied().fold(f64::INFINITY, f64::min);
            out.push(Inequality::new(format!("[{k}] alpha_min+min(chi)"), self.amin + min_chi, 1.0));
        } else {
            let rho = self
                .betas
                .iter()
                .zip(self.chis)
                .map(|(b, c)| b.min(*c))
                .fold(f64::INFINITY, f64::min);
            out.push(Inequality::new(format!("[{k}] alpha_min+min(beta^chi)"), self.amin + rho, 1.0));
            out.push(Inequality::new(
                format!("[{k}] alpha_k*(1+(beta_k^chi_k)/gamma)"),
                ak * (1.0 + bk.min(ck) / g),
                1.0,
            ));
        }
        out.push(Inequality::new(
            format!("[{k}] alpha_k*(1/gamma_k+chi_k/max(1,gamma))"),
            ak * (1.0 / gk + ck / g.max(1.0)),
            1.0,
        ));
    }
}

/// Componentwise conditions of the diagonal theorem.
pub fn check_diagonal(
    alphas: &[f64],
    gammas: &[f64],
    deltas: &[f64],
    betas: &[f64],
    chis: &[f64],
    zero_drift: bool,
) -> Result<ConditionReport> {
    let inp = DiagonalInputs::new(alphas, gammas, betas, chis)?;
    check_lengths(alphas.len(), &[("deltas", deltas.len())])?;
    for (g, d) in gammas.iter().zip(deltas) {
        check_gamma_delta(*g, *d)?;
    }
    let delta = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let g = inp.gamma;
    let mut ineq = Vec::new();
    for k in 0..alphas.len() {
        let (ak, gk, bk, ck) = (alphas[k], gammas[k], betas[k], chis[k]);
        if gk >= 1.0 {
            if !zero_drift {
                ineq.push(Inequality::new(
                    format!("[{k}] alpha_k*(1+(beta_k^delta)/gamma)"),
                    ak * (1.0 + bk.min(delta) / g),
                    1.0,
                ));
            }
            ineq.push(Inequality::new(
                format!("[{k}] alpha_k*(1/gamma_k+(chi_k^(delta/gamma_k))/gamma)"),
                ak * (1.0 / gk + ck.min(delta / gk) / g),
                1.0,
            ));
        } else {
            inp.lt1_entries(k, zero_drift, &mut ineq);
        }
    }
    let theorem = if gammas.iter().any(|g| *g < 1.0) {
        Theorem::DiagonalLt1
    } else {
        Theorem::DiagonalGe1
    };
    Ok(ConditionReport::new(theorem, ineq, zero_drift))
}

/// Diagonal variant without big-jump moments, using `γ_* = min γ_k`.
pub fn check_no_delta_diagonal(alphas: &[f64], gammas: &[f64], betas: &[f64], chis: &[f64]) -> Result<ConditionReport> {
    let inp = DiagonalInputs::new(alphas, gammas, betas, chis)?;
    let g = inp.gamma;
    let g_star = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let mut ineq = Vec::new();
    for k in 0..alphas.len() {
        let (ak, gk, bk, ck) = (alphas[k], gammas[k], betas[k], chis[k]);
        if gk >= 1.0 {
            ineq.push(Inequality::new(format!("[{k}] alpha_k*(1+beta_k/gamma)"), ak * (1.0 + bk / g), 1.0));
            ineq.push(Inequality::new(
                format!("[{k}] alpha_k*(1/gamma_k+(chi_k^(gamma_*/gamma_k))/gamma)"),
                ak * (1.0 / gk + ck.min(g_star / gk) / g),
                1.0,
            ));
        } else {
            inp.lt1_entries(k, false, &mut ineq);
        }
    }
    Ok(ConditionReport::new(Theorem::CorollaryNoDelta, ineq, false))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Equal indices; existence of admissible `(γ, δ)` decided at the limits `γ↓α`, `δ↑α`.
    Z1,
    /// Independent components with a full σ; limits `γ↓α^max`, `δ↑α^min`.
    Z2,
    /// Independent components with diagonal σ; limits `γ_k↓α_k`, `δ_k↑α_k`.
    Z2Diagonal,
    EllipticNonDiagonal,
    EllipticDiagonal,
}

/// Inputs for [`check_preset`]. Per-component `betas`/`chis` default to the scalars.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PresetParams {
    pub alphas: Vec<f64>,
    pub beta: Option<f64>,
    pub chi: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub chis: Option<Vec<f64>>,
    pub zero_drift: bool,
}

impl PresetParams {
    fn per_component(&self, scalar: Option<f64>, list: &Option<Vec<f64>>, name: &str) -> Result<Vec<f64>> {
        match (list, scalar) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(s)) => Ok(vec![s; self.alphas.len()]),
            (None, None) => Err(Error::input(name, "missing")),
        }
    }

    fn scalar(&self, scalar: Option<f64>, list: &Option<Vec<f64>>, name: &str) -> Result<f64> {
        match (scalar, list) {
            (Some(s), _) => Ok(s),
            (None, Some(v)) if !v.is_empty() => Ok(v.iter().copied().fold(f64::INFINITY, f64::min)),
            _ => Err(Error::input(name, "missing")),
        }
    }
}

/// Evaluates the condition sets of the remarks and corollaries.
///
/// Conditions improve monotonically as `γ` decreases and `δ` increases, so the
/// existence of admissible exponents is decided exactly at the open-interval limits.
pub fn check_preset(preset: Preset, p: &PresetParams) -> Result<ConditionReport> {
    let (amin, amax) = check_alphas(&p.alphas)?;
    match preset {
        Preset::Z1 => {
            if p.alphas.iter().any(|a| *a != p.alphas[0]) {
                return Err(Error::input("alphas", "the Z1 preset needs equal indices"));
            }
            let a = p.alphas[0];
            let beta = p.scalar(p.beta, &p.betas, "beta")?;
            let chi = p.scalar(p.chi, &p.chis, "chi")?;
            let mut r = check_general(&p.alphas, a, a, beta, chi, p.zero_drift)?;
            r.theorem = Theorem::Z1Remark;
            Ok(r.with_note(format!("evaluated at the limits gamma = delta = {a}")))
        }
        Preset::Z2 => {
            let beta = p.scalar(p.beta, &p.betas, "beta")?;
            let chi = p.scalar(p.chi, &p.chis, "chi")?;
            let mut r = check_general(&p.alphas, amax, amin, beta, chi, p.zero_drift)?;
            r.theorem = Theorem::Z2RemarkA;
            Ok(r.with_note(format!("evaluated at the limits gamma = {amax}, delta = {amin}")))
        }
        Preset::Z2Diagonal => {
            let betas = p.per_component(p.beta, &p.betas, "betas")?;
            let chis = p.per_component(p.chi, &p.chis, "chis")?;
            let mut r = check_diagonal(&p.alphas, &p.alphas, &p.alphas, &betas, &chis, p.zero_drift)?;
            r.theorem = Theorem::Z2RemarkB;
            Ok(r.with_note("evaluated at the limits gamma_k = delta_k = alpha_k"))
        }
        Preset::EllipticNonDiagonal => {
            let chi = p.scalar(p.chi, &p.chis, "chi")?;
            in_open("chi", chi, 0.0, 1.0)?;
            let ineq = if amax >= 1.0 {
                let q = amin / amax;
                vec![Inequality::new("alpha_min/alpha_max", q, 1.0 / (1.0 + chi.min(q)))]
            } else {
                vec![Inequality::new("alpha_min", amin, 1.0 / (1.0 + chi))]
            };
            Ok(ConditionReport::new(Theorem::EllipticCorollary, ineq, p.zero_drift))
        }
        Preset::EllipticDiagonal => {
            let chis = p.per_component(p.chi, &p.chis, "chis")?;
            for c in &chis {
                in_open("chis", *c, 0.0, 1.0)?;
            }
            let ineq = if amax < 1.0 {
                let min_chi = chis.iter().copied().fold(f64::INFINITY, f64::min);
                vec![Inequality::new("alpha_min+min(chi)", amin + min_chi, 1.0)]
            } else {
                Vec::new()
            };
            Ok(ConditionReport::new(Theorem::EllipticDiagonalCorollary, ineq, p.zero_drift))
        }
    }
}

/// The two corollary presets; any other preset is rejected.
pub fn check_corollary_presets(preset: Preset, p: &PresetParams) -> Result<ConditionReport> {
    match preset {
        Preset::EllipticNonDiagonal | Preset::EllipticDiagonal => check_preset(preset, p),
        _ => Err(Error::input("preset", "expected an elliptic corollary preset")),
    }
}

/// `κ` for the general scheme or `κ_j` per component for the diagonal one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kappa {
    Scalar(f64),
    PerComponent(Vec<f64>),
}

impl Kappa {
    fn at(&self, j: usize) -> f64 {
        match self {
            Kappa::Scalar(k) => *k,
            Kappa::PerComponent(v) => v[j],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityPlan {
    pub eta: f64,
    pub c: Vec<f64>,
    pub lambda: f64,
    pub anisotropy: Anisotropy,
    pub kappa: Kappa,
}

/// `min_{i,j}{c_i (χ∧δ)/(max{1,γ} a_i), a_i − η − a_i c_i/α_i, η(c_i a_i κ_j/a_j − 1)}`.
pub fn lambda_value(
    a: &Anisotropy,
    alphas: &[f64],
    kappa: &Kappa,
    chi_delta: f64,
    gamma: f64,
    eta: f64,
    c: &[f64],
) -> f64 {
    let w = &a.weights;
    let mut lambda = f64::INFINITY;
    for i in 0..w.len() {
        lambda = lambda
            .min(c[i] * chi_delta / (gamma.max(1.0) * w[i]))
            .min(w[i] - eta - w[i] * c[i] / alphas[i]);
        for j in 0..w.len() {
            lambda = lambda.min(eta * (c[i] * w[i] * kappa.at(j) / w[j] - 1.0));
        }
    }
    lambda
}

/// `(max_j a_j/κ_j, η_max)`: `c_i` must exceed the first divided by `a_i`, and `η`
/// must lie in `(0, η_max]`.
fn lambda_ranges(
    a: &Anisotropy,
    alphas: &[f64],
    kappa: &Kappa,
    chi: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    let d = a.dim();
    if alphas.len() != d {
        return Err(Error::input("alphas", "length must match the anisotropy"));
    }
    if let Kappa::PerComponent(v) = kappa {
        if v.len() != d {
            return Err(Error::input("kappa", "length must match the anisotropy"));
        }
    }
    in_open("chi", chi, 0.0, 1.0)?;
    if !(delta > 0.0) {
        return Err(Error::input("delta", "must be positive"));
    }
    for j in 0..d {
        let k = kappa.at(j);
        if k * alphas[j] - 1.0 <= STRICT_MARGIN {
            return Err(Error::Infeasible(format!(
                "kappa*alpha_{j} = {} is not > 1",
                k * alphas[j]
            )));
        }
    }
    let w = &a.weights;
    let lower_num = (0..d).map(|j| w[j] / kappa.at(j)).fold(0.0, f64::max);
    let mut eta_max = 1.0f64;
    for i in 0..d {
        eta_max = eta_max
            .min(w[i] * 1f64.min(delta))
            .min(w[i] - lower_num / alphas[i]);
    }
    if eta_max <= 0.0 {
        return Err(Error::Infeasible("no admissible η".into()));
    }
    Ok((lower_num, eta_max))
}

#[allow(clippy::too_many_arguments)]
fn finish_plan(
    a: &Anisotropy,
    alphas: &[f64],
    kappa: &Kappa,
    chi: f64,
    delta: f64,
    gamma: f64,
    eta: f64,
    c: Vec<f64>,
) -> Result<RegularityPlan> {
    let lambda = lambda_value(a, alphas, kappa, chi.min(delta), gamma, eta, &c);
    if !(lambda > 0.0) {
        return Err(Error::Infeasible(format!("λ = {lambda} is not positive")));
    }
    Ok(RegularityPlan {
        eta,
        c,
        lambda,
        anisotropy: a.clone(),
        kappa: kappa.clone(),
    })
}

/// Fixes `η` at half its largest feasible value and each `c_i` at the midpoint of
/// its admissible interval, then evaluates λ.
pub fn derive_lambda(
    a: &Anisotropy,
    alphas: &[f64],
    kappa: &Kappa,
    chi: f64,
    delta: f64,
    gamma: f64,
) -> Result<RegularityPlan> {
    let (lower_num, eta_max) = lambda_ranges(a, alphas, kappa, chi, delta)?;
    let w = &a.weights;
    let eta = eta_max / 2.0;
    let c: Vec<f64> = (0..w.len())
        .map(|i| 0.5 * (lower_num / w[i] + alphas[i] * (1.0 - eta / w[i])))
        .collect();
    finish_plan(a, alphas, kappa, chi, delta, gamma, eta, c)
}

/// λ for a caller-chosen `η` and `c`, after checking both are admissible.
#[allow(clippy::too_many_arguments)]
pub fn derive_lambda_at(
    a: &Anisotropy,
    alphas: &[f64],
    kappa: &Kappa,
    chi: f64,
    delta: f64,
    gamma: f64,
    eta: f64,
    c: &[f64],
) -> Result<RegularityPlan> {
    let (lower_num, eta_max) = lambda_ranges(a, alphas, kappa, chi, delta)?;
    let w = &a.weights;
    if !(eta > 0.0 && eta <= eta_max) {
        return Err(Error::input("eta", format!("must lie in (0, {eta_max}]")));
    }
    if c.len() != w.len() {
        return Err(Error::input("c", "one entry per component"));
    }
    for i in 0..w.len() {
        let (lo, hi) = (lower_num / w[i], alphas[i] * (1.0 - eta / w[i]));
        if !(c[i] > lo && c[i] < hi) {
            return Err(Error::input(format!("c_{i}"), format!("must lie in ({lo}, {hi})")));
        }
    }
    finish_plan(a, alphas, kappa, chi, delta, gamma, eta, c.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::compute_anisotropy;
    use proptest::prelude::*;

    #[test]
    fn kappa_examples() {
        assert!((kappa_ge1(2.0, 1.0, 1.0, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!((kappa_ge1(1.0, 1.0, 0.0, 0.9).unwrap() - 1.0).abs() < 1e-15);
        assert!((kappa_lt1(0.5, 1.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((kappa_lt1(0.5, 1e-9, 0.5).unwrap() - 1.0).abs() < 1e-8);
        assert!((kappa_ge1(1.6, 1.4, 1.0, 0.9).unwrap() - 1.171875).abs() < 1e-15);
        assert!(kappa_ge1(0.9, 0.5, 0.5, 0.5).is_err());
        assert!(kappa_lt1(1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn kappa_diag_examples() {
        let k = kappa_diag(0, &[0.5, 1.5], 0.5, 1.5, 0.5, 0.5, 0.5).unwrap();
        assert!((k - 4.0 / 3.0).abs() < 1e-15);
        // d = 1 collapses to the general formulas
        let a = kappa_diag(0, &[1.4], 0.9, 1.4, 0.6, 0.3, 0.3).unwrap();
        assert!((a - kappa_ge1(1.4, 0.9, 0.6, 0.3).unwrap()).abs() < 1e-15);
        let b = kappa_diag(0, &[0.6], 0.5, 0.6, 0.7, 0.4, 0.4).unwrap();
        assert!((b - kappa_lt1(0.6, 0.7, 0.4).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn kappa_ge1_bounded_and_monotone(g in 1.0f64..=2.0, f in 0.01f64..=1.0, b in 0.0f64..=1.0, c in 0.01f64..0.98, dc in 0.0f64..0.01) {
            let delta = g * f;
            let k = kappa_ge1(g, delta, b, c).unwrap();
            prop_assert!(k <= 2.0 + 1e-15);
            prop_assert!(kappa_ge1(g, delta, b, c + dc).unwrap() >= k);
        }

        #[test]
        fn kappa_lt1_bounded(g in 0.01f64..0.99, b in 0.0f64..=1.0, c in 0.01f64..0.99) {
            let k = kappa_lt1(g, b, c).unwrap();
            prop_assert!(k <= 1.0 / (1.0 - b.min(c)) + 1e-12);
        }

        #[test]
        fn kappa_diag_monotone_in_chi(g1 in 0.1f64..2.0, g2 in 0.1f64..2.0, b in 0.0f64..=1.0, c in 0.01f64..0.98, dc in 0.0f64..0.01) {
            let gs = [g1, g2];
            let gamma = g1.max(g2);
            let rho = b.min(c).min(0.3);
            let k0 = kappa_diag(0, &gs, 0.1, gamma, b, c, rho).unwrap();
            let k1 = kappa_diag(0, &gs, 0.1, gamma, b, c + dc, rho).unwrap();
            prop_assert!(k1 >= k0);
        }
    }

    #[test]
    fn general_examples() {
        let r = check_general(&[1.5, 1.7], 1.6, 1.4, 1.0, 0.9, false).unwrap();
        assert_eq!(r.theorem, Theorem::GeneralGe1);
        assert!((r.inequalities[0].lhs - 2.4375).abs() < 1e-12);
        assert!((r.inequalities[1].lhs - 1.7578125).abs() < 1e-12);
        assert!(r.overall);
        let r = check_general(&[0.4], 0.5, 0.5, 0.3, 0.3, false).unwrap();
        assert_eq!(r.theorem, Theorem::GeneralLt1);
        assert!((r.inequalities[2].lhs - 0.7).abs() < 1e-12);
        assert!(!r.inequalities[2].satisfied && !r.overall);
    }

    #[test]
    fn zero_drift_drops_drift_terms() {
        let r = check_general(&[1.5], 1.6, 1.4, 1.0, 0.9, true).unwrap();
        assert_eq!(r.inequalities.len(), 1);
        let r = check_general(&[0.6], 0.7, 0.7, 0.0, 0.5, true).unwrap();
        assert_eq!(r.inequalities.len(), 2);
        assert!(r.overall);
        assert!(!check_general(&[0.6], 0.7, 0.7, 0.0, 0.5, false).unwrap().overall);
    }

    #[test]
    fn strict_margin_is_failure() {
        let i = Inequality::new("x", 1.0 + 1e-13, 1.0);
        assert!(!i.satisfied);
    }

    #[test]
    fn diagonal_single_component_reproduces_general() {
        for &(a, g, dl, b, c) in &[(1.5, 1.6, 1.4, 1.0, 0.9), (0.6, 0.7, 0.5, 0.8, 0.5), (0.4, 0.5, 0.5, 0.3, 0.3)] {
            for zd in [false, true] {
                let g1 = check_general(&[a], g, dl, b, c, zd).unwrap();
                let g2 = check_diagonal(&[a], &[g], &[dl], &[b], &[c], zd).unwrap();
                assert_eq!(g1.overall, g2.overall);
                let mut l1: Vec<f64> = g1.inequalities.iter().map(|i| i.lhs).collect();
                let mut l2: Vec<f64> = g2.inequalities.iter().map(|i| i.lhs).collect();
                l1.sort_by(f64::total_cmp);
                l2.sort_by(f64::total_cmp);
                if !zd || g >= 1.0 {
                    assert_eq!(l1.len(), l2.len());
                    for (x, y) in l1.iter().zip(&l2) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn z2_remark_arithmetic() {
        let p = PresetParams {
            alphas: vec![1.2, 1.5],
            beta: Some(1.0),
            chi: Some(0.8),
            ..Default::default()
        };
        let r = check_preset(Preset::Z2, &p).unwrap();
        assert!((r.inequalities[0].lhs - 2.0).abs() < 1e-12);
        assert!((r.inequalities[1].lhs - 1.44).abs() < 1e-12);
        assert!(r.overall);
        assert_eq!(r.theorem, Theorem::Z2RemarkA);
    }

    #[test]
    fn z2_remark_small_indices() {
        // α^max < 1: α^min/α^max + α^min χ > 1 and α^min + (α^min/α^max)(β∧χ) > 1
        let p = PresetParams { alphas: vec![0.7, 0.9], beta: Some(0.5), chi: Some(0.6), ..Default::default() };
        let r = check_preset(Preset::Z2, &p).unwrap();
        let (amin, amax) = (0.7, 0.9);
        let want = [amin + amin / amax * 0.5, amin / amax + amin * 0.6, amin + 0.5];
        for (i, w) in r.inequalities.iter().zip(want) {
            assert!((i.lhs - w).abs() < 1e-12);
        }
    }

    #[test]
    fn z2_diagonal_components_at_least_one_unrestricted() {
        for &b in &[0.01, 0.5, 1.0] {
            for &c in &[0.01, 0.5, 0.99] {
                let p = PresetParams { alphas: vec![1.1, 1.8], beta: Some(b), chi: Some(c), ..Default::default() };
                assert!(check_preset(Preset::Z2Diagonal, &p).unwrap().overall);
            }
        }
        let p = PresetParams { alphas: vec![0.5, 1.8], beta: Some(0.3), chi: Some(0.3), ..Default::default() };
        assert!(!check_preset(Preset::Z2Diagonal, &p).unwrap().overall);
    }

    #[test]
    fn elliptic_presets() {
        let p = PresetParams { alphas: vec![0.8, 0.9], chi: Some(0.5), ..Default::default() };
        let r = check_preset(Preset::EllipticNonDiagonal, &p).unwrap();
        assert!(r.overall);
        assert!((r.inequalities[0].rhs - 1.0 / 1.5).abs() < 1e-15);
        let p = PresetParams { alphas: vec![0.8, 0.9], chi: Some(1e-9), ..Default::default() };
        assert!(!check_preset(Preset::EllipticNonDiagonal, &p).unwrap().overall);
        let p = PresetParams { alphas: vec![0.5, 0.9], chis: Some(vec![0.6, 0.4]), ..Default::default() };
        let r = check_preset(Preset::EllipticDiagonal, &p).unwrap();
        assert!((r.inequalities[0].lhs - 0.9).abs() < 1e-15 && !r.overall);
        let p = PresetParams { alphas: vec![0.5, 1.2], chis: Some(vec![0.1, 0.1]), ..Default::default() };
        assert!(check_preset(Preset::EllipticDiagonal, &p).unwrap().inequalities.is_empty());
    }

    #[test]
    fn no_delta_diagonal_uses_min_gamma() {
        let r = check_no_delta_diagonal(&[1.5, 1.2], &[1.6, 1.3], &[1.0, 1.0], &[0.9, 0.9]).unwrap();
        // component 0: 1.5·(1/1.6 + min(0.9, 1.3/1.6)/1.6)
        let want = 1.5 * (1.0 / 1.6 + (1.3f64 / 1.6).min(0.9) / 1.6);
        assert!((r.inequalities[1].lhs - want).abs() < 1e-12);
    }

    #[test]
    fn worked_lambda() {
        let a = Anisotropy::isotropic(1);
        let l = lambda_value(&a, &[1.2], &Kappa::Scalar(1.0), 0.5, 1.5, 0.05, &[1.07]);
        assert!((l - 0.0035).abs() < 1e-12);
        let plan = derive_lambda_at(&a, &[1.2], &Kappa::Scalar(1.0), 0.5, 1.4, 1.5, 0.05, &[1.07]).unwrap();
        assert!((plan.lambda - 0.0035).abs() < 1e-12);
        assert!(derive_lambda_at(&a, &[1.2], &Kappa::Scalar(1.0), 0.5, 1.4, 1.5, 0.05, &[1.2]).is_err());
        assert!(derive_lambda_at(&a, &[1.2], &Kappa::Scalar(1.0), 0.5, 1.4, 1.5, 0.5, &[1.07]).is_err());
    }

    #[test]
    fn lambda_infeasible() {
        let a = Anisotropy::isotropic(1);
        let e = derive_lambda(&a, &[1.0], &Kappa::Scalar(1.0), 0.5, 1.0, 1.5).unwrap_err();
        assert!(matches!(e, Error::Infeasible(ref m) if m.contains("alpha_0")));
    }

    proptest! {
        #[test]
        fn derived_plan_is_admissible(
            alphas in proptest::collection::vec(0.3f64..1.95, 1..5),
            kboost in 0.05f64..1.0,
            chi in 0.05f64..0.95,
            delta in 0.05f64..2.0,
            gamma in 0.5f64..2.0,
        ) {
            let amin = alphas.iter().copied().fold(f64::INFINITY, f64::min);
            let kappa = 1.0 / amin + kboost;
            let a = compute_anisotropy(&alphas).unwrap();
            let plan = derive_lambda(&a, &alphas, &Kappa::Scalar(kappa), chi, delta, gamma).unwrap();
            prop_assert!(plan.lambda > 0.0);
            let w = &a.weights;
            for i in 0..w.len() {
                prop_assert!(plan.eta / w[i] < 1f64.min(delta));
                prop_assert!(plan.c[i] < alphas[i] * (1.0 - plan.eta / w[i]));
                for j in 0..w.len() {
                    prop_assert!(w[j] / kappa / w[i] < plan.c[i]);
                }
            }
            let again = lambda_value(&a, &alphas, &Kappa::Scalar(kappa), chi.min(delta), gamma, plan.eta, &plan.c);
            prop_assert_eq!(again, plan.lambda);
        }
    }
}
