//! Quadrature and special-function helpers shared by the model and density code.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Absolute and relative tolerance used for non-closed-form integrals.
pub const QUAD_ABS_TOL: f64 = 1e-10;
pub const QUAD_REL_TOL: f64 = 1e-8;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration on a finite interval.
///
/// The Gauss/Kronrod difference on every panel serves as the error check; the
/// interval is bisected until the summed estimate meets `abs_tol` or
/// `rel_tol·|value|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..4000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
    let total: f64 = panels.iter().map(|p| p.2).sum();
    Err(Error::Numeric {
        reason: "adaptive quadrature did not reach tolerance".into(),
        partial: total,
    })
}

/// Integrates over `[a, b]` in chunks of length `chunk`; used for oscillatory integrands.
pub fn integrate_chunked<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, chunk: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (lo + chunk).min(b);
        acc += integrate(&f, lo, hi, QUAD_ABS_TOL * 1e-2, QUAD_REL_TOL)?;
        lo = hi;
    }
    Ok(acc)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// `∫_0^∞ (1 − cos u) u^{−1−α} du` for `α ∈ (0,2)`.
#[cfg(test)]
pub fn one_minus_cos_full(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        PI / 2.0
    } else {
        gamma(1.0 - alpha) * (PI * alpha / 2.0).cos() / alpha
    }
}

/// `∫_X^∞ e^{iu} u^{−s} du` by its asymptotic expansion, valid for large `X`.
/// Returns `(cosine part, sine part)`.
fn oscillatory_tail(x: f64, s: f64) -> (f64, f64) {
    // term_k = i (−i)^k (s)_k X^{−s−k} e^{iX}
    let (sx, cx) = x.sin_cos();
    let mut re = 0.0;
    let mut im = 0.0;
    let mut rising = 1.0;
    // i·(−i)^k cycles through i, 1, −i, −1
    for k in 0..12 {
        let mag = rising * x.powf(-s - k as f64);
        let (pr, pi) = match k % 4 {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
        // (pr + i pi)(cx + i sx)
        re += mag * (pr * cx - pi * sx);
        im += mag * (pr * sx + pi * cx);
        rising *= s + k as f64;
    }
    (re, im)
}

const OSC_SPLIT: f64 = 64.0 * PI;

/// `∫_1^X trig(u) u^{−s} du` where `trig` is cos (`sine=false`) or sin.
fn trig_power_integral(x: f64, s: f64, sine: bool) -> Result<f64> {
    let f = |u: f64| if sine { u.sin() } else { u.cos() } * u.powf(-s);
    if x <= OSC_SPLIT {
        return integrate_chunked(f, 1.0, x, PI);
    }
    let head = integrate_chunked(f, 1.0, OSC_SPLIT, PI)?;
    let (c_lo, s_lo) = oscillatory_tail(OSC_SPLIT, s);
    let (c_hi, s_hi) = oscillatory_tail(x, s);
    Ok(if sine {
        head + s_lo - s_hi
    } else {
        head + c_lo - c_hi
    })
}

fn power_integral_from_one(x: f64, p: f64) -> f64 {
    // ∫_1^x u^{−p} du
    if (p - 1.0).abs() < 1e-14 {
        x.ln()
    } else {
        (x.powf(1.0 - p) - 1.0) / (1.0 - p)
    }
}

/// `∫_0^X (1 − cos u) u^{−1−α} du` for `X ≥ 0`, `α ∈ (0,2)`.
pub fn one_minus_cos_partial(alpha: f64, x: f64) -> Result<f64> {
    let head_limit = x.min(1.0);
    let mut series = 0.0;
    let mut fact = 1.0;
    for m in 1..30 {
        let k = 2 * m;
        fact *= ((k - 1) * k) as f64;
        let term = head_limit.powf(k as f64 - alpha) / (fact * (k as f64 - alpha));
        series += if m % 2 == 1 { term } else { -term };
        if term < 1e-18 * series.abs() {
            break;
        }
    }
    if x <= 1.0 {
        return Ok(series);
    }
    let s = 1.0 + alpha;
    Ok(series + power_integral_from_one(x, s) - trig_power_integral(x, s, false)?)
}

/// `∫_0^X (u − sin u) u^{−1−α} du` for `X ≥ 0`, `α ∈ (0,2)`.
pub fn u_minus_sin_partial(alpha: f64, x: f64) -> Result<f64> {
    let head_limit = x.min(1.0);
    let mut series = 0.0;
    let mut fact = 1.0;
    for m in 1..30 {
        let k = 2 * m + 1;
        fact *= ((k - 1) * k) as f64;
        let term = head_limit.powf(k as f64 - alpha) / (fact * (k as f64 - alpha));
        series += if m % 2 == 1 { term } else { -term };
        if term < 1e-18 * series.abs() {
            break;
        }
    }
    if x <= 1.0 {
        return Ok(series);
    }
    Ok(series + power_integral_from_one(x, alpha) - trig_power_integral(x, 1.0 + alpha, true)?)
}

/// Tail sum `Σ_{n>M} n^{−p}` for `p > 1` via Euler–Maclaurin.
pub fn power_tail_sum(m: f64, p: f64) -> f64 {
    m.powf(1.0 - p) / (p - 1.0) - 0.5 * m.powf(-p) + p * m.powf(-p - 1.0) / 12.0
        - p * (p + 1.0) * (p + 2.0) * m.powf(-p - 3.0) / 720.0
}

/// Riemann zeta for real `s > 1`.
pub fn zeta(s: f64) -> f64 {
    let n = 64usize;
    let head: f64 = (1..=n).map(|k| (k as f64).powf(-s)).sum();
    head + power_tail_sum(n as f64, s)
}

/// Unit sphere surface area in `R^m`.
pub fn sphere_area(m: usize) -> f64 {
    let m = m as f64;
    2.0 * PI.powf(m / 2.0) / gamma(m / 2.0)
}

/// `∫_{S^{m−1}} |θ_1|^p dθ`.
pub fn sphere_coordinate_moment(m: usize, p: f64) -> f64 {
    let mf = m as f64;
    2.0 * PI.powf((mf - 1.0) / 2.0) * gamma((p + 1.0) / 2.0) / gamma((mf + p) / 2.0)
}

/// Lévy density constant of the rotationally symmetric α-stable law on `R^m` whose
/// symbol is `|ξ|^α`: `ν(dz) = c |z|^{−m−α} dz`.
pub fn stable_levy_constant(m: usize, alpha: f64) -> f64 {
    let mf = m as f64;
    alpha * 2f64.powf(alpha - 1.0) * gamma((mf + alpha) / 2.0)
        / (PI.powf(mf / 2.0) * gamma(1.0 - alpha / 2.0))
}

/// Ordinary least squares of `y` on `x`, returning `(slope, intercept, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
