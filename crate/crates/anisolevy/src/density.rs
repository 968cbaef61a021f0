//! Grid densities: characteristic-function inversion, anisotropic mollification,
//! shift differences and Besov/Hölder–Zygmund functionals.

use crate::error::{ensure_finite, Error, Result};
use crate::levy_models::Anisotropy;
use crate::sampling::{write_atomic, write_samples};
use crate::sde::SdeProblem;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

/// A uniform axis: nodes `origin + j·step`, `j = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(origin: f64, step: f64, count: usize) -> Result<Self> {
        ensure_finite("axis", &[origin, step])?;
        if !(step > 0.0) || count == 0 {
            return Err(Error::input("axis", "step must be positive and count nonzero"));
        }
        Ok(Axis { origin, step, count })
    }

    /// Symmetric axis `[-half_width, half_width]` with the given step.
    pub fn centered(half_width: f64, step: f64) -> Result<Self> {
        let n = (half_width / step).round() as usize;
        Axis::new(-(n as f64) * step, step, 2 * n + 1)
    }

    pub fn node(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.step
    }

    pub fn span(&self) -> f64 {
        (self.count - 1) as f64 * self.step
    }
}

/// Rectangular product grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::input("axes", "empty"));
        }
        Ok(Grid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step).product()
    }

    /// Offset between consecutive nodes along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.count).product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.axes[k].count;
            flat /= self.axes[k].count;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(j, a)| a.node(*j))
            .collect()
    }
}

/// A nonnegative function on a [`Grid`] with cached mass `Σ values·cellvolume`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub mass: f64,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::input("values", "length must match the grid"));
        }
        ensure_finite("values", &values)?;
        if values.iter().any(|v| *v < 0.0) {
            return Err(Error::input("values", "densities must be nonnegative"));
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        Ok(GridDensity { grid, values, mass })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// `Σ |self − other|·cellvolume` on a shared grid.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::input("grid", "densities live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    /// Writes values in the sample format (`n = nodes`, `d = 1`) and a JSON sidecar
    /// `<path>.json` with the axes.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_samples(path, 1, &self.values)?;
        let side = serde_json::json!({ "axes": self.grid.axes, "mass": self.mass });
        let mut p = path.as_os_str().to_owned();
        p.push(".json");
        write_atomic(Path::new(&p), serde_json::to_string_pretty(&side).unwrap().as_bytes())
    }

    /// One CSV row per node: coordinates then value.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for k in 0..self.dim() {
            let _ = write!(s, "x{k},");
        }
        s.push_str("value\n");
        for (i, v) in self.values.iter().enumerate() {
            for x in self.grid.point(i) {
                let _ = write!(s, "{x:.12e},");
            }
            let _ = writeln!(s, "{v:.12e}");
        }
        s
    }
}

/// Points with nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEnsemble {
    /// `n × d`.
    pub points: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl WeightedEnsemble {
    pub fn new(points: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != points.nrows() {
            return Err(Error::input("weights", "one weight per point"));
        }
        ensure_finite("weights", &weights)?;
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::input("weights", "must be nonnegative"));
        }
        Ok(WeightedEnsemble { points, weights })
    }

    /// Equal weights `1/n`.
    pub fn uniform(points: DMatrix<f64>) -> Self {
        let n = points.nrows();
        WeightedEnsemble {
            points,
            weights: vec![1.0 / n.max(1) as f64; n],
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `|x|_a = max_i |x_i|^{1/a_i}`.
pub fn aniso_norm(x: &[f64], a: &Anisotropy) -> f64 {
    x.iter()
        .zip(&a.weights)
        .map(|(xi, ai)| xi.abs().powf(1.0 / ai))
        .fold(0.0, f64::max)
}

struct Segment {
    lo: usize,
    hi: usize,
    value: f64,
}

/// Per-axis overlap fractions of `[c − w, c + w]` with the cells centred at nodes.
fn overlap_segments(axis: &Axis, c: f64, w: f64) -> Vec<Segment> {
    let s = axis.step;
    // cell j covers [o + (j − ½)s, o + (j + ½)s]
    let left = (c - w - axis.origin) / s + 0.5;
    let right = (c + w - axis.origin) / s + 0.5;
    let n = axis.count as f64;
    let l = left.max(0.0);
    let r = right.min(n);
    if r <= l {
        return Vec::new();
    }
    let jl = l.floor() as usize;
    let jr = (r.ceil() as usize).saturating_sub(1).min(axis.count - 1);
    if jl == jr {
        return vec![Segment { lo: jl, hi: jl, value: r - l }];
    }
    let mut out = vec![Segment { lo: jl, hi: jl, value: (jl + 1) as f64 - l }];
    if jr > jl + 1 {
        out.push(Segment { lo: jl + 1, hi: jr - 1, value: 1.0 });
    }
    out.push(Segment { lo: jr, hi: jr, value: r - jr as f64 });
    out
}

/// Convolves the weighted empirical measure with `φ_r = (2r)^{−d} 1_{|x|_a < r}` and
/// returns cell averages on `grid`, so mass is conserved up to leakage off the grid.
pub fn mollify(ensemble: &WeightedEnsemble, r: f64, a: &Anisotropy, grid: &Grid) -> Result<GridDensity> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::input("r", "must lie in (0,1]"));
    }
    let d = grid.dim();
    if a.dim() != d || ensemble.points.ncols() != d {
        return Err(Error::input("grid", "dimension mismatch"));
    }
    let half: Vec<f64> = a.weights.iter().map(|ai| r.powf(*ai)).collect();
    for (k, ax) in grid.axes.iter().enumerate() {
        if 2.0 * half[k] / ax.step < 3.0 {
            return Err(Error::Resolution(format!(
                "axis {k}: window 2r^a = {:.3e} spans fewer than 3 cells of {:.3e}",
                2.0 * half[k],
                ax.step
            )));
        }
    }
    // d-dimensional difference array with one extra slot per axis
    let ext: Vec<usize> = grid.axes.iter().map(|ax| ax.count + 1).collect();
    let mut ext_stride = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        ext_stride[k] = ext_stride[k + 1] * ext[k + 1];
    }
    let mut diff = vec![0.0; ext.iter().product()];
    let norm = (2.0 * r).powi(d as i32).recip();
    let mut segs: Vec<Vec<Segment>> = Vec::with_capacity(d);
    for (i, &w) in ensemble.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        segs.clear();
        for k in 0..d {
            segs.push(overlap_segments(&grid.axes[k], ensemble.points[(i, k)], half[k]));
        }
        if segs.iter().any(|s| s.is_empty()) {
            continue;
        }
        let mut choice = vec![0usize; d];
        loop {
            let mut val = w * norm;
            for k in 0..d {
                val *= segs[k][choice[k]].value;
            }
            for corner in 0..(1usize << d) {
                let mut off = 0;
                let mut sign = 1.0;
                for k in 0..d {
                    let sg = &segs[k][choice[k]];
                    if corner >> k & 1 == 1 {
                        off += (sg.hi + 1) * ext_stride[k];
                        sign = -sign;
                    } else {
                        off += sg.lo * ext_stride[k];
                    }
                }
                diff[off] += sign * val;
            }
            let mut k = 0;
            loop {
                if k == d {
                    break;
                }
                choice[k] += 1;
                if choice[k] < segs[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
    }
    for k in 0..d {
        let st = ext_stride[k];
        for idx in 0..diff.len() {
            if (idx / st) % ext[k] != 0 {
                diff[idx] += diff[idx - st];
            }
        }
    }
    let mut values = vec![0.0; grid.len()];
    for (flat, v) in values.iter_mut().enumerate() {
        let mi = grid.multi_index(flat);
        let off: usize = mi.iter().zip(&ext_stride).map(|(j, s)| j * s).sum();
        *v = diff[off];
    }
    // prefix sums leave roundoff residue where the true value is zero
    let floor = 1e-12 * values.iter().copied().fold(0.0, f64::max);
    for v in values.iter_mut() {
        if *v < floor {
            *v = 0.0;
        }
    }
    GridDensity::new(grid.clone(), values)
}

/// Nodes per unit frequency threshold: `t(π/Δ)^α` must exceed this.
const FREQ_DECAY: f64 = 40.0;

/// Density of the symmetric law with characteristic function `exp(−t|ξ|^α)` on `axis`,
/// by discrete Fourier inversion on a periodic grid that contains `axis`.
pub fn stable_density_1d(alpha: f64, t: f64, axis: Axis) -> Result<GridDensity> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::input("alpha", format!("{alpha} outside (0,2]")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::input("t", "must be positive"));
    }
    let axis = Axis::new(axis.origin, axis.step, axis.count)?;
    let mut refine = 1usize;
    while t * (PI * refine as f64 / axis.step).powf(alpha) < FREQ_DECAY {
        refine *= 2;
        if refine > 1 << 14 {
            return Err(Error::Resolution("grid step too coarse for the frequency tail".into()));
        }
    }
    let dx = axis.step / refine as f64;
    let window_nodes = (axis.count - 1) * refine + 1;
    let min_period = (40.0 * t.powf(1.0 / alpha)).max(2.0 * axis.span() + axis.step);
    let mut n = (1usize << 14).max((min_period / dx).ceil() as usize).next_power_of_two();
    n = n.max(window_nodes.next_power_of_two());
    let mut planner = FftPlanner::new();
    let mut prev = invert_periodic(&mut planner, alpha, t, axis, refine, dx, n);
    loop {
        n *= 2;
        if n > 1 << 26 {
            return Err(Error::Truncation("periodization did not converge within 2^26 nodes".into()));
        }
        let next = invert_periodic(&mut planner, alpha, t, axis, refine, dx, n);
        let change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = next;
        if change < 1e-7 {
            break;
        }
    }
    let mut values = prev;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v > -1e-12 {
                *v = 0.0;
            } else {
                return Err(Error::Numeric {
                    reason: "negative density beyond roundoff".into(),
                    partial: *v,
                });
            }
        }
    }
    let g = GridDensity::new(Grid::new(vec![axis])?, values)?;
    if 1.0 - g.mass > 1e-3 {
        return Err(Error::Truncation(format!(
            "grid span misses mass {:.3e}; widen the grid",
            1.0 - g.mass
        )));
    }
    Ok(g)
}

fn invert_periodic(
    planner: &mut FftPlanner<f64>,
    alpha: f64,
    t: f64,
    axis: Axis,
    refine: usize,
    dx: f64,
    n: usize,
) -> Vec<f64> {
    let period = n as f64 * dx;
    let x0 = axis.origin;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let xi = 2.0 * PI * kk / period;
            let amp = (-t * xi.abs().powf(alpha)).exp() / period;
            let (s, c) = (xi * x0).sin_cos();
            Complex64::new(amp * c, -amp * s)
        })
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    (0..axis.count).map(|j| buf[j * refine].re).collect()
}

/// Tensor product of densities; axes are concatenated in order.
pub fn product_density(factors: &[GridDensity]) -> Result<GridDensity> {
    if factors.is_empty() {
        return Err(Error::input("factors", "empty"));
    }
    let mut axes = Vec::new();
    let mut values = vec![1.0];
    for f in factors {
        axes.extend(f.grid.axes.iter().copied());
        let mut next = Vec::with_capacity(values.len() * f.values.len());
        for a in &values {
            for b in &f.values {
                next.push(a * b);
            }
        }
        values = next;
    }
    GridDensity::new(Grid::new(axes)?, values)
}

/// Density of `ComponentStable(alphas)` at time `t` on a product grid.
pub fn component_stable_density(alphas: &[f64], t: f64, axes: &[Axis]) -> Result<GridDensity> {
    if alphas.len() != axes.len() {
        return Err(Error::input("axes", "one axis per component"));
    }
    let factors = alphas
        .iter()
        .zip(axes)
        .map(|(a, ax)| stable_density_1d(*a, t, *ax))
        .collect::<Result<Vec<_>>>()?;
    product_density(&factors)
}

/// Applies `f` to each line of `grid` along `axis`, accumulating the results.
fn fold_lines<F: FnMut(&[f64]) -> f64>(grid: &Grid, values: &[f64], axis: usize, mut f: F) -> Vec<f64> {
    let n = grid.axes[axis].count;
    let stride = grid.stride(axis);
    let outer = values.len() / (n * stride);
    let mut line = vec![0.0; n];
    let mut out = Vec::with_capacity(outer * stride);
    for o in 0..outer {
        for i in 0..stride {
            let base = o * n * stride + i;
            for (j, l) in line.iter_mut().enumerate() {
                *l = values[base + j * stride];
            }
            out.push(f(&line));
        }
    }
    out
}

/// `Σ_x |f(x + h/step) − f(x)|` for one line with zero extension, in node units.
fn line_shift_l1(line: &[f64], q: f64) -> f64 {
    let n = line.len() as i64;
    let p = q.floor() as i64;
    let th = q - p as f64;
    let at = |i: i64| if i >= 0 && i < n { line[i as usize] } else { 0.0 };
    let lo = (-p - 1).min(0);
    let hi = (n - p).max(n);
    (lo..hi)
        .map(|i| ((1.0 - th) * at(i + p) + th * at(i + p + 1) - at(i)).abs())
        .sum()
}

/// `‖Δ_{h e_k} f‖_{L¹}` with linear interpolation and zero extension.
pub fn l1_shift_difference(f: &GridDensity, axis: usize, h: f64) -> Result<f64> {
    if axis >= f.dim() {
        return Err(Error::input("axis", "out of range"));
    }
    let ax = f.grid.axes[axis];
    if !h.is_finite() || h.abs() > ax.span() {
        return Err(Error::input("h", "shift exceeds the grid span"));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let q = h / ax.step;
    let sums = fold_lines(&f.grid, &f.values, axis, |line| line_shift_l1(line, q));
    Ok(sums.iter().sum::<f64>() * f.grid.cell_volume())
}

/// Default geometric shift magnitudes `2^{−20}, …, 2^0`.
pub fn default_h_grid() -> Vec<f64> {
    (0..=20).rev().map(|k| 2f64.powi(-k)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    /// `sup_h |h|^{−λ/a_k} ‖Δ_{he_k} f‖` per axis.
    pub axis_terms: Vec<f64>,
    /// Signed maximizing shift per axis.
    pub argmax_h: Vec<f64>,
}

fn check_orders(lambda: f64, a: &Anisotropy, d: usize) -> Result<()> {
    if a.dim() != d {
        return Err(Error::input("anisotropy", "dimension mismatch"));
    }
    for ak in &a.weights {
        let r = lambda / ak;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::input("lambda", format!("λ/a_k = {r} outside (0,1)")));
        }
    }
    Ok(())
}

fn shift_sup<F: FnMut(f64) -> Result<f64>>(order: f64, hs: &[f64], limit: f64, mut diff: F) -> Result<(f64, f64)> {
    let mut best = (0.0, 0.0);
    let mut any = false;
    for &m in hs {
        if !(m > 0.0 && m <= 1.0) || m > limit {
            continue;
        }
        for h in [m, -m] {
            any = true;
            let v = m.powf(-order) * diff(h)?;
            if v > best.0 {
                best = (v, h);
            }
        }
    }
    if !any {
        return Err(Error::input("h_grid", "no usable shift in (0,1] within the grid span"));
    }
    Ok(best)
}

/// `‖f‖_{L¹} + Σ_k max_{h} |h|^{−λ/a_k} ‖Δ_{he_k} f‖_{L¹}` over `±h_grid`.
pub fn besov_norm(f: &GridDensity, lambda: f64, a: &Anisotropy, h_grid: &[f64]) -> Result<NormReport> {
    let caps: Vec<f64> = f.grid.axes.iter().map(|ax| ax.span()).collect();
    besov_norm_capped(f, lambda, a, h_grid, &caps)
}

/// [`besov_norm`] with shifts on axis `k` restricted to `|h| ≤ caps[k]`.
pub fn besov_norm_capped(f: &GridDensity, lambda: f64, a: &Anisotropy, h_grid: &[f64], caps: &[f64]) -> Result<NormReport> {
    if h_grid.is_empty() {
        return Err(Error::input("h_grid", "empty"));
    }
    if caps.len() != f.dim() {
        return Err(Error::input("caps", "one cap per axis"));
    }
    check_orders(lambda, a, f.dim())?;
    let mut value = f.mass;
    let mut axis_terms = Vec::new();
    let mut argmax_h = Vec::new();
    for k in 0..f.dim() {
        let limit = caps[k].min(f.grid.axes[k].span());
        let (v, h) = shift_sup(lambda / a.weights[k], h_grid, limit, |h| {
            l1_shift_difference(f, k, h)
        })?;
        value += v;
        axis_terms.push(v);
        argmax_h.push(h);
    }
    Ok(NormReport { value, axis_terms, argmax_h })
}

fn line_shift_sup(line: &[f64], q: f64) -> f64 {
    let n = line.len() as i64;
    let p = q.floor() as i64;
    let th = q - p as f64;
    let mut best = 0.0f64;
    for i in 0..n {
        let (j0, j1) = (i + p, i + p + 1);
        let shifted = if th == 0.0 {
            if j0 < 0 || j0 >= n {
                continue;
            }
            line[j0 as usize]
        } else {
            if j0 < 0 || j1 >= n {
                continue;
            }
            (1.0 - th) * line[j0 as usize] + th * line[j1 as usize]
        };
        best = best.max((shifted - line[i as usize]).abs());
    }
    best
}

/// `‖φ‖_∞ + Σ_k max_h |h|^{−η/a_k} ‖Δ_{he_k} φ‖_∞`, differences taken where both
/// points lie on the grid.
pub fn holder_zygmund_norm(grid: &Grid, phi: &[f64], eta: f64, a: &Anisotropy, h_grid: &[f64]) -> Result<NormReport> {
    if phi.len() != grid.len() {
        return Err(Error::input("phi", "length must match the grid"));
    }
    ensure_finite("phi", phi)?;
    if h_grid.is_empty() {
        return Err(Error::input("h_grid", "empty"));
    }
    check_orders(eta, a, grid.dim())?;
    let mut value = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut axis_terms = Vec::new();
    let mut argmax_h = Vec::new();
    for k in 0..grid.dim() {
        let step = grid.axes[k].step;
        let (v, h) = shift_sup(eta / a.weights[k], h_grid, grid.axes[k].span(), |h| {
            let sups = fold_lines(grid, phi, k, |line| line_shift_sup(line, h / step));
            Ok(sups.iter().copied().fold(0.0, f64::max))
        })?;
        value += v;
        axis_terms.push(v);
        argmax_h.push(h);
    }
    Ok(NormReport { value, axis_terms, argmax_h })
}

/// Weights `1/|σ(x_i)^{−1}|`, i.e. the smallest singular value of `σ(x_i)`; zero when
/// `σ(x_i)` is singular.
pub fn weighted_endpoint_measure(points: DMatrix<f64>, problem: &SdeProblem) -> Result<WeightedEnsemble> {
    let d = problem.dim();
    if points.ncols() != d {
        return Err(Error::input("points", "column count must equal the dimension"));
    }
    let mut weights = Vec::with_capacity(points.nrows());
    for i in 0..points.nrows() {
        let x: Vec<f64> = points.row(i).iter().copied().collect();
        let s = DMatrix::from_row_slice(d, d, &problem.sigma_at(&x));
        let sv = s.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        weights.push(if smin <= f64::EPSILON * smax.max(f64::MIN_POSITIVE) * d as f64 { 0.0 } else { smin });
    }
    WeightedEnsemble::new(points, weights)
}
