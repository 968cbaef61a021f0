//! Stable densities by FFT inversion against the closed forms, and a mollified
//! sample histogram.

use anisolevy::density::{mollify, stable_density_1d, Axis, Grid, WeightedEnsemble};
use anisolevy::levy_models::Anisotropy;
use anisolevy::sampling::{sample_sym_stable, RngStream};
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn main() -> anisolevy::Result<()> {
    let ax = Axis::centered(700.0, 0.05)?;
    let cauchy = stable_density_1d(1.0, 1.0, ax)?;
    let gauss = stable_density_1d(2.0, 1.0, ax)?;
    let mid = ax.count / 2;
    println!("Cauchy p(0) = {:.10} (1/pi = {:.10})", cauchy.values[mid], 1.0 / PI);
    println!("Gaussian p(0) = {:.10} (1/sqrt(4 pi) = {:.10})", gauss.values[mid], 1.0 / (4.0 * PI).sqrt());
    let heavy = stable_density_1d(0.7, 1.0, Axis::centered(13_000.0, 0.05)?)?;
    println!("alpha=0.7 mass on window: {:.6}", heavy.mass);

    let n = 200_000;
    let xs = sample_sym_stable(1.0, 1.0, n, &mut RngStream::new(3, 0))?;
    let grid_ax = Axis::centered(50.0, 0.02)?;
    let f = mollify(
        &WeightedEnsemble::uniform(DMatrix::from_column_slice(n, 1, &xs)),
        0.05,
        &Anisotropy::isotropic(1),
        &Grid::new(vec![grid_ax])?,
    )?;
    let exact = stable_density_1d(1.0, 1.0, grid_ax).ok();
    let mid = grid_ax.count / 2;
    println!("mollified sample density at 0: {:.4}, mass on grid {:.4}", f.values[mid], f.mass);
    if let Some(e) = exact {
        println!("exact on the same grid at 0: {:.4}", e.values[mid]);
    }
    Ok(())
}
