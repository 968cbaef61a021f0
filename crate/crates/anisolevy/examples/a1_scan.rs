//! Scaling scan of t^{1/α}‖f_t(·+h) − f_t‖₁/|h| for exact stable densities.

use anisolevy::experiments::{a1_scaling_experiment, A1Config};
use anisolevy::levy_models::LevyModel;

fn main() -> anisolevy::Result<()> {
    for alpha in [1.0, 1.5] {
        let cfg = A1Config {
            axis: 0,
            h_grid: vec![1e-2, 1e-3],
            t_grid: vec![0.5, 0.2, 0.1, 0.05],
            tail_mass: 5e-4,
            tolerance: 0.05,
        };
        let rep = a1_scaling_experiment(&LevyModel::ComponentStable { alphas: vec![alpha] }, &cfg)?;
        println!("alpha = {alpha}: pass = {}", rep.pass);
        for s in &rep.series {
            for r in &s.rows {
                println!("  {:<12} t={:<6} {:.5}", s.label, r.grid, r.estimate);
            }
        }
    }
    Ok(())
}
