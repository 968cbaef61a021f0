//! Fractional moments of stochastic integrals over shrinking windows.

use anisolevy::experiments::{dyadic_grid, moment_bound_experiment, Integrand, MomentConfig, MomentVariant};
use anisolevy::levy_models::LevyModel;

fn main() -> anisolevy::Result<()> {
    let runs = [
        (0.6, Integrand::Constant { value: 1.0 }, MomentVariant::Integral),
        (1.5, Integrand::Cosine { amplitude: 2.0, sub_steps: 8 }, MomentVariant::Integral),
    ];
    for (alpha, integrand, variant) in runs {
        let cfg = MomentConfig {
            integrand,
            eta: alpha / 2.0,
            gamma: (alpha + 0.3).min(2.0),
            delta: alpha * 0.8,
            windows: dyadic_grid(-8, 0),
            replicas: 20_000,
            batch: 2_000,
            variant,
            tolerance: 0.1,
            self_similar_tolerance: 0.05,
        };
        let rep = moment_bound_experiment(&LevyModel::ComponentStable { alphas: vec![alpha] }, &cfg, 5)?;
        println!("alpha = {alpha}, pass = {}", rep.pass);
        for c in &rep.checks {
            println!("  {} = {:.4} (target {:.4})", c.name, c.measured, c.target);
        }
    }
    Ok(())
}
