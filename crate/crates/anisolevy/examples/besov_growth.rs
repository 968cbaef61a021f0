//! Growth of the anisotropic Besov norm of the endpoint density as t → 0.

use anisolevy::experiments::{besov_growth_experiment, BesovConfig};
use anisolevy::levy_models::LevyModel;
use anisolevy::sde::{CoefficientSpec, Diffusion, SdeProblem};

fn main() -> anisolevy::Result<()> {
    let problem = SdeProblem {
        drift: vec![CoefficientSpec::constant(0.0, 1.0); 2],
        diffusion: Diffusion::Diagonal(vec![CoefficientSpec::constant(1.0, 0.5); 2]),
        model: LevyModel::ComponentStable { alphas: vec![1.0, 1.5] },
        x0: vec![0.0, 0.0],
    };
    let cfg = BesovConfig {
        lambda: Some(0.5),
        gamma: None,
        delta: None,
        t_grid: vec![1.0, 0.25, 0.0625, 0.015625],
        replicas: 200_000,
        batch: 20_000,
        steps: 1,
        h_grid: None,
        tolerance: 0.1,
        exact_tolerance: 0.1,
    };
    let rep = besov_growth_experiment(&problem, &cfg, 3)?;
    for c in &rep.checks {
        println!("{:<5} {} = {:.4} (target {:.4})", if c.pass { "ok" } else { "FAIL" }, c.name, c.measured, c.target);
    }
    let out = std::env::temp_dir().join("anisolevy_besov");
    rep.write(&out, "besov")?;
    println!("csv, json and svg written to {}", out.display());
    Ok(())
}
