//! Strong error of the one-step scheme against a fine-grid reference, fitted
//! against the window length.

use anisolevy::experiments::{dyadic_grid, one_step_rate_experiment, RateConfig, SchemeKind};
use anisolevy::levy_models::LevyModel;
use anisolevy::sde::{CoefficientFamily, CoefficientSpec, Diffusion, FineGrid, SdeProblem};

fn main() -> anisolevy::Result<()> {
    let drift = |axis| CoefficientSpec {
        family: CoefficientFamily::AffineClamped { c0: 0.5, c1: -1.0, clamp: 1.0, axis },
        declared_exponent: 1.0,
    };
    let bump = |axis| CoefficientSpec {
        family: CoefficientFamily::HolderBump { center: 0.0, amplitude: 0.5, exponent: 0.9, cap: 1.0, base: 1.0, axis },
        declared_exponent: 0.9,
    };
    let problem = SdeProblem {
        drift: vec![drift(0), drift(1)],
        diffusion: Diffusion::Full(vec![
            vec![bump(0), CoefficientSpec::constant(0.3, 0.9)],
            vec![CoefficientSpec::constant(0.3, 0.9), bump(1)],
        ]),
        model: LevyModel::ComponentStable { alphas: vec![1.5, 1.5] },
        x0: vec![0.0, 0.0],
    };
    let cfg = RateConfig {
        scheme: SchemeKind::Ge1,
        gamma: Some(1.6),
        gammas: None,
        delta: Some(1.4),
        deltas: None,
        eta: None,
        eps_grid: dyadic_grid(-8, -4),
        replicas: 10_000,
        batch: 1_000,
        t: 0.25,
        fine: FineGrid::default(),
        tolerance: 0.1,
    };
    let rep = one_step_rate_experiment(&problem, &cfg, 11)?;
    println!("{}", rep.summary_json());
    Ok(())
}
