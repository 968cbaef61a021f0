//! Euler endpoint of a two-dimensional SDE and a single one-step approximation.

use anisolevy::levy_models::LevyModel;
use anisolevy::sampling::{IncrementPlan, RngStream};
use anisolevy::sde::{one_step_ge1, simulate_endpoint, CoefficientFamily, CoefficientSpec, Diffusion, SdeProblem};

fn main() -> anisolevy::Result<()> {
    let bump = |axis| CoefficientSpec {
        family: CoefficientFamily::HolderBump { center: 0.0, amplitude: 0.5, exponent: 0.9, cap: 1.0, base: 1.0, axis },
        declared_exponent: 0.9,
    };
    let problem = SdeProblem {
        drift: vec![CoefficientSpec::constant(0.5, 1.0), CoefficientSpec::constant(-0.2, 1.0)],
        diffusion: Diffusion::Full(vec![
            vec![bump(0), CoefficientSpec::constant(0.3, 0.9)],
            vec![CoefficientSpec::constant(0.3, 0.9), bump(1)],
        ]),
        model: LevyModel::ComponentStable { alphas: vec![1.5, 1.5] },
        x0: vec![0.0, 0.0],
    };
    problem.validate()?;
    let mut rng = RngStream::new(1, 0);
    for steps in [1, 16, 256] {
        let x = simulate_endpoint(&problem, 0.25, steps, &mut rng)?;
        println!("endpoint at t=0.25 with {steps:>3} steps: [{:.4}, {:.4}]", x[0], x[1]);
    }
    let plan = IncrementPlan::new(&problem.model)?;
    let eps = 1.0 / 64.0;
    let inc = plan.sample_increment(eps, &mut rng);
    let step = one_step_ge1(&problem, 0.25, eps, &problem.x0, &inc)?;
    println!("one step over eps={eps}: u = {:?}, x = {:?}", step.u_eps, step.x_eps);
    Ok(())
}
