//! Symbols, anisotropy weights and moment integrals of a few noise models.

use anisolevy::levy_models::{compute_anisotropy, moment_integrals, smoothing_scale, sup_real_symbol, symbol_eval, LevyModel};

fn main() -> anisolevy::Result<()> {
    let models = [
        LevyModel::ComponentStable { alphas: vec![0.8, 1.6] },
        LevyModel::IsotropicStable { alpha: 1.2, dim: 2 },
    ];
    for model in &models {
        model.validate()?;
        println!("{model:?}");
        for xi in [[1.0, 0.0], [0.0, 1.0], [3.0, -2.0]] {
            let psi = symbol_eval(model, &xi)?;
            println!("  psi({xi:?}) = {:.6} {:+.6}i", psi.re, psi.im);
        }
        let a = compute_anisotropy(&model.stability_indices())?;
        println!("  mean index {:.4}, weights {:?}", a.mean_alpha, a.weights);
        println!("  sup Re(psi)/|xi|^eta at eta=0.5: {:.4}", sup_real_symbol(model, 0.5)?);
        println!("  smoothing scale at t=0.1: {:.4}", smoothing_scale(model, 0.1)?);
        let m = moment_integrals(model, 1.7, 0.7)?;
        println!("  moment integrals (gamma 1.7, delta 0.7): finite={} value={:.4}", m.finite, m.value);
    }
    Ok(())
}
