//! Hypothesis inequalities for a preset and for explicit exponents, and the
//! regularity exponent they admit.

use anisolevy::hypotheses::{check_general, check_preset, derive_lambda, kappa_ge1, Kappa, Preset, PresetParams};
use anisolevy::levy_models::compute_anisotropy;

fn main() -> anisolevy::Result<()> {
    let params = PresetParams { alphas: vec![1.2, 1.5], beta: Some(1.0), chi: Some(0.8), ..Default::default() };
    let z2 = check_preset(Preset::Z2, &params)?;
    println!("Z2 preset: overall {}", z2.overall);
    for q in &z2.inequalities {
        println!("  {:<40} {:>9.4} vs {:>9.4}  {}", q.name, q.lhs, q.rhs, if q.satisfied { "ok" } else { "violated" });
    }

    let alphas = [1.5, 1.5];
    let (gamma, delta, beta, chi) = (1.6, 1.4, 1.0, 0.9);
    let report = check_general(&alphas, gamma, delta, beta, chi, false)?;
    println!("general check: overall {}", report.overall);
    let kappa = kappa_ge1(gamma, delta, beta, chi)?;
    let plan = derive_lambda(&compute_anisotropy(&alphas)?, &alphas, &Kappa::Scalar(kappa), chi, delta, gamma)?;
    println!("kappa {kappa:.6}, eta {:.4}, lambda {:.6}", plan.eta, plan.lambda);
    Ok(())
}
