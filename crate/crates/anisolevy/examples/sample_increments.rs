//! Draw Lévy increments, compare a fractional moment with its scaling law and
//! write the samples to disk.

use anisolevy::levy_models::LevyModel;
use anisolevy::sampling::{read_samples, write_samples, IncrementPlan, RngStream};

fn main() -> anisolevy::Result<()> {
    let model = LevyModel::ComponentStable { alphas: vec![0.9, 1.7] };
    let plan = IncrementPlan::new(&model)?;
    let mut rng = RngStream::new(2024, 0);
    let p = 0.4;
    for dt in [1.0, 0.1, 0.01] {
        let n = 50_000;
        let mut m = [0.0; 2];
        for _ in 0..n {
            let inc = plan.sample_increment(dt, &mut rng);
            for k in 0..2 {
                m[k] += inc[k].abs().powf(p) / n as f64;
            }
        }
        println!(
            "dt={dt:<5} E|dZ_k|^{p}: {:.4} {:.4}  rescaled by dt^(-p/alpha_k): {:.4} {:.4}",
            m[0],
            m[1],
            m[0] * dt.powf(-p / 0.9),
            m[1] * dt.powf(-p / 1.7)
        );
    }
    let data: Vec<f64> = (0..1000).flat_map(|_| plan.sample_increment(0.5, &mut rng)).collect();
    let path = std::env::temp_dir().join("anisolevy_increments.bin");
    write_samples(&path, 2, &data)?;
    let (d, back) = read_samples(&path)?;
    println!("wrote {} points of dimension {d} to {}", back.len() / d, path.display());
    Ok(())
}
