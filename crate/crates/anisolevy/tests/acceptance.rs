//! Acceptance run: one PASS/FAIL line per criterion, each against its runtime budget.
//! Set `ACCEPTANCE_ONLY=3,5` to run a subset.

use anisolevy::density::{mollify, stable_density_1d, Axis, Grid, WeightedEnsemble};
use anisolevy::experiments::{
    a1_scaling_experiment, besov_growth_experiment, dyadic_grid, moment_bound_experiment, one_step_rate_experiment,
    A1Config, BesovConfig, ExperimentReport, Integrand, MomentConfig, MomentVariant, RateConfig, SchemeKind,
};
use anisolevy::hypotheses::{check_preset, derive_lambda_at, kappa_ge1, kappa_lt1, Kappa, Preset, PresetParams};
use anisolevy::levy_models::{compute_anisotropy, Anisotropy, GaussianPolicy, LevyModel, OneSidedComponent, Truncation};
use anisolevy::sampling::{sample_sym_stable, RngStream};
use anisolevy::sde::{CoefficientFamily, CoefficientSpec, Diffusion, FineGrid, SdeProblem};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn summarize(rep: &ExperimentReport) -> String {
    rep.checks
        .iter()
        .map(|c| format!("{}={:.4} [{:?} {:.4} ±{}]", c.name, c.measured, c.direction, c.target, c.tolerance))
        .collect::<Vec<_>>()
        .join("; ")
}

fn criterion_1() -> Outcome {
    let a = compute_anisotropy(&[0.5, 1.5]).map_err(|e| e.to_string())?;
    let ok_a = close(a.mean_alpha, 0.75, 1e-12) && close(a.weights[0], 1.5, 1e-12) && close(a.weights[1], 0.5, 1e-12);
    let k1 = kappa_ge1(2.0, 1.0, 1.0, 0.5).map_err(|e| e.to_string())?;
    let k2 = kappa_lt1(0.5, 1.0, 0.5).map_err(|e| e.to_string())?;
    let plan = derive_lambda_at(&Anisotropy::isotropic(1), &[1.2], &Kappa::Scalar(1.0), 0.5, 1.4, 1.5, 0.05, &[1.07])
        .map_err(|e| e.to_string())?;
    let pass = ok_a && close(k1, 0.75, 1e-12) && close(k2, 2.0, 1e-12) && close(plan.lambda, 0.0035, 1e-12);
    Ok((
        pass,
        format!(
            "abar={} a={:?} kappa_ge1={k1} kappa_lt1={k2} lambda={}",
            a.mean_alpha, a.weights, plan.lambda
        ),
    ))
}

fn criterion_2() -> Outcome {
    let mut disagreements = 0;
    let mut cases = 0;
    for &alpha in &[0.3, 0.55, 0.8, 0.95, 1.0, 1.3, 1.9] {
        for i in 0..100 {
            for j in 0..100 {
                let beta = (i as f64 + 0.5) / 100.0;
                let chi = (j as f64 + 0.5) / 100.0;
                let r = check_preset(
                    Preset::Z1,
                    &PresetParams {
                        alphas: vec![alpha],
                        beta: Some(beta),
                        chi: Some(chi),
                        ..Default::default()
                    },
                )
                .map_err(|e| e.to_string())?;
                let expected = if alpha < 1.0 { alpha + beta.min(chi) > 1.0 } else { true };
                cases += 1;
                if r.overall != expected {
                    disagreements += 1;
                }
            }
        }
    }
    Ok((disagreements == 0, format!("{cases} grid points, {disagreements} disagreements")))
}

fn criterion_3() -> Outcome {
    let model = LevyModel::ComponentStable { alphas: vec![1.0] };
    let cfg = A1Config {
        axis: 0,
        h_grid: vec![1e-3],
        t_grid: vec![0.5, 0.2, 0.1, 0.05],
        tail_mass: 5e-4,
        tolerance: 0.05,
    };
    let rep = a1_scaling_experiment(&model, &cfg).map_err(|e| e.to_string())?;
    Ok((rep.pass, summarize(&rep)))
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, &(alpha, gamma, delta)) in [(0.6, 0.8, 0.5), (1.0, 1.5, 0.9), (1.5, 2.0, 1.2)].iter().enumerate() {
        let cfg = MomentConfig {
            integrand: Integrand::Constant { value: 1.0 },
            eta: alpha / 2.0,
            gamma,
            delta,
            windows: dyadic_grid(-10, 0),
            replicas: 100_000,
            batch: 10_000,
            variant: MomentVariant::Integral,
            tolerance: 0.1,
            self_similar_tolerance: 0.05,
        };
        let rep = moment_bound_experiment(&LevyModel::ComponentStable { alphas: vec![alpha] }, &cfg, 100 + i as u64)
            .map_err(|e| e.to_string())?;
        let ss = rep
            .checks
            .iter()
            .find(|c| c.name.starts_with("self-similar"))
            .ok_or("missing self-similar check")?;
        pass &= ss.pass;
        parts.push(format!("alpha={alpha}: slope={:.4} vs {:.4}", ss.measured, ss.target));
    }
    Ok((pass, parts.join("; ")))
}

fn bump(axis: usize, exponent: f64) -> CoefficientSpec {
    CoefficientSpec {
        family: CoefficientFamily::HolderBump {
            center: 0.0,
            amplitude: 0.5,
            exponent,
            cap: 1.0,
            base: 1.0,
            axis,
        },
        declared_exponent: exponent,
    }
}

fn clamped(axis: usize) -> CoefficientSpec {
    CoefficientSpec {
        family: CoefficientFamily::AffineClamped {
            c0: 0.5,
            c1: -1.0,
            clamp: 1.0,
            axis,
        },
        declared_exponent: 1.0,
    }
}

fn criterion_5() -> Outcome {
    let problem = SdeProblem {
        drift: vec![clamped(0), clamped(1)],
        diffusion: Diffusion::Full(vec![
            vec![bump(0, 0.9), CoefficientSpec::constant(0.3, 0.9)],
            vec![CoefficientSpec::constant(0.2, 0.9), bump(1, 0.9)],
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
        eta: Some(0.5),
        eps_grid: dyadic_grid(-10, -4),
        replicas: 100_000,
        batch: 2_000,
        t: 0.25,
        fine: FineGrid::default(),
        tolerance: 0.1,
    };
    let kappa = kappa_ge1(1.6, 1.4, 1.0, 0.9).map_err(|e| e.to_string())?;
    let rep = one_step_rate_experiment(&problem, &cfg, 5).map_err(|e| e.to_string())?;
    Ok((rep.pass && close(kappa, 1.171875, 1e-12), format!("kappa={kappa}; {}", summarize(&rep))))
}

fn criterion_6() -> Outcome {
    let one_sided = OneSidedComponent { c_plus: 1.0, alpha_plus: 0.3, c_minus: 0.0, alpha_minus: None };
    let two_sided = OneSidedComponent { c_plus: 1.0, alpha_plus: 0.3, c_minus: 1.0, alpha_minus: Some(0.3) };
    let problem = SdeProblem {
        drift: vec![CoefficientSpec::constant(0.2, 0.5), CoefficientSpec::constant(-0.1, 0.5)],
        diffusion: Diffusion::Diagonal(vec![CoefficientSpec::constant(1.0, 0.5), bump(0, 0.5)]),
        model: LevyModel::TemperedOneSided {
            components: vec![one_sided, two_sided],
            extra: vec![],
            truncation: Truncation { cutoff: 1e-8, gaussian: GaussianPolicy::Off },
        },
        x0: vec![0.0, 0.0],
    };
    let kappa = kappa_lt1(0.5, 0.5, 0.5).map_err(|e| e.to_string())?;
    let cfg = RateConfig {
        scheme: SchemeKind::Lt1,
        gamma: Some(0.5),
        gammas: None,
        delta: Some(0.5),
        deltas: None,
        eta: Some(0.25),
        eps_grid: dyadic_grid(-10, -4),
        replicas: 150_000,
        batch: 1_000,
        t: 0.25,
        fine: FineGrid::default(),
        tolerance: 0.1,
    };
    let rep = one_step_rate_experiment(&problem, &cfg, 6).map_err(|e| e.to_string())?;
    Ok((rep.pass && close(kappa, 2.0, 1e-12), format!("kappa={kappa}; {}", summarize(&rep))))
}

fn criterion_7() -> Outcome {
    let problem = SdeProblem {
        drift: vec![CoefficientSpec::constant(0.0, 1.0); 2],
        diffusion: Diffusion::Diagonal(vec![CoefficientSpec::constant(1.0, 0.5); 2]),
        model: LevyModel::ComponentStable { alphas: vec![1.0, 1.5] },
        x0: vec![0.0, 0.0],
    };
    let mut t_grid = dyadic_grid(-8, 0);
    t_grid.push(2.0);
    let cfg = BesovConfig {
        lambda: Some(0.5),
        gamma: None,
        delta: None,
        t_grid,
        replicas: 1_000_000,
        batch: 50_000,
        steps: 1,
        h_grid: None,
        tolerance: 0.1,
        exact_tolerance: 0.1,
    };
    let rep = besov_growth_experiment(&problem, &cfg, 7).map_err(|e| e.to_string())?;
    Ok((rep.pass, summarize(&rep)))
}

fn criterion_8() -> Outcome {
    let ax = Axis::centered(700.0, 0.05).map_err(|e| e.to_string())?;
    let c = stable_density_1d(1.0, 1.0, ax).map_err(|e| e.to_string())?;
    let g = stable_density_1d(2.0, 1.0, ax).map_err(|e| e.to_string())?;
    let mut err_c = 0.0f64;
    let mut err_g = 0.0f64;
    for j in 0..ax.count {
        let x = ax.node(j);
        err_c = err_c.max((c.values[j] - 1.0 / (PI * (1.0 + x * x))).abs());
        err_g = err_g.max((g.values[j] - (-x * x / 4.0).exp() / (4.0 * PI).sqrt()).abs());
    }
    let mut rng = RngStream::new(8, 0);
    let n = 1_000_000;
    let xs = sample_sym_stable(1.0, 1.0, n, &mut rng).map_err(|e| e.to_string())?;
    let grid_ax = Axis::centered(200.0, 0.01).map_err(|e| e.to_string())?;
    let grid = Grid::new(vec![grid_ax]).map_err(|e| e.to_string())?;
    let ens = WeightedEnsemble::uniform(DMatrix::from_column_slice(n, 1, &xs));
    let f = mollify(&ens, 0.05, &Anisotropy::isotropic(1), &grid).map_err(|e| e.to_string())?;
    let inside: f64 = (0..grid_ax.count)
        .map(|j| {
            let x = grid_ax.node(j);
            (f.values[j] - 1.0 / (PI * (1.0 + x * x))).abs()
        })
        .sum::<f64>()
        * grid_ax.step;
    let exact_outside = 1.0 - 2.0 * (200.0f64 + grid_ax.step / 2.0).atan() / PI;
    let l1 = inside + exact_outside + (1.0 - f.mass);
    let pass = err_c <= 1e-6 && err_g <= 1e-6 && l1 <= 0.05;
    Ok((pass, format!("cauchy max err {err_c:.2e}, gaussian max err {err_g:.2e}, mollified L1 {l1:.4}")))
}

fn run_cli(args: &[&str]) -> i32 {
    anisolevy::cli::run(std::iter::once("anisolevy").chain(args.iter().copied()))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.json");
    let problem = serde_json::json!({
        "problem": {
            "drift": [
                {"family": "affine_clamped", "c0": 0.5, "c1": -1.0, "clamp": 1.0, "axis": 0, "declared_exponent": 1.0},
                {"family": "constant", "value": 0.1, "declared_exponent": 1.0}
            ],
            "diffusion": {"diagonal": [
                {"family": "holder_bump", "center": 0.0, "amplitude": 0.5, "exponent": 0.9, "cap": 1.0, "base": 1.0, "axis": 1, "declared_exponent": 0.9},
                {"family": "constant", "value": 1.0, "declared_exponent": 0.9}
            ]},
            "model": {"kind": "component_stable", "alphas": [1.5, 1.2]},
            "x0": [0.0, 0.0]
        },
        "experiment": {"scheme": "ge1", "gamma": 1.6, "delta": 1.1, "eta": 0.5, "eps_grid": [0.0625, 0.03125, 0.015625], "replicas": 600, "batch": 50, "t": 0.25},
        "seed": 42
    });
    std::fs::write(&cfg, serde_json::to_string_pretty(&problem).unwrap()).map_err(|e| e.to_string())?;
    let cfg_s = cfg.to_str().unwrap();
    let besov_cfg = dir.path().join("besov.json");
    let besov = serde_json::json!({
        "problem": {
            "drift": [
                {"family": "constant", "value": 0.0, "declared_exponent": 1.0},
                {"family": "constant", "value": 0.0, "declared_exponent": 1.0}
            ],
            "diffusion": {"diagonal": [
                {"family": "constant", "value": 1.0, "declared_exponent": 0.5},
                {"family": "constant", "value": 1.0, "declared_exponent": 0.5}
            ]},
            "model": {"kind": "component_stable", "alphas": [1.0, 1.5]},
            "x0": [0.0, 0.0]
        },
        "experiment": {"lambda": 0.5, "t_grid": [1.0, 0.5, 0.25], "replicas": 4000, "batch": 500},
        "seed": 11
    });
    std::fs::write(&besov_cfg, serde_json::to_string_pretty(&besov).unwrap()).map_err(|e| e.to_string())?;
    let besov_s = besov_cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for (w, sub) in [("1", "a"), ("3", "b")] {
        let out = dir.path().join(sub);
        let code = run_cli(&["--config", cfg_s, "--workers", w, "--out", out.to_str().unwrap(), "rate"]);
        if code == 2 {
            return Err(format!("rate run failed with workers={w}"));
        }
        let code = run_cli(&[
            "--workers", w, "--seed", "9", "--out", out.to_str().unwrap(), "moments", "--alphas", "1.3", "--eta", "0.5",
            "--gamma", "1.5", "--delta", "1.0", "--replicas", "3000", "--batch", "250",
        ]);
        if code == 2 {
            return Err(format!("moments run failed with workers={w}"));
        }
        let code = run_cli(&["--config", besov_s, "--workers", w, "--out", out.to_str().unwrap(), "besov"]);
        if code == 2 {
            return Err(format!("besov run failed with workers={w}"));
        }
        let read = |stem: &str| std::fs::read(out.join(format!("{stem}.csv"))).map_err(|e| e.to_string());
        outputs.push((read("rate")?, read("moments")?, read("besov")?));
    }
    let same = outputs[0] == outputs[1];
    Ok((same, format!("rate, moments and besov CSVs byte-identical across 1 and 3 workers: {same}")))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(fn() -> Outcome, f64); 9] = [
        (criterion_1, 1.0),
        (criterion_2, 1.0),
        (criterion_3, 30.0),
        (criterion_4, 60.0),
        (criterion_5, 300.0),
        (criterion_6, 300.0),
        (criterion_7, 600.0),
        (criterion_8, 120.0),
        (criterion_9, 60.0),
    ];
    let mut all = true;
    for (i, (f, budget)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok((p, d)) => (p && secs <= *budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "criterion {id}: {} ({secs:.1}s of {budget}s) {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if !all {
        std::process::exit(1);
    }
}
