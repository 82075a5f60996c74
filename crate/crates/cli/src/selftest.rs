//! Quick end-to-end checks of the library's core identities, runnable from
//! the command line on any machine.

use std::io::Write;

use blockgrad::experiments::{run_minnorm_ls, MinNormConfig, PartitionSpec};
use blockgrad::linalg::Matrix;
use blockgrad::models::{
    hinge_loss_grad, least_squares_grad, mlp_forward_grad, smoothed_hinge_loss_grad, Activation,
    Batch, MlpModel,
};
use blockgrad::optim::reference::{Adagrad, Adam};
use blockgrad::optim::{
    optimal_block_scaling_from_norms, Accumulation, BagState, BagmConfig, BagmState,
};
use blockgrad::schedules::{MomentumSchedule, StepsizeSchedule, WeightSequence};
use blockgrad::{BlockPartition, Rng};

type Check = Result<String, String>;
type Suite = (&'static str, fn() -> Check);

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Gradient of `½ Σ_i h_i (θ_i − c_i)²` with a fresh random centre `c`.
fn quadratic_grad(theta: &[f64], h: &[f64], rng: &mut Rng) -> Vec<f64> {
    theta
        .iter()
        .zip(h)
        .map(|(t, hi)| hi * (t - rng.normal()))
        .collect()
}

fn adam_reduction() -> Check {
    let (d, beta, alpha, eta, eps) = (10, 0.9, 0.999, 0.01, 1e-8);
    let mut rng = Rng::new(1);
    let h: Vec<f64> = (0..d).map(|_| rng.uniform() * 4.0 + 0.1).collect();
    let p = BlockPartition::coordinatewise(d).map_err(|e| e.to_string())?;
    let momentum = MomentumSchedule::constant(beta).map_err(|e| e.to_string())?;
    let cfg = BagmConfig::new(
        WeightSequence::exponential(alpha).map_err(|e| e.to_string())?,
        StepsizeSchedule::bias_corrected(eta, momentum).map_err(|e| e.to_string())?,
        momentum,
        eps,
    );
    let mut bagm = BagmState::new(cfg, &p).map_err(|e| e.to_string())?;
    let mut adam = Adam::new(d, beta, alpha, eps);
    let mut a = vec![1.0; d];
    let mut b = a.clone();
    let mut worst = 0.0f64;
    for t in 1..=1000u64 {
        let g = quadratic_grad(&a, &h, &mut rng);
        bagm.step(&mut a, &g, &p).map_err(|e| e.to_string())?;
        adam.step(&mut b, &g, eta / (t as f64).sqrt())
            .map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&a, &b));
        b.copy_from_slice(&a);
    }
    if worst < 1e-10 {
        Ok(format!("max step difference {worst:.2e}"))
    } else {
        Err(format!("max step difference {worst:.2e}"))
    }
}

fn adagrad_reduction() -> Check {
    let d = 10;
    let mut rng = Rng::new(2);
    let h: Vec<f64> = (0..d).map(|_| rng.uniform() * 4.0 + 0.1).collect();
    let p = BlockPartition::coordinatewise(d).map_err(|e| e.to_string())?;
    let mut bag = BagState::for_partition(&p, 0.1, 1e-8).map_err(|e| e.to_string())?;
    let mut ada = Adagrad::new(d, 0.1, 1e-8);
    let mut a = vec![1.0; d];
    let mut b = a.clone();
    for _ in 0..1000 {
        let g = quadratic_grad(&a, &h, &mut rng);
        bag.step(&mut a, &g, &p).map_err(|e| e.to_string())?;
        ada.step(&mut b, &g).map_err(|e| e.to_string())?;
    }
    let diff = max_abs_diff(&a, &b);
    if diff < 1e-12 {
        Ok(format!("final difference {diff:.2e}"))
    } else {
        Err(format!("final difference {diff:.2e}"))
    }
}

fn ema_equivalence() -> Check {
    let d = 12;
    let p = BlockPartition::from_sizes(&[3, 4, 5]).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seq in [
        WeightSequence::Constant { a: 2.0 },
        WeightSequence::Polynomial { tau: 1.5 },
        WeightSequence::Exponential { alpha: 0.99 },
    ] {
        let momentum = MomentumSchedule::constant(0.9).map_err(|e| e.to_string())?;
        let stepsize = StepsizeSchedule::inv_sqrt(0.05).map_err(|e| e.to_string())?;
        let ema = BagmConfig::new(seq, stepsize, momentum, 1e-8);
        let mut direct = ema.clone();
        direct.accumulation = Accumulation::Direct;
        let mut s1 = BagmState::new(ema, &p).map_err(|e| e.to_string())?;
        let mut s2 = BagmState::new(direct, &p).map_err(|e| e.to_string())?;
        let mut rng = Rng::new(3);
        let mut a = vec![0.5; d];
        let mut b = a.clone();
        for _ in 0..1000 {
            let g = rng.normal_vec(d);
            s1.step(&mut a, &g, &p).map_err(|e| e.to_string())?;
            s2.step(&mut b, &g, &p).map_err(|e| e.to_string())?;
        }
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-300));
        }
    }
    if worst < 1e-9 {
        Ok(format!("max relative difference {worst:.2e}"))
    } else {
        Err(format!("max relative difference {worst:.2e}"))
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_checks() -> Check {
    let mut rng = Rng::new(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = 6;
        let theta = rng.normal_vec(d);
        let x = rng.normal_vec(d);
        let y = rng.sign();
        let (_, g) = smoothed_hinge_loss_grad(&theta, &x, y);
        let fd = central_diff(|t| smoothed_hinge_loss_grad(t, &x, y).0, &theta);
        worst = worst.max(rel_err(&g, &fd));

        let (f0, g) = hinge_loss_grad(&theta, &x, y);
        let other = rng.normal_vec(d);
        let f1 = hinge_loss_grad(&other, &x, y).0;
        let lin: f64 = g
            .iter()
            .zip(other.iter().zip(&theta))
            .map(|(gi, (o, t))| gi * (o - t))
            .sum();
        if f1 < f0 + lin - 1e-12 {
            return Err("hinge subgradient inequality violated".into());
        }

        let xm = Matrix::from_vec(3, d, rng.normal_vec(3 * d)).map_err(|e| e.to_string())?;
        let ym = rng.normal_vec(3);
        let (_, g) =
            least_squares_grad(&theta, &xm, &ym, Batch::Full).map_err(|e| e.to_string())?;
        let fd = central_diff(
            |t| least_squares_grad(t, &xm, &ym, Batch::Full).unwrap().0,
            &theta,
        );
        worst = worst.max(rel_err(&g, &fd));

        let k = 4;
        let mut model =
            MlpModel::random(2, k, Activation::Tanh, 0, &mut rng).map_err(|e| e.to_string())?;
        let w = rng.normal_vec(k * k);
        model.set_trainable_flat(&w).map_err(|e| e.to_string())?;
        let xs = Matrix::from_vec(2, k, rng.normal_vec(2 * k)).map_err(|e| e.to_string())?;
        let ys = Matrix::from_vec(2, k, rng.normal_vec(2 * k)).map_err(|e| e.to_string())?;
        let (_, g) = mlp_forward_grad(&model, &xs, &ys).map_err(|e| e.to_string())?;
        let fd = central_diff(
            |wf| {
                let mut m = model.clone();
                m.set_trainable_flat(wf).unwrap();
                mlp_forward_grad(&m, &xs, &ys).unwrap().0
            },
            &w,
        );
        worst = worst.max(rel_err(g.as_slice(), &fd));
    }
    if worst < 1e-5 {
        Ok(format!("worst relative error {worst:.2e}"))
    } else {
        Err(format!("worst relative error {worst:.2e}"))
    }
}

fn min_norm_small() -> Check {
    let r = run_minnorm_ls(&MinNormConfig::new(5, 20, PartitionSpec::Single, 5))
        .map_err(|e| e.to_string())?;
    if r.relative_distance < 1e-3 && r.max_rowspace_residual < 1e-8 {
        Ok(format!("relative distance {:.2e}", r.relative_distance))
    } else {
        Err(format!(
            "relative distance {:.2e}, rowspace residual {:.2e}",
            r.relative_distance, r.max_rowspace_residual
        ))
    }
}

fn scaling_budget() -> Check {
    let mut rng = Rng::new(6);
    let sizes = [3usize, 7, 2, 8];
    let norms: Vec<f64> = sizes.iter().map(|_| rng.uniform() * 5.0 + 0.1).collect();
    let c = 2.5;
    let s = optimal_block_scaling_from_norms(&norms, &sizes, c).map_err(|e| e.to_string())?;
    let used = s.budget_used(&sizes);
    if (used - c).abs() <= 1e-12 * c {
        Ok(format!("budget {used}"))
    } else {
        Err(format!("budget {used}, expected {c}"))
    }
}

/// Runs every check, printing one line each; returns whether all passed.
pub fn run_all(out: &mut dyn Write) -> bool {
    let checks: [Suite; 6] = [
        ("adam reduction", adam_reduction),
        ("adagrad reduction", adagrad_reduction),
        ("ema equivalence", ema_equivalence),
        ("gradient checks", gradient_checks),
        ("min-norm small instance", min_norm_small),
        ("optimal scaling budget", scaling_budget),
    ];
    let mut ok = true;
    for (name, f) in checks {
        let (status, detail) = match f() {
            Ok(d) => ("ok", d),
            Err(d) => {
                ok = false;
                ("FAILED", d)
            }
        };
        let _ = writeln!(out, "{status:6} {name}: {detail}");
    }
    ok
}
