use blockgrad::experiments::{
    iterate_average, pool_gradient_norm_sq, run_diagnostics, run_nonconvex_experiment,
    run_regret_experiment, DiagnosticsConfig, NonconvexConfig, PartitionSpec, RegretConfig,
};
use blockgrad::models::{hinge_loss_grad, smoothed_hinge, StreamSpec, SyntheticStream};
use blockgrad::Rng;

fn small_regret(seed: u64) -> RegretConfig {
    let mut cfg = RegretConfig::paper(seed);
    cfg.horizon = 100;
    cfg.repetitions = 6;
    cfg
}

#[test]
fn regret_csv_is_deterministic() {
    let a = run_regret_experiment(&small_regret(3))
        .unwrap()
        .to_csv()
        .to_string();
    let b = run_regret_experiment(&small_regret(3))
        .unwrap()
        .to_csv()
        .to_string();
    assert_eq!(a, b);
    let c = run_regret_experiment(&small_regret(4))
        .unwrap()
        .to_csv()
        .to_string();
    assert_ne!(a, c);
    assert_eq!(a.lines().count(), 101);
}

#[test]
fn regret_bound_holds_on_short_runs() {
    for seed in 0..3 {
        assert!(run_regret_experiment(&small_regret(seed))
            .unwrap()
            .bounds_hold());
    }
}

#[test]
fn pool_at_origin_matches_direct_computation() {
    let mut stream = SyntheticStream::new(StreamSpec::paper(), Rng::new(8)).unwrap();
    let pool = stream.dataset(500).unwrap();
    let d = pool.dim();
    assert_eq!(smoothed_hinge(0.0), 0.5);
    let mut mean = vec![0.0; d];
    for i in 0..pool.len() {
        for (m, x) in mean.iter_mut().zip(pool.row(i)) {
            *m -= pool.y[i] * x / pool.len() as f64;
        }
    }
    let expected: f64 = mean.iter().map(|v| v * v).sum();
    let got = pool_gradient_norm_sq(&vec![0.0; d], &pool);
    assert!((got - expected).abs() <= 1e-12 * expected);
}

#[test]
fn nonconvex_traces_cover_requested_steps() {
    let mut cfg = NonconvexConfig::paper(1);
    cfg.steps = 25;
    cfg.stride = 10;
    cfg.repetitions = 2;
    cfg.pool_size = 200;
    cfg.partitions = vec![PartitionSpec::Single, PartitionSpec::Coordinatewise];
    let traces = run_nonconvex_experiment(&cfg).unwrap();
    assert_eq!(traces.len(), 2);
    for t in &traces {
        assert_eq!(t.steps, vec![0, 10, 20, 25]);
        assert!(t.mean.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    // Both partitions start from θ = 0 on the same pool.
    assert_eq!(traces[0].mean[0], traces[1].mean[0]);
}

#[test]
fn averaged_iterate_loss_is_at_most_mean_loss() {
    let mut stream = SyntheticStream::new(StreamSpec::paper(), Rng::new(2)).unwrap();
    let mut rng = Rng::new(3);
    let trajectory: Vec<Vec<f64>> = (0..20).map(|_| rng.normal_vec(100)).collect();
    let avg = iterate_average(&trajectory).unwrap().into_inner();
    for _ in 0..50 {
        let (x, y) = stream.next_sample();
        let mean: f64 = trajectory
            .iter()
            .map(|t| hinge_loss_grad(t, &x, y).0)
            .sum::<f64>()
            / 20.0;
        assert!(hinge_loss_grad(&avg, &x, y).0 <= mean + 1e-12);
    }
}

#[test]
fn diagnostics_premise_holds_on_a_real_run() {
    let mut cfg = DiagnosticsConfig::paper(5);
    cfg.n = 200;
    cfg.epochs = 2;
    let rep = run_diagnostics(&cfg).unwrap();
    let mut start = 0;
    for b in &rep.blocks {
        let avg: f64 = rep.sigma_i_sq[start..start + b.size].iter().sum::<f64>() / b.size as f64;
        assert!(b.sigma_b_sq <= avg + 1e-12);
        start += b.size;
    }
    assert!(rep.ratios.r_min > 0.0);
    let csv = rep.to_csv().to_string();
    assert!(csv.starts_with("block,d_b,sigma_b_sq,cv,r1,r2,r3,r_min,vbar_ratio"));
}
