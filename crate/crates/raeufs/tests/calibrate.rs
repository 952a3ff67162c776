use raeufs::data::scale_unit_interval;
use raeufs::eval::evaluate;
use raeufs::synthetic::{make_blobs, SyntheticSpec};
use raeufs::trainer::{fit, rank_features, reduce, RaeufsConfig, ReduceMode};

fn spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec { clusters: 3, informative: 10, noise: 90, per_cluster: 60, separation: 6.0, seed }
}

fn run(name: &str, cfg: &RaeufsConfig, seeds: std::ops::Range<u64>) {
    for seed_idx in seeds {
        let ds = scale_unit_interval(&make_blobs::<f64>(&spec(1000 + seed_idx)));
        let mut cfg = cfg.clone();
        cfg.seed = 500 + seed_idx;
        let t0 = std::time::Instant::now();
        let (model, hist) = fit(&ds, &cfg).unwrap();
        let ranking = rank_features(&model.network.selector);
        let hits = ranking.order[..10].iter().filter(|&&i| i < 10).count();
        let norm = |i: usize| model.network.selector.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        let info_mean: f64 = (0..10).map(norm).sum::<f64>() / 10.0;
        let noise_mean: f64 = (10..100).map(norm).sum::<f64>() / 90.0;
        let projected = reduce(&ds, &model.network.selector, ReduceMode::Project).unwrap();
        let report = evaluate(&ds, &projected, 3, 20, 900 + seed_idx).unwrap();
        let last = hist.records.last().unwrap();
        println!(
            "[{name}] s{seed_idx}: hits {hits}/10 acc {:.3} | w_i {info_mean:.3} w_n {noise_mean:.3} | recon {:.1} fit {:.3} ({:.0}s)",
            report.acc_mean, last.reconstruction, last.fit, t0.elapsed().as_secs_f64()
        );
    }
}

#[test]
#[ignore]
fn calibrate() {
    for (name, alpha, eta, iters) in [
        ("a.5-e.3-8k", 0.5, 0.3, 8000usize),
        ("a.65-e.3-6k", 0.65, 0.3, 6000),
        ("a.5-e.6-6k", 0.5, 0.6, 6000),
    ] {
        run(name, &RaeufsConfig {
            selected: 10, clusters: 3, outer_iters: iters, learning_rate: 1e-2,
            adam_epsilon: 1.0,
            alpha, beta: 0.03, gamma: 1.0, eta, lambda1: 0.1, lambda2: 1.0,
            ..RaeufsConfig::default()
        }, 0..1);
    }
    panic!("calibration run");
}
