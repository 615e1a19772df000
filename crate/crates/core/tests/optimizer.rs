//! Behaviour of the gradient-descent driver and the ablation runner.

use egodepth::camera::DepthMap;
use egodepth::losses::{total_loss, DepthPair, LossConfig, LossWeights};
use egodepth::optimize::{ablate, estimate_errors, optimize_pair, OptimConfig, OptimState, Term};
use egodepth::se3::PoseVector;
use egodepth::synth::{make_pair_from_spec, preset, SyntheticPair, PRESETS};

fn pair(name: &str) -> SyntheticPair {
    make_pair_from_spec(&preset(name).unwrap()).unwrap()
}

fn ripple(d: &DepthMap, amp: f64) -> DepthMap {
    let (w, h) = d.dims();
    DepthMap::from_fn(w, h, |i, j| {
        d.get(i, j).unwrap() * (1.0 + amp * (0.31 * i as f64 + 0.17 * j as f64).sin())
    })
    .unwrap()
}

fn nudged_pose(p: &SyntheticPair) -> PoseVector {
    let mut v = p.pose.to_vector().unwrap();
    v.0[1] += 0.01;
    v.0[3] -= 0.01;
    v
}

/// One plain step changes the loss by the first-order prediction
/// `-step * |g|^2`, with an error that shrinks faster than the step.
#[test]
fn one_step_matches_the_first_order_prediction() {
    let p = pair("plane");
    let depths = DepthPair {
        prev: ripple(&p.depths.prev, 0.03),
        cur: ripple(&p.depths.cur, -0.02),
    };
    let init = OptimState::new(&depths, nudged_pose(&p));
    let k = p.intrinsics;
    let loss = LossConfig {
        weights: LossWeights {
            beta: 0.0,
            ..LossWeights::default()
        },
        skip_zero_weight: true,
        ..LossConfig::default()
    };
    let b = total_loss(&p.frames, &depths, &init.pose, &k, &loss).unwrap();
    let sq_log = |g: &[f64], d: &DepthMap| {
        g.iter()
            .zip(d.values())
            .map(|(g, d)| (g * d).powi(2))
            .sum::<f64>()
    };
    let depth_sq =
        sq_log(&b.grad_depth_prev, &depths.prev) + sq_log(&b.grad_depth_cur, &depths.cur);
    let pose_sq: f64 = b.grad_pose.iter().map(|g| g * g).sum();
    let n_px = (k.width * k.height) as f64;

    let mut rel = Vec::new();
    for f in [1.0, 0.1] {
        let base = OptimConfig::default();
        let cfg = OptimConfig {
            depth_step: f * base.depth_step,
            pose_step: f * base.pose_step,
            max_iterations: 1,
            loss,
            ..base
        };
        let (fin, _) = optimize_pair(&p.frames, &k, &init, &cfg).unwrap();
        assert_eq!(fin.history.len(), 2);
        let actual = fin.history[1] - fin.history[0];
        let predicted = -(cfg.depth_step * depth_sq + cfg.pose_step * pose_sq / n_px);
        rel.push(((actual - predicted) / predicted).abs());
    }
    assert!(rel[1] < 0.05, "{rel:?}");
    assert!(rel[1] < 0.5 * rel[0], "{rel:?}");
}

/// The window-10 moving average of the loss never rises at default steps.
#[test]
fn smoothed_loss_is_non_increasing() {
    for name in PRESETS {
        let p = pair(name);
        let depths = DepthPair {
            prev: p.depths.prev.scaled(1.2).unwrap(),
            cur: p.depths.cur.scaled(1.2).unwrap(),
        };
        let init = OptimState::new(&depths, nudged_pose(&p));
        let cfg = OptimConfig {
            max_iterations: 120,
            ..OptimConfig::default()
        };
        let (fin, _) = optimize_pair(&p.frames, &p.intrinsics, &init, &cfg).unwrap();
        let avg: Vec<f64> = fin
            .history
            .windows(10)
            .map(|w| w.iter().sum::<f64>() / 10.0)
            .collect();
        for (n, w) in avg.windows(2).enumerate() {
            assert!(
                w[1] <= w[0],
                "{name}: moving average rose at iteration {}: {} -> {}",
                n + 10,
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn disabling_every_term_leaves_the_state_alone() {
    let p = pair("plane");
    let depths = DepthPair {
        prev: p.depths.prev.scaled(1.1).unwrap(),
        cur: p.depths.cur.scaled(1.1).unwrap(),
    };
    let init = OptimState::new(&depths, nudged_pose(&p));
    let cfg = OptimConfig {
        max_iterations: 20,
        ..OptimConfig::default()
    };
    let report = ablate(&p, &init, &cfg, &Term::ALL).unwrap();
    let off = &report.runs[1];
    assert_eq!(off.iterations, 0);
    assert_eq!(off.final_loss, 0.0);
    assert_eq!(off.errors, report.initial);
    assert_eq!(
        off.weights,
        LossWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            omega: 0.0
        }
    );
}

/// With only the smoothness term left the depth maps lose their relief.
#[test]
fn smoothness_alone_flattens_the_depth() {
    let p = pair("lowtex");
    let depths = DepthPair {
        prev: ripple(&p.depths.prev, 0.1),
        cur: ripple(&p.depths.cur, 0.1),
    };
    let init = OptimState::new(&depths, p.pose.to_vector().unwrap());
    let spread = |d: &DepthMap| {
        let v = d.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt() / mean
    };
    let loss = LossConfig {
        weights: LossWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 1.0,
            omega: 0.0,
        },
        skip_zero_weight: true,
        ..LossConfig::default()
    };
    let cfg = OptimConfig {
        max_iterations: 300,
        optimize_pose: false,
        depth_step: 1e-3,
        loss,
        ..OptimConfig::default()
    };
    let (fin, _) = optimize_pair(&p.frames, &p.intrinsics, &init, &cfg).unwrap();
    let end = fin.depths().unwrap();
    for (before, after) in [(&depths.prev, &end.prev), (&depths.cur, &end.cur)] {
        let (s0, s1) = (spread(before), spread(after));
        assert!(s1 < 0.5 * s0, "relief {s0} -> {s1}");
    }
    assert!(fin.history.last().unwrap() < &fin.history[0]);
}

#[test]
fn fixed_groups_do_not_move() {
    let p = pair("plane");
    let depths = DepthPair {
        prev: p.depths.prev.scaled(1.1).unwrap(),
        cur: p.depths.cur.scaled(1.1).unwrap(),
    };
    let init = OptimState::new(&depths, nudged_pose(&p));
    let cfg = OptimConfig {
        max_iterations: 5,
        optimize_pose: false,
        optimize_depth_prev: false,
        ..OptimConfig::default()
    };
    let (fin, trace) = optimize_pair(&p.frames, &p.intrinsics, &init, &cfg).unwrap();
    assert_eq!(fin.pose, init.pose);
    assert_eq!(fin.log_depth_prev, init.log_depth_prev);
    assert_ne!(fin.log_depth_cur, init.log_depth_cur);
    assert_eq!(trace.entries.len(), 6);
    let e = estimate_errors(&fin, &p.depths, &p.pose).unwrap();
    assert!(e.depth_cur < 0.1 && (e.depth_prev - 0.1).abs() < 1e-9);
}
