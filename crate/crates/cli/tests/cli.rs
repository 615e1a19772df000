use std::path::Path;
use std::process::{Command, Output};

fn egodepth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egodepth"))
        .args(args)
        .env_remove("EGODEPTH_THREADS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = egodepth(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn malformed_flag_exits_2() {
    let out = egodepth(&[
        "eval-odom",
        "--pred",
        "a",
        "--gt",
        "b",
        "--snippet",
        "three",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = egodepth(&["loss", "--beta", "0.1"]);
    assert_eq!(out.status.code(), Some(2), "no pair given");
}

#[test]
fn missing_input_exits_1_naming_the_path() {
    let out = egodepth(&[
        "eval-depth",
        "--pred",
        "/no/such/pred.pfm",
        "--gt",
        "/no/such/gt.pfm",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/pred.pfm"));
}

#[test]
fn loss_at_ground_truth_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let pair = dir.path().join("pair");
    for preset in ["plane", "lowtex"] {
        assert!(egodepth(&["synth", "--preset", preset, "-o", p(&pair)])
            .status
            .success());
        let out = dir.path().join(format!("{preset}.json"));
        assert!(egodepth(&["loss", "--pair", p(&pair), "-o", p(&out)])
            .status
            .success());
        let v = json(&out);
        for s in v["scales"].as_array().unwrap() {
            for dir in ["forward", "backward"] {
                for term in ["reconstruction", "alignment_3d", "ssim"] {
                    let x = s[dir][term].as_f64().unwrap();
                    assert!(x.abs() < 1e-6, "{preset} {dir} {term} = {x}");
                }
            }
        }
    }
}

#[test]
fn icp_self_returns_identity() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("c.ply");
    let mut text = String::from("ply\nformat ascii 1.0\nelement vertex 64\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
    for n in 0..64 {
        let (x, y) = ((n % 8) as f64 * 0.1, (n / 8) as f64 * 0.1);
        text += &format!("{x} {y} {}\n", 2.0 + 0.3 * (x * 3.0).sin() + 0.2 * y * y);
    }
    std::fs::write(&ply, text).unwrap();
    for mode in ["point-to-point", "point-to-plane"] {
        let out = egodepth(&["icp", "--source", p(&ply), "--self", "--mode", mode]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let m: Vec<f64> = v["transform"]["matrix"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect();
        let id = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        for (a, b) in m.iter().zip(id) {
            assert!((a - b).abs() < 1e-12, "{mode}: {m:?}");
        }
    }
}

#[test]
fn identical_argv_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = egodepth(&[
            "optimize",
            "--preset",
            "plane",
            "--seed",
            "5",
            "--init-depth-scale",
            "1.1",
            "--perturb-rot-deg",
            "1",
            "--perturb-trans",
            "0.01",
            "--iterations",
            "3",
            "--threads",
            "2",
            "-o",
            p(&out),
        ])
        .status;
        assert!(status.success());
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in [
        "trace.json",
        "summary.json",
        "pose.json",
        "trace.csv",
        "depth_cur.pfm",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let v = json(&a.join("trace.json"));
    assert_eq!(v["entries"].as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(a.join("loss.gp"))
        .unwrap()
        .contains("trace.csv"));

    // A different seed perturbs the pose differently.
    let out = dir.path().join("c");
    egodepth(&[
        "optimize",
        "--preset",
        "plane",
        "--seed",
        "6",
        "--init-depth-scale",
        "1.1",
        "--perturb-rot-deg",
        "1",
        "--perturb-trans",
        "0.01",
        "--iterations",
        "0",
        "-o",
        p(&out),
    ]);
    assert_ne!(
        json(&out.join("trace.json"))["entries"][0]["pose"],
        v["entries"][0]["pose"]
    );
}

#[test]
fn warp_with_true_pose_reproduces_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let pair = dir.path().join("pair");
    assert!(egodepth(&["synth", "--preset", "plane", "-o", p(&pair)])
        .status
        .success());
    let out = dir.path().join("w");
    let status = egodepth(&[
        "warp",
        "--image",
        p(&pair.join("prev.png")),
        "--depth",
        p(&pair.join("depth_cur.pfm")),
        "--intrinsics",
        p(&pair.join("intrinsics.json")),
        "--pose",
        p(&pair.join("pose.json")),
        "-o",
        p(&out),
    ])
    .status;
    assert!(status.success());
    let warped = egodepth::io::read_image(&out.join("warped.png")).unwrap();
    let cur = egodepth::io::read_image(&pair.join("cur.png")).unwrap();
    let mask = egodepth::io::read_mask_png(&out.join("mask.png")).unwrap();
    assert_eq!(mask.count(), 56 * 64);
    for j in 0..64 {
        for i in 0..64 {
            if mask.get(i, j) {
                for c in 0..3 {
                    assert_eq!(warped.get(i, j, c), cur.get(i, j, c));
                }
            }
        }
    }
}

#[test]
fn eval_commands() {
    let dir = tempfile::tempdir().unwrap();
    let pair = dir.path().join("pair");
    assert!(egodepth(&["synth", "--preset", "plane", "-o", p(&pair)])
        .status
        .success());
    let d = p(&pair.join("depth_cur.pfm")).to_string();
    let out = egodepth(&["eval-depth", "--pred", &d, "--gt", &d]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["abs_rel"].as_f64(), Some(0.0));
    assert_eq!(v["delta1"].as_f64(), Some(1.0));

    let poses = dir.path().join("poses.txt");
    let mut text = String::new();
    for k in 0..5 {
        text += &format!("1 0 0 {k} 0 1 0 0 0 0 1 {}\n", 0.5 * k as f64);
    }
    std::fs::write(&poses, &text).unwrap();
    let scaled = dir.path().join("scaled.txt");
    let mut text = String::new();
    for k in 0..5 {
        text += &format!(
            "1 0 0 {} 0 1 0 0 0 0 1 {}\n",
            3.0 * k as f64,
            1.5 * k as f64
        );
    }
    std::fs::write(&scaled, &text).unwrap();
    let json_out = dir.path().join("ate.json");
    let out = egodepth(&[
        "eval-odom",
        "--pred",
        p(&scaled),
        "--gt",
        p(&poses),
        "-o",
        p(&json_out),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ATE"));
    assert!(json(&json_out)["mean"].as_f64().unwrap() < 1e-12);
}

#[test]
fn ablate_writes_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("abl");
    let o = egodepth(&[
        "ablate",
        "--preset",
        "lowtex",
        "--init-depth-scale",
        "1.1",
        "--fix-pose",
        "--iterations",
        "2",
        "--skip-zero-weight",
        "--disable",
        "3d",
        "--disable",
        "ssim,sm",
        "-o",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("ablation.json"));
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    assert_eq!(v["runs"][1]["weights"]["beta"].as_f64(), Some(0.0));
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("no-alignment-3d"));
}
