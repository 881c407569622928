use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pacc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pacc"))
        .args(args)
        .output()
        .expect("run pacc")
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_cycle(dir: &Path, name: &str, seconds: usize, speed: impl Fn(f64) -> f64) -> PathBuf {
    let mut text = String::from("time_s,speed_mps\n");
    for i in 0..=seconds {
        text.push_str(&format!("{i},{}\n", speed(i as f64)));
    }
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn help_documents_every_flag() {
    let verbs: [(&str, &[&str]); 5] = [
        ("learn", &["--demos", "--out", "--t-h", "--eta", "--max-epochs"]),
        ("simulate", &["--config", "--trace", "--report"]),
        ("compare", &["--config-a", "--config-b", "--report"]),
        ("generate-demos", &["--weights", "--tau", "--cycle", "--out"]),
        ("init-config", &["--out"]),
    ];
    for (verb, flags) in verbs {
        let out = pacc(&[verb, "--help"]);
        assert!(out.status.success(), "{verb} --help failed");
        let text = String::from_utf8(out.stdout).unwrap();
        for f in flags {
            assert!(text.contains(f), "{verb} --help lacks {f}");
        }
        assert!(!text.contains("--seed"));
    }
    assert!(pacc(&["--help"]).status.success());
}

#[test]
fn zero_epochs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = pacc(&["learn", "--demos", s(dir.path()), "--out", "m.json", "--max-epochs", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_then_learn_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = write_cycle(dir.path(), "lead.csv", 60, |t| 14.0 + 3.0 * (t / 9.0).sin());
    let demos = dir.path().join("demos");
    let gen = |out: &Path| {
        pacc(&[
            "generate-demos", "--weights", "1,0.06,0.9,0.12", "--tau", "1.4",
            "--cycle", s(&cycle), "--out", s(out), "--parts", "3",
        ])
    };
    let out = gen(&demos);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = (1..=3).map(|k| demos.join(format!("demo_{k:02}.csv"))).collect();
    assert!(files.iter().all(|f| f.exists()));

    let demos2 = dir.path().join("demos2");
    assert!(gen(&demos2).status.success());
    for k in 1..=3 {
        let name = format!("demo_{k:02}.csv");
        assert_eq!(std::fs::read(demos.join(&name)).unwrap(), std::fs::read(demos2.join(&name)).unwrap());
    }

    let m1 = dir.path().join("m1.json");
    let m2 = dir.path().join("m2.json");
    for m in [&m1, &m2] {
        let out = pacc(&["learn", "--demos", s(&demos), "--out", s(m), "--max-epochs", "8"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("residual"));
    }
    let a = std::fs::read(&m1).unwrap();
    assert_eq!(a, std::fs::read(&m2).unwrap());
    let model: serde_json::Value = serde_json::from_slice(&a).unwrap();
    for k in ["a", "ds", "rs", "rd"] {
        assert!(model["weights"][k].as_f64().unwrap() >= 1e-3);
    }
    assert!(model["tau_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn generate_rejects_weights_below_floor() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = write_cycle(dir.path(), "lead.csv", 30, |_| 10.0);
    let out = pacc(&[
        "generate-demos", "--weights", "0,1,1,1", "--tau", "1.4",
        "--cycle", s(&cycle), "--out", s(&dir.path().join("d")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constant_leader_demos_settle_at_desired_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = write_cycle(dir.path(), "lead.csv", 60, |_| 15.0);
    let out_dir = dir.path().join("d");
    let out = pacc(&[
        "generate-demos", "--weights", "1,0.06,0.9,0.12", "--tau", "1.4",
        "--cycle", s(&cycle), "--out", s(&out_dir), "--parts", "1",
    ]);
    assert!(out.status.success());
    let demo = pacc::Demonstration::from_csv(out_dir.join("demo_01.csv")).unwrap();
    let (l, f) = (demo.leader.states.last().unwrap(), demo.follower.states.last().unwrap());
    assert!((l.position - f.position - (15.0 * 1.4 + 5.0)).abs() < 1e-6);
    pacc::demo::split_demonstration(&demo.leader, &demo.follower, 3.0).unwrap();
}

#[test]
fn degenerate_demos_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("time_s,leader_pos_m,leader_speed_mps,follower_pos_m,follower_speed_mps\n");
    for i in 0..=60 {
        let t = i as f64 * 0.1;
        text.push_str(&format!("{t},{},0.5,{},0.5\n", 10.0 + 0.5 * t, 0.5 * t));
    }
    std::fs::write(dir.path().join("slow.csv"), text).unwrap();
    let out = pacc(&["learn", "--demos", s(dir.path()), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn unreadable_demos_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "nope\n1\n").unwrap();
    let out = pacc(&["learn", "--demos", s(dir.path()), "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

fn scenario_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, v) in [("a.json", 1.7), ("b.json", 1.0)] {
        std::fs::write(
            dir.path().join(name),
            format!(r#"{{"weights":{{"a":1.0,"ds":0.06,"rs":0.9,"rd":0.12}},"tau_s":{v},"d_s_m":5.0,"t_h_s":3.0}}"#),
        )
        .unwrap();
    }
    write_cycle(dir.path(), "cycle.csv", 120, |t| 12.0 + 4.0 * (t / 15.0).sin());
    dir
}

#[test]
fn init_config_then_simulate_is_deterministic() {
    let dir = scenario_dir();
    let p = dir.path();
    let cfg = p.join("s.toml");
    assert!(pacc(&["init-config", "--out", s(&cfg), "--cycle", "cycle.csv", "--model", "a.json"]).status.success());
    let text = std::fs::read_to_string(&cfg).unwrap();
    for key in ["[cycle]", "[driver_model]", "[idm]", "[controller]", "[fuel]", "[init]", "sim_dt"] {
        assert!(text.contains(key));
    }
    let cfg2 = p.join("s2.toml");
    pacc(&["init-config", "--out", s(&cfg2), "--cycle", "cycle.csv", "--model", "a.json"]);
    assert_eq!(text, std::fs::read_to_string(&cfg2).unwrap());

    let run = |tag: &str| {
        let (t, r) = (p.join(format!("t{tag}.csv")), p.join(format!("r{tag}.json")));
        let out = pacc(&["simulate", "--config", s(&cfg), "--trace", s(&t), "--report", s(&r)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(t).unwrap(), std::fs::read(r).unwrap())
    };
    let first = run("1");
    assert_eq!(first, run("2"));
    let report: serde_json::Value = serde_json::from_slice(&first.1).unwrap();
    for k in ["dx_m", "t_m", "f_c"] {
        assert!(report[k].as_f64().unwrap() > 0.0);
    }
    assert_eq!(report["status"], "completed");

    // Reported metrics are reproducible from the trace file.
    let trace = pacc::evaluation::read_trace(p.join("t1.csv")).unwrap();
    let (dx, tm) = pacc::evaluation::average_metrics(&trace).unwrap();
    assert_eq!(report["dx_m"].as_f64().unwrap(), pacc::numfmt::round_sig(dx));
    assert_eq!(report["t_m"].as_f64().unwrap(), pacc::numfmt::round_sig(tm));
}

#[test]
fn missing_cycle_exits_2() {
    let dir = scenario_dir();
    let cfg = dir.path().join("s.toml");
    pacc(&["init-config", "--out", s(&cfg), "--cycle", "nope.csv", "--model", "a.json"]);
    let out = pacc(&[
        "simulate", "--config", s(&cfg),
        "--trace", s(&dir.path().join("t.csv")), "--report", s(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collision_exits_4_with_partial_trace() {
    let dir = scenario_dir();
    let p = dir.path();
    // The PV stops dead from 30 m/s; no admissible braking can avoid it.
    write_cycle(p, "stop.csv", 20, |t| if t < 5.0 { 30.0 } else { 0.0 });
    let text = pacc::scenario::default_config_text("stop.csv", "a.json").unwrap();
    let cfg = p.join("crash.toml");
    std::fs::write(&cfg, text).unwrap();
    let (t, r) = (p.join("t.csv"), p.join("r.json"));
    let out = pacc(&["simulate", "--config", s(&cfg), "--trace", s(&t), "--report", s(&r)]);
    assert_eq!(out.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&r).unwrap()).unwrap();
    assert_eq!(report["status"], "collision");
    assert_eq!(report["collision"]["pair"], 1);
    assert!(!pacc::evaluation::read_trace(&t).unwrap().is_empty());
}

#[test]
fn compare_reports_exact_keys() {
    let dir = scenario_dir();
    let p = dir.path();
    let (ca, cb) = (p.join("a.toml"), p.join("b.toml"));
    pacc(&["init-config", "--out", s(&ca), "--cycle", "cycle.csv", "--model", "a.json"]);
    pacc(&["init-config", "--out", s(&cb), "--cycle", "cycle.csv", "--model", "b.json"]);

    let self_cmp = p.join("self.json");
    let out = pacc(&["compare", "--config-a", s(&ca), "--config-b", s(&ca), "--report", s(&self_cmp)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&self_cmp).unwrap()).unwrap();
    let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["fuel_pct", "gap_pct", "headway_pct"]);
    for k in &keys {
        assert_eq!(v[k].as_f64().unwrap(), 0.0);
    }

    let ab = p.join("ab.json");
    let ba = p.join("ba.json");
    assert!(pacc(&["compare", "--config-a", s(&ca), "--config-b", s(&cb), "--report", s(&ab)]).status.success());
    assert!(pacc(&["compare", "--config-a", s(&cb), "--config-b", s(&ca), "--report", s(&ba)]).status.success());
    let ab: serde_json::Value = serde_json::from_slice(&std::fs::read(&ab).unwrap()).unwrap();
    let ba: serde_json::Value = serde_json::from_slice(&std::fs::read(&ba).unwrap()).unwrap();
    for k in ["gap_pct", "headway_pct"] {
        let (x, y) = (ab[k].as_f64().unwrap(), ba[k].as_f64().unwrap());
        assert!(x > 0.0, "B (tau 1.0) should keep shorter spacing: {k} = {x}");
        assert!(y < 0.0);
        // Asymmetric baseline: p_ba = -p_ab / (1 - p_ab/100).
        assert!((y + x / (1.0 - x / 100.0)).abs() < 1e-5 * x.abs().max(1.0));
    }
}

#[test]
fn shipped_fixtures_run() {
    let out_dir = tempfile::tempdir().unwrap();
    let cfg = data("scenarios/constant_a.toml");
    let (t, r) = (out_dir.path().join("t.csv"), out_dir.path().join("r.json"));
    let out = pacc(&["simulate", "--config", s(&cfg), "--trace", s(&t), "--report", s(&r)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
