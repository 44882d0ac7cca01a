mod common;

use abcd_piml::abcd::{step, AbcdParams, AbcdState};
use abcd_piml::cli::{cmd_simulate, RunConfig};
use common::{manifest, read, rel_err};
use serde_json::Value;

#[test]
fn single_step_matches_straight_line_oracle() {
    let doc: Value = serde_json::from_str(&read("tests/fixtures/abcd_step_golden.json")).unwrap();
    let f = |v: &Value, k: &str| v[k].as_f64().unwrap();
    let p = &doc["params"];
    let params = AbcdParams::new(f(p, "a"), f(p, "b"), f(p, "c"), f(p, "d")).unwrap();
    let prev = AbcdState::new(f(&doc["prev"], "sm"), f(&doc["prev"], "gw")).unwrap();
    let (state, fl) = step(&params, prev, f(&doc, "p_mm"), f(&doc, "pet_mm"));
    let e = &doc["expected"];
    let got = [
        ("w", fl.w),
        ("y", fl.y),
        ("et", fl.et),
        ("sm", state.sm),
        ("dr", fl.dr),
        ("gr", fl.gr),
        ("gw", state.gw),
        ("gd", fl.gd),
        ("q", fl.q),
    ];
    for (k, v) in got {
        let err = rel_err(v, f(e, k));
        assert!(err <= 1e-12, "{k}: {v} vs {} (rel {err:e})", f(e, k));
    }
}

fn compare_trajectory(csv_text: &str) {
    let golden = read("tests/fixtures/simulate_golden.csv");
    let mut got = csv_text.lines();
    let mut want = golden.lines();
    assert_eq!(got.next(), want.next(), "header");
    let mut rows = 0;
    for (g, w) in got.by_ref().zip(want.by_ref()) {
        let g: Vec<&str> = g.split(',').collect();
        let w: Vec<&str> = w.split(',').collect();
        assert_eq!(g[0], w[0]);
        for (a, b) in g[1..].iter().zip(&w[1..]) {
            let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
            // sm sits near zero for small b, so an absolute floor applies
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{}: {a} vs {b}", g[0]);
        }
        rows += 1;
    }
    assert_eq!(got.next(), None);
    assert_eq!(want.next(), None);
    assert_eq!(rows, 432);
}

fn golden_config() -> RunConfig {
    RunConfig::load(
        Some(&manifest("data/synthetic.cfg")),
        &[("params".into(), "0.93,5,0.4,1.5".into())],
    )
    .unwrap()
}

#[test]
fn simulated_trajectory_matches_oracle() {
    let out = cmd_simulate(&golden_config()).unwrap();
    assert_eq!(out.files[0].0, "trajectory.csv");
    compare_trajectory(&out.files[0].1);
}

#[test]
fn binary_trajectory_matches_oracle() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_abcd-piml"))
        .args(["simulate", "--config"])
        .arg(manifest("data/synthetic.cfg"))
        .args(["--params", "0.93,5,0.4,1.5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    compare_trajectory(&String::from_utf8(out.stdout).unwrap());
}
