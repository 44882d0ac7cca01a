//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness; exits nonzero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use abcd_piml::abcd::{simulate, step, AbcdParams, AbcdState, Forcing};
use abcd_piml::calib::{calibrate, CalibrationOptions};
use abcd_piml::cli::{cmd_evaluate, load_forcing};
use abcd_piml::metrics::{nse, pbias, rmse, PairedSeries};
use abcd_piml::piml::{predict_piml_with, ClipMode, PimlModel};
use abcd_piml::regress::{gpr_fit, lasso_fit, ridge_fit, DesignMatrix};
use abcd_piml::synthetic::{generate, SyntheticSpec};
use abcd_piml::timeseries::MonthKey;
use common::{bundled_config, gd_least_squares, gpr_direct, lasso_kkt_residual, read, rel_err};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> AbcdParams {
    AbcdParams::new(rng.gen_range(0.05..=1.0), rng.gen_range(1.0..2000.0), rng.gen_range(0.0..=1.0), rng.gen_range(0.01..2.0))
        .unwrap()
}

fn mass_balance() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_soil, mut worst_gw) = (0.0f64, 0.0f64);
    let tuples = 20_000;
    for _ in 0..tuples {
        let params = random_params(&mut rng);
        let prev = AbcdState::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)).unwrap();
        let (p, pet) = (rng.gen_range(0.0..800.0), rng.gen_range(0.0..300.0));
        let (s, f) = step(&params, prev, p, pet);
        worst_soil = worst_soil.max((prev.sm + p - (f.et + s.sm + f.dr + f.gr)).abs());
        worst_gw = worst_gw.max((prev.gw + f.gr - (s.gw + f.gd)).abs());
    }
    let mut worst_cum = 0.0f64;
    let k0 = MonthKey::new(2000, 1).unwrap();
    for _ in 0..200 {
        let params = random_params(&mut rng);
        let init = AbcdState::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)).unwrap();
        let keys: Vec<MonthKey> = (0..120).map(|i| k0.add_months(i)).collect();
        let p: Vec<f64> = (0..120).map(|_| rng.gen_range(0.0..600.0)).collect();
        let pet: Vec<f64> = (0..120).map(|_| rng.gen_range(0.0..250.0)).collect();
        let forcing = Forcing::new(keys, p.clone(), vec![20.0; 120], pet).unwrap();
        let traj = simulate(&params, init, &forcing);
        let end = traj.last().unwrap().state;
        let inflow: f64 = p.iter().sum();
        let outflow: f64 = traj.iter().map(|s| s.fluxes.et + s.fluxes.q).sum();
        let storage = (end.sm - init.sm) + (end.gw - init.gw);
        worst_cum = worst_cum.max((inflow - outflow - storage).abs());
    }
    let elapsed = started.elapsed();
    ensure(worst_soil <= 1e-9, || format!("soil residual {worst_soil:e}"))?;
    ensure(worst_gw <= 1e-9, || format!("groundwater residual {worst_gw:e}"))?;
    ensure(worst_cum <= 1e-7, || format!("120-month residual {worst_cum:e}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{tuples} steps, soil {worst_soil:.1e} mm, groundwater {worst_gw:.1e} mm, 120-month {worst_cum:.1e} mm, {elapsed:.0?}"
    ))
}

fn step_golden() -> Outcome {
    let doc: serde_json::Value = serde_json::from_str(&read("tests/fixtures/abcd_step_golden.json")).unwrap();
    let f = |v: &serde_json::Value, k: &str| v[k].as_f64().unwrap();
    let p = &doc["params"];
    let params = AbcdParams::new(f(p, "a"), f(p, "b"), f(p, "c"), f(p, "d")).unwrap();
    let prev = AbcdState::new(f(&doc["prev"], "sm"), f(&doc["prev"], "gw")).unwrap();
    let (s, fl) = step(&params, prev, f(&doc, "p_mm"), f(&doc, "pet_mm"));
    let got = [("w", fl.w), ("y", fl.y), ("et", fl.et), ("sm", s.sm), ("dr", fl.dr), ("gr", fl.gr), ("gw", s.gw), ("gd", fl.gd), ("q", fl.q)];
    let mut worst = 0.0f64;
    for (k, v) in got {
        let e = rel_err(v, f(&doc["expected"], k));
        ensure(e <= 1e-12, || format!("{k} relative error {e:e}"))?;
        worst = worst.max(e);
    }
    Ok(format!("9 fluxes, worst relative error {worst:.1e}"))
}

fn metric_identities() -> Outcome {
    let obs = [3.0, 7.5, 1.2, 9.9, 4.4];
    let same = PairedSeries::new(&obs, &obs).unwrap();
    ensure(nse(&same) == Ok(1.0) && pbias(&same) == Ok(0.0) && rmse(&same) == 0.0, || "identical series".into())?;
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let flat = vec![mean; obs.len()];
    let m = nse(&PairedSeries::new(&obs, &flat).unwrap()).unwrap();
    ensure(m.abs() <= 1e-12, || format!("mean predictor nse {m}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..80);
        let o: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..300.0)).collect();
        let s: Vec<f64> = o.iter().map(|v| v + rng.gen_range(-50.0..50.0)).collect();
        let pair = PairedSeries::new(&o, &s).unwrap();
        let om = o.iter().sum::<f64>() / n as f64;
        let var: f64 = o.iter().map(|v| (v - om) * (v - om)).sum();
        let r = rmse(&pair);
        let gap = (nse(&pair).unwrap() - (1.0 - n as f64 * r * r / var)).abs();
        worst = worst.max(gap);
    }
    ensure(worst <= 1e-12, || format!("nse/rmse identity gap {worst:e}"))?;
    Ok(format!("1000 random pairs, identity gap {worst:.1e}"))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DesignMatrix {
    DesignMatrix::new(n, m, (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn regressor_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let x = random_matrix(&mut rng, 50, 3);
    let y: Vec<f64> = (0..50).map(|i| 1.0 + x.get(i, 0) - 2.0 * x.get(i, 1) + rng.gen_range(-0.2..0.2)).collect();
    let ridge = ridge_fit(&x, &y, 0.0).unwrap();
    let (b, beta) = gd_least_squares(&x, &y);
    let ridge_gap = ridge.coefficients.iter().zip(&beta).map(|(r, g)| (r - g).abs()).fold((ridge.intercept - b).abs(), f64::max);
    ensure(ridge_gap <= 1e-6, || format!("ridge vs gradient descent {ridge_gap:e}"))?;

    let (mut converged, mut kkt) = (0, 0.0f64);
    for _ in 0..50 {
        let (n, m) = (rng.gen_range(10..60), rng.gen_range(1..6));
        let x = random_matrix(&mut rng, n, m);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lambda = rng.gen_range(0.0..0.4);
        let fit = lasso_fit(&x, &y, lambda).unwrap();
        if fit.converged {
            converged += 1;
            kkt = kkt.max(lasso_kkt_residual(&x, &y, fit.intercept, &fit.coefficients, lambda));
        }
    }
    ensure(kkt <= 1e-6, || format!("LASSO KKT residual {kkt:e}"))?;
    ensure(converged > 0, || "no LASSO fit converged".into())?;

    let mut gp_gap = 0.0f64;
    for n in 1..=5 {
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let model = gpr_fit(&DesignMatrix::from_rows(&xs).unwrap(), &y, 1.0, 0.5, 0.01).unwrap();
        let (mean, var) = model.predict(&DesignMatrix::from_rows(&probe).unwrap()).unwrap();
        let (m_ref, v_ref) = gpr_direct(&xs, &y, &probe, 1.0, 0.5, 0.01);
        for i in 0..probe.len() {
            gp_gap = gp_gap.max((mean[i] - m_ref[i]).abs()).max((var[i] - v_ref[i].max(0.0)).abs());
        }
    }
    ensure(gp_gap <= 1e-8, || format!("GPR vs direct inverse {gp_gap:e}"))?;

    let xs: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
    let y: Vec<f64> = xs.iter().map(|v| (4.0 * v[0]).cos()).collect();
    let x = DesignMatrix::from_rows(&xs).unwrap();
    let (mean, _) = gpr_fit(&x, &y, 1.0, 0.2, 0.0).unwrap().predict(&x).unwrap();
    let interp = mean.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(interp <= 1e-6, || format!("noise-free GPR interpolation {interp:e}"))?;

    Ok(format!(
        "ridge {ridge_gap:.1e}, LASSO KKT {kkt:.1e} ({converged}/50 converged), GPR {gp_gap:.1e}, interpolation {interp:.1e}"
    ))
}

fn calibration_recovery() -> Outcome {
    let started = Instant::now();
    let truth = AbcdParams::new(0.93, 5.0, 0.4, 1.5).unwrap();
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for noise in [0.0, 0.05] {
        let spec = SyntheticSpec { months: 360, q_noise: noise, ..SyntheticSpec::monsoon(truth, 42) };
        let series = generate(&spec).unwrap();
        let pet: Vec<f64> = series.records().iter().map(|r| r.pet_mm.unwrap()).collect();
        let forcing = Forcing::from_series(&series, pet).unwrap();
        let r = calibrate(&forcing, &series.observed_q(), &CalibrationOptions::default()).unwrap();
        let p = r.params;
        notes.push(format!("noise {noise}: NSE {:.6}, a {:.4}, c {:.4}", r.train_nse, p.a(), p.c()));
        if noise == 0.0 {
            if r.train_nse < 0.999 || (p.a() - 0.93).abs() > 0.02 || (p.c() - 0.4).abs() > 0.05 {
                failures.push(notes.last().unwrap().clone());
            }
        } else if r.train_nse < 0.95 {
            failures.push(notes.last().unwrap().clone());
        }
    }
    let elapsed = started.elapsed();
    ensure(failures.is_empty(), || failures.join("; "))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{}, {elapsed:.1?}", notes.join("; ")))
}

struct Bundled {
    first: abcd_piml::cli::Evaluation,
    second: abcd_piml::cli::Evaluation,
}

fn cascade(b: &Bundled) -> Outcome {
    let mut notes = Vec::new();
    for m in &b.first.report.models {
        let kind = m.regressor.to_string();
        ensure(m.piml.q.nse > m.baseline.q.nse, || {
            format!("{kind}: PIML Q NSE {} not above baseline {}", m.piml.q.nse, m.baseline.q.nse)
        })?;
        if kind == "gpr" {
            ensure(m.piml.et.nse >= 0.95 && m.piml.q.nse >= 0.95, || {
                format!("GPR ET NSE {} Q NSE {}", m.piml.et.nse, m.piml.q.nse)
            })?;
        }
        notes.push(format!("{kind} Q {:.3} vs {:.3}", m.piml.q.nse, m.baseline.q.nse));
    }
    let gpr = b.first.report.models.iter().find(|m| m.regressor.to_string() == "gpr").ok_or("no GPR model")?;
    Ok(format!("GPR ET {:.3}; {}", gpr.piml.et.nse, notes.join(", ")))
}

fn physical_consistency(b: &Bundled) -> Outcome {
    let e = &b.first;
    let input = load_forcing(&bundled_config()).map_err(|e| e.to_string())?;
    let n = input.forcing.len();
    let split = input.series.index_of(e.report.periods.test_start).ok_or("test start not in forcing")?;
    let n_test = n - split;
    let file = |name: &str| e.output.files.iter().find(|(f, _)| f == name).map(|(_, c)| c.as_str()).unwrap();
    let predicted = |name: &str| -> Vec<f64> {
        file(name).lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
    };
    let mut total = 0;
    for m in &e.report.models {
        let kind = m.regressor;
        for name in [format!("predictions_{kind}_piml_q.csv"), format!("predictions_{kind}_piml_et.csv"), format!("predictions_{kind}_baseline_q.csv")] {
            let v = predicted(&name);
            ensure(v.iter().all(|x| *x >= 0.0), || format!("negative value in {name}"))?;
        }
        let model = PimlModel::from_json(file(&format!("piml_{kind}.json"))).map_err(|e| e.to_string())?;
        let off = predict_piml_with(&model, &input.forcing, ClipMode::Off).map_err(|e| e.to_string())?.slice(n - n_test..n);
        let neg = |v: &[f64]| v.iter().filter(|x| **x < 0.0).count();
        ensure(neg(&off.et_hat) == m.piml.clip.et, || format!("{kind} ET clip count {} vs {}", m.piml.clip.et, neg(&off.et_hat)))?;
        if m.piml.clip.et == 0 {
            ensure(neg(&off.q_hat) == m.piml.clip.q, || format!("{kind} Q clip count {} vs {}", m.piml.clip.q, neg(&off.q_hat)))?;
        }
        let zeros = predicted(&format!("predictions_{kind}_baseline_q.csv")).iter().filter(|x| **x == 0.0).count();
        ensure(zeros == m.baseline.clip_count, || format!("{kind} baseline clip count {} vs {zeros}", m.baseline.clip_count))?;
        total += m.baseline.clip_count + m.piml.clip.et + m.piml.clip.q;
    }
    Ok(format!("all emitted estimates >= 0, {total} clipped values audited"))
}

fn determinism(b: &Bundled) -> Outcome {
    let (x, y) = (&b.first.output.files, &b.second.output.files);
    ensure(x.len() == y.len(), || "file sets differ".into())?;
    for ((na, ca), (nb, cb)) in x.iter().zip(y) {
        ensure(na == nb && ca == cb, || format!("{na} differs between runs"))?;
    }
    let bytes: usize = x.iter().map(|(_, c)| c.len()).sum();
    Ok(format!("{} files, {bytes} bytes identical", x.len()))
}

fn table_fixture() -> Outcome {
    let want = read("tests/fixtures/ml_models_table.md");
    let got = common::reference_ml_table().to_markdown();
    ensure(got == want, || format!("rendered:\n{got}"))?;
    Ok(format!("{} lines match byte for byte", want.lines().count()))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "mass-balance closure", mass_balance()),
        (2, "abcd step golden fixture", step_golden()),
        (3, "metric identities", metric_identities()),
        (4, "regressor oracles", regressor_oracles()),
        (5, "calibration truth recovery", calibration_recovery()),
    ];
    let run = || cmd_evaluate(&bundled_config()).map_err(|e| e.to_string());
    match run().and_then(|first| Ok(Bundled { first, second: run()? })) {
        Ok(b) => {
            results.push((6, "cascade self-consistency", cascade(&b)));
            results.push((7, "physical consistency", physical_consistency(&b)));
            results.push((8, "determinism", determinism(&b)));
        }
        Err(e) => {
            for (i, name) in [(6, "cascade self-consistency"), (7, "physical consistency"), (8, "determinism")] {
                results.push((i, name, Err(format!("evaluate failed: {e}"))));
            }
        }
    }
    results.push((9, "table formatter fixture", table_fixture()));

    let mut failed = 0;
    for (i, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {i} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {i} {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
