//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines are always printed; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use mixline_core::evalkit::percent_error;
use mixline_core::netmodel::{build_standard_line, NetworkModel};
use mixline_core::pipeline::{run_experiment, ExperimentConfig, ExperimentOutputs};
use mixline_core::regress::{fit, predict, Dataset, Learned, RegressorSpec, Variant};
use mixline_core::relaysim::{
    loop_time_constant, simulate_trajectory, solve_slg_fault, FaultScenario, K0Setting,
    RelaySettings,
};
use mixline_core::rxplot::GrayImage;
use mixline_core::texture::{compute_glcm, UNIT_OFFSETS};
use mixline_core::{ComplexValue, EvalReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Criteria that fail for reasons outside the implementation; see the
/// README. Their FAIL lines are still printed. Criterion 1: several printed
/// overhead error values sit more than 0.003 from what their own columns
/// give, consistent with rounding to the nearest 0.005.
const DOCUMENTED_FAILURES: [u32; 1] = [1];

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// (actual km, estimated km, section length km, printed error %)
const TABLE2: [(f64, f64, f64); 8] = [
    (20.0, 18.47938, 0.765),
    (45.0, 46.51063, 0.755),
    (70.0, 71.05625, 0.525),
    (95.0, 95.45563, 0.225),
    (120.0, 119.5869, 0.21),
    (145.0, 143.7181, 0.645),
    (170.0, 172.4563, 1.225),
    (195.0, 194.5644, 0.22),
];

const TABLE3: [(f64, f64, f64); 10] = [
    (0.8, 0.835775, 0.357),
    (1.8, 1.707975, 0.921),
    (2.8, 2.687975, 1.121),
    (3.8, 3.7623, 0.377),
    (4.8, 4.817025, 0.17),
    (5.8, 5.7321, 0.679),
    (6.8, 6.720675, 0.794),
    (7.8, 7.757025, 0.43),
    (8.8, 8.66965, 1.304),
    (9.8, 9.755, 0.45),
];

fn metric_fidelity() -> Check {
    let mut worst: f64 = 0.0;
    let mut off = Vec::new();
    let rows = TABLE2
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, r)| ("overhead", i, *r, 200.0));
    let rows = rows.chain(
        TABLE3
            .iter()
            .enumerate()
            .map(|(i, r)| ("cable", i, *r, 10.0)),
    );
    for (section, i, (a, e, printed), length) in rows {
        let pe = percent_error(a, e, length).unwrap();
        let dev = (pe - printed).abs();
        worst = worst.max(dev);
        if dev > 0.003 {
            off.push(format!("{section} row {} {pe:.4} vs {printed}", i + 1));
        }
    }
    let row1 = percent_error(TABLE2[0].0, TABLE2[0].1, 200.0).unwrap();
    let mut detail = format!(
        "max deviation {worst:.5} over 17 rows; overhead row 1 recomputes to {row1:.3} (printed 0.765)"
    );
    if !off.is_empty() {
        detail.push_str(&format!("; beyond 0.003: {}", off.join(", ")));
    }
    ensure(off.is_empty(), detail)
}

fn brute_force_glcm(img: &GrayImage, (dr, dc): (i32, i32), symmetric: bool) -> Vec<u64> {
    let l = usize::from(img.levels);
    let mut counts = vec![0u64; l * l];
    for r in 0..img.height as i32 {
        for c in 0..img.width as i32 {
            for r2 in 0..img.height as i32 {
                for c2 in 0..img.width as i32 {
                    if r2 - r == dr && c2 - c == dc {
                        let i = usize::from(img.get(c as usize, r as usize));
                        let j = usize::from(img.get(c2 as usize, r2 as usize));
                        counts[i * l + j] += 1;
                        if symmetric {
                            counts[j * l + i] += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}

fn glcm_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut compared = 0;
    for _ in 0..50 {
        let (w, h) = (rng.random_range(2..=16usize), rng.random_range(2..=16usize));
        let pixels = (0..w * h).map(|_| rng.random_range(0..8u8)).collect();
        let img = GrayImage::from_pixels(w, h, 8, pixels).unwrap();
        for offset in UNIT_OFFSETS {
            for symmetric in [true, false] {
                let counts = brute_force_glcm(&img, offset, symmetric);
                let total: u64 = counts.iter().sum();
                let expected: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
                let got = compute_glcm(&img, offset, symmetric).unwrap();
                if got.p != expected {
                    return Err(format!(
                        "mismatch on a {w}x{h} image, offset {offset:?}, symmetric {symmetric}"
                    ));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} matrices identical to pair enumeration"))
}

/// Relay settings whose record is long enough for the DC offset to fall
/// below 1e-8 of its initial value before the last window.
fn settled(net: &NetworkModel, sc: &FaultScenario) -> RelaySettings {
    let sol = solve_slg_fault(net, sc).unwrap();
    let tau = loop_time_constant(sol.loop_impedance, net.line.frequency_hz);
    let cycles = (1e8f64.ln() * tau * net.line.frequency_hz).ceil() as usize + 1;
    RelaySettings {
        k0: K0Setting::MatchedPath,
        cycles_post: cycles.max(6),
        ..Default::default()
    }
}

fn converged(net: &NetworkModel, d: f64) -> ComplexValue {
    let sc = FaultScenario::ag(d, 0.0, 0.0);
    simulate_trajectory(net, &sc, &settled(net, &sc))
        .unwrap()
        .last()
        .unwrap()
}

fn radial_closed_form() -> Check {
    let mut net = build_standard_line();
    net.source_local.z1 = ComplexValue::new(0.0, 0.0);
    net.source_local.z0 = ComplexValue::new(0.0, 0.0);
    net.source_remote = None;
    net.load_mw = 0.0;
    let mut worst: f64 = 0.0;
    for d in [50.0, 100.0, 150.0, 205.0] {
        let (z1, _) = net.line.cumulative_sequence_impedance(d).unwrap();
        worst = worst.max((converged(&net, d) - z1).norm() / z1.norm());
    }
    ensure(
        worst <= 0.01,
        format!("max relative deviation from Z1(d) {worst:.2e}"),
    )
}

fn junction_signature() -> Check {
    let net = build_standard_line();
    let x = |d: f64| converged(&net, d).im;
    let before = (x(200.0) - x(195.0)) / 5.0;
    let after = (x(200.2) - x(200.0)) / 0.2;
    let ratio = after / before;
    ensure(
        (ratio - 0.5).abs() <= 0.02,
        format!("dX/dd {before:.5} ohm/km before, {after:.5} after, ratio {ratio:.4}"),
    )
}

/// Intercept and slopes of a fitted linear-in-x model, read off its predictions.
fn linear_coefficients(m: &mixline_core::FittedModel, p: usize) -> Vec<f64> {
    let zero = vec![0.0; p];
    let b0 = predict(m, &zero).unwrap();
    let mut out = vec![b0];
    for j in 0..p {
        let mut e = zero.clone();
        e[j] = 1.0;
        out.push(predict(m, &e).unwrap() - b0);
    }
    out
}

fn regression_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut notes = Vec::new();
    let mut failed = Vec::new();

    // (a) planted noiseless model
    let p = 20;
    let beta: Vec<f64> = (0..=p).map(|_| rng.random_range(-3.0..3.0)).collect();
    let x: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| beta[0] + r.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let m = fit(
        &Dataset::from_xy(x, y).unwrap(),
        &RegressorSpec::new(Variant::Linear),
        0,
    )
    .unwrap();
    let err_a = linear_coefficients(&m, p)
        .iter()
        .zip(&beta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    notes.push(format!("(a) OLS coef error {err_a:.1e}"));
    if err_a > 1e-8 {
        failed.push("a");
    }

    // (b) robust vs OLS under 20% outliers
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[(v.len() - 1) / 2] + v[v.len() / 2])
    };
    let mut wins = 0;
    for _ in 0..50 {
        let beta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let mut y: Vec<f64> = x
            .iter()
            .map(|r| {
                beta[0]
                    + r.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>()
                    + rng.random_range(-0.1..0.1)
            })
            .collect();
        for yi in y.iter_mut().take(10) {
            *yi += rng.random_range(10.0..30.0);
        }
        let ds = Dataset::from_xy(x, y).unwrap();
        let err = |v| {
            let m = fit(&ds, &RegressorSpec::new(v), 0).unwrap();
            median(
                linear_coefficients(&m, 3)
                    .iter()
                    .zip(&beta)
                    .map(|(a, b)| (a - b).abs())
                    .collect(),
            )
        };
        if err(Variant::RobustLinear) < err(Variant::Linear) {
            wins += 1;
        }
    }
    notes.push(format!("(b) robust wins {wins}/50"));
    if wins < 45 {
        failed.push("b");
    }

    // (c) fully grown tree
    let x: Vec<Vec<f64>> = (0..80)
        .map(|i| vec![i as f64 * 0.37, rng.random_range(-1.0..1.0)])
        .collect();
    let y: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..1.0)).collect();
    let ds = Dataset::from_xy(x.clone(), y.clone()).unwrap();
    let t = fit(
        &ds,
        &RegressorSpec::new(Variant::FineTree).with("min_leaf", 1.0),
        0,
    )
    .unwrap();
    let err_c = x
        .iter()
        .zip(&y)
        .map(|(r, v)| (predict(&t, r).unwrap() - v).abs())
        .fold(0.0, f64::max);
    notes.push(format!("(c) tree training error {err_c:.1e}"));
    if err_c != 0.0 {
        failed.push("c");
    }

    // (d) noiseless GPR interpolation, every kernel
    let x: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| (r[0] + r[1]).sin() + r[2] * r[3])
        .collect();
    let ds = Dataset::from_xy(x.clone(), y.clone()).unwrap();
    let mut err_d: f64 = 0.0;
    for v in [
        Variant::SquaredExponentialGpr,
        Variant::Matern52Gpr,
        Variant::ExponentialGpr,
        Variant::RationalQuadraticGpr,
    ] {
        let m = fit(&ds, &RegressorSpec::new(v).with("sigma_n", 1e-8), 0).unwrap();
        for (r, yi) in x.iter().zip(&y) {
            err_d = err_d.max((predict(&m, r).unwrap() - yi).abs());
        }
    }
    notes.push(format!("(d) GPR interpolation error {err_d:.1e}"));
    if err_d > 1e-5 {
        failed.push("d");
    }

    // (e) linear SVR inside its tube
    let x: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = x.iter().map(|r| 0.5 + 0.3 * r[0] - 0.2 * r[4]).collect();
    let m = fit(
        &Dataset::from_xy(x.clone(), y.clone()).unwrap(),
        &RegressorSpec::new(Variant::LinearSvm),
        0,
    )
    .unwrap();
    let eps = match &m.learned {
        Learned::Svr(s) => s.epsilon,
        _ => unreachable!(),
    };
    let worst_e = x
        .iter()
        .zip(&y)
        .map(|(r, v)| (predict(&m, r).unwrap() - v).abs())
        .fold(0.0, f64::max);
    notes.push(format!(
        "(e) SVR max residual {worst_e:.2e} vs eps {eps:.2e}"
    ));
    if worst_e > eps + 1e-3 {
        failed.push("e");
    }

    let detail = notes.join("; ");
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("failed {}: {detail}", failed.join(",")))
    }
}

struct Runs {
    first: ExperimentOutputs,
    dirs: [PathBuf; 2],
}

fn run_twice(root: &Path) -> Runs {
    let cfg = ExperimentConfig::load(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml"),
    )
    .unwrap();
    let dirs = [root.join("run1"), root.join("run2")];
    let first = run_experiment(&cfg, &dirs[0]).unwrap();
    run_experiment(&cfg, &dirs[1]).unwrap();
    Runs { first, dirs }
}

fn desk_accuracy(runs: &Runs) -> Check {
    let (oh, cb) = (&runs.first.overhead, &runs.first.cable);
    let line = |r: &EvalReport| {
        format!(
            "{} {} cv {:.4} max {:.3}%",
            r.section,
            r.best_variant,
            r.best_rmse(),
            r.max_percent_error()
        )
    };
    ensure(
        oh.max_percent_error() <= 2.5
            && cb.max_percent_error() <= 2.0
            && oh.best_rmse() <= 0.05
            && cb.best_rmse() <= 0.05,
        format!("{}; {}", line(oh), line(cb)),
    )
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(runs: &Runs) -> Check {
    let a = files_under(&runs.dirs[0]);
    let b = files_under(&runs.dirs[1]);
    if a != b {
        return Err("runs produced different file sets".into());
    }
    let count = |ext: &str| {
        a.iter()
            .filter(|p| p.extension().is_some_and(|e| e == ext))
            .count()
    };
    for rel in &a {
        if std::fs::read(runs.dirs[0].join(rel)).unwrap()
            != std::fs::read(runs.dirs[1].join(rel)).unwrap()
        {
            return Err(format!("{} differs between runs", rel.display()));
        }
    }
    ensure(
        count("pgm") == 108 && count("csv") == 2 && count("txt") == 2,
        format!(
            "{} files identical ({} images, {} CSVs, {} text reports)",
            a.len(),
            count("pgm"),
            count("csv"),
            count("txt")
        ),
    )
}

fn report_completeness(runs: &Runs) -> Check {
    for r in [&runs.first.overhead, &runs.first.cable] {
        let order: Vec<Variant> = r.model_rmse.iter().map(|m| m.variant).collect();
        if order != Variant::ALL {
            return Err(format!("{} report rows out of order", r.section));
        }
        let min = r
            .model_rmse
            .iter()
            .map(|m| m.rmse)
            .fold(f64::INFINITY, f64::min);
        let first_min = r.model_rmse.iter().find(|m| m.rmse == min).unwrap().variant;
        if first_min != r.best_variant {
            return Err(format!(
                "{} best {} but argmin is {first_min}",
                r.section, r.best_variant
            ));
        }
        let text = std::fs::read_to_string(runs.dirs[0].join(format!("reports/{}.txt", r.section)))
            .unwrap();
        if Variant::ALL.iter().any(|v| !text.contains(v.name())) {
            return Err(format!("{} text report misses a variant", r.section));
        }
    }
    Ok("19 rows in table order, best = argmin in both sections".into())
}

fn run_check(f: impl FnOnce() -> Check) -> Check {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Check)> = vec![
        (1, "metric fidelity", run_check(metric_fidelity)),
        (2, "GLCM oracle equivalence", run_check(glcm_oracle)),
        (3, "closed-form relay check", run_check(radial_closed_form)),
        (4, "junction signature", run_check(junction_signature)),
        (5, "regression recovery suite", run_check(regression_suite)),
    ];
    match catch_unwind(AssertUnwindSafe(|| run_twice(tmp.path()))) {
        Ok(runs) => {
            results.push((
                6,
                "end-to-end desk accuracy",
                run_check(|| desk_accuracy(&runs)),
            ));
            results.push((7, "determinism", run_check(|| determinism(&runs))));
            results.push((
                8,
                "report completeness",
                run_check(|| report_completeness(&runs)),
            ));
        }
        Err(_) => {
            for (i, name) in [
                (6, "end-to-end desk accuracy"),
                (7, "determinism"),
                (8, "report completeness"),
            ] {
                results.push((i, name, Err("experiment run failed".into())));
            }
        }
    }
    let mut failures = Vec::new();
    for (i, name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {i} ({name}): {d}"),
            Err(d) => {
                failures.push(*i);
                println!("FAIL criterion {i} ({name}): {d}");
            }
        }
    }
    let unexpected: Vec<u32> = failures
        .iter()
        .copied()
        .filter(|i| !DOCUMENTED_FAILURES.contains(i))
        .collect();
    println!(
        "acceptance: {} passed, {} failed ({} documented as unattainable, {} unexpected)",
        results.len() - failures.len(),
        failures.len(),
        failures.len() - unexpected.len(),
        unexpected.len()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
