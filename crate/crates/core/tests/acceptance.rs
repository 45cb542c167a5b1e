//! Acceptance checks, one PASS/FAIL line each. Exits non-zero if any fail.
//!
//! Every numeric claim is checked against an oracle implemented here,
//! independently of the library: J0 by trapezoidal quadrature of its
//! integral representation, forward passes by plain loops, and the
//! synthetic fixture's separability by a logistic-regression fit.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use demasq::attribution::integrated_gradients;
use demasq::bessel::zero_of_j0;
use demasq::dataio::{stratified_split, write_jsonl};
use demasq::detector::{evaluate, sample_energy, train, TrainingConfig};
use demasq::energy::{drumhead_frequency, energy_report, source_frequency};
use demasq::fixtures::TwoClusters;
use demasq::{BesselZeroTable, EmbeddingRecord, Execution, Label, MediumSpeed, ModelParameters};

const ZERO_COUNT: usize = 768;
const ZERO_TOLERANCE: f64 = 1e-10;
const ZERO_BUDGET: Duration = Duration::from_secs(5);
const FIRST_ZEROS: [f64; 3] = [2.404825557695773, 5.520078110286311, 8.653727912911013];
/// The published values carry 15 significant digits.
const FIRST_ZEROS_TOLERANCE: f64 = 1e-14;

const RATIO_TOLERANCE: f64 = 1e-6;
const PUBLISHED_RATIOS: [(usize, f64); 2] = [(2, 2.295418), (3, 3.598485)];

const RANDOM_EMBEDDINGS: usize = 1000;

const FD_STEP: f64 = 1e-4;
const FD_RELATIVE_TOLERANCE: f64 = 1e-3;
/// Below this absolute difference, rounding in the difference quotient
/// dominates and the relative error carries no information.
const FD_ABSOLUTE_FLOOR: f64 = 1e-10;
const FD_NETWORKS: usize = 100;
const FD_BUDGET: Duration = Duration::from_secs(30);
const SMALL_NET: [usize; 4] = [16, 8, 4, 1];

const IG_NETWORKS: usize = 50;
const IG_STEPS: usize = 512;
const IG_RELATIVE_TOLERANCE: f64 = 0.01;
const IG_ABSOLUTE_SLACK: f64 = 1e-6;

const E2E_SAMPLES: usize = 2000;
const E2E_DIM: usize = 768;
const E2E_MIN_RATE: f64 = 0.99;
const E2E_BUDGET: Duration = Duration::from_secs(120);

type Check = Result<String, String>;
type NamedCheck = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let checks: [NamedCheck; 9] = [
        ("bessel zeros", bessel_zeros),
        ("frequency ratios", frequency_ratios),
        ("shift invariance", shift_invariance),
        ("energy ordering", energy_ordering),
        ("gradient correctness", gradient_correctness),
        ("IG completeness", ig_completeness),
        ("end-to-end separation", end_to_end),
        ("determinism", determinism),
        ("per-domain evaluation", per_domain_evaluation),
    ];
    // Optional substring filters, e.g. `cargo test --test acceptance -- IG`.
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected: Vec<_> = checks
        .into_iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())))
        .collect();
    let mut failed = 0;
    for &(name, check) in &selected {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.2} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({secs:.2} s)");
            }
        }
    }
    if failed == 0 {
        println!("all {} acceptance checks passed", selected.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} acceptance checks failed", selected.len());
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- oracles

/// `J0(x) = (1/pi) * integral_0^pi cos(x sin t) dt` by the trapezoidal
/// rule, which converges geometrically for this periodic integrand once the
/// node count exceeds `x`. Neumaier-compensated summation.
fn oracle_j0(x: f64) -> f64 {
    let nodes = 64 + x.abs().ceil() as usize;
    let h = std::f64::consts::PI / nodes as f64;
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for i in 0..=nodes {
        let weight = if i == 0 || i == nodes { 0.5 } else { 1.0 };
        let term = weight * (x * (i as f64 * h).sin()).cos();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            carry += (sum - t) + term;
        } else {
            carry += (term - t) + sum;
        }
        sum = t;
    }
    (sum + carry) * h / std::f64::consts::PI
}

/// n-th zero by bisection on `[(n - 1/2) pi, n pi]`, which holds exactly
/// one sign change of J0.
fn oracle_zero(n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let (mut lo, mut hi) = ((n as f64 - 0.5) * pi, n as f64 * pi);
    let mut f_lo = oracle_j0(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = oracle_j0(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Logit and ReLU activation pattern by plain loops.
fn oracle_forward(params: &ModelParameters, x: &[f64]) -> (f64, Vec<bool>) {
    let mut a = x.to_vec();
    let mut pattern = Vec::new();
    let last = params.layers().len() - 1;
    for (l, layer) in params.layers().iter().enumerate() {
        let mut z = vec![0.0; layer.outputs()];
        for (o, zo) in z.iter_mut().enumerate() {
            *zo = layer.bias[o]
                + (0..layer.inputs())
                    .map(|i| layer.weights[[o, i]] * a[i])
                    .sum::<f64>();
        }
        if l < last {
            pattern.extend(z.iter().map(|&v| v > 0.0));
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        } else {
            a = z;
        }
    }
    (a[0], pattern)
}

fn oracle_sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn random_small_net(rng: &mut ChaCha8Rng) -> ModelParameters {
    let mut params =
        ModelParameters::with_layer_dims(rng.random(), &SMALL_NET).expect("valid dims");
    for layer in params.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.2..0.2));
    }
    params
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

// ---------------------------------------------------------------- checks

fn bessel_zeros() -> Check {
    let start = Instant::now();
    let ours: Vec<f64> = (1..=ZERO_COUNT)
        .map(zero_of_j0)
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    let elapsed = start.elapsed();
    ensure(elapsed < ZERO_BUDGET, || {
        format!("computing {ZERO_COUNT} zeros took {elapsed:?}")
    })?;

    let mut worst = (0.0f64, 0);
    for (i, &z) in ours.iter().enumerate() {
        let err = (z - oracle_zero(i + 1)).abs();
        if err > worst.0 {
            worst = (err, i + 1);
        }
    }
    ensure(worst.0 <= ZERO_TOLERANCE, || {
        format!(
            "zero {} is off by {:.3e} from the quadrature oracle",
            worst.1, worst.0
        )
    })?;
    for (i, expected) in FIRST_ZEROS.iter().enumerate() {
        ensure((ours[i] - expected).abs() <= FIRST_ZEROS_TOLERANCE, || {
            format!("zero {} = {} but expected {expected}", i + 1, ours[i])
        })?;
    }
    Ok(format!(
        "n=1..{ZERO_COUNT} max |err| {:.2e} (at n={}) <= {ZERO_TOLERANCE:e}, computed in {:.3} s",
        worst.0,
        worst.1,
        elapsed.as_secs_f64()
    ))
}

fn frequency_ratios() -> Check {
    let table = BesselZeroTable::build(3).map_err(fail)?;
    let first = oracle_zero(1);
    let mut detail = Vec::new();
    for (n, published) in PUBLISHED_RATIOS {
        let ours = drumhead_frequency(n, &table).map_err(fail)?;
        let oracle = oracle_zero(n) / first;
        ensure((ours - oracle).abs() <= RATIO_TOLERANCE, || {
            format!("ratio {n}: {ours} vs oracle {oracle}")
        })?;
        ensure((ours - published).abs() <= RATIO_TOLERANCE, || {
            format!("ratio {n}: {ours} vs published {published}")
        })?;
        detail.push(format!("E_f0({n}) = {ours:.9}"));
    }
    Ok(format!("{} within {RATIO_TOLERANCE:e}", detail.join(", ")))
}

fn shift_invariance() -> Check {
    let table = BesselZeroTable::build(E2E_DIM).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..RANDOM_EMBEDDINGS {
        let len = rng.random_range(2..=E2E_DIM);
        // Values on a 2^-10 grid and integer offsets keep every sum exact,
        // so the distinct-value count cannot change through rounding.
        let e: Vec<f64> = (0..len)
            .map(|_| rng.random_range(-4096i32..4096) as f64 / 1024.0)
            .collect();
        let k = rng.random_range(-64i32..=64) as f64;
        let moved: Vec<f64> = e.iter().map(|v| v + k).collect();
        let (a, b) = (
            source_frequency(&e, &table).map_err(fail)?,
            source_frequency(&moved, &table).map_err(fail)?,
        );
        ensure(a.to_bits() == b.to_bits(), || {
            format!("trial {trial}: {a} != {b} after shifting by {k}")
        })?;
    }
    Ok(format!("{RANDOM_EMBEDDINGS} embeddings, bit-exact"))
}

fn energy_ordering() -> Check {
    let table = BesselZeroTable::build(E2E_DIM).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = TrainingConfig {
        k_features: 0,
        ..TrainingConfig::default()
    };
    let params = ModelParameters::with_layer_dims(0, &[E2E_DIM, 4, 1]).map_err(fail)?;
    for trial in 0..RANDOM_EMBEDDINGS {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let e = gaussian(&mut rng, E2E_DIM, scale);
        let r = energy_report(&e, &table, MediumSpeed::ScaledByFundamental).map_err(fail)?;
        let (e0, e1, f0) = (
            r.observer_frequency_label0,
            r.observer_frequency_label1,
            r.source_frequency,
        );
        ensure(e1 > e0 && e0 > f0 && f0 >= 1.0, || {
            format!("trial {trial}: E_f(1)={e1}, E_f(0)={e0}, E_f0={f0}")
        })?;
        // With no perturbations the energy term is exactly zero at label 0
        // and positive at label 1.
        let t0 = sample_energy(&params, &e, Label::Generated, &cfg, &table)
            .map_err(fail)?
            .energy_term();
        let t1 = sample_energy(&params, &e, Label::Human, &cfg, &table)
            .map_err(fail)?
            .energy_term();
        ensure(t0 == 0.0 && t1 > 0.0, || {
            format!("trial {trial}: energy terms {t0}, {t1}")
        })?;
    }
    Ok(format!("E_f(1) > E_f(0) > E_f0 >= 1 for {RANDOM_EMBEDDINGS} embeddings; energy term 0 at y=0, > 0 at y=1"))
}

fn relative_error(analytic: f64, numeric: f64) -> Option<f64> {
    let diff = (analytic - numeric).abs();
    if diff <= FD_ABSOLUTE_FLOOR {
        None
    } else {
        Some(diff / analytic.abs().max(numeric.abs()))
    }
}

fn gradient_correctness() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut compared, mut skipped, mut worst) = (0usize, 0usize, 0.0f64);
    for net in 0..FD_NETWORKS {
        let params = random_small_net(&mut rng);
        let x = gaussian(&mut rng, SMALL_NET[0], 1.0);
        let (logit, pattern) = oracle_forward(&params, &x);
        let fwd = params.forward(&x).map_err(fail)?;
        ensure((fwd.logit - logit).abs() <= 1e-12, || {
            format!("net {net}: forward disagrees")
        })?;

        // Parameters: gradient of the logit.
        let grads = params.backward_params(&fwd.trace, 1.0).map_err(fail)?;
        for (l, g) in grads.layers.iter().enumerate() {
            let entries = g
                .weights
                .indexed_iter()
                .map(|((o, i), &v)| (Some((o, i)), o, v));
            let biases = g.bias.indexed_iter().map(|(o, &v)| (None, o, v));
            for (weight, o, analytic) in entries.chain(biases) {
                let eval = |delta: f64| {
                    let mut p = params.clone();
                    let layer = &mut p.layers_mut()[l];
                    match weight {
                        Some(idx) => layer.weights[idx] += delta,
                        None => layer.bias[o] += delta,
                    }
                    oracle_forward(&p, &x)
                };
                let ((up, pu), (down, pd)) = (eval(FD_STEP), eval(-FD_STEP));
                if pu != pattern || pd != pattern {
                    skipped += 1;
                    continue;
                }
                compared += 1;
                if let Some(rel) = relative_error(analytic, (up - down) / (2.0 * FD_STEP)) {
                    worst = worst.max(rel);
                    ensure(rel <= FD_RELATIVE_TOLERANCE, || {
                        format!("net {net}, layer {l}: parameter gradient relative error {rel:.3e}")
                    })?;
                }
            }
        }

        // Inputs: gradient of the probability.
        let analytic = params.input_gradient(&x).map_err(fail)?;
        for (i, &a) in analytic.iter().enumerate() {
            let eval = |delta: f64| {
                let mut v = x.clone();
                v[i] += delta;
                let (z, p) = oracle_forward(&params, &v);
                (oracle_sigmoid(z), p)
            };
            let ((up, pu), (down, pd)) = (eval(FD_STEP), eval(-FD_STEP));
            if pu != pattern || pd != pattern {
                skipped += 1;
                continue;
            }
            compared += 1;
            if let Some(rel) = relative_error(a, (up - down) / (2.0 * FD_STEP)) {
                worst = worst.max(rel);
                ensure(rel <= FD_RELATIVE_TOLERANCE, || {
                    format!("net {net}: input gradient {i} relative error {rel:.3e}")
                })?;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < FD_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{FD_NETWORKS} nets {SMALL_NET:?}, {compared} entries (skipped {skipped} crossing a ReLU kink), \
         max rel err {worst:.2e} <= {FD_RELATIVE_TOLERANCE:e}"
    ))
}

fn ig_completeness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for net in 0..IG_NETWORKS {
        // Networks as the initializer produces them. With zero biases the
        // ReLU pattern is constant along the ray from the zero baseline, so
        // the midpoint rule sees a smooth integrand; random biases put
        // kinks on the path whose quadrature error can exceed the bound
        // when F(x) - F(0) is tiny.
        let params = ModelParameters::with_layer_dims(rng.random(), &SMALL_NET).map_err(fail)?;
        let x = gaussian(&mut rng, SMALL_NET[0], 1.0);
        let result = integrated_gradients(&params, &x, IG_STEPS).map_err(fail)?;
        let f = |v: &[f64]| oracle_sigmoid(oracle_forward(&params, v).0);
        let delta = f(&x) - f(&vec![0.0; x.len()]);
        let gap = (result.attributions.iter().sum::<f64>() - delta).abs();
        let allowed = IG_RELATIVE_TOLERANCE * delta.abs() + IG_ABSOLUTE_SLACK;
        worst = worst.max(gap / allowed);
        ensure(gap <= allowed, || {
            format!("net {net}: gap {gap:.3e} exceeds {allowed:.3e} (F(x) - F(0) = {delta:.3e})")
        })?;
    }
    Ok(format!(
        "{IG_NETWORKS} initializer nets {SMALL_NET:?} at {IG_STEPS} steps, worst gap / allowance {:.1e}",
        worst
    ))
}

/// Full-batch gradient descent on the logistic loss; returns held-out
/// accuracy.
fn logistic_regression_accuracy(train: &[EmbeddingRecord], test: &[EmbeddingRecord]) -> f64 {
    let dim = train[0].embedding.len();
    let (mut w, mut b) = (vec![0.0; dim], 0.0);
    let rate = 1.0;
    for _ in 0..100 {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for r in train {
            let z = b + r.embedding.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>();
            let err = oracle_sigmoid(z) - r.label.as_f64();
            gb += err;
            for (g, x) in gw.iter_mut().zip(&r.embedding) {
                *g += err * x;
            }
        }
        let n = train.len() as f64;
        b -= rate * gb / n;
        for (w, g) in w.iter_mut().zip(&gw) {
            *w -= rate * g / n;
        }
    }
    let correct = test
        .iter()
        .filter(|r| {
            let z = b + r.embedding.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>();
            Label::from_probability(oracle_sigmoid(z), 0.5) == r.label
        })
        .count();
    correct as f64 / test.len() as f64
}

fn end_to_end() -> Check {
    let records = TwoClusters::new(E2E_SAMPLES, E2E_DIM, 2024).generate();
    let cfg = TrainingConfig::default();
    let split = stratified_split(&records, cfg.split_ratio, cfg.seed).map_err(fail)?;
    let oracle = logistic_regression_accuracy(&split.train, &split.test);
    ensure(oracle >= E2E_MIN_RATE, || {
        format!("fixture not separable: logistic regression held-out accuracy {oracle}")
    })?;

    let start = Instant::now();
    let model = train(&split.train, &cfg, Execution::Sequential).map_err(fail)?;
    let eval = evaluate(&model.params, &split.test, &cfg, Execution::Sequential).map_err(fail)?;
    let elapsed = start.elapsed();
    let (tpr, tnr) = (
        eval.metrics.tpr().unwrap_or(0.0),
        eval.metrics.tnr().unwrap_or(0.0),
    );
    ensure(tpr >= E2E_MIN_RATE && tnr >= E2E_MIN_RATE, || {
        format!("held-out TPR {tpr:.4}, TNR {tnr:.4}")
    })?;
    ensure(elapsed < E2E_BUDGET, || {
        format!("train + evaluate took {elapsed:?}")
    })?;
    Ok(format!(
        "logistic oracle {:.3}; held-out TPR {tpr:.4}, TNR {tnr:.4} on {} samples; \
         sequential train + evaluate {:.1} s; final loss {:.4}",
        oracle,
        split.test.len(),
        elapsed.as_secs_f64(),
        model.log.epochs.last().map_or(f64::NAN, |e| e.mean_loss)
    ))
}

// ---------------------------------------------------------------- CLI

fn demasq(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_demasq"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(fail)?;
    if !out.status.success() {
        return Err(format!(
            "`demasq {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Three named domains over one pair of clusters.
fn multi_domain_corpus(samples: usize, dim: usize, seed: u64) -> Vec<EmbeddingRecord> {
    const DOMAINS: [&str; 3] = ["finance", "medicine", "open_qa"];
    TwoClusters::new(samples, dim, seed)
        .generate()
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            let domain = DOMAINS[(i / 2) % DOMAINS.len()];
            r.id = format!("{domain}-{i:05}");
            r.domain = domain.to_string();
            r
        })
        .collect()
}

/// Runs train then evaluate on its held-out split, returning the model
/// bytes, the energy CSV bytes and the evaluate stdout.
fn train_and_evaluate(
    dir: &Path,
    data: &Path,
    extra: &[&str],
) -> Result<(Vec<u8>, Vec<u8>, String), String> {
    let model = dir.join("model.bin");
    let test = dir.join("test.jsonl");
    let csv = dir.join("energies.csv");
    let mut args = vec![
        "train",
        "--data",
        path_str(data),
        "--out",
        path_str(&model),
        "--test-out",
        path_str(&test),
        "--epochs",
        "6",
        "--lr",
        "1e-3",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    demasq(&args)?;
    let mut args = vec![
        "evaluate",
        "--data",
        path_str(&test),
        "--model",
        path_str(&model),
        "--energies-out",
        path_str(&csv),
    ];
    args.extend_from_slice(extra);
    let table = demasq(&args)?;
    Ok((
        std::fs::read(&model).map_err(fail)?,
        std::fs::read(&csv).map_err(fail)?,
        table,
    ))
}

fn determinism() -> Check {
    let root = tempfile::tempdir().map_err(fail)?;
    let data = root.path().join("corpus.jsonl");
    write_jsonl(&data, &multi_domain_corpus(400, 64, 7)).map_err(fail)?;
    let mut runs = Vec::new();
    for (name, extra) in [
        ("a", &[][..]),
        ("b", &[][..]),
        ("sequential", &["--sequential"][..]),
    ] {
        let dir = root.path().join(name);
        std::fs::create_dir(&dir).map_err(fail)?;
        runs.push(train_and_evaluate(&dir, &data, extra)?);
    }
    for (i, run) in runs.iter().enumerate().skip(1) {
        ensure(run.0 == runs[0].0, || {
            format!("run {i} wrote a different model file")
        })?;
        ensure(run.1 == runs[0].1, || {
            format!("run {i} wrote a different energy CSV")
        })?;
    }
    Ok(format!(
        "3 train+evaluate runs (2 default, 1 --sequential): identical {}-byte models and {}-byte CSVs",
        runs[0].0.len(),
        runs[0].1.len()
    ))
}

fn per_domain_evaluation() -> Check {
    let root = tempfile::tempdir().map_err(fail)?;
    let data = root.path().join("corpus.jsonl");
    write_jsonl(&data, &multi_domain_corpus(600, 128, 8)).map_err(fail)?;
    let (_, csv_bytes, table) = train_and_evaluate(root.path(), &data, &[])?;

    let lines: Vec<&str> = table.lines().collect();
    ensure(
        lines.first() == Some(&"Dataset & Samples & TPR & TNR \\\\"),
        || format!("unexpected table header in\n{table}"),
    )?;
    for name in ["finance", "medicine", "open_qa", "Combined"] {
        ensure(
            lines.iter().any(|l| l.starts_with(&format!("{name} & "))),
            || format!("no {name} row in\n{table}"),
        )?;
    }

    let mut reader = csv::Reader::from_reader(csv_bytes.as_slice());
    let headers = reader.headers().map_err(fail)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(format!("no {name} column"))
    };
    let (pred_col, energy_col) = (col("predicted_label")?, col("signed_energy")?);
    let mut sums = [(0.0, 0usize); 2];
    for row in reader.records() {
        let row = row.map_err(fail)?;
        let label: usize = row[pred_col].parse().map_err(fail)?;
        let energy: f64 = row[energy_col].parse().map_err(fail)?;
        sums[label].0 += energy;
        sums[label].1 += 1;
    }
    ensure(sums[0].1 > 0 && sums[1].1 > 0, || {
        format!("one predicted class is empty: {sums:?}")
    })?;
    let (mean0, mean1) = (sums[0].0 / sums[0].1 as f64, sums[1].0 / sums[1].1 as f64);
    ensure(mean0 < 0.0 && 0.0 < mean1, || {
        format!("mean signed energies {mean0} (predicted 0), {mean1} (predicted 1)")
    })?;
    let combined = lines.iter().find(|l| l.starts_with("Combined")).unwrap();
    Ok(format!(
        "{} table rows, `{combined}`; mean signed energy {mean0:.1} (predicted 0) < 0 < {mean1:.1} (predicted 1)",
        lines.len() - 1
    ))
}
