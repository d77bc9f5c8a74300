//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use spdiv::bounds::{bad_upper_bound, certify_gap, good_lower_bound, BoxRegime};
use spdiv::diversity::{solow_polasky, sp_gradient, SimilarityMatrix, RESIDUAL_TOLERANCE};
use spdiv::geometry::{margins, Point2};
use spdiv::reduction::{
    decide_via_sp, plan_bit_complexity, reduce, verify_instance, ReductionMode, ScaleValue,
    DEFAULT_SLACK,
};
use spdiv::solvers::{max_independent_set, sp_select_exact, SelectOptions, DEFAULT_BUDGET};
use spdiv::{Execution, KernelParams, PointSet};

use common::{random_bit_points, random_rational_points, run_cli, write_points};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// Random unit-diagonal symmetric matrix with off-diagonals uniform in `[lo, hi]`.
fn random_matrix<R: Rng>(rng: &mut R, k: usize, lo: f64, hi: f64) -> SimilarityMatrix {
    let mut e = vec![0.0; k * k];
    for i in 0..k {
        e[i * k + i] = 1.0;
        for j in (i + 1)..k {
            let v = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            e[i * k + j] = v;
            e[j * k + i] = v;
        }
    }
    SimilarityMatrix::from_entries(k, e).unwrap()
}

fn sp(z: &SimilarityMatrix) -> f64 {
    solow_polasky(z).unwrap().sp_value
}

fn example_golden() -> Outcome {
    // closed form for two points at distance d: 2 / (1 + e^-d)
    let expected: [([usize; 2], f64, f64); 3] = [
        ([1, 3], 1.809301, 2.25),
        ([1, 2], 1.905148, 3.0),
        ([2, 3], 1.954045, 3.75),
    ];
    let report = spdiv_cli::cmd_example().map_err(|e| e.to_string())?;
    ensure(report.exit_code == 0, || {
        "example reported a mismatch".into()
    })?;
    let pairs = report.results["pairs"].as_array().unwrap();
    let mut worst = 0.0f64;
    for (subset, golden, d) in expected {
        let entry = pairs
            .iter()
            .find(|p| p["subset"] == serde_json::json!(subset))
            .ok_or_else(|| format!("pair {subset:?} missing"))?;
        let got = entry["sp_value"].as_f64().unwrap();
        let closed = 2.0 / (1.0 + (-d).exp());
        ensure((closed - golden).abs() <= 1e-6, || {
            format!("closed form {closed} vs {golden}")
        })?;
        worst = worst.max((got - golden).abs());
    }
    ensure(worst <= 1e-6, || format!("max abs error {worst:e}"))?;
    ensure(
        report.results["unique_optimum"] == Value::Bool(true),
        || "optimum not unique".into(),
    )?;
    ensure(
        report.results["best"]["indices"] == serde_json::json!([2, 3]),
        || format!("best = {}", report.results["best"]["indices"]),
    )?;
    let (code, out, _) = run_cli(&["example"]);
    ensure(code == 0 && out.contains("1.95404526018"), || {
        "CLI example failed".into()
    })?;
    Ok(format!("max abs error {worst:.1e}, unique optimum {{2,3}}"))
}

fn box_matrix_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e55a);
    let mut worst_residual_ratio = 0.0f64;
    let mut min_w = f64::INFINITY;
    let mut worst_grad = 0.0f64;
    let mut checks = 0usize;
    for k in 2..=8usize {
        let rho = 1.0 / (4.0 * k as f64) - 1e-6;
        for _ in 0..1000 {
            let z = random_matrix(&mut rng, k, 0.0, rho);
            let w = solow_polasky(&z).map_err(|e| format!("k={k}: solve failed: {e}"))?;
            let limit = RESIDUAL_TOLERANCE * k as f64;
            ensure(w.residual <= limit, || {
                format!("k={k}: residual {}", w.residual)
            })?;
            worst_residual_ratio = worst_residual_ratio.max(w.residual / limit);
            let wmin = w.w.iter().cloned().fold(f64::INFINITY, f64::min);
            ensure(wmin > 2.0 / 3.0, || format!("k={k}: w_i = {wmin}"))?;
            min_w = min_w.min(wmin);
            for a in 0..k {
                for b in (a + 1)..k {
                    let v = z.get(a, b);
                    let h = 1e-6;
                    let mut plus = z.clone();
                    plus.set_off_diagonal(a, b, v + h).unwrap();
                    let mut minus = z.clone();
                    minus.set_off_diagonal(a, b, (v - h).max(0.0)).unwrap();
                    let step = (v + h) - (v - h).max(0.0);
                    let fd = (sp(&plus) - sp(&minus)) / step;
                    let g = sp_gradient(&z, a, b).unwrap();
                    let err = rel_err(fd, g);
                    ensure(err <= 1e-5, || {
                        format!("k={k} ({a},{b}): gradient {g} vs fd {fd}")
                    })?;
                    worst_grad = worst_grad.max(err);
                    // increase by 1e-4 while staying inside the box
                    let (base, raised) = if v + 1e-4 <= rho {
                        (v, v + 1e-4)
                    } else {
                        (v - 1e-4, v)
                    };
                    let mut lower = z.clone();
                    lower.set_off_diagonal(a, b, base).unwrap();
                    let mut upper = z.clone();
                    upper.set_off_diagonal(a, b, raised).unwrap();
                    let (s0, s1) = (sp(&lower), sp(&upper));
                    ensure(s1 < s0, || {
                        format!("k={k} ({a},{b}): SP {s0} -> {s1} not decreasing")
                    })?;
                    checks += 1;
                }
            }
        }
    }
    Ok(format!(
        "7000 matrices, {checks} pair checks, min w {min_w:.4}, residual <= {worst_residual_ratio:.1e} of limit, gradient rel err <= {worst_grad:.1e}"
    ))
}

fn extremal_formulas() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in 2..=8usize {
        let kf = k as f64;
        let rho = 1.0 / (4.0 * kf) - 1e-6;
        for r in [0.0, 1e-4, 1.0 / (8.0 * kf)] {
            let got = sp(&SimilarityMatrix::uniform(k, r).unwrap());
            let want = kf / (1.0 + (kf - 1.0) * r);
            let lib = good_lower_bound(k, r).unwrap();
            let err = rel_err(got, want).max(rel_err(lib, want));
            ensure(err <= 1e-10, || {
                format!("uniform k={k} r={r}: {got} vs {want}")
            })?;
            worst = worst.max(err);
            cases += 1;
        }
        for q in [1e-4, 1.0 / (8.0 * kf), rho] {
            let mut z = SimilarityMatrix::uniform(k, 0.0).unwrap();
            z.set_off_diagonal(0, 1, q).unwrap();
            let got = sp(&z);
            let want = (kf - 2.0) + 2.0 / (1.0 + q);
            let lib = bad_upper_bound(k, q).unwrap();
            let err = rel_err(got, want).max(rel_err(lib, want));
            ensure(err <= 1e-10, || {
                format!("block k={k} q={q}: {got} vs {want}")
            })?;
            worst = worst.max(err);
            cases += 1;
        }
    }
    Ok(format!("{cases} cases, max rel err {worst:.1e}"))
}

fn separation_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0401);
    let triples: Vec<(usize, f64, f64, u64)> = (0..10_000)
        .map(|_| {
            let k = rng.gen_range(2..=8usize);
            let kf = k as f64;
            let rho = 1.0 / (4.0 * kf) - 1e-6;
            let q = (rng.gen_range((1e-6f64).ln()..rho.ln())).exp();
            // r strictly below q / (k(k-1)), down to three decades under it
            let r = q / (kf * (kf - 1.0))
                * (rng.gen_range(-3.0..0.0f64) * std::f64::consts::LN_10).exp()
                * 0.999;
            (k, r, q, rng.gen())
        })
        .collect();
    let failures: Vec<String> = triples
        .par_iter()
        .filter_map(|&(k, r, q, seed)| {
            let rho = 1.0 / (4.0 * k as f64) - 1e-6;
            let regime = BoxRegime::new(k, rho, r, q).ok()?;
            let cert = certify_gap(&regime);
            if !(cert.good_lower > cert.bad_upper && cert.separated && cert.sufficient_condition) {
                return Some(format!("k={k} r={r:e} q={q:e}: bounds not separated"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut min_good = f64::INFINITY;
            let mut max_bad = f64::NEG_INFINITY;
            for _ in 0..100 {
                min_good = min_good.min(sp(&random_matrix(&mut rng, k, 0.0, r)));
                let mut bad = random_matrix(&mut rng, k, 0.0, rho);
                let a = rng.gen_range(0..k);
                let b = (a + rng.gen_range(1..k)) % k;
                bad.set_off_diagonal(a, b, rng.gen_range(q..=rho)).unwrap();
                max_bad = max_bad.max(sp(&bad));
            }
            (min_good <= max_bad)
                .then(|| format!("k={k} r={r:e} q={q:e}: good {min_good} <= bad {max_bad}"))
        })
        .collect();
    match failures.first() {
        None => Ok("10000 triples, 1000000 matrix pairs".into()),
        Some(f) => Err(format!("{} failures, first: {f}", failures.len())),
    }
}

fn reduction_end_to_end() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e0);
    let opts = SelectOptions::default();
    let (mut yes, mut no) = (0, 0);
    for case in 0..200 {
        let k = rng.gen_range(2..=4usize);
        let n = rng.gen_range((k + 1).max(4)..=10usize);
        let den = [16, 32, 64][rng.gen_range(0..3)];
        let spread = [96, 160, 255][rng.gen_range(0..3)].min(4 * den);
        let points = random_rational_points(&mut rng, n, spread, den);
        let bits = points.bit_length().unwrap();
        ensure(bits <= 8, || format!("case {case}: B = {bits}"))?;
        let theta0 = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let params = KernelParams::new(theta0).unwrap();
        let inst = reduce(
            &points,
            k,
            &params,
            ReductionMode::Analytic {
                slack: DEFAULT_SLACK,
            },
        )
        .map_err(|e| format!("case {case}: reduce failed: {e}"))?;
        let decision = decide_via_sp(&inst, &opts).map_err(|e| format!("case {case}: {e}"))?;
        let oracle =
            max_independent_set(&inst.graph, k, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        ensure(decision.accept == oracle.exists(), || {
            format!(
                "case {case}: SP decision {} vs independent set {}",
                decision.accept,
                oracle.exists()
            )
        })?;
        if let Some(w) = &decision.witness {
            ensure(inst.graph.is_independent(w), || {
                format!("case {case}: witness {w:?} not independent")
            })?;
        }
        let report = verify_instance(inst, &opts).map_err(|e| format!("case {case}: {e}"))?;
        ensure(report.passed, || {
            format!(
                "case {case}: classes_match={} argmax_independent={} strict={} thresholds={}",
                report.classes_match,
                report.argmax_independent,
                report.strict_separation,
                report.thresholds_respected
            )
        })?;
        if oracle.exists() {
            ensure(report.optimal_class == report.independent_sets, || {
                format!("case {case}: classes differ")
            })?;
            yes += 1;
        } else {
            no += 1;
        }
    }
    Ok(format!(
        "200 instances ({yes} with an independent k-set, {no} without)"
    ))
}

/// Smallest integer `c` with `c * theta0 >= ln 2`.
fn c_oracle(theta0: f64) -> u64 {
    let mut c = 1u64;
    while (c as f64) * theta0 < std::f64::consts::LN_2 {
        c += 1;
    }
    c
}

fn ceil_log2(m: u64) -> u64 {
    let mut bits = 0;
    while (1u64 << bits) < m {
        bits += 1;
    }
    bits
}

fn bit_margins() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb175);
    let mut cases = 0;
    let mut max_excess = i64::MIN;
    for b in 1..=8u32 {
        for _ in 0..25 {
            let n = if b == 1 {
                rng.gen_range(2..=4)
            } else {
                rng.gen_range(2..=8)
            };
            let points = random_bit_points(&mut rng, n, b);
            let big_b = points.bit_length().unwrap();
            ensure(big_b <= b as u64, || format!("B={b}: measured {big_b}"))?;
            let eps = BigRational::new(BigInt::from(1), BigInt::from(1) << (12 * big_b as usize));
            let m = margins(&points).map_err(|e| e.to_string())?;
            let exact = m.exact.clone().unwrap();
            ensure(exact.delta_squared >= &eps * &eps, || {
                format!("B={b}: delta < 2^-12B")
            })?;
            if let Some(sigma) = &exact.eta_pair_squared {
                let one_eps = BigRational::from_integer(1.into()) + &eps;
                ensure(*sigma >= &one_eps * &one_eps, || {
                    format!("B={b}: eta < 2^-12B")
                })?;
            }
            let k = rng.gen_range(2..=n.min(5));
            let theta0 = [1.0, 0.5, 2.0, 0.1, 0.01][rng.gen_range(0..5)];
            let plan = plan_bit_complexity(&points, k, &KernelParams::new(theta0).unwrap())
                .map_err(|e| format!("B={b} k={k} theta0={theta0}: {e}"))?;
            let kk = k as u64;
            let big_m = (4 * kk).max(kk * (kk - 1) + 1);
            let c = c_oracle(theta0);
            let want = BigInt::from(c * ceil_log2(big_m)) << (12 * big_b as usize);
            let ScaleValue::Integer(l) = &plan.scale else {
                return Err("bit plan scale is not an integer".into());
            };
            ensure(*l == want, || {
                format!("B={b} k={k} theta0={theta0}: L = {l}, expected {want}")
            })?;
            // theta0 L eps >= ln M, compared as logs
            let lhs = theta0.ln() + ((c * ceil_log2(big_m)) as f64).ln();
            ensure(lhs >= (big_m as f64).ln().ln(), || {
                format!("B={b}: exponent condition fails")
            })?;
            let bound = 12 * big_b
                + u64::from(64 - c.leading_zeros())
                + u64::from(64 - ceil_log2(big_m).leading_zeros());
            ensure(l.bits() <= bound, || {
                format!("B={b}: L has {} bits > {bound}", l.bits())
            })?;
            max_excess = max_excess.max(l.bits() as i64 - 12 * big_b as i64);
            cases += 1;
        }
    }
    let pinned = PointSet::rational(vec![
        Point2::from_fractions(0, 1, 0, 1),
        Point2::from_fractions(1, 1, 0, 1),
    ])
    .unwrap();
    let plan = plan_bit_complexity(&pinned, 2, &KernelParams::new(1.0).unwrap())
        .map_err(|e| e.to_string())?;
    ensure(
        plan.scale == ScaleValue::Integer(BigInt::from(12288)),
        || format!("pinned L = {:?}", plan.scale),
    )?;
    Ok(format!(
        "{cases} point sets, L bits - 12B <= {max_excess}, pinned L = 12288"
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xd37);
    let pts = random_rational_points(&mut rng, 9, 160, 64);
    let file = write_points(dir.path(), "pts.txt", &pts);
    let f = file.to_str().unwrap();
    let out_a = dir.path().join("a.txt");
    let commands: Vec<Vec<&str>> = vec![
        vec!["example"],
        vec!["eval", f, "--theta0", "1"],
        vec!["select", f, "--theta0", "1", "--k", "3"],
        vec!["select", f, "--theta0", "1", "--k", "3", "--greedy"],
        vec!["margins", f],
        vec![
            "reduce",
            f,
            "--theta0",
            "1",
            "--k",
            "3",
            "--output",
            out_a.to_str().unwrap(),
        ],
        vec!["reduce", f, "--theta0", "1", "--k", "3", "--mode", "bits"],
        vec!["verify", f, "--theta0", "1", "--k", "3"],
    ];
    let mut runs = 0;
    for cmd in &commands {
        let mut baseline: Option<(i32, String, Vec<u8>)> = None;
        for threads in [None, Some("1"), Some("2"), Some("4"), Some("8")] {
            for json in [false, true] {
                let mut args: Vec<&str> = cmd.clone();
                if let Some(t) = threads {
                    args.extend(["--threads", t]);
                }
                if json {
                    args.push("--json");
                }
                for _ in 0..2 {
                    let (code, out, err) = run_cli(&args);
                    ensure(err.is_empty(), || format!("{args:?}: {err}"))?;
                    let image = std::fs::read(&out_a).unwrap_or_default();
                    let key = (code, out, image);
                    if !json {
                        match &baseline {
                            None => baseline = Some(key),
                            Some(b) => ensure(*b == key, || format!("{args:?} differs"))?,
                        }
                    }
                    runs += 1;
                }
            }
        }
    }
    // the installed binary agrees with the in-process runner
    let bin = env!("CARGO_BIN_EXE_spdiv");
    for threads in ["1", "3"] {
        let args = [
            "verify",
            f,
            "--theta0",
            "1",
            "--k",
            "3",
            "--json",
            "--threads",
            threads,
        ];
        let proc = std::process::Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        let (_, inproc, _) = run_cli(&args);
        ensure(proc.stdout == inproc.as_bytes(), || {
            "binary output differs".into()
        })?;
        runs += 1;
    }
    // library solver across execution modes and pool sizes
    let floating = PointSet::floating(
        (0..14)
            .map(|_| Point2::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)))
            .collect(),
    )
    .unwrap();
    let params = KernelParams::new(1.0).unwrap();
    let mut reference: Option<String> = None;
    for threads in [1, 2, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        for execution in [Execution::Sequential, Execution::Parallel] {
            let opts = SelectOptions {
                execution,
                ..SelectOptions::default()
            };
            let res = pool
                .install(|| sp_select_exact(&floating, 4, &params, &opts))
                .map_err(|e| e.to_string())?;
            let text = format!("{res:?}");
            match &reference {
                None => reference = Some(text),
                Some(r) => ensure(*r == text, || {
                    format!("solver output differs at {threads} threads")
                })?,
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs byte-identical"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            "worked example golden values",
            Duration::from_secs(1),
            example_golden,
        ),
        (
            "positivity, gradient and monotonicity suite",
            Duration::from_secs(30),
            box_matrix_suite,
        ),
        (
            "extremal formula equivalence",
            Duration::from_secs(5),
            extremal_formulas,
        ),
        (
            "separation soundness",
            Duration::from_secs(60),
            separation_soundness,
        ),
        (
            "reduction end to end",
            Duration::from_secs(300),
            reduction_end_to_end,
        ),
        (
            "bit-complexity margins and scale",
            Duration::from_secs(10),
            bit_margins,
        ),
        (
            "determinism across runs and threads",
            Duration::MAX,
            determinism,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!("PASS  {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!("{} of 7 criteria passed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
