//! End-to-end acceptance suite. Each test pins one claim about the pipeline
//! at a fixed tolerance and prints a `PASS` line when it holds; runtime
//! budgets are asserted where the claim includes one.

use std::process::Command;
use std::time::{Duration, Instant};

use censdist::cli::{
    self, run_null_calibration, summarize_calibration, CalibrationParams, DistanceBand,
    ScreeningGroup,
};
use censdist::geometry::DistanceInterval;
use censdist::sampling::{Interpolation, SamplerConfig};
use censdist::simulation;
use censdist::stats::{self, Alternative, UMethod};
use censdist::survival::{self, SurvivalCurve};

fn exact(values: &[f64]) -> Vec<DistanceInterval> {
    values
        .iter()
        .map(|&v| DistanceInterval::new(v, v).unwrap())
        .collect()
}

fn intervals(pairs: &[(f64, f64)]) -> Vec<DistanceInterval> {
    pairs
        .iter()
        .map(|&(l, u)| DistanceInterval::new(l, u).unwrap())
        .collect()
}

#[test]
fn acceptance_01_ecdf_equivalence() {
    let start = Instant::now();
    // 1000 degenerate observations with plenty of duplicates
    let values: Vec<f64> = (0..1000).map(|i| ((i * 37) % 251) as f64 * 0.5).collect();
    let curve = survival::fit(
        &exact(&values),
        survival::DEFAULT_TOL,
        survival::DEFAULT_MAX_ITER,
    )
    .unwrap();

    // independent weighted-ECDF oracle
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    for &d in curve.eval_points() {
        let ecdf = sorted.iter().filter(|&&v| v <= d).count() as f64 / n;
        let fitted = curve.evaluate(d).1;
        assert!(
            (fitted - ecdf).abs() <= 1e-10,
            "F({d}) = {fitted} but ECDF = {ecdf}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("acceptance 01 (ECDF equivalence, 1000 degenerate obs, 1e-10): PASS ({elapsed:?})");
}

#[test]
fn acceptance_02_npmle_oracle() {
    // all mass on [2,2]: the single point covered by every observation, so
    // the likelihood-1 placement (verified by grid search) is the optimum
    let chain = intervals(&[(0.0, 2.0), (1.0, 3.0), (2.0, 4.0)]);
    let loglik_of_atom = |at: f64| -> f64 {
        chain
            .iter()
            .map(|o| {
                if at >= o.lower && at <= o.upper {
                    0.0f64
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum()
    };
    assert_eq!(loglik_of_atom(2.0), 0.0);
    for candidate in [0.0, 0.5, 1.0, 1.5, 2.5, 3.0, 3.5, 4.0] {
        assert!(loglik_of_atom(candidate) <= loglik_of_atom(2.0));
    }
    let curve = survival::fit(&chain, survival::DEFAULT_TOL, survival::DEFAULT_MAX_ITER).unwrap();
    assert_eq!(curve.support().len(), 1);
    assert_eq!(curve.support()[0].left, 2.0);
    assert_eq!(curve.support()[0].right, 2.0);
    assert!((curve.mass()[0] - 1.0).abs() <= 1e-6);

    let halves = survival::fit(
        &intervals(&[(0.0, 1.0), (2.0, 3.0)]),
        survival::DEFAULT_TOL,
        survival::DEFAULT_MAX_ITER,
    )
    .unwrap();
    assert!((halves.mass()[0] - 0.5).abs() <= 1e-9);
    assert!((halves.mass()[1] - 0.5).abs() <= 1e-9);
    println!("acceptance 02 (NPMLE point-mass and symmetric-halves oracles): PASS");
}

#[test]
fn acceptance_03_greenwood_hand_check() {
    let curve = survival::fit(
        &exact(&[1.0, 2.0, 3.0]),
        survival::DEFAULT_TOL,
        survival::DEFAULT_MAX_ITER,
    )
    .unwrap();
    let band = survival::greenwood_band(&curve, 0.05).unwrap();
    assert_eq!(curve.eval_points()[0], 1.0);
    assert!(
        (band.s_lower()[0] - 0.0541).abs() <= 1e-3,
        "lower = {}",
        band.s_lower()[0]
    );
    assert!(
        (band.s_upper()[0] - 0.9452).abs() <= 1e-3,
        "upper = {}",
        band.s_upper()[0]
    );
    println!("acceptance 03 (exponential Greenwood band hand-check at d=1): PASS");
}

#[test]
fn acceptance_04_u_test_exactness() {
    // every rank configuration for m, n <= 5 against the full-enumeration
    // oracle, exact equality
    for m in 1usize..=5 {
        for n in 1usize..=5 {
            let total = m + n;
            for mask in 0u32..(1 << total) {
                if mask.count_ones() as usize != m {
                    continue;
                }
                let mut s_a = Vec::with_capacity(m);
                let mut s_b = Vec::with_capacity(n);
                for pos in 0..total {
                    let v = pos as f64 + 1.0;
                    if mask & (1 << pos) != 0 {
                        s_a.push(v);
                    } else {
                        s_b.push(v);
                    }
                }
                let got = stats::mann_whitney_u(&s_a, &s_b).unwrap();
                assert_eq!(got.method, UMethod::Exact);
                // oracle: enumerate all C(m+n, m) rank assignments
                let mut favourable = 0u32;
                let mut configs = 0u32;
                for other in 0u32..(1 << total) {
                    if other.count_ones() as usize != m {
                        continue;
                    }
                    configs += 1;
                    let r1: f64 = (0..total)
                        .filter(|p| other & (1 << p) != 0)
                        .map(|p| p as f64 + 1.0)
                        .sum();
                    let u = r1 - (m * (m + 1)) as f64 / 2.0;
                    if u >= got.u {
                        favourable += 1;
                    }
                }
                let oracle = favourable as f64 / configs as f64;
                assert_eq!(got.p, oracle, "m={m} n={n} mask={mask:b}");
            }
        }
    }

    // normal approximation within 0.05 of exact for every m=n=8 configuration
    let mut worst = 0.0f64;
    for mask in 0u32..(1 << 16) {
        if mask.count_ones() != 8 {
            continue;
        }
        let mut s_a = Vec::with_capacity(8);
        let mut s_b = Vec::with_capacity(8);
        for pos in 0..16 {
            let v = pos as f64 + 1.0;
            if mask & (1 << pos) != 0 {
                s_a.push(v);
            } else {
                s_b.push(v);
            }
        }
        let exact_p = stats::mann_whitney_u(&s_a, &s_b).unwrap();
        assert_eq!(exact_p.method, UMethod::Exact);
        let approx_p = stats::mann_whitney_u_normal(&s_a, &s_b).unwrap();
        worst = worst.max((exact_p.p - approx_p.p).abs());
    }
    assert!(worst < 0.05, "worst |exact - approx| = {worst}");
    println!(
        "acceptance 04 (exact U-test vs enumeration, approx within 0.05, worst {worst:.4}): PASS"
    );
}

#[test]
fn acceptance_05_fisher_identities() {
    for p in [0.9, 0.5, 0.05, 1e-4, 1e-9] {
        let (_, combined) = stats::fisher_combine(&[p]).unwrap();
        assert!(
            (combined - p).abs() <= 1e-12 * p.max(1e-6),
            "k=1 recovery of {p}: got {combined}"
        );
        assert!((combined - p).abs() <= 1e-12 || (combined / p - 1.0).abs() <= 1e-12);
    }
    let (_, combined) = stats::fisher_combine(&[0.05, 0.05]).unwrap();
    assert!(
        (combined - 0.0174787).abs() <= 1e-6,
        "combined = {combined}"
    );
    println!("acceptance 05 (Fisher k=1 identity to 1e-12, pair value to 1e-6): PASS");
}

#[test]
fn acceptance_06_mmd_closed_form() {
    let kernel = stats::Kernel::rbf(1.0).unwrap();
    let v = stats::mmd(&[0.0], &[1.0], &kernel).unwrap();
    assert!((v - 0.887095).abs() <= 1e-6, "mmd = {v}");
    let same = stats::mmd(&[3.0, 1.0, 4.0], &[3.0, 1.0, 4.0], &kernel).unwrap();
    assert!(same <= 1e-12, "identical-sample mmd = {same}");
    println!("acceptance 06 (MMD singleton closed form and identity): PASS");
}

#[test]
fn acceptance_07_convergence_trend() {
    let start = Instant::now();
    let mut mean_ks = Vec::new();
    let mut mean_mmd = Vec::new();
    for &n_locales in &[10usize, 100, 1000] {
        let mut ks_sum = 0.0;
        let mut mmd_sum = 0.0;
        for seed in 0..10u64 {
            let world = simulation::build(1e6, 1e6, 1000, n_locales, seed * 7 + 1).unwrap();
            let events = world.generate_events(100, seed * 7 + 2).unwrap();
            let truth = simulation::uncensored_distances(&events);
            let collection = world.censor(&events, 16).unwrap();
            let curve = survival::fit(
                collection.intervals(),
                survival::DEFAULT_TOL,
                stats::MC_FIT_MAX_ITER,
            )
            .unwrap();
            let truth_curve = SurvivalCurve::from_exact_samples(&truth).unwrap();
            ks_sum += stats::ks_statistic(&truth_curve, &curve);

            let band = survival::greenwood_band(&curve, 0.05).unwrap();
            let config = SamplerConfig {
                alpha: 0.05,
                seed: seed * 7 + 3,
                interpolation: Interpolation::LinearWithinSupport,
            };
            let drawn = censdist::sampling::draw(&curve, &band, 100, &config);
            let sigma = stats::median_bandwidth(&truth, &drawn).unwrap();
            let kernel = stats::Kernel::rbf(sigma).unwrap();
            mmd_sum += stats::mmd(&truth, &drawn, &kernel).unwrap();
        }
        mean_ks.push(ks_sum / 10.0);
        mean_mmd.push(mmd_sum / 10.0);
    }
    assert!(
        mean_ks[0] > mean_ks[1] && mean_ks[1] > mean_ks[2],
        "mean KS not strictly decreasing: {mean_ks:?}"
    );
    assert!(
        mean_mmd[0] > mean_mmd[1] && mean_mmd[1] > mean_mmd[2],
        "mean MMD not strictly decreasing: {mean_mmd:?}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    println!(
        "acceptance 07 (reconstruction error decreases with locale count; \
         KS {mean_ks:?}, MMD {mean_mmd:?}): PASS ({elapsed:?})"
    );
}

#[test]
fn acceptance_08_calibration() {
    let start = Instant::now();
    let params = CalibrationParams {
        locale_counts: vec![100],
        n_tests: 200,
        n_locations: 1000,
        n_events: 1000,
        m: 100,
        n: 100,
        trials: 20,
        width: 1e6,
        height: 1e6,
        alpha: 0.05,
        interpolation: Interpolation::LinearWithinSupport,
        samples_per_edge: 16,
        seed: 20260809,
    };
    let runs = run_null_calibration(&params).unwrap();
    let summary = summarize_calibration(&runs, 20, 0.05).unwrap();
    let row = &summary[0];
    let at_five = row.rejection_rates[1];
    assert_eq!(at_five.0, 0.05);
    assert!(
        (0.02..=0.10).contains(&at_five.1),
        "rejection rate at 0.05 = {}",
        at_five.1
    );
    assert!(row.chi2_p > 0.01, "uniformity chi2 p = {}", row.chi2_p);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(900), "took {elapsed:?}");
    println!(
        "acceptance 08 (null calibration: rejection {} at 0.05, uniformity p {:.3}): PASS ({elapsed:?})",
        at_five.1, row.chi2_p
    );
}

fn table_ii() -> Vec<DistanceBand> {
    [
        (8.0, None, 4641.0, 3575.0),
        (6.0, Some(8.0), 4982.0, 3880.0),
        (4.0, Some(6.0), 7871.0, 6088.0),
        (2.0, Some(4.0), 8068.0, 6318.0),
        (0.0, Some(2.0), 9306.0, 7429.0),
    ]
    .iter()
    .map(|&(lower_km, upper_km, invited, attended)| DistanceBand {
        lower_km,
        upper_km,
        invited,
        attended,
    })
    .collect()
}

/// This criterion is left red deliberately: with these counts the fitted
/// "not attended" distribution genuinely dominates "attended" (max CDF gap
/// ~0.025), and 100 Fisher-combined trials of 100-vs-100 samples against
/// fixed fitted curves reliably detect it, so non-significance is not
/// reproducible. An independent reimplementation (numpy/scipy) agrees. See
/// the project notes for the full analysis.
#[test]
fn acceptance_09_maheswaran_replication() {
    let start = Instant::now();
    let bands = table_ii();
    let groups = [
        (ScreeningGroup::Invited, ScreeningGroup::Attended),
        (ScreeningGroup::NotAttended, ScreeningGroup::Attended),
    ];
    let mut non_significant = [0usize; 2];
    let mut p_values: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (g, &(group_a, group_b)) in groups.iter().enumerate() {
        let e_a = censdist::geometry::EventCollection::from_intervals(
            cli::screening_intervals(&bands, group_a, 100.0).unwrap(),
        );
        let e_b = censdist::geometry::EventCollection::from_intervals(
            cli::screening_intervals(&bands, group_b, 100.0).unwrap(),
        );
        for seed in 0..10u64 {
            let config = SamplerConfig {
                alpha: 0.05,
                seed,
                interpolation: Interpolation::LinearWithinSupport,
            };
            let report =
                stats::mc_u_test(&e_a, &e_b, 100, 100, 100, Alternative::ADominatesB, &config)
                    .unwrap();
            if report.p_value > 0.05 {
                non_significant[g] += 1;
            }
            p_values[g].push(report.p_value);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    let ok = non_significant[0] >= 9 && non_significant[1] >= 9;
    if ok {
        println!("acceptance 09 (screening re-analysis non-significant in >= 9/10 seeds): PASS");
    }
    assert!(
        ok,
        "criterion requires p > 0.05 in >= 9 of 10 seeds for both comparisons; got \
         invited-vs-attended {}/10 (p-values {:?}) and not-attended-vs-attended {}/10 \
         (p-values {:?}). The combined test has genuine power against the real \
         distance/attendance association in these counts; see the decisions ledger.",
        non_significant[0], p_values[0], non_significant[1], p_values[1]
    );
}

#[test]
fn acceptance_10_containment() {
    let mut checked = 0usize;
    for world_seed in 0..10u64 {
        let world = simulation::build(1e6, 1e6, 500, 16, world_seed).unwrap();
        let events = world.generate_events(100, world_seed + 100).unwrap();
        let locales = world.locales().unwrap();
        for event in &events {
            let interval = censdist::geometry::event_interval(
                &locales[&event.origin_locale],
                &locales[&event.dest_locale],
                censdist::geometry::DistanceMetric::Euclidean,
                16,
            )
            .unwrap();
            assert!(
                interval.lower <= event.true_distance && event.true_distance <= interval.upper,
                "world {world_seed}: true distance {} outside [{}, {}]",
                event.true_distance,
                interval.lower,
                interval.upper
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
    println!("acceptance 10 (interval containment over 10 worlds x 100 events): PASS");
}

#[test]
fn acceptance_11_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_censdist");
    let dir = tempfile::tempdir().unwrap();
    let intervals_path = dir.path().join("iv.csv");
    std::fs::write(
        &intervals_path,
        "lower,upper,count\n0,2,5\n1,3,4\n2,6,3\n4,7,2\n",
    )
    .unwrap();
    let bands_path = dir.path().join("bands.csv");
    std::fs::write(
        &bands_path,
        "lower_km,upper_km,invited,attended\n8,,4641,3575\n6,8,4982,3880\n4,6,7871,6088\n2,4,8068,6318\n0,2,9306,7429\n",
    )
    .unwrap();

    // (name, subcommand argv factory taking an output tag)
    let runs: Vec<(&str, Box<dyn Fn(&str) -> Vec<String>>)> = vec![
        (
            "sample",
            Box::new({
                let iv = intervals_path.clone();
                let dir = dir.path().to_path_buf();
                move |tag: &str| {
                    vec![
                        "sample".into(),
                        "--intervals".into(),
                        iv.display().to_string(),
                        "-n".into(),
                        "200".into(),
                        "--seed".into(),
                        "42".into(),
                        "--out".into(),
                        dir.join(format!("samples-{tag}.csv")).display().to_string(),
                    ]
                }
            }),
        ),
        (
            "mcutest",
            Box::new({
                let iv = intervals_path.clone();
                let dir = dir.path().to_path_buf();
                move |tag: &str| {
                    vec![
                        "mcutest".into(),
                        "--intervals-a".into(),
                        iv.display().to_string(),
                        "--intervals-b".into(),
                        iv.display().to_string(),
                        "-m".into(),
                        "40".into(),
                        "-n".into(),
                        "40".into(),
                        "--trials".into(),
                        "12".into(),
                        "--seed".into(),
                        "43".into(),
                        "--out".into(),
                        dir.join(format!("report-{tag}.json")).display().to_string(),
                    ]
                }
            }),
        ),
        (
            "simulate",
            Box::new({
                let dir = dir.path().to_path_buf();
                move |tag: &str| {
                    vec![
                        "simulate".into(),
                        "--locations".into(),
                        "80".into(),
                        "--locales".into(),
                        "16".into(),
                        "--events".into(),
                        "50".into(),
                        "--seed".into(),
                        "44".into(),
                        "--out-dir".into(),
                        dir.join(format!("sim-{tag}")).display().to_string(),
                    ]
                }
            }),
        ),
        (
            "calibrate",
            Box::new({
                let dir = dir.path().to_path_buf();
                move |tag: &str| {
                    vec![
                        "calibrate".into(),
                        "--locale-counts".into(),
                        "4".into(),
                        "--n-tests".into(),
                        "4".into(),
                        "--locations".into(),
                        "60".into(),
                        "--events".into(),
                        "80".into(),
                        "-m".into(),
                        "20".into(),
                        "-n".into(),
                        "20".into(),
                        "--trials".into(),
                        "5".into(),
                        "--seed".into(),
                        "45".into(),
                        "--out".into(),
                        dir.join(format!("cal-{tag}")).display().to_string(),
                    ]
                }
            }),
        ),
        (
            "maheswaran",
            Box::new({
                let bands = bands_path.clone();
                let dir = dir.path().to_path_buf();
                move |tag: &str| {
                    vec![
                        "maheswaran".into(),
                        "--bins".into(),
                        bands.display().to_string(),
                        "--trials".into(),
                        "10".into(),
                        "-m".into(),
                        "30".into(),
                        "-n".into(),
                        "30".into(),
                        "--seed".into(),
                        "46".into(),
                        "--out".into(),
                        dir.join(format!("mah-{tag}.json")).display().to_string(),
                    ]
                }
            }),
        ),
    ];

    for (name, argv) in &runs {
        let mut outputs: Vec<Vec<u8>> = Vec::new();
        for (tag, threads) in [("a1", "1"), ("b1", "1"), ("a8", "8"), ("b8", "8")] {
            let args = argv(tag);
            let status = Command::new(bin)
                .arg("--threads")
                .arg(threads)
                .args(&args)
                .output()
                .unwrap();
            assert!(
                status.status.success(),
                "{name} ({tag}) failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            // gather every file this invocation produced, in sorted order
            let out_arg = args
                .iter()
                .position(|a| a == "--out" || a == "--out-dir")
                .map(|i| std::path::PathBuf::from(&args[i + 1]))
                .unwrap();
            let mut blob = Vec::new();
            if out_arg.is_dir() {
                let mut entries: Vec<_> = std::fs::read_dir(&out_arg)
                    .unwrap()
                    .map(|e| e.unwrap().path())
                    .collect();
                entries.sort();
                for path in entries {
                    blob.extend_from_slice(&std::fs::read(&path).unwrap());
                }
            } else {
                blob = std::fs::read(&out_arg).unwrap();
            }
            blob.extend_from_slice(&status.stdout);
            outputs.push(blob);
        }
        assert!(
            outputs.iter().all(|o| o == &outputs[0]),
            "{name}: outputs differ across reruns or thread counts"
        );
    }
    println!("acceptance 11 (seeded commands byte-identical at 1 and 8 threads): PASS");
}
