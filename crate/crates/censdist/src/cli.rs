//! The `censdist` command-line tool.
//!
//! Subcommands: `estimate`, `sample`, `mcutest`, `ks`, `mmd`, `simulate`,
//! `calibrate`, `maheswaran`. Exit codes: 0 success, 2 input error,
//! 3 convergence failure, 4 degenerate statistic. Stochastic subcommands
//! take `--seed` (or the `CENSDIST_SEED` environment variable); without
//! either, a seed is generated and reported on stderr so any run can be
//! reproduced.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, DistanceInterval, DistanceMetric, EventCollection};
use crate::io;
use crate::sampling::{Interpolation, SamplerConfig};
use crate::simulation;
use crate::stats::{self, Alternative};
use crate::survival;

/// Rejection levels reported by the calibration experiment.
pub const CALIBRATION_LEVELS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Parser)]
#[command(
    name = "censdist",
    version,
    about = "Reconstruct, sample, and compare transportation-distance distributions from locale-censored records"
)]
struct Cli {
    /// Cap the rayon worker count (results do not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the distance CDF from censored events or precomputed intervals
    Estimate(EstimateArgs),
    /// Draw uncensored distance samples from a fitted curve
    Sample(SampleArgs),
    /// Monte Carlo U-test: does one collection dominate the other?
    Mcutest(McutestArgs),
    /// Kolmogorov-Smirnov distance between two fitted curves
    Ks(KsArgs),
    /// Maximum mean discrepancy between two sample files
    Mmd(MmdArgs),
    /// Generate a synthetic grid world and export its realizations
    Simulate(SimulateArgs),
    /// Type I error calibration: repeated null tests over locale counts
    Calibrate(CalibrateArgs),
    /// Re-analysis of screening attendance from distance-band counts
    Maheswaran(MaheswaranArgs),
}

#[derive(Args)]
struct MetricArgs {
    /// Distance metric: euclidean | haversine
    #[arg(long, default_value = "euclidean")]
    metric: String,

    /// Sphere radius for the haversine metric (km)
    #[arg(long, default_value_t = geometry::EARTH_RADIUS_KM)]
    earth_radius: f64,

    /// Boundary points sampled per polygon edge
    #[arg(long, default_value_t = geometry::DEFAULT_SAMPLES_PER_EDGE)]
    samples_per_edge: usize,
}

impl MetricArgs {
    fn resolve(&self) -> Result<DistanceMetric> {
        match self.metric.as_str() {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "haversine" => Ok(DistanceMetric::Haversine {
                earth_radius: self.earth_radius,
            }),
            other => Err(Error::InvalidInput(format!(
                "unknown metric `{other}` (expected euclidean or haversine)"
            ))),
        }
    }
}

fn parse_interpolation(name: &str) -> Result<Interpolation> {
    match name {
        "step" => Ok(Interpolation::Step),
        "linear" => Ok(Interpolation::LinearWithinSupport),
        other => Err(Error::InvalidInput(format!(
            "unknown interpolation `{other}` (expected step or linear)"
        ))),
    }
}

fn parse_direction(name: &str) -> Result<Alternative> {
    match name {
        "a-dominates-b" => Ok(Alternative::ADominatesB),
        "b-dominates-a" => Ok(Alternative::BDominatesA),
        other => Err(Error::InvalidInput(format!(
            "unknown direction `{other}` (expected a-dominates-b or b-dominates-a)"
        ))),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            eprintln!("seed={s}");
            s
        }
    }
}

/// Loads an interval set from exactly one of `--events` (+ `--locales`) or
/// `--intervals`.
fn load_intervals(
    events: Option<&Path>,
    locales: Option<&Path>,
    intervals: Option<&Path>,
    metric: &MetricArgs,
    label: &str,
) -> Result<Vec<DistanceInterval>> {
    match (events, intervals) {
        (Some(_), Some(_)) => Err(Error::InvalidInput(format!(
            "give either --events{label} or --intervals{label}, not both"
        ))),
        (None, None) => Err(Error::InvalidInput(format!(
            "one of --events{label} or --intervals{label} is required"
        ))),
        (None, Some(path)) => io::read_intervals_csv(path),
        (Some(events_path), None) => {
            let locales_path = locales.ok_or_else(|| {
                Error::InvalidInput(format!("--locales is required with --events{label}"))
            })?;
            let events = io::read_events_csv(events_path)?;
            let map = io::read_locales_geojson(locales_path)?;
            geometry::intervals_from_events(&events, &map, metric.resolve()?, metric.samples_per_edge)
        }
    }
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EstimateArgs {
    /// Censored events CSV (origin_id,dest_id[,count]); requires --locales
    #[arg(long, conflicts_with = "intervals")]
    events: Option<PathBuf>,

    /// Locale polygons (GeoJSON FeatureCollection)
    #[arg(long)]
    locales: Option<PathBuf>,

    /// Precomputed intervals CSV (lower,upper[,count])
    #[arg(long)]
    intervals: Option<PathBuf>,

    #[command(flatten)]
    metric: MetricArgs,

    /// Confidence-band level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// EM convergence tolerance
    #[arg(long, default_value_t = survival::DEFAULT_TOL)]
    tol: f64,

    /// EM iteration cap
    #[arg(long, default_value_t = survival::DEFAULT_MAX_ITER)]
    max_iter: usize,

    /// Output curve CSV
    #[arg(long)]
    out: PathBuf,
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let intervals = load_intervals(
        args.events.as_deref(),
        args.locales.as_deref(),
        args.intervals.as_deref(),
        &args.metric,
        "",
    )?;
    let curve = survival::fit(&intervals, args.tol, args.max_iter)?;
    let band = survival::greenwood_band(&curve, args.alpha)?;
    eprintln!(
        "support={} iterations={}",
        curve.support().len(),
        curve.em_iterations()
    );
    io::write_curve_csv(&args.out, &curve, &band)
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SampleArgs {
    #[arg(long, conflicts_with = "intervals")]
    events: Option<PathBuf>,

    #[arg(long)]
    locales: Option<PathBuf>,

    #[arg(long)]
    intervals: Option<PathBuf>,

    #[command(flatten)]
    metric: MetricArgs,

    /// Number of samples to draw
    #[arg(short, long, default_value_t = 100)]
    n: usize,

    /// Band level used for the uncertainty perturbation
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Within-support mass placement: step | linear
    #[arg(long, default_value = "linear")]
    interpolation: String,

    #[arg(long, env = "CENSDIST_SEED")]
    seed: Option<u64>,

    /// Output samples CSV
    #[arg(long)]
    out: PathBuf,
}

fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let intervals = load_intervals(
        args.events.as_deref(),
        args.locales.as_deref(),
        args.intervals.as_deref(),
        &args.metric,
        "",
    )?;
    let seed = resolve_seed(args.seed);
    let config = SamplerConfig {
        alpha: args.alpha,
        seed,
        interpolation: parse_interpolation(&args.interpolation)?,
    };
    let curve = survival::fit(&intervals, survival::DEFAULT_TOL, stats::MC_FIT_MAX_ITER)?;
    let band = survival::greenwood_band(&curve, config.alpha)?;
    let samples = crate::sampling::draw(&curve, &band, args.n, &config);
    io::write_samples_csv(&args.out, &samples, seed, config.alpha)
}

// ---------------------------------------------------------------------------
// mcutest
// ---------------------------------------------------------------------------

#[derive(Args)]
struct McutestArgs {
    #[arg(long, conflicts_with = "intervals_a")]
    events_a: Option<PathBuf>,

    #[arg(long)]
    intervals_a: Option<PathBuf>,

    #[arg(long, conflicts_with = "intervals_b")]
    events_b: Option<PathBuf>,

    #[arg(long)]
    intervals_b: Option<PathBuf>,

    /// Locale polygons shared by both event files
    #[arg(long)]
    locales: Option<PathBuf>,

    #[command(flatten)]
    metric: MetricArgs,

    /// Samples drawn per trial from collection A
    #[arg(short, long, default_value_t = 100)]
    m: usize,

    /// Samples drawn per trial from collection B
    #[arg(short, long, default_value_t = 100)]
    n: usize,

    /// Number of U-test trials to combine
    #[arg(long, default_value_t = 100)]
    trials: usize,

    /// Dominance alternative: a-dominates-b | b-dominates-a
    #[arg(long, default_value = "a-dominates-b")]
    direction: String,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    #[arg(long, default_value = "linear")]
    interpolation: String,

    #[arg(long, env = "CENSDIST_SEED")]
    seed: Option<u64>,

    /// Output report JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_mcutest(args: &McutestArgs) -> Result<()> {
    let intervals_a = load_intervals(
        args.events_a.as_deref(),
        args.locales.as_deref(),
        args.intervals_a.as_deref(),
        &args.metric,
        "-a",
    )?;
    let intervals_b = load_intervals(
        args.events_b.as_deref(),
        args.locales.as_deref(),
        args.intervals_b.as_deref(),
        &args.metric,
        "-b",
    )?;
    let config = SamplerConfig {
        alpha: args.alpha,
        seed: resolve_seed(args.seed),
        interpolation: parse_interpolation(&args.interpolation)?,
    };
    let report = stats::mc_u_test(
        &EventCollection::from_intervals(intervals_a),
        &EventCollection::from_intervals(intervals_b),
        args.m,
        args.n,
        args.trials,
        parse_direction(&args.direction)?,
        &config,
    )?;
    if let Some(out) = &args.out {
        io::write_report_json(out, &report)?;
    }
    println!("p={}", report.p_value);
    Ok(())
}

// ---------------------------------------------------------------------------
// ks / mmd
// ---------------------------------------------------------------------------

#[derive(Args)]
struct KsArgs {
    /// Curve CSV for side A (as written by `estimate`)
    #[arg(long, conflicts_with = "intervals_a")]
    curve_a: Option<PathBuf>,

    /// Interval CSV for side A (fitted first)
    #[arg(long)]
    intervals_a: Option<PathBuf>,

    #[arg(long, conflicts_with = "intervals_b")]
    curve_b: Option<PathBuf>,

    #[arg(long)]
    intervals_b: Option<PathBuf>,
}

fn load_curve(
    curve: Option<&Path>,
    intervals: Option<&Path>,
    label: &str,
) -> Result<survival::SurvivalCurve> {
    match (curve, intervals) {
        (Some(path), None) => io::read_curve_csv(path),
        (None, Some(path)) => {
            let obs = io::read_intervals_csv(path)?;
            survival::fit(&obs, survival::DEFAULT_TOL, stats::MC_FIT_MAX_ITER)
        }
        _ => Err(Error::InvalidInput(format!(
            "exactly one of --curve{label} or --intervals{label} is required"
        ))),
    }
}

fn cmd_ks(args: &KsArgs) -> Result<()> {
    let a = load_curve(args.curve_a.as_deref(), args.intervals_a.as_deref(), "-a")?;
    let b = load_curve(args.curve_b.as_deref(), args.intervals_b.as_deref(), "-b")?;
    println!("{:.6}", stats::ks_statistic(&a, &b));
    Ok(())
}

#[derive(Args)]
struct MmdArgs {
    /// Samples CSV for side A (single `distance` column)
    #[arg(long)]
    samples_a: PathBuf,

    #[arg(long)]
    samples_b: PathBuf,

    /// RBF bandwidth: `median` or a positive number
    #[arg(long, default_value = "median")]
    sigma: String,
}

fn cmd_mmd(args: &MmdArgs) -> Result<()> {
    let s_a = io::read_samples_csv(&args.samples_a)?;
    let s_b = io::read_samples_csv(&args.samples_b)?;
    let sigma = match args.sigma.as_str() {
        "median" => stats::median_bandwidth(&s_a, &s_b)?,
        raw => raw.parse::<f64>().map_err(|_| {
            Error::InvalidInput(format!("--sigma must be `median` or a number, got `{raw}`"))
        })?,
    };
    let kernel = stats::Kernel::rbf(sigma)?;
    println!("{:.6}", stats::mmd(&s_a, &s_b, &kernel)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    /// Number of uniformly placed locations
    #[arg(long, default_value_t = 1000)]
    locations: usize,

    /// Number of rectangular locales (must factor into a balanced grid)
    #[arg(long, default_value_t = 16)]
    locales: usize,

    /// Number of transportation events to generate
    #[arg(long, default_value_t = 100)]
    events: usize,

    #[arg(long, default_value_t = simulation::DEFAULT_GRID_EXTENT)]
    width: f64,

    #[arg(long, default_value_t = simulation::DEFAULT_GRID_EXTENT)]
    height: f64,

    #[arg(long, env = "CENSDIST_SEED")]
    seed: Option<u64>,

    /// Directory for events.csv, truth.csv, locales.geojson, network.json
    #[arg(long)]
    out_dir: PathBuf,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let world = simulation::build(args.width, args.height, args.locations, args.locales, seed)?;
    let events = world.generate_events(args.events, derive_seed(seed, &[1]))?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::io(format!("creating {}", args.out_dir.display()), e))?;
    io::write_events_csv(
        &args.out_dir.join("events.csv"),
        &simulation::censored_pairs(&events),
    )?;
    io::write_truth_csv(&args.out_dir.join("truth.csv"), &events)?;
    io::write_locales_geojson(&args.out_dir.join("locales.geojson"), &world.locales()?)?;
    io::write_network_json(
        &args.out_dir.join("network.json"),
        &simulation::to_spatial_network(&world, &events),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CalibrateArgs {
    /// Comma-separated locale counts, e.g. 10,100,1000
    #[arg(long, default_value = "10,100", value_delimiter = ',')]
    locale_counts: Vec<usize>,

    /// Null hypothesis tests per locale count
    #[arg(long, default_value_t = 200)]
    n_tests: usize,

    #[arg(long, default_value_t = 1000)]
    locations: usize,

    /// Censored events generated per test
    #[arg(long, default_value_t = 1000)]
    events: usize,

    #[arg(short, long, default_value_t = 100)]
    m: usize,

    #[arg(short, long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 20)]
    trials: usize,

    #[arg(long, default_value_t = simulation::DEFAULT_GRID_EXTENT)]
    width: f64,

    #[arg(long, default_value_t = simulation::DEFAULT_GRID_EXTENT)]
    height: f64,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    #[arg(long, default_value = "linear")]
    interpolation: String,

    #[arg(long, default_value_t = geometry::DEFAULT_SAMPLES_PER_EDGE)]
    samples_per_edge: usize,

    #[arg(long, env = "CENSDIST_SEED")]
    seed: Option<u64>,

    /// Directory for pvalues.csv and summary.csv
    #[arg(long)]
    out: PathBuf,
}

/// Inputs for one calibration experiment.
#[derive(Debug, Clone)]
pub struct CalibrationParams {
    pub locale_counts: Vec<usize>,
    pub n_tests: usize,
    pub n_locations: usize,
    pub n_events: usize,
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub width: f64,
    pub height: f64,
    pub alpha: f64,
    pub interpolation: Interpolation,
    pub samples_per_edge: usize,
    pub seed: u64,
}

/// Null-test p-values observed for one locale count.
#[derive(Debug, Clone)]
pub struct CalibrationRun {
    pub locale_count: usize,
    pub p_values: Vec<f64>,
}

/// Uniformity summary for one locale count.
#[derive(Debug, Clone)]
pub struct CalibrationSummaryRow {
    pub locale_count: usize,
    pub n_tests: usize,
    /// `(level, empirical rejection frequency)` per entry of
    /// [`CALIBRATION_LEVELS`].
    pub rejection_rates: Vec<(f64, f64)>,
    pub chi2: f64,
    pub chi2_p: f64,
    /// Holm-Bonferroni flag across the locale counts of the same run.
    pub holm_significant: bool,
}

/// Deterministic seed derivation for nested experiment streams.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for &v in path {
        state = splitmix64(state ^ splitmix64(v.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    state
}

/// Runs `n_tests` null Monte Carlo U-tests (`E_A = E_B`) per locale count:
/// each test builds a fresh world, generates censored events, and compares
/// the collection against itself. Tests run in parallel; seeds derive from
/// `(seed, locale count, test index)`, so results are schedule-independent.
pub fn run_null_calibration(params: &CalibrationParams) -> Result<Vec<CalibrationRun>> {
    let mut runs = Vec::with_capacity(params.locale_counts.len());
    for &locale_count in &params.locale_counts {
        let p_values = (0..params.n_tests)
            .into_par_iter()
            .map(|test| {
                let tag = &[locale_count as u64, test as u64];
                let world = simulation::build(
                    params.width,
                    params.height,
                    params.n_locations,
                    locale_count,
                    derive_seed(params.seed, &[tag[0], tag[1], 0]),
                )?;
                let events = world
                    .generate_events(params.n_events, derive_seed(params.seed, &[tag[0], tag[1], 1]))?;
                let collection = world.censor(&events, params.samples_per_edge)?;
                let config = SamplerConfig {
                    alpha: params.alpha,
                    seed: derive_seed(params.seed, &[tag[0], tag[1], 2]),
                    interpolation: params.interpolation,
                };
                let report = stats::mc_u_test(
                    &collection,
                    &collection,
                    params.m,
                    params.n,
                    params.trials,
                    Alternative::ADominatesB,
                    &config,
                )?;
                Ok(report.p_value)
            })
            .collect::<Result<Vec<f64>>>()?;
        runs.push(CalibrationRun {
            locale_count,
            p_values,
        });
    }
    Ok(runs)
}

/// Summarizes calibration runs: rejection frequencies at the standard
/// levels, the chi-squared uniformity test over `n_bins` bins, and
/// Holm-Bonferroni significance flags across locale counts at `alpha`.
pub fn summarize_calibration(
    runs: &[CalibrationRun],
    n_bins: usize,
    alpha: f64,
) -> Result<Vec<CalibrationSummaryRow>> {
    let mut chi2s = Vec::with_capacity(runs.len());
    let mut chi2_ps = Vec::with_capacity(runs.len());
    for run in runs {
        let (chi2, p) = stats::chi2_uniformity(&run.p_values, n_bins)?;
        chi2s.push(chi2);
        chi2_ps.push(p);
    }
    let holm = stats::holm_bonferroni(&chi2_ps, alpha);
    Ok(runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let total = run.p_values.len() as f64;
            let rejection_rates = CALIBRATION_LEVELS
                .iter()
                .map(|&level| {
                    let rejected = run.p_values.iter().filter(|&&p| p <= level).count();
                    (level, rejected as f64 / total)
                })
                .collect();
            CalibrationSummaryRow {
                locale_count: run.locale_count,
                n_tests: run.p_values.len(),
                rejection_rates,
                chi2: chi2s[i],
                chi2_p: chi2_ps[i],
                holm_significant: holm[i],
            }
        })
        .collect())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    if args.locale_counts.is_empty() {
        return Err(Error::InvalidInput("--locale-counts is empty".into()));
    }
    let params = CalibrationParams {
        locale_counts: args.locale_counts.clone(),
        n_tests: args.n_tests,
        n_locations: args.locations,
        n_events: args.events,
        m: args.m,
        n: args.n,
        trials: args.trials,
        width: args.width,
        height: args.height,
        alpha: args.alpha,
        interpolation: parse_interpolation(&args.interpolation)?,
        samples_per_edge: args.samples_per_edge,
        seed: resolve_seed(args.seed),
    };
    let runs = run_null_calibration(&params)?;
    let summary = summarize_calibration(&runs, 20, 0.05)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;
    let mut pvalues = String::from("locale_count,test_index,p_value\n");
    for run in &runs {
        for (i, p) in run.p_values.iter().enumerate() {
            pvalues.push_str(&format!("{},{},{}\n", run.locale_count, i, p));
        }
    }
    std::fs::write(args.out.join("pvalues.csv"), pvalues)
        .map_err(|e| Error::io("writing pvalues.csv", e))?;

    let mut table = String::from(
        "locale_count,n_tests,reject_at_0.01,reject_at_0.05,reject_at_0.1,chi2,chi2_p,holm_significant\n",
    );
    for row in &summary {
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.locale_count,
            row.n_tests,
            row.rejection_rates[0].1,
            row.rejection_rates[1].1,
            row.rejection_rates[2].1,
            row.chi2,
            row.chi2_p,
            row.holm_significant,
        ));
    }
    std::fs::write(args.out.join("summary.csv"), &table)
        .map_err(|e| Error::io("writing summary.csv", e))?;
    print!("{table}");
    Ok(())
}

// ---------------------------------------------------------------------------
// maheswaran
// ---------------------------------------------------------------------------

/// One distance band of the screening-attendance table. `upper_km` is
/// `None` for the open-ended band and is resolved against the configured
/// upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBand {
    pub lower_km: f64,
    pub upper_km: Option<f64>,
    pub invited: f64,
    pub attended: f64,
}

/// Which population a band's count refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScreeningGroup {
    Invited,
    Attended,
    NotAttended,
}

impl ScreeningGroup {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "invited" => Ok(ScreeningGroup::Invited),
            "attended" => Ok(ScreeningGroup::Attended),
            "not-attended" | "not_attended" => Ok(ScreeningGroup::NotAttended),
            other => Err(Error::InvalidInput(format!(
                "unknown group `{other}` (expected invited, attended, or not-attended)"
            ))),
        }
    }

    fn weight(&self, band: &DistanceBand) -> f64 {
        match self {
            ScreeningGroup::Invited => band.invited,
            ScreeningGroup::Attended => band.attended,
            ScreeningGroup::NotAttended => band.invited - band.attended,
        }
    }
}

/// Reads distance bands from CSV with header
/// `lower_km,upper_km,invited,attended`; an empty or `inf` upper marks the
/// open-ended band.
pub fn read_bands_csv(path: &Path) -> Result<Vec<DistanceBand>> {
    let file = path.display().to_string();
    let handle = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {file}"), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(handle);
    let headers = reader
        .headers()
        .map_err(|e| Error::format(&file, e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(&file, format!("missing `{name}` column")))
    };
    let (lower_col, upper_col, invited_col, attended_col) = (
        col("lower_km")?,
        col("upper_km")?,
        col("invited")?,
        col("attended")?,
    );
    let mut bands = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&file, e.to_string()))?;
        let line = i + 2;
        let parse = |name: &str, idx: usize| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse().map_err(|_| {
                Error::format(&file, format!("line {line}: bad {name} `{raw}`"))
            })
        };
        let upper_raw = record.get(upper_col).unwrap_or("");
        let upper_km = if upper_raw.is_empty() || upper_raw == "inf" {
            None
        } else {
            Some(parse("upper_km", upper_col)?)
        };
        bands.push(DistanceBand {
            lower_km: parse("lower_km", lower_col)?,
            upper_km,
            invited: parse("invited", invited_col)?,
            attended: parse("attended", attended_col)?,
        });
    }
    Ok(bands)
}

/// Expands the bands into weighted intervals for one group. Open-ended
/// bands take `upper_bound_km` as their right endpoint; rows whose group
/// weight is zero are skipped.
pub fn screening_intervals(
    bands: &[DistanceBand],
    group: ScreeningGroup,
    upper_bound_km: f64,
) -> Result<Vec<DistanceInterval>> {
    if bands.is_empty() {
        return Err(Error::InvalidInput("no distance bands given".into()));
    }
    let mut intervals = Vec::with_capacity(bands.len());
    for band in bands {
        if band.attended > band.invited {
            return Err(Error::InvalidInput(format!(
                "band [{}, {:?}]: attended {} exceeds invited {}",
                band.lower_km, band.upper_km, band.attended, band.invited
            )));
        }
        let upper = band.upper_km.unwrap_or(upper_bound_km);
        let weight = group.weight(band);
        if weight > 0.0 {
            intervals.push(DistanceInterval::weighted(band.lower_km, upper, weight)?);
        }
    }
    if intervals.is_empty() {
        return Err(Error::InvalidInput(
            "no positive counts for the requested group".into(),
        ));
    }
    Ok(intervals)
}

#[derive(Args)]
struct MaheswaranArgs {
    /// Distance bands CSV (lower_km,upper_km,invited,attended)
    #[arg(long)]
    bins: PathBuf,

    /// Right endpoint substituted for the open-ended band (km)
    #[arg(long, default_value_t = 100.0)]
    upper_bound_km: f64,

    /// First collection: invited | attended | not-attended
    #[arg(long, default_value = "invited")]
    group_a: String,

    /// Second collection
    #[arg(long, default_value = "attended")]
    group_b: String,

    #[arg(short, long, default_value_t = 100)]
    m: usize,

    #[arg(short, long, default_value_t = 100)]
    n: usize,

    #[arg(long, default_value_t = 100)]
    trials: usize,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    #[arg(long, default_value = "linear")]
    interpolation: String,

    #[arg(long, env = "CENSDIST_SEED")]
    seed: Option<u64>,

    /// Output report JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_maheswaran(args: &MaheswaranArgs) -> Result<()> {
    let bands = read_bands_csv(&args.bins)?;
    let group_a = ScreeningGroup::parse(&args.group_a)?;
    let group_b = ScreeningGroup::parse(&args.group_b)?;
    let intervals_a = screening_intervals(&bands, group_a, args.upper_bound_km)?;
    let intervals_b = screening_intervals(&bands, group_b, args.upper_bound_km)?;
    let config = SamplerConfig {
        alpha: args.alpha,
        seed: resolve_seed(args.seed),
        interpolation: parse_interpolation(&args.interpolation)?,
    };
    let report = stats::mc_u_test(
        &EventCollection::from_intervals(intervals_a),
        &EventCollection::from_intervals(intervals_b),
        args.m,
        args.n,
        args.trials,
        Alternative::ADominatesB,
        &config,
    )?;
    if let Some(out) = &args.out {
        io::write_report_json(out, &report)?;
    }
    println!("p={}", report.p_value);
    Ok(())
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Mcutest(args) => cmd_mcutest(args),
        Command::Ks(args) => cmd_ks(args),
        Command::Mmd(args) => cmd_mmd(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Maheswaran(args) => cmd_maheswaran(args),
    }
}

/// Exit code for an error: 2 input, 3 convergence, 4 degenerate statistic.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } => 3,
        Error::DegenerateBandwidth => 4,
        _ => 2,
    }
}

/// Parses arguments from the process environment and runs the requested
/// subcommand, returning the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(threads) if threads > 0 => {
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(|| execute(&cli.command)),
                Err(e) => Err(Error::InvalidInput(format!(
                    "cannot build a {threads}-thread pool: {e}"
                ))),
            }
        }
        _ => execute(&cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
