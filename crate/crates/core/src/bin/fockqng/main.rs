//! Command-line front-end: computes non-Gaussianity thresholds, certifies
//! measured phonon distributions, produces Fisher-information curves and
//! loss-depth reports, synthesizes preparation pulses, inverts readout
//! traces, and evaluates the force-sensitivity budget. Reports are JSON,
//! curves are CSV, and every report carries the manifest that produced it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fockqng::channels::NoiseParams;
use fockqng::control::{
    grape_optimize, rpn_basis, rpn_fit, ChainNoise, GrapeConfig, SystemParams,
};
use fockqng::error::{FockError, Result};
use fockqng::hilbert::FockDistribution;
use fockqng::io::{
    read_distribution, read_rpn_csv, write_atomic, write_pulse_json, MeasuredDistribution,
    RpnSample,
};
use fockqng::metrology::{
    damped_fock_fisher, fisher_profile, force_sensitivity, zero_point_fluctuation, ForceParams,
};
use fockqng::qng::{
    default_a_grid, depth_time_equivalent, qng_depth, qng_witness, threshold_curve,
    OptimizerConfig, QngPoint, ThresholdCurve,
};

const CONFIG_ENV: &str = "FOCKQNG_CONFIG";

#[derive(Parser)]
#[command(name = "fockqng", version, about = "Fock-state non-Gaussianity and displacement-sensing toolkit")]
struct Cli {
    /// JSON config file; the FOCKQNG_CONFIG environment variable overrides
    /// the default location when this flag is absent
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the random seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for reports, curves and the threshold cache
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the Fock-space truncation dimension from the config
    #[arg(long, global = true)]
    dim: Option<usize>,

    /// Worker threads for internally parallel steps
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Non-Gaussianity thresholds, certification, and loss depth
    Qng {
        #[command(subcommand)]
        sub: QngCmd,
    },
    /// Fisher-information curve of a distribution or damped Fock state
    Fisher(FisherArgs),
    /// Synthesize a Fock-state preparation pulse
    Grape(GrapeArgs),
    /// Readout basis simulation and trace inversion
    Rpn {
        #[command(subcommand)]
        sub: RpnCmd,
    },
    /// Force-sensitivity budget for the configured device
    Force,
}

#[derive(Subcommand)]
enum QngCmd {
    /// Compute (or load from cache) the threshold curve for target n
    Threshold {
        #[arg(long)]
        n: usize,
    },
    /// Certify a measured distribution file against the thresholds
    Witness {
        #[arg(long)]
        input: PathBuf,
        /// Restrict to a single target n (default: all n in 1..=n_max)
        #[arg(long)]
        n: Option<usize>,
    },
    /// Loss depth of a measured distribution: tolerable attenuation in dB
    /// and the equivalent free-evolution wait time
    Depth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args)]
struct FisherArgs {
    /// Measured distribution file (.json or .csv)
    #[arg(long, conflicts_with = "fock_n")]
    input: Option<PathBuf>,
    /// Ideal Fock state |n> instead of a measured file
    #[arg(long)]
    fock_n: Option<usize>,
    /// Damping time in microseconds applied before sensing (Fock input only)
    #[arg(long)]
    t_us: Option<f64>,
}

#[derive(Args)]
struct GrapeArgs {
    /// Target Fock state
    #[arg(long)]
    n: usize,
    /// Pulse duration in microseconds (must be a multiple of dt)
    #[arg(long)]
    duration_us: f64,
}

#[derive(Subcommand)]
enum RpnCmd {
    /// Simulate the readout basis curves, and optionally a synthetic trace
    /// for a given distribution
    Simulate {
        /// Distribution file to synthesize a measured trace for
        #[arg(long)]
        input: Option<PathBuf>,
        /// Gaussian noise added to the synthetic trace
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Invert a measured readout trace into a phonon distribution
    Fit {
        /// Trace CSV with columns t_us, p_e, sigma
        #[arg(long)]
        input: PathBuf,
    },
}

/// All tunables with physically sensible defaults; any subset may be
/// overridden from the JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AppConfig {
    qng: OptimizerConfig,
    /// Threshold a-grid; omitted means the built-in 64-point grid.
    a_grid: Option<Vec<f64>>,
    noise: NoiseConfig,
    fisher: FisherConfig,
    grape: GrapeFileConfig,
    rpn: RpnConfig,
    force: ForceConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            qng: OptimizerConfig::default(),
            a_grid: None,
            noise: NoiseConfig::default(),
            fisher: FisherConfig::default(),
            grape: GrapeFileConfig::default(),
            rpn: RpnConfig::default(),
            force: ForceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NoiseConfig {
    /// Phonon energy decay time in microseconds.
    t1_us: f64,
    /// Pure-dephasing rate in 1/us.
    gamma_phi_per_us: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { t1_us: 89.0, gamma_phi_per_us: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FisherConfig {
    alpha_min: f64,
    alpha_max: f64,
    points: usize,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self { alpha_min: 0.05, alpha_max: 2.0, points: 40 }
    }
}

impl FisherConfig {
    fn grid(&self) -> Vec<f64> {
        let k = self.points.max(2);
        (0..k)
            .map(|i| {
                self.alpha_min
                    + (self.alpha_max - self.alpha_min) * i as f64 / (k - 1) as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GrapeFileConfig {
    dt_ns: f64,
    target_fidelity: f64,
    max_iters: usize,
    /// Drive amplitude ceiling in rad/s; the paper never quantifies the
    /// experimental limit, so this is a plain config parameter.
    amplitude_ceiling: f64,
    init_scale: f64,
    seed: u64,
    qubit_levels: usize,
    /// Phonon truncation margin above the target Fock index.
    phonon_margin: usize,
}

impl Default for GrapeFileConfig {
    fn default() -> Self {
        let g = GrapeConfig::default();
        Self {
            dt_ns: g.dt * 1e9,
            target_fidelity: g.target_fidelity,
            max_iters: g.max_iters,
            amplitude_ceiling: g.amplitude_ceiling,
            init_scale: g.init_scale,
            seed: g.seed,
            qubit_levels: 3,
            phonon_margin: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RpnConfig {
    n_max: usize,
    t_max_us: f64,
    points: usize,
    seed: u64,
}

impl Default for RpnConfig {
    fn default() -> Self {
        Self { n_max: 6, t_max_us: 4.0, points: 161, seed: 11 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ForceConfig {
    mass_kg: f64,
    frequency_ghz: f64,
    t_probe_us: f64,
    t_dead_us: f64,
    /// Total averaging time; defaults to one cycle.
    total_time_us: f64,
    /// Quantum Fisher information of the probe state (4 for coherent probes).
    fq: f64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        Self {
            mass_kg: 16.2e-9,
            frequency_ghz: 5.023,
            t_probe_us: 90.0,
            t_dead_us: 210.0,
            total_time_us: 300.0,
            fq: 4.0,
        }
    }
}

/// Provenance record attached to every report: rerunning with the same
/// manifest reproduces the payload byte for byte, except `wall_time_ms`.
#[derive(Debug, Clone, Serialize)]
struct RunManifest {
    command: String,
    tool_version: String,
    seed: u64,
    jobs: Option<usize>,
    config: AppConfig,
    inputs: Vec<String>,
    outputs: Vec<String>,
    wall_time_ms: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 signals an unphysical input, 1 a malformed file or internal failure.
fn exit_code(e: &FockError) -> u8 {
    match e {
        FockError::Domain(_)
        | FockError::InvalidState(_)
        | FockError::InvalidDistribution(_)
        | FockError::IndexOutOfRange { .. }
        | FockError::BadDimension(_)
        | FockError::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let mut config = load_config(cli)?;
    if let Some(seed) = cli.seed {
        config.qng.seed = seed;
        config.grape.seed = seed;
        config.rpn.seed = seed;
    }
    if let Some(dim) = cli.dim {
        config.qng.dim = dim;
    }
    std::fs::create_dir_all(&cli.out)?;

    match &cli.command {
        Command::Qng { sub } => run_qng(cli, &config, sub, started),
        Command::Fisher(args) => run_fisher(cli, &config, args, started),
        Command::Grape(args) => run_grape(cli, &config, args, started),
        Command::Rpn { sub } => run_rpn(cli, &config, sub, started),
        Command::Force => run_force(cli, &config, started),
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        None => Ok(AppConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(&p)?;
            serde_json::from_str(&text)
                .map_err(|e| FockError::Parse(format!("{}: {e}", p.display())))
        }
    }
}

fn manifest(
    cli: &Cli,
    config: &AppConfig,
    command: &str,
    seed: u64,
    inputs: &[&Path],
    outputs: &[&Path],
    started: Instant,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        jobs: cli.jobs,
        config: config.clone(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

fn write_report<T: Serialize>(path: &Path, manifest: &RunManifest, report: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        manifest: &'a RunManifest,
        report: &'a T,
    }
    let text = serde_json::to_string_pretty(&Envelope { manifest, report })
        .map_err(|e| FockError::Parse(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

fn a_grid(config: &AppConfig) -> Vec<f64> {
    config.a_grid.clone().unwrap_or_else(default_a_grid)
}

/// Threshold curves are the expensive step, so they are cached on disk
/// keyed by (n, optimizer config, a-grid) and recomputed only on a miss.
fn load_or_compute_curve(out: &Path, n: usize, config: &AppConfig) -> Result<ThresholdCurve> {
    let grid = a_grid(config);
    let mut hasher = Sha256::new();
    hasher.update(n.to_le_bytes());
    hasher.update(
        serde_json::to_vec(&config.qng).map_err(|e| FockError::Parse(e.to_string()))?,
    );
    hasher.update(serde_json::to_vec(&grid).map_err(|e| FockError::Parse(e.to_string()))?);
    let key = hex_prefix(&hasher.finalize(), 12);
    let cache_path = out.join("cache").join(format!("threshold-n{n}-{key}.json"));
    if let Ok(text) = std::fs::read_to_string(&cache_path) {
        if let Ok(curve) = ThresholdCurve::from_json(&text) {
            return Ok(curve);
        }
        // fall through and recompute on a corrupt cache entry
    }
    let curve = threshold_curve(n, &grid, &config.qng)?;
    write_atomic(&cache_path, curve.to_json()?.as_bytes())?;
    Ok(curve)
}

fn hex_prefix(bytes: &[u8], len: usize) -> String {
    bytes
        .iter()
        .take(len.div_ceil(2))
        .map(|b| format!("{b:02x}"))
        .collect::<String>()[..len]
        .to_string()
}

fn write_curve_csv(path: &Path, curve: &ThresholdCurve) -> Result<()> {
    let mut rows = String::from("a,p_n,p_np1,f_bar,alpha,r_re,r_im,converged\n");
    for p in &curve.points {
        rows.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.a, p.p_n, p.p_np1, p.f_bar, p.alpha, p.r.0, p.r.1, p.converged
        ));
    }
    write_atomic(path, rows.as_bytes())
}

fn run_qng(cli: &Cli, config: &AppConfig, sub: &QngCmd, started: Instant) -> Result<()> {
    match sub {
        QngCmd::Threshold { n } => {
            let curve = load_or_compute_curve(&cli.out, *n, config)?;
            let csv_path = cli.out.join(format!("qng-threshold-n{n}.csv"));
            let json_path = cli.out.join(format!("qng-threshold-n{n}.json"));
            write_curve_csv(&csv_path, &curve)?;

            #[derive(Serialize)]
            struct ThresholdReport {
                n: usize,
                /// Point threshold: max of P_n along the boundary.
                pbar: f64,
                grid_points: usize,
                all_converged: bool,
            }
            let report = ThresholdReport {
                n: *n,
                pbar: curve.max_p_n(),
                grid_points: curve.points.len(),
                all_converged: curve.points.iter().all(|p| p.converged),
            };
            let m = manifest(
                cli, config, "qng threshold", config.qng.seed,
                &[], &[&csv_path, &json_path], started,
            );
            write_report(&json_path, &m, &report)?;
            println!("P_bar({n}) = {:.6} -> {}", report.pbar, json_path.display());
            Ok(())
        }
        QngCmd::Witness { input, n } => {
            let measured = read_distribution(input)?;
            let dist = measured.distribution()?;
            let targets: Vec<usize> = match n {
                Some(k) => vec![*k],
                None => (1..=config.rpn.n_max.min(dist.len().saturating_sub(2))).collect(),
            };

            #[derive(Serialize)]
            struct WitnessRow {
                n: usize,
                p_n: f64,
                p_np1: f64,
                violated: bool,
                margin: f64,
                best_a: f64,
            }
            let mut rows = Vec::new();
            let mut curve_paths = Vec::new();
            for &k in &targets {
                let curve = load_or_compute_curve(&cli.out, k, config)?;
                let csv_path = cli.out.join(format!("qng-threshold-n{k}.csv"));
                write_curve_csv(&csv_path, &curve)?;
                curve_paths.push(csv_path);
                let point = QngPoint::from_distribution(&dist, k)?;
                let w = qng_witness(&point, &curve)?;
                rows.push(WitnessRow {
                    n: k,
                    p_n: point.p_n,
                    p_np1: point.p_np1,
                    violated: w.violated,
                    margin: w.margin,
                    best_a: w.best_a,
                });
            }
            let json_path = cli.out.join("qng-witness.json");
            let mut outputs: Vec<&Path> = curve_paths.iter().map(|p| p.as_path()).collect();
            outputs.push(&json_path);
            let m = manifest(
                cli, config, "qng witness", config.qng.seed, &[input], &outputs, started,
            );
            write_report(&json_path, &m, &rows)?;
            for r in &rows {
                println!(
                    "n={}: violated={} margin={:+.6} at a={:.3}",
                    r.n, r.violated, r.margin, r.best_a
                );
            }
            Ok(())
        }
        QngCmd::Depth { input, n } => {
            let measured = read_distribution(input)?;
            let dist = measured.distribution()?;
            let curve = load_or_compute_curve(&cli.out, *n, config)?;
            let depth = qng_depth(&dist, *n, &curve)?;
            let kappa_per_us = 1.0 / config.noise.t1_us;
            let wait_us = if depth.violating {
                depth_time_equivalent(depth.eta_min, kappa_per_us)?
            } else {
                0.0
            };

            #[derive(Serialize)]
            struct DepthReport {
                n: usize,
                violating: bool,
                eta_min: f64,
                depth_db: f64,
                equivalent_wait_us: f64,
                t1_us: f64,
            }
            let report = DepthReport {
                n: *n,
                violating: depth.violating,
                eta_min: depth.eta_min,
                depth_db: depth.depth_db,
                equivalent_wait_us: wait_us,
                t1_us: config.noise.t1_us,
            };
            let json_path = cli.out.join(format!("qng-depth-n{n}.json"));
            let m = manifest(
                cli, config, "qng depth", config.qng.seed, &[input], &[&json_path], started,
            );
            write_report(&json_path, &m, &report)?;
            println!(
                "n={n}: depth {:.3} dB (eta_min {:.4}, wait {:.2} us)",
                report.depth_db, report.eta_min, report.equivalent_wait_us
            );
            Ok(())
        }
    }
}

fn run_fisher(cli: &Cli, config: &AppConfig, args: &FisherArgs, started: Instant) -> Result<()> {
    let grid = config.fisher.grid();
    let (profile, label, inputs): (_, String, Vec<&Path>) = match (&args.input, args.fock_n) {
        (Some(path), None) => {
            if args.t_us.is_some() {
                return Err(FockError::Domain(
                    "--t-us applies only to --fock-n inputs".into(),
                ));
            }
            let dist = read_distribution(path)?.distribution()?;
            (fisher_profile(&dist, &grid)?, "measured".into(), vec![path])
        }
        (None, Some(n)) => {
            let t_us = args.t_us.unwrap_or(0.0);
            if t_us > 0.0 {
                let noise = NoiseParams::pure_loss(1.0 / config.noise.t1_us)?;
                (
                    damped_fock_fisher(n, &noise, t_us, &grid)?,
                    format!("fock-{n} damped {t_us} us"),
                    vec![],
                )
            } else {
                let dist = FockDistribution::fock(n, n + 2)?;
                (fisher_profile(&dist, &grid)?, format!("fock-{n}"), vec![])
            }
        }
        _ => {
            return Err(FockError::Domain(
                "exactly one of --input or --fock-n is required".into(),
            ))
        }
    };

    let csv_path = cli.out.join("fisher.csv");
    let mut rows = String::from("alpha,fi\n");
    for r in &profile.curve {
        rows.push_str(&format!("{},{}\n", r.alpha, r.fi));
    }
    write_atomic(&csv_path, rows.as_bytes())?;

    #[derive(Serialize)]
    struct FisherReport {
        source: String,
        fi_max: f64,
        d0: f64,
        alpha_units: &'static str,
    }
    let report = FisherReport {
        source: label,
        fi_max: profile.fi_max,
        d0: profile.d0,
        alpha_units: "dimensionless displacement amplitude",
    };
    let json_path = cli.out.join("fisher.json");
    let m = manifest(
        cli, config, "fisher", config.qng.seed, &inputs, &[&csv_path, &json_path], started,
    );
    write_report(&json_path, &m, &report)?;
    println!("fi_max = {:.4} at d0 = {:.4}", report.fi_max, report.d0);
    Ok(())
}

fn run_grape(cli: &Cli, config: &AppConfig, args: &GrapeArgs, started: Instant) -> Result<()> {
    let g = &config.grape;
    let params = SystemParams::device(args.n + g.phonon_margin).and_then(|p| {
        SystemParams::new(
            p.omega_q, p.anharm, p.omega_a, p.g, p.omega_d,
            g.qubit_levels, args.n + g.phonon_margin,
        )
    })?;
    let grape_cfg = GrapeConfig {
        dt: g.dt_ns * 1e-9,
        target_fidelity: g.target_fidelity,
        max_iters: g.max_iters,
        amplitude_ceiling: g.amplitude_ceiling,
        init_scale: g.init_scale,
        seed: g.seed,
    };
    let result = grape_optimize(args.n, args.duration_us * 1e-6, &params, &grape_cfg)?;

    let pulse_path = cli.out.join(format!("pulse-n{}.json", args.n));
    write_pulse_json(&pulse_path, &result.pulse)?;

    #[derive(Serialize)]
    struct GrapeReport {
        target_n: usize,
        duration_us: f64,
        fidelity: f64,
        iterations: usize,
        converged: bool,
        peak_amplitude_rad_per_s: f64,
    }
    let report = GrapeReport {
        target_n: args.n,
        duration_us: args.duration_us,
        fidelity: result.fidelity,
        iterations: result.iterations,
        converged: result.converged,
        peak_amplitude_rad_per_s: result.pulse.peak_amplitude(),
    };
    let json_path = cli.out.join(format!("grape-n{}.json", args.n));
    let m = manifest(
        cli, config, "grape", g.seed, &[], &[&pulse_path, &json_path], started,
    );
    write_report(&json_path, &m, &report)?;
    println!(
        "n={}: fidelity {:.6} in {} iterations -> {}",
        args.n, report.fidelity, report.iterations, pulse_path.display()
    );
    Ok(())
}

fn device_noise(config: &AppConfig) -> ChainNoise {
    let mut noise = ChainNoise::device();
    noise.phonon = NoiseParams::new(
        1.0 / (config.noise.t1_us * 1e-6),
        config.noise.gamma_phi_per_us * 1e6,
        noise.phonon.omega,
    )
    .expect("nonnegative rates");
    noise
}

fn run_rpn(cli: &Cli, config: &AppConfig, sub: &RpnCmd, started: Instant) -> Result<()> {
    let r = &config.rpn;
    let params = SystemParams::device(r.n_max + 2)?;
    let noise = device_noise(config);
    let t_grid: Vec<f64> = (0..r.points.max(2))
        .map(|k| r.t_max_us * 1e-6 * k as f64 / (r.points.max(2) - 1) as f64)
        .collect();

    match sub {
        RpnCmd::Simulate { input, sigma } => {
            let basis = rpn_basis(r.n_max, &params, &noise, &t_grid)?;
            let csv_path = cli.out.join("rpn-basis.csv");
            let mut rows = String::from("t_us");
            for n in 0..=r.n_max {
                rows.push_str(&format!(",p_e_n{n}"));
            }
            rows.push('\n');
            for (k, t) in basis.t_grid.iter().enumerate() {
                rows.push_str(&format!("{}", t * 1e6));
                for curve in &basis.curves {
                    rows.push_str(&format!(",{}", curve[k]));
                }
                rows.push('\n');
            }
            write_atomic(&csv_path, rows.as_bytes())?;
            let mut outputs = vec![csv_path.clone()];
            let mut inputs = Vec::new();

            if let Some(path) = input {
                let dist = read_distribution(path)?.distribution()?;
                if dist.len() > r.n_max + 1 && dist.tail(r.n_max + 1) > 1e-12 {
                    return Err(FockError::Domain(format!(
                        "distribution has weight above |{}>; raise rpn.n_max",
                        r.n_max
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
                let normal = Normal::new(0.0, sigma.max(0.0))
                    .map_err(|e| FockError::Domain(e.to_string()))?;
                let samples: Vec<RpnSample> = basis
                    .t_grid
                    .iter()
                    .enumerate()
                    .map(|(k, &t)| {
                        let clean: f64 = basis
                            .curves
                            .iter()
                            .enumerate()
                            .map(|(n, c)| dist.prob(n) * c[k])
                            .sum();
                        RpnSample {
                            t_us: t * 1e6,
                            p_e: clean + normal.sample(&mut rng),
                            sigma: *sigma,
                        }
                    })
                    .collect();
                let trace_path = cli.out.join("rpn-trace.csv");
                fockqng::io::write_rpn_csv(&trace_path, &samples)?;
                outputs.push(trace_path);
                inputs.push(path.as_path());
            }

            #[derive(Serialize)]
            struct SimReport {
                n_max: usize,
                points: usize,
                t_max_us: f64,
                sigma: f64,
            }
            let report = SimReport {
                n_max: r.n_max,
                points: t_grid.len(),
                t_max_us: r.t_max_us,
                sigma: *sigma,
            };
            let json_path = cli.out.join("rpn-simulate.json");
            outputs.push(json_path.clone());
            let out_refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
            let m = manifest(cli, config, "rpn simulate", r.seed, &inputs, &out_refs, started);
            write_report(&json_path, &m, &report)?;
            println!("basis with {} curves -> {}", r.n_max + 1, csv_path.display());
            Ok(())
        }
        RpnCmd::Fit { input } => {
            let trace = read_rpn_csv(input)?;
            let times: Vec<f64> = trace.iter().map(|s| s.t_us * 1e-6).collect();
            let measured: Vec<f64> = trace.iter().map(|s| s.p_e).collect();
            let basis = rpn_basis(r.n_max, &params, &noise, &times)?;
            let fit = rpn_fit(&measured, &basis)?;

            // The recovered distribution is written in the measured-file
            // schema so it feeds directly back into `qng` and `fisher`.
            let out_dist = MeasuredDistribution::new(fit.distribution.probs(), &fit.sigma)?;
            let dist_path = cli.out.join("rpn-fit.json");
            fockqng::io::write_distribution_json(&dist_path, &out_dist)?;

            let manifest_path = cli.out.join("rpn-fit-manifest.json");
            let m = manifest(
                cli, config, "rpn fit", r.seed, &[input], &[&dist_path, &manifest_path], started,
            );
            write_report(&manifest_path, &m, &out_dist)?;
            for row in &out_dist.rows {
                println!("P_{} = {:.6} +- {:.6}", row.n, row.p, row.sigma);
            }
            Ok(())
        }
    }
}

fn run_force(cli: &Cli, config: &AppConfig, started: Instant) -> Result<()> {
    let f = &config.force;
    let omega = std::f64::consts::TAU * f.frequency_ghz * 1e9;
    let params = ForceParams {
        mass: f.mass_kg,
        omega,
        t_probe: f.t_probe_us * 1e-6,
        t_dead: f.t_dead_us * 1e-6,
        total_time: f.total_time_us * 1e-6,
        fq: f.fq,
    };
    let sens = force_sensitivity(&params)?;

    #[derive(Serialize)]
    struct ForceReport {
        delta_f0_n_per_sqrt_hz: f64,
        delta_f0_fn_per_sqrt_hz: f64,
        x_zpf_m: f64,
        nu_cycles: f64,
        t_cycle_us: f64,
    }
    let report = ForceReport {
        delta_f0_n_per_sqrt_hz: sens.delta_f0_per_sqrt_hz,
        delta_f0_fn_per_sqrt_hz: sens.delta_f0_per_sqrt_hz * 1e15,
        x_zpf_m: zero_point_fluctuation(f.mass_kg, omega)?,
        nu_cycles: sens.nu,
        t_cycle_us: f.t_probe_us + f.t_dead_us,
    };
    let json_path = cli.out.join("force.json");
    let m = manifest(cli, config, "force", 0, &[], &[&json_path], started);
    write_report(&json_path, &m, &report)?;
    println!(
        "force sensitivity {:.3} fN/sqrt(Hz) (x_zpf {:.3e} m)",
        report.delta_f0_fn_per_sqrt_hz, report.x_zpf_m
    );
    Ok(())
}
