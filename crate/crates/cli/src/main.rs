//! `spinboson` command-line driver.
//!
//! Exit codes: 0 success, 1 a self-check failed, 2 invalid input, 3 too many
//! broken trajectories, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinboson::ensemble::{
    run_ensemble, scan_parameter, EnsembleRequest, HistogramRequest, Method, ScanParameter,
};
use spinboson::io::{load_config, run_verify, write_ensemble, write_json, write_scan, write_series, VerifyOptions};
use spinboson::model::{validate, NetworkSpec, SimulationConfig};
use spinboson::observables::Observable;
use spinboson::oracle::{
    evolve_master_dense, projector, run_mcw, McwOptions, MasterOptions, OracleSystem, DEFAULT_DENSE_LIMIT,
    DEFAULT_DIMENSION_LIMIT,
};
use spinboson::{Error, C64};

#[derive(Parser)]
#[command(name = "spinboson", version, about = "Phase-space simulation of driven, dissipative spin-boson networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Positive-P ensemble
    Run(RunArgs),
    /// Classical (s = inf) ensemble in spherical spin coordinates
    Classical(RunArgs),
    /// Quantum-jump ensemble and, if small enough, the exact master equation
    Mcw(McwArgs),
    /// Parameter scan of a time-averaged observable
    Scan(RunArgs),
    /// Run the built-in self-checks
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
    /// Averaging window T0:T1
    #[arg(long, value_parser = parse_window)]
    steady_window: Option<(f64, f64)>,
    /// Largest tolerated fraction of broken trajectories
    #[arg(long, default_value_t = 0.5)]
    max_broken: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Scan specification NAME=START:STOP:STEP, e.g. g=0:10:1
    #[arg(long)]
    scan: Option<String>,
    /// Observable averaged in a scan (default: current of the first bond)
    #[arg(long)]
    observable: Option<String>,
    /// Current histogram over the steady window, BINS:LO:HI
    #[arg(long)]
    histogram: Option<String>,
}

#[derive(Args)]
struct McwArgs {
    #[command(flatten)]
    common: Common,
    /// Highest photon number kept per cavity
    #[arg(long, default_value_t = 8)]
    fock_cutoff: usize,
    /// Largest Hilbert-space dimension accepted
    #[arg(long, default_value_t = DEFAULT_DIMENSION_LIMIT)]
    max_dim: usize,
    /// Largest dimension for which the dense master equation is also solved
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    max_dense: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Random draws per randomized check
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    /// Relative error injected into the quantum noise factor (sanity check of the suite)
    #[arg(long, default_value_t = 0.0, hide = true)]
    perturb_quantum: f64,
}

enum Failure {
    Check,
    Invalid(String),
    Broken(f64, f64),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check => 1,
            Failure::Invalid(_) => 2,
            Failure::Broken(..) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Io(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected T0:T1")?;
    let t0: f64 = a.trim().parse().map_err(|_| format!("bad start {a:?}"))?;
    let t1: f64 = b.trim().parse().map_err(|_| format!("bad end {b:?}"))?;
    if !(t1 > t0) {
        return Err("window end must exceed its start".into());
    }
    Ok((t0, t1))
}

fn parse_scan(s: &str) -> Result<(ScanParameter, Vec<f64>), Failure> {
    let bad = || Failure::Invalid(format!("--scan {s:?}: expected NAME=START:STOP:STEP"));
    let (name, range) = s.split_once('=').ok_or_else(bad)?;
    let parameter = ScanParameter::parse(name.trim())
        .ok_or_else(|| Failure::Invalid(format!("unknown scan parameter {name:?}")))?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((parameter, (0..n).map(|k| start + step * k as f64).collect()))
}

fn parse_histogram(s: &str) -> Result<(usize, (f64, f64)), Failure> {
    let bad = || Failure::Invalid(format!("--histogram {s:?}: expected BINS:LO:HI"));
    let parts: Vec<&str> = s.split(':').collect();
    let [bins, lo, hi] = parts[..] else {
        return Err(bad());
    };
    let bins: usize = bins.parse().map_err(|_| bad())?;
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    if bins == 0 || !(hi > lo) {
        return Err(bad());
    }
    Ok((bins, (lo, hi)))
}

fn threads() -> Option<usize> {
    std::env::var("SPINBOSON_THREADS").ok()?.parse().ok().filter(|&n| n > 0)
}

/// Loads the configuration, applies command-line overrides and validates.
fn prepare(common: &Common) -> Result<(NetworkSpec, SimulationConfig), Failure> {
    let (spec, mut config) = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(dt) = common.dt {
        config.dt = dt;
    }
    if let Some(n) = common.trajectories {
        config.n_trajectories = n;
    }
    let report = validate(&spec, &config);
    if !report.is_valid() {
        return Err(Failure::Invalid(format!("invalid configuration:\n{report}")));
    }
    Ok((spec, config))
}

fn default_window(config: &SimulationConfig) -> (f64, f64) {
    (0.5 * config.t_final, config.t_final)
}

fn find_observable(spec: &NetworkSpec, name: Option<&str>) -> Result<Observable, Failure> {
    let set = Observable::standard_set(spec);
    match name {
        Some(name) => set
            .into_iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| Failure::Invalid(format!("unknown observable {name:?}"))),
        None => set
            .into_iter()
            .find(|o| matches!(o, Observable::Current(..)))
            .ok_or_else(|| Failure::Invalid("the network has no bond; pass --observable".into())),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn cmd_ensemble(args: &RunArgs, method: Option<Method>) -> Result<(), Failure> {
    let (spec, config) = prepare(&args.common)?;
    let method_is_scan = method.is_none();
    let method = method.unwrap_or(if spec.all_spins_infinite() {
        Method::Classical
    } else {
        Method::PositiveP
    });
    if method == Method::Classical && !spec.all_spins_infinite() {
        return Err(Failure::Invalid("the classical integrator needs spin_s = inf at every site".into()));
    }
    let mut request = EnsembleRequest::new(method, Observable::standard_set(&spec)).with_threads(threads());
    if let Some(w) = args.common.steady_window {
        request = request.with_window(w);
    }
    if let Some(h) = &args.histogram {
        let (n_bins, range) = parse_histogram(h)?;
        let bond = spec
            .bonds()
            .first()
            .map(|&(i, j, _)| (i, j))
            .ok_or_else(|| Failure::Invalid("a current histogram needs a bond".into()))?;
        request = request
            .with_window(args.common.steady_window.unwrap_or_else(|| default_window(&config)))
            .with_histogram(HistogramRequest { bond, n_bins, range });
    }
    let out = &args.common.out;
    if method_is_scan && args.scan.is_none() {
        return Err(Failure::Invalid("scan needs --scan NAME=START:STOP:STEP".into()));
    }
    create_dir(out)?;

    if let Some(scan) = &args.scan {
        let (parameter, values) = parse_scan(scan)?;
        let observable = find_observable(&spec, args.observable.as_deref())?;
        let request = request.with_window(args.common.steady_window.unwrap_or_else(|| default_window(&config)));
        let result = scan_parameter(&spec, parameter, &values, &config, &request, observable)?;
        write_scan(&out.join(format!("scan_{}.csv", parameter.name())), &result)?;
        for s in &result.series {
            write_series(&out.join(format!("{}.csv", s.name)), s)?;
        }
        for p in &result.points {
            println!(
                "{}={} {}={:.6} ± {:.6} broken={}",
                parameter.name(),
                p.value,
                result.observable,
                p.average.mean.re,
                p.average.std_error,
                p.n_broken
            );
        }
        let broken: usize = result.points.iter().map(|p| p.n_broken).sum();
        let fraction = broken as f64 / (config.n_trajectories * values.len()) as f64;
        return check_broken(fraction, args.common.max_broken);
    }

    let summary = run_ensemble(&spec, &config, &request)?;
    let files = write_ensemble(out, &summary)?;
    for w in &summary.window_averages {
        println!("{} over [{}, {}]: {:.6} ± {:.6}", w.name, w.window.0, w.window.1, w.mean.re, w.std_error);
    }
    println!(
        "{} trajectories, {} broken; wrote {} files to {}",
        summary.spikes.n_trajectories,
        summary.spikes.n_broken,
        files.len(),
        out.display()
    );
    check_broken(summary.spikes.broken_fraction(), args.common.max_broken)
}

fn check_broken(fraction: f64, limit: f64) -> Result<(), Failure> {
    if fraction > limit {
        Err(Failure::Broken(fraction, limit))
    } else {
        Ok(())
    }
}

#[derive(serde::Serialize)]
struct McwSummary {
    dimension: usize,
    n_trajectories: usize,
    total_jumps: usize,
    max_norm_error: f64,
    master: Option<spinboson::oracle::MasterDiagnostics>,
}

fn cmd_mcw(args: &McwArgs) -> Result<(), Failure> {
    let (spec, config) = prepare(&args.common)?;
    let system = OracleSystem::new(&spec, args.fock_cutoff, args.max_dim)?;
    let (e1, e2) = config.initial_spin_offset;
    let psi0 = system.coherent_ket(&config.photons(spec.n_sites), &vec![C64::new(e1, e2); spec.n_sites])?;
    let observables = Observable::standard_set(&spec);
    let mut options = McwOptions::new(config.dt, config.t_final, config.n_trajectories, config.master_seed);
    options.sample_interval = config.sample_interval;
    options.dimension_limit = args.max_dim;
    let pool = rayon_pool()?;
    let ensemble = pool.install(|| run_mcw(&system, &psi0, &observables, &options))?;
    let out = &args.common.out;
    create_dir(&out.join("mcw"))?;
    for s in &ensemble.series {
        write_series(&out.join("mcw").join(format!("{}.csv", s.name)), s)?;
    }
    let mut master = None;
    if system.dimension() <= args.max_dense {
        let mut opts = MasterOptions::new(config.dt, config.t_final).with_dimension_limit(args.max_dense);
        opts.sample_interval = config.sample_interval;
        let solution = evolve_master_dense(&projector(&psi0), &system, &observables, &opts)?;
        create_dir(&out.join("master"))?;
        for s in &solution.series {
            write_series(&out.join("master").join(format!("{}.csv", s.name)), s)?;
        }
        master = Some(solution.diagnostics);
    }
    let summary = McwSummary {
        dimension: system.dimension(),
        n_trajectories: config.n_trajectories,
        total_jumps: ensemble.total_jumps(),
        max_norm_error: ensemble.max_norm_error,
        master,
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "dimension {}, {} trajectories, {} jumps; wrote {}",
        summary.dimension,
        summary.n_trajectories,
        summary.total_jumps,
        out.display()
    );
    Ok(())
}

fn rayon_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads() {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure::Invalid(e.to_string()))
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let report = run_verify(&VerifyOptions {
        seed: args.seed,
        n_draws: args.draws,
        perturb_quantum_factor: args.perturb_quantum,
    });
    print!("{}", report.table());
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_ensemble(a, Some(Method::PositiveP)),
        Command::Classical(a) => cmd_ensemble(a, Some(Method::Classical)),
        Command::Scan(a) => cmd_ensemble(a, None),
        Command::Mcw(a) => cmd_mcw(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Check => eprintln!("self-check failed"),
                Failure::Invalid(msg) | Failure::Io(msg) => eprintln!("error: {msg}"),
                Failure::Broken(fraction, limit) => {
                    eprintln!("broken-trajectory fraction {fraction:.3} exceeds --max-broken {limit}")
                }
            }
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_ranges_are_inclusive() {
        let (p, v) = parse_scan("g=0:10:2.5").ok().unwrap();
        assert_eq!(p, ScanParameter::G);
        assert_eq!(v, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert!(parse_scan("g=0:1").is_err());
        assert!(parse_scan("q=0:1:1").is_err());
    }

    #[test]
    fn windows_and_histograms() {
        assert_eq!(parse_window("2:5.5"), Ok((2.0, 5.5)));
        assert!(parse_window("5:2").is_err());
        assert_eq!(parse_histogram("40:-20:20").ok(), Some((40, (-20.0, 20.0))));
        assert!(parse_histogram("0:1:2").is_err());
    }
}
