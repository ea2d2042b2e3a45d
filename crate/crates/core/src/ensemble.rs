//! Parallel trajectory ensembles and parameter scans.
//!
//! Trajectory `k` draws from ChaCha8 stream `k` of the master seed.
//! Trajectories are grouped into fixed-size blocks by index; blocks run in
//! parallel and their accumulators are folded in block order, so every
//! reported number is independent of the worker count.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{
    initial_state_coherent, initial_state_spherical, validate, NetworkSpec, SimulationConfig,
};
use crate::observables::{homodyne_series, usable_samples, Observable, ObservableSeries, PhaseSample, WindowAverage};
use crate::sde::{integrate_classical_with, integrate_with, record_times, Outcome, Status};
use crate::stats::{Histogram, Moments};
use crate::{Error, Result, C64};

const BLOCK: usize = 16;

/// Which integrator an ensemble uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Positive-P equations in `(α, β, z, w)`.
    #[default]
    PositiveP,
    /// Classical `s = ∞` equations in spherical coordinates.
    Classical,
}

/// Histogram of `Re j_{i→j}` over the steady window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistogramRequest {
    pub bond: (usize, usize),
    pub n_bins: usize,
    pub range: (f64, f64),
}

/// What to integrate and which reductions to keep.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRequest {
    pub method: Method,
    pub observables: Vec<Observable>,
    pub steady_window: Option<(f64, f64)>,
    pub histogram: Option<HistogramRequest>,
    /// Parallel width; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl EnsembleRequest {
    pub fn new(method: Method, observables: Vec<Observable>) -> Self {
        EnsembleRequest {
            method,
            observables,
            steady_window: None,
            histogram: None,
            threads: None,
        }
    }

    pub fn with_window(mut self, window: (f64, f64)) -> Self {
        self.steady_window = Some(window);
        self
    }

    pub fn with_histogram(mut self, histogram: HistogramRequest) -> Self {
        self.histogram = Some(histogram);
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SpikeStatistics {
    pub n_trajectories: usize,
    pub n_completed: usize,
    /// Broken down or diverged; `n_completed + n_broken = n_trajectories`.
    pub n_broken: usize,
    pub n_diverged: usize,
    /// Failure times in trajectory order.
    pub failure_times: Vec<f64>,
    pub failure_histogram: Option<Histogram>,
    /// Monitor jumps tolerated under `keep_all`.
    pub n_spikes: usize,
    pub clamp_events: usize,
}

impl SpikeStatistics {
    pub fn broken_fraction(&self) -> f64 {
        if self.n_trajectories == 0 {
            0.0
        } else {
            self.n_broken as f64 / self.n_trajectories as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub spec: NetworkSpec,
    pub config: SimulationConfig,
    pub method: Method,
    pub series: Vec<ObservableSeries>,
    /// Homodyne signal of every site whose two quadratures were tracked.
    pub homodyne: Vec<ObservableSeries>,
    pub window_averages: Vec<WindowAverage>,
    pub spikes: SpikeStatistics,
    pub histogram: Option<Histogram>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl EnsembleSummary {
    pub fn series(&self, name: &str) -> Option<&ObservableSeries> {
        self.series.iter().chain(&self.homodyne).find(|s| s.name == name)
    }

    pub fn window_average(&self, name: &str) -> Option<&WindowAverage> {
        self.window_averages.iter().find(|w| w.name == name)
    }
}

/// Accumulators of one block of trajectories (or of everything folded so far).
#[derive(Clone, Debug)]
struct Partial {
    moments: Vec<Vec<Moments>>,
    window: Vec<Moments>,
    histogram_values: Vec<f64>,
    statuses: Vec<Status>,
    n_spikes: usize,
    clamp_events: usize,
}

impl Partial {
    fn new(n_obs: usize, n_times: usize) -> Self {
        Partial {
            moments: vec![vec![Moments::default(); n_times]; n_obs],
            window: vec![Moments::default(); n_obs],
            histogram_values: Vec::new(),
            statuses: Vec::new(),
            n_spikes: 0,
            clamp_events: 0,
        }
    }

    fn merge(&mut self, other: Partial) {
        for (mine, theirs) in self.moments.iter_mut().zip(&other.moments) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.merge(b);
            }
        }
        for (a, b) in self.window.iter_mut().zip(&other.window) {
            a.merge(b);
        }
        self.histogram_values.extend(other.histogram_values);
        self.statuses.extend(other.statuses);
        self.n_spikes += other.n_spikes;
        self.clamp_events += other.clamp_events;
    }
}

struct Job<'a> {
    spec: &'a NetworkSpec,
    config: &'a SimulationConfig,
    request: &'a EnsembleRequest,
    times: Vec<f64>,
}

/// Random stream of trajectory `k`; an ensemble draws trajectory `k` from
/// exactly this generator whatever the thread count.
pub fn trajectory_rng(master_seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(k as u64);
    rng
}

impl Job<'_> {
    fn trajectory(&self, k: usize, partial: &mut Partial) -> Result<()> {
        let n_obs = self.request.observables.len();
        let n_times = self.times.len();
        let mut values = vec![C64::default(); n_obs * n_times];
        let mut hist = vec![0.0; if self.request.histogram.is_some() { n_times } else { 0 }];
        let mut bad_from = usize::MAX;

        let mut rng = trajectory_rng(self.config.master_seed, k);

        let spec = self.spec;
        let request = self.request;
        let mut record = |idx: usize, sample: &dyn Evaluate| {
            if idx >= n_times {
                return;
            }
            for (o, obs) in request.observables.iter().enumerate() {
                match sample.eval(obs, spec) {
                    Ok(v) => values[o * n_times + idx] = v,
                    Err(_) => bad_from = bad_from.min(idx),
                }
            }
            if let Some(h) = &request.histogram {
                hist[idx] = sample.eval(&Observable::Current(h.bond.0, h.bond.1), spec).map_or(f64::NAN, |c| c.re);
            }
        };
        let photons = self.config.photons(spec.n_sites);
        let outcome: Outcome = match request.method {
            Method::PositiveP => {
                let x0 = initial_state_coherent(spec, &photons, self.config)?;
                integrate_with(&x0, spec, self.config, &mut rng, |idx, _, x, _| record(idx, x))
            }
            Method::Classical => {
                let x0 = initial_state_spherical(spec, &photons, self.config)?;
                integrate_classical_with(&x0, spec, self.config, &mut rng, |idx, _, x, _| record(idx, x))?
            }
        };

        let mut status = outcome.status();
        if bad_from < outcome.n_recorded && status.is_completed() {
            status = Status::BrokeDown(self.times[bad_from]);
        }
        let usable = usable_samples(status, outcome.n_recorded.min(bad_from).min(n_times), self.config.spike_policy);
        for (o, series) in partial.moments.iter_mut().enumerate() {
            for (m, v) in series.iter_mut().zip(&values[o * n_times..o * n_times + usable]) {
                m.push(*v);
            }
        }
        if let Some((t0, t1)) = request.steady_window {
            let inside = |idx: &usize| self.times[*idx] >= t0 && self.times[*idx] <= t1;
            for (o, acc) in partial.window.iter_mut().enumerate() {
                let mut within = Moments::default();
                (0..usable).filter(inside).for_each(|idx| within.push(values[o * n_times + idx]));
                if within.count() > 0 {
                    acc.push(within.mean());
                }
            }
            if request.histogram.is_some() {
                partial.histogram_values.extend((0..usable).filter(inside).map(|idx| hist[idx]));
            }
        }
        partial.statuses.push(status);
        partial.n_spikes += outcome.spike_times.len();
        partial.clamp_events += outcome.clamp_events;
        Ok(())
    }

    fn block(&self, b: usize) -> Result<Partial> {
        let mut partial = Partial::new(self.request.observables.len(), self.times.len());
        let end = ((b + 1) * BLOCK).min(self.config.n_trajectories);
        for k in b * BLOCK..end {
            self.trajectory(k, &mut partial)?;
        }
        Ok(partial)
    }
}

/// Object-safe view used by the sample sink.
trait Evaluate {
    fn eval(&self, obs: &Observable, spec: &NetworkSpec) -> Result<C64>;
}

impl<S: PhaseSample> Evaluate for S {
    fn eval(&self, obs: &Observable, spec: &NetworkSpec) -> Result<C64> {
        obs.evaluate(self, spec)
    }
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Runs `config.n_trajectories` trajectories and reduces them.
pub fn run_ensemble(spec: &NetworkSpec, config: &SimulationConfig, request: &EnsembleRequest) -> Result<EnsembleSummary> {
    validate(spec, config).into_result()?;
    if request.method == Method::Classical && !spec.all_spins_infinite() {
        return Err(Error::Unsupported("classical ensembles need spin_s = inf at every site".into()));
    }
    if request.histogram.is_some() && request.steady_window.is_none() {
        return Err(Error::Unsupported("a current histogram needs a steady window".into()));
    }
    let start = Instant::now();
    let job = Job {
        spec,
        config,
        request,
        times: record_times(config),
    };
    let n_blocks = config.n_trajectories.div_ceil(BLOCK);
    let n_obs = request.observables.len();
    let width = request.threads.unwrap_or_else(rayon::current_num_threads).max(1);
    let total = with_pool(request.threads, || -> Result<Partial> {
        let mut total = Partial::new(n_obs, job.times.len());
        let blocks: Vec<usize> = (0..n_blocks).collect();
        for chunk in blocks.chunks(4 * width) {
            let parts: Vec<Result<Partial>> = chunk.par_iter().map(|&b| job.block(b)).collect();
            for part in parts {
                total.merge(part?);
            }
        }
        Ok(total)
    })??;

    if total.moments.first().and_then(|m| m.first()).is_some_and(|m| m.count() == 0) {
        return Err(Error::EmptyEnsemble);
    }
    let series: Vec<ObservableSeries> = request
        .observables
        .iter()
        .zip(&total.moments)
        .map(|(obs, m)| ObservableSeries::from_moments(obs.name(), job.times.clone(), m))
        .collect();
    let homodyne = (0..spec.n_sites)
        .filter_map(|i| {
            let qi = series.iter().find(|s| s.name == Observable::QuadratureI(i).name())?;
            let qq = series.iter().find(|s| s.name == Observable::QuadratureQ(i).name())?;
            Some(homodyne_series(format!("homodyne_{i}"), qi, qq))
        })
        .collect();
    let window_averages = match request.steady_window {
        Some(w) => request
            .observables
            .iter()
            .zip(&total.window)
            .map(|(obs, m)| WindowAverage::from_moments(obs.name(), w, m))
            .collect(),
        None => Vec::new(),
    };
    let histogram = request.histogram.map(|h| {
        let vals: Vec<f64> = total.histogram_values.iter().copied().filter(|v| v.is_finite()).collect();
        Histogram::from_values(&vals, h.n_bins, h.range)
    });

    let failure_times: Vec<f64> = total.statuses.iter().filter_map(|s| s.failure_time()).collect();
    let spikes = SpikeStatistics {
        n_trajectories: total.statuses.len(),
        n_completed: total.statuses.iter().filter(|s| s.is_completed()).count(),
        n_broken: failure_times.len(),
        n_diverged: total.statuses.iter().filter(|s| matches!(s, Status::Diverged(_))).count(),
        failure_histogram: (!failure_times.is_empty()).then(|| Histogram::from_values(&failure_times, 20, (0.0, config.t_final))),
        failure_times,
        n_spikes: total.n_spikes,
        clamp_events: total.clamp_events,
    };
    Ok(EnsembleSummary {
        spec: spec.clone(),
        config: config.clone(),
        method: request.method,
        series,
        homodyne,
        window_averages,
        spikes,
        histogram,
        elapsed: start.elapsed(),
    })
}

/// Model parameter varied by [`scan_parameter`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    /// Light-matter coupling at every site.
    G,
    /// Every hopping amplitude.
    J,
    Kappa,
    /// Drive amplitude of site 0.
    Drive,
    Nbar,
    OmegaC,
    OmegaS,
}

impl ScanParameter {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "g" => ScanParameter::G,
            "J" | "j" => ScanParameter::J,
            "kappa" => ScanParameter::Kappa,
            "f" | "drive" => ScanParameter::Drive,
            "nbar" => ScanParameter::Nbar,
            "omega_c" => ScanParameter::OmegaC,
            "omega_s" => ScanParameter::OmegaS,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::G => "g",
            ScanParameter::J => "J",
            ScanParameter::Kappa => "kappa",
            ScanParameter::Drive => "drive",
            ScanParameter::Nbar => "nbar",
            ScanParameter::OmegaC => "omega_c",
            ScanParameter::OmegaS => "omega_s",
        }
    }

    pub fn apply(self, template: &NetworkSpec, value: f64) -> NetworkSpec {
        let mut spec = template.clone();
        match self {
            ScanParameter::J => spec.hopping.iter_mut().for_each(|h| h.amplitude = value),
            ScanParameter::Drive => {
                if let Some(s) = spec.sites.first_mut() {
                    s.drive_amplitude = value;
                }
            }
            _ => {
                for s in &mut spec.sites {
                    let field = match self {
                        ScanParameter::G => &mut s.g,
                        ScanParameter::Kappa => &mut s.kappa,
                        ScanParameter::Nbar => &mut s.nbar,
                        ScanParameter::OmegaC => &mut s.omega_c,
                        _ => &mut s.omega_s,
                    };
                    *field = value;
                }
            }
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub value: f64,
    pub average: WindowAverage,
    pub n_broken: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub parameter: ScanParameter,
    pub observable: String,
    pub points: Vec<ScanPoint>,
    /// The scanned observable's time series, one per value.
    pub series: Vec<ObservableSeries>,
}

impl ScanResult {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.average.mean.re).collect()
    }
}

/// Runs one ensemble per value and time-averages `observable` over the
/// request's steady window.
pub fn scan_parameter(
    spec_template: &NetworkSpec,
    parameter: ScanParameter,
    values: &[f64],
    config: &SimulationConfig,
    request: &EnsembleRequest,
    observable: Observable,
) -> Result<ScanResult> {
    if values.is_empty() || values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Unsupported("scan values must be non-empty and strictly increasing".into()));
    }
    let window = request
        .steady_window
        .ok_or_else(|| Error::Unsupported("a scan needs a steady window".into()))?;
    let mut req = request.clone();
    req.observables = vec![observable];
    let mut points = Vec::with_capacity(values.len());
    let mut series = Vec::with_capacity(values.len());
    for &value in values {
        let spec = parameter.apply(spec_template, value);
        let mut summary = run_ensemble(&spec, config, &req)?;
        let average = summary
            .window_averages
            .pop()
            .filter(|w| w.n_trajectories > 0)
            .ok_or(Error::EmptyWindow { start: window.0, end: window.1 })?;
        points.push(ScanPoint {
            value,
            average,
            n_broken: summary.spikes.n_broken,
        });
        let mut s = summary.series.swap_remove(0);
        s.name = format!("{}_{}={value}", s.name, parameter.name());
        series.push(s);
    }
    Ok(ScanResult {
        parameter,
        observable: observable.name(),
        points,
        series,
    })
}

/// Convenience: `run_ensemble` with the standard observable set.
pub fn run_standard(
    spec: &NetworkSpec,
    config: &SimulationConfig,
    method: Method,
    steady_window: Option<(f64, f64)>,
    threads: Option<usize>,
) -> Result<EnsembleSummary> {
    let mut request = EnsembleRequest::new(method, Observable::standard_set(spec)).with_threads(threads);
    request.steady_window = steady_window;
    run_ensemble(spec, config, &request)
}
