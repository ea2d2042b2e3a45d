//! Physical expectation values from phase-space samples, and their
//! ensemble reductions.
//!
//! Single samples give complex numbers; only ensemble means are physical.

use serde::Serialize;

use crate::dynamics::sigma;
use crate::model::{NetworkSpec, PhaseSpacePoint, SiteVector, Spin, SpikePolicy, SphericalPoint};
use crate::sde::{Status, TrajectoryRecord};
use crate::stats::{Histogram, Moments};
use crate::{Error, Result, C64, I, POLE_TOLERANCE};

/// Read access to the per-site labels of a sample.
pub trait PhaseSample {
    fn n_sites(&self) -> usize;
    fn alpha(&self, site: usize) -> C64;
    fn beta(&self, site: usize) -> C64;
    /// `⟨S_z⟩/s`, in `[-1, 1]` for conjugate samples.
    fn spin_z_unit(&self, site: usize) -> Result<C64>;
    /// `(⟨S_x⟩/s, ⟨S_y⟩/s)`.
    fn spin_xy_unit(&self, site: usize) -> Result<(C64, C64)>;
}

fn pole_check(site: usize, s: &SiteVector) -> Result<C64> {
    let d = C64::new(1.0, 0.0) + s.z * s.w;
    if d.norm() <= POLE_TOLERANCE {
        return Err(Error::Pole { site, modulus: d.norm() });
    }
    Ok(d)
}

impl PhaseSample for PhaseSpacePoint {
    fn n_sites(&self) -> usize {
        self.sites.len()
    }

    fn alpha(&self, site: usize) -> C64 {
        self.sites[site].alpha
    }

    fn beta(&self, site: usize) -> C64 {
        self.sites[site].beta
    }

    fn spin_z_unit(&self, site: usize) -> Result<C64> {
        let s = &self.sites[site];
        pole_check(site, s)?;
        Ok(sigma(s.z * s.w))
    }

    fn spin_xy_unit(&self, site: usize) -> Result<(C64, C64)> {
        let s = &self.sites[site];
        let d = pole_check(site, s)?;
        Ok(((s.z + s.w) / d, -I * (s.z - s.w) / d))
    }
}

impl PhaseSample for SphericalPoint {
    fn n_sites(&self) -> usize {
        self.sites.len()
    }

    fn alpha(&self, site: usize) -> C64 {
        self.sites[site].alpha
    }

    fn beta(&self, site: usize) -> C64 {
        self.sites[site].alpha.conj()
    }

    fn spin_z_unit(&self, site: usize) -> Result<C64> {
        Ok(C64::new(-self.sites[site].c, 0.0))
    }

    fn spin_xy_unit(&self, site: usize) -> Result<(C64, C64)> {
        let s = &self.sites[site];
        let sin = s.sin_theta();
        Ok((C64::new(sin * s.phi.cos(), 0.0), C64::new(sin * s.phi.sin(), 0.0)))
    }
}

/// `β_i α_i`; its ensemble mean is the rescaled photon number.
pub fn photon_number<S: PhaseSample>(sample: &S, site: usize) -> C64 {
    sample.beta(site) * sample.alpha(site)
}

/// `−s (1 − zw)/(1 + zw)`; in the classical limit `s` is replaced by 1.
pub fn spin_z<S: PhaseSample>(sample: &S, site: usize, spin: Spin) -> Result<C64> {
    Ok(sample.spin_z_unit(site)? * spin.scale())
}

/// `(s (z + w)/(1 + zw), (s/i)(z − w)/(1 + zw))`.
pub fn spin_xy<S: PhaseSample>(sample: &S, site: usize, spin: Spin) -> Result<(C64, C64)> {
    let (x, y) = sample.spin_xy_unit(site)?;
    Ok((x * spin.scale(), y * spin.scale()))
}

/// `i J (β_i α_j − β_j α_i)`: the photon current from site `i` to site `j`.
pub fn intercavity_current<S: PhaseSample>(sample: &S, i: usize, j: usize, hopping: f64) -> C64 {
    I * hopping * (sample.beta(i) * sample.alpha(j) - sample.beta(j) * sample.alpha(i))
}

/// Homodyne signal from ensemble means of `α` and `β`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Homodyne {
    pub value: f64,
    /// `|Im⟨I⟩| + |Im⟨Q⟩|`, which vanishes in the infinite-ensemble limit.
    pub imaginary_residual: f64,
}

pub fn homodyne(mean_alpha: C64, mean_beta: C64) -> Homodyne {
    let quad_i = 0.5 * (mean_alpha + mean_beta);
    let quad_q = 0.5 * I * (mean_beta - mean_alpha);
    Homodyne {
        value: quad_i.re * quad_i.re + quad_q.re * quad_q.re,
        imaginary_residual: quad_i.im.abs() + quad_q.im.abs(),
    }
}

/// Scalar observables tracked by ensembles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    PhotonNumber(usize),
    Alpha(usize),
    Beta(usize),
    SpinZ(usize),
    SpinX(usize),
    SpinY(usize),
    /// `(α + β)/2`.
    QuadratureI(usize),
    /// `i(β − α)/2`.
    QuadratureQ(usize),
    Current(usize, usize),
}

impl Observable {
    pub fn name(&self) -> String {
        match *self {
            Observable::PhotonNumber(i) => format!("n_{i}"),
            Observable::Alpha(i) => format!("alpha_{i}"),
            Observable::Beta(i) => format!("beta_{i}"),
            Observable::SpinZ(i) => format!("sz_{i}"),
            Observable::SpinX(i) => format!("sx_{i}"),
            Observable::SpinY(i) => format!("sy_{i}"),
            Observable::QuadratureI(i) => format!("quad_i_{i}"),
            Observable::QuadratureQ(i) => format!("quad_q_{i}"),
            Observable::Current(i, j) => format!("current_{i}_{j}"),
        }
    }

    pub fn evaluate<S: PhaseSample>(&self, sample: &S, spec: &NetworkSpec) -> Result<C64> {
        let spin = |i: usize| spec.sites[i].spin_s;
        Ok(match *self {
            Observable::PhotonNumber(i) => photon_number(sample, i),
            Observable::Alpha(i) => sample.alpha(i),
            Observable::Beta(i) => sample.beta(i),
            Observable::SpinZ(i) => spin_z(sample, i, spin(i))?,
            Observable::SpinX(i) => spin_xy(sample, i, spin(i))?.0,
            Observable::SpinY(i) => spin_xy(sample, i, spin(i))?.1,
            Observable::QuadratureI(i) => 0.5 * (sample.alpha(i) + sample.beta(i)),
            Observable::QuadratureQ(i) => 0.5 * I * (sample.beta(i) - sample.alpha(i)),
            Observable::Current(i, j) => {
                intercavity_current(sample, i, j, spec.hopping_amplitude(i, j).unwrap_or(0.0))
            }
        })
    }

    /// Photon numbers, quadratures and spin components of every site, then
    /// the current along every bond.
    pub fn standard_set(spec: &NetworkSpec) -> Vec<Observable> {
        let mut out = Vec::new();
        for i in 0..spec.n_sites {
            out.extend([
                Observable::PhotonNumber(i),
                Observable::QuadratureI(i),
                Observable::QuadratureQ(i),
                Observable::SpinZ(i),
                Observable::SpinX(i),
                Observable::SpinY(i),
            ]);
        }
        out.extend(spec.bonds().into_iter().map(|(i, j, _)| Observable::Current(i, j)));
        out
    }
}

/// Mean and standard error of one observable over time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub mean: Vec<C64>,
    pub std_error: Vec<f64>,
    pub n_samples: Vec<usize>,
}

impl ObservableSeries {
    pub fn from_moments(name: String, times: Vec<f64>, moments: &[Moments]) -> Self {
        ObservableSeries {
            name,
            times,
            mean: moments.iter().map(Moments::mean).collect(),
            std_error: moments.iter().map(Moments::std_error).collect(),
            n_samples: moments.iter().map(Moments::count).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Plain average of the real mean over samples with `t ∈ [t0, t1]`.
    pub fn time_average(&self, window: (f64, f64)) -> Result<f64> {
        let vals: Vec<f64> = self
            .times
            .iter()
            .zip(&self.mean)
            .zip(&self.n_samples)
            .filter(|((t, _), n)| **t >= window.0 && **t <= window.1 && **n > 0)
            .map(|((_, m), _)| m.re)
            .collect();
        if vals.is_empty() {
            return Err(Error::EmptyWindow { start: window.0, end: window.1 });
        }
        Ok(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// `h(t)` from the quadrature series of one site, with first-order error
/// propagation from the quadrature standard errors.
pub fn homodyne_series(name: String, quad_i: &ObservableSeries, quad_q: &ObservableSeries) -> ObservableSeries {
    let mut out = ObservableSeries {
        name,
        times: quad_i.times.clone(),
        mean: Vec::with_capacity(quad_i.len()),
        std_error: Vec::with_capacity(quad_i.len()),
        n_samples: quad_i.n_samples.clone(),
    };
    for k in 0..quad_i.len() {
        let (a, b) = (quad_i.mean[k], quad_q.mean[k]);
        out.mean.push(C64::new(a.re * a.re + b.re * b.re, a.im.abs() + b.im.abs()));
        let (sa, sb) = (quad_i.std_error[k], quad_q.std_error[k]);
        out.std_error.push(2.0 * ((a.re * sa).powi(2) + (b.re * sb).powi(2)).sqrt());
    }
    out
}

/// How many leading samples of a trajectory count under `policy`.
pub fn usable_samples(status: Status, n_recorded: usize, policy: SpikePolicy) -> usize {
    match (policy, status) {
        (SpikePolicy::TruncateTrajectory, Status::BrokeDown(_) | Status::Diverged(_)) => n_recorded.min(1),
        _ => n_recorded,
    }
}

fn longest_times<S>(trajectories: &[TrajectoryRecord<S>]) -> Vec<f64> {
    trajectories
        .iter()
        .max_by_key(|t| t.times.len())
        .map(|t| t.times.clone())
        .unwrap_or_default()
}

/// Per-time mean and standard error over the live trajectories.
pub fn reduce_ensemble<S: PhaseSample>(
    trajectories: &[TrajectoryRecord<S>],
    observable: Observable,
    spec: &NetworkSpec,
    policy: SpikePolicy,
) -> Result<ObservableSeries> {
    let times = longest_times(trajectories);
    let mut moments = vec![Moments::default(); times.len()];
    for traj in trajectories {
        let n = usable_samples(traj.status, traj.states.len(), policy);
        for (m, x) in moments.iter_mut().zip(&traj.states[..n]) {
            m.push(observable.evaluate(x, spec)?);
        }
    }
    if moments.first().is_none_or(|m| m.count() == 0) {
        return Err(Error::EmptyEnsemble);
    }
    Ok(ObservableSeries::from_moments(observable.name(), times, &moments))
}

/// Mean over trajectories of each trajectory's time average inside a window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowAverage {
    pub name: String,
    pub window: (f64, f64),
    pub mean: C64,
    pub std_error: f64,
    pub n_trajectories: usize,
}

impl WindowAverage {
    pub fn from_moments(name: String, window: (f64, f64), m: &Moments) -> Self {
        WindowAverage {
            name,
            window,
            mean: m.mean(),
            std_error: m.std_error(),
            n_trajectories: m.count(),
        }
    }
}

/// Window average with its error taken from the spread of per-trajectory
/// averages, which accounts for correlations in time.
pub fn window_average<S: PhaseSample>(
    trajectories: &[TrajectoryRecord<S>],
    observable: Observable,
    spec: &NetworkSpec,
    policy: SpikePolicy,
    window: (f64, f64),
) -> Result<WindowAverage> {
    let mut across = Moments::default();
    for traj in trajectories {
        let n = usable_samples(traj.status, traj.states.len(), policy);
        let mut within = Moments::default();
        for (t, x) in traj.times[..n].iter().zip(&traj.states[..n]) {
            if *t >= window.0 && *t <= window.1 {
                within.push(observable.evaluate(x, spec)?);
            }
        }
        if within.count() > 0 {
            across.push(within.mean());
        }
    }
    if across.count() == 0 {
        return Err(Error::EmptyWindow { start: window.0, end: window.1 });
    }
    Ok(WindowAverage::from_moments(observable.name(), window, &across))
}

/// Normalized histogram of `Re j_{i→j}` over every recorded sample with
/// `t` inside `steady_window`.
pub fn current_histogram<S: PhaseSample>(
    trajectories: &[TrajectoryRecord<S>],
    spec: &NetworkSpec,
    bond: (usize, usize),
    steady_window: (f64, f64),
    n_bins: usize,
    range: (f64, f64),
) -> Result<Histogram> {
    let observable = Observable::Current(bond.0, bond.1);
    let mut values = Vec::new();
    for traj in trajectories {
        for (t, x) in traj.times.iter().zip(&traj.states) {
            if *t >= steady_window.0 && *t <= steady_window.1 {
                values.push(observable.evaluate(x, spec)?.re);
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyWindow { start: steady_window.0, end: steady_window.1 });
    }
    Ok(Histogram::from_values(&values, n_bins, range))
}
