//! Fixed-step Itô Euler–Maruyama integrators with breakdown detection.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dynamics::{conserved_monitor, drift_into, monitor_increment, restoring, sample_noise_into};
use crate::dynamics::spherical::{inverted_rate, stereographic_rate};
use crate::model::{
    NetworkSpec, PhaseSpacePoint, SimulationConfig, SiteVector, SpikePolicy, SphericalPoint, SphericalSite,
};
use crate::{Error, Result, C64, I};

/// Terminal state of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "time", rename_all = "snake_case")]
pub enum Status {
    Completed,
    /// Monitor jump or pole, at the time of the failed step.
    BrokeDown(f64),
    /// Non-finite value or a component beyond the divergence radius.
    Diverged(f64),
}

impl Status {
    pub fn is_completed(self) -> bool {
        matches!(self, Status::Completed)
    }

    pub fn failure_time(self) -> Option<f64> {
        match self {
            Status::Completed => None,
            Status::BrokeDown(t) | Status::Diverged(t) => Some(t),
        }
    }
}

/// A recorded trajectory. Only states reached before a failure are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<S = PhaseSpacePoint> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub status: Status,
    pub monitor: Vec<C64>,
    /// Times of monitor jumps tolerated under the `keep_all` policy.
    pub spike_times: Vec<f64>,
    /// Number of times `c` had to be clamped back into `[-1, 1]`.
    pub clamp_events: usize,
}

/// Everything but the recorded samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub status: Option<Status>,
    pub spike_times: Vec<f64>,
    pub clamp_events: usize,
    pub n_recorded: usize,
}

impl Outcome {
    pub fn status(&self) -> Status {
        self.status.unwrap_or(Status::Completed)
    }
}

fn step_time(n: usize, n_steps: usize, config: &SimulationConfig) -> f64 {
    if n >= n_steps {
        config.t_final
    } else {
        n as f64 * config.dt
    }
}

fn is_recorded(n: usize, n_steps: usize, stride: usize) -> bool {
    n % stride == 0 || n == n_steps
}

/// Times at which integrators record samples for this configuration.
pub fn record_times(config: &SimulationConfig) -> Vec<f64> {
    let n_steps = config.n_steps();
    let stride = config.record_stride();
    (0..=n_steps)
        .filter(|&n| is_recorded(n, n_steps, stride))
        .map(|n| step_time(n, n_steps, config))
        .collect()
}

/// One Euler–Maruyama step of length `config.dt` from time `t`.
pub fn step<R: Rng + ?Sized>(
    state: &PhaseSpacePoint,
    spec: &NetworkSpec,
    config: &SimulationConfig,
    t: f64,
    rng: &mut R,
) -> Result<PhaseSpacePoint> {
    let mut next = state.clone();
    let mut drift = vec![SiteVector::default(); state.sites.len()];
    let mut noise = drift.clone();
    euler_into(&state.sites, spec, config.regularization_epsilon, t, config.dt, rng, &mut drift, &mut noise, &mut next.sites)?;
    Ok(next)
}

#[allow(clippy::too_many_arguments)]
fn euler_into<R: Rng + ?Sized>(
    x: &[SiteVector],
    spec: &NetworkSpec,
    epsilon: f64,
    t: f64,
    h: f64,
    rng: &mut R,
    drift: &mut [SiteVector],
    noise: &mut [SiteVector],
    out: &mut [SiteVector],
) -> Result<()> {
    drift_into(x, spec, t, drift)?;
    if epsilon > 0.0 {
        for (a, s) in drift.iter_mut().zip(x) {
            a.z -= restoring(s.z, epsilon);
            a.w -= restoring(s.w, epsilon);
        }
    }
    sample_noise_into(x, spec, h, rng, noise)?;
    for ((o, s), (a, d)) in out.iter_mut().zip(x).zip(drift.iter().zip(noise.iter())) {
        *o = SiteVector {
            alpha: s.alpha + a.alpha * h + d.alpha,
            beta: s.beta + a.beta * h + d.beta,
            z: s.z + a.z * h + d.z,
            w: s.w + a.w * h + d.w,
        };
    }
    Ok(())
}

/// Integrates a positive-P trajectory and keeps every recorded state.
pub fn integrate<R: Rng + ?Sized>(
    initial: &PhaseSpacePoint,
    spec: &NetworkSpec,
    config: &SimulationConfig,
    rng: &mut R,
) -> TrajectoryRecord {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut monitor = Vec::new();
    let outcome = integrate_with(initial, spec, config, rng, |_, t, x, e| {
        times.push(t);
        states.push(x.clone());
        monitor.push(e);
    });
    TrajectoryRecord {
        times,
        states,
        status: outcome.status(),
        monitor,
        spike_times: outcome.spike_times,
        clamp_events: 0,
    }
}

/// Streaming form of [`integrate`]: `sink(k, t, state, E)` is called for the
/// `k`-th recorded sample instead of storing it.
pub fn integrate_with<R, F>(
    initial: &PhaseSpacePoint,
    spec: &NetworkSpec,
    config: &SimulationConfig,
    rng: &mut R,
    mut sink: F,
) -> Outcome
where
    R: Rng + ?Sized,
    F: FnMut(usize, f64, &PhaseSpacePoint, C64),
{
    let mut outcome = Outcome::default();
    let n_steps = config.n_steps();
    let stride = config.record_stride();
    let n_sites = initial.sites.len();
    let mut x = initial.clone();
    let mut next = initial.clone();
    let mut drift = vec![SiteVector::default(); n_sites];
    let mut noise = drift.clone();

    let mut e0 = match conserved_monitor(&x.sites) {
        Ok(e) if x.is_finite() => e,
        _ => {
            outcome.status = Some(Status::BrokeDown(0.0));
            return outcome;
        }
    };
    sink(0, 0.0, &x, e0);
    outcome.n_recorded = 1;

    for n in 1..=n_steps {
        let t0 = step_time(n - 1, n_steps, config);
        let t1 = step_time(n, n_steps, config);
        let h = t1 - t0;
        let stepped = euler_into(
            &x.sites,
            spec,
            config.regularization_epsilon,
            t0,
            h,
            rng,
            &mut drift,
            &mut noise,
            &mut next.sites,
        );
        if stepped.is_err() {
            outcome.status = Some(Status::BrokeDown(t1));
            return outcome;
        }
        if !next.is_finite() || next.max_norm() > config.divergence_radius {
            outcome.status = Some(Status::Diverged(t1));
            return outcome;
        }
        let Ok(e1) = conserved_monitor(&next.sites) else {
            outcome.status = Some(Status::BrokeDown(t1));
            return outcome;
        };
        let expected = monitor_increment(&x.sites, &drift, spec, h);
        if (e1 - e0 - expected).norm() > config.breakdown_threshold * (1.0 + e0.norm()) {
            if config.spike_policy == SpikePolicy::KeepAll {
                outcome.spike_times.push(t1);
            } else {
                outcome.status = Some(Status::BrokeDown(t1));
                return outcome;
            }
        }
        std::mem::swap(&mut x, &mut next);
        e0 = e1;
        if is_recorded(n, n_steps, stride) {
            sink(outcome.n_recorded, t1, &x, e0);
            outcome.n_recorded += 1;
        }
    }
    outcome.status = Some(Status::Completed);
    outcome
}

/// Width of the polar caps in which the spin is stepped in a stereographic
/// chart instead of `(φ, c)`, whose rates are singular at the poles.
const CAP_ENTER: f64 = 1e-3;
const CAP_LEAVE: f64 = 2e-3;

#[derive(Clone, Copy, Debug)]
enum Chart {
    Bulk { phi: f64, c: f64 },
    /// `z` around `c = 1`.
    Lower(C64),
    /// `u = 1/z` around `c = -1`.
    Upper(C64),
}

fn unwrap_phase(previous: f64, angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    previous + (angle - previous + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI
}

impl Chart {
    fn from_site(s: &SphericalSite) -> Chart {
        Chart::Bulk { phi: s.phi, c: s.c.clamp(-1.0, 1.0) }.rechart(s.phi)
    }

    /// `(φ, c)` with `φ` unwrapped against `phi_prev`.
    fn spherical(&self, phi_prev: f64) -> (f64, f64) {
        match *self {
            Chart::Bulk { phi, c } => (phi, c),
            Chart::Lower(z) => {
                let r2 = z.norm_sqr();
                let phi = if r2 > 0.0 { unwrap_phase(phi_prev, z.arg()) } else { phi_prev };
                (phi, (1.0 - r2) / (1.0 + r2))
            }
            Chart::Upper(u) => {
                let r2 = u.norm_sqr();
                let phi = if r2 > 0.0 { unwrap_phase(phi_prev, -u.arg()) } else { phi_prev };
                (phi, (r2 - 1.0) / (r2 + 1.0))
            }
        }
    }

    fn distance_to_pole(&self) -> f64 {
        match *self {
            Chart::Bulk { c, .. } => 1.0 - c.abs(),
            Chart::Lower(z) => 2.0 * z.norm_sqr() / (1.0 + z.norm_sqr()),
            Chart::Upper(u) => 2.0 * u.norm_sqr() / (1.0 + u.norm_sqr()),
        }
    }

    /// Switches chart when crossing a cap boundary (with hysteresis).
    fn rechart(self, phi_prev: f64) -> Chart {
        let d = self.distance_to_pole();
        match self {
            Chart::Bulk { phi, c } if d < CAP_ENTER => {
                if c > 0.0 {
                    Chart::Lower(C64::from_polar(((1.0 - c) / (1.0 + c)).sqrt(), phi))
                } else {
                    Chart::Upper(C64::from_polar(((1.0 + c) / (1.0 - c)).sqrt(), -phi))
                }
            }
            Chart::Lower(_) | Chart::Upper(_) if d > CAP_LEAVE => {
                let (phi, c) = self.spherical(phi_prev);
                Chart::Bulk { phi, c }
            }
            other => other,
        }
    }

    /// `√(1-c²) e^{iφ}`, i.e. `2z/(1+|z|²)`.
    fn transverse(&self) -> C64 {
        match *self {
            Chart::Bulk { phi, c } => C64::from_polar(((1.0 - c) * (1.0 + c)).max(0.0).sqrt(), phi),
            Chart::Lower(z) => 2.0 * z / (1.0 + z.norm_sqr()),
            Chart::Upper(u) => 2.0 * u.conj() / (1.0 + u.norm_sqr()),
        }
    }
}

/// Integrates the classical (`s = ∞`) equations in spherical coordinates and
/// keeps every recorded state.
pub fn integrate_classical<R: Rng + ?Sized>(
    initial: &SphericalPoint,
    spec: &NetworkSpec,
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<TrajectoryRecord<SphericalPoint>> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut monitor = Vec::new();
    let outcome = integrate_classical_with(initial, spec, config, rng, |_, t, x, e| {
        times.push(t);
        states.push(x.clone());
        monitor.push(e);
    })?;
    Ok(TrajectoryRecord {
        times,
        states,
        status: outcome.status(),
        monitor,
        spike_times: outcome.spike_times,
        clamp_events: outcome.clamp_events,
    })
}

fn classical_monitor(x: &SphericalPoint) -> C64 {
    C64::new(x.sites.iter().map(|s| s.alpha.norm_sqr() - s.c).sum(), 0.0)
}

/// Streaming form of [`integrate_classical`].
///
/// Requires `s = ∞` and `γ = 0` at every site. The monitor passed to the
/// sink is `Σ(|α|² − c)`.
pub fn integrate_classical_with<R, F>(
    initial: &SphericalPoint,
    spec: &NetworkSpec,
    config: &SimulationConfig,
    rng: &mut R,
    mut sink: F,
) -> Result<Outcome>
where
    R: Rng + ?Sized,
    F: FnMut(usize, f64, &SphericalPoint, C64),
{
    if !spec.all_spins_infinite() {
        return Err(Error::Unsupported("the classical integrator needs spin_s = inf at every site".into()));
    }
    if spec.sites.iter().any(|p| p.gamma != 0.0) {
        return Err(Error::Unsupported("the classical integrator does not support gamma > 0".into()));
    }
    let mut outcome = Outcome::default();
    let n_steps = config.n_steps();
    let stride = config.record_stride();
    let n_sites = initial.sites.len();

    let mut point = initial.clone();
    let mut charts: Vec<Chart> = initial.sites.iter().map(Chart::from_site).collect();
    let mut dalpha = vec![C64::default(); n_sites];

    if !point.is_finite() {
        outcome.status = Some(Status::Diverged(0.0));
        return Ok(outcome);
    }
    sink(0, 0.0, &point, classical_monitor(&point));
    outcome.n_recorded = 1;

    for n in 1..=n_steps {
        let t0 = step_time(n - 1, n_steps, config);
        let t1 = step_time(n, n_steps, config);
        let h = t1 - t0;
        let sdt = h.sqrt();

        for (i, ((s, p), chart)) in point.sites.iter().zip(&spec.sites).zip(&charts).enumerate() {
            dalpha[i] = ((I * p.omega_c - 0.5 * p.kappa) * s.alpha
                + I * spec.drive(i, t0)
                + I * p.g * chart.transverse())
                * h;
        }
        for hop in &spec.hopping {
            dalpha[hop.from] -= I * hop.amplitude * point.sites[hop.to].alpha * h;
        }
        for (i, ((s, p), chart)) in point.sites.iter_mut().zip(&spec.sites).zip(charts.iter_mut()).enumerate() {
            let alpha = s.alpha;
            *chart = match *chart {
                Chart::Bulk { phi, c } => {
                    let sin = ((1.0 - c) * (1.0 + c)).max(0.0).sqrt();
                    let field = alpha * C64::from_polar(1.0, -phi);
                    let dphi = p.omega_s + p.g * c / sin * 2.0 * field.re;
                    let dc = 2.0 * p.g * sin * field.im;
                    let mut c1 = c + dc * h;
                    if c1.abs() > 1.0 {
                        c1 = c1.clamp(-1.0, 1.0);
                        outcome.clamp_events += 1;
                    }
                    Chart::Bulk { phi: phi + dphi * h, c: c1 }
                }
                Chart::Lower(z) => Chart::Lower(z + stereographic_rate(alpha, z, p) * h),
                Chart::Upper(u) => Chart::Upper(u + inverted_rate(alpha, u, p) * h),
            };
            let (phi, c) = chart.spherical(s.phi);
            *chart = chart.rechart(s.phi);
            s.phi = phi;
            s.c = c;
            s.alpha = alpha + dalpha[i];
            if p.kappa * p.nbar > 0.0 {
                let k = (p.kappa * p.nbar / 2.0).sqrt() * sdt;
                let w0: f64 = rng.sample(StandardNormal);
                let w1: f64 = rng.sample(StandardNormal);
                s.alpha += C64::new(k * w0, k * w1);
            }
        }
        let radius = point.sites.iter().map(|s| s.alpha.norm()).fold(0.0, f64::max);
        if !point.is_finite() || radius > config.divergence_radius {
            outcome.status = Some(Status::Diverged(t1));
            return Ok(outcome);
        }
        if is_recorded(n, n_steps, stride) {
            sink(outcome.n_recorded, t1, &point, classical_monitor(&point));
            outcome.n_recorded += 1;
        }
    }
    outcome.status = Some(Status::Completed);
    Ok(outcome)
}
