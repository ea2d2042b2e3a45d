//! Network model, phase-space state containers and simulation configuration.
//!
//! Everything here is plain data: immutable after construction and shared
//! read-only by the integrators and ensemble workers.

use std::fmt;

use serde::Serialize;

use crate::{Error, Result, C64};

/// Spin quantum number of the collective atom at a site.
///
/// `Infinite` selects the classical scaling limit explicitly; it is not a
/// large float.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Spin {
    Finite(f64),
    Infinite,
}

impl Spin {
    pub fn half(twice: u32) -> Self {
        Spin::Finite(f64::from(twice) / 2.0)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Spin::Infinite)
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Spin::Finite(s) => Some(s),
            Spin::Infinite => None,
        }
    }

    /// `2s` as an integer, if `s` is a valid finite half-integer.
    pub fn twice(self) -> Option<usize> {
        match self {
            Spin::Finite(s) if s.is_finite() && s > 0.0 => {
                let k = (2.0 * s).round();
                ((2.0 * s - k).abs() <= 2e-12 && k >= 1.0).then_some(k as usize)
            }
            _ => None,
        }
    }

    /// Prefactor of the spin expectation values: `s` for finite spins and 1
    /// in the classical limit, where only the normalized spin survives.
    pub fn scale(self) -> f64 {
        match self {
            Spin::Finite(s) => s,
            Spin::Infinite => 1.0,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spin::Finite(s) => write!(f, "{s}"),
            Spin::Infinite => f.write_str("inf"),
        }
    }
}

/// Parameters of one site, in rescaled variables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteParams {
    pub omega_c: f64,
    pub omega_s: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Rescaled thermal occupation.
    pub nbar: f64,
    pub spin_s: Spin,
    /// Rescaled coherent drive amplitude.
    pub drive_amplitude: f64,
}

impl SiteParams {
    /// A resonant site (`ω_c = ω_s = 0`) with the given coupling, loss and spin.
    pub fn resonant(g: f64, kappa: f64, spin_s: Spin) -> Self {
        SiteParams {
            omega_c: 0.0,
            omega_s: 0.0,
            g,
            kappa,
            gamma: 0.0,
            nbar: 0.0,
            spin_s,
            drive_amplitude: 0.0,
        }
    }

    pub fn with_drive(mut self, f: f64) -> Self {
        self.drive_amplitude = f;
        self
    }

    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.nbar = nbar;
        self
    }
}

/// A directed hopping entry `J_{from,to}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Hopping {
    pub from: usize,
    pub to: usize,
    pub amplitude: f64,
}

/// Immutable description of a Dicke network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkSpec {
    pub n_sites: usize,
    pub sites: Vec<SiteParams>,
    /// Directed entries; a physical bond appears once in each direction.
    pub hopping: Vec<Hopping>,
    /// Optional linear ramp-on time for every drive; `None` means constant.
    pub drive_ramp: Option<f64>,
}

impl NetworkSpec {
    pub fn new(sites: Vec<SiteParams>) -> Self {
        NetworkSpec {
            n_sites: sites.len(),
            sites,
            hopping: Vec::new(),
            drive_ramp: None,
        }
    }

    /// Two identical resonant sites joined by a single bond of strength `j`.
    pub fn dimer(site: SiteParams, j: f64) -> Self {
        NetworkSpec::new(vec![site.clone(), site]).with_hopping(0, 1, j)
    }

    /// Sets `J_ij = J_ji = amplitude`.
    pub fn with_hopping(self, i: usize, j: usize, amplitude: f64) -> Self {
        self.with_directed_hopping(i, j, amplitude)
            .with_directed_hopping(j, i, amplitude)
    }

    /// Sets only `J_{from,to}`; the reverse entry is left untouched.
    pub fn with_directed_hopping(mut self, from: usize, to: usize, amplitude: f64) -> Self {
        self.hopping.retain(|h| !(h.from == from && h.to == to));
        self.hopping.push(Hopping {
            from,
            to,
            amplitude,
        });
        self.hopping.sort_by_key(|h| (h.from, h.to));
        self
    }

    pub fn with_drive_ramp(mut self, ramp: Option<f64>) -> Self {
        self.drive_ramp = ramp;
        self
    }

    pub fn hopping_amplitude(&self, from: usize, to: usize) -> Option<f64> {
        self.hopping
            .iter()
            .find(|h| h.from == from && h.to == to)
            .map(|h| h.amplitude)
    }

    /// Undirected bonds `(i, j, J_ij)` with `i < j`.
    pub fn bonds(&self) -> Vec<(usize, usize, f64)> {
        self.hopping
            .iter()
            .filter(|h| h.from < h.to)
            .map(|h| (h.from, h.to, h.amplitude))
            .collect()
    }

    /// Drive amplitude `f_i(t)`, including the optional ramp.
    pub fn drive(&self, site: usize, t: f64) -> f64 {
        let f = self.sites[site].drive_amplitude;
        match self.drive_ramp {
            Some(ramp) if ramp > 0.0 && t < ramp => f * (t / ramp).max(0.0),
            _ => f,
        }
    }

    pub fn all_spins_infinite(&self) -> bool {
        self.sites.iter().all(|s| s.spin_s.is_infinite())
    }

    pub fn any_spin_infinite(&self) -> bool {
        self.sites.iter().any(|s| s.spin_s.is_infinite())
    }

    /// Largest rate in the network, floored at 1.
    pub fn max_rate(&self) -> f64 {
        let site_rates = self.sites.iter().flat_map(|s| {
            [s.kappa, s.g, s.omega_c.abs(), s.omega_s.abs(), s.gamma]
        });
        let hop_rates = self.hopping.iter().map(|h| h.amplitude.abs());
        site_rates.chain(hop_rates).fold(1.0, f64::max)
    }
}

/// Amplitudes of one site in `(α, β, z, w)` order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SiteVector {
    pub alpha: C64,
    pub beta: C64,
    pub z: C64,
    pub w: C64,
}

impl SiteVector {
    pub fn new(alpha: C64, beta: C64, z: C64, w: C64) -> Self {
        SiteVector { alpha, beta, z, w }
    }

    pub fn to_array(self) -> [C64; 4] {
        [self.alpha, self.beta, self.z, self.w]
    }

    pub fn from_array(a: [C64; 4]) -> Self {
        SiteVector::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_norm(&self) -> f64 {
        self.to_array().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `self + k·v`.
    pub fn add_scaled(self, v: SiteVector, k: f64) -> Self {
        SiteVector {
            alpha: self.alpha + v.alpha * k,
            beta: self.beta + v.beta * k,
            z: self.z + v.z * k,
            w: self.w + v.w * k,
        }
    }
}

/// The positive-P state: one `(α, β, z, w)` quadruple per site.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSpacePoint {
    pub sites: Vec<SiteVector>,
}

impl PhaseSpacePoint {
    pub fn vacuum(n_sites: usize) -> Self {
        PhaseSpacePoint {
            sites: vec![SiteVector::default(); n_sites],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sites.iter().all(SiteVector::is_finite)
    }

    pub fn max_norm(&self) -> f64 {
        self.sites.iter().map(SiteVector::max_norm).fold(0.0, f64::max)
    }

    /// True when `β = α*` and `w = z*` at every site, to within `tol`.
    pub fn is_conjugate(&self, tol: f64) -> bool {
        self.sites.iter().all(|s| {
            (s.beta - s.alpha.conj()).norm() <= tol && (s.w - s.z.conj()).norm() <= tol
        })
    }
}

/// One site of the classical state in spherical spin coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SphericalSite {
    pub alpha: C64,
    /// Azimuth, unwrapped.
    pub phi: f64,
    /// Polar coordinate in `[-1, 1]`; `c = 1` is spin down (`z = 0`).
    pub c: f64,
}

impl SphericalSite {
    /// Stereographic label `z = √((1-c)/(1+c)) e^{iφ}`.
    pub fn stereographic(&self) -> C64 {
        let c = self.c.clamp(-1.0, 1.0);
        C64::from_polar(((1.0 - c) / (1.0 + c)).sqrt(), self.phi)
    }

    /// Inverse of [`SphericalSite::stereographic`] for a finite `z`.
    pub fn from_stereographic(alpha: C64, z: C64) -> Self {
        let r2 = z.norm_sqr();
        SphericalSite {
            alpha,
            phi: if r2 > 0.0 { z.arg() } else { 0.0 },
            c: (1.0 - r2) / (1.0 + r2),
        }
    }

    /// `√(1 - c²)`, evaluated as `√((1-c)(1+c))` with clamping at `|c| = 1`.
    pub fn sin_theta(&self) -> f64 {
        let c = self.c.clamp(-1.0, 1.0);
        ((1.0 - c) * (1.0 + c)).sqrt()
    }

    /// Azimuth reduced to `[0, 2π)` for reporting.
    pub fn phi_reduced(&self) -> f64 {
        self.phi.rem_euclid(std::f64::consts::TAU)
    }
}

/// The classical (`s = ∞`) state: per site `(α, φ, c)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphericalPoint {
    pub sites: Vec<SphericalSite>,
}

impl SphericalPoint {
    /// Maps onto the conjugate-pair Cartesian point `β = α*`, `w = z*`.
    pub fn to_cartesian(&self) -> PhaseSpacePoint {
        PhaseSpacePoint {
            sites: self
                .sites
                .iter()
                .map(|s| {
                    let z = s.stereographic();
                    SiteVector::new(s.alpha, s.alpha.conj(), z, z.conj())
                })
                .collect(),
        }
    }

    /// Maps a conjugate-pair Cartesian point onto the sphere (uses `α`, `z`).
    pub fn from_cartesian(point: &PhaseSpacePoint) -> Self {
        SphericalPoint {
            sites: point
                .sites
                .iter()
                .map(|s| SphericalSite::from_stereographic(s.alpha, s.z))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sites
            .iter()
            .all(|s| s.alpha.re.is_finite() && s.alpha.im.is_finite() && s.phi.is_finite())
    }
}

/// How trajectories that break down are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikePolicy {
    /// Stop at the first monitor jump and keep the samples recorded before it.
    #[default]
    ExcludeAfterBreakdown,
    /// Stop at the first monitor jump and drop the trajectory from every
    /// time after `t = 0`.
    TruncateTrajectory,
    /// Record monitor jumps as spikes but keep integrating; only poles and
    /// divergences stop a trajectory.
    KeepAll,
}

impl SpikePolicy {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "exclude_after_breakdown" => Some(SpikePolicy::ExcludeAfterBreakdown),
            "truncate_trajectory" => Some(SpikePolicy::TruncateTrajectory),
            "keep_all" => Some(SpikePolicy::KeepAll),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpikePolicy::ExcludeAfterBreakdown => "exclude_after_breakdown",
            SpikePolicy::TruncateTrajectory => "truncate_trajectory",
            SpikePolicy::KeepAll => "keep_all",
        }
    }
}

/// Integration and ensemble settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub regularization_epsilon: f64,
    pub initial_spin_offset: (f64, f64),
    pub breakdown_threshold: f64,
    pub divergence_radius: f64,
    pub spike_policy: SpikePolicy,
    /// Spacing of recorded samples; `None` records every step.
    pub sample_interval: Option<f64>,
    /// Initial photon amplitudes per site; empty means vacuum.
    pub initial_photons: Vec<C64>,
}

impl SimulationConfig {
    /// Defaults with the step size derived from the network's largest rate.
    pub fn for_network(spec: &NetworkSpec, t_final: f64) -> Self {
        SimulationConfig {
            dt: default_dt(spec),
            t_final,
            n_trajectories: 1,
            master_seed: 0,
            regularization_epsilon: 1e-8,
            initial_spin_offset: (1e-6, 1e-6),
            breakdown_threshold: 0.05,
            divergence_radius: 1e6,
            spike_policy: SpikePolicy::default(),
            sample_interval: None,
            initial_photons: Vec::new(),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_trajectories(mut self, n: usize) -> Self {
        self.n_trajectories = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_sample_interval(mut self, interval: f64) -> Self {
        self.sample_interval = Some(interval);
        self
    }

    pub fn with_photons(mut self, photons: Vec<C64>) -> Self {
        self.initial_photons = photons;
        self
    }

    pub fn with_spin_offset(mut self, eps1: f64, eps2: f64) -> Self {
        self.initial_spin_offset = (eps1, eps2);
        self
    }

    pub fn with_policy(mut self, policy: SpikePolicy) -> Self {
        self.spike_policy = policy;
        self
    }

    /// Number of integration steps between recorded samples.
    pub fn record_stride(&self) -> usize {
        match self.sample_interval {
            Some(interval) if interval > self.dt => (interval / self.dt).round().max(1.0) as usize,
            _ => 1,
        }
    }

    /// Number of steps needed to reach `t_final`; the last may be shorter.
    pub fn n_steps(&self) -> usize {
        let n = (self.t_final / self.dt).ceil();
        // absorb round-off so t_final = k·dt does not add a sliver step
        if (n - 1.0) * self.dt >= self.t_final * (1.0 - 1e-12) {
            (n - 1.0).max(1.0) as usize
        } else {
            n.max(1.0) as usize
        }
    }

    /// Initial photon amplitudes, padded with vacuum.
    pub fn photons(&self, n_sites: usize) -> Vec<C64> {
        if self.initial_photons.is_empty() {
            vec![C64::new(0.0, 0.0); n_sites]
        } else {
            self.initial_photons.clone()
        }
    }
}

/// `10⁻⁴ / max(κ, g, J, |ω_c|, |ω_s|, γ, 1)`.
pub fn default_dt(spec: &NetworkSpec) -> f64 {
    1e-4 / spec.max_rate()
}

/// List of violated invariants; empty iff the inputs are valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.contains(needle))
    }

    fn push(&mut self, message: impl Into<String>) {
        self.violations.push(message.into());
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every invariant of the network and the configuration.
pub fn validate(spec: &NetworkSpec, config: &SimulationConfig) -> ValidationReport {
    let mut report = validate_network(spec);
    validate_config_into(spec, config, &mut report);
    report
}

pub fn validate_network(spec: &NetworkSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if spec.n_sites == 0 {
        report.push("n_sites must be positive");
    }
    if spec.sites.len() != spec.n_sites {
        report.push(format!(
            "n_sites = {} but {} site blocks given",
            spec.n_sites,
            spec.sites.len()
        ));
    }
    for (i, site) in spec.sites.iter().enumerate() {
        for (name, value) in [("omega_c", site.omega_c), ("omega_s", site.omega_s)] {
            if !value.is_finite() {
                report.push(format!("site {i}: {name} must be finite"));
            }
        }
        for (name, value) in [
            ("g", site.g),
            ("kappa", site.kappa),
            ("gamma", site.gamma),
            ("nbar", site.nbar),
            ("drive_amplitude", site.drive_amplitude),
        ] {
            if !value.is_finite() || value < 0.0 {
                report.push(format!("site {i}: {name} must be finite and non-negative"));
            }
        }
        if let Spin::Finite(s) = site.spin_s {
            if site.spin_s.twice().is_none() {
                report.push(format!("site {i}: spin_s = {s} is not a positive half-integer"));
            }
        }
    }
    for h in &spec.hopping {
        if h.from == h.to {
            report.push(format!("self-hopping entry ({}, {})", h.from, h.to));
        }
        if h.from >= spec.n_sites || h.to >= spec.n_sites {
            report.push(format!(
                "hopping index ({}, {}) out of range for {} sites",
                h.from, h.to, spec.n_sites
            ));
        }
        if !h.amplitude.is_finite() {
            report.push(format!("hopping ({}, {}) must be finite", h.from, h.to));
        }
        match spec.hopping_amplitude(h.to, h.from) {
            Some(back) if back == h.amplitude => {}
            _ if h.from < h.to || spec.hopping_amplitude(h.to, h.from).is_none() => {
                report.push(format!("hopping not symmetric: J({}, {}) != J({}, {})", h.from, h.to, h.to, h.from));
            }
            _ => {}
        }
    }
    if let Some(ramp) = spec.drive_ramp {
        if !(ramp.is_finite() && ramp >= 0.0) {
            report.push("drive_ramp must be finite and non-negative");
        }
    }
    report
}

fn validate_config_into(spec: &NetworkSpec, config: &SimulationConfig, report: &mut ValidationReport) {
    if !(config.dt.is_finite() && config.dt > 0.0) {
        report.push("dt must be positive");
    }
    if !(config.t_final.is_finite() && config.t_final > 0.0) {
        report.push("t_final must be positive");
    }
    if config.dt > 0.0 && config.t_final > 0.0 && config.dt >= config.t_final {
        report.push("dt must be smaller than t_final");
    }
    if config.n_trajectories == 0 {
        report.push("n_trajectories must be positive");
    }
    if !(config.regularization_epsilon.is_finite() && config.regularization_epsilon >= 0.0) {
        report.push("regularization_epsilon must be non-negative");
    }
    let (e1, e2) = config.initial_spin_offset;
    if !(e1.is_finite() && e2.is_finite()) {
        report.push("initial_spin_offset must be finite");
    }
    if !(config.breakdown_threshold.is_finite() && config.breakdown_threshold > 0.0) {
        report.push("breakdown_threshold must be positive");
    }
    if !(config.divergence_radius.is_finite() && config.divergence_radius > 0.0) {
        report.push("divergence_radius must be positive");
    }
    if let Some(interval) = config.sample_interval {
        if !(interval.is_finite() && interval > 0.0) {
            report.push("sample_interval must be positive");
        }
    }
    if !config.initial_photons.is_empty() && config.initial_photons.len() != spec.n_sites {
        report.push(format!(
            "initial_photons has {} entries for {} sites",
            config.initial_photons.len(),
            spec.n_sites
        ));
    }
}

/// Coherent photon state with every spin slightly off the lowest-weight
/// state: `β = α*`, `z = ε₁ + iε₂`, `w = ε₁ − iε₂`.
pub fn initial_state_coherent(
    spec: &NetworkSpec,
    photon_amplitudes: &[C64],
    config: &SimulationConfig,
) -> Result<PhaseSpacePoint> {
    if photon_amplitudes.len() != spec.n_sites {
        return Err(Error::LengthMismatch {
            expected: spec.n_sites,
            got: photon_amplitudes.len(),
        });
    }
    let (e1, e2) = config.initial_spin_offset;
    let z = C64::new(e1, e2);
    Ok(PhaseSpacePoint {
        sites: photon_amplitudes
            .iter()
            .map(|&a| SiteVector::new(a, a.conj(), z, z.conj()))
            .collect(),
    })
}

/// The spherical image of [`initial_state_coherent`].
pub fn initial_state_spherical(
    spec: &NetworkSpec,
    photon_amplitudes: &[C64],
    config: &SimulationConfig,
) -> Result<SphericalPoint> {
    initial_state_coherent(spec, photon_amplitudes, config).map(|p| SphericalPoint::from_cartesian(&p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dimer() -> NetworkSpec {
        NetworkSpec::dimer(SiteParams::resonant(1.0, 0.5, Spin::Finite(1.0)), 1.0)
    }

    #[test]
    fn valid_dimer_has_empty_report() {
        let spec = dimer();
        let config = SimulationConfig::for_network(&spec, 1.0);
        let report = validate(&spec, &config);
        assert!(report.is_valid(), "{report}");
        assert_eq!(report, validate(&spec, &config));
    }

    #[test]
    fn asymmetric_hopping_is_reported() {
        let spec = dimer().with_directed_hopping(1, 0, 2.0);
        let report = validate(&spec, &SimulationConfig::for_network(&spec, 1.0));
        assert!(report.contains("hopping not symmetric"), "{report}");
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn one_sided_hopping_is_reported() {
        let spec = NetworkSpec::new(dimer().sites).with_directed_hopping(0, 1, 1.0);
        let report = validate_network(&spec);
        assert!(report.contains("hopping not symmetric"));
    }

    #[test]
    fn zero_dt_is_reported() {
        let spec = dimer();
        let config = SimulationConfig::for_network(&spec, 1.0).with_dt(0.0);
        assert!(validate(&spec, &config).contains("dt must be positive"));
    }

    #[test]
    fn structural_violations() {
        let mut spec = dimer().with_hopping(0, 0, 1.0).with_hopping(0, 5, 1.0);
        spec.sites[1].kappa = -1.0;
        spec.sites[0].spin_s = Spin::Finite(0.3);
        let report = validate_network(&spec);
        assert!(report.contains("self-hopping"));
        assert!(report.contains("out of range"));
        assert!(report.contains("kappa"));
        assert!(report.contains("half-integer"));
    }

    #[test]
    fn half_integer_spins() {
        assert_eq!(Spin::Finite(0.5).twice(), Some(1));
        assert_eq!(Spin::Finite(1.5 + 1e-13).twice(), Some(3));
        assert_eq!(Spin::Finite(1.5 + 1e-9).twice(), None);
        assert_eq!(Spin::Finite(0.0).twice(), None);
        assert_eq!(Spin::Infinite.twice(), None);
    }

    #[test]
    fn coherent_initial_states() {
        let spec = dimer();
        let config = SimulationConfig::for_network(&spec, 1.0).with_spin_offset(0.0, 0.0);
        let a = 50f64.sqrt();
        let p = initial_state_coherent(&spec, &[C64::new(a, 0.0), C64::new(0.0, 0.0)], &config).unwrap();
        assert!((p.sites[0].alpha.re - 7.0711).abs() < 1e-4);
        assert_eq!(p.sites[0].beta, p.sites[0].alpha);
        assert!(p.sites.iter().all(|s| s.z == C64::new(0.0, 0.0) && s.w == C64::new(0.0, 0.0)));

        let config = config.with_spin_offset(1e-6, 1e-6);
        let p = initial_state_coherent(&spec, &[C64::new(0.0, 0.0); 2], &config).unwrap();
        assert_eq!(p.sites[0].z, C64::new(1e-6, 1e-6));
        assert_eq!(p.sites[0].w, C64::new(1e-6, -1e-6));
        assert!(p.is_conjugate(0.0));

        let single = NetworkSpec::new(vec![SiteParams::resonant(0.0, 0.0, Spin::Infinite)]);
        let config = SimulationConfig::for_network(&single, 1.0).with_spin_offset(0.0, 0.0);
        let p = initial_state_coherent(&single, &[C64::new(1.0, 0.0)], &config).unwrap();
        assert_eq!(p.sites[0], SiteVector::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::default(), C64::default()));

        assert!(matches!(
            initial_state_coherent(&spec, &[C64::new(1.0, 0.0)], &config),
            Err(Error::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn stereographic_round_trip() {
        let z = C64::new(0.3, -0.7);
        let s = SphericalSite::from_stereographic(C64::new(1.0, 0.0), z);
        assert!((s.stereographic() - z).norm() < 1e-14);
        assert!((s.sin_theta() - 2.0 * z.norm() / (1.0 + z.norm_sqr())).abs() < 1e-14);
    }

    #[test]
    fn step_counts() {
        let spec = dimer();
        let config = SimulationConfig::for_network(&spec, 1.0).with_dt(0.1);
        assert_eq!(config.n_steps(), 10);
        let config = config.with_dt(0.3);
        assert_eq!(config.n_steps(), 4);
        let config = SimulationConfig::for_network(&spec, 1.0).with_dt(0.01).with_sample_interval(0.05);
        assert_eq!(config.record_stride(), 5);
    }
}
