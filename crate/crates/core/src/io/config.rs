use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::model::{default_dt, NetworkSpec, SimulationConfig, SiteParams, Spin, SpikePolicy};
use crate::{Error, Result, C64};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    network: RawNetwork,
    #[serde(default)]
    site: BTreeMap<String, RawSite>,
    #[serde(default)]
    hopping: BTreeMap<String, f64>,
    simulation: RawSimulation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    n_sites: usize,
    drive_ramp: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSpin {
    Number(f64),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSite {
    #[serde(default)]
    omega_c: f64,
    #[serde(default)]
    omega_s: f64,
    #[serde(default)]
    g: f64,
    #[serde(default)]
    kappa: f64,
    #[serde(default)]
    gamma: f64,
    #[serde(default)]
    nbar: f64,
    spin_s: RawSpin,
    #[serde(default)]
    drive_amplitude: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawAmplitude {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    dt: Option<f64>,
    t_final: f64,
    n_trajectories: Option<usize>,
    master_seed: Option<u64>,
    regularization_epsilon: Option<f64>,
    initial_spin_offset: Option<(f64, f64)>,
    breakdown_threshold: Option<f64>,
    divergence_radius: Option<f64>,
    spike_policy: Option<String>,
    sample_interval: Option<f64>,
    initial_photons: Option<Vec<RawAmplitude>>,
}

/// Parses a configuration file. Only syntax and shape are checked here;
/// physical constraints are left to [`crate::model::validate`].
pub fn parse_config(text: &str) -> std::result::Result<(NetworkSpec, SimulationConfig), String> {
    let raw: RawFile = toml::from_str(text).map_err(|e| e.message().to_string())?;
    let n = raw.network.n_sites;
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let site = raw
            .site
            .get(&i.to_string())
            .ok_or_else(|| format!("missing [site.{i}]"))?;
        sites.push(SiteParams {
            omega_c: site.omega_c,
            omega_s: site.omega_s,
            g: site.g,
            kappa: site.kappa,
            gamma: site.gamma,
            nbar: site.nbar,
            spin_s: parse_spin(&site.spin_s)?,
            drive_amplitude: site.drive_amplitude,
        });
    }
    if let Some(extra) = raw.site.keys().find(|k| k.parse::<usize>().map_or(true, |i| i >= n)) {
        return Err(format!("unexpected section [site.{extra}] for {n} sites"));
    }
    let mut spec = NetworkSpec::new(sites).with_drive_ramp(raw.network.drive_ramp);
    let mut bonds = Vec::new();
    for (key, &amplitude) in &raw.hopping {
        let (i, j) = key
            .split_once('-')
            .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| format!("hopping key {key:?} is not of the form \"i-j\""))?;
        bonds.push((i, j, amplitude));
    }
    for &(i, j, amplitude) in &bonds {
        spec = spec.with_directed_hopping(i, j, amplitude);
        // a single entry stands for both directions
        if !bonds.iter().any(|&(a, b, _)| a == j && b == i) {
            spec = spec.with_directed_hopping(j, i, amplitude);
        }
    }

    let sim = raw.simulation;
    let mut config = SimulationConfig::for_network(&spec, sim.t_final);
    config.dt = sim.dt.unwrap_or_else(|| default_dt(&spec));
    if let Some(n) = sim.n_trajectories {
        config.n_trajectories = n;
    }
    if let Some(seed) = sim.master_seed {
        config.master_seed = seed;
    }
    if let Some(eps) = sim.regularization_epsilon {
        config.regularization_epsilon = eps;
    }
    if let Some(offset) = sim.initial_spin_offset {
        config.initial_spin_offset = offset;
    }
    if let Some(v) = sim.breakdown_threshold {
        config.breakdown_threshold = v;
    }
    if let Some(v) = sim.divergence_radius {
        config.divergence_radius = v;
    }
    if let Some(name) = sim.spike_policy {
        config.spike_policy = SpikePolicy::parse(&name).ok_or_else(|| format!("unknown spike_policy {name:?}"))?;
    }
    config.sample_interval = sim.sample_interval;
    if let Some(photons) = sim.initial_photons {
        config.initial_photons = photons
            .iter()
            .map(|a| match *a {
                RawAmplitude::Real(re) => C64::new(re, 0.0),
                RawAmplitude::Complex([re, im]) => C64::new(re, im),
            })
            .collect();
    }
    Ok((spec, config))
}

fn parse_spin(raw: &RawSpin) -> std::result::Result<Spin, String> {
    match raw {
        RawSpin::Number(s) if s.is_infinite() && *s > 0.0 => Ok(Spin::Infinite),
        RawSpin::Number(s) => Ok(Spin::Finite(*s)),
        RawSpin::Word(w) => match w.to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" => Ok(Spin::Infinite),
            other => other
                .parse::<f64>()
                .map(Spin::Finite)
                .map_err(|_| format!("spin_s {w:?} is neither a number nor \"inf\"")),
        },
    }
}

pub fn load_config(path: &Path) -> Result<(NetworkSpec, SimulationConfig)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|message| Error::Config {
        path: path.to_path_buf(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    const DIMER: &str = r#"
[network]
n_sites = 2

[site.0]
g = 1.0
kappa = 20.0
spin_s = 1
drive_amplitude = 70.71067811865476

[site.1]
g = 1.0
kappa = 20.0
spin_s = "inf"

[hopping]
"0-1" = 1.0

[simulation]
t_final = 2.0
n_trajectories = 64
master_seed = 7
initial_photons = [[1.0, -0.5], 0.0]
spike_policy = "keep_all"
"#;

    #[test]
    fn dimer_round_trip() {
        let (spec, config) = parse_config(DIMER).unwrap();
        assert_eq!(spec.n_sites, 2);
        assert_eq!(spec.sites[0].spin_s, Spin::Finite(1.0));
        assert_eq!(spec.sites[1].spin_s, Spin::Infinite);
        assert_eq!(spec.hopping_amplitude(1, 0), Some(1.0));
        assert_eq!(config.master_seed, 7);
        assert_eq!(config.initial_photons, vec![C64::new(1.0, -0.5), C64::default()]);
        assert_eq!(config.spike_policy, SpikePolicy::KeepAll);
        assert_eq!(config.dt, default_dt(&spec));
        assert!(validate(&spec, &config).is_valid());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DIMER.replace("kappa = 20.0\nspin_s = 1", "kappa = 20.0\nkapa = 1.0\nspin_s = 1");
        let err = parse_config(&text).unwrap_err();
        assert!(err.contains("kapa"), "{err}");
        assert!(parse_config(&DIMER.replace("[hopping]", "[hoping]")).is_err());
    }

    #[test]
    fn asymmetric_hopping_reaches_validation() {
        let text = DIMER.replace("\"0-1\" = 1.0", "\"0-1\" = 1.0\n\"1-0\" = 2.0");
        let (spec, config) = parse_config(&text).unwrap();
        let report = validate(&spec, &config);
        assert!(report.contains("hopping not symmetric"), "{report}");
    }

    #[test]
    fn missing_site_and_bad_keys() {
        assert!(parse_config(&DIMER.replace("[site.1]", "[site.2]")).unwrap_err().contains("site.1"));
        assert!(parse_config(&DIMER.replace("\"0-1\"", "\"0:1\"")).is_err());
        assert!(parse_config(&DIMER.replace("spin_s = \"inf\"", "spin_s = \"big\"")).is_err());
    }
}
