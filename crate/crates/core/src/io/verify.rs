//! Self-check suite run by `spinboson verify`.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    diffusion_blocks, drift, monitor_increment, noise_factor_quantum, noise_factor_spin, noise_factor_thermal,
    relative_residual, spherical_drift,
};
use crate::model::{
    initial_state_coherent, initial_state_spherical, NetworkSpec, PhaseSpacePoint, SimulationConfig, SiteParams,
    SiteVector, SphericalPoint, Spin,
};
use crate::observables::{Observable, PhaseSample};
use crate::oracle::{verify_bosonic_identities, verify_coherent_state_identities};
use crate::sde::{integrate, integrate_classical};
use crate::C64;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && value < tolerance,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `check,value,tolerance,status` rows.
    pub fn table(&self) -> String {
        let mut out = String::from("check,value,tolerance,status\n");
        for c in &self.checks {
            out += &format!(
                "{},{:.3e},{:.1e},{}\n",
                c.name,
                c.value,
                c.tolerance,
                if c.passed { "pass" } else { "FAIL" }
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    pub n_draws: usize,
    /// Relative error injected into one entry of every quantum noise factor.
    pub perturb_quantum_factor: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 2024,
            n_draws: 1000,
            perturb_quantum_factor: 0.0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_complex(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::new(uniform(rng, -r, r), uniform(rng, -r, r))
}

fn random_site(rng: &mut ChaCha8Rng) -> SiteParams {
    let spin = if rng.random::<f64>() < 0.1 {
        Spin::Infinite
    } else {
        Spin::Finite(rng.random_range(1..=20u32) as f64 / 2.0)
    };
    SiteParams {
        omega_c: uniform(rng, -2.0, 2.0),
        omega_s: uniform(rng, -2.0, 2.0),
        g: uniform(rng, 0.0, 10.0),
        kappa: uniform(rng, 0.0, 40.0),
        gamma: uniform(rng, 0.0, 5.0),
        nbar: uniform(rng, 0.0, 5.0),
        spin_s: spin,
        drive_amplitude: uniform(rng, 0.0, 5.0),
    }
}

/// Largest residuals of `B Bᵀ = D` for the thermal, quantum and spin blocks
/// over random states and parameters.
pub fn factorization_residuals(n_draws: usize, seed: u64, perturb_quantum: f64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    let mut drawn = 0;
    while drawn < n_draws {
        let (z, w) = (random_complex(&mut rng, 1.5), random_complex(&mut rng, 1.5));
        if (C64::new(1.0, 0.0) + z * w).norm() < 0.05 {
            continue;
        }
        drawn += 1;
        let p = random_site(&mut rng);
        let d = diffusion_blocks(z, w, &p);
        let b1 = noise_factor_thermal(&p);
        let mut b2 = noise_factor_quantum(z, w, &p);
        b2.matrix[(0, 0)] *= 1.0 + perturb_quantum;
        worst[0] = worst[0].max(relative_residual(&b1.diffusion(), &d.thermal));
        worst[1] = worst[1].max(relative_residual(&b2.diffusion(), &d.quantum));
        worst[2] = worst[2].max(match noise_factor_spin(z, w, &p) {
            Ok(b3) => relative_residual(&b3.diffusion(), &d.spin),
            Err(_) => f64::INFINITY,
        });
    }
    worst
}

/// Worst-case identity errors at spins 1/2, 1 and 3/2, and for the bosonic
/// identities at Fock cutoff 40.
pub fn identity_errors() -> (f64, f64) {
    let (z, w) = (C64::new(0.3, 0.2), C64::new(0.1, -0.4));
    let spin = [0.5, 1.0, 1.5]
        .iter()
        .map(|&s| verify_coherent_state_identities(s, z, w, 1e-5).map_or(f64::INFINITY, |r| r.max_error()))
        .fold(0.0, f64::max);
    let one = C64::new(1.0, 0.0);
    (spin, verify_bosonic_identities(40, one, one, 1e-5).max_error())
}

/// Largest `|dE/dt|` of the closed-system drift relative to the size of its
/// individual terms, over random states.
pub fn closed_monitor_rate(n_draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_draws {
        let mut site = || {
            let mut p = random_site(&mut rng);
            p.kappa = 0.0;
            p.gamma = 0.0;
            p.nbar = 0.0;
            p.drive_amplitude = 0.0;
            p
        };
        let sites = vec![site(), site()];
        let spec = NetworkSpec::new(sites).with_hopping(0, 1, uniform(&mut rng, -2.0, 2.0));
        let state = PhaseSpacePoint {
            sites: (0..2)
                .map(|_| {
                    SiteVector::new(
                        random_complex(&mut rng, 3.0),
                        random_complex(&mut rng, 3.0),
                        random_complex(&mut rng, 1.0),
                        random_complex(&mut rng, 1.0),
                    )
                })
                .collect(),
        };
        let Ok(v) = drift(&state, &spec, 0.0) else {
            continue;
        };
        let de = monitor_increment(&state.sites, &v.sites, &spec, 1.0);
        let scale: f64 = state
            .sites
            .iter()
            .zip(&v.sites)
            .map(|(x, v)| {
                let d = C64::new(1.0, 0.0) + x.z * x.w;
                let s1 = 2.0 / d.norm_sqr();
                (x.beta * v.alpha).norm() + (x.alpha * v.beta).norm() + s1 * ((x.w * v.z).norm() + (x.z * v.w).norm())
            })
            .sum();
        worst = worst.max(de.norm() / scale.max(1e-300));
    }
    worst
}

/// Steady current of the linear (`g = 0`) driven dimer from a direct solve of
/// the drift's fixed point, and the closed form `16κf²J²/(κ²+4J²)²`.
pub fn linear_steady_current(kappa: f64, j: f64, f: f64) -> (f64, f64) {
    let site = SiteParams::resonant(0.0, kappa, Spin::Infinite);
    let spec = NetworkSpec::new(vec![site.clone().with_drive(f), site]).with_hopping(0, 1, j);
    let zero = C64::new(0.0, 0.0);
    let point = |a: [C64; 2]| PhaseSpacePoint {
        sites: a.iter().map(|&x| SiteVector::new(x, x.conj(), zero, zero)).collect(),
    };
    let rate = |a: [C64; 2]| {
        let d = drift(&point(a), &spec, 0.0).expect("no pole at z = 0");
        Vector2::new(d.sites[0].alpha, d.sites[1].alpha)
    };
    let b = rate([zero, zero]);
    let one = C64::new(1.0, 0.0);
    let m = Matrix2::from_columns(&[rate([one, zero]) - b, rate([zero, one]) - b]);
    let alpha = m.lu().solve(&(-b)).expect("nonsingular linear drift");
    let current = Observable::Current(0, 1)
        .evaluate(&point([alpha[0], alpha[1]]), &spec)
        .expect("current of a regular state")
        .re;
    let exact = 16.0 * kappa * f * f * j * j / (kappa * kappa + 4.0 * j * j).powi(2);
    (current, exact)
}

/// Largest mismatch between the Cartesian drift and the spherical drift
/// mapped back through `z = √((1−c)/(1+c)) e^{iφ}`.
pub fn chart_drift_mismatch(n_draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_draws {
        let mut site = || {
            let mut p = random_site(&mut rng);
            p.spin_s = Spin::Infinite;
            p.gamma = 0.0;
            p.nbar = 0.0;
            p
        };
        let sites = vec![site(), site()];
        let spec = NetworkSpec::new(sites).with_hopping(0, 1, uniform(&mut rng, -2.0, 2.0));
        let cart = PhaseSpacePoint {
            sites: (0..2)
                .map(|_| {
                    let a = random_complex(&mut rng, 3.0);
                    let z = C64::from_polar(uniform(&mut rng, 0.05, 5.0), uniform(&mut rng, -3.0, 3.0));
                    SiteVector::new(a, a.conj(), z, z.conj())
                })
                .collect(),
        };
        let sph = SphericalPoint::from_cartesian(&cart);
        let (Ok(a), Ok(b)) = (drift(&cart, &spec, 0.0), spherical_drift(&sph, &spec, 0.0)) else {
            return f64::INFINITY;
        };
        for ((x, u), (site, v)) in cart.sites.iter().zip(&a.sites).zip(sph.sites.iter().zip(&b)) {
            let dz = x.z * C64::new(-v.c / ((1.0 - site.c) * (1.0 + site.c)), v.phi);
            worst = worst
                .max((u.alpha - v.alpha).norm() / (1.0 + u.alpha.norm()))
                .max((u.z - dz).norm() / (1.0 + u.z.norm()));
        }
    }
    worst
}

/// Largest deviation between noise-free Cartesian and spherical trajectories
/// of a damped dimer (photons, `S_z/s` and transverse spin) over `[0, t_final]`.
pub fn trajectory_mismatch(t_final: f64, dt: f64) -> f64 {
    let spec = NetworkSpec::dimer(SiteParams::resonant(1.0, 1.0, Spin::Infinite), 1.0);
    let config = SimulationConfig::for_network(&spec, t_final)
        .with_dt(dt)
        .with_sample_interval(t_final / 100.0);
    let photons = [C64::new(1.0, 0.0), C64::default()];
    let (Ok(x0), Ok(s0)) = (
        initial_state_coherent(&spec, &photons, &config),
        initial_state_spherical(&spec, &photons, &config),
    ) else {
        return f64::INFINITY;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cart = integrate(&x0, &spec, &config, &mut rng);
    let Ok(sph) = integrate_classical(&s0, &spec, &config, &mut rng) else {
        return f64::INFINITY;
    };
    if cart.states.len() != sph.states.len() {
        return f64::INFINITY;
    }
    sample_mismatch(&cart.states, &sph.states)
}

/// Max deviation of `α`, `S_z/s`, `S_x/s` and `S_y/s` between paired samples.
pub fn sample_mismatch<A: PhaseSample, B: PhaseSample>(a: &[A], b: &[B]) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        for i in 0..x.n_sites() {
            let (Ok(zx), Ok(zy), Ok(px), Ok(py)) =
                (x.spin_z_unit(i), y.spin_z_unit(i), x.spin_xy_unit(i), y.spin_xy_unit(i))
            else {
                return f64::INFINITY;
            };
            worst = worst
                .max((x.alpha(i) - y.alpha(i)).norm())
                .max((zx - zy).norm())
                .max((px.0 - py.0).norm())
                .max((px.1 - py.1).norm());
        }
    }
    worst
}

pub fn run_verify(options: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    let [b1, b2, b3] = factorization_residuals(options.n_draws, options.seed, options.perturb_quantum_factor);
    report.checks.push(CheckResult::below("factorization_thermal", b1, 1e-12));
    report.checks.push(CheckResult::below("factorization_quantum", b2, 1e-12));
    report.checks.push(CheckResult::below("factorization_spin", b3, 1e-10));
    let (spin, boson) = identity_errors();
    report.checks.push(CheckResult::below("identities_spin", spin, 1e-7));
    report.checks.push(CheckResult::below("identities_boson", boson, 1e-6));
    report.checks.push(CheckResult::below(
        "closed_monitor_rate",
        closed_monitor_rate(options.n_draws, options.seed + 1),
        1e-12,
    ));
    let (current, exact) = linear_steady_current(20.0, 1.0, 100.0 / 2f64.sqrt());
    report
        .checks
        .push(CheckResult::below("linear_steady_current", ((current - exact) / exact).abs(), 1e-8));
    report.checks.push(CheckResult::below(
        "chart_drift_mismatch",
        chart_drift_mismatch(options.n_draws, options.seed + 2),
        1e-10,
    ));
    report
        .checks
        .push(CheckResult::below("chart_trajectory_mismatch", trajectory_mismatch(1.0, 2.5e-7), 1e-6));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_factors_pass() {
        let r = factorization_residuals(200, 5, 0.0);
        assert!(r[0] < 1e-12 && r[1] < 1e-12 && r[2] < 1e-10, "{r:?}");
    }

    #[test]
    fn perturbed_quantum_factor_fails() {
        let r = factorization_residuals(50, 5, 1e-6);
        assert!(r[1] > 1e-12, "{r:?}");
    }

    #[test]
    fn linear_current_closed_form() {
        let (current, exact) = linear_steady_current(20.0, 1.0, 100.0 / 2f64.sqrt());
        assert!((exact - 9.80296).abs() < 1e-5);
        assert!(((current - exact) / exact).abs() < 1e-10, "{current} {exact}");
    }

    #[test]
    fn drift_charts_agree() {
        let m = chart_drift_mismatch(200, 9);
        assert!(m < 1e-10, "{m}");
        assert!(closed_monitor_rate(200, 9) < 1e-12);
    }

    #[test]
    fn table_format() {
        let report = VerifyReport {
            checks: vec![CheckResult::below("a", 1.0, 2.0), CheckResult::below("b", f64::NAN, 2.0)],
        };
        assert!(!report.all_passed());
        let t = report.table();
        assert!(t.starts_with("check,value,tolerance,status\na,1.000e0,2.0e0,pass\nb,NaN"), "{t}");
    }
}
