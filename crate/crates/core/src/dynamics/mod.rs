//! Drift, diffusion and noise of the positive-P equations, plus the
//! spherical classical limit.
//!
//! Per site the Itô equations read `dx = (A(x) − R(x)) dt + dξ`, with `A`
//! the drift, `R` the regularizing restoring force on the spin labels and
//! `dξ = B⁽¹⁾dW¹ + B⁽²⁾dW² + B⁽³⁾dW³` built from three independent real
//! Wiener processes.

mod noise;
pub(crate) mod spherical;

pub use noise::{
    diffusion_blocks, noise_factor_quantum, noise_factor_spin, noise_factor_thermal, sample_noise,
    relative_residual, sample_noise_into, DiffusionBlocks, Mat4, NoiseFactor, NoiseTag,
};
pub use spherical::{spherical_drift, SphericalTangent};

use crate::model::{NetworkSpec, PhaseSpacePoint, SiteVector};
use crate::{Error, Result, C64, I, POLE_TOLERANCE};

/// Per-site `(A₁, A₂, A₃, A₄)`, the drift for `(α, β, z, w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftVector {
    pub sites: Vec<SiteVector>,
}

/// Drift of the positive-P equations at time `t`.
pub fn drift(state: &PhaseSpacePoint, spec: &NetworkSpec, t: f64) -> Result<DriftVector> {
    let mut out = vec![SiteVector::default(); state.sites.len()];
    drift_into(&state.sites, spec, t, &mut out)?;
    Ok(DriftVector { sites: out })
}

/// Allocation-free form of [`drift`]; `out` must have one entry per site.
pub fn drift_into(state: &[SiteVector], spec: &NetworkSpec, t: f64, out: &mut [SiteVector]) -> Result<()> {
    for (i, ((x, p), o)) in state.iter().zip(&spec.sites).zip(out.iter_mut()).enumerate() {
        let denom = C64::new(1.0, 0.0) + x.w * x.z;
        let modulus = denom.norm();
        if modulus <= POLE_TOLERANCE {
            return Err(Error::Pole { site: i, modulus });
        }
        let f = spec.drive(i, t);
        let half_kappa = 0.5 * p.kappa;
        let spin_damp = p.gamma * (1.0 - 0.5 * p.nbar);
        let twog = 2.0 * p.g / denom;
        o.alpha = I * (p.omega_c * x.alpha + f + twog * x.z) - half_kappa * x.alpha;
        o.beta = -I * (p.omega_c * x.beta + f + twog * x.w) - half_kappa * x.beta;
        o.z = I * p.g * (x.alpha - x.beta * x.z * x.z) + I * p.omega_s * x.z - spin_damp * x.z;
        o.w = -I * p.g * (x.beta - x.alpha * x.w * x.w) - I * p.omega_s * x.w - spin_damp * x.w;
    }
    for h in &spec.hopping {
        let (a, b) = (state[h.to].alpha, state[h.to].beta);
        out[h.from].alpha -= I * h.amplitude * a;
        out[h.from].beta += I * h.amplitude * b;
    }
    Ok(())
}

/// `r(x) = (e^{ε|x|²} − 1)·x/|x|`, with `r(0) = 0`.
pub fn restoring(x: C64, epsilon: f64) -> C64 {
    let r = x.norm();
    if r == 0.0 || epsilon == 0.0 {
        return C64::new(0.0, 0.0);
    }
    x * ((epsilon * r * r).exp_m1() / r)
}

/// Per-site `(0, 0, r(z), r(w))`; subtract it from the drift.
pub fn regularization_force(state: &PhaseSpacePoint, epsilon: f64) -> Vec<SiteVector> {
    let zero = C64::new(0.0, 0.0);
    state
        .sites
        .iter()
        .map(|s| SiteVector::new(zero, zero, restoring(s.z, epsilon), restoring(s.w, epsilon)))
        .collect()
}

/// `σ(p) = −(1 − p)/(1 + p)` with `p = zw`: the normalized `S_z` label.
pub(crate) fn sigma(p: C64) -> C64 {
    -(C64::new(1.0, 0.0) - p) / (C64::new(1.0, 0.0) + p)
}

/// The excitation monitor `E = Σ_i (α_i β_i + σ(z_i w_i))`.
///
/// Conserved by the closed-system drift and decreasing as `−κ Σ αβ` with
/// cavity loss alone.
pub fn conserved_monitor(state: &[SiteVector]) -> Result<C64> {
    let mut e = C64::new(0.0, 0.0);
    for (i, s) in state.iter().enumerate() {
        let p = s.z * s.w;
        let modulus = (C64::new(1.0, 0.0) + p).norm();
        if modulus <= POLE_TOLERANCE {
            return Err(Error::Pole { site: i, modulus });
        }
        e += s.alpha * s.beta + sigma(p);
    }
    Ok(e)
}

/// Expected increment of [`conserved_monitor`] over one Itô step: the
/// first-order change along `tangent` plus the second-order diffusion
/// terms, which survive averaging.
pub fn monitor_increment(state: &[SiteVector], tangent: &[SiteVector], spec: &NetworkSpec, dt: f64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let mut de = C64::new(0.0, 0.0);
    for ((x, v), p) in state.iter().zip(tangent).zip(&spec.sites) {
        let q = x.z * x.w;
        let d = one + q;
        let s1 = 2.0 / (d * d);
        let s2 = -4.0 / (d * d * d);
        de += x.beta * v.alpha + x.alpha * v.beta + s1 * (x.w * v.z + x.z * v.w);
        let mut ito = C64::new(p.kappa * p.nbar, 0.0);
        if p.gamma > 0.0 {
            let scale = p.gamma * (2.0 * p.nbar + 1.0);
            let dzz = scale * x.z * x.z;
            let dww = scale * x.w * x.w;
            let dzw = p.gamma * (p.nbar + (p.nbar + 1.0) * q * q);
            ito += 0.5 * s2 * (x.w * x.w * dzz + x.z * x.z * dww) + (s2 * q + s1) * dzw;
        }
        de += ito;
    }
    de * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SiteParams, Spin};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single(p: SiteParams) -> NetworkSpec {
        NetworkSpec::new(vec![p])
    }

    fn point(sites: Vec<SiteVector>) -> PhaseSpacePoint {
        PhaseSpacePoint { sites }
    }

    #[test]
    fn vacuum_is_fixed() {
        let spec = NetworkSpec::dimer(SiteParams::resonant(2.0, 3.0, Spin::Finite(1.0)), 1.0);
        let d = drift(&PhaseSpacePoint::vacuum(2), &spec, 0.0).unwrap();
        assert!(d.sites.iter().all(|s| s.max_norm() == 0.0));
    }

    #[test]
    fn pure_decay() {
        let spec = single(SiteParams::resonant(0.0, 2.0, Spin::Infinite));
        let d = drift(&point(vec![SiteVector::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))]), &spec, 0.0).unwrap();
        assert_eq!(d.sites[0], SiteVector::new(c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn coupling_rotates_spin() {
        let spec = single(SiteParams::resonant(1.0, 0.0, Spin::Infinite));
        let d = drift(&point(vec![SiteVector::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))]), &spec, 0.0).unwrap();
        assert_eq!(d.sites[0], SiteVector::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)));
    }

    #[test]
    fn linear_steady_state_is_fixed() {
        let (j, kappa, f) = (1.0, 20.0, 100.0 / 2f64.sqrt());
        let site = SiteParams::resonant(0.0, kappa, Spin::Infinite);
        let spec = NetworkSpec::new(vec![site.clone().with_drive(f), site]).with_hopping(0, 1, j);
        let den = kappa * kappa + 4.0 * j * j;
        let a1 = c(0.0, 2.0 * kappa * f / den);
        let a2 = c(4.0 * j * f / den, 0.0);
        assert!((a1.im - 7.0010).abs() < 1e-4 && (a2.re - 0.70011).abs() < 1e-5);
        let zero = c(0.0, 0.0);
        let x = point(vec![SiteVector::new(a1, a1.conj(), zero, zero), SiteVector::new(a2, a2.conj(), zero, zero)]);
        let d = drift(&x, &spec, 0.0).unwrap();
        assert!(d.sites.iter().all(|s| s.max_norm() < 1e-12), "{d:?}");
    }

    #[test]
    fn pole_is_reported() {
        let spec = single(SiteParams::resonant(1.0, 0.0, Spin::Finite(1.0)));
        let x = point(vec![SiteVector::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0))]);
        assert!(matches!(drift(&x, &spec, 0.0), Err(Error::Pole { site: 0, .. })));
    }

    #[test]
    fn restoring_force_values() {
        assert_eq!(restoring(c(0.0, 0.0), 1e-8), c(0.0, 0.0));
        let r = restoring(c(0.0, 1e3), 1e-8);
        assert!((r.norm() - 0.01f64.exp_m1()).abs() < 1e-15);
        assert!((r.arg() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((restoring(c(1.0, 0.0), 1e-8).norm() - 1e-8).abs() < 1e-16);
    }

    #[test]
    fn monitor_rate_matches_drift() {
        // closed system: the drift leaves E stationary
        let mut site = SiteParams::resonant(1.3, 0.0, Spin::Infinite);
        site.omega_c = 0.4;
        site.omega_s = -0.2;
        let spec = NetworkSpec::dimer(site, 0.7);
        let x = vec![
            SiteVector::new(c(1.0, 0.5), c(0.3, -0.2), c(0.2, 0.1), c(-0.4, 0.3)),
            SiteVector::new(c(-0.7, 0.1), c(0.5, 0.5), c(0.6, -0.1), c(0.1, 0.2)),
        ];
        let mut a = vec![SiteVector::default(); 2];
        drift_into(&x, &spec, 0.0, &mut a).unwrap();
        assert!(monitor_increment(&x, &a, &spec, 1.0).norm() < 1e-13);

        // cavity loss only: dE/dt = −κ Σ αβ
        let mut lossy = spec.clone();
        lossy.sites.iter_mut().for_each(|s| s.kappa = 3.0);
        drift_into(&x, &lossy, 0.0, &mut a).unwrap();
        let expected: C64 = x.iter().map(|s| -3.0 * s.alpha * s.beta).sum();
        assert!((monitor_increment(&x, &a, &lossy, 1.0) - expected).norm() < 1e-13);
    }
}
