use crate::model::{NetworkSpec, SiteParams, SphericalPoint};
use crate::{Error, Result, C64, I, POLE_TOLERANCE};

/// Deterministic rates `(dα/dt, dφ/dt, dc/dt)` of one site.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SphericalTangent {
    pub alpha: C64,
    pub phi: f64,
    pub c: f64,
}

/// Drift of the classical spin-boson equations in spherical coordinates.
///
/// Thermal noise on `α` is added by the integrator. At the poles the
/// azimuthal rate is singular whenever the spin couples to a nonzero field;
/// that case is reported as a pole.
pub fn spherical_drift(state: &SphericalPoint, spec: &NetworkSpec, t: f64) -> Result<Vec<SphericalTangent>> {
    let mut out: Vec<SphericalTangent> = state
        .sites
        .iter()
        .zip(&spec.sites)
        .enumerate()
        .map(|(i, (x, p))| {
            let sin = x.sin_theta();
            let rot = C64::from_polar(1.0, x.phi);
            let field = x.alpha * rot.conj();
            let phi = if sin > POLE_TOLERANCE {
                p.omega_s + p.g * x.c / sin * 2.0 * field.re
            } else if p.g * x.alpha.norm() > 0.0 {
                return Err(Error::Pole { site: i, modulus: sin });
            } else {
                p.omega_s
            };
            Ok(SphericalTangent {
                alpha: photon_rate(x.alpha, p, spec.drive(i, t)) + I * p.g * sin * rot,
                phi,
                c: 2.0 * p.g * sin * field.im,
            })
        })
        .collect::<Result<_>>()?;
    for h in &spec.hopping {
        out[h.from].alpha -= I * h.amplitude * state.sites[h.to].alpha;
    }
    Ok(out)
}

fn photon_rate(alpha: C64, p: &SiteParams, f: f64) -> C64 {
    (I * p.omega_c - 0.5 * p.kappa) * alpha + I * f
}

/// `dz/dt` of the stereographic label with `w = z*`.
pub(crate) fn stereographic_rate(alpha: C64, z: C64, p: &SiteParams) -> C64 {
    I * p.g * (alpha - alpha.conj() * z * z) + I * p.omega_s * z
}

/// `du/dt` for the inverted label `u = 1/z`, regular at the upper pole.
pub(crate) fn inverted_rate(alpha: C64, u: C64, p: &SiteParams) -> C64 {
    -I * p.g * alpha * u * u + I * p.g * alpha.conj() - I * p.omega_s * u
}
