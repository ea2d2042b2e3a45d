//! Finite-difference checks of the coherent-state operator identities.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::{Error, Result, C64};

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn max_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_error).fold(0.0, f64::max)
    }
}

fn spin_raising(twice: usize) -> DMatrix<C64> {
    let s = twice as f64 / 2.0;
    let mut sp = DMatrix::zeros(twice + 1, twice + 1);
    for k in 0..twice {
        let m = k as f64 - s;
        sp[(k + 1, k)] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    sp
}

fn spin_z(twice: usize) -> DMatrix<C64> {
    let s = twice as f64 / 2.0;
    DMatrix::from_fn(twice + 1, twice + 1, |r, c| {
        if r == c {
            C64::new(r as f64 - s, 0.0)
        } else {
            C64::default()
        }
    })
}

/// `e^{x S+}|s, −s⟩` summed exactly.
fn raised(sp: &DMatrix<C64>, x: C64) -> DMatrix<C64> {
    let n = sp.nrows();
    let mut term = DMatrix::<C64>::zeros(n, 1);
    term[(0, 0)] = C64::new(1.0, 0.0);
    let mut sum = term.clone();
    for k in 1..n {
        term = sp * term * (x / k as f64);
        sum += &term;
    }
    sum
}

/// Projector `Λ(z, w)` for spin `s = twice/2`.
pub fn spin_projector(twice: usize, z: C64, w: C64) -> DMatrix<C64> {
    let sp = spin_raising(twice);
    let norm = (C64::new(1.0, 0.0) + w * z).powi(twice as i32);
    raised(&sp, z) * raised(&sp, w).transpose() / norm
}

/// Bosonic projector `Λ(α, β)` truncated at `cutoff` photons.
pub fn bosonic_projector(cutoff: usize, alpha: C64, beta: C64) -> DMatrix<C64> {
    let coherent = |x: C64| {
        let mut v = DMatrix::<C64>::zeros(cutoff + 1, 1);
        v[(0, 0)] = C64::new(1.0, 0.0);
        for n in 1..=cutoff {
            v[(n, 0)] = v[(n - 1, 0)] * x / (n as f64).sqrt();
        }
        v
    };
    coherent(alpha) * coherent(beta).transpose() * (-alpha * beta).exp()
}

fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Checks the six spin identities for `Λ(z, w)` with central differences of
/// step `delta` in `z` and `w`. `s` must be a positive multiple of 1/2, at most 5.
pub fn verify_coherent_state_identities(s: f64, z: C64, w: C64, delta: f64) -> Result<IdentityReport> {
    let twice = (2.0 * s).round();
    if !(1.0..=10.0).contains(&twice) || (2.0 * s - twice).abs() > 1e-12 {
        return Err(Error::Unsupported(format!("spin {s} outside the supported range")));
    }
    let twice = twice as usize;
    let pole = (C64::new(1.0, 0.0) + w * z).norm();
    if pole <= 1e-10 {
        return Err(Error::Pole { site: 0, modulus: pole });
    }
    let one = C64::new(1.0, 0.0);
    let d = C64::new(delta, 0.0);
    let lam = spin_projector(twice, z, w);
    let dz = (spin_projector(twice, z + d, w) - spin_projector(twice, z - d, w)) / C64::new(2.0 * delta, 0.0);
    let dw = (spin_projector(twice, z, w + d) - spin_projector(twice, z, w - d)) / C64::new(2.0 * delta, 0.0);
    let sp = spin_raising(twice);
    let sm = sp.transpose();
    let sz = spin_z(twice);
    let den = one + w * z;
    let ss = C64::new(s, 0.0);
    let two_s = C64::new(2.0 * s, 0.0);
    let diag = ss * (one - w * z) / den;
    let cases: [(&str, DMatrix<C64>, DMatrix<C64>); 6] = [
        ("S+ L", &sp * &lam, &dz + &lam * (two_s * w / den)),
        ("L S+", &lam * &sp, &dw * (-w * w) + &lam * (two_s * w / den)),
        ("S- L", &sm * &lam, &dz * (-z * z) + &lam * (two_s * z / den)),
        ("L S-", &lam * &sm, &dw + &lam * (two_s * z / den)),
        ("Sz L", &sz * &lam, &dz * z - &lam * diag),
        ("L Sz", &lam * &sz, &dw * w - &lam * diag),
    ];
    Ok(IdentityReport {
        checks: cases
            .into_iter()
            .map(|(name, lhs, rhs)| IdentityCheck {
                name: format!("spin {s}: {name}"),
                max_error: max_entry(&(lhs - rhs)),
            })
            .collect(),
    })
}

/// The four bosonic identities at a finite Fock cutoff.
pub fn verify_bosonic_identities(cutoff: usize, alpha: C64, beta: C64, delta: f64) -> IdentityReport {
    let d = C64::new(delta, 0.0);
    let lam = bosonic_projector(cutoff, alpha, beta);
    let da = (bosonic_projector(cutoff, alpha + d, beta) - bosonic_projector(cutoff, alpha - d, beta)) / C64::new(2.0 * delta, 0.0);
    let db = (bosonic_projector(cutoff, alpha, beta + d) - bosonic_projector(cutoff, alpha, beta - d)) / C64::new(2.0 * delta, 0.0);
    let mut a = DMatrix::<C64>::zeros(cutoff + 1, cutoff + 1);
    for n in 1..=cutoff {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = a.transpose();
    // the last row/column feel the truncation directly
    let inner = |m: DMatrix<C64>| m.view((0, 0), (cutoff, cutoff)).into_owned();
    let cases: [(&str, DMatrix<C64>, DMatrix<C64>); 4] = [
        ("a L", &a * &lam, &lam * alpha),
        ("L a", &lam * &a, &db + &lam * alpha),
        ("a+ L", &a_dag * &lam, &da + &lam * beta),
        ("L a+", &lam * &a_dag, &lam * beta),
    ];
    IdentityReport {
        checks: cases
            .into_iter()
            .map(|(name, lhs, rhs)| IdentityCheck {
                name: format!("boson cutoff {cutoff}: {name}"),
                max_error: max_entry(&inner(lhs - rhs)),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_half_identities() {
        let r = verify_coherent_state_identities(0.5, C64::new(0.3, 0.0), C64::new(0.1, 0.0), 1e-5).unwrap();
        assert_eq!(r.checks.len(), 6);
        assert!(r.max_error() < 1e-8, "{r:?}");
    }

    #[test]
    fn complex_arguments_and_larger_spins() {
        for s in [1.0, 1.5, 2.5, 5.0] {
            let r = verify_coherent_state_identities(s, C64::new(0.2, -0.4), C64::new(-0.3, 0.25), 1e-5).unwrap();
            assert!(r.max_error() < 1e-7, "s={s}: {r:?}");
        }
    }

    #[test]
    fn lowest_weight_state() {
        let lam = spin_projector(2, C64::default(), C64::default());
        let sm = spin_raising(2).transpose();
        assert_eq!(max_entry(&(sm * lam)), 0.0);
    }

    #[test]
    fn pole_and_range_errors() {
        let z = C64::new(0.0, 1.0);
        assert!(matches!(
            verify_coherent_state_identities(1.0, z, z, 1e-5),
            Err(Error::Pole { .. })
        ));
        assert!(verify_coherent_state_identities(0.3, z, C64::default(), 1e-5).is_err());
        assert!(verify_coherent_state_identities(6.0, z, C64::default(), 1e-5).is_err());
    }

    #[test]
    fn bosonic_identities() {
        let one = C64::new(1.0, 0.0);
        let r = verify_bosonic_identities(40, one, one, 1e-5);
        assert!(r.max_error() < 1e-6, "{r:?}");
    }
}
