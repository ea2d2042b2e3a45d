use crate::model::NetworkSpec;
use crate::observables::Observable;
use crate::oracle::basis::{HilbertBasis, SiteLabel};
use crate::oracle::sparse::CsrMatrix;
use crate::{Error, Result, C64, I};

/// Ladder operators of one site, embedded in the full space.
#[derive(Clone, Debug)]
pub struct SiteOperators {
    pub a: CsrMatrix,
    pub a_dag: CsrMatrix,
    pub s_plus: CsrMatrix,
    pub s_minus: CsrMatrix,
    pub s_z: CsrMatrix,
    pub number: CsrMatrix,
}

fn site_operators(basis: &HilbertBasis, site: usize) -> SiteOperators {
    let dim = basis.dimension();
    let twice = basis.spin_twice[site];
    let s = twice as f64 / 2.0;
    let mut a = Vec::new();
    let mut sp = Vec::new();
    let mut sz = Vec::new();
    for idx in 0..dim {
        let l = basis.labels(idx)[site];
        if l.n > 0 {
            let to = basis.with_site(idx, site, SiteLabel { n: l.n - 1, m: l.m });
            a.push((to, idx, C64::new((l.n as f64).sqrt(), 0.0)));
        }
        let m = l.m as f64 - s;
        if l.m < twice {
            let to = basis.with_site(idx, site, SiteLabel { n: l.n, m: l.m + 1 });
            sp.push((to, idx, C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0)));
        }
        sz.push((idx, idx, C64::new(m, 0.0)));
    }
    let a = CsrMatrix::from_triplets(dim, a);
    let s_plus = CsrMatrix::from_triplets(dim, sp);
    let a_dag = a.adjoint();
    SiteOperators {
        number: a_dag.matmul(&a),
        s_minus: s_plus.adjoint(),
        s_z: CsrMatrix::from_triplets(dim, sz),
        a,
        a_dag,
        s_plus,
    }
}

/// Truncated-Fock model of a network in unscaled variables.
///
/// Built from the same rescaled parameters as the phase-space engine, with
/// `f = f̃ √s` and `n̄ = ñ s`. The dynamics are the complex conjugate of
/// the phase-space drift; [`OracleSystem::observable_operator`] maps each
/// [`Observable`] so that its expectation is directly comparable with the
/// ensemble mean.
#[derive(Clone, Debug)]
pub struct OracleSystem {
    pub spec: NetworkSpec,
    pub basis: HilbertBasis,
    pub hamiltonian: CsrMatrix,
    pub jumps: Vec<CsrMatrix>,
    /// `H − (i/2) Σ L†L`.
    pub h_eff: CsrMatrix,
    pub sites: Vec<SiteOperators>,
}

fn spin_value(spec: &NetworkSpec, site: usize) -> Result<f64> {
    spec.sites[site]
        .spin_s
        .value()
        .ok_or_else(|| Error::Unsupported(format!("site {site}: the exact oracle needs a finite spin")))
}

fn hamiltonian_from(spec: &NetworkSpec, basis: &HilbertBasis, ops: &[SiteOperators]) -> Result<CsrMatrix> {
    if spec.drive_ramp.is_some() {
        return Err(Error::Unsupported("the exact oracle needs constant drives".into()));
    }
    let dim = basis.dimension();
    let mut h = CsrMatrix::from_triplets(dim, Vec::new());
    for (i, (p, o)) in spec.sites.iter().zip(ops).enumerate() {
        let s = spin_value(spec, i)?;
        let coupling = o.a_dag.matmul(&o.s_minus).add(&o.a.matmul(&o.s_plus));
        let drive = o.a.add(&o.a_dag);
        h = h
            .add(&o.number.scale(C64::new(p.omega_c, 0.0)))
            .add(&o.s_z.scale(C64::new(p.omega_s, 0.0)))
            .add(&coupling.scale(C64::new(p.g / s.sqrt(), 0.0)))
            .add(&drive.scale(C64::new(p.drive_amplitude * s.sqrt(), 0.0)));
    }
    for hop in &spec.hopping {
        let term = ops[hop.from].a_dag.matmul(&ops[hop.to].a);
        h = h.add(&term.scale(C64::new(-hop.amplitude, 0.0)));
    }
    Ok(h)
}

/// Hamiltonian of the network in the truncated basis.
pub fn build_hamiltonian(spec: &NetworkSpec, basis: &HilbertBasis) -> Result<CsrMatrix> {
    let ops: Vec<SiteOperators> = (0..basis.n_sites()).map(|i| site_operators(basis, i)).collect();
    let h = hamiltonian_from(spec, basis, &ops)?;
    let err = h.hermiticity_error();
    if err > 1e-12 {
        return Err(Error::Unsupported(format!("Hamiltonian is not Hermitian (error {err:e})")));
    }
    Ok(h)
}

impl OracleSystem {
    pub fn new(spec: &NetworkSpec, fock_cutoff: usize, dimension_limit: usize) -> Result<Self> {
        let basis = HilbertBasis::for_network(spec, fock_cutoff, dimension_limit)?;
        let sites: Vec<SiteOperators> = (0..basis.n_sites()).map(|i| site_operators(&basis, i)).collect();
        let hamiltonian = hamiltonian_from(spec, &basis, &sites)?;
        let err = hamiltonian.hermiticity_error();
        if err > 1e-12 {
            return Err(Error::Unsupported(format!("Hamiltonian is not Hermitian (error {err:e})")));
        }
        let mut jumps = Vec::new();
        for (i, (p, o)) in spec.sites.iter().zip(&sites).enumerate() {
            let nbar = p.nbar * spin_value(spec, i)?;
            let rates = [
                (p.kappa * (nbar + 1.0), &o.a),
                (p.kappa * nbar, &o.a_dag),
                (p.gamma * (nbar + 1.0), &o.s_minus),
                (p.gamma * nbar, &o.s_plus),
            ];
            for (rate, op) in rates {
                if rate > 0.0 {
                    jumps.push(op.scale(C64::new(rate.sqrt(), 0.0)));
                }
            }
        }
        let mut h_eff = hamiltonian.clone();
        for l in &jumps {
            h_eff = h_eff.add(&l.adjoint().matmul(l).scale(C64::new(0.0, -0.5)));
        }
        Ok(OracleSystem {
            spec: spec.clone(),
            basis,
            hamiltonian,
            jumps,
            h_eff,
            sites,
        })
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    /// Operator whose expectation matches the phase-space observable.
    pub fn observable_operator(&self, observable: &Observable) -> Result<CsrMatrix> {
        let s = |i: usize| spin_value(&self.spec, i);
        let op = |i: usize| &self.sites[i];
        let real = |k: f64| C64::new(k, 0.0);
        // phase-space operator first; its transpose has the same
        // expectation in the conjugated physical state
        let image = match *observable {
            Observable::PhotonNumber(i) => op(i).number.scale(real(1.0 / s(i)?)),
            Observable::Alpha(i) => op(i).a.scale(real(1.0 / s(i)?.sqrt())),
            Observable::Beta(i) => op(i).a_dag.scale(real(1.0 / s(i)?.sqrt())),
            Observable::SpinZ(i) => op(i).s_z.clone(),
            Observable::SpinX(i) => op(i).s_plus.add(&op(i).s_minus).scale(real(0.5)),
            // the sampled S_y carries the sign of the conjugated state
            Observable::SpinY(i) => op(i).s_plus.add(&op(i).s_minus.scale(real(-1.0))).scale(C64::new(0.0, 0.5)),
            Observable::QuadratureI(i) => op(i).a.add(&op(i).a_dag).scale(real(0.5 / s(i)?.sqrt())),
            Observable::QuadratureQ(i) => {
                op(i).a_dag.add(&op(i).a.scale(real(-1.0))).scale(I * (0.5 / s(i)?.sqrt()))
            }
            Observable::Current(i, j) => {
                let hop = self.spec.hopping_amplitude(i, j).unwrap_or(0.0);
                let forward = op(i).a_dag.matmul(&op(j).a);
                let backward = op(j).a_dag.matmul(&op(i).a);
                forward
                    .add(&backward.scale(real(-1.0)))
                    .scale(I * hop / (s(i)? * s(j)?).sqrt())
            }
        };
        Ok(image.adjoint().conj())
    }

    /// Product of truncated coherent photon states and spin coherent states,
    /// given in phase-space labels (rescaled `α`, stereographic `z`).
    pub fn coherent_ket(&self, photons: &[C64], spin_labels: &[C64]) -> Result<Vec<C64>> {
        if photons.len() != self.basis.n_sites() || spin_labels.len() != self.basis.n_sites() {
            return Err(Error::LengthMismatch {
                expected: self.basis.n_sites(),
                got: photons.len().min(spin_labels.len()),
            });
        }
        let mut factors = Vec::with_capacity(photons.len());
        for i in 0..photons.len() {
            let s = spin_value(&self.spec, i)?;
            let alpha = (photons[i] * s.sqrt()).conj();
            let z = spin_labels[i].conj();
            let cut = self.basis.fock_cutoffs[i];
            let twice = self.basis.spin_twice[i];
            let mut photon = vec![C64::new(1.0, 0.0)];
            for n in 1..=cut {
                let prev = photon[n - 1];
                photon.push(prev * alpha / (n as f64).sqrt());
            }
            let mut spin = Vec::with_capacity(twice + 1);
            let mut binom = 1.0f64;
            let mut zk = C64::new(1.0, 0.0);
            for k in 0..=twice {
                spin.push(zk * binom.sqrt());
                binom *= (twice - k) as f64 / (k + 1) as f64;
                zk *= z;
            }
            factors.push((normalize(photon), normalize(spin)));
        }
        let psi = (0..self.dimension())
            .map(|idx| {
                self.basis
                    .labels(idx)
                    .iter()
                    .zip(&factors)
                    .map(|(l, (ph, sp))| ph[l.n] * sp[l.m])
                    .product()
            })
            .collect();
        Ok(psi)
    }
}

fn normalize(mut v: Vec<C64>) -> Vec<C64> {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= norm);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SiteParams, Spin};
    use nalgebra::DMatrix;

    #[test]
    fn uncoupled_site_is_diagonal() {
        let mut p = SiteParams::resonant(0.0, 0.0, Spin::Finite(1.0));
        p.omega_c = 1.3;
        p.omega_s = 0.4;
        let spec = NetworkSpec::new(vec![p]);
        let basis = HilbertBasis::for_network(&spec, 3, 4096).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        for (r, c, v) in h.triplets() {
            assert_eq!(r, c);
            let l = basis.labels(r)[0];
            assert!((v.re - (1.3 * l.n as f64 + 0.4 * (l.m as f64 - 1.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn vacuum_rabi_splitting() {
        let g = 0.7;
        let spec = NetworkSpec::new(vec![SiteParams::resonant(g, 0.0, Spin::Finite(0.5))]);
        let basis = HilbertBasis::for_network(&spec, 2, 4096).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap().to_dense();
        // single-excitation block {|1,↓⟩, |0,↑⟩}
        let e1 = basis.index(&[SiteLabel { n: 1, m: 0 }]);
        let e2 = basis.index(&[SiteLabel { n: 0, m: 1 }]);
        assert!((h[(e1, e2)].re - g * 2f64.sqrt()).abs() < 1e-12);
        assert!((h[(e2, e1)] - h[(e1, e2)].conj()).norm() < 1e-15);
    }

    #[test]
    fn hopping_dimer_one_photon_sector() {
        let spec = NetworkSpec::dimer(SiteParams::resonant(0.0, 0.0, Spin::Finite(0.5)), 1.0);
        let basis = HilbertBasis::for_network(&spec, 1, 4096).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap().to_dense();
        let down = |n: usize| SiteLabel { n, m: 0 };
        let i10 = basis.index(&[down(1), down(0)]);
        let i01 = basis.index(&[down(0), down(1)]);
        let block = DMatrix::from_row_slice(2, 2, &[h[(i10, i10)], h[(i10, i01)], h[(i01, i10)], h[(i01, i01)]]);
        let mut ev: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_limit_error() {
        let spec = NetworkSpec::dimer(SiteParams::resonant(0.0, 0.0, Spin::Finite(2.0)), 1.0);
        assert!(matches!(OracleSystem::new(&spec, 30, 4096), Err(Error::DimensionLimit { .. })));
    }

    #[test]
    fn coherent_ket_is_normalized_and_maps_labels() {
        let spec = NetworkSpec::new(vec![SiteParams::resonant(0.0, 1.0, Spin::Finite(1.0))]);
        let sys = OracleSystem::new(&spec, 25, 4096).unwrap();
        let psi = sys.coherent_ket(&[C64::new(0.5, 1.0)], &[C64::new(0.2, 0.1)]).unwrap();
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let alpha = sys.observable_operator(&Observable::Alpha(0)).unwrap().expectation(&psi);
        assert!((alpha - C64::new(0.5, 1.0)).norm() < 1e-10, "{alpha}");
        let sz = sys.observable_operator(&Observable::SpinZ(0)).unwrap().expectation(&psi);
        let z = C64::new(0.2, 0.1);
        assert!((sz.re + (1.0 - z.norm_sqr()) / (1.0 + z.norm_sqr())).abs() < 1e-12);
        let sy = sys.observable_operator(&Observable::SpinY(0)).unwrap().expectation(&psi);
        assert!((sy.re - 2.0 * z.im / (1.0 + z.norm_sqr())).abs() < 1e-12, "{sy}");
    }
}
