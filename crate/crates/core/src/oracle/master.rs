use nalgebra::DMatrix;
use serde::Serialize;

use crate::observables::{Observable, ObservableSeries};
use crate::oracle::sparse::CsrMatrix;
use crate::oracle::system::OracleSystem;
use crate::{Error, Result, C64};

/// Default bound on the dimension accepted by the dense integrator.
pub const DEFAULT_DENSE_LIMIT: usize = 128;

#[derive(Clone, Debug)]
pub struct MasterOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Spacing of recorded samples; every step when `None`.
    pub sample_interval: Option<f64>,
    pub dimension_limit: usize,
    /// Number of evenly spaced times at which the spectrum of ρ is checked.
    pub positivity_checks: usize,
}

impl MasterOptions {
    pub fn new(dt: f64, t_final: f64) -> Self {
        MasterOptions {
            dt,
            t_final,
            sample_interval: None,
            dimension_limit: DEFAULT_DENSE_LIMIT,
            positivity_checks: 3,
        }
    }

    pub fn with_sample_interval(mut self, interval: f64) -> Self {
        self.sample_interval = Some(interval);
        self
    }

    pub fn with_dimension_limit(mut self, limit: usize) -> Self {
        self.dimension_limit = limit;
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MasterDiagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl MasterDiagnostics {
    pub fn passes(&self) -> bool {
        self.max_trace_error < 1e-8 && self.max_hermiticity_error < 1e-8 && self.min_eigenvalue > -1e-8
    }
}

#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub series: Vec<ObservableSeries>,
    pub diagnostics: MasterDiagnostics,
    pub final_state: DMatrix<C64>,
}

impl MasterSolution {
    pub fn series(&self, name: &str) -> Option<&ObservableSeries> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// `|ψ⟩⟨ψ|`.
pub fn projector(psi: &[C64]) -> DMatrix<C64> {
    let n = psi.len();
    DMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj())
}

/// `L ρ L†` entries as `(r, c, k, m, weight)`: `out[r, c] += weight ρ[k, m]`.
type Sandwich = Vec<(usize, usize, usize, usize, C64)>;

fn sandwich(l: &CsrMatrix) -> Sandwich {
    let n = l.dim();
    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
    for (r, k, v) in l.triplets() {
        rows[r].push((k, v));
    }
    let mut out = Vec::new();
    for (r, row_r) in rows.iter().enumerate() {
        for (c, row_c) in rows.iter().enumerate() {
            for &(k, v) in row_r {
                for &(m, u) in row_c {
                    out.push((r, c, k, m, v * u.conj()));
                }
            }
        }
    }
    out
}

/// Right-hand side of the master equation on column-major storage.
struct Liouvillian<'a> {
    h_eff: &'a CsrMatrix,
    sandwiches: Vec<Sandwich>,
    n: usize,
    y: Vec<C64>,
}

impl<'a> Liouvillian<'a> {
    fn new(system: &'a OracleSystem) -> Self {
        let n = system.dimension();
        Liouvillian {
            h_eff: &system.h_eff,
            sandwiches: system.jumps.iter().map(sandwich).collect(),
            n,
            y: vec![C64::default(); n * n],
        }
    }

    fn apply(&mut self, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        for (col, y) in rho.chunks(n).zip(self.y.chunks_mut(n)) {
            self.h_eff.mul_vec_into(col, y);
        }
        // −i H ρ + (−i H ρ)†
        for c in 0..n {
            for r in 0..n {
                let a = self.y[r + c * n];
                let b = self.y[c + r * n].conj();
                out[r + c * n] = C64::new(a.im - b.im, b.re - a.re);
            }
        }
        for sw in &self.sandwiches {
            for &(r, c, k, m, w) in sw {
                out[r + c * n] += w * rho[k + m * n];
            }
        }
    }
}

fn min_eigenvalue(rho: &DMatrix<C64>) -> f64 {
    let hermitian = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    hermitian
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn hermiticity(rho: &DMatrix<C64>) -> f64 {
    (rho - rho.adjoint()).camax()
}

/// Integrates the Lindblad equation with classical RK4 on the full density
/// matrix and records ensemble-style series of `observables`.
pub fn evolve_master_dense(
    rho0: &DMatrix<C64>,
    system: &OracleSystem,
    observables: &[Observable],
    options: &MasterOptions,
) -> Result<MasterSolution> {
    let dim = system.dimension();
    if dim > options.dimension_limit {
        return Err(Error::DimensionLimit {
            dimension: dim,
            limit: options.dimension_limit,
        });
    }
    if rho0.nrows() != dim || rho0.ncols() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: rho0.nrows(),
        });
    }
    let operators = observables
        .iter()
        .map(|o| system.observable_operator(o))
        .collect::<Result<Vec<_>>>()?;
    let dt = options.dt;
    let n_steps = ((options.t_final / dt) - 1e-9).ceil().max(0.0) as usize;
    let stride = options
        .sample_interval
        .map_or(1, |h| ((h / dt).round() as usize).max(1));
    let check_every = (n_steps / options.positivity_checks.max(1)).max(1);

    let mut rho = rho0.clone();
    let mut times = Vec::new();
    let mut values: Vec<Vec<C64>> = vec![Vec::new(); operators.len()];
    let mut diag = MasterDiagnostics {
        max_trace_error: 0.0,
        max_hermiticity_error: 0.0,
        min_eigenvalue: min_eigenvalue(&rho),
    };
    let mut rhs = Liouvillian::new(system);
    let len = dim * dim;
    let mut k = [vec![C64::default(); len], vec![C64::default(); len], vec![C64::default(); len]];
    let mut stage = vec![C64::default(); len];
    for step in 0..=n_steps {
        if step % stride == 0 || step == n_steps {
            times.push(step as f64 * dt);
            for (v, op) in values.iter_mut().zip(&operators) {
                v.push(op.trace_product(&rho));
            }
            diag.max_trace_error = diag.max_trace_error.max((rho.trace() - C64::new(1.0, 0.0)).norm());
            diag.max_hermiticity_error = diag.max_hermiticity_error.max(hermiticity(&rho));
        }
        if step > 0 && (step % check_every == 0 || step == n_steps) {
            diag.min_eigenvalue = diag.min_eigenvalue.min(min_eigenvalue(&rho));
        }
        if step == n_steps {
            break;
        }
        let [k1, k2, acc] = &mut k;
        let x = rho.as_mut_slice();
        // acc collects k1 + 2 k2 + 2 k3 + k4
        rhs.apply(x, k1);
        acc.copy_from_slice(k1);
        axpy(&mut stage, x, k1, 0.5 * dt);
        rhs.apply(&stage, k2);
        add_scaled(acc, k2, 2.0);
        axpy(&mut stage, x, k2, 0.5 * dt);
        rhs.apply(&stage, k1);
        add_scaled(acc, k1, 2.0);
        axpy(&mut stage, x, k1, dt);
        rhs.apply(&stage, k2);
        add_scaled(acc, k2, 1.0);
        add_scaled(x, acc, dt / 6.0);
        // keep round-off from accumulating an anti-Hermitian part
        for c in 0..dim {
            for r in c + 1..dim {
                let m = (x[r + c * dim] + x[c + r * dim].conj()) * 0.5;
                x[r + c * dim] = m;
                x[c + r * dim] = m.conj();
            }
            x[c + c * dim].im = 0.0;
        }
    }
    let series = observables
        .iter()
        .zip(values)
        .map(|(o, mean)| ObservableSeries {
            name: o.name(),
            times: times.clone(),
            std_error: vec![0.0; mean.len()],
            n_samples: vec![1; mean.len()],
            mean,
        })
        .collect();
    Ok(MasterSolution {
        series,
        diagnostics: diag,
        final_state: rho,
    })
}

/// `out = x + h k`.
fn axpy(out: &mut [C64], x: &[C64], k: &[C64], h: f64) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(k) {
        *o = a + b * h;
    }
}

/// `x += h k`.
fn add_scaled(x: &mut [C64], k: &[C64], h: f64) {
    for (a, b) in x.iter_mut().zip(k) {
        *a += b * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NetworkSpec, SiteParams, Spin};

    fn cavity(kappa: f64, nbar: f64) -> OracleSystem {
        let spec = NetworkSpec::new(vec![SiteParams::resonant(0.0, kappa, Spin::Finite(0.5)).with_nbar(nbar)]);
        OracleSystem::new(&spec, 30, 4096).unwrap()
    }

    #[test]
    fn vacuum_is_stationary() {
        let sys = cavity(1.0, 0.0);
        let psi = sys.coherent_ket(&[C64::default()], &[C64::default()]).unwrap();
        let sol = evolve_master_dense(
            &projector(&psi),
            &sys,
            &[Observable::PhotonNumber(0)],
            &MasterOptions::new(0.01, 1.0),
        )
        .unwrap();
        assert!((&sol.final_state - projector(&psi)).camax() < 1e-14);
    }

    #[test]
    fn damped_cavity_decays_exponentially() {
        let kappa = 1.0;
        let sys = cavity(kappa, 0.0);
        // ⟨n⟩ = 4 in unscaled units, s = 1/2
        let label = C64::new(2.0 / 0.5f64.sqrt(), 0.0);
        let psi = sys.coherent_ket(&[label], &[C64::default()]).unwrap();
        let sol = evolve_master_dense(
            &projector(&psi),
            &sys,
            &[Observable::PhotonNumber(0)],
            &MasterOptions::new(0.005, 2.0).with_sample_interval(0.5),
        )
        .unwrap();
        let n = sol.series("n_0").unwrap();
        for (t, v) in n.times.iter().zip(&n.mean) {
            // the series is N/s
            assert!((v.re * 0.5 - 4.0 * (-kappa * t).exp()).abs() < 1e-6, "t={t}: {v}");
        }
        assert!(sol.diagnostics.passes(), "{:?}", sol.diagnostics);
    }

    #[test]
    fn thermal_fixed_point() {
        let sys = cavity(2.0, 0.6);
        let psi = sys.coherent_ket(&[C64::default()], &[C64::default()]).unwrap();
        let sol = evolve_master_dense(
            &projector(&psi),
            &sys,
            &[Observable::PhotonNumber(0)],
            &MasterOptions::new(0.01, 12.0).with_sample_interval(1.0),
        )
        .unwrap();
        // rescaled ñ is returned directly because N/s is reported
        let last = sol.series("n_0").unwrap().mean.last().unwrap().re;
        assert!((last - 0.6).abs() < 1e-6, "{last}");
    }

    #[test]
    fn linear_dimer_current_matches_closed_form() {
        let (kappa, j, f) = (2.0, 1.0, 1.0);
        let site = SiteParams::resonant(0.0, kappa, Spin::Finite(0.5));
        let spec = NetworkSpec::dimer(site, j);
        let mut spec = spec;
        spec.sites[0] = spec.sites[0].clone().with_drive(f);
        let sys = OracleSystem::new(&spec, 6, 4096).unwrap();
        let psi = sys.coherent_ket(&[C64::default(); 2], &[C64::default(); 2]).unwrap();
        let sol = evolve_master_dense(
            &projector(&psi),
            &sys,
            &[Observable::Current(0, 1)],
            &MasterOptions::new(0.01, 25.0).with_sample_interval(5.0).with_dimension_limit(256),
        )
        .unwrap();
        let expected = 16.0 * kappa * f * f * j * j / (kappa * kappa + 4.0 * j * j).powi(2);
        let last = *sol.series("current_0_1").unwrap().mean.last().unwrap();
        assert!((last.re - expected).abs() < 1e-5 && last.im.abs() < 1e-12, "{last} vs {expected}");
    }

    #[test]
    fn limit_and_shape_errors() {
        let sys = cavity(1.0, 0.0);
        let rho = DMatrix::identity(sys.dimension(), sys.dimension());
        let opts = MasterOptions::new(0.1, 1.0).with_dimension_limit(10);
        assert!(matches!(evolve_master_dense(&rho, &sys, &[], &opts), Err(Error::DimensionLimit { .. })));
        let opts = MasterOptions::new(0.1, 1.0);
        let wrong = DMatrix::identity(3, 3);
        assert!(matches!(evolve_master_dense(&wrong, &sys, &[], &opts), Err(Error::LengthMismatch { .. })));
    }
}
