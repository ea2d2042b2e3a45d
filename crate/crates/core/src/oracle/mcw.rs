//! Quantum-jump unraveling of the master equation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::observables::{Observable, ObservableSeries};
use crate::oracle::basis::DEFAULT_DIMENSION_LIMIT;
use crate::oracle::sparse::CsrMatrix;
use crate::oracle::system::OracleSystem;
use crate::stats::Moments;
use crate::{Error, Result, C64};

const BLOCK: usize = 16;

#[derive(Clone, Debug)]
pub struct McwOptions {
    pub dt: f64,
    pub t_final: f64,
    pub sample_interval: Option<f64>,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub dimension_limit: usize,
}

impl McwOptions {
    pub fn new(dt: f64, t_final: f64, n_trajectories: usize, master_seed: u64) -> Self {
        McwOptions {
            dt,
            t_final,
            sample_interval: None,
            n_trajectories,
            master_seed,
            dimension_limit: DEFAULT_DIMENSION_LIMIT,
        }
    }

    pub fn with_sample_interval(mut self, interval: f64) -> Self {
        self.sample_interval = Some(interval);
        self
    }

    fn n_steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(0.0) as usize
    }

    fn stride(&self) -> usize {
        self.sample_interval
            .map_or(1, |h| ((h / self.dt).round() as usize).max(1))
    }

    pub fn record_times(&self) -> Vec<f64> {
        let (n, stride) = (self.n_steps(), self.stride());
        (0..=n)
            .filter(|k| k % stride == 0 || *k == n)
            .map(|k| k as f64 * self.dt)
            .collect()
    }
}

/// One jump trajectory: normalized expectation values at the record times.
#[derive(Clone, Debug)]
pub struct McwTrajectory {
    pub times: Vec<f64>,
    /// `values[o][k]` for observable `o` at record time `k`.
    pub values: Vec<Vec<C64>>,
    pub n_jumps: usize,
    /// Largest `| ‖ψ‖² − 1 |` seen, only meaningful without jump operators.
    pub max_norm_error: f64,
}

fn rk4_step(h_eff: &CsrMatrix, psi: &mut [C64], dt: f64, scratch: &mut [Vec<C64>; 5]) {
    let [k1, k2, k3, k4, tmp] = scratch;
    let minus_i = C64::new(0.0, -1.0);
    let rhs = |x: &[C64], out: &mut [C64]| {
        h_eff.mul_vec_into(x, out);
        out.iter_mut().for_each(|v| *v *= minus_i);
    };
    rhs(psi, k1);
    for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k1.iter())) {
        *t = p + k * (0.5 * dt);
    }
    rhs(tmp, k2);
    for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k2.iter())) {
        *t = p + k * (0.5 * dt);
    }
    rhs(tmp, k3);
    for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k3.iter())) {
        *t = p + k * dt;
    }
    rhs(tmp, k4);
    for i in 0..psi.len() {
        psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
    }
}

fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|c| c.norm_sqr()).sum()
}

/// Runs one trajectory from the normalized state `psi0`.
pub fn mcw_trajectory<R: Rng + ?Sized>(
    psi0: &[C64],
    system: &OracleSystem,
    operators: &[CsrMatrix],
    options: &McwOptions,
    rng: &mut R,
) -> McwTrajectory {
    let n = psi0.len();
    let n_steps = options.n_steps();
    let stride = options.stride();
    let mut psi = psi0.to_vec();
    let mut scratch: [Vec<C64>; 5] = std::array::from_fn(|_| vec![C64::default(); n]);
    let mut jumped = vec![C64::default(); n];
    let mut threshold: f64 = rng.random();
    let mut out = McwTrajectory {
        times: Vec::new(),
        values: vec![Vec::new(); operators.len()],
        n_jumps: 0,
        max_norm_error: 0.0,
    };
    for k in 0..=n_steps {
        let norm = norm_sqr(&psi);
        if system.jumps.is_empty() {
            out.max_norm_error = out.max_norm_error.max((norm - 1.0).abs());
        }
        if k % stride == 0 || k == n_steps {
            out.times.push(k as f64 * options.dt);
            for (v, op) in out.values.iter_mut().zip(operators) {
                v.push(op.expectation(&psi) / norm);
            }
        }
        if k == n_steps {
            break;
        }
        rk4_step(&system.h_eff, &mut psi, options.dt, &mut scratch);
        if !system.jumps.is_empty() && norm_sqr(&psi) < threshold {
            let weights: Vec<f64> = system
                .jumps
                .iter()
                .map(|l| {
                    l.mul_vec_into(&psi, &mut jumped);
                    norm_sqr(&jumped)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut channel = weights.len() - 1;
            for (c, w) in weights.iter().enumerate() {
                if pick < *w {
                    channel = c;
                    break;
                }
                pick -= w;
            }
            system.jumps[channel].mul_vec_into(&psi, &mut jumped);
            let scale = 1.0 / weights[channel].sqrt();
            for (p, j) in psi.iter_mut().zip(&jumped) {
                *p = j * scale;
            }
            out.n_jumps += 1;
            threshold = rng.random();
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct McwEnsemble {
    pub series: Vec<ObservableSeries>,
    pub jumps_per_trajectory: Vec<usize>,
    pub max_norm_error: f64,
}

impl McwEnsemble {
    pub fn series(&self, name: &str) -> Option<&ObservableSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn total_jumps(&self) -> usize {
        self.jumps_per_trajectory.iter().sum()
    }
}

struct BlockResult {
    moments: Vec<Vec<Moments>>,
    jumps: Vec<usize>,
    norm_error: f64,
}

/// Averages `n_trajectories` jump trajectories. Trajectory `k` uses ChaCha8
/// stream `k` of the master seed; results do not depend on the thread count.
pub fn run_mcw(
    system: &OracleSystem,
    psi0: &[C64],
    observables: &[Observable],
    options: &McwOptions,
) -> Result<McwEnsemble> {
    let dim = system.dimension();
    if dim > options.dimension_limit {
        return Err(Error::DimensionLimit {
            dimension: dim,
            limit: options.dimension_limit,
        });
    }
    if psi0.len() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: psi0.len(),
        });
    }
    if options.n_trajectories == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let norm = norm_sqr(psi0).sqrt();
    let psi0: Vec<C64> = psi0.iter().map(|c| c / norm).collect();
    let operators = observables
        .iter()
        .map(|o| system.observable_operator(o))
        .collect::<Result<Vec<_>>>()?;
    let times = options.record_times();
    let n_blocks = options.n_trajectories.div_ceil(BLOCK);
    let blocks: Vec<BlockResult> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut res = BlockResult {
                moments: vec![vec![Moments::default(); times.len()]; operators.len()],
                jumps: Vec::new(),
                norm_error: 0.0,
            };
            for k in b * BLOCK..((b + 1) * BLOCK).min(options.n_trajectories) {
                let mut rng = ChaCha8Rng::seed_from_u64(options.master_seed);
                rng.set_stream(k as u64);
                let traj = mcw_trajectory(&psi0, system, &operators, options, &mut rng);
                for (acc, vals) in res.moments.iter_mut().zip(&traj.values) {
                    acc.iter_mut().zip(vals).for_each(|(m, v)| m.push(*v));
                }
                res.jumps.push(traj.n_jumps);
                res.norm_error = res.norm_error.max(traj.max_norm_error);
            }
            res
        })
        .collect();
    let mut moments = vec![vec![Moments::default(); times.len()]; operators.len()];
    let mut jumps = Vec::with_capacity(options.n_trajectories);
    let mut norm_error: f64 = 0.0;
    for block in blocks {
        for (acc, part) in moments.iter_mut().zip(&block.moments) {
            acc.iter_mut().zip(part).for_each(|(a, p)| a.merge(p));
        }
        jumps.extend(block.jumps);
        norm_error = norm_error.max(block.norm_error);
    }
    let series = observables
        .iter()
        .zip(&moments)
        .map(|(o, m)| ObservableSeries::from_moments(o.name(), times.clone(), m))
        .collect();
    Ok(McwEnsemble {
        series,
        jumps_per_trajectory: jumps,
        max_norm_error: norm_error,
    })
}
