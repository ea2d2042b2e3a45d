use nalgebra::Matrix4;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::model::{NetworkSpec, PhaseSpacePoint, SiteParams, SiteVector, Spin};
use crate::{Error, Result, C64, I};

/// 4×4 complex matrix over `(α, β, z, w)`.
pub type Mat4 = Matrix4<C64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTag {
    Thermal,
    Quantum,
    Spin,
}

/// A matrix `B` with `B Bᵀ` equal to one diffusion block.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseFactor {
    pub matrix: Mat4,
    pub tag: NoiseTag,
}

impl NoiseFactor {
    fn zero(tag: NoiseTag) -> Self {
        NoiseFactor {
            matrix: Mat4::zeros(),
            tag,
        }
    }

    /// `B Bᵀ` (plain transpose, no conjugation).
    pub fn diffusion(&self) -> Mat4 {
        self.matrix * self.matrix.transpose()
    }
}

/// The thermal, quantum and spin-decay diffusion blocks of one site.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionBlocks {
    pub thermal: Mat4,
    pub quantum: Mat4,
    pub spin: Mat4,
}

impl DiffusionBlocks {
    pub fn total(&self) -> Mat4 {
        self.thermal + self.quantum + self.spin
    }
}

fn inv_s(spin: Spin) -> f64 {
    match spin {
        Spin::Finite(s) => 1.0 / s,
        Spin::Infinite => 0.0,
    }
}

fn spin_entries(z: C64, w: C64, p: &SiteParams) -> (C64, C64, C64) {
    let scale = p.gamma * (2.0 * p.nbar + 1.0);
    let a = scale * z * z;
    let c = scale * w * w;
    let b = p.gamma * (p.nbar + (p.nbar + 1.0) * z * z * w * w);
    (a, b, c)
}

pub fn diffusion_blocks(z: C64, w: C64, params: &SiteParams) -> DiffusionBlocks {
    let mut thermal = Mat4::zeros();
    let kn = C64::new(params.kappa * params.nbar, 0.0);
    thermal[(0, 1)] = kn;
    thermal[(1, 0)] = kn;

    let mut quantum = Mat4::zeros();
    let q = I * params.g * inv_s(params.spin_s);
    quantum[(0, 2)] = -q * z * z;
    quantum[(2, 0)] = -q * z * z;
    quantum[(1, 3)] = q * w * w;
    quantum[(3, 1)] = q * w * w;

    let mut spin = Mat4::zeros();
    if params.gamma > 0.0 {
        let (a, b, c) = spin_entries(z, w, params);
        spin[(2, 2)] = a;
        spin[(3, 3)] = c;
        spin[(2, 3)] = b;
        spin[(3, 2)] = b;
    }
    DiffusionBlocks { thermal, quantum, spin }
}

pub fn noise_factor_thermal(params: &SiteParams) -> NoiseFactor {
    let k = (params.kappa * params.nbar / 2.0).sqrt();
    let mut b = NoiseFactor::zero(NoiseTag::Thermal);
    b.matrix[(0, 0)] = C64::new(k, 0.0);
    b.matrix[(0, 1)] = C64::new(0.0, k);
    b.matrix[(1, 0)] = C64::new(k, 0.0);
    b.matrix[(1, 1)] = C64::new(0.0, -k);
    b
}

/// `√(ig/s)/√2`, principal branch; zero in the classical limit.
fn quantum_prefactor(params: &SiteParams) -> C64 {
    (I * params.g * inv_s(params.spin_s)).sqrt() * std::f64::consts::FRAC_1_SQRT_2
}

pub fn noise_factor_quantum(z: C64, w: C64, params: &SiteParams) -> NoiseFactor {
    let q = quantum_prefactor(params);
    let mixing = [
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0],
        [-1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
    ];
    let diag = [z, I * z, w, I * w];
    let mut b = NoiseFactor::zero(NoiseTag::Quantum);
    for (r, row) in mixing.iter().enumerate() {
        for (k, &m) in row.iter().enumerate() {
            b.matrix[(r, k)] = q * m * diag[k];
        }
    }
    b
}

/// Max entrywise deviation of `product` from `target`, relative to each
/// nonzero target entry and to the largest entry where the target vanishes.
pub fn relative_residual(product: &Mat4, target: &Mat4) -> f64 {
    let scale = target.iter().map(|c| c.norm()).fold(0.0, f64::max);
    product
        .iter()
        .zip(target.iter())
        .map(|(p, t)| {
            let diff = (p - t).norm();
            if diff == 0.0 {
                0.0
            } else {
                let denom = if t.norm() > 0.0 { t.norm() } else { scale };
                if denom > 0.0 { diff / denom } else { f64::INFINITY }
            }
        })
        .fold(0.0, f64::max)
}

type Block2 = [[C64; 2]; 2];

fn block_residual(q: &Block2, a: C64, b: C64, c: C64) -> f64 {
    let mut prod = Mat4::zeros();
    let mut target = Mat4::zeros();
    for r in 0..2 {
        for s in 0..2 {
            prod[(r, s)] = q[r][0] * q[s][0] + q[r][1] * q[s][1];
        }
    }
    target[(0, 0)] = a;
    target[(0, 1)] = b;
    target[(1, 0)] = b;
    target[(1, 1)] = c;
    relative_residual(&prod, &target)
}

/// Complex-orthogonal eigendecomposition `V diag(λ) Vᵀ` of the symmetric
/// block, returned as `V √λ`.
fn eigen_factor(a: C64, b: C64, c: C64) -> Option<Block2> {
    let m = 0.5 * (a + c);
    let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let mut cols = [[C64::default(); 2]; 2];
    for (k, lambda) in [m + d, m - d].into_iter().enumerate() {
        let u = [b, lambda - a];
        let v = [lambda - c, b];
        let norm2 = |x: &[C64; 2]| x[0].norm_sqr() + x[1].norm_sqr();
        let mut vec = if norm2(&u) >= norm2(&v) { u } else { v };
        if norm2(&vec) == 0.0 {
            // already diagonal
            vec = if k == 0 { [C64::new(1.0, 0.0), C64::default()] } else { [C64::default(), C64::new(1.0, 0.0)] };
            if (lambda - a).norm() > (lambda - c).norm() {
                vec.swap(0, 1);
            }
        }
        let vtv = vec[0] * vec[0] + vec[1] * vec[1];
        if vtv.norm() <= 1e-8 * norm2(&vec) {
            return None;
        }
        let scale = lambda.sqrt() / vtv.sqrt();
        cols[k] = [vec[0] * scale, vec[1] * scale];
    }
    Some([[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]])
}

fn spin_block_factor(a: C64, b: C64, c: C64) -> Result<Block2> {
    let zero = C64::default();
    let mut candidates: Vec<Block2> = Vec::with_capacity(4);
    if let Some(q) = eigen_factor(a, b, c) {
        candidates.push(q);
    }
    if a.norm() > 0.0 {
        let l11 = a.sqrt();
        let l21 = b / l11;
        candidates.push([[l11, zero], [l21, (c - l21 * l21).sqrt()]]);
    }
    if c.norm() > 0.0 {
        let u22 = c.sqrt();
        let u12 = b / u22;
        candidates.push([[(a - u12 * u12).sqrt(), u12], [zero, u22]]);
    }
    let h = (0.5 * b).sqrt();
    candidates.push([[h, I * h], [h, -I * h]]);

    let mut best = f64::INFINITY;
    for q in candidates {
        let r = block_residual(&q, a, b, c);
        if r <= 1e-10 {
            return Ok(q);
        }
        best = best.min(r);
    }
    Err(Error::Factorization { residual: best })
}

pub fn noise_factor_spin(z: C64, w: C64, params: &SiteParams) -> Result<NoiseFactor> {
    let mut b = NoiseFactor::zero(NoiseTag::Spin);
    if params.gamma == 0.0 {
        return Ok(b);
    }
    let (a, off, c) = spin_entries(z, w, params);
    let q = spin_block_factor(a, off, c)?;
    for r in 0..2 {
        for s in 0..2 {
            b.matrix[(2 + r, 2 + s)] = q[r][s];
        }
    }
    Ok(b)
}

/// Correlated increments `dξ` for every site.
pub fn sample_noise<R: Rng + ?Sized>(
    state: &PhaseSpacePoint,
    spec: &NetworkSpec,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<SiteVector>> {
    let mut out = vec![SiteVector::default(); state.sites.len()];
    sample_noise_into(&state.sites, spec, dt, rng, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`sample_noise`].
///
/// Gaussians are drawn only for the sources that are active for a site's
/// parameters (thermal: `κn̄ > 0`; quantum: finite `s` and `g > 0`; spin:
/// `γ > 0`), so the random stream consumed per step is fixed by the model.
pub fn sample_noise_into<R: Rng + ?Sized>(
    state: &[SiteVector],
    spec: &NetworkSpec,
    dt: f64,
    rng: &mut R,
    out: &mut [SiteVector],
) -> Result<()> {
    let sdt = dt.sqrt();
    let mut gauss = || -> f64 { rng.sample::<f64, _>(StandardNormal) * sdt };
    for ((x, p), o) in state.iter().zip(&spec.sites).zip(out.iter_mut()) {
        *o = SiteVector::default();
        if p.kappa * p.nbar > 0.0 {
            let k = (p.kappa * p.nbar / 2.0).sqrt();
            let (w0, w1) = (gauss(), gauss());
            o.alpha += C64::new(k * w0, k * w1);
            o.beta += C64::new(k * w0, -k * w1);
        }
        if p.g > 0.0 && !p.spin_s.is_infinite() {
            let q = quantum_prefactor(p);
            let v0 = x.z * gauss();
            let v1 = I * x.z * gauss();
            let v2 = x.w * gauss();
            let v3 = I * x.w * gauss();
            o.alpha += q * (v0 + v1);
            o.beta += q * (v2 - v3);
            o.z += q * (v1 - v0);
            o.w += q * (v2 + v3);
        }
        if p.gamma > 0.0 {
            let (a, b, c) = spin_entries(x.z, x.w, p);
            let f = spin_block_factor(a, b, c)?;
            let (w0, w1) = (gauss(), gauss());
            o.z += f[0][0] * w0 + f[0][1] * w1;
            o.w += f[1][0] * w0 + f[1][1] * w1;
        }
    }
    Ok(())
}
