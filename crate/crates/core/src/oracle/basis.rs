use serde::Serialize;

use crate::model::NetworkSpec;
use crate::{Error, Result};

/// Default bound on the total Hilbert-space dimension.
pub const DEFAULT_DIMENSION_LIMIT: usize = 4096;

/// Product basis `|n_0, m_0; n_1, m_1; …⟩` with site 0 most significant.
///
/// Within a site the local index is `n (2s+1) + (m + s)`, so photon number
/// varies slowest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HilbertBasis {
    pub fock_cutoffs: Vec<usize>,
    /// `2s` per site.
    pub spin_twice: Vec<usize>,
    local_dims: Vec<usize>,
    strides: Vec<usize>,
    dimension: usize,
}

/// Labels of one site: photon number and `m + s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteLabel {
    pub n: usize,
    pub m: usize,
}

impl HilbertBasis {
    pub fn new(fock_cutoffs: Vec<usize>, spin_twice: Vec<usize>, limit: usize) -> Result<Self> {
        let local_dims: Vec<usize> = fock_cutoffs
            .iter()
            .zip(&spin_twice)
            .map(|(&n, &k)| (n + 1) * (k + 1))
            .collect();
        let dimension = local_dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if dimension > limit {
            return Err(Error::DimensionLimit { dimension, limit });
        }
        let mut strides = vec![1; local_dims.len()];
        for i in (0..local_dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * local_dims[i + 1];
        }
        Ok(HilbertBasis {
            fock_cutoffs,
            spin_twice,
            local_dims,
            strides,
            dimension,
        })
    }

    /// Same photon cutoff at every site; spins taken from the network.
    pub fn for_network(spec: &NetworkSpec, fock_cutoff: usize, limit: usize) -> Result<Self> {
        let spin_twice = spec
            .sites
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.spin_s
                    .twice()
                    .ok_or_else(|| Error::Unsupported(format!("site {i}: the exact oracle needs a finite spin")))
            })
            .collect::<Result<Vec<_>>>()?;
        HilbertBasis::new(vec![fock_cutoff; spec.n_sites], spin_twice, limit)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_sites(&self) -> usize {
        self.local_dims.len()
    }

    pub fn index(&self, labels: &[SiteLabel]) -> usize {
        labels
            .iter()
            .zip(&self.spin_twice)
            .zip(&self.strides)
            .map(|((l, &k), &s)| (l.n * (k + 1) + l.m) * s)
            .sum()
    }

    pub fn labels(&self, index: usize) -> Vec<SiteLabel> {
        self.local_dims
            .iter()
            .zip(&self.strides)
            .zip(&self.spin_twice)
            .map(|((&d, &s), &k)| {
                let local = (index / s) % d;
                SiteLabel { n: local / (k + 1), m: local % (k + 1) }
            })
            .collect()
    }

    /// Index of `labels` with site `i` replaced by `label`.
    pub fn with_site(&self, index: usize, site: usize, label: SiteLabel) -> usize {
        let k = self.spin_twice[site];
        let old = (index / self.strides[site]) % self.local_dims[site];
        let new = label.n * (k + 1) + label.m;
        index - old * self.strides[site] + new * self.strides[site]
    }
}
