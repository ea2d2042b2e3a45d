//! Compensated summation and mergeable per-time moment accumulators.

use serde::Serialize;

use crate::C64;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        let mut acc = Neumaier::default();
        iter.into_iter().for_each(|x| acc.add(x));
        acc
    }
}

/// Compensated sum of complex values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexNeumaier {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexNeumaier {
    pub fn add(&mut self, x: C64) {
        self.re.add(x.re);
        self.im.add(x.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Count, complex mean and real-part variance of a stream of samples.
///
/// Sums are taken relative to the first sample seen, so a run of identical
/// samples yields a variance of exactly zero. Two accumulators merge
/// exactly in the algebraic sense; folding partial accumulators in a fixed
/// order therefore gives results independent of how work was split.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: usize,
    shift: C64,
    sum: ComplexNeumaier,
    sum_sq: Neumaier,
}

impl Moments {
    pub fn push(&mut self, x: C64) {
        if self.n == 0 {
            self.shift = x;
        }
        let d = x - self.shift;
        self.n += 1;
        self.sum.add(d);
        self.sum_sq.add(d.re * d.re);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        // re-express the other sums relative to our shift
        let delta = other.shift - self.shift;
        let s1 = other.sum.value();
        let s2 = other.sum_sq.value();
        let n = other.n as f64;
        self.sum.add(s1);
        self.sum.add(delta * n);
        self.sum_sq.add(s2);
        self.sum_sq.add(2.0 * delta.re * s1.re);
        self.sum_sq.add(n * delta.re * delta.re);
        self.n += other.n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> C64 {
        if self.n == 0 {
            return C64::new(f64::NAN, f64::NAN);
        }
        self.shift + self.sum.value() / self.n as f64
    }

    /// Unbiased sample variance of the real part; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let s1 = self.sum.value().re;
        ((self.sum_sq.value() - s1 * s1 / n) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Normalized histogram of real samples over a fixed range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub probability: Vec<f64>,
    pub n_samples: usize,
    /// Fraction of samples strictly below zero.
    pub negative_mass: f64,
    /// Samples outside the range, counted into the edge bins.
    pub n_clamped: usize,
}

impl Histogram {
    /// Bins `values` into `n_bins` equal bins over `range`; out-of-range
    /// values are folded into the first or last bin.
    pub fn from_values(values: &[f64], n_bins: usize, range: (f64, f64)) -> Self {
        let n_bins = n_bins.max(1);
        let (lo, hi) = range;
        let width = (hi - lo) / n_bins as f64;
        let edges = (0..=n_bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0usize; n_bins];
        let mut clamped = 0;
        let mut negative = 0;
        for &v in values {
            if v < 0.0 {
                negative += 1;
            }
            let raw = ((v - lo) / width).floor();
            let bin = if raw < 0.0 || raw.is_nan() {
                clamped += 1;
                0
            } else if raw >= n_bins as f64 {
                // the right edge itself belongs to the last bin
                if v > hi {
                    clamped += 1;
                }
                n_bins - 1
            } else {
                raw as usize
            };
            counts[bin] += 1;
        }
        let total = values.len().max(1) as f64;
        Histogram {
            edges,
            probability: counts.iter().map(|&c| c as f64 / total).collect(),
            n_samples: values.len(),
            negative_mass: negative as f64 / total,
            n_clamped: clamped,
        }
    }

    pub fn total_probability(&self) -> f64 {
        self.probability.iter().copied().collect::<Neumaier>().value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let sum: Neumaier = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(sum.value(), 2.0);
    }

    #[test]
    fn identical_samples_have_zero_error() {
        let mut m = Moments::default();
        for _ in 0..1000 {
            m.push(C64::new(0.1, 0.3));
        }
        assert_eq!(m.mean(), C64::new(0.1, 0.3));
        assert_eq!(m.std_error(), 0.0);
    }

    #[test]
    fn two_point_statistics() {
        let mut m = Moments::default();
        m.push(C64::new(1.0, 0.0));
        m.push(C64::new(3.0, 0.0));
        assert_eq!(m.mean().re, 2.0);
        assert!((m.std_error() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<C64> = (0..97).map(|k| C64::new((k as f64 * 0.37).sin() * 5.0 + 1e3, k as f64)).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut merged = Moments::default();
        for chunk in xs.chunks(10) {
            let mut part = Moments::default();
            chunk.iter().for_each(|&x| part.push(x));
            merged.merge(&part);
        }
        assert_eq!(merged.count(), 97);
        assert!((merged.mean() - whole.mean()).norm() < 1e-12 * whole.mean().norm());
        assert!((merged.variance() - whole.variance()).abs() < 1e-10 * whole.variance());
    }

    #[test]
    fn histogram_normalization_and_clamping() {
        let h = Histogram::from_values(&[-2.0, -0.5, 0.1, 0.5, 1.0, 7.0], 4, (-1.0, 1.0));
        assert_eq!(h.probability.len(), 4);
        assert!((h.total_probability() - 1.0).abs() < 1e-12);
        assert_eq!(h.n_clamped, 2);
        assert!((h.negative_mass - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(h.probability, vec![1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 3.0 / 6.0]);
    }
}
