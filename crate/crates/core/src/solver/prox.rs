//! Proximal maps for the coefficient and dictionary priors.

use crate::error::{Error, Result};
use crate::grid::{CoeffMap, Dictionary};

/// `sign(x) · max(|x| − t, 0)`
#[inline]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Elementwise minimizer of `(β/2)(x − x₀)² + λ|x|`.
pub fn prox_coeff(s_dc: &CoeffMap, lambda: f64, beta: f64) -> Result<CoeffMap> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(s_dc.clone());
    }
    let t = lambda / beta;
    Ok(s_dc.map(|x| soft_threshold(x, t)))
}

/// Projects full-grid filters onto `k`×`k` support (top-left anchored) and
/// unit ℓ2 norm. An all-zero atom becomes an impulse at its center.
pub fn prox_dict(d_raw: &CoeffMap, k: usize) -> Result<Dictionary> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "kernel size must be odd, got {k}"
        )));
    }
    let (h, w) = d_raw.spatial_dims();
    if k > h || k > w {
        return Err(Error::DimensionMismatch(format!(
            "kernel {k} larger than grid {h}x{w}"
        )));
    }
    let mut data = Vec::with_capacity(d_raw.atoms() * k * k);
    for plane in d_raw.planes() {
        let mut atom: Vec<f64> = (0..k)
            .flat_map(|u| plane[u * w..u * w + k].iter().copied())
            .collect();
        normalize_atom(&mut atom, k);
        data.extend(atom);
    }
    Dictionary::new(d_raw.atoms(), k, data)
}

fn normalize_atom(atom: &mut [f64], k: usize) {
    let norm = atom.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        atom[(k / 2) * k + k / 2] = 1.0;
    } else if (norm - 1.0).abs() > 1e-12 {
        // atoms already at unit norm up to rounding are left untouched so the
        // projection is exactly idempotent
        atom.iter_mut().for_each(|v| *v /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::dict::pad_dictionary;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn thresholds() {
        let s = CoeffMap::new(1, 1, 3, vec![0.3, -1.2, 2.0]).unwrap();
        assert_eq!(prox_coeff(&s, 0.0, 3.0).unwrap(), s);
        let out = prox_coeff(&s, 0.5, 1.0).unwrap();
        assert_eq!(out.data()[0], 0.0);
        let out = prox_coeff(&s, 0.4, 2.0).unwrap();
        assert!((out.data()[1] + 1.0).abs() < 1e-15);
        assert!(prox_coeff(&s, 0.1, 0.0).is_err());
    }

    #[test]
    fn perturbation_optimality() {
        let (x0, lambda, beta) = (-1.2, 0.4, 2.0);
        let obj = |x: f64| 0.5 * beta * (x - x0) * (x - x0) + lambda * x.abs();
        let x = soft_threshold(x0, lambda / beta);
        assert!((x + 1.0).abs() < 1e-15);
        assert!(obj(x + 1e-3) > obj(x));
        assert!(obj(x - 1e-3) > obj(x));
    }

    #[test]
    fn scales_norm_two_atom() {
        let mut raw = CoeffMap::zeros(1, 5, 5);
        let atom = [0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for u in 0..3 {
            raw.plane_mut(0)[u * 5..u * 5 + 3].copy_from_slice(&atom[u * 3..u * 3 + 3]);
        }
        let d = prox_dict(&raw, 3).unwrap();
        assert_eq!(d.atom(0), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_atom_becomes_center_impulse() {
        let d = prox_dict(&CoeffMap::zeros(2, 6, 6), 5).unwrap();
        for a in 0..2 {
            let atom = d.atom(a);
            assert_eq!(atom[12], 1.0);
            assert_eq!(atom.iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }

    #[test]
    fn off_support_entries_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut raw = CoeffMap::zeros(2, 7, 7);
        raw.data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-1.0..1.0));
        let a = prox_dict(&raw, 3).unwrap();
        let mut other = raw.clone();
        for atom in 0..2 {
            let plane = other.plane_mut(atom);
            for y in 0..7 {
                for x in 0..7 {
                    if y >= 3 || x >= 3 {
                        plane[y * 7 + x] = rng.random_range(-5.0..5.0);
                    }
                }
            }
        }
        let b = prox_dict(&other, 3).unwrap();
        assert_eq!(a, b);
        for n in a.atom_norms() {
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn soft_threshold_is_odd_and_nonexpansive(
            x in -10.0f64..10.0, y in -10.0f64..10.0, t in 0.0f64..3.0,
        ) {
            prop_assert_eq!(soft_threshold(-x, t), -soft_threshold(x, t));
            let d = (soft_threshold(x, t) - soft_threshold(y, t)).abs();
            prop_assert!(d <= (x - y).abs() + 1e-15);
        }

        #[test]
        fn prox_dict_is_idempotent(seed in any::<u64>(), k in prop::sample::select(vec![1usize, 3, 5])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut raw = CoeffMap::zeros(3, 6, 7);
            raw.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
            let once = prox_dict(&raw, k).unwrap();
            let twice = prox_dict(&pad_dictionary(&once, 6, 7).unwrap(), k).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
