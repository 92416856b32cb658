//! Dictionary data-consistency solve.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{CoeffMap, Dictionary, Image};
use crate::solver::fft::Fft2d;
use crate::solver::linalg::{cholesky_packed, cholesky_solve_packed, packed_index, packed_len};

/// Per-frequency normal equations of the filter update, accumulated over any
/// number of (image, coefficients) observations.
///
/// For observation `m` and frequency `ω` this adds `conj(ŝ_m) ŝ_mᵀ` to the
/// Gram block and `conj(ŝ_m) Î_m` to the right-hand side.
pub struct DictNormalEquations {
    atoms: usize,
    height: usize,
    width: usize,
    fft: Fft2d,
    /// packed lower triangle per frequency
    gram: Vec<Complex64>,
    rhs: Vec<Complex64>,
    observations: usize,
}

impl DictNormalEquations {
    pub fn new(atoms: usize, height: usize, width: usize) -> Self {
        let n = height * width;
        DictNormalEquations {
            atoms,
            height,
            width,
            fft: Fft2d::new(height, width),
            gram: vec![Complex64::new(0.0, 0.0); n * packed_len(atoms)],
            rhs: vec![Complex64::new(0.0, 0.0); n * atoms],
            observations: 0,
        }
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn add(&mut self, img: &Image, coeffs: &CoeffMap) -> Result<()> {
        if coeffs.atoms() != self.atoms
            || coeffs.spatial_dims() != (self.height, self.width)
            || img.dims() != (self.height, self.width)
        {
            return Err(Error::DimensionMismatch(format!(
                "observation {}x{} with coefficients {}x{}x{} vs accumulator {}x{}x{}",
                img.height(),
                img.width(),
                coeffs.atoms(),
                coeffs.height(),
                coeffs.width(),
                self.atoms,
                self.height,
                self.width
            )));
        }
        let n = self.height * self.width;
        let kk = self.atoms;
        let tri = packed_len(kk);
        let img_hat = self.fft.forward_real(img.data());
        let s_hat: Vec<Vec<Complex64>> =
            coeffs.planes().map(|p| self.fft.forward_real(p)).collect();

        self.gram
            .par_chunks_mut(tri)
            .zip(self.rhs.par_chunks_mut(kk))
            .enumerate()
            .for_each(|(w, (g, r))| {
                for i in 0..kk {
                    let si = s_hat[i][w].conj();
                    for j in 0..=i {
                        g[packed_index(i, j)] += si * s_hat[j][w];
                    }
                    r[i] += si * img_hat[w];
                }
            });
        debug_assert_eq!(self.rhs.len(), n * kk);
        self.observations += 1;
        Ok(())
    }

    /// Solves `(G(ω) + μ₃I) d̂ = r(ω) + μ₃ d̂_prev(ω)` at every frequency and
    /// returns the full-grid spatial filters (`atoms`×`height`×`width`).
    pub fn solve(&self, d_prev: &Dictionary, mu3: f64) -> Result<CoeffMap> {
        if !(mu3 > 0.0 && mu3.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu3 must be positive, got {mu3}"
            )));
        }
        if d_prev.atoms() != self.atoms {
            return Err(Error::DimensionMismatch(format!(
                "previous dictionary has {} atoms, accumulator {}",
                d_prev.atoms(),
                self.atoms
            )));
        }
        let k = d_prev.kernel();
        if k > self.height || k > self.width {
            return Err(Error::DimensionMismatch(format!(
                "kernel {k} larger than grid {}x{}",
                self.height, self.width
            )));
        }
        let n = self.height * self.width;
        let kk = self.atoms;
        let tri = packed_len(kk);
        let prev_hat: Vec<Vec<Complex64>> = (0..kk)
            .map(|a| self.fft.forward_padded(d_prev.atom(a), k))
            .collect();

        let mut solved = vec![Complex64::new(0.0, 0.0); n * kk];
        solved.par_chunks_mut(kk).enumerate().for_each(|(w, x)| {
            let mut a = self.gram[w * tri..(w + 1) * tri].to_vec();
            for i in 0..kk {
                a[packed_index(i, i)] += mu3;
                x[i] = self.rhs[w * kk + i] + prev_hat[i][w] * mu3;
            }
            let ok = cholesky_packed(&mut a, kk);
            assert!(ok, "Gram + μ₃I must be positive definite for μ₃ > 0");
            cholesky_solve_packed(&a, kk, x);
        });

        let mut data = Vec::with_capacity(n * kk);
        for i in 0..kk {
            let plane: Vec<Complex64> = (0..n).map(|w| solved[w * kk + i]).collect();
            data.extend(self.fft.inverse_real(plane));
        }
        CoeffMap::new(kk, self.height, self.width, data)
    }
}

/// Exact minimizer of
/// `½‖I_vis − D'∗S_vis‖² + ½‖I_ir − D'∗S_ir‖² + (μ₃/2)‖D_prev − D'‖²`
/// over unconstrained full-grid filters `D'`.
pub fn solve_dict_dc(
    i_vis: &Image,
    i_ir: &Image,
    s_vis: &CoeffMap,
    s_ir: &CoeffMap,
    d_prev: &Dictionary,
    mu3: f64,
) -> Result<CoeffMap> {
    s_vis.check_same_dims(s_ir, "dictionary update")?;
    let mut eqs = DictNormalEquations::new(s_vis.atoms(), s_vis.height(), s_vis.width());
    eqs.add(i_vis, s_vis)?;
    eqs.add(i_ir, s_ir)?;
    eqs.solve(d_prev, mu3)
}

/// Zero-pads each atom into an `height`×`width` grid, top-left anchored.
pub fn pad_dictionary(dict: &Dictionary, height: usize, width: usize) -> Result<CoeffMap> {
    let k = dict.kernel();
    if k > height || k > width {
        return Err(Error::DimensionMismatch(format!(
            "kernel {k} larger than grid {height}x{width}"
        )));
    }
    let mut out = CoeffMap::zeros(dict.atoms(), height, width);
    for a in 0..dict.atoms() {
        let atom = dict.atom(a);
        let plane = out.plane_mut(a);
        for u in 0..k {
            plane[u * width..u * width + k].copy_from_slice(&atom[u * k..(u + 1) * k]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_coefficients_return_padded_previous() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = Dictionary::random_unit(3, 3, &mut rng).unwrap();
        let img = Image::from_fn(6, 7, |_, _| rng.random());
        let z = CoeffMap::zeros(3, 6, 7);
        let out = solve_dict_dc(&img, &img, &z, &z, &d, 2.5).unwrap();
        let padded = pad_dictionary(&d, 6, 7).unwrap();
        for (a, b) in out.data().iter().zip(padded.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_delta_case() {
        // K=1, S = delta at origin: d̂' = (2Î + d̂_prev) / 3 per bin, so the
        // same relation holds in the spatial domain.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = Dictionary::random_unit(1, 3, &mut rng).unwrap();
        let img = Image::from_fn(5, 5, |_, _| rng.random());
        let mut s = CoeffMap::zeros(1, 5, 5);
        s.data_mut()[0] = 1.0;
        let out = solve_dict_dc(&img, &img, &s, &s, &d, 1.0).unwrap();
        let padded = pad_dictionary(&d, 5, 5).unwrap();
        for i in 0..25 {
            let want = (2.0 * img.data()[i] + padded.data()[i]) / 3.0;
            assert!((out.data()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_mu_and_dims() {
        let d = Dictionary::identity(3).unwrap();
        let img = Image::filled(4, 4, 0.1);
        let s = CoeffMap::zeros(1, 4, 4);
        assert!(solve_dict_dc(&img, &img, &s, &s, &d, 0.0).is_err());
        let s2 = CoeffMap::zeros(2, 4, 4);
        assert!(solve_dict_dc(&img, &img, &s, &s2, &d, 1.0).is_err());
    }
}
