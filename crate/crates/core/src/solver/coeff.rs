//! Coefficient data-consistency solve and dictionary synthesis.
//!
//! All convolutions are circular; atom `(0, 0)` sits at grid `(0, 0)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{CoeffMap, Dictionary, Image};
use crate::solver::fft::Fft2d;
use crate::solver::linalg::{cholesky_packed, cholesky_solve_packed, packed_index, packed_len};

/// Atom spectra on a fixed grid together with their per-frequency energy.
#[derive(Clone)]
pub struct SpectrumCache {
    atoms: usize,
    height: usize,
    width: usize,
    fft: Fft2d,
    /// `atoms` consecutive grids of `height * width` bins.
    atom_spectra: Vec<Complex64>,
    /// `Σ_k |D̂_k(ω)|²`
    energy: Vec<f64>,
}

impl SpectrumCache {
    pub fn new(dict: &Dictionary, height: usize, width: usize) -> Result<Self> {
        let k = dict.kernel();
        if k > height || k > width {
            return Err(Error::DimensionMismatch(format!(
                "kernel {k} larger than grid {height}x{width}"
            )));
        }
        let fft = Fft2d::new(height, width);
        let n = height * width;
        let mut atom_spectra = Vec::with_capacity(dict.atoms() * n);
        for a in 0..dict.atoms() {
            atom_spectra.extend(fft.forward_padded(dict.atom(a), k));
        }
        let mut energy = vec![0.0; n];
        for spec in atom_spectra.chunks_exact(n) {
            for (e, c) in energy.iter_mut().zip(spec) {
                *e += c.norm_sqr();
            }
        }
        Ok(SpectrumCache {
            atoms: dict.atoms(),
            height,
            width,
            fft,
            atom_spectra,
            energy,
        })
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn fft(&self) -> &Fft2d {
        &self.fft
    }

    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn atom_spectrum(&self, k: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.atom_spectra[k * n..(k + 1) * n]
    }

    fn check(&self, img: &Image, s_prev: &CoeffMap) -> Result<()> {
        if img.dims() != (self.height, self.width) {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} vs spectrum grid {}x{}",
                img.height(),
                img.width(),
                self.height,
                self.width
            )));
        }
        if s_prev.atoms() != self.atoms || s_prev.spatial_dims() != (self.height, self.width) {
            return Err(Error::DimensionMismatch(format!(
                "coefficients {}x{}x{} vs dictionary {} atoms on {}x{}",
                s_prev.atoms(),
                s_prev.height(),
                s_prev.width(),
                self.atoms,
                self.height,
                self.width
            )));
        }
        Ok(())
    }

    fn coeff_spectra(&self, s: &CoeffMap) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(s.data().len());
        for plane in s.planes() {
            out.extend(self.fft.forward_real(plane));
        }
        out
    }

    fn to_coeff_map(&self, spectra: Vec<Complex64>) -> Result<CoeffMap> {
        let n = self.height * self.width;
        let mut data = Vec::with_capacity(self.atoms * n);
        for plane in spectra.chunks_exact(n) {
            data.extend(self.fft.inverse_real(plane.to_vec()));
        }
        CoeffMap::new(self.atoms, self.height, self.width, data)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "coupling weight must be positive, got {mu}"
        )));
    }
    Ok(())
}

/// Exact minimizer of `½‖I − D∗S‖² + (μ/2)‖S_prev − S‖²`.
pub fn solve_coeff_dc(
    img: &Image,
    dict: &Dictionary,
    s_prev: &CoeffMap,
    mu: f64,
) -> Result<CoeffMap> {
    let cache = SpectrumCache::new(dict, img.height(), img.width())?;
    solve_coeff_dc_cached(img, &cache, s_prev, mu)
}

/// [`solve_coeff_dc`] against precomputed atom spectra.
///
/// Per frequency the normal matrix is the rank-one update `μI + v vᴴ` with
/// `v = conj(D̂(ω))`, inverted in closed form by Sherman–Morrison.
pub fn solve_coeff_dc_cached(
    img: &Image,
    cache: &SpectrumCache,
    s_prev: &CoeffMap,
    mu: f64,
) -> Result<CoeffMap> {
    check_mu(mu)?;
    cache.check(img, s_prev)?;
    let n = cache.height * cache.width;
    let kk = cache.atoms;
    let img_hat = cache.fft.forward_real(img.data());
    let mut spec = cache.coeff_spectra(s_prev);
    let inv_mu = 1.0 / mu;
    let mut b = vec![Complex64::new(0.0, 0.0); kk];

    for w in 0..n {
        let mut proj = Complex64::new(0.0, 0.0);
        for k in 0..kk {
            let a = cache.atom_spectra[k * n + w];
            b[k] = a.conj() * img_hat[w] + spec[k * n + w] * mu;
            proj += a * b[k];
        }
        let scale = proj / (mu + cache.energy[w]);
        for k in 0..kk {
            let a = cache.atom_spectra[k * n + w];
            spec[k * n + w] = (b[k] - a.conj() * scale) * inv_mu;
        }
    }
    cache.to_coeff_map(spec)
}

/// Same minimizer as [`solve_coeff_dc_cached`], computed with an explicit
/// per-frequency Cholesky factorization of `D̂D̂ᴴ + μI`. Used to cross-check
/// the rank-one path.
pub fn solve_coeff_dc_cholesky(
    img: &Image,
    cache: &SpectrumCache,
    s_prev: &CoeffMap,
    mu: f64,
) -> Result<CoeffMap> {
    check_mu(mu)?;
    cache.check(img, s_prev)?;
    let n = cache.height * cache.width;
    let kk = cache.atoms;
    let img_hat = cache.fft.forward_real(img.data());
    let mut spec = cache.coeff_spectra(s_prev);
    let mut a = vec![Complex64::new(0.0, 0.0); packed_len(kk)];
    let mut b = vec![Complex64::new(0.0, 0.0); kk];

    for w in 0..n {
        for i in 0..kk {
            let di = cache.atom_spectra[i * n + w];
            for j in 0..=i {
                let dj = cache.atom_spectra[j * n + w];
                a[packed_index(i, j)] = di.conj() * dj;
            }
            a[packed_index(i, i)] += mu;
            b[i] = di.conj() * img_hat[w] + spec[i * n + w] * mu;
        }
        assert!(cholesky_packed(&mut a, kk), "μI + vvᴴ is positive definite");
        cholesky_solve_packed(&a, kk, &mut b);
        for k in 0..kk {
            spec[k * n + w] = b[k];
        }
    }
    cache.to_coeff_map(spec)
}

/// `Σ_k D_k ∗ S_k`.
pub fn reconstruct(dict: &Dictionary, coeffs: &CoeffMap) -> Result<Image> {
    let cache = SpectrumCache::new(dict, coeffs.height(), coeffs.width())?;
    reconstruct_cached(&cache, coeffs)
}

pub fn reconstruct_cached(cache: &SpectrumCache, coeffs: &CoeffMap) -> Result<Image> {
    if coeffs.atoms() != cache.atoms || coeffs.spatial_dims() != cache.dims() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients {}x{}x{} vs dictionary {} atoms on {}x{}",
            coeffs.atoms(),
            coeffs.height(),
            coeffs.width(),
            cache.atoms,
            cache.height,
            cache.width
        )));
    }
    let n = cache.height * cache.width;
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for (k, plane) in coeffs.planes().enumerate() {
        let s_hat = cache.fft.forward_real(plane);
        for ((o, d), s) in acc.iter_mut().zip(cache.atom_spectrum(k)).zip(&s_hat) {
            *o += d * s;
        }
    }
    Image::new(cache.height, cache.width, cache.fft.inverse_real(acc))
}

/// `½‖I − D∗S‖² + (μ/2)‖S_prev − S‖²` evaluated in the spatial domain.
pub fn coeff_dc_objective(
    img: &Image,
    dict: &Dictionary,
    s: &CoeffMap,
    s_prev: &CoeffMap,
    mu: f64,
) -> Result<f64> {
    s.check_same_dims(s_prev, "coefficient objective")?;
    let rec = reconstruct(dict, s)?;
    img.check_same_dims(&rec, "coefficient objective")?;
    let fit: f64 = img
        .data()
        .iter()
        .zip(rec.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let prox: f64 = s
        .data()
        .iter()
        .zip(s_prev.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(0.5 * fit + 0.5 * mu * prox)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, k: usize, h: usize, w: usize) -> CoeffMap {
        let data = (0..k * h * w)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        CoeffMap::new(k, h, w, data).unwrap()
    }

    #[test]
    fn delta_atom_constant_image_gives_half() {
        let d = Dictionary::identity(3).unwrap();
        let img = Image::filled(5, 5, 0.8);
        let s = solve_coeff_dc(&img, &d, &CoeffMap::zeros(1, 5, 5), 1.0).unwrap();
        for v in s.data() {
            assert!((v - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_mu_keeps_previous() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Dictionary::random_unit(3, 3, &mut rng).unwrap();
        let img = Image::from_fn(7, 6, |_, _| rng.random());
        let prev = random_map(&mut rng, 3, 7, 6);
        let s = solve_coeff_dc(&img, &d, &prev, 1e8).unwrap();
        let scale = prev.max_abs();
        for (a, b) in s.data().iter().zip(prev.data()) {
            assert!((a - b).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn energy_matches_atom_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Dictionary::random_unit(4, 5, &mut rng).unwrap();
        let c = SpectrumCache::new(&d, 8, 9).unwrap();
        for w in 0..72 {
            let direct: f64 = (0..4).map(|k| c.atom_spectrum(k)[w].norm_sqr()).sum();
            assert!(c.energy()[w] >= 0.0);
            assert!((direct - c.energy()[w]).abs() <= 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn sherman_morrison_matches_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Dictionary::random_unit(4, 3, &mut rng).unwrap();
        let img = Image::from_fn(8, 10, |_, _| rng.random());
        let prev = random_map(&mut rng, 4, 8, 10);
        let cache = SpectrumCache::new(&d, 8, 10).unwrap();
        let a = solve_coeff_dc_cached(&img, &cache, &prev, 0.3).unwrap();
        let b = solve_coeff_dc_cholesky(&img, &cache, &prev, 0.3).unwrap();
        let num: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        let den: f64 = b.data().iter().map(|y| y * y).sum();
        assert!((num / den).sqrt() < 1e-9);
    }

    #[test]
    fn objective_does_not_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = Dictionary::random_unit(2, 3, &mut rng).unwrap();
        let img = Image::from_fn(6, 6, |_, _| rng.random());
        let prev = random_map(&mut rng, 2, 6, 6);
        let mu = 0.5;
        let s = solve_coeff_dc(&img, &d, &prev, mu).unwrap();
        let best = coeff_dc_objective(&img, &d, &s, &prev, mu).unwrap();
        assert!(best <= coeff_dc_objective(&img, &d, &prev, &prev, mu).unwrap());
        for _ in 0..20 {
            let pert = s.map(|v| v + rng.random_range(-1e-3..1e-3));
            assert!(best <= coeff_dc_objective(&img, &d, &pert, &prev, mu).unwrap());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = Dictionary::identity(3).unwrap();
        let img = Image::filled(4, 4, 0.0);
        assert!(solve_coeff_dc(&img, &d, &CoeffMap::zeros(1, 4, 4), 0.0).is_err());
        assert!(solve_coeff_dc(&img, &d, &CoeffMap::zeros(2, 4, 4), 1.0).is_err());
        assert!(solve_coeff_dc(&img, &d, &CoeffMap::zeros(1, 4, 5), 1.0).is_err());
    }

    #[test]
    fn reconstruct_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_map(&mut rng, 1, 5, 4);
        let rec = reconstruct(&Dictionary::identity(3).unwrap(), &s).unwrap();
        for (a, b) in rec.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = Dictionary::random_unit(3, 3, &mut rng).unwrap();
        let zero = reconstruct(&d, &CoeffMap::zeros(3, 5, 4)).unwrap();
        assert!(zero.data().iter().all(|v| v.abs() < 1e-15));
    }
}
