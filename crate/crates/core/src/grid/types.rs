use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Single-channel real raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "image {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image"));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0);
        Image {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0);
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Image {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copies out an `h`×`w` window whose top-left corner is `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Image> {
        if h == 0 || w == 0 || y0 + h > self.height || x0 + w > self.width {
            return Err(Error::DimensionMismatch(format!(
                "crop {h}x{w} at ({y0},{x0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(h, w, |y, x| self.get(y0 + y, x0 + x)))
    }

    /// Forward differences `(∂x, ∂y)` with replicate boundary, so the last
    /// column (row) has zero horizontal (vertical) difference.
    pub fn forward_differences(&self) -> (Vec<f64>, Vec<f64>) {
        let (h, w) = self.dims();
        let mut dx = vec![0.0; h * w];
        let mut dy = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let v = self.get(y, x);
                dx[y * w + x] = self.get(y, (x + 1).min(w - 1)) - v;
                dy[y * w + x] = self.get((y + 1).min(h - 1), x) - v;
            }
        }
        (dx, dy)
    }

    pub(crate) fn check_same_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// Per-atom coefficient fields, atom-major then row-major.
///
/// Also used for unconstrained full-size filters (the output of the
/// dictionary data-consistency solve before support projection).
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffMap {
    atoms: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl CoeffMap {
    pub fn new(atoms: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if atoms == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "coefficient map dimensions must be positive, got {atoms}x{height}x{width}"
            )));
        }
        if data.len() != atoms * height * width {
            return Err(Error::DimensionMismatch(format!(
                "coefficient map {atoms}x{height}x{width} needs {} values, got {}",
                atoms * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient map"));
        }
        Ok(CoeffMap {
            atoms,
            height,
            width,
            data,
        })
    }

    pub fn zeros(atoms: usize, height: usize, width: usize) -> Self {
        assert!(atoms > 0 && height > 0 && width > 0);
        CoeffMap {
            atoms,
            height,
            width,
            data: vec![0.0; atoms * height * width],
        }
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, atom: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[atom * n..(atom + 1) * n]
    }

    pub fn plane_mut(&mut self, atom: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[atom * n..(atom + 1) * n]
    }

    pub fn planes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.plane_len())
    }

    #[inline]
    pub fn get(&self, atom: usize, y: usize, x: usize) -> f64 {
        self.data[(atom * self.height + y) * self.width + x]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> CoeffMap {
        CoeffMap {
            atoms: self.atoms,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_same_dims(&self, other: &CoeffMap, what: &str) -> Result<()> {
        if (self.atoms, self.height, self.width) != (other.atoms, other.height, other.width) {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.atoms, self.height, self.width, other.atoms, other.height, other.width
            )));
        }
        Ok(())
    }
}

/// `atoms` convolutional filters with `kernel`×`kernel` support.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    atoms: usize,
    kernel: usize,
    data: Vec<f64>,
}

impl Dictionary {
    pub fn new(atoms: usize, kernel: usize, data: Vec<f64>) -> Result<Self> {
        if atoms == 0 {
            return Err(Error::InvalidParameter(
                "dictionary needs at least one atom".into(),
            ));
        }
        if kernel == 0 || kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd and positive, got {kernel}"
            )));
        }
        if data.len() != atoms * kernel * kernel {
            return Err(Error::DimensionMismatch(format!(
                "dictionary {atoms}x{kernel}x{kernel} needs {} values, got {}",
                atoms * kernel * kernel,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary"));
        }
        Ok(Dictionary {
            atoms,
            kernel,
            data,
        })
    }

    /// Random atoms with i.i.d. Gaussian entries scaled to unit norm.
    pub fn random_unit<R: Rng + ?Sized>(atoms: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        let n = kernel * kernel;
        let mut data: Vec<f64> = (0..atoms * n).map(|_| rng.sample(StandardNormal)).collect();
        for atom in data.chunks_exact_mut(n) {
            let norm = atom.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                atom.iter_mut().for_each(|v| *v /= norm);
            } else {
                atom[n / 2] = 1.0;
            }
        }
        Dictionary::new(atoms, kernel, data)
    }

    /// A single impulse atom at the anchor `(0, 0)`; convolving with it is
    /// the identity.
    pub fn identity(kernel: usize) -> Result<Self> {
        let mut data = vec![0.0; kernel * kernel];
        if let Some(v) = data.first_mut() {
            *v = 1.0;
        }
        Dictionary::new(1, kernel, data)
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        let n = self.kernel * self.kernel;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn atom_norms(&self) -> Vec<f64> {
        (0..self.atoms)
            .map(|k| self.atom(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}
