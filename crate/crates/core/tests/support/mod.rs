//! Brute-force reference computations shared by the integration and
//! acceptance tests. Nothing here goes through the FFT path.

#![allow(dead_code)]

use cscf_core::grid::{CoeffMap, Dictionary, Image};
use nalgebra::{DMatrix, DVector};

/// Naive circular convolution of a `kh`×`kw` kernel (anchored at its
/// `(0, 0)` entry) with an `h`×`w` field.
pub fn circ_conv(kernel: &[f64], kh: usize, kw: usize, s: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for u in 0..kh {
                for v in 0..kw {
                    let yy = (y + h * kh - u) % h;
                    let xx = (x + w * kw - v) % w;
                    acc += kernel[u * kw + v] * s[yy * w + xx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// `Σ_k D_k ∗ S_k` by direct summation.
pub fn naive_synthesis(dict: &Dictionary, s: &CoeffMap) -> Vec<f64> {
    let (h, w) = s.spatial_dims();
    let k = dict.kernel();
    let mut out = vec![0.0; h * w];
    for a in 0..dict.atoms() {
        let part = circ_conv(dict.atom(a), k, k, s.plane(a), h, w);
        out.iter_mut().zip(part).for_each(|(o, p)| *o += p);
    }
    out
}

/// Dense matrix of `s ↦ Σ_k D_k ∗ s_k` (`HW` × `K·HW`).
pub fn synthesis_matrix(dict: &Dictionary, h: usize, w: usize) -> DMatrix<f64> {
    let n = h * w;
    let k = dict.kernel();
    let mut m = DMatrix::zeros(n, dict.atoms() * n);
    let mut unit = vec![0.0; n];
    for a in 0..dict.atoms() {
        for j in 0..n {
            unit[j] = 1.0;
            let col = circ_conv(dict.atom(a), k, k, &unit, h, w);
            unit[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                m[(i, a * n + j)] = v;
            }
        }
    }
    m
}

/// Dense matrix of `d ↦ Σ_k d_k ∗ S_k` over full-grid filters.
pub fn filter_matrix(s: &CoeffMap) -> DMatrix<f64> {
    let (h, w) = s.spatial_dims();
    let n = h * w;
    let mut m = DMatrix::zeros(n, s.atoms() * n);
    let mut unit = vec![0.0; n];
    for a in 0..s.atoms() {
        for j in 0..n {
            unit[j] = 1.0;
            let col = circ_conv(&unit, h, w, s.plane(a), h, w);
            unit[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                m[(i, a * n + j)] = v;
            }
        }
    }
    m
}

/// Minimizer of `½‖I − D∗S‖² + (μ/2)‖S_prev − S‖²` by a dense solve of the
/// normal equations.
pub fn dense_coeff_dc(img: &Image, dict: &Dictionary, s_prev: &CoeffMap, mu: f64) -> Vec<f64> {
    let a = synthesis_matrix(dict, img.height(), img.width());
    let lhs = a.transpose() * &a + DMatrix::identity(a.ncols(), a.ncols()) * mu;
    let rhs = a.transpose() * DVector::from_column_slice(img.data())
        + DVector::from_column_slice(s_prev.data()) * mu;
    lhs.lu()
        .solve(&rhs)
        .expect("normal matrix is invertible")
        .as_slice()
        .to_vec()
}

/// Minimizer of the two-observation filter problem by a dense solve.
pub fn dense_dict_dc(obs: &[(&Image, &CoeffMap)], d_prev_padded: &CoeffMap, mu3: f64) -> Vec<f64> {
    let cols = d_prev_padded.data().len();
    let mut lhs = DMatrix::identity(cols, cols) * mu3;
    let mut rhs = DVector::from_column_slice(d_prev_padded.data()) * mu3;
    for (img, s) in obs {
        let b = filter_matrix(s);
        lhs += b.transpose() * &b;
        rhs += b.transpose() * DVector::from_column_slice(img.data());
    }
    lhs.lu()
        .solve(&rhs)
        .expect("normal matrix is invertible")
        .as_slice()
        .to_vec()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

/// Per-element brute-force evaluation of the inference losses.
pub fn brute_inference_losses(
    p: &Image,
    ir: &Image,
    sp: &CoeffMap,
    sir: &CoeffMap,
    vis: &Image,
) -> (f64, f64, f64) {
    let (h, w) = p.dims();
    let n = (h * w) as f64;
    let mut int = 0.0;
    for y in 0..h {
        for x in 0..w {
            int += (p.get(y, x) - ir.get(y, x)).abs() / n;
        }
    }
    let m = sp.data().len() as f64;
    for (a, b) in sp.data().iter().zip(sir.data()) {
        int += (a - b).abs() / m;
    }
    let lo = ir.data().iter().cloned().fold(f64::MAX, f64::min);
    let hi = ir.data().iter().cloned().fold(f64::MIN, f64::max);
    let mut reg = 0.0;
    for y in 0..h {
        for x in 0..w {
            let a = (ir.get(y, x) - lo) / (hi - lo + 1e-8);
            reg += (a * p.get(y, x) - ir.get(y, x)).abs() / n;
        }
    }
    let g = |img: &Image, y: usize, x: usize| {
        let xr = if x + 1 < w { x + 1 } else { x };
        let yd = if y + 1 < h { y + 1 } else { y };
        (
            img.get(y, xr) - img.get(y, x),
            img.get(yd, x) - img.get(y, x),
        )
    };
    let mut grad = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (px, py) = g(p, y, x);
            let (vx, vy) = g(vis, y, x);
            grad += ((px - vx).abs() + (py - vy).abs()) / (2.0 * n);
        }
    }
    (int, reg, grad)
}

/// Per-element brute-force evaluation of the fusion losses.
pub fn brute_fusion_losses(f: &Image, p: &Image, v: &Image) -> (f64, f64) {
    let (h, w) = f.dims();
    let n = (h * w) as f64;
    let g = |img: &Image, y: usize, x: usize| {
        let xr = (x + 1).min(w - 1);
        let yd = (y + 1).min(h - 1);
        (
            img.get(y, xr) - img.get(y, x),
            img.get(yd, x) - img.get(y, x),
        )
    };
    let mut int = 0.0;
    let mut grad = 0.0;
    for y in 0..h {
        for x in 0..w {
            int += (f.get(y, x) - p.get(y, x).max(v.get(y, x))).abs() / n;
            let (fx, fy) = g(f, y, x);
            let (px, py) = g(p, y, x);
            let (vx, vy) = g(v, y, x);
            grad += ((fx - px.max(vx)).abs() + (fy - py.max(vy)).abs()) / (2.0 * n);
        }
    }
    (int, grad)
}
