//! Atom-wise gated fusion of visible and pseudo-infrared coefficients.

use crate::error::{Error, Result};
use crate::grid::{CoeffMap, Dictionary, Image};
use crate::metrics::{metric_report, MetricReport};
use crate::solver::{reconstruct_cached, SpectrumCache, StageParams};
use crate::vgii::{
    encode_cached, gradient_l1, infer_from_coeffs, mean_abs_diff, SemanticProvider, TransferOp,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateConfig {
    pub window: usize,
    pub temperature: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            window: 7,
            temperature: 1.0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "gate window must be odd, got {}",
                self.window
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gate temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionWeights {
    pub w_vis: CoeffMap,
    pub w_pir: CoeffMap,
}

/// Local mean of `|s|` over a `window`×`window` neighbourhood per atom,
/// replicate boundary.
pub fn local_saliency(s: &CoeffMap, window: usize) -> CoeffMap {
    let (h, w) = s.spatial_dims();
    let r = (window / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut out = CoeffMap::zeros(s.atoms(), h, w);
    let mut rows = vec![0.0; h * w];
    for k in 0..s.atoms() {
        let plane = s.plane(k);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    acc += plane[y * w + clamp(x as isize + d, w)].abs();
                }
                rows[y * w + x] = acc;
            }
        }
        let dst = out.plane_mut(k);
        let norm = (window * window) as f64;
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for d in -r..=r {
                    acc += rows[clamp(y as isize + d, h) * w + x];
                }
                dst[y * w + x] = acc / norm;
            }
        }
    }
    out
}

/// Two-way softmax of local saliencies at temperature `τ`.
pub fn gate(s_vis: &CoeffMap, s_pir: &CoeffMap, cfg: &GateConfig) -> Result<FusionWeights> {
    cfg.validate()?;
    s_vis.check_same_dims(s_pir, "gate")?;
    let sal_vis = local_saliency(s_vis, cfg.window);
    let sal_pir = local_saliency(s_pir, cfg.window);
    let mut w_vis = sal_vis.clone();
    let mut w_pir = sal_pir;
    for (wv, wp) in w_vis.data_mut().iter_mut().zip(w_pir.data_mut()) {
        // σ((a − b)/τ); an exact tie gives exp(0) = 1 and hence 0.5/0.5
        let v = 1.0 / (1.0 + ((*wp - *wv) / cfg.temperature).exp());
        *wv = v;
        *wp = 1.0 - v;
    }
    debug_assert!(w_vis
        .data()
        .iter()
        .zip(w_pir.data())
        .all(|(a, b)| (a + b - 1.0).abs() <= 1e-6 && (0.0..=1.0).contains(a)));
    Ok(FusionWeights { w_vis, w_pir })
}

/// Elementwise convex combination `W_vis ⊙ S_vis + W_pir ⊙ S_pir`.
pub fn fuse(s_vis: &CoeffMap, s_pir: &CoeffMap, weights: &FusionWeights) -> Result<CoeffMap> {
    s_vis.check_same_dims(s_pir, "fuse")?;
    s_vis.check_same_dims(&weights.w_vis, "fuse weights")?;
    s_vis.check_same_dims(&weights.w_pir, "fuse weights")?;
    let mut out = s_vis.clone();
    let it = out
        .data_mut()
        .iter_mut()
        .zip(s_pir.data())
        .zip(weights.w_vis.data().iter().zip(weights.w_pir.data()));
    for ((o, &b), (&wa, &wb)) in it {
        let a = *o;
        if a != b {
            // rounding may leave the branch envelope by an ulp
            *o = (wa * a + wb * b).clamp(a.min(b), a.max(b));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionLosses {
    pub int: f64,
    pub grad: f64,
    pub total: f64,
}

/// Distance of the fused image (and its gradients) to the elementwise max
/// of the two sources; per-element means.
pub fn fusion_losses(i_f: &Image, i_p_ir: &Image, i_vis: &Image) -> Result<FusionLosses> {
    i_f.check_same_dims(i_p_ir, "fusion losses")?;
    i_f.check_same_dims(i_vis, "fusion losses")?;
    let target: Vec<f64> = i_p_ir
        .data()
        .iter()
        .zip(i_vis.data())
        .map(|(a, b)| a.max(*b))
        .collect();
    let int = mean_abs_diff(i_f.data(), &target);
    let (fx, fy) = i_f.forward_differences();
    let (px, py) = i_p_ir.forward_differences();
    let (vx, vy) = i_vis.forward_differences();
    let max_x: Vec<f64> = px.iter().zip(&vx).map(|(a, b)| a.max(*b)).collect();
    let max_y: Vec<f64> = py.iter().zip(&vy).map(|(a, b)| a.max(*b)).collect();
    let grad = 0.5 * (mean_abs_diff(&fx, &max_x) + mean_abs_diff(&fy, &max_y));
    Ok(FusionLosses {
        int,
        grad,
        total: int + grad,
    })
}

/// Diagnostics available without a real infrared image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionReport {
    /// edge alignment of the pseudo-infrared image with the visible input
    pub inf_grad: f64,
    pub fusion: FusionLosses,
    pub metrics: MetricReport,
}

/// Everything produced by [`fuse_pipeline`]; images are unclamped.
#[derive(Clone, Debug)]
pub struct FusionOutput {
    pub fused: Image,
    pub pseudo_ir: Image,
    pub s_fused: CoeffMap,
    pub weights: FusionWeights,
    pub report: FusionReport,
}

/// Encode, infer pseudo-infrared coefficients, gate, fuse, reconstruct.
#[allow(clippy::too_many_arguments)]
pub fn fuse_pipeline(
    i_vis: &Image,
    dict: &Dictionary,
    op: &TransferOp,
    provider: &SemanticProvider,
    gate_cfg: &GateConfig,
    params: &StageParams,
    iters: usize,
) -> Result<FusionOutput> {
    let cache = SpectrumCache::new(dict, i_vis.height(), i_vis.width())?;
    let s_vis = encode_cached(i_vis, &cache, params, iters)?;
    let inf = infer_from_coeffs(&cache, s_vis, op, provider)?;
    let weights = gate(&inf.s_vis, &inf.s_pir, gate_cfg)?;
    let s_fused = fuse(&inf.s_vis, &inf.s_pir, &weights)?;
    let fused = reconstruct_cached(&cache, &s_fused)?;
    let report = FusionReport {
        inf_grad: gradient_l1(&inf.i_pir, i_vis),
        fusion: fusion_losses(&fused, &inf.i_pir, i_vis)?,
        metrics: metric_report(&fused)?,
    };
    Ok(FusionOutput {
        fused,
        pseudo_ir: inf.i_pir,
        s_fused,
        weights,
        report,
    })
}
