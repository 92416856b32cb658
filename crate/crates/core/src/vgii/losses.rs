use crate::error::Result;
use crate::grid::{CoeffMap, Image};

/// Offset in the min-max normalization of the infrared weighting map.
pub const WEIGHT_MAP_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InferenceLosses {
    pub int: f64,
    pub reg: f64,
    pub grad: f64,
    pub total: f64,
}

pub(crate) fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Min-max normalized infrared intensities, `(I − min)/(max − min + ε)`.
pub fn weight_map(i_ir: &Image) -> Image {
    let (lo, hi) = (i_ir.min(), i_ir.max());
    let denom = hi - lo + WEIGHT_MAP_EPS;
    i_ir.map(|v| (v - lo) / denom)
}

/// Mean absolute difference of forward-difference gradients over both
/// directions (`2·H·W` components).
pub fn gradient_l1(a: &Image, b: &Image) -> f64 {
    let (ax, ay) = a.forward_differences();
    let (bx, by) = b.forward_differences();
    0.5 * (mean_abs_diff(&ax, &bx) + mean_abs_diff(&ay, &by))
}

/// Intensity/coefficient consistency, thermal weighting and edge terms of
/// the inference objective; every L1 term is a per-element mean.
pub fn inference_losses(
    i_p_ir: &Image,
    i_ir: &Image,
    s_p_ir: &CoeffMap,
    s_ir: &CoeffMap,
    i_vis: &Image,
) -> Result<InferenceLosses> {
    i_p_ir.check_same_dims(i_ir, "inference losses")?;
    i_p_ir.check_same_dims(i_vis, "inference losses")?;
    s_p_ir.check_same_dims(s_ir, "inference losses")?;
    let int = mean_abs_diff(i_p_ir.data(), i_ir.data()) + mean_abs_diff(s_p_ir.data(), s_ir.data());
    let a = weight_map(i_ir);
    let reg = a
        .data()
        .iter()
        .zip(i_p_ir.data())
        .zip(i_ir.data())
        .map(|((w, p), r)| (w * p - r).abs())
        .sum::<f64>()
        / i_ir.len() as f64;
    let grad = gradient_l1(i_p_ir, i_vis);
    Ok(InferenceLosses {
        int,
        reg,
        grad,
        total: int + reg + grad,
    })
}
