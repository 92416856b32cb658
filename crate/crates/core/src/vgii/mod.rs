//! Visible-guided infrared inference in the coefficient domain.
//!
//! The visible image is encoded against the frozen dictionary, mapped to
//! pseudo-infrared coefficients by a [`TransferOp`], recalibrated per atom
//! and transferred again before synthesis.

mod film;
mod losses;
mod transfer;

pub use film::{
    calibrate_film, film_modulate, AffineMap, FeatureProvider, FilmParams, SemanticProvider,
};
pub use losses::{gradient_l1, inference_losses, weight_map, InferenceLosses, WEIGHT_MAP_EPS};
pub use transfer::{apply_transfer, fit_transfer, transfer_objective, TransferOp};

pub(crate) use losses::mean_abs_diff;

use crate::error::{Error, Result};
use crate::grid::{CoeffMap, Dictionary, Image};
use crate::solver::{
    prox_coeff, reconstruct_cached, solve_coeff_dc_cached, SpectrumCache, StageParams,
};

/// Runs `iters` data-consistency + soft-threshold steps from zero with the
/// dictionary held fixed (visible-branch weights `mu1`, `beta1`,
/// `lambda1`).
pub fn encode(
    img: &Image,
    dict: &Dictionary,
    params: &StageParams,
    iters: usize,
) -> Result<CoeffMap> {
    let cache = SpectrumCache::new(dict, img.height(), img.width())?;
    encode_cached(img, &cache, params, iters)
}

pub fn encode_cached(
    img: &Image,
    cache: &SpectrumCache,
    params: &StageParams,
    iters: usize,
) -> Result<CoeffMap> {
    params.validate()?;
    let mut s = CoeffMap::zeros(cache.atoms(), img.height(), img.width());
    for _ in 0..iters {
        let dc = solve_coeff_dc_cached(img, cache, &s, params.mu1)?;
        s = prox_coeff(&dc, params.lambda1, params.beta1)?;
    }
    Ok(s)
}

/// Every intermediate of one visible-to-infrared inference.
#[derive(Clone, Debug)]
pub struct IrInference {
    /// encoded visible coefficients
    pub s_vis: CoeffMap,
    /// first-pass transfer
    pub s_pir0: CoeffMap,
    pub i_pir0: Image,
    pub film: FilmParams,
    /// second-pass transfer of the modulated visible coefficients
    pub s_pir: CoeffMap,
    /// pseudo-infrared image, unclamped
    pub i_pir: Image,
}

pub fn infer_ir(
    img_vis: &Image,
    dict: &Dictionary,
    op: &TransferOp,
    provider: &SemanticProvider,
    params: &StageParams,
    iters: usize,
) -> Result<IrInference> {
    let cache = SpectrumCache::new(dict, img_vis.height(), img_vis.width())?;
    let s_vis = encode_cached(img_vis, &cache, params, iters)?;
    infer_from_coeffs(&cache, s_vis, op, provider)
}

pub(crate) fn infer_from_coeffs(
    cache: &SpectrumCache,
    s_vis: CoeffMap,
    op: &TransferOp,
    provider: &SemanticProvider,
) -> Result<IrInference> {
    if op.atoms() != cache.atoms() {
        return Err(Error::DimensionMismatch(format!(
            "transfer over {} atoms, dictionary has {}",
            op.atoms(),
            cache.atoms()
        )));
    }
    let s_pir0 = apply_transfer(op, &s_vis)?;
    let i_pir0 = reconstruct_cached(cache, &s_pir0)?;
    let film = provider.film_params(cache.atoms())?;
    let s_pir = if film.is_identity() {
        s_pir0.clone()
    } else {
        apply_transfer(op, &film_modulate(&s_vis, &film)?)?
    };
    let i_pir = reconstruct_cached(cache, &s_pir)?;
    Ok(IrInference {
        s_vis,
        s_pir0,
        i_pir0,
        film,
        s_pir,
        i_pir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{reconstruct, solve_coeff_dc};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_iterations_give_zero_code() {
        let d = Dictionary::identity(3).unwrap();
        let s = encode(&Image::filled(4, 4, 0.5), &d, &StageParams::default(), 0).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_threshold_shrinks_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Dictionary::random_unit(3, 3, &mut rng).unwrap();
        let img = Image::from_fn(8, 8, |y, x| ((y * 5 + x * 3) % 7) as f64 / 7.0);
        let params = StageParams::default();
        let first = solve_coeff_dc(&img, &d, &CoeffMap::zeros(3, 8, 8), params.mu1).unwrap();
        let params = StageParams {
            lambda1: first.max_abs() * params.beta1 * 1.01,
            ..params
        };
        let s = encode(&img, &d, &params, 1).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_provider_reuses_first_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Dictionary::random_unit(2, 3, &mut rng).unwrap();
        let img = Image::from_fn(6, 6, |y, x| ((y + x) % 3) as f64 / 3.0);
        let op = TransferOp::new(2, vec![0.5, 0.2, -0.1, 1.0], vec![0.0, 0.1], 0.0).unwrap();
        let out = infer_ir(
            &img,
            &d,
            &op,
            &SemanticProvider::Identity,
            &StageParams::default(),
            5,
        )
        .unwrap();
        assert_eq!(out.s_pir.data(), out.s_pir0.data());
    }

    #[test]
    fn identity_transfer_resynthesizes_visible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Dictionary::random_unit(2, 3, &mut rng).unwrap();
        let img = Image::from_fn(6, 6, |y, x| ((y * x) % 4) as f64 / 4.0);
        let params = StageParams::default();
        let out = infer_ir(
            &img,
            &d,
            &TransferOp::identity(2),
            &SemanticProvider::Identity,
            &params,
            8,
        )
        .unwrap();
        let resynth = reconstruct(&d, &encode(&img, &d, &params, 8).unwrap()).unwrap();
        for (a, b) in out.i_pir.data().iter().zip(resynth.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
