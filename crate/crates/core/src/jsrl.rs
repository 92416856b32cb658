//! Joint shared-dictionary learning over paired visible/infrared images.
//!
//! One block updates both coefficient maps (data-consistency solve followed
//! by soft-thresholding) and then the shared dictionary (Cholesky
//! data-consistency solve followed by support projection and
//! normalization). The dictionary update aggregates every pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{CoeffMap, Dictionary, Image};
use crate::solver::{
    prox_coeff, prox_dict, reconstruct_cached, solve_coeff_dc_cached, DictNormalEquations,
    SpectrumCache, StageParams, StageSchedule,
};
use crate::synth::psnr;

#[derive(Clone, Debug, PartialEq)]
pub enum DictInit {
    RandomUnit,
    Provided(Dictionary),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JsrlConfig {
    pub atoms: usize,
    pub kernel: usize,
    pub inner_blocks: usize,
    pub outer_iters: usize,
    pub schedule: StageSchedule,
    pub seed: u64,
    pub init: DictInit,
}

impl Default for JsrlConfig {
    fn default() -> Self {
        JsrlConfig {
            atoms: 32,
            kernel: 5,
            inner_blocks: 1,
            outer_iters: 50,
            schedule: StageSchedule::default(),
            seed: 0,
            init: DictInit::RandomUnit,
        }
    }
}

impl JsrlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.atoms == 0 {
            return Err(Error::InvalidParameter("atoms must be at least 1".into()));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel must be odd, got {}",
                self.kernel
            )));
        }
        if self.inner_blocks == 0 {
            return Err(Error::InvalidParameter(
                "inner_blocks must be at least 1".into(),
            ));
        }
        if let DictInit::Provided(d) = &self.init {
            if d.atoms() != self.atoms || d.kernel() != self.kernel {
                return Err(Error::DimensionMismatch(format!(
                    "provided dictionary is {}x{}x{}, config asks for {}x{}x{}",
                    d.atoms(),
                    d.kernel(),
                    d.kernel(),
                    self.atoms,
                    self.kernel,
                    self.kernel
                )));
            }
        }
        self.schedule.validate()
    }

    pub fn initial_dictionary(&self) -> Result<Dictionary> {
        match &self.init {
            DictInit::Provided(d) => Ok(d.clone()),
            DictInit::RandomUnit => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Dictionary::random_unit(self.atoms, self.kernel, &mut rng)
            }
        }
    }
}

/// Mean absolute reconstruction residuals of one block.
///
/// `ell_s` uses the dictionary before the block's dictionary update,
/// `ell_d` the one after; each sums the visible and infrared terms, each
/// term a per-pixel mean. `psnr` is the mean reconstruction PSNR over both
/// modalities with the updated dictionary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    pub ell_s: f64,
    pub ell_d: f64,
    pub psnr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub dict: Dictionary,
    pub coeffs: Vec<(CoeffMap, CoeffMap)>,
    pub history: Vec<Residuals>,
}

impl TrainState {
    /// Zero coefficients for every pair.
    pub fn new(dict: Dictionary, pairs: &[(Image, Image)]) -> Self {
        let coeffs = pairs
            .iter()
            .map(|(v, _)| {
                let z = CoeffMap::zeros(dict.atoms(), v.height(), v.width());
                (z.clone(), z)
            })
            .collect();
        TrainState {
            dict,
            coeffs,
            history: Vec::new(),
        }
    }
}

fn mean_abs_residual(rec: &Image, img: &Image) -> f64 {
    rec.data()
        .iter()
        .zip(img.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / img.len() as f64
}

fn check_pairs(pairs: &[(Image, Image)]) -> Result<(usize, usize)> {
    let (first, _) = pairs.first().ok_or(Error::EmptyTrainingSet)?;
    let dims = first.dims();
    for (i, (v, r)) in pairs.iter().enumerate() {
        if v.dims() != dims || r.dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "pair {i} is {}x{} / {}x{}, expected {}x{}",
                v.height(),
                v.width(),
                r.height(),
                r.width(),
                dims.0,
                dims.1
            )));
        }
    }
    Ok(dims)
}

/// One full-batch block over all pairs.
pub fn ivdlb_sweep(
    pairs: &[(Image, Image)],
    mut state: TrainState,
    params: &StageParams,
) -> Result<TrainState> {
    params.validate()?;
    let (h, w) = check_pairs(pairs)?;
    if state.coeffs.len() != pairs.len() {
        return Err(Error::DimensionMismatch(format!(
            "state holds {} coefficient pairs for {} image pairs",
            state.coeffs.len(),
            pairs.len()
        )));
    }
    let k = state.dict.kernel();
    let cache = SpectrumCache::new(&state.dict, h, w)?;

    // coefficient updates are independent per pair
    let updated: Vec<(CoeffMap, CoeffMap, f64)> = pairs
        .par_iter()
        .zip(state.coeffs.par_iter())
        .map(|((vis, ir), (s_vis, s_ir))| {
            let s_vis = solve_coeff_dc_cached(vis, &cache, s_vis, params.mu1)?;
            let s_vis = prox_coeff(&s_vis, params.lambda1, params.beta1)?;
            let s_ir = solve_coeff_dc_cached(ir, &cache, s_ir, params.mu2)?;
            let s_ir = prox_coeff(&s_ir, params.lambda2, params.beta2)?;
            let ell_s = mean_abs_residual(&reconstruct_cached(&cache, &s_vis)?, vis)
                + mean_abs_residual(&reconstruct_cached(&cache, &s_ir)?, ir);
            Ok((s_vis, s_ir, ell_s))
        })
        .collect::<Result<_>>()?;

    let mut eqs = DictNormalEquations::new(state.dict.atoms(), h, w);
    let mut ell_s = 0.0;
    state.coeffs.clear();
    for ((vis, ir), (s_vis, s_ir, ls)) in pairs.iter().zip(updated) {
        eqs.add(vis, &s_vis)?;
        eqs.add(ir, &s_ir)?;
        ell_s += ls;
        state.coeffs.push((s_vis, s_ir));
    }
    let raw = eqs.solve(&state.dict, params.mu3)?;
    state.dict = prox_dict(&raw, k)?;

    let cache = SpectrumCache::new(&state.dict, h, w)?;
    let scores: Vec<(f64, f64)> = pairs
        .par_iter()
        .zip(state.coeffs.par_iter())
        .map(|((vis, ir), (s_vis, s_ir))| {
            let rv = reconstruct_cached(&cache, s_vis)?;
            let ri = reconstruct_cached(&cache, s_ir)?;
            Ok((
                mean_abs_residual(&rv, vis) + mean_abs_residual(&ri, ir),
                0.5 * (psnr(&rv, vis) + psnr(&ri, ir)),
            ))
        })
        .collect::<Result<_>>()?;
    let n = pairs.len() as f64;
    let ell_d = scores.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_psnr = scores.iter().map(|s| s.1).sum::<f64>() / n;
    let residuals = Residuals {
        ell_s: ell_s / n,
        ell_d,
        psnr: mean_psnr,
    };
    debug_assert!(residuals.ell_s.is_finite() && residuals.ell_d.is_finite());
    state.history.push(residuals);
    Ok(state)
}

/// One block on a single pair: visible coefficients, infrared coefficients,
/// then the shared dictionary.
pub fn ivdlb_step(
    pair: (&Image, &Image),
    state: TrainState,
    params: &StageParams,
) -> Result<TrainState> {
    ivdlb_sweep(&[(pair.0.clone(), pair.1.clone())], state, params)
}

/// Runs `cfg.outer_iters` sweeps of `cfg.inner_blocks` blocks each and
/// returns the final dictionary with one residual record per sweep (taken
/// from its last block).
pub fn learn_dictionary(
    pairs: &[(Image, Image)],
    cfg: &JsrlConfig,
) -> Result<(Dictionary, Vec<Residuals>)> {
    learn_dictionary_with(pairs, cfg, |_, _| Ok(()))
}

/// [`learn_dictionary`] with a callback after every sweep, e.g. for
/// checkpointing.
pub fn learn_dictionary_with(
    pairs: &[(Image, Image)],
    cfg: &JsrlConfig,
    mut on_sweep: impl FnMut(usize, &TrainState) -> Result<()>,
) -> Result<(Dictionary, Vec<Residuals>)> {
    cfg.validate()?;
    check_pairs(pairs)?;
    let mut state = TrainState::new(cfg.initial_dictionary()?, pairs);
    let mut per_sweep = Vec::with_capacity(cfg.outer_iters);
    for sweep in 0..cfg.outer_iters {
        for block in 0..cfg.inner_blocks {
            state = ivdlb_sweep(pairs, state, &cfg.schedule.at(block))?;
        }
        per_sweep.push(*state.history.last().expect("at least one block ran"));
        on_sweep(sweep, &state)?;
    }
    Ok((state.dict, per_sweep))
}
