//! Planted test data: known dictionaries, sparse codes and linear modality
//! maps, used by tests and the `synth` CLI command.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::grid::{CoeffMap, Dictionary, Image};
use crate::solver::reconstruct;

/// Sparse coefficients: each entry is active with probability `density`,
/// with magnitude uniform in `[0.5, 1]` and a random sign unless
/// `nonnegative`.
pub fn sparse_coefficients<R: Rng + ?Sized>(
    atoms: usize,
    height: usize,
    width: usize,
    density: f64,
    nonnegative: bool,
    rng: &mut R,
) -> CoeffMap {
    let mut s = CoeffMap::zeros(atoms, height, width);
    for v in s.data_mut() {
        if rng.random::<f64>() < density {
            let mag = rng.random_range(0.5..=1.0);
            *v = if nonnegative || rng.random::<bool>() {
                mag
            } else {
                -mag
            };
        }
    }
    s
}

/// Unit-norm atoms with nonnegative entries (absolute Gaussian draws).
pub fn nonnegative_dictionary<R: Rng + ?Sized>(
    atoms: usize,
    kernel: usize,
    rng: &mut R,
) -> Result<Dictionary> {
    let n = kernel * kernel;
    let mut data: Vec<f64> = (0..atoms * n)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    for atom in data.chunks_exact_mut(n) {
        let norm = atom.iter().map(|v| v * v).sum::<f64>().sqrt();
        atom.iter_mut().for_each(|v| *v /= norm);
    }
    Dictionary::new(atoms, kernel, data)
}

/// Random `atoms`×`atoms` mixing matrix, row-major, `I + scale·G`.
pub fn mixing_matrix<R: Rng + ?Sized>(atoms: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    let mut m = vec![0.0; atoms * atoms];
    for i in 0..atoms {
        for j in 0..atoms {
            let g: f64 = rng.sample(StandardNormal);
            m[i * atoms + j] = if i == j { 1.0 } else { 0.0 } + scale * g;
        }
    }
    m
}

/// Applies a row-major `atoms`×`atoms` matrix and bias at every pixel.
pub fn mix_coefficients(s: &CoeffMap, mix: &[f64], bias: &[f64]) -> CoeffMap {
    let k = s.atoms();
    let n = s.plane_len();
    let mut out = CoeffMap::zeros(k, s.height(), s.width());
    let data = out.data_mut();
    for i in 0..k {
        for p in 0..n {
            let mut acc = bias[i];
            for j in 0..k {
                acc += mix[i * k + j] * s.data()[j * n + p];
            }
            data[i * n + p] = acc;
        }
    }
    out
}

/// A planted visible/infrared pair sharing one dictionary.
#[derive(Clone, Debug)]
pub struct PlantedPair {
    pub vis: Image,
    pub ir: Image,
    pub s_vis: CoeffMap,
    pub s_ir: CoeffMap,
}

/// Pairs whose visible and infrared images are both sparse syntheses from
/// `dict` with independent codes.
pub fn planted_pairs<R: Rng + ?Sized>(
    dict: &Dictionary,
    count: usize,
    height: usize,
    width: usize,
    density: f64,
    rng: &mut R,
) -> Result<Vec<PlantedPair>> {
    (0..count)
        .map(|_| {
            let s_vis = sparse_coefficients(dict.atoms(), height, width, density, false, rng);
            let s_ir = sparse_coefficients(dict.atoms(), height, width, density, false, rng);
            Ok(PlantedPair {
                vis: reconstruct(dict, &s_vis)?,
                ir: reconstruct(dict, &s_ir)?,
                s_vis,
                s_ir,
            })
        })
        .collect()
}

/// Pairs whose infrared code is a fixed linear mix of the visible code.
#[allow(clippy::too_many_arguments)]
pub fn planted_mixed_pairs<R: Rng + ?Sized>(
    dict: &Dictionary,
    mix: &[f64],
    bias: &[f64],
    count: usize,
    height: usize,
    width: usize,
    density: f64,
    nonnegative: bool,
    rng: &mut R,
) -> Result<Vec<PlantedPair>> {
    (0..count)
        .map(|_| {
            let s_vis = sparse_coefficients(dict.atoms(), height, width, density, nonnegative, rng);
            let s_ir = mix_coefficients(&s_vis, mix, bias);
            Ok(PlantedPair {
                vis: reconstruct(dict, &s_vis)?,
                ir: reconstruct(dict, &s_ir)?,
                s_vis,
                s_ir,
            })
        })
        .collect()
}

/// Shape of a planted two-modality scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneSpec {
    pub atoms: usize,
    pub kernel: usize,
    pub height: usize,
    pub width: usize,
    pub pairs: usize,
    pub density: f64,
    /// scale applied to the visible codes
    pub amplitude: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            atoms: 4,
            kernel: 5,
            height: 32,
            width: 32,
            pairs: 8,
            density: 0.05,
            amplitude: 0.35,
        }
    }
}

/// Nonnegative dictionary, nonnegative visible codes and a nonnegative
/// atom-mixing map producing the infrared codes, so every image is
/// nonnegative and brighter codes mean brighter pixels.
#[derive(Clone, Debug)]
pub struct PlantedScene {
    pub dict: Dictionary,
    pub mix: Vec<f64>,
    pub bias: Vec<f64>,
    pub pairs: Vec<PlantedPair>,
}

pub fn planted_scene<R: Rng + ?Sized>(spec: &SceneSpec, rng: &mut R) -> Result<PlantedScene> {
    let k = spec.atoms;
    let dict = nonnegative_dictionary(k, spec.kernel, rng)?;
    let mut mix = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            mix[i * k + j] = if i == j {
                rng.random_range(0.3..1.8)
            } else {
                0.1 * rng.random::<f64>()
            };
        }
    }
    let bias = vec![0.0; k];
    let pairs = (0..spec.pairs)
        .map(|_| {
            let s_vis = sparse_coefficients(k, spec.height, spec.width, spec.density, true, rng)
                .map(|v| v * spec.amplitude);
            let s_ir = mix_coefficients(&s_vis, &mix, &bias);
            Ok(PlantedPair {
                vis: reconstruct(&dict, &s_vis)?,
                ir: reconstruct(&dict, &s_ir)?,
                s_vis,
                s_ir,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PlantedScene {
        dict,
        mix,
        bias,
        pairs,
    })
}

/// `10·log10(1/MSE)` for [0,1]-scaled images.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}
