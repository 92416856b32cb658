//! Per-atom affine recalibration of coefficients and the providers that
//! supply its parameters.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{read_records, write_records, CoeffMap, RawTensor, TensorKind};
use crate::vgii::transfer::{mix_pseudo_inverse, solve_vector, TransferOp};

#[derive(Clone, Debug, PartialEq)]
pub struct FilmParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl FilmParams {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.len() != beta.len() || gamma.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "film gamma has {} entries, beta {}",
                gamma.len(),
                beta.len()
            )));
        }
        if gamma.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("film parameters"));
        }
        Ok(FilmParams { gamma, beta })
    }

    pub fn identity(atoms: usize) -> Self {
        FilmParams {
            gamma: vec![1.0; atoms],
            beta: vec![0.0; atoms],
        }
    }

    pub fn atoms(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_identity(&self) -> bool {
        self.gamma.iter().all(|&g| g == 1.0) && self.beta.iter().all(|&b| b == 0.0)
    }

    /// Stored as one tag-1 record with dims `[2, K]`: gamma row, beta row.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let k = crate::grid::dim_u32(self.atoms())?;
        let mut values = self.gamma.clone();
        values.extend_from_slice(&self.beta);
        write_records(
            path,
            &[RawTensor::new(TensorKind::Image, vec![2, k], &values)?],
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let records = read_records(path)?;
        let raw = &records[0];
        raw.expect(TensorKind::Image, 2)?;
        if raw.dim(0) != 2 {
            return Err(Error::DimensionMismatch(format!(
                "film record must have dims [2, K], got {:?}",
                raw.dims
            )));
        }
        let k = raw.dim(1);
        let v = raw.values_f64();
        FilmParams::new(v[..k].to_vec(), v[k..].to_vec())
    }
}

/// Channel `k` becomes `γ_k · s_k + β_k`.
pub fn film_modulate(s: &CoeffMap, fp: &FilmParams) -> Result<CoeffMap> {
    if s.atoms() != fp.atoms() {
        return Err(Error::DimensionMismatch(format!(
            "film over {} atoms applied to {} atoms",
            fp.atoms(),
            s.atoms()
        )));
    }
    if fp.is_identity() {
        return Ok(s.clone());
    }
    let mut out = s.clone();
    for k in 0..s.atoms() {
        let (g, b) = (fp.gamma[k], fp.beta[k]);
        out.plane_mut(k).iter_mut().for_each(|v| *v = g * *v + b);
    }
    Ok(out)
}

/// Fits per-atom `(γ_k, β_k)` so that transferring the modulated visible
/// coefficients best explains the infrared ones.
///
/// The infrared vectors are pulled back through the transfer,
/// `t = M⁺(s_ir − b)`, and each atom gets an independent scalar
/// least-squares fit of `γ_k s_vis,k + β_k ≈ t_k`. Channels whose visible
/// coefficients have no variance keep `γ = 1` and absorb the mean offset
/// into `β`.
pub fn calibrate_film(pairs: &[(CoeffMap, CoeffMap)], op: &TransferOp) -> Result<FilmParams> {
    let (first, _) = pairs.first().ok_or(Error::EmptyTrainingSet)?;
    let k = op.atoms();
    if first.atoms() != k {
        return Err(Error::DimensionMismatch(format!(
            "transfer over {k} atoms, coefficients have {}",
            first.atoms()
        )));
    }
    let pinv = mix_pseudo_inverse(op).ok_or(Error::FilmCalibration { atom: 0 })?;

    // running sums per atom: n, Σx, Σt, Σxx, Σxt
    let mut sx = vec![0.0; k];
    let mut st = vec![0.0; k];
    let mut sxx = vec![0.0; k];
    let mut sxt = vec![0.0; k];
    let mut count = 0usize;
    let mut shifted = vec![0.0; k];
    for (vis, ir) in pairs {
        vis.check_same_dims(ir, "film calibration pair")?;
        if vis.atoms() != k {
            return Err(Error::DimensionMismatch(format!(
                "transfer over {k} atoms, coefficients have {}",
                vis.atoms()
            )));
        }
        let n = vis.plane_len();
        for p in 0..n {
            for (i, v) in shifted.iter_mut().enumerate() {
                *v = ir.data()[i * n + p] - op.bias()[i];
            }
            let t = solve_vector(&pinv, &shifted);
            for i in 0..k {
                let x = vis.data()[i * n + p];
                sx[i] += x;
                st[i] += t[i];
                sxx[i] += x * x;
                sxt[i] += x * t[i];
            }
            count += 1;
        }
    }

    let n = count as f64;
    let mut gamma = vec![1.0; k];
    let mut beta = vec![0.0; k];
    for i in 0..k {
        let (mx, mt) = (sx[i] / n, st[i] / n);
        let var = sxx[i] / n - mx * mx;
        let cov = sxt[i] / n - mx * mt;
        let scale = (sxx[i] / n).max(1e-300);
        if var <= 1e-12 * scale {
            gamma[i] = 1.0;
            beta[i] = mt - mx;
        } else {
            gamma[i] = cov / var;
            beta[i] = mt - gamma[i] * mx;
        }
        if !gamma[i].is_finite() || !beta[i].is_finite() {
            return Err(Error::FilmCalibration { atom: i });
        }
    }
    FilmParams::new(gamma, beta)
}

/// Affine map `features ↦ W f + c` producing one value per atom.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub weights: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    fn apply(&self, features: &[f64]) -> Vec<f64> {
        let f = features.len();
        self.offset
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c + self.weights[i * f..(i + 1) * f]
                    .iter()
                    .zip(features)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
            })
            .collect()
    }

    fn to_raw(&self, features: usize) -> Result<RawTensor> {
        let k = self.offset.len();
        let mut values = Vec::with_capacity(k * (features + 1));
        for i in 0..k {
            values.extend_from_slice(&self.weights[i * features..(i + 1) * features]);
            values.push(self.offset[i]);
        }
        RawTensor::new(
            TensorKind::Image,
            vec![
                crate::grid::dim_u32(k)?,
                crate::grid::dim_u32(features + 1)?,
            ],
            &values,
        )
    }

    fn from_raw(raw: &RawTensor, features: usize) -> Result<Self> {
        raw.expect(TensorKind::Image, 2)?;
        if raw.dim(1) != features + 1 {
            return Err(Error::DimensionMismatch(format!(
                "affine map needs {} columns for {features} features, got {}",
                features + 1,
                raw.dim(1)
            )));
        }
        let v = raw.values_f64();
        let mut weights = Vec::with_capacity(raw.dim(0) * features);
        let mut offset = Vec::with_capacity(raw.dim(0));
        for row in v.chunks_exact(features + 1) {
            weights.extend_from_slice(&row[..features]);
            offset.push(row[features]);
        }
        Ok(AffineMap { weights, offset })
    }
}

/// External feature vector with its two affine heads.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureProvider {
    pub features: Vec<f64>,
    pub gamma_map: AffineMap,
    pub beta_map: AffineMap,
}

impl FeatureProvider {
    /// Three tag-1 records: features `[1, F]`, then the gamma and beta maps
    /// as `[K, F+1]` grids whose rows are `F` weights followed by the offset.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = self.features.len();
        write_records(
            path,
            &[
                RawTensor::new(
                    TensorKind::Image,
                    vec![1, crate::grid::dim_u32(f)?],
                    &self.features,
                )?,
                self.gamma_map.to_raw(f)?,
                self.beta_map.to_raw(f)?,
            ],
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let records = read_records(path)?;
        let [feat, g, b] = records.as_slice() else {
            return Err(Error::MalformedHeader {
                offset: 0,
                reason: format!("provider file needs 3 records, found {}", records.len()),
            });
        };
        feat.expect(TensorKind::Image, 2)?;
        let features = feat.values_f64();
        Ok(FeatureProvider {
            gamma_map: AffineMap::from_raw(g, features.len())?,
            beta_map: AffineMap::from_raw(b, features.len())?,
            features,
        })
    }
}

/// Source of the FiLM parameters used at inference.
#[derive(Clone, Debug, PartialEq)]
pub enum SemanticProvider {
    /// `γ ≡ 1`, `β ≡ 0`
    Identity,
    /// Parameters fitted by [`calibrate_film`].
    Calibrated(FilmParams),
    /// Parameters computed from an external feature vector.
    File(FeatureProvider),
}

impl SemanticProvider {
    pub fn film_params(&self, atoms: usize) -> Result<FilmParams> {
        let fp = match self {
            SemanticProvider::Identity => FilmParams::identity(atoms),
            SemanticProvider::Calibrated(fp) => fp.clone(),
            SemanticProvider::File(p) => FilmParams::new(
                p.gamma_map.apply(&p.features),
                p.beta_map.apply(&p.features),
            )?,
        };
        if fp.atoms() != atoms {
            return Err(Error::DimensionMismatch(format!(
                "provider yields {} atoms, dictionary has {atoms}",
                fp.atoms()
            )));
        }
        Ok(fp)
    }
}
