//! Linear atom-mixing transfer from visible to infrared coefficients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{CoeffMap, RawTensor, TensorKind, TensorRecord};

/// Per-pixel affine map `s ↦ M s + b` over the atom axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferOp {
    atoms: usize,
    /// row-major `atoms`×`atoms`
    mix: Vec<f64>,
    bias: Vec<f64>,
    ridge: f64,
}

impl TransferOp {
    pub fn new(atoms: usize, mix: Vec<f64>, bias: Vec<f64>, ridge: f64) -> Result<Self> {
        if atoms == 0 {
            return Err(Error::InvalidParameter(
                "transfer needs at least one atom".into(),
            ));
        }
        if mix.len() != atoms * atoms || bias.len() != atoms {
            return Err(Error::DimensionMismatch(format!(
                "transfer over {atoms} atoms needs {} mix and {atoms} bias values, got {} and {}",
                atoms * atoms,
                mix.len(),
                bias.len()
            )));
        }
        if mix.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transfer operator"));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ridge must be nonnegative, got {ridge}"
            )));
        }
        Ok(TransferOp {
            atoms,
            mix,
            bias,
            ridge,
        })
    }

    pub fn identity(atoms: usize) -> Self {
        let mut mix = vec![0.0; atoms * atoms];
        for i in 0..atoms {
            mix[i * atoms + i] = 1.0;
        }
        TransferOp {
            atoms,
            mix,
            bias: vec![0.0; atoms],
            ridge: 0.0,
        }
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn mix(&self) -> &[f64] {
        &self.mix
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn mix_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.atoms, self.atoms, &self.mix)
    }
}

impl TensorRecord for TransferOp {
    /// dims `[K, K+1]`: mix rows, then bias, then the ridge as one trailing
    /// value.
    fn to_raw(&self) -> Result<RawTensor> {
        let k = crate::grid::dim_u32(self.atoms)?;
        let mut values = Vec::with_capacity(self.atoms * (self.atoms + 1) + 1);
        values.extend_from_slice(&self.mix);
        values.extend_from_slice(&self.bias);
        values.push(self.ridge);
        RawTensor::new(TensorKind::TransferOp, vec![k, k + 1], &values)
    }

    fn from_raw(raw: &RawTensor) -> Result<Self> {
        raw.expect(TensorKind::TransferOp, 2)?;
        let k = raw.dim(0);
        if raw.dim(1) != k + 1 {
            return Err(Error::DimensionMismatch(format!(
                "transfer dims must be [K, K+1], got {:?}",
                raw.dims
            )));
        }
        let v = raw.values_f64();
        TransferOp::new(
            k,
            v[..k * k].to_vec(),
            v[k * k..k * k + k].to_vec(),
            v[k * k + k],
        )
    }
}

/// Out-of-place `M s + b` at every pixel.
pub fn apply_transfer(op: &TransferOp, s: &CoeffMap) -> Result<CoeffMap> {
    let k = op.atoms;
    if s.atoms() != k {
        return Err(Error::DimensionMismatch(format!(
            "transfer over {k} atoms applied to {} atoms",
            s.atoms()
        )));
    }
    let n = s.plane_len();
    let mut out = vec![0.0; k * n];
    for (i, row) in out.chunks_exact_mut(n).enumerate() {
        row.iter_mut().for_each(|v| *v = op.bias[i]);
        for (j, plane) in s.planes().enumerate() {
            let m = op.mix[i * k + j];
            if m != 0.0 {
                for (o, x) in row.iter_mut().zip(plane) {
                    *o += m * x;
                }
            }
        }
    }
    CoeffMap::new(k, s.height(), s.width(), out)
}

fn check_coeff_pairs(pairs: &[(CoeffMap, CoeffMap)]) -> Result<usize> {
    let (first, _) = pairs.first().ok_or(Error::EmptyTrainingSet)?;
    let k = first.atoms();
    for (vis, ir) in pairs {
        vis.check_same_dims(ir, "transfer pair")?;
        if vis.atoms() != k {
            return Err(Error::DimensionMismatch(format!(
                "transfer pairs mix {k} and {} atoms",
                vis.atoms()
            )));
        }
    }
    Ok(k)
}

/// Ridge regression of infrared on visible coefficient vectors pooled over
/// every pixel of every pair; the intercept is not penalized.
pub fn fit_transfer(pairs: &[(CoeffMap, CoeffMap)], ridge: f64) -> Result<TransferOp> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    let k = check_coeff_pairs(pairs)?;
    let samples: usize = pairs.iter().map(|(v, _)| v.plane_len()).sum();
    if samples < k + 1 {
        return Err(Error::InvalidParameter(format!(
            "need at least {} pixels to fit {k} atoms, got {samples}",
            k + 1
        )));
    }

    // augmented design x̃ = [s_vis; 1]
    let dim = k + 1;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut cross = DMatrix::<f64>::zeros(dim, k);
    let mut x = vec![0.0; dim];
    x[k] = 1.0;
    for (vis, ir) in pairs {
        let n = vis.plane_len();
        for p in 0..n {
            for (j, v) in x[..k].iter_mut().enumerate() {
                *v = vis.data()[j * n + p];
            }
            for a in 0..dim {
                let xa = x[a];
                if xa == 0.0 {
                    continue;
                }
                for b in a..dim {
                    gram[(a, b)] += xa * x[b];
                }
                for i in 0..k {
                    cross[(a, i)] += xa * ir.data()[i * n + p];
                }
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    for j in 0..k {
        gram[(j, j)] += ridge;
    }

    let chol = gram.cholesky().ok_or(Error::SingularNormalMatrix)?;
    // Wᵀ = G⁻¹ C, W = [M | b]
    let wt = chol.solve(&cross);
    if wt.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularNormalMatrix);
    }
    let mut mix = vec![0.0; k * k];
    let mut bias = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            mix[i * k + j] = wt[(j, i)];
        }
        bias[i] = wt[(k, i)];
    }
    TransferOp::new(k, mix, bias, ridge)
}

/// `Σ_pixels ‖s_ir − M s_vis − b‖² + ρ‖M‖²_F`
pub fn transfer_objective(
    pairs: &[(CoeffMap, CoeffMap)],
    mix: &[f64],
    bias: &[f64],
    ridge: f64,
) -> Result<f64> {
    let k = check_coeff_pairs(pairs)?;
    let op = TransferOp::new(k, mix.to_vec(), bias.to_vec(), ridge)?;
    let mut total = 0.0;
    for (vis, ir) in pairs {
        let pred = apply_transfer(&op, vis)?;
        total += pred
            .data()
            .iter()
            .zip(ir.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total + ridge * mix.iter().map(|m| m * m).sum::<f64>())
}

/// Moore–Penrose pseudo-inverse of the mixing matrix.
pub(crate) fn mix_pseudo_inverse(op: &TransferOp) -> Option<DMatrix<f64>> {
    let m = op.mix_matrix();
    let tol = 1e-12 * m.norm().max(1.0);
    m.pseudo_inverse(tol).ok()
}

pub(crate) fn solve_vector(m: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    m * DVector::from_column_slice(v)
}
