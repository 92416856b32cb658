use crate::error::{Error, Result};

/// Per-stage weights of the split objective.
///
/// `mu*` couple the auxiliary variables in the data-consistency solves,
/// `beta*` weight the proximal steps and `lambda*` weight the priors
/// (index 1 = visible coefficients, 2 = infrared coefficients,
/// 3 = dictionary).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageParams {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for StageParams {
    fn default() -> Self {
        StageParams {
            mu1: 0.05,
            mu2: 0.05,
            mu3: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            beta3: 1.0,
            lambda1: 1e-4,
            lambda2: 1e-4,
            lambda3: 0.0,
        }
    }
}

impl StageParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Stage-wise parameter schedule: the coupling and proximal weights of
/// stage `n` are the base values times `growth^n`; priors stay fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSchedule {
    pub base: StageParams,
    pub growth: f64,
}

impl Default for StageSchedule {
    fn default() -> Self {
        StageSchedule::constant(StageParams::default())
    }
}

impl StageSchedule {
    pub fn constant(base: StageParams) -> Self {
        StageSchedule { base, growth: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.growth > 0.0 && self.growth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "schedule growth must be positive, got {}",
                self.growth
            )));
        }
        Ok(())
    }

    pub fn at(&self, stage: usize) -> StageParams {
        if self.growth == 1.0 {
            return self.base;
        }
        let g = self.growth.powi(stage.min(i32::MAX as usize) as i32);
        let b = self.base;
        StageParams {
            mu1: b.mu1 * g,
            mu2: b.mu2 * g,
            mu3: b.mu3 * g,
            beta1: b.beta1 * g,
            beta2: b.beta2 * g,
            beta3: b.beta3 * g,
            ..b
        }
    }
}
