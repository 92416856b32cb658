mod coeff;
mod dict;
mod fft;
mod linalg;
mod params;
mod prox;

pub use coeff::{
    coeff_dc_objective, reconstruct, reconstruct_cached, solve_coeff_dc, solve_coeff_dc_cached,
    solve_coeff_dc_cholesky, SpectrumCache,
};
pub use dict::{pad_dictionary, solve_dict_dc, DictNormalEquations};
pub use fft::Fft2d;
pub use params::{StageParams, StageSchedule};
pub use prox::{prox_coeff, prox_dict, soft_threshold};
