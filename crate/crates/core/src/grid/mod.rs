mod format;
mod pgm;
mod types;

pub(crate) use format::dim_u32;
pub use format::{
    decode_records, deserialize_tensor, read_records, serialize_tensor, write_records, RawTensor,
    TensorKind, TensorRecord,
};
pub use pgm::{decode_pgm, encode_pgm, quantize, read_image, write_image};
pub use types::{CoeffMap, Dictionary, Image};
