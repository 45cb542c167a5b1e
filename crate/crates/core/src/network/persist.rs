//! Weight file layout (all integers and floats little-endian):
//!
//! ```text
//! magic       10 bytes  "DEMASQ-EBM"
//! version     u32
//! seed        u64
//! dim_count   u32
//! dims        dim_count x u64
//! layers      per layer: weights (out x in, row-major f64), bias (out x f64)
//! step_count  u64
//! adam        learning_rate, beta1, beta2, epsilon (f64)
//! moments     first moments then second moments, laid out like `layers`
//! ```
//!
//! The file must end exactly after the last moment.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{next_revision, Dense, ModelParameters, OptimizerState};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 10] = b"DEMASQ-EBM";
pub const FORMAT_VERSION: u32 = 1;

const MAX_LAYERS: u32 = 64;

pub fn save(
    params: &ModelParameters,
    state: &OptimizerState,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, encode(params, state))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(ModelParameters, OptimizerState)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|message| Error::Persistence {
        path: path.to_path_buf(),
        message,
    })
}

pub(crate) fn encode(params: &ModelParameters, state: &OptimizerState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&params.seed.to_le_bytes());
    out.extend_from_slice(&(params.layer_dims.len() as u32).to_le_bytes());
    for &d in &params.layer_dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    write_layers(&mut out, &params.layers);
    out.extend_from_slice(&state.step_count.to_le_bytes());
    for v in [state.learning_rate, state.beta1, state.beta2, state.epsilon] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_layers(&mut out, &state.first_moments);
    write_layers(&mut out, &state.second_moments);
    out
}

fn write_layers(out: &mut Vec<u8>, layers: &[Dense]) {
    for layer in layers {
        // iter() walks logical order, which is row-major for any layout
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(format!(
                "truncated while reading {what} at byte {} of {}",
                self.pos,
                self.bytes.len()
            )),
        }
    }

    fn u32(&mut self, what: &str) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn layers(&mut self, dims: &[usize], what: &str) -> std::result::Result<Vec<Dense>, String> {
        dims.windows(2)
            .map(|pair| {
                let (inputs, outputs) = (pair[0], pair[1]);
                let weights = (0..inputs * outputs)
                    .map(|_| self.f64(what))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let bias = (0..outputs)
                    .map(|_| self.f64(what))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(Dense {
                    weights: Array2::from_shape_vec((outputs, inputs), weights)
                        .map_err(|e| e.to_string())?,
                    bias: Array1::from(bias),
                })
            })
            .collect()
    }
}

pub(crate) fn decode(
    bytes: &[u8],
) -> std::result::Result<(ModelParameters, OptimizerState), String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err("not a DEMASQ-EBM weight file (bad magic)".into());
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(format!(
            "unsupported format version {version}, this build reads version {FORMAT_VERSION}"
        ));
    }
    let seed = r.u64("seed")?;
    let dim_count = r.u32("dimension count")?;
    if !(2..=MAX_LAYERS).contains(&dim_count) {
        return Err(format!("implausible dimension count {dim_count}"));
    }
    let dims = (0..dim_count)
        .map(|_| r.u64("dimension table").map(|d| d as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if dims.contains(&0) || dims[dims.len() - 1] != 1 {
        return Err(format!("invalid dimension table {dims:?}"));
    }
    let payload: usize = dims.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
    // weights + two moment sets, checked before allocating anything large
    let needed = payload
        .checked_mul(3 * 8)
        .and_then(|n| n.checked_add(8 + 4 * 8))
        .ok_or("dimension table overflows")?;
    if bytes.len() - r.pos != needed {
        return Err(format!(
            "expected {needed} payload bytes for dims {dims:?}, found {}",
            bytes.len() - r.pos
        ));
    }
    let layers = r.layers(&dims, "weights")?;
    let step_count = r.u64("step count")?;
    let learning_rate = r.f64("learning rate")?;
    let beta1 = r.f64("beta1")?;
    let beta2 = r.f64("beta2")?;
    let epsilon = r.f64("epsilon")?;
    let first_moments = r.layers(&dims, "first moments")?;
    let second_moments = r.layers(&dims, "second moments")?;
    if layers
        .iter()
        .flat_map(Dense::values)
        .any(|v| !v.is_finite())
    {
        return Err("non-finite weight".into());
    }
    let params = ModelParameters {
        layer_dims: dims,
        layers,
        seed,
        revision: next_revision(),
    };
    let state = OptimizerState {
        first_moments,
        second_moments,
        step_count,
        learning_rate,
        beta1,
        beta2,
        epsilon,
    };
    Ok((params, state))
}
