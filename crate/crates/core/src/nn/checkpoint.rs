//! Binary network checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        4 bytes   b"MLPK"
//! version      u16       1
//! n_layers     u32
//! merge_layer  u32       u32::MAX when there is no merge
//! merge_width  u32       0 when there is no merge
//! per layer:
//!   inputs     u32
//!   outputs    u32
//!   act_mode   u8        0 = uniform, 1 = per unit
//!   act codes  u8 × (1 or outputs)   0 relu, 1 tanh, 2 sigmoid, 3 linear
//! per layer, in order:
//!   weights    f64 × outputs·inputs  row-major
//!   bias       f64 × outputs
//! ```
//!
//! Decoding rejects trailing bytes, truncated input, unknown codes,
//! inconsistent shapes and non-finite parameters.

use std::path::Path;

use super::{Activation, Activations, Layer, Matrix, Merge, Mlp, NnError};

pub const MAGIC: &[u8; 4] = b"MLPK";
pub const VERSION: u16 = 1;

const NO_MERGE: u32 = u32::MAX;

pub fn encode(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + net.num_params() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    let (ml, mw) = net
        .merge()
        .map_or((NO_MERGE, 0), |m| (m.layer as u32, m.width as u32));
    out.extend_from_slice(&ml.to_le_bytes());
    out.extend_from_slice(&mw.to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
        match &layer.activation {
            Activations::Uniform(a) => {
                out.push(0);
                out.push(a.code());
            }
            Activations::PerUnit(v) => {
                out.push(1);
                out.extend(v.iter().map(|a| a.code()));
            }
        }
    }
    for block in net.param_slices() {
        for x in block {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| NnError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NnError> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| NnError::Checkpoint("parameter count overflows".into()))?,
        )?;
        let v: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(NnError::Checkpoint("non-finite parameter".into()));
        }
        Ok(v)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn activation(code: u8) -> Result<Activation, NnError> {
    Activation::from_code(code).ok_or_else(|| NnError::Checkpoint(format!("unknown activation code {code}")))
}

pub fn decode(bytes: &[u8]) -> Result<Mlp, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 {
        return Err(NnError::Checkpoint("no layers".into()));
    }
    // each layer header takes at least 10 bytes
    if n_layers > r.remaining() / 10 {
        return Err(NnError::Checkpoint(format!("{n_layers} layers cannot fit in the file")));
    }
    let merge_layer = r.u32()?;
    let merge_width = r.u32()?;
    let merge = if merge_layer == NO_MERGE {
        None
    } else {
        Some(Merge {
            layer: merge_layer as usize,
            width: merge_width as usize,
        })
    };

    let mut headers = Vec::with_capacity(n_layers);
    let mut total_params: usize = 0;
    for _ in 0..n_layers {
        let inputs = r.u32()? as usize;
        let outputs = r.u32()? as usize;
        if inputs == 0 || outputs == 0 {
            return Err(NnError::Checkpoint("zero-width layer".into()));
        }
        let act = match r.u8()? {
            0 => Activations::Uniform(activation(r.u8()?)?),
            1 => {
                let codes = r.take(outputs)?;
                Activations::PerUnit(codes.iter().map(|&c| activation(c)).collect::<Result<_, _>>()?)
            }
            m => return Err(NnError::Checkpoint(format!("unknown activation mode {m}"))),
        };
        let count = outputs
            .checked_mul(inputs)
            .and_then(|w| w.checked_add(outputs))
            .ok_or_else(|| NnError::Checkpoint("layer size overflows".into()))?;
        total_params = total_params
            .checked_add(count)
            .ok_or_else(|| NnError::Checkpoint("parameter count overflows".into()))?;
        headers.push((inputs, outputs, act));
    }
    if total_params.checked_mul(8) != Some(r.remaining()) {
        return Err(NnError::Checkpoint(format!(
            "expected {total_params} parameters, found {} bytes",
            r.remaining()
        )));
    }

    let mut layers = Vec::with_capacity(n_layers);
    for (inputs, outputs, act) in headers {
        let w = Matrix::from_vec(outputs, inputs, r.f64s(outputs * inputs)?)?;
        let b = r.f64s(outputs)?;
        layers.push(Layer::new(w, b, act)?);
    }
    Mlp::from_layers(layers, merge).map_err(|e| NnError::Checkpoint(e.to_string()))
}

pub fn save(net: &Mlp, path: impl AsRef<Path>) -> Result<(), NnError> {
    std::fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Mlp, NnError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpShape;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn critic_like(seed: u64) -> Mlp {
        let shape = MlpShape::new(5, &[7, 6], Activation::Relu, 1, Activation::Linear).with_merge(1, 2);
        Mlp::init(&shape, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn header_layout() {
        let net = critic_like(1);
        let bytes = encode(&net);
        assert_eq!(&bytes[..4], b"MLPK");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[14..18].try_into().unwrap()), 2);
        // 3 uniform layer headers of 10 bytes each
        assert_eq!(bytes.len(), 18 + 30 + net.num_params() * 8);
    }

    #[test]
    fn per_unit_head_round_trips() {
        let shape = MlpShape::new(
            4,
            &[3],
            Activation::Relu,
            2,
            Activations::PerUnit(vec![Activation::Sigmoid, Activation::Tanh]),
        );
        let net = Mlp::init(&shape, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(decode(&encode(&net)).unwrap(), net);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = encode(&critic_like(3));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode(&nan).is_err());
        // absurd layer size must not allocate
        let mut huge = bytes;
        huge[18..22].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(seed in any::<u64>()) {
            let net = critic_like(seed);
            let back = decode(&encode(&net)).unwrap();
            prop_assert_eq!(back.flat_params(), net.flat_params());
            prop_assert_eq!(back, net);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode(&bytes);
        }
    }
}
